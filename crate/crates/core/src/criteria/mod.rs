//! Sampled verifiers for the uniqueness criteria.
//!
//! Every checker evaluates its hypotheses on finite grids and reports, per
//! hypothesis, the worst margin `rhs - lhs` (negative means violated) and a
//! witness point. Witnesses carry the violated inequality as expression
//! text, so [`recheck_witness`] can re-evaluate them without going through
//! the checker loops again.
//!
//! The checks are necessary-condition filters: a sampled grid can miss a
//! violation, but a reported violation is a concrete counterexample.

mod config;
mod constantin;
mod equivalence;
mod lipschitz;
mod problem;
mod recheck;
pub(crate) mod report;
pub(crate) mod sample;
mod theorem;

pub use config::{CheckConfig, OmegaPolicy};
pub use constantin::{check_comparison_fn, check_constantin, reduce_to_constantin};
pub use equivalence::{equivalence_suite, EquivalenceReport, MarginDiscrepancy, MARGIN_AGREEMENT};
pub use lipschitz::{check_athanassov, check_nagumo};
pub use problem::{ProblemIssue, ProblemSources, ProblemSpec};
pub use recheck::{recheck_witness, Recheck};
pub use report::{CriterionReport, Hypothesis, Inequality, Witness};
pub use theorem::{check_theorem_main, theorem_h2_margins, H2Sample};


pub(crate) mod names {
    pub const NAGUMO: &str = "nagumo";
    pub const ATHANASSOV: &str = "athanassov";
    pub const CONSTANTIN: &str = "constantin";
    pub const COMPARISON: &str = "comparison";
    pub const THEOREM: &str = "theorem1";
    pub const RELAXED: &str = "relaxed-bound";

    pub const GAUGE: &str = "gauge";
    pub const LIPSCHITZ: &str = "lipschitz";
    pub const LIMIT: &str = "limit";
    pub const BOUND: &str = "bound";
    pub const H1: &str = "H1-integrability";
    pub const H2: &str = "H2-comparison";
    pub const H3: &str = "H3-bound";
    pub const H4: &str = "H4-limits";
    pub const H5: &str = "H5-domination";
}

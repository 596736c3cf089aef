use serde::{Deserialize, Serialize};

/// How `omega` is evaluated for arguments beyond the `|x| <= x_bound` box,
/// which the "for all eps > 0" comparison condition reaches for large eps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaPolicy {
    /// Use the formula beyond `x_bound`; where it cannot be evaluated there,
    /// clamp the argument to `x_bound` and record it in the report notes.
    #[default]
    Extend,
    /// Always clamp the argument to `x_bound`.
    Clamp,
    /// Skip `(eps, t)` pairs with `eps * v(t) > x_bound`.
    Restrict,
}

/// Sampling grids and slack for the criterion checkers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Number of points of the geometric t-grid on `[t_min_factor * T, T]`.
    pub t_points: usize,
    pub t_min_factor: f64,
    /// Number of points of the uniform x-grid on `[-x_bound, x_bound]`.
    pub x_points: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_points: usize,
    /// Limit sequence `t_k = T 2^-k`, `k = 1..=limit_steps`.
    pub limit_steps: usize,
    /// Final sup of a uniform-limit proxy must not exceed this.
    pub limit_threshold: f64,
    /// Gauges must drop to at most this value along the limit sequence.
    pub gauge_zero_threshold: f64,
    /// Absolute slack for inequality checks (scaled by eps for the
    /// comparison condition through normalization).
    pub tol: f64,
    pub omega_policy: OmegaPolicy,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            t_points: 200,
            t_min_factor: 1e-6,
            x_points: 101,
            eps_min: 1e-6,
            eps_max: 1e6,
            eps_points: 25,
            limit_steps: 40,
            limit_threshold: 1e-6,
            gauge_zero_threshold: 1e-3,
            tol: 1e-9,
            omega_policy: OmegaPolicy::Extend,
        }
    }
}

/// Values below this are treated as underflowed when they appear as
/// denominators of a limit proxy or as a gauge that must stay positive.
pub(crate) const UNDERFLOW: f64 = 1e-250;

/// `k`-th of `n` fractions `k / (n - 1)`; nested grids share exact values.
fn fraction(k: usize, n: usize) -> f64 {
    if n <= 1 {
        1.0
    } else {
        k as f64 / (n - 1) as f64
    }
}

impl CheckConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.t_points < 2 {
            issues.push("check.t_points: need at least 2 points".to_string());
        }
        if !(self.t_min_factor > 0.0 && self.t_min_factor < 1.0) {
            issues.push("check.t_min_factor: must lie in (0, 1)".to_string());
        }
        if self.x_points < 2 {
            issues.push("check.x_points: need at least 2 points".to_string());
        }
        if !(self.eps_min > 0.0 && self.eps_max >= self.eps_min) {
            issues.push("check.eps_min/eps_max: need 0 < eps_min <= eps_max".to_string());
        }
        if self.eps_points == 0 {
            issues.push("check.eps_points: grid must be non-empty".to_string());
        }
        if self.limit_steps < 4 {
            issues.push("check.limit_steps: need at least 4 steps".to_string());
        }
        if !(self.tol >= 0.0) {
            issues.push("check.tol: must be non-negative".to_string());
        }
        issues
    }

    /// Geometric grid toward 0, ascending.
    pub fn t_grid(&self, t_end: f64) -> Vec<f64> {
        (0..self.t_points)
            .map(|k| t_end * self.t_min_factor.powf(1.0 - fraction(k, self.t_points)))
            .collect()
    }

    /// Uniform grid on `[-x_bound, x_bound]`, ascending.
    pub fn x_grid(&self, x_bound: f64) -> Vec<f64> {
        (0..self.x_points)
            .map(|k| x_bound * (2.0 * fraction(k, self.x_points) - 1.0))
            .collect()
    }

    /// Log-spaced eps grid, ascending.
    pub fn eps_grid(&self) -> Vec<f64> {
        if self.eps_points == 1 {
            return vec![self.eps_min];
        }
        let ratio = self.eps_max / self.eps_min;
        (0..self.eps_points)
            .map(|k| self.eps_min * ratio.powf(fraction(k, self.eps_points)))
            .collect()
    }

    /// `t_k = T 2^-k` for `k = 1..=limit_steps`, decreasing.
    pub fn limit_sequence(&self, t_end: f64) -> Vec<f64> {
        (1..=self.limit_steps)
            .map(|k| t_end * 0.5f64.powi(k as i32))
            .collect()
    }

    /// Same layout with (about) twice the density; every original grid
    /// point is kept.
    pub fn refined(&self) -> CheckConfig {
        CheckConfig {
            t_points: 2 * self.t_points - 1,
            x_points: 2 * self.x_points - 1,
            ..self.clone()
        }
    }

    /// Tolerance used for quadratures inside the checks.
    pub(crate) fn quad_tol(&self) -> f64 {
        (1e-2 * self.tol).max(1e-14)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids() {
        let c = CheckConfig::default();
        let t = c.t_grid(1.0);
        assert_eq!(t.len(), 200);
        assert!((t[0] - 1e-6).abs() < 1e-18);
        assert_eq!(t[199], 1.0);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        let x = c.x_grid(1.0);
        assert_eq!((x.len(), x[0], x[50], x[100]), (101, -1.0, 0.0, 1.0));
        let e = c.eps_grid();
        assert_eq!(e.len(), 25);
        assert!((e[0] - 1e-6).abs() < 1e-20 && (e[24] - 1e6).abs() < 1e-6);
        let l = c.limit_sequence(1.0);
        assert_eq!((l.len(), l[0]), (40, 0.5));
    }

    #[test]
    fn refinement_keeps_every_point() {
        let c = CheckConfig::default();
        let r = c.refined();
        let (t, rt) = (c.t_grid(0.7), r.t_grid(0.7));
        assert!(t.iter().enumerate().all(|(i, v)| rt[2 * i] == *v));
        let (x, rx) = (c.x_grid(1.0), r.x_grid(1.0));
        assert!(x.iter().enumerate().all(|(i, v)| rx[2 * i] == *v));
    }

    #[test]
    fn validation_lists_every_problem() {
        let c = CheckConfig {
            t_points: 0,
            eps_points: 0,
            eps_min: -1.0,
            ..CheckConfig::default()
        };
        assert_eq!(c.validate().len(), 3);
    }
}

use super::{sample, QuadError, QuadOptions, QuadResult};

// 15-point Kronrod abscissae (positive half, descending) and weights; the
// 7-point Gauss nodes are the odd-indexed abscissae plus the centre.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub(crate) struct Panel {
    pub a: f64,
    pub b: f64,
    pub value: f64,
    pub error: f64,
}

/// One 7/15-point Gauss-Kronrod evaluation with the QUADPACK error scaling.
pub(crate) fn gk15<G, E>(g: &G, a: f64, b: f64) -> Result<Panel, QuadError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = sample(g, center)?;
    let mut kronrod = f_center * WGK[7];
    let mut gauss = f_center * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut f_lo = [0.0; 7];
    let mut f_hi = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let lo = sample(g, center - dx)?;
        let hi = sample(g, center + dx)?;
        f_lo[j] = lo;
        f_hi[j] = hi;
        kronrod += WGK[j] * (lo + hi);
        abs_sum += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((f_lo[j] - mean).abs() + (f_hi[j] - mean).abs());
    }
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel {
        a,
        b,
        value: kronrod * half,
        error,
    })
}

/// Globally adaptive integration over `[a, b]` (largest-error bisection).
///
/// The target is `max(tol, rel_floor * |value|)`; pass `rel_floor = 0` for a
/// pure absolute tolerance.
pub(crate) fn adaptive<G, E>(
    g: &G,
    a: f64,
    b: f64,
    tol: f64,
    rel_floor: f64,
    budget: usize,
) -> Result<QuadResult, QuadError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    let first = gk15(g, a, b)?;
    let mut panels = vec![first];
    let mut used = 1;
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= tol.max(rel_floor * value.abs()) {
            return Ok(QuadResult {
                value,
                abs_error_estimate: error,
                converged: true,
                diverged: false,
                subdivisions: used,
            });
        }
        // Split the worst panel that can still be split; ties go to the
        // leftmost for determinism.
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let mid = 0.5 * (p.a + p.b);
                mid > p.a && mid < p.b
            })
            .fold(None::<(usize, &Panel)>, |best, (i, p)| match best {
                Some((_, q)) if q.error > p.error || (q.error == p.error && q.a < p.a) => best,
                _ => Some((i, p)),
            });
        let Some((index, _)) = worst else {
            return Ok(not_converged(value, error, used));
        };
        if used + 2 > budget {
            return Ok(not_converged(value, error, used));
        }
        let p = panels.swap_remove(index);
        let mid = 0.5 * (p.a + p.b);
        panels.push(gk15(g, p.a, mid)?);
        panels.push(gk15(g, mid, p.b)?);
        used += 2;
    }
}

fn not_converged(value: f64, error: f64, used: usize) -> QuadResult {
    QuadResult {
        value,
        abs_error_estimate: error,
        converged: false,
        diverged: false,
        subdivisions: used,
    }
}

/// Integrates `g` over the finite interval `[a, b]` to absolute tolerance `tol`.
///
/// A reversed interval (`a > b`) yields the negated integral.
pub fn integrate<G, E>(g: G, a: f64, b: f64, tol: f64) -> Result<QuadResult, QuadError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    integrate_with(g, a, b, tol, &QuadOptions::default())
}

pub fn integrate_with<G, E>(
    g: G,
    a: f64,
    b: f64,
    tol: f64,
    options: &QuadOptions,
) -> Result<QuadResult, QuadError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            converged: true,
            diverged: false,
            subdivisions: 0,
        });
    }
    if a > b {
        let mut r = adaptive(&g, b, a, tol, 0.0, options.max_subdivisions)?;
        r.value = -r.value;
        return Ok(r);
    }
    adaptive(&g, a, b, tol, 0.0, options.max_subdivisions)
}

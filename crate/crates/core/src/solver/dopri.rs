//! Dormand-Prince 5(4) with the standard continuous extension.

// Nodes c2..c6 (c7 = 1).
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Classical order of the propagated solution.
pub const ORDER: u32 = 5;

/// Where a right-hand side evaluation failed.
#[derive(Debug, Clone, PartialEq)]
pub(super) struct EvalFailure {
    pub t: f64,
    pub x: f64,
    pub message: String,
}

pub(super) struct Step {
    pub x_new: f64,
    /// Derivative at the new point (first stage of the next step).
    pub k7: f64,
    pub err: f64,
    pub dense: Dense,
}

impl Step {
    /// The step ending on `x = 0`, interpolating linearly.
    pub fn captured(self) -> Step {
        let d = self.dense;
        Step {
            x_new: 0.0,
            k7: 0.0,
            err: self.err,
            dense: Dense {
                t_old: d.t_old,
                h: d.h,
                r: [d.r[0], -d.r[0], 0.0, 0.0, 0.0],
            },
        }
    }
}

/// Interpolant on one accepted step.
#[derive(Debug, Clone, Copy)]
pub(super) struct Dense {
    t_old: f64,
    h: f64,
    r: [f64; 5],
}

impl Dense {
    pub fn eval(&self, t: f64) -> f64 {
        let th = (t - self.t_old) / self.h;
        let th1 = 1.0 - th;
        let r = &self.r;
        r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])))
    }
}

pub(super) fn eval<F>(rhs: &F, t: f64, x: f64) -> Result<f64, EvalFailure>
where
    F: Fn(f64, f64) -> Result<f64, String>,
{
    match rhs(t, x) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(EvalFailure {
            t,
            x,
            message: format!("non-finite derivative {v}"),
        }),
        Err(message) => Err(EvalFailure { t, x, message }),
    }
}

/// One trial step of size `h` from `(t, x)` with `k1 = x'(t)`.
pub(super) fn step<F>(rhs: &F, t: f64, x: f64, k1: f64, h: f64) -> Result<Step, EvalFailure>
where
    F: Fn(f64, f64) -> Result<f64, String>,
{
    let k2 = eval(rhs, t + C2 * h, x + h * A21 * k1)?;
    let k3 = eval(rhs, t + C3 * h, x + h * (A31 * k1 + A32 * k2))?;
    let k4 = eval(rhs, t + C4 * h, x + h * (A41 * k1 + A42 * k2 + A43 * k3))?;
    let k5 = eval(
        rhs,
        t + C5 * h,
        x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
    )?;
    let k6 = eval(
        rhs,
        t + h,
        x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
    )?;
    let x_new = x + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
    let k7 = eval(rhs, t + h, x_new)?;
    let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    let diff = x_new - x;
    let bspl = h * k1 - diff;
    let dense = Dense {
        t_old: t,
        h,
        r: [
            x,
            diff,
            bspl,
            diff - h * k7 - bspl,
            h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
        ],
    };
    Ok(Step {
        x_new,
        k7,
        err: err.abs(),
        dense,
    })
}

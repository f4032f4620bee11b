//! Periodic scalar profiles (contraction rates such as beta*(t), beta**(t)).

use serde::{Deserialize, Serialize};

use crate::rate::{Combination, SAMPLED_INFLATION};

/// A periodic real function that may take negative values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Profile {
    /// Closed-form combination of rate functions.
    Closed { combination: Combination },
    /// Node values on `values.len()` equally spaced points of one period,
    /// periodic linear interpolation.
    Sampled { period: f64, values: Vec<f64> },
}

impl Profile {
    pub fn closed(c: Combination) -> Self {
        Profile::Closed { combination: c }
    }

    /// Samples `f` on `n` nodes over `[0, period)`.
    pub fn sample(period: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|k| f(period * k as f64 / n as f64)).collect();
        Profile::Sampled { period, values }
    }

    /// Sampled profile lying below `f` everywhere.
    ///
    /// `f(t, left)` evaluates the function (or its left limit); `lipschitz`
    /// bounds its slope between the grid nodes, which must include every
    /// jump. On each cell the function is at least the smaller endpoint value
    /// minus `lipschitz * h / 2`; node values take the smaller of the two
    /// adjacent cell bounds so the interpolant stays below `f`.
    pub fn lower_bound(period: f64, n: usize, lipschitz: f64, f: impl Fn(f64, bool) -> f64 + Sync) -> Self {
        use rayon::prelude::*;
        let h = period / n as f64;
        let cells: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                let t0 = k as f64 * h;
                let t1 = (k + 1) as f64 * h;
                f(t0, false).min(f(t1, true)) - 0.5 * lipschitz * h
            })
            .collect();
        let values = (0..n).map(|k| cells[k].min(cells[(k + n - 1) % n])).collect();
        Profile::Sampled { period, values }
    }

    pub fn period(&self) -> f64 {
        match self {
            Profile::Closed { combination } => combination.period(),
            Profile::Sampled { period, .. } => *period,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Closed { combination } => combination.value(t),
            Profile::Sampled { period, values } => {
                let n = values.len();
                let u = t.rem_euclid(*period) / period * n as f64;
                let k = (u.floor() as usize).min(n - 1);
                let frac = u - k as f64;
                values[k] * (1.0 - frac) + values[(k + 1) % n] * frac
            }
        }
    }

    /// `int_0^t f`.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            Profile::Closed { combination } => combination.antiderivative(t),
            Profile::Sampled { period, values } => {
                let n = values.len();
                let h = period / n as f64;
                let per: f64 = values.iter().sum::<f64>() * h;
                let cycles = (t / period).floor();
                let rem = t - cycles * period;
                let u = rem / h;
                let k = (u.floor() as usize).min(n - 1);
                let mut acc = 0.0;
                for j in 0..k {
                    acc += 0.5 * h * (values[j] + values[(j + 1) % n]);
                }
                let frac = u - k as f64;
                let v0 = values[k];
                let v1 = values[(k + 1) % n];
                acc += h * (v0 * frac + 0.5 * (v1 - v0) * frac * frac);
                cycles * per + acc
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Profile::Closed { combination } => combination.mean(),
            Profile::Sampled { values, .. } => values.iter().sum::<f64>() / values.len() as f64,
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Profile::Closed { combination } => combination.sup(4096),
            Profile::Sampled { values, .. } => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Profile::Closed { combination } => combination.inf(4096),
            Profile::Sampled { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// `max_{s <= t} int_s^t (mean - f)`: the log of the smallest envelope
    /// constant for decay rate `mean`. Exact for closed sinusoids and for
    /// sampled profiles; sampled on a fine grid otherwise.
    pub fn deficit_range(&self) -> f64 {
        match self {
            Profile::Closed { combination } if combination.is_closed() => {
                combination.period() * combination.amplitude() / std::f64::consts::PI
            }
            Profile::Closed { combination } => {
                let p = combination.period();
                let a = combination.mean();
                let n = 1 << 14;
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for k in 0..=n {
                    let t = p * k as f64 / n as f64;
                    let g = a * t - combination.antiderivative(t);
                    lo = lo.min(g);
                    hi = hi.max(g);
                }
                let r = hi - lo;
                r + SAMPLED_INFLATION * r.abs().max(1.0)
            }
            Profile::Sampled { period, values } => {
                let n = values.len();
                let h = period / n as f64;
                let a = self.mean();
                let mut g = 0.0;
                let (mut lo, mut hi) = (0.0f64, 0.0f64);
                for k in 0..n {
                    let v0 = values[k];
                    let v1 = values[(k + 1) % n];
                    // G(t_k + x h) = g + h (a x - v0 x - (v1 - v0) x^2 / 2)
                    let seg = |x: f64| g + h * ((a - v0) * x - 0.5 * (v1 - v0) * x * x);
                    if v1 != v0 {
                        let x = (a - v0) / (v1 - v0);
                        if x > 0.0 && x < 1.0 {
                            let gx = seg(x);
                            lo = lo.min(gx);
                            hi = hi.max(gx);
                        }
                    }
                    g = seg(1.0);
                    lo = lo.min(g);
                    hi = hi.max(g);
                }
                hi - lo
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Profile::Closed { combination } => combination.describe(),
            Profile::Sampled { values, .. } => format!("sampled on {} nodes", values.len()),
        }
    }
}

//! The closed algebra of transition-rate functions.
//!
//! Every intensity is a finite sum of terms `f(t) * s(n)`: a periodic time
//! profile `f` times a state factor `s`. All supported state factors are
//! nonincreasing beyond a known index, which is what makes infima over the
//! state index and series tails computable exactly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series;

/// Relative inflation applied to sampled suprema.
pub const SAMPLED_INFLATION: f64 = 1e-9;

const SNAP: f64 = 1e-9;

/// A nonnegative periodic (or constant) function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFunction {
    Constant {
        value: f64,
    },
    /// `mean + sin * sin(2 pi t / period) + cos * cos(2 pi t / period)`.
    Sinusoid {
        mean: f64,
        #[serde(default)]
        sin: f64,
        #[serde(default)]
        cos: f64,
        #[serde(default)]
        period: f64,
    },
    /// Equally spaced nodes over one period, periodic linear interpolation.
    Tabulated {
        values: Vec<f64>,
        #[serde(default)]
        period: f64,
    },
    /// Piecewise constant on `[k P / n, (k + 1) P / n)`.
    Piecewise {
        values: Vec<f64>,
        #[serde(default)]
        period: f64,
    },
}

impl RateFunction {
    pub fn constant(value: f64) -> Self {
        RateFunction::Constant { value }
    }

    pub fn sinusoid(mean: f64, sin: f64, cos: f64, period: f64) -> Self {
        RateFunction::Sinusoid {
            mean,
            sin,
            cos,
            period,
        }
    }

    /// Period of the function, `None` for constants.
    pub fn period(&self) -> Option<f64> {
        match self {
            RateFunction::Constant { .. } => None,
            RateFunction::Sinusoid { period, .. }
            | RateFunction::Tabulated { period, .. }
            | RateFunction::Piecewise { period, .. } => Some(*period),
        }
    }

    pub(crate) fn set_period_if_unset(&mut self, p: f64) {
        match self {
            RateFunction::Constant { .. } => {}
            RateFunction::Sinusoid { period, .. }
            | RateFunction::Tabulated { period, .. }
            | RateFunction::Piecewise { period, .. } => {
                if *period == 0.0 {
                    *period = p;
                }
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_sided(t, false)
    }

    /// Left limit at `t`; differs from [`value`](Self::value) only at the
    /// jumps of a piecewise-constant function.
    pub fn value_left(&self, t: f64) -> f64 {
        self.value_sided(t, true)
    }

    fn value_sided(&self, t: f64, left: bool) -> f64 {
        match self {
            RateFunction::Constant { value } => *value,
            RateFunction::Sinusoid {
                mean,
                sin,
                cos,
                period,
            } => {
                let w = 2.0 * PI * t / period;
                mean + sin * w.sin() + cos * w.cos()
            }
            RateFunction::Tabulated { values, period } => {
                let n = values.len();
                let u = t.rem_euclid(*period) / period * n as f64;
                let k = (u.floor() as usize).min(n - 1);
                let frac = u - k as f64;
                values[k] * (1.0 - frac) + values[(k + 1) % n] * frac
            }
            RateFunction::Piecewise { values, period } => {
                let n = values.len();
                let u = t.rem_euclid(*period) / period * n as f64;
                let r = u.round();
                let k = if (u - r).abs() < SNAP {
                    let k = r as i64;
                    if left {
                        k - 1
                    } else {
                        k
                    }
                } else {
                    u.floor() as i64
                };
                values[k.rem_euclid(n as i64) as usize]
            }
        }
    }

    /// `int_0^t f(u) du`, exact for every kind.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match self {
            RateFunction::Constant { value } => value * t,
            RateFunction::Sinusoid {
                mean,
                sin,
                cos,
                period,
            } => {
                let w = 2.0 * PI / period;
                mean * t + sin / w * (1.0 - (w * t).cos()) + cos / w * (w * t).sin()
            }
            RateFunction::Tabulated { values, period } => {
                let n = values.len();
                let h = period / n as f64;
                let per_period: f64 = values.iter().sum::<f64>() * h;
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
                cycles * per_period + acc
            }
            RateFunction::Piecewise { values, period } => {
                let n = values.len();
                let h = period / n as f64;
                let per_period: f64 = values.iter().sum::<f64>() * h;
                let cycles = (t / period).floor();
                let rem = t - cycles * period;
                let u = rem / h;
                let k = (u.floor() as usize).min(n - 1);
                let acc: f64 = values[..k].iter().sum::<f64>() * h + values[k] * (u - k as f64) * h;
                cycles * per_period + acc
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            RateFunction::Constant { value } => *value,
            RateFunction::Sinusoid { mean, .. } => *mean,
            RateFunction::Tabulated { values, .. } | RateFunction::Piecewise { values, .. } => {
                values.iter().sum::<f64>() / values.len() as f64
            }
        }
    }

    /// Exact minimum over a period.
    pub fn min(&self) -> f64 {
        match self {
            RateFunction::Constant { value } => *value,
            RateFunction::Sinusoid { mean, sin, cos, .. } => mean - sin.hypot(*cos),
            RateFunction::Tabulated { values, .. } | RateFunction::Piecewise { values, .. } => {
                values.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Exact maximum over a period.
    pub fn max(&self) -> f64 {
        match self {
            RateFunction::Constant { value } => *value,
            RateFunction::Sinusoid { mean, sin, cos, .. } => mean + sin.hypot(*cos),
            RateFunction::Tabulated { values, .. } | RateFunction::Piecewise { values, .. } => {
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Lipschitz constant of the continuous part; the jumps of a piecewise
    /// function are handled by aligning grids with [`pieces`](Self::pieces).
    pub fn lipschitz(&self) -> f64 {
        match self {
            RateFunction::Constant { .. } | RateFunction::Piecewise { .. } => 0.0,
            RateFunction::Sinusoid {
                sin, cos, period, ..
            } => 2.0 * PI * sin.hypot(*cos) / period,
            RateFunction::Tabulated { values, period } => {
                let n = values.len();
                let h = period / n as f64;
                (0..n)
                    .map(|k| (values[(k + 1) % n] - values[k]).abs() / h)
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Number of constant pieces per period for piecewise functions.
    pub fn pieces(&self) -> Option<usize> {
        match self {
            RateFunction::Piecewise { values, .. } => Some(values.len()),
            _ => None,
        }
    }

    fn validate(&self, family: &str) -> Result<()> {
        let finite = match self {
            RateFunction::Constant { value } => value.is_finite(),
            RateFunction::Sinusoid {
                mean,
                sin,
                cos,
                period,
            } => mean.is_finite() && sin.is_finite() && cos.is_finite() && *period > 0.0,
            RateFunction::Tabulated { values, period }
            | RateFunction::Piecewise { values, period } => {
                !values.is_empty() && values.iter().all(|v| v.is_finite()) && *period > 0.0
            }
        };
        if !finite {
            return Err(Error::InvalidModel(format!(
                "family `{family}`: non-finite coefficient, empty table or non-positive period"
            )));
        }
        // Tolerate rounding in mean - hypot(sin, cos) for functions touching zero.
        let lo = self.min();
        if lo < -1e-12 * self.max().abs().max(1.0) {
            let t = match self {
                RateFunction::Sinusoid {
                    sin, cos, period, ..
                } => {
                    // argmin of sin*sin(w) + cos*cos(w)
                    let phase = (-sin).atan2(-cos);
                    phase.rem_euclid(2.0 * PI) / (2.0 * PI) * period
                }
                _ => 0.0,
            };
            return Err(Error::NegativeRate {
                family: family.to_string(),
                value: lo,
                t,
            });
        }
        Ok(())
    }
}

/// Validated point evaluation.
pub fn eval_rate(f: &RateFunction, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    let v = f.value(t);
    if v < 0.0 {
        // Rounding noise for functions that touch zero.
        if v > -1e-12 {
            return Ok(0.0);
        }
        return Err(Error::NegativeRate {
            family: "rate".into(),
            value: v,
            t,
        });
    }
    Ok(v)
}

/// Dependence of a rate term on the state index `n >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateFactor {
    #[default]
    One,
    /// `min(n, cap)`, e.g. the number of busy servers.
    MinCap { cap: usize },
    /// `ratio^n`.
    Geometric { ratio: f64 },
    /// `n^(-exponent)`.
    Power { exponent: f64 },
    /// `values[n - 1]` for `n <= len`, `tail` afterwards.
    Explicit {
        values: Vec<f64>,
        #[serde(default)]
        tail: f64,
    },
}

impl StateFactor {
    pub fn at(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        match self {
            StateFactor::One => 1.0,
            StateFactor::MinCap { cap } => n.min(*cap) as f64,
            StateFactor::Geometric { ratio } => ratio.powi(n as i32),
            StateFactor::Power { exponent } => (n as f64).powf(-exponent),
            StateFactor::Explicit { values, tail } => values.get(n - 1).copied().unwrap_or(*tail),
        }
    }

    /// `lim_{n -> inf} s(n)`, `None` when unbounded.
    pub fn limit(&self) -> Option<f64> {
        match self {
            StateFactor::One => Some(1.0),
            StateFactor::MinCap { cap } => Some(*cap as f64),
            StateFactor::Geometric { ratio } => {
                if *ratio < 1.0 {
                    Some(0.0)
                } else if *ratio == 1.0 {
                    Some(1.0)
                } else {
                    None
                }
            }
            StateFactor::Power { exponent } => {
                if *exponent > 0.0 {
                    Some(0.0)
                } else if *exponent == 0.0 {
                    Some(1.0)
                } else {
                    None
                }
            }
            StateFactor::Explicit { tail, .. } => Some(*tail),
        }
    }

    /// Index from which `s(n)` is nonincreasing.
    pub fn stable_from(&self) -> usize {
        match self {
            StateFactor::MinCap { cap } => (*cap).max(1),
            StateFactor::Explicit { values, .. } => values.len() + 1,
            _ => 1,
        }
    }

    /// True when `s(n) >= lim s` for every `n >= 1`.
    pub fn dominates_limit(&self) -> bool {
        match self {
            StateFactor::One | StateFactor::Geometric { .. } | StateFactor::Power { .. } => true,
            StateFactor::MinCap { cap } => *cap <= 1,
            StateFactor::Explicit { values, tail } => values.iter().all(|v| v >= tail),
        }
    }

    /// `sum_{n >= from} scale_base^n * s(n)` with `scale_base >= 1`; `None` if divergent.
    pub fn weighted_geometric_tail(&self, base: f64, from: usize) -> Option<f64> {
        let from = from.max(1);
        match self {
            StateFactor::One | StateFactor::MinCap { .. } => None,
            StateFactor::Geometric { ratio } => series::geometric_tail(ratio * base, from),
            StateFactor::Power { exponent } => {
                if base == 1.0 {
                    series::power_tail(*exponent, from)
                } else {
                    None
                }
            }
            StateFactor::Explicit { values, tail } => {
                if *tail != 0.0 {
                    return None;
                }
                let mut s = 0.0;
                for n in from..=values.len() {
                    s += base.powi(n as i32) * values[n - 1];
                }
                Some(s)
            }
        }
    }

    /// `sum_{n >= from} s(n)`.
    pub fn tail_sum(&self, from: usize) -> Option<f64> {
        self.weighted_geometric_tail(1.0, from)
    }

    /// `sum_{n >= from} n * s(n)`.
    pub fn tail_moment(&self, from: usize) -> Option<f64> {
        let from = from.max(1);
        match self {
            StateFactor::One | StateFactor::MinCap { .. } => None,
            StateFactor::Geometric { ratio } => series::geometric_moment_tail(*ratio, from),
            StateFactor::Power { exponent } => series::power_tail(exponent - 1.0, from),
            StateFactor::Explicit { values, tail } => {
                if *tail != 0.0 {
                    return None;
                }
                Some((from..=values.len()).map(|n| n as f64 * values[n - 1]).sum())
            }
        }
    }

    fn validate(&self, family: &str) -> Result<()> {
        let ok = match self {
            StateFactor::One => true,
            StateFactor::MinCap { cap } => *cap >= 1,
            StateFactor::Geometric { ratio } => ratio.is_finite() && *ratio >= 0.0,
            StateFactor::Power { exponent } => exponent.is_finite(),
            StateFactor::Explicit { values, tail } => {
                tail.is_finite() && *tail >= 0.0 && values.iter().all(|v| v.is_finite() && *v >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "family `{family}`: invalid state factor {self:?}"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTerm {
    pub time: RateFunction,
    #[serde(default)]
    pub state: StateFactor,
}

/// A state-indexed family of rates, `sum_k f_k(t) s_k(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct RateFamily {
    pub terms: Vec<RateTerm>,
}

impl RateFamily {
    pub fn zero() -> Self {
        RateFamily { terms: Vec::new() }
    }

    pub fn term(time: RateFunction, state: StateFactor) -> Self {
        RateFamily {
            terms: vec![RateTerm { time, state }],
        }
    }

    pub fn with(mut self, time: RateFunction, state: StateFactor) -> Self {
        self.terms.push(RateTerm { time, state });
        self
    }

    pub fn value(&self, n: usize, t: f64) -> f64 {
        self.terms.iter().map(|k| k.time.value(t) * k.state.at(n)).sum()
    }

    pub fn value_sided(&self, n: usize, t: f64, left: bool) -> f64 {
        self.terms
            .iter()
            .map(|k| {
                let f = if left { k.time.value_left(t) } else { k.time.value(t) };
                f * k.state.at(n)
            })
            .sum()
    }

    /// `lim_{n -> inf}` of the family at time `t`.
    pub fn limit(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|k| k.time.value(t) * k.state.limit().unwrap_or(f64::INFINITY))
            .sum()
    }

    pub fn stable_from(&self) -> usize {
        self.terms.iter().map(|k| k.state.stable_from()).max().unwrap_or(1)
    }

    pub fn dominates_limit(&self) -> bool {
        self.terms.iter().all(|k| k.state.dominates_limit())
    }

    pub fn periods(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().filter_map(|k| k.time.period())
    }

    /// Time profile of the rate at a fixed state.
    pub fn combination_at(&self, n: usize) -> Combination {
        let mut c = Combination::default();
        for k in &self.terms {
            c.add(k.state.at(n), &k.time);
        }
        c
    }

    /// Time profile of the `n -> inf` limit.
    pub fn limit_combination(&self) -> Option<Combination> {
        let mut c = Combination::default();
        for k in &self.terms {
            c.add(k.state.limit()?, &k.time);
        }
        Some(c)
    }

    /// Time profile of `sum_{n >= from} r_n(t)`.
    pub fn tail_combination(&self, from: usize) -> Option<Combination> {
        let mut c = Combination::default();
        for k in &self.terms {
            c.add(k.state.tail_sum(from)?, &k.time);
        }
        Some(c)
    }

    /// Time profile of `sum_{n >= from} n r_n(t)`.
    pub fn moment_combination(&self, from: usize) -> Option<Combination> {
        let mut c = Combination::default();
        for k in &self.terms {
            c.add(k.state.tail_moment(from)?, &k.time);
        }
        Some(c)
    }

    pub(crate) fn validate(&self, family: &str) -> Result<()> {
        for k in &self.terms {
            k.time.validate(family)?;
            k.state.validate(family)?;
        }
        Ok(())
    }

    pub(crate) fn set_period_if_unset(&mut self, p: f64) {
        for k in &mut self.terms {
            k.time.set_period_if_unset(p);
        }
    }
}

/// A finite linear combination of rate functions. Sinusoids of a common
/// period and constants are folded into closed form; tables are kept aside.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub constant: f64,
    pub sin: f64,
    pub cos: f64,
    pub period: f64,
    pub others: Vec<(f64, RateFunction)>,
}

impl Combination {
    pub fn constant(c: f64) -> Self {
        Combination {
            constant: c,
            ..Default::default()
        }
    }

    pub fn add(&mut self, coef: f64, f: &RateFunction) {
        if coef == 0.0 {
            return;
        }
        match f {
            RateFunction::Constant { value } => self.constant += coef * value,
            RateFunction::Sinusoid {
                mean,
                sin,
                cos,
                period,
            } if self.period == 0.0 || self.period == *period || (*sin == 0.0 && *cos == 0.0) => {
                self.constant += coef * mean;
                if *sin != 0.0 || *cos != 0.0 {
                    self.period = *period;
                    self.sin += coef * sin;
                    self.cos += coef * cos;
                }
            }
            other => self.others.push((coef, other.clone())),
        }
    }

    pub fn add_combination(&mut self, coef: f64, other: &Combination) {
        self.constant += coef * other.constant;
        if other.sin != 0.0 || other.cos != 0.0 {
            if self.period == 0.0 || self.period == other.period {
                self.period = other.period;
                self.sin += coef * other.sin;
                self.cos += coef * other.cos;
            } else {
                self.others.push((
                    coef,
                    RateFunction::sinusoid(0.0, other.sin, other.cos, other.period),
                ));
            }
        }
        for (c, f) in &other.others {
            self.others.push((coef * c, f.clone()));
        }
    }

    pub fn is_closed(&self) -> bool {
        self.others.is_empty()
    }

    pub fn value(&self, t: f64) -> f64 {
        let mut v = self.constant;
        if self.sin != 0.0 || self.cos != 0.0 {
            let w = 2.0 * PI * t / self.period;
            v += self.sin * w.sin() + self.cos * w.cos();
        }
        v + self.others.iter().map(|(c, f)| c * f.value(t)).sum::<f64>()
    }

    pub fn antiderivative(&self, t: f64) -> f64 {
        let mut v = self.constant * t;
        if self.sin != 0.0 || self.cos != 0.0 {
            let w = 2.0 * PI / self.period;
            v += self.sin / w * (1.0 - (w * t).cos()) + self.cos / w * (w * t).sin();
        }
        v + self
            .others
            .iter()
            .map(|(c, f)| c * f.antiderivative(t))
            .sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.constant + self.others.iter().map(|(c, f)| c * f.mean()).sum::<f64>()
    }

    /// Common period of all components (1 for constants).
    pub fn period(&self) -> f64 {
        if self.period > 0.0 {
            return self.period;
        }
        self.others
            .iter()
            .filter_map(|(_, f)| f.period())
            .next()
            .unwrap_or(1.0)
    }

    /// Lipschitz constant of the continuous part (see [`RateFunction::lipschitz`]).
    pub fn lipschitz(&self) -> f64 {
        let w = if self.period > 0.0 { 2.0 * PI / self.period } else { 0.0 };
        w * self.amplitude()
            + self
                .others
                .iter()
                .map(|(c, f)| c.abs() * f.lipschitz())
                .sum::<f64>()
    }

    /// Grid size that is a multiple of every piecewise component's piece count.
    pub fn aligned_grid(&self, samples: usize) -> usize {
        let mut grid = samples.max(2);
        for (_, f) in &self.others {
            if let Some(n) = f.pieces() {
                grid = grid / gcd(grid, n) * n;
            }
        }
        grid
    }

    pub fn amplitude(&self) -> f64 {
        self.sin.hypot(self.cos)
    }

    /// Supremum over one period: exact in closed form, otherwise the sampled
    /// maximum on a grid through every jump plus `lipschitz * h / 2`.
    pub fn sup(&self, samples: usize) -> f64 {
        if self.is_closed() {
            return self.constant + self.amplitude();
        }
        let (m, slack) = self.sampled_extreme(samples, f64::max, f64::NEG_INFINITY);
        let m = m + slack;
        m + SAMPLED_INFLATION * m.abs().max(1e-300)
    }

    pub fn inf(&self, samples: usize) -> f64 {
        if self.is_closed() {
            return self.constant - self.amplitude();
        }
        let (m, slack) = self.sampled_extreme(samples, f64::min, f64::INFINITY);
        let m = m - slack;
        m - SAMPLED_INFLATION * m.abs().max(1e-300)
    }

    fn sampled_extreme(&self, samples: usize, pick: fn(f64, f64) -> f64, init: f64) -> (f64, f64) {
        let p = self.period();
        let grid = self.aligned_grid(samples);
        let mut acc = init;
        for k in 0..grid {
            let t = p * k as f64 / grid as f64;
            acc = pick(acc, self.value(t));
            acc = pick(acc, self.value_left(t));
        }
        (acc, 0.5 * self.lipschitz() * p / grid as f64)
    }

    pub fn value_left(&self, t: f64) -> f64 {
        let mut v = self.constant;
        if self.sin != 0.0 || self.cos != 0.0 {
            let w = 2.0 * PI * t / self.period;
            v += self.sin * w.sin() + self.cos * w.cos();
        }
        v + self.others.iter().map(|(c, f)| c * f.value_left(t)).sum::<f64>()
    }

    /// Human-readable form, e.g. `2 + 1 cos(2 pi t)`.
    pub fn describe(&self) -> String {
        let mut s = format!("{}", self.constant);
        let per = if self.period == 1.0 || self.period == 0.0 {
            "2 pi t".to_string()
        } else {
            format!("2 pi t / {}", self.period)
        };
        if self.sin != 0.0 {
            s += &format!(" {} {} sin({per})", sign(self.sin), self.sin.abs());
        }
        if self.cos != 0.0 {
            s += &format!(" {} {} cos({per})", sign(self.cos), self.cos.abs());
        }
        if !self.others.is_empty() {
            s += &format!(" + {} tabulated terms", self.others.len());
        }
        s
    }
}

fn sign(x: f64) -> char {
    if x < 0.0 {
        '-'
    } else {
        '+'
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_rates_at_quarter_period() {
        let lam = RateFunction::sinusoid(1.0, 1.0, 0.0, 1.0);
        let mu = RateFunction::sinusoid(1.0, -1.0, 0.0, 1.0);
        assert!((eval_rate(&lam, 0.25).unwrap() - 2.0).abs() < 1e-15);
        assert!(eval_rate(&mu, 0.25).unwrap().abs() < 1e-15);
        assert_eq!(eval_rate(&RateFunction::constant(2.0), 17.3).unwrap(), 2.0);
    }

    #[test]
    fn negative_rate_rejected() {
        let f = RateFunction::sinusoid(0.5, 1.0, 0.0, 1.0);
        assert!(matches!(eval_rate(&f, 0.75), Err(Error::NegativeRate { .. })));
        assert!(matches!(f.validate("x"), Err(Error::NegativeRate { .. })));
        assert!(eval_rate(&RateFunction::constant(1.0), -1.0).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_integrates() {
        let f = RateFunction::Tabulated {
            values: vec![0.0, 2.0, 4.0, 2.0],
            period: 1.0,
        };
        assert!((f.value(0.125) - 1.0).abs() < 1e-15);
        assert!((f.value(1.625) - 3.0).abs() < 1e-12);
        // trapezoid over one period = mean of nodes
        assert!((f.antiderivative(1.0) - 2.0).abs() < 1e-15);
        let fine: f64 = (0..100_000)
            .map(|k| f.value((k as f64 + 0.5) * 1.3 / 100_000.0) * 1.3 / 100_000.0)
            .sum();
        assert!((f.antiderivative(1.3) - fine).abs() < 1e-8);
    }

    #[test]
    fn piecewise_sides() {
        let f = RateFunction::Piecewise {
            values: vec![1.0, 3.0],
            period: 1.0,
        };
        assert_eq!(f.value(0.5), 3.0);
        assert_eq!(f.value_left(0.5), 1.0);
        assert_eq!(f.value_left(1.0), 3.0);
        assert_eq!(f.value(1.0), 1.0);
        assert!((f.antiderivative(0.75) - (0.5 + 0.75)).abs() < 1e-15);
    }

    #[test]
    fn sinusoid_antiderivative_matches_quadrature() {
        let f = RateFunction::sinusoid(2.0, 0.3, 1.0, 1.0);
        let t = 2.37;
        let n = 200_000;
        let q: f64 = (0..n)
            .map(|k| f.value((k as f64 + 0.5) * t / n as f64) * t / n as f64)
            .sum();
        assert!((f.antiderivative(t) - q).abs() < 1e-9);
    }

    #[test]
    fn combination_folds_sinusoids() {
        let mut c = Combination::default();
        c.add(1.0, &RateFunction::sinusoid(1.0, 1.0, 0.0, 1.0));
        c.add(3.0, &RateFunction::sinusoid(1.0, -1.0, 0.0, 1.0));
        c.add(1.0, &RateFunction::sinusoid(2.0, 0.0, 1.0, 1.0));
        assert!(c.is_closed());
        assert_eq!(c.constant, 6.0);
        assert_eq!(c.sin, -2.0);
        assert!((c.sup(16) - (6.0 + 5f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn factor_tails() {
        let g = StateFactor::Geometric { ratio: 0.25 };
        assert!((g.tail_sum(1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.weighted_geometric_tail(2.0, 1).unwrap() - 1.0).abs() < 1e-15);
        let p = StateFactor::Power { exponent: 10.0 };
        assert!(p.weighted_geometric_tail(1.5, 1).is_none());
        assert!(StateFactor::One.tail_sum(1).is_none());
        let e = StateFactor::Explicit {
            values: vec![0.5, 0.25],
            tail: 0.0,
        };
        assert_eq!(e.tail_sum(1), Some(0.75));
        assert_eq!(e.tail_moment(1), Some(1.0));
        assert_eq!(StateFactor::MinCap { cap: 3 }.at(7), 3.0);
        assert_eq!(StateFactor::MinCap { cap: 3 }.stable_from(), 3);
    }
}

//! Diagonal weights `1 = d_0 <= d_1 <= ...` of the weighted `l1` norm.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate::{Combination, RateFamily, StateFactor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum WeightSequence {
    /// `d_n = ratio^n`; `ratio = 1` gives the plain `l1` norm.
    Geometric { ratio: f64 },
    /// `ratio^n` for `n < switch`, then `ratio^switch (n + 1) / switch`.
    GeometricThenLinear { ratio: f64, switch: usize },
    /// `d_0 = 1`, `d_n = n`.
    Linear,
    /// `d_n = values[n]`, constant after the last entry.
    Explicit { values: Vec<f64> },
}

/// Closed form of `d_n` for `n >= tail_start()`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailForm {
    /// `exp(ln_scale) * ratio^n`.
    Geometric { ln_scale: f64, ratio: f64 },
    /// `slope * n + intercept`.
    Affine { slope: f64, intercept: f64 },
}

impl WeightSequence {
    pub fn unit() -> Self {
        WeightSequence::Geometric { ratio: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            WeightSequence::Geometric { ratio } => ratio.is_finite() && *ratio >= 1.0,
            WeightSequence::GeometricThenLinear { ratio, switch } => {
                ratio.is_finite() && *ratio >= 1.0 && *switch >= 1
            }
            WeightSequence::Linear => true,
            WeightSequence::Explicit { values } => {
                !values.is_empty()
                    && values[0] == 1.0
                    && values.iter().all(|v| v.is_finite())
                    && values.windows(2).all(|w| w[0] <= w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "weights must satisfy 1 = d_0 <= d_1 <= ...: {self}"
            )))
        }
    }

    pub fn ln_weight(&self, n: usize) -> f64 {
        match self {
            WeightSequence::Geometric { ratio } => n as f64 * ratio.ln(),
            WeightSequence::GeometricThenLinear { ratio, switch } => {
                if n < *switch {
                    n as f64 * ratio.ln()
                } else {
                    *switch as f64 * ratio.ln() + ((n + 1) as f64 / *switch as f64).ln()
                }
            }
            WeightSequence::Linear => {
                if n == 0 {
                    0.0
                } else {
                    (n as f64).ln()
                }
            }
            WeightSequence::Explicit { values } => values[n.min(values.len() - 1)].ln(),
        }
    }

    pub fn weight(&self, n: usize) -> f64 {
        self.ln_weight(n).exp()
    }

    /// `d_0..=d_n`.
    pub fn table(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|k| self.weight(k)).collect()
    }

    /// `sum_n d_n |v_n|`.
    pub fn l1d_norm(&self, v: &[f64]) -> f64 {
        v.iter().enumerate().map(|(n, x)| self.weight(n) * x.abs()).sum()
    }

    /// First index from which [`tail_form`](Self::tail_form) is exact.
    pub fn tail_start(&self) -> usize {
        match self {
            WeightSequence::Geometric { .. } => 0,
            WeightSequence::GeometricThenLinear { switch, .. } => *switch,
            WeightSequence::Linear => 1,
            WeightSequence::Explicit { values } => values.len() - 1,
        }
    }

    pub fn tail_form(&self) -> TailForm {
        match self {
            WeightSequence::Geometric { ratio } => TailForm::Geometric {
                ln_scale: 0.0,
                ratio: *ratio,
            },
            WeightSequence::GeometricThenLinear { ratio, switch } => {
                let c = (*switch as f64 * ratio.ln()).exp() / *switch as f64;
                TailForm::Affine {
                    slope: c,
                    intercept: c,
                }
            }
            WeightSequence::Linear => TailForm::Affine {
                slope: 1.0,
                intercept: 0.0,
            },
            WeightSequence::Explicit { values } => TailForm::Affine {
                slope: 0.0,
                intercept: values[values.len() - 1],
            },
        }
    }

    /// `sup_{n >= from} d_{n+1} / d_n` for `from > tail_start()`.
    pub fn up_ratio_sup(&self, from: usize) -> f64 {
        match self.tail_form() {
            TailForm::Geometric { ratio, .. } => ratio,
            TailForm::Affine { .. } => (self.ln_weight(from + 1) - self.ln_weight(from)).exp(),
        }
    }

    /// `sup_{n >= from} d_{n-1} / d_n` for `from > tail_start()`.
    pub fn down_ratio_sup(&self, _from: usize) -> f64 {
        match self.tail_form() {
            TailForm::Geometric { ratio, .. } => 1.0 / ratio,
            TailForm::Affine { .. } => 1.0,
        }
    }

    /// `sum_{j >= from} d_j s(j)`, `None` when divergent.
    pub fn weighted_sum(&self, s: &StateFactor, from: usize) -> Option<f64> {
        let from = from.max(1);
        let start = self.tail_start().max(from);
        let head: f64 = (from..start).map(|j| self.weight(j) * s.at(j)).sum();
        let tail = match self.tail_form() {
            TailForm::Geometric { ln_scale, ratio } => {
                ln_scale.exp() * s.weighted_geometric_tail(ratio, start)?
            }
            TailForm::Affine { slope, intercept } => {
                let mut v = 0.0;
                if slope != 0.0 {
                    v += slope * s.tail_moment(start)?;
                }
                if intercept != 0.0 {
                    v += intercept * s.tail_sum(start)?;
                }
                v
            }
        };
        Some(head + tail)
    }

    /// Time profile of `sum_{j >= from} d_j r_j(t)`.
    pub fn weighted_family(&self, fam: &RateFamily, from: usize) -> Option<Combination> {
        let mut c = Combination::default();
        for k in &fam.terms {
            c.add(self.weighted_sum(&k.state, from)?, &k.time);
        }
        Some(c)
    }

    /// `W = inf_{k >= 1} d_k / k`.
    pub fn w_constant(&self) -> f64 {
        match self {
            WeightSequence::Geometric { ratio } => {
                if *ratio <= 1.0 {
                    0.0
                } else {
                    geometric_ratio_min(*ratio, 1, usize::MAX)
                }
            }
            WeightSequence::GeometricThenLinear { ratio, switch } => {
                let lin = (*switch as f64 * ratio.ln()).exp() / *switch as f64;
                if *switch > 1 && *ratio > 1.0 {
                    lin.min(geometric_ratio_min(*ratio, 1, switch - 1))
                } else if *switch > 1 {
                    lin.min(1.0 / (switch - 1) as f64)
                } else {
                    lin
                }
            }
            WeightSequence::Linear => 1.0,
            WeightSequence::Explicit { .. } => 0.0,
        }
    }

    /// `sup_{i >= 1} i / d_{N+i}`.
    pub fn tail_index_ratio_sup(&self, level: usize) -> Result<f64> {
        match self {
            WeightSequence::Geometric { ratio } if *ratio > 1.0 => {
                Ok(geometric_index_max(*ratio, level, 1, usize::MAX))
            }
            WeightSequence::GeometricThenLinear { ratio, switch } if *ratio > 1.0 => {
                let lin = *switch as f64 / (*switch as f64 * ratio.ln()).exp();
                if level + 1 < *switch {
                    Ok(lin.max(geometric_index_max(*ratio, level, 1, switch - level - 1)))
                } else {
                    Ok(lin)
                }
            }
            WeightSequence::Linear => Ok(1.0),
            _ => Err(Error::ZeroW),
        }
    }
}

/// `min_{lo <= k <= hi} ratio^k / k` (log-convex in `k`).
fn geometric_ratio_min(ratio: f64, lo: usize, hi: usize) -> f64 {
    let star = 1.0 / ratio.ln();
    let f = |k: usize| (k as f64 * ratio.ln() - (k as f64).ln()).exp();
    let cands = [star.floor(), star.ceil()];
    cands
        .iter()
        .map(|c| (*c as usize).clamp(lo, hi))
        .chain([lo, hi.min(lo.saturating_add(1 << 20))])
        .map(f)
        .fold(f64::INFINITY, f64::min)
}

/// `max_{lo <= i <= hi} i / ratio^(level + i)` (log-concave in `i`).
fn geometric_index_max(ratio: f64, level: usize, lo: usize, hi: usize) -> f64 {
    let star = 1.0 / ratio.ln();
    let f = |i: usize| ((i as f64).ln() - (level + i) as f64 * ratio.ln()).exp();
    [star.floor(), star.ceil()]
        .iter()
        .map(|c| (*c as usize).clamp(lo, hi))
        .chain([lo])
        .map(f)
        .fold(0.0, f64::max)
}

impl fmt::Display for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSequence::Geometric { ratio } if *ratio == 1.0 => write!(f, "unit"),
            WeightSequence::Geometric { ratio } => write!(f, "geometric:{ratio}"),
            WeightSequence::GeometricThenLinear { ratio, switch } => {
                write!(f, "geometric-linear:{ratio}:{switch}")
            }
            WeightSequence::Linear => write!(f, "linear"),
            WeightSequence::Explicit { values } => {
                let v: Vec<String> = values.iter().map(|x| x.to_string()).collect();
                write!(f, "explicit:{}", v.join(","))
            }
        }
    }
}

impl FromStr for WeightSequence {
    type Err = Error;

    /// `unit`, `linear`, `geometric:R`, `geometric-linear:R:N0`,
    /// `explicit:d0,d1,...`. Ratios accept fractions such as `9/8`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unrecognised weight rule `{s}`"));
        let num = |x: &str| -> Result<f64> {
            match x.split_once('/') {
                Some((p, q)) => {
                    let p: f64 = p.trim().parse().map_err(|_| bad())?;
                    let q: f64 = q.trim().parse().map_err(|_| bad())?;
                    Ok(p / q)
                }
                None => x.trim().parse().map_err(|_| bad()),
            }
        };
        let parts: Vec<&str> = s.trim().split(':').collect();
        let w = match parts.as_slice() {
            ["unit"] | [""] => WeightSequence::unit(),
            ["linear"] => WeightSequence::Linear,
            ["geometric", r] => WeightSequence::Geometric { ratio: num(r)? },
            ["geometric-linear", r, n] => WeightSequence::GeometricThenLinear {
                ratio: num(r)?,
                switch: n.trim().parse().map_err(|_| bad())?,
            },
            ["explicit", list] => WeightSequence::Explicit {
                values: list.split(',').map(num).collect::<Result<_>>()?,
            },
            _ => return Err(bad()),
        };
        w.validate()?;
        Ok(w)
    }
}

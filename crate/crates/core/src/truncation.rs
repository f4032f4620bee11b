//! Uniform-in-time truncation error bounds and the choice of truncation level.

use serde::{Deserialize, Serialize};

use crate::bounds::{ErgodicityReport, WeightSequence};
use crate::error::{Error, Result};
use crate::model::IntensityModel;
use crate::profile::Profile;
use crate::rate::SAMPLED_INFLATION;

/// Default largest truncation level tried by [`select_truncation`].
pub const DEFAULT_LEVEL_CAP: usize = 1_000_000;

/// `theta >= sup_t beta*(t)`: exact in closed form, otherwise the sampled
/// maximum plus the Lipschitz slack between nodes.
pub fn theta(model: &IntensityModel, grid: usize) -> f64 {
    match model.beta_star_profile(grid) {
        Profile::Closed { combination } => combination.sup(grid),
        Profile::Sampled { .. } => {
            let n = model.aligned_grid(grid);
            let h = model.period / n as f64;
            let max = (0..n)
                .map(|k| {
                    let t = k as f64 * h;
                    model.beta_star(t).max(model.beta_star_sided(t, true))
                })
                .fold(0.0, f64::max);
            let v = max + 0.5 * model.beta_star_lipschitz() * h;
            v + SAMPLED_INFLATION * v.max(1e-300)
        }
    }
}

/// `R_{N+1} = sup_t sum_{n > N} r_n(t)`.
pub fn remainder(model: &IntensityModel, level: usize) -> Result<f64> {
    let c = model
        .bulk_arrival
        .tail_combination(level + 1)
        .ok_or_else(|| Error::DivergentSeries("sum_n r_n(t)".into()))?;
    Ok(c.sup(4096).max(0.0))
}

/// Scalar constants entering the truncation bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Bound on `|a_ii(t)|`.
    #[serde(rename = "L")]
    pub l: f64,
    /// Envelope of `exp(-int beta*)`.
    #[serde(rename = "M")]
    pub m: f64,
    pub a: f64,
    /// Envelope of `exp(-int beta**)`.
    #[serde(rename = "M1")]
    pub m1: f64,
    pub a1: f64,
    pub theta: f64,
}

impl Constants {
    /// Self-certified constants; the report must include the weighted part.
    pub fn from_report(r: &ErgodicityReport) -> Result<Self> {
        let w = r
            .weighted
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("truncation bounds need a weight sequence".into()))?;
        Ok(Constants {
            l: r.diagonal_bound.value(),
            m: r.envelope.m,
            a: r.envelope.a,
            m1: w.envelope.m,
            a1: w.envelope.a,
            theta: r.theta,
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = self.l >= 0.0
            && self.m >= 1.0
            && self.m1 >= 1.0
            && self.a > 0.0
            && self.a1 > 0.0
            && self.theta >= 0.0
            && [self.l, self.m, self.a, self.m1, self.a1, self.theta]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid bound constants {self:?}")))
        }
    }
}

/// Everything the bounds at a fixed truncation level depend on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub level: usize,
    pub initial_state: usize,
    pub constants: Constants,
    /// `R_{N+1}`.
    pub remainder: f64,
    /// `d_N`.
    pub d_level: f64,
    /// `sup_{i >= 1} i / d_{N+i}`, absent when the weights cannot bound the tail mean.
    pub tail_index_ratio: Option<f64>,
    /// `||p(0)||_{1D} = d_k`.
    pub initial_norm: f64,
}

impl CertificateInputs {
    /// Constant `K` and rate `kappa` with
    /// `int_0^t e^{-a(t-s)} e^{-a1 s} ds <= K e^{-kappa t}` for all `t >= 0`.
    fn cross_decay(&self) -> (f64, f64) {
        let c = &self.constants;
        let low = c.a.min(c.a1);
        let gap = (c.a - c.a1).abs();
        if gap >= 0.25 * low {
            (1.0 / gap, low)
        } else {
            // t e^{-low t} <= (2 / (e low)) e^{-low t / 2}
            (2.0 / (std::f64::consts::E * low), 0.5 * low)
        }
    }

    /// `M1 (theta / a1 + e^{-a1 t} d_k)`: bound on the weighted norm of both
    /// the full and the truncated solution.
    pub fn weighted_norm_bound(&self, t: f64) -> f64 {
        let c = &self.constants;
        c.m1 * (c.theta / c.a1 + (-c.a1 * t).exp() * self.initial_norm)
    }

    /// Bound on `||p(t) - y_N(t)||_1`, nonincreasing in `t`.
    pub fn tv_bound(&self, t: f64) -> f64 {
        let (k, kappa) = self.cross_decay();
        self.tv_with_transient(k * (-kappa * t).exp())
    }

    fn tv_with_transient(&self, transient: f64) -> f64 {
        let c = &self.constants;
        let boundary = 2.0 * c.m * c.m1 * c.l / self.d_level * (c.theta / (c.a * c.a1) + self.initial_norm * transient);
        2.0 * c.m * self.remainder / c.a + boundary
    }

    /// Bound on `|E(t,k) - E_N(t,k)|`, nonincreasing in `t`.
    pub fn mean_bound(&self, t: f64) -> Option<f64> {
        let s = self.tail_index_ratio?;
        Some(self.level as f64 * self.tv_bound(t) + s * self.weighted_norm_bound(t))
    }

    /// `lim_{t -> inf}` of [`tv_bound`](Self::tv_bound).
    pub fn tv_floor(&self) -> f64 {
        self.tv_with_transient(0.0)
    }

    pub fn mean_floor(&self) -> Option<f64> {
        let c = &self.constants;
        Some(self.level as f64 * self.tv_floor() + self.tail_index_ratio? * (c.m1 * (c.theta / c.a1)))
    }
}

/// Which truncation error a level has to control.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Total variation distance of the distributions.
    #[default]
    Tv,
    /// Difference of the means.
    Mean,
    Both,
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv" => Ok(Criterion::Tv),
            "mean" => Ok(Criterion::Mean),
            "both" => Ok(Criterion::Both),
            _ => Err(Error::InvalidArgument(format!("criterion must be tv, mean or both, got `{s}`"))),
        }
    }
}

/// Model, weights and constants shared by all candidate levels.
#[derive(Clone, Debug)]
pub struct TruncationSetup<'m> {
    pub model: &'m IntensityModel,
    pub weights: WeightSequence,
    pub constants: Constants,
    pub initial_state: usize,
}

impl<'m> TruncationSetup<'m> {
    pub fn new(
        model: &'m IntensityModel,
        weights: WeightSequence,
        constants: Constants,
        initial_state: usize,
    ) -> Result<Self> {
        weights.validate()?;
        constants.validate()?;
        Ok(TruncationSetup {
            model,
            weights,
            constants,
            initial_state,
        })
    }

    /// Inputs at level `N`; the tail-mean ratio is filled only when the mean
    /// bound is available (`W > 0` and `sum_n n r_n` convergent).
    pub fn inputs(&self, level: usize) -> Result<CertificateInputs> {
        if level < 1 {
            return Err(Error::InvalidArgument("truncation level must be >= 1".into()));
        }
        if self.initial_state > level {
            return Err(Error::InitialStateOutside {
                state: self.initial_state,
                level,
            });
        }
        let mean_ok = self.weights.w_constant() > 0.0 && self.model.bulk_arrival.moment_combination(1).is_some();
        let tail_index_ratio = if mean_ok {
            self.weights.tail_index_ratio_sup(level).ok()
        } else {
            None
        };
        Ok(CertificateInputs {
            level,
            initial_state: self.initial_state,
            constants: self.constants,
            remainder: remainder(self.model, level)?,
            d_level: self.weights.weight(level),
            tail_index_ratio,
            initial_norm: self.weights.weight(self.initial_state),
        })
    }

    /// Inputs at level `N`, failing if the mean bound is unavailable.
    pub fn inputs_with_mean(&self, level: usize) -> Result<CertificateInputs> {
        if self.model.bulk_arrival.moment_combination(1).is_none() {
            return Err(Error::DivergentSeries("sum_n n r_n(t)".into()));
        }
        if !(self.weights.w_constant() > 0.0) {
            return Err(Error::ZeroW);
        }
        let i = self.inputs(level)?;
        if i.tail_index_ratio.is_none() {
            return Err(Error::ZeroW);
        }
        Ok(i)
    }
}

/// A truncation level with all constants and the resulting bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub level: usize,
    pub criterion: Criterion,
    pub target: f64,
    pub window: [f64; 2],
    pub weights: WeightSequence,
    #[serde(rename = "W")]
    pub w: f64,
    pub inputs: CertificateInputs,
    /// Supremum of the tv bound over the window (attained at its start).
    pub tv_bound: f64,
    pub mean_bound: Option<f64>,
    pub tv_floor: f64,
    pub mean_floor: Option<f64>,
    /// Earliest time from which the bound meets the target at this level.
    pub min_window_start: Option<f64>,
    pub met: bool,
}

impl BoundCertificate {
    pub fn tv_at(&self, t: f64) -> f64 {
        self.inputs.tv_bound(t)
    }

    pub fn mean_at(&self, t: f64) -> Option<f64> {
        self.inputs.mean_bound(t)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn governing(i: &CertificateInputs, criterion: Criterion, t: f64) -> f64 {
    let tv = i.tv_bound(t);
    let mean = i.mean_bound(t).unwrap_or(f64::INFINITY);
    match criterion {
        Criterion::Tv => tv,
        Criterion::Mean => mean,
        Criterion::Both => tv.max(mean),
    }
}

fn governing_floor(i: &CertificateInputs, criterion: Criterion) -> f64 {
    let tv = i.tv_floor();
    let mean = i.mean_floor().unwrap_or(f64::INFINITY);
    match criterion {
        Criterion::Tv => tv,
        Criterion::Mean => mean,
        Criterion::Both => tv.max(mean),
    }
}

fn min_start(i: &CertificateInputs, criterion: Criterion, target: f64) -> Option<f64> {
    if governing(i, criterion, 0.0) <= target {
        return Some(0.0);
    }
    if governing_floor(i, criterion) >= target {
        return None;
    }
    let mut hi = 1.0;
    while governing(i, criterion, hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-9 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if governing(i, criterion, mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

fn check_window(window: [f64; 2]) -> Result<()> {
    if !(window[0] >= 0.0 && window[1] >= window[0] && window[1].is_finite()) {
        return Err(Error::InvalidArgument(format!("bad time window {window:?}")));
    }
    Ok(())
}

/// Certificate at a given level.
pub fn certificate_at(
    setup: &TruncationSetup,
    level: usize,
    window: [f64; 2],
    criterion: Criterion,
    target: f64,
) -> Result<BoundCertificate> {
    check_window(window)?;
    let inputs = if criterion == Criterion::Tv {
        setup.inputs(level)?
    } else {
        setup.inputs_with_mean(level)?
    };
    let t0 = window[0];
    Ok(BoundCertificate {
        level,
        criterion,
        target,
        window,
        weights: setup.weights.clone(),
        w: setup.weights.w_constant(),
        tv_bound: inputs.tv_bound(t0),
        mean_bound: inputs.mean_bound(t0),
        tv_floor: inputs.tv_floor(),
        mean_floor: inputs.mean_floor(),
        min_window_start: min_start(&inputs, criterion, target),
        met: governing(&inputs, criterion, t0) <= target,
        inputs,
    })
}

/// Smallest level whose bound over `window` meets `target`.
///
/// The tv bound is nonincreasing in the level, so it is searched by doubling
/// and bisection. The mean bound is not monotone (it carries a factor `N`);
/// levels are scanned upward starting from the tv-minimal level, which is a
/// lower bound for it.
pub fn select_truncation(
    setup: &TruncationSetup,
    target: f64,
    window: [f64; 2],
    criterion: Criterion,
    cap: usize,
) -> Result<BoundCertificate> {
    check_window(window)?;
    if !(target > 0.0) {
        return Err(Error::InvalidArgument(format!("target must be positive, got {target}")));
    }
    if criterion != Criterion::Tv {
        setup.inputs_with_mean(setup.initial_state.max(1))?;
    }
    let t0 = window[0];
    let start = setup.initial_state.max(1);
    let tv = |n: usize| -> Result<f64> { Ok(setup.inputs(n)?.tv_bound(t0)) };
    let unreachable = |n: usize| -> Result<Error> {
        let i = setup.inputs(n)?;
        Ok(Error::TargetUnreachable {
            target,
            cap,
            floor: governing(&i, criterion, t0),
        })
    };
    // doubling + bisection on the tv bound
    let mut hi = start;
    if tv(start)? > target {
        let mut lo;
        loop {
            if hi >= cap {
                return Err(unreachable(cap)?);
            }
            lo = hi;
            hi = (hi * 2).min(cap);
            if tv(hi)? <= target {
                break;
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tv(mid)? <= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let mut level = hi;
    if criterion != Criterion::Tv {
        loop {
            let i = setup.inputs(level)?;
            if governing(&i, criterion, t0) <= target {
                break;
            }
            if level >= cap {
                return Err(unreachable(cap)?);
            }
            level += 1;
        }
    }
    certificate_at(setup, level, window, criterion, target)
}

//! Logarithmic norms, contraction rates and the ergodicity bounds built on them.

mod weights;

pub use weights::{TailForm, WeightSequence};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiagonalBound, GeneratorSlice, IntensityModel};
use crate::profile::Profile;
use crate::rate::{Combination, RateFamily};
use crate::truncation::theta;

/// Default number of nodes per period for sampled contraction profiles.
pub const DEFAULT_PROFILE_GRID: usize = 16_384;

/// Extra columns probed past the point where the analytic tail bound applies.
pub const DEFAULT_EXTRA_PROBE: usize = 64;

/// `max_j (b_jj + sum_{i != j} |b_ij|)`.
pub fn log_norm(b: &GeneratorSlice) -> f64 {
    (0..b.dim())
        .map(|j| {
            b.column(j)
                .into_iter()
                .map(|(r, v)| if r == j { v } else { v.abs() })
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// [`log_norm`] of a dense square matrix given as rows.
pub fn log_norm_dense(b: &[Vec<f64>]) -> f64 {
    let n = b.len();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|i| if i == j { b[i][j] } else { b[i][j].abs() })
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Certified pair with `exp(-int_s^t f) <= m * exp(-a (t - s))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub m: f64,
    pub a: f64,
    pub source: String,
    /// Nodes per period used for certification; 0 for pinned constants.
    pub grid: usize,
    pub pinned: bool,
}

impl DecayEnvelope {
    /// Constants supplied by the user rather than derived from a profile.
    pub fn pinned(m: f64, a: f64, source: &str) -> Self {
        DecayEnvelope {
            m,
            a,
            source: source.to_string(),
            grid: 0,
            pinned: true,
        }
    }

    /// `m * exp(-a * elapsed)`.
    pub fn at(&self, elapsed: f64) -> f64 {
        self.m * (-self.a * elapsed).exp()
    }

    /// Checks the envelope inequality on all grid pairs over two periods.
    ///
    /// Returns the largest `exp(-int_s^t f) - m e^{-a(t-s)}` found (negative
    /// when the inequality is strict everywhere).
    pub fn certify(&self, f: &Profile, grid: usize) -> Result<f64> {
        let p = f.period();
        let n = 2 * grid.max(2);
        let ln_m = self.m.ln();
        let g = |t: f64| self.a * t - f.integral(t);
        let (mut lo, mut lo_at) = (0.0f64, 0.0f64);
        let (mut worst_gap, mut pair) = (f64::NEG_INFINITY, (0.0, 0.0));
        for k in 0..=n {
            let t = 2.0 * p * k as f64 / n as f64;
            let gt = g(t);
            if gt < lo {
                lo = gt;
                lo_at = t;
            }
            if gt - lo > worst_gap {
                worst_gap = gt - lo;
                pair = (lo_at, t);
            }
        }
        let (s, t) = pair;
        let decay = (-self.a * (t - s)).exp();
        let excess = decay * (worst_gap.exp() - self.m);
        if worst_gap > ln_m && excess > 1e-12 {
            return Err(Error::EnvelopeCertification {
                source_name: self.source.clone(),
                excess,
                s,
                t,
            });
        }
        Ok(excess)
    }
}

/// Envelope with `a` equal to the period mean of `f` and the smallest `M`
/// for that rate, inflated by `1e-9` and re-certified on a grid.
pub fn decay_envelope(f: &Profile, source: &str, grid: usize) -> Result<DecayEnvelope> {
    let a = f.mean();
    if !(a > 0.0) {
        return Err(Error::NotEssential {
            source_name: source.to_string(),
            mean: a,
        });
    }
    let env = DecayEnvelope {
        m: (f.deficit_range() + 1e-9).exp(),
        a,
        source: source.to_string(),
        grid,
        pinned: false,
    };
    env.certify(f, grid)?;
    Ok(env)
}

/// A bound in exact-integral form and in envelope form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub exact: f64,
    pub envelope: f64,
}

impl BoundPair {
    pub fn best(&self) -> f64 {
        self.exact.min(self.envelope)
    }
}

/// `2 exp(-int_0^t beta*)` and `2 M e^{-a t}`.
pub fn ergodicity_bound(beta_star: &Profile, env: &DecayEnvelope, t: f64) -> BoundPair {
    BoundPair {
        exact: 2.0 * (-beta_star.integral(t)).exp(),
        envelope: 2.0 * env.at(t),
    }
}

/// `exp(-int_0^t beta**) * p0_norm` and `M1 e^{-a1 t} * p0_norm`.
pub fn weighted_ergodicity_bound(
    beta_double_star: &Profile,
    env: &DecayEnvelope,
    p0_norm: f64,
    t: f64,
) -> BoundPair {
    BoundPair {
        exact: (-beta_double_star.integral(t)).exp() * p0_norm,
        envelope: env.at(t) * p0_norm,
    }
}

/// `|E(t,j) - E(t,0)| <= (1 + d_j) / W * exp(-int_0^t beta**)`.
pub fn mean_convergence_bound(
    weights: &WeightSequence,
    beta_double_star: &Profile,
    env: &DecayEnvelope,
    j: usize,
    t: f64,
) -> Result<BoundPair> {
    let w = weights.w_constant();
    if !(w > 0.0) {
        return Err(Error::ZeroW);
    }
    let c = (1.0 + weights.weight(j)) / w;
    Ok(BoundPair {
        exact: c * (-beta_double_star.integral(t)).exp(),
        envelope: c * env.at(t),
    })
}

/// One evaluation of the weighted contraction rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleStarValue {
    /// `min(probed, tail)`.
    pub value: f64,
    /// Minimum over columns `0..=probe`.
    pub probed: f64,
    pub argmin: usize,
    /// Lower bound for every column beyond the probe.
    pub tail: f64,
}

impl DoubleStarValue {
    /// True when the analytic tail bound, not a probed column, sets the value.
    pub fn tail_binding(&self) -> bool {
        self.tail < self.probed
    }
}

fn factor_table(fam: &RateFamily, top: usize) -> Vec<Vec<f64>> {
    fam.terms
        .iter()
        .map(|k| (0..=top).map(|n| if n == 0 { 0.0 } else { k.state.at(n) }).collect())
        .collect()
}

/// Evaluates `beta**(t)`, the infimum over columns of the weighted deficit
/// `|a*_ii| - sum_{j != i} (d_j / d_i) |a*_ji|`.
///
/// Columns `0..=probe` are evaluated exactly. Beyond the probe, where every
/// rate is monotone in the state and the weights follow their closed tail
/// form, a single analytic lower bound covers all remaining columns.
pub struct DoubleStar<'m> {
    model: &'m IntensityModel,
    weights: WeightSequence,
    probe: usize,
    up: Vec<f64>,
    down: Vec<f64>,
    inv_d: Vec<f64>,
    birth: Vec<Vec<f64>>,
    death: Vec<Vec<f64>>,
    exodus: Vec<Vec<f64>>,
    bulk_total: Combination,
    bulk_weighted: Combination,
    tail_up: f64,
    tail_down: f64,
    tail_inv_d: f64,
}

impl<'m> DoubleStar<'m> {
    /// Smallest admissible probe for this model and weight sequence.
    pub fn required_probe(model: &IntensityModel, weights: &WeightSequence) -> usize {
        model.stable_index().max(weights.tail_start()).max(2)
    }

    pub fn new(model: &'m IntensityModel, weights: &WeightSequence, probe: Option<usize>) -> Result<Self> {
        weights.validate()?;
        let required = Self::required_probe(model, weights);
        let probe = probe.unwrap_or(required + DEFAULT_EXTRA_PROBE);
        if probe < required {
            return Err(Error::NotStabilized { probe, required });
        }
        let ln: Vec<f64> = (0..=probe + 2).map(|n| weights.ln_weight(n)).collect();
        let up = (0..=probe).map(|i| (ln[i + 1] - ln[i]).exp()).collect();
        let down = (0..=probe)
            .map(|i| if i >= 2 { (ln[i - 1] - ln[i]).exp() } else { 0.0 })
            .collect();
        let inv_d = (0..=probe).map(|i| (-ln[i]).exp()).collect();
        let bulk_total = model
            .bulk_arrival
            .tail_combination(1)
            .ok_or_else(|| Error::DivergentSeries("sum_n r_n(t)".into()))?;
        let bulk_weighted = weights.weighted_family(&model.bulk_arrival, 1).ok_or_else(|| {
            Error::DivergentSeries(format!("sum_n d_n r_n(t) with weights {weights}"))
        })?;
        Ok(DoubleStar {
            model,
            weights: weights.clone(),
            probe,
            up,
            down,
            inv_d,
            birth: factor_table(&model.birth, probe + 1),
            death: factor_table(&model.death, probe + 1),
            exodus: factor_table(&model.exodus, probe + 1),
            bulk_total,
            bulk_weighted,
            tail_up: weights.up_ratio_sup(probe + 1),
            tail_down: weights.down_ratio_sup(probe + 1),
            tail_inv_d: (-ln[probe + 1]).exp(),
        })
    }

    pub fn probe(&self) -> usize {
        self.probe
    }

    pub fn weights(&self) -> &WeightSequence {
        &self.weights
    }

    pub fn eval(&self, t: f64) -> DoubleStarValue {
        self.eval_sided(t, false)
    }

    pub fn eval_sided(&self, t: f64, left: bool) -> DoubleStarValue {
        let m = self.model;
        let coef = |fam: &RateFamily| -> Vec<f64> {
            fam.terms
                .iter()
                .map(|k| if left { k.time.value_left(t) } else { k.time.value(t) })
                .collect()
        };
        let at = |c: &[f64], table: &[Vec<f64>], i: usize| -> f64 {
            c.iter().zip(table).map(|(x, col)| x * col[i]).sum()
        };
        let fb = coef(&m.birth);
        let fd = coef(&m.death);
        let fe = coef(&m.exodus);
        let bs = m.beta_star_sided(t, left);
        let (total, weighted) = if left {
            (self.bulk_total.value_left(t), self.bulk_weighted.value_left(t))
        } else {
            (self.bulk_total.value(t), self.bulk_weighted.value(t))
        };
        let mut best = total + bs - weighted;
        let mut argmin = 0;
        for i in 1..=self.probe {
            let lam = at(&fb, &self.birth, i);
            let mu = at(&fd, &self.death, i);
            let beta = at(&fe, &self.exodus, i);
            let origin = if i == 1 { mu + beta - bs } else { beta - bs };
            let deficit = lam * (1.0 - self.up[i]) + mu * (1.0 - self.down[i]) + beta
                - origin.abs() * self.inv_d[i];
            if deficit < best {
                best = deficit;
                argmin = i;
            }
        }
        let lam_next = at(&fb, &self.birth, self.probe + 1);
        let side = |fam: &RateFamily| -> f64 {
            fam.terms
                .iter()
                .map(|k| {
                    let f = if left { k.time.value_left(t) } else { k.time.value(t) };
                    f * k.state.limit().unwrap_or(0.0)
                })
                .sum()
        };
        let mu_inf = side(&m.death);
        let beta_inf = side(&m.exodus);
        let tail = (1.0 - self.tail_up) * lam_next + (1.0 - self.tail_down) * mu_inf + beta_inf
            - (beta_inf - bs).max(0.0) * self.tail_inv_d;
        DoubleStarValue {
            value: best.min(tail),
            probed: best,
            argmin,
            tail,
        }
    }

    /// Lipschitz constant of `t -> beta**(t)` between jumps of piecewise rates.
    pub fn lipschitz(&self) -> f64 {
        let m = self.model;
        let lb = m.beta_star_lipschitz();
        let fam = |f: &RateFamily, i: usize| f.combination_at(i).lipschitz();
        let lim = |f: &RateFamily| f.limit_combination().map_or(0.0, |c| c.lipschitz());
        let mut k = self.bulk_total.lipschitz() + self.bulk_weighted.lipschitz() + lb;
        for i in 1..=self.probe {
            let c = fam(&m.birth, i) * (self.up[i] - 1.0).abs()
                + fam(&m.death, i) * (1.0 - self.down[i]).abs()
                + fam(&m.exodus, i) * (1.0 + self.inv_d[i])
                + lb * self.inv_d[i];
            k = k.max(c);
        }
        let tail = fam(&m.birth, self.probe + 1) * (self.tail_up - 1.0).abs()
            + lim(&m.death) * (1.0 - self.tail_down).abs()
            + lim(&m.exodus) * (1.0 + self.tail_inv_d)
            + lb * self.tail_inv_d;
        k.max(tail)
    }

    /// Sampled lower bound of `beta**` over one period; with unit weights
    /// `beta** = beta*` and the profile of `beta*` is returned.
    pub fn profile(&self, grid: usize) -> Profile {
        if self.weights == WeightSequence::unit() {
            return self.model.beta_star_profile(grid);
        }
        Profile::lower_bound(
            self.model.period,
            self.model.aligned_grid(grid),
            self.lipschitz(),
            |t, left| self.eval_sided(t, left).value,
        )
    }
}

/// `beta**(t)` with the default probe depth.
pub fn beta_double_star(
    model: &IntensityModel,
    weights: &WeightSequence,
    t: f64,
    probe: Option<usize>,
) -> Result<DoubleStarValue> {
    Ok(DoubleStar::new(model, weights, probe)?.eval(t))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Nodes per period for sampled profiles and envelope certification.
    pub grid: usize,
    /// Columns evaluated exactly before the analytic tail bound.
    pub probe: Option<usize>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            grid: DEFAULT_PROFILE_GRID,
            probe: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedReport {
    pub weights: WeightSequence,
    pub w: f64,
    pub probe: usize,
    pub beta_double_star: Profile,
    pub envelope: DecayEnvelope,
    /// Whether the tail bound set `beta**` anywhere on the grid.
    pub tail_binding: bool,
}

/// Everything needed to state ergodicity and mean-convergence bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub beta_star: Profile,
    pub beta_star_mean: f64,
    pub beta_star_integral_diverges: bool,
    pub envelope: DecayEnvelope,
    pub theta: f64,
    pub diagonal_bound: DiagonalBound,
    pub weighted: Option<WeightedReport>,
}

/// Builds the contraction profiles and their envelopes. Fails with
/// [`Error::NotEssential`] when `beta*` has non-positive period mean.
pub fn ergodicity_report(
    model: &IntensityModel,
    weights: Option<&WeightSequence>,
    opts: &ReportOptions,
) -> Result<ErgodicityReport> {
    let beta_star = model.beta_star_profile(opts.grid);
    let mean = beta_star.mean();
    let envelope = decay_envelope(&beta_star, "beta_star", opts.grid)?;
    let weighted = match weights {
        None => None,
        Some(w) => {
            let ds = DoubleStar::new(model, w, opts.probe)?;
            let profile = ds.profile(opts.grid);
            let env = decay_envelope(&profile, "beta_double_star", opts.grid)?;
            let n = 256;
            let tail_binding = (0..n).any(|k| ds.eval(model.period * k as f64 / n as f64).tail_binding());
            Some(WeightedReport {
                weights: w.clone(),
                w: w.w_constant(),
                probe: ds.probe(),
                beta_double_star: profile,
                envelope: env,
                tail_binding,
            })
        }
    };
    Ok(ErgodicityReport {
        beta_star_mean: mean,
        beta_star_integral_diverges: mean > 0.0,
        theta: theta(model, opts.grid),
        diagonal_bound: model.diagonal_bound(64, 1024)?,
        envelope,
        beta_star,
        weighted,
    })
}

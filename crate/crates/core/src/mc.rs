//! Monte Carlo simulation of the process by thinning.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IntensityModel;
use crate::rate::StateFactor;

/// Bulk sizes whose remaining tail mass is below this fraction are not sampled.
pub const BULK_TAIL_CUTOFF: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub paths: usize,
    pub seed: u64,
    pub initial_state: usize,
    /// Thinning bound on the total exit rate; defaults to `2L`.
    pub majorant: Option<f64>,
    /// `S` in `Pr(X(t) <= S)`.
    pub servers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            paths: 10_000,
            seed: 1,
            initial_state: 0,
            majorant: None,
            servers: 0,
        }
    }
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    fn proportion(hits: u64, n: u64) -> Self {
        let p = hits as f64 / n as f64;
        Estimate {
            value: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }

    fn moments(sum: u128, sum_sq: u128, n: u64) -> Self {
        let nf = n as f64;
        let m = sum as f64 / nf;
        let var = if n > 1 {
            ((sum_sq as f64 - nf * m * m) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            value: m,
            stderr: (var / nf).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub paths: usize,
    pub seed: u64,
    pub majorant: f64,
    pub servers: usize,
    pub times: Vec<f64>,
    pub p0: Vec<Estimate>,
    pub at_most_servers: Vec<Estimate>,
    pub mean: Vec<Estimate>,
}

impl SimulationResult {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "p0", "p0_se", "p_le_s", "p_le_s_se", "mean", "mean_se"])?;
        for k in 0..self.times.len() {
            let (a, b, c) = (self.p0[k], self.at_most_servers[k], self.mean[k]);
            w.write_record(
                [self.times[k], a.value, a.stderr, b.value, b.stderr, c.value, c.stderr].map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Default)]
struct Tally {
    zero: Vec<u64>,
    at_most: Vec<u64>,
    sum: Vec<u128>,
    sum_sq: Vec<u128>,
}

impl Tally {
    fn new(k: usize) -> Self {
        Tally {
            zero: vec![0; k],
            at_most: vec![0; k],
            sum: vec![0; k],
            sum_sq: vec![0; k],
        }
    }

    fn record(&mut self, k: usize, state: usize, servers: usize) {
        self.zero[k] += (state == 0) as u64;
        self.at_most[k] += (state <= servers) as u64;
        self.sum[k] += state as u128;
        self.sum_sq[k] += (state as u128) * (state as u128);
    }

    fn merge(mut self, o: Tally) -> Tally {
        for k in 0..self.zero.len() {
            self.zero[k] += o.zero[k];
            self.at_most[k] += o.at_most[k];
            self.sum[k] += o.sum[k];
            self.sum_sq[k] += o.sum_sq[k];
        }
        self
    }
}

struct Simulator<'m> {
    model: &'m IntensityModel,
    majorant: f64,
    /// `sum_{n >= 1} s(n)` per bulk-arrival term.
    bulk_mass: Vec<f64>,
}

impl<'m> Simulator<'m> {
    fn new(model: &'m IntensityModel, majorant: Option<f64>) -> Result<Self> {
        let bound = model.diagonal_bound(64, 1024)?;
        let majorant = majorant.unwrap_or(2.0 * bound.value());
        if !(majorant >= bound.computed) || !majorant.is_finite() {
            return Err(Error::MajorantViolated {
                majorant,
                rate: bound.computed,
                state: 0,
                t: 0.0,
            });
        }
        let bulk_mass = model
            .bulk_arrival
            .terms
            .iter()
            .map(|k| k.state.tail_sum(1))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::DivergentSeries("sum_n r_n(t)".into()))?;
        Ok(Simulator {
            model,
            majorant,
            bulk_mass,
        })
    }

    fn bulk_size(&self, factor: &StateFactor, mass: f64, u: f64) -> usize {
        if let StateFactor::Geometric { ratio } = factor {
            // P(n) = (1 - q) q^{n-1}
            let q = *ratio;
            if q <= 0.0 {
                return 1;
            }
            return 1 + ((1.0 - u).ln() / q.ln()).floor().max(0.0) as usize;
        }
        let goal = u * mass;
        let mut acc = 0.0;
        let mut n = 1usize;
        loop {
            acc += factor.at(n);
            if acc >= goal || mass - acc < BULK_TAIL_CUTOFF * mass {
                return n;
            }
            n += 1;
        }
    }

    fn path(&self, path: u64, seed: u64, start: usize, times: &[f64], servers: usize, tally: &mut Tally) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        let m = self.model;
        let horizon = times.last().copied().unwrap_or(0.0);
        let mut state = start;
        let mut t = 0.0;
        let mut next = 0;
        loop {
            let dt = if self.majorant > 0.0 {
                -(1.0 - rng.random::<f64>()).ln() / self.majorant
            } else {
                f64::INFINITY
            };
            let t_new = t + dt;
            while next < times.len() && times[next] < t_new {
                tally.record(next, state, servers);
                next += 1;
            }
            if t_new > horizon {
                return Ok(());
            }
            t = t_new;
            let u = rng.random::<f64>() * self.majorant;
            if state == 0 {
                let parts: Vec<f64> = m
                    .bulk_arrival
                    .terms
                    .iter()
                    .zip(&self.bulk_mass)
                    .map(|(k, s)| k.time.value(t) * s)
                    .collect();
                let rate: f64 = parts.iter().sum();
                if rate > self.majorant {
                    return Err(Error::MajorantViolated {
                        majorant: self.majorant,
                        rate,
                        state,
                        t,
                    });
                }
                let mut acc = 0.0;
                for (i, p) in parts.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        let v = rng.random::<f64>();
                        state = self.bulk_size(&m.bulk_arrival.terms[i].state, self.bulk_mass[i], v);
                        break;
                    }
                }
            } else {
                let lam = m.birth.value(state, t);
                let mu = m.death.value(state, t);
                let beta = m.exodus.value(state, t);
                let rate = lam + mu + beta;
                if rate > self.majorant {
                    return Err(Error::MajorantViolated {
                        majorant: self.majorant,
                        rate,
                        state,
                        t,
                    });
                }
                if u < lam {
                    state += 1;
                } else if u < lam + mu {
                    state -= 1;
                } else if u < rate {
                    state = 0;
                }
            }
        }
    }
}

/// Estimates `Pr(X=0)`, `Pr(X<=S)` and `E X` at each of `times` (sorted).
///
/// Paths use independent ChaCha8 streams of one seed and integer tallies,
/// so results do not depend on the thread count.
pub fn simulate(model: &IntensityModel, cfg: &SimConfig, times: &[f64]) -> Result<SimulationResult> {
    if cfg.paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("observation times must be sorted, finite and >= 0".into()));
    }
    let sim = Simulator::new(model, cfg.majorant)?;
    let k = times.len();
    let tally = (0..cfg.paths as u64)
        .into_par_iter()
        .try_fold(
            || Tally::new(k),
            |mut acc, p| {
                sim.path(p, cfg.seed, cfg.initial_state, times, cfg.servers, &mut acc)?;
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(|| Tally::new(k), |a, b| Ok(a.merge(b)))?;
    let n = cfg.paths as u64;
    Ok(SimulationResult {
        paths: cfg.paths,
        seed: cfg.seed,
        majorant: sim.majorant,
        servers: cfg.servers,
        times: times.to_vec(),
        p0: tally.zero.iter().map(|&h| Estimate::proportion(h, n)).collect(),
        at_most_servers: tally.at_most.iter().map(|&h| Estimate::proportion(h, n)).collect(),
        mean: (0..k).map(|i| Estimate::moments(tally.sum[i], tally.sum_sq[i], n)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::{RateFamily, RateFunction};

    fn two_state(a: f64, b: f64) -> IntensityModel {
        IntensityModel::new(
            1.0,
            RateFamily::zero(),
            RateFamily::term(RateFunction::constant(b), StateFactor::One),
            RateFamily::zero(),
            RateFamily::term(
                RateFunction::constant(a),
                StateFactor::Explicit {
                    values: vec![1.0],
                    tail: 0.0,
                },
            ),
        )
        .unwrap()
    }

    #[test]
    fn two_state_matches_closed_form() {
        let (a, b) = (0.7, 1.9);
        let m = two_state(a, b);
        let cfg = SimConfig {
            paths: 40_000,
            seed: 7,
            ..Default::default()
        };
        let r = simulate(&m, &cfg, &[0.3, 1.0, 2.5]).unwrap();
        for (i, &t) in r.times.iter().enumerate() {
            let exact = b / (a + b) + a / (a + b) * (-(a + b) * t).exp();
            assert!((r.p0[i].value - exact).abs() < 4.0 * r.p0[i].stderr.max(1e-3));
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let m = crate::presets::example(1).unwrap().model;
        let cfg = SimConfig {
            paths: 500,
            seed: 11,
            servers: 3,
            ..Default::default()
        };
        let a = simulate(&m, &cfg, &[0.5, 1.0]).unwrap();
        let b = simulate(&m, &cfg, &[0.5, 1.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_majorant_rejected() {
        let m = crate::presets::example(1).unwrap().model;
        let cfg = SimConfig {
            majorant: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(simulate(&m, &cfg, &[1.0]), Err(Error::MajorantViolated { .. })));
    }

    #[test]
    fn geometric_bulk_sizes() {
        let m = crate::presets::example(1).unwrap().model;
        let sim = Simulator::new(&m, None).unwrap();
        let f = StateFactor::Geometric { ratio: 0.25 };
        assert_eq!(sim.bulk_size(&f, 1.0 / 3.0, 0.0), 1);
        assert_eq!(sim.bulk_size(&f, 1.0 / 3.0, 0.74), 1);
        assert_eq!(sim.bulk_size(&f, 1.0 / 3.0, 0.76), 2);
    }
}

//! Forward Kolmogorov integration on `{0..N}` and the limiting-regime driver.

use serde::{Deserialize, Serialize};

use crate::bounds::{ergodicity_bound, ergodicity_report, ErgodicityReport, ReportOptions, WeightSequence};
use crate::error::{Error, Result};
use crate::model::{Boundary, GeneratorSlice, IntensityModel, SliceBuilder, Variant};
use crate::truncation::{select_truncation, BoundCertificate, Constants, Criterion, TruncationSetup, DEFAULT_LEVEL_CAP};

/// Entries below this are reported as a loss of positivity.
pub const NEGATIVE_TOLERANCE: f64 = 1e-8;

/// Largest admissible `step * 2L`.
pub const STEP_STABILITY_LIMIT: f64 = 0.5;

/// Probabilities on `{0..N}` at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    pub time: f64,
    pub values: Vec<f64>,
}

impl ProbabilityVector {
    /// Point mass at `state`.
    pub fn delta(state: usize, level: usize) -> Result<Self> {
        if state > level {
            return Err(Error::InitialStateOutside { state, level });
        }
        let mut values = vec![0.0; level + 1];
        values[state] = 1.0;
        Ok(ProbabilityVector { time: 0.0, values })
    }

    pub fn level(&self) -> usize {
        self.values.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        mean_of(&self.values)
    }

    /// `Pr(X <= s)`.
    pub fn at_most(&self, s: usize) -> f64 {
        self.values.iter().take(s + 1).sum()
    }

    /// Negative round-off set to zero.
    pub fn clamped(&self) -> Self {
        ProbabilityVector {
            time: self.time,
            values: self.values.iter().map(|v| v.max(0.0)).collect(),
        }
    }
}

/// `sum_i i p_i`.
pub fn mean_of(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(i, v)| i as f64 * v).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    /// RK4 step; defaults to `min(0.01, 0.1 / L)`, shortened so that an even
    /// number of steps spans each output interval.
    pub step: Option<f64>,
    /// Output samples per model period.
    pub samples_per_period: usize,
    /// Also run with twice the step and report the step-doubling estimate.
    pub error_estimate: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            step: None,
            samples_per_period: 100,
            error_estimate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub level: usize,
    pub variant: Variant,
    pub boundary: Boundary,
    pub step: f64,
    /// `max_k ||y_h(t_k) - y_2h(t_k)||_1 / 15`.
    pub error_estimate: Option<f64>,
    pub states: Vec<ProbabilityVector>,
}

impl Trajectory {
    pub fn last(&self) -> &ProbabilityVector {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Output closest to `t`.
    pub fn at(&self, t: f64) -> &ProbabilityVector {
        self.states
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
            .expect("trajectory holds at least the initial state")
    }
}

struct Rk4<'a> {
    builder: SliceBuilder<'a>,
    slice: GeneratorSlice,
    forcing: bool,
    model: &'a IntensityModel,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Rk4<'a> {
    fn new(model: &'a IntensityModel, level: usize, variant: Variant, boundary: Boundary) -> Result<Self> {
        let builder = SliceBuilder::new(model, level, variant, boundary)?;
        let slice = builder.empty();
        let d = level + 1;
        Ok(Rk4 {
            builder,
            slice,
            forcing: variant == Variant::Shifted,
            model,
            k: [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]],
            tmp: vec![0.0; d],
        })
    }

    /// `out = B(t) y + g(t)`, one-sided at the end of a step.
    fn rhs(&mut self, t: f64, left: bool, y: &[f64], slot: usize) {
        self.builder.fill(&mut self.slice, t, left);
        self.slice.apply(y, &mut self.k[slot]);
        if self.forcing {
            self.k[slot][0] += self.model.beta_star_sided(t, left);
        }
    }

    fn step(&mut self, t: f64, h: f64, y: &mut [f64]) {
        let d = y.len();
        self.rhs(t, false, y, 0);
        for i in 0..d {
            self.tmp[i] = y[i] + 0.5 * h * self.k[0][i];
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.rhs(t + 0.5 * h, false, &tmp, 1);
        let mut tmp = tmp;
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * self.k[1][i];
        }
        self.rhs(t + 0.5 * h, false, &tmp, 2);
        for i in 0..d {
            tmp[i] = y[i] + h * self.k[2][i];
        }
        self.rhs(t + h, true, &tmp, 3);
        self.tmp = tmp;
        for i in 0..d {
            y[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
    }
}

fn output_times(model: &IntensityModel, t0: f64, t1: f64, samples: usize) -> Vec<f64> {
    let spacing = model.period / samples as f64;
    let count = ((t1 - t0) / spacing - 1e-9).ceil().max(0.0) as usize;
    let mut times: Vec<f64> = (0..count).map(|k| t0 + k as f64 * spacing).collect();
    times.push(t1);
    times
}

fn run(
    model: &IntensityModel,
    level: usize,
    y0: &[f64],
    times: &[f64],
    coarse_step: f64,
    refine: usize,
    variant: Variant,
    boundary: Boundary,
    check: bool,
) -> Result<Vec<ProbabilityVector>> {
    let mut rk = Rk4::new(model, level, variant, boundary)?;
    let mut y = y0.to_vec();
    let mut out = vec![ProbabilityVector {
        time: times[0],
        values: y.clone(),
    }];
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = ((b - a) / coarse_step - 1e-9).ceil().max(1.0) as usize * refine;
        let h = (b - a) / n as f64;
        for k in 0..n {
            let t = a + k as f64 * h;
            rk.step(t, h, &mut y);
            if check {
                if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| **v < -NEGATIVE_TOLERANCE) {
                    return Err(Error::NegativeProbability {
                        index,
                        value,
                        t: t + h,
                    });
                }
            }
        }
        out.push(ProbabilityVector {
            time: b,
            values: y.clone(),
        });
    }
    Ok(out)
}

/// Integrates `dy/dt = B(t) y + g(t)` from `y0` at `t0` to `t1`.
///
/// `Shifted` uses `A*_N` with forcing `g = beta* e_0`; `Plain` uses `A_N`
/// without forcing. Both agree on probability vectors when columns conserve
/// mass.
pub fn integrate_with(
    model: &IntensityModel,
    y0: &ProbabilityVector,
    t1: f64,
    opts: &IntegrateOptions,
    variant: Variant,
    boundary: Boundary,
) -> Result<Trajectory> {
    let level = y0.level();
    let t0 = y0.time;
    if !(t1 >= t0 && t0 >= 0.0 && t1.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad integration interval [{t0}, {t1}]")));
    }
    if opts.samples_per_period < 1 {
        return Err(Error::InvalidArgument("samples_per_period must be >= 1".into()));
    }
    let l = model.diagonal_bound(level.min(64).max(1), 1024)?.value();
    let step = opts.step.unwrap_or_else(|| if l > 0.0 { 0.01f64.min(0.1 / l) } else { 0.01 });
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if step * 2.0 * l > STEP_STABILITY_LIMIT {
        return Err(Error::StepTooLarge { step, l });
    }
    let times = output_times(model, t0, t1, opts.samples_per_period);
    let spacing = model.period / opts.samples_per_period as f64;
    // an even number of steps per output interval, so the doubled step lands on the same outputs
    let pairs = (spacing / (2.0 * step) - 1e-9).ceil().max(1.0);
    let coarse_step = spacing / pairs;
    let states = run(model, level, &y0.values, &times, coarse_step, 2, variant, boundary, true)?;
    let step = 0.5 * coarse_step;
    let error_estimate = if opts.error_estimate {
        let coarse = run(model, level, &y0.values, &times, coarse_step, 1, variant, boundary, false)?;
        let e = states
            .iter()
            .zip(&coarse)
            .map(|(f, c)| f.values.iter().zip(&c.values).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Some(e / 15.0)
    } else {
        None
    };
    Ok(Trajectory {
        level,
        variant,
        boundary,
        step,
        error_estimate,
        states,
    })
}

/// Truncated chain on `{0..N}` in shifted form (the operator the bounds refer to).
pub fn integrate(model: &IntensityModel, y0: &ProbabilityVector, t1: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    integrate_with(model, y0, t1, opts, Variant::Shifted, Boundary::Conservative)
}

/// Reference solution of the unshifted system with full outflow on the
/// diagonals; take `N` large.
pub fn solve_full_system(
    model: &IntensityModel,
    y0: &ProbabilityVector,
    t1: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    integrate_with(model, y0, t1, opts, Variant::Plain, Boundary::Leaky)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeOptions {
    /// Replace the self-certified constants.
    pub constants: Option<Constants>,
    /// Fixed window `[t*, t*+1]` instead of the first time the ergodicity bound allows.
    pub window_start: Option<f64>,
    pub integrate: IntegrateOptions,
    pub report: ReportOptions,
    pub criterion: Criterion,
    pub level_cap: usize,
}

impl Default for RegimeOptions {
    fn default() -> Self {
        RegimeOptions {
            constants: None,
            window_start: None,
            integrate: IntegrateOptions::default(),
            report: ReportOptions::default(),
            criterion: Criterion::Both,
            level_cap: DEFAULT_LEVEL_CAP,
        }
    }
}

/// One period of the limiting regime started from state 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitingRegime {
    pub target: f64,
    pub servers: usize,
    pub window: [f64; 2],
    /// `2 exp(-int_0^{t*} beta*)` (or its envelope form when smaller).
    pub ergodicity_at_start: f64,
    pub certificate: BoundCertificate,
    pub times: Vec<f64>,
    pub p0: Vec<f64>,
    pub at_most_servers: Vec<f64>,
    pub mean: Vec<f64>,
    pub tv_bound: Vec<f64>,
    pub mean_bound: Vec<Option<f64>>,
    /// `||p(t*+1) - p(t*)||_1`.
    pub periodicity_defect: f64,
    /// Whether the defect stays within the ergodicity bound plus the integration error.
    pub periodicity_ok: bool,
    /// Truncation certificate met and `ergodicity_at_start <= target / 2`.
    pub met: bool,
    pub step: f64,
    pub error_estimate: Option<f64>,
}

fn first_integer_time(report: &ErgodicityReport, target: f64) -> Result<f64> {
    for k in 0..100_000u32 {
        let t = k as f64;
        if ergodicity_bound(&report.beta_star, &report.envelope, t).best() <= target {
            return Ok(t);
        }
    }
    Err(Error::TargetUnreachable {
        target,
        cap: 100_000,
        floor: ergodicity_bound(&report.beta_star, &report.envelope, 1e5).best(),
    })
}

/// Splits `target` evenly between truncation and distance to the limiting
/// regime, picks the window and level, and integrates from state 0.
pub fn limiting_regime(
    model: &IntensityModel,
    weights: &WeightSequence,
    target: f64,
    servers: usize,
    opts: &RegimeOptions,
) -> Result<LimitingRegime> {
    if !(target > 0.0) {
        return Err(Error::InvalidArgument(format!("target must be positive, got {target}")));
    }
    let half = 0.5 * target;
    let report = ergodicity_report(model, Some(weights), &opts.report)?;
    let t_star = match opts.window_start {
        Some(t) => t,
        None => first_integer_time(&report, half)?,
    };
    let window = [t_star, t_star + model.period];
    let constants = match opts.constants {
        Some(c) => c,
        None => Constants::from_report(&report)?,
    };
    let setup = TruncationSetup::new(model, weights.clone(), constants, 0)?;
    let certificate = select_truncation(&setup, half, window, opts.criterion, opts.level_cap)?;
    let level = certificate.level;
    let traj = integrate(model, &ProbabilityVector::delta(0, level)?, window[1], &opts.integrate)?;
    let period: Vec<&ProbabilityVector> = traj
        .states
        .iter()
        .filter(|p| p.time >= t_star - 1e-9)
        .collect();
    let first = period.first().expect("window lies inside the trajectory");
    let last = traj.last();
    let defect: f64 = first.values.iter().zip(&last.values).map(|(a, b)| (a - b).abs()).sum();
    let ergodicity_at_start = ergodicity_bound(&report.beta_star, &report.envelope, t_star).best();
    let slack = traj.error_estimate.unwrap_or(0.0) * 2.0 + 1e-9;
    Ok(LimitingRegime {
        met: certificate.met && ergodicity_at_start <= half,
        target,
        servers,
        window,
        ergodicity_at_start,
        periodicity_ok: defect <= ergodicity_at_start + slack,
        periodicity_defect: defect,
        times: period.iter().map(|p| p.time).collect(),
        p0: period.iter().map(|p| p.values[0].max(0.0)).collect(),
        at_most_servers: period.iter().map(|p| p.clamped().at_most(servers)).collect(),
        mean: period.iter().map(|p| p.clamped().mean()).collect(),
        tv_bound: period.iter().map(|p| certificate.tv_at(p.time)).collect(),
        mean_bound: period.iter().map(|p| certificate.mean_at(p.time)).collect(),
        step: traj.step,
        error_estimate: traj.error_estimate,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::rate::{RateFamily, RateFunction, StateFactor};

    fn two_state(a: f64, b: f64) -> IntensityModel {
        // 0 -> 1 at rate a (bulk of size 1), 1 -> 0 at rate b (death).
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
    fn two_state_closed_form() {
        let (a, b) = (0.7, 1.9);
        let m = two_state(a, b);
        let p0 = ProbabilityVector::delta(0, 1).unwrap();
        let opts = IntegrateOptions {
            step: Some(0.002),
            ..Default::default()
        };
        let traj = solve_full_system(&m, &p0, 3.0, &opts).unwrap();
        for p in &traj.states {
            let exact = b / (a + b) + a / (a + b) * (-(a + b) * p.time).exp();
            assert!((p.values[0] - exact).abs() < 1e-10, "t={} {} vs {}", p.time, p.values[0], exact);
        }
    }

    #[test]
    fn shifted_and_plain_agree() {
        let m = presets::example(1).unwrap().model;
        let p0 = ProbabilityVector::delta(0, 100).unwrap();
        let opts = IntegrateOptions {
            error_estimate: false,
            ..Default::default()
        };
        let a = integrate_with(&m, &p0, 2.0, &opts, Variant::Shifted, Boundary::Conservative).unwrap();
        let b = integrate_with(&m, &p0, 2.0, &opts, Variant::Plain, Boundary::Conservative).unwrap();
        let c = solve_full_system(&m, &p0, 2.0, &opts).unwrap();
        for ((x, y), z) in a.states.iter().zip(&b.states).zip(&c.states) {
            for i in 0..=100 {
                assert!((x.values[i] - y.values[i]).abs() < 1e-10);
                assert!((x.values[i] - z.values[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mass_is_conserved() {
        let m = presets::example(3).unwrap().model;
        let traj = integrate(&m, &ProbabilityVector::delta(2, 40).unwrap(), 1.5, &IntegrateOptions::default()).unwrap();
        for p in &traj.states {
            assert!((p.total() - 1.0).abs() < 1e-12);
        }
        assert_eq!(traj.states.len(), 151);
    }

    #[test]
    fn step_too_large_is_refused() {
        let m = presets::example(1).unwrap().model;
        let opts = IntegrateOptions {
            step: Some(0.1),
            ..Default::default()
        };
        let r = integrate(&m, &ProbabilityVector::delta(0, 10).unwrap(), 1.0, &opts);
        assert!(matches!(r, Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn initial_state_outside_level() {
        assert!(matches!(
            ProbabilityVector::delta(5, 3),
            Err(Error::InitialStateOutside { state: 5, level: 3 })
        ));
    }

    #[test]
    fn mean_of_examples() {
        assert_eq!(mean_of(&[0.5, 0.25, 0.25]), 0.75);
        assert_eq!(mean_of(&[1.0]), 0.0);
    }
}

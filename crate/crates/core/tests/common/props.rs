//! Randomized model strategies and the invariant checks run on them.

use bdcert::bounds::{decay_envelope, log_norm};
use bdcert::mc::{simulate, SimConfig};
use bdcert::model::{build_generator, Boundary, IntensityModel, Variant};
use bdcert::profile::Profile;
use bdcert::rate::{Combination, RateFamily, RateFunction, StateFactor};
use bdcert::solver::{integrate, IntegrateOptions, ProbabilityVector};
use bdcert::truncation::{Constants, TruncationSetup};
use bdcert::WeightSequence;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

type Check = Result<(), TestCaseError>;

/// Nonnegative periodic time part; piecewise and tabulated nodes divide 10.
pub fn time_part(scale: f64) -> impl Strategy<Value = RateFunction> {
    prop_oneof![
        (0.0..scale).prop_map(RateFunction::constant),
        (0.0..scale, -1.0..1.0f64, -1.0..1.0f64).prop_map(move |(m, s, c)| {
            let amp = (s * s + c * c).sqrt().max(1e-12);
            let k = m / amp;
            RateFunction::sinusoid(m, s * k.min(1.0) * 0.999, c * k.min(1.0) * 0.999, 1.0)
        }),
        (prop::sample::select(vec![2usize, 5, 10]), prop::collection::vec(0.0..scale, 10))
            .prop_map(|(n, v)| RateFunction::Piecewise { values: v[..n].to_vec(), period: 1.0 }),
        (prop::sample::select(vec![2usize, 5, 10]), prop::collection::vec(0.0..scale, 10))
            .prop_map(|(n, v)| RateFunction::Tabulated { values: v[..n].to_vec(), period: 1.0 }),
    ]
}

fn bounded_factor() -> impl Strategy<Value = StateFactor> {
    prop_oneof![
        Just(StateFactor::One),
        (1usize..5).prop_map(|cap| StateFactor::MinCap { cap }),
    ]
}

fn vanishing_factor() -> impl Strategy<Value = StateFactor> {
    prop_oneof![
        (0.05..0.7f64).prop_map(|ratio| StateFactor::Geometric { ratio }),
        (2.5..10.0f64).prop_map(|exponent| StateFactor::Power { exponent }),
        prop::collection::vec(0.0..1.0f64, 1..6).prop_map(|values| StateFactor::Explicit { values, tail: 0.0 }),
    ]
}

pub fn model() -> impl Strategy<Value = IntensityModel> {
    (
        time_part(2.0),
        bounded_factor(),
        time_part(2.0),
        bounded_factor(),
        (0.2..2.0f64, -1.0..1.0f64, -1.0..1.0f64),
        prop::option::of((time_part(1.0), vanishing_factor())),
        time_part(2.0),
        vanishing_factor(),
    )
        .prop_map(|(lt, lf, mt, mf, (bm, bs, bc), extra, rt, rf)| {
            let amp = (bs * bs + bc * bc).sqrt().max(1e-12);
            let k = (0.9 * bm / amp).min(1.0);
            let mut exodus = RateFamily::term(RateFunction::sinusoid(bm, bs * k, bc * k, 1.0), StateFactor::One);
            if let Some((t, f)) = extra {
                exodus = exodus.with(t, f);
            }
            IntensityModel::new(
                1.0,
                RateFamily::term(lt, lf),
                RateFamily::term(mt, mf),
                exodus,
                RateFamily::term(rt, rf),
            )
            .unwrap()
        })
}

pub fn smooth_model() -> impl Strategy<Value = IntensityModel> {
    model().prop_filter("moderate stiffness", |m| m.diagonal_bound(64, 256).unwrap().computed < 8.0)
}

fn column_sum(m: &IntensityModel, n: usize, t: f64, v: Variant, b: Boundary) -> Vec<f64> {
    let s = build_generator(m, n, t, v, b).unwrap();
    (0..=n).map(|j| s.column_sum(j)).collect()
}

pub fn check_column_sums(m: &IntensityModel, n: usize, t: f64) -> Check {
    let tol = 1e-12 * (1.0 + m.diagonal_bound(64, 64).unwrap().computed);
    let leaky = column_sum(m, n, t, Variant::Plain, Boundary::Leaky);
    let lam_n = m.birth.value(n, t);
    for (j, s) in leaky.iter().enumerate() {
        let expected = if j == 0 {
            -m.bulk_tail(n + 1, t)
        } else if j == n {
            -lam_n
        } else {
            0.0
        };
        prop_assert!((s - expected).abs() <= tol, "column {} sum {} vs {}", j, s, expected);
    }
    for s in column_sum(m, n, t, Variant::Plain, Boundary::Conservative) {
        prop_assert!(s.abs() <= tol);
    }
    let bs = m.beta_star(t);
    for b in [Boundary::Leaky, Boundary::Conservative] {
        let plain = column_sum(m, n, t, Variant::Plain, b);
        let shifted = column_sum(m, n, t, Variant::Shifted, b);
        for j in 0..=n {
            prop_assert!((shifted[j] - plain[j] + bs).abs() <= tol);
        }
    }
    let s = build_generator(m, n, t, Variant::Plain, Boundary::Leaky).unwrap();
    for j in 0..=n {
        for (r, v) in s.column(j) {
            prop_assert!(r == j || v >= 0.0);
        }
    }
    Ok(())
}

pub fn check_log_norm(m: &IntensityModel, t: f64) -> Check {
    let bs = m.beta_star(t);
    let tol = 1e-12 * (1.0 + m.diagonal_bound(64, 64).unwrap().computed);
    let mut prev = f64::NEG_INFINITY;
    for n in [1usize, 2, 4, 16, 64] {
        let g = log_norm(&build_generator(m, n, t, Variant::Shifted, Boundary::Leaky).unwrap());
        prop_assert!(g >= prev - tol);
        prev = g;
        if n >= 2 {
            prop_assert!((g + bs).abs() <= tol, "N={} gamma={} beta*={}", n, g, bs);
        }
        let c = log_norm(&build_generator(m, n, t, Variant::Shifted, Boundary::Conservative).unwrap());
        prop_assert!((c + bs).abs() <= tol);
    }
    Ok(())
}

pub fn check_reconstruction(m: &IntensityModel, n: usize, t: f64, raw: &[f64]) -> Check {
    let total: f64 = raw[..=n].iter().sum::<f64>().max(1e-9);
    let y: Vec<f64> = raw[..=n].iter().map(|v| v / total).collect();
    let big_n = n + 120;
    let small = build_generator(m, n, t, Variant::Shifted, Boundary::Conservative).unwrap();
    let big = build_generator(m, big_n, t, Variant::Shifted, Boundary::Leaky).unwrap();
    let mut ys = vec![0.0; n + 1];
    small.apply(&y, &mut ys);
    let mut padded = y.clone();
    padded.resize(big_n + 1, 0.0);
    let mut yb = vec![0.0; big_n + 1];
    big.apply(&padded, &mut yb);
    let direct: f64 = (0..=big_n)
        .map(|r| (ys.get(r).copied().unwrap_or(0.0) - yb[r]).abs())
        .sum::<f64>()
        + m.bulk_tail(big_n + 1, t) * y[0];
    let formula = 2.0 * m.bulk_tail(n + 1, t) * y[0] + 2.0 * m.birth.value(n, t) * y[n];
    prop_assert!((direct - formula).abs() <= 1e-12 * (1.0 + formula), "{} vs {}", direct, formula);
    Ok(())
}

pub fn check_tv_monotone(m: &IntensityModel, ratio: f64, k: (f64, f64, f64, f64), t: f64) -> Check {
    let (big_m, a, m1, a1) = k;
    let k = Constants { l: m.diagonal_bound(64, 256).unwrap().value(), m: big_m, a, m1, a1, theta: 3.0 };
    let setup = TruncationSetup::new(m, WeightSequence::Geometric { ratio }, k, 0).unwrap();
    let mut prev = f64::INFINITY;
    for n in 1..60 {
        let i = setup.inputs(n).unwrap();
        let v = i.tv_bound(t);
        prop_assert!(v <= prev * (1.0 + 1e-12));
        prop_assert!(i.tv_bound(t + 1.0) <= v * (1.0 + 1e-12));
        prop_assert!(v >= i.tv_floor());
        prev = v;
    }
    Ok(())
}

pub fn check_envelope(f: &RateFunction, shift: f64, pairs: &[(f64, f64)]) -> Check {
    let mut c = Combination::constant(shift);
    c.add(1.0, f);
    let p = Profile::closed(c);
    let env = decay_envelope(&p, "f", 2048).unwrap();
    prop_assert!(env.certify(&p, 8192).unwrap() <= 1e-12);
    for &(s, dt) in pairs {
        let lhs = (-(p.integral(s + dt) - p.integral(s))).exp();
        prop_assert!(lhs <= env.at(dt) * (1.0 + 1e-9), "s={} dt={} {} > {}", s, dt, lhs, env.at(dt));
    }
    Ok(())
}

/// Step-halving ratio of the error estimate; `None` when both are at round-off.
pub fn rk4_order_factor(m: &IntensityModel, k: usize) -> Option<f64> {
    let p0 = ProbabilityVector::delta(k, 12).unwrap();
    let est = |step: f64| {
        let opts = IntegrateOptions { step: Some(step), samples_per_period: 10, error_estimate: true };
        integrate(m, &p0, 2.0, &opts).unwrap().error_estimate.unwrap()
    };
    let coarse = est(0.025);
    (coarse > 1e-11).then(|| coarse / est(0.0125))
}

pub fn check_rk4_order(m: &IntensityModel, k: usize) -> Check {
    if let Some(factor) = rk4_order_factor(m, k) {
        prop_assert!((8.0..=32.0).contains(&factor), "factor {}", factor);
    }
    Ok(())
}

pub fn check_seed_determinism(m: &IntensityModel, seed: u64) -> Check {
    let cfg = SimConfig { paths: 300, seed, servers: 2, ..Default::default() };
    let times = [0.5, 1.0, 1.7];
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()
        .install(|| simulate(m, &cfg, &times).unwrap());
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap()
        .install(|| simulate(m, &cfg, &times).unwrap());
    prop_assert_eq!(&one, &many);
    let again = simulate(m, &cfg, &times).unwrap();
    prop_assert_eq!(&one, &again);
    Ok(())
}

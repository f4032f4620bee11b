//! Comparisons against independently computed reference values.

mod common;

use approx::assert_relative_eq;
use bdcert::bounds::{decay_envelope, DoubleStar};
use bdcert::model::IntensityModel;
use bdcert::presets;
use bdcert::rate::{Combination, RateFunction};
use bdcert::solver::{integrate, solve_full_system, IntegrateOptions, ProbabilityVector};
use bdcert::truncation::remainder;
use bdcert::{ergodicity_report, ReportOptions, WeightSequence};
use common::{dense_generator, expm, piecewise_model};

#[test]
fn rk4_matches_matrix_exponential_on_piecewise_model() {
    let m = piecewise_model();
    let n = 5;
    let opts = IntegrateOptions::default();
    let traj = integrate(&m, &ProbabilityVector::delta(1, n).unwrap(), 2.0, &opts).unwrap();
    let mut p = nalgebra::DVector::from_element(n + 1, 0.0);
    p[1] = 1.0;
    for k in 0..8 {
        let a = k as f64 * 0.25;
        let b = dense_generator(&m, n, a + 0.125);
        p = expm(&(b * 0.25)) * p;
        let y = &traj.at(a + 0.25).values;
        for i in 0..=n {
            assert!((y[i] - p[i]).abs() < 1e-8, "t={} i={} {} vs {}", a + 0.25, i, y[i], p[i]);
        }
    }
}

#[test]
fn beta_double_star_is_below_every_column_deficit() {
    for ex in [1usize, 2, 3] {
        let p = presets::example(ex).unwrap();
        let ds = DoubleStar::new(&p.model, &p.weights, None).unwrap();
        for k in 0..16 {
            let t = k as f64 / 16.0;
            let v = ds.eval(t).value;
            let brute = common::brute_deficits(&p.model, &p.weights, t, ds.probe() + 50);
            let min = brute.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(v <= min + 1e-9, "example{ex} t={t}: {v} > {min}");
            if !ds.eval(t).tail_binding() {
                assert!((v - min).abs() < 1e-9, "example{ex} t={t}: {v} vs {min}");
            }
        }
    }
}

#[test]
fn remainder_matches_direct_sum() {
    for (ex, n) in [(1usize, 2usize), (1, 30), (2, 55), (4, 220)] {
        let m = presets::example(ex).unwrap().model;
        let direct = (0..256)
            .map(|k| {
                let t = k as f64 / 256.0;
                (n + 1..n + 20_000).map(|j| m.bulk_arrival.value(j, t)).sum::<f64>()
            })
            .fold(0.0, f64::max);
        let r = remainder(&m, n).unwrap();
        assert!(r >= direct * (1.0 - 1e-9));
        assert!(r <= direct * (1.0 + 1e-5) + 1e-300, "example{ex} N={n}: {r} vs {direct}");
    }
}

#[test]
fn cosine_envelope_constant() {
    let mut c = Combination::default();
    c.add(1.0, &RateFunction::sinusoid(2.0, 0.0, 1.0, 1.0));
    let e = decay_envelope(&bdcert::profile::Profile::closed(c), "f", 4096).unwrap();
    assert_eq!(e.a, 2.0);
    assert!((e.m - (1.0 / std::f64::consts::PI).exp()).abs() < 1e-6);
}

#[test]
fn contraction_from_two_initial_states() {
    let p = presets::example(1).unwrap();
    let rep = ergodicity_report(&p.model, Some(&p.weights), &ReportOptions::default()).unwrap();
    let w = rep.weighted.as_ref().unwrap();
    let n = 60;
    let opts = IntegrateOptions::default();
    let a = integrate(&p.model, &ProbabilityVector::delta(0, n).unwrap(), 10.0, &opts).unwrap();
    let b = integrate(&p.model, &ProbabilityVector::delta(5, n).unwrap(), 10.0, &opts).unwrap();
    for t in 1..=10 {
        let t = t as f64;
        let (x, y) = (&a.at(t).values, &b.at(t).values);
        let l1: f64 = x.iter().zip(y).map(|(u, v)| (u - v).abs()).sum();
        let weighted: f64 = (0..=n).map(|i| p.weights.weight(i) * (x[i] - y[i]).abs()).sum();
        let exact = 2.0 * (-rep.beta_star.integral(t)).exp();
        assert!(l1 <= 4.0 * (-2.0 * t).exp());
        assert!(l1 <= exact);
        let bound = (-w.beta_double_star.integral(t)).exp() * (1.0 + p.weights.weight(5));
        assert!(weighted <= bound, "t={t}: {weighted} > {bound}");
    }
}

#[test]
fn full_system_agrees_with_shifted_truncation() {
    let m = presets::example(2).unwrap().model;
    let opts = IntegrateOptions::default();
    let p0 = ProbabilityVector::delta(3, 100).unwrap();
    let full = solve_full_system(&m, &p0, 3.0, &opts).unwrap();
    let trunc = integrate(&m, &p0, 3.0, &opts).unwrap();
    for (f, s) in full.states.iter().zip(&trunc.states) {
        let d: f64 = f.values.iter().zip(&s.values).map(|(a, b)| (a - b).abs()).sum();
        assert!(d <= 1e-10);
    }
}

#[test]
fn w_constant_matches_brute_force() {
    for w in [
        WeightSequence::Geometric { ratio: 2.0 },
        WeightSequence::Geometric { ratio: 1.5 },
        WeightSequence::Geometric { ratio: 1.125 },
        WeightSequence::GeometricThenLinear { ratio: 1.5, switch: 100 },
        WeightSequence::GeometricThenLinear { ratio: 1.125, switch: 200 },
    ] {
        let brute = (1..100_000).map(|k| w.weight(k) / k as f64).fold(f64::INFINITY, f64::min);
        assert_relative_eq!(w.w_constant(), brute, max_relative = 1e-12);
    }
    assert_relative_eq!(WeightSequence::Geometric { ratio: 1.5 }.w_constant(), 1.125);
    assert_relative_eq!(WeightSequence::Geometric { ratio: 2.0 }.w_constant(), 2.0);
}

#[test]
fn presets_round_trip_through_json() {
    for p in presets::all() {
        let text = p.model.to_json().unwrap();
        let back = IntensityModel::from_json(&text).unwrap();
        assert_eq!(back, p.model);
        let a = ergodicity_report(&p.model, Some(&p.weights), &ReportOptions::default()).unwrap();
        let b = ergodicity_report(&back, Some(&p.weights), &ReportOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}

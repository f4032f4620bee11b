#![allow(dead_code)]

pub mod props;

use bdcert::model::IntensityModel;
use bdcert::rate::{RateFamily, RateFunction, StateFactor};
use bdcert::WeightSequence;
use nalgebra::DMatrix;

fn pw(values: &[f64]) -> RateFunction {
    RateFunction::Piecewise { values: values.to_vec(), period: 1.0 }
}

/// Rates constant on each quarter period.
pub fn piecewise_model() -> IntensityModel {
    IntensityModel::new(
        1.0,
        RateFamily::term(pw(&[1.0, 3.0, 0.5, 2.0]), StateFactor::One),
        RateFamily::term(pw(&[2.0, 0.5, 1.0, 1.0]), StateFactor::MinCap { cap: 2 }),
        RateFamily::term(pw(&[0.5, 1.0, 0.2, 0.8]), StateFactor::One)
            .with(RateFunction::constant(0.3), StateFactor::Power { exponent: 1.0 }),
        RateFamily::term(pw(&[1.0, 0.0, 2.0, 0.5]), StateFactor::Geometric { ratio: 0.5 }),
    )
    .unwrap()
}

/// Transposed intensity matrix of the chain restricted to `{0..n}`, built
/// directly from the transition list.
pub fn dense_generator(m: &IntensityModel, n: usize, t: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut jump = |from: usize, to: usize, rate: f64| {
        a[(to, from)] += rate;
        a[(from, from)] -= rate;
    };
    for k in 1..=n {
        jump(0, k, m.bulk_arrival.value(k, t));
    }
    for i in 1..=n {
        if i < n {
            jump(i, i + 1, m.birth.value(i, t));
        }
        jump(i, i - 1, m.death.value(i, t));
        jump(i, 0, m.exodus.value(i, t));
    }
    a
}

/// Matrix exponential by Taylor series with scaling and squaring.
pub fn expm(b: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = b.abs().row_sum().max();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = b * scale;
    let dim = b.nrows();
    let mut sum = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..=24 {
        term = &term * &x / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Weighted column deficits of the shifted operator for columns `0..cols`.
pub fn brute_deficits(m: &IntensityModel, w: &WeightSequence, t: f64, cols: usize) -> Vec<f64> {
    let bs = m.beta_star(t);
    let mut total = 0.0;
    let mut weighted = 0.0;
    for j in 1..20_000 {
        let r = m.bulk_arrival.value(j, t);
        if r > 0.0 {
            total += r;
            weighted += w.weight(j) * r;
        }
    }
    let mut out = vec![total + bs - weighted];
    for i in 1..cols {
        let lam = m.birth.value(i, t);
        let mu = m.death.value(i, t);
        let beta = m.exodus.value(i, t);
        let d = w.weight(i);
        let (down, origin) = if i == 1 { (0.0, mu + beta - bs) } else { (mu, beta - bs) };
        let off = lam * w.weight(i + 1) / d
            + if i >= 2 { down * w.weight(i - 1) / d } else { 0.0 }
            + origin.abs() * w.weight(0) / d;
        out.push(lam + mu + beta - off);
    }
    out
}

//! The four periodic multi-server queues with catastrophes and bulk arrivals
//! used throughout the examples, with their published constants.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bounds::WeightSequence;
use crate::error::{Error, Result};
use crate::model::IntensityModel;
use crate::rate::{Combination, RateFamily, RateFunction, StateFactor};
use crate::truncation::Constants;

/// Constants and claims published alongside a preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublishedConstants {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub a: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    pub a1: f64,
    pub theta: f64,
    /// Stated weighted contraction rate.
    pub beta_double_star: Combination,
    pub level: usize,
    pub window: [f64; 2],
    pub tv_claim: f64,
    pub mean_claim: f64,
    /// `c` in the stated `|E(t,j) - E(t,0)| <= c (d_j + 1) e^{-a1 t}`.
    pub mean_convergence_factor: f64,
}

impl PublishedConstants {
    pub fn constants(&self) -> Constants {
        Constants {
            l: self.l,
            m: self.m,
            a: self.a,
            m1: self.m1,
            a1: self.a1,
            theta: self.theta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub model: IntensityModel,
    pub weights: WeightSequence,
    /// Number of servers `S` in `Pr(X(t) <= S)`.
    pub servers: usize,
    pub window: [f64; 2],
    pub published: PublishedConstants,
}

fn sinusoid(mean: f64, sin: f64, cos: f64) -> RateFunction {
    RateFunction::sinusoid(mean, sin, cos, 1.0)
}

fn closed(mean: f64, sin: f64, cos: f64) -> Combination {
    let mut c = Combination::default();
    c.add(1.0, &sinusoid(mean, sin, cos));
    c
}

/// Example `1..=4`.
pub fn example(index: usize) -> Result<Preset> {
    if !(1..=4).contains(&index) {
        return Err(Error::InvalidArgument(format!("no preset example{index}; use 1..4")));
    }
    let heavy = index >= 3;
    let (servers, scale) = if heavy { (20, 15.0) } else { (3, 1.0) };
    let birth = RateFamily::term(sinusoid(scale, scale, 0.0), StateFactor::One);
    let death = RateFamily::term(sinusoid(1.0, -1.0, 0.0), StateFactor::MinCap { cap: servers });
    let exodus = RateFamily::term(sinusoid(2.0, 0.0, 1.0), StateFactor::One)
        .with(RateFunction::constant(1.0), StateFactor::Power { exponent: 1.0 });
    let geometric_bulk = index % 2 == 1;
    let bulk_factor = if geometric_bulk {
        StateFactor::Geometric { ratio: 0.25 }
    } else {
        StateFactor::Power { exponent: 10.0 }
    };
    let bulk = RateFamily::term(sinusoid(1.0, 1.0, 0.0), bulk_factor);
    let model = IntensityModel::new(1.0, birth, death, exodus, bulk)?;
    let (weights, window, published) = match index {
        1 => (
            WeightSequence::Geometric { ratio: 2.0 },
            [10.0, 11.0],
            PublishedConstants {
                l: 12.0,
                m: (1.0 / PI).exp(),
                a: 2.0,
                m1: (2.5 / PI).exp(),
                a1: 1.5,
                theta: 3.0,
                beta_double_star: closed(1.5, -1.5, 1.0),
                level: 30,
                window: [10.0, 11.0],
                tv_claim: 1e-7,
                mean_claim: 3e-6,
                mean_convergence_factor: 3.0,
            },
        ),
        2 => (
            WeightSequence::GeometricThenLinear { ratio: 1.5, switch: 100 },
            [17.0, 18.0],
            PublishedConstants {
                l: 12.0,
                m: (1.0 / PI).exp(),
                a: 2.0,
                m1: (1.8 / PI).exp(),
                a1: 0.8,
                theta: 3.0,
                beta_double_star: closed(5.0 / 6.0, -5.0 / 6.0, 1.0),
                level: 55,
                window: [17.0, 18.0],
                tv_claim: 3e-8,
                mean_claim: 2e-6,
                mean_convergence_factor: 2.0,
            },
        ),
        3 => (
            WeightSequence::Geometric { ratio: 1.125 },
            [60.0, 61.0],
            PublishedConstants {
                l: 74.0,
                m: (1.0 / PI).exp(),
                a: 2.0,
                m1: (3.0 / PI).exp(),
                a1: 0.2,
                theta: 3.0,
                beta_double_star: closed(559.0 / 2520.0, -143.0 / 72.0, 1.0),
                level: 220,
                window: [60.0, 61.0],
                tv_claim: 3e-8,
                mean_claim: 6e-6,
                mean_convergence_factor: 3.0,
            },
        ),
        _ => (
            WeightSequence::GeometricThenLinear { ratio: 1.125, switch: 200 },
            [56.0, 57.0],
            PublishedConstants {
                l: 74.0,
                m: (1.0 / PI).exp(),
                a: 2.0,
                m1: (3.0 / PI).exp(),
                a1: 0.2,
                theta: 3.0,
                beta_double_star: closed(17.0 / 72.0, -143.0 / 72.0, 1.0),
                level: 220,
                window: [56.0, 57.0],
                tv_claim: 3e-8,
                mean_claim: 6e-6,
                mean_convergence_factor: 3.0,
            },
        ),
    };
    Ok(Preset {
        name: format!("example{index}"),
        model,
        weights,
        servers,
        window,
        published,
    })
}

/// Resolves `example1` .. `example4` (or a bare digit).
pub fn by_name(name: &str) -> Result<Preset> {
    let digits = name.trim().trim_start_matches("example");
    match digits.parse::<usize>() {
        Ok(i) => example(i),
        Err(_) => Err(Error::InvalidArgument(format!(
            "unknown preset `{name}`; expected example1..example4"
        ))),
    }
}

pub fn all() -> Vec<Preset> {
    (1..=4).map(|i| example(i).expect("built-in presets are valid")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_rates() {
        let m = example(1).unwrap().model;
        assert!((m.birth.value(7, 0.25) - 2.0).abs() < 1e-15);
        assert!(m.death.value(5, 0.25).abs() < 1e-15);
        assert!((m.death.value(5, 0.0) - 3.0).abs() < 1e-15);
        assert!((m.exodus.value(1, 0.0) - 4.0).abs() < 1e-15);
        assert!((m.exodus.value(4, 0.5) - 1.25).abs() < 1e-15);
        assert!((m.bulk_arrival.value(2, 0.25) - 2.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn example4_rates() {
        let m = example(4).unwrap().model;
        assert!((m.birth.value(1, 0.25) - 30.0).abs() < 1e-13);
        assert!((m.death.value(30, 0.75) - 40.0).abs() < 1e-13);
        assert!((m.bulk_arrival.value(2, 0.0) - 2f64.powi(-10)).abs() < 1e-18);
    }

    #[test]
    fn names_resolve() {
        assert_eq!(by_name("example3").unwrap().servers, 20);
        assert!(by_name("example5").is_err());
        assert!(by_name("foo").is_err());
        assert_eq!(all().len(), 4);
    }
}

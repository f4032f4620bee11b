//! Side-by-side comparison of self-certified and published constants.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bounds::{ergodicity_report, DoubleStar, ErgodicityReport, ReportOptions};
use crate::error::Result;
use crate::presets::Preset;
use crate::profile::Profile;
use crate::rate::Combination;
use crate::truncation::{Constants, TruncationSetup};

/// Relative difference above which a constant is flagged.
pub const FLAG_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantRow {
    pub name: String,
    pub computed: f64,
    pub published: f64,
    pub differs: bool,
}

impl ConstantRow {
    fn new(name: &str, computed: f64, published: f64) -> Self {
        let scale = computed.abs().max(published.abs()).max(1e-300);
        ConstantRow {
            name: name.to_string(),
            computed,
            published,
            differs: (computed - published).abs() > FLAG_TOLERANCE * scale,
        }
    }
}

/// Published weighted contraction rate against the certified lower bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateComparison {
    pub published: String,
    pub computed: String,
    /// `max_t |published - computed|` on the comparison grid.
    pub max_abs_difference: f64,
    pub at: f64,
    /// Published value above the certified lower bound somewhere.
    pub published_exceeds: bool,
    pub differs: bool,
    /// `(t, computed, published)`.
    pub table: Vec<[f64; 3]>,
}

pub fn compare_rates(computed: &Profile, published: &Combination, points: usize) -> RateComparison {
    let p = computed.period();
    let table: Vec<[f64; 3]> = (0..points)
        .map(|k| {
            let t = p * k as f64 / points as f64;
            [t, computed.value(t), published.value(t)]
        })
        .collect();
    let (mut worst, mut at, mut exceeds) = (0.0f64, 0.0, false);
    for row in &table {
        let d = (row[2] - row[1]).abs();
        if d > worst {
            worst = d;
            at = row[0];
        }
        exceeds |= row[2] > row[1] + FLAG_TOLERANCE * row[1].abs().max(1.0);
    }
    RateComparison {
        published: published.describe(),
        computed: format!(
            "{} (mean {:.6}, min {:.6})",
            computed.describe(),
            computed.mean(),
            computed.min()
        ),
        max_abs_difference: worst,
        at,
        published_exceeds: exceeds,
        differs: worst > FLAG_TOLERANCE,
        table,
    }
}

/// Bounds at the published level and window, with their claims.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub constants: Constants,
    pub level: usize,
    pub window: [f64; 2],
    pub tv_bound: f64,
    pub tv_claim: f64,
    pub mean_bound: Option<f64>,
    pub mean_claim: f64,
    pub tv_ok: bool,
    pub mean_ok: bool,
}

pub fn check_claims(preset: &Preset, constants: Constants) -> Result<ClaimCheck> {
    let setup = TruncationSetup::new(&preset.model, preset.weights.clone(), constants, 0)?;
    let p = &preset.published;
    let inputs = setup.inputs(p.level)?;
    let t0 = p.window[0];
    let tv = inputs.tv_bound(t0);
    let mean = inputs.mean_bound(t0);
    Ok(ClaimCheck {
        constants,
        level: p.level,
        window: p.window,
        tv_bound: tv,
        tv_claim: p.tv_claim,
        mean_bound: mean,
        mean_claim: p.mean_claim,
        tv_ok: tv <= p.tv_claim,
        mean_ok: mean.is_some_and(|m| m <= p.mean_claim),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetReport {
    pub preset: String,
    pub constants: Vec<ConstantRow>,
    pub beta_double_star: RateComparison,
    pub published_constants: ClaimCheck,
    pub self_certified: ClaimCheck,
    pub flags: Vec<String>,
    pub ergodicity: ErgodicityReport,
}

pub fn preset_report(preset: &Preset, opts: &ReportOptions) -> Result<PresetReport> {
    let rep = ergodicity_report(&preset.model, Some(&preset.weights), opts)?;
    let computed = Constants::from_report(&rep)?;
    let p = &preset.published;
    let rows = vec![
        ConstantRow::new("L", computed.l, p.l),
        ConstantRow::new("M", computed.m, p.m),
        ConstantRow::new("a", computed.a, p.a),
        ConstantRow::new("M1", computed.m1, p.m1),
        ConstantRow::new("a1", computed.a1, p.a1),
        ConstantRow::new("theta", computed.theta, p.theta),
    ];
    let ds = DoubleStar::new(&preset.model, &preset.weights, opts.probe)?;
    let exact = Profile::sample(preset.model.period, 1024, |t| ds.eval(t).value);
    let beta = compare_rates(&exact, &p.beta_double_star, 1024);
    let published_constants = check_claims(preset, p.constants())?;
    let self_certified = check_claims(preset, computed)?;
    let mut flags = Vec::new();
    for r in rows.iter().filter(|r| r.differs) {
        flags.push(format!("{} differs: computed {:.6} vs published {:.6}", r.name, r.computed, r.published));
    }
    if beta.differs {
        flags.push(format!(
            "beta** differs: published {} vs computed {} (max gap {:.4} at t = {:.4}{})",
            beta.published,
            beta.computed,
            beta.max_abs_difference,
            beta.at,
            if beta.published_exceeds {
                "; published value exceeds the certified rate"
            } else {
                ""
            }
        ));
    }
    for (label, c) in [("published", &published_constants), ("self-certified", &self_certified)] {
        if !c.tv_ok {
            flags.push(format!(
                "{label} constants: tv bound {:.3e} exceeds claim {:.1e} at N = {}",
                c.tv_bound, c.tv_claim, c.level
            ));
        }
        if !c.mean_ok {
            flags.push(format!(
                "{label} constants: mean bound {} exceeds claim {:.1e} at N = {}",
                c.mean_bound.map_or("unavailable".into(), |m| format!("{m:.3e}")),
                c.mean_claim,
                c.level
            ));
        }
    }
    Ok(PresetReport {
        preset: preset.name.clone(),
        constants: rows,
        beta_double_star: beta,
        published_constants,
        self_certified,
        flags,
        ergodicity: rep,
    })
}

impl PresetReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.preset);
        let _ = writeln!(s, "  {:<8} {:>14} {:>14}  flag", "constant", "computed", "published");
        for r in &self.constants {
            let _ = writeln!(
                s,
                "  {:<8} {:>14.6} {:>14.6}  {}",
                r.name,
                r.computed,
                r.published,
                if r.differs { "*" } else { "" }
            );
        }
        let b = &self.beta_double_star;
        let _ = writeln!(s, "  beta** computed : {}", b.computed);
        let _ = writeln!(s, "  beta** published: {}", b.published);
        let _ = writeln!(s, "  beta** max gap  : {:.6} at t = {:.4}", b.max_abs_difference, b.at);
        for (label, c) in [("published", &self.published_constants), ("self-certified", &self.self_certified)] {
            let _ = writeln!(
                s,
                "  {label:<15} N = {:<4} window [{}, {}]  tv {:.3e} (claim {:.1e})  mean {} (claim {:.1e})",
                c.level,
                c.window[0],
                c.window[1],
                c.tv_bound,
                c.tv_claim,
                c.mean_bound.map_or("n/a".into(), |m| format!("{m:.3e}")),
                c.mean_claim
            );
        }
        for f in &self.flags {
            let _ = writeln!(s, "  ! {f}");
        }
        s
    }
}

/// `(t, value)` rows over one period.
pub fn profile_table(profile: &Profile, points: usize) -> Vec<[f64; 2]> {
    let p = profile.period();
    (0..=points)
        .map(|k| {
            let t = p * k as f64 / points as f64;
            [t, profile.value(t)]
        })
        .collect()
}

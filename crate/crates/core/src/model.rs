//! The process definition: rate families, the transposed generator `A(t)`,
//! its shifted form `A*(t)` and their finite truncations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::rate::{Combination, RateFamily, RateFunction};

fn one() -> f64 {
    1.0
}

/// Optional closed-form handles supplied with a model description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tails {
    /// Closed form of `inf_n beta_n(t)`; checked against the computed infimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_star: Option<RateFunction>,
}

impl Tails {
    fn is_empty(&self) -> bool {
        self.beta_star.is_none()
    }
}

/// Birth (`lambda_n`), death (`mu_n`), mass-exodus (`beta_n`) and
/// bulk-arrival (`r_n`) intensities, `n >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityModel {
    #[serde(default = "one")]
    pub period: f64,
    #[serde(default)]
    pub birth: RateFamily,
    #[serde(default)]
    pub death: RateFamily,
    #[serde(default)]
    pub exodus: RateFamily,
    #[serde(default)]
    pub bulk_arrival: RateFamily,
    /// User-declared bound on `|a_ii(t)|`.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub declared_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Tails::is_empty")]
    pub tails: Tails,
}

/// Which operator a [`GeneratorSlice`] represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `A_N(t)`, the transposed intensity matrix.
    Plain,
    /// `A*_N(t)`: `beta*(t)` subtracted from every row-0 entry.
    Shifted,
}

/// How transitions leaving `{0..N}` are treated in the truncated operator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Truncated chain on `{0..N}`: the diagonal of column 0 uses the partial
    /// sum `sum_{n<=N} r_n` and column N drops `lambda_N`. Columns are
    /// conservative; this is the operator the truncation bounds refer to.
    #[default]
    Conservative,
    /// Diagonals keep the full outflow (`sum_{n>=1} r_n`, `lambda_N`), so mass
    /// leaving `{0..N}` is lost.
    Leaky,
}

impl IntensityModel {
    pub fn new(
        period: f64,
        birth: RateFamily,
        death: RateFamily,
        exodus: RateFamily,
        bulk_arrival: RateFamily,
    ) -> Result<Self> {
        let mut m = IntensityModel {
            period,
            birth,
            death,
            exodus,
            bulk_arrival,
            declared_l: None,
            tails: Tails::default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_declared_l(mut self, l: f64) -> Result<Self> {
        self.declared_l = Some(l);
        self.validate()?;
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut m: IntensityModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn families(&self) -> [(&'static str, &RateFamily); 4] {
        [
            ("birth", &self.birth),
            ("death", &self.death),
            ("exodus", &self.exodus),
            ("bulk_arrival", &self.bulk_arrival),
        ]
    }

    /// Normalizes inherited periods and checks every model invariant.
    pub fn validate(&mut self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        let p = self.period;
        for fam in [
            &mut self.birth,
            &mut self.death,
            &mut self.exodus,
            &mut self.bulk_arrival,
        ] {
            fam.set_period_if_unset(p);
        }
        if let Some(b) = &mut self.tails.beta_star {
            b.set_period_if_unset(p);
        }
        for (name, fam) in self.families() {
            fam.validate(name)?;
            for q in fam.periods() {
                if (q - p).abs() > 1e-12 * p {
                    return Err(Error::InvalidModel(format!(
                        "family `{name}` has period {q}, model period is {p}"
                    )));
                }
            }
        }
        for (name, fam) in [
            ("birth", &self.birth),
            ("death", &self.death),
            ("exodus", &self.exodus),
        ] {
            if fam.terms.iter().any(|k| k.state.limit().is_none()) {
                return Err(Error::Unbounded(name.to_string()));
            }
        }
        if self.bulk_arrival.tail_combination(1).is_none() {
            return Err(Error::DivergentSeries(
                "sum_n r_n(t) for the bulk-arrival family".into(),
            ));
        }
        if let Some(l) = self.declared_l {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidModel(format!("declared L must be finite and >= 0, got {l}")));
            }
        }
        if let Some(b) = &self.tails.beta_star {
            b.validate_period(p)?;
            let worst = (0..1024)
                .map(|k| {
                    let t = p * k as f64 / 1024.0;
                    (b.value(t) - self.beta_star_computed(t, false)).abs()
                })
                .fold(0.0, f64::max);
            if worst > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "declared closed-form beta* deviates from inf_n beta_n(t) by {worst:e}"
                )));
            }
        }
        Ok(())
    }

    /// Index beyond which every birth, death and exodus rate is nonincreasing in `n`.
    pub fn stable_index(&self) -> usize {
        self.birth
            .stable_from()
            .max(self.death.stable_from())
            .max(self.exodus.stable_from())
    }

    pub fn beta_star(&self, t: f64) -> f64 {
        self.beta_star_sided(t, false)
    }

    pub(crate) fn beta_star_sided(&self, t: f64, left: bool) -> f64 {
        if let Some(b) = &self.tails.beta_star {
            return if left { b.value_left(t) } else { b.value(t) };
        }
        self.beta_star_computed(t, left)
    }

    fn beta_star_computed(&self, t: f64, left: bool) -> f64 {
        let fam = &self.exodus;
        if fam.terms.is_empty() {
            return 0.0;
        }
        let limit: f64 = fam
            .terms
            .iter()
            .map(|k| {
                let f = if left { k.time.value_left(t) } else { k.time.value(t) };
                f * k.state.limit().unwrap_or(f64::INFINITY)
            })
            .sum();
        if fam.dominates_limit() {
            return limit;
        }
        (1..fam.stable_from())
            .map(|n| fam.value_sided(n, t, left))
            .fold(limit, f64::min)
    }

    /// `beta*` over one period: closed form when the exodus family attains its
    /// infimum in the `n -> inf` limit, otherwise a sampled lower bound on
    /// about `grid` nodes.
    pub fn beta_star_profile(&self, grid: usize) -> Profile {
        if let Some(b) = &self.tails.beta_star {
            let mut c = Combination::default();
            c.add(1.0, b);
            return Profile::closed(c);
        }
        if self.exodus.dominates_limit() {
            if let Some(c) = self.exodus.limit_combination() {
                return Profile::closed(c);
            }
        }
        Profile::lower_bound(
            self.period,
            self.aligned_grid(grid),
            self.beta_star_lipschitz(),
            |t, left| self.beta_star_sided(t, left),
        )
    }

    /// Lipschitz constant of `beta*` between jumps of piecewise rates.
    pub fn beta_star_lipschitz(&self) -> f64 {
        if let Some(b) = &self.tails.beta_star {
            return b.lipschitz();
        }
        let fam = &self.exodus;
        let limit = fam.limit_combination().map_or(0.0, |c| c.lipschitz());
        if fam.dominates_limit() {
            return limit;
        }
        (1..fam.stable_from())
            .map(|n| fam.combination_at(n).lipschitz())
            .fold(limit, f64::max)
    }

    /// Smallest multiple of `samples` containing every jump of a piecewise rate.
    pub fn aligned_grid(&self, samples: usize) -> usize {
        let mut c = Combination::default();
        for (_, fam) in self.families() {
            for k in &fam.terms {
                c.add(1.0, &k.time);
            }
        }
        if let Some(b) = &self.tails.beta_star {
            c.add(1.0, b);
        }
        c.aligned_grid(samples)
    }

    /// `sum_{n >= 1} r_n(t)`.
    pub fn bulk_total(&self, t: f64) -> f64 {
        self.bulk_tail(1, t)
    }

    /// `sum_{n >= from} r_n(t)`.
    pub fn bulk_tail(&self, from: usize, t: f64) -> f64 {
        self.bulk_arrival
            .terms
            .iter()
            .map(|k| k.time.value(t) * k.state.tail_sum(from).unwrap_or(f64::INFINITY))
            .sum()
    }

    /// Upper bound on `sup_{i,t} |a_ii(t)|`, reported next to any declared `L`.
    pub fn diagonal_bound(&self, probe_states: usize, samples_per_period: usize) -> Result<DiagonalBound> {
        if probe_states < 1 || samples_per_period < 2 {
            return Err(Error::InvalidArgument(
                "diagonal_bound needs probe_states >= 1 and samples >= 2".into(),
            ));
        }
        let mut computed = self
            .bulk_arrival
            .tail_combination(1)
            .map(|c| c.sup(samples_per_period))
            .ok_or_else(|| Error::DivergentSeries("sum_n r_n(t)".into()))?
            .max(0.0);
        let top = probe_states.max(self.stable_index());
        for i in 1..=top {
            let mut c = self.birth.combination_at(i);
            c.add_combination(1.0, &self.death.combination_at(i));
            c.add_combination(1.0, &self.exodus.combination_at(i));
            computed = computed.max(c.sup(samples_per_period));
        }
        Ok(DiagonalBound {
            computed,
            declared: self.declared_l,
        })
    }
}

impl RateFunction {
    fn validate_period(&self, p: f64) -> Result<()> {
        match self.period() {
            Some(q) if (q - p).abs() > 1e-12 * p => Err(Error::InvalidModel(format!(
                "closed-form handle has period {q}, model period is {p}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalBound {
    pub computed: f64,
    pub declared: Option<f64>,
}

impl DiagonalBound {
    /// `max(computed, declared)`: any upper bound is admissible.
    pub fn value(&self) -> f64 {
        self.declared.map_or(self.computed, |d| d.max(self.computed))
    }
}

/// Sparse `(N+1) x (N+1)` slice of `A(t)` or `A*(t)`.
///
/// Column `i >= 1` holds the diagonal, `lambda_i` at row `i+1`, `mu_i` at row
/// `i-1` (for `i >= 2`) and the row-0 entry (`mu_1 + beta_1` for `i = 1`,
/// `beta_i` otherwise). Column 0 holds `r_j` at rows `1..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSlice {
    pub level: usize,
    pub time: f64,
    pub variant: Variant,
    pub boundary: Boundary,
    pub diag: Vec<f64>,
    /// `birth[i]` sits at `(i+1, i)`, `1 <= i < N`.
    pub birth: Vec<f64>,
    /// `death[i]` sits at `(i-1, i)`, `2 <= i <= N`.
    pub death: Vec<f64>,
    /// `to_origin[i]` sits at `(0, i)`, `1 <= i <= N`.
    pub to_origin: Vec<f64>,
    /// `from_origin[j]` sits at `(j, 0)`, `1 <= j <= N`.
    pub from_origin: Vec<f64>,
}

impl GeneratorSlice {
    fn zeros(level: usize, variant: Variant, boundary: Boundary) -> Self {
        let n = level + 1;
        GeneratorSlice {
            level,
            time: 0.0,
            variant,
            boundary,
            diag: vec![0.0; n],
            birth: vec![0.0; n],
            death: vec![0.0; n],
            to_origin: vec![0.0; n],
            from_origin: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.level + 1
    }

    /// Nonzero pattern of column `j` as `(row, value)` pairs, diagonal first.
    pub fn column(&self, j: usize) -> Vec<(usize, f64)> {
        let n = self.level;
        let mut col = vec![(j, self.diag[j])];
        if j == 0 {
            col.extend((1..=n).map(|r| (r, self.from_origin[r])));
        } else {
            col.push((0, self.to_origin[j]));
            if j < n {
                col.push((j + 1, self.birth[j]));
            }
            if j >= 2 {
                col.push((j - 1, self.death[j]));
            }
        }
        col
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.column(j).iter().map(|(_, v)| v).sum()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.column(col)
            .into_iter()
            .filter(|(r, _)| *r == row)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut m = vec![vec![0.0; d]; d];
        for j in 0..d {
            for (r, v) in self.column(j) {
                m[r][j] += v;
            }
        }
        m
    }

    /// `out = B y` in `O(N)`.
    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        let n = self.level;
        let mut head = self.diag[0] * y[0];
        for i in 1..=n {
            head += self.to_origin[i] * y[i];
        }
        out[0] = head;
        for j in 1..=n {
            let mut v = self.diag[j] * y[j] + self.from_origin[j] * y[0];
            if j >= 2 {
                v += self.birth[j - 1] * y[j - 1];
            }
            if j < n {
                v += self.death[j + 1] * y[j + 1];
            }
            out[j] = v;
        }
    }
}

/// Caches state factors up to a truncation level so slices at many times
/// can be rebuilt cheaply.
#[derive(Clone, Debug)]
pub struct SliceBuilder<'m> {
    model: &'m IntensityModel,
    level: usize,
    variant: Variant,
    boundary: Boundary,
    birth: Vec<Vec<f64>>,
    death: Vec<Vec<f64>>,
    exodus: Vec<Vec<f64>>,
    bulk: Vec<Vec<f64>>,
    bulk_full: Vec<f64>,
}

fn factor_table(fam: &RateFamily, level: usize) -> Vec<Vec<f64>> {
    fam.terms
        .iter()
        .map(|k| {
            let mut v = vec![0.0; level + 1];
            for (n, slot) in v.iter_mut().enumerate().skip(1) {
                *slot = k.state.at(n);
            }
            v
        })
        .collect()
}

impl<'m> SliceBuilder<'m> {
    pub fn new(model: &'m IntensityModel, level: usize, variant: Variant, boundary: Boundary) -> Result<Self> {
        if level < 1 {
            return Err(Error::InvalidArgument("truncation level must be >= 1".into()));
        }
        let bulk_full = model
            .bulk_arrival
            .terms
            .iter()
            .map(|k| k.state.tail_sum(1))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::DivergentSeries("sum_n r_n(t)".into()))?;
        Ok(SliceBuilder {
            model,
            level,
            variant,
            boundary,
            birth: factor_table(&model.birth, level),
            death: factor_table(&model.death, level),
            exodus: factor_table(&model.exodus, level),
            bulk: factor_table(&model.bulk_arrival, level),
            bulk_full,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn empty(&self) -> GeneratorSlice {
        GeneratorSlice::zeros(self.level, self.variant, self.boundary)
    }

    pub fn build(&self, t: f64) -> GeneratorSlice {
        let mut s = self.empty();
        self.fill(&mut s, t, false);
        s
    }

    /// Rewrites `slice` in place for time `t` (`left` selects one-sided limits).
    pub fn fill(&self, s: &mut GeneratorSlice, t: f64, left: bool) {
        let m = self.model;
        let n = self.level;
        let eval = |fam: &RateFamily| -> Vec<f64> {
            fam.terms
                .iter()
                .map(|k| if left { k.time.value_left(t) } else { k.time.value(t) })
                .collect()
        };
        let fb = eval(&m.birth);
        let fd = eval(&m.death);
        let fe = eval(&m.exodus);
        let fr = eval(&m.bulk_arrival);
        let at = |coef: &[f64], table: &[Vec<f64>], i: usize| -> f64 {
            coef.iter().zip(table).map(|(c, col)| c * col[i]).sum()
        };
        s.time = t;
        let mut partial = 0.0;
        for j in 1..=n {
            let r = at(&fr, &self.bulk, j);
            s.from_origin[j] = r;
            partial += r;
        }
        let full: f64 = fr.iter().zip(&self.bulk_full).map(|(c, s)| c * s).sum();
        s.diag[0] = match self.boundary {
            Boundary::Conservative => -partial,
            Boundary::Leaky => -full,
        };
        for i in 1..=n {
            let lam = at(&fb, &self.birth, i);
            let mu = at(&fd, &self.death, i);
            let beta = at(&fe, &self.exodus, i);
            let drop_birth = i == n && self.boundary == Boundary::Conservative;
            s.diag[i] = -(if drop_birth { 0.0 } else { lam } + mu + beta);
            s.birth[i] = if i < n { lam } else { 0.0 };
            if i == 1 {
                s.to_origin[1] = mu + beta;
                s.death[1] = 0.0;
            } else {
                s.to_origin[i] = beta;
                s.death[i] = mu;
            }
        }
        if self.variant == Variant::Shifted {
            let bs = m.beta_star_sided(t, left);
            s.diag[0] -= bs;
            for i in 1..=n {
                s.to_origin[i] -= bs;
            }
        }
    }
}

/// One-shot slice construction.
pub fn build_generator(
    model: &IntensityModel,
    level: usize,
    t: f64,
    variant: Variant,
    boundary: Boundary,
) -> Result<GeneratorSlice> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    Ok(SliceBuilder::new(model, level, variant, boundary)?.build(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn example1_column1_at_zero() {
        let m = presets::example(1).unwrap().model;
        let s = build_generator(&m, 3, 0.0, Variant::Plain, Boundary::Conservative).unwrap();
        assert!((s.diag[1] + 6.0).abs() < 1e-14);
        assert!((s.get(0, 1) - 5.0).abs() < 1e-14);
        assert!((s.get(2, 1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn column0_diagonal_by_boundary() {
        let m = presets::example(1).unwrap().model;
        let leaky = build_generator(&m, 3, 0.0, Variant::Plain, Boundary::Leaky).unwrap();
        assert!((leaky.diag[0] + 1.0 / 3.0).abs() < 1e-15);
        let cons = build_generator(&m, 3, 0.0, Variant::Plain, Boundary::Conservative).unwrap();
        assert!((cons.diag[0] + 21.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn zero_model_gives_zero_matrix() {
        let m = IntensityModel::new(
            1.0,
            RateFamily::zero(),
            RateFamily::zero(),
            RateFamily::zero(),
            RateFamily::zero(),
        )
        .unwrap();
        let s = build_generator(&m, 4, 0.3, Variant::Shifted, Boundary::Leaky).unwrap();
        assert!(s.to_dense().iter().flatten().all(|v| *v == 0.0));
        assert_eq!(m.diagonal_bound(5, 16).unwrap().value(), 0.0);
    }

    #[test]
    fn apply_matches_dense() {
        let m = presets::example(3).unwrap().model;
        let s = build_generator(&m, 7, 0.37, Variant::Shifted, Boundary::Conservative).unwrap();
        let y: Vec<f64> = (0..8).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let mut out = vec![0.0; 8];
        s.apply(&y, &mut out);
        let dense = s.to_dense();
        for r in 0..8 {
            let want: f64 = (0..8).map(|c| dense[r][c] * y[c]).sum();
            assert!((out[r] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_bounds_of_examples() {
        let b1 = presets::example(1).unwrap().model.diagonal_bound(64, 256).unwrap();
        assert!(b1.computed <= 12.0);
        assert!((b1.computed - (19.0 / 3.0 + 5f64.sqrt())).abs() < 1e-12);
        let m3 = presets::example(3).unwrap().model.with_declared_l(74.0).unwrap();
        let b3 = m3.diagonal_bound(64, 256).unwrap();
        assert_eq!(b3.value(), 74.0);
        let m1 = presets::example(1).unwrap().model.with_declared_l(12.0).unwrap();
        assert_eq!(m1.diagonal_bound(8, 64).unwrap().value(), 12.0);
    }

    #[test]
    fn divergent_bulk_rejected() {
        let r = RateFamily::term(RateFunction::constant(1.0), crate::rate::StateFactor::Power { exponent: 1.0 });
        let e = IntensityModel::new(1.0, RateFamily::zero(), RateFamily::zero(), RateFamily::zero(), r);
        assert!(matches!(e, Err(Error::DivergentSeries(_))));
    }

    #[test]
    fn unbounded_birth_rejected() {
        let l = RateFamily::term(RateFunction::constant(1.0), crate::rate::StateFactor::Geometric { ratio: 1.1 });
        let e = IntensityModel::new(1.0, l, RateFamily::zero(), RateFamily::zero(), RateFamily::zero());
        assert!(matches!(e, Err(Error::Unbounded(_))));
    }

    #[test]
    fn beta_star_of_example1() {
        let m = presets::example(1).unwrap().model;
        assert!((m.beta_star(0.0) - 3.0).abs() < 1e-15);
        assert!((m.beta_star(0.5) - 1.0).abs() < 1e-15);
        assert!(matches!(m.beta_star_profile(64), Profile::Closed { .. }));
    }

    #[test]
    fn beta_star_with_increasing_factor() {
        // beta_n = min(n, 2): infimum attained at n = 1
        let b = RateFamily::term(RateFunction::constant(1.5), crate::rate::StateFactor::MinCap { cap: 2 });
        let m = IntensityModel::new(1.0, RateFamily::zero(), RateFamily::zero(), b, RateFamily::zero()).unwrap();
        assert_eq!(m.beta_star(0.2), 1.5);
        assert!(matches!(m.beta_star_profile(64), Profile::Sampled { .. }));
    }

    #[test]
    fn json_round_trip() {
        let m = presets::example(2).unwrap().model;
        let back = IntensityModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn declared_beta_star_handle_checked() {
        let mut m = presets::example(1).unwrap().model;
        m.tails.beta_star = Some(RateFunction::sinusoid(2.0, 0.0, 1.0, 1.0));
        assert!(m.validate().is_ok());
        m.tails.beta_star = Some(RateFunction::sinusoid(2.5, 0.0, 1.0, 1.0));
        assert!(m.validate().is_err());
    }
}

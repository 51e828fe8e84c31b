//! Joint statistics from the generalized Born rule and the functionals built
//! on them.
//!
//! `P(a, b, ... | x, y, ...) = tr[(M_{a|x} ⊗ M_{b|y} ⊗ ...) W]`.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::operations::Instrument;
use crate::process::ProcessMatrix;
use crate::tensor::{trace_of_product, CMatrix, Operator, SpaceLabel, DEFAULT_TOL};

/// Entries below this are round-off and set to zero.
const DUST: f64 = 1e-14;
/// Negative entries beyond this signal invalid inputs.
const NEGATIVE_LIMIT: f64 = 1e-12;
/// Per-setting sums are renormalized only when within this of one.
const RENORMALIZE_LIMIT: f64 = 1e-9;

/// Row-major multi-index of `index` in `shape`.
pub fn unravel(mut index: usize, shape: &[usize]) -> Vec<usize> {
    let mut out = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        out[k] = index % shape[k];
        index /= shape[k];
    }
    out
}

/// Inverse of [`unravel`].
pub fn ravel(idx: &[usize], shape: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &d)| acc * d + i)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Party {
    pub name: String,
    /// One instrument per setting.
    pub instruments: Vec<Instrument>,
}

impl Party {
    pub fn new(name: impl Into<String>, instruments: Vec<Instrument>) -> Self {
        Party {
            name: name.into(),
            instruments,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    process: ProcessMatrix,
    parties: Vec<Party>,
    /// The process reordered to the concatenated party layouts.
    aligned: CMatrix,
}

impl Scenario {
    pub fn new(process: ProcessMatrix, parties: Vec<Party>) -> Result<Self> {
        let mut layout: Vec<SpaceLabel> = Vec::new();
        for p in &parties {
            let first = p.instruments.first().ok_or_else(|| {
                Error::InvalidScenario(format!("party {} has no instruments", p.name))
            })?;
            let party_layout = first.layout();
            for (x, ins) in p.instruments.iter().enumerate() {
                if ins.layout() != party_layout {
                    return Err(Error::InvalidScenario(format!(
                        "party {} setting {x} acts on different spaces than setting 0",
                        p.name
                    )));
                }
                ins.validate(DEFAULT_TOL).map_err(|e| {
                    Error::InvalidScenario(format!("party {} setting {x}: {e}", p.name))
                })?;
            }
            if let Some(l) = party_layout.iter().find(|l| l.party != p.name) {
                return Err(Error::InvalidScenario(format!(
                    "party {} owns a space labeled {l}",
                    p.name
                )));
            }
            layout.extend(party_layout);
        }
        let w_layout = process.layout();
        let covered = layout.len() == w_layout.len()
            && w_layout.iter().all(|l| layout.contains(l))
            && layout.iter().all(|l| w_layout.contains(l));
        if !covered {
            let show = |ls: &[SpaceLabel]| {
                ls.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
            };
            return Err(Error::InvalidScenario(format!(
                "party spaces [{}] do not match process layout [{}]",
                show(&layout),
                show(w_layout)
            )));
        }
        let aligned = process.op().reorder(&layout)?.into_matrix();
        Ok(Scenario {
            process,
            parties,
            aligned,
        })
    }

    pub fn process(&self) -> &ProcessMatrix {
        &self.process
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn party_index(&self, name: &str) -> Option<usize> {
        self.parties.iter().position(|p| p.name == name)
    }

    pub fn settings_shape(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.instruments.len()).collect()
    }

    /// Outcome count per party. Uses setting 0; [`Scenario::born_rule`]
    /// rejects settings with a different count.
    pub fn outcome_shape(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.instruments[0].len()).collect()
    }

    fn instruments_for(&self, settings: &[usize]) -> Result<Vec<&Instrument>> {
        if settings.len() != self.parties.len() {
            return Err(Error::InvalidScenario(format!(
                "expected {} settings, got {}",
                self.parties.len(),
                settings.len()
            )));
        }
        settings
            .iter()
            .zip(&self.parties)
            .map(|(&x, p)| {
                p.instruments.get(x).ok_or_else(|| {
                    Error::InvalidScenario(format!("party {} has no setting {x}", p.name))
                })
            })
            .collect()
    }

    /// Outcome distribution for one setting tuple, row-major over parties.
    pub fn born_rule(&self, settings: &[usize]) -> Result<Vec<f64>> {
        let instruments = self.instruments_for(settings)?;
        let shape: Vec<usize> = instruments.iter().map(|i| i.len()).collect();
        if shape != self.outcome_shape() {
            return Err(Error::InvalidScenario(
                "settings of a party must share their outcome count".into(),
            ));
        }
        let n: usize = shape.iter().product();
        let mut probs = Vec::with_capacity(n);
        for o in 0..n {
            let outcomes = unravel(o, &shape);
            let mut kron = CMatrix::identity(1, 1);
            for (ins, &a) in instruments.iter().zip(&outcomes) {
                kron = kron.kronecker(ins.branches()[a].choi().matrix());
            }
            let p = trace_of_product(&kron, &self.aligned).re;
            if p < -NEGATIVE_LIMIT {
                return Err(Error::NegativeProbability(p));
            }
            probs.push(if p < DUST { 0.0 } else { p });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_LIMIT {
            return Err(Error::NotNormalized(total));
        }
        for p in &mut probs {
            *p /= total;
        }
        Ok(probs)
    }

    pub fn table(&self) -> Result<ProbabilityTable> {
        self.table_with(Execution::default())
    }

    /// Full table; setting tuples are evaluated independently under `exec`.
    pub fn table_with(&self, exec: Execution) -> Result<ProbabilityTable> {
        let sshape = self.settings_shape();
        let combos: usize = sshape.iter().product();
        let slices = exec::try_map_indexed(exec, combos, |s| self.born_rule(&unravel(s, &sshape)))?;
        let outcome_values = self
            .parties
            .iter()
            .map(|p| p.instruments[0].outcome_values().to_vec())
            .collect();
        ProbabilityTable::new(
            sshape,
            self.outcome_shape(),
            outcome_values,
            slices.into_iter().flatten().collect(),
        )
    }
}

/// `P(outcomes | settings)` stored setting-major, both indices row-major
/// over parties.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable {
    settings_shape: Vec<usize>,
    outcome_shape: Vec<usize>,
    outcome_values: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl ProbabilityTable {
    pub fn new(
        settings_shape: Vec<usize>,
        outcome_shape: Vec<usize>,
        outcome_values: Vec<Vec<f64>>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let t = ProbabilityTable {
            settings_shape,
            outcome_shape,
            outcome_values,
            values,
        };
        t.check(DEFAULT_TOL)?;
        Ok(t)
    }

    /// Binary (+1/-1) outcomes for every party.
    pub fn binary(settings_shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n = settings_shape.len();
        Self::new(
            settings_shape,
            vec![2; n],
            vec![crate::operations::BINARY_OUTCOMES.to_vec(); n],
            values,
        )
    }

    fn check(&self, tol: f64) -> Result<()> {
        let parties = self.settings_shape.len();
        if self.outcome_shape.len() != parties || self.outcome_values.len() != parties {
            return Err(Error::InvalidParameter("party counts disagree".into()));
        }
        for (vals, &n) in self.outcome_values.iter().zip(&self.outcome_shape) {
            if vals.len() != n {
                return Err(Error::InvalidParameter("one value per outcome is required".into()));
            }
        }
        let expected = self.setting_combos() * self.outcome_combos();
        if self.values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.values.len(),
            });
        }
        for slice in self.values.chunks(self.outcome_combos()) {
            if let Some(&p) = slice.iter().find(|&&p| p < -tol || p > 1.0 + tol) {
                return Err(Error::NegativeProbability(p));
            }
            let s: f64 = slice.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::NotNormalized(s));
            }
        }
        Ok(())
    }

    pub fn n_parties(&self) -> usize {
        self.settings_shape.len()
    }

    pub fn settings_shape(&self) -> &[usize] {
        &self.settings_shape
    }

    pub fn outcome_shape(&self) -> &[usize] {
        &self.outcome_shape
    }

    pub fn outcome_values(&self) -> &[Vec<f64>] {
        &self.outcome_values
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn setting_combos(&self) -> usize {
        self.settings_shape.iter().product()
    }

    pub fn outcome_combos(&self) -> usize {
        self.outcome_shape.iter().product()
    }

    fn setting_index(&self, settings: &[usize]) -> Result<usize> {
        if settings.len() != self.n_parties()
            || settings.iter().zip(&self.settings_shape).any(|(&x, &n)| x >= n)
        {
            return Err(Error::MissingSetting(settings.to_vec()));
        }
        Ok(ravel(settings, &self.settings_shape))
    }

    /// Outcome distribution for one setting tuple.
    pub fn distribution(&self, settings: &[usize]) -> Result<&[f64]> {
        let s = self.setting_index(settings)?;
        let n = self.outcome_combos();
        Ok(&self.values[s * n..(s + 1) * n])
    }

    pub fn get(&self, settings: &[usize], outcomes: &[usize]) -> Result<f64> {
        let dist = self.distribution(settings)?;
        Ok(dist[ravel(outcomes, &self.outcome_shape)])
    }

    /// Marginal over `parties` (in the given order) for one setting tuple.
    pub fn marginal(&self, settings: &[usize], parties: &[usize]) -> Result<Vec<f64>> {
        let dist = self.distribution(settings)?;
        let mshape: Vec<usize> = parties.iter().map(|&k| self.outcome_shape[k]).collect();
        let mut out = vec![0.0; mshape.iter().product()];
        for (o, &p) in dist.iter().enumerate() {
            let full = unravel(o, &self.outcome_shape);
            let sub: Vec<usize> = parties.iter().map(|&k| full[k]).collect();
            out[ravel(&sub, &mshape)] += p;
        }
        Ok(out)
    }

    /// Largest absolute entry difference to another table of equal shape.
    pub fn max_deviation(&self, other: &ProbabilityTable) -> Result<f64> {
        if self.settings_shape != other.settings_shape || self.outcome_shape != other.outcome_shape {
            return Err(Error::InvalidParameter("table shapes differ".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// `sum_outcomes a b ... P(a, b, ... | settings)` for +1/-1 outcomes.
pub fn expectation(table: &ProbabilityTable, settings: &[usize]) -> Result<f64> {
    for vals in table.outcome_values() {
        if vals.len() != 2 || vals.iter().any(|v| (v.abs() - 1.0).abs() > 0.0) {
            return Err(Error::NonBinaryOutcomes);
        }
    }
    let dist = table.distribution(settings)?;
    Ok(dist
        .iter()
        .enumerate()
        .map(|(o, &p)| {
            let outcomes = unravel(o, table.outcome_shape());
            let sign: f64 = outcomes
                .iter()
                .zip(table.outcome_values())
                .map(|(&a, vals)| vals[a])
                .product();
            sign * p
        })
        .sum())
}

/// Linear combination of full correlators `<A_x B_y ...>`, optionally under
/// an absolute value.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityFunctional {
    pub name: String,
    pub n_parties: usize,
    pub terms: BTreeMap<Vec<usize>, f64>,
    pub bound: f64,
    pub absolute: bool,
}

impl InequalityFunctional {
    pub fn new(
        name: impl Into<String>,
        n_parties: usize,
        terms: impl IntoIterator<Item = (Vec<usize>, f64)>,
        bound: f64,
        absolute: bool,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, c) in terms {
            if k.len() != n_parties {
                return Err(Error::InvalidParameter(format!(
                    "term {k:?} does not address {n_parties} parties"
                )));
            }
            if !c.is_finite() {
                return Err(Error::InvalidParameter(format!("coefficient of {k:?} is not finite")));
            }
            *map.entry(k).or_insert(0.0) += c;
        }
        Ok(InequalityFunctional {
            name: name.into(),
            n_parties,
            terms: map,
            bound,
            absolute,
        })
    }

    /// `<A0B0> - <A0B1> + <A1B0> + <A1B1> <= 2`.
    pub fn chsh() -> Self {
        Self::new(
            "chsh",
            2,
            [(vec![0, 0], 1.0), (vec![0, 1], -1.0), (vec![1, 0], 1.0), (vec![1, 1], 1.0)],
            2.0,
            false,
        )
        .expect("preset is well formed")
    }

    /// `<A0B0C0> - <A0B1C1> - <A1B0C1> - <A1B1C0> <= 2`.
    pub fn mermin() -> Self {
        Self::new(
            "mermin",
            3,
            [
                (vec![0, 0, 0], 1.0),
                (vec![0, 1, 1], -1.0),
                (vec![1, 0, 1], -1.0),
                (vec![1, 1, 0], -1.0),
            ],
            2.0,
            false,
        )
        .expect("preset is well formed")
    }

    /// Absolute value of the eight-term Svetlichny combination, `<= 4` for
    /// biseparable correlations.
    pub fn svetlichny() -> Self {
        Self::new(
            "svetlichny",
            3,
            [
                (vec![0, 0, 0], 1.0),
                (vec![0, 0, 1], 1.0),
                (vec![0, 1, 0], 1.0),
                (vec![1, 0, 0], 1.0),
                (vec![1, 1, 0], -1.0),
                (vec![1, 0, 1], -1.0),
                (vec![0, 1, 1], -1.0),
                (vec![1, 1, 1], -1.0),
            ],
            4.0,
            true,
        )
        .expect("preset is well formed")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "chsh" => Some(Self::chsh()),
            "mermin" | "ghz" => Some(Self::mermin()),
            "svetlichny" | "svet" => Some(Self::svetlichny()),
            _ => None,
        }
    }

    /// Quantum maximum of the preset, where known.
    pub fn quantum_maximum(&self) -> Option<f64> {
        match self.name.as_str() {
            "chsh" => Some(2.0 * SQRT_2),
            "mermin" => Some(4.0),
            "svetlichny" => Some(4.0 * SQRT_2),
            _ => None,
        }
    }

    /// Number of settings per party addressed by the terms.
    pub fn settings_shape(&self) -> Vec<usize> {
        let mut shape = vec![0; self.n_parties];
        for k in self.terms.keys() {
            for (s, &x) in shape.iter_mut().zip(k) {
                *s = (*s).max(x + 1);
            }
        }
        shape
    }

    /// Applies the functional to per-term correlator values.
    pub fn combine(&self, mut correlator: impl FnMut(&[usize]) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for (k, &c) in &self.terms {
            total += c * correlator(k)?;
        }
        Ok(if self.absolute { total.abs() } else { total })
    }
}

pub fn evaluate(f: &InequalityFunctional, table: &ProbabilityTable) -> Result<f64> {
    if table.n_parties() != f.n_parties {
        return Err(Error::InvalidParameter(format!(
            "functional has {} parties, table {}",
            f.n_parties,
            table.n_parties()
        )));
    }
    f.combine(|k| expectation(table, k))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GhzParadoxReport {
    /// `<A0B0C0>, <A0B1C1>, <A1B0C1>, <A1B1C0>`.
    pub expectations: [f64; 4],
    /// Distances from the ideal values `+1, -1, -1, -1`.
    pub deviations: [f64; 4],
    pub passed: bool,
}

pub fn ghz_paradox_check(table: &ProbabilityTable, tol: f64) -> Result<GhzParadoxReport> {
    const TERMS: [([usize; 3], f64); 4] = [
        ([0, 0, 0], 1.0),
        ([0, 1, 1], -1.0),
        ([1, 0, 1], -1.0),
        ([1, 1, 0], -1.0),
    ];
    let mut expectations = [0.0; 4];
    let mut deviations = [0.0; 4];
    for (i, (k, ideal)) in TERMS.iter().enumerate() {
        expectations[i] = expectation(table, k)?;
        deviations[i] = (expectations[i] - ideal).abs();
    }
    Ok(GhzParadoxReport {
        expectations,
        deviations,
        passed: deviations.iter().all(|&d| d < tol),
    })
}

/// Largest total variational distance `1/2 sum |P(.|x) - P(.|x')|` between
/// marginals of `to` when only the setting of `from` changes.
pub fn no_signalling_distance(table: &ProbabilityTable, from: usize, to: &[usize]) -> Result<f64> {
    let n = table.n_parties();
    if from >= n || to.iter().any(|&k| k >= n || k == from) {
        return Err(Error::InvalidParameter(
            "party indices out of range or overlapping".into(),
        ));
    }
    let shape = table.settings_shape().to_vec();
    let mut worst: f64 = 0.0;
    for s in 0..table.setting_combos() {
        let settings = unravel(s, &shape);
        let base = table.marginal(&settings, to)?;
        for alt in settings[from] + 1..shape[from] {
            let mut other = settings.clone();
            other[from] = alt;
            let m = table.marginal(&other, to)?;
            let tvd = 0.5 * base.iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>();
            worst = worst.max(tvd);
        }
    }
    Ok(worst)
}

/// Operator `E^A = 2 rho_{a|x}`-style helper: the spatial POVM element that
/// reproduces a preparation branch, `d_out * rho`.
pub fn spatial_effect(preparation_choi: &Operator) -> Operator {
    preparation_choi.scale(preparation_choi.dim() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operations::{projective_instrument, projective_preparation, BlochSetting, Povm};
    use crate::process::{ghz_process, identity_process};
    use crate::tensor::{SpaceLabel, C64};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn a_in() -> SpaceLabel {
        SpaceLabel::input("A", 2)
    }
    fn a_out() -> SpaceLabel {
        SpaceLabel::output("A", 2)
    }

    fn measure(party: &str, s: BlochSetting) -> Instrument {
        Povm::projective(SpaceLabel::input(party, 2), s)
            .unwrap()
            .into_instrument("m")
    }

    fn xy_ghz_scenario(kappa: f64, angles: [[f64; 2]; 3]) -> Scenario {
        let w = ghz_process(kappa).unwrap();
        let a = Party::new(
            "A",
            angles[0]
                .iter()
                .map(|&p| projective_preparation(BlochSetting::xy(p), a_out()).unwrap())
                .collect(),
        );
        let b = Party::new("B", angles[1].iter().map(|&p| measure("B", BlochSetting::xy(p))).collect());
        let c = Party::new("C", angles[2].iter().map(|&p| measure("C", BlochSetting::xy(p))).collect());
        Scenario::new(w, vec![a, b, c]).unwrap()
    }

    #[test]
    fn sequential_z_measurements_agree() {
        let w = identity_process(2).unwrap();
        let a = Party::new("A", vec![projective_instrument(BlochSetting::z(), a_in(), a_out()).unwrap()]);
        let b = Party::new("B", vec![measure("B", BlochSetting::z())]);
        let sc = Scenario::new(w, vec![a, b]).unwrap();
        let p = sc.born_rule(&[0, 0]).unwrap();
        // outcomes (+,+), (+,-), (-,+), (-,-)
        let want = [0.5, 0.0, 0.0, 0.5];
        for (x, y) in p.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn ghz_xxx_is_plus_one() {
        let sc = xy_ghz_scenario(1.0, [[0.0, FRAC_PI_2]; 3]);
        let t = sc.table().unwrap();
        assert!((expectation(&t, &[0, 0, 0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((expectation(&t, &[0, 1, 1]).unwrap() + 1.0).abs() < 1e-12);
        for s in 0..8 {
            let sum: f64 = t.distribution(&unravel(s, &[2, 2, 2])).unwrap().iter().sum();
            assert!((sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let w = identity_process(2).unwrap();
        let b = Party::new("B", vec![measure("B", BlochSetting::z())]);
        assert!(matches!(Scenario::new(w, vec![b]), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn expectation_of_simple_tables() {
        let uniform = ProbabilityTable::binary(vec![1, 1], vec![0.25; 4]).unwrap();
        assert_eq!(expectation(&uniform, &[0, 0]).unwrap(), 0.0);
        let corr = ProbabilityTable::binary(vec![1, 1], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(expectation(&corr, &[0, 0]).unwrap(), 1.0);
        let ternary = ProbabilityTable::new(vec![1], vec![3], vec![vec![0.0, 1.0, 2.0]], vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(expectation(&ternary, &[0]), Err(Error::NonBinaryOutcomes));
        assert!(matches!(expectation(&corr, &[1, 0]), Err(Error::MissingSetting(_))));
    }

    #[test]
    fn table_invariants_are_enforced() {
        assert!(ProbabilityTable::binary(vec![1], vec![0.7, 0.7]).is_err());
        assert!(ProbabilityTable::binary(vec![1], vec![1.1, -0.1]).is_err());
        assert!(ProbabilityTable::binary(vec![2], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn svetlichny_at_reference_angles() {
        let angles = [[FRAC_PI_4, FRAC_PI_4 + FRAC_PI_2], [0.0, FRAC_PI_2], [FRAC_PI_2, PI]];
        let t = xy_ghz_scenario(1.0, angles).table().unwrap();
        let s = evaluate(&InequalityFunctional::svetlichny(), &t).unwrap();
        assert!((s - 4.0 * SQRT_2).abs() < 1e-10, "{s}");
    }

    #[test]
    fn mermin_on_ghz_is_four() {
        let t = xy_ghz_scenario(1.0, [[0.0, FRAC_PI_2]; 3]).table().unwrap();
        let s = evaluate(&InequalityFunctional::mermin(), &t).unwrap();
        assert!((s - 4.0).abs() < 1e-10);
        let r = ghz_paradox_check(&t, 1e-10).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn ghz_paradox_fails_without_interaction() {
        let t = xy_ghz_scenario(0.0, [[0.0, FRAC_PI_2]; 3]).table().unwrap();
        let r = ghz_paradox_check(&t, 1e-6).unwrap();
        assert!(!r.passed);
        // Direct computation on |Phi+>|+>: <XXX> = <XX><X> = 1, <XYY> = <XY><Y> = 0
        assert!((r.expectations[0] - 1.0).abs() < 1e-12);
        assert!(r.expectations[1].abs() < 1e-12);
    }

    #[test]
    fn paradox_expectations_scale_with_visibility() {
        let v = 0.8;
        let w = ghz_process(1.0).unwrap().depolarize(v).unwrap();
        let a = Party::new("A", [0.0, FRAC_PI_2].iter().map(|&p| projective_preparation(BlochSetting::xy(p), a_out()).unwrap()).collect());
        let b = Party::new("B", [0.0, FRAC_PI_2].iter().map(|&p| measure("B", BlochSetting::xy(p))).collect());
        let c = Party::new("C", [0.0, FRAC_PI_2].iter().map(|&p| measure("C", BlochSetting::xy(p))).collect());
        let t = Scenario::new(w, vec![a, b, c]).unwrap().table().unwrap();
        let r = ghz_paradox_check(&t, 1e-9).unwrap();
        let ideal = [1.0, -1.0, -1.0, -1.0];
        for (e, i) in r.expectations.iter().zip(ideal) {
            assert!((e - v * i).abs() < 1e-12);
        }
    }

    #[test]
    fn biased_preparation_signals() {
        let w = identity_process(2).unwrap();
        // setting 0: discard the input and prepare |0>; setting 1: Z measurement
        let mut reset = CMatrix::zeros(4, 4);
        reset[(0, 0)] = C64::new(1.0, 0.0);
        reset[(2, 2)] = C64::new(1.0, 0.0);
        let reset = Instrument::from_chois("reset", vec![reset], Some(a_in()), Some(a_out())).unwrap();
        assert!(!reset.is_unbiased(1e-9).unwrap());
        let z = projective_instrument(BlochSetting::z(), a_in(), a_out()).unwrap();
        // The two settings need equal outcome counts; pad the reset with a null branch.
        let reset2 = Instrument::new(
            "reset",
            vec![reset.branches()[0].clone(), crate::operations::CpMap::from_choi(CMatrix::zeros(4, 4), Some(a_in()), Some(a_out())).unwrap()],
        )
        .unwrap();
        let a = Party::new("A", vec![reset2, z]);
        let b = Party::new("B", vec![measure("B", BlochSetting::z())]);
        let t = Scenario::new(w, vec![a, b]).unwrap().table().unwrap();
        // B's Z marginal is (1, 0) after the reset and (1/2, 1/2) after Z
        let d = no_signalling_distance(&t, 0, &[1]).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!(no_signalling_distance(&t, 1, &[0]).unwrap() < 1e-12);
    }

    #[test]
    fn unbiased_parties_do_not_signal_on_identity_process() {
        let w = identity_process(2).unwrap();
        let a = Party::new("A", [0.0, 1.0].iter().map(|&p| projective_instrument(BlochSetting::xy(p), a_in(), a_out()).unwrap()).collect());
        let b = Party::new("B", [0.3, 2.0].iter().map(|&p| measure("B", BlochSetting::xy(p))).collect());
        let t = Scenario::new(w, vec![a, b]).unwrap().table().unwrap();
        assert!(no_signalling_distance(&t, 0, &[1]).unwrap() < 1e-12);
        assert!(no_signalling_distance(&t, 1, &[0]).unwrap() < 1e-12);
    }

    #[test]
    fn parallel_and_sequential_tables_agree() {
        let sc = xy_ghz_scenario(0.6, [[0.1, 0.9], [0.2, 1.3], [2.0, 0.4]]);
        let a = sc.table_with(Execution::Sequential).unwrap();
        let b = sc.table_with(Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn marginal_and_ravel_helpers() {
        assert_eq!(unravel(5, &[2, 3]), vec![1, 2]);
        assert_eq!(ravel(&[1, 2], &[2, 3]), 5);
        let t = ProbabilityTable::binary(vec![1, 1], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = t.marginal(&[0, 0], &[1]).unwrap();
        assert!((m[0] - 0.4).abs() < 1e-15 && (m[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn spatial_effect_doubles_qubit_preparation() {
        let p = projective_preparation(BlochSetting::z(), a_out()).unwrap();
        let e = spatial_effect(p.branches()[0].choi());
        assert!((e.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
    }
}

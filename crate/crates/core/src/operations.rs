//! Local operations in Choi form: CP maps, instruments and POVMs.
//!
//! The Choi matrix of a map `M: A_I -> A_O` is
//! `sum_jl |j><l|^{A_I} ⊗ [M(|l><j|)]^T` on `A_I ⊗ A_O`, input factor first.
//! Preparations have no input label and final measurements no output label.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::tensor::{CMatrix, Operator, SpaceLabel, C64, DEFAULT_TOL};

/// Outcome values of two-outcome operations, in branch order.
pub const BINARY_OUTCOMES: [f64; 2] = [1.0, -1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct CpMap {
    choi: Operator,
    input: Option<SpaceLabel>,
    output: Option<SpaceLabel>,
}

fn choi_layout(input: &Option<SpaceLabel>, output: &Option<SpaceLabel>) -> Vec<SpaceLabel> {
    input.iter().chain(output.iter()).cloned().collect()
}

fn dim_of(l: &Option<SpaceLabel>) -> usize {
    l.as_ref().map_or(1, |l| l.dim)
}

fn unit(d: usize, j: usize, l: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(j, l)] = C64::new(1.0, 0.0);
    m
}

impl CpMap {
    /// Wraps a Choi matrix; the layout must be `[input?, output?]` and PSD.
    pub fn from_choi(
        choi: CMatrix,
        input: Option<SpaceLabel>,
        output: Option<SpaceLabel>,
    ) -> Result<Self> {
        let op = Operator::new(choi_layout(&input, &output), choi)?;
        if !op.is_psd(DEFAULT_TOL)? {
            return Err(Error::InvalidInstrument(format!(
                "Choi matrix is not positive semi-definite (min eigenvalue {:.3e})",
                op.min_eigenvalue()
            )));
        }
        Ok(CpMap {
            choi: op,
            input,
            output,
        })
    }

    pub(crate) fn from_operator_unchecked(
        choi: Operator,
        input: Option<SpaceLabel>,
        output: Option<SpaceLabel>,
    ) -> Self {
        CpMap { choi, input, output }
    }

    pub fn choi(&self) -> &Operator {
        &self.choi
    }

    pub fn input(&self) -> Option<&SpaceLabel> {
        self.input.as_ref()
    }

    pub fn output(&self) -> Option<&SpaceLabel> {
        self.output.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        dim_of(&self.input)
    }

    pub fn output_dim(&self) -> usize {
        dim_of(&self.output)
    }

    /// Applies the map to a `d_in x d_in` matrix by inverting the Choi
    /// correspondence: `M(|l><j|) = [(<j| ⊗ 1) C (|l> ⊗ 1)]^T`.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let (di, d_out) = (self.input_dim(), self.output_dim());
        if rho.nrows() != di || rho.ncols() != di {
            return Err(Error::DimensionMismatch {
                expected: di,
                found: rho.nrows(),
            });
        }
        let c = self.choi.matrix();
        let mut out = CMatrix::zeros(d_out, d_out);
        for j in 0..di {
            for l in 0..di {
                let coeff = rho[(l, j)];
                if coeff == C64::new(0.0, 0.0) {
                    continue;
                }
                let block = c.view((j * d_out, l * d_out), (d_out, d_out));
                out += block.transpose() * coeff;
            }
        }
        Ok(out)
    }

    /// `tr_out C`, an operator on the input (scalar if the input is trivial).
    pub fn input_marginal(&self) -> Result<Operator> {
        match &self.output {
            Some(o) => self.choi.partial_trace(std::slice::from_ref(o)),
            None => Ok(self.choi.clone()),
        }
    }

    /// `tr_in C`, an operator on the output.
    pub fn output_marginal(&self) -> Result<Operator> {
        match &self.input {
            Some(i) => self.choi.partial_trace(std::slice::from_ref(i)),
            None => Ok(self.choi.clone()),
        }
    }
}

/// Choi matrix of `rho -> sum_k K rho K^dagger`, each `K` of shape `d_out x d_in`.
pub fn choi_from_kraus(
    kraus: &[CMatrix],
    input: Option<SpaceLabel>,
    output: Option<SpaceLabel>,
) -> Result<CpMap> {
    let (di, d_out) = (dim_of(&input), dim_of(&output));
    for k in kraus {
        if k.nrows() != d_out || k.ncols() != di {
            return Err(Error::DimensionMismatch {
                expected: d_out * di,
                found: k.nrows() * k.ncols(),
            });
        }
    }
    let mut choi = CMatrix::zeros(di * d_out, di * d_out);
    for j in 0..di {
        for l in 0..di {
            let e_lj = unit(di, l, j);
            let mut image = CMatrix::zeros(d_out, d_out);
            for k in kraus {
                image += k * &e_lj * k.adjoint();
            }
            choi.view_mut((j * d_out, l * d_out), (d_out, d_out))
                .copy_from(&image.transpose());
        }
    }
    CpMap::from_choi(choi, input, output)
}

/// A measurement direction on the Bloch sphere; `theta` is the polar angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochSetting {
    pub theta: f64,
    pub phi: f64,
}

impl BlochSetting {
    /// Direction `cos(phi) X + sin(phi) Y`.
    pub fn xy(phi: f64) -> Self {
        BlochSetting {
            theta: FRAC_PI_2,
            phi,
        }
    }

    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidParameter("Bloch angles must be finite".into()));
        }
        Ok(BlochSetting { theta, phi })
    }

    pub fn z() -> Self {
        BlochSetting { theta: 0.0, phi: 0.0 }
    }

    pub fn direction(&self) -> [f64; 3] {
        let s = self.theta.sin();
        [s * self.phi.cos(), s * self.phi.sin(), self.theta.cos()]
    }

    /// `(1 + a n.sigma) / 2` for outcome `a = +1, -1`.
    pub fn projector(&self, outcome: f64) -> CMatrix {
        let [x, y, z] = self.direction();
        let h = 0.5 * outcome;
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.5 + h * z, 0.0),
                C64::new(h * x, -h * y),
                C64::new(h * x, h * y),
                C64::new(0.5 - h * z, 0.0),
            ],
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    label: SpaceLabel,
    elements: Vec<Operator>,
}

impl Povm {
    pub fn new(label: SpaceLabel, elements: Vec<CMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidInstrument("POVM has no elements".into()));
        }
        let ops = elements
            .into_iter()
            .map(|e| Operator::new(vec![label.clone()], e))
            .collect::<Result<Vec<_>>>()?;
        let povm = Povm {
            label,
            elements: ops,
        };
        povm.check(DEFAULT_TOL)?;
        Ok(povm)
    }

    /// Two-outcome projective measurement along `setting` on a qubit.
    pub fn projective(label: SpaceLabel, setting: BlochSetting) -> Result<Self> {
        if label.dim != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: label.dim,
            });
        }
        Povm::new(
            label,
            BINARY_OUTCOMES.iter().map(|&a| setting.projector(a)).collect(),
        )
    }

    fn check(&self, tol: f64) -> Result<()> {
        let mut sum = CMatrix::zeros(self.label.dim, self.label.dim);
        for (a, e) in self.elements.iter().enumerate() {
            if !e.is_psd(tol)? {
                return Err(Error::InvalidInstrument(format!(
                    "POVM element {a} is not positive semi-definite"
                )));
            }
            sum += e.matrix();
        }
        let dev = (sum - CMatrix::identity(self.label.dim, self.label.dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > tol {
            return Err(Error::InvalidInstrument(format!(
                "POVM elements do not sum to the identity (deviation {dev:.3e})"
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> &SpaceLabel {
        &self.label
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    /// A final measurement: the instrument whose Choi matrices are the
    /// elements themselves.
    pub fn into_instrument(self, setting: impl Into<String>) -> Instrument {
        let n = self.elements.len();
        let branches = self
            .elements
            .into_iter()
            .map(|e| CpMap::from_operator_unchecked(e, Some(self.label.clone()), None))
            .collect();
        Instrument {
            setting: setting.into(),
            branches,
            outcome_values: default_outcome_values(n),
        }
    }
}

fn default_outcome_values(n: usize) -> Vec<f64> {
    if n == 2 {
        BINARY_OUTCOMES.to_vec()
    } else {
        (0..n).map(|a| a as f64).collect()
    }
}

/// Outcome-indexed CP maps on shared labels whose sum is trace preserving.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    setting: String,
    branches: Vec<CpMap>,
    outcome_values: Vec<f64>,
}

impl Instrument {
    pub fn new(setting: impl Into<String>, branches: Vec<CpMap>) -> Result<Self> {
        let n = branches.len();
        Self::with_outcome_values(setting, branches, default_outcome_values(n))
    }

    pub fn with_outcome_values(
        setting: impl Into<String>,
        branches: Vec<CpMap>,
        outcome_values: Vec<f64>,
    ) -> Result<Self> {
        let instr = Instrument {
            setting: setting.into(),
            branches,
            outcome_values,
        };
        instr.validate(DEFAULT_TOL)?;
        Ok(instr)
    }

    /// Builds an instrument from per-branch Choi matrices on `[input?, output?]`.
    pub fn from_chois(
        setting: impl Into<String>,
        chois: Vec<CMatrix>,
        input: Option<SpaceLabel>,
        output: Option<SpaceLabel>,
    ) -> Result<Self> {
        let branches = chois
            .into_iter()
            .map(|c| CpMap::from_choi(c, input.clone(), output.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(setting, branches)
    }

    pub fn setting(&self) -> &str {
        &self.setting
    }

    pub fn branches(&self) -> &[CpMap] {
        &self.branches
    }

    pub fn outcome_values(&self) -> &[f64] {
        &self.outcome_values
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn input(&self) -> Option<&SpaceLabel> {
        self.branches.first().and_then(|b| b.input())
    }

    pub fn output(&self) -> Option<&SpaceLabel> {
        self.branches.first().and_then(|b| b.output())
    }

    /// Choi layout shared by all branches.
    pub fn layout(&self) -> Vec<SpaceLabel> {
        self.branches
            .first()
            .map(|b| b.choi().layout().to_vec())
            .unwrap_or_default()
    }

    fn sum_choi(&self) -> Result<Operator> {
        let mut it = self.branches.iter();
        let first = it
            .next()
            .ok_or_else(|| Error::InvalidInstrument("instrument has no branches".into()))?;
        it.try_fold(first.choi().clone(), |acc, b| acc.add(b.choi()))
    }

    /// Checks branch positivity, shared labels and that
    /// `tr_out sum_a M_a = 1_in`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::InvalidInstrument("instrument has no branches".into()));
        }
        if self.outcome_values.len() != self.branches.len() {
            return Err(Error::InvalidInstrument(
                "one outcome value per branch is required".into(),
            ));
        }
        if self.outcome_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstrument("outcome values must be finite".into()));
        }
        let (input, output) = (self.input().cloned(), self.output().cloned());
        for (a, b) in self.branches.iter().enumerate() {
            if b.input() != input.as_ref() || b.output() != output.as_ref() {
                return Err(Error::InvalidInstrument(format!(
                    "branch {a} acts on different spaces"
                )));
            }
            if !b.choi().is_psd(tol)? {
                return Err(Error::InvalidInstrument(format!(
                    "branch {a} is not completely positive"
                )));
            }
        }
        let sum = self.sum_choi()?;
        let reduced = match &output {
            Some(o) => sum.partial_trace(std::slice::from_ref(o))?,
            None => sum,
        };
        let want = Operator::identity(input.into_iter().collect())?;
        let dev = reduced.max_abs_diff(&want)?;
        if dev > tol {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(())
    }

    /// Whether `tr_in sum_a M_a = (d_in / d_out) 1_out`, i.e. the maximally
    /// mixed input is mapped to the maximally mixed output on average.
    pub fn is_unbiased(&self, tol: f64) -> Result<bool> {
        let sum = self.sum_choi()?;
        let Some(out) = self.output().cloned() else {
            // trivial output: tr sum_a M_a = d_in holds for every valid instrument
            return Ok(true);
        };
        let reduced = match self.input() {
            Some(i) => sum.partial_trace(std::slice::from_ref(i))?,
            None => sum,
        };
        let d_in = self.input().map_or(1, |l| l.dim) as f64;
        let want = Operator::identity(vec![out.clone()])?.scale(d_in / out.dim as f64);
        Ok(reduced.max_abs_diff(&want)? <= tol)
    }

    /// Replaces the input by a maximally mixed state: branch `a` becomes the
    /// preparation `rho_a = tr_in M_a / d_in` on the output alone.
    pub fn reduce_to_preparation(&self) -> Result<Instrument> {
        let output = self.output().cloned().ok_or_else(|| {
            Error::InvalidInstrument("instrument has no output to prepare".into())
        })?;
        let d_in = self.input().map_or(1, |l| l.dim) as f64;
        let branches = self
            .branches
            .iter()
            .map(|b| {
                let rho = b.output_marginal()?.scale(1.0 / d_in);
                Ok(CpMap::from_operator_unchecked(rho, None, Some(output.clone())))
            })
            .collect::<Result<Vec<_>>>()?;
        Instrument::with_outcome_values(self.setting.clone(), branches, self.outcome_values.clone())
    }

    /// Outcome-indexed `(probability, prepared state)` when the input is
    /// maximally mixed. The state is `rho_a^T / tr rho_a`; branches with zero
    /// probability carry a zero matrix.
    pub fn reduce_preparation(&self) -> Result<Vec<(f64, Operator)>> {
        let prep = self.reduce_to_preparation()?;
        prep.branches
            .iter()
            .map(|b| {
                let rho = b.choi();
                let p = rho.trace().re;
                let layout = rho.layout().to_vec();
                let t = rho.transpose_subsystem(&layout)?;
                let state = if p > 0.0 { t.scale(1.0 / p) } else { t.scale(0.0) };
                Ok((p, state))
            })
            .collect()
    }
}

/// Lüders instrument `rho -> P_a rho P_a` for a qubit projective measurement.
pub fn projective_instrument(
    setting: BlochSetting,
    input: SpaceLabel,
    output: SpaceLabel,
) -> Result<Instrument> {
    if input.dim != 2 || output.dim != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: input.dim.max(output.dim),
        });
    }
    let branches = BINARY_OUTCOMES
        .iter()
        .map(|&a| choi_from_kraus(&[setting.projector(a)], Some(input.clone()), Some(output.clone())))
        .collect::<Result<Vec<_>>>()?;
    Instrument::new(format!("{:.6},{:.6}", setting.theta, setting.phi), branches)
}

/// Maps a POVM on `input ⊗ output` to the instrument `M_a = E_a / d_out`.
/// The POVM label dimension must equal `d_in * d_out`.
pub fn povm_to_instrument(
    povm: &Povm,
    input: Option<SpaceLabel>,
    output: Option<SpaceLabel>,
) -> Result<Instrument> {
    let (di, d_out) = (dim_of(&input), dim_of(&output));
    if di * d_out != povm.label().dim {
        return Err(Error::DimensionMismatch {
            expected: povm.label().dim,
            found: di * d_out,
        });
    }
    let scale = C64::new(1.0 / d_out as f64, 0.0);
    let branches = povm
        .elements()
        .iter()
        .map(|e| {
            let op = Operator::new(choi_layout(&input, &output), e.matrix() * scale)?;
            Ok(CpMap::from_operator_unchecked(op, input.clone(), output.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Instrument::new(povm.label().party.clone(), branches)
}

/// Preparation instrument on `output` whose spatial counterpart is the
/// projective POVM along `setting`: `rho_a = P_a / 2`.
pub fn projective_preparation(setting: BlochSetting, output: SpaceLabel) -> Result<Instrument> {
    let povm = Povm::projective(SpaceLabel::plain(output.party.clone(), output.dim), setting)?;
    povm_to_instrument(&povm, None, Some(output))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn a_in() -> SpaceLabel {
        SpaceLabel::input("A", 2)
    }
    fn a_out() -> SpaceLabel {
        SpaceLabel::output("A", 2)
    }

    #[test]
    fn identity_kraus_gives_identity_bracket() {
        let m = choi_from_kraus(&[CMatrix::identity(2, 2)], Some(a_in()), Some(a_out())).unwrap();
        // sum_jl |j><l| ⊗ |j><l|
        let mut want = CMatrix::zeros(4, 4);
        for j in 0..2 {
            for l in 0..2 {
                want[(j * 2 + j, l * 2 + l)] = C64::new(1.0, 0.0);
            }
        }
        assert_eq!(m.choi().matrix(), &want);
    }

    #[test]
    fn ground_projector_kraus() {
        let k = CMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::default(), C64::default(), C64::default()]);
        let m = choi_from_kraus(&[k], Some(a_in()), Some(a_out())).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        want[(0, 0)] = C64::new(1.0, 0.0);
        assert_eq!(m.choi().matrix(), &want);
    }

    #[test]
    fn kraus_dimension_mismatch() {
        let k = CMatrix::identity(3, 2);
        assert!(matches!(
            choi_from_kraus(&[k], Some(a_in()), Some(a_out())),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn random_isometry_choi_reproduces_kraus_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kraus = random::channel_kraus(&mut rng, 2, 3, 2);
        let m = choi_from_kraus(&kraus, Some(a_in()), Some(SpaceLabel::output("A", 3))).unwrap();
        assert!(m.choi().is_psd(1e-9).unwrap());
        // trace-preserving: tr C = d_in
        assert!((m.choi().trace().re - 2.0).abs() < 1e-12);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let rho = random::density_matrix(&mut rng, 2);
            let direct: CMatrix = kraus.iter().map(|k| k * &rho * k.adjoint()).sum();
            let via_choi = m.apply(&rho).unwrap();
            worst = worst.max((direct - via_choi).norm());
        }
        assert!(worst <= 1e-10, "max deviation {worst}");
    }

    #[test]
    fn x_measurement_branches_are_rank_one() {
        let ins = projective_instrument(BlochSetting::xy(0.0), a_in(), a_out()).unwrap();
        assert_eq!(ins.len(), 2);
        for b in ins.branches() {
            let ev = b.choi().hermitian_eigenvalues();
            let nonzero = ev.iter().filter(|&&e| e.abs() > 1e-12).count();
            assert_eq!(nonzero, 1);
        }
        // P_+ = |+><+|
        let p = BlochSetting::xy(0.0).projector(1.0);
        for z in p.iter() {
            assert!((z - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn projective_instruments_sum_to_dephasing_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let s = random::bloch_setting(&mut rng);
            let ins = projective_instrument(s, a_in(), a_out()).unwrap();
            ins.validate(1e-10).unwrap();
            assert!(ins.is_unbiased(1e-10).unwrap());
        }
    }

    #[test]
    fn deterministic_preparation_is_biased() {
        let ground = CMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::default(), C64::default(), C64::default()]);
        let prep = Instrument::from_chois("0", vec![ground.clone()], None, Some(a_out())).unwrap();
        assert!(!prep.is_unbiased(1e-9).unwrap());

        let excited = CMatrix::from_row_slice(2, 2, &[C64::default(), C64::default(), C64::default(), C64::new(1.0, 0.0)]);
        let mixed = Instrument::from_chois("z", vec![ground * C64::new(0.5, 0.0), excited * C64::new(0.5, 0.0)], None, Some(a_out())).unwrap();
        assert!(mixed.is_unbiased(1e-12).unwrap());
    }

    #[test]
    fn povm_with_trivial_output_is_final_measurement() {
        let povm = Povm::projective(SpaceLabel::plain("A", 2), BlochSetting::z()).unwrap();
        let ins = povm_to_instrument(&povm, Some(a_in()), None).unwrap();
        ins.validate(1e-12).unwrap();
        for (b, e) in ins.branches().iter().zip(povm.elements()) {
            assert_eq!(b.choi().matrix(), e.matrix());
        }
    }

    #[test]
    fn bell_basis_povm_maps_to_valid_instrument() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::default();
        let r = |x: f64| C64::new(x, 0.0);
        let kets = [
            [r(s), z, z, r(s)],
            [r(s), z, z, r(-s)],
            [z, r(s), r(s), z],
            [z, r(s), r(-s), z],
        ];
        let label = SpaceLabel::plain("A", 4);
        let elems = kets
            .iter()
            .map(|k| Operator::from_ket(vec![label.clone()], k).unwrap().into_matrix())
            .collect();
        let povm = Povm::new(label, elems).unwrap();
        let ins = povm_to_instrument(&povm, Some(a_in()), Some(a_out())).unwrap();
        assert_eq!(ins.len(), 4);
        ins.validate(1e-12).unwrap();
    }

    #[test]
    fn trivial_povm_gives_depolarizing_choi() {
        let povm = Povm::new(SpaceLabel::plain("A", 4), vec![CMatrix::identity(4, 4)]).unwrap();
        let ins = povm_to_instrument(&povm, Some(a_in()), Some(a_out())).unwrap();
        let want = CMatrix::identity(4, 4) * C64::new(0.5, 0.0);
        assert_eq!(ins.branches()[0].choi().matrix(), &want);
        // the map sends every state to 1/2
        let rho = BlochSetting::xy(0.3).projector(1.0);
        let out = ins.branches()[0].apply(&rho).unwrap();
        assert!((out - CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn non_factorizable_split_is_rejected() {
        let povm = Povm::projective(SpaceLabel::plain("A", 2), BlochSetting::z()).unwrap();
        assert!(povm_to_instrument(&povm, Some(a_in()), Some(a_out())).is_err());
    }

    #[test]
    fn reduce_projective_preparations() {
        let z = projective_instrument(BlochSetting::z(), a_in(), a_out()).unwrap();
        let prep = z.reduce_preparation().unwrap();
        assert!((prep[0].0 - 0.5).abs() < 1e-15 && (prep[1].0 - 0.5).abs() < 1e-15);
        assert!((prep[0].1.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((prep[1].1.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);

        let x = projective_instrument(BlochSetting::xy(0.0), a_in(), a_out()).unwrap();
        let prep = x.reduce_preparation().unwrap();
        let plus = BlochSetting::xy(0.0).projector(1.0);
        let minus = BlochSetting::xy(0.0).projector(-1.0);
        assert!((prep[0].1.matrix() - plus).norm() < 1e-14);
        assert!((prep[1].1.matrix() - minus).norm() < 1e-14);
    }

    #[test]
    fn reduced_random_unbiased_instrument_sums_to_half_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let ins = random::unbiased_instrument(&mut rng, "x", a_in(), a_out(), 3);
            assert!(ins.is_unbiased(1e-10).unwrap());
            let prep = ins.reduce_to_preparation().unwrap();
            let sum: CMatrix = prep.branches().iter().map(|b| b.choi().matrix().clone()).sum();
            assert!((sum - CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn non_cptp_instrument_is_rejected() {
        let half = CMatrix::identity(4, 4) * C64::new(0.25, 0.0);
        let r = Instrument::from_chois("bad", vec![half], Some(a_in()), Some(a_out()));
        assert!(matches!(r, Err(Error::NotTracePreserving(_))));
    }

    #[test]
    fn bloch_projector_is_rank_one_projector() {
        let s = BlochSetting::new(0.7, 2.0 * PI / 3.0).unwrap();
        let p = s.projector(-1.0);
        assert!((&p * &p - &p).norm() < 1e-14);
        assert!((p.trace().re - 1.0).abs() < 1e-15);
        assert!(BlochSetting::new(f64::NAN, 0.0).is_err());
    }
}

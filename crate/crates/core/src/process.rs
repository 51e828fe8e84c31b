//! Process matrices: construction, validation and the map to states.
//!
//! A process keeps its natural trace (the identity process on a qubit has
//! trace 2, the tripartite GHZ process as well); only [`ProcessMatrix::to_state`]
//! normalizes.

use std::fmt;

use crate::error::{Error, Result};
use crate::operations::CpMap;
use crate::tensor::{CMatrix, Operator, Port, SpaceLabel, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum Structure {
    /// Density matrix on input ports only, unit trace.
    SpatialState,
    /// Channel from the output-port labels to the input-port labels.
    Channel,
    /// Fixed causal order. Each step lists the parties acting at that time;
    /// parties within a step are spatially separated.
    FixedOrderComb(Vec<Vec<String>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCheck {
    pub name: String,
    pub deviation: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidityReport {
    pub structure: Structure,
    pub min_eigenvalue: f64,
    pub psd: bool,
    pub trace: f64,
    pub checks: Vec<ConditionCheck>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.psd && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.psd {
            out.push(format!(
                "not positive semi-definite (min eigenvalue {:.3e})",
                self.min_eigenvalue
            ));
        }
        out.extend(
            self.checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{} (deviation {:.3e})", c.name, c.deviation)),
        );
        out
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "structure: {:?}", self.structure)?;
        writeln!(
            f,
            "positive semi-definite: {} (min eigenvalue {:.3e})",
            self.psd, self.min_eigenvalue
        )?;
        writeln!(f, "trace: {:.12}", self.trace)?;
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {} (deviation {:.3e})",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.deviation
            )?;
        }
        write!(f, "valid: {}", self.is_valid())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    op: Operator,
    structure: Structure,
}

fn names(labels: &[SpaceLabel]) -> String {
    labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
}

impl ProcessMatrix {
    /// Declares a structure without checking it; see [`ProcessMatrix::validate`].
    pub fn declare(op: Operator, structure: Structure) -> Self {
        ProcessMatrix { op, structure }
    }

    /// Declares and validates with tolerance `tol`.
    pub fn new(op: Operator, structure: Structure, tol: f64) -> Result<Self> {
        let w = Self::declare(op, structure);
        let report = w.validate(tol);
        if !report.is_valid() {
            return Err(Error::InvalidProcess(report.failures().join("; ")));
        }
        Ok(w)
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn layout(&self) -> &[SpaceLabel] {
        self.op.layout()
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    /// `rho = W / tr W`.
    pub fn to_state(&self) -> Result<Operator> {
        let t = self.op.trace();
        if t.norm() < 1e-14 {
            return Err(Error::ZeroTrace);
        }
        Ok(self.op.scale(1.0 / t.re))
    }

    /// `v W + (1 - v) tr(W) 1 / d`, white noise on the process-equivalent
    /// state. Preserves every structural condition.
    pub fn depolarize(&self, visibility: f64) -> Result<ProcessMatrix> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::InvalidParameter(format!(
                "visibility {visibility} outside [0, 1]"
            )));
        }
        let d = self.op.dim() as f64;
        let noise = Operator::identity(self.layout().to_vec())?.scale(self.trace() / d);
        let op = self.op.scale(visibility).add(&noise.scale(1.0 - visibility))?;
        Ok(ProcessMatrix::declare(op, self.structure.clone()))
    }

    pub fn validate(&self, tol: f64) -> ValidityReport {
        let min_eigenvalue = self.op.min_eigenvalue();
        let herm = self.op.hermitian_deviation();
        let mut checks = Vec::new();
        match &self.structure {
            Structure::SpatialState => self.check_state(tol, &mut checks),
            Structure::Channel => self.check_channel(tol, &mut checks),
            Structure::FixedOrderComb(order) => self.check_comb(order, tol, &mut checks),
        }
        ValidityReport {
            structure: self.structure.clone(),
            min_eigenvalue,
            psd: herm <= tol && min_eigenvalue >= -tol,
            trace: self.trace(),
            checks,
        }
    }

    fn check_state(&self, tol: f64, checks: &mut Vec<ConditionCheck>) {
        let bad = self.layout().iter().filter(|l| l.port != Port::Input).count();
        checks.push(ConditionCheck {
            name: "all ports are inputs".into(),
            deviation: bad as f64,
            passed: bad == 0,
        });
        let dev = (self.op.trace() - C64::new(1.0, 0.0)).norm();
        checks.push(ConditionCheck {
            name: "unit trace".into(),
            deviation: dev,
            passed: dev <= tol,
        });
    }

    fn check_channel(&self, tol: f64, checks: &mut Vec<ConditionCheck>) {
        let ins: Vec<SpaceLabel> = self
            .layout()
            .iter()
            .filter(|l| l.port == Port::Output)
            .cloned()
            .collect();
        let outs: Vec<SpaceLabel> = self
            .layout()
            .iter()
            .filter(|l| l.port == Port::Input)
            .cloned()
            .collect();
        let ports_ok = !ins.is_empty() && ins.len() + outs.len() == self.layout().len();
        checks.push(ConditionCheck {
            name: "channel runs from output ports to input ports".into(),
            deviation: if ports_ok { 0.0 } else { 1.0 },
            passed: ports_ok,
        });
        if !ports_ok {
            return;
        }
        checks.push(identity_check(
            &self.op,
            &outs,
            &ins,
            format!(
                "trace condition: tr over [{}] equals identity on [{}]",
                names(&outs),
                names(&ins)
            ),
            tol,
        ));
    }

    fn check_comb(&self, order: &[Vec<String>], tol: f64, checks: &mut Vec<ConditionCheck>) {
        let step_of = |l: &SpaceLabel| order.iter().position(|s| s.contains(&l.party));
        let orphans: Vec<String> = self
            .layout()
            .iter()
            .filter(|l| step_of(l).is_none() || l.port == Port::None)
            .map(|l| l.to_string())
            .collect();
        checks.push(ConditionCheck {
            name: if orphans.is_empty() {
                "every space belongs to an ordered party".into()
            } else {
                format!("spaces outside the causal order: {}", orphans.join(" "))
            },
            deviation: orphans.len() as f64,
            passed: orphans.is_empty(),
        });
        if !orphans.is_empty() {
            return;
        }

        let mut current = self.op.clone();
        let last = order.len().saturating_sub(1);
        for k in (0..order.len()).rev() {
            let of_step = |port: Port, op: &Operator| -> Vec<SpaceLabel> {
                op.layout()
                    .iter()
                    .filter(|l| l.port == port && step_of(l) == Some(k))
                    .cloned()
                    .collect()
            };
            let outs = of_step(Port::Output, &current);
            if !outs.is_empty() {
                let d: usize = outs.iter().map(|l| l.dim).product();
                let reduced = match current.partial_trace(&outs) {
                    Ok(r) => r.scale(1.0 / d as f64),
                    Err(_) => return,
                };
                let rebuilt = reduced
                    .tensor(&Operator::identity(outs.clone()).expect("labels are valid"))
                    .and_then(|r| r.reorder(current.layout()));
                let dev = rebuilt
                    .and_then(|r| r.max_abs_diff(&current))
                    .unwrap_or(f64::INFINITY);
                let name = if k == last {
                    format!("final outputs [{}] are discarded", names(&outs))
                } else {
                    format!(
                        "step {}: tracing later inputs leaves identity on [{}]",
                        k + 1,
                        names(&outs)
                    )
                };
                checks.push(ConditionCheck {
                    name,
                    deviation: dev,
                    passed: dev <= tol,
                });
                current = reduced;
            }
            let ins = of_step(Port::Input, &current);
            if !ins.is_empty() {
                current = match current.partial_trace(&ins) {
                    Ok(r) => r,
                    Err(_) => return,
                };
            }
        }
        let dev = (current.trace() - C64::new(1.0, 0.0)).norm();
        checks.push(ConditionCheck {
            name: "normalization of the first step".into(),
            deviation: dev,
            passed: current.dim() == 1 && dev <= tol,
        });
    }
}

fn identity_check(
    op: &Operator,
    traced: &[SpaceLabel],
    kept: &[SpaceLabel],
    name: String,
    tol: f64,
) -> ConditionCheck {
    let dev = op
        .partial_trace(traced)
        .and_then(|r| {
            let id = Operator::identity(kept.to_vec())?;
            id.max_abs_diff(&r)
        })
        .unwrap_or(f64::INFINITY);
    ConditionCheck {
        name,
        deviation: dev,
        passed: dev <= tol,
    }
}

/// `sum_jl |j><l|^X ⊗ |j><l|^Y`.
pub fn identity_bracket(x: SpaceLabel, y: SpaceLabel) -> Result<Operator> {
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch {
            expected: x.dim,
            found: y.dim,
        });
    }
    let d = x.dim;
    let mut ket = vec![C64::new(0.0, 0.0); d * d];
    for j in 0..d {
        ket[j * d + j] = C64::new(1.0, 0.0);
    }
    Operator::from_ket(vec![x, y], &ket)
}

/// `(1^{A_I} / d) ⊗ [[1]]^{A_O B_I}`: a maximally mixed system measured by
/// A and then by B with trivial evolution in between.
pub fn identity_process(d: usize) -> Result<ProcessMatrix> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dimension {d} < 2")));
    }
    let mixed = Operator::identity(vec![SpaceLabel::input("A", d)])?.scale(1.0 / d as f64);
    let wire = identity_bracket(SpaceLabel::output("A", d), SpaceLabel::input("B", d))?;
    Ok(ProcessMatrix::declare(
        mixed.tensor(&wire)?,
        Structure::FixedOrderComb(vec![vec!["A".into()], vec!["B".into()]]),
    ))
}

/// `|Phi+><Phi+|` shared by A and B.
pub fn phi_plus_state(d: usize) -> Result<ProcessMatrix> {
    let op = identity_bracket(SpaceLabel::input("A", d), SpaceLabel::input("B", d))?;
    Ok(ProcessMatrix::declare(op.scale(1.0 / d as f64), Structure::SpatialState))
}

/// `T = sum_jl |j><l| ⊗ T(|j><l|)` for a trace-preserving map whose input is
/// an output port and whose output is an input port.
pub fn channel_to_process(map: &CpMap) -> Result<ProcessMatrix> {
    let (Some(from), Some(to)) = (map.input().cloned(), map.output().cloned()) else {
        return Err(Error::InvalidParameter(
            "a channel needs both an input and an output space".into(),
        ));
    };
    if from.port != Port::Output || to.port != Port::Input {
        return Err(Error::InvalidParameter(format!(
            "channel must run from an output port to an input port, got {from} -> {to}"
        )));
    }
    let marginal = map.input_marginal()?;
    let dev = marginal.max_abs_diff(&Operator::identity(vec![from.clone()])?)?;
    if dev > crate::tensor::DEFAULT_TOL {
        return Err(Error::NotTracePreserving(dev));
    }
    let (di, d_out) = (from.dim, to.dim);
    let mut t = CMatrix::zeros(di * d_out, di * d_out);
    for j in 0..di {
        for l in 0..di {
            let mut e = CMatrix::zeros(di, di);
            e[(j, l)] = C64::new(1.0, 0.0);
            let image = map.apply(&e)?;
            t.view_mut((j * d_out, l * d_out), (d_out, d_out)).copy_from(&image);
        }
    }
    Ok(ProcessMatrix::declare(
        Operator::new(vec![from, to], t)?,
        Structure::Channel,
    ))
}

/// Choi matrix of the CNOT with the system as control (`A_O -> B_I`) and the
/// ancilla `D` as target (`D -> C_I`). Layout `[A_O, B_I, D_O, C_I]`.
pub fn cnot_process() -> Result<ProcessMatrix> {
    let layout = vec![
        SpaceLabel::output("A", 2),
        SpaceLabel::input("B", 2),
        SpaceLabel::output("D", 2),
        SpaceLabel::input("C", 2),
    ];
    // sqrt2 (|00>|Phi+> + |11>|Psi+>) has unit amplitude on 0000, 0011, 1101, 1110
    let mut ket = vec![C64::new(0.0, 0.0); 16];
    for idx in [0b0000, 0b0011, 0b1101, 0b1110] {
        ket[idx] = C64::new(1.0, 0.0);
    }
    Ok(ProcessMatrix::declare(
        Operator::from_ket(layout, &ket)?,
        Structure::Channel,
    ))
}

fn kappa_ket(kappa: f64) -> [f64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [s * (1.0 + kappa).sqrt(), s * (1.0 - kappa).sqrt()]
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidParameter(format!("kappa {kappa} outside [0, 1]")));
    }
    Ok(())
}

/// The spatio-temporal process on `[A_O, B_I, C_I]` obtained by feeding the
/// ancilla state `|kappa>` into the CNOT and tracing out the ancilla.
pub fn ghz_process(kappa: f64) -> Result<ProcessMatrix> {
    check_kappa(kappa)?;
    let cnot = cnot_process()?;
    let d = SpaceLabel::output("D", 2);
    let k = kappa_ket(kappa);
    let ancilla = Operator::from_ket(vec![d.clone()], &[C64::new(k[0], 0.0), C64::new(k[1], 0.0)])?
        .transpose_subsystem(std::slice::from_ref(&d))?;
    let inserted = ancilla.extend_to(cnot.layout())?.compose(cnot.op())?;
    let chi = inserted.partial_trace(&[d])?;
    Ok(ProcessMatrix::declare(
        chi,
        Structure::FixedOrderComb(vec![vec!["A".into()], vec!["B".into(), "C".into()]]),
    ))
}

/// `|G_kappa> = [1 ⊗ 1 ⊗ (sqrt(1+kappa) 1 + sqrt(1-kappa) X) / sqrt2] |GHZ>`
/// as a density matrix on the input ports of A, B and C.
pub fn g_kappa_state(kappa: f64) -> Result<Operator> {
    check_kappa(kappa)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (c, x) = ((1.0 + kappa).sqrt() * s, (1.0 - kappa).sqrt() * s);
    let local = CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(c, 0.0), C64::new(x, 0.0), C64::new(x, 0.0), C64::new(c, 0.0)],
    );
    let op = CMatrix::identity(4, 4).kronecker(&local);
    let mut ghz = nalgebra::DVector::<C64>::zeros(8);
    ghz[0] = C64::new(s, 0.0);
    ghz[7] = C64::new(s, 0.0);
    let g = op * ghz;
    Operator::from_ket(
        vec![
            SpaceLabel::input("A", 2),
            SpaceLabel::input("B", 2),
            SpaceLabel::input("C", 2),
        ],
        g.as_slice(),
    )
}

/// Visibility `v` for which `v |psi><psi| + (1 - v) 1/d` has fidelity `f`
/// with `|psi>`.
pub fn visibility_for_fidelity(fidelity: f64, d: usize) -> f64 {
    let floor = 1.0 / d as f64;
    (fidelity - floor) / (1.0 - floor)
}

//! TOML scenario files.
//!
//! ```toml
//! noise = 0.95
//!
//! [process]
//! builder = "identity"
//! d = 2
//!
//! [[party]]
//! name = "A"
//! [[party.setting]]
//! kind = "projective"
//! phi = 0.0
//!
//! [inequality]
//! preset = "chsh"
//! ```
//!
//! Matrices are row-major arrays of rows; complex entries are written
//! `"(re, im)"` (bare numbers are read as real).

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use qcorr::correlations::{InequalityFunctional, Party, Scenario};
use qcorr::operations::{choi_from_kraus, povm_to_instrument, BlochSetting, Instrument, Povm};
use qcorr::optimizer::Role;
use qcorr::process::{channel_to_process, ghz_process, identity_process, phi_plus_state, ProcessMatrix, Structure};
use qcorr::tensor::{CMatrix, Operator, Port, SpaceLabel, C64};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex(pub C64);

impl Serialize for Complex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("({}, {})", self.0.re, self.0.im))
    }
}

fn parse_complex(text: &str) -> Result<C64, String> {
    let t = text.trim();
    let inner = t
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("complex literal {text:?} must look like \"(re, im)\""))?;
    let (re, im) = inner
        .split_once(',')
        .ok_or_else(|| format!("complex literal {text:?} needs two comma-separated parts"))?;
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|_| format!("{:?} in {text:?} is not a number", p.trim()))
    };
    Ok(C64::new(num(re)?, num(im)?))
}

impl<'de> Deserialize<'de> for Complex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct ComplexVisitor;
        impl Visitor<'_> for ComplexVisitor {
            type Value = Complex;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a \"(re, im)\" string or a real number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Complex, E> {
                parse_complex(v).map(Complex).map_err(E::custom)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Complex, E> {
                Ok(Complex(C64::new(v, 0.0)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Complex, E> {
                Ok(Complex(C64::new(v as f64, 0.0)))
            }
        }
        d.deserialize_any(ComplexVisitor)
    }
}

/// Row-major matrix literal.
pub type Matrix = Vec<Vec<Complex>>;

pub fn to_cmatrix(m: &Matrix, field: &str) -> Result<CMatrix, CliError> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(CliError::Parse(format!("{field}: matrix rows must be non-empty and equally long")));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| m[i][j].0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureSpec {
    State,
    Channel,
    Comb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builder {
    /// Memoryless channel from the first party's output to the second's input;
    /// needs `d`.
    Identity,
    /// Maximally entangled state of two inputs; needs `d`.
    PhiPlus,
    /// Three-party interaction family; needs `kappa`.
    GhzKappa,
    /// Channel `from_O -> to_I` given by Kraus operators (`d_to x d_from`).
    Channel,
    /// Explicit matrix on labels like `"A_I[2]"`, `"B_O[2]"`; needs `layout`,
    /// `structure`, `rows` and, for combs, `order`.
    Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub builder: Builder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kraus: Vec<Matrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layout: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub order: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingKind {
    /// Projective qubit operation along `(theta, phi)`; `theta` defaults to
    /// the equator.
    Projective,
    /// POVM on the party's spaces, mapped to an instrument as `E_a / d_out`.
    Povm,
    /// Per-outcome Choi matrices on `[input, output]`.
    Instrument,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingSpec {
    pub kind: SettingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub elements: Vec<Matrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branches: Vec<Matrix>,
}

fn required<T: Clone>(value: &Option<T>, field: &str, what: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Parse(format!("{field}: required for {what}")))
}

fn equator() -> f64 {
    FRAC_PI_2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartySpec {
    pub name: String,
    #[serde(rename = "setting")]
    pub settings: Vec<SettingSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub settings: Vec<usize>,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub absolute: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty", rename = "term")]
    pub terms: Vec<TermSpec>,
}

impl InequalitySpec {
    pub fn functional(&self, n_parties: usize) -> Result<InequalityFunctional, CliError> {
        if let Some(p) = &self.preset {
            return InequalityFunctional::preset(p)
                .ok_or_else(|| CliError::Parse(format!("inequality.preset: unknown preset {p:?}")));
        }
        if self.terms.is_empty() {
            return Err(CliError::Parse("inequality: give a preset or at least one term".into()));
        }
        InequalityFunctional::new(
            self.name.clone().unwrap_or_else(|| "custom".into()),
            n_parties,
            self.terms.iter().map(|t| (t.settings.clone(), t.coefficient)),
            self.bound.unwrap_or(f64::NAN),
            self.absolute,
        )
        .map_err(CliError::at("inequality.term"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Visibility of white noise mixed into the process.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    pub process: ProcessSpec,
    #[serde(default, rename = "party")]
    pub parties: Vec<PartySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inequality: Option<InequalitySpec>,
}

/// A parsed file with everything it describes built and validated.
#[derive(Clone, Debug, PartialEq)]
pub struct Loaded {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub functional: Option<InequalityFunctional>,
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string().trim_end().to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    /// The process, noise applied, checked against its declared structure.
    pub fn build_process(&self, tol: f64) -> Result<ProcessMatrix, CliError> {
        let w = build_process(&self.process)?;
        let w = match self.noise {
            Some(v) => w.depolarize(v).map_err(CliError::at("noise"))?,
            None => w,
        };
        let report = w.validate(tol);
        if !report.is_valid() {
            return Err(CliError::Validation {
                field: "process".into(),
                source: qcorr::Error::InvalidProcess(report.failures().join("; ")),
            });
        }
        Ok(w)
    }

    pub fn build(&self, tol: f64) -> Result<Loaded, CliError> {
        let process = self.build_process(tol)?;
        let mut parties = Vec::with_capacity(self.parties.len());
        for (p, spec) in self.parties.iter().enumerate() {
            let field = format!("party[{p}] ({})", spec.name);
            let role = Role::of(process.layout(), &spec.name).map_err(CliError::at(&field))?;
            let instruments = spec
                .settings
                .iter()
                .enumerate()
                .map(|(x, s)| {
                    let field = format!("{field}.setting[{x}]");
                    build_setting(s, &role, &format!("{}{x}", spec.name), &field)
                })
                .collect::<Result<Vec<_>, _>>()?;
            parties.push(Party::new(spec.name.clone(), instruments));
        }
        let scenario = Scenario::new(process, parties).map_err(CliError::at("party"))?;
        let functional = self
            .inequality
            .as_ref()
            .map(|i| i.functional(self.parties.len()))
            .transpose()?;
        Ok(Loaded {
            file: self.clone(),
            scenario,
            functional,
        })
    }
}

pub fn parse_scenario(text: &str, tol: f64) -> Result<Loaded, CliError> {
    ScenarioFile::from_toml(text)?.build(tol)
}

fn parse_label(text: &str, field: &str) -> Result<SpaceLabel, CliError> {
    let bad = || CliError::Parse(format!("{field}: label {text:?} must look like \"A_I[2]\", \"A_O[2]\" or \"A[2]\""));
    let (name, rest) = text.trim().split_once('[').ok_or_else(bad)?;
    let dim: usize = rest.strip_suffix(']').and_then(|d| d.trim().parse().ok()).ok_or_else(bad)?;
    if dim == 0 {
        return Err(bad());
    }
    let (party, port) = if let Some(p) = name.strip_suffix("_I") {
        (p, Port::Input)
    } else if let Some(p) = name.strip_suffix("_O") {
        (p, Port::Output)
    } else {
        (name, Port::None)
    };
    if party.is_empty() {
        return Err(bad());
    }
    Ok(SpaceLabel::new(party, port, dim))
}

fn build_process(spec: &ProcessSpec) -> Result<ProcessMatrix, CliError> {
    let field = "process";
    match spec.builder {
        Builder::Identity => {
            identity_process(required(&spec.d, "process.d", "builder identity")?).map_err(CliError::at(field))
        }
        Builder::PhiPlus => {
            phi_plus_state(required(&spec.d, "process.d", "builder phi_plus")?).map_err(CliError::at(field))
        }
        Builder::GhzKappa => {
            ghz_process(required(&spec.kappa, "process.kappa", "builder ghz_kappa")?).map_err(CliError::at(field))
        }
        Builder::Channel => {
            let from = required(&spec.from, "process.from", "builder channel")?;
            let to = required(&spec.to, "process.to", "builder channel")?;
            let ks = spec
                .kraus
                .iter()
                .enumerate()
                .map(|(k, m)| to_cmatrix(m, &format!("process.kraus[{k}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let first = ks
                .first()
                .ok_or_else(|| CliError::Parse("process.kraus: at least one operator is needed".into()))?;
            let map = choi_from_kraus(
                &ks,
                Some(SpaceLabel::output(from, first.ncols())),
                Some(SpaceLabel::input(to, first.nrows())),
            )
            .map_err(CliError::at("process.kraus"))?;
            channel_to_process(&map).map_err(CliError::at("process.kraus"))
        }
        Builder::Matrix => {
            let labels = spec
                .layout
                .iter()
                .map(|l| parse_label(l, "process.layout"))
                .collect::<Result<Vec<_>, _>>()?;
            if labels.is_empty() {
                return Err(CliError::Parse("process.layout: required for builder matrix".into()));
            }
            let op = Operator::new(labels, to_cmatrix(&spec.rows, "process.rows")?)
                .map_err(CliError::at("process.rows"))?;
            let structure = match required(&spec.structure, "process.structure", "builder matrix")? {
                StructureSpec::State => Structure::SpatialState,
                StructureSpec::Channel => Structure::Channel,
                StructureSpec::Comb => {
                    if spec.order.is_empty() {
                        return Err(CliError::Parse("process.order: a comb needs the party order".into()));
                    }
                    Structure::FixedOrderComb(spec.order.clone())
                }
            };
            Ok(ProcessMatrix::declare(op, structure))
        }
    }
}

fn build_setting(spec: &SettingSpec, role: &Role, name: &str, field: &str) -> Result<Instrument, CliError> {
    let (input, output) = (role.input().cloned(), role.output().cloned());
    let matrices = |ms: &[Matrix], key: &str| {
        if ms.is_empty() {
            return Err(CliError::Parse(format!("{field}.{key}: at least one matrix is needed")));
        }
        ms.iter()
            .enumerate()
            .map(|(a, m)| to_cmatrix(m, &format!("{field}.{key}[{a}]")))
            .collect::<Result<Vec<_>, _>>()
    };
    match spec.kind {
        SettingKind::Projective => {
            let phi = required(&spec.phi, &format!("{field}.phi"), "kind projective")?;
            let theta = spec.theta.unwrap_or_else(equator);
            let setting = BlochSetting::new(theta, phi).map_err(CliError::at(field))?;
            role.instrument(setting).map_err(CliError::at(field))
        }
        SettingKind::Povm => {
            let elems = matrices(&spec.elements, "elements")?;
            let d = input.as_ref().map_or(1, |l| l.dim) * output.as_ref().map_or(1, |l| l.dim);
            let party = input.as_ref().or(output.as_ref()).map(|l| l.party.clone()).unwrap_or_default();
            let povm = Povm::new(SpaceLabel::plain(party, d), elems).map_err(CliError::at(field))?;
            povm_to_instrument(&povm, input, output).map_err(CliError::at(field))
        }
        SettingKind::Instrument => {
            let chois = matrices(&spec.branches, "branches")?;
            Instrument::from_chois(name, chois, input, output).map_err(CliError::at(field))
        }
    }
}

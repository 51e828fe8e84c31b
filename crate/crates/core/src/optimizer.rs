//! Multistart Nelder–Mead search over measurement angles.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::correlations::{evaluate, InequalityFunctional, Party, Scenario};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::operations::{projective_instrument, projective_preparation, BlochSetting, Instrument, Povm};
use crate::process::{ghz_process, ProcessMatrix};
use crate::tensor::{Port, SpaceLabel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// One azimuth per setting, in the equatorial plane.
    Xy,
    /// Polar and azimuthal angle per setting.
    Bloch,
}

impl Mode {
    pub fn angles_per_setting(self) -> usize {
        match self {
            Mode::Xy => 1,
            Mode::Bloch => 2,
        }
    }
}

/// Flattened angles, party-major then setting-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingsVector {
    pub mode: Mode,
    pub angles: Vec<f64>,
}

impl SettingsVector {
    pub fn new(mode: Mode, angles: Vec<f64>) -> Result<Self> {
        if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter(format!("angle {a} is not finite")));
        }
        Ok(SettingsVector { mode, angles })
    }

    pub fn xy(angles: Vec<f64>) -> Result<Self> {
        Self::new(Mode::Xy, angles)
    }

    /// Angles reduced to `[0, 2pi)`.
    pub fn reduced(&self) -> Vec<f64> {
        self.angles.iter().map(|a| a.rem_euclid(TAU)).collect()
    }

    fn setting(&self, k: usize) -> BlochSetting {
        match self.mode {
            Mode::Xy => BlochSetting::xy(self.angles[k]),
            Mode::Bloch => BlochSetting {
                theta: self.angles[2 * k],
                phi: self.angles[2 * k + 1],
            },
        }
    }
}

/// XY angles for the three-party Svetlichny test on the interaction family:
/// `A` at `pi/4` and `3pi/4`, `B` at `0` and `pi/2`, `C` at `pi/2` and `pi`.
pub fn svetlichny_reference_settings() -> SettingsVector {
    SettingsVector {
        mode: Mode::Xy,
        angles: vec![FRAC_PI_4, 3.0 * FRAC_PI_4, 0.0, FRAC_PI_2, FRAC_PI_2, PI],
    }
}

/// How a party acts, read off the ports it owns in the process.
#[derive(Clone, Debug, PartialEq)]
pub enum Role {
    Measurement(SpaceLabel),
    Preparation(SpaceLabel),
    Instrument { input: SpaceLabel, output: SpaceLabel },
}

impl Role {
    /// Role of `party` in a process layout: input only, output only, or both.
    pub fn of(layout: &[SpaceLabel], party: &str) -> Result<Role> {
        let find = |port: Port| layout.iter().find(|l| l.party == party && l.port == port).cloned();
        let owned = layout.iter().filter(|l| l.party == party).count();
        match (find(Port::Input), find(Port::Output)) {
            (Some(i), Some(o)) if owned == 2 => Ok(Role::Instrument { input: i, output: o }),
            (Some(i), None) if owned == 1 => Ok(Role::Measurement(i)),
            (None, Some(o)) if owned == 1 => Ok(Role::Preparation(o)),
            _ => Err(Error::InvalidScenario(format!(
                "party {party} must own one input and/or one output port"
            ))),
        }
    }

    pub fn input(&self) -> Option<&SpaceLabel> {
        match self {
            Role::Measurement(l) | Role::Instrument { input: l, .. } => Some(l),
            Role::Preparation(_) => None,
        }
    }

    pub fn output(&self) -> Option<&SpaceLabel> {
        match self {
            Role::Preparation(l) | Role::Instrument { output: l, .. } => Some(l),
            Role::Measurement(_) => None,
        }
    }

    /// Projective qubit operation along `setting`: a measurement, the
    /// preparation of `P_a / 2`, or the Lüders instrument.
    pub fn instrument(&self, setting: BlochSetting) -> Result<Instrument> {
        match self {
            Role::Measurement(l) => Ok(Povm::projective(l.clone(), setting)?
                .into_instrument(format!("{:.6},{:.6}", setting.theta, setting.phi))),
            Role::Preparation(l) => projective_preparation(setting, l.clone()),
            Role::Instrument { input, output } => projective_instrument(setting, input.clone(), output.clone()),
        }
    }
}

/// A process plus the party roles; turns angle vectors into scenarios with
/// projective (qubit) operations.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioTemplate {
    process: ProcessMatrix,
    parties: Vec<(String, Role)>,
    settings_per_party: usize,
}

impl ScenarioTemplate {
    /// Parties appear in the order of their first space in the process layout.
    pub fn new(process: ProcessMatrix, settings_per_party: usize) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        for l in process.layout() {
            if !names.contains(&l.party) {
                names.push(l.party.clone());
            }
        }
        Self::with_parties(process, &names, settings_per_party)
    }

    /// Parties in the given order; together they must own the whole layout.
    pub fn with_parties(process: ProcessMatrix, names: &[String], settings_per_party: usize) -> Result<Self> {
        if let Some(l) = process.layout().iter().find(|l| !names.contains(&l.party)) {
            return Err(Error::InvalidScenario(format!("no party owns {l}")));
        }
        let parties = names
            .iter()
            .map(|name| Ok((name.clone(), Role::of(process.layout(), name)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScenarioTemplate {
            process,
            parties,
            settings_per_party,
        })
    }

    pub fn process(&self) -> &ProcessMatrix {
        &self.process
    }

    pub fn parties(&self) -> &[(String, Role)] {
        &self.parties
    }

    pub fn dimension(&self, mode: Mode) -> usize {
        self.parties.len() * self.settings_per_party * mode.angles_per_setting()
    }

    pub fn build(&self, settings: &SettingsVector) -> Result<Scenario> {
        let n = self.dimension(settings.mode);
        if settings.angles.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: settings.angles.len(),
            });
        }
        let wrap = |e: Error| Error::Template {
            settings: settings.angles.clone(),
            source: Box::new(e),
        };
        let parties = self
            .parties
            .iter()
            .enumerate()
            .map(|(p, (name, role))| {
                let instruments = (0..self.settings_per_party)
                    .map(|x| role.instrument(settings.setting(p * self.settings_per_party + x)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Party::new(name.clone(), instruments))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        Scenario::new(self.process.clone(), parties).map_err(wrap)
    }

    pub fn evaluate(&self, f: &InequalityFunctional, settings: &SettingsVector) -> Result<f64> {
        let scenario = self.build(settings)?;
        let table = scenario.table_with(Execution::Sequential)?;
        evaluate(f, &table)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop once every vertex lies within this distance of the best one.
    pub xtol: f64,
    pub max_evaluations: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            xtol: 1e-10,
            max_evaluations: 100_000,
            initial_step: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` with the standard reflection/expansion/contraction/shrink
/// coefficients (1, 2, 1/2, 1/2).
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> Result<Minimum> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidParameter("nothing to optimize".into()));
    }
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)?));
    for k in 0..n {
        let mut x = x0.to_vec();
        x[k] += opts.initial_step;
        let v = eval(&x, &mut evals)?;
        simplex.push((x, v));
    }
    let point = |c: &[f64], toward: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(toward).map(|(a, b)| a + t * (b - a)).collect()
    };
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if diameter < opts.xtol {
            converged = true;
            break;
        }
        if evals >= opts.max_evaluations {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let (worst, f_worst) = simplex[n].clone();
        let f_best = simplex[0].1;
        let f_second = simplex[n - 1].1;
        let xr = point(&centroid, &worst, -1.0);
        let fr = eval(&xr, &mut evals)?;
        if fr < f_best {
            let xe = point(&centroid, &worst, -2.0);
            let fe = eval(&xe, &mut evals)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = point(&centroid, &xr, 0.5);
            let fc = eval(&xc, &mut evals)?;
            (xc, fc)
        } else {
            let xc = point(&centroid, &worst, 0.5);
            let fc = eval(&xc, &mut evals)?;
            (xc, fc)
        };
        if fc < fr.min(f_worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = point(&best, &vertex.0, 0.5);
            let v = eval(&x, &mut evals)?;
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Ok(Minimum {
        x,
        value,
        evaluations: evals,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub best_value: f64,
    pub best_settings: SettingsVector,
    pub evaluations: usize,
    pub converged: bool,
}

pub fn optimize(
    template: &ScenarioTemplate,
    f: &InequalityFunctional,
    mode: Mode,
    restarts: usize,
    seed: u64,
) -> Result<OptimizationResult> {
    optimize_with(template, f, mode, restarts, seed, &NelderMeadOptions::default(), Execution::default())
}

/// Restart `r` draws its start from stream `r` of a ChaCha generator seeded
/// with `seed`, so results do not depend on scheduling.
pub fn optimize_with(
    template: &ScenarioTemplate,
    f: &InequalityFunctional,
    mode: Mode,
    restarts: usize,
    seed: u64,
    opts: &NelderMeadOptions,
    exec: Execution,
) -> Result<OptimizationResult> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is needed".into()));
    }
    let n = template.dimension(mode);
    let objective = |x: &[f64]| -> Result<f64> {
        let s = SettingsVector::new(mode, x.to_vec())?;
        Ok(-template.evaluate(f, &s)?)
    };
    let runs = exec::try_map_indexed(exec, restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let x0: Vec<f64> = (0..n)
            .map(|k| match mode {
                Mode::Bloch if k % 2 == 0 => rng.gen_range(0.0..PI),
                _ => rng.gen_range(0.0..TAU),
            })
            .collect();
        nelder_mead(objective, &x0, opts)
    })?;
    let evaluations: usize = runs.iter().map(|m| m.evaluations).sum();
    let best = runs
        .into_iter()
        .reduce(|acc, m| if m.value < acc.value { m } else { acc })
        .expect("at least one restart");
    let best_settings = SettingsVector::new(mode, best.x)?;
    let best_value = template.evaluate(f, &best_settings)?;
    Ok(OptimizationResult {
        best_value,
        best_settings,
        evaluations: evaluations + 1,
        converged: best.converged,
    })
}

/// Evaluates `f` on the interaction family at fixed settings for each `kappa`.
pub fn scan_kappa(grid: &[f64], f: &InequalityFunctional, settings: &SettingsVector) -> Result<Vec<(f64, f64)>> {
    scan_kappa_with(grid, f, settings, 1.0)
}

/// As [`scan_kappa`], with the process depolarized to `visibility` first.
pub fn scan_kappa_with(
    grid: &[f64],
    f: &InequalityFunctional,
    settings: &SettingsVector,
    visibility: f64,
) -> Result<Vec<(f64, f64)>> {
    grid.iter()
        .map(|&kappa| {
            let process = ghz_process(kappa)?;
            let process = if visibility < 1.0 { process.depolarize(visibility)? } else { process };
            let template = ScenarioTemplate::new(process, 2)?;
            Ok((kappa, template.evaluate(f, settings)?))
        })
        .collect()
}

/// `n` evenly spaced points on `[0, 1]`.
pub fn kappa_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
    }
}

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use qcorr::classical::{biseparable_bound, local_bound};
use qcorr::correlations::{evaluate, no_signalling_distance, unravel, InequalityFunctional, ProbabilityTable};
use qcorr::optimizer::{
    kappa_grid, optimize, scan_kappa_with, svetlichny_reference_settings, Mode, ScenarioTemplate, SettingsVector,
};

use crate::error::CliError;
use crate::file::{parse_scenario, Loaded};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "qcorr", version, about = "Correlations of process-matrix scenarios")]
pub struct Cli {
    /// Numerical tolerance for validity and no-signalling checks.
    #[arg(long, global = true, env = "QCORR_TOL", default_value_t = DEFAULT_TOL)]
    pub tol: f64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Local,
    Biseparable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Xy,
    Bloch,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the process and every instrument of a scenario file.
    Validate { file: PathBuf },
    /// Print outcome probabilities, for one setting tuple or all of them.
    Simulate {
        file: PathBuf,
        /// Comma-separated setting indices, one per party.
        #[arg(long)]
        settings: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Evaluate an inequality on the scenario's statistics.
    Inequality {
        file: PathBuf,
        /// Preset name; defaults to the inequality declared in the file.
        #[arg(long)]
        name: Option<String>,
    },
    /// Classical bound of a preset by exhaustive enumeration.
    Bound {
        #[arg(long)]
        name: String,
        #[arg(long, value_enum, default_value_t = Model::Local)]
        model: Model,
    },
    /// Search projective measurement angles maximizing an inequality.
    Optimize {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Xy)]
        mode: ModeArg,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        name: Option<String>,
    },
    /// Inequality value on the three-party interaction family across kappa.
    ScanKappa {
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "svetlichny")]
        name: String,
        /// Visibility of white noise mixed into each process.
        #[arg(long)]
        noise: Option<f64>,
        /// Six comma-separated XY angles: A0,A1,B0,B1,C0,C1.
        #[arg(long)]
        settings: Option<String>,
    },
    /// Largest change of the marginals of `--to` under setting changes of `--from`.
    Nosignal {
        file: PathBuf,
        #[arg(long)]
        from: String,
        /// Comma-separated party names.
        #[arg(long)]
        to: String,
    },
}

fn load(path: &Path, tol: f64) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text, tol).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn functional(loaded: &Loaded, name: Option<&str>) -> Result<InequalityFunctional, CliError> {
    match name {
        Some(n) => preset(n),
        None => loaded
            .functional
            .clone()
            .ok_or_else(|| CliError::Usage("no inequality in the file; pass --name".into())),
    }
}

fn preset(name: &str) -> Result<InequalityFunctional, CliError> {
    InequalityFunctional::preset(name)
        .ok_or_else(|| CliError::Usage(format!("unknown inequality {name:?} (chsh, mermin, svetlichny)")))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{what}: {:?} is not valid", s.trim())))
        })
        .collect()
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let tol = cli.tol;
    if tol.is_nan() || tol <= 0.0 {
        return Err(CliError::Usage(format!("tolerance must be positive, got {tol}")));
    }
    match &cli.command {
        Command::Validate { file } => validate(file, tol, out),
        Command::Simulate { file, settings, format } => simulate(file, settings.as_deref(), *format, tol, out),
        Command::Inequality { file, name } => {
            let loaded = load(file, tol)?;
            let f = functional(&loaded, name.as_deref())?;
            let value = evaluate(&f, &loaded.scenario.table()?)?;
            write_inequality(&f, value, out)
        }
        Command::Bound { name, model } => {
            let f = preset(name)?;
            let value = match model {
                Model::Local => local_bound(&f, f.n_parties, 2)?,
                Model::Biseparable => biseparable_bound(&f)?,
            };
            let model = match model {
                Model::Local => "local",
                Model::Biseparable => "biseparable",
            };
            writeln!(out, "{} {model} bound: {value}", f.name)?;
            Ok(())
        }
        Command::Optimize {
            file,
            mode,
            restarts,
            seed,
            name,
        } => {
            if *restarts == 0 {
                return Err(CliError::Usage("--restarts must be at least 1".into()));
            }
            let loaded = load(file, tol)?;
            let f = functional(&loaded, name.as_deref())?;
            let names: Vec<String> = loaded.scenario.parties().iter().map(|p| p.name.clone()).collect();
            let settings = f.settings_shape().into_iter().max().unwrap_or(1);
            let template = ScenarioTemplate::with_parties(loaded.scenario.process().clone(), &names, settings)
                .map_err(CliError::at("party"))?;
            let mode = match mode {
                ModeArg::Xy => Mode::Xy,
                ModeArg::Bloch => Mode::Bloch,
            };
            let r = optimize(&template, &f, mode, *restarts, *seed)?;
            write_inequality(&f, r.best_value, out)?;
            let per = mode.angles_per_setting();
            let angles = r.best_settings.reduced();
            for (p, name) in names.iter().enumerate() {
                for x in 0..settings {
                    let k = (p * settings + x) * per;
                    let (theta, phi) = match mode {
                        Mode::Xy => (FRAC_PI_2, angles[k]),
                        Mode::Bloch => (angles[k], angles[k + 1]),
                    };
                    writeln!(out, "  {name}{x}: theta = {theta:.10}, phi = {phi:.10}")?;
                }
            }
            writeln!(out, "evaluations: {}, converged: {}", r.evaluations, r.converged)?;
            Ok(())
        }
        Command::ScanKappa {
            points,
            out: path,
            name,
            noise,
            settings,
        } => {
            let f = preset(name)?;
            if f.n_parties != 3 {
                return Err(CliError::Usage(format!("{} is not a three-party inequality", f.name)));
            }
            let settings = match settings {
                Some(s) => {
                    let angles: Vec<f64> = parse_list(s, "--settings")?;
                    if angles.len() != 6 {
                        return Err(CliError::Usage("--settings needs six angles".into()));
                    }
                    SettingsVector::xy(angles).map_err(|e| CliError::Usage(e.to_string()))?
                }
                None if f.name == "mermin" => SettingsVector::xy(vec![0.0, FRAC_PI_2, 0.0, FRAC_PI_2, 0.0, FRAC_PI_2])?,
                None => svetlichny_reference_settings(),
            };
            let v = noise.unwrap_or(1.0);
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Usage(format!("--noise must lie in [0, 1], got {v}")));
            }
            let scan = scan_kappa_with(&kappa_grid(*points), &f, &settings, v)?;
            let mut csv = String::from("kappa,value\n");
            for (k, value) in &scan {
                csv.push_str(&format!("{k:.6},{value:.12}\n"));
            }
            match path {
                Some(p) => {
                    fs::write(p, &csv)?;
                    writeln!(out, "wrote {} points to {}", scan.len(), p.display())?;
                }
                None => out.write_all(csv.as_bytes())?,
            }
            Ok(())
        }
        Command::Nosignal { file, from, to } => {
            let loaded = load(file, tol)?;
            let s = &loaded.scenario;
            let index = |n: &str| {
                s.party_index(n.trim())
                    .ok_or_else(|| CliError::Usage(format!("no party named {:?}", n.trim())))
            };
            let from_i = index(from)?;
            let to_i = to.split(',').map(index).collect::<Result<Vec<_>, _>>()?;
            let d = no_signalling_distance(&s.table()?, from_i, &to_i)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            writeln!(out, "signalling distance {from} -> {to}: {d:.3e}")?;
            if d > tol {
                return Err(CliError::Check(format!("distance {d:.3e} exceeds tolerance {tol:.1e}")));
            }
            writeln!(out, "no-signalling holds within {tol:.1e}")?;
            Ok(())
        }
    }
}

fn write_inequality(f: &InequalityFunctional, value: f64, out: &mut dyn Write) -> Result<(), CliError> {
    let mut line = format!("{}: {value:.12}", f.name);
    if f.bound.is_finite() {
        let verdict = if value > f.bound + 1e-9 { "violated" } else { "satisfied" };
        line.push_str(&format!(" (classical bound {}, {verdict})", f.bound));
    }
    if let Some(q) = f.quantum_maximum() {
        line.push_str(&format!(", quantum maximum {q:.12}"));
    }
    writeln!(out, "{line}")?;
    Ok(())
}

fn validate(file: &Path, tol: f64, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load(file, tol)?;
    let s = &loaded.scenario;
    writeln!(out, "{}", s.process().validate(tol))?;
    if let Some(v) = loaded.file.noise {
        writeln!(out, "noise visibility: {v}")?;
    }
    for p in s.parties() {
        let unbiased = p
            .instruments
            .iter()
            .map(|i| i.is_unbiased(tol))
            .collect::<Result<Vec<_>, _>>()?;
        let flag = if unbiased.iter().all(|&u| u) { "unbiased" } else { "BIASED" };
        writeln!(
            out,
            "party {}: {} settings, {} outcomes, {flag}",
            p.name,
            p.instruments.len(),
            p.instruments[0].len()
        )?;
    }
    if let Some(f) = &loaded.functional {
        writeln!(out, "inequality: {}", f.name)?;
    }
    writeln!(out, "valid")?;
    Ok(())
}

fn simulate(file: &Path, settings: Option<&str>, format: Format, tol: f64, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load(file, tol)?;
    let s = &loaded.scenario;
    let table = s.table()?;
    let shape = s.settings_shape();
    let combos: Vec<Vec<usize>> = match settings {
        Some(text) => {
            let x: Vec<usize> = parse_list(text, "--settings")?;
            if x.len() != shape.len() || x.iter().zip(&shape).any(|(a, b)| a >= b) {
                return Err(CliError::Usage(format!("--settings must give one index per party below {shape:?}")));
            }
            vec![x]
        }
        None => (0..shape.iter().product()).map(|i| unravel(i, &shape)).collect(),
    };
    let names: Vec<&str> = s.parties().iter().map(|p| p.name.as_str()).collect();
    write_table(&table, &names, &combos, format, out)
}

fn write_table(
    table: &ProbabilityTable,
    names: &[&str],
    combos: &[Vec<usize>],
    format: Format,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut header: Vec<String> = names.iter().map(|n| format!("x_{n}")).collect();
    header.extend(names.iter().map(|n| format!("a_{n}")));
    header.push("probability".into());
    let mut rows = Vec::new();
    for x in combos {
        for o in 0..table.outcome_combos() {
            let outcomes = unravel(o, table.outcome_shape());
            let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            row.extend(
                outcomes
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| format!("{}", table.outcome_values()[k][a])),
            );
            row.push(format!("{:.12}", table.get(x, &outcomes)?));
            rows.push(row);
        }
    }
    match format {
        Format::Csv => {
            writeln!(out, "{}", header.join(","))?;
            for r in rows {
                writeln!(out, "{}", r.join(","))?;
            }
        }
        Format::Text => {
            let widths: Vec<usize> = (0..header.len())
                .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: &[String]| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(out, "{}", line(&header))?;
            for r in &rows {
                writeln!(out, "{}", line(r))?;
            }
        }
    }
    Ok(())
}

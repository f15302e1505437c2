//! `pulab`: generators, combinatorics, single learning runs, sweeps and the
//! bound checker behind one command.
//!
//! Exit codes: 0 ok, 1 a bound check failed, 2 usage, 3 io or parse error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pulab_core::concept::{claw_number_certified, vc_dimension, ConceptClass};
use pulab_core::harness::{
    read_csv, run_trial, sweep_sample_complexity, verify_bound, with_jobs, write_csv,
    BoundParams, ExperimentConfig, InstanceSpec, LearnerSpec, Prepared,
};
use pulab_core::instances::{
    agno_instance, claw_instance, cov_uni_instance, geometric_preset, left_right_triple,
    sar_instance, scar_pos_instance, two_point_instance, CovSide,
};
use pulab_core::rng::DEFAULT_SEED;
use pulab_core::{LabError, PuInstance};

#[derive(Parser)]
#[command(name = "pulab", version, about = "Positive-unlabeled learning sample-complexity lab")]
struct Cli {
    /// Master seed; falls back to PU_LAB_SEED, then to 20240601.
    #[arg(long, global = true, env = "PU_LAB_SEED")]
    seed: Option<u64>,

    /// Cap on parallel trial workers. Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// VC dimension of a class JSON file.
    Vcdim {
        #[arg(long)]
        class: PathBuf,
    },
    /// Claw number of a class, certified up to a level.
    Claw {
        #[arg(long)]
        class: PathBuf,
        /// Largest witness size checked; defaults to the domain size.
        #[arg(long)]
        max_level: Option<usize>,
    },
    /// Write an instance as JSON.
    Gen(GenArgs),
    /// Run one trial on an instance file.
    Learn {
        #[arg(long)]
        instance: PathBuf,
        /// perm, lagrangian:<gamma> or algorithm1:<gamma>.
        #[arg(long, default_value = "perm")]
        learner: LearnerSpec,
        #[arg(long)]
        b: usize,
        #[arg(long)]
        a: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep an experiment config over its sample-size grid.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check one bound; exits 1 if it does not hold.
    Check(CheckArgs),
    /// Pretty-print a sweep CSV as JSON.
    Summarize {
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Family {
    ScarPos,
    TwoPoint,
    Claw,
    Sar,
    CovUni,
    Agno,
    Geometric,
    LeftRight,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// Comma-separated point set.
    #[arg(long, value_delimiter = ',')]
    o: Vec<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    z: Option<u8>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    j: Vec<usize>,
    #[arg(long)]
    side: Option<CovSide>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    o1: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    o2: Vec<usize>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    bound: String,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    a: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Instance JSON to check the bound on instead of the default.
    #[arg(long)]
    instance: Option<PathBuf>,
}

/// Failures with their exit codes.
enum Failure {
    CheckFailed,
    Lab(LabError),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lab(e.into())
    }
}

fn exit_code(e: &LabError) -> u8 {
    match e {
        LabError::Json(_) | LabError::Csv(_) | LabError::Io(_) => 3,
        _ => 2,
    }
}

fn read(path: &Path) -> Result<String, LabError> {
    fs::read_to_string(path).map_err(|e| {
        LabError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), LabError> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| {
            LabError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
        }),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn need<T>(v: Option<T>, flag: &str, family: &str) -> Result<T, LabError> {
    v.ok_or_else(|| LabError::Usage(format!("--{flag} is required for family {family}")))
}

fn generate(g: &GenArgs, seed: u64) -> Result<PuInstance, LabError> {
    match g.family {
        Family::ScarPos => scar_pos_instance(need(g.d, "d", "scar_pos")?, need(g.rho, "rho", "scar_pos")?, &g.o),
        Family::TwoPoint => two_point_instance(need(g.eps, "eps", "two_point")?, need(g.z, "z", "two_point")?),
        Family::Claw => claw_instance(
            need(g.m, "m", "claw")?,
            need(g.h, "h", "claw")?,
            &g.o,
            need(g.rho, "rho", "claw")?,
        ),
        Family::Sar => sar_instance(
            need(g.d, "d", "sar")?,
            need(g.rho, "rho", "sar")?,
            need(g.r, "r", "sar")?,
            &g.o,
        ),
        Family::CovUni => cov_uni_instance(need(g.n, "n", "cov_uni")?, &g.j, need(g.side, "side", "cov_uni")?),
        Family::Agno => agno_instance(need(g.k, "k", "agno")?, need(g.rho, "rho", "agno")?, &g.o1, &g.o2),
        Family::Geometric => geometric_preset(g.preset.as_deref().unwrap_or("alg1")),
        Family::LeftRight => left_right_triple(need(g.n, "n", "left_right")?, seed)?.pu_instance(),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::Vcdim { class } => {
            let class = ConceptClass::from_json(&read(&class)?)?;
            println!("{}", vc_dimension(&class));
        }
        Command::Claw { class, max_level } => {
            let class = ConceptClass::from_json(&read(&class)?)?;
            let cert = claw_number_certified(&class, max_level.unwrap_or(class.n()))?;
            println!("{cert}");
        }
        Command::Gen(g) => {
            let inst = generate(&g, seed)?;
            emit(g.out.as_deref(), format!("{}\n", inst.to_json()?).as_bytes())?;
        }
        Command::Learn {
            instance,
            learner,
            b,
            a,
            out,
        } => {
            let prep = Prepared::new(PuInstance::from_json(&read(&instance)?)?)?;
            let (record, hypothesis) = run_trial(&prep, learner, b, a, seed)?;
            let body = json!({
                "learner": learner.name(),
                "hypothesis": hypothesis,
                "trial": record,
            });
            let text = serde_json::to_string_pretty(&body).map_err(LabError::from)?;
            emit(out.as_deref(), format!("{text}\n").as_bytes())?;
        }
        Command::Experiment {
            config,
            format,
            out,
        } => {
            let mut raw: Value = serde_json::from_str(&read(&config)?).map_err(LabError::from)?;
            if let Value::Object(map) = &mut raw {
                // An explicit seed wins over the file; the file wins over the default.
                match cli.seed {
                    Some(s) => {
                        map.insert("seed".into(), json!(s));
                    }
                    None => {
                        map.entry("seed").or_insert(json!(DEFAULT_SEED));
                    }
                }
            }
            let config: ExperimentConfig = serde_json::from_value(raw).map_err(LabError::from)?;
            let rows = with_jobs(cli.jobs, || sweep_sample_complexity(&config))??;
            let mut buf = Vec::new();
            match format {
                Format::Csv => write_csv(&rows, &mut buf)?,
                Format::Json => {
                    serde_json::to_writer_pretty(&mut buf, &rows).map_err(LabError::from)?;
                    buf.push(b'\n');
                }
            }
            emit(out.as_deref(), &buf)?;
        }
        Command::Check(c) => {
            let params = BoundParams {
                eta: c.eta,
                eps: c.eps,
                delta: c.delta,
                gamma: c.gamma,
                trials: c.trials,
                b: c.b,
                a: c.a,
                r: c.r,
                k: c.k,
                seed: Some(seed),
                instance: c.instance.map(|path| InstanceSpec::File { path }),
            };
            let report = with_jobs(cli.jobs, || verify_bound(&c.bound, &params))??;
            let text = serde_json::to_string_pretty(&report).map_err(LabError::from)?;
            println!("{text}");
            if !report.pass {
                return Err(Failure::CheckFailed);
            }
        }
        Command::Summarize { csv } => {
            let rows = read_csv(fs::File::open(&csv)?)?;
            let text = serde_json::to_string_pretty(&rows).map_err(LabError::from)?;
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::CheckFailed) => ExitCode::from(1),
        Err(Failure::Lab(e)) => {
            eprintln!("pulab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

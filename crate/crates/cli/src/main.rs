use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use macsim::config::{parse_named, ExperimentConfig, TypeSpec};
use macsim::experiment::{load_trace_jsonl, revalidate, run_experiment};
use macsim::matrix::{render_table, run_cells, suite, suite_from_toml};
use macsim_core::adversary::validate;
use macsim_core::InjectionScript;

/// Adversarial multiple access channel experiments.
#[derive(Parser)]
#[command(name = "macsim", version)]
struct Cli {
    /// Directory for artifacts.
    #[arg(
        long,
        global = true,
        env = "MACSIM_OUT_DIR",
        default_value = "macsim-out"
    )]
    out: PathBuf,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run one experiment and check its bounds.
    Run(Overrides),
    /// Run a search adversary against one algorithm.
    Search {
        /// void-forcer, retaining-breaker or omega-n2.
        kind: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a predefined suite or a suite file and print its table.
    Matrix {
        /// window-matrix, leaky-bucket-matrix or bounds-sweep.
        #[arg(required_unless_present = "suite_file", conflicts_with = "suite_file")]
        suite: Option<String>,
        /// TOML file with `[[experiment]]` tables.
        #[arg(long)]
        suite_file: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        horizon: u64,
        /// Randomized runs per random-adversary experiment.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, env = "MACSIM_WORKERS", default_value_t = default_workers())]
        workers: usize,
        /// Also write per-run traces.
        #[arg(long)]
        traces: bool,
    },
    /// Check a script against an adversary type, or re-check a trace file.
    Validate {
        /// Script of `round station count` lines.
        #[arg(required_unless_present = "trace", conflicts_with = "trace")]
        script: Option<PathBuf>,
        /// Adversary type as KIND:PARAM[:RATE].
        #[arg(long = "type", required_unless_present = "trace")]
        ty: Option<TypeSpec>,
        /// A `trace.jsonl` written by `run`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

/// Config fields; flags override the file.
#[derive(Args)]
struct Overrides {
    /// TOML experiment config.
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    collision_detection: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Named bound to check; repeatable.
    #[arg(long = "bound")]
    bounds: Vec<String>,
    /// NAME or NAME:key=value,...
    #[arg(long)]
    algorithm: Option<String>,
    /// Wrap the algorithm in the round-reservation layer.
    #[arg(long)]
    reserved: bool,
    /// NAME or NAME:key=value,...
    #[arg(long)]
    adversary: Option<String>,
    /// KIND:PARAM[:RATE], e.g. window:2 or leaky-bucket:1.
    #[arg(long = "type")]
    ty: Option<TypeSpec>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Overrides {
    fn resolve(&self, adversary: Option<String>) -> Result<ExperimentConfig> {
        let mut t = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                toml::from_str::<toml::Table>(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => toml::Table::new(),
        };
        let mut set = |k: &str, v: toml::Value| {
            t.insert(k.into(), v);
        };
        if let Some(v) = &self.name {
            set("name", v.clone().into());
        }
        if let Some(v) = self.n {
            set("n", (v as i64).into());
        }
        if let Some(v) = self.horizon {
            set("horizon", (v as i64).into());
        }
        if self.collision_detection {
            set("collision_detection", true.into());
        }
        if let Some(v) = self.seed {
            set("seed", (v as i64).into());
        }
        if !self.bounds.is_empty() {
            set(
                "bounds",
                self.bounds
                    .iter()
                    .cloned()
                    .map(toml::Value::from)
                    .collect::<Vec<_>>()
                    .into(),
            );
        }
        if let Some(v) = &self.algorithm {
            set("algorithm", parse_named(v)?.into());
        }
        if let Some(v) = adversary.as_ref().or(self.adversary.as_ref()) {
            set("adversary", parse_named(v)?.into());
        }
        if let Some(v) = &self.ty {
            set("type", toml::Value::try_from(v)?);
        }
        if self.reserved {
            if let Some(toml::Value::Table(a)) = t.get_mut("algorithm") {
                a.insert("reserved".into(), true.into());
            }
        }
        Ok(toml::Value::Table(t).try_into()?)
    }
}

fn run_one(config: &ExperimentConfig, out: &Path) -> Result<bool> {
    let result = run_experiment(config)?;
    let dir = out.join(&config.name);
    result.write_artifacts(&dir, true)?;
    print!("{}", result.report_text());
    println!("artifacts={}", dir.display());
    Ok(result.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.verb {
        Verb::Run(o) => o.resolve(None).and_then(|c| run_one(&c, &cli.out)),
        Verb::Search { kind, overrides } => overrides
            .resolve(Some(kind))
            .and_then(|c| run_one(&c, &cli.out)),
        Verb::Matrix {
            suite: name,
            suite_file,
            horizon,
            seeds,
            workers,
            traces,
        } => (|| {
            let (label, cells) = match (&name, &suite_file) {
                (Some(name), _) => (name.clone(), suite(name, horizon, seeds)?),
                (None, Some(path)) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let stem = path
                        .file_stem()
                        .map_or("suite".into(), |s| s.to_string_lossy().into_owned());
                    (stem, suite_from_toml(&text)?)
                }
                (None, None) => unreachable!("clap requires one"),
            };
            let dir = cli.out.join(&label);
            let outcomes = run_cells(&cells, workers, Some(&dir), traces)?;
            let table = render_table(&outcomes);
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("summary.txt"), &table)?;
            fs::write(
                dir.join("summary.json"),
                serde_json::to_string_pretty(&outcomes)? + "\n",
            )?;
            print!("{table}");
            Ok(outcomes.iter().all(|o| o.established))
        })(),
        Verb::Validate { script, ty, trace } => (|| {
            if let Some(path) = trace {
                let t = load_trace_jsonl(&path)?;
                let report = revalidate(&t)?;
                println!(
                    "OK {}: {} rounds feasible under {}, {} packets conserved",
                    path.display(),
                    report.horizon,
                    t.adversary_type,
                    report.injected
                );
                return Ok(true);
            }
            let path = script.expect("clap requires a script");
            let ty = ty.expect("clap requires a type").resolve()?;
            let text =
                fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let s = InjectionScript::parse(&text)?;
            match validate(&s, ty) {
                Ok(()) => {
                    println!("OK {} rounds feasible under {ty}", s.len());
                    Ok(true)
                }
                Err(v) => {
                    println!("INFEASIBLE under {ty}: {v}");
                    Ok(false)
                }
            }
        })(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! Running one configured experiment and writing its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use macsim_core::adversary::{
    clipped, pattern_pair, random_feasible, saturating, scripted, validate, SaturationTarget,
    Silent,
};
use macsim_core::channel::{run, InjectionSource};
use macsim_core::metrics::{analyze, check_bound};
use macsim_core::search::{
    omega_n2_adversary, retaining_breaker, void_forcer, Milestone, OmegaStatus, ScenarioBudget,
};
use macsim_core::{
    AdversaryType, BoundCheck, ChannelConfig, InjectionScript, QoSReport, RoundRecord,
    SimulationState, StationId, Trace,
};
use serde::{Deserialize, Serialize};

use crate::config::{AdversarySpec, ExperimentConfig};

/// What a search adversary found, beyond the trace itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub milestones: Vec<Milestone>,
    /// The search gave up and finished with a saturating continuation.
    pub fallback: bool,
    pub omega: Option<OmegaSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaSummary {
    pub status: OmegaStatus,
    pub stages: u64,
    pub target: u64,
}

impl SearchSummary {
    /// Milestone `i` has at least `i + 1` packets stored.
    pub fn accounted(&self) -> bool {
        self.milestones
            .iter()
            .enumerate()
            .all(|(i, m)| m.queued > i as u64)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trace: Trace,
    pub report: QoSReport,
    pub checks: Vec<BoundCheck>,
    pub search: Option<SearchSummary>,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The human-readable report: metrics, bound checks, search results.
    pub fn report_text(&self) -> String {
        let mut out = self.report.to_key_values();
        for c in &self.checks {
            let _ = writeln!(out, "{c}");
        }
        if let Some(s) = &self.search {
            let _ = writeln!(out, "milestones={}", s.milestones.len());
            let _ = writeln!(out, "milestones_accounted={}", s.accounted());
            let _ = writeln!(out, "fallback={}", s.fallback);
            if let Some(o) = &s.omega {
                let _ = writeln!(
                    out,
                    "omega_status={}\nomega_stages={}\nomega_target={}",
                    serde_json::to_value(o.status)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                    o.stages,
                    o.target
                );
            }
        }
        out
    }

    pub fn report_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            name: &'a str,
            report: &'a QoSReport,
            checks: &'a [BoundCheck],
            search: Option<&'a SearchSummary>,
            passed: bool,
        }
        let doc = Doc {
            name: &self.config.name,
            report: &self.report,
            checks: &self.checks,
            search: self.search.as_ref(),
            passed: self.passed(),
        };
        serde_json::to_string_pretty(&doc).expect("reports serialize") + "\n"
    }

    /// Writes `config.toml`, `report.txt`, `report.json` and, with
    /// `traces`, `trace.jsonl`, `trace.csv` and `script.txt` into `dir`.
    pub fn write_artifacts(&self, dir: &Path, traces: bool) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("config.toml"), self.config.to_toml())?;
        fs::write(dir.join("report.txt"), self.report_text())?;
        fs::write(dir.join("report.json"), self.report_json())?;
        if traces {
            write_trace_jsonl(&self.trace, &dir.join("trace.jsonl"))?;
            write_trace_csv(&self.trace, &dir.join("trace.csv"))?;
            let script = InjectionScript::from_rounds(self.trace.injections());
            fs::write(dir.join("script.txt"), script.to_text())?;
        }
        if let Some(s) = &self.search {
            let lines: String = s.milestones.iter().map(|m| format!("{m}\n")).collect();
            fs::write(dir.join("milestones.txt"), lines)?;
        }
        Ok(())
    }
}

/// One packet per round into the station after `victim`, and one into
/// `victim` at round `at`.
struct Starve {
    victim: StationId,
    other: StationId,
    at: u64,
    round: u64,
}

impl InjectionSource for Starve {
    fn next_injections(&mut self, _: &SimulationState) -> Vec<(StationId, u32)> {
        self.round += 1;
        let mut out = vec![(self.other, 1)];
        if self.round == self.at {
            out.push((self.victim, 1));
            out.sort();
        }
        out
    }
}

fn source(config: &ExperimentConfig, ty: AdversaryType) -> Result<Box<dyn InjectionSource>> {
    let n = config.n;
    Ok(match &config.adversary {
        AdversarySpec::Silent => Box::new(Silent),
        AdversarySpec::Saturating { station } => {
            Box::new(saturating(SaturationTarget::Station(StationId(*station))))
        }
        AdversarySpec::Cycling => Box::new(saturating(SaturationTarget::Cycling { n })),
        AdversarySpec::PatternPair { a, b } => {
            Box::new(clipped(pattern_pair(StationId(*a), StationId(*b))?, ty))
        }
        AdversarySpec::Random { greed, targets } => {
            let mut src = random_feasible(ty, n, config.seed);
            if !targets.is_empty() {
                src = src.with_targets(targets.iter().map(|&s| StationId(s)).collect());
            }
            if let Some(g) = greed {
                src = src.with_greed(*g);
            }
            Box::new(src)
        }
        AdversarySpec::Script { path } => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading script {}", path.display()))?;
            let script = InjectionScript::parse(&text)?;
            script.check_stations(n)?;
            Box::new(scripted(script))
        }
        AdversarySpec::Starve { victim, at } => {
            let victim = StationId(*victim);
            Box::new(Starve {
                victim,
                other: victim.next(n),
                at: *at,
                round: 0,
            })
        }
        AdversarySpec::VoidForcer { .. }
        | AdversarySpec::RetainingBreaker { .. }
        | AdversarySpec::OmegaN2 => unreachable!("searches are not injection sources"),
    })
}

fn budget(max_scenarios: Option<usize>, max_branch_depth: Option<u64>) -> ScenarioBudget {
    let d = ScenarioBudget::default();
    ScenarioBudget {
        max_scenarios: max_scenarios.unwrap_or(d.max_scenarios),
        max_branch_depth: max_branch_depth.unwrap_or(d.max_branch_depth),
    }
}

/// Validates `config`, runs it, and checks its bounds. Nothing is written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let (ty, bounds) = config.validate()?;
    let state = SimulationState::new(config.build_protocol()?, config.collision_detection)?;
    let horizon = config.horizon;
    let (trace, search) = match &config.adversary {
        AdversarySpec::VoidForcer {
            max_scenarios,
            max_branch_depth,
        } => {
            let out = void_forcer(
                state,
                ty,
                budget(*max_scenarios, *max_branch_depth),
                horizon,
            )?;
            let summary = SearchSummary {
                milestones: out.milestones,
                fallback: out.fallback,
                omega: None,
            };
            (out.trace, Some(summary))
        }
        AdversarySpec::RetainingBreaker {
            max_scenarios,
            max_branch_depth,
        } => {
            let out = retaining_breaker(state, budget(*max_scenarios, *max_branch_depth), horizon)?;
            let summary = SearchSummary {
                milestones: out.milestones,
                fallback: out.fallback,
                omega: None,
            };
            (out.trace, Some(summary))
        }
        AdversarySpec::OmegaN2 => {
            let out = omega_n2_adversary(state, horizon)?;
            let summary = SearchSummary {
                milestones: out.milestones,
                fallback: false,
                omega: Some(OmegaSummary {
                    status: out.status,
                    stages: out.stages,
                    target: out.target,
                }),
            };
            (out.trace, Some(summary))
        }
        _ => {
            let mut src = source(config, ty)?;
            (run(state, &mut src, ty, horizon)?, None)
        }
    };
    let report = analyze(&trace)?;
    let checks = bounds
        .into_iter()
        .map(|b| check_bound(&report, b))
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        trace,
        report,
        checks,
        search,
    })
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    config: ChannelConfig,
    adversary_type: AdversaryType,
    algorithm: String,
}

/// A header line followed by one JSON record per round.
pub fn write_trace_jsonl(trace: &Trace, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let header = TraceHeader {
        config: trace.config,
        adversary_type: trace.adversary_type,
        algorithm: trace.algorithm.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for rec in &trace.records {
        serde_json::to_writer(&mut w, rec)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_trace_jsonl(path: &Path) -> Result<Trace> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let header: TraceHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?).context("trace header")?,
        None => bail!("{} is empty", path.display()),
    };
    let mut records = Vec::new();
    for (k, line) in lines.enumerate() {
        let rec: RoundRecord =
            serde_json::from_str(&line?).with_context(|| format!("trace line {}", k + 2))?;
        records.push(rec);
    }
    Ok(Trace {
        config: header.config,
        adversary_type: header.adversary_type,
        algorithm: header.algorithm,
        records,
    })
}

/// `round,transmitters,feedback,total_stored`; transmitters are separated
/// by spaces.
pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "round,transmitters,feedback,total_stored")?;
    for rec in &trace.records {
        let tx: Vec<String> = rec.transmitters.iter().map(|s| s.0.to_string()).collect();
        writeln!(
            w,
            "{},{},{},{}",
            rec.round,
            tx.join(" "),
            rec.feedback.label(),
            rec.total_stored()
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Re-checks a stored trace: its injections must be feasible for its type
/// and packets must be conserved every round.
pub fn revalidate(trace: &Trace) -> Result<QoSReport> {
    let rounds: Vec<u64> = trace.records.iter().map(|r| r.round).collect();
    if rounds.iter().zip(1..).any(|(&r, k)| r != k) {
        bail!("rounds are not numbered 1, 2, ...");
    }
    let script = InjectionScript::from_rounds(trace.injections());
    validate(&script, trace.adversary_type).map_err(|v| anyhow!("infeasible injections: {v}"))?;
    Ok(analyze(trace)?)
}

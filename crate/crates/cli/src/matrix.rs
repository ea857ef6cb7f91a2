//! Predefined experiment grids over algorithm class and system size.
//!
//! A cell pairs one property claim with the experiments that exercise it.
//! Possibility claims are demonstrated when every run satisfies its bounds.
//! Impossibility claims are refuted at the horizon when every run exhibits
//! the failure: unbounded milestone growth for stability, a packet left
//! unheard by a stable run for fairness.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use macsim_core::metrics::Limit;
use macsim_core::BoundCheck;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AdversarySpec, AlgorithmKind, AlgorithmSpec, ExperimentConfig, TypeSpec};
use crate::experiment::{run_experiment, ExperimentResult};

pub const SUITES: &[&str] = &["window-matrix", "leaky-bucket-matrix", "bounds-sweep"];

/// Milestones per round a search must bank to count as unbounded growth.
pub const GROWTH_DIVISOR: u64 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Claim {
    Possible,
    Impossible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evidence {
    /// Every run passes its bound checks.
    Bounds,
    /// Every run is a search banking at least `horizon / 50` milestones,
    /// each accounted for by stored packets.
    Growth,
    /// Every run passes its bound checks and never hears the packet its
    /// starve adversary injected into the victim.
    Starved,
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub class: String,
    pub stations: String,
    pub property: String,
    pub claim: Claim,
    pub evidence: Evidence,
    pub experiments: Vec<ExperimentConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub class: String,
    pub stations: String,
    pub property: String,
    pub claim: Claim,
    pub established: bool,
    pub verdict: String,
    pub detail: String,
    pub runs: usize,
}

struct Grid {
    horizon: u64,
    seeds: u64,
    cells: Vec<Cell>,
}

fn config(
    name: String,
    n: usize,
    horizon: u64,
    algorithm: AlgorithmKind,
    adversary: AdversarySpec,
    ty: TypeSpec,
    bounds: &[&str],
) -> ExperimentConfig {
    ExperimentConfig {
        name,
        n,
        horizon,
        collision_detection: false,
        seed: 0,
        bounds: bounds.iter().map(|s| s.to_string()).collect(),
        algorithm: AlgorithmSpec {
            kind: algorithm,
            reserved: false,
        },
        adversary,
        adversary_type: ty,
    }
}

fn window(w: u64) -> TypeSpec {
    TypeSpec::Window {
        w,
        rate: "1".into(),
    }
}

fn bucket(b: u64) -> TypeSpec {
    TypeSpec::LeakyBucket {
        b,
        rate: "1".into(),
    }
}

fn random() -> AdversarySpec {
    AdversarySpec::Random {
        greed: None,
        targets: Vec::new(),
    }
}

fn void_forcer() -> AdversarySpec {
    AdversarySpec::VoidForcer {
        max_scenarios: None,
        max_branch_depth: None,
    }
}

impl Grid {
    fn cell(
        &mut self,
        class: &str,
        stations: &str,
        property: &str,
        claim: Claim,
        evidence: Evidence,
    ) {
        self.cells.push(Cell {
            class: class.into(),
            stations: stations.into(),
            property: property.into(),
            claim,
            evidence,
            experiments: Vec::new(),
        });
    }

    fn add(&mut self, c: ExperimentConfig) {
        self.cells
            .last_mut()
            .expect("a cell is open")
            .experiments
            .push(c);
    }

    /// One run per seed.
    fn add_seeds(&mut self, c: ExperimentConfig) {
        for seed in 0..self.seeds {
            let mut c = c.clone();
            c.name = format!("{}-seed{seed}", c.name);
            c.seed = seed;
            self.add(c);
        }
    }

    fn window_matrix(&mut self) {
        let h = self.horizon;
        self.cell(
            "ack-based",
            "n=2",
            "stable",
            Claim::Impossible,
            Evidence::Growth,
        );
        self.add(config(
            "ack-n2-all-ones".into(),
            2,
            h,
            AlgorithmKind::AllOnes,
            void_forcer(),
            window(2),
            &[],
        ));

        self.cell(
            "full-sensing",
            "n=2",
            "fair latency",
            Claim::Possible,
            Evidence::Bounds,
        );
        for w in 1..=2 {
            let fs = AlgorithmKind::TwoFullSensing { phase: None };
            self.add_seeds(config(
                format!("fs-n2-w{w}"),
                2,
                h,
                fs,
                random(),
                window(w),
                &["fs-latency"],
            ));
        }

        self.cell(
            "full-sensing",
            "n=3",
            "stable",
            Claim::Impossible,
            Evidence::Growth,
        );
        self.add(config(
            "fs-n3-round-robin".into(),
            3,
            h,
            AlgorithmKind::RoundRobin,
            void_forcer(),
            window(2),
            &[],
        ));

        self.cell(
            "general",
            "n=3",
            "fair latency",
            Claim::Possible,
            Evidence::Bounds,
        );
        for w in 1..=3 {
            let alg = AlgorithmKind::ThreeAdaptiveWindow { w: w as u32 };
            self.add_seeds(config(
                format!("general-n3-w{w}"),
                3,
                h,
                alg,
                random(),
                window(w),
                &["window-latency"],
            ));
        }

        self.cell(
            "general",
            "n>=4",
            "stable",
            Claim::Possible,
            Evidence::Bounds,
        );
        for n in [4, 5] {
            let name = format!("general-n{n}-mbtf");
            self.add_seeds(config(
                name.clone(),
                n,
                h,
                AlgorithmKind::MoveBigToFront,
                random(),
                window(2),
                &["mbtf-stored"],
            ));
            self.add(config(
                format!("{name}-void-forcer"),
                n,
                h,
                AlgorithmKind::MoveBigToFront,
                void_forcer(),
                window(2),
                &["mbtf-stored"],
            ));
        }

        self.cell(
            "general",
            "n>=4",
            "stable and fair",
            Claim::Impossible,
            Evidence::Growth,
        );
        let breaker = AdversarySpec::RetainingBreaker {
            max_scenarios: None,
            max_branch_depth: None,
        };
        self.add(config(
            "general-n4-round-robin".into(),
            4,
            h,
            AlgorithmKind::RoundRobin,
            breaker,
            window(2),
            &[],
        ));
    }

    fn leaky_bucket_matrix(&mut self) {
        let h = self.horizon;
        self.cell(
            "ack-based",
            "n=1",
            "fair latency",
            Claim::Possible,
            Evidence::Bounds,
        );
        self.add(config(
            "ack-n1-saturating".into(),
            1,
            h,
            AlgorithmKind::AckPrimes,
            AdversarySpec::Saturating { station: 1 },
            bucket(1),
            &["fair-wait"],
        ));
        self.add_seeds(config(
            "ack-n1-random".into(),
            1,
            h,
            AlgorithmKind::AckPrimes,
            random(),
            bucket(1),
            &["fair-wait"],
        ));

        self.cell(
            "full-sensing",
            "n>=2",
            "stable",
            Claim::Impossible,
            Evidence::Growth,
        );
        for n in [2, 3] {
            self.add(config(
                format!("fs-n{n}-round-robin"),
                n,
                h,
                AlgorithmKind::RoundRobin,
                void_forcer(),
                bucket(1),
                &[],
            ));
        }

        self.cell(
            "general",
            "n>=2",
            "stable",
            Claim::Possible,
            Evidence::Bounds,
        );
        for n in [2, 3, 4] {
            let name = format!("general-n{n}-mbtf");
            self.add(config(
                format!("{name}-saturating"),
                n,
                h,
                AlgorithmKind::MoveBigToFront,
                AdversarySpec::Saturating { station: 1 },
                bucket(1),
                &["mbtf-stored"],
            ));
            self.add_seeds(config(
                name,
                n,
                h,
                AlgorithmKind::MoveBigToFront,
                random(),
                bucket(1),
                &["mbtf-stored"],
            ));
        }
        self.add(config(
            "general-n2-two-adaptive-void-forcer".into(),
            2,
            h,
            AlgorithmKind::TwoAdaptive,
            void_forcer(),
            bucket(1),
            &["token-stored"],
        ));

        self.cell(
            "general",
            "n>=2",
            "stable and fair",
            Claim::Impossible,
            Evidence::Starved,
        );
        let starve = AdversarySpec::Starve { victim: 1, at: 4 };
        self.add(config(
            "general-n2-two-adaptive-starved".into(),
            2,
            h,
            AlgorithmKind::TwoAdaptive,
            starve,
            bucket(1),
            &["token-stored"],
        ));
    }

    fn bounds_sweep(&mut self) {
        let h = self.horizon;
        let mbtf = AlgorithmKind::MoveBigToFront;
        self.cell(
            "general",
            "n=2..5",
            "mbtf-stored",
            Claim::Possible,
            Evidence::Bounds,
        );
        for n in 2..=5 {
            for b in 0..=2 {
                let name = format!("mbtf-n{n}-b{b}");
                self.add(config(
                    format!("{name}-saturating"),
                    n,
                    h,
                    mbtf.clone(),
                    AdversarySpec::Saturating { station: 1 },
                    bucket(b),
                    &["mbtf-stored"],
                ));
                self.add(config(
                    format!("{name}-cycling"),
                    n,
                    h,
                    mbtf.clone(),
                    AdversarySpec::Cycling,
                    bucket(b),
                    &["mbtf-stored"],
                ));
                self.add_seeds(config(
                    name,
                    n,
                    h,
                    mbtf.clone(),
                    random(),
                    bucket(b),
                    &["mbtf-stored"],
                ));
            }
        }

        self.cell(
            "general",
            "n=2",
            "token-stored",
            Claim::Possible,
            Evidence::Bounds,
        );
        for b in 0..=3 {
            let name = format!("token-b{b}");
            self.add_seeds(config(
                name.clone(),
                2,
                h,
                AlgorithmKind::TwoAdaptive,
                random(),
                bucket(b),
                &["token-stored"],
            ));
            self.add(config(
                format!("{name}-void-forcer"),
                2,
                h,
                AlgorithmKind::TwoAdaptive,
                void_forcer(),
                bucket(b),
                &["token-stored"],
            ));
        }

        self.cell(
            "full-sensing",
            "n=2",
            "fs-latency",
            Claim::Possible,
            Evidence::Bounds,
        );
        for w in 1..=2 {
            self.add_seeds(config(
                format!("fs-w{w}"),
                2,
                h,
                AlgorithmKind::TwoFullSensing { phase: None },
                random(),
                window(w),
                &["fs-latency"],
            ));
        }

        self.cell(
            "general",
            "n=3",
            "window-latency",
            Claim::Possible,
            Evidence::Bounds,
        );
        for w in 1..=3 {
            let alg = AlgorithmKind::ThreeAdaptiveWindow { w: w as u32 };
            self.add_seeds(config(
                format!("window-w{w}"),
                3,
                h,
                alg,
                random(),
                window(w),
                &["window-latency"],
            ));
        }

        self.cell(
            "general",
            "n=3",
            "col-det-latency",
            Claim::Possible,
            Evidence::Bounds,
        );
        for w in 1..=2 {
            let mut c = config(
                format!("col-det-w{w}"),
                3,
                h,
                AlgorithmKind::ThreeAdaptiveColDet,
                random(),
                window(w),
                &["col-det-latency"],
            );
            c.collision_detection = true;
            self.add_seeds(c);
        }

        self.cell(
            "general",
            "n=3",
            "silence-latency",
            Claim::Possible,
            Evidence::Bounds,
        );
        for w in 1..=3 {
            self.add_seeds(config(
                format!("silence-w{w}"),
                3,
                h,
                AlgorithmKind::ThreeAdaptive,
                random(),
                window(w),
                &["silence-latency"],
            ));
        }

        self.cell(
            "centralized",
            "n=3",
            "centralized-delay",
            Claim::Possible,
            Evidence::Bounds,
        );
        for b in 0..=3 {
            self.add_seeds(config(
                format!("centralized-b{b}"),
                3,
                h,
                AlgorithmKind::Centralized,
                random(),
                bucket(b),
                &["centralized-delay"],
            ));
        }

        self.cell(
            "ack-based",
            "n=21",
            "fair-wait",
            Claim::Possible,
            Evidence::Bounds,
        );
        self.add(config(
            "fair-n21-saturating".into(),
            21,
            h,
            AlgorithmKind::AckPrimes,
            AdversarySpec::Saturating { station: 1 },
            bucket(1),
            &["fair-wait"],
        ));
        self.add(config(
            "fair-n21-cycling".into(),
            21,
            h,
            AlgorithmKind::AckPrimes,
            AdversarySpec::Cycling,
            bucket(1),
            &["fair-wait"],
        ));

        self.cell(
            "general",
            "n=6,8",
            "stored-at-least",
            Claim::Possible,
            Evidence::Bounds,
        );
        for n in [6, 8] {
            self.add(config(
                format!("omega-n{n}-mbtf"),
                n,
                h,
                mbtf.clone(),
                AdversarySpec::OmegaN2,
                bucket(1),
                &["stored-at-least"],
            ));
        }
    }
}

/// Builds a named suite. `seeds` randomized runs are added wherever a cell
/// uses a random adversary.
pub fn suite(name: &str, horizon: u64, seeds: u64) -> Result<Vec<Cell>> {
    let mut g = Grid {
        horizon,
        seeds,
        cells: Vec::new(),
    };
    match name {
        "window-matrix" => g.window_matrix(),
        "leaky-bucket-matrix" => g.leaky_bucket_matrix(),
        "bounds-sweep" => g.bounds_sweep(),
        other => bail!("unknown suite {other:?}; known: {}", SUITES.join(", ")),
    }
    Ok(g.cells)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    #[serde(default)]
    experiment: Vec<ExperimentConfig>,
}

/// A custom suite: one bounds cell per `[[experiment]]` table.
pub fn suite_from_toml(text: &str) -> Result<Vec<Cell>> {
    let file: SuiteFile = toml::from_str(text)?;
    Ok(file
        .experiment
        .into_iter()
        .map(|c| Cell {
            class: c.algorithm.kind.label(),
            stations: format!("n={}", c.n),
            property: c.name.clone(),
            claim: Claim::Possible,
            evidence: Evidence::Bounds,
            experiments: vec![c],
        })
        .collect())
}

fn judge(cell: &Cell, results: &[Result<ExperimentResult>]) -> (bool, String) {
    let mut notes = Vec::new();
    let mut ok = true;
    for (c, r) in cell.experiments.iter().zip(results) {
        let r = match r {
            Ok(r) => r,
            Err(e) => {
                ok = false;
                notes.push(format!("{}: error: {e:#}", c.name));
                continue;
            }
        };
        let failed: Vec<String> = r
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.to_string())
            .collect();
        let run_ok = match cell.evidence {
            Evidence::Bounds => failed.is_empty(),
            Evidence::Growth => r.search.as_ref().is_some_and(|s| {
                s.accounted() && s.milestones.len() as u64 >= c.horizon / GROWTH_DIVISOR
            }),
            Evidence::Starved => failed.is_empty() && starved(c, r),
        };
        if !run_ok {
            ok = false;
            let why = match cell.evidence {
                Evidence::Bounds | Evidence::Starved if !failed.is_empty() => failed.join("; "),
                Evidence::Starved => "the starved packet was heard".into(),
                _ => format!(
                    "{} milestones, need {}",
                    r.search.as_ref().map_or(0, |s| s.milestones.len()),
                    c.horizon / GROWTH_DIVISOR
                ),
            };
            notes.push(format!("{}: {why}", c.name));
        }
    }
    if ok {
        notes.push(summarize(cell, results));
    }
    (ok, notes.join("; "))
}

/// One line of evidence for an established cell.
fn summarize(cell: &Cell, results: &[Result<ExperimentResult>]) -> String {
    let ok: Vec<&ExperimentResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    match cell.evidence {
        Evidence::Bounds | Evidence::Starved => {
            let tightest = ok
                .iter()
                .flat_map(|r| r.checks.iter())
                .max_by(|a, b| usage(a).total_cmp(&usage(b)));
            let mut s = match tightest {
                Some(c) => format!("worst {}={} allowed {}", c.metric, c.observed, c.allowed),
                None => "no bounds checked".into(),
            };
            if cell.evidence == Evidence::Starved {
                let _ = write!(
                    s,
                    ", starved packet unheard after {} rounds",
                    ok.iter().map(|r| r.report.horizon).min().unwrap_or(0)
                );
            }
            s
        }
        Evidence::Growth => {
            let least = ok
                .iter()
                .filter_map(|r| r.search.as_ref().map(|s| s.milestones.len()))
                .min()
                .unwrap_or(0);
            format!("fewest milestones {least}")
        }
    }
}

/// How much of its allowance a check uses; above 1 fails.
fn usage(c: &BoundCheck) -> f64 {
    match c.allowed {
        Limit::AtMost(v) | Limit::Below(v) => c.observed / v.max(f64::MIN_POSITIVE),
        Limit::AtLeast(v) => v / c.observed.max(f64::MIN_POSITIVE),
    }
}

/// The packet a starve adversary injects into its victim is still stored
/// at the end of the run.
fn starved(c: &ExperimentConfig, r: &ExperimentResult) -> bool {
    let AdversarySpec::Starve { victim, at } = c.adversary else {
        return false;
    };
    let Some(rec) = r.trace.records.get(at as usize - 1) else {
        return false;
    };
    let mut id = rec.first_packet_id;
    for &(s, count) in &rec.injections {
        if s.0 == victim {
            return r.report.unheard_ids.contains(&id);
        }
        id += u64::from(count);
    }
    false
}

fn verdict(claim: Claim, established: bool, horizon: u64) -> String {
    match (claim, established) {
        (Claim::Possible, true) => "demonstrated".into(),
        (Claim::Possible, false) => "not demonstrated".into(),
        (Claim::Impossible, true) => format!("refuted at horizon {horizon}"),
        (Claim::Impossible, false) => format!("not refuted at horizon {horizon}"),
    }
}

/// Runs every cell, up to `workers` at a time. Results keep cell order.
/// With `out`, each run's report files land in `out/<run name>/`.
pub fn run_cells(
    cells: &[Cell],
    workers: usize,
    out: Option<&Path>,
    traces: bool,
) -> Result<Vec<CellOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let results: Vec<Vec<Result<ExperimentResult>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| cell.experiments.iter().map(run_experiment).collect())
            .collect()
    });
    let mut outcomes = Vec::with_capacity(cells.len());
    for (cell, res) in cells.iter().zip(&results) {
        if let Some(dir) = out {
            for r in res.iter().flatten() {
                r.write_artifacts(&dir.join(&r.config.name), traces)?;
            }
        }
        let (established, detail) = judge(cell, res);
        let horizon = cell
            .experiments
            .iter()
            .map(|c| c.horizon)
            .max()
            .unwrap_or(0);
        outcomes.push(CellOutcome {
            class: cell.class.clone(),
            stations: cell.stations.clone(),
            property: cell.property.clone(),
            claim: cell.claim,
            established,
            verdict: verdict(cell.claim, established, horizon),
            detail,
            runs: cell.experiments.len(),
        });
    }
    Ok(outcomes)
}

/// One line per class and station count, claims joined by commas, then
/// one detail line per claim.
pub fn render_table(outcomes: &[CellOutcome]) -> String {
    let mut rows: Vec<(String, String, Vec<String>)> = Vec::new();
    for o in outcomes {
        let entry = format!("{}: {}", o.property, o.verdict);
        match rows
            .iter_mut()
            .find(|(c, s, _)| *c == o.class && *s == o.stations)
        {
            Some(row) => row.2.push(entry),
            None => rows.push((o.class.clone(), o.stations.clone(), vec![entry])),
        }
    }
    let cw = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(5);
    let sw = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    if rows.is_empty() {
        return out;
    }
    let _ = writeln!(out, "{:cw$}  {:sw$}  entries", "class", "stations");
    for (class, stations, entries) in &rows {
        let _ = writeln!(out, "{class:cw$}  {stations:sw$}  {}", entries.join(", "));
    }
    let _ = writeln!(out);
    for o in outcomes {
        let _ = writeln!(
            out,
            "{} {} {} [{} runs]: {}",
            o.class, o.stations, o.property, o.runs, o.detail
        );
    }
    out
}

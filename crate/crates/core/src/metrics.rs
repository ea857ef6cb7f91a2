//! Quality-of-service figures extracted from traces, and named bounds.
//!
//! Stored counts include pending packets. Latency is `heard - injected`;
//! the centralized delay bound uses the exclusive convention that does not
//! count the injection and transmission rounds, i.e. `latency - 1`.
//! Packets still stored at the end of a trace contribute a lower bound on
//! their latency, `horizon - injected + 1`, so that a stuck packet fails a
//! latency bound even if it was never heard.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AdversaryType;
use crate::channel::{Round, StationId, Trace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoSReport {
    pub algorithm: String,
    pub adversary: String,
    pub n: usize,
    pub horizon: u64,
    pub injected: u64,
    pub heard: u64,
    pub max_stored: u64,
    /// Over heard packets.
    pub max_latency: u64,
    /// Lower bound over all packets, unheard ones included.
    pub latency_bound: u64,
    /// Longest time from becoming pending to being heard.
    pub max_pending_wait: u64,
    /// Lower bound over all pending episodes, open ones included.
    pub pending_wait_bound: u64,
    pub unheard: u64,
    pub unheard_ids: Vec<u64>,
    pub void_rounds: u64,
    /// Rounds with two or more transmitters.
    pub collision_rounds: u64,
    pub throughput: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error(
        "conservation fails at round {round}: {injected} injected, {heard} heard, {stored} stored"
    )]
    Conservation {
        round: Round,
        injected: u64,
        heard: u64,
        stored: u64,
    },
    #[error("round {round}: heard packet {id} was never injected")]
    UnknownPacket { round: Round, id: u64 },
}

struct Injected {
    round: Round,
    station: StationId,
    heard: Option<Round>,
}

/// Computes the report. The trace must start from empty queues.
pub fn analyze(trace: &Trace) -> Result<QoSReport, MetricsError> {
    let base = trace.records.first().map_or(0, |r| r.first_packet_id);
    let mut packets: Vec<Injected> = Vec::new();
    let mut injected = 0u64;
    let mut heard = 0u64;
    let mut max_stored = 0u64;
    let mut void_rounds = 0u64;
    let mut collision_rounds = 0u64;

    for rec in &trace.records {
        for &(station, count) in &rec.injections {
            for _ in 0..count {
                packets.push(Injected {
                    round: rec.round,
                    station,
                    heard: None,
                });
            }
        }
        injected += rec.injected_total();
        if let Some(id) = rec.heard_packet {
            let slot =
                id.0.checked_sub(base)
                    .and_then(|k| packets.get_mut(k as usize))
                    .ok_or(MetricsError::UnknownPacket {
                        round: rec.round,
                        id: id.0,
                    })?;
            slot.heard = Some(rec.round);
            heard += 1;
        } else {
            void_rounds += 1;
        }
        if rec.transmitters.len() >= 2 {
            collision_rounds += 1;
        }
        let stored = rec.total_stored();
        if injected != heard + stored {
            return Err(MetricsError::Conservation {
                round: rec.round,
                injected,
                heard,
                stored,
            });
        }
        max_stored = max_stored.max(stored);
    }

    let horizon_round = trace.records.last().map_or(0, |r| r.round);
    let mut max_latency = 0;
    let mut latency_bound = 0;
    let mut unheard_ids = Vec::new();
    for (k, p) in packets.iter().enumerate() {
        match p.heard {
            Some(h) => {
                max_latency = max_latency.max(h - p.round);
                latency_bound = latency_bound.max(h - p.round);
            }
            None => {
                unheard_ids.push(base + k as u64);
                latency_bound = latency_bound.max(horizon_round - p.round + 1);
            }
        }
    }

    // Stations serve their packets first in, first out, so a packet becomes
    // pending when it is injected or when its predecessor is heard,
    // whichever is later, and it is first eligible in the following round.
    let mut max_pending_wait = 0;
    let mut pending_wait_bound = 0;
    let mut last_heard: HashMap<StationId, Round> = HashMap::new();
    let mut blocked: HashMap<StationId, bool> = HashMap::new();
    for p in &packets {
        if blocked.get(&p.station).copied().unwrap_or(false) {
            continue;
        }
        let since = p
            .round
            .max(last_heard.get(&p.station).copied().unwrap_or(0));
        match p.heard {
            Some(h) => {
                max_pending_wait = max_pending_wait.max(h - since);
                pending_wait_bound = pending_wait_bound.max(h - since);
                last_heard.insert(p.station, h);
            }
            None => {
                pending_wait_bound = pending_wait_bound.max(horizon_round - since + 1);
                blocked.insert(p.station, true);
            }
        }
    }

    let horizon = trace.horizon();
    Ok(QoSReport {
        algorithm: trace.algorithm.clone(),
        adversary: trace.adversary_type.to_string(),
        n: trace.config.n,
        horizon,
        injected,
        heard,
        max_stored,
        max_latency,
        latency_bound,
        max_pending_wait,
        pending_wait_bound,
        unheard: unheard_ids.len() as u64,
        unheard_ids,
        void_rounds,
        collision_rounds,
        throughput: if horizon == 0 {
            0.0
        } else {
            heard as f64 / horizon as f64
        },
    })
}

impl QoSReport {
    /// Flat `key=value` lines in a fixed order.
    pub fn to_key_values(&self) -> String {
        let ids: Vec<String> = self.unheard_ids.iter().map(u64::to_string).collect();
        format!(
            "algorithm={}\nadversary={}\nn={}\nhorizon={}\ninjected={}\nheard={}\n\
             max_stored={}\nmax_latency={}\nlatency_bound={}\nmax_pending_wait={}\n\
             pending_wait_bound={}\nunheard={}\nunheard_ids={}\nvoid_rounds={}\n\
             collision_rounds={}\nthroughput={:.6}\n",
            self.algorithm,
            self.adversary,
            self.n,
            self.horizon,
            self.injected,
            self.heard,
            self.max_stored,
            self.max_latency,
            self.latency_bound,
            self.max_pending_wait,
            self.pending_wait_bound,
            self.unheard,
            ids.join(","),
            self.void_rounds,
            self.collision_rounds,
            self.throughput,
        )
    }
}

/// A quantitative claim about one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Bound {
    /// Two-station full sensing: latency at most `4w`.
    FsLatency { w: u64 },
    /// Three-station fixed window: latency at most `2w + 1`.
    WindowLatency { w: u64 },
    /// Three-station with collision detection: latency below `5w`.
    ColDetLatency { w: u64 },
    /// Three-station without collision detection: latency below `6w`.
    SilenceLatency { w: u64 },
    /// Big-to-front: stored at most `2(n^2 + b)`.
    MbtfStored { n: u64, b: u64 },
    /// Two-station token: stored at most `b + 2`.
    TokenStored { b: u64 },
    /// Centralized: exclusive delay at most `b + 1`.
    CentralizedDelay { b: u64 },
    /// Prime schedule: pending wait below `6 m^2 ln m`, `m = max(n, 21)`.
    FairWait { n: u64 },
    /// Lower-bound adversary: stored reaches `(floor(n/2) - 1)^2`.
    StoredAtLeast { n: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Limit {
    AtMost(f64),
    Below(f64),
    AtLeast(f64),
}

impl Limit {
    pub fn admits(self, x: f64) -> bool {
        match self {
            Limit::AtMost(v) => x <= v,
            Limit::Below(v) => x < v,
            Limit::AtLeast(v) => x >= v,
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::AtMost(v) => write!(f, "<= {v}"),
            Limit::Below(v) => write!(f, "< {v}"),
            Limit::AtLeast(v) => write!(f, ">= {v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: String,
    pub metric: String,
    pub observed: f64,
    pub allowed: Limit,
    pub pass: bool,
}

impl fmt::Display for BoundCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}={} allowed {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.bound,
            self.metric,
            self.observed,
            self.allowed
        )
    }
}

pub const BOUND_NAMES: &[&str] = &[
    "fs-latency",
    "window-latency",
    "col-det-latency",
    "silence-latency",
    "mbtf-stored",
    "token-stored",
    "centralized-delay",
    "fair-wait",
    "stored-at-least",
];

impl Bound {
    pub fn name(self) -> &'static str {
        match self {
            Bound::FsLatency { .. } => "fs-latency",
            Bound::WindowLatency { .. } => "window-latency",
            Bound::ColDetLatency { .. } => "col-det-latency",
            Bound::SilenceLatency { .. } => "silence-latency",
            Bound::MbtfStored { .. } => "mbtf-stored",
            Bound::TokenStored { .. } => "token-stored",
            Bound::CentralizedDelay { .. } => "centralized-delay",
            Bound::FairWait { .. } => "fair-wait",
            Bound::StoredAtLeast { .. } => "stored-at-least",
        }
    }

    /// Instantiates a named bound with the parameters of a run.
    pub fn from_name(name: &str, n: usize, ty: AdversaryType) -> Option<Bound> {
        let n = n as u64;
        let (w, b) = match ty {
            AdversaryType::Window { w, .. } => (w, w),
            AdversaryType::LeakyBucket { b, .. } => (b, b),
        };
        Some(match name {
            "fs-latency" => Bound::FsLatency { w },
            "window-latency" => Bound::WindowLatency { w },
            "col-det-latency" => Bound::ColDetLatency { w },
            "silence-latency" => Bound::SilenceLatency { w },
            "mbtf-stored" => Bound::MbtfStored { n, b },
            "token-stored" => Bound::TokenStored { b },
            "centralized-delay" => Bound::CentralizedDelay { b },
            "fair-wait" => Bound::FairWait { n },
            "stored-at-least" => Bound::StoredAtLeast { n },
            _ => return None,
        })
    }

    pub fn limit(self) -> Limit {
        match self {
            Bound::FsLatency { w } => Limit::AtMost((4 * w) as f64),
            Bound::WindowLatency { w } => Limit::AtMost((2 * w + 1) as f64),
            Bound::ColDetLatency { w } => Limit::Below((5 * w) as f64),
            Bound::SilenceLatency { w } => Limit::Below((6 * w) as f64),
            Bound::MbtfStored { n, b } => Limit::AtMost((2 * (n * n + b)) as f64),
            Bound::TokenStored { b } => Limit::AtMost((b + 2) as f64),
            Bound::CentralizedDelay { b } => Limit::AtMost((b + 1) as f64),
            Bound::FairWait { n } => {
                let m = n.max(21) as f64;
                Limit::Below(6.0 * m * m * m.ln())
            }
            Bound::StoredAtLeast { n } => {
                let h = (n / 2).saturating_sub(1);
                Limit::AtLeast((h * h) as f64)
            }
        }
    }

    fn observe(self, r: &QoSReport) -> (&'static str, f64) {
        match self {
            Bound::FsLatency { .. }
            | Bound::WindowLatency { .. }
            | Bound::ColDetLatency { .. }
            | Bound::SilenceLatency { .. } => ("latency", r.latency_bound as f64),
            Bound::CentralizedDelay { .. } => {
                ("exclusive_delay", r.latency_bound.saturating_sub(1) as f64)
            }
            Bound::FairWait { .. } => ("pending_wait", r.pending_wait_bound as f64),
            Bound::MbtfStored { .. } | Bound::TokenStored { .. } | Bound::StoredAtLeast { .. } => {
                ("max_stored", r.max_stored as f64)
            }
        }
    }
}

pub fn check_bound(report: &QoSReport, bound: Bound) -> BoundCheck {
    let (metric, observed) = bound.observe(report);
    let allowed = bound.limit();
    BoundCheck {
        bound: bound.name().to_string(),
        metric: metric.to_string(),
        observed,
        allowed,
        pass: allowed.admits(observed),
    }
}

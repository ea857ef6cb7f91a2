//! Experiment configuration.
//!
//! A config is a TOML document with four top-level keys and three tables:
//!
//! ```toml
//! name = "mbtf-n3"          # optional, names the output directory
//! n = 3
//! horizon = 10000
//! collision_detection = false   # optional, default false
//! seed = 0                      # optional, only used by `random`
//! bounds = ["mbtf-stored"]      # optional
//!
//! [algorithm]
//! name = "move-big-to-front"
//!
//! [adversary]
//! name = "saturating"
//! station = 1
//!
//! [type]
//! kind = "leaky-bucket"     # or "window"
//! b = 1                     # `w` for windows
//! rate = "1"                # optional, a fraction in (0, 1]
//! ```
//!
//! The algorithm and adversary tables are selected by `name`; the remaining
//! keys of each table are the parameters listed on [`AlgorithmKind`] and
//! [`AdversarySpec`]. Unknown keys are rejected.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use macsim_core::adversary::burstiness;
use macsim_core::algorithms::{
    ack_primes, all_ones, centralized, move_big_to_front, reservation_wrap, round_robin,
    three_adaptive, three_adaptive_col_det, three_adaptive_window, token_ring, two_adaptive,
    two_full_sensing, two_full_sensing_i,
};
use macsim_core::metrics::BOUND_NAMES;
use macsim_core::{AdversaryType, Bound, Protocol, Rate};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub n: usize,
    pub horizon: u64,
    #[serde(default)]
    pub collision_detection: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bounds: Vec<String>,
    pub algorithm: AlgorithmSpec,
    pub adversary: AdversarySpec,
    #[serde(rename = "type")]
    pub adversary_type: TypeSpec,
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    #[serde(flatten)]
    pub kind: AlgorithmKind,
    /// Wrap in the round-reservation layer. Only for queue-size oblivious
    /// algorithms.
    #[serde(default, skip_serializing_if = "is_false")]
    pub reserved: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum AlgorithmKind {
    RoundRobin,
    AllOnes,
    TokenRing,
    /// Two stations.
    TwoAdaptive,
    #[serde(alias = "mbtf")]
    MoveBigToFront,
    /// Two stations. Without `phase` the phase length starts at 1 and
    /// escalates; with it the phase length is fixed.
    TwoFullSensing {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<u32>,
    },
    /// Three stations.
    ThreeAdaptive,
    /// Three stations, collision detection.
    ThreeAdaptiveColDet,
    /// Three stations, fixed phase length `w`.
    ThreeAdaptiveWindow {
        w: u32,
    },
    AckPrimes,
    Centralized,
}

impl AlgorithmKind {
    /// Exact number of stations the algorithm is defined for, if fixed.
    pub fn arity(&self) -> Option<usize> {
        match self {
            AlgorithmKind::TwoAdaptive | AlgorithmKind::TwoFullSensing { .. } => Some(2),
            AlgorithmKind::ThreeAdaptive
            | AlgorithmKind::ThreeAdaptiveColDet
            | AlgorithmKind::ThreeAdaptiveWindow { .. } => Some(3),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum AdversarySpec {
    Silent,
    /// One packet per round into `station`.
    Saturating {
        #[serde(default = "station_one")]
        station: u32,
    },
    /// One packet per round into stations `1..=n` in turn.
    Cycling,
    /// One packet into each of `a` and `b` every other round, clipped to the
    /// adversary type.
    PatternPair {
        a: u32,
        b: u32,
    },
    /// Random feasible injections seeded by the config seed.
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        greed: Option<f64>,
        /// All stations when empty.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        targets: Vec<u32>,
    },
    /// Replays a script file of `round station count` lines.
    Script {
        path: PathBuf,
    },
    /// One packet per round into the station after `victim`, plus one
    /// packet into `victim` at round `at`.
    Starve {
        victim: u32,
        at: u64,
    },
    VoidForcer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_scenarios: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_branch_depth: Option<u64>,
    },
    /// Needs `window(1,2)` and at least four stations.
    RetainingBreaker {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_scenarios: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_branch_depth: Option<u64>,
    },
    /// Needs `leaky-bucket(1,1)`.
    OmegaN2,
}

fn station_one() -> u32 {
    1
}

impl AdversarySpec {
    pub fn is_search(&self) -> bool {
        matches!(
            self,
            AdversarySpec::VoidForcer { .. }
                | AdversarySpec::RetainingBreaker { .. }
                | AdversarySpec::OmegaN2
        )
    }

    fn stations(&self) -> Vec<u32> {
        match self {
            AdversarySpec::Saturating { station } => vec![*station],
            AdversarySpec::PatternPair { a, b } => vec![*a, *b],
            AdversarySpec::Random { targets, .. } => targets.clone(),
            AdversarySpec::Starve { victim, .. } => vec![*victim],
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TypeSpec {
    Window {
        w: u64,
        #[serde(default = "rate_one")]
        rate: String,
    },
    LeakyBucket {
        b: u64,
        #[serde(default = "rate_one")]
        rate: String,
    },
}

fn rate_one() -> String {
    "1".into()
}

impl TypeSpec {
    pub fn resolve(&self) -> Result<AdversaryType> {
        let (rate, ty) = match self {
            TypeSpec::Window { w, rate } => {
                if *w == 0 {
                    bail!("window size must be positive");
                }
                (
                    rate,
                    rate.parse::<Rate>()
                        .map(|rate| AdversaryType::Window { rate, w: *w }),
                )
            }
            TypeSpec::LeakyBucket { b, rate } => (
                rate,
                rate.parse::<Rate>()
                    .map(|rate| AdversaryType::LeakyBucket { rate, b: *b }),
            ),
        };
        ty.with_context(|| format!("bad rate {rate:?}"))
    }
}

/// `window:W`, `leaky-bucket:B`, optionally followed by `:RATE`.
impl FromStr for TypeSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default();
        let param: u64 = parts
            .next()
            .ok_or_else(|| anyhow!("expected KIND:PARAM[:RATE], got {s:?}"))?
            .parse()
            .with_context(|| format!("bad parameter in {s:?}"))?;
        let rate = parts.next().map_or_else(rate_one, str::to_string);
        if parts.next().is_some() {
            bail!("expected KIND:PARAM[:RATE], got {s:?}");
        }
        match kind {
            "window" => Ok(TypeSpec::Window { w: param, rate }),
            "leaky-bucket" => Ok(TypeSpec::LeakyBucket { b: param, rate }),
            other => bail!("unknown adversary type {other:?}"),
        }
    }
}

impl fmt::Display for TypeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeSpec::Window { w, rate } => write!(f, "window:{w}:{rate}"),
            TypeSpec::LeakyBucket { b, rate } => write!(f, "leaky-bucket:{b}:{rate}"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// Checks everything that can be checked without running, and returns
    /// the resolved adversary type and named bounds.
    pub fn validate(&self) -> Result<(AdversaryType, Vec<Bound>)> {
        let ty = self.adversary_type.resolve()?;
        if self.n == 0 {
            bail!("n must be at least 1");
        }
        if let Some(k) = self.algorithm.kind.arity() {
            if k != self.n {
                bail!(
                    "arity mismatch: {} is defined for n = {k}, config has n = {}",
                    self.algorithm.kind.label(),
                    self.n
                );
            }
        }
        let protocol = self.build_protocol()?;
        if protocol.class().requires_collision_detection && !self.collision_detection {
            bail!(
                "{} requires collision detection; set collision_detection = true",
                protocol.name()
            );
        }
        for s in self.adversary.stations() {
            if s == 0 || s as usize > self.n {
                bail!("adversary names station {s} but n = {}", self.n);
            }
        }
        let unit_rate = ty.rate() == Rate::ONE;
        match &self.adversary {
            AdversarySpec::Saturating { .. } | AdversarySpec::Cycling if !unit_rate => {
                bail!("saturating adversaries need rate 1")
            }
            AdversarySpec::PatternPair { a, b } if a == b => {
                bail!("pattern pair needs two distinct stations")
            }
            AdversarySpec::Starve { .. } if !unit_rate || burstiness(ty) < 2 => {
                bail!("starve needs rate 1 and burstiness at least 2")
            }
            AdversarySpec::Starve { at: 0, .. } => bail!("starve round must be positive"),
            AdversarySpec::Starve { .. } if self.n < 2 => bail!("starve needs two stations"),
            AdversarySpec::VoidForcer { .. } if !unit_rate || burstiness(ty) < 1 => {
                bail!("void-forcer needs rate 1 and burstiness at least 1")
            }
            AdversarySpec::RetainingBreaker { .. } => {
                if ty != AdversaryType::window(2) {
                    bail!("retaining-breaker runs under window:2:1, config has {ty}");
                }
                if self.n < 4 {
                    bail!("retaining-breaker needs at least four stations");
                }
            }
            AdversarySpec::OmegaN2 => {
                if ty != AdversaryType::leaky_bucket(1) {
                    bail!("omega-n2 runs under leaky-bucket:1:1, config has {ty}");
                }
                if self.n < 2 {
                    bail!("omega-n2 needs at least two stations");
                }
            }
            AdversarySpec::Random { greed: Some(g), .. } if !(0.0..=1.0).contains(g) => {
                bail!("greed must lie in [0, 1]")
            }
            _ => {}
        }
        let bounds = self
            .bounds
            .iter()
            .map(|name| {
                Bound::from_name(name, self.n, ty).ok_or_else(|| {
                    anyhow!("unknown bound {name:?}; known: {}", BOUND_NAMES.join(", "))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((ty, bounds))
    }

    pub fn build_protocol(&self) -> Result<Box<dyn Protocol>> {
        let n = self.n;
        let spec = &self.algorithm;
        if spec.reserved {
            return match spec.kind {
                AlgorithmKind::TokenRing => Ok(Box::new(reservation_wrap(token_ring(n))?)),
                AlgorithmKind::TwoAdaptive => Ok(Box::new(reservation_wrap(two_adaptive())?)),
                _ => bail!(
                    "{} is not queue-size oblivious and cannot be reserved",
                    spec.kind.label()
                ),
            };
        }
        Ok(match spec.kind {
            AlgorithmKind::RoundRobin => Box::new(round_robin(n)),
            AlgorithmKind::AllOnes => Box::new(all_ones(n)),
            AlgorithmKind::TokenRing => Box::new(token_ring(n)),
            AlgorithmKind::TwoAdaptive => Box::new(two_adaptive()),
            AlgorithmKind::MoveBigToFront => Box::new(move_big_to_front(n)),
            AlgorithmKind::TwoFullSensing { phase: None } => Box::new(two_full_sensing()),
            AlgorithmKind::TwoFullSensing { phase: Some(0) } => bail!("phase must be positive"),
            AlgorithmKind::TwoFullSensing { phase: Some(i) } => Box::new(two_full_sensing_i(i)),
            AlgorithmKind::ThreeAdaptive => Box::new(three_adaptive()),
            AlgorithmKind::ThreeAdaptiveColDet => Box::new(three_adaptive_col_det()),
            AlgorithmKind::ThreeAdaptiveWindow { w: 0 } => bail!("w must be positive"),
            AlgorithmKind::ThreeAdaptiveWindow { w } => Box::new(three_adaptive_window(w)),
            AlgorithmKind::AckPrimes => Box::new(ack_primes(n)?),
            AlgorithmKind::Centralized => Box::new(centralized(n)),
        })
    }
}

impl AlgorithmKind {
    pub fn label(&self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.get("name").and_then(|s| s.as_str()).map(str::to_string))
            .unwrap_or_default()
    }
}

/// Parses `NAME` or `NAME:key=value,key=value` into a TOML table with a
/// `name` key. Values are read as TOML literals where possible and as
/// strings otherwise.
pub fn parse_named(spec: &str) -> Result<toml::Table> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    if name.is_empty() {
        bail!("missing name in {spec:?}");
    }
    let mut table = toml::Table::new();
    table.insert("name".into(), toml::Value::String(name.into()));
    for pair in top_level_pairs(rest) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got {pair:?}"))?;
        let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(v.into()));
        table.insert(k.trim().into(), value);
    }
    Ok(table)
}

/// Splits on commas outside brackets.
fn top_level_pairs(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out.retain(|p| !p.is_empty());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MBTF: &str = r#"
        n = 3
        horizon = 100
        bounds = ["mbtf-stored"]
        [algorithm]
        name = "mbtf"
        [adversary]
        name = "saturating"
        [type]
        kind = "leaky-bucket"
        b = 1
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml(MBTF).unwrap();
        assert_eq!(c.name, "experiment");
        assert_eq!(c.algorithm.kind, AlgorithmKind::MoveBigToFront);
        assert_eq!(c.adversary, AdversarySpec::Saturating { station: 1 });
        let (ty, bounds) = c.validate().unwrap();
        assert_eq!(ty, AdversaryType::leaky_bucket(1));
        assert_eq!(bounds, vec![Bound::MbtfStored { n: 3, b: 1 }]);
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::from_toml(MBTF).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MBTF.replace("horizon = 100", "horizon = 100\nhorizn = 5");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn type_flag_syntax() {
        assert_eq!(
            "window:3".parse::<TypeSpec>().unwrap().resolve().unwrap(),
            AdversaryType::window(3)
        );
        let half: TypeSpec = "leaky-bucket:2:1/2".parse().unwrap();
        assert_eq!(half.resolve().unwrap().rate(), Rate::new(1, 2).unwrap());
        assert!("window".parse::<TypeSpec>().is_err());
        assert!("bucket:1".parse::<TypeSpec>().is_err());
        assert!("window:0".parse::<TypeSpec>().unwrap().resolve().is_err());
    }

    #[test]
    fn named_specs() {
        let t = parse_named("random:greed=0.8,targets=[1,2]").unwrap();
        assert_eq!(t["name"].as_str(), Some("random"));
        assert_eq!(t["greed"].as_float(), Some(0.8));
        assert_eq!(t["targets"].as_array().map(Vec::len), Some(2));
        let t = parse_named("script:path=trace/s.txt").unwrap();
        assert_eq!(t["path"].as_str(), Some("trace/s.txt"));
        assert!(parse_named(":x=1").is_err());
    }
}

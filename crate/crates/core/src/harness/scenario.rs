use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::agents::{RegistrationEndpoint, Strategy};
use crate::engine::{HandoffStep, MobileSetup, SimParams, SimTime, World};
use crate::topology::{HierAddress, NodeKind, Topology};

use super::HarnessError;

/// Environment variable that overrides a scenario's seed.
pub const SEED_ENV: &str = "MIPSIM_SEED";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    A,
    B,
    C,
    D,
    E,
    Custom(String),
}

impl ScenarioId {
    pub const BUILTIN: [ScenarioId; 5] = [
        ScenarioId::A,
        ScenarioId::B,
        ScenarioId::C,
        ScenarioId::D,
        ScenarioId::E,
    ];

    pub fn label(&self) -> &str {
        match self {
            ScenarioId::A => "A",
            ScenarioId::B => "B",
            ScenarioId::C => "C",
            ScenarioId::D => "D",
            ScenarioId::E => "E",
            ScenarioId::Custom(name) => name,
        }
    }

    pub fn builtin(label: &str) -> Option<ScenarioId> {
        Self::BUILTIN.into_iter().find(|id| id.label() == label)
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologySource {
    Reference,
    File(PathBuf),
}

/// A declarative experiment, run once per strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub id: ScenarioId,
    pub topology: TopologySource,
    pub cn: HierAddress,
    pub mn: HierAddress,
    pub home_agent: HierAddress,
    /// Where the mobile host is attached and registered at t = 0.
    pub start_at: HierAddress,
    pub handoffs: Vec<HandoffStep>,
    pub strategies: Vec<Strategy>,
    pub params: SimParams,
    /// Interval (seconds) whose drops count as handoff losses.
    pub handoff_window: (f64, f64),
    pub seed: u64,
}

const CN: HierAddress = HierAddress::new(0, 0, 0);
const MN: HierAddress = HierAddress::new(1, 2, 1);
const HA: HierAddress = HierAddress::new(1, 2, 0);
const HANDOFF_AT_MS: u64 = 16_000;

impl ScenarioConfig {
    /// The five reference scenarios. A to D leave home for one foreign
    /// agent each; E starts abroad at 1.5.0 and returns home.
    pub fn builtin(id: ScenarioId) -> Result<Self, HarnessError> {
        let (start_at, target) = match id {
            ScenarioId::A => (HA, HierAddress::new(1, 3, 0)),
            ScenarioId::B => (HA, HierAddress::new(1, 5, 0)),
            ScenarioId::C => (HA, HierAddress::new(0, 2, 1)),
            ScenarioId::D => (HA, HierAddress::new(0, 1, 0)),
            ScenarioId::E => (HierAddress::new(1, 5, 0), HA),
            ScenarioId::Custom(name) => {
                return Err(HarnessError::Config(format!(
                    "`{name}` is not a built-in scenario"
                )))
            }
        };
        Ok(ScenarioConfig {
            id,
            topology: TopologySource::Reference,
            cn: CN,
            mn: MN,
            home_agent: HA,
            start_at,
            handoffs: vec![HandoffStep {
                at: SimTime::from_millis(HANDOFF_AT_MS),
                target,
            }],
            strategies: Strategy::ALL.to_vec(),
            params: SimParams::default(),
            handoff_window: (16.0, 18.0),
            seed: 1,
        })
    }

    /// Built-in label (`A`..`E`) or path to a scenario file.
    pub fn resolve(name: &str) -> Result<Self, HarnessError> {
        match ScenarioId::builtin(name) {
            Some(id) => Self::builtin(id),
            None => Self::from_file(Path::new(name)),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fallback = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        Self::from_toml_str(&text, base, &fallback)
    }

    /// Parses a scenario file. Relative topology paths resolve against
    /// `base`; `fallback_name` labels the scenario when it sets no `id`.
    pub fn from_toml_str(
        text: &str,
        base: &Path,
        fallback_name: &str,
    ) -> Result<Self, HarnessError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        file.into_config(base, fallback_name)
    }

    /// Applies `MIPSIM_SEED` if it is set.
    pub fn apply_seed_env(&mut self) -> Result<(), HarnessError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| {
                HarnessError::Config(format!("{SEED_ENV}={v} is not an unsigned integer"))
            })?;
        }
        Ok(())
    }

    pub fn load_topology(&self) -> Result<Topology, HarnessError> {
        let defaults = self.params.link_params();
        Ok(match &self.topology {
            TopologySource::Reference => Topology::reference(defaults),
            TopologySource::File(p) => Topology::from_file(p, defaults)?,
        })
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self, topo: &Topology) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.strategies.is_empty() {
            return bad("no strategies requested".into());
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return bad(format!("strategy {s} listed twice"));
            }
        }
        self.params.validate()?;
        let (lo, hi) = self.handoff_window;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("handoff window [{lo}, {hi}] is not an interval"));
        }
        topo.node(self.cn)?;
        if topo.node(self.mn)?.kind != NodeKind::MobileHost {
            return bad(format!("{} is not a mobile host", self.mn));
        }
        if topo.node(self.home_agent)?.kind != NodeKind::HomeAgent {
            return bad(format!("{} is not a home agent", self.home_agent));
        }
        if !topo.node(self.start_at)?.kind.is_mobility_agent() {
            return bad(format!("start {} is not a mobility agent", self.start_at));
        }
        for s in &self.strategies {
            s.interception_node(topo, self.home_agent)?;
        }
        let horizon = self.params.horizon();
        let mut prev = None;
        let mut at = self.start_at;
        for h in &self.handoffs {
            if prev.is_some_and(|p| h.at < p) {
                return bad("handoff times must be non-decreasing".into());
            }
            if h.at > horizon {
                return bad(format!("handoff at {}s is past the end of the run", h.at));
            }
            if h.target == at {
                return bad(format!(
                    "handoff at {}s targets the current agent {at}",
                    h.at
                ));
            }
            if !topo.node(h.target)?.kind.is_mobility_agent() {
                return bad(format!(
                    "handoff target {} is not a mobility agent",
                    h.target
                ));
            }
            prev = Some(h.at);
            at = h.target;
        }
        Ok(())
    }

    pub fn world(&self, topology: Topology, strategy: Strategy) -> World {
        World {
            topology,
            params: self.params.clone(),
            strategy,
            mobile: Some(MobileSetup {
                home_address: self.mn,
                home_agent: self.home_agent,
                initial_attachment: self.start_at,
            }),
            traffic: vec![self.params.cbr(self.cn, self.mn)],
            handoffs: self.handoffs.clone(),
            seed: self.seed,
        }
    }

    /// The foreign agent (or home agent, for a return) of the first handoff.
    pub fn first_target(&self) -> HierAddress {
        self.handoffs
            .first()
            .map(|h| h.target)
            .unwrap_or(self.start_at)
    }
}

/// Parses `original`, `onelevel`, `twolevel` or `all`.
pub fn parse_strategy_set(text: &str) -> Result<Vec<Strategy>, String> {
    if text == "all" {
        Ok(Strategy::ALL.to_vec())
    } else {
        Strategy::from_str(text).map(|s| vec![s])
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HandoffEntry {
    time_s: f64,
    target_fa: HierAddress,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    id: Option<String>,
    topology: Option<PathBuf>,
    strategy: Option<String>,
    strategies: Option<Vec<Strategy>>,
    cn: Option<HierAddress>,
    mn: Option<HierAddress>,
    home_agent: Option<HierAddress>,
    start_at: Option<HierAddress>,
    #[serde(default)]
    handoff: Vec<HandoffEntry>,
    registration_terminates_at: Option<RegistrationEndpoint>,
    lifetime: Option<f64>,
    fa_max_lifetime: Option<f64>,
    handoff_window: Option<[f64; 2]>,
    seed: Option<u64>,
    #[serde(default)]
    params: SimParams,
}

impl ScenarioFile {
    fn into_config(self, base: &Path, fallback_name: &str) -> Result<ScenarioConfig, HarnessError> {
        let strategies = match (self.strategy, self.strategies) {
            (Some(_), Some(_)) => {
                return Err(HarnessError::Config(
                    "set either `strategy` or `strategies`, not both".into(),
                ))
            }
            (Some(s), None) => parse_strategy_set(&s).map_err(HarnessError::Config)?,
            (None, Some(v)) => v,
            (None, None) => Strategy::ALL.to_vec(),
        };
        let mut params = self.params;
        if let Some(ep) = self.registration_terminates_at {
            params.registration_terminates_at = ep;
        }
        if let Some(l) = self.lifetime {
            params.lifetime = l;
        }
        if self.fa_max_lifetime.is_some() {
            params.fa_max_lifetime = self.fa_max_lifetime;
        }
        let mut handoffs = Vec::with_capacity(self.handoff.len());
        for h in self.handoff {
            if !(h.time_s.is_finite() && h.time_s >= 0.0) {
                return Err(HarnessError::Config(format!(
                    "handoff time {} is not a valid time",
                    h.time_s
                )));
            }
            handoffs.push(HandoffStep {
                at: SimTime::from_secs_f64(h.time_s),
                target: h.target_fa,
            });
        }
        let home_agent = self.home_agent.unwrap_or(HA);
        let id = match self.id {
            Some(name) => ScenarioId::builtin(&name).unwrap_or(ScenarioId::Custom(name)),
            None => ScenarioId::Custom(fallback_name.to_string()),
        };
        let window = self.handoff_window.unwrap_or([16.0, 18.0]);
        Ok(ScenarioConfig {
            id,
            topology: match self.topology {
                Some(p) if p.is_relative() => TopologySource::File(base.join(p)),
                Some(p) => TopologySource::File(p),
                None => TopologySource::Reference,
            },
            cn: self.cn.unwrap_or(CN),
            mn: self.mn.unwrap_or(MN),
            home_agent,
            start_at: self.start_at.unwrap_or(home_agent),
            handoffs,
            strategies,
            params,
            handoff_window: (window[0], window[1]),
            seed: self.seed.unwrap_or(1),
        })
    }
}

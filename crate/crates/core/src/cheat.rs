//! Scripted deviations from the protocol.

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::model::{PlayerId, PlayerSet};
use crate::transcript::EventKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheatAction {
    FlipBits,
    Equivocate,
    Withhold,
    FalseComplain,
    BadRelay,
}

impl CheatAction {
    pub fn name(self) -> &'static str {
        match self {
            CheatAction::FlipBits => "flip-bits",
            CheatAction::Equivocate => "equivocate",
            CheatAction::Withhold => "withhold",
            CheatAction::FalseComplain => "false-complain",
            CheatAction::BadRelay => "bad-relay",
        }
    }
}

impl fmt::Display for CheatAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown cheat action {0:?}")]
pub struct UnknownAction(pub String);

impl FromStr for CheatAction {
    type Err = UnknownAction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "flip-bits" => CheatAction::FlipBits,
            "equivocate" => CheatAction::Equivocate,
            "withhold" => CheatAction::Withhold,
            "false-complain" => CheatAction::FalseComplain,
            "bad-relay" => CheatAction::BadRelay,
            _ => return Err(UnknownAction(s.to_string())),
        })
    }
}

/// One scripted deviation: `actor` performs `action` whenever the protocol reaches `hook`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheatScript {
    pub actor: PlayerId,
    pub hook: EventKind,
    pub action: CheatAction,
    /// Action-specific size, e.g. the number of bad pairs planted while copying.
    pub count: Option<usize>,
}

impl CheatScript {
    pub fn new(actor: PlayerId, hook: EventKind, action: CheatAction) -> Self {
        Self {
            actor,
            hook,
            action,
            count: None,
        }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = Some(count);
        self
    }
}

/// Raw form used by scenario files.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheatSpec {
    pub actor: usize,
    pub hook: String,
    pub action: String,
    pub count: Option<usize>,
}

impl TryFrom<&CheatSpec> for CheatScript {
    type Error = String;

    fn try_from(spec: &CheatSpec) -> Result<Self, Self::Error> {
        Ok(CheatScript {
            actor: PlayerId(spec.actor),
            hook: spec.hook.parse().map_err(|e| format!("{e}"))?,
            action: spec.action.parse().map_err(|e| format!("{e}"))?,
            count: spec.count,
        })
    }
}

/// Every (hook, action) pair the protocols act on. Other combinations would be
/// silently ignored, so scenario files reject them.
pub const SUPPORTED: &[(EventKind, CheatAction)] = &[
    (EventKind::AuthBcast, CheatAction::Equivocate),
    (EventKind::AuthBcast, CheatAction::FalseComplain),
    (EventKind::AnonBcast, CheatAction::BadRelay),
    (EventKind::GbcCommit, CheatAction::FalseComplain),
    (EventKind::GbcOpen, CheatAction::FlipBits),
    (EventKind::GbcOpen, CheatAction::Withhold),
    (EventKind::Proof, CheatAction::FlipBits),
    (EventKind::Copy, CheatAction::FlipBits),
    (EventKind::Coin, CheatAction::Withhold),
    (EventKind::Dbc, CheatAction::FlipBits),
    (EventKind::Dbc, CheatAction::Withhold),
    (EventKind::GcotStep2, CheatAction::FlipBits),
    (EventKind::GcotStep4, CheatAction::FlipBits),
    (EventKind::GcotStep5, CheatAction::FlipBits),
    (EventKind::GcotStep5, CheatAction::FalseComplain),
    (EventKind::GcotStep7, CheatAction::FlipBits),
    (EventKind::GcotStep9, CheatAction::FlipBits),
    (EventKind::Reveal, CheatAction::Withhold),
];

pub fn is_supported(hook: EventKind, action: CheatAction) -> bool {
    SUPPORTED.contains(&(hook, action))
}

/// The scripts active in one simulation.
#[derive(Debug, Clone, Default)]
pub struct CheatBook {
    scripts: Vec<CheatScript>,
}

impl CheatBook {
    pub fn new(scripts: Vec<CheatScript>) -> Self {
        Self { scripts }
    }

    pub fn lookup(&self, actor: PlayerId, hook: EventKind) -> Option<&CheatScript> {
        self.scripts
            .iter()
            .find(|s| s.actor == actor && s.hook == hook)
    }

    pub fn action(&self, actor: PlayerId, hook: EventKind) -> Option<CheatAction> {
        self.lookup(actor, hook).map(|s| s.action)
    }

    pub fn is(&self, actor: PlayerId, hook: EventKind, action: CheatAction) -> bool {
        self.action(actor, hook) == Some(action)
    }

    /// Every player with at least one script.
    pub fn collusion(&self) -> PlayerSet {
        self.scripts.iter().map(|s| s.actor).collect()
    }

    pub fn is_honest(&self, p: PlayerId) -> bool {
        !self.scripts.iter().any(|s| s.actor == p)
    }

    pub fn scripts(&self) -> &[CheatScript] {
        &self.scripts
    }

    /// Rejects scripts for players outside `0..n` and unsupported combinations.
    pub fn validate(&self, n: usize) -> Result<(), String> {
        for s in &self.scripts {
            if s.actor.0 >= n {
                return Err(format!("cheat actor P{} but only {n} players", s.actor.0));
            }
            if !is_supported(s.hook, s.action) {
                return Err(format!("{} is not a supported deviation at {}", s.action, s.hook.name()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trip() {
        let spec = CheatSpec {
            actor: 1,
            hook: "GCOT_STEP5".into(),
            action: "false-complain".into(),
            count: None,
        };
        let script = CheatScript::try_from(&spec).unwrap();
        assert_eq!(script, CheatScript::new(PlayerId(1), EventKind::GcotStep5, CheatAction::FalseComplain));
        assert!(CheatBook::new(vec![script]).validate(3).is_ok());
    }

    #[test]
    fn validation_rejects() {
        let bad_actor = CheatBook::new(vec![CheatScript::new(PlayerId(3), EventKind::Proof, CheatAction::FlipBits)]);
        assert!(bad_actor.validate(3).is_err());
        let unsupported = CheatBook::new(vec![CheatScript::new(PlayerId(0), EventKind::Proof, CheatAction::BadRelay)]);
        assert!(unsupported.validate(3).is_err());
        assert!("swap".parse::<CheatAction>().is_err());
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The five search algorithms shipped with the gym.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    RW,
    GA,
    ACO,
    BO,
    RL,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] = [
        AgentKind::RW,
        AgentKind::GA,
        AgentKind::ACO,
        AgentKind::BO,
        AgentKind::RL,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::RW => "RW",
            AgentKind::GA => "GA",
            AgentKind::ACO => "ACO",
            AgentKind::BO => "BO",
            AgentKind::RL => "RL",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RW" | "RANDOM" | "RANDOM_WALKER" => Ok(AgentKind::RW),
            "GA" => Ok(AgentKind::GA),
            "ACO" => Ok(AgentKind::ACO),
            "BO" => Ok(AgentKind::BO),
            "RL" => Ok(AgentKind::RL),
            other => Err(format!("unknown agent type `{other}` (expected RW, GA, ACO, BO or RL)")),
        }
    }
}

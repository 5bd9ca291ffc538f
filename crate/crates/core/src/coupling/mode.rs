use std::fmt;
use std::str::FromStr;

use crate::Error;

/// Model choice for the triplet (state on Ω₁, state on Ω₂, control):
/// `F` full order, `R` reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CouplingMode {
    Fff,
    Frf,
    Frr,
    Rrr,
}

impl CouplingMode {
    pub const ALL: [CouplingMode; 4] = [CouplingMode::Fff, CouplingMode::Frf, CouplingMode::Frr, CouplingMode::Rrr];

    pub fn as_str(&self) -> &'static str {
        match self {
            CouplingMode::Fff => "FFF",
            CouplingMode::Frf => "FRF",
            CouplingMode::Frr => "FRR",
            CouplingMode::Rrr => "RRR",
        }
    }

    /// Whether the state on subdomain `i` is reduced.
    pub fn reduced_state(&self, i: usize) -> bool {
        match self {
            CouplingMode::Fff => false,
            CouplingMode::Frf | CouplingMode::Frr => i == 1,
            CouplingMode::Rrr => true,
        }
    }

    pub fn reduced_control(&self) -> bool {
        matches!(self, CouplingMode::Frr | CouplingMode::Rrr)
    }

    pub fn needs_basis(&self) -> bool {
        *self != CouplingMode::Fff
    }
}

impl fmt::Display for CouplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CouplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_uppercase().as_str() {
            "FFF" => Ok(CouplingMode::Fff),
            "FRF" => Ok(CouplingMode::Frf),
            "FRR" => Ok(CouplingMode::Frr),
            "RRR" => Ok(CouplingMode::Rrr),
            _ => Err(Error::Config(format!("unknown coupling mode '{s}' (expected FFF, FRF, FRR or RRR)"))),
        }
    }
}

//! Problem families: RCPSP and winner determination, with file readers and
//! seeded generators.

pub mod cats;
pub mod generate;
pub mod psplib;
pub mod rcpsp;
pub mod wdp;

pub use cats::{parse_cats, write_cats, CatsError};
pub use generate::{generate_rcpsp, generate_wdp, Distribution};
pub use psplib::{parse_psplib, write_psplib, PsplibError};
pub use rcpsp::{
    build_rcpsp_milp, check_schedule, compute_time_windows, serial_schedule, Activity, RcpspError,
    RcpspInstance, RcpspModel, ScheduleRow, TimeWindows,
};
pub use wdp::{build_wdp_milp, Bid, WdpError, WdpInstance, WdpModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{parse_model, MilpModel, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Rcpsp,
    Wdp,
    Canonical,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Rcpsp => "rcpsp",
            Family::Wdp => "wdp",
            Family::Canonical => "canonical",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rcpsp" | "psplib" => Ok(Family::Rcpsp),
            "wdp" | "cats" => Ok(Family::Wdp),
            "canonical" => Ok(Family::Canonical),
            _ => Err(format!("unknown family `{s}`")),
        }
    }
}

/// A built model together with the instance it came from, which queries
/// need to resolve entity names.
#[derive(Debug, Clone)]
pub enum Problem {
    Rcpsp(RcpspModel),
    Wdp(WdpModel),
    Canonical(MilpModel),
}

impl Problem {
    pub fn model(&self) -> &MilpModel {
        match self {
            Problem::Rcpsp(p) => &p.model,
            Problem::Wdp(p) => &p.model,
            Problem::Canonical(m) => m,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Problem::Rcpsp(_) => Family::Rcpsp,
            Problem::Wdp(_) => Family::Wdp,
            Problem::Canonical(_) => Family::Canonical,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("PSPLIB {0}")]
    Psplib(#[from] PsplibError),
    #[error("CATS {0}")]
    Cats(#[from] CatsError),
    #[error(transparent)]
    Rcpsp(#[from] RcpspError),
    #[error(transparent)]
    Wdp(#[from] WdpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parses an instance file of the given family and builds its model.
pub fn load_problem(family: Family, text: &str) -> Result<Problem, LoadError> {
    Ok(match family {
        Family::Rcpsp => {
            let inst = parse_psplib(text)?;
            let tw = compute_time_windows(&inst)?;
            Problem::Rcpsp(build_rcpsp_milp(&inst, &tw)?)
        }
        Family::Wdp => Problem::Wdp(build_wdp_milp(&parse_cats(text)?)?),
        Family::Canonical => Problem::Canonical(parse_model(text)?),
    })
}

impl Family {
    /// Family implied by a file extension: `.sm`, `.cats`, `.milp`.
    pub fn from_extension(ext: &str) -> Option<Family> {
        match ext {
            "sm" => Some(Family::Rcpsp),
            "cats" => Some(Family::Wdp),
            "milp" => Some(Family::Canonical),
            _ => None,
        }
    }
}

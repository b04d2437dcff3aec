//! Plain-text design files.
//!
//! ```text
//! {"format":"sal-design/1","scenario":"discrete","budget":3,"n_rx":20}
//! 2
//! 7
//! 13
//! ```
//!
//! The first line is JSON metadata; each following line is one receiver
//! index (discrete) or coordinate (continuous).

use serde::{Deserialize, Serialize};

use super::{Acquisition, Scenario};
use crate::error::{Error, Result};

pub const FORMAT: &str = "sal-design/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignMeta {
    pub format: String,
    pub scenario: Scenario,
    pub budget: usize,
    pub n_rx: usize,
}

fn fmt_err(reason: impl Into<String>) -> Error {
    Error::Format { what: "design", reason: reason.into() }
}

pub fn export_design(acq: &Acquisition, n_rx: usize) -> Result<String> {
    acq.validate(n_rx)?;
    let meta = DesignMeta { format: FORMAT.into(), scenario: acq.scenario(), budget: acq.budget(), n_rx };
    let mut out = serde_json::to_string(&meta).map_err(|e| fmt_err(e.to_string()))?;
    out.push('\n');
    match acq {
        Acquisition::Subset(s) => s.iter().for_each(|r| out.push_str(&format!("{r}\n"))),
        Acquisition::Coords(c) => c.iter().for_each(|x| out.push_str(&format!("{x}\n"))),
    }
    Ok(out)
}

pub fn parse_design(text: &str) -> Result<(DesignMeta, Acquisition)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| fmt_err("empty file"))?;
    let meta: DesignMeta = serde_json::from_str(header).map_err(|e| fmt_err(format!("metadata: {e}")))?;
    if meta.format != FORMAT {
        return Err(fmt_err(format!("unsupported format `{}`", meta.format)));
    }
    let body: Vec<&str> = lines.collect();
    if body.len() != meta.budget {
        return Err(fmt_err(format!("expected {} entries, found {}", meta.budget, body.len())));
    }
    let acq = match meta.scenario {
        Scenario::Discrete => Acquisition::Subset(
            body.iter()
                .map(|l| l.trim().parse::<usize>().map_err(|_| fmt_err(format!("bad index `{l}`"))))
                .collect::<Result<_>>()?,
        ),
        Scenario::Continuous => Acquisition::Coords(
            body.iter()
                .map(|l| l.trim().parse::<f64>().map_err(|_| fmt_err(format!("bad coordinate `{l}`"))))
                .collect::<Result<_>>()?,
        ),
    };
    acq.validate(meta.n_rx).map_err(|e| fmt_err(e.to_string()))?;
    Ok((meta, acq))
}

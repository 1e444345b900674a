//! Bundled example models.

use crate::error::{Error, Result};
use crate::model::{parse_model, LagrangianModel};

pub const NAMES: [&str; 9] = [
    "oscillator",
    "exponential",
    "mixed",
    "cawley",
    "particle",
    "christ_lee",
    "synthetic_gaugeless",
    "synthetic_gauge",
    "synthetic_bianchi",
];

pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "oscillator" => include_str!("../models/oscillator.lag"),
        "exponential" => include_str!("../models/exponential.lag"),
        "mixed" => include_str!("../models/mixed.lag"),
        "cawley" => include_str!("../models/cawley.lag"),
        "particle" => include_str!("../models/particle.lag"),
        "christ_lee" => include_str!("../models/christ_lee.lag"),
        "synthetic_gaugeless" => include_str!("../models/synthetic_gaugeless.lag"),
        "synthetic_gauge" => include_str!("../models/synthetic_gauge.lag"),
        "synthetic_bianchi" => include_str!("../models/synthetic_bianchi.lag"),
        _ => return None,
    })
}

pub fn load(name: &str) -> Result<LagrangianModel> {
    let text = source(name).ok_or_else(|| Error::Usage(format!("no bundled model named '{name}'")))?;
    parse_model(text)
}

/// Name of the bundled model equal to `model`, if any.
pub fn identify(model: &LagrangianModel) -> Option<&'static str> {
    NAMES.into_iter().find(|name| load(name).is_ok_and(|m| &m == model))
}

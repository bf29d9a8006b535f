//! Built-in experiment configurations, embedded at compile time.

use crate::config::{parse_config_text, ExperimentConfig};

/// Available preset names, in listing order.
pub const PRESET_NAMES: [&str; 4] = ["interior", "transmission", "scattering", "stochastic"];

/// The embedded configuration for a preset name.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let text = match name {
        "interior" => include_str!("../presets/interior.json"),
        "transmission" => include_str!("../presets/transmission.json"),
        "scattering" => include_str!("../presets/scattering.json"),
        "stochastic" => include_str!("../presets/stochastic.json"),
        _ => return None,
    };
    Some(parse_config_text(text).expect("embedded presets parse"))
}

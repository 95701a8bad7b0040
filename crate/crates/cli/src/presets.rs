//! Named run configurations shipped with the binary.

use crate::config::RunConfig;

pub const PRESETS: &[(&str, &str)] = &[
    ("filters", include_str!("../presets/filters.toml")),
    ("fig1-weights", include_str!("../presets/fig1-weights.toml")),
    ("triangle", include_str!("../presets/triangle.toml")),
    ("groundstate", include_str!("../presets/groundstate.toml")),
    ("rgflow", include_str!("../presets/rgflow.toml")),
    ("limit", include_str!("../presets/limit.toml")),
    ("lightcone", include_str!("../presets/lightcone.toml")),
    ("dyn-error", include_str!("../presets/dyn-error.toml")),
    ("corr-conv", include_str!("../presets/corr-conv.toml")),
    ("mera-check", include_str!("../presets/mera-check.toml")),
    ("acceptance", include_str!("../presets/acceptance.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Option<RunConfig> {
    preset_text(name).map(|t| RunConfig::from_toml(t).expect("shipped presets parse"))
}

//! Experiment files shipped with the binary.

pub const PRESETS: &[(&str, &str)] = &[
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("fig10-case1", include_str!("../presets/fig10-case1.toml")),
    ("fig10-case2", include_str!("../presets/fig10-case2.toml")),
    ("fig10-case3", include_str!("../presets/fig10-case3.toml")),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

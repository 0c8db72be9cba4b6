//! Built-in plans, shipped as the files under `presets/`.

pub const PRESETS: &[(&str, &str)] = &[
    ("viii_case1", include_str!("../../../presets/viii_case1.plan")),
    ("viii_case2", include_str!("../../../presets/viii_case2.plan")),
    ("v_vstar", include_str!("../../../presets/v_vstar.plan")),
    ("ix2_five", include_str!("../../../presets/ix2_five.plan")),
    ("ix_mixed", include_str!("../../../presets/ix_mixed.plan")),
    ("two_p8", include_str!("../../../presets/two_p8.plan")),
    ("toy_pencil", include_str!("../../../presets/toy_pencil.plan")),
];

/// Looks a preset up by name; `-` and `_` are interchangeable.
pub fn preset(name: &str) -> Option<&'static str> {
    let want = name.replace('-', "_");
    PRESETS.iter().find(|(n, _)| *n == want).map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

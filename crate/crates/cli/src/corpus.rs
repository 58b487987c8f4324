//! Case corpus compiled into the binary for `verify-all`.

macro_rules! case {
    ($name:literal) => {
        ($name, include_str!(concat!("../cases/", $name, ".toml")))
    };
}

pub const CASES: &[(&str, &str)] = &[
    case!("01-invert-bergman2"),
    case!("02-props-mixed-bergman"),
    case!("03-check-multishift"),
    case!("04-check-scalars"),
    case!("05-check-radius-too-large"),
    case!("06-check-jordan-fails"),
    case!("07-dilate-nilpotent-pair"),
    case!("08-dilate-nilpotent-triple"),
    case!("09-general-unitaries"),
    case!("10-general-mixed"),
    case!("11-charfn-zero"),
    case!("12-charfn-nilpotent-bergman2"),
];

const DATA: &[(&str, &str)] = &[(
    "data/jordan095.json",
    include_str!("../cases/data/jordan095.json"),
)];

pub fn data(key: &str) -> Option<&'static str> {
    DATA.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

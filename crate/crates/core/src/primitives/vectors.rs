//! Published test vectors, stored as `name: hex` lines.

use std::collections::BTreeMap;

use super::PrimError;

pub const FILES: &[(&str, &str)] = &[
    (
        "chacha20_block",
        include_str!("../../vectors/chacha20_block.hex"),
    ),
    (
        "chacha20_encrypt",
        include_str!("../../vectors/chacha20_encrypt.hex"),
    ),
    (
        "poly1305_tag",
        include_str!("../../vectors/poly1305_tag.hex"),
    ),
    ("gimli", include_str!("../../vectors/gimli.hex")),
];

pub fn parse_hex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

pub fn to_hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

/// Fields of a vector file; `#` starts a comment line.
pub fn parse(file: &str, text: &str) -> Result<BTreeMap<String, Vec<u8>>, PrimError> {
    let bad = |msg: String| PrimError::Vector {
        file: file.into(),
        msg,
    };
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| bad(format!("line {}: no `:`", n + 1)))?;
        let bytes = parse_hex(v.trim()).ok_or_else(|| bad(format!("line {}: bad hex", n + 1)))?;
        out.insert(k.trim().to_string(), bytes);
    }
    Ok(out)
}

pub fn load(name: &str) -> Result<BTreeMap<String, Vec<u8>>, PrimError> {
    let text = FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| PrimError::Vector {
            file: name.into(),
            msg: "unknown".into(),
        })?;
    parse(name, text)
}

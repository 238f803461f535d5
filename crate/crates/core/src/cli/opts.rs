//! Value syntax shared by the subcommands.

use super::CliError;
use crate::leakage::RegionLen;
use crate::primitives::vectors::parse_hex;

/// Decimal or `0x`-prefixed hexadecimal, `_` separators allowed.
pub fn parse_u64(s: &str) -> Result<u64, String> {
    let t = s.trim().replace('_', "");
    let r = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16),
        None => t.parse(),
    };
    r.map_err(|_| format!("`{s}` is not an unsigned integer"))
}

/// Comma-separated names; empty items are dropped.
pub fn parse_names(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(String::from)
        .collect()
}

/// Alternative spellings of the Poly1305 parameter names.
const ALIASES: &[(&str, &str)] = &[("inn", "in"), ("inl", "inlen")];

/// Maps an alias to the parameter it stands for when only the latter
/// exists.
pub fn resolve_name(name: &str, params: &[String]) -> String {
    if params.iter().any(|p| p == name) {
        return name.to_string();
    }
    ALIASES
        .iter()
        .find(|(a, p)| *a == name && params.iter().any(|x| x == p))
        .map_or_else(|| name.to_string(), |(_, p)| p.to_string())
}

pub fn resolve_names(names: &[String], params: &[String]) -> Vec<String> {
    names.iter().map(|n| resolve_name(n, params)).collect()
}

/// `[NAME=]BASE:LEN`, where `LEN` is a number, a parameter name or
/// `PARAM+N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionArg {
    pub name: Option<String>,
    pub base: u64,
    pub len: RegionLen,
}

pub fn parse_region(s: &str) -> Result<RegionArg, CliError> {
    let bad = |m: &str| CliError::Usage(format!("bad region `{s}`: {m}"));
    let (name, rest) = match s.split_once('=') {
        Some((n, r)) => (Some(n.trim().to_string()), r),
        None => (None, s),
    };
    let (base, len) = rest
        .split_once(':')
        .ok_or_else(|| bad("expected BASE:LEN"))?;
    let base = parse_u64(base).map_err(|e| bad(&e))?;
    let len = len.trim();
    let len = match parse_u64(len) {
        Ok(n) => RegionLen::Fixed(n),
        Err(_) => {
            let (p, add) = match len.split_once('+') {
                Some((p, k)) => (p.trim(), parse_u64(k).map_err(|e| bad(&e))?),
                None => (len, 0),
            };
            if p.is_empty() || !p.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(bad("length must be a number or PARAM[+N]"));
            }
            RegionLen::Param {
                name: p.to_string(),
                add,
            }
        }
    };
    Ok(RegionArg { name, base, len })
}

/// `BASE:HEX`, a region with initial contents.
pub fn parse_bytes(s: &str) -> Result<(u64, Vec<u8>), CliError> {
    let bad = |m: &str| CliError::Usage(format!("bad bytes `{s}`: {m}"));
    let (base, hex) = s.split_once(':').ok_or_else(|| bad("expected BASE:HEX"))?;
    let base = parse_u64(base).map_err(|e| bad(&e))?;
    let bytes = parse_hex(hex).ok_or_else(|| bad("odd or non-hex digits"))?;
    Ok((base, bytes))
}

/// `NAME=V` or `NAME=LO..HI` (inclusive).
pub fn parse_range(s: &str) -> Result<(String, u64, u64), CliError> {
    let bad = |m: &str| CliError::Usage(format!("bad range `{s}`: {m}"));
    let (name, v) = s
        .split_once('=')
        .ok_or_else(|| bad("expected NAME=LO..HI"))?;
    let (lo, hi) = match v.split_once("..") {
        Some((a, b)) => (
            parse_u64(a).map_err(|e| bad(&e))?,
            parse_u64(b.trim_start_matches('=')).map_err(|e| bad(&e))?,
        ),
        None => {
            let x = parse_u64(v).map_err(|e| bad(&e))?;
            (x, x)
        }
    };
    if lo > hi {
        return Err(bad("empty range"));
    }
    Ok((name.trim().to_string(), lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(parse_u64("0x10_0000"), Ok(0x100000));
        assert_eq!(parse_u64("42"), Ok(42));
        assert!(parse_u64("x").is_err());
    }

    #[test]
    fn regions() {
        assert_eq!(
            parse_region("in=0x200000:inlen+16").unwrap(),
            RegionArg {
                name: Some("in".into()),
                base: 0x200000,
                len: RegionLen::Param {
                    name: "inlen".into(),
                    add: 16
                },
            }
        );
        assert_eq!(
            parse_region("4096:32").unwrap(),
            RegionArg {
                name: None,
                base: 4096,
                len: RegionLen::Fixed(32),
            }
        );
        assert!(parse_region("4096").is_err());
        assert!(parse_region("1:a-b").is_err());
    }

    #[test]
    fn ranges_and_bytes() {
        assert_eq!(parse_range("n=0..64").unwrap(), ("n".into(), 0, 64));
        assert_eq!(parse_range("n=7").unwrap(), ("n".into(), 7, 7));
        assert!(parse_range("n=9..1").is_err());
        assert_eq!(parse_bytes("0x10:00ff").unwrap(), (16, vec![0, 255]));
        assert!(parse_bytes("0x10:0").is_err());
    }

    #[test]
    fn aliases() {
        let params: Vec<String> = ["out", "in", "inlen", "k"].map(String::from).to_vec();
        assert_eq!(
            resolve_names(&parse_names("out,inn,inl,k"), &params),
            params
        );
        let own: Vec<String> = vec!["inn".into()];
        assert_eq!(resolve_name("inn", &own), "inn");
    }
}

//! Flat `key = value` settings files. Keys are the long flag names without
//! the leading dashes; `#` starts a comment. List-valued keys (`N`, `eps`,
//! `mu`) take comma-separated values, and `mu` separates points with `;`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const KEYS: &[&str] = &[
    "problem",
    "algorithm",
    "N",
    "eps",
    "train-size",
    "seed",
    "init",
    "mesh-n",
    "mesh-target",
    "max-depth",
    "alpha",
    "out",
    "library",
    "input",
    "mu",
];

pub fn parse(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected key = value", i + 1));
        };
        let key = key.trim().replace('_', "-");
        let key = if key.eq_ignore_ascii_case("n") {
            "N".to_string()
        } else {
            key
        };
        if !KEYS.contains(&key.as_str()) {
            return Err(format!("line {}: unknown key '{key}'", i + 1));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(format!("line {}: '{key}' given twice", i + 1));
        }
    }
    Ok(map)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_comments_and_spelling() {
        let map = parse("# sweep\nproblem = convdiff-II\ntrain_size=100 # inline\n\nn = 1,2\neps=0.1, 0.01\n").unwrap();
        assert_eq!(map["problem"], "convdiff-II");
        assert_eq!(map["train-size"], "100");
        assert_eq!(map["N"], "1,2");
        assert_eq!(map["eps"], "0.1, 0.01");
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        assert!(parse("colour = red").unwrap_err().contains("unknown key"));
        assert!(parse("seed = 1\nseed = 2").unwrap_err().contains("twice"));
        assert!(parse("seed 1").is_err());
    }
}

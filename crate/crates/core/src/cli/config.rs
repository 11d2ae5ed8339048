use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use super::CliError;

pub const SEED_ENV: &str = "NVFORGE_SEED";
const SEED_KEY: &str = "master_seed";

fn to_map<T: Serialize>(v: &T) -> Result<Map<String, Value>, CliError> {
    match serde_json::to_value(v).map_err(|e| CliError::Config(e.to_string()))? {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Config("parameter set is not a table".into())),
    }
}

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        if !v.is_null() {
            base.insert(k, v);
        }
    }
}

/// Read a TOML parameter file into the same shape as the flags.
pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<(T, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let parsed = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
    Ok((parsed, text))
}

/// Resolve parameters with precedence flag > `NVFORGE_SEED` (seed only) >
/// file > default. Keys left unset by every layer stay `None`.
pub fn layered<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: Option<&T>,
    defaults: &T,
    seed_env: Option<&str>,
) -> Result<T, CliError> {
    let mut merged = to_map(defaults)?;
    if let Some(f) = file {
        overlay(&mut merged, to_map(f)?);
    }
    if let Some(raw) = seed_env {
        if merged.contains_key(SEED_KEY) {
            let seed: u64 = raw
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}='{raw}' is not an unsigned 64-bit integer")))?;
            merged.insert(SEED_KEY.into(), Value::from(seed));
        }
    }
    overlay(&mut merged, to_map(flags)?);
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))
}

pub fn require<T>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing required key '{key}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct P {
        master_seed: Option<u64>,
        width_hz: Option<f64>,
    }

    #[test]
    fn precedence_order() {
        let d = P { master_seed: Some(1), width_hz: Some(1.0) };
        let file = P { master_seed: Some(2), width_hz: Some(2.0) };
        let none = P::default();
        let r = layered(&none, Some(&file), &d, None).unwrap();
        assert_eq!(r, P { master_seed: Some(2), width_hz: Some(2.0) });
        let r = layered(&none, Some(&file), &d, Some("3")).unwrap();
        assert_eq!(r.master_seed, Some(3));
        let flags = P { master_seed: Some(4), width_hz: None };
        let r = layered(&flags, Some(&file), &d, Some("3")).unwrap();
        assert_eq!(r, P { master_seed: Some(4), width_hz: Some(2.0) });
        assert!(layered(&none, None, &d, Some("x")).is_err());
    }

    #[test]
    fn unknown_file_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "width_hz = 3.0\nwidth = 2\n").unwrap();
        assert!(matches!(read_file::<P>(&path), Err(CliError::Config(_))));
        std::fs::write(&path, "width_hz = 3\n").unwrap();
        assert_eq!(read_file::<P>(&path).unwrap().0.width_hz, Some(3.0));
    }
}

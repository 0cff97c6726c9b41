//! Parameter resolution: defaults, then the `--config` file, then flags.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DOMAIN: i32 = 65;
pub const EXIT_IO: i32 = 74;

/// Keys of the config file that belong to the global flags.
pub const GLOBAL_KEYS: [&str; 3] = ["seed", "format", "out"];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(m) => f.write_str(m),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<stale_momentum::Error> for CliError {
    fn from(e: stale_momentum::Error) -> Self {
        use stale_momentum::Error as E;
        match e {
            E::Io(_) | E::Csv(_) | E::Json(_) => CliError::Io(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn load_config(path: Option<&Path>) -> CliResult<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Usage("config must be a JSON object".into())),
        Err(e) => Err(CliError::Usage(format!("invalid config {}: {e}", path.display()))),
    }
}

/// Merges `config` and then the flags that were given over `P::default()`.
/// Config keys that `P` does not know are usage errors.
pub fn resolve<A, P>(flags: &A, config: &Map<String, Value>) -> CliResult<P>
where
    A: Serialize,
    P: Serialize + DeserializeOwned + Default,
{
    let Value::Object(mut merged) = serde_json::to_value(P::default())? else {
        unreachable!("parameter sets serialize to objects");
    };
    for (k, v) in config {
        if GLOBAL_KEYS.contains(&k.as_str()) {
            continue;
        }
        if !merged.contains_key(k) {
            return Err(CliError::Usage(format!("unknown config key `{k}`")));
        }
        merged.insert(k.clone(), v.clone());
    }
    if let Value::Object(given) = serde_json::to_value(flags)? {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("invalid parameter: {e}")))
}

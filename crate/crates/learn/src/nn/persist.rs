use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};

pub const FORMAT: &str = "dyncontract";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    payload: T,
}

/// Writes `value` as JSON inside a versioned envelope tagged with `kind`.
pub fn save_json<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<()> {
    let env = Envelope { format: FORMAT.into(), version: VERSION, kind: kind.into(), payload: value };
    let text = serde_json::to_string(&env)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a value written by [`save_json`], checking format, version and kind.
pub fn load_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let env: Envelope<T> = serde_json::from_str(&text)?;
    if env.format != FORMAT || env.version != VERSION || env.kind != kind {
        return Err(LearnError::Format(format!(
            "expected {FORMAT} v{VERSION} {kind}, found {} v{} {}",
            env.format, env.version, env.kind
        )));
    }
    Ok(env.payload)
}

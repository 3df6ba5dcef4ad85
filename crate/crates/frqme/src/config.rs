//! Flat `key = value` configuration files with `#` comments.
//!
//! The CLI loads one of these for defaults; command-line flags override any
//! key. Later occurrences of a key win.

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let effective = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = effective.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError {
                line,
                message: format!("expected `key = value`, got {trimmed:?}"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError {
                line,
                message: "empty key".to_string(),
            });
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

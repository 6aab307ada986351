//! Forge settings. Sources are layered defaults < environment < TOML file;
//! command-line flags are applied on top by the caller.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::ForgeError;
use crate::generator::EndpointConfig;
use crate::template::Profile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsConfig {
    pub wall_time_s: f64,
    pub memory_cap: u64,
    pub time_slice_s: f64,
    /// 0 means no cap on the number of generations.
    pub max_generations: u32,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        LimitsConfig {
            wall_time_s: gmp_core::search::DEFAULT_WALL_TIME.as_secs_f64(),
            memory_cap: gmp_core::search::DEFAULT_MEMORY_CAP,
            time_slice_s: gmp_core::planner::DEFAULT_TIME_SLICE_S,
            max_generations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub workspace: PathBuf,
    pub profile: Profile,
    pub offline: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            workspace: std::env::temp_dir().join("gmp-forge"),
            profile: Profile::Release,
            offline: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeSettings {
    pub endpoint: EndpointConfig,
    pub limits: LimitsConfig,
    pub build: BuildConfig,
}

#[derive(Clone, Copy)]
enum Kind {
    Str,
    Float,
    Int,
    Bool,
}

/// Environment variables and the setting each one feeds.
pub const ENV_VARS: [(&str, &str, &str); 11] = [
    ("GMP_ENDPOINT_URL", "endpoint", "base_url"),
    ("GMP_MODEL", "endpoint", "model"),
    ("GMP_TEMPERATURE", "endpoint", "temperature"),
    ("GMP_SEED", "endpoint", "seed"),
    ("GMP_API_KEY_ENV", "endpoint", "api_key_env"),
    ("GMP_WALL_TIME_S", "limits", "wall_time_s"),
    ("GMP_MEMORY_CAP", "limits", "memory_cap"),
    ("GMP_TIME_SLICE_S", "limits", "time_slice_s"),
    ("GMP_MAX_GENERATIONS", "limits", "max_generations"),
    ("GMP_FORGE_WORKSPACE", "build", "workspace"),
    ("GMP_OFFLINE", "build", "offline"),
];

fn kind_of(key: &str) -> Kind {
    match key {
        "temperature" | "wall_time_s" | "time_slice_s" => Kind::Float,
        "seed" | "memory_cap" | "max_generations" => Kind::Int,
        "offline" => Kind::Bool,
        _ => Kind::Str,
    }
}

fn env_value(var: &str, key: &str, raw: &str) -> Result<Value, ForgeError> {
    let bad = |e: String| ForgeError::Config(format!("{var}={raw}: {e}"));
    Ok(match kind_of(key) {
        Kind::Str => Value::String(raw.to_string()),
        Kind::Float => Value::Float(raw.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?),
        Kind::Int => Value::Integer(raw.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?),
        Kind::Bool => Value::Boolean(raw.parse().map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?),
    })
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ForgeSettings {
    pub fn resolve(file_text: Option<&str>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ForgeError> {
        let Value::Table(mut table) =
            Value::try_from(ForgeSettings::default()).map_err(|e| ForgeError::Config(e.to_string()))?
        else {
            unreachable!("settings serialize to a table");
        };
        for (var, section, key) in ENV_VARS {
            if let Some(raw) = env(var) {
                let v = env_value(var, key, &raw)?;
                if let Some(Value::Table(t)) = table.get_mut(section) {
                    t.insert(key.to_string(), v);
                }
            }
        }
        if let Some(text) = file_text {
            let file: Table = toml::from_str(text).map_err(|e| ForgeError::Config(e.to_string()))?;
            merge(&mut table, file);
        }
        Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ForgeError::Config(e.to_string()))
    }

    pub fn from_process_env(file_text: Option<&str>) -> Result<Self, ForgeError> {
        Self::resolve(file_text, |k| std::env::var(k).ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn defaults_follow_the_reference_limits() {
        let s = ForgeSettings::resolve(None, env(&[])).unwrap();
        assert_eq!(s.limits.wall_time_s, 600.0);
        assert_eq!(s.limits.time_slice_s, 100.0);
        assert_eq!(s.limits.memory_cap, 16 * 1024 * 1024 * 1024);
    }

    #[test]
    fn file_beats_environment_beats_defaults() {
        let e = env(&[("GMP_MODEL", "from-env"), ("GMP_TIME_SLICE_S", "50")]);
        let s = ForgeSettings::resolve(Some("[endpoint]\nmodel = \"from-file\"\n"), e).unwrap();
        assert_eq!(s.endpoint.model, "from-file");
        assert_eq!(s.limits.time_slice_s, 50.0);
    }

    #[test]
    fn typos_are_rejected() {
        assert!(ForgeSettings::resolve(Some("[limits]\nwall_time = 3\n"), env(&[])).is_err());
        assert!(ForgeSettings::resolve(None, env(&[("GMP_MEMORY_CAP", "lots")])).is_err());
    }
}

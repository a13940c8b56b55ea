//! Flat TOML configuration: merging with command-line flags and echoing the
//! resolved set as `#` header lines that parse back as a config file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::CliError;

/// Keys that choose the network; setting any of them on the command line
/// discards all of them from the config file.
pub const NETWORK_SELECTORS: [&str; 3] = ["hypercube", "chain", "adjacency"];

/// A parsed config file split into its global keys and command keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub keys: Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Accepts a TOML file, or the output of an earlier run whose header
    /// starts with an echoed `# command = ...` line.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let source = if text.trim_start().starts_with("# command") { echo_to_toml(text) } else { text.to_string() };
        let mut keys: Table = source.parse().map_err(|e| CliError::Usage(format!("config is not valid TOML: {e}")))?;
        if let Some((key, _)) = keys.iter().find(|(_, v)| v.is_table()) {
            return Err(CliError::Usage(format!("config must be flat; `{key}` is a table")));
        }
        let command = match keys.remove("command") {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(v) => return Err(CliError::Usage(format!("config key `command` must be a string, got {v}"))),
        };
        let seed = match keys.remove("seed") {
            None => None,
            Some(Value::Integer(s)) if s >= 0 => Some(s as u64),
            Some(v) => return Err(CliError::Usage(format!("config key `seed` must be a nonnegative integer, got {v}"))),
        };
        Ok(ConfigFile { command, seed, keys })
    }
}

/// Recovers the config text from `# key = value` header lines. Lines of the
/// form `# # ...` carry derived values and are dropped.
pub fn echo_to_toml(text: &str) -> String {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.strip_prefix("# "))
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

fn to_table<T: Serialize>(value: &T) -> Result<Table, CliError> {
    Table::try_from(value).map_err(|e| CliError::Usage(format!("cannot represent arguments as config: {e}")))
}

/// Overlays command-line flags on config values. `selectors` names a group
/// of mutually exclusive keys that is taken from one source only.
pub fn merge<T>(flags: &T, config: &Table, selectors: &[&str]) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned,
{
    let flag_table = to_table(flags)?;
    let mut merged = config.clone();
    if selectors.iter().any(|k| flag_table.contains_key(*k)) {
        for k in selectors {
            merged.remove(*k);
        }
    }
    merged.extend(flag_table);
    let value: T = Value::Table(merged.clone())
        .try_into()
        .map_err(|e| CliError::Usage(format!("invalid config value: {e}")))?;
    let known = to_table(&value)?;
    if let Some(key) = merged.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::Usage(format!("unknown config key `{key}` for this command")));
    }
    Ok(value)
}

/// `# key = value` lines for the resolved run, plus `# # ...` lines for
/// derived quantities.
pub fn echo<T: Serialize>(command: &str, seed: u64, resolved: &T, derived: &[String]) -> Result<String, CliError> {
    let mut head = Table::new();
    head.insert("command".into(), Value::String(command.into()));
    head.insert("seed".into(), Value::Integer(seed as i64));
    let mut out = prefixed(&head)?;
    out.push_str(&prefixed(&to_table(resolved)?)?);
    for line in derived {
        out.push_str(&format!("# # {line}\n"));
    }
    Ok(out)
}

fn prefixed(table: &Table) -> Result<String, CliError> {
    let text = toml::to_string(table).map_err(|e| CliError::Usage(format!("cannot echo config: {e}")))?;
    Ok(text.lines().filter(|l| !l.is_empty()).map(|l| format!("# {l}\n")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, Default, Debug, PartialEq)]
    struct Probe {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chain: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hypercube: Option<String>,
        #[serde(default, rename = "N0", skip_serializing_if = "Option::is_none")]
        n0: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<Vec<usize>>,
    }

    #[test]
    fn flags_override_config() {
        let cfg = ConfigFile::parse("N0 = 6\ng0 = 2\nd = [3, 4]\nseed = 9\ncommand = \"fig2\"").unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.command.as_deref(), Some("fig2"));
        let flags = Probe { n0: Some(8), ..Probe::default() };
        let merged = merge(&flags, &cfg.keys, &NETWORK_SELECTORS).unwrap();
        assert_eq!(merged.n0, Some(8));
        // integers in the config are accepted for real-valued keys
        assert_eq!(merged.g0, Some(2.0));
        assert_eq!(merged.d, Some(vec![3, 4]));
    }

    #[test]
    fn selector_group_comes_from_one_source() {
        let cfg = ConfigFile::parse("chain = \"engineered\"").unwrap();
        let flags = Probe { hypercube: Some("theta=1,g=2".into()), ..Probe::default() };
        let merged = merge(&flags, &cfg.keys, &NETWORK_SELECTORS).unwrap();
        assert_eq!(merged.chain, None);
        assert_eq!(merged.hypercube.as_deref(), Some("theta=1,g=2"));
    }

    #[test]
    fn unknown_and_nested_keys_are_rejected() {
        let cfg = ConfigFile::parse("bogus = 1").unwrap();
        assert!(matches!(merge(&Probe::default(), &cfg.keys, &[]), Err(CliError::Usage(_))));
        assert!(ConfigFile::parse("[section]\nx = 1").is_err());
        assert!(ConfigFile::parse("seed = -1").is_err());
        assert!(ConfigFile::parse("not toml").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let resolved = Probe { chain: Some("engineered".into()), n0: Some(8), g0: Some(1.0), d: Some(vec![3, 5]), ..Probe::default() };
        let text = echo("fig2", 42, &resolved, &["T_N = 0.9".into()]).unwrap();
        assert!(text.lines().all(|l| l.starts_with("# ")));
        let csv = format!("{text}a,b\n1,2\n");
        let cfg = ConfigFile::parse(&csv).unwrap();
        assert_eq!(cfg.command.as_deref(), Some("fig2"));
        assert_eq!(cfg.seed, Some(42));
        let back: Probe = merge(&Probe::default(), &cfg.keys, &NETWORK_SELECTORS).unwrap();
        assert_eq!(back, resolved);
    }
}

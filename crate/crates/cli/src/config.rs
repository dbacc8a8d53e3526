//! `key = value` run configuration.
//!
//! A config file holds one `key = value` pair per line. Blank lines and lines
//! starting with `#` are ignored; keys are kebab-case and may appear once.
//! Settings resolve as built-in defaults, then the file, then command-line
//! flags.

use std::fmt;

/// A documented configuration key and its default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line in the config file, 0 when not tied to a line.
    pub line: usize,
    pub msg: String,
}

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self { line: 0, msg: msg.into() }
    }

    fn at(line: usize, msg: impl Into<String>) -> Self {
        Self { line, msg: msg.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.msg)
        } else {
            f.write_str(&self.msg)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Entries of a parsed config file, in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String, usize)>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.starts_with(|c: char| c.is_ascii_lowercase())
        && key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::at(line_no, format!("expected `key = value`, got `{line}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            if !valid_key(key) {
                return Err(ConfigError::at(line_no, format!("malformed key `{key}`")));
            }
            if let Some((_, _, first)) = entries.iter().find(|(k, _, _)| k == key) {
                return Err(ConfigError::at(line_no, format!("duplicate key `{key}` (first set on line {first})")));
            }
            entries.push((key.to_string(), value.to_string(), line_no));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read config `{path}`: {e}")))?;
        Self::parse(&text).map_err(|e| ConfigError::new(format!("{path}: {e}")))
    }
}

/// Fully resolved settings for one command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Settings {
    pub command: String,
    values: Vec<(&'static str, String)>,
}

impl Settings {
    /// Layers `file` and then `overrides` over the defaults of `keys`. Keys
    /// unknown to the command are rejected.
    pub fn resolve(
        command: &str,
        keys: &[Key],
        file: Option<&ConfigFile>,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let mut values: Vec<(&'static str, String)> = keys.iter().map(|k| (k.name, k.default.to_string())).collect();
        let mut set = |name: &str, value: &str, line: usize| -> Result<(), ConfigError> {
            match values.iter_mut().find(|(k, _)| *k == name) {
                Some(slot) => {
                    slot.1 = value.to_string();
                    Ok(())
                }
                None => Err(ConfigError::at(line, format!("unknown key `{name}` for `{command}`"))),
            }
        };
        if let Some(file) = file {
            for (k, v, line) in &file.entries {
                set(k, v, *line)?;
            }
        }
        for (k, v) in overrides {
            set(k, v, 0)?;
        }
        Ok(Self { command: command.to_string(), values })
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("`{key}` is not a key of `{}`", self.command))
    }

    pub fn str(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let s = self.raw(key);
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ConfigError::new(format!("`{key}` must be a finite number, got `{s}`"))),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let s = self.raw(key);
        s.parse()
            .map_err(|_| ConfigError::new(format!("`{key}` must be a non-negative integer, got `{s}`")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        let s = self.raw(key);
        s.parse()
            .map_err(|_| ConfigError::new(format!("`{key}` must be a non-negative integer, got `{s}`")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            s => Err(ConfigError::new(format!("`{key}` must be true or false, got `{s}`"))),
        }
    }

    /// Comma-separated numbers.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let s = self.raw(key);
        let out: Result<Vec<f64>, _> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .map(|v| v.ok_or_else(|| ConfigError::new(format!("`{key}` must be a list of numbers, got `{s}`"))))
            .collect();
        out
    }

    /// Comma-separated integers.
    pub fn i64_list(&self, key: &str) -> Result<Vec<i64>, ConfigError> {
        let s = self.raw(key);
        s.split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| ConfigError::new(format!("`{key}` must be a list of integers, got `{s}`")))
    }

    /// One of `choices`.
    pub fn choice(&self, key: &str, choices: &[&str]) -> Result<&str, ConfigError> {
        let s = self.raw(key);
        if choices.contains(&s) {
            Ok(s)
        } else {
            Err(ConfigError::new(format!("`{key}` must be one of {}, got `{s}`", choices.join(", "))))
        }
    }

    /// The settings as a config file that reproduces the run.
    pub fn echo(&self) -> String {
        let mut out = format!("# sps {}\n", self.command);
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: [Key; 3] = [
        Key { name: "c", default: "0.5", help: "" },
        Key { name: "max-iter", default: "10", help: "" },
        Key { name: "out", default: "out", help: "" },
    ];

    #[test]
    fn layers_defaults_file_and_flags() {
        let file = ConfigFile::parse("# comment\n\nc = 1.5\nmax-iter=20\n").unwrap();
        let s = Settings::resolve("x", &KEYS, Some(&file), &[("c".into(), "-2".into())]).unwrap();
        assert_eq!(s.f64("c").unwrap(), -2.0);
        assert_eq!(s.usize("max-iter").unwrap(), 20);
        assert_eq!(s.str("out"), "out");
    }

    #[test]
    fn echo_round_trips() {
        let s = Settings::resolve("x", &KEYS, None, &[("out".into(), "a b".into())]).unwrap();
        let again = Settings::resolve("x", &KEYS, Some(&ConfigFile::parse(&s.echo()).unwrap()), &[]).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rejects_bad_files() {
        for (text, line) in [("c = 1\nc = 2\n", 2), ("c 1\n", 1), ("C = 1\n", 1), (" = 1\n", 1)] {
            assert_eq!(ConfigFile::parse(text).unwrap_err().line, line, "{text:?}");
        }
        let file = ConfigFile::parse("\nnope = 1\n").unwrap();
        assert_eq!(Settings::resolve("x", &KEYS, Some(&file), &[]).unwrap_err().line, 2);
    }

    #[test]
    fn typed_getters_name_the_key() {
        let s = Settings::resolve("x", &KEYS, None, &[("c".into(), "inf".into())]).unwrap();
        assert!(s.f64("c").unwrap_err().msg.contains("`c`"));
        let s = Settings::resolve("x", &KEYS, None, &[("max-iter".into(), "-1".into())]).unwrap();
        assert!(s.usize("max-iter").is_err());
    }
}

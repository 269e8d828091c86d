//! Plain-text `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear at
//! most once.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_key_values(text: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("line {line}"), "expected key = value"))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::parse(
                format!("line {line}"),
                format!("invalid key {key:?}"),
            ));
        }
        if value.is_empty() {
            return Err(Error::parse(
                format!("line {line}"),
                format!("missing value for {key}"),
            ));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(Error::parse(
                format!("line {line}"),
                format!("duplicate key {key} (first on line {})", prev.line),
            ));
        }
        entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line,
        });
    }
    Ok(entries)
}

impl Entry {
    fn err(&self, what: &str) -> Error {
        Error::parse(
            format!("line {}", self.line),
            format!("{}: expected {what}, got {:?}", self.key, self.value),
        )
    }

    pub fn as_f64(&self) -> Result<f64> {
        self.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err("a finite number"))
    }

    pub fn as_usize(&self) -> Result<usize> {
        self.value
            .parse()
            .map_err(|_| self.err("a nonnegative integer"))
    }

    pub fn as_u64(&self) -> Result<u64> {
        self.value
            .parse()
            .map_err(|_| self.err("a nonnegative integer"))
    }

    pub fn as_usize_list(&self) -> Result<Vec<usize>> {
        self.value
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| self.err("a comma-separated list of integers"))
    }

    pub fn unknown(&self) -> Error {
        Error::parse(
            format!("line {}", self.line),
            format!("unknown key {}", self.key),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let e = parse_key_values("# c\n\n a = 1 \nb=x y\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].key, "a");
        assert_eq!(e[1].value, "x y");
        assert_eq!(e[1].line, 4);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_key_values("novalue").is_err());
        assert!(parse_key_values("a =").is_err());
        assert!(parse_key_values("a = 1\na = 2").is_err());
        assert!(parse_key_values("two words = 1").is_err());
    }

    #[test]
    fn typed_accessors() {
        let e = parse_key_values("x = 1e-5\nn = 3\nl = 4, 5,3\nbad = nan").unwrap();
        assert_eq!(e[0].as_f64().unwrap(), 1e-5);
        assert_eq!(e[1].as_usize().unwrap(), 3);
        assert_eq!(e[2].as_usize_list().unwrap(), vec![4, 5, 3]);
        assert!(e[3].as_f64().is_err());
    }
}

//! Line-oriented `key = value` text with optional `[section]` headers.
//!
//! Values are taken verbatim after trimming; one pair of surrounding double
//! quotes is removed. `#` starts a comment line. Keys may repeat (the
//! manifest lists one `file = ...` line per recording). Every typed getter
//! marks its key as used, and [`KvFile::finish`] rejects anything left over
//! so typos surface as errors.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KvError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("key `{key}` (line {line}): expected {expected}, got `{value}`")]
    Type {
        key: String,
        line: usize,
        expected: &'static str,
        value: String,
    },
    #[error("unknown key `{key}` (line {line})")]
    Unknown { key: String, line: usize },
    #[error("key `{key}` given more than once (line {line})")]
    Duplicate { key: String, line: usize },
    #[error("missing key `{0}`")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    /// `section.key`, or just `key` before any section header.
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Default)]
pub struct KvFile {
    entries: Vec<Entry>,
    used: RefCell<BTreeSet<usize>>,
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut section = String::new();
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some(inner) = s.strip_prefix('[') {
                let name = inner.strip_suffix(']').ok_or_else(|| KvError::Syntax {
                    line,
                    message: format!("unterminated section header `{s}`"),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| KvError::Syntax {
                line,
                message: format!("expected `key = value`, got `{s}`"),
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(KvError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            let key = if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            entries.push(Entry {
                key,
                value: unquote(v.trim()).to_string(),
                line,
            });
        }
        Ok(Self {
            entries,
            used: RefCell::default(),
        })
    }

    fn find(&self, key: &str) -> Result<Option<&Entry>, KvError> {
        let mut hits = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.key == key);
        let Some((i, first)) = hits.next() else {
            return Ok(None);
        };
        if let Some((_, dup)) = hits.next() {
            return Err(KvError::Duplicate {
                key: key.into(),
                line: dup.line,
            });
        }
        self.used.borrow_mut().insert(i);
        Ok(Some(first))
    }

    pub fn get_str(&self, key: &str) -> Result<Option<&str>, KvError> {
        Ok(self.find(key)?.map(|e| e.value.as_str()))
    }

    pub fn require_str(&self, key: &str) -> Result<&str, KvError> {
        self.get_str(key)?
            .ok_or_else(|| KvError::Missing(key.into()))
    }

    /// Parses the value with `FromStr`; `expected` names the type in errors.
    pub fn get<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, KvError> {
        let Some(e) = self.find(key)? else {
            return Ok(None);
        };
        e.value.parse().map(Some).map_err(|_| KvError::Type {
            key: key.into(),
            line: e.line,
            expected,
            value: e.value.clone(),
        })
    }

    /// Overwrites `slot` when the key is present.
    pub fn set<T: FromStr>(
        &self,
        key: &str,
        expected: &'static str,
        slot: &mut T,
    ) -> Result<(), KvError> {
        if let Some(v) = self.get(key, expected)? {
            *slot = v;
        }
        Ok(())
    }

    pub fn set_f64(&self, key: &str, slot: &mut f64) -> Result<(), KvError> {
        self.set(key, "a number", slot)
    }

    pub fn set_usize(&self, key: &str, slot: &mut usize) -> Result<(), KvError> {
        self.set(key, "a non-negative integer", slot)
    }

    pub fn set_bool(&self, key: &str, slot: &mut bool) -> Result<(), KvError> {
        self.set(key, "true or false", slot)
    }

    /// A pair written `a, b`.
    pub fn set_pair(&self, key: &str, slot: &mut (f64, f64)) -> Result<(), KvError> {
        let Some(e) = self.find(key)? else {
            return Ok(());
        };
        let err = || KvError::Type {
            key: key.into(),
            line: e.line,
            expected: "two numbers `a, b`",
            value: e.value.clone(),
        };
        let (a, b) = e.value.split_once(',').ok_or_else(err)?;
        *slot = (
            a.trim().parse().map_err(|_| err())?,
            b.trim().parse().map_err(|_| err())?,
        );
        Ok(())
    }

    /// All entries for a repeatable key, marked used.
    pub fn all(&self, key: &str) -> Vec<&Entry> {
        let mut used = self.used.borrow_mut();
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.key == key)
            .map(|(i, e)| {
                used.insert(i);
                e
            })
            .collect()
    }

    /// Errors on the first entry no getter asked for.
    pub fn finish(&self) -> Result<(), KvError> {
        let used = self.used.borrow();
        match self
            .entries
            .iter()
            .enumerate()
            .find(|(i, _)| !used.contains(i))
        {
            Some((_, e)) => Err(KvError::Unknown {
                key: e.key.clone(),
                line: e.line,
            }),
            None => Ok(()),
        }
    }
}

/// Appends `key = value`.
pub fn push_line(out: &mut String, key: &str, value: impl Display) {
    out.push_str(key);
    out.push_str(" = ");
    out.push_str(&value.to_string());
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_prefix_keys_and_quotes_are_stripped() {
        let kv = KvFile::parse("# c\ntop = 1\n[model]\nbackbone = LSTM\nname = \"a b\"\n").unwrap();
        assert_eq!(kv.get_str("top").unwrap(), Some("1"));
        assert_eq!(kv.get_str("model.backbone").unwrap(), Some("LSTM"));
        assert_eq!(kv.get_str("model.name").unwrap(), Some("a b"));
        kv.finish().unwrap();
    }

    #[test]
    fn leftover_keys_are_unknown() {
        let kv = KvFile::parse("[pretrain]\nlr = 0.1\nlearning_rate = 0.2\n").unwrap();
        let mut lr = 0.0;
        kv.set_f64("pretrain.lr", &mut lr).unwrap();
        assert_eq!(lr, 0.1);
        assert_eq!(
            kv.finish(),
            Err(KvError::Unknown {
                key: "pretrain.learning_rate".into(),
                line: 3
            })
        );
    }

    #[test]
    fn type_errors_name_the_key() {
        let kv = KvFile::parse("[pretrain]\nlr = \"fast\"\n").unwrap();
        let mut lr = 0.0;
        let err = kv.set_f64("pretrain.lr", &mut lr).unwrap_err();
        assert!(err.to_string().contains("pretrain.lr"), "{err}");
        assert!(err.to_string().contains("fast"));
    }

    #[test]
    fn pairs_and_duplicates() {
        let kv = KvFile::parse("r = 5, 10\nx = 1\nx = 2\n").unwrap();
        let mut r = (0.0, 0.0);
        kv.set_pair("r", &mut r).unwrap();
        assert_eq!(r, (5.0, 10.0));
        assert!(matches!(kv.get_str("x"), Err(KvError::Duplicate { .. })));
        assert_eq!(kv.all("x").len(), 2);
    }

    #[test]
    fn malformed_lines_are_syntax_errors() {
        assert!(matches!(
            KvFile::parse("just words"),
            Err(KvError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            KvFile::parse("[open"),
            Err(KvError::Syntax { .. })
        ));
    }
}

//! Flat `key = value` configuration text with dotted namespaces.
//!
//! ```text
//! # comment
//! world.seed = 42
//! nms.lambda = 0.5
//! ```

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Parsed key/value pairs. Keys are consumed as they are read so leftovers can be reported.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(k.to_owned(), v.to_owned()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_owned(), value.to_string());
    }

    /// Removes and parses `key` into `slot` when present.
    pub fn take<T>(&mut self, key: &str, slot: &mut T) -> Result<()>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(raw) = self.entries.remove(key) {
            *slot = raw
                .parse()
                .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{raw}`: {e}")))?;
        }
        Ok(())
    }

    /// Like [`KvMap::take`] for comma-separated lists.
    pub fn take_list<T>(&mut self, key: &str, slot: &mut Vec<T>) -> Result<()>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(raw) = self.entries.remove(key) {
            *slot = raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{s}`: {e}")))
                })
                .collect::<Result<_>>()?;
        }
        Ok(())
    }

    /// Errors if any key was never consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Config(format!("unknown key `{k}`"))),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical text: one sorted `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Writes a comma-separated list.
pub fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_consumes() {
        let mut kv = KvMap::parse("# hi\nworld.seed = 7 # trailing\n\n nms.lambda=0.4\nlist = 1, 2,3\n").unwrap();
        let mut seed = 0u64;
        let mut lambda = 0.5f64;
        let mut list: Vec<u32> = vec![];
        let mut missing = 9u8;
        kv.take("world.seed", &mut seed).unwrap();
        kv.take("nms.lambda", &mut lambda).unwrap();
        kv.take_list("list", &mut list).unwrap();
        kv.take("absent", &mut missing).unwrap();
        assert_eq!((seed, lambda, list, missing), (7, 0.4, vec![1, 2, 3], 9));
        kv.finish().unwrap();
    }

    #[test]
    fn reports_problems() {
        assert!(KvMap::parse("novalue").is_err());
        assert!(KvMap::parse("a=1\na=2").is_err());
        assert!(KvMap::parse("=1").is_err());
        let mut kv = KvMap::parse("a = x").unwrap();
        let mut n = 0u32;
        let err = kv.take("a", &mut n).unwrap_err();
        assert!(err.to_string().contains("`a`"));
        let kv = KvMap::parse("typo.key = 1").unwrap();
        assert!(kv.finish().unwrap_err().to_string().contains("typo.key"));
    }

    #[test]
    fn hash_is_order_independent() {
        let a = KvMap::parse("a=1\nb=2").unwrap();
        let b = KvMap::parse("b = 2\na = 1").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        assert_ne!(a.hash(), KvMap::parse("a=1\nb=3").unwrap().hash());
    }
}

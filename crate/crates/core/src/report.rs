//! Ordered key/value reports with a plain `key=value` serialization.

use std::fmt;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Int(BigInt),
    Rat(BigRational),
    Bool(bool),
    /// Classes, labels, lists and anything else; always a single line.
    Text(String),
}

impl Value {
    /// The value a kv line would read back as.
    pub fn infer(s: &str) -> Value {
        match s {
            "true" => return Value::Bool(true),
            "false" => return Value::Bool(false),
            _ => {}
        }
        if let Ok(n) = s.parse::<BigInt>() {
            if n.to_string() == s {
                return Value::Int(n);
            }
        }
        if let Some((a, b)) = s.split_once('/') {
            if let (Ok(n), Ok(d)) = (a.parse::<BigInt>(), b.parse::<BigInt>()) {
                if d > BigInt::one() {
                    let q = BigRational::new(n, d);
                    if q.to_string() == s {
                        return Value::Rat(q);
                    }
                }
            }
        }
        Value::Text(s.to_string())
    }

    fn normalize(self) -> Value {
        match self {
            Value::Rat(q) if q.denom().is_one() => Value::Int(q.numer().clone()),
            Value::Text(t) => {
                let t = t.split_whitespace().collect::<Vec<_>>().join(" ");
                Value::infer(&t)
            }
            v => v,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Rat(q) => write!(f, "{q}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(t) => f.write_str(t),
        }
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n.into())
    }
}

impl From<usize> for Value {
    fn from(n: usize) -> Self {
        Value::Int(n.into())
    }
}

impl From<BigInt> for Value {
    fn from(n: BigInt) -> Self {
        Value::Int(n)
    }
}

impl From<BigRational> for Value {
    fn from(q: BigRational) -> Self {
        Value::Rat(q)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("line {0}: expected key=value")]
    Malformed(usize),
    #[error("line {0}: duplicate key `{1}`")]
    Duplicate(usize, String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    entries: IndexMap<String, Value>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`; an existing key keeps its position.
    pub fn set(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        let key = key.into();
        assert!(!key.contains('=') && !key.contains('\n'), "bad report key `{key}`");
        self.entries.insert(key, value.into().normalize());
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.entries.iter()
    }

    /// Entries whose key starts with one of the prefixes, in order.
    pub fn filtered(&self, prefixes: &[String]) -> Report {
        let entries = self
            .entries
            .iter()
            .filter(|(k, _)| prefixes.iter().any(|p| k.starts_with(p.as_str())))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Report { entries }
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<Report, ReportError> {
        let mut entries = IndexMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ReportError::Malformed(i + 1))?;
            if k.is_empty() {
                return Err(ReportError::Malformed(i + 1));
            }
            if entries.insert(k.to_string(), Value::infer(v)).is_some() {
                return Err(ReportError::Duplicate(i + 1, k.to_string()));
            }
        }
        Ok(Report { entries })
    }

    /// Aligned two-column listing.
    pub fn to_text(&self) -> String {
        let width = self.entries.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.entries {
            let pad = width - k.chars().count();
            out.push_str(&format!("{k}{}  {v}\n", " ".repeat(pad)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let mut r = Report::new();
        r.set("e", 10i64);
        r.set("q", BigRational::new((-10).into(), 121.into()));
        r.set("whole", BigRational::new(6.into(), 3.into()));
        r.set("label", "CP²#7");
        r.set("ok", true);
        r.set("list", "-13  -2 -2");
        let text = r.to_kv();
        assert_eq!(text, "e=10\nq=-10/121\nwhole=2\nlabel=CP²#7\nok=true\nlist=-13 -2 -2\n");
        assert_eq!(Report::from_kv(&text).unwrap(), r);
        assert!(Report::from_kv("novalue\n").is_err());
        assert!(Report::from_kv("a=1\na=2\n").is_err());
    }

    #[test]
    fn text_that_looks_numeric_reads_back_equal() {
        let mut r = Report::new();
        r.set("a", "12");
        r.set("b", "3/6");
        r.set("c", "007");
        let back = Report::from_kv(&r.to_kv()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.get("a"), Some(&Value::Int(12.into())));
        assert_eq!(r.get("c"), Some(&Value::Text("007".into())));
    }
}

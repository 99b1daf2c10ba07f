//! Attribute domains and the schema file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered finite domain of one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttributeDomain {
    /// Integers in `[lo, hi)`.
    IntRange { lo: i64, hi: i64 },
    /// Explicit values in domain order.
    Categorical { values: Vec<String> },
    /// Real values in `[lo, hi)` cut into `bins` equal-width bins at ingestion.
    Binned { lo: f64, hi: f64, bins: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub domain: AttributeDomain,
}

impl Attribute {
    pub fn size(&self) -> usize {
        match &self.domain {
            AttributeDomain::IntRange { lo, hi } => (hi - lo).max(0) as usize,
            AttributeDomain::Categorical { values } => values.len(),
            AttributeDomain::Binned { bins, .. } => *bins,
        }
    }

    /// Position of a raw cell value in the ordered domain.
    pub fn position(&self, raw: &str) -> std::result::Result<usize, String> {
        let raw = raw.trim();
        match &self.domain {
            AttributeDomain::IntRange { lo, hi } => {
                let v: i64 = raw
                    .parse()
                    .map_err(|_| format!("cannot parse `{raw}` as an integer"))?;
                if v < *lo || v >= *hi {
                    return Err(format!("value {v} outside [{lo}, {hi})"));
                }
                Ok((v - lo) as usize)
            }
            AttributeDomain::Categorical { values } => values
                .iter()
                .position(|c| c == raw)
                .ok_or_else(|| format!("`{raw}` is not a declared category")),
            AttributeDomain::Binned { lo, hi, bins } => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| format!("cannot parse `{raw}` as a number"))?;
                if !(v >= *lo && v < *hi) {
                    return Err(format!("value {v} outside [{lo}, {hi})"));
                }
                let bin = ((v - lo) / (hi - lo) * *bins as f64).floor() as usize;
                Ok(bin.min(bins - 1))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub attributes: Vec<Attribute>,
}

impl DomainSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let schema = Self { attributes };
        schema.validate()?;
        Ok(schema)
    }

    /// Single integer attribute `[0, n)`; handy for synthetic data.
    pub fn single(name: &str, n: usize) -> Self {
        Self {
            attributes: vec![Attribute {
                name: name.to_string(),
                domain: AttributeDomain::IntRange { lo: 0, hi: n as i64 },
            }],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.attributes.is_empty() {
            return Err(Error::Schema("no attributes declared".into()));
        }
        for (i, a) in self.attributes.iter().enumerate() {
            if a.size() == 0 {
                return Err(Error::Schema(format!("attribute `{}` has an empty domain", a.name)));
            }
            if let AttributeDomain::Binned { lo, hi, .. } = a.domain {
                if !(lo < hi) {
                    return Err(Error::Schema(format!("attribute `{}`: lo must be below hi", a.name)));
                }
            }
            if self.attributes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Schema(format!("duplicate attribute `{}`", a.name)));
            }
        }
        Ok(())
    }

    pub fn attribute(&self, name: &str) -> Result<&Attribute> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    /// Full domain size, the product of attribute sizes.
    pub fn size(&self) -> usize {
        self.attributes.iter().map(Attribute::size).product()
    }
}

/// Canonical key of an attribute set: names sorted and deduplicated.
pub type AttrSet = Vec<String>;

pub fn attr_set<S: AsRef<str>>(names: &[S]) -> AttrSet {
    let mut v: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
    v.sort();
    v.dedup();
    v
}

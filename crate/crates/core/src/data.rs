//! In-memory counting store: CSV ingestion and per-attribute-set data vectors.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::schema::{AttrSet, DomainSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Any out-of-domain or unparseable cell aborts ingestion.
    #[default]
    Strict,
    /// Offending rows are dropped and counted.
    Lenient,
}

/// Records stored column-wise as domain positions.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: DomainSchema,
    columns: Vec<Vec<u32>>,
    dropped: usize,
}

impl Dataset {
    /// Builds a dataset from rows of domain positions, one entry per schema attribute.
    pub fn from_positions(schema: DomainSchema, rows: &[Vec<usize>]) -> Result<Self> {
        schema.validate()?;
        let d = schema.attributes.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dimension(format!("row {r} has {} values, expected {d}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                let attr = &schema.attributes[j];
                if v >= attr.size() {
                    return Err(Error::Data {
                        row: r + 1,
                        column: attr.name.clone(),
                        reason: format!("position {v} outside domain of size {}", attr.size()),
                    });
                }
                columns[j].push(v as u32);
            }
        }
        Ok(Self { schema, columns, dropped: 0 })
    }

    pub fn ingest_csv(path: impl AsRef<Path>, schema: DomainSchema, mode: Strictness) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?, schema, mode)
    }

    pub fn from_reader<R: Read>(reader: R, schema: DomainSchema, mode: Strictness) -> Result<Self> {
        schema.validate()?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() {
            return Err(Error::Schema("empty file: no header row".into()));
        }
        let mut col_of = Vec::with_capacity(schema.attributes.len());
        for a in &schema.attributes {
            let idx = headers
                .iter()
                .position(|h| h.trim() == a.name)
                .ok_or_else(|| Error::Schema(format!("missing column `{}`", a.name)))?;
            col_of.push(idx);
        }

        let mut columns = vec![Vec::new(); schema.attributes.len()];
        let mut dropped = 0;
        let mut seen = 0;
        let mut row = vec![0u32; schema.attributes.len()];
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            seen += 1;
            let mut bad = None;
            for (j, a) in schema.attributes.iter().enumerate() {
                let cell = rec.get(col_of[j]).unwrap_or("");
                match a.position(cell) {
                    Ok(p) => row[j] = p as u32,
                    Err(reason) => {
                        bad = Some(Error::Data { row: r + 1, column: a.name.clone(), reason });
                        break;
                    }
                }
            }
            match (bad, mode) {
                (Some(e), Strictness::Strict) => return Err(e),
                (Some(_), Strictness::Lenient) => dropped += 1,
                (None, _) => {
                    for (c, &v) in columns.iter_mut().zip(&row) {
                        c.push(v);
                    }
                }
            }
        }
        if seen == 0 {
            return Err(Error::Schema("empty file: no records".into()));
        }
        Ok(Self { schema, columns, dropped })
    }

    pub fn schema(&self) -> &DomainSchema {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Rows skipped in lenient mode.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Marginal counts over `attrs` in row-major order of the sorted attribute list.
    pub fn materialize(&self, attrs: &AttrSet) -> Result<DataVector> {
        let mut idx = Vec::with_capacity(attrs.len());
        let mut sizes = Vec::with_capacity(attrs.len());
        for name in attrs {
            let i = self.schema.index_of(name)?;
            idx.push(i);
            sizes.push(self.schema.attributes[i].size());
        }
        let n: usize = sizes.iter().product();
        let mut counts = vec![0u64; n];
        for r in 0..self.row_count() {
            let mut flat = 0;
            for (&i, &s) in idx.iter().zip(&sizes) {
                flat = flat * s + self.columns[i][r] as usize;
            }
            counts[flat] += 1;
        }
        Ok(DataVector { attrs: attrs.clone(), sizes, counts })
    }
}

/// Raw frequency vector over the flattened domain of an attribute set.
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector {
    pub attrs: AttrSet,
    pub sizes: Vec<usize>,
    pub counts: Vec<u64>,
}

impl DataVector {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Exact count over a set of flat domain cells.
    pub fn sum_over(&self, cells: &[usize]) -> u64 {
        cells.iter().map(|&c| self.counts[c]).sum()
    }
}

/// Lazily materialized data vectors keyed by sorted attribute set.
#[derive(Debug, Default)]
pub struct VectorRegistry {
    vectors: RwLock<HashMap<AttrSet, Arc<DataVector>>>,
}

impl VectorRegistry {
    pub fn get(&self, data: &Dataset, attrs: &AttrSet) -> Result<Arc<DataVector>> {
        if let Some(v) = self.vectors.read().expect("registry lock").get(attrs) {
            return Ok(v.clone());
        }
        let v = Arc::new(data.materialize(attrs)?);
        let mut w = self.vectors.write().expect("registry lock");
        Ok(w.entry(attrs.clone()).or_insert(v).clone())
    }

    pub fn len(&self) -> usize {
        self.vectors.read().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

//! Paged queries and CSV export over vulnerability-store datasets.

use crate::state::Direction;
use geovuln::tabular::{Dataset, VulnerabilityStore};
use geovuln::Value;
use serde::Serialize;
use std::cmp::Ordering;
use thiserror::Error;

pub const GEOID: &str = "GEOID";
pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("dataset not found")]
    UnknownDataset,
    #[error("unknown sort column {0}")]
    UnknownColumn(String),
    #[error("page_size must be between 1 and 1000")]
    PageSize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableQuery {
    pub dataset: String,
    pub sort_column: Option<String>,
    pub direction: Direction,
    pub search: Option<String>,
    pub page: usize,
    pub page_size: usize,
}

impl TableQuery {
    pub fn new(dataset: &str) -> Self {
        TableQuery {
            dataset: dataset.to_string(),
            sort_column: None,
            direction: Direction::Asc,
            search: None,
            page: 0,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TablePage {
    pub dataset: String,
    pub columns: Vec<String>,
    pub total_matching: usize,
    pub page: usize,
    pub page_size: usize,
    /// GEOID followed by one value per metric.
    pub rows: Vec<Vec<Value>>,
}

/// Orders non-null values: booleans, then numbers, then text.
fn compare_present(a: &Value, b: &Value) -> Ordering {
    fn rank(v: &Value) -> u8 {
        match v {
            Value::Bool(_) => 0,
            Value::Number(_) => 1,
            Value::Text(_) => 2,
            Value::Null => 3,
        }
    }
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Number(x), Value::Number(y)) => x.total_cmp(y),
        (Value::Text(x), Value::Text(y)) => x.cmp(y),
        _ => rank(a).cmp(&rank(b)),
    }
}

fn matches(geoid: &str, values: &[Value], needle: &str) -> bool {
    geoid.to_lowercase().contains(needle)
        || values
            .iter()
            .any(|v| !matches!(v, Value::Null) && v.render().to_lowercase().contains(needle))
}

/// Matching records in query order, as `(geoid, values)` pairs.
pub fn select<'a>(
    dataset: &'a Dataset,
    q: &TableQuery,
) -> Result<Vec<(&'a String, &'a Vec<Value>)>, TableError> {
    let column = match q.sort_column.as_deref() {
        None | Some(GEOID) => None,
        Some(c) => Some(
            dataset
                .metrics
                .iter()
                .position(|m| m == c)
                .ok_or_else(|| TableError::UnknownColumn(c.to_string()))?,
        ),
    };
    let needle = q
        .search
        .as_deref()
        .map(|s| s.trim().to_lowercase())
        .filter(|s| !s.is_empty());
    let mut rows: Vec<_> = dataset
        .records
        .iter()
        .filter(|(g, v)| needle.as_deref().is_none_or(|n| matches(g, v, n)))
        .collect();

    let desc = q.direction == Direction::Desc;
    rows.sort_by(|(ga, va), (gb, vb)| {
        let primary = match column {
            None => {
                let o = ga.cmp(gb);
                return if desc { o.reverse() } else { o };
            }
            Some(i) => match (&va[i], &vb[i]) {
                (Value::Null, Value::Null) => Ordering::Equal,
                (Value::Null, _) => Ordering::Greater,
                (_, Value::Null) => Ordering::Less,
                (a, b) => {
                    let o = compare_present(a, b);
                    if desc {
                        o.reverse()
                    } else {
                        o
                    }
                }
            },
        };
        primary.then_with(|| ga.cmp(gb))
    });
    Ok(rows)
}

fn dataset<'a>(store: &'a VulnerabilityStore, q: &TableQuery) -> Result<&'a Dataset, TableError> {
    store
        .datasets
        .get(&q.dataset)
        .ok_or(TableError::UnknownDataset)
}

pub fn columns(dataset: &Dataset) -> Vec<String> {
    std::iter::once(GEOID.to_string())
        .chain(dataset.metrics.iter().cloned())
        .collect()
}

pub fn query_table(store: &VulnerabilityStore, q: &TableQuery) -> Result<TablePage, TableError> {
    if !(1..=MAX_PAGE_SIZE).contains(&q.page_size) {
        return Err(TableError::PageSize);
    }
    let ds = dataset(store, q)?;
    let rows = select(ds, q)?;
    let total_matching = rows.len();
    let page_rows = rows
        .into_iter()
        .skip(q.page.saturating_mul(q.page_size))
        .take(q.page_size)
        .map(|(g, v)| {
            std::iter::once(Value::Text(g.clone()))
                .chain(v.iter().cloned())
                .collect()
        })
        .collect();
    Ok(TablePage {
        dataset: q.dataset.clone(),
        columns: columns(ds),
        total_matching,
        page: q.page,
        page_size: q.page_size,
        rows: page_rows,
    })
}

/// Every matching row as RFC 4180 CSV, ignoring pagination.
pub fn export_csv(store: &VulnerabilityStore, q: &TableQuery) -> Result<Vec<u8>, TableError> {
    let ds = dataset(store, q)?;
    let rows = select(ds, q)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(columns(ds)).expect("in-memory write");
    for (g, v) in rows {
        w.write_record(std::iter::once(g.clone()).chain(v.iter().map(Value::render)))
            .expect("in-memory write");
    }
    Ok(w.into_inner().expect("in-memory flush"))
}

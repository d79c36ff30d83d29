//! Census CSV normalization and consolidation into the vulnerability store.
//!
//! The pipeline is `clean_csv` → `drop_statistical_columns` →
//! `unpivot_double_headers` → `consolidate`. Each step is a pure function
//! over [`Table`].

use crate::geom::{format_number, Value};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("empty CSV")]
    Empty,
    #[error("row {row} has {cells} cells, expected {expected}")]
    Ragged {
        row: u64,
        cells: usize,
        expected: usize,
    },
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("CSV syntax error: {0}")]
    Syntax(String),
    #[error("ambiguous column family {0}")]
    AmbiguousFamily(String),
    #[error("unknown id column {0}")]
    UnknownIdColumn(String),
    #[error("no data columns remain")]
    NoDataColumns,
    #[error("invalid deny pattern '{0}' (expected prefix:TEXT or suffix:TEXT)")]
    BadPattern(String),
    #[error("dataset {0} lacks GEOID")]
    MissingGeoid(String),
    #[error("invalid GEOID '{geoid}' in dataset {dataset}")]
    InvalidGeoid { dataset: String, geoid: String },
    #[error("malformed vulnerability store: {0}")]
    BadStore(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<Value>>) -> Result<Self, TableError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(TableError::DuplicateColumn(c.clone()));
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(TableError::Ragged {
                    row: i as u64 + 1,
                    cells: r.len(),
                    expected: columns.len(),
                });
            }
        }
        Ok(Table { columns, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// RFC 4180 text; numbers use their shortest form, nulls are empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Value::render))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// Columns kept as text even when their cells look numeric.
#[derive(Debug, Clone)]
pub struct CleanOptions {
    pub text_columns: Vec<String>,
}

impl Default for CleanOptions {
    fn default() -> Self {
        CleanOptions {
            text_columns: vec!["GEOID".to_string()],
        }
    }
}

fn strip_controls(s: &str) -> String {
    s.chars()
        .filter(|&c| c == '\t' || !(c.is_control() || c == '\u{feff}'))
        .collect()
}

/// Parses digits with an optional sign, thousands separators and one decimal
/// point. Values with a redundant leading zero stay text (codes like `0123`).
fn parse_numeric(s: &str) -> Option<f64> {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if let Some(f) = frac {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    let int_ok = if int.contains(',') {
        let groups: Vec<&str> = int.split(',').collect();
        (1..=3).contains(&groups[0].len())
            && groups
                .iter()
                .all(|g| !g.is_empty() && g.bytes().all(|b| b.is_ascii_digit()))
            && groups[1..].iter().all(|g| g.len() == 3)
    } else {
        int.bytes().all(|b| b.is_ascii_digit()) && !(int.is_empty() && frac.is_none())
    };
    if !int_ok || (int.len() > 1 && int.starts_with('0')) {
        return None;
    }
    s.replace(',', "")
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
}

pub fn clean_csv(text: &str) -> Result<Table, TableError> {
    clean_csv_with(text, &CleanOptions::default())
}

pub fn clean_csv_with(text: &str, options: &CleanOptions) -> Result<Table, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| TableError::Syntax(e.to_string()))?,
        None => return Err(TableError::Empty),
    };
    let columns: Vec<String> = header
        .iter()
        .map(|h| strip_controls(h).trim().to_string())
        .collect();
    let text_cols: Vec<bool> = columns
        .iter()
        .map(|c| {
            options
                .text_columns
                .iter()
                .any(|t| t.eq_ignore_ascii_case(c))
        })
        .collect();

    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| TableError::Syntax(e.to_string()))?;
        if rec.len() != columns.len() {
            return Err(TableError::Ragged {
                row: rec.position().map(|p| p.line()).unwrap_or(0),
                cells: rec.len(),
                expected: columns.len(),
            });
        }
        let row = rec
            .iter()
            .zip(&text_cols)
            .map(|(cell, &as_text)| {
                let cleaned = strip_controls(cell);
                let cell = cleaned.trim();
                if cell.is_empty() {
                    Value::Null
                } else if let Some(n) = (!as_text).then(|| parse_numeric(cell)).flatten() {
                    Value::Number(n)
                } else {
                    Value::Text(cell.to_string())
                }
            })
            .collect();
        rows.push(row);
    }
    Table::new(columns, rows)
}

/// Splits `Base_TOKEN` into `(Base, TOKEN)` when the token is alphanumeric.
fn split_suffix(name: &str) -> Option<(&str, &str)> {
    let (base, token) = name.rsplit_once('_')?;
    (!base.is_empty() && !token.is_empty() && token.bytes().all(|b| b.is_ascii_alphanumeric()))
        .then_some((base, token))
}

pub const GROUP_COLUMN: &str = "group";

/// Turns column families such as `Population_A`, `Population_B` into one
/// `Population` column plus a `group` column holding the suffix token.
///
/// A family is a base name shared by at least two suffixed columns. Tokens
/// missing from a family yield null cells.
pub fn unpivot_double_headers(t: &Table, id_columns: &[&str]) -> Result<Table, TableError> {
    let id_idx: Vec<usize> = id_columns
        .iter()
        .map(|c| {
            t.column_index(c)
                .ok_or_else(|| TableError::UnknownIdColumn(c.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut family_sizes: HashMap<&str, usize> = HashMap::new();
    for (i, c) in t.columns.iter().enumerate() {
        if id_idx.contains(&i) {
            continue;
        }
        if let Some((base, _)) = split_suffix(c) {
            *family_sizes.entry(base).or_default() += 1;
        }
    }
    let plain: HashSet<&str> = t
        .columns
        .iter()
        .enumerate()
        .filter(|(i, _)| !id_idx.contains(i))
        .map(|(_, c)| c.as_str())
        .collect();
    // An unsuffixed `X` next to any `X_token` cannot be placed unambiguously.
    let mut ambiguous: Vec<&str> = family_sizes
        .keys()
        .copied()
        .filter(|b| plain.contains(b))
        .collect();
    ambiguous.sort_unstable();
    if let Some(b) = ambiguous.first() {
        return Err(TableError::AmbiguousFamily(b.to_string()));
    }
    let is_family = |base: &str| family_sizes.get(base).is_some_and(|&n| n >= 2);
    if !t
        .columns
        .iter()
        .filter_map(|c| split_suffix(c))
        .any(|(b, _)| is_family(b))
    {
        return Ok(t.clone());
    }
    if t.columns.iter().any(|c| c == GROUP_COLUMN) {
        return Err(TableError::DuplicateColumn(GROUP_COLUMN.to_string()));
    }

    // Output layout: ids, group, then remaining columns in first-seen order.
    enum Slot<'a> {
        Carried(usize),
        Family(&'a str),
    }
    let mut tokens: Vec<&str> = Vec::new();
    let mut slots: Vec<Slot> = Vec::new();
    let mut out_columns: Vec<String> = id_columns.iter().map(|s| s.to_string()).collect();
    out_columns.push(GROUP_COLUMN.to_string());
    let mut family_cells: HashMap<(&str, &str), usize> = HashMap::new();
    for (i, c) in t.columns.iter().enumerate() {
        if id_idx.contains(&i) {
            continue;
        }
        match split_suffix(c).filter(|(b, _)| is_family(b)) {
            Some((base, token)) => {
                if !tokens.contains(&token) {
                    tokens.push(token);
                }
                family_cells.insert((base, token), i);
                if !out_columns.iter().any(|o| o == base) {
                    out_columns.push(base.to_string());
                    slots.push(Slot::Family(base));
                }
            }
            None => {
                if out_columns.iter().any(|o| o == c) {
                    return Err(TableError::DuplicateColumn(c.clone()));
                }
                out_columns.push(c.clone());
                slots.push(Slot::Carried(i));
            }
        }
    }

    let mut rows = Vec::with_capacity(t.rows.len() * tokens.len());
    for row in &t.rows {
        for token in &tokens {
            let mut out: Vec<Value> = id_idx.iter().map(|&i| row[i].clone()).collect();
            out.push(Value::Text(token.to_string()));
            for slot in &slots {
                out.push(match slot {
                    Slot::Carried(i) => row[*i].clone(),
                    Slot::Family(base) => family_cells
                        .get(&(*base, *token))
                        .map(|&i| row[i].clone())
                        .unwrap_or(Value::Null),
                });
            }
            rows.push(out);
        }
    }
    Table::new(out_columns, rows)
}

/// Case-insensitive column-name pattern for statistical columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DenyPattern {
    Prefix(String),
    Suffix(String),
}

impl DenyPattern {
    pub fn matches(&self, name: &str) -> bool {
        let name = name.to_ascii_lowercase();
        match self {
            DenyPattern::Prefix(p) => name.starts_with(&p.to_ascii_lowercase()),
            DenyPattern::Suffix(s) => name.ends_with(&s.to_ascii_lowercase()),
        }
    }
}

impl std::str::FromStr for DenyPattern {
    type Err = TableError;
    fn from_str(s: &str) -> Result<Self, TableError> {
        match s.split_once(':') {
            Some(("prefix", p)) if !p.is_empty() => Ok(DenyPattern::Prefix(p.to_string())),
            Some(("suffix", p)) if !p.is_empty() => Ok(DenyPattern::Suffix(p.to_string())),
            _ => Err(TableError::BadPattern(s.to_string())),
        }
    }
}

impl TryFrom<String> for DenyPattern {
    type Error = TableError;
    fn try_from(s: String) -> Result<Self, TableError> {
        s.parse()
    }
}

impl From<DenyPattern> for String {
    fn from(p: DenyPattern) -> String {
        match p {
            DenyPattern::Prefix(s) => format!("prefix:{s}"),
            DenyPattern::Suffix(s) => format!("suffix:{s}"),
        }
    }
}

pub fn default_deny_patterns() -> Vec<DenyPattern> {
    vec![
        DenyPattern::Suffix("_MOE".into()),
        DenyPattern::Suffix("_EST".into()),
        DenyPattern::Prefix("MarginOfError".into()),
    ]
}

/// Removes estimator / margin-of-error columns matching any pattern.
pub fn drop_statistical_columns(t: &Table, patterns: &[DenyPattern]) -> Result<Table, TableError> {
    let keep: Vec<usize> = (0..t.columns.len())
        .filter(|&i| !patterns.iter().any(|p| p.matches(&t.columns[i])))
        .collect();
    if keep.is_empty() {
        return Err(TableError::NoDataColumns);
    }
    Ok(Table {
        columns: keep.iter().map(|&i| t.columns[i].clone()).collect(),
        rows: t
            .rows
            .iter()
            .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub label: String,
    pub metrics: Vec<String>,
    /// GEOID → one value per metric, aligned with `metrics`.
    pub records: BTreeMap<String, Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityStore {
    pub version: u32,
    pub datasets: BTreeMap<String, Dataset>,
}

impl Default for VulnerabilityStore {
    fn default() -> Self {
        VulnerabilityStore {
            version: 1,
            datasets: BTreeMap::new(),
        }
    }
}

impl VulnerabilityStore {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("store serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, TableError> {
        let store: VulnerabilityStore =
            serde_json::from_slice(bytes).map_err(|e| TableError::BadStore(e.to_string()))?;
        if store.version != 1 {
            return Err(TableError::BadStore(format!(
                "unsupported version {}",
                store.version
            )));
        }
        for (id, ds) in &store.datasets {
            if let Some((g, _)) = ds.records.iter().find(|(_, v)| v.len() != ds.metrics.len()) {
                return Err(TableError::BadStore(format!(
                    "record {g} in {id} does not match its metrics"
                )));
            }
        }
        Ok(store)
    }
}

pub fn is_block_group_geoid(s: &str) -> bool {
    s.len() == 12 && s.bytes().all(|b| b.is_ascii_digit())
}

/// Merges tables into one store keyed by GEOID. Later duplicate rows win;
/// the second return value counts them.
pub fn consolidate(
    tables: &BTreeMap<String, Table>,
    geoid_column: &str,
) -> Result<(VulnerabilityStore, usize), TableError> {
    let mut store = VulnerabilityStore::default();
    let mut duplicates = 0;
    for (id, table) in tables {
        let g = table
            .column_index(geoid_column)
            .ok_or_else(|| TableError::MissingGeoid(id.clone()))?;
        let metrics: Vec<String> = table
            .columns
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != g)
            .map(|(_, c)| c.clone())
            .collect();
        let mut records = BTreeMap::new();
        for row in &table.rows {
            let geoid = match &row[g] {
                Value::Text(s) => s.clone(),
                Value::Number(n) if n.fract() == 0.0 => format_number(*n),
                other => other.render(),
            };
            if !is_block_group_geoid(&geoid) {
                return Err(TableError::InvalidGeoid {
                    dataset: id.clone(),
                    geoid,
                });
            }
            let values = row
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != g)
                .map(|(_, v)| v.clone())
                .collect();
            if records.insert(geoid, values).is_some() {
                duplicates += 1;
            }
        }
        store.datasets.insert(
            id.clone(),
            Dataset {
                label: id.clone(),
                metrics,
                records,
            },
        );
    }
    Ok((store, duplicates))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(cols: &[&str], rows: Vec<Vec<Value>>) -> Table {
        Table::new(cols.iter().map(|s| s.to_string()).collect(), rows).unwrap()
    }

    fn txt(s: &str) -> Value {
        Value::Text(s.into())
    }

    fn num(n: f64) -> Value {
        Value::Number(n)
    }

    #[test]
    fn trims_and_parses_thousands() {
        let table = clean_csv("GEOID,POP\n\"150010201001\",\" 1,234 \"\n").unwrap();
        assert_eq!(table.columns, ["GEOID", "POP"]);
        assert_eq!(table.rows, vec![vec![txt("150010201001"), num(1234.0)]]);
    }

    #[test]
    fn strips_control_characters() {
        let table = clean_csv("NAME\n\x07abc\n").unwrap();
        assert_eq!(table.rows[0][0], txt("abc"));
    }

    #[test]
    fn ragged_row() {
        let err = clean_csv("A,B,C\n1,2\n").unwrap_err();
        assert_eq!(err.to_string(), "row 2 has 2 cells, expected 3");
    }

    #[test]
    fn duplicate_header() {
        assert_eq!(
            clean_csv("A,B,A\n1,2,3\n").unwrap_err().to_string(),
            "duplicate column A"
        );
    }

    #[test]
    fn numeric_grammar() {
        assert_eq!(parse_numeric("-12.5"), Some(-12.5));
        assert_eq!(parse_numeric("+3"), Some(3.0));
        assert_eq!(parse_numeric("1,234,567.25"), Some(1234567.25));
        assert_eq!(parse_numeric("0.75"), Some(0.75));
        assert_eq!(parse_numeric("0"), Some(0.0));
        assert_eq!(parse_numeric(".5"), Some(0.5));
        assert_eq!(parse_numeric("0123"), None);
        assert_eq!(parse_numeric("12,34"), None);
        assert_eq!(parse_numeric("1.2.3"), None);
        assert_eq!(parse_numeric("1e5"), None);
        assert_eq!(parse_numeric("-"), None);
        assert_eq!(parse_numeric("12."), None);
    }

    #[test]
    fn empty_cells_are_null() {
        let table = clean_csv("A,B\n , x\n").unwrap();
        assert_eq!(table.rows[0], vec![Value::Null, txt("x")]);
    }

    #[test]
    fn clean_is_idempotent_on_output() {
        let once =
            clean_csv("GEOID,POP,NOTE\n150010201001,\"1,234\",\" hi \"\n150010201002,,0123\n")
                .unwrap();
        let twice = clean_csv(&once.to_csv()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn unpivot_population_suffixes() {
        let table = t(
            &["GEOID", "Population_A", "Population_B"],
            vec![vec![txt("G1"), num(10.), num(20.)]],
        );
        let out = unpivot_double_headers(&table, &["GEOID"]).unwrap();
        assert_eq!(out.columns, ["GEOID", "group", "Population"]);
        assert_eq!(
            out.rows,
            vec![
                vec![txt("G1"), txt("A"), num(10.)],
                vec![txt("G1"), txt("B"), num(20.)]
            ]
        );
    }

    #[test]
    fn unpivot_without_families_is_identity() {
        let table = t(
            &["GEOID", "POP", "Median_Income"],
            vec![vec![txt("G1"), num(1.), num(2.)]],
        );
        assert_eq!(unpivot_double_headers(&table, &["GEOID"]).unwrap(), table);
    }

    #[test]
    fn unpivot_ambiguous_family() {
        let table = t(&["GEOID", "Population", "Population_A"], vec![]);
        assert_eq!(
            unpivot_double_headers(&table, &["GEOID"])
                .unwrap_err()
                .to_string(),
            "ambiguous column family Population"
        );
    }

    #[test]
    fn unpivot_carries_plain_columns_and_fills_gaps() {
        let table = t(
            &[
                "GEOID", "NAME", "Pop_1", "Pop_2", "Inc_1", "Inc_2", "Age_1", "Age_3",
            ],
            vec![vec![
                txt("G1"),
                txt("Hilo"),
                num(1.),
                num(2.),
                num(3.),
                num(4.),
                num(5.),
                num(6.),
            ]],
        );
        let out = unpivot_double_headers(&table, &["GEOID"]).unwrap();
        assert_eq!(out.columns, ["GEOID", "group", "NAME", "Pop", "Inc", "Age"]);
        assert_eq!(out.rows.len(), 3);
        assert_eq!(
            out.rows[1],
            vec![
                txt("G1"),
                txt("2"),
                txt("Hilo"),
                num(2.),
                num(4.),
                Value::Null
            ]
        );
        assert_eq!(
            out.rows[2],
            vec![
                txt("G1"),
                txt("3"),
                txt("Hilo"),
                Value::Null,
                Value::Null,
                num(6.)
            ]
        );
    }

    #[test]
    fn drop_examples() {
        let pats = default_deny_patterns();
        let table = t(
            &["GEOID", "POP", "POP_MOE"],
            vec![vec![txt("G"), num(1.), num(0.1)]],
        );
        let out = drop_statistical_columns(&table, &pats).unwrap();
        assert_eq!(out.columns, ["GEOID", "POP"]);
        assert_eq!(out.rows[0], vec![txt("G"), num(1.)]);

        let plain = t(&["GEOID", "POP"], vec![]);
        assert_eq!(drop_statistical_columns(&plain, &pats).unwrap(), plain);

        let stats = t(&["A_MOE", "b_est", "marginoferror_x"], vec![]);
        assert_eq!(
            drop_statistical_columns(&stats, &pats)
                .unwrap_err()
                .to_string(),
            "no data columns remain"
        );
    }

    #[test]
    fn deny_pattern_parsing() {
        assert_eq!(
            "suffix:_MOE".parse::<DenyPattern>().unwrap(),
            DenyPattern::Suffix("_MOE".into())
        );
        assert!("contains:x".parse::<DenyPattern>().is_err());
        assert!("prefix:".parse::<DenyPattern>().is_err());
    }

    fn geoid(n: u32) -> Value {
        txt(&format!("15001020{n:04}"))
    }

    #[test]
    fn consolidate_examples() {
        let mut tables = BTreeMap::new();
        tables.insert(
            "housing".to_string(),
            t(&["GEOID", "RENT"], vec![vec![geoid(1), num(900.)]]),
        );
        tables.insert(
            "people".to_string(),
            t(&["GEOID", "POP"], vec![vec![geoid(1), num(5.)]]),
        );
        let (store, warnings) = consolidate(&tables, "GEOID").unwrap();
        assert_eq!(warnings, 0);
        assert_eq!(store.datasets.len(), 2);
        assert_eq!(store.datasets["people"].metrics, ["POP"]);

        let mut dup = BTreeMap::new();
        dup.insert(
            "people".to_string(),
            t(
                &["GEOID", "POP"],
                vec![vec![geoid(1), num(5.)], vec![geoid(1), num(7.)]],
            ),
        );
        let (store, warnings) = consolidate(&dup, "GEOID").unwrap();
        assert_eq!(warnings, 1);
        assert_eq!(
            store.datasets["people"].records["150010200001"],
            vec![num(7.)]
        );

        let (empty, _) = consolidate(&BTreeMap::new(), "GEOID").unwrap();
        assert!(empty.datasets.is_empty());
        assert_eq!(empty.to_json(), br#"{"version":1,"datasets":{}}"#);
    }

    #[test]
    fn consolidate_errors() {
        let mut tables = BTreeMap::new();
        tables.insert("x".to_string(), t(&["ID", "POP"], vec![]));
        assert_eq!(
            consolidate(&tables, "GEOID").unwrap_err().to_string(),
            "dataset x lacks GEOID"
        );

        let mut tables = BTreeMap::new();
        tables.insert(
            "x".to_string(),
            t(&["GEOID", "POP"], vec![vec![txt("123"), num(1.)]]),
        );
        assert!(matches!(
            consolidate(&tables, "GEOID"),
            Err(TableError::InvalidGeoid { .. })
        ));
    }

    #[test]
    fn store_rejects_misaligned_records() {
        let bad = br#"{"version":1,"datasets":{"d":{"label":"d","metrics":["A","B"],"records":{"150010200001":[1]}}}}"#;
        assert!(VulnerabilityStore::from_json(bad).is_err());
        assert!(VulnerabilityStore::from_json(br#"{"version":2,"datasets":{}}"#).is_err());
    }
}

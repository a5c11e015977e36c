//! Feature sets S (fundamentals), T (text embedding) and ST (both), aligned to
//! target rows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;
use std::io::{self, Read, Write};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingVector;
use crate::targets::{EarningsEvent, TargetRow};

pub const CHANGE_PREFIX: &str = "d1y_";
pub const SUE_COLUMN: &str = "sue";
pub const ABNORMAL_RETURN_COLUMN: &str = "abnormal_return";
const MAGIC: &[u8; 8] = b"NLFMAT01";

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("no {what} for row {key}")]
    Unmatched { key: String, what: &'static str },
    #[error("embedding {doc_id} has dimension {got}, expected {expected}")]
    DimMismatch {
        doc_id: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalsRow {
    pub firm_id: String,
    pub as_of_date: NaiveDate,
    #[serde(flatten)]
    pub values: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    Fundamentals,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSpec {
    S,
    T,
    ST,
}

impl FeatureSpec {
    pub const ALL: [FeatureSpec; 3] = [FeatureSpec::S, FeatureSpec::T, FeatureSpec::ST];

    pub fn key(self) -> &'static str {
        match self {
            FeatureSpec::S => "S",
            FeatureSpec::T => "T",
            FeatureSpec::ST => "ST",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub firm_id: String,
    pub call_date: NaiveDate,
    pub horizon: u8,
}

impl std::fmt::Display for RowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}Y)", self.firm_id, self.call_date, self.horizon)
    }
}

/// Dense row-major matrix; missing values are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub row_keys: Vec<RowKey>,
    pub feature_names: Vec<String>,
    pub groups: Vec<FeatureGroup>,
    pub values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.row_keys.len()
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[j]).collect()
    }

    pub fn group_width(&self, group: FeatureGroup) -> usize {
        self.groups.iter().filter(|g| **g == group).count()
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.width());
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            row_keys: idx.iter().map(|&i| self.row_keys[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            groups: self.groups.clone(),
            values,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(self.n_rows() * cols.len());
        for i in 0..self.n_rows() {
            let r = self.row(i);
            values.extend(cols.iter().map(|&j| r[j]));
        }
        FeatureMatrix {
            row_keys: self.row_keys.clone(),
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            groups: cols.iter().map(|&j| self.groups[j]).collect(),
            values,
        }
    }

    /// Narrows an ST matrix to the columns of `spec`.
    pub fn restrict(&self, spec: FeatureSpec) -> FeatureMatrix {
        let cols: Vec<usize> = (0..self.width())
            .filter(|&j| match spec {
                FeatureSpec::S => self.groups[j] == FeatureGroup::Fundamentals,
                FeatureSpec::T => self.groups[j] == FeatureGroup::Text,
                FeatureSpec::ST => true,
            })
            .collect();
        self.select_columns(&cols)
    }

    /// Columnar binary encoding: magic, u64 header length, JSON header
    /// (names, groups, row keys), then each column as little-endian f64.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), FeatureError> {
        let header = serde_json::to_vec(&MatrixHeader {
            version: 1,
            n_rows: self.n_rows(),
            feature_names: self.feature_names.clone(),
            groups: self.groups.clone(),
            row_keys: self.row_keys.clone(),
        })
        .map_err(|e| FeatureError::Format(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for j in 0..self.width() {
            for i in 0..self.n_rows() {
                w.write_all(&self.row(i)[j].to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<FeatureMatrix, FeatureError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(FeatureError::Format("bad magic".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let h: MatrixHeader = serde_json::from_slice(&header).map_err(|e| FeatureError::Format(e.to_string()))?;
        if h.version != 1 || h.row_keys.len() != h.n_rows || h.groups.len() != h.feature_names.len() {
            return Err(FeatureError::Format("inconsistent header".into()));
        }
        let (n, w) = (h.n_rows, h.feature_names.len());
        let mut values = vec![0.0; n * w];
        let mut buf = [0u8; 8];
        for j in 0..w {
            for i in 0..n {
                r.read_exact(&mut buf)?;
                values[i * w + j] = f64::from_le_bytes(buf);
            }
        }
        Ok(FeatureMatrix {
            row_keys: h.row_keys,
            feature_names: h.feature_names,
            groups: h.groups,
            values,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixHeader {
    version: u32,
    n_rows: usize,
    feature_names: Vec<String>,
    groups: Vec<FeatureGroup>,
    row_keys: Vec<RowKey>,
}

/// Within each group, maps present values to `(rank - 1) / (n - 1) - 0.5`
/// using average ranks for ties; a singleton maps to 0.
pub fn rank_standardize<K: Eq + Hash>(column: &[Option<f64>], groups: &[K]) -> Vec<Option<f64>> {
    assert_eq!(column.len(), groups.len(), "column and groups must align");
    let mut members: HashMap<&K, Vec<usize>> = HashMap::new();
    for (i, (v, g)) in column.iter().zip(groups).enumerate() {
        if v.is_some_and(|x| !x.is_nan()) {
            members.entry(g).or_default().push(i);
        }
    }
    let mut out = vec![None; column.len()];
    for idx in members.into_values() {
        let n = idx.len();
        if n == 1 {
            out[idx[0]] = Some(0.0);
            continue;
        }
        let mut sorted = idx;
        sorted.sort_by(|&a, &b| column[a].unwrap().total_cmp(&column[b].unwrap()));
        let mut start = 0;
        while start < n {
            let v = column[sorted[start]].unwrap();
            let mut end = start + 1;
            while end < n && column[sorted[end]].unwrap() == v {
                end += 1;
            }
            // ranks start..end (0-based) share their average
            let avg_rank0 = (start + end - 1) as f64 / 2.0;
            let z = avg_rank0 / (n - 1) as f64 - 0.5;
            for &i in &sorted[start..end] {
                out[i] = Some(z);
            }
            start = end;
        }
    }
    out
}

/// Elementwise `current - prior`; missing on either side stays missing.
pub fn one_year_change(current: &FundamentalsRow, prior: Option<&FundamentalsRow>) -> BTreeMap<String, Option<f64>> {
    current
        .values
        .iter()
        .map(|(k, v)| {
            let prev = prior.and_then(|p| p.values.get(k).copied().flatten());
            let d = match (v, prev) {
                (Some(c), Some(p)) => Some(c - p),
                _ => None,
            };
            (k.clone(), d)
        })
        .collect()
}

/// Prior-year tolerance around the exact one-year lag.
const PRIOR_TOLERANCE_DAYS: i64 = 45;

fn find_prior<'a>(rows: &[&'a FundamentalsRow], as_of: NaiveDate) -> Option<&'a FundamentalsRow> {
    let target = as_of - Duration::days(365);
    rows.iter()
        .filter(|r| (r.as_of_date - target).num_days().abs() <= PRIOR_TOLERANCE_DAYS)
        .min_by_key(|r| ((r.as_of_date - target).num_days().abs(), r.as_of_date))
        .copied()
}

/// Latest fundamentals row strictly before the call date.
fn find_current<'a>(rows: &[&'a FundamentalsRow], call_date: NaiveDate) -> Option<&'a FundamentalsRow> {
    rows.iter()
        .filter(|r| r.as_of_date < call_date)
        .max_by_key(|r| r.as_of_date)
        .copied()
}

/// Text embedding of the call held by `firm_id` on `call_date`.
#[derive(Debug, Clone, Copy)]
pub struct CallEmbedding<'a> {
    pub firm_id: &'a str,
    pub call_date: NaiveDate,
    pub embedding: &'a EmbeddingVector,
}

pub fn embedding_column_names(dim: usize) -> Vec<String> {
    (0..dim).map(|j| format!("emb_{j:03}")).collect()
}

/// Builds the feature matrix for `spec`, one row per target row, in target order.
pub fn assemble(
    spec: FeatureSpec,
    fundamentals: &[FundamentalsRow],
    embeddings: &[CallEmbedding<'_>],
    targets: &[TargetRow],
    events: &[EarningsEvent],
) -> Result<FeatureMatrix, FeatureError> {
    let want_s = matches!(spec, FeatureSpec::S | FeatureSpec::ST);
    let want_t = matches!(spec, FeatureSpec::T | FeatureSpec::ST);

    let mut names: Vec<String> = Vec::new();
    let mut groups: Vec<FeatureGroup> = Vec::new();
    let mut s_block: HashMap<(String, NaiveDate), Vec<f64>> = HashMap::new();

    if want_s {
        let fund_names: Vec<String> = fundamentals
            .iter()
            .flat_map(|r| r.values.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut by_firm: HashMap<&str, Vec<&FundamentalsRow>> = HashMap::new();
        for r in fundamentals {
            by_firm.entry(r.firm_id.as_str()).or_default().push(r);
        }
        let ar: HashMap<(&str, NaiveDate), Option<f64>> = events
            .iter()
            .map(|e| ((e.firm_id.as_str(), e.call_date), e.abnormal_return))
            .collect();

        // unique calls in first-seen order; S columns are standardized per call
        let mut calls: Vec<(&TargetRow, &FundamentalsRow)> = Vec::new();
        let mut seen = BTreeSet::new();
        for t in targets {
            if !seen.insert((t.firm_id.as_str(), t.call_date)) {
                continue;
            }
            let rows = by_firm.get(t.firm_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            let cur = find_current(rows, t.call_date).ok_or_else(|| FeatureError::Unmatched {
                key: row_key(t).to_string(),
                what: "fundamentals row",
            })?;
            calls.push((t, cur));
        }

        let dates: Vec<NaiveDate> = calls.iter().map(|(_, f)| f.as_of_date).collect();
        let mut columns: Vec<Vec<Option<f64>>> = Vec::new();
        let changes: Vec<BTreeMap<String, Option<f64>>> = calls
            .iter()
            .map(|(t, cur)| {
                let rows = by_firm.get(t.firm_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                one_year_change(cur, find_prior(rows, cur.as_of_date))
            })
            .collect();
        for n in &fund_names {
            let level: Vec<Option<f64>> = calls.iter().map(|(_, f)| f.values.get(n).copied().flatten()).collect();
            names.push(n.clone());
            columns.push(rank_standardize(&level, &dates));
        }
        for n in &fund_names {
            let change: Vec<Option<f64>> = changes.iter().map(|c| c.get(n).copied().flatten()).collect();
            names.push(format!("{CHANGE_PREFIX}{n}"));
            columns.push(rank_standardize(&change, &dates));
        }
        names.push(SUE_COLUMN.to_string());
        columns.push(calls.iter().map(|(t, _)| t.sue).collect());
        names.push(ABNORMAL_RETURN_COLUMN.to_string());
        columns.push(
            calls
                .iter()
                .map(|(t, _)| ar.get(&(t.firm_id.as_str(), t.call_date)).copied().flatten())
                .collect(),
        );
        groups.extend(std::iter::repeat_n(FeatureGroup::Fundamentals, names.len()));

        for (c, (t, _)) in calls.iter().enumerate() {
            let row = columns.iter().map(|col| col[c].unwrap_or(f64::NAN)).collect();
            s_block.insert((t.firm_id.clone(), t.call_date), row);
        }
    }

    let mut text: HashMap<(&str, NaiveDate), &EmbeddingVector> = HashMap::new();
    let mut dim = None;
    if want_t {
        for e in embeddings {
            let d = *dim.get_or_insert(e.embedding.dim);
            if e.embedding.dim != d || e.embedding.values.len() != d {
                return Err(FeatureError::DimMismatch {
                    doc_id: e.embedding.doc_id.clone(),
                    expected: d,
                    got: e.embedding.values.len(),
                });
            }
            text.insert((e.firm_id, e.call_date), e.embedding);
        }
        let d = dim.unwrap_or(0);
        names.extend(embedding_column_names(d));
        groups.extend(std::iter::repeat_n(FeatureGroup::Text, d));
    }

    let width = names.len();
    let mut values = Vec::with_capacity(targets.len() * width);
    for t in targets {
        if want_s {
            values.extend_from_slice(&s_block[&(t.firm_id.clone(), t.call_date)]);
        }
        if want_t {
            let e = text
                .get(&(t.firm_id.as_str(), t.call_date))
                .ok_or_else(|| FeatureError::Unmatched {
                    key: row_key(t).to_string(),
                    what: "text embedding",
                })?;
            values.extend(e.values.iter().map(|v| f64::from(*v)));
        }
    }
    Ok(FeatureMatrix {
        row_keys: targets.iter().map(row_key).collect(),
        feature_names: names,
        groups,
        values,
    })
}

pub fn row_key(t: &TargetRow) -> RowKey {
    RowKey {
        firm_id: t.firm_id.clone(),
        call_date: t.call_date,
        horizon: t.horizon_years,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_standardize_examples() {
        let g = [0, 0, 0];
        let r = rank_standardize(&[Some(10.0), Some(20.0), Some(30.0)], &g);
        assert_eq!(r, vec![Some(-0.5), Some(0.0), Some(0.5)]);
        assert_eq!(rank_standardize(&[Some(7.0)], &[0]), vec![Some(0.0)]);
        assert_eq!(
            rank_standardize(&[Some(5.0), Some(5.0)], &[0, 0]),
            vec![Some(0.0), Some(0.0)]
        );
        assert_eq!(
            rank_standardize(&[Some(1.0), None, Some(2.0)], &[0, 0, 0]),
            vec![Some(-0.5), None, Some(0.5)]
        );
    }

    #[test]
    fn rank_standardize_respects_groups() {
        let r = rank_standardize(&[Some(1.0), Some(100.0), Some(2.0), Some(50.0)], &["a", "b", "a", "b"]);
        assert_eq!(r, vec![Some(-0.5), Some(0.5), Some(0.5), Some(-0.5)]);
    }

    #[test]
    fn one_year_change_examples() {
        let row = |v: Option<f64>| FundamentalsRow {
            firm_id: "F".into(),
            as_of_date: NaiveDate::from_ymd_opt(2020, 1, 31).unwrap(),
            values: BTreeMap::from([("x".to_string(), v)]),
        };
        assert_eq!(one_year_change(&row(Some(3.0)), Some(&row(Some(1.0))))["x"], Some(2.0));
        assert_eq!(one_year_change(&row(Some(3.0)), None)["x"], None);
        assert_eq!(one_year_change(&row(None), Some(&row(Some(1.0))))["x"], None);
    }

    #[test]
    fn binary_roundtrip_keeps_nan() {
        let m = FeatureMatrix {
            row_keys: vec![RowKey {
                firm_id: "F".into(),
                call_date: NaiveDate::from_ymd_opt(2020, 1, 31).unwrap(),
                horizon: 1,
            }],
            feature_names: vec!["a".into(), "emb_000".into()],
            groups: vec![FeatureGroup::Fundamentals, FeatureGroup::Text],
            values: vec![f64::NAN, 0.25],
        };
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = FeatureMatrix::read_from(buf.as_slice()).unwrap();
        assert!(back.values[0].is_nan());
        assert_eq!(back.values[1], 0.25);
        assert_eq!(back.row_keys, m.row_keys);
        assert!(FeatureMatrix::read_from(&b"garbage!"[..]).is_err());
    }
}

//! Least-squares gradient-boosted regression trees.
//!
//! Trees are grown level by level with exact greedy splits: every feature is
//! scanned in presorted order and every midpoint between adjacent distinct
//! values is a candidate threshold. Rows with a missing value (NaN) for the
//! split feature follow a learned default direction; when the node has no
//! missing values for that feature they default to the larger child.
//!
//! Candidates are visited in (feature, threshold, missing-left before
//! missing-right) order and only a strictly larger gain replaces the current
//! best, so ties resolve to the lowest feature index and lowest threshold.

mod cv;
mod metrics;
mod pdp;

pub use cv::{kfold_cv, temporal_split, CvScore, SplitError, DEFAULT_TEST_FRACTION, MIN_SPLIT_ROWS};
pub use metrics::{evaluate, mse, r2, EvalReport, MetricError};
pub use pdp::{iqr_effect, partial_dependence};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GbmError {
    #[error("empty training data")]
    Empty,
    #[error("{rows} feature rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("non-finite target at row {0}")]
    NonFiniteTarget(usize),
    #[error("model expects {expected} features, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid hyper-parameters: {0}")]
    InvalidParams(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("empty grid")]
    EmptyGrid,
    #[error("unsupported model format version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 3,
            min_samples_leaf: 20,
            learning_rate: 0.1,
            subsample: 0.8,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), GbmError> {
        let bad = |m: &str| Err(GbmError::InvalidParams(m.to_string()));
        if self.max_depth == 0 || self.min_samples_leaf == 0 {
            return bad("max_depth and min_samples_leaf must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        Ok(())
    }

    /// Cartesian product grid; every point shares `seed`.
    pub fn grid(
        n_trees: &[usize],
        max_depth: &[usize],
        learning_rate: &[f64],
        min_samples_leaf: &[usize],
        subsample: &[f64],
        seed: u64,
    ) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        for &n in n_trees {
            for &d in max_depth {
                for &lr in learning_rate {
                    for &leaf in min_samples_leaf {
                        for &ss in subsample {
                            out.push(Hyperparams {
                                n_trees: n,
                                max_depth: d,
                                min_samples_leaf: leaf,
                                learning_rate: lr,
                                subsample: ss,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn default_grid(seed: u64) -> Vec<Hyperparams> {
        Self::grid(&[200, 500], &[2, 3, 4], &[0.05, 0.1], &[20], &[0.8], seed)
    }
}

/// A regression tree node. Serialized as nested arrays: `[value]` for a leaf,
/// `[feature_index, threshold, missing_goes_left, left, right]` for a split.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature_index: usize,
        threshold: f64,
        missing_goes_left: bool,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature_index,
                    threshold,
                    missing_goes_left,
                    left,
                    right,
                } => {
                    let x = row[*feature_index];
                    let go_left = if x.is_nan() { *missing_goes_left } else { x < *threshold };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Feature indices used by any split, in visiting order.
    pub fn split_features(&self, out: &mut Vec<usize>) {
        if let TreeNode::Split {
            feature_index,
            left,
            right,
            ..
        } = self
        {
            out.push(*feature_index);
            left.split_features(out);
            right.split_features(out);
        }
    }
}

impl Serialize for TreeNode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TreeNode::Leaf { value } => {
                let mut seq = s.serialize_seq(Some(1))?;
                seq.serialize_element(value)?;
                seq.end()
            }
            TreeNode::Split {
                feature_index,
                threshold,
                missing_goes_left,
                left,
                right,
            } => {
                let mut seq = s.serialize_seq(Some(5))?;
                seq.serialize_element(feature_index)?;
                seq.serialize_element(threshold)?;
                seq.serialize_element(missing_goes_left)?;
                seq.serialize_element(left)?;
                seq.serialize_element(right)?;
                seq.end()
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NodeRepr {
    Leaf((f64,)),
    Split((usize, f64, bool, Box<TreeNode>, Box<TreeNode>)),
}

impl<'de> Deserialize<'de> for TreeNode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match NodeRepr::deserialize(d).map_err(|_| de::Error::custom("malformed tree node"))? {
            NodeRepr::Leaf((value,)) => Ok(TreeNode::Leaf { value }),
            NodeRepr::Split((feature_index, threshold, missing_goes_left, left, right)) => Ok(TreeNode::Split {
                feature_index,
                threshold,
                missing_goes_left,
                left,
                right,
            }),
        }
    }
}

/// Anything that maps one feature row to a prediction.
pub trait Predictor {
    fn feature_names(&self) -> &[String];
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, GbmError> {
        let expected = self.feature_names().len();
        if x.width() != expected {
            return Err(GbmError::WidthMismatch {
                expected,
                got: x.width(),
            });
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    fn feature_index(&self, name: &str) -> Result<usize, GbmError> {
        self.feature_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| GbmError::UnknownFeature(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub version: u32,
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub trees: Vec<TreeNode>,
    pub feature_names: Vec<String>,
}

impl BoostedModel {
    /// A model with no trees, predicting `value` everywhere.
    pub fn constant(value: f64, feature_names: Vec<String>) -> Self {
        Self {
            version: MODEL_FORMAT_VERSION,
            base_prediction: value,
            learning_rate: 1.0,
            trees: Vec::new(),
            feature_names,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        let m: BoostedModel = serde_json::from_str(s).map_err(|e| e.to_string())?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(GbmError::Version(m.version).to_string());
        }
        Ok(m)
    }
}

impl Predictor for BoostedModel {
    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.base_prediction + self.learning_rate * sum
    }
}

pub fn predict(model: &BoostedModel, x: &FeatureMatrix) -> Result<Vec<f64>, GbmError> {
    model.predict(x)
}

/// Training-set MSE after each boosting stage (index 0 is the base model).
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub train_mse: Vec<f64>,
}

pub fn fit(x: &FeatureMatrix, y: &[f64], hp: &Hyperparams) -> Result<BoostedModel, GbmError> {
    fit_with_trace(x, y, hp).map(|(m, _)| m)
}

pub fn fit_with_trace(x: &FeatureMatrix, y: &[f64], hp: &Hyperparams) -> Result<(BoostedModel, FitTrace), GbmError> {
    hp.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(GbmError::Empty);
    }
    if y.len() != n {
        return Err(GbmError::LengthMismatch {
            rows: n,
            targets: y.len(),
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(GbmError::NonFiniteTarget(i));
    }

    let base = if y.iter().all(|v| *v == y[0]) {
        y[0]
    } else {
        y.iter().sum::<f64>() / n as f64
    };
    let data = ColumnData::new(x);
    let mut pred = vec![base; n];
    let mut trace = vec![mse_raw(y, &pred)];
    let mut trees = Vec::with_capacity(hp.n_trees);
    let n_sample = ((hp.subsample * n as f64).round() as usize).clamp(1, n);
    let mut builder = TreeBuilder::new(&data, hp);

    for m in 0..hp.n_trees {
        let residual: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let rows: Vec<usize> = if n_sample == n {
            (0..n).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(hp.seed, m));
            let mut r = sample(&mut rng, n, n_sample).into_vec();
            r.sort_unstable();
            r
        };
        let tree = builder.build(&rows, &residual);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += hp.learning_rate * tree.predict(x.row(i));
        }
        trace.push(mse_raw(y, &pred));
        trees.push(tree);
    }

    let model = BoostedModel {
        version: MODEL_FORMAT_VERSION,
        base_prediction: base,
        learning_rate: hp.learning_rate,
        trees,
        feature_names: x.feature_names.clone(),
    };
    Ok((model, FitTrace { train_mse: trace }))
}

fn stage_seed(seed: u64, stage: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (stage as u64).wrapping_add(1)
}

fn mse_raw(y: &[f64], p: &[f64]) -> f64 {
    y.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Column-major copy of the design matrix with per-feature presorted order.
struct ColumnData {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
    /// Non-missing row indices sorted by value (stable on row index).
    sorted: Vec<Vec<u32>>,
    missing: Vec<Vec<u32>>,
}

impl ColumnData {
    fn new(x: &FeatureMatrix) -> Self {
        let n = x.n_rows();
        let p = x.width();
        let mut columns = vec![Vec::with_capacity(n); p];
        for i in 0..n {
            for (j, v) in x.row(i).iter().enumerate() {
                columns[j].push(*v);
            }
        }
        let mut sorted = Vec::with_capacity(p);
        let mut missing = Vec::with_capacity(p);
        for col in &columns {
            let mut present: Vec<u32> = Vec::with_capacity(n);
            let mut absent = Vec::new();
            for (i, v) in col.iter().enumerate() {
                if v.is_nan() {
                    absent.push(i as u32);
                } else {
                    present.push(i as u32);
                }
            }
            present.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            sorted.push(present);
            missing.push(absent);
        }
        Self {
            n_rows: n,
            columns,
            sorted,
            missing,
        }
    }
}

const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    missing_left: bool,
}

enum ArenaNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Copy, Default)]
struct ScanState {
    sum: f64,
    count: usize,
    last: f64,
    started: bool,
}

struct TreeBuilder<'a> {
    data: &'a ColumnData,
    max_depth: usize,
    min_leaf: usize,
    node_of: Vec<u32>,
}

impl<'a> TreeBuilder<'a> {
    fn new(data: &'a ColumnData, hp: &Hyperparams) -> Self {
        Self {
            data,
            max_depth: hp.max_depth,
            min_leaf: hp.min_samples_leaf,
            node_of: vec![NO_NODE; data.n_rows],
        }
    }

    fn build(&mut self, rows: &[usize], residual: &[f64]) -> TreeNode {
        self.node_of.iter_mut().for_each(|v| *v = NO_NODE);
        for &r in rows {
            self.node_of[r] = 0;
        }
        let mut arena: Vec<Option<ArenaNode>> = vec![None];
        let mut members: Vec<Vec<usize>> = vec![rows.to_vec()];
        let mut level: Vec<usize> = vec![0];

        for depth in 0..=self.max_depth {
            if level.is_empty() {
                break;
            }
            let totals: Vec<(f64, usize)> = level
                .iter()
                .map(|&k| (members[k].iter().map(|&r| residual[r]).sum(), members[k].len()))
                .collect();
            let can_split: Vec<bool> = totals
                .iter()
                .map(|&(_, c)| depth < self.max_depth && c >= 2 * self.min_leaf)
                .collect();
            let best = if can_split.iter().any(|b| *b) {
                self.best_splits(&level, &totals, &can_split, residual)
            } else {
                vec![None; level.len()]
            };

            let mut next = Vec::new();
            for (slot, &k) in level.iter().enumerate() {
                let (sum, count) = totals[slot];
                match best[slot] {
                    Some(c) => {
                        let (l, r) = (arena.len(), arena.len() + 1);
                        arena.push(None);
                        arena.push(None);
                        let col = &self.data.columns[c.feature];
                        let (mut lm, mut rm) = (Vec::new(), Vec::new());
                        for &row in &members[k] {
                            let v = col[row];
                            let left = if v.is_nan() { c.missing_left } else { v < c.threshold };
                            if left {
                                self.node_of[row] = l as u32;
                                lm.push(row);
                            } else {
                                self.node_of[row] = r as u32;
                                rm.push(row);
                            }
                        }
                        members.push(lm);
                        members.push(rm);
                        arena[k] = Some(ArenaNode::Split {
                            feature: c.feature,
                            threshold: c.threshold,
                            missing_left: c.missing_left,
                            left: l,
                            right: r,
                        });
                        next.push(l);
                        next.push(r);
                    }
                    None => {
                        let value = if count == 0 { 0.0 } else { sum / count as f64 };
                        arena[k] = Some(ArenaNode::Leaf(value));
                        for &row in &members[k] {
                            self.node_of[row] = NO_NODE;
                        }
                    }
                }
                members[k] = Vec::new();
            }
            level = next;
        }
        to_nested(&arena, 0)
    }

    /// Best split per active node, scanning every feature once in sorted order.
    fn best_splits(
        &self,
        level: &[usize],
        totals: &[(f64, usize)],
        can_split: &[bool],
        residual: &[f64],
    ) -> Vec<Option<Candidate>> {
        let max_node = *level.iter().max().unwrap();
        let mut slot_of = vec![usize::MAX; max_node + 1];
        for (s, &k) in level.iter().enumerate() {
            if can_split[s] {
                slot_of[k] = s;
            }
        }
        let parent_score: Vec<f64> = totals
            .iter()
            .map(|&(s, c)| if c == 0 { 0.0 } else { s * s / c as f64 })
            .collect();
        let mut best: Vec<Option<Candidate>> = vec![None; level.len()];
        let mut state = vec![ScanState::default(); level.len()];
        let mut miss = vec![(0.0f64, 0usize); level.len()];
        let min_leaf = self.min_leaf;

        for j in 0..self.data.columns.len() {
            let col = &self.data.columns[j];
            state.iter_mut().for_each(|s| *s = ScanState::default());
            miss.iter_mut().for_each(|m| *m = (0.0, 0));
            for &r in &self.data.missing[j] {
                let k = self.node_of[r as usize];
                if k == NO_NODE || k as usize > max_node {
                    continue;
                }
                let s = slot_of[k as usize];
                if s != usize::MAX {
                    miss[s].0 += residual[r as usize];
                    miss[s].1 += 1;
                }
            }
            for &r in &self.data.sorted[j] {
                let r = r as usize;
                let k = self.node_of[r];
                if k == NO_NODE || k as usize > max_node {
                    continue;
                }
                let s = slot_of[k as usize];
                if s == usize::MAX {
                    continue;
                }
                let v = col[r];
                let st = &mut state[s];
                if st.started && v > st.last {
                    let (tot_sum, tot_cnt) = totals[s];
                    let (m_sum, m_cnt) = miss[s];
                    let threshold = st.last + (v - st.last) / 2.0;
                    let present_sum = tot_sum - m_sum;
                    let present_cnt = tot_cnt - m_cnt;
                    let options: &[bool] = if m_cnt > 0 { &[true, false] } else { &[true] };
                    for &missing_left in options {
                        let (ls, lc) = if missing_left {
                            (st.sum + m_sum, st.count + m_cnt)
                        } else {
                            (st.sum, st.count)
                        };
                        let (rs, rc) = if missing_left {
                            (present_sum - st.sum, present_cnt - st.count)
                        } else {
                            (present_sum - st.sum + m_sum, present_cnt - st.count + m_cnt)
                        };
                        if lc < min_leaf || rc < min_leaf {
                            continue;
                        }
                        let gain = ls * ls / lc as f64 + rs * rs / rc as f64 - parent_score[s];
                        let better = match &best[s] {
                            None => gain > 0.0,
                            Some(b) => gain > b.gain,
                        };
                        if better {
                            // with no missing values the default direction is the larger child
                            let missing_left = if m_cnt > 0 { missing_left } else { lc >= rc };
                            best[s] = Some(Candidate {
                                gain,
                                feature: j,
                                threshold,
                                missing_left,
                            });
                        }
                    }
                }
                st.sum += residual[r];
                st.count += 1;
                st.last = v;
                st.started = true;
            }
        }
        best
    }
}

fn to_nested(arena: &[Option<ArenaNode>], k: usize) -> TreeNode {
    match arena[k].as_ref().expect("every node resolved") {
        ArenaNode::Leaf(v) => TreeNode::Leaf { value: *v },
        ArenaNode::Split {
            feature,
            threshold,
            missing_left,
            left,
            right,
        } => TreeNode::Split {
            feature_index: *feature,
            threshold: *threshold,
            missing_goes_left: *missing_left,
            left: Box::new(to_nested(arena, *left)),
            right: Box::new(to_nested(arena, *right)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureGroup, RowKey};
    use chrono::NaiveDate;

    pub(crate) fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        let w = rows.first().map_or(0, Vec::len);
        FeatureMatrix {
            row_keys: (0..rows.len())
                .map(|i| RowKey {
                    firm_id: format!("f{i}"),
                    call_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                    horizon: 1,
                })
                .collect(),
            feature_names: (0..w).map(|j| format!("x{j}")).collect(),
            groups: vec![FeatureGroup::Fundamentals; w],
            values: rows.concat(),
        }
    }

    #[test]
    fn constant_target_predicts_constant() {
        let x = matrix(&(0..30).map(|i| vec![i as f64]).collect::<Vec<_>>());
        let y = vec![0.1; 30];
        let hp = Hyperparams {
            min_samples_leaf: 2,
            ..Default::default()
        };
        let m = fit(&x, &y, &hp).unwrap();
        assert!(m.predict(&x).unwrap().iter().all(|p| *p == 0.1));
        assert!(m
            .trees
            .iter()
            .all(|t| matches!(t, TreeNode::Leaf { value } if *value == 0.0)));
    }

    #[test]
    fn hand_built_tree_traces() {
        let tree = TreeNode::Split {
            feature_index: 0,
            threshold: 0.0,
            missing_goes_left: false,
            left: Box::new(TreeNode::Leaf { value: -3.0 }),
            right: Box::new(TreeNode::Leaf { value: 5.0 }),
        };
        let m = BoostedModel {
            version: MODEL_FORMAT_VERSION,
            base_prediction: 1.0,
            learning_rate: 0.5,
            trees: vec![tree],
            feature_names: vec!["x0".into()],
        };
        let x = matrix(&[vec![-1.0], vec![1.0], vec![f64::NAN]]);
        assert_eq!(m.predict(&x).unwrap(), vec![-0.5, 3.5, 3.5]);
        let empty = FeatureMatrix {
            row_keys: vec![],
            feature_names: vec!["x0".into()],
            groups: vec![FeatureGroup::Fundamentals],
            values: vec![],
        };
        assert!(m.predict(&empty).unwrap().is_empty());
        assert!(matches!(
            m.predict(&matrix(&[vec![1.0, 2.0]])),
            Err(GbmError::WidthMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = matrix(&[vec![1.0], vec![2.0]]);
        let hp = Hyperparams::default();
        assert_eq!(fit(&matrix(&[]), &[], &hp), Err(GbmError::Empty));
        assert!(matches!(fit(&x, &[1.0], &hp), Err(GbmError::LengthMismatch { .. })));
        assert_eq!(fit(&x, &[1.0, f64::NAN], &hp), Err(GbmError::NonFiniteTarget(1)));
        let bad = Hyperparams {
            learning_rate: 0.0,
            ..hp
        };
        assert!(matches!(fit(&x, &[1.0, 2.0], &bad), Err(GbmError::InvalidParams(_))));
    }

    #[test]
    fn json_roundtrip_preserves_predictions() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![i as f64, if i % 7 == 0 { f64::NAN } else { (i * i % 13) as f64 }])
            .collect();
        let y: Vec<f64> = (0..60).map(|i| (i % 5) as f64 + 0.1 * i as f64).collect();
        let x = matrix(&rows);
        let hp = Hyperparams {
            n_trees: 10,
            min_samples_leaf: 3,
            ..Default::default()
        };
        let m = fit(&x, &y, &hp).unwrap();
        let back = BoostedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
        assert!(BoostedModel::from_json("{\"version\":9}").is_err());
    }

    #[test]
    fn missing_values_learn_a_direction() {
        // missing rows behave like the high group
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            rows.push(vec![i as f64]);
            y.push(if i < 20 { 0.0 } else { 10.0 });
        }
        for _ in 0..10 {
            rows.push(vec![f64::NAN]);
            y.push(10.0);
        }
        let hp = Hyperparams {
            n_trees: 1,
            max_depth: 1,
            min_samples_leaf: 5,
            learning_rate: 1.0,
            subsample: 1.0,
            seed: 0,
        };
        let m = fit(&matrix(&rows), &y, &hp).unwrap();
        match &m.trees[0] {
            TreeNode::Split {
                threshold,
                missing_goes_left,
                ..
            } => {
                assert_eq!(*threshold, 19.5);
                assert!(!missing_goes_left);
            }
            other => panic!("expected split, got {other:?}"),
        }
    }
}

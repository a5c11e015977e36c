//! Outcome rows per (firm, call, horizon): analysts' expected change,
//! forecast disagreement, realized change and SUE, all in basis points of
//! earnings yield (SUE stays a raw price-scaled ratio).

use std::collections::{BTreeMap, HashMap};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::quantile::{median, quantile_sorted, sample_std};

pub const BPS: f64 = 10_000.0;
pub const POST_CALL_WINDOW_DAYS: i64 = 15;
pub const SUE_WINDOW_DAYS: i64 = 90;
pub const HORIZONS: [u8; 3] = [1, 2, 3];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TargetError {
    #[error("adjustment factors must be positive (got {0})")]
    NonPositiveFactor(f64),
    #[error("no forecasts in window")]
    NoForecasts,
    #[error("price must be positive (got {0})")]
    NonPositivePrice(f64),
    #[error("horizon must be 1, 2 or 3 (got {0})")]
    InvalidHorizon(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub analyst_id: String,
    pub broker_id: String,
    pub firm_id: String,
    pub issue_date: NaiveDate,
    pub horizon_years: u8,
    pub eps_forecast: f64,
    pub adjustment_factor: f64,
}

impl ForecastRecord {
    pub fn validate(&self) -> Result<(), TargetError> {
        if !(self.adjustment_factor > 0.0) {
            return Err(TargetError::NonPositiveFactor(self.adjustment_factor));
        }
        if !HORIZONS.contains(&self.horizon_years) {
            return Err(TargetError::InvalidHorizon(self.horizon_years));
        }
        Ok(())
    }
}

/// A call event. Realized EPS values are stated on the share basis given by
/// `adjustment_factor_at_realization`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarningsEvent {
    pub firm_id: String,
    pub call_date: NaiveDate,
    pub realized_eps_prev: f64,
    pub price_at_call: f64,
    /// Keyed by horizon in years ("1", "2", "3"); absent in unlabeled data.
    #[serde(default)]
    pub realized_eps_future: BTreeMap<String, f64>,
    #[serde(default = "one")]
    pub adjustment_factor_at_realization: f64,
    /// Precomputed abnormal announcement return, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abnormal_return: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl EarningsEvent {
    pub fn realized_future(&self, horizon: u8) -> Option<f64> {
        self.realized_eps_future.get(&horizon.to_string()).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub firm_id: String,
    pub call_date: NaiveDate,
    pub horizon_years: u8,
    pub expected_change_bps: Option<f64>,
    pub disagreement_bps: Option<f64>,
    pub realized_change_bps: Option<f64>,
    pub sue: Option<f64>,
    pub n_forecasts: usize,
    /// Just-released earnings yield, kept for converting changes back to yields.
    pub base_yield: f64,
}

/// The three outcome variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Target {
    ExpectedChange,
    Disagreement,
    RealizedChange,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::ExpectedChange, Target::Disagreement, Target::RealizedChange];

    pub fn key(self) -> &'static str {
        match self {
            Target::ExpectedChange => "expected_change",
            Target::Disagreement => "disagreement",
            Target::RealizedChange => "realized_change",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Target::ExpectedChange => "Expected Change in Earnings",
            Target::Disagreement => "Forecast Disagreement",
            Target::RealizedChange => "Realized Change in Earnings",
        }
    }

    pub fn parse(s: &str) -> Option<Target> {
        Target::ALL.into_iter().find(|t| t.key() == s)
    }
}

impl TargetRow {
    pub fn get(&self, target: Target) -> Option<f64> {
        match target {
            Target::ExpectedChange => self.expected_change_bps,
            Target::Disagreement => self.disagreement_bps,
            Target::RealizedChange => self.realized_change_bps,
        }
    }

    fn slot(&mut self, target: Target) -> &mut Option<f64> {
        match target {
            Target::ExpectedChange => &mut self.expected_change_bps,
            Target::Disagreement => &mut self.disagreement_bps,
            Target::RealizedChange => &mut self.realized_change_bps,
        }
    }
}

/// Restates a forecast on the realization-date share basis.
pub fn adjust_forecast(f: &ForecastRecord, factor_at_realization: f64) -> Result<f64, TargetError> {
    if !(f.adjustment_factor > 0.0) {
        return Err(TargetError::NonPositiveFactor(f.adjustment_factor));
    }
    if !(factor_at_realization > 0.0) {
        return Err(TargetError::NonPositiveFactor(factor_at_realization));
    }
    Ok(f.eps_forecast * (f.adjustment_factor / factor_at_realization))
}

/// Keeps the latest record per analyst among those passing `keep`;
/// ties on issue date go to the later record in input order.
fn latest_per_analyst(forecasts: &[ForecastRecord], keep: impl Fn(&ForecastRecord) -> bool) -> Vec<&ForecastRecord> {
    let mut latest: HashMap<&str, usize> = HashMap::new();
    for (i, f) in forecasts.iter().enumerate() {
        if !keep(f) {
            continue;
        }
        match latest.get(f.analyst_id.as_str()) {
            Some(&j) if forecasts[j].issue_date > f.issue_date => {}
            _ => {
                latest.insert(&f.analyst_id, i);
            }
        }
    }
    let mut idx: Vec<usize> = latest.into_values().collect();
    idx.sort_unstable();
    idx.into_iter().map(|i| &forecasts[i]).collect()
}

/// Post-call forecasts for `horizon` issued within `[call_date, call_date + 15d]`,
/// latest per analyst, in input order.
pub fn window_filter(forecasts: &[ForecastRecord], call_date: NaiveDate, horizon: u8) -> Vec<ForecastRecord> {
    let end = call_date + Duration::days(POST_CALL_WINDOW_DAYS);
    latest_per_analyst(forecasts, |f| {
        f.horizon_years == horizon && f.issue_date >= call_date && f.issue_date <= end
    })
    .into_iter()
    .cloned()
    .collect()
}

pub fn consensus_median(values: &[f64]) -> Result<f64, TargetError> {
    median(values).ok_or(TargetError::NoForecasts)
}

pub fn expected_change(consensus_yield: f64, base_yield: f64) -> f64 {
    (consensus_yield - base_yield) * BPS
}

pub fn realized_change(future_yield: f64, base_yield: f64) -> f64 {
    (future_yield - base_yield) * BPS
}

/// Price-scaled sample standard deviation of adjusted forecasts, in bps;
/// `None` with fewer than two forecasts.
pub fn disagreement(adjusted_eps: &[f64], price_at_call: f64) -> Result<Option<f64>, TargetError> {
    if !(price_at_call > 0.0) {
        return Err(TargetError::NonPositivePrice(price_at_call));
    }
    // sorted summation keeps the result independent of forecast order
    let mut v = adjusted_eps.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(sample_std(&v).map(|sd| sd / price_at_call * BPS))
}

/// Standardized unexpected earnings against the pre-call consensus: estimates
/// issued in `[call_date - 90d, call_date)`, latest per analyst, median.
pub fn compute_sue(
    actual_eps: f64,
    estimates: &[ForecastRecord],
    call_date: NaiveDate,
    price_at_call: f64,
) -> Result<Option<f64>, TargetError> {
    if !(price_at_call > 0.0) {
        return Err(TargetError::NonPositivePrice(price_at_call));
    }
    let start = call_date - Duration::days(SUE_WINDOW_DAYS);
    let kept = latest_per_analyst(estimates, |f| f.issue_date >= start && f.issue_date < call_date);
    let values: Vec<f64> = kept.iter().map(|f| f.eps_forecast).collect();
    Ok(median(&values).map(|m| (actual_eps - m) / price_at_call))
}

/// Interpolated (lower, upper) quantile bounds; `None` for empty input.
pub fn trim_bounds(values: &[f64], lower_q: f64, upper_q: f64) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some((quantile_sorted(&v, lower_q), quantile_sorted(&v, upper_q)))
}

/// Drops values strictly outside the interpolated quantile bounds.
pub fn trim(values: &[f64], lower_q: f64, upper_q: f64) -> Vec<f64> {
    match trim_bounds(values, lower_q, upper_q) {
        Some(bounds) => trim_with_bounds(values, bounds),
        None => Vec::new(),
    }
}

/// Keeps values inside `[lo, hi]`, preserving order.
pub fn trim_with_bounds(values: &[f64], (lo, hi): (f64, f64)) -> Vec<f64> {
    values.iter().copied().filter(|v| *v >= lo && *v <= hi).collect()
}

/// Corpus-level trimming pass: for each (target, horizon), values outside the
/// 5%/95% bounds are set to `None` in place.
pub fn trim_rows(rows: &mut [TargetRow], lower_q: f64, upper_q: f64) {
    for target in Target::ALL {
        for h in HORIZONS {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.horizon_years == h)
                .filter_map(|r| r.get(target))
                .collect();
            let Some((lo, hi)) = trim_bounds(&values, lower_q, upper_q) else {
                continue;
            };
            for r in rows.iter_mut().filter(|r| r.horizon_years == h) {
                let slot = r.slot(target);
                if let Some(v) = *slot {
                    if v < lo || v > hi {
                        *slot = None;
                    }
                }
            }
        }
    }
}

/// Builds one row per (event, horizon) with at least one post-call forecast.
/// Rows are ordered by (call_date, firm_id, horizon).
pub fn build_target_rows(
    events: &[EarningsEvent],
    forecasts: &[ForecastRecord],
) -> Result<Vec<TargetRow>, TargetError> {
    let mut by_firm: HashMap<&str, Vec<ForecastRecord>> = HashMap::new();
    for f in forecasts {
        f.validate()?;
        by_firm.entry(f.firm_id.as_str()).or_default().push(f.clone());
    }
    let empty = Vec::new();
    let mut rows = Vec::new();
    for ev in events {
        if !(ev.price_at_call > 0.0) {
            return Err(TargetError::NonPositivePrice(ev.price_at_call));
        }
        let firm_fc = by_firm.get(ev.firm_id.as_str()).unwrap_or(&empty);
        let factor = ev.adjustment_factor_at_realization;
        let base_yield = ev.realized_eps_prev / ev.price_at_call;

        // pre-call horizon-1 estimates on the realization basis feed SUE
        let pre_call: Vec<ForecastRecord> = firm_fc
            .iter()
            .filter(|f| f.horizon_years == 1)
            .map(|f| {
                Ok(ForecastRecord {
                    eps_forecast: adjust_forecast(f, factor)?,
                    adjustment_factor: 1.0,
                    ..f.clone()
                })
            })
            .collect::<Result<_, TargetError>>()?;
        let sue = compute_sue(ev.realized_eps_prev, &pre_call, ev.call_date, ev.price_at_call)?;

        for h in HORIZONS {
            let window = window_filter(firm_fc, ev.call_date, h);
            if window.is_empty() {
                continue;
            }
            let adjusted: Vec<f64> = window
                .iter()
                .map(|f| adjust_forecast(f, factor))
                .collect::<Result<_, _>>()?;
            let consensus = consensus_median(&adjusted)?;
            let ec = expected_change(consensus / ev.price_at_call, base_yield);
            let realized = ev
                .realized_future(h)
                .map(|y| realized_change(y / ev.price_at_call, base_yield));
            rows.push(TargetRow {
                firm_id: ev.firm_id.clone(),
                call_date: ev.call_date,
                horizon_years: h,
                expected_change_bps: Some(ec),
                disagreement_bps: disagreement(&adjusted, ev.price_at_call)?,
                realized_change_bps: realized,
                sue,
                n_forecasts: window.len(),
                base_yield,
            });
        }
    }
    rows.sort_by(|a, b| (a.call_date, &a.firm_id, a.horizon_years).cmp(&(b.call_date, &b.firm_id, b.horizon_years)));
    Ok(rows)
}

/// One line of the target summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Option<SummaryStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    Some(SummaryStats {
        count: n,
        mean,
        std: sample_std(&v).unwrap_or(0.0),
        min: v[0],
        p25: quantile_sorted(&v, 0.25),
        p50: quantile_sorted(&v, 0.5),
        p75: quantile_sorted(&v, 0.75),
        max: v[n - 1],
    })
}

/// Summary statistics per (target, horizon) over available values.
pub fn summary_table(rows: &[TargetRow]) -> BTreeMap<(Target, u8), SummaryStats> {
    let mut out = BTreeMap::new();
    for target in Target::ALL {
        for h in HORIZONS {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.horizon_years == h)
                .filter_map(|r| r.get(target))
                .collect();
            if let Some(s) = summarize(&values) {
                out.insert((target, h), s);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(day: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, 1).unwrap() + Duration::days(day)
    }

    fn fc(analyst: &str, day: i64, eps: f64) -> ForecastRecord {
        ForecastRecord {
            analyst_id: analyst.into(),
            broker_id: "B".into(),
            firm_id: "F".into(),
            issue_date: d(day),
            horizon_years: 1,
            eps_forecast: eps,
            adjustment_factor: 1.0,
        }
    }

    #[test]
    fn adjustment_examples() {
        let mut f = fc("A", 0, 2.0);
        assert_eq!(adjust_forecast(&f, 1.0).unwrap(), 2.0);
        f.adjustment_factor = 2.0;
        assert_eq!(adjust_forecast(&f, 1.0).unwrap(), 4.0);
        f.eps_forecast = 0.0;
        assert_eq!(adjust_forecast(&f, 3.0).unwrap(), 0.0);
        assert!(adjust_forecast(&f, 0.0).is_err());
        f.adjustment_factor = -1.0;
        assert!(adjust_forecast(&f, 1.0).is_err());
    }

    #[test]
    fn window_is_inclusive_and_dedups() {
        let fs = vec![fc("A", 15, 1.0), fc("B", 16, 1.0), fc("C", -1, 1.0)];
        let kept = window_filter(&fs, d(0), 1);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].analyst_id, "A");

        let fs = vec![fc("A", 9, 2.0), fc("A", 2, 1.0)];
        let kept = window_filter(&fs, d(0), 1);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].issue_date, d(9));

        let fs = vec![fc("A", 3, 1.0), fc("A", 3, 2.0)];
        assert_eq!(window_filter(&fs, d(0), 1)[0].eps_forecast, 2.0);

        let mut other_h = fc("A", 3, 1.0);
        other_h.horizon_years = 2;
        assert!(window_filter(&[other_h], d(0), 1).is_empty());
    }

    #[test]
    fn consensus_examples() {
        assert_eq!(consensus_median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(consensus_median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(consensus_median(&[5.0]).unwrap(), 5.0);
        assert_eq!(consensus_median(&[]), Err(TargetError::NoForecasts));
    }

    #[test]
    fn change_examples() {
        assert!((expected_change(0.06, 0.05) - 100.0).abs() < 1e-9);
        assert_eq!(expected_change(0.05, 0.05), 0.0);
        assert!((expected_change(0.04, 0.05) + 100.0).abs() < 1e-9);
        assert!((realized_change(0.07, 0.05) - 200.0).abs() < 1e-9);
        assert_eq!(realized_change(0.05, 0.05), 0.0);
        assert!((realized_change(0.03, 0.05) + 200.0).abs() < 1e-9);
    }

    #[test]
    fn disagreement_examples() {
        assert_eq!(disagreement(&[2.0, 2.0, 2.0], 37.0).unwrap(), Some(0.0));
        let v = disagreement(&[1.0, 3.0], 100.0).unwrap().unwrap();
        assert!((v - 141.421_356_237_309_5).abs() < 1e-9);
        assert_eq!(disagreement(&[1.0], 100.0).unwrap(), None);
        assert!(disagreement(&[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn sue_examples() {
        let s = compute_sue(1.10, &[fc("A", -5, 1.0)], d(0), 100.0).unwrap().unwrap();
        assert!((s - 0.001).abs() < 1e-12);
        let s = compute_sue(1.0, &[fc("A", -5, 1.0), fc("B", -6, 1.0)], d(0), 100.0).unwrap();
        assert_eq!(s, Some(0.0));
        let est = vec![fc("A", -80, 0.9), fc("A", -10, 1.1), fc("B", -30, 1.3)];
        let s = compute_sue(1.3, &est, d(0), 10.0).unwrap().unwrap();
        assert!((s - 0.01).abs() < 1e-12);
        // outside the 90-day window or on the call date itself
        let est = vec![fc("A", -91, 1.0), fc("B", 0, 1.0)];
        assert_eq!(compute_sue(1.0, &est, d(0), 10.0).unwrap(), None);
        assert!(compute_sue(1.0, &est, d(0), 0.0).is_err());
    }

    #[test]
    fn trim_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let kept = trim(&v, 0.05, 0.95);
        assert_eq!(kept, (6..=95).map(f64::from).collect::<Vec<_>>());
        assert_eq!(trim(&[4.0; 7], 0.05, 0.95), vec![4.0; 7]);
        assert_eq!(trim(&[1.0, 2.0, 3.0], 0.05, 0.95), vec![2.0]);
    }

    #[test]
    fn build_rows_end_to_end() {
        let ev = EarningsEvent {
            firm_id: "F".into(),
            call_date: d(0),
            realized_eps_prev: 5.0,
            price_at_call: 100.0,
            realized_eps_future: BTreeMap::from([("1".to_string(), 7.0)]),
            adjustment_factor_at_realization: 1.0,
            abnormal_return: None,
        };
        let fs = vec![
            fc("A", 1, 6.0),
            fc("B", 2, 6.5),
            fc("C", 3, 5.5),
            fc("D", 20, 100.0),
            fc("E", -10, 4.5),
        ];
        let rows = build_target_rows(&[ev], &fs).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert!((r.expected_change_bps.unwrap() - 100.0).abs() < 1e-9);
        assert!((r.realized_change_bps.unwrap() - 200.0).abs() < 1e-9);
        assert!((r.disagreement_bps.unwrap() - 50.0).abs() < 1e-9);
        assert!((r.sue.unwrap() - 0.005).abs() < 1e-12);
        assert_eq!(r.n_forecasts, 3);
    }

    #[test]
    fn trim_rows_marks_outliers_per_horizon() {
        let mk = |h: u8, v: f64| TargetRow {
            firm_id: "F".into(),
            call_date: d(0),
            horizon_years: h,
            expected_change_bps: Some(v),
            disagreement_bps: None,
            realized_change_bps: Some(0.0),
            sue: None,
            n_forecasts: 1,
            base_yield: 0.05,
        };
        let mut rows: Vec<TargetRow> = (1..=100).map(|i| mk(1, i as f64)).collect();
        rows.push(mk(2, 1000.0));
        trim_rows(&mut rows, 0.05, 0.95);
        let kept = rows
            .iter()
            .filter(|r| r.horizon_years == 1 && r.expected_change_bps.is_some());
        assert_eq!(kept.count(), 90);
        assert_eq!(rows[100].expected_change_bps, Some(1000.0));
        assert!(rows.iter().all(|r| r.realized_change_bps == Some(0.0)));
    }
}

//! Fixed-layout text tables and bar-chart datasets.
//!
//! Every renderer is a pure function of its input rows, so a report can be
//! re-rendered from stored run artifacts without touching a model.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::pte::PteAggregate;
use crate::stats::{AnalystBenchmark, CWResult};
use crate::targets::{SummaryStats, Target};
use crate::NarrativeDimension;

const PANEL_NUMERALS: [&str; 3] = ["(i)", "(ii)", "(iii)"];
pub const FUNDAMENTAL_NEWS: &str = "Fundamental News";

/// Out-of-sample r² of the fundamentals-only and the full model, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2Row {
    pub horizon_years: u8,
    pub r2_fundamentals_pct: f64,
    pub r2_full_pct: f64,
    pub gain_pct: f64,
}

impl R2Row {
    /// From r² fractions; the gain is the relative increase of the full model.
    pub fn from_fractions(horizon_years: u8, r2_fundamentals: f64, r2_full: f64) -> Self {
        let gain_pct = if r2_fundamentals != 0.0 {
            100.0 * (r2_full - r2_fundamentals) / r2_fundamentals.abs()
        } else {
            0.0
        };
        Self {
            horizon_years,
            r2_fundamentals_pct: 100.0 * r2_fundamentals,
            r2_full_pct: 100.0 * r2_full,
            gain_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwRow {
    pub horizon_years: u8,
    pub mse_reduction_pct: f64,
    pub t_stat: f64,
}

impl CwRow {
    pub fn from_result(horizon_years: u8, r: &CWResult) -> Self {
        Self {
            horizon_years,
            mse_reduction_pct: r.mse_reduction_pct,
            t_stat: r.t_stat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalystRow {
    pub horizon_years: u8,
    pub mse_forecast: f64,
    pub fundamentals_gain_pct: f64,
    pub total_gain_pct: f64,
}

impl AnalystRow {
    pub fn from_benchmark(horizon_years: u8, b: &AnalystBenchmark) -> Self {
        Self {
            horizon_years,
            mse_forecast: b.mse_analyst,
            fundamentals_gain_pct: b.fundamentals_gain_pct,
            total_gain_pct: b.total_gain_pct,
        }
    }
}

/// One bar group of the expected-versus-realized chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefBar {
    pub label: String,
    pub expected_bps: Option<f64>,
    pub realized_bps: Option<f64>,
}

impl BeliefBar {
    pub fn difference(&self) -> Option<f64> {
        Some(self.expected_bps? - self.realized_bps?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementBar {
    pub label: String,
    pub disagreement_bps: Option<f64>,
}

fn horizon_label(h: u8) -> String {
    format!("{h}Y")
}

fn num(v: f64, decimals: usize) -> String {
    // avoid printing "-0.00"
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map(|v| num(v, decimals)).unwrap_or_default()
}

/// Left-aligned first column, right-aligned others, two-space gutters.
fn grid(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    let line = |out: &mut String, cells: &[&str]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    out.push_str(&"-".repeat(total));
    out.push('\n');
    line(out, header);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        line(out, &cells);
    }
    out.push_str(&"-".repeat(total));
    out.push('\n');
}

fn panels<T>(title: &str, data: &BTreeMap<Target, Vec<T>>, header: &[&str], row: impl Fn(&T) -> Vec<String>) -> String {
    let mut out = format!("{title}\n");
    for (k, target) in Target::ALL.iter().enumerate() {
        let Some(rows) = data.get(target) else { continue };
        let _ = write!(out, "\n{} {}\n", PANEL_NUMERALS[k], target.label());
        let cells: Vec<Vec<String>> = rows.iter().map(&row).collect();
        grid(&mut out, header, &cells);
    }
    out
}

/// Summary statistics of the targets, one panel per target.
pub fn render_target_summary(stats: &BTreeMap<(Target, u8), SummaryStats>) -> String {
    let mut by_target: BTreeMap<Target, Vec<(u8, &SummaryStats)>> = BTreeMap::new();
    for ((t, h), s) in stats {
        by_target.entry(*t).or_default().push((*h, s));
    }
    panels(
        "Summary Statistics for Target Variables (bps)",
        &by_target,
        &["Horizon", "Count", "Mean", "Std", "Min", "p25", "p50", "p75", "Max"],
        |(h, s)| {
            let mut v = vec![horizon_label(*h), s.count.to_string()];
            v.extend([s.mean, s.std, s.min, s.p25, s.p50, s.p75, s.max].map(|x| num(x, 2)));
            v
        },
    )
}

pub fn render_r2_table(data: &BTreeMap<Target, Vec<R2Row>>) -> String {
    panels(
        "Predictive Accuracy for Analyst Behavior and Earnings Outcomes",
        data,
        &[
            "Horizon",
            "R-squared (Fundamentals)",
            "R-squared (Fundamentals + Text)",
            "Gain (%)",
        ],
        |r| {
            vec![
                horizon_label(r.horizon_years),
                num(r.r2_fundamentals_pct, 2),
                num(r.r2_full_pct, 2),
                num(r.gain_pct, 2),
            ]
        },
    )
}

/// Horizons run across the columns.
pub fn render_analyst_table(rows: &[AnalystRow]) -> String {
    let mut out = "Performance of the ML Model Relative to Analyst Forecasts\n".to_string();
    let mut header = vec!["Horizon".to_string()];
    header.extend(rows.iter().map(|r| horizon_label(r.horizon_years)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let line = |label: &str, f: &dyn Fn(&AnalystRow) -> String| {
        let mut v = vec![label.to_string()];
        v.extend(rows.iter().map(f));
        v
    };
    let cells = vec![
        line("MSE (Forecast)", &|r| num(r.mse_forecast, 6)),
        line("Fundamentals Gain (%)", &|r| num(r.fundamentals_gain_pct, 2)),
        line("Total Gain (%)", &|r| num(r.total_gain_pct, 2)),
    ];
    grid(&mut out, &header, &cells);
    out
}

pub fn render_cw_table(data: &BTreeMap<Target, Vec<CwRow>>) -> String {
    panels(
        "Improvement in Forecast Accuracy from Textual Features",
        data,
        &["Horizon", "MSE Reduction due to Text (%)", "C&W t-stat"],
        |r| {
            vec![
                horizon_label(r.horizon_years),
                num(r.mse_reduction_pct, 1),
                num(r.t_stat, 2),
            ]
        },
    )
}

/// CSV with one row per bar group: label, expected, realized, difference.
pub fn render_beliefs_csv(bars: &[BeliefBar]) -> String {
    let mut out = "narrative,analysts_expected_change_bps,realized_change_bps,difference_bps\n".to_string();
    for b in bars {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            b.label,
            opt(b.expected_bps, 2),
            opt(b.realized_bps, 2),
            opt(b.difference(), 2)
        );
    }
    out
}

pub fn render_disagreement_csv(bars: &[DisagreementBar]) -> String {
    let mut out = "narrative,forecast_disagreement_bps\n".to_string();
    for b in bars {
        let _ = writeln!(out, "{},{}", b.label, opt(b.disagreement_bps, 2));
    }
    out
}

fn lookup(aggs: &[PteAggregate], d: NarrativeDimension, t: Target, h: u8) -> Option<f64> {
    aggs.iter()
        .find(|a| a.dimension == d && a.target == t && a.horizon_years == h)
        .map(|a| a.mean_bps)
}

/// Expected-versus-realized bars for horizon `h`, dimensions in canonical
/// order followed by the fundamental-news benchmark.
pub fn belief_bars(
    aggs: &[PteAggregate],
    h: u8,
    news_expected: Option<f64>,
    news_realized: Option<f64>,
) -> Vec<BeliefBar> {
    let mut bars: Vec<BeliefBar> = NarrativeDimension::ALL
        .iter()
        .map(|&d| BeliefBar {
            label: d.label().to_string(),
            expected_bps: lookup(aggs, d, Target::ExpectedChange, h),
            realized_bps: lookup(aggs, d, Target::RealizedChange, h),
        })
        .collect();
    bars.push(BeliefBar {
        label: FUNDAMENTAL_NEWS.to_string(),
        expected_bps: news_expected,
        realized_bps: news_realized,
    });
    bars
}

pub fn disagreement_bars(aggs: &[PteAggregate], h: u8, news: Option<f64>) -> Vec<DisagreementBar> {
    let mut bars: Vec<DisagreementBar> = NarrativeDimension::ALL
        .iter()
        .map(|&d| DisagreementBar {
            label: d.label().to_string(),
            disagreement_bps: lookup(aggs, d, Target::Disagreement, h),
        })
        .collect();
    bars.push(DisagreementBar {
        label: FUNDAMENTAL_NEWS.to_string(),
        disagreement_bps: news,
    });
    bars
}

/// Values published with the original study, kept as layout fixtures.
#[allow(clippy::approx_constant)]
pub mod paper {
    use super::*;

    fn panel<T>(rows: [(Target, [T; 3]); 3]) -> BTreeMap<Target, Vec<T>> {
        rows.into_iter().map(|(t, r)| (t, r.into())).collect()
    }

    pub fn r2_table() -> BTreeMap<Target, Vec<R2Row>> {
        let r = |h, s, f, g| R2Row {
            horizon_years: h,
            r2_fundamentals_pct: s,
            r2_full_pct: f,
            gain_pct: g,
        };
        panel([
            (
                Target::ExpectedChange,
                [
                    r(1, 68.45, 69.35, 1.32),
                    r(2, 56.38, 57.07, 1.22),
                    r(3, 49.43, 50.15, 1.46),
                ],
            ),
            (
                Target::Disagreement,
                [
                    r(1, 57.91, 58.55, 1.11),
                    r(2, 57.62, 59.12, 2.60),
                    r(3, 51.19, 52.74, 3.05),
                ],
            ),
            (
                Target::RealizedChange,
                [
                    r(1, 54.59, 55.81, 2.23),
                    r(2, 38.02, 38.80, 2.06),
                    r(3, 33.26, 35.35, 6.28),
                ],
            ),
        ])
    }

    pub fn analyst_table() -> Vec<AnalystRow> {
        [
            (1, 0.001116, 5.75, 8.38),
            (2, 0.001784, 26.42, 27.50),
            (3, 0.002042, 29.59, 31.64),
        ]
        .into_iter()
        .map(|(h, m, f, t)| AnalystRow {
            horizon_years: h,
            mse_forecast: m,
            fundamentals_gain_pct: f,
            total_gain_pct: t,
        })
        .collect()
    }

    pub fn cw_table() -> BTreeMap<Target, Vec<CwRow>> {
        let r = |h, m, t| CwRow {
            horizon_years: h,
            mse_reduction_pct: m,
            t_stat: t,
        };
        panel([
            (
                Target::ExpectedChange,
                [r(1, 9.70, 11.67), r(2, 12.13, 11.06), r(3, 8.10, 7.32)],
            ),
            (
                Target::Disagreement,
                [r(1, 9.11, 10.50), r(2, 10.82, 9.89), r(3, 12.55, 7.64)],
            ),
            (
                Target::RealizedChange,
                [r(1, 6.97, 10.30), r(2, 9.21, 11.52), r(3, 8.93, 8.51)],
            ),
        ])
    }

    /// Only the averages quoted in the text are known; the rest stay empty.
    pub fn belief_bars() -> Vec<BeliefBar> {
        use NarrativeDimension::*;
        let known = |d| match d {
            Guidance => Some((10.84, 19.43)),
            Jargon => None,
            Confidence => Some((6.09, 25.76)),
            GlobalFocus => Some((10.84, -19.43)),
            Sentiment => Some((34.88, 25.76)),
            Uncertainty => Some((-9.22, -41.09)),
        };
        let mut bars: Vec<BeliefBar> = NarrativeDimension::ALL
            .iter()
            .map(|&d| BeliefBar {
                label: d.label().to_string(),
                expected_bps: known(d).map(|k| k.0),
                realized_bps: known(d).map(|k| k.1),
            })
            .collect();
        bars.push(BeliefBar {
            label: FUNDAMENTAL_NEWS.to_string(),
            expected_bps: None,
            realized_bps: None,
        });
        bars
    }

    pub fn disagreement_bars() -> Vec<DisagreementBar> {
        super::disagreement_bars(&[], 1, None)
    }
}

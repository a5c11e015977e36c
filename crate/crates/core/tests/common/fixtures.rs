use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use narrlab::targets::{EarningsEvent, ForecastRecord};
use proptest::prelude::*;

pub fn day(offset: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 6, 10).unwrap() + Duration::days(offset)
}

pub fn forecast(analyst: usize, offset: i64, horizon: u8, eps: f64) -> ForecastRecord {
    ForecastRecord {
        analyst_id: format!("A{analyst}"),
        broker_id: format!("B{}", analyst % 3),
        firm_id: "F".into(),
        issue_date: day(offset),
        horizon_years: horizon,
        eps_forecast: eps,
        adjustment_factor: 1.0,
    }
}

pub fn event() -> EarningsEvent {
    EarningsEvent {
        firm_id: "F".into(),
        call_date: day(0),
        realized_eps_prev: 2.0,
        price_at_call: 40.0,
        realized_eps_future: BTreeMap::from([("1".into(), 2.5), ("2".into(), 2.7)]),
        adjustment_factor_at_realization: 1.0,
        abnormal_return: Some(0.01),
    }
}

pub fn panel() -> impl Strategy<Value = Vec<ForecastRecord>> {
    // distinct (analyst, date) pairs so the latest-per-analyst rule is unambiguous
    prop::collection::vec((0usize..6, -100i64..30, 1u8..3, 1.0f64..4.0), 1..40).prop_map(|v| {
        let mut seen = std::collections::BTreeSet::new();
        v.into_iter()
            .filter(|(a, d, h, _)| seen.insert((*a, *d, *h)))
            .map(|(a, d, h, e)| forecast(a, d, h, e))
            .collect()
    })
}

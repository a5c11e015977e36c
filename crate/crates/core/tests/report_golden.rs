use narrlab::report::{self, paper};

macro_rules! golden {
    ($name:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/", $name))
    };
}

#[test]
fn r2_table() {
    assert_eq!(report::render_r2_table(&paper::r2_table()), golden!("r2_table.txt"));
}

#[test]
fn analyst_table() {
    assert_eq!(
        report::render_analyst_table(&paper::analyst_table()),
        golden!("analyst_table.txt")
    );
}

#[test]
fn cw_table() {
    assert_eq!(report::render_cw_table(&paper::cw_table()), golden!("cw_table.txt"));
}

#[test]
fn belief_bars() {
    assert_eq!(
        report::render_beliefs_csv(&paper::belief_bars()),
        golden!("belief_bars.csv")
    );
}

#[test]
fn disagreement_bars() {
    assert_eq!(
        report::render_disagreement_csv(&paper::disagreement_bars()),
        golden!("disagreement_bars.csv")
    );
}

#[test]
fn stored_rows_roundtrip_through_json() {
    let rows = paper::cw_table();
    let json = serde_json::to_string(&rows).unwrap();
    let back = serde_json::from_str(&json).unwrap();
    assert_eq!(report::render_cw_table(&back), golden!("cw_table.txt"));
}

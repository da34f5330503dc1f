use srcpref_core::results::{check_result_header, ResultRow, RESULT_COLUMNS, RESULT_ROW_SCHEMA};

fn row() -> ResultRow {
    ResultRow {
        model: "mock".into(),
        x: "government".into(),
        y: "social_media".into(),
        layout: "pair".into(),
        instruction_variant: "default".into(),
        answer_tokens: "AB".into(),
        sp_hat: 30.0,
        n: 100,
        ci_low: 29.0,
        ci_high: 31.0,
        p_value: 0.0001,
        excluded: 0,
        significant: true,
    }
}

#[test]
fn csv_header_matches_columns() {
    let mut w = csv::Writer::from_writer(vec![]);
    w.serialize(row()).unwrap();
    let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
    let header = text.lines().next().unwrap();
    assert!(check_result_header(header.split(',')).is_ok());
    assert!(check_result_header(RESULT_COLUMNS[..12].iter().copied()).is_err());
}

#[test]
fn rows_validate_against_schema() {
    let schema: serde_json::Value = serde_json::from_str(RESULT_ROW_SCHEMA).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let good = serde_json::to_value(row()).unwrap();
    assert!(v.is_valid(&good));
    let mut bad = good.clone();
    bad["p_value"] = serde_json::json!(1.5);
    assert!(!v.is_valid(&bad));
    let mut extra = good;
    extra["note"] = serde_json::json!("x");
    assert!(!v.is_valid(&extra));
}

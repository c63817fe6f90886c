use janossy_web::{bounds_row, collision_demo, cover_point};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn bounds_row_reports_grid() {
    let r = parse(bounds_row(1, 5, 1));
    assert_eq!(r["row"]["lower_bound_indexed"], 4);
    assert_eq!(r["row"]["known_upper"], 5);
    assert_eq!(r["s"], 5);
    assert_eq!(r["axis"], 1);
    assert!(parse(bounds_row(0, 5, 1))["error"].is_string());
}

#[test]
fn cover_point_separates_antipodes() {
    for i in 0..360 {
        let r = parse(cover_point(i as f64 * std::f64::consts::PI / 180.0));
        assert_ne!(r["region"], r["antipode_region"], "angle {i}");
    }
}

#[test]
fn collision_demo_below_and_above_threshold() {
    let r = parse(collision_demo(1, 0, 20, 64));
    assert_eq!(r["certified"], true);
    assert_eq!(r["landscape"].as_array().unwrap().len(), 64);
    let r = parse(collision_demo(3, 0, 20, 64));
    assert_eq!(r["certified"], false);
    assert!(parse(collision_demo(0, 0, 1, 64))["error"].is_string());
}

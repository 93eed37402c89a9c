//! The report JSON is a published format: field names and layout must not
//! drift. Set `UPDATE_GOLDEN=1` to regenerate after an intended change.

use magloop::verify::verify_loop;
use magloop::{DiscreteLoop, FieldPair, SpherePoint};
use serde_json::Value;
use std::f64::consts::FRAC_PI_4;
use std::path::Path;

fn same_shape(a: &Value, b: &Value, path: &str) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let kx: Vec<_> = x.keys().collect();
            let ky: Vec<_> = y.keys().collect();
            assert_eq!(kx, ky, "keys differ at {path}");
            for k in x.keys() {
                same_shape(&x[k], &y[k], &format!("{path}.{k}"));
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "length differs at {path}");
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                same_shape(p, q, &format!("{path}[{i}]"));
            }
        }
        // floating-point noise differs between platforms
        (Value::Number(x), Value::Number(y)) => {
            let (p, q) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((p - q).abs() <= 1e-9 * (1.0 + q.abs()), "{path}: {p} vs {q}");
        }
        _ => assert_eq!(a, b, "value differs at {path}"),
    }
}

#[test]
fn latitude_circle_report_matches_golden() {
    let lp = DiscreteLoop::circle(64, &SpherePoint::north(), FRAC_PI_4).unwrap();
    let report = verify_loop(&lp, &FieldPair::round(1.0).unwrap());
    let text = serde_json::to_string_pretty(&report).unwrap() + "\n";
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/report_latitude.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &text).unwrap();
    }
    let expected: Value = serde_json::from_str(&std::fs::read_to_string(&golden).unwrap()).unwrap();
    same_shape(&serde_json::from_str(&text).unwrap(), &expected, "report");
}

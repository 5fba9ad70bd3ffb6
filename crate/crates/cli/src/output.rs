//! Rows, and their CSV and JSON renderings.
//!
//! CSV columns (fixed): `n,alpha,s,quantity,value,residual,tol,pass`.
//! Empty cells mean "not applicable".

use std::io::Write;

use recipstat_core::report::VerificationReport;
use rug::Float;
use serde_json::{json, Map, Value};

pub const CSV_HEADER: [&str; 8] = ["n", "alpha", "s", "quantity", "value", "residual", "tol", "pass"];

#[derive(Clone, Debug)]
pub struct Row {
    pub n: Option<usize>,
    pub alpha: String,
    pub s: String,
    pub quantity: String,
    pub value: Option<Float>,
    pub residual: Option<f64>,
    pub tol: Option<f64>,
    pub pass: Option<bool>,
}

impl Row {
    pub fn value(n: Option<usize>, alpha: &str, s: &str, quantity: impl Into<String>, value: Float) -> Self {
        Row {
            n,
            alpha: alpha.to_string(),
            s: s.to_string(),
            quantity: quantity.into(),
            value: Some(value),
            residual: None,
            tol: None,
            pass: None,
        }
    }

    pub fn check(mut self, residual: f64, tol: f64) -> Self {
        self.residual = Some(residual);
        self.tol = Some(tol);
        self.pass = Some(residual <= tol);
        self
    }
}

/// Records of a verification report as rows at the grid point's own text.
pub fn report_rows(report: &VerificationReport, alpha: &str, s: &str) -> Vec<Row> {
    report
        .records
        .iter()
        .map(|r| Row {
            n: Some(r.n),
            alpha: alpha.to_string(),
            s: s.to_string(),
            quantity: r.id.clone(),
            value: r.value.clone(),
            residual: Some(r.residual),
            tol: Some(r.tol),
            pass: Some(r.pass),
        })
        .collect()
}

/// Scientific notation with `bits/4` significant digits.
pub fn format_float(v: &Float, bits: u32) -> String {
    // rug reads the precision as a count of significant digits.
    let digits = (bits / 4) as usize;
    format!("{:.*e}", digits, v)
}

fn format_small(x: f64) -> String {
    format!("{x:.3e}")
}

pub fn write_csv<W: Write>(rows: &[Row], bits: u32, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.alpha.clone(),
            r.s.clone(),
            r.quantity.clone(),
            r.value.as_ref().map(|v| format_float(v, bits)).unwrap_or_default(),
            r.residual.map(format_small).unwrap_or_default(),
            r.tol.map(format_small).unwrap_or_default(),
            r.pass.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Values are strings above double precision so that no digit is lost to a
/// consumer's float parser.
pub fn to_json(command: &str, rows: &[Row], bits: u32) -> Value {
    let as_value = |v: &Float| -> Value {
        if bits > 53 {
            Value::String(format_float(v, bits))
        } else {
            json!(v.to_f64())
        }
    };
    let items: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut m = Map::new();
            m.insert("n".into(), json!(r.n));
            m.insert("alpha".into(), json!(r.alpha));
            m.insert("s".into(), json!(r.s));
            m.insert("quantity".into(), json!(r.quantity));
            m.insert("value".into(), r.value.as_ref().map_or(Value::Null, as_value));
            m.insert("residual".into(), json!(r.residual));
            m.insert("tol".into(), json!(r.tol));
            m.insert("pass".into(), json!(r.pass));
            Value::Object(m)
        })
        .collect();
    let checks = rows.iter().filter(|r| r.pass.is_some()).count();
    let failed = rows.iter().filter(|r| r.pass == Some(false)).count();
    json!({
        "command": command,
        "prec_bits": bits,
        "passed": failed == 0,
        "checks": checks,
        "failed": failed,
        "rows": items,
    })
}

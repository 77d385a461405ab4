use std::fmt::Write;

use covar_core::FrontierPoint;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    let mag = v.abs();
    if v.is_nan() {
        String::new()
    } else if mag != 0.0 && !(1e-5..1e16).contains(&mag) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| num(*x)).collect();
    format!("[{}]", items.join(", "))
}

pub fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("records serialize") + "\n"
}

/// One CSV line per point: `E,value,efficient,status,w1..wn`.
pub fn frontier_csv(points: &[FrontierPoint], n: usize) -> String {
    let mut out = String::from("E,value,efficient,status");
    for i in 1..=n {
        write!(out, ",w{i}").unwrap();
    }
    out.push('\n');
    for p in points {
        csv_row(&mut out, p.target, Some(p.value), p.efficient, &p.status, Some(&p.weights), n);
    }
    out
}

pub fn csv_row(
    out: &mut String,
    e: f64,
    value: Option<f64>,
    efficient: bool,
    status: &str,
    weights: Option<&[f64]>,
    n: usize,
) {
    write!(out, "{},{},{},{}", num(e), value.map(num).unwrap_or_default(), efficient, status).unwrap();
    for i in 0..n {
        out.push(',');
        if let Some(w) = weights {
            out.push_str(&num(w[i]));
        }
    }
    out.push('\n');
}

pub fn frontier_text(points: &[FrontierPoint]) -> String {
    let mut out = format!("{:>24} {:>24} {:>9} {:<18} weights\n", "E", "value", "efficient", "status");
    for p in points {
        writeln!(
            out,
            "{:>24} {:>24} {:>9} {:<18} {}",
            num(p.target),
            num(p.value),
            p.efficient,
            p.status,
            list(&p.weights)
        )
        .unwrap();
    }
    out
}

/// `key,value` CSV for scalar reports.
pub fn pairs_csv(pairs: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in pairs {
        writeln!(out, "{k},{}", if v.contains(',') { format!("\"{v}\"") } else { v.clone() }).unwrap();
    }
    out
}

pub fn pairs_text(pairs: &[(&str, String)]) -> String {
    let width = pairs.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in pairs {
        writeln!(out, "{k:<width$}  {v}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -1.474_389_425_722_254_7, 1e-300, 6.02e23] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(2.0), "2");
        assert_eq!(num(8.881784197001252e-16), "8.881784197001252e-16");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(f64::NAN), "");
    }

    #[test]
    fn csv_layout() {
        let p = FrontierPoint {
            target: 2.0,
            value: -1.0,
            weights: vec![1.0, 0.0, 0.0],
            efficient: true,
            status: "Unique".into(),
        };
        assert_eq!(frontier_csv(&[p], 3), "E,value,efficient,status,w1,w2,w3\n2,-1,true,Unique,1,0,0\n");
    }
}

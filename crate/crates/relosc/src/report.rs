//! Machine-readable reporting with reproducible bytes.
//!
//! Reports are assembled as an ordered JSON tree and written with a
//! fixed float format (17 significant digits, scientific), so a rerun
//! with the same seed produces byte-identical files and every float
//! survives a parse round trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::minimize::{MinimaReport, TwoMinimaCertificate};
use crate::saddle::TraceRow;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj(fields: Vec<(&str, Json)>) -> Json {
        Json::Obj(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn str(s: impl Into<String>) -> Json {
        Json::Str(s.into())
    }

    pub fn num_array(values: &[f64]) -> Json {
        Json::Arr(values.iter().map(|v| Json::Num(*v)).collect())
    }

    pub fn to_json_string(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Json::Num(v) => {
                let _ = write!(out, "{}", fmt_f64(*v));
            }
            Json::Str(s) => write_escaped(out, s),
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    item.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
            Json::Obj(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (key, value)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    write_escaped(out, key);
                    out.push_str(": ");
                    value.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
    }
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// 17 significant digits, scientific; round trips through `parse::<f64>`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

pub fn certificate_json(cert: &Option<TwoMinimaCertificate>) -> Json {
    match cert {
        None => Json::Null,
        Some(c) => Json::obj(vec![
            ("value_gap", Json::Num(c.value_gap)),
            ("separation", Json::Num(c.separation)),
            ("eps_val", Json::Num(c.eps_val)),
            ("eps_sep", Json::Num(c.eps_sep)),
        ]),
    }
}

pub fn minima_report_json(report: &MinimaReport) -> Json {
    let clusters = report
        .clusters
        .iter()
        .map(|c| {
            Json::obj(vec![
                ("value", Json::Num(c.value)),
                ("multiplicity", Json::Int(c.multiplicity as i64)),
                ("residual", Json::Num(c.residual)),
                (
                    "representative_first_node",
                    Json::num_array(c.representative.node(0)),
                ),
            ])
        })
        .collect();
    Json::obj(vec![
        ("runs", Json::Int(report.runs.len() as i64)),
        ("eps_val", Json::Num(report.eps_val)),
        ("eps_sep", Json::Num(report.eps_sep)),
        ("clusters", Json::Arr(clusters)),
        ("certificate", certificate_json(&report.certificate)),
    ])
}

/// Writes cluster representatives as CSV blocks; each block carries
/// `node_count + 1` data rows, the closing node repeated at `t = T`.
pub fn write_trajectories_csv(path: &Path, labeled: &[(usize, &Trajectory)]) -> Result<()> {
    let mut out = String::new();
    let dim = labeled.first().map_or(1, |(_, u)| u.dim());
    out.push_str("cluster,t");
    for k in 1..=dim {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    for (label, u) in labeled {
        for (t, node) in u.csv_rows() {
            let _ = write!(out, "{label},{}", fmt_f64(t));
            for c in node {
                let _ = write!(out, ",{}", fmt_f64(c));
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Ascent trace: `iter, m, cells..., certificate`.
pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut out = String::new();
    let cells = rows.first().map_or(0, |r| r.psi.len());
    out.push_str("iter,m");
    for c in 0..cells {
        let _ = write!(out, ",psi{c}");
    }
    out.push_str(",certificate\n");
    for row in rows {
        let _ = write!(out, "{},{}", row.iter, fmt_f64(row.m));
        for v in &row.psi {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        let _ = writeln!(out, ",{}", i32::from(row.certificate));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_convergence_csv(path: &Path, rows: &[crate::verify::StudyRow]) -> Result<()> {
    let mut out = String::from("N,value,max_residual\n");
    for row in rows {
        let _ = writeln!(out, "{},{},{}", row.node_count, fmt_f64(row.value), fmt_f64(row.residual));
    }
    std::fs::write(path, out)?;
    Ok(())
}

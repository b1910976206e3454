//! Plain-text artifacts: trace and event CSVs and `key = value` summaries.
//!
//! Floats use the shortest representation that parses back to the same value,
//! so identical runs produce identical bytes.

use std::fmt::Write;

use crate::sim::engine::SimTrace;

/// Trace header. One-mode runs use `x`/`xhat`; multi-mode runs list modal states
/// `st*`, physical states `s*` and modal estimates `shat*`.
pub fn trace_header(dim: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    if dim == 1 {
        cols.extend(["x", "xhat"].map(String::from));
    } else {
        cols.extend((1..=dim).map(|i| format!("st{i}")));
        cols.extend((1..=dim).map(|i| format!("s{i}")));
        cols.extend((1..=dim).map(|i| format!("shat{i}")));
    }
    cols.extend(["z", "u", "w", "trigger", "reception"].map(String::from));
    cols
}

pub fn trace_csv(trace: &SimTrace) -> String {
    let mut out = trace_header(trace.dim).join(",");
    out.push('\n');
    for r in &trace.rows {
        let mut fields = vec![r.t.to_string()];
        if trace.dim == 1 {
            fields.push(r.s[0].to_string());
            fields.push(r.shat[0].to_string());
        } else {
            fields.extend(r.s.iter().chain(&r.phys).chain(&r.shat).map(f64::to_string));
        }
        fields.extend([r.z, r.u, r.w].map(|v| v.to_string()));
        fields.push(r.triggers.to_string());
        fields.push(r.receptions.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub const EVENT_HEADER: [&str; 10] = [
    "k", "t_s", "t_c", "delta_k", "interval_k", "sign", "cell_index", "g_bits", "q", "z_post",
];

/// Event log; `q` and `z_post` are empty for packets still in flight at the horizon.
pub fn events_csv(trace: &SimTrace) -> String {
    let mut out = EVENT_HEADER.join(",");
    out.push('\n');
    for e in &trace.events {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            e.k,
            e.t_s,
            e.t_c,
            e.delay(),
            e.interval,
            e.sign,
            e.cell_index.map(|c| c.to_string()).unwrap_or_default(),
            e.bits,
            opt(e.q),
            opt(e.z_post),
        );
    }
    out
}

pub fn kv_text<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{} = {}", k.as_ref(), v.as_ref());
    }
    out
}

//! CSV rows, JSONL sample dumps and SVG plots.

use std::fmt::Write as _;

use crate::stats::{Derived, EstimatorResult, ParamRecord};

pub const CSV_COLUMNS: [&str; 22] = [
    "experiment", "d", "q", "p", "eps", "L", "N", "M", "K", "delta", "C", "ell", "bc", "seed", "chains", "samples",
    "estimate", "stderr", "derived_name", "derived_value", "derived_stderr", "flag",
];

/// Shortest round-trip decimal, so equal floats always print equally.
fn num(v: f64) -> String {
    format!("{v}")
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn optf(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn row(r: &EstimatorResult) -> Vec<String> {
    let p = &r.params;
    let (dn, dv, ds) = match &r.derived {
        Some(d) => (d.name.clone(), num(d.value), num(d.stderr)),
        None => Default::default(),
    };
    vec![
        r.observable.clone(),
        opt(&p.d),
        optf(p.q),
        optf(p.p),
        optf(p.eps),
        opt(&p.l),
        opt(&p.n),
        opt(&p.m),
        opt(&p.k),
        optf(p.delta),
        optf(p.c),
        opt(&p.ell),
        p.bc.clone().unwrap_or_default(),
        opt(&p.seed),
        opt(&p.chains),
        r.samples.to_string(),
        num(r.estimate),
        num(r.stderr),
        dn,
        dv,
        ds,
        r.flag.clone().unwrap_or_default(),
    ]
}

pub fn results_csv(rows: &[EstimatorResult]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record(row(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf8 fields")
}

/// Parse rows written by [`results_csv`].
pub fn parse_results_csv(text: &str) -> Result<Vec<EstimatorResult>, String> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let f = |i: usize| rec.get(i).filter(|s| !s.is_empty());
        let pf = |i: usize| -> Result<Option<f64>, String> { f(i).map(|s| s.parse().map_err(|_| format!("bad number {s:?}"))).transpose() };
        let pi = |i: usize| -> Result<Option<i64>, String> { f(i).map(|s| s.parse().map_err(|_| format!("bad integer {s:?}"))).transpose() };
        let params = ParamRecord {
            d: pi(1)?.map(|v| v as usize),
            q: pf(2)?,
            p: pf(3)?,
            eps: pf(4)?,
            l: pi(5)?,
            n: pi(6)?,
            m: pi(7)?,
            k: pi(8)?,
            delta: pf(9)?,
            c: pf(10)?,
            ell: pi(11)?,
            bc: f(12).map(str::to_string),
            seed: f(13).map(|s| s.parse().map_err(|_| format!("bad seed {s:?}"))).transpose()?,
            chains: pi(14)?.map(|v| v as usize),
        };
        let mut r = EstimatorResult::new(
            rec.get(0).unwrap_or_default(),
            params,
            pi(15)?.unwrap_or(0) as u64,
            pf(16)?.unwrap_or(f64::NAN),
            pf(17)?.unwrap_or(0.0),
        );
        if let Some(name) = f(18) {
            r.derived = Some(Derived { name: name.into(), value: pf(19)?.unwrap_or(f64::NAN), stderr: pf(20)?.unwrap_or(0.0) });
        }
        r.flag = f(21).map(str::to_string);
        out.push(r);
    }
    Ok(out)
}

pub fn jsonl(lines: &[serde_json::Value]) -> String {
    let mut s = String::new();
    for l in lines {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    s
}

/// One curve point with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub se: f64,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Line plot of `y` against `x` with a `±2·se` band.
pub fn svg_curve(title: &str, xlabel: &str, ylabel: &str, pts: &[Point]) -> String {
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let finite: Vec<Point> = pts.iter().copied().filter(|p| p.x.is_finite() && p.y.is_finite()).collect();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    if finite.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">no finite points</text>"#, w / 2.0, h / 2.0);
        s.push_str("</svg>\n");
        return s;
    }
    let band = |p: &Point| if p.se.is_finite() { 2.0 * p.se } else { 0.0 };
    let mut x0 = finite.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let mut x1 = finite.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let mut y0 = finite.iter().map(|p| p.y - band(p)).fold(f64::INFINITY, f64::min);
    let mut y1 = finite.iter().map(|p| p.y + band(p)).fold(f64::NEG_INFINITY, f64::max);
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    let _ = writeln!(s, r##"<g stroke="#444" fill="none"><path d="M{ml} {mt} V{} H{}"/></g>"##, h - mb, w - mr);
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(fx), h - mb + 16.0, tick(fx));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 6.0, py(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (ml + w - mr) / 2.0, h - 10.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0,
        escape(ylabel)
    );
    let mut sorted = finite.clone();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    let upper: Vec<String> = sorted.iter().map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y + band(p)))).collect();
    let lower: Vec<String> = sorted.iter().rev().map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y - band(p)))).collect();
    let _ = writeln!(s, r##"<polygon fill="#9ecae1" fill-opacity="0.5" points="{} {}"/>"##, upper.join(" "), lower.join(" "));
    let line: Vec<String> = sorted.iter().map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y))).collect();
    let _ = writeln!(s, r##"<polyline fill="none" stroke="#08519c" stroke-width="2" points="{}"/>"##, line.join(" "));
    for p in &sorted {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#08519c"/>"##, px(p.x), py(p.y));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let params = ParamRecord { d: Some(2), p: Some(0.5), bc: Some("free".into()), seed: Some(7), ..Default::default() };
        let rows = vec![
            EstimatorResult::new("a", params.clone(), 10, 1.0 / 3.0, 0.01).with_log_rate("tau", 2.0),
            EstimatorResult::new("b,with comma", params, 10, 0.0, 0.0).with_log_rate("tau", 2.0),
        ];
        let text = results_csv(&rows);
        assert!(text.starts_with("experiment,d,q,p,eps,L,N,M,K,delta,C,ell,bc,seed,chains,samples,estimate"));
        let back = parse_results_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].estimate, 1.0 / 3.0);
        assert_eq!(back[1].observable, "b,with comma");
        assert!(back[1].is_bound());
        assert_eq!(results_csv(&back), text);
    }

    #[test]
    fn svg_is_well_formed() {
        let pts = [Point { x: 0.1, y: 0.2, se: 0.01 }, Point { x: 0.5, y: 0.6, se: 0.02 }];
        let s = svg_curve("t <x>", "p", "est", &pts);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("&lt;x&gt;"));
        assert!(svg_curve("empty", "x", "y", &[]).contains("no finite points"));
    }
}

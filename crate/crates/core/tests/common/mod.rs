#![allow(dead_code)]

use fklab::{BoundarySpec, EstimatorResult};

/// Every partition of `nodes` into blocks, as wirings. Singleton blocks are
/// dropped since an unwired vertex already counts on its own.
pub fn wirings(nodes: &[u32]) -> Vec<BoundarySpec> {
    let n = nodes.len();
    let mut out = Vec::new();
    // Restricted growth strings a[0]=0, a[i] <= 1 + max(a[..i]).
    let mut a = vec![0usize; n];
    loop {
        let k = a.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); k];
        for (i, &b) in a.iter().enumerate() {
            blocks[b].push(nodes[i]);
        }
        blocks.retain(|b| b.len() > 1);
        out.push(BoundarySpec::from_blocks(blocks));
        let mut i = n;
        loop {
            if i <= 1 {
                return out;
            }
            i -= 1;
            let bound = a[..i].iter().max().copied().unwrap_or(0) + 1;
            if a[i] < bound {
                a[i] += 1;
                a[i + 1..].iter_mut().for_each(|x| *x = 0);
                break;
            }
        }
    }
}

/// `|estimate − exact| / stderr`, infinite when a nonzero gap has no error bar.
pub fn z_exact(r: &EstimatorResult, exact: f64) -> f64 {
    let gap = (r.estimate - exact).abs();
    if r.stderr > 0.0 {
        gap / r.stderr
    } else if gap < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// One result line. Written to the process stdout directly so that the test
/// harness does not capture it.
pub fn verdict(criterion: u32, ok: bool, detail: &str) {
    use std::io::Write;
    let line = format!("{} criterion {criterion}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

//! Trajectory CSV and JSON writers.

use std::io::Write;
use std::path::Path;

use hfo::analysis::{dist_to_A, Constants};
use hfo::hybrid::HybridArc;
use hfo::model::State;
use serde::Serialize;

use crate::CliError;

pub fn csv_header(n: usize, m: usize, p: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["t".into(), "j".into(), "case".into()];
    for (prefix, len) in [("x", n), ("u", m), ("ys", p), ("z", m)] {
        h.extend((0..len).map(|i| format!("{prefix}_{i}")));
    }
    h.extend(["tau_c", "tau_g", "dist_to_A"].map(String::from));
    h
}

fn row(t: f64, j: usize, case: &str, s: &State, c: &Constants) -> Vec<String> {
    let mut r = vec![t.to_string(), j.to_string(), case.to_string()];
    for v in [&s.x, &s.u, &s.y_s, &s.z] {
        r.extend(v.iter().map(f64::to_string));
    }
    r.extend([s.tau_c, s.tau_g, dist_to_A(s, c)].map(|v| v.to_string()));
    r
}

/// One `flow` row per stored sample and a pre/post pair per jump. Segment
/// endpoints that coincide with a jump row are not repeated.
pub fn write_trajectory<W: Write>(w: W, arc: &HybridArc, c: &Constants) -> Result<(), CliError> {
    let s0 = arc.segments[0].start();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(csv_header(s0.x.len(), s0.u.len(), s0.y_s.len()))?;
    for (k, seg) in arc.segments.iter().enumerate() {
        let skip_first = usize::from(k > 0);
        let keep = seg.samples.len().saturating_sub(skip_first + usize::from(k < arc.jumps.len()));
        for sample in seg.samples.iter().skip(skip_first).take(keep) {
            out.write_record(row(sample.t, seg.j, "flow", &sample.state, c))?;
        }
        if let Some(jump) = arc.jumps.get(k) {
            let label = jump.kind.label();
            out.write_record(row(jump.time.t, jump.time.j, &format!("{label}.pre"), &jump.state_before, c))?;
            out.write_record(row(jump.time.t, jump.time.j + 1, &format!("{label}.post"), &jump.state_after, c))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        assert_eq!(
            csv_header(2, 1, 3).join(","),
            "t,j,case,x_0,x_1,u_0,ys_0,ys_1,ys_2,z_0,tau_c,tau_g,dist_to_A"
        );
    }
}

//! Persistence: the binary checkpoint container, CSV rows and SVG plots.
//!
//! Checkpoints are the 8-byte magic `RGFLOW01`, the header length as a
//! little-endian `u64`, a UTF-8 JSON header and a payload of
//! little-endian `f64`.

use std::io::{Read, Write};

use serde_json::{json, Value};

use crate::euler::EulerTrajectory;
use crate::viscous::Trajectory;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RGFLOW01";

/// A float with 17 significant digits (exact round trip).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-separated floats terminated by a newline.
pub fn csv_line(values: &[f64]) -> String {
    let mut s = values.iter().map(|v| fmt_float(*v)).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

/// Parsed checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: Value,
    pub payload: Vec<f64>,
}

pub fn write_checkpoint(w: &mut impl Write, header: &Value, payload: &[f64]) -> Result<()> {
    let h = serde_json::to_vec(header).map_err(|e| Error::InvalidInput(format!("checkpoint header: {e}")))?;
    w.write_all(MAGIC)?;
    w.write_all(&(h.len() as u64).to_le_bytes())?;
    w.write_all(&h)?;
    let mut buf = Vec::with_capacity(payload.len() * 8);
    for x in payload {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidInput("not a checkpoint: bad magic".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut h = vec![0u8; len];
    r.read_exact(&mut h)?;
    let header: Value = serde_json::from_slice(&h).map_err(|e| Error::InvalidInput(format!("checkpoint header: {e}")))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if rest.len() % 8 != 0 {
        return Err(Error::InvalidInput(format!("checkpoint payload of {} bytes is not a float array", rest.len())));
    }
    let payload = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok(Checkpoint { header, payload })
}

/// Header and payload of a Galerkin trajectory: per sample `t` then the
/// `n` coefficients.
pub fn viscous_checkpoint(traj: &Trajectory) -> (Value, Vec<f64>) {
    let n = traj.coeffs.first().map_or(0, |c| c.len());
    let header = json!({
        "kind": "viscous",
        "nu": traj.nu,
        "alpha": traj.alpha,
        "dt": traj.dt,
        "basis_size": n,
        "samples": traj.times.len(),
        "layout": "per sample: t, coefficients",
    });
    let mut payload = Vec::with_capacity(traj.times.len() * (n + 1));
    for (t, c) in traj.times.iter().zip(&traj.coeffs) {
        payload.push(*t);
        payload.extend(c.iter());
    }
    (header, payload)
}

/// Header and payload of a particle trajectory: per sample `t`, `ℓ`, `r`,
/// then position and strength of every particle.
pub fn euler_checkpoint(traj: &EulerTrajectory) -> (Value, Vec<f64>) {
    let np = traj.states.first().map_or(0, |s| s.field.particles.len());
    let header = json!({
        "kind": "euler",
        "dt": traj.dt,
        "fixed_body": traj.fixed_body,
        "particles": np,
        "epsilon": traj.states.first().map_or(0.0, |s| s.field.epsilon),
        "samples": traj.states.len(),
        "layout": "per sample: t, linear[3], angular[3], then per particle position[3], strength[3]",
    });
    let mut payload = Vec::new();
    for s in &traj.states {
        payload.push(s.t);
        payload.extend(s.linear.iter().chain(s.angular.iter()));
        for p in &s.field.particles {
            payload.extend(p.position.iter().chain(p.strength.iter()));
        }
    }
    (header, payload)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log plot of each series against `x`, with a note under the title.
pub fn loglog_svg(title: &str, xlabel: &str, x: &[f64], series: &[(String, Vec<f64>)], note: &str) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = series.iter().flat_map(|(_, y)| y.iter()).filter(|v| **v > 0.0).map(|v| v.log10()).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi.is_finite()) {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo))
        }
    };
    let ((x0, x1), (y0, y1)) = (span(&lx), span(&ly));
    let px = |v: f64| m + (v - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |v: f64| h - m - (v - y0) / (y1 - y0) * (h - 2.0 * m);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{m}\" y=\"24\" font-size=\"15\">{}</text>\n<text x=\"{m}\" y=\"42\">{}</text>\n\
         <rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">log10 {}</text>\n",
        esc(title),
        esc(note),
        w - 2.0 * m,
        h - 2.0 * m,
        w / 2.0,
        h - 20.0,
        esc(xlabel)
    );
    for (k, (label, y)) in series.iter().enumerate() {
        let c = colors[k % colors.len()];
        let pts: Vec<String> = lx
            .iter()
            .zip(y)
            .filter(|(_, v)| **v > 0.0)
            .map(|(a, v)| format!("{:.2},{:.2}", px(*a), py(v.log10())))
            .collect();
        s.push_str(&format!("<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"2\" points=\"{}\"/>\n", pts.join(" ")));
        for p in &pts {
            let (a, b) = p.split_once(',').expect("formatted pair");
            s.push_str(&format!("<circle cx=\"{a}\" cy=\"{b}\" r=\"3\" fill=\"{c}\"/>\n"));
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{c}\">{}</text>\n",
            w - m - 150.0,
            m + 16.0 + 16.0 * k as f64,
            esc(label)
        ));
    }
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        s.push_str(&format!("<text x=\"{:.2}\" y=\"{}\" text-anchor=\"{anchor}\">{v:.2}</text>\n", px(v), h - m + 16.0));
    }
    for v in [y0, y1] {
        s.push_str(&format!("<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2}</text>\n", m - 4.0, py(v)));
    }
    s.push_str("</svg>\n");
    s
}

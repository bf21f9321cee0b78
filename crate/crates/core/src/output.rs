//! Text formats for experiment artifacts.
//!
//! Every float is written as `{:.16e}` (17 significant digits), which
//! round-trips exactly and keeps reruns byte-identical.

use std::fmt::Write as _;

use crate::dynamics::Trajectory;

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn join_f64(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

/// Columns `time, particle, w_1..w_d, b, a`, one row per particle per snapshot.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let d = tr.snapshots.first().map_or(0, |e| e.input_dim());
    let mut out = String::from("time,particle");
    for k in 1..=d {
        let _ = write!(out, ",w_{k}");
    }
    out.push_str(",b,a\n");
    for ens in &tr.snapshots {
        let t = fmt_f64(ens.time);
        for (i, p) in ens.particles().enumerate() {
            let _ = writeln!(out, "{t},{i},{}", join_f64(p.iter().copied()));
        }
    }
    out
}

/// Columns `time, risk, mc_stderr`.
pub fn risk_csv(tr: &Trajectory) -> String {
    let mut out = String::from("time,risk,mc_stderr\n");
    for r in &tr.risk {
        let _ = writeln!(out, "{},{},{}", fmt_f64(r.time), fmt_f64(r.risk), fmt_f64(r.mc_stderr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}

//! Trajectory and curve CSV formats plus the event sidecar.
//!
//! Trajectory rows are `tau,x_0..x_{n-1},v_0..v_{n-1},branch_id`; plain
//! curves drop the velocity and branch columns. Floats print with 17
//! significant digits so files round-trip bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::curve::SampledCurve;
use crate::error::{Error, Result};
use crate::filippov::GeodesicTrajectory;

/// 17 significant digits; round-trips every f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Render a trajectory in the full CSV format.
pub fn trajectory_to_csv(traj: &GeodesicTrajectory) -> String {
    let n = traj.first().x.len();
    let mut out = String::new();
    out.push_str("tau");
    for i in 0..n {
        let _ = write!(out, ",x_{i}");
    }
    for i in 0..n {
        let _ = write!(out, ",v_{i}");
    }
    out.push_str(",branch_id\n");
    for (state, branch) in traj.states.iter().zip(&traj.branch_ids) {
        out.push_str(&format_float(state.tau));
        for c in state.x.iter() {
            out.push(',');
            out.push_str(&format_float(*c));
        }
        for c in state.v.iter() {
            out.push(',');
            out.push_str(&format_float(*c));
        }
        let _ = writeln!(out, ",{branch}");
    }
    out
}

/// Render a curve as CSV without velocity or branch columns.
pub fn curve_to_csv(curve: &SampledCurve) -> String {
    let n = curve.dim();
    let mut out = String::new();
    out.push_str("tau");
    for i in 0..n {
        let _ = write!(out, ",x_{i}");
    }
    out.push('\n');
    for (t, p) in curve.params().iter().zip(curve.points()) {
        out.push_str(&format_float(*t));
        for c in p.iter() {
            out.push(',');
            out.push_str(&format_float(*c));
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(path: &Path, traj: &GeodesicTrajectory) -> Result<()> {
    std::fs::write(path, trajectory_to_csv(traj))?;
    Ok(())
}

pub fn write_curve_csv(path: &Path, curve: &SampledCurve) -> Result<()> {
    std::fs::write(path, curve_to_csv(curve))?;
    Ok(())
}

/// Event list as a JSON sidecar next to a trajectory CSV.
pub fn events_to_json(traj: &GeodesicTrajectory) -> String {
    serde_json::to_string_pretty(&traj.events).expect("events serialize")
}

pub fn write_events_json(path: &Path, traj: &GeodesicTrajectory) -> Result<()> {
    std::fs::write(path, events_to_json(traj))?;
    Ok(())
}

/// Parse a curve from either CSV layout; velocity columns are attached when
/// present.
pub fn read_curve_csv(text: &str) -> Result<SampledCurve> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"tau") {
        return Err(Error::Parse(format!(
            "expected first column 'tau', got {header:?}"
        )));
    }
    let n_x = cols.iter().filter(|c| c.starts_with("x_")).count();
    let n_v = cols.iter().filter(|c| c.starts_with("v_")).count();
    if n_x == 0 {
        return Err(Error::Parse("no x_* columns in header".into()));
    }
    if n_v != 0 && n_v != n_x {
        return Err(Error::Parse(format!(
            "{n_v} velocity columns do not match {n_x} position columns"
        )));
    }

    let mut params = Vec::new();
    let mut points = Vec::new();
    let mut velocities = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 1 + n_x + n_v {
            return Err(Error::Parse(format!(
                "line {}: expected at least {} fields, got {}",
                lineno + 2,
                1 + n_x + n_v,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
        };
        params.push(parse(fields[0])?);
        let mut p = DVector::zeros(n_x);
        for i in 0..n_x {
            p[i] = parse(fields[1 + i])?;
        }
        points.push(p);
        if n_v > 0 {
            let mut v = DVector::zeros(n_x);
            for i in 0..n_x {
                v[i] = parse(fields[1 + n_x + i])?;
            }
            velocities.push(v);
        }
    }
    let curve = SampledCurve::new(params, points)?;
    if velocities.is_empty() {
        Ok(curve)
    } else {
        curve.with_velocities(velocities)
    }
}

pub fn read_curve_csv_file(path: &Path) -> Result<SampledCurve> {
    read_curve_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filippov::{integrate_geodesic, FilippovState};
    use crate::lvec;
    use crate::zoo::{self, MetricSpec};

    #[test]
    fn trajectory_csv_round_trips_as_curve() {
        let field = zoo::make_metric(&MetricSpec::Minkowski { n: 2, domain_radius: None }).unwrap();
        let init = FilippovState::new(lvec(&[0.0, 0.0]), lvec(&[1.0, 0.3]));
        let traj = integrate_geodesic(&field, &init, 0.5, 1e-2).unwrap();
        let csv = trajectory_to_csv(&traj);
        assert!(csv.starts_with("tau,x_0,x_1,v_0,v_1,branch_id\n"));
        let curve = read_curve_csv(&csv).unwrap();
        assert_eq!(curve.len(), traj.len());
        assert!(curve.has_velocities());
        for (i, s) in traj.states.iter().enumerate() {
            assert_eq!(curve.params()[i], s.tau);
            assert_eq!(curve.point(i), &s.x);
            assert_eq!(&curve.velocity(i), &s.v);
        }
    }

    #[test]
    fn curve_csv_omits_velocities() {
        let curve = SampledCurve::line(&lvec(&[0.0, 0.0]), &lvec(&[1.0, 0.5]), 4);
        let csv = curve_to_csv(&curve);
        assert!(csv.starts_with("tau,x_0,x_1\n"));
        let back = read_curve_csv(&csv).unwrap();
        assert!(!back.has_velocities());
        assert_eq!(back.len(), curve.len());
    }

    #[test]
    fn malformed_csv_is_a_parse_error() {
        assert!(matches!(read_curve_csv(""), Err(Error::Parse(_))));
        assert!(matches!(
            read_curve_csv("foo,bar\n1,2\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            read_curve_csv("tau,x_0\n1,2\n3\n"),
            Err(Error::Parse(_))
        ));
    }
}

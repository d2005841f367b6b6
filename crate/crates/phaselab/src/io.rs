//! CSV and JSON writers. All floating-point values are written with 17
//! significant digits so files diff exactly across tools and languages.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::grid::Density1D;
use crate::homodyne::JointOutcomeDensity;
use crate::moments::MomentSequence;
use crate::phase_space::PhaseSpaceHistogram;

/// Full-precision decimal formatting (17 significant digits).
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a 1D density as `x,density` rows.
pub fn write_density_csv(path: &Path, d: &Density1D, x_name: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{x_name},density")?;
    for (&x, &v) in d.axis().iter().zip(d.values()) {
        writeln!(w, "{},{}", fmt_full(x), fmt_full(v))?;
    }
    Ok(())
}

/// Writes a phase-space histogram as `q,p,density` rows.
pub fn write_histogram_csv(path: &Path, h: &PhaseSpaceHistogram) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "q,p,density")?;
    let qs = h.spec().q_centers();
    let ps = h.spec().p_centers();
    for (i, &q) in qs.iter().enumerate() {
        for (j, &p) in ps.iter().enumerate() {
            writeln!(w, "{},{},{}", fmt_full(q), fmt_full(p), fmt_full(h.value(i, j)))?;
        }
    }
    Ok(())
}

/// Writes a joint homodyne density in the same `q,p,density` layout.
pub fn write_joint_csv(path: &Path, j: &JointOutcomeDensity) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "q,p,density")?;
    for (i, &q) in j.q_axis().iter().enumerate() {
        for (k, &p) in j.p_axis().iter().enumerate() {
            writeln!(w, "{},{},{}", fmt_full(q), fmt_full(p), fmt_full(j.value(i, k)))?;
        }
    }
    Ok(())
}

/// Writes a moment sequence as `k,value` rows.
pub fn write_moments_csv(path: &Path, m: &MomentSequence) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k,value")?;
    for (k, &v) in m.values().iter().enumerate() {
        writeln!(w, "{k},{}", fmt_full(v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{number_state, vacuum_projector};
    use crate::grid::{fock_to_grid, position_density, Grid1D};
    use crate::moments::MomentSequence;
    use crate::phase_space::{gs_histogram, GridSpec2D};

    #[test]
    fn full_precision_round_trips() {
        let x = 0.1 + 0.2;
        let s = fmt_full(x);
        let back: f64 = s.parse().unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn density_csv_layout() {
        let g = Grid1D::new(-12.0, 12.0, 256).unwrap();
        let d = position_density(&fock_to_grid(&number_state(0, 32).unwrap(), &g).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_density_csv(&path, &d, "q").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "q,density");
        assert_eq!(text.lines().count(), 257);
        let first = lines.next().unwrap();
        let x: f64 = first.split(',').next().unwrap().parse().unwrap();
        assert_eq!(x, -12.0);
    }

    #[test]
    fn histogram_csv_layout() {
        let vac = vacuum_projector(32).unwrap();
        let spec = GridSpec2D {
            q_min: -6.0,
            q_max: 6.0,
            nq: 16,
            p_min: -6.0,
            p_max: 6.0,
            np: 16,
        };
        let h = gs_histogram(&vac, &vac, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_histogram_csv(&path, &h).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "q,p,density");
        assert_eq!(text.lines().count(), 16 * 16 + 1);
    }

    #[test]
    fn moments_csv_layout() {
        let m = MomentSequence::new(vec![1.0, 0.0, 0.5], "test").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_moments_csv(&path, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(3).unwrap().starts_with("2,5.0000000000000000e-1"));
    }
}

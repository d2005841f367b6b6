//! Experiment orchestration: builds the configured state and generator,
//! runs the requested pipeline, and writes densities, moments, and a
//! self-contained JSON report.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::fock::{quadratures, DensityMatrix};
use crate::grid::{double_slit_state, grid_moments, momentum_density, position_density, Grid1D};
use crate::homodyne::{
    balanced_homodyne_density, eight_port_observable, joint_gs_l1, quadrature_density_exact,
};
use crate::io::{
    write_density_csv, write_histogram_csv, write_joint_csv, write_moments_csv,
};
use crate::moments::{
    exp_bound_fit, hankel_validity, recover_moments, BoundednessVerdict, ExpBoundParams,
    MomentSequence,
};
use crate::phase_space::{
    empirical_axis_moments, gs_histogram, info_completeness_scan, marginal_density,
    marginal_moments_with_histogram, s_coefficients, sample_outcomes, Axis,
};

/// Everything a run produced, numeric side. Written to `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub alpha_q: Option<Vec<f64>>,
    pub alpha_p: Option<Vec<f64>>,
    pub beta_q: Option<Vec<f64>>,
    pub beta_p: Option<Vec<f64>>,
    /// Direct operator moments Tr[rho Q^k] / Tr[rho P^k].
    pub direct_q: Option<Vec<f64>>,
    pub direct_p: Option<Vec<f64>>,
    pub alpha_q_stderr: Option<Vec<f64>>,
    pub alpha_p_stderr: Option<Vec<f64>>,
    pub verdict_q: Option<BoundednessVerdict>,
    pub verdict_p: Option<BoundednessVerdict>,
    pub cross_discrepancy_q: Option<f64>,
    pub cross_discrepancy_p: Option<f64>,
    pub extras: BTreeMap<String, serde_json::Value>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunReport {
    fn empty(config: &ExperimentConfig) -> Self {
        Self {
            config: config.clone(),
            alpha_q: None,
            alpha_p: None,
            beta_q: None,
            beta_p: None,
            direct_q: None,
            direct_p: None,
            alpha_q_stderr: None,
            alpha_p_stderr: None,
            verdict_q: None,
            verdict_p: None,
            cross_discrepancy_q: None,
            cross_discrepancy_p: None,
            extras: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization") + "\n"
    }
}

/// Direct oracle moments Tr[rho X^k], k = 0..k_max.
pub fn direct_axis_moments(rho: &DensityMatrix, axis: Axis, k_max: usize) -> Result<Vec<f64>> {
    let (q, p) = quadratures(rho.dim())?;
    let x = match axis {
        Axis::Q => q,
        Axis::P => p,
    };
    let mut out = Vec::with_capacity(k_max + 1);
    let mut pow = nalgebra::DMatrix::identity(rho.dim(), rho.dim());
    for _ in 0..=k_max {
        out.push(rho.trace_with(&pow).re);
        pow = &pow * x.entries();
    }
    Ok(out)
}

/// Runs the configured experiment, writing output files into
/// `config.out_dir` and returning the report.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let mut report = RunReport::empty(config);
    let total = Instant::now();
    match config.experiment {
        ExperimentKind::Qmarginals => run_qmarginals(config, &mut report)?,
        ExperimentKind::Doubleslit => run_doubleslit(config, &mut report)?,
        ExperimentKind::HomodyneJoint => run_homodyne_joint(config, &mut report)?,
        ExperimentKind::HomodyneLo => run_homodyne_lo(config, &mut report)?,
        ExperimentKind::Infocheck => run_infocheck(config, &mut report)?,
    }
    report
        .timings_ms
        .insert("total".into(), total.elapsed().as_secs_f64() * 1e3);
    std::fs::write(config.out_dir.join("report.json"), report.to_json())?;
    Ok(report)
}

/// As `run`, but requires the sampled path (n_shots and seed set).
pub fn run_with_shots(config: &ExperimentConfig) -> Result<RunReport> {
    if config.n_shots.is_none() || config.seed.is_none() {
        return Err(Error::Config("run_with_shots requires n_shots and seed".into()));
    }
    run(config)
}

fn out_path(config: &ExperimentConfig, name: &str) -> std::path::PathBuf {
    config.out_dir.join(name)
}

/// Bootstrap standard errors of the empirical moments of both coordinates.
fn bootstrap_stderr(
    samples: &[(f64, f64)],
    k_max: usize,
    resamples: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x517c_c1b7_2722_0a95));
    let mut acc_q = vec![Vec::with_capacity(resamples); k_max + 1];
    let mut acc_p = vec![Vec::with_capacity(resamples); k_max + 1];
    for _ in 0..resamples {
        let mut mq = vec![0.0f64; k_max + 1];
        let mut mp = vec![0.0f64; k_max + 1];
        for _ in 0..n {
            let (q, p) = samples[rng.gen_range(0..n)];
            let mut pw_q = 1.0;
            let mut pw_p = 1.0;
            for k in 0..=k_max {
                mq[k] += pw_q;
                mp[k] += pw_p;
                pw_q *= q;
                pw_p *= p;
            }
        }
        for k in 0..=k_max {
            acc_q[k].push(mq[k] / n as f64);
            acc_p[k].push(mp[k] / n as f64);
        }
    }
    let stderr = |vals: &[f64]| {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64)
            .sqrt()
    };
    (
        acc_q.iter().map(|v| stderr(v)).collect(),
        acc_p.iter().map(|v| stderr(v)).collect(),
    )
}

fn run_qmarginals(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let dim = config.dim;
    let k_max = config.k_max;
    let rho = DensityMatrix::from_pure(&config.state.build(dim)?);
    let s = config.generator.build(dim)?;

    let t = Instant::now();
    let hist = gs_histogram(&rho, &s, &config.grid)?;
    report
        .timings_ms
        .insert("histogram".into(), t.elapsed().as_secs_f64() * 1e3);
    write_histogram_csv(&out_path(config, "phase_space.csv"), &hist)?;
    report
        .extras
        .insert("histogram_mass".into(), json!(hist.mass()));

    let marg_q = marginal_density(&hist, Axis::Q);
    let marg_p = marginal_density(&hist, Axis::P);
    write_density_csv(&out_path(config, "marginal_q.csv"), &marg_q, "q")?;
    write_density_csv(&out_path(config, "marginal_p.csv"), &marg_p, "p")?;

    // sampled path replaces the exact marginal moments when requested
    let sampled = if let Some(n_shots) = config.n_shots {
        let seed = config.seed.unwrap_or(0);
        let t = Instant::now();
        let samples = sample_outcomes(&hist, n_shots, seed)?;
        let (se_q, se_p) =
            bootstrap_stderr(&samples, k_max, config.bootstrap_resamples, seed);
        report
            .timings_ms
            .insert("sampling".into(), t.elapsed().as_secs_f64() * 1e3);
        report.alpha_q_stderr = Some(se_q);
        report.alpha_p_stderr = Some(se_p);
        Some(samples)
    } else {
        None
    };

    let t = Instant::now();
    for axis in [Axis::Q, Axis::P] {
        let table = s_coefficients(&s, k_max, axis)?;
        let mm = marginal_moments_with_histogram(&rho, &s, k_max, axis, &hist)?;
        let alpha = match &sampled {
            Some(samples) => MomentSequence::new(
                empirical_axis_moments(samples, axis, k_max),
                format!("empirical_{}", axis.name()),
            )?,
            None => mm.alpha.clone(),
        };
        let beta = recover_moments(&alpha, &table)?;
        let direct = direct_axis_moments(&rho, axis, k_max)?;
        let verdict = exp_bound_fit(&beta, &ExpBoundParams::default())?;
        report.extras.insert(
            format!("hankel_valid_{}", axis.name()),
            json!(hankel_validity(&beta)),
        );
        write_moments_csv(
            &out_path(config, &format!("moments_alpha_{}.csv", axis.name())),
            &alpha,
        )?;
        write_moments_csv(
            &out_path(config, &format!("moments_beta_{}.csv", axis.name())),
            &beta,
        )?;
        match axis {
            Axis::Q => {
                report.alpha_q = Some(alpha.values().to_vec());
                report.beta_q = Some(beta.values().to_vec());
                report.direct_q = Some(direct);
                report.verdict_q = Some(verdict);
                report.cross_discrepancy_q = Some(mm.cross_discrepancy);
            }
            Axis::P => {
                report.alpha_p = Some(alpha.values().to_vec());
                report.beta_p = Some(beta.values().to_vec());
                report.direct_p = Some(direct);
                report.verdict_p = Some(verdict);
                report.cross_discrepancy_p = Some(mm.cross_discrepancy);
            }
        }
    }
    report
        .timings_ms
        .insert("moments".into(), t.elapsed().as_secs_f64() * 1e3);
    Ok(())
}

fn run_doubleslit(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let grid = Grid1D::new(
        config.grid1d.x_min,
        config.grid1d.x_max,
        config.grid1d.n_points,
    )?;
    let ds = &config.doubleslit;
    if ds.deltas.is_empty() {
        return Err(Error::Config("doubleslit.deltas must not be empty".into()));
    }
    let k_max = config.k_max;
    let mut moment_sets: Vec<Vec<f64>> = Vec::new();
    let mut densities = Vec::new();
    for (i, &delta) in ds.deltas.iter().enumerate() {
        let psi = double_slit_state(ds.c1, ds.c2, ds.w, delta, &grid)?;
        if i == 0 {
            write_density_csv(
                &out_path(config, "position_density.csv"),
                &position_density(&psi),
                "x",
            )?;
        }
        let pd = momentum_density(&psi);
        write_density_csv(
            &out_path(config, &format!("momentum_density_{i}.csv")),
            &pd,
            "p",
        )?;
        let m = grid_moments(&pd, k_max)?;
        write_moments_csv(&out_path(config, &format!("moments_p_{i}.csv")), &m)?;
        moment_sets.push(m.values().to_vec());
        densities.push(pd);
    }
    // moment spread across deltas
    let mut max_spread = 0.0f64;
    for k in 0..=k_max {
        let scale = moment_sets
            .iter()
            .map(|m| m[k].abs())
            .fold(1.0f64, f64::max);
        for m in &moment_sets[1..] {
            max_spread = max_spread.max((m[k] - moment_sets[0][k]).abs() / scale);
        }
    }
    let l1_first_last: f64 = densities
        .first()
        .unwrap()
        .values()
        .iter()
        .zip(densities.last().unwrap().values())
        .map(|(a, b)| (a - b).abs() * densities[0].dx())
        .sum();
    report.extras.insert("deltas".into(), json!(ds.deltas));
    report
        .extras
        .insert("p_moments_per_delta".into(), json!(moment_sets));
    report
        .extras
        .insert("p_moment_max_rel_spread".into(), json!(max_spread));
    report
        .extras
        .insert("momentum_density_l1_first_last".into(), json!(l1_first_last));
    Ok(())
}

fn run_homodyne_joint(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let hj = &config.homodyne_joint;
    let grid = Grid1D::new(hj.x_min, hj.x_max, hj.n_points)?;
    let rho = DensityMatrix::from_pure(&config.state.build(config.dim)?);
    let s = config.generator.build(config.dim)?;
    let t = Instant::now();
    let joint = eight_port_observable(&rho, &s, &grid)?;
    report
        .timings_ms
        .insert("eight_port".into(), t.elapsed().as_secs_f64() * 1e3);
    write_joint_csv(&out_path(config, "phase_space.csv"), &joint)?;
    write_density_csv(&out_path(config, "marginal_q.csv"), &joint.q_marginal(), "q")?;
    write_density_csv(&out_path(config, "marginal_p.csv"), &joint.p_marginal(), "p")?;
    let t = Instant::now();
    let l1 = joint_gs_l1(&joint, &rho, &s, hj.window)?;
    report
        .timings_ms
        .insert("l1_comparison".into(), t.elapsed().as_secs_f64() * 1e3);
    report.extras.insert("joint_mass".into(), json!(joint.mass()));
    report.extras.insert("l1_to_direct".into(), json!(l1));
    Ok(())
}

fn run_homodyne_lo(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let lo = &config.homodyne_lo;
    if lo.zs.is_empty() {
        return Err(Error::Config("homodyne_lo.zs must not be empty".into()));
    }
    let signal = config.state.build(config.dim)?;
    let mut l1_errors = Vec::new();
    for (i, &z) in lo.zs.iter().enumerate() {
        let t = Instant::now();
        let d = balanced_homodyne_density(&signal, z, lo.dim)?;
        report
            .timings_ms
            .insert(format!("lo_z{i}"), t.elapsed().as_secs_f64() * 1e3);
        write_density_csv(&out_path(config, &format!("homodyne_lo_{i}.csv")), &d, "x")?;
        let exact = quadrature_density_exact(&signal, d.axis());
        let l1: f64 = d
            .values()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs() * d.dx())
            .sum();
        l1_errors.push(l1);
    }
    let monotone = l1_errors.windows(2).all(|w| w[1] < w[0]);
    report.extras.insert("zs".into(), json!(lo.zs));
    report.extras.insert("l1_errors".into(), json!(l1_errors));
    report
        .extras
        .insert("l1_strictly_decreasing".into(), json!(monotone));
    Ok(())
}

fn run_infocheck(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let s = config.generator.build(config.dim)?;
    let scan = info_completeness_scan(&s, &config.grid, config.infocheck.eps)?;
    let path = out_path(config, "zero_cells.csv");
    {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "q,p,abs_trace")?;
        for z in &scan.zero_cells {
            writeln!(
                w,
                "{},{},{}",
                crate::io::fmt_full(z.q),
                crate::io::fmt_full(z.p),
                crate::io::fmt_full(z.abs_trace)
            )?;
        }
    }
    report
        .extras
        .insert("n_zero_cells".into(), json!(scan.zero_cells.len()));
    report.extras.insert("min_abs".into(), json!(scan.min_abs));
    report.extras.insert("min_q".into(), json!(scan.min_q));
    report.extras.insert("min_p".into(), json!(scan.min_p));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use std::path::Path;

    fn base_config(experiment: &str, out: &Path) -> ExperimentConfig {
        let text = format!(
            "experiment = \"{experiment}\"\nout_dir = \"{}\"\n",
            out.display()
        );
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn qmarginals_vacuum_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let config = base_config("qmarginals", dir.path());
        let report = run(&config).unwrap();
        let beta = report.beta_q.unwrap();
        let direct = report.direct_q.unwrap();
        for (b, d) in beta.iter().zip(&direct) {
            assert!((b - d).abs() < 1e-6, "beta {b} vs direct {d}");
        }
        assert!((beta[2] - 0.5).abs() < 1e-6);
        assert!((report.alpha_q.unwrap()[2] - 1.0).abs() < 1e-6);
        for f in [
            "phase_space.csv",
            "marginal_q.csv",
            "marginal_p.csv",
            "moments_alpha_q.csv",
            "moments_beta_q.csv",
            "moments_alpha_p.csv",
            "moments_beta_p.csv",
            "report.json",
        ] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
    }

    #[test]
    fn qmarginals_sampled_path() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "experiment = \"qmarginals\"\nout_dir = \"{}\"\nn_shots = 20000\nseed = 11\nbootstrap_resamples = 50\nk_max = 6\n",
            dir.path().display()
        );
        let config = ExperimentConfig::from_toml_str(&text).unwrap();
        let report = run_with_shots(&config).unwrap();
        let alpha = report.alpha_q.unwrap();
        let se = report.alpha_q_stderr.unwrap();
        assert!(se[2] > 0.0);
        assert!(
            (alpha[2] - 1.0).abs() < 5.0 * se[2].max(0.01),
            "alpha_2 = {} with se {}",
            alpha[2],
            se[2]
        );
        // few shots: wide error bars, no crash
        let dir2 = tempfile::tempdir().unwrap();
        let text = format!(
            "experiment = \"qmarginals\"\nout_dir = \"{}\"\nn_shots = 10\nseed = 1\nbootstrap_resamples = 20\nk_max = 6\n",
            dir2.path().display()
        );
        let config = ExperimentConfig::from_toml_str(&text).unwrap();
        assert!(run_with_shots(&config).is_ok());
    }

    #[test]
    fn doubleslit_reports_invariance() {
        let dir = tempfile::tempdir().unwrap();
        let config = base_config("doubleslit", dir.path());
        let report = run(&config).unwrap();
        let spread = report.extras["p_moment_max_rel_spread"].as_f64().unwrap();
        let l1 = report.extras["momentum_density_l1_first_last"]
            .as_f64()
            .unwrap();
        assert!(spread < 1e-6, "moment spread {spread}");
        assert!(l1 > 0.1, "density L1 {l1}");
    }

    #[test]
    fn infocheck_number_one_zero_circle() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "experiment = \"infocheck\"\nout_dir = \"{}\"\n\n[generator]\nfamily = \"number\"\nn = 1\n\n[infocheck]\neps = 0.02\n\n[grid]\nq_min = -3.0\nq_max = 3.0\nnq = 128\np_min = -3.0\np_max = 3.0\nnp = 128\n",
            dir.path().display()
        );
        let config = ExperimentConfig::from_toml_str(&text).unwrap();
        let report = run(&config).unwrap();
        assert!(report.extras["n_zero_cells"].as_u64().unwrap() > 0);
        let r = report.extras["min_q"].as_f64().unwrap().hypot(
            report.extras["min_p"].as_f64().unwrap(),
        );
        assert!((r - 2f64.sqrt()).abs() < 0.2, "minimum at radius {r}");
    }

    #[test]
    fn homodyne_lo_ladder_decreases() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "experiment = \"homodyne-lo\"\nout_dir = \"{}\"\n\n[homodyne_lo]\nzs = [2.0, 4.0]\ndim = 64\n",
            dir.path().display()
        );
        let config = ExperimentConfig::from_toml_str(&text).unwrap();
        let report = run(&config).unwrap();
        assert!(report.extras["l1_strictly_decreasing"].as_bool().unwrap());
    }
}

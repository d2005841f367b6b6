//! Eight-port homodyne simulation: a 50:50 beam splitter mixes the signal
//! with a reference beam, one output port is read in the position
//! quadrature and the other in the momentum quadrature. The joint detector
//! statistics reproduce the phase-space density G^S when the reference is
//! prepared in the conjugated generator state. A finite-LO balanced
//! homodyne model in the two-mode number basis exhibits the high-amplitude
//! convergence to the quadrature distribution.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fock::{coherent_state, conjugate_state, hermite_values, DensityMatrix, StateVector};
use crate::grid::{fock_to_grid, Density1D, Grid1D, GridWavefunction};
use crate::phase_space::gs_density_batch;

/// L1 agreement target between the homodyne joint density and G^S.
pub const HOMODYNE_TOL: f64 = 1e-3;
/// Allowed probability mass in the outer boundary band after the
/// beam-splitter rotation.
pub const BAND_EPS: f64 = 1e-8;
/// Norm tolerance for two-mode wavefunctions.
pub const TOL_NORM_2D: f64 = 1e-6;
/// Mass tolerance for joint outcome densities.
pub const MASS_TOL_2D: f64 = 1e-4;

/// Two-mode wavefunction psi(x_a, x_b) on a common square grid,
/// stored row-major with the first mode as the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeWavefunction {
    grid: Grid1D,
    values: Vec<C64>,
}

impl TwoModeWavefunction {
    pub fn new(grid: Grid1D, values: Vec<C64>) -> Result<Self> {
        let n = grid.n_points();
        if values.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "{} values on a {n}x{n} grid",
                values.len()
            )));
        }
        let psi = Self { grid, values };
        let n2 = psi.norm_sqr();
        if (n2 - 1.0).abs() > TOL_NORM_2D {
            return Err(Error::InvalidState(format!(
                "two-mode norm^2 = {n2}, not 1 within {TOL_NORM_2D}"
            )));
        }
        Ok(psi)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.grid.n_points() + j]
    }

    pub fn norm_sqr(&self) -> f64 {
        let da = self.grid.dx() * self.grid.dx();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * da
    }

    /// Discrete L2 inner product <self, other>.
    pub fn inner(&self, other: &TwoModeWavefunction) -> Result<C64> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("inner product across different grids".into()));
        }
        let da = self.grid.dx() * self.grid.dx();
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += a.conj() * b;
        }
        Ok(acc * da)
    }
}

/// Product input psi(x_a, x_b) = signal(x_a) * reference(x_b).
pub fn two_mode_input(
    signal: &GridWavefunction,
    reference: &GridWavefunction,
) -> Result<TwoModeWavefunction> {
    if signal.grid() != reference.grid() {
        return Err(Error::InvalidInput("signal and reference on different grids".into()));
    }
    let n = signal.grid().n_points();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        let a = signal.values()[i];
        for j in 0..n {
            values.push(a * reference.values()[j]);
        }
    }
    TwoModeWavefunction::new(*signal.grid(), values)
}

/// Band-limited translation of periodic grid lines by arbitrary offsets.
struct LineShifter {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    momenta: Vec<f64>,
    n: usize,
}

impl LineShifter {
    fn new(grid: &Grid1D) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n_points();
        Self {
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            momenta: grid.momenta(),
            n,
        }
    }

    /// In place: line(x) -> line(x - t).
    fn shift(&self, line: &mut [C64], t: f64) {
        for (j, v) in line.iter_mut().enumerate() {
            if j % 2 == 1 {
                *v = -*v;
            }
        }
        self.fwd.process(line);
        for (v, &p) in line.iter_mut().zip(&self.momenta) {
            *v *= C64::from_polar(1.0, -p * t);
        }
        self.inv.process(line);
        let scale = 1.0 / self.n as f64;
        for (j, v) in line.iter_mut().enumerate() {
            *v *= if j % 2 == 1 { -scale } else { scale };
        }
    }
}

/// 50:50 beam splitter in position representation:
/// psi'(x_c, x_d) = psi((x_c + x_d)/sqrt(2), (x_c - x_d)/sqrt(2)).
///
/// Realized as a flip of the second coordinate followed by a 45 degree
/// rotation decomposed into three Fourier shears, so the resampling is
/// spectrally accurate. Mass appearing in the outer boundary band after
/// the rotation indicates off-grid (wrapped) support.
pub fn beam_splitter_rotate(psi: &TwoModeWavefunction) -> Result<TwoModeWavefunction> {
    let grid = *psi.grid();
    let n = grid.n_points();
    let pts = grid.points();
    let mut values = psi.values().to_vec();

    // flip the second coordinate: (x, y) -> (x, -y)
    for i in 0..n {
        let row = &mut values[i * n..(i + 1) * n];
        let orig: Vec<C64> = row.to_vec();
        for j in 0..n {
            row[j] = orig[(n - j) % n];
        }
    }

    let shifter = LineShifter::new(&grid);
    let a = -(std::f64::consts::FRAC_PI_8).tan();
    let b = std::f64::consts::FRAC_PI_4.sin();

    let shear_first = |values: &mut Vec<C64>, coef: f64| {
        // translate along the first coordinate, per fixed second index
        let cols: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut line: Vec<C64> = (0..n).map(|i| values[i * n + j]).collect();
                shifter.shift(&mut line, coef * pts[j]);
                line
            })
            .collect();
        for (j, line) in cols.iter().enumerate() {
            for i in 0..n {
                values[i * n + j] = line[i];
            }
        }
    };
    let shear_second = |values: &mut Vec<C64>, coef: f64| {
        values
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| shifter.shift(row, coef * pts[i]));
    };

    shear_first(&mut values, a);
    shear_second(&mut values, b);
    shear_first(&mut values, a);

    // boundary-band mass guard against wrapped support
    let band = (n / 32).max(2);
    let da = grid.dx() * grid.dx();
    let mut band_mass = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i < band || i >= n - band || j < band || j >= n - band {
                band_mass += values[i * n + j].norm_sqr() * da;
            }
        }
    }
    if band_mass > BAND_EPS {
        return Err(Error::GridTooSmall(format!(
            "beam-splitter rotation leaves mass {band_mass:.3e} in the boundary band"
        )));
    }
    TwoModeWavefunction::new(grid, values)
}

/// Joint density of reading the position quadrature on the first output
/// port and the momentum quadrature on the second, rescaled to signal
/// phase-space coordinates (q, p) = (sqrt(2) x_c, sqrt(2) p_d).
#[derive(Debug, Clone, PartialEq)]
pub struct JointOutcomeDensity {
    q_axis: Vec<f64>,
    p_axis: Vec<f64>,
    values: Vec<f64>,
    mass: f64,
}

impl JointOutcomeDensity {
    pub fn new(q_axis: Vec<f64>, p_axis: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != q_axis.len() * p_axis.len() || q_axis.len() < 2 || p_axis.len() < 2 {
            return Err(Error::InvalidInput("joint density shape mismatch".into()));
        }
        if values.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
            return Err(Error::InvalidState("joint density has negative values".into()));
        }
        let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let dq = q_axis[1] - q_axis[0];
        let dp = p_axis[1] - p_axis[0];
        let mass: f64 = values.iter().sum::<f64>() * dq * dp;
        if (mass - 1.0).abs() > MASS_TOL_2D {
            return Err(Error::InvalidState(format!("joint density mass = {mass}, not 1")));
        }
        Ok(Self {
            q_axis,
            p_axis,
            values,
            mass,
        })
    }

    pub fn q_axis(&self) -> &[f64] {
        &self.q_axis
    }

    pub fn p_axis(&self) -> &[f64] {
        &self.p_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p_axis.len() + j]
    }

    pub fn dq(&self) -> f64 {
        self.q_axis[1] - self.q_axis[0]
    }

    pub fn dp(&self) -> f64 {
        self.p_axis[1] - self.p_axis[0]
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// q marginal (sum over the p axis).
    pub fn q_marginal(&self) -> Density1D {
        let np = self.p_axis.len();
        let values: Vec<f64> = (0..self.q_axis.len())
            .map(|i| (0..np).map(|j| self.value(i, j)).sum::<f64>() * self.dp())
            .collect();
        Density1D::normalized(self.q_axis.clone(), values).expect("marginal of a joint density")
    }

    /// p marginal (sum over the q axis).
    pub fn p_marginal(&self) -> Density1D {
        let nq = self.q_axis.len();
        let values: Vec<f64> = (0..self.p_axis.len())
            .map(|j| (0..nq).map(|i| self.value(i, j)).sum::<f64>() * self.dq())
            .collect();
        Density1D::normalized(self.p_axis.clone(), values).expect("marginal of a joint density")
    }
}

/// Raw (unvalidated) joint values for one pure output wavefunction.
fn joint_values(psi_out: &TwoModeWavefunction) -> Vec<f64> {
    let grid = psi_out.grid();
    let n = grid.n_points();
    let dx = grid.dx();
    let momenta = grid.momenta();
    let scale = dx / (2.0 * std::f64::consts::PI).sqrt();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let rows: Vec<Vec<f64>> = psi_out
        .values()
        .par_chunks(n)
        .map(|row| {
            let mut buf: Vec<C64> = row
                .iter()
                .enumerate()
                .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
                .collect();
            fft.process(&mut buf);
            buf.iter()
                .zip(&momenta)
                .map(|(v, &p)| {
                    let amp = v * C64::from_polar(scale, -p * grid.x_min());
                    // Jacobian of (q, p) = sqrt(2) (x_c, p_d)
                    amp.norm_sqr() / 2.0
                })
                .collect()
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// Joint quadrature density of one two-mode output wavefunction.
pub fn joint_quadrature_density(psi_out: &TwoModeWavefunction) -> Result<JointOutcomeDensity> {
    let grid = psi_out.grid();
    let sqrt2 = 2f64.sqrt();
    let q_axis: Vec<f64> = grid.points().iter().map(|&x| sqrt2 * x).collect();
    let p_axis: Vec<f64> = grid.momenta().iter().map(|&p| sqrt2 * p).collect();
    JointOutcomeDensity::new(q_axis, p_axis, joint_values(psi_out))
}

/// Eight-port joint statistics for a general signal state and generator:
/// the convex combination over spectral components of the pure pipeline,
/// with reference components drawn from the conjugated generator.
pub fn eight_port_observable(
    signal: &DensityMatrix,
    s: &DensityMatrix,
    grid: &Grid1D,
) -> Result<JointOutcomeDensity> {
    let sig_comps = signal.spectral_components(1e-12)?;
    let ref_comps = conjugate_state(s).spectral_components(1e-12)?;
    if sig_comps.len() > 16 || ref_comps.len() > 16 {
        return Err(Error::InvalidInput(format!(
            "spectral rank {} x {} exceeds the supported 16",
            sig_comps.len(),
            ref_comps.len()
        )));
    }
    let mut pairs = Vec::new();
    for (lam, phi) in &sig_comps {
        let sig_wave = fock_to_grid(phi, grid)?;
        for (mu, chi) in &ref_comps {
            pairs.push((lam * mu, sig_wave.clone(), fock_to_grid(chi, grid)?));
        }
    }
    let partials: Result<Vec<(f64, Vec<f64>)>> = pairs
        .into_iter()
        .map(|(w, sig_wave, ref_wave)| {
            let input = two_mode_input(&sig_wave, &ref_wave)?;
            let out = beam_splitter_rotate(&input)?;
            Ok((w, joint_values(&out)))
        })
        .collect();
    let partials = partials?;
    let n = grid.n_points();
    let mut acc = vec![0.0f64; n * n];
    for (w, vals) in &partials {
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += w * v;
        }
    }
    let sqrt2 = 2f64.sqrt();
    let q_axis: Vec<f64> = grid.points().iter().map(|&x| sqrt2 * x).collect();
    let p_axis: Vec<f64> = grid.momenta().iter().map(|&p| sqrt2 * p).collect();
    JointOutcomeDensity::new(q_axis, p_axis, acc)
}

/// L1 distance between the joint homodyne density and the directly
/// computed G^S density, over the window |q|, |p| <= window.
pub fn joint_gs_l1(
    joint: &JointOutcomeDensity,
    rho: &DensityMatrix,
    s: &DensityMatrix,
    window: f64,
) -> Result<f64> {
    let da = joint.dq() * joint.dp();
    let qs: Vec<(usize, f64)> = joint
        .q_axis()
        .iter()
        .cloned()
        .enumerate()
        .filter(|(_, q)| q.abs() <= window)
        .collect();
    let ps: Vec<(usize, f64)> = joint
        .p_axis()
        .iter()
        .cloned()
        .enumerate()
        .filter(|(_, p)| p.abs() <= window)
        .collect();
    let points: Vec<(f64, f64)> = qs
        .iter()
        .flat_map(|&(_, q)| ps.iter().map(move |&(_, p)| (q, p)))
        .collect();
    let direct = gs_density_batch(rho, s, &points)?;
    let mut acc = 0.0;
    let np = ps.len();
    for (row, &(i, _)) in qs.iter().enumerate() {
        for (col, &(j, _)) in ps.iter().enumerate() {
            acc += (joint.value(i, j) - direct[row * np + col]).abs() * da;
        }
    }
    Ok(acc)
}

/// Pointwise quadrature distribution |sum_n c_n h_n(x)|^2 of a pure state.
pub fn quadrature_density_exact(signal: &StateVector, axis: &[f64]) -> Vec<f64> {
    let n_max = signal.top_support(1e-14);
    axis.iter()
        .map(|&x| {
            let h = hermite_values(n_max, x);
            let mut amp = C64::new(0.0, 0.0);
            for n in 0..=n_max {
                amp += signal.coeffs()[n] * h[n];
            }
            amp.norm_sqr()
        })
        .collect()
}

/// Applies theta (a^t b - a b^t) to a two-mode number-basis vector.
fn apply_generator(v: &[C64], dim: usize, theta: f64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); dim * dim];
    for na in 0..dim {
        for nb in 0..dim {
            let c = v[na * dim + nb];
            if c.norm_sqr() == 0.0 {
                continue;
            }
            // a^t b |na, nb> = sqrt((na+1) nb) |na+1, nb-1>
            if na + 1 < dim && nb > 0 {
                let amp = ((na + 1) as f64 * nb as f64).sqrt();
                out[(na + 1) * dim + (nb - 1)] += c * (theta * amp);
            }
            // -a b^t |na, nb> = -sqrt(na (nb+1)) |na-1, nb+1>
            if na > 0 && nb + 1 < dim {
                let amp = (na as f64 * (nb + 1) as f64).sqrt();
                out[(na - 1) * dim + (nb + 1)] -= c * (theta * amp);
            }
        }
    }
    out
}

/// exp(theta (a^t b - a b^t)) |v> by substepped Taylor summation.
fn beam_splitter_number_basis(v: Vec<C64>, dim: usize, theta: f64) -> Vec<C64> {
    // generator norm is bounded by 2 theta (dim - 1); substep so each
    // exponent has norm about 1
    let steps = (2.0 * theta.abs() * (dim as f64 - 1.0)).ceil().max(1.0) as usize;
    let dt = theta / steps as f64;
    let mut state = v;
    for _ in 0..steps {
        let mut term = state.clone();
        let mut acc = state.clone();
        for k in 1..=24 {
            term = apply_generator(&term, dim, dt / k as f64);
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            let tn: f64 = term.iter().map(|c| c.norm_sqr()).sum();
            if tn < 1e-34 {
                break;
            }
        }
        state = acc;
    }
    state
}

/// Distribution of the scaled photon-number difference (n_1 - n_2)/(sqrt(2) z)
/// after a 50:50 splitter mixes the signal with the local oscillator
/// coherent(z), in the two-mode truncated number basis.
pub fn balanced_homodyne_density(signal: &StateVector, z: f64, dim: usize) -> Result<Density1D> {
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::InvalidInput(format!("LO amplitude z = {z} must be positive")));
    }
    let guard = z * z + 8.0 * z + 16.0;
    if (dim as f64) < guard {
        return Err(Error::TruncationTooSmall(format!(
            "LO dim {dim} below the Poisson tail guard {guard:.0} for z = {z}"
        )));
    }
    if signal.dim() > dim {
        return Err(Error::InvalidDimension(format!(
            "signal dim {} exceeds simulation dim {dim}",
            signal.dim()
        )));
    }
    let lo = coherent_state(C64::new(z, 0.0), dim)?;
    let mut v = vec![C64::new(0.0, 0.0); dim * dim];
    for na in 0..signal.dim() {
        let c = signal.coeffs()[na];
        if c.norm_sqr() == 0.0 {
            continue;
        }
        for nb in 0..dim {
            v[na * dim + nb] = c * lo.coeffs()[nb];
        }
    }
    let out = beam_splitter_number_basis(v, dim, std::f64::consts::FRAC_PI_4);
    // aggregate probabilities by the photon-number difference
    let mut prob = vec![0.0f64; 2 * dim - 1];
    for na in 0..dim {
        for nb in 0..dim {
            let d = na as isize - nb as isize + (dim as isize - 1);
            prob[d as usize] += out[na * dim + nb].norm_sqr();
        }
    }
    let scale = 2f64.sqrt() * z;
    let axis: Vec<f64> = (0..2 * dim - 1)
        .map(|d| (d as isize - (dim as isize - 1)) as f64 / scale)
        .collect();
    let values: Vec<f64> = prob.iter().map(|&p| p * scale).collect();
    Density1D::normalized(axis, values)
}

/// L1 distance between the finite-LO distribution and the exact
/// quadrature distribution sampled on its axis.
pub fn balanced_homodyne_l1_error(signal: &StateVector, z: f64, dim: usize) -> Result<f64> {
    let d = balanced_homodyne_density(signal, z, dim)?;
    let exact = quadrature_density_exact(signal, d.axis());
    Ok(d.values()
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs() * d.dx())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{mix, number_state, vacuum_projector, DensityMatrix};
    use crate::grid::position_density;
    use crate::phase_space::gs_density;
    use approx::assert_abs_diff_eq;

    fn homodyne_grid() -> Grid1D {
        Grid1D::new(-40.0, 40.0, 1024).unwrap()
    }

    fn grid_state(n: usize, grid: &Grid1D) -> GridWavefunction {
        fock_to_grid(&number_state(n, 64).unwrap(), grid).unwrap()
    }

    #[test]
    fn two_mode_input_is_product() {
        let g = homodyne_grid();
        let vac = grid_state(0, &g);
        let psi = two_mode_input(&vac, &vac).unwrap();
        assert_abs_diff_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-8);
        let i = 400;
        let j = 600;
        let expect = vac.values()[i] * vac.values()[j];
        assert!((psi.value(i, j) - expect).norm() < 1e-14);
    }

    #[test]
    fn vacuum_pair_invariant_under_splitter() {
        let g = homodyne_grid();
        let vac = grid_state(0, &g);
        let input = two_mode_input(&vac, &vac).unwrap();
        let out = beam_splitter_rotate(&input).unwrap();
        let mut max = 0.0f64;
        for i in (0..1024).step_by(31) {
            for j in (0..1024).step_by(31) {
                max = max.max((out.value(i, j) - input.value(i, j)).norm());
            }
        }
        assert!(max < 1e-9, "rotationally symmetric Gaussian moved by {max:.2e}");
    }

    #[test]
    fn splitter_preserves_norm_and_inner_products() {
        let g = homodyne_grid();
        let a = two_mode_input(&grid_state(0, &g), &grid_state(1, &g)).unwrap();
        let b = two_mode_input(&grid_state(2, &g), &grid_state(0, &g)).unwrap();
        let ra = beam_splitter_rotate(&a).unwrap();
        let rb = beam_splitter_rotate(&b).unwrap();
        assert_abs_diff_eq!(ra.norm_sqr(), 1.0, epsilon = 1e-8);
        let before = a.inner(&b).unwrap();
        let after = ra.inner(&rb).unwrap();
        assert!((before - after).norm() < 1e-8);
    }

    #[test]
    fn splitter_detects_offgrid_support() {
        let g = homodyne_grid();
        // Gaussian far in the corner rotates off the grid
        let norm = std::f64::consts::PI.powf(-0.25);
        let vals: Vec<C64> = g
            .points()
            .iter()
            .map(|&x| C64::new(norm * (-(x - 35.0) * (x - 35.0) / 2.0).exp(), 0.0))
            .collect();
        let packet = GridWavefunction::new(g, vals).unwrap();
        let input = two_mode_input(&packet, &packet).unwrap();
        assert!(matches!(
            beam_splitter_rotate(&input),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn coherent_signal_reproduces_husimi_peak() {
        // pins the port and sign convention
        let g = homodyne_grid();
        let dim = 64;
        let alpha = C64::new(1.0, 1.0);
        let sig = DensityMatrix::from_pure(&coherent_state(alpha, dim).unwrap());
        let vac = vacuum_projector(dim).unwrap();
        let joint = eight_port_observable(&sig, &vac, &g).unwrap();
        assert_abs_diff_eq!(joint.mass(), 1.0, epsilon = 1e-4);
        // peak near (q, p) = (sqrt 2, sqrt 2)
        let mut best = (0.0, 0.0, 0.0f64);
        for (i, &q) in joint.q_axis().iter().enumerate() {
            if q.abs() > 6.0 {
                continue;
            }
            for (j, &p) in joint.p_axis().iter().enumerate() {
                if p.abs() > 6.0 {
                    continue;
                }
                if joint.value(i, j) > best.2 {
                    best = (q, p, joint.value(i, j));
                }
            }
        }
        let s2 = 2f64.sqrt();
        assert!(
            (best.0 - s2).abs() < 0.2 && (best.1 - s2).abs() < 0.2,
            "joint density peaks at ({}, {}) instead of ({s2:.3}, {s2:.3})",
            best.0,
            best.1
        );
        // pointwise agreement with the direct density at the peak region
        for &(q, p) in &[(s2, s2), (0.0, 0.0), (2.0, 1.0)] {
            let i = joint
                .q_axis()
                .iter()
                .position(|&x| (x - q).abs() < joint.dq())
                .unwrap();
            let j = joint
                .p_axis()
                .iter()
                .position(|&x| (x - p).abs() < joint.dp())
                .unwrap();
            let direct =
                gs_density(&sig, &vac, joint.q_axis()[i], joint.p_axis()[j]).unwrap();
            assert_abs_diff_eq!(joint.value(i, j), direct, epsilon = 1e-6);
        }
    }

    #[test]
    fn one_photon_signal_matches_gs_in_l1() {
        let g = homodyne_grid();
        let dim = 64;
        let sig = DensityMatrix::from_pure(&number_state(1, dim).unwrap());
        let vac = vacuum_projector(dim).unwrap();
        let joint = eight_port_observable(&sig, &vac, &g).unwrap();
        let l1 = joint_gs_l1(&joint, &sig, &vac, 8.0).unwrap();
        assert!(l1 <= HOMODYNE_TOL, "L1 = {l1:.3e}");
    }

    #[test]
    fn mixed_generator_matches_gs_in_l1() {
        let g = homodyne_grid();
        let dim = 64;
        let sig = DensityMatrix::from_pure(&number_state(0, dim).unwrap());
        let s = mix(
            &[number_state(0, dim).unwrap(), number_state(1, dim).unwrap()],
            &[0.7, 0.3],
        )
        .unwrap();
        let joint = eight_port_observable(&sig, &s, &g).unwrap();
        let l1 = joint_gs_l1(&joint, &sig, &s, 8.0).unwrap();
        assert!(l1 <= HOMODYNE_TOL, "L1 = {l1:.3e}");
    }

    #[test]
    fn joint_marginal_is_convolved_position_density() {
        // vacuum signal, vacuum reference: q marginal is N(0, 1)
        let g = homodyne_grid();
        let dim = 64;
        let vac = vacuum_projector(dim).unwrap();
        let joint = eight_port_observable(&vac, &vac, &g).unwrap();
        let marg = joint.q_marginal();
        for (&q, &v) in marg.axis().iter().zip(marg.values()) {
            if q.abs() < 6.0 {
                let expect = (-q * q / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
                assert_abs_diff_eq!(v, expect, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn lo_guard_rejects_small_dim() {
        let sig = number_state(0, 8).unwrap();
        assert!(matches!(
            balanced_homodyne_density(&sig, 6.0, 64),
            Err(Error::TruncationTooSmall(_))
        ));
    }

    #[test]
    fn balanced_homodyne_vacuum_variance() {
        let sig = number_state(0, 4).unwrap();
        let d = balanced_homodyne_density(&sig, 6.0, 100).unwrap();
        assert_abs_diff_eq!(d.mass(), 1.0, epsilon = 1e-6);
        let mean: f64 = d
            .axis()
            .iter()
            .zip(d.values())
            .map(|(&x, &v)| x * v)
            .sum::<f64>()
            * d.dx();
        let var: f64 = d
            .axis()
            .iter()
            .zip(d.values())
            .map(|(&x, &v)| (x - mean) * (x - mean) * v)
            .sum::<f64>()
            * d.dx();
        assert!(mean.abs() < 0.05, "mean = {mean}");
        assert!((var - 0.5).abs() < 0.05, "variance = {var}");
    }

    #[test]
    fn balanced_homodyne_coherent_mean_pins_sign() {
        let sig = coherent_state(C64::new(1.0, 0.0), 24).unwrap();
        let d = balanced_homodyne_density(&sig, 6.0, 100).unwrap();
        let mean: f64 = d
            .axis()
            .iter()
            .zip(d.values())
            .map(|(&x, &v)| x * v)
            .sum::<f64>()
            * d.dx();
        // <Q> = sqrt(2) Re alpha
        assert!((mean - 2f64.sqrt()).abs() < 0.1, "mean = {mean}");
    }

    #[test]
    fn balanced_homodyne_one_photon_double_hump() {
        let sig = number_state(1, 4).unwrap();
        let d = balanced_homodyne_density(&sig, 6.0, 100).unwrap();
        // |h_1|^2 vanishes at the origin and peaks near |x| = 1
        let at = |x0: f64| -> f64 {
            let j = d
                .axis()
                .iter()
                .position(|&x| (x - x0).abs() <= d.dx() / 2.0 + 1e-12)
                .unwrap();
            d.values()[j]
        };
        assert!(at(0.0) < 0.1 * at(1.0), "no dip at the origin");
        let l1 = balanced_homodyne_l1_error(&sig, 6.0, 100).unwrap();
        assert!(l1 < 0.2, "L1 to |h_1|^2 is {l1}");
    }

    #[test]
    fn grid_convention_sanity() {
        // position density of the grid signal equals the exact quadrature
        // distribution, tying the two representations together
        let g = homodyne_grid();
        let s = number_state(2, 64).unwrap();
        let psi = fock_to_grid(&s, &g).unwrap();
        let d = position_density(&psi);
        let exact = quadrature_density_exact(&s, d.axis());
        for (v, e) in d.values().iter().zip(&exact) {
            assert_abs_diff_eq!(*v, *e, epsilon = 1e-10);
        }
    }
}

//! Position-grid wavefunctions, discrete-Fourier momentum densities,
//! Fock <-> grid conversion, and the double-slit counterexample states.
//!
//! Fourier convention: psi_hat(p) = (2 pi)^{-1/2} integral e^{-ipx} psi(x) dx,
//! realized on the grid by an FFT with centering phase corrections so that
//! the conjugate momentum axis is centered at 0.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fock::{hermite_values, DensityMatrix, StateVector};
use crate::moments::MomentSequence;

/// Default maximum moment order for grid quadrature.
pub const K_MAX: usize = 12;
/// Norm tolerance for grid-sampled wavefunctions and densities.
pub const GRID_TOL_NORM: f64 = 1e-6;
/// Edge-weight guard threshold for `grid_moments`, relative to the
/// integral of |x|^K d(x).
pub const EDGE_WEIGHT_EPS: f64 = 1e-9;

/// Uniform position grid with its conjugate momentum grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidInput(format!("bad grid range [{x_min}, {x_max}]")));
        }
        if n_points < 256 || !n_points.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "n_points = {n_points} must be a power of two >= 256"
            )));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    /// Sample points x_j = x_min + j dx, j = 0..n-1.
    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_points).map(|j| self.x_min + j as f64 * dx).collect()
    }

    /// Conjugate momentum spacing 2 pi / (n dx).
    pub fn dp(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.n_points as f64 * self.dx())
    }

    /// Centered momentum samples p_k = (k - n/2) dp.
    pub fn momenta(&self) -> Vec<f64> {
        let dp = self.dp();
        let half = (self.n_points / 2) as isize;
        (0..self.n_points as isize).map(|k| (k - half) as f64 * dp).collect()
    }
}

/// Complex wavefunction sampled on a uniform grid, normalized in L2.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    grid: Grid1D,
    values: Vec<C64>,
}

impl GridWavefunction {
    pub fn new(grid: Grid1D, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidInput(format!(
                "{} values on a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        let psi = Self { grid, values };
        let n2 = psi.norm_sqr();
        if (n2 - 1.0).abs() > GRID_TOL_NORM {
            return Err(Error::InvalidState(format!(
                "wavefunction norm^2 = {n2}, not 1 within {GRID_TOL_NORM}"
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

    /// Trapezoid-rule squared norm.
    pub fn norm_sqr(&self) -> f64 {
        trapezoid(self.values.iter().map(|v| v.norm_sqr()), self.grid.dx())
    }

    /// Trapezoid-rule inner product <self, other>.
    pub fn inner(&self, other: &GridWavefunction) -> Result<C64> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("inner product across different grids".into()));
        }
        let dx = self.grid.dx();
        let mut acc = C64::new(0.0, 0.0);
        let n = self.values.len();
        for j in 0..n {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            acc += self.values[j].conj() * other.values[j] * w;
        }
        Ok(acc * dx)
    }
}

/// Nonnegative normalized density sampled on a uniform axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    axis: Vec<f64>,
    values: Vec<f64>,
    dx: f64,
}

impl Density1D {
    pub fn new(axis: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if axis.len() != values.len() || axis.len() < 2 {
            return Err(Error::InvalidInput("axis/values length mismatch".into()));
        }
        let dx = axis[1] - axis[0];
        if values.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
            return Err(Error::InvalidState("density has negative or non-finite values".into()));
        }
        let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let mass = trapezoid(values.iter().cloned(), dx);
        if (mass - 1.0).abs() > GRID_TOL_NORM {
            return Err(Error::InvalidState(format!("density mass = {mass}, not 1")));
        }
        Ok(Self { axis, values, dx })
    }

    /// Clips small negatives, then rescales to unit mass.
    pub fn normalized(axis: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let clipped: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let dx = axis[1] - axis[0];
        let mass = trapezoid(clipped.iter().cloned(), dx);
        if mass <= 0.0 || !mass.is_finite() {
            return Err(Error::InvalidState("density has non-positive mass".into()));
        }
        Self::new(axis, clipped.iter().map(|v| v / mass).collect())
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn mass(&self) -> f64 {
        trapezoid(self.values.iter().cloned(), self.dx)
    }
}

fn trapezoid(values: impl Iterator<Item = f64>, dx: f64) -> f64 {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let interior: f64 = v[1..n - 1].iter().sum();
    (interior + 0.5 * (v[0] + v[n - 1])) * dx
}

/// Expands a number-basis state into psi(x) = sum c_n h_n(x) on the grid.
pub fn fock_to_grid(state: &StateVector, grid: &Grid1D) -> Result<GridWavefunction> {
    let n_max = state.top_support(1e-14);
    let dx = grid.dx();
    let mut values = Vec::with_capacity(grid.n_points());
    for &x in &grid.points() {
        let h = hermite_values(n_max, x);
        let mut v = C64::new(0.0, 0.0);
        for n in 0..=n_max {
            v += state.coeffs()[n] * h[n];
        }
        values.push(v);
    }
    let mass = trapezoid(values.iter().map(|v| v.norm_sqr()), dx);
    if (mass - 1.0).abs() > GRID_TOL_NORM {
        return Err(Error::GridTooSmall(format!(
            "state support leaks off the grid: on-grid mass = {mass}"
        )));
    }
    GridWavefunction::new(*grid, values)
}

/// Projects a grid wavefunction back onto the Hermite basis.
pub fn grid_to_fock(psi: &GridWavefunction, dim: usize) -> Result<Vec<C64>> {
    let dx = psi.grid().dx();
    let n = psi.grid().n_points();
    let mut coeffs = vec![C64::new(0.0, 0.0); dim];
    for (j, &x) in psi.grid().points().iter().enumerate() {
        let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        let h = hermite_values(dim - 1, x);
        for k in 0..dim {
            coeffs[k] += psi.values()[j] * h[k] * w * dx;
        }
    }
    Ok(coeffs)
}

/// |psi(x)|^2 as a normalized density.
pub fn position_density(psi: &GridWavefunction) -> Density1D {
    let values: Vec<f64> = psi.values().iter().map(|v| v.norm_sqr()).collect();
    Density1D::normalized(psi.grid().points(), values)
        .expect("position density of a normalized wavefunction")
}

/// Continuum-convention Fourier transform of a grid wavefunction.
///
/// Returns (momentum axis, psi_hat values); Parseval holds exactly at the
/// discrete level.
pub fn fourier_transform(psi: &GridWavefunction) -> (Vec<f64>, Vec<C64>) {
    let grid = psi.grid();
    let n = grid.n_points();
    let dx = grid.dx();
    let mut buf: Vec<C64> = psi
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let momenta = grid.momenta();
    let scale = dx / (2.0 * std::f64::consts::PI).sqrt();
    let out: Vec<C64> = buf
        .iter()
        .zip(&momenta)
        .map(|(v, &p)| v * C64::from_polar(scale, -p * grid.x_min()))
        .collect();
    (momenta, out)
}

/// Momentum distribution |psi_hat(p)|^2 on the conjugate grid.
pub fn momentum_density(psi: &GridWavefunction) -> Density1D {
    let (momenta, fhat) = fourier_transform(psi);
    let values: Vec<f64> = fhat.iter().map(|v| v.norm_sqr()).collect();
    Density1D::normalized(momenta, values).expect("momentum density of a normalized wavefunction")
}

/// Smooth compactly supported bump exp(-w^2/(w^2 - (x-c)^2)) on (c-w, c+w).
fn bump(x: f64, c: f64, w: f64) -> f64 {
    let u = x - c;
    if u.abs() >= w {
        0.0
    } else {
        (-w * w / (w * w - u * u)).exp()
    }
}

/// Double-slit state (phi_1 + e^{i delta} phi_2)/sqrt(2) built from two
/// disjointly supported C-infinity bumps centered at c1 and c2.
pub fn double_slit_state(
    c1: f64,
    c2: f64,
    w: f64,
    delta: f64,
    grid: &Grid1D,
) -> Result<GridWavefunction> {
    if w <= 0.0 {
        return Err(Error::InvalidGeometry(format!("slit half-width w = {w} must be positive")));
    }
    if (c1 - c2).abs() <= 2.0 * w {
        return Err(Error::InvalidGeometry(format!(
            "slits at {c1} and {c2} with half-width {w} overlap"
        )));
    }
    for &c in &[c1, c2] {
        if c - w < grid.x_min() || c + w > grid.x_max() {
            return Err(Error::GridTooSmall(format!(
                "slit ({c} +- {w}) extends beyond the grid"
            )));
        }
    }
    let xs = grid.points();
    let dx = grid.dx();
    let b1: Vec<f64> = xs.iter().map(|&x| bump(x, c1, w)).collect();
    let b2: Vec<f64> = xs.iter().map(|&x| bump(x, c2, w)).collect();
    let n1 = trapezoid(b1.iter().map(|v| v * v), dx).sqrt();
    let n2 = trapezoid(b2.iter().map(|v| v * v), dx).sqrt();
    let phase = C64::from_polar(1.0, delta);
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    let values: Vec<C64> = b1
        .iter()
        .zip(&b2)
        .map(|(&v1, &v2)| (C64::new(v1 / n1, 0.0) + phase * (v2 / n2)) * inv_sqrt2)
        .collect();
    GridWavefunction::new(*grid, values)
}

/// Trapezoid-rule moments m_0..m_K of a density, with an edge-weight guard
/// against grid-tail contamination.
pub fn grid_moments(d: &Density1D, k_max: usize) -> Result<MomentSequence> {
    if k_max > K_MAX {
        return Err(Error::InvalidInput(format!("K = {k_max} above K_max = {K_MAX}")));
    }
    // Guard: |x|^K * d(x) over the outermost 5% of points must be negligible
    // relative to the integral of |x|^K d(x). The comparison is relative
    // because at high K the rounding-noise floor of an FFT-derived density,
    // multiplied by |x|^K at the grid edge, sits far above any fixed
    // absolute threshold while contributing nothing to the moments.
    let n = d.axis().len();
    let edge = (n / 20).max(1);
    let mut worst = 0.0f64;
    for j in (0..edge).chain(n - edge..n) {
        let wv = d.axis()[j].abs().powi(k_max as i32) * d.values()[j];
        worst = worst.max(wv);
    }
    let raw_k = trapezoid(
        d.axis()
            .iter()
            .zip(d.values())
            .map(|(&x, &v)| x.abs().powi(k_max as i32) * v),
        d.dx(),
    );
    let thresh = EDGE_WEIGHT_EPS * raw_k.max(1.0);
    if worst > thresh {
        return Err(Error::MomentsUnreliable(format!(
            "edge weight |x|^{k_max} d(x) = {worst:.3e} exceeds {thresh:.3e}"
        )));
    }
    let mut values = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let m = trapezoid(
            d.axis()
                .iter()
                .zip(d.values())
                .map(|(&x, &v)| x.powi(k as i32) * v),
            d.dx(),
        );
        values.push(m);
    }
    MomentSequence::new(values, "grid")
}

/// Diagonal of the density matrix in position representation,
/// rho(x, x) = sum_{mn} rho_{mn} h_m(x) h_n(x), as a normalized density.
pub fn density_matrix_position_density(rho: &DensityMatrix, grid: &Grid1D) -> Result<Density1D> {
    let dim = rho.dim();
    let xs = grid.points();
    let mut values = Vec::with_capacity(xs.len());
    for &x in &xs {
        let h = hermite_values(dim - 1, x);
        let mut acc = 0.0;
        for m in 0..dim {
            if h[m] == 0.0 {
                continue;
            }
            for n in 0..dim {
                acc += (rho.entries()[(m, n)] * h[m] * h[n]).re;
            }
        }
        values.push(acc);
    }
    let mass = trapezoid(values.iter().cloned(), grid.dx());
    if (mass - 1.0).abs() > GRID_TOL_NORM {
        return Err(Error::GridTooSmall(format!(
            "density-matrix support leaks off the grid: on-grid mass = {mass}"
        )));
    }
    Density1D::normalized(xs, values)
}

/// Parity reflection d(x) -> d(-x) on a centered grid.
pub fn reflect_density(d: &Density1D) -> Density1D {
    let n = d.values().len();
    let values: Vec<f64> = (0..n).map(|j| d.values()[(n - j) % n]).collect();
    Density1D::normalized(d.axis().to_vec(), values).expect("reflection preserves mass")
}

/// Grid convolution (f * g)(x) = integral f(x - y) g(y) dy on a common
/// centered axis; the result is renormalized on the same axis.
pub fn convolve_densities(f: &Density1D, g: &Density1D) -> Result<Density1D> {
    if f.axis().len() != g.axis().len() || (f.dx() - g.dx()).abs() > 1e-12 {
        return Err(Error::InvalidInput("convolution requires a common grid".into()));
    }
    let n = f.axis().len();
    let center = n / 2; // index of x = 0 on a centered grid
    let mut out = vec![0.0f64; n];
    for j in 0..n {
        let mut acc = 0.0;
        // f(x_j - y_k) sits at index j - k + center
        let lo = j.saturating_sub(n - 1);
        let _ = lo;
        for k in 0..n {
            let idx = j as isize - k as isize + center as isize;
            if idx >= 0 && (idx as usize) < n {
                acc += f.values()[idx as usize] * g.values()[k];
            }
        }
        out[j] = acc * f.dx();
    }
    Density1D::normalized(f.axis().to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, number_state, StateVector};
    use approx::assert_abs_diff_eq;

    fn grid_default() -> Grid1D {
        Grid1D::new(-12.0, 12.0, 2048).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid1D::new(-8.0, 8.0, 255).is_err());
        assert!(Grid1D::new(-8.0, 8.0, 300).is_err());
        assert!(Grid1D::new(8.0, -8.0, 256).is_err());
    }

    #[test]
    fn vacuum_on_grid_is_gaussian() {
        let g = grid_default();
        let e0 = number_state(0, 32).unwrap();
        let psi = fock_to_grid(&e0, &g).unwrap();
        let norm = std::f64::consts::PI.powf(-0.25);
        for (&x, v) in g.points().iter().zip(psi.values()) {
            assert_abs_diff_eq!(v.re, norm * (-x * x / 2.0).exp(), epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn e1_vanishes_at_origin() {
        let g = grid_default();
        let e1 = number_state(1, 32).unwrap();
        let psi = fock_to_grid(&e1, &g).unwrap();
        let j0 = g.points().iter().position(|&x| x.abs() < 1e-9).unwrap();
        assert_abs_diff_eq!(psi.values()[j0].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn superposition_norm_preserved() {
        let g = grid_default();
        let s = StateVector::normalized({
            let mut v = vec![C64::new(0.0, 0.0); 32];
            v[0] = C64::new(1.0, 0.0);
            v[3] = C64::new(1.0, 0.0);
            v
        })
        .unwrap();
        let psi = fock_to_grid(&s, &g).unwrap();
        assert_abs_diff_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn fock_grid_round_trip() {
        let g = Grid1D::new(-12.0, 12.0, 4096).unwrap();
        let dim = 64;
        let s = StateVector::normalized({
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[2] = C64::new(0.6, 0.2);
            v[17] = C64::new(-0.4, 0.5);
            v[32] = C64::new(0.3, -0.3);
            v
        })
        .unwrap();
        let psi = fock_to_grid(&s, &g).unwrap();
        let back = grid_to_fock(&psi, dim).unwrap();
        for n in 0..dim {
            assert!(
                (back[n] - s.coeffs()[n]).norm() < 1e-8,
                "coefficient {n} off by {:.2e}",
                (back[n] - s.coeffs()[n]).norm()
            );
        }
    }

    #[test]
    fn grid_too_small_detected() {
        let g = Grid1D::new(-1.0, 1.0, 256).unwrap();
        let e0 = number_state(0, 16).unwrap();
        assert!(matches!(fock_to_grid(&e0, &g), Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn momentum_density_of_vacuum_is_gaussian_var_half() {
        let g = grid_default();
        let e0 = number_state(0, 32).unwrap();
        let psi = fock_to_grid(&e0, &g).unwrap();
        let d = momentum_density(&psi);
        let m = grid_moments(&d, 4).unwrap();
        assert_abs_diff_eq!(m.values()[2], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(m.values()[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn hermite_states_are_fourier_eigenfunctions() {
        let g = grid_default();
        for n in 0..=5usize {
            let en = number_state(n, 32).unwrap();
            let psi = fock_to_grid(&en, &g).unwrap();
            let (ps, fhat) = fourier_transform(&psi);
            for (&p, v) in ps.iter().zip(&fhat) {
                if p.abs() < 10.0 {
                    let expect = hermite_values(n, p)[n].abs();
                    assert!(
                        (v.norm() - expect).abs() < 1e-7,
                        "n={n} p={p}: {} vs {expect}",
                        v.norm()
                    );
                }
            }
        }
    }

    #[test]
    fn shift_theorem() {
        let g = grid_default();
        let e0 = number_state(0, 32).unwrap();
        let psi0 = fock_to_grid(&e0, &g).unwrap();
        let k = 1.5;
        let shifted: Vec<C64> = g
            .points()
            .iter()
            .zip(psi0.values())
            .map(|(&x, v)| v * C64::from_polar(1.0, k * x))
            .collect();
        let psi = GridWavefunction::new(g, shifted).unwrap();
        let d = momentum_density(&psi);
        let m = grid_moments(&d, 2).unwrap();
        assert_abs_diff_eq!(m.values()[1], k, epsilon = 1e-6);
        assert_abs_diff_eq!(m.values()[2] - m.values()[1] * m.values()[1], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn parseval_holds() {
        let g = grid_default();
        let s = coherent_state(C64::new(1.0, 0.5), 64).unwrap();
        let psi = fock_to_grid(&s, &g).unwrap();
        let (_, fhat) = fourier_transform(&psi);
        let dp = g.dp();
        let mass_p: f64 = fhat.iter().map(|v| v.norm_sqr() * dp).sum();
        let dx = g.dx();
        let mass_x: f64 = psi.values().iter().map(|v| v.norm_sqr() * dx).sum();
        assert_abs_diff_eq!(mass_p, mass_x, epsilon = 1e-10);
    }

    #[test]
    fn position_density_of_vacuum() {
        let g = grid_default();
        let e0 = number_state(0, 32).unwrap();
        let psi = fock_to_grid(&e0, &g).unwrap();
        let d = position_density(&psi);
        let m = grid_moments(&d, 4).unwrap();
        assert_abs_diff_eq!(m.values()[2], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(m.values()[4], 0.75, epsilon = 1e-6);
        assert_abs_diff_eq!(d.mass(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn double_slit_rejects_overlap() {
        let g = grid_default();
        assert!(matches!(
            double_slit_state(-0.5, 0.5, 1.0, 0.0, &g),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn double_slit_position_density_delta_invariant() {
        let g = grid_default();
        let d0 = position_density(&double_slit_state(-2.0, 2.0, 1.0, 0.0, &g).unwrap());
        let dpi = position_density(
            &double_slit_state(-2.0, 2.0, 1.0, std::f64::consts::PI, &g).unwrap(),
        );
        let max_diff = d0
            .values()
            .iter()
            .zip(dpi.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-13, "position densities differ by {max_diff:.2e}");
    }

    #[test]
    fn double_slit_momentum_moments_delta_invariant() {
        let g = Grid1D::new(-20.0, 20.0, 65536).unwrap();
        let mut sequences = Vec::new();
        for &delta in &[0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
            let psi = double_slit_state(-2.0, 2.0, 1.0, delta, &g).unwrap();
            let d = momentum_density(&psi);
            sequences.push(grid_moments(&d, 8).unwrap());
        }
        for k in 0..=8usize {
            let scale = sequences
                .iter()
                .map(|s| s.values()[k].abs())
                .fold(1.0f64, f64::max);
            for s in &sequences[1..] {
                let diff = (s.values()[k] - sequences[0].values()[k]).abs();
                assert!(
                    diff / scale < 1e-6,
                    "k = {k}: relative spread {:.2e}",
                    diff / scale
                );
            }
        }
    }

    #[test]
    fn double_slit_momentum_densities_differ() {
        let g = Grid1D::new(-20.0, 20.0, 4096).unwrap();
        let d0 = momentum_density(&double_slit_state(-2.0, 2.0, 1.0, 0.0, &g).unwrap());
        let dpi = momentum_density(
            &double_slit_state(-2.0, 2.0, 1.0, std::f64::consts::PI, &g).unwrap(),
        );
        let l1: f64 = d0
            .values()
            .iter()
            .zip(dpi.values())
            .map(|(a, b)| (a - b).abs() * d0.dx())
            .sum();
        assert!(l1 >= 0.1, "L1 distance {l1} below 0.1");
    }

    #[test]
    fn grid_moments_edge_guard() {
        // Uniform density over the whole grid trips the tail guard.
        let axis: Vec<f64> = (0..256).map(|j| -8.0 + j as f64 * (16.0 / 256.0)).collect();
        let values = vec![1.0 / (axis[255] - axis[0]); 256];
        let d = Density1D::normalized(axis, values).unwrap();
        assert!(matches!(grid_moments(&d, 8), Err(Error::MomentsUnreliable(_))));
    }

    #[test]
    fn grid_moments_rejects_large_k() {
        let g = grid_default();
        let e0 = number_state(0, 32).unwrap();
        let d = position_density(&fock_to_grid(&e0, &g).unwrap());
        assert!(grid_moments(&d, K_MAX + 1).is_err());
    }

    #[test]
    fn convolution_of_gaussians_adds_variances() {
        let g = grid_default();
        let e0 = number_state(0, 32).unwrap();
        let d = position_density(&fock_to_grid(&e0, &g).unwrap());
        let conv = convolve_densities(&d, &d).unwrap();
        let m = grid_moments(&conv, 2).unwrap();
        assert_abs_diff_eq!(m.values()[2], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn reflection_flips_mean() {
        let g = grid_default();
        let s = coherent_state(C64::new(1.0, 0.0), 64).unwrap();
        let d = position_density(&fock_to_grid(&s, &g).unwrap());
        let r = reflect_density(&d);
        let m = grid_moments(&d, 1).unwrap();
        let mr = grid_moments(&r, 1).unwrap();
        assert_abs_diff_eq!(m.values()[1], -mr.values()[1], epsilon = 1e-6);
    }
}

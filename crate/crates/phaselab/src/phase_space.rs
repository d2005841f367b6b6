//! The covariant phase-space observable G^S: densities
//! (1/2 pi) Tr[rho W_{qp} S W_{qp}^*], marginal moments, the lower-triangular
//! coefficient tables and moment operators, informational-completeness
//! diagnostics, and finite-statistics sampling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    displacement, displacement_columns, quadratures, DensityMatrix, OperatorMatrix, TAIL_MARGIN,
    TOL_PSD,
};
use crate::grid::Density1D;
use crate::moments::MomentSequence;

/// Tolerated imaginary part of phase-space density values.
pub const TOL_IMAG: f64 = 1e-8;
/// Tolerated deviation of total histogram mass from 1.
pub const MASS_TOL: f64 = 1e-4;
/// Agreement tolerance between the operator-trace and grid-integration
/// moment paths.
pub const CROSS_TOL: f64 = 1e-6;
/// Fraction of a trace allowed to live on the truncation edge before the
/// finite Hilbert-Schmidt proxy is flagged.
pub const EDGE_FRAC: f64 = 0.01;

/// Marginal axis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Q,
    P,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Q => "q",
            Axis::P => "p",
        }
    }
}

/// Rectangular (q, p) grid specification; values are attached to cell
/// centers and carry cell area dq * dp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec2D {
    pub q_min: f64,
    pub q_max: f64,
    pub nq: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl Default for GridSpec2D {
    fn default() -> Self {
        Self {
            q_min: -8.0,
            q_max: 8.0,
            nq: 256,
            p_min: -8.0,
            p_max: 8.0,
            np: 256,
        }
    }
}

impl GridSpec2D {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_max > self.q_min) || !(self.p_max > self.p_min) || self.nq < 2 || self.np < 2 {
            return Err(Error::InvalidInput(format!("bad phase-space grid {self:?}")));
        }
        Ok(())
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / self.nq as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.np as f64
    }

    pub fn q_centers(&self) -> Vec<f64> {
        let dq = self.dq();
        (0..self.nq).map(|i| self.q_min + (i as f64 + 0.5) * dq).collect()
    }

    pub fn p_centers(&self) -> Vec<f64> {
        let dp = self.dp();
        (0..self.np).map(|j| self.p_min + (j as f64 + 0.5) * dp).collect()
    }
}

/// Nonnegative phase-space density tabulated over a rectangular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceHistogram {
    spec: GridSpec2D,
    values: Vec<f64>,
    mass: f64,
    label: String,
}

impl PhaseSpaceHistogram {
    /// Wraps raw cell values: negativity within `TOL_PSD` is clipped to 0
    /// after the check, anything worse is a truncation error.
    pub fn new(spec: GridSpec2D, values: Vec<f64>, label: impl Into<String>, mass_tol: f64) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.nq * spec.np {
            return Err(Error::InvalidInput(format!(
                "{} values for a {}x{} grid",
                values.len(),
                spec.nq,
                spec.np
            )));
        }
        if let Some(&worst) = values
            .iter()
            .filter(|v| **v < -TOL_PSD)
            .min_by(|a, b| a.total_cmp(b))
        {
            return Err(Error::TruncationError(format!(
                "density value {worst:.3e} below -{TOL_PSD:.1e}"
            )));
        }
        let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let mass: f64 = values.iter().sum::<f64>() * spec.dq() * spec.dp();
        if (mass - 1.0).abs() > mass_tol {
            return Err(Error::GridTooSmall(format!(
                "histogram mass {mass} differs from 1 by more than {mass_tol}"
            )));
        }
        Ok(Self {
            spec,
            values,
            mass,
            label: label.into(),
        })
    }

    pub fn spec(&self) -> &GridSpec2D {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.np + j]
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// L1 distance to another histogram on the same grid.
    pub fn l1_distance(&self, other: &PhaseSpaceHistogram) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::InvalidInput("histograms on different grids".into()));
        }
        let da = self.spec.dq() * self.spec.dp();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs() * da)
            .sum())
    }
}

/// Lower-triangular coefficients s_{kl} = binom(k,l) (-1)^{k-l} Tr[X^{k-l} S]
/// for one axis (X = Q or P); s_{kk} = 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientTable {
    axis: Axis,
    rows: Vec<Vec<f64>>,
}

impl CoefficientTable {
    /// Builds a table from explicit rows (row k holds s_{k0}..s_{kk}),
    /// enforcing the unit diagonal.
    pub fn from_rows(axis: Axis, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (k, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(Error::InvalidInput(format!(
                    "row {k} has {} entries, expected {}",
                    row.len(),
                    k + 1
                )));
            }
            if (row[k] - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!("s_{{{k},{k}}} = {}, not 1", row[k])));
            }
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("empty coefficient table".into()));
        }
        Ok(Self { axis, rows })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn k_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.rows[k][l]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

fn binomial(k: usize, l: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..(k - l) {
        b = b * (k - i) as f64 / (i + 1) as f64;
    }
    b
}

fn axis_operator(axis: Axis, dim: usize) -> Result<OperatorMatrix> {
    let (q, p) = quadratures(dim)?;
    Ok(match axis {
        Axis::Q => q,
        Axis::P => p,
    })
}

/// Successive powers X^0..X^k.
fn operator_powers(x: &OperatorMatrix, k: usize) -> Vec<DMatrix<C64>> {
    let n = x.dim();
    let mut out = Vec::with_capacity(k + 1);
    out.push(DMatrix::<C64>::identity(n, n));
    for j in 1..=k {
        let next = &out[j - 1] * x.entries();
        out.push(next);
    }
    out
}

/// Coefficient table of the marginal moment operators for generator S.
///
/// The Hilbert-Schmidt condition on X^k sqrt(S) is reinterpreted in finite
/// truncation as an edge-dominance diagnostic on Tr[S X^{2K}].
pub fn s_coefficients(s: &DensityMatrix, k_max: usize, axis: Axis) -> Result<CoefficientTable> {
    let dim = s.dim();
    let x = axis_operator(axis, dim)?;
    let powers = operator_powers(&x, 2 * k_max);

    // Edge-dominance flag on the highest trace used by the condition.
    let top = &powers[2 * k_max];
    let mut total = 0.0;
    let mut edge = 0.0;
    for n in 0..dim {
        let mut diag = C64::new(0.0, 0.0);
        for m in 0..dim {
            diag += top[(n, m)] * s.entries()[(m, n)];
        }
        total += diag.norm();
        if n >= dim.saturating_sub(TAIL_MARGIN) {
            edge += diag.norm();
        }
    }
    if total > 0.0 && edge > EDGE_FRAC * total {
        return Err(Error::ConditionViolated(format!(
            "Tr[S {}^{}] is {:.1}% edge-dominated: finite Hilbert-Schmidt proxy unreliable",
            axis.name(),
            2 * k_max,
            100.0 * edge / total
        )));
    }

    let mut traces = Vec::with_capacity(k_max + 1);
    for j in 0..=k_max {
        let t = s.trace_with(&powers[j]);
        if t.im.abs() > 1e-8 * t.re.abs().max(1.0) {
            return Err(Error::NumericsInconsistent(format!(
                "Tr[{}^{j} S] has imaginary part {:.3e}",
                axis.name(),
                t.im
            )));
        }
        traces.push(t.re);
    }
    let mut rows = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut row = Vec::with_capacity(k + 1);
        for l in 0..=k {
            let sign = if (k - l) % 2 == 0 { 1.0 } else { -1.0 };
            row.push(binomial(k, l) * sign * traces[k - l]);
        }
        rows.push(row);
    }
    CoefficientTable::from_rows(axis, rows)
}

/// The k-th marginal moment operator sum_l s_{kl} X^l.
pub fn moment_operator(s: &DensityMatrix, k: usize, axis: Axis) -> Result<OperatorMatrix> {
    let table = s_coefficients(s, k, axis)?;
    let dim = s.dim();
    let x = axis_operator(axis, dim)?;
    let powers = operator_powers(&x, k);
    let mut acc = DMatrix::<C64>::zeros(dim, dim);
    for l in 0..=k {
        acc += &powers[l] * C64::new(table.get(k, l), 0.0);
    }
    Ok(OperatorMatrix::new(acc, format!("L({}^{k})", axis.name())))
}

/// Spectral components with relevant support, shared by the fast
/// evaluation paths.
struct Components {
    weights: Vec<f64>,
    vectors: Vec<DVector<C64>>,
    /// One past the highest basis index carrying weight in any component.
    n_cols: usize,
}

fn components_of(m: &DensityMatrix) -> Result<Components> {
    let comps = m.spectral_components(1e-12)?;
    let mut weights = Vec::new();
    let mut vectors = Vec::new();
    let mut n_cols = 1;
    for (w, v) in comps {
        n_cols = n_cols.max(v.top_support(1e-12) + 1);
        weights.push(w);
        vectors.push(v.coeffs().clone());
    }
    Ok(Components {
        weights,
        vectors,
        n_cols,
    })
}

/// Fast evaluator for (1/2 pi) Tr[rho W S W^*] over many (q, p) points.
/// Only the displacement columns spanned by the components of S are built.
struct GsEvaluator {
    dim: usize,
    rho: Components,
    s: Components,
}

impl GsEvaluator {
    fn new(rho: &DensityMatrix, s: &DensityMatrix) -> Result<Self> {
        if rho.dim() != s.dim() {
            return Err(Error::InvalidDimension(format!(
                "rho dim {} vs S dim {}",
                rho.dim(),
                s.dim()
            )));
        }
        Ok(Self {
            dim: rho.dim(),
            rho: components_of(rho)?,
            s: components_of(s)?,
        })
    }

    fn eval(&self, q: f64, p: f64) -> Result<f64> {
        let cols = displacement_columns(q, p, self.dim, self.s.n_cols)?;
        let mut val = 0.0;
        for (mu, v) in self.s.weights.iter().zip(&self.s.vectors) {
            // u = W v, using only the spanned columns
            let mut u = DVector::<C64>::zeros(self.dim);
            for n in 0..self.s.n_cols {
                let c = v[n];
                if c.norm_sqr() > 0.0 {
                    u.axpy(c, &cols.column(n).into_owned(), C64::new(1.0, 0.0));
                }
            }
            for (lam, phi) in self.rho.weights.iter().zip(&self.rho.vectors) {
                val += mu * lam * phi.dotc(&u).norm_sqr();
            }
        }
        Ok(val / (2.0 * std::f64::consts::PI))
    }
}

/// Phase-space density (1/2 pi) Tr[rho W_{qp} S W_{qp}^*] at one point,
/// evaluated through the full operator trace with an imaginary-part guard.
pub fn gs_density(rho: &DensityMatrix, s: &DensityMatrix, q: f64, p: f64) -> Result<f64> {
    if rho.dim() != s.dim() {
        return Err(Error::InvalidDimension(format!(
            "rho dim {} vs S dim {}",
            rho.dim(),
            s.dim()
        )));
    }
    let w = displacement(q, p, rho.dim())?;
    let conj = w.entries() * s.entries() * w.entries().adjoint();
    let t = rho.trace_with(&conj) / (2.0 * std::f64::consts::PI);
    if t.im.abs() > TOL_IMAG * t.re.abs().max(1.0) {
        return Err(Error::TruncationError(format!(
            "density at ({q}, {p}) has imaginary part {:.3e}",
            t.im
        )));
    }
    if t.re < -TOL_PSD {
        return Err(Error::TruncationError(format!(
            "density at ({q}, {p}) is {:.3e}",
            t.re
        )));
    }
    Ok(t.re.max(0.0))
}

/// Evaluates the G^S density at many points through the spectral
/// components of rho and S, building only the displacement columns that S
/// spans. Orders of magnitude faster than `gs_density` per point for
/// low-rank S; the two agree within the cross-path tolerance.
pub fn gs_density_batch(
    rho: &DensityMatrix,
    s: &DensityMatrix,
    points: &[(f64, f64)],
) -> Result<Vec<f64>> {
    let eval = GsEvaluator::new(rho, s)?;
    points.par_iter().map(|&(q, p)| eval.eval(q, p)).collect()
}

/// Tabulates the G^S density over a rectangular grid (cell centers).
pub fn gs_histogram(
    rho: &DensityMatrix,
    s: &DensityMatrix,
    spec: &GridSpec2D,
) -> Result<PhaseSpaceHistogram> {
    gs_histogram_with_mass_tol(rho, s, spec, MASS_TOL)
}

pub fn gs_histogram_with_mass_tol(
    rho: &DensityMatrix,
    s: &DensityMatrix,
    spec: &GridSpec2D,
    mass_tol: f64,
) -> Result<PhaseSpaceHistogram> {
    spec.validate()?;
    let eval = GsEvaluator::new(rho, s)?;
    let qs = spec.q_centers();
    let ps = spec.p_centers();
    let rows: Result<Vec<Vec<f64>>> = qs
        .par_iter()
        .map(|&q| ps.iter().map(|&p| eval.eval(q, p)).collect())
        .collect();
    let values: Vec<f64> = rows?.into_iter().flatten().collect();
    PhaseSpaceHistogram::new(*spec, values, "G^S", mass_tol)
}

/// W_{q0,p0} rho W_{q0,p0}^*: the state displaced by (q0, p0).
pub fn displaced(rho: &DensityMatrix, q0: f64, p0: f64) -> Result<DensityMatrix> {
    let w = displacement(q0, p0, rho.dim())?;
    let moved = w.entries() * rho.entries() * w.entries().adjoint();
    // renormalize away the truncation-induced trace defect
    let tr = moved.trace().re;
    DensityMatrix::new(moved / C64::new(tr, 0.0))
}

/// Sums out the other axis of the histogram.
pub fn marginal_density(hist: &PhaseSpaceHistogram, axis: Axis) -> Density1D {
    let spec = hist.spec();
    match axis {
        Axis::Q => {
            let values: Vec<f64> = (0..spec.nq)
                .map(|i| (0..spec.np).map(|j| hist.value(i, j)).sum::<f64>() * spec.dp())
                .collect();
            Density1D::normalized(spec.q_centers(), values).expect("marginal of a histogram")
        }
        Axis::P => {
            let values: Vec<f64> = (0..spec.np)
                .map(|j| (0..spec.nq).map(|i| hist.value(i, j)).sum::<f64>() * spec.dq())
                .collect();
            Density1D::normalized(spec.p_centers(), values).expect("marginal of a histogram")
        }
    }
}

/// Marginal moments alpha_k = Tr[rho L(x^k, G^S)] with a cross-check
/// against grid integration of the tabulated marginal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalMoments {
    pub alpha: MomentSequence,
    /// Worst normalized disagreement between the operator-trace and
    /// grid-integration paths.
    pub cross_discrepancy: f64,
}

pub fn marginal_moments(
    rho: &DensityMatrix,
    s: &DensityMatrix,
    k_max: usize,
    axis: Axis,
) -> Result<MarginalMoments> {
    let hist = gs_histogram(rho, s, &GridSpec2D::default())?;
    marginal_moments_with_histogram(rho, s, k_max, axis, &hist)
}

pub fn marginal_moments_with_histogram(
    rho: &DensityMatrix,
    s: &DensityMatrix,
    k_max: usize,
    axis: Axis,
    hist: &PhaseSpaceHistogram,
) -> Result<MarginalMoments> {
    let table = s_coefficients(s, k_max, axis)?;
    let dim = rho.dim();
    let x = axis_operator(axis, dim)?;
    let powers = operator_powers(&x, k_max);
    let mut state_moments = Vec::with_capacity(k_max + 1);
    for j in 0..=k_max {
        state_moments.push(rho.trace_with(&powers[j]).re);
    }
    // Path (i): operator traces combined through the coefficient table.
    let mut alpha = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut a = 0.0;
        for l in 0..=k {
            a += table.get(k, l) * state_moments[l];
        }
        alpha.push(a);
    }
    // Path (ii): grid integration of the tabulated marginal.
    let marg = marginal_density(hist, axis);
    let mut worst = 0.0f64;
    for k in 0..=k_max {
        let grid_val: f64 = marg
            .axis()
            .iter()
            .zip(marg.values())
            .map(|(&u, &v)| u.powi(k as i32) * v)
            .sum::<f64>()
            * marg.dx();
        let diff = (alpha[k] - grid_val).abs();
        // Absolute agreement for low orders, relative beyond, where grid
        // quadrature noise scales with the moment magnitude.
        let normalized = if k <= 6 {
            diff
        } else {
            diff / alpha[k].abs().max(1.0)
        };
        worst = worst.max(normalized);
    }
    if worst > CROSS_TOL {
        return Err(Error::NumericsInconsistent(format!(
            "operator vs grid marginal moments disagree by {worst:.3e} on axis {}",
            axis.name()
        )));
    }
    Ok(MarginalMoments {
        alpha: MomentSequence::new(alpha, format!("alpha_{}", axis.name()))?,
        cross_discrepancy: worst,
    })
}

/// Cell flagged by the informational-completeness scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroCell {
    pub q: f64,
    pub p: f64,
    pub abs_trace: f64,
}

/// Grid report of where |Tr[W_{qp} S]| falls below eps. An empty zero set
/// (for eps below the grid minimum) indicates informational completeness
/// as far as the scan can see.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSetReport {
    pub zero_cells: Vec<ZeroCell>,
    pub min_abs: f64,
    pub min_q: f64,
    pub min_p: f64,
}

pub fn info_completeness_scan(
    s: &DensityMatrix,
    spec: &GridSpec2D,
    eps: f64,
) -> Result<ZeroSetReport> {
    spec.validate()?;
    let comps = components_of(s)?;
    let dim = s.dim();
    let qs = spec.q_centers();
    let ps = spec.p_centers();
    let rows: Result<Vec<Vec<f64>>> = qs
        .par_iter()
        .map(|&q| {
            ps.iter()
                .map(|&p| {
                    let cols = displacement_columns(q, p, dim, comps.n_cols)?;
                    let mut tr = C64::new(0.0, 0.0);
                    for (mu, v) in comps.weights.iter().zip(&comps.vectors) {
                        // mu * <v| W |v>
                        let mut acc = C64::new(0.0, 0.0);
                        for n in 0..comps.n_cols {
                            let mut col_dot = C64::new(0.0, 0.0);
                            for m in 0..comps.n_cols.max(v.len()).min(dim) {
                                col_dot += v[m].conj() * cols[(m, n)];
                            }
                            acc += col_dot * v[n];
                        }
                        tr += acc * *mu;
                    }
                    Ok(tr.norm())
                })
                .collect()
        })
        .collect();
    let rows = rows?;
    let mut zero_cells = Vec::new();
    let mut min_abs = f64::INFINITY;
    let (mut min_q, mut min_p) = (0.0, 0.0);
    for (i, row) in rows.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            if a < eps {
                zero_cells.push(ZeroCell {
                    q: qs[i],
                    p: ps[j],
                    abs_trace: a,
                });
            }
            if a < min_abs {
                min_abs = a;
                min_q = qs[i];
                min_p = ps[j];
            }
        }
    }
    Ok(ZeroSetReport {
        zero_cells,
        min_abs,
        min_q,
        min_p,
    })
}

/// Draws i.i.d. (q, p) samples from the histogram by inverse-CDF over
/// cells with uniform in-cell jitter. Deterministic for a fixed seed.
pub fn sample_outcomes(
    hist: &PhaseSpaceHistogram,
    n_shots: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if n_shots == 0 {
        return Err(Error::InvalidInput("n_shots must be >= 1".into()));
    }
    let spec = hist.spec();
    let mut cum = Vec::with_capacity(hist.values().len());
    let mut acc = 0.0;
    for &v in hist.values() {
        acc += v;
        cum.push(acc);
    }
    let total = acc;
    if total <= 0.0 {
        return Err(Error::InvalidInput("histogram has no mass".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dq, dp) = (spec.dq(), spec.dp());
    let mut out = Vec::with_capacity(n_shots);
    for _ in 0..n_shots {
        let r: f64 = rng.gen::<f64>() * total;
        let idx = cum.partition_point(|&c| c < r).min(cum.len() - 1);
        let i = idx / spec.np;
        let j = idx % spec.np;
        let uq: f64 = rng.gen();
        let up: f64 = rng.gen();
        out.push((
            spec.q_min + (i as f64 + uq) * dq,
            spec.p_min + (j as f64 + up) * dp,
        ));
    }
    Ok(out)
}

/// Empirical raw moments of one coordinate of a sample set.
pub fn empirical_axis_moments(samples: &[(f64, f64)], axis: Axis, k_max: usize) -> Vec<f64> {
    let n = samples.len() as f64;
    let mut acc = vec![0.0f64; k_max + 1];
    for &(q, p) in samples {
        let x = match axis {
            Axis::Q => q,
            Axis::P => p,
        };
        let mut pw = 1.0;
        for a in acc.iter_mut() {
            *a += pw;
            pw *= x;
        }
    }
    acc.iter().map(|a| a / n).collect()
}

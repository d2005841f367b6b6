//! Truncated number-basis linear algebra: ladder and quadrature operators,
//! Weyl displacement operators, Hermite functions, standard state families
//! and the position-representation conjugation map.
//!
//! Conventions: hbar = 1, Q = (a* + a)/sqrt(2), P = i(a* - a)/sqrt(2),
//! so [Q, P] = i and the vacuum Q-variance is 1/2. The displacement
//! W_{qp} = exp(i(pQ - qP)) shifts Q by +q and P by +p; in terms of the
//! usual coherent displacement this is D(alpha) with alpha = (q + ip)/sqrt(2).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default truncation dimension.
pub const DEFAULT_DIM: usize = 64;
/// Allowed probability mass in the top `TAIL_MARGIN` basis states.
pub const TAIL_EPS: f64 = 1e-10;
/// Number of top basis states inspected by the truncation guard.
pub const TAIL_MARGIN: usize = 8;
/// Normalization tolerance for states and traces.
pub const TOL_NORM: f64 = 1e-8;
/// Hermiticity tolerance for operators and density matrices.
pub const TOL_HERM: f64 = 1e-10;
/// Allowed negativity of density-matrix eigenvalues.
pub const TOL_PSD: f64 = 1e-10;
/// Largest Hermite-function order accepted by the recurrence.
pub const HERMITE_N_MAX: usize = 4096;

/// Pure state in the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    coeffs: DVector<C64>,
}

impl StateVector {
    /// Wraps number-basis amplitudes, enforcing normalization and the
    /// truncation tail guard.
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(coeffs);
        if v.len() < 1 {
            return Err(Error::InvalidDimension("state must have dim >= 1".into()));
        }
        let norm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > TOL_NORM {
            return Err(Error::InvalidState(format!(
                "state norm^2 = {norm2}, not 1 within {TOL_NORM}"
            )));
        }
        let state = Self { coeffs: v };
        state.check_tail()?;
        Ok(state)
    }

    /// Normalizes the coefficients, then applies the same guards as `new`.
    pub fn normalized(coeffs: Vec<C64>) -> Result<Self> {
        let norm2: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if norm2 <= 0.0 || !norm2.is_finite() {
            return Err(Error::InvalidState("cannot normalize zero/non-finite vector".into()));
        }
        let s = 1.0 / norm2.sqrt();
        Self::new(coeffs.into_iter().map(|c| c * s).collect())
    }

    fn check_tail(&self) -> Result<()> {
        let n = self.dim();
        // the guard is meaningless when the margin covers most of the space
        if n <= 2 * TAIL_MARGIN {
            return Ok(());
        }
        let start = n - TAIL_MARGIN;
        let tail: f64 = (start..n).map(|i| self.coeffs[i].norm_sqr()).sum();
        if tail > TAIL_EPS {
            return Err(Error::TruncationTooSmall(format!(
                "tail mass {tail:.3e} in top {TAIL_MARGIN} basis states exceeds {TAIL_EPS:.1e}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &DVector<C64> {
        &self.coeffs
    }

    /// Inner product <self, other>.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.coeffs.dotc(&other.coeffs)
    }

    /// Expectation value <self| op |self>, returned as a complex number.
    pub fn expectation(&self, op: &OperatorMatrix) -> C64 {
        let v = op.entries() * &self.coeffs;
        self.coeffs.dotc(&v)
    }

    /// Entrywise complex conjugate (the conjugation map C on pure states).
    pub fn conjugate(&self) -> StateVector {
        StateVector {
            coeffs: self.coeffs.map(|c| c.conj()),
        }
    }

    /// Index of the highest basis state carrying weight above `eps`.
    pub fn top_support(&self, eps: f64) -> usize {
        (0..self.dim())
            .rev()
            .find(|&i| self.coeffs[i].norm() > eps)
            .unwrap_or(0)
    }
}

/// Mixed state (or generating operator S) in the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let (r, c) = entries.shape();
        if r != c || r < 1 {
            return Err(Error::InvalidDimension(format!("matrix shape {r}x{c} is not square")));
        }
        let herm_defect = (&entries - entries.adjoint()).norm();
        if herm_defect > TOL_HERM * (1.0 + entries.norm()) {
            return Err(Error::InvalidState(format!(
                "Hermiticity defect {herm_defect:.3e} above tolerance"
            )));
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > TOL_NORM || trace.im.abs() > TOL_NORM {
            return Err(Error::InvalidState(format!("trace = {trace}, not 1")));
        }
        let herm = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        if let Some(min) = eig.eigenvalues.iter().cloned().reduce(f64::min) {
            if min < -TOL_PSD {
                return Err(Error::InvalidState(format!(
                    "negative eigenvalue {min:.3e} below -{TOL_PSD:.1e}"
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Projector |phi><phi|.
    pub fn from_pure(state: &StateVector) -> DensityMatrix {
        let v = state.coeffs();
        DensityMatrix {
            entries: v * v.adjoint(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Tr[self * op].
    pub fn trace_with(&self, op: &DMatrix<C64>) -> C64 {
        let n = self.dim();
        let mut t = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                t += self.entries[(i, k)] * op[(k, i)];
            }
        }
        t
    }

    /// Spectral decomposition into pure components with weight above `weight_tol`.
    /// Weights are renormalized to sum to the retained mass.
    pub fn spectral_components(&self, weight_tol: f64) -> Result<Vec<(f64, StateVector)>> {
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let mut comps = Vec::new();
        for (i, &w) in eig.eigenvalues.iter().enumerate() {
            if w > weight_tol {
                let col: Vec<C64> = eig.eigenvectors.column(i).iter().cloned().collect();
                comps.push((w, StateVector::normalized(col)?));
            }
        }
        if comps.is_empty() {
            return Err(Error::InvalidState("density matrix has no components above tolerance".into()));
        }
        Ok(comps)
    }
}

/// Labelled operator on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<C64>,
    label: String,
}

impl OperatorMatrix {
    pub fn new(entries: DMatrix<C64>, label: impl Into<String>) -> Self {
        Self {
            entries,
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix::new(self.entries.adjoint(), format!("{}*", self.label))
    }

    /// Matrix power by repeated multiplication.
    pub fn pow(&self, k: usize) -> OperatorMatrix {
        let n = self.dim();
        let mut acc = DMatrix::<C64>::identity(n, n);
        for _ in 0..k {
            acc = &acc * &self.entries;
        }
        OperatorMatrix::new(acc, format!("{}^{k}", self.label))
    }

    pub fn apply(&self, state: &DVector<C64>) -> DVector<C64> {
        &self.entries * state
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).norm()
    }
}

/// Annihilation operator: entry (m, n) = sqrt(n) for m = n - 1.
pub fn ladder(dim: usize) -> Result<OperatorMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("ladder requires dim >= 2, got {dim}")));
    }
    let mut a = DMatrix::<C64>::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OperatorMatrix::new(a, "a"))
}

/// Quadrature pair (Q, P) with Q = (a* + a)/sqrt(2), P = i(a* - a)/sqrt(2).
pub fn quadratures(dim: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
    let a = ladder(dim)?;
    let ad = a.entries().adjoint();
    let inv_sqrt2 = C64::new(1.0 / 2f64.sqrt(), 0.0);
    let q = (&ad + a.entries()) * inv_sqrt2;
    let p = (&ad - a.entries()) * (C64::i() * inv_sqrt2);
    Ok((OperatorMatrix::new(q, "Q"), OperatorMatrix::new(p, "P")))
}

/// Matrix elements of W_{qp} = exp(i(pQ - qP)) = D((q+ip)/sqrt(2)).
///
/// Each entry is the associated-Laguerre closed form
/// D_{m,n} = alpha^{m-n} e^{-x/2} sqrt(n!/m!) L_n^{(m-n)}(x), x = |alpha|^2
/// (and its m < n mirror), with the factorial ratio and the Gaussian factor
/// combined in log space so no intermediate overflows or underflows. The
/// obvious column-by-column ladder recurrence is avoided: it loses all
/// relative accuracy in the exponentially small tail entries.
pub fn displacement(q: f64, p: f64, dim: usize) -> Result<OperatorMatrix> {
    let cols = displacement_columns(q, p, dim, dim)?;
    Ok(OperatorMatrix::new(cols, format!("W({q},{p})")))
}

/// Laguerre polynomial L_k^{(a)}(x) by the three-term recurrence.
fn laguerre(k: usize, a: f64, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut l0 = 1.0;
    let mut l1 = 1.0 + a - x;
    for i in 1..k {
        let f = i as f64;
        let l2 = ((2.0 * f + 1.0 + a - x) * l1 - (f + a) * l0) / (f + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// First `n_cols` columns of the displacement matrix (dim x n_cols).
pub fn displacement_columns(q: f64, p: f64, dim: usize, n_cols: usize) -> Result<DMatrix<C64>> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("displacement requires dim >= 2, got {dim}")));
    }
    if n_cols == 0 || n_cols > dim {
        return Err(Error::InvalidInput(format!("n_cols = {n_cols} out of range 1..={dim}")));
    }
    if !q.is_finite() || !p.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite displacement ({q}, {p})")));
    }
    let alpha = C64::new(q, p) / 2f64.sqrt();
    let x = alpha.norm_sqr();
    let mut w = DMatrix::<C64>::zeros(dim, n_cols);
    if x == 0.0 {
        for n in 0..n_cols {
            w[(n, n)] = C64::new(1.0, 0.0);
        }
        return Ok(w);
    }
    let unit = alpha / alpha.norm();
    let ln_abs = alpha.norm().ln();
    let mut ln_fact = vec![0.0f64; dim];
    for i in 1..dim {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    for n in 0..n_cols {
        for m in 0..dim {
            let k = m.min(n);
            let a = m.abs_diff(n);
            let l = laguerre(k, a as f64, x);
            if l == 0.0 {
                continue;
            }
            let ln_mag =
                a as f64 * ln_abs + 0.5 * (ln_fact[k] - ln_fact[k + a]) - x / 2.0 + l.abs().ln();
            let phase = if m >= n {
                unit.powu(a as u32)
            } else {
                (-unit.conj()).powu(a as u32)
            };
            w[(m, n)] = phase * (l.signum() * ln_mag.exp());
        }
    }
    Ok(w)
}

/// Displacement via exponentiation of the Hermitian generator pQ - qP.
/// Slower truncated-algebra route; used to cross-check `displacement`.
pub fn displacement_matexp(q: f64, p: f64, dim: usize) -> Result<OperatorMatrix> {
    let (qop, pop) = quadratures(dim)?;
    let gen = qop.entries() * C64::new(p, 0.0) - pop.entries() * C64::new(q, 0.0);
    let eig = gen.symmetric_eigen();
    let n = dim;
    let mut phases = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        phases[(i, i)] = (C64::i() * eig.eigenvalues[i]).exp();
    }
    let w = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
    Ok(OperatorMatrix::new(w, format!("Wexp({q},{p})")))
}

/// Value of the n-th L2-normalized Hermite function at x.
///
/// Normalized three-term recurrence with the Gaussian factor folded in:
/// h_0 = pi^{-1/4} e^{-x^2/2},
/// h_{n+1} = sqrt(2/(n+1)) x h_n - sqrt(n/(n+1)) h_{n-1}.
pub fn hermite_point(n: usize, x: f64) -> Result<f64> {
    if n > HERMITE_N_MAX {
        return Err(Error::UnstableEvaluation(format!(
            "Hermite order {n} above supported maximum {HERMITE_N_MAX}"
        )));
    }
    Ok(hermite_values(n, x)[n])
}

/// Values h_0(x)..h_{n_max}(x) in one sweep of the recurrence.
pub fn hermite_values(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let h0 = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    out.push(h0);
    if n_max == 0 {
        return out;
    }
    out.push(2f64.sqrt() * x * h0);
    for n in 1..n_max {
        let np1 = (n + 1) as f64;
        let next = (2.0 / np1).sqrt() * x * out[n] - (n as f64 / np1).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// Coherent state |alpha> with c_n = e^{-|alpha|^2/2} alpha^n / sqrt(n!).
pub fn coherent_state(alpha: C64, dim: usize) -> Result<StateVector> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("coherent_state requires dim >= 2, got {dim}")));
    }
    let mut coeffs = Vec::with_capacity(dim);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    coeffs.push(c);
    for n in 1..dim {
        c *= alpha / (n as f64).sqrt();
        coeffs.push(c);
    }
    let mass: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if 1.0 - mass > TAIL_EPS {
        return Err(Error::TruncationTooSmall(format!(
            "coherent amplitude |alpha| = {:.3} leaks {:.3e} beyond dim {dim}",
            alpha.norm(),
            1.0 - mass
        )));
    }
    // Renormalize the truncated amplitudes.
    let s = 1.0 / mass.sqrt();
    StateVector::new(coeffs.into_iter().map(|c| c * s).collect())
}

/// Number basis vector e_n.
pub fn number_state(n: usize, dim: usize) -> Result<StateVector> {
    if n >= dim {
        return Err(Error::InvalidDimension(format!("number_state({n}) needs dim > {n}")));
    }
    let mut coeffs = vec![C64::new(0.0, 0.0); dim];
    coeffs[n] = C64::new(1.0, 0.0);
    StateVector::new(coeffs)
}

/// Convex combination of pure projectors.
pub fn mix(states: &[StateVector], weights: &[f64]) -> Result<DensityMatrix> {
    if states.is_empty() || states.len() != weights.len() {
        return Err(Error::InvalidMixture(format!(
            "{} states vs {} weights",
            states.len(),
            weights.len()
        )));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > TOL_NORM {
        return Err(Error::InvalidMixture(format!(
            "weights must be nonnegative and sum to 1 (sum = {sum})"
        )));
    }
    let dim = states[0].dim();
    if states.iter().any(|s| s.dim() != dim) {
        return Err(Error::InvalidMixture("mixed dimensions".into()));
    }
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for (s, &w) in states.iter().zip(weights) {
        let v = s.coeffs();
        rho += (v * v.adjoint()) * C64::new(w, 0.0);
    }
    DensityMatrix::new(rho)
}

/// The conjugation map C^{-1} S C: entrywise complex conjugation in the
/// (real) Hermite basis.
pub fn conjugate_state(s: &DensityMatrix) -> DensityMatrix {
    DensityMatrix {
        entries: s.entries().map(|c| c.conj()),
    }
}

/// Vacuum projector |0><0| at the given dimension.
pub fn vacuum_projector(dim: usize) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_pure(&number_state(0, dim)?))
}

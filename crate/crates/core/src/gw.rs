//! Squared-loss Gromov-Wasserstein objective and the marginal constraint map.
//!
//! For cost matrices `C_X` (n x n), `C_Y` (m x m) and a coupling `P` (n x m),
//! the quadratic part of the energy is `f(P) = -<C_X P C_Y^T, P>` and the full
//! energy is `E(P) = a'(C_X o C_X)a + b'(C_Y o C_Y)b + 2 f(P)`. For symmetric
//! costs `C_Y^T = C_Y`; the transpose keeps the decomposition exact otherwise.
//! Everything is evaluated with two dense matrix products; nothing here touches
//! the O(n^2 m^2) quadruple sum.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{dim_mismatch, GwError, Result};

/// Tolerance on `|sum(w) - 1|` accepted by [`Marginals::new`].
pub const MARGINAL_SUM_TOL: f64 = 1e-12;

/// Square, nonnegative intra-domain dissimilarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
    symmetric: bool,
}

impl CostMatrix {
    /// Validates shape and entries. The symmetry flag is detected exactly
    /// (entrywise equality with the transpose).
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (rows, cols) = entries.dim();
        if rows != cols {
            return Err(GwError::InvalidCost(format!(
                "matrix must be square, got {rows}x{cols}"
            )));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(GwError::InvalidCost(format!(
                "entries must be finite and nonnegative, found {bad}"
            )));
        }
        let symmetric = (0..rows).all(|i| (0..i).all(|j| entries[[i, j]] == entries[[j, i]]));
        Ok(Self { entries, symmetric })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: Array2::zeros((n, n)),
            symmetric: true,
        }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.entries
    }
}

/// Probability vector: nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals(Array1<f64>);

impl Marginals {
    /// Rejects (never renormalizes) weights whose sum is off by more than
    /// [`MARGINAL_SUM_TOL`].
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(GwError::InvalidMarginals("empty weight vector".into()));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(GwError::InvalidMarginals(format!(
                "weights must be finite and nonnegative, found {bad}"
            )));
        }
        let total = weights.sum();
        if (total - 1.0).abs() > MARGINAL_SUM_TOL {
            return Err(GwError::InvalidMarginals(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("marginals are contiguous")
    }
}

/// Nonnegative n x m transport matrix. Feasibility is not required.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling(Array2<f64>);

impl Coupling {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(GwError::InvalidCoupling(format!(
                "entries must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Self(entries))
    }

    /// Caller guarantees nonnegativity (e.g. the output of a max(0, .) pass).
    pub(crate) fn from_nonnegative(entries: Array2<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| *v >= 0.0));
        Self(entries)
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self(Array2::zeros((n, m)))
    }

    /// The independent coupling `a b'`.
    pub fn product(a: &Marginals, b: &Marginals) -> Self {
        let a = a.view();
        let b = b.view();
        Self(Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j]))
    }

    /// `P_sigma / n` for a permutation `sigma` of `0..n` (row i sends mass to
    /// column `sigma[i]`).
    pub fn from_permutation(sigma: &[usize]) -> Self {
        let n = sigma.len();
        let mut entries = Array2::zeros((n, n));
        for (i, &j) in sigma.iter().enumerate() {
            entries[[i, j]] = 1.0 / n as f64;
        }
        Self(entries)
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(self.0.view())
    }
}

/// Row and column sums of a coupling, i.e. the image under the constraint map.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintImage {
    pub row_sums: Array1<f64>,
    pub col_sums: Array1<f64>,
}

impl ConstraintImage {
    /// Concatenated `(row_sums, col_sums)`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.row_sums.iter().chain(self.col_sums.iter()).copied().collect()
    }

    /// `||(row_sums - a, col_sums - b)||_2`.
    pub fn residual(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        let rows: f64 = Zip::from(&self.row_sums).and(&a).fold(0.0, |acc, r, t| acc + (r - t).powi(2));
        let cols: f64 = Zip::from(&self.col_sums).and(&b).fold(0.0, |acc, c, t| acc + (c - t).powi(2));
        (rows + cols).sqrt()
    }

    /// `||row_sums - a||_2 + ||col_sums - b||_2`, the split form used for reporting.
    pub fn split_residual(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        let rows: f64 = Zip::from(&self.row_sums).and(&a).fold(0.0, |acc, r, t| acc + (r - t).powi(2));
        let cols: f64 = Zip::from(&self.col_sums).and(&b).fold(0.0, |acc, c, t| acc + (c - t).powi(2));
        rows.sqrt() + cols.sqrt()
    }
}

pub(crate) fn frobenius(m: ArrayView2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn check_conformable(
    context: &'static str,
    pi: ArrayView2<f64>,
    c1: &CostMatrix,
    c2: &CostMatrix,
) -> Result<()> {
    let (n, m) = pi.dim();
    if c1.size() != n || c2.size() != m {
        return Err(dim_mismatch(
            context,
            format!("coupling {}x{}", c1.size(), c2.size()),
            format!("{n}x{m}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_problem(c1: &CostMatrix, c2: &CostMatrix, a: &Marginals, b: &Marginals, pi0: &Coupling) -> Result<()> {
    let (n, m) = pi0.dim();
    if c1.size() != n || c2.size() != m {
        return Err(dim_mismatch("initial coupling", format!("{}x{}", c1.size(), c2.size()), format!("{n}x{m}")));
    }
    if a.len() != n || b.len() != m {
        return Err(dim_mismatch("marginals", format!("({n}, {m})"), format!("({}, {})", a.len(), b.len())));
    }
    Ok(())
}

/// Applies the constraint map: row sums and column sums.
pub fn apply_a(pi: ArrayView2<f64>) -> ConstraintImage {
    let (n, m) = pi.dim();
    let mut row_sums = Array1::zeros(n);
    let mut col_sums = Array1::zeros(m);
    for (i, row) in pi.outer_iter().enumerate() {
        let mut acc = 0.0;
        for (j, &v) in row.iter().enumerate() {
            acc += v;
            col_sums[j] += v;
        }
        row_sums[i] = acc;
    }
    ConstraintImage { row_sums, col_sums }
}

/// Adjoint of the constraint map: `out[i][j] = u[i] + v[j]` for `y = (u, v)`.
pub fn apply_a_adjoint(y: ArrayView1<f64>, n: usize, m: usize) -> Result<Array2<f64>> {
    if y.len() != n + m {
        return Err(dim_mismatch("apply_a_adjoint", n + m, y.len()));
    }
    Ok(Array2::from_shape_fn((n, m), |(i, j)| y[i] + y[n + j]))
}

/// `C_X P C_Y^T + C_X^T P C_Y`, collapsing to `2 C_X P C_Y` when both costs
/// are symmetric.
fn symmetrized_product(pi: ArrayView2<f64>, c1: &CostMatrix, c2: &CostMatrix) -> Array2<f64> {
    let left = c1.view().dot(&pi);
    if c1.is_symmetric() && c2.is_symmetric() {
        let mut out = left.dot(&c2.view());
        out *= 2.0;
        out
    } else {
        let a = left.dot(&c2.view().t());
        let b = c1.view().t().dot(&pi).dot(&c2.view());
        a + b
    }
}

/// `f(P) = -<C_X P C_Y^T, P>`.
pub fn gw_quadratic(pi: &Coupling, c1: &CostMatrix, c2: &CostMatrix) -> Result<f64> {
    quadratic_view(pi.view(), c1, c2)
}

pub(crate) fn quadratic_view(pi: ArrayView2<f64>, c1: &CostMatrix, c2: &CostMatrix) -> Result<f64> {
    check_conformable("gw_quadratic", pi, c1, c2)?;
    let prod = c1.view().dot(&pi).dot(&c2.view().t());
    Ok(-Zip::from(&prod).and(&pi).fold(0.0, |acc, x, p| acc + x * p))
}

/// The Pi-independent part of the energy: `a'(C_X o C_X)a + b'(C_Y o C_Y)b`.
pub fn energy_constant(c1: &CostMatrix, c2: &CostMatrix, a: &Marginals, b: &Marginals) -> Result<f64> {
    if c1.size() != a.len() {
        return Err(dim_mismatch("energy_constant (source)", c1.size(), a.len()));
    }
    if c2.size() != b.len() {
        return Err(dim_mismatch("energy_constant (target)", c2.size(), b.len()));
    }
    let quad = |c: &CostMatrix, w: ArrayView1<f64>| -> f64 {
        c.view()
            .outer_iter()
            .zip(w.iter())
            .map(|(row, wi)| wi * row.iter().zip(w.iter()).map(|(cij, wj)| cij * cij * wj).sum::<f64>())
            .sum()
    };
    Ok(quad(c1, a.view()) + quad(c2, b.view()))
}

/// Full squared-loss GW energy of a (possibly infeasible) coupling.
pub fn gw_energy(
    pi: &Coupling,
    c1: &CostMatrix,
    c2: &CostMatrix,
    a: &Marginals,
    b: &Marginals,
) -> Result<f64> {
    let constant = energy_constant(c1, c2, a, b)?;
    Ok(constant + 2.0 * gw_quadratic(pi, c1, c2)?)
}

/// Gradient of [`gw_quadratic`]: `-(C_X P C_Y^T + C_X^T P C_Y)`.
pub fn gw_gradient(pi: &Coupling, c1: &CostMatrix, c2: &CostMatrix) -> Result<Array2<f64>> {
    gradient_view(pi.view(), c1, c2)
}

pub(crate) fn gradient_view(pi: ArrayView2<f64>, c1: &CostMatrix, c2: &CostMatrix) -> Result<Array2<f64>> {
    check_conformable("gw_gradient", pi, c1, c2)?;
    let mut g = symmetrized_product(pi, c1, c2);
    g.mapv_inplace(|v| -v);
    Ok(g)
}

/// Largest singular value, as estimated by power iteration on `M^T M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 5000;

/// Spectral norm by power iteration from a fixed start vector
/// (all ones plus a small index-dependent tilt). When the iteration cap is hit
/// the estimate is inflated by 1% so it stays usable as an upper bound.
pub fn spectral_norm(m: ArrayView2<f64>) -> SpectralEstimate {
    let cols = m.ncols();
    if cols == 0 || m.iter().all(|v| *v == 0.0) {
        return SpectralEstimate { value: 0.0, iterations: 0, converged: true };
    }
    let mut x = Array1::from_shape_fn(cols, |i| 1.0 + 1e-3 * (i + 1) as f64 / cols as f64);
    let norm = x.dot(&x).sqrt();
    x /= norm;

    let mut lambda_prev = f64::NAN;
    let mut best = 0.0_f64;
    for it in 1..=POWER_MAX_ITER {
        let z = m.t().dot(&m.dot(&x));
        let lambda = x.dot(&z);
        best = best.max(lambda);
        let z_norm = z.dot(&z).sqrt();
        if z_norm == 0.0 {
            // start vector in the null space; fall back to a unit basis vector
            x.fill(0.0);
            x[it % cols] = 1.0;
            continue;
        }
        if (lambda - lambda_prev).abs() <= POWER_TOL * lambda.abs() {
            return SpectralEstimate { value: lambda.max(0.0).sqrt(), iterations: it, converged: true };
        }
        lambda_prev = lambda;
        x = z / z_norm;
    }
    SpectralEstimate {
        value: 1.01 * best.max(0.0).sqrt(),
        iterations: POWER_MAX_ITER,
        converged: false,
    }
}

/// Smoothness constant of `f`: `L_f = 2 ||C_X||_2 ||C_Y||_2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBound {
    pub value: f64,
    pub converged: bool,
}

pub fn lipschitz_bound(c1: &CostMatrix, c2: &CostMatrix) -> LipschitzBound {
    let s1 = spectral_norm(c1.view());
    let s2 = spectral_norm(c2.view());
    let converged = s1.converged && s2.converged;
    if !converged {
        log::warn!(
            "power iteration hit its cap ({} / {} iterations); using inflated estimate",
            s1.iterations,
            s2.iterations
        );
    }
    LipschitzBound { value: 2.0 * s1.value * s2.value, converged }
}

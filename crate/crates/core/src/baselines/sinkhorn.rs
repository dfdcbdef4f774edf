//! Entropic optimal transport by Sinkhorn scaling.
//!
//! Scalings are kept relative to log-domain potentials `(f, g)`: the working
//! kernel is `exp((f_i + g_j - C_ij) / eps)` and the plan is
//! `diag(u) K diag(v)`. Whenever a scaling leaves a safe range it is absorbed
//! into the potentials; whenever a plain scaling step breaks down (underflowed
//! kernel rows, overflow) the potentials are updated by an exact log-sum-exp
//! step instead. Infinite costs yield exact zeros.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{dim_mismatch, GwError, Result};
use crate::gw::Coupling;

/// Scalings beyond `exp(±ABSORB_LOG)` are folded into the potentials.
const ABSORB_LOG: f64 = 200.0;

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    pub plan: Coupling,
    /// Row potential; the plan is `exp((f_i + g_j - C_ij) / eps)`.
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub iterations: usize,
    /// `||P 1 - a||_1 + ||P^T 1 - b||_1` of the returned plan.
    pub marginal_error: f64,
    pub converged: bool,
}

/// Entropic OT plan `diag(u) exp(-cost/eps) diag(v)` with marginals `a`, `b`
/// to within `tol` in the l1 norm (or the best plan after `max_iter` sweeps).
pub fn sinkhorn(
    cost: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<Coupling> {
    Ok(sinkhorn_potentials(cost, a, b, epsilon, max_iter, tol, None)?.plan)
}

/// Like [`sinkhorn`] but returns the potentials and convergence data, and
/// optionally starts from previous potentials.
pub fn sinkhorn_potentials(
    cost: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
    warm: Option<(&Array1<f64>, &Array1<f64>)>,
) -> Result<SinkhornOutput> {
    let (n, m) = cost.dim();
    if a.len() != n || b.len() != m {
        return Err(dim_mismatch("sinkhorn", format!("({n}, {m})"), format!("({}, {})", a.len(), b.len())));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(GwError::InvalidParameter { name: "epsilon", reason: format!("must be positive and finite, got {epsilon}") });
    }
    if cost.iter().any(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
        return Err(GwError::InvalidCost("sinkhorn cost must not contain NaN or -inf".into()));
    }
    if a.iter().chain(b.iter()).any(|w| !w.is_finite() || *w < 0.0) {
        return Err(GwError::InvalidMarginals("weights must be finite and nonnegative".into()));
    }

    let mut state = State {
        cost,
        a,
        b,
        eps: epsilon,
        f: Array1::zeros(n),
        g: Array1::zeros(m),
        u: Array1::ones(n),
        v: Array1::ones(m),
        kernel: Array2::zeros((n, m)),
    };
    if let Some((f0, g0)) = warm {
        if f0.len() == n && g0.len() == m && f0.iter().chain(g0.iter()).all(|x| !x.is_nan() && *x != f64::INFINITY) {
            state.f.assign(f0);
            state.g.assign(g0);
        }
    }
    state.log_update_f()?;
    state.refresh_kernel();

    let mut iterations = 0;
    let mut converged = false;
    let mut kv = Array1::zeros(n);
    let mut ktu = Array1::zeros(m);
    while iterations < max_iter {
        iterations += 1;

        transposed_matvec(&state.kernel, &state.u, &mut ktu);
        if !scale_into(&mut state.v, b, &ktu) {
            state.absorb();
            state.log_update_g()?;
            state.refresh_kernel();
        }

        matvec(&state.kernel, &state.v, &mut kv);
        let row_err: f64 = Zip::from(&state.u).and(&kv).and(&a).fold(0.0, |acc, u, k, t| acc + (u * k - t).abs());
        if row_err <= tol {
            converged = true;
            break;
        }
        if !scale_into(&mut state.u, a, &kv) {
            state.absorb();
            state.log_update_f()?;
            state.refresh_kernel();
        }

        let wide = state.u.iter().chain(state.v.iter()).any(|s| *s > 0.0 && s.ln().abs() > ABSORB_LOG);
        if wide {
            state.absorb();
            state.refresh_kernel();
        }
    }

    let plan = state.plan();
    if plan.iter().any(|p| !p.is_finite()) {
        return Err(GwError::NonFiniteKernel { epsilon });
    }
    let marginal_error = {
        let rows = plan.sum_axis(ndarray::Axis(1));
        let cols = plan.sum_axis(ndarray::Axis(0));
        Zip::from(&rows).and(&a).fold(0.0, |acc, r, t| acc + (r - t).abs())
            + Zip::from(&cols).and(&b).fold(0.0, |acc, c, t| acc + (c - t).abs())
    };
    if !converged {
        log::debug!("sinkhorn stopped after {iterations} sweeps with marginal error {marginal_error:e}");
    }
    state.absorb();
    Ok(SinkhornOutput {
        plan: Coupling::from_nonnegative(plan),
        f: state.f,
        g: state.g,
        iterations,
        marginal_error,
        converged,
    })
}

const LANES: usize = 8;

/// `out = K x` for a standard-layout `K`.
fn matvec(k: &Array2<f64>, x: &Array1<f64>, out: &mut Array1<f64>) {
    let x = x.as_slice().expect("contiguous");
    for (row, o) in k.outer_iter().zip(out.iter_mut()) {
        let row = row.to_slice().expect("standard layout kernel");
        let mut acc = [0.0; LANES];
        let split = row.len() - row.len() % LANES;
        for (rc, xc) in row[..split].chunks_exact(LANES).zip(x[..split].chunks_exact(LANES)) {
            for l in 0..LANES {
                acc[l] += rc[l] * xc[l];
            }
        }
        let tail: f64 = row[split..].iter().zip(&x[split..]).map(|(r, x)| r * x).sum();
        *o = acc.iter().sum::<f64>() + tail;
    }
}

/// `out = K^T x` for a standard-layout `K`.
fn transposed_matvec(k: &Array2<f64>, x: &Array1<f64>, out: &mut Array1<f64>) {
    out.fill(0.0);
    let out = out.as_slice_mut().expect("contiguous");
    for (row, &xi) in k.outer_iter().zip(x.iter()) {
        if xi == 0.0 {
            continue;
        }
        let row = row.to_slice().expect("standard layout kernel");
        for (o, &r) in out.iter_mut().zip(row) {
            *o += xi * r;
        }
    }
}

/// `s = target / k` entrywise (0 where the target is 0). Returns false if any
/// entry comes out non-finite or a positive target meets a zero denominator.
fn scale_into(s: &mut Array1<f64>, target: ArrayView1<f64>, k: &Array1<f64>) -> bool {
    let mut ok = true;
    Zip::from(s).and(&target).and(k).for_each(|s, &t, &k| {
        if t == 0.0 {
            *s = 0.0;
        } else {
            *s = t / k;
            ok &= s.is_finite() && *s > 0.0;
        }
    });
    ok
}

struct State<'a> {
    cost: ArrayView2<'a, f64>,
    a: ArrayView1<'a, f64>,
    b: ArrayView1<'a, f64>,
    eps: f64,
    f: Array1<f64>,
    g: Array1<f64>,
    u: Array1<f64>,
    v: Array1<f64>,
    kernel: Array2<f64>,
}

impl State<'_> {
    fn absorb(&mut self) {
        let eps = self.eps;
        Zip::from(&mut self.f).and(&self.u).for_each(|f, &u| *f += eps * u.ln());
        Zip::from(&mut self.g).and(&self.v).for_each(|g, &v| *g += eps * v.ln());
        // zero-mass rows/columns end at -inf; keep them there rather than NaN
        self.f.mapv_inplace(|f| if f.is_nan() { f64::NEG_INFINITY } else { f });
        self.g.mapv_inplace(|g| if g.is_nan() { f64::NEG_INFINITY } else { g });
        self.u.fill(1.0);
        self.v.fill(1.0);
    }

    fn refresh_kernel(&mut self) {
        let eps = self.eps;
        for (i, (mut row, crow)) in self.kernel.outer_iter_mut().zip(self.cost.outer_iter()).enumerate() {
            let fi = self.f[i];
            Zip::from(&mut row).and(&crow).and(&self.g).for_each(|k, &c, &g| {
                let e = (fi + g - c) / eps;
                let x = e.exp();
                // subnormal kernel entries carry no mass but make every sweep slow
                *k = if x >= f64::MIN_POSITIVE { x } else { 0.0 };
            });
        }
    }

    /// Exact row step in the log domain (assumes absorbed scalings).
    fn log_update_f(&mut self) -> Result<()> {
        let eps = self.eps;
        for (i, crow) in self.cost.outer_iter().enumerate() {
            if self.a[i] == 0.0 {
                self.f[i] = f64::NEG_INFINITY;
                continue;
            }
            let lse = log_sum_exp(crow.iter().zip(self.g.iter()).map(|(&c, &g)| (g - c) / eps));
            self.f[i] = eps * (self.a[i].ln() - lse);
            if !self.f[i].is_finite() {
                return Err(GwError::NonFiniteKernel { epsilon: eps });
            }
        }
        self.u.fill(1.0);
        Ok(())
    }

    fn log_update_g(&mut self) -> Result<()> {
        let eps = self.eps;
        for (j, ccol) in self.cost.columns().into_iter().enumerate() {
            if self.b[j] == 0.0 {
                self.g[j] = f64::NEG_INFINITY;
                continue;
            }
            let lse = log_sum_exp(ccol.iter().zip(self.f.iter()).map(|(&c, &f)| (f - c) / eps));
            self.g[j] = eps * (self.b[j].ln() - lse);
            if !self.g[j].is_finite() {
                return Err(GwError::NonFiniteKernel { epsilon: eps });
            }
        }
        self.v.fill(1.0);
        Ok(())
    }

    fn plan(&self) -> Array2<f64> {
        let mut p = self.kernel.clone();
        for (mut row, &u) in p.outer_iter_mut().zip(self.u.iter()) {
            Zip::from(&mut row).and(&self.v).for_each(|p, &v| *p *= u * v);
        }
        p
    }
}

/// `log(sum exp(x))`, ignoring `-inf` and `NaN` terms; `-inf` if none remain.
fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().filter(|x| !x.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let s: f64 = values.filter(|x| !x.is_nan()).map(|x| (x - max).exp()).sum();
    max + s.ln()
}

//! Dense least squares, ridge solves, Gauss-Legendre quadrature and the
//! deterministic random-number stream shared by the simulation harness.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Minimum-norm least-squares solution of `X c ~ y` via SVD.
///
/// Singular values below `1e-10 * s_max` are treated as zero, so
/// rank-deficient designs fall back to the minimum-norm solution.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    least_squares_with_rank(x, y).map(|(c, _)| c)
}

/// Like [`least_squares`] but also reports the numerical rank.
pub fn least_squares_with_rank(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, usize)> {
    truncated_least_squares(x, y, 1e-10)
}

/// Minimum-norm least squares with a caller-chosen relative singular-value
/// cutoff. Directions with `s <= rel_tol * s_max` are dropped, which
/// regularizes designs whose columns are barely supported by the sample.
pub fn truncated_least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    rel_tol: f64,
) -> Result<(DVector<f64>, usize)> {
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least_squares input"));
    }
    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = rel_tol * s_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let sol = svd
        .solve(y, tol)
        .map_err(|_| Error::NonFinite("SVD solve"))?;
    Ok((sol.column(0).into_owned(), rank))
}

/// Minimizes `0.5*|y - Xc|^2 + 0.5*scale*c'Omega*c` for symmetric PSD
/// `Omega`.
pub fn ridge_solve(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    omega: &DMatrix<f64>,
    scale: f64,
) -> Result<DVector<f64>> {
    if x.iter().any(|v| !v.is_finite())
        || y.iter().any(|v| !v.is_finite())
        || omega.iter().any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("ridge_solve input"));
    }
    // Augmented least-squares form: stack sqrt(scale) * Omega^{1/2} under X
    // and solve by SVD. Normal equations square the condition number, which
    // loses accuracy when penalty weights dwarf the data part of the system.
    let q = omega.nrows();
    let eig = omega.clone().symmetric_eigen();
    let mut aug = DMatrix::zeros(x.nrows() + q, q);
    aug.view_mut((0, 0), (x.nrows(), q)).copy_from(x);
    for j in 0..q {
        let ev = eig.eigenvalues[j].max(0.0) * scale;
        let row = eig.eigenvectors.column(j).transpose() * ev.sqrt();
        aug.view_mut((x.nrows() + j, 0), (1, q)).copy_from(&row);
    }
    let mut y_aug = DVector::zeros(x.nrows() + q);
    y_aug.rows_mut(0, x.nrows()).copy_from(y);
    // column equilibration: penalty weights can differ by many orders of
    // magnitude between blocks, and unit-norm columns keep the SVD accurate
    let mut scales = vec![1.0; q];
    for j in 0..q {
        let n = aug.column(j).norm();
        if n > 0.0 {
            scales[j] = n;
            let mut col = aug.column_mut(j);
            col /= n;
        }
    }
    let (mut sol, _) = truncated_least_squares(&aug, &y_aug, 1e-12)?;
    // two rounds of iterative refinement recover the digits the SVD solve
    // loses when the penalty makes the system stiff
    for _ in 0..2 {
        let resid = &y_aug - &aug * &sol;
        let (corr, _) = truncated_least_squares(&aug, &resid, 1e-12)?;
        sol += corr;
    }
    for j in 0..q {
        sol[j] /= scales[j];
    }
    Ok(sol)
}

/// Gauss-Legendre nodes and weights on `[a, b]`, exact for polynomials of
/// degree `2n - 1`. Nodes are found by Newton iteration on the Legendre
/// polynomial with the usual Chebyshev initial guess.
pub fn gauss_legendre(n_nodes: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=64).contains(&n_nodes) {
        return Err(Error::InvalidNodeCount(n_nodes));
    }
    let n = n_nodes;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // initial guess for the i-th root of P_n on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    // affine map [-1, 1] -> [a, b]
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    Ok((nodes, weights))
}

/// Integrates `f` over `[a, b]` with an `n`-node Gauss-Legendre rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n_nodes: usize) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(n_nodes, a, b)?;
    Ok(nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * f(x))
        .sum())
}

/// Deterministic counter-based random stream.
///
/// Identical `(seed, stream_index)` pairs reproduce the same sequence across
/// runs and thread schedules; parallel Monte Carlo replicates each own a
/// distinct stream index.
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self { rng }
    }

    /// Uniform draw in (0, 1].
    pub fn uniform(&mut self) -> f64 {
        (((self.rng.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// `count` iid standard normal draws via the Box-Muller transform.
    pub fn standard_normal(&mut self, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u1 = self.uniform();
            let u2 = self.uniform();
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = 2.0 * std::f64::consts::PI * u2;
            out.push(r * theta.cos());
            if out.len() < count {
                out.push(r * theta.sin());
            }
        }
        out
    }
}

//! Three-step spline estimation of the varying-coefficient additive model,
//! plus BIC selection of the segment length and knot count.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{
    normalize, ComponentFunction, FitDiagnostics, TimeSeriesDataset, VcamFit,
};
use crate::numerics::{least_squares_with_rank, truncated_least_squares};
use crate::splines::{build_basis, KnotPlacement, SplineBasis, SplineSpec};

/// Spline orders, search grids and the anchoring point for an estimation run.
#[derive(Clone, Debug)]
pub struct EstimationConfig {
    pub order_step1: usize,
    pub order_step2: usize,
    pub order_step3: usize,
    pub k_grid: Vec<usize>,
    pub i_grid: Vec<usize>,
    pub shared_k: bool,
    pub anchor: f64,
    /// Optional extra Step II/III rounds; one pass is the default.
    pub extra_rounds: usize,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            order_step1: 3,
            order_step2: 3,
            order_step3: 3,
            k_grid: (3..=8).collect(),
            i_grid: vec![25, 30],
            shared_k: true,
            anchor: 0.0,
            extra_rounds: 0,
        }
    }
}

/// Output of the Step-I segmentation fit: the scaled additive component
/// estimates and the per-group intercepts.
#[derive(Clone, Debug)]
pub struct Step1Result {
    pub gamma: Vec<ComponentFunction>,
    pub group_count: usize,
    pub intercepts: Vec<f64>,
    pub rank_warnings: usize,
}

/// Quantile-knot bases for the covariates, one per column, on the observed
/// ranges.
pub fn covariate_bases(
    data: &TimeSeriesDataset,
    order: usize,
    interior: usize,
) -> Result<Vec<SplineBasis>> {
    (0..data.covariate_count())
        .map(|k| {
            let (lo, hi) = data.covariate_range(k);
            if !(lo < hi) {
                return Err(Error::InvalidDomain(lo, hi));
            }
            build_basis(&SplineSpec {
                order,
                interior_count: interior,
                domain: (lo, hi),
                placement: KnotPlacement::Quantile(data.x.column(k).iter().cloned().collect()),
            })
        })
        .collect()
}

/// Uniform-knot basis for the rescaled time variable on [0, 1].
pub fn time_basis(order: usize, interior: usize) -> Result<SplineBasis> {
    build_basis(&SplineSpec::uniform(order, interior, (0.0, 1.0)))
}

/// Step I: segment time into consecutive groups of length `i_t`, fit an
/// additive model per group over the centered scaled bases, and average the
/// per-group coefficient blocks into the scaled additive estimates.
/// Relative singular-value cutoff for the per-group solves in Step I.
///
/// Groups hold only `I_T` observations, so basis functions supported on a
/// thinly populated slice of the covariate range produce tiny singular
/// values; keeping those directions lets noise blow up the group average.
/// Directions below this fraction of the leading singular value are
/// dropped (the solution stays minimum-norm).
pub const GROUP_SVD_TOL: f64 = 3e-2;

pub fn step1_gamma(
    data: &TimeSeriesDataset,
    i_t: usize,
    bases: &[SplineBasis],
    anchors: &[f64],
) -> Result<Step1Result> {
    step1_gamma_with_tol(data, i_t, bases, anchors, GROUP_SVD_TOL)
}

pub fn step1_gamma_with_tol(
    data: &TimeSeriesDataset,
    i_t: usize,
    bases: &[SplineBasis],
    anchors: &[f64],
    group_rel_tol: f64,
) -> Result<Step1Result> {
    let t = data.len();
    let p = data.covariate_count();
    if i_t == 0 || !t.is_multiple_of(i_t) {
        return Err(Error::Indivisible { i_t, t });
    }
    let cols = 1 + bases.iter().map(|b| b.dim()).sum::<usize>();
    if i_t <= cols {
        return Err(Error::GroupTooSmall { i_t, cols });
    }
    let n_groups = t / i_t;

    // precompute centered scaled basis rows once; groups reuse them
    let mut psi_rows: Vec<Vec<DVector<f64>>> = Vec::with_capacity(p);
    for k in 0..p {
        let mut rows = Vec::with_capacity(t);
        for ti in 0..t {
            rows.push(bases[k].eval_scaled(data.x[(ti, k)], Some(anchors[k]))?);
        }
        psi_rows.push(rows);
    }

    let mut h_sum: Vec<DVector<f64>> = bases.iter().map(|b| DVector::zeros(b.dim())).collect();
    let mut intercepts = Vec::with_capacity(n_groups);
    let mut rank_warnings = 0usize;

    for s in 0..n_groups {
        let mut design = DMatrix::zeros(i_t, cols);
        let mut y = DVector::zeros(i_t);
        for j in 0..i_t {
            let ti = s * i_t + j;
            design[(j, 0)] = 1.0;
            let mut off = 1;
            for k in 0..p {
                let row = &psi_rows[k][ti];
                for l in 0..row.len() {
                    design[(j, off + l)] = row[l];
                }
                off += row.len();
            }
            y[j] = data.y[ti];
        }
        let (sol, rank) = truncated_least_squares(&design, &y, group_rel_tol)?;
        if rank < cols {
            rank_warnings += 1;
        }
        intercepts.push(sol[0]);
        let mut off = 1;
        for k in 0..p {
            let jk = bases[k].dim();
            for l in 0..jk {
                h_sum[k][l] += sol[off + l];
            }
            off += jk;
        }
    }

    let gamma = (0..p)
        .map(|k| {
            ComponentFunction::additive(
                bases[k].clone(),
                &h_sum[k] / n_groups as f64,
                anchors[k],
            )
        })
        .collect();
    Ok(Step1Result {
        gamma,
        group_count: n_groups,
        intercepts,
        rank_warnings,
    })
}

/// Varying-coefficient design with blocks `phi_0(t/T)` and
/// `g_k(x_tk) * phi_k(t/T)` for supplied multiplier functions `g_k`.
fn varying_design(
    data: &TimeSeriesDataset,
    time_b: &SplineBasis,
    multipliers: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    let t = data.len();
    let p = multipliers.len();
    let jc = time_b.dim();
    let mut design = DMatrix::zeros(t, (p + 1) * jc);
    for ti in 0..t {
        let phi = time_b.eval_scaled(data.rescaled_time(ti), None)?;
        for l in 0..jc {
            design[(ti, l)] = phi[l];
        }
        for k in 0..p {
            let g = multipliers[k][ti];
            for l in 0..jc {
                design[(ti, (k + 1) * jc + l)] = g * phi[l];
            }
        }
    }
    Ok(design)
}

/// Step II: plug the scaled additive estimates into the model, fit the
/// varying-coefficient regression over the time basis, and normalize.
pub fn step2_alpha(
    data: &TimeSeriesDataset,
    gamma: &[ComponentFunction],
    time_b: &SplineBasis,
) -> Result<(Vec<ComponentFunction>, Vec<f64>)> {
    let p = gamma.len();
    let mut multipliers = Vec::with_capacity(p);
    for (k, g) in gamma.iter().enumerate() {
        if g.l2_norm(0)? <= 1e-10 {
            return Err(Error::DegenerateComponent(k + 1));
        }
        let vals: Result<Vec<f64>> = (0..data.len()).map(|ti| g.eval(data.x[(ti, k)])).collect();
        multipliers.push(vals?);
    }
    let design = varying_design(data, time_b, &multipliers)?;
    let (sol, _) = least_squares_with_rank(&design, &data.y)?;
    let jc = time_b.dim();
    let delta: Vec<ComponentFunction> = (0..=p)
        .map(|k| {
            ComponentFunction::varying(time_b.clone(), sol.rows(k * jc, jc).into_owned())
        })
        .collect();
    normalize(delta)
}

/// Step III: with the normalized varying coefficients fixed, refit the
/// additive component functions over the centered scaled covariate bases.
pub fn step3_beta(
    data: &TimeSeriesDataset,
    alpha: &[ComponentFunction],
    bases: &[SplineBasis],
    anchors: &[f64],
) -> Result<Vec<ComponentFunction>> {
    let t = data.len();
    let p = bases.len();
    let cols: usize = bases.iter().map(|b| b.dim()).sum();
    let mut design = DMatrix::zeros(t, cols);
    let mut y = DVector::zeros(t);
    for ti in 0..t {
        let u = data.rescaled_time(ti);
        y[ti] = data.y[ti] - alpha[0].eval(u)?;
        let mut off = 0;
        for k in 0..p {
            let a = alpha[k + 1].eval(u)?;
            let psi = bases[k].eval_scaled(data.x[(ti, k)], Some(anchors[k]))?;
            for l in 0..psi.len() {
                design[(ti, off + l)] = a * psi[l];
            }
            off += psi.len();
        }
    }
    if p == 0 {
        return Ok(Vec::new());
    }
    let (sol, _) = least_squares_with_rank(&design, &y)?;
    let mut out = Vec::with_capacity(p);
    let mut off = 0;
    for (k, b) in bases.iter().enumerate() {
        let jk = b.dim();
        out.push(ComponentFunction::additive(
            b.clone(),
            sol.rows(off, jk).into_owned(),
            anchors[k],
        ));
        off += jk;
    }
    Ok(out)
}

/// In-sample residual sum of squares of a fit.
pub fn residual_sum_of_squares(data: &TimeSeriesDataset, fit: &VcamFit) -> Result<f64> {
    let mut rss = 0.0;
    let x_row: Vec<f64> = vec![0.0; data.covariate_count()];
    let mut x = x_row;
    for ti in 0..data.len() {
        for k in 0..data.covariate_count() {
            x[k] = data.x[(ti, k)];
        }
        let r = data.y[ti] - fit.evaluate(data.rescaled_time(ti), &x)?;
        rss += r * r;
    }
    Ok(rss)
}

/// Runs the full three-step estimator for a fixed `(I_T, K)` pair.
pub fn fit_three_step(
    data: &TimeSeriesDataset,
    config: &EstimationConfig,
    i_t: usize,
    k: usize,
) -> Result<VcamFit> {
    let p = data.covariate_count();
    let anchors: Vec<f64> = (0..p).map(|j| data.anchor_for(j, config.anchor)).collect();
    let bases_step1 = covariate_bases(data, config.order_step1, k)?;
    let bases_step3 = if config.order_step3 == config.order_step1 {
        bases_step1.clone()
    } else {
        covariate_bases(data, config.order_step3, k)?
    };
    let time_b = time_basis(config.order_step2, k)?;

    let step1 = step1_gamma(data, i_t, &bases_step1, &anchors)?;
    let (mut alpha, mut scales) = step2_alpha(data, &step1.gamma, &time_b)?;
    let mut beta = step3_beta(data, &alpha, &bases_step3, &anchors)?;
    for _ in 0..config.extra_rounds {
        let (a, s) = step2_alpha(data, &beta, &time_b)?;
        alpha = a;
        scales = s;
        beta = step3_beta(data, &alpha, &bases_step3, &anchors)?;
    }

    let mut fit = VcamFit {
        alpha,
        beta,
        scales,
        diagnostics: FitDiagnostics {
            rss: 0.0,
            segment_length: i_t,
            interior_knots: k,
            rank_warnings: step1.rank_warnings,
        },
    };
    fit.diagnostics.rss = residual_sum_of_squares(data, &fit)?;
    Ok(fit)
}

/// Is a `(I, K)` pair admissible for this sample and configuration?
pub fn admissible(data: &TimeSeriesDataset, config: &EstimationConfig, i_t: usize, k: usize) -> bool {
    let t = data.len();
    let p = data.covariate_count();
    i_t > 0 && t.is_multiple_of(i_t) && 1 + (k + config.order_step1) * p < i_t
}

/// BIC over the `(I, K)` grid: `log(RSS/T) + p * (T/J)^{-1} * log(T/J)` with
/// `J = K + m3`. Ties break toward smaller `K`, then smaller `I`.
pub fn select_by_bic(
    data: &TimeSeriesDataset,
    config: &EstimationConfig,
) -> Result<(usize, usize, VcamFit)> {
    let t = data.len() as f64;
    let p = data.covariate_count() as f64;
    let mut best: Option<(f64, usize, usize, VcamFit)> = None;
    for &k in &config.k_grid {
        for &i_t in &config.i_grid {
            if !admissible(data, config, i_t, k) {
                continue;
            }
            let fit = fit_three_step(data, config, i_t, k)?;
            let j = (k + config.order_step3) as f64;
            let ratio = t / j;
            let bic = (fit.diagnostics.rss / t).ln() + p * ratio.recip() * ratio.ln();
            let better = match &best {
                None => true,
                Some((b, bk, bi, _)) => {
                    bic < b - 1e-12
                        || ((bic - b).abs() <= 1e-12 && (k < *bk || (k == *bk && i_t < *bi)))
                }
            };
            if better {
                best = Some((bic, k, i_t, fit));
            }
        }
    }
    match best {
        Some((_, k, i_t, fit)) => Ok((i_t, k, fit)),
        None => Err(Error::EmptyGrid),
    }
}

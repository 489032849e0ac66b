//! Fitted model representation: datasets, component functions, the
//! identifiability normalization and model evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::splines::{quadratic_form_norm, SplineBasis};

/// Observed triangular-array sample: responses `y[t]`, covariates `x[t, k]`
/// and the implicit rescaled time `t/T`.
#[derive(Clone, Debug)]
pub struct TimeSeriesDataset {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
}

impl TimeSeriesDataset {
    pub fn new(y: Vec<f64>, x_cols: Vec<Vec<f64>>) -> Result<Self> {
        let t = y.len();
        if t == 0 {
            return Err(Error::Dataset("sample length must be at least 1".into()));
        }
        for col in &x_cols {
            if col.len() != t {
                return Err(Error::Dataset(format!(
                    "covariate column length {} does not match T = {t}",
                    col.len()
                )));
            }
        }
        if y.iter().any(|v| !v.is_finite())
            || x_cols.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::Dataset("non-finite value in dataset".into()));
        }
        let p = x_cols.len();
        let mut x = DMatrix::zeros(t, p);
        for (k, col) in x_cols.iter().enumerate() {
            x.set_column(k, &DVector::from_vec(col.clone()));
        }
        Ok(Self {
            y: DVector::from_vec(y),
            x,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.len() == 0
    }

    pub fn covariate_count(&self) -> usize {
        self.x.ncols()
    }

    /// Rescaled time t/T for the 1-based index `t`.
    pub fn rescaled_time(&self, t: usize) -> f64 {
        (t + 1) as f64 / self.len() as f64
    }

    /// Observed `[min, max]` of covariate `k`.
    pub fn covariate_range(&self, k: usize) -> (f64, f64) {
        let col = self.x.column(k);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in col.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Anchoring point for covariate `k`: 0 when the observed range contains
    /// it, otherwise the range midpoint.
    pub fn anchor_for(&self, k: usize, preferred: f64) -> f64 {
        let (lo, hi) = self.covariate_range(k);
        if preferred >= lo && preferred <= hi {
            preferred
        } else {
            0.5 * (lo + hi)
        }
    }
}

/// Which role a fitted univariate function plays in the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FunctionKind {
    /// A time-varying coefficient curve over the scaled time basis.
    VaryingCoefficient,
    /// An additive covariate function over the centered scaled basis,
    /// pinned to zero at its anchor.
    Additive,
}

/// A univariate spline function: coefficients over the sqrt(J)-scaled basis,
/// centered at the anchor for additive components.
#[derive(Clone, Debug)]
pub struct ComponentFunction {
    pub basis: SplineBasis,
    pub coeffs: DVector<f64>,
    pub kind: FunctionKind,
    pub anchor: Option<f64>,
}

impl ComponentFunction {
    pub fn varying(basis: SplineBasis, coeffs: DVector<f64>) -> Self {
        Self {
            basis,
            coeffs,
            kind: FunctionKind::VaryingCoefficient,
            anchor: None,
        }
    }

    pub fn additive(basis: SplineBasis, coeffs: DVector<f64>, anchor: f64) -> Self {
        Self {
            basis,
            coeffs,
            kind: FunctionKind::Additive,
            anchor: Some(anchor),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let v = self.basis.eval_scaled(x, self.anchor)?;
        Ok(self.coeffs.dot(&v))
    }

    /// L2 norm of the `d`-th derivative over the basis domain. For additive
    /// components with `d = 0` the centering offset is taken into account.
    pub fn l2_norm(&self, d: usize) -> Result<f64> {
        if d > 0 || self.anchor.is_none() {
            return crate::splines::spline_l2_norm(&self.coeffs, &self.basis, d, true);
        }
        // centered function f(x) = c'(phi(x) - phi(a)): expand the square
        let a = self.anchor.unwrap();
        let g = self.basis.derivative_gram(0, true)?.values;
        let ints = self.basis.basis_integrals(true)?;
        let (lo, hi) = self.basis.domain();
        let offset = self.coeffs.dot(&self.basis.eval_scaled(a, None)?);
        let q = quadratic_form_norm(&self.coeffs, &g)?.powi(2)
            - 2.0 * offset * self.coeffs.dot(&ints)
            + offset * offset * (hi - lo);
        Ok(q.max(0.0).sqrt())
    }

    /// Integral of the function over its domain.
    pub fn integral(&self) -> Result<f64> {
        let ints = self.basis.basis_integrals(true)?;
        let mut v = self.coeffs.dot(&ints);
        if let Some(a) = self.anchor {
            let (lo, hi) = self.basis.domain();
            v -= self.coeffs.dot(&self.basis.eval_scaled(a, None)?) * (hi - lo);
        }
        Ok(v)
    }

    /// Equally spaced evaluation grid over the basis domain, endpoints
    /// included.
    pub fn grid(&self, n_points: usize) -> Result<Vec<(f64, f64)>> {
        assert!(n_points >= 2, "grid needs at least 2 points");
        let (lo, hi) = self.basis.domain();
        let mut out = Vec::with_capacity(n_points);
        for i in 0..n_points {
            let x = if i == n_points - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n_points - 1) as f64
            };
            out.push((x, self.eval(x)?));
        }
        Ok(out)
    }
}

/// Diagnostics attached to a completed three-step fit.
#[derive(Clone, Debug, Default)]
pub struct FitDiagnostics {
    pub rss: f64,
    pub segment_length: usize,
    pub interior_knots: usize,
    pub rank_warnings: usize,
}

/// A fitted varying-coefficient additive model with the identifiability
/// normalization applied: unit L2 norm and nonnegative mean for each
/// varying-coefficient curve (k >= 1), additive functions pinned to zero at
/// their anchors.
#[derive(Clone, Debug)]
pub struct VcamFit {
    /// Index 0 is the intercept curve, left unnormalized.
    pub alpha: Vec<ComponentFunction>,
    pub beta: Vec<ComponentFunction>,
    /// Signed scale absorbed from each unnormalized varying coefficient.
    pub scales: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

impl VcamFit {
    pub fn covariate_count(&self) -> usize {
        self.beta.len()
    }

    /// Regression surface at rescaled time `u` and covariates `x`.
    pub fn evaluate(&self, u: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.beta.len(),
                got: x.len(),
            });
        }
        let mut v = self.alpha[0].eval(u)?;
        for k in 0..self.beta.len() {
            v += self.alpha[k + 1].eval(u)? * self.beta[k].eval(x[k])?;
        }
        Ok(v)
    }
}

/// Normalizes the unnormalized varying-coefficient estimates: the intercept
/// curve passes through unchanged, every other curve is divided by its L2
/// norm and sign-flipped to a nonnegative mean. Returns the signed scales,
/// to be absorbed by the paired additive functions.
pub fn normalize(delta: Vec<ComponentFunction>) -> Result<(Vec<ComponentFunction>, Vec<f64>)> {
    let mut alpha = Vec::with_capacity(delta.len());
    let mut scales = Vec::with_capacity(delta.len().saturating_sub(1));
    for (k, mut f) in delta.into_iter().enumerate() {
        if k == 0 {
            alpha.push(f);
            continue;
        }
        let norm = f.l2_norm(0)?;
        if norm <= 1e-10 {
            return Err(Error::DegenerateComponent(k));
        }
        f.coeffs /= norm;
        let mut scale = norm;
        if f.integral()? < 0.0 {
            f.coeffs = -f.coeffs;
            scale = -norm;
        }
        alpha.push(f);
        scales.push(scale);
    }
    Ok((alpha, scales))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::splines::{build_basis, SplineSpec};
    use approx::assert_abs_diff_eq;

    fn time_basis(k: usize) -> SplineBasis {
        build_basis(&SplineSpec::uniform(3, k, (0.0, 1.0))).unwrap()
    }

    fn random_fit(seed: u64, p: usize) -> VcamFit {
        let mut rng = RngStream::new(seed, 0);
        let tb = time_basis(4);
        let cb = build_basis(&SplineSpec::uniform(3, 3, (-1.0, 1.0))).unwrap();
        let mut delta = vec![ComponentFunction::varying(
            tb.clone(),
            DVector::from_vec(rng.standard_normal(tb.dim())),
        )];
        for _ in 0..p {
            delta.push(ComponentFunction::varying(
                tb.clone(),
                DVector::from_vec(rng.standard_normal(tb.dim())),
            ));
        }
        let (alpha, scales) = normalize(delta).unwrap();
        let beta = (0..p)
            .map(|_| {
                ComponentFunction::additive(
                    cb.clone(),
                    DVector::from_vec(rng.standard_normal(cb.dim())),
                    0.0,
                )
            })
            .collect();
        VcamFit {
            alpha,
            beta,
            scales,
            diagnostics: FitDiagnostics::default(),
        }
    }

    #[test]
    fn evaluate_with_zero_betas_is_intercept() {
        let mut fit = random_fit(1, 2);
        for b in &mut fit.beta {
            b.coeffs.fill(0.0);
        }
        let a0 = fit.alpha[0].eval(0.3).unwrap();
        assert_abs_diff_eq!(fit.evaluate(0.3, &[0.5, -0.5]).unwrap(), a0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_at_anchor_is_intercept() {
        let fit = random_fit(2, 2);
        let u = 0.7;
        let a0 = fit.alpha[0].eval(u).unwrap();
        assert_abs_diff_eq!(fit.evaluate(u, &[0.0, 0.0]).unwrap(), a0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_matches_direct_expansion() {
        let fit = random_fit(3, 2);
        let mut rng = RngStream::new(99, 0);
        for _ in 0..20 {
            let u = rng.uniform();
            let x = [2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0];
            // independent re-expansion straight from the bases
            let mut direct = fit.alpha[0]
                .coeffs
                .dot(&fit.alpha[0].basis.eval_scaled(u, None).unwrap());
            for k in 0..2 {
                let a = fit.alpha[k + 1]
                    .coeffs
                    .dot(&fit.alpha[k + 1].basis.eval_scaled(u, None).unwrap());
                let bb = &fit.beta[k];
                let b = bb.coeffs.dot(&bb.basis.eval_scaled(x[k], Some(0.0)).unwrap());
                direct += a * b;
            }
            assert_abs_diff_eq!(fit.evaluate(u, &x).unwrap(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn joint_sign_scale_invariance() {
        let fit = random_fit(4, 2);
        let mut rng = RngStream::new(5, 0);
        for &c in &[2.5, -0.3, -4.0] {
            let mut scaled = fit.clone();
            scaled.alpha[1].coeffs *= c;
            scaled.beta[0].coeffs /= c;
            for _ in 0..10 {
                let u = rng.uniform();
                let x = [2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0];
                let d = (fit.evaluate(u, &x).unwrap() - scaled.evaluate(u, &x).unwrap()).abs();
                assert!(d < 1e-10, "diff {d}");
            }
        }
    }

    #[test]
    fn normalize_unit_norm_and_sign() {
        let mut rng = RngStream::new(6, 0);
        let tb = time_basis(4);
        for _ in 0..20 {
            let delta = vec![
                ComponentFunction::varying(tb.clone(), DVector::from_vec(rng.standard_normal(tb.dim()))),
                ComponentFunction::varying(tb.clone(), DVector::from_vec(rng.standard_normal(tb.dim()))),
            ];
            let (alpha, _) = normalize(delta).unwrap();
            assert_abs_diff_eq!(alpha[1].l2_norm(0).unwrap(), 1.0, epsilon = 1e-8);
            assert!(alpha[1].integral().unwrap() >= 0.0);
        }
    }

    #[test]
    fn normalize_unit_input_passes_through() {
        let tb = time_basis(2);
        // constant curve 1: scaled coefficients 1/sqrt(J)
        let c = DVector::from_element(tb.dim(), 1.0 / (tb.dim() as f64).sqrt());
        let delta = vec![
            ComponentFunction::varying(tb.clone(), c.clone()),
            ComponentFunction::varying(tb.clone(), c.clone()),
        ];
        let (alpha, scales) = normalize(delta).unwrap();
        assert!((&alpha[1].coeffs - &c).abs().max() < 1e-12);
        assert_abs_diff_eq!(scales[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn normalize_records_negative_scale() {
        let tb = time_basis(2);
        let c = DVector::from_element(tb.dim(), 1.0 / (tb.dim() as f64).sqrt());
        let delta = vec![
            ComponentFunction::varying(tb.clone(), c.clone()),
            ComponentFunction::varying(tb.clone(), &c * -2.0),
        ];
        let (alpha, scales) = normalize(delta).unwrap();
        assert!((&alpha[1].coeffs - &c).abs().max() < 1e-10);
        assert_abs_diff_eq!(scales[0], -2.0, epsilon = 1e-10);
    }

    #[test]
    fn normalize_degenerate_errors() {
        let tb = time_basis(2);
        let delta = vec![
            ComponentFunction::varying(tb.clone(), DVector::from_element(tb.dim(), 1.0)),
            ComponentFunction::varying(tb.clone(), DVector::zeros(tb.dim())),
        ];
        match normalize(delta) {
            Err(Error::DegenerateComponent(1)) => {}
            other => panic!("expected degenerate component error, got {other:?}"),
        }
    }

    #[test]
    fn normalize_idempotent() {
        let mut rng = RngStream::new(7, 0);
        let tb = time_basis(4);
        let delta = vec![
            ComponentFunction::varying(tb.clone(), DVector::from_vec(rng.standard_normal(tb.dim()))),
            ComponentFunction::varying(tb.clone(), DVector::from_vec(rng.standard_normal(tb.dim()))),
        ];
        let (alpha1, _) = normalize(delta).unwrap();
        let (alpha2, _) = normalize(alpha1.clone()).unwrap();
        assert!((&alpha1[1].coeffs - &alpha2[1].coeffs).abs().max() < 1e-12);
    }

    #[test]
    fn grid_constant_curve() {
        let tb = time_basis(2);
        let c = DVector::from_element(tb.dim(), 1.0 / (tb.dim() as f64).sqrt());
        let f = ComponentFunction::varying(tb, c);
        let g = f.grid(3).unwrap();
        let want = [(0.0, 1.0), (0.5, 1.0), (1.0, 1.0)];
        for ((x, v), (wx, wv)) in g.iter().zip(want) {
            assert_abs_diff_eq!(*x, wx, epsilon = 1e-15);
            assert_abs_diff_eq!(*v, wv, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_additive_zero_at_anchor() {
        let cb = build_basis(&SplineSpec::uniform(3, 3, (-1.0, 1.0))).unwrap();
        let mut rng = RngStream::new(8, 0);
        let f = ComponentFunction::additive(
            cb.clone(),
            DVector::from_vec(rng.standard_normal(cb.dim())),
            0.0,
        );
        let g = f.grid(5).unwrap();
        // x = 0 is the middle grid point on [-1, 1]
        assert_abs_diff_eq!(g[2].0, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[2].1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dataset_anchor_fallback() {
        let ds = TimeSeriesDataset::new(
            vec![0.0, 1.0, 2.0],
            vec![vec![1.0, 2.0, 3.0]],
        )
        .unwrap();
        assert_abs_diff_eq!(ds.anchor_for(0, 0.0), 2.0, epsilon = 1e-15);
        let ds2 = TimeSeriesDataset::new(
            vec![0.0, 1.0, 2.0],
            vec![vec![-1.0, 0.5, 3.0]],
        )
        .unwrap();
        assert_abs_diff_eq!(ds2.anchor_for(0, 0.0), 0.0, epsilon = 1e-15);
    }
}

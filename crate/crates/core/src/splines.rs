//! Clamped B-spline bases: knot construction, Cox-de Boor evaluation,
//! sqrt(J)-scaled and centered variants, derivative Gram matrices and exact
//! piecewise-polynomial integration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::gauss_legendre;

/// How interior knots are placed on the domain.
#[derive(Clone, Debug)]
pub enum KnotPlacement {
    Uniform,
    /// Interior knots at equally spaced empirical quantiles of the sample,
    /// with a uniform fallback when too few distinct knots survive or the
    /// mesh ratio bound is violated.
    Quantile(Vec<f64>),
}

/// Specification of a clamped B-spline basis: order `m` (degree `m - 1`),
/// `K` interior knots on `[a, b]`. The basis dimension is `J = K + m`.
#[derive(Clone, Debug)]
pub struct SplineSpec {
    pub order: usize,
    pub interior_count: usize,
    pub domain: (f64, f64),
    pub placement: KnotPlacement,
}

impl SplineSpec {
    pub fn uniform(order: usize, interior_count: usize, domain: (f64, f64)) -> Self {
        Self {
            order,
            interior_count,
            domain,
            placement: KnotPlacement::Uniform,
        }
    }
}

/// A constructed clamped B-spline basis.
///
/// The knot vector holds `m` copies of each boundary and `K` strictly
/// interior knots, nondecreasing overall, with mesh ratio at most 10.
#[derive(Clone, Debug)]
pub struct SplineBasis {
    order: usize,
    interior_count: usize,
    domain: (f64, f64),
    knots: Vec<f64>,
}

/// Gram matrix of `d`-th derivatives of the basis functions.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub order_of_derivative: usize,
    pub values: DMatrix<f64>,
}

const MAX_MESH_RATIO: f64 = 10.0;

fn mesh_ratio(interior: &[f64], a: f64, b: f64) -> f64 {
    let mut pts = Vec::with_capacity(interior.len() + 2);
    pts.push(a);
    pts.extend_from_slice(interior);
    pts.push(b);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for w in pts.windows(2) {
        let d = w[1] - w[0];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn uniform_interior(k: usize, a: f64, b: f64) -> Vec<f64> {
    (1..=k)
        .map(|i| a + (b - a) * i as f64 / (k + 1) as f64)
        .collect()
}

fn quantile_interior(k: usize, a: f64, b: f64, sample: &[f64]) -> Option<Vec<f64>> {
    let mut sorted: Vec<f64> = sample.iter().cloned().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = sorted.len();
    if n < 2 {
        return None;
    }
    let mut interior = Vec::with_capacity(k);
    for i in 1..=k {
        let q = i as f64 / (k + 1) as f64;
        let pos = q * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        let v = if lo + 1 < n {
            sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
        } else {
            sorted[lo]
        };
        interior.push(v.clamp(a, b));
    }
    // enforce strict increase, drop duplicates and boundary hits
    let eps = 1e-12 * (b - a).max(1.0);
    let mut distinct: Vec<f64> = Vec::with_capacity(k);
    for v in interior {
        if v > a + eps && v < b - eps && distinct.last().is_none_or(|&p| v > p + eps) {
            distinct.push(v);
        }
    }
    if distinct.len() < k {
        return None;
    }
    Some(distinct)
}

/// Builds the clamped knot vector for a spec. Quantile placement falls back
/// to uniform knots when duplicates collapse the interior set or the mesh
/// ratio exceeds the bound; a half-way blend toward uniform is tried first.
pub fn build_basis(spec: &SplineSpec) -> Result<SplineBasis> {
    let (a, b) = spec.domain;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidDomain(a, b));
    }
    if spec.order < 1 {
        return Err(Error::InvalidOrder(spec.order));
    }
    let k = spec.interior_count;
    let uniform = uniform_interior(k, a, b);
    let interior = match &spec.placement {
        KnotPlacement::Uniform => uniform,
        KnotPlacement::Quantile(sample) => {
            let distinct: std::collections::BTreeSet<u64> =
                sample.iter().map(|v| v.to_bits()).collect();
            if distinct.len() < k + 2 {
                return Err(Error::InsufficientSample {
                    needed: k + 2,
                    got: distinct.len(),
                });
            }
            match quantile_interior(k, a, b, sample) {
                Some(q) if mesh_ratio(&q, a, b) <= MAX_MESH_RATIO => q,
                Some(q) => {
                    let blend: Vec<f64> = q
                        .iter()
                        .zip(&uniform)
                        .map(|(&qi, &ui)| 0.5 * (qi + ui))
                        .collect();
                    if mesh_ratio(&blend, a, b) <= MAX_MESH_RATIO {
                        blend
                    } else {
                        uniform
                    }
                }
                None => uniform,
            }
        }
    };
    let m = spec.order;
    let mut knots = Vec::with_capacity(k + 2 * m);
    knots.extend(std::iter::repeat_n(a, m));
    knots.extend(interior);
    knots.extend(std::iter::repeat_n(b, m));
    Ok(SplineBasis {
        order: m,
        interior_count: k,
        domain: (a, b),
        knots,
    })
}

impl SplineBasis {
    /// Basis dimension `J = K + m`.
    pub fn dim(&self) -> usize {
        self.interior_count + self.order
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interior_count(&self) -> usize {
        self.interior_count
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Reassembles a basis from a previously stored knot vector.
    pub fn from_parts(order: usize, interior_count: usize, knots: Vec<f64>) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidOrder(order));
        }
        if knots.len() != interior_count + 2 * order {
            return Err(Error::DimensionMismatch {
                expected: interior_count + 2 * order,
                got: knots.len(),
            });
        }
        let a = knots[0];
        let b = *knots.last().unwrap();
        if !(a < b) {
            return Err(Error::InvalidDomain(a, b));
        }
        Ok(Self {
            order,
            interior_count,
            domain: (a, b),
            knots,
        })
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let (a, b) = self.domain;
        if x < a || x > b || !x.is_finite() {
            return Err(Error::OutOfDomain { x, lo: a, hi: b });
        }
        Ok(())
    }

    /// All order-`o` B-spline values on this knot vector (o <= m), length
    /// `len(knots) - o`, built bottom-up from the order-1 indicators. The
    /// right endpoint uses the left-continuous extension so the last basis
    /// function equals 1 at `b`.
    fn raw_all_order(&self, x: f64, o: usize) -> Vec<f64> {
        let t = &self.knots;
        let n1 = t.len() - 1;
        let mut v = vec![0.0; n1];
        // order-1 indicators; at x == b activate the last nonempty span
        if x >= self.domain.1 {
            for i in (0..n1).rev() {
                if t[i] < t[i + 1] {
                    v[i] = 1.0;
                    break;
                }
            }
        } else {
            for i in 0..n1 {
                if t[i] <= x && x < t[i + 1] {
                    v[i] = 1.0;
                    break;
                }
            }
        }
        for ord in 2..=o {
            let count = t.len() - ord;
            for i in 0..count {
                let d1 = t[i + ord - 1] - t[i];
                let d2 = t[i + ord] - t[i + 1];
                let left = if d1 > 0.0 { (x - t[i]) / d1 * v[i] } else { 0.0 };
                let right = if d2 > 0.0 {
                    (t[i + ord] - x) / d2 * v[i + 1]
                } else {
                    0.0
                };
                v[i] = left + right;
            }
            v.truncate(count);
        }
        v.truncate(t.len() - o);
        v
    }

    /// Raw B-spline values at `x`: `J` nonnegative entries summing to 1,
    /// at most `m` of them nonzero.
    pub fn eval_raw(&self, x: f64) -> Result<DVector<f64>> {
        self.check_domain(x)?;
        Ok(DVector::from_vec(self.raw_all_order(x, self.order)))
    }

    /// `d`-th derivative of every raw basis function at `x`. Returns the zero
    /// vector when `d >= m`.
    pub fn eval_raw_deriv(&self, x: f64, d: usize) -> Result<DVector<f64>> {
        self.check_domain(x)?;
        let m = self.order;
        if d >= m {
            return Ok(DVector::zeros(self.dim()));
        }
        let t = &self.knots;
        let mut v = self.raw_all_order(x, m - d);
        // lift the derivative order one level at a time:
        // D B_{i,o+1} = o * (B_{i,o}/(t_{i+o}-t_i) - B_{i+1,o}/(t_{i+o+1}-t_{i+1}))
        for o in (m - d)..m {
            let count = t.len() - o - 1;
            let mut next = vec![0.0; count];
            for (i, slot) in next.iter_mut().enumerate() {
                let d1 = t[i + o] - t[i];
                let d2 = t[i + o + 1] - t[i + 1];
                let a = if d1 > 0.0 { v[i] / d1 } else { 0.0 };
                let b = if d2 > 0.0 { v[i + 1] / d2 } else { 0.0 };
                *slot = o as f64 * (a - b);
            }
            v = next;
        }
        debug_assert_eq!(v.len(), self.dim());
        Ok(DVector::from_vec(v))
    }

    /// sqrt(J)-scaled basis values; with `centered_at = Some(c)` returns the
    /// centered variant `phi(x) - phi(c)`.
    pub fn eval_scaled(&self, x: f64, centered_at: Option<f64>) -> Result<DVector<f64>> {
        let s = (self.dim() as f64).sqrt();
        let mut v = self.eval_raw(x)? * s;
        if let Some(c) = centered_at {
            v -= self.eval_raw(c)? * s;
        }
        Ok(v)
    }

    /// Nonempty knot spans as `(lo, hi)` pairs covering the domain.
    fn spans(&self) -> Vec<(f64, f64)> {
        self.knots
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Gram matrix of `d`-th derivatives, integrated exactly by per-span
    /// Gauss-Legendre with `m` nodes. `scaled` switches to the sqrt(J)-scaled
    /// basis. Returns the zero matrix when `d >= m`.
    pub fn derivative_gram(&self, d: usize, scaled: bool) -> Result<GramMatrix> {
        let j = self.dim();
        let mut g = DMatrix::zeros(j, j);
        if d < self.order {
            let factor = if scaled { j as f64 } else { 1.0 };
            for (lo, hi) in self.spans() {
                let (nodes, weights) = gauss_legendre(self.order.min(64), lo, hi)?;
                for (&x, &w) in nodes.iter().zip(&weights) {
                    let v = self.eval_raw_deriv(x, d)?;
                    g.ger(w * factor, &v, &v, 1.0);
                }
            }
            // symmetrize the rank-1 accumulation
            let gt = g.transpose();
            g = (g + gt) * 0.5;
        }
        Ok(GramMatrix {
            order_of_derivative: d,
            values: g,
        })
    }

    /// Integrals of each basis function over the domain (scaled variant when
    /// requested), exact via per-span quadrature.
    pub fn basis_integrals(&self, scaled: bool) -> Result<DVector<f64>> {
        let j = self.dim();
        let factor = if scaled { (j as f64).sqrt() } else { 1.0 };
        let mut out = DVector::zeros(j);
        for (lo, hi) in self.spans() {
            let (nodes, weights) = gauss_legendre(self.order.min(64), lo, hi)?;
            for (&x, &w) in nodes.iter().zip(&weights) {
                out += self.eval_raw(x)? * (w * factor);
            }
        }
        Ok(out)
    }

    /// Greville abscissae: coefficients `f(xi_j)` reproduce any linear `f`
    /// exactly in the raw basis.
    pub fn greville_abscissae(&self) -> Vec<f64> {
        let m = self.order;
        (0..self.dim())
            .map(|i| {
                if m == 1 {
                    0.5 * (self.knots[i] + self.knots[i + 1])
                } else {
                    self.knots[i + 1..i + m].iter().sum::<f64>() / (m - 1) as f64
                }
            })
            .collect()
    }
}

/// L2 norm of the spline's `d`-th derivative, integrated span by span with
/// order-many Gauss-Legendre nodes (exact for the piecewise-polynomial
/// integrand). Summands are squares, so a zero function comes out zero to
/// machine precision instead of inheriting Gram-assembly cancellation.
pub fn spline_l2_norm(
    coeffs: &DVector<f64>,
    basis: &SplineBasis,
    d: usize,
    scaled: bool,
) -> Result<f64> {
    if coeffs.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: coeffs.len(),
        });
    }
    let m = basis.order();
    let knots = basis.knots();
    let (ref_nodes, ref_weights) = crate::numerics::gauss_legendre(m, 0.0, 1.0)?;
    let factor = if scaled { basis.dim() as f64 } else { 1.0 };
    let mut acc = 0.0;
    for j in (m - 1)..(knots.len() - m) {
        let (lo, hi) = (knots[j], knots[j + 1]);
        let width = hi - lo;
        if width <= 0.0 {
            continue;
        }
        for (&n, &w) in ref_nodes.iter().zip(&ref_weights) {
            let v = basis.eval_raw_deriv(lo + width * n, d)?.dot(coeffs);
            acc += w * width * v * v;
        }
    }
    Ok((factor * acc).sqrt())
}

/// `sqrt(c' G c)` for a precomputed Gram matrix, clamping tiny negatives.
pub fn quadratic_form_norm(coeffs: &DVector<f64>, gram: &DMatrix<f64>) -> Result<f64> {
    if coeffs.len() != gram.nrows() {
        return Err(Error::DimensionMismatch {
            expected: gram.nrows(),
            got: coeffs.len(),
        });
    }
    let q = (coeffs.transpose() * gram * coeffs)[(0, 0)];
    // roundoff scale of the bilinear form; genuine negativity beyond it
    // means the matrix was not PSD
    let scale = coeffs.norm_squared() * gram.norm();
    if q < -1e-10 * (scale + 1.0) {
        return Err(Error::NonFinite("negative quadratic form"));
    }
    Ok(q.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn basis(m: usize, k: usize) -> SplineBasis {
        build_basis(&SplineSpec::uniform(m, k, (0.0, 1.0))).unwrap()
    }

    #[test]
    fn degenerate_constant_basis() {
        let b = basis(1, 0);
        assert_eq!(b.dim(), 1);
        assert_eq!(b.knots(), &[0.0, 1.0]);
        assert_abs_diff_eq!(b.eval_raw(0.5).unwrap()[0], 1.0);
    }

    #[test]
    fn uniform_interior_knots() {
        let b = basis(3, 4);
        assert_eq!(b.dim(), 7);
        let interior = &b.knots()[3..7];
        for (got, want) in interior.iter().zip([0.2, 0.4, 0.6, 0.8]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn clamped_knot_vector() {
        let b = basis(4, 3);
        assert_eq!(b.dim(), 7);
        let want = [0.0, 0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(b.knots().len(), want.len());
        for (got, want) in b.knots().iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(build_basis(&SplineSpec::uniform(3, 2, (1.0, 1.0))).is_err());
        assert!(build_basis(&SplineSpec::uniform(0, 2, (0.0, 1.0))).is_err());
    }

    #[test]
    fn quantile_placement_needs_distinct_values() {
        let spec = SplineSpec {
            order: 3,
            interior_count: 2,
            domain: (0.0, 1.0),
            placement: KnotPlacement::Quantile(vec![0.5, 0.5, 0.5]),
        };
        assert!(build_basis(&spec).is_err());
    }

    #[test]
    fn quantile_placement_respects_mesh_ratio() {
        let mut sample: Vec<f64> = (0..200).map(|i| 0.45 + 0.1 * i as f64 / 199.0).collect();
        sample.push(0.0);
        sample.push(1.0);
        let spec = SplineSpec {
            order: 3,
            interior_count: 4,
            domain: (0.0, 1.0),
            placement: KnotPlacement::Quantile(sample),
        };
        let b = build_basis(&spec).unwrap();
        let interior = &b.knots()[3..7];
        assert!(mesh_ratio(interior, 0.0, 1.0) <= MAX_MESH_RATIO + 1e-9);
    }

    #[test]
    fn indicator_basis() {
        let spec = SplineSpec {
            order: 1,
            interior_count: 1,
            domain: (0.0, 1.0),
            placement: KnotPlacement::Uniform,
        };
        let b = build_basis(&spec).unwrap();
        let v = b.eval_raw(0.25).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 0.0]);
        let v = b.eval_raw(0.75).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn linear_hats() {
        let b = basis(2, 0);
        let v = b.eval_raw(0.3).unwrap();
        assert_abs_diff_eq!(v[0], 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 0.3, epsilon = 1e-14);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let b = basis(3, 2);
        assert!(b.eval_raw(-0.01).is_err());
        assert!(b.eval_raw(1.01).is_err());
    }

    #[test]
    fn right_endpoint_left_continuous() {
        let b = basis(3, 4);
        let v = b.eval_raw(1.0).unwrap();
        assert_abs_diff_eq!(v[b.dim() - 1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.sum(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn scaled_hats() {
        let b = basis(2, 0);
        let v = b.eval_scaled(0.3, None).unwrap();
        let s = 2.0_f64.sqrt();
        assert_abs_diff_eq!(v[0], s * 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], s * 0.3, epsilon = 1e-14);
    }

    #[test]
    fn centered_at_itself_is_zero() {
        let b = basis(3, 3);
        let v = b.eval_scaled(0.4, Some(0.4)).unwrap();
        assert!(v.abs().max() < 1e-15);
    }

    #[test]
    fn centered_indicator_difference() {
        let spec = SplineSpec {
            order: 1,
            interior_count: 1,
            domain: (0.0, 1.0),
            placement: KnotPlacement::Uniform,
        };
        let b = build_basis(&spec).unwrap();
        let v = b.eval_scaled(0.75, Some(0.25)).unwrap();
        let s = 2.0_f64.sqrt();
        assert_abs_diff_eq!(v[0], -s, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], s, epsilon = 1e-14);
    }

    #[test]
    fn hat_gram_matches_analytic() {
        let b = basis(2, 0);
        let g = b.derivative_gram(0, false).unwrap().values;
        assert_abs_diff_eq!(g[(0, 0)], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[(0, 1)], 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[(1, 1)], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_matches_trapezoid_oracle() {
        // 10^4-point composite trapezoid as the independent route
        let b = basis(3, 4);
        let g = b.derivative_gram(0, false).unwrap().values;
        let n = 10_000;
        let j = b.dim();
        let mut o = DMatrix::zeros(j, j);
        for i in 0..=n {
            let x = i as f64 / n as f64;
            let v = b.eval_raw(x).unwrap();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 } / n as f64;
            o.ger(w, &v, &v, 1.0);
        }
        let ot = o.transpose();
        let o = (o + ot) * 0.5;
        for r in 0..j {
            for c in 0..j {
                let denom = g[(r, c)].abs().max(1e-3);
                assert!((g[(r, c)] - o[(r, c)]).abs() / denom < 1e-6);
            }
        }
    }

    #[test]
    fn derivative_gram_of_constants_is_zero() {
        let b = basis(1, 3);
        let g = b.derivative_gram(1, false).unwrap().values;
        assert_eq!(g.abs().max(), 0.0);
    }

    #[test]
    fn gram_symmetric_psd() {
        for (m, k, d) in [(2, 3, 0), (3, 4, 1), (4, 5, 2), (3, 0, 1)] {
            let b = basis(m, k);
            let g = b.derivative_gram(d, true).unwrap().values;
            assert!((g.clone() - g.transpose()).abs().max() < 1e-12);
            let eig = g.symmetric_eigenvalues();
            assert!(eig.min() >= -1e-10, "min eig {}", eig.min());
        }
    }

    #[test]
    fn polynomial_reproduction() {
        // any polynomial of degree < m projects exactly onto the basis
        let b = basis(4, 3);
        let f = |x: f64| 1.0 - 2.0 * x + 3.0 * x * x - 0.5 * x * x * x;
        let n = 201;
        let mut design = DMatrix::zeros(n, b.dim());
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let x = i as f64 / (n - 1) as f64;
            design.set_row(i, &b.eval_raw(x).unwrap().transpose());
            y[i] = f(x);
        }
        let c = crate::numerics::least_squares(&design, &y).unwrap();
        for i in 0..n {
            let x = i as f64 / (n - 1) as f64;
            let v = b.eval_raw(x).unwrap().dot(&c);
            assert!((v - f(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_function_norms() {
        let b = basis(3, 4);
        // constant 1 in the raw basis has all coefficients 1
        let c = DVector::from_element(b.dim(), 1.0);
        assert_abs_diff_eq!(spline_l2_norm(&c, &b, 0, false).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spline_l2_norm(&c, &b, 1, false).unwrap(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(
            spline_l2_norm(&DVector::zeros(b.dim()), &b, 0, false).unwrap(),
            0.0
        );
    }

    #[test]
    fn norm_dimension_mismatch() {
        let b = basis(3, 4);
        assert!(spline_l2_norm(&DVector::zeros(3), &b, 0, false).is_err());
    }

    #[test]
    fn greville_reproduces_linear() {
        let b = basis(3, 5);
        let xi = b.greville_abscissae();
        let c = DVector::from_vec(xi.iter().map(|&g| 2.0 * g - 0.7).collect::<Vec<_>>());
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            let v = b.eval_raw(x).unwrap().dot(&c);
            assert_abs_diff_eq!(v, 2.0 * x - 0.7, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in 0.0f64..=1.0, k in 0usize..6, m in 1usize..5) {
            let b = basis(m, k);
            let v = b.eval_raw(x).unwrap();
            prop_assert!((v.sum() - 1.0).abs() < 1e-12);
            prop_assert!(v.iter().all(|&e| e >= 0.0));
            prop_assert!(v.iter().filter(|&&e| e != 0.0).count() <= m);
        }

        #[test]
        fn norm_absolutely_homogeneous(t in -100.0f64..100.0, seed in 0u64..1000) {
            let b = basis(3, 4);
            let mut rng = crate::numerics::RngStream::new(seed, 0);
            let c = DVector::from_vec(rng.standard_normal(b.dim()));
            let n1 = spline_l2_norm(&c, &b, 0, true).unwrap();
            let n2 = spline_l2_norm(&(&c * t), &b, 0, true).unwrap();
            prop_assert!((n2 - t.abs() * n1).abs() < 1e-9 * (1.0 + n1.abs() * t.abs()));
        }
    }
}

//! Chebyshev collocation on [-1, 1]: grids, differentiation matrices,
//! Clenshaw–Curtis quadrature and the boundary/critical-layer weights.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest collocation order the solvers accept.
pub const MAX_ORDER: usize = 1024;
/// Smallest order produced by the resolution rule.
pub const MIN_AUTO_ORDER: usize = 64;
/// Points per boundary/critical layer in the resolution rule.
pub const POINTS_PER_LAYER: f64 = 8.0;

/// Gauss–Lobatto nodes `cos(j pi / n)`, `j = 0..=n`, descending.
///
/// Written as `sin(pi (n - 2j) / 2n)` so that the set is exactly symmetric
/// and the endpoints are exactly `±1`.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![1.0];
    }
    let n_f = n as f64;
    (0..=n)
        .map(|j| (PI * (n_f - 2.0 * j as f64) / (2.0 * n_f)).sin())
        .collect()
}

/// Clenshaw–Curtis weights on the Lobatto nodes (direct cosine sum).
pub fn clenshaw_curtis_weights(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    if n == 0 {
        w[0] = 2.0;
        return w;
    }
    let n_f = n as f64;
    let mut v = vec![1.0; n.saturating_sub(1)];
    if n.is_multiple_of(2) {
        w[0] = 1.0 / (n_f * n_f - 1.0);
        w[n] = w[0];
        for kk in 1..n / 2 {
            let kf = kk as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                let theta = PI * (i + 1) as f64 / n_f;
                *vi -= 2.0 * (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            let theta = PI * (i + 1) as f64 / n_f;
            *vi -= (n_f * theta).cos() / (n_f * n_f - 1.0);
        }
    } else {
        w[0] = 1.0 / (n_f * n_f);
        w[n] = w[0];
        for kk in 1..=(n - 1) / 2 {
            let kf = kk as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                let theta = PI * (i + 1) as f64 / n_f;
                *vi -= 2.0 * (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (i, vi) in v.into_iter().enumerate() {
        w[i + 1] = 2.0 * vi / n_f;
    }
    w
}

/// Chebyshev–Lobatto grid with its quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    order: usize,
    nodes: Vec<f64>,
    quad_weights: Vec<f64>,
}

impl ChebGrid {
    pub fn new(order: usize) -> Result<Self> {
        if order < 4 {
            return Err(Error::GridTooSmall(order));
        }
        Ok(Self {
            order,
            nodes: chebyshev_nodes(order),
            quad_weights: clenshaw_curtis_weights(order),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got });
        }
        Ok(())
    }

    /// Clenshaw–Curtis approximation of the integral over [-1, 1].
    pub fn quadrature(&self, values: &[Complex64]) -> Result<Complex64> {
        self.check_len(values.len())?;
        Ok(values
            .iter()
            .zip(&self.quad_weights)
            .map(|(v, w)| v * w)
            .sum())
    }

    pub fn quadrature_real(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len())?;
        Ok(values.iter().zip(&self.quad_weights).map(|(v, w)| v * w).sum())
    }

    /// `<f, g> = ∫ f conj(g)`.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Result<Complex64> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        Ok(f.iter()
            .zip(g)
            .zip(&self.quad_weights)
            .map(|((a, b), w)| a * b.conj() * w)
            .sum())
    }

    pub fn l2_norm(&self, f: &[Complex64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        f.iter()
            .zip(&self.quad_weights)
            .map(|(a, w)| a.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    /// Barycentric interpolation of nodal values at arbitrary points.
    pub fn interpolate(&self, values: &[Complex64], xs: &[f64]) -> Result<Vec<Complex64>> {
        self.check_len(values.len())?;
        let n = self.order;
        let bary = |j: usize| {
            let s = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                0.5 * s
            } else {
                s
            }
        };
        Ok(xs
            .iter()
            .map(|&x| {
                let mut num = Complex64::new(0.0, 0.0);
                let mut den = 0.0;
                for (j, (&yj, v)) in self.nodes.iter().zip(values).enumerate() {
                    let d = x - yj;
                    if d == 0.0 {
                        return *v;
                    }
                    let c = bary(j) / d;
                    num += v * c;
                    den += c;
                }
                num / den
            })
            .collect())
    }
}

/// Collocation differentiation matrices on a [`ChebGrid`].
#[derive(Debug, Clone)]
pub struct DiffOps {
    pub d1: Mat<f64>,
    pub d2: Mat<f64>,
    pub d4: Mat<f64>,
}

fn fix_diagonal(m: &mut Mat<f64>) {
    let n = m.nrows();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s += m[(i, j)];
            }
        }
        m[(i, i)] = -s;
    }
}

impl DiffOps {
    pub fn new(grid: &ChebGrid) -> Self {
        let n = grid.order();
        let n_f = n as f64;
        let c = |i: usize| if i == 0 || i == n { 2.0 } else { 1.0 };
        let mut d1 = Mat::<f64>::zeros(n + 1, n + 1);
        for i in 0..=n {
            for j in 0..=n {
                if i == j {
                    continue;
                }
                // y_i - y_j through the product formula avoids cancellation
                let diff = 2.0
                    * (PI * (i + j) as f64 / (2.0 * n_f)).sin()
                    * (PI * (j as f64 - i as f64) / (2.0 * n_f)).sin();
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d1[(i, j)] = c(i) / c(j) * sign / diff;
            }
        }
        fix_diagonal(&mut d1);
        let mut d2 = &d1 * &d1;
        fix_diagonal(&mut d2);
        let mut d4 = &d2 * &d2;
        fix_diagonal(&mut d4);
        Self { d1, d2, d4 }
    }

    pub fn order(&self) -> usize {
        self.d1.nrows() - 1
    }
}

/// Product of a real matrix with a complex vector.
pub fn apply_real(m: &Mat<f64>, x: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(m.ncols(), x.len());
    (0..m.nrows())
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, xj) in x.iter().enumerate() {
                acc += xj * m[(i, j)];
            }
            acc
        })
        .collect()
}

/// Product of the transpose of a real matrix with a complex vector.
pub fn apply_real_transpose(m: &Mat<f64>, x: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(m.nrows(), x.len());
    let mut out = vec![Complex64::new(0.0, 0.0); m.ncols()];
    for (i, xi) in x.iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o += xi * m[(i, j)];
        }
    }
    out
}

/// Boundary-layer scale `L = (|k| / nu)^{1/3}`.
pub fn boundary_scale(nu: f64, k: f64) -> f64 {
    (k.abs() / nu).cbrt()
}

/// Collocation order resolving both the boundary layer `1/L` and the
/// critical layer `nu^{1/3} |k|^{-1/3}` with eight points each.
pub fn grid_order_for(nu: f64, k: f64) -> Result<usize> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter("nu must be positive".into()));
    }
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidParameter("|k| must be at least 1".into()));
    }
    let l = boundary_scale(nu, k);
    let required = MIN_AUTO_ORDER.max((POINTS_PER_LAYER * l).ceil() as usize);
    if required > MAX_ORDER {
        return Err(Error::GridTooLarge { required, cap: MAX_ORDER });
    }
    Ok(required)
}

/// Weight and cutoff families used by the weighted estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// `min(1, L (1 - |y|))`.
    RhoK { l: f64 },
    /// C² regularization of `RhoK` with cubic boundary pieces.
    TildeRhoK { l: f64 },
    /// `-1` / sine ramp / `+1` across the critical layer.
    CutoffRho { lambda: f64, delta: f64 },
    /// `1/(y - lambda)` away from the layer, odd cubic inside.
    CutoffChi { lambda: f64, delta: f64 },
}

impl WeightKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightKind::RhoK { l } | WeightKind::TildeRhoK { l } => {
                if !(l > 0.0) || !l.is_finite() {
                    return Err(Error::InvalidParameter(format!("L must be positive, got {l}")));
                }
            }
            WeightKind::CutoffRho { lambda, delta } | WeightKind::CutoffChi { lambda, delta } => {
                if !(delta > 0.0) || !delta.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "delta must be positive, got {delta}"
                    )));
                }
                if !lambda.is_finite() {
                    return Err(Error::InvalidParameter("lambda must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Pointwise value; parameters are assumed valid.
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            WeightKind::RhoK { l } => (l * (1.0 - y.abs())).clamp(0.0, 1.0),
            WeightKind::TildeRhoK { l } => {
                let edge = 1.0 - 1.0 / l;
                if l <= 1.0 {
                    // boundary pieces cover the whole interval
                    let s = l * (1.0 - y.abs()) - 1.0;
                    return s * s * s + 1.0;
                }
                if y <= -edge {
                    let s = l * y + l - 1.0;
                    s * s * s + 1.0
                } else if y >= edge {
                    let s = l - l * y - 1.0;
                    s * s * s + 1.0
                } else {
                    1.0
                }
            }
            WeightKind::CutoffRho { lambda, delta } => {
                let s = y - lambda;
                if s <= -delta {
                    -1.0
                } else if s >= delta {
                    1.0
                } else {
                    (PI * s / (2.0 * delta)).sin()
                }
            }
            WeightKind::CutoffChi { lambda, delta } => {
                let s = y - lambda;
                if s.abs() >= delta {
                    1.0 / s
                } else {
                    2.0 * s / (delta * delta) - s * s * s / (delta * delta * delta * delta)
                }
            }
        }
    }
}

/// Nodal values of a weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    pub kind: WeightKind,
    pub values: Vec<f64>,
}

pub fn weight_values(kind: WeightKind, grid: &ChebGrid) -> Result<WeightProfile> {
    kind.validate()?;
    Ok(WeightProfile {
        kind,
        values: grid.nodes().iter().map(|&y| kind.eval(y)).collect(),
    })
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=m {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = mf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        x[m - 1 - i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss rule for integrands with kinks at `0` and `±(1 - 1/L)`
/// and inverse-square-root endpoint singularities at `±1`.
///
/// The two wall panels use `y = ∓1 ± h t²`, which absorbs
/// `(1 - |y|)^{-1/2}` into the Jacobian.
#[derive(Debug, Clone)]
pub struct PanelQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelQuadrature {
    pub fn new(l: f64, points_per_panel: usize) -> Self {
        let (gx, gw) = gauss_legendre(points_per_panel);
        let h = if l > 1.0 { 1.0 / l } else { 1.0 };
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        // left wall panel [-1, -1 + h]
        for (t, wt) in gx.iter().zip(&gw) {
            let s = 0.5 * (t + 1.0);
            nodes.push(-1.0 + h * s * s);
            weights.push(0.5 * wt * 2.0 * h * s);
        }
        let mut push_plain = |a: f64, b: f64| {
            if b > a {
                for (t, wt) in gx.iter().zip(&gw) {
                    nodes.push(0.5 * (a + b) + 0.5 * (b - a) * t);
                    weights.push(0.5 * (b - a) * wt);
                }
            }
        };
        push_plain(-1.0 + h, 0.0);
        push_plain(0.0, 1.0 - h);
        for (t, wt) in gx.iter().zip(&gw) {
            let s = 0.5 * (t + 1.0);
            nodes.push(1.0 - h * s * s);
            weights.push(0.5 * wt * 2.0 * h * s);
        }
        Self { nodes, weights }
    }

    /// `∫ |f|² weight(y) dy` from nodal values interpolated onto the panels.
    pub fn weighted_square(
        &self,
        grid: &ChebGrid,
        f: &[Complex64],
        weight: impl Fn(f64) -> f64,
    ) -> Result<f64> {
        let vals = grid.interpolate(f, &self.nodes)?;
        Ok(vals
            .iter()
            .zip(self.nodes.iter().zip(&self.weights))
            .map(|(v, (&y, &w))| v.norm_sqr() * weight(y) * w)
            .sum())
    }

    /// `∫ |f| dy`.
    pub fn abs_integral(&self, grid: &ChebGrid, f: &[Complex64]) -> Result<f64> {
        let vals = grid.interpolate(f, &self.nodes)?;
        Ok(vals.iter().zip(&self.weights).map(|(v, w)| v.norm() * w).sum())
    }
}

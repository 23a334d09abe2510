//! Resolvent problems for the linearized Couette operator
//! `L_k = ν(k² - ∂²) + iky` on `(-1, 1)`.
//!
//! Navier-slip: `-ν(∂² - k²)w + ik(y - λ)w - s w = F`, `w(±1) = 0`, with the
//! contour shift `s = ε ν^{1/3} |k|^{2/3}`.
//!
//! Non-slip: the same equation for `w = (∂² - k²)φ` with `φ = φ' = 0` at the
//! walls, which is equivalent to `∫ e^{±ky} w = 0`. Three solvers are
//! provided: the fourth-order stream-function system, the decomposition
//! `w = w_Na + c₁ w₁ + c₂ w₂`, and a vorticity system bordered by the two
//! moment rows.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;

use crate::airy::{self, Scaled};
use crate::error::{Error, Result};
use crate::estimates::NormBundle;
use crate::linalg::{self, CMat, DenseLu, RealLu};
use crate::spectral::{self, apply_real, ChebGrid, DiffOps};

/// Contour shift used when tracing the shifted line.
pub const EPSILON_SHIFT: f64 = 0.02;
/// Working value for the large-wavenumber threshold in the Airy hypothesis.
pub const K0: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    NavierSlip,
    NonSlip,
}

impl BoundaryCondition {
    pub fn label(&self) -> &'static str {
        match self {
            BoundaryCondition::NavierSlip => "navier_slip",
            BoundaryCondition::NonSlip => "non_slip",
        }
    }
}

/// One `(ν, k, λ, ε, bc)` instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventCase {
    pub nu: f64,
    pub k: i64,
    pub lambda: f64,
    pub epsilon: f64,
    pub bc: BoundaryCondition,
}

impl ResolventCase {
    pub fn new(nu: f64, k: i64, lambda: f64, epsilon: f64, bc: BoundaryCondition) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter("nu must be positive".into()));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("|k| must be at least 1".into()));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter("lambda must be finite".into()));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter("epsilon must be non-negative".into()));
        }
        Ok(Self { nu, k, lambda, epsilon, bc })
    }

    pub fn kf(&self) -> f64 {
        self.k as f64
    }

    /// `L = (|k| / ν)^{1/3}`.
    pub fn boundary_scale(&self) -> f64 {
        spectral::boundary_scale(self.nu, self.kf())
    }

    /// `δ = ν^{1/3} |k|^{-1/3}`.
    pub fn critical_width(&self) -> f64 {
        self.nu.cbrt() / self.kf().abs().cbrt()
    }

    /// `ε ν^{1/3} |k|^{2/3}`.
    pub fn shift(&self) -> f64 {
        self.epsilon * self.nu.cbrt() * self.kf().abs().powf(2.0 / 3.0)
    }

    pub fn grid_order(&self) -> Result<usize> {
        spectral::grid_order_for(self.nu, self.kf())
    }

    /// `d = -1 - λ - ikν`.
    pub fn d(&self) -> Complex64 {
        Complex64::new(-1.0 - self.lambda, -self.kf() * self.nu)
    }

    /// `d~ = -1 + λ - ikν`.
    pub fn d_tilde(&self) -> Complex64 {
        Complex64::new(-1.0 + self.lambda, -self.kf() * self.nu)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }
}

/// Grid plus differentiation matrices.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: ChebGrid,
    pub ops: DiffOps,
}

impl Discretization {
    pub fn new(order: usize) -> Result<Self> {
        let grid = ChebGrid::new(order)?;
        let ops = DiffOps::new(&grid);
        Ok(Self { grid, ops })
    }

    pub fn for_case(case: &ResolventCase) -> Result<Self> {
        Self::new(case.grid_order()?)
    }

    pub fn order(&self) -> usize {
        self.grid.order()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    fn check(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: v.len() });
        }
        Ok(())
    }
}

/// Right-hand side of the resolvent equation.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Direct(Vec<Complex64>),
    /// `F = -ik f1 - ∂_y f2`.
    Pair { f1: Vec<Complex64>, f2: Vec<Complex64> },
}

impl Forcing {
    pub fn from_fn(disc: &Discretization, f: impl Fn(f64) -> Complex64) -> Self {
        Forcing::Direct(disc.nodes().iter().map(|&y| f(y)).collect())
    }

    pub fn zero(disc: &Discretization) -> Self {
        Forcing::Direct(vec![Complex64::new(0.0, 0.0); disc.len()])
    }

    pub fn assemble(&self, k: f64, disc: &Discretization) -> Result<Vec<Complex64>> {
        match self {
            Forcing::Direct(f) => {
                disc.check(f)?;
                Ok(f.clone())
            }
            Forcing::Pair { f1, f2 } => {
                disc.check(f1)?;
                disc.check(f2)?;
                let df2 = apply_real(&disc.ops.d1, f2);
                Ok(f1
                    .iter()
                    .zip(df2)
                    .map(|(a, b)| Complex64::new(0.0, -k) * a - b)
                    .collect())
            }
        }
    }
}

/// Pieces of the non-slip decomposition.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub w_na: Vec<Complex64>,
    pub c1: Complex64,
    pub c2: Complex64,
    pub w1: Vec<Complex64>,
    pub w2: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub w: Vec<Complex64>,
    pub phi: Vec<Complex64>,
    pub u1: Vec<Complex64>,
    pub u2: Vec<Complex64>,
    pub decomposition: Option<Decomposition>,
    pub norms: Option<NormBundle>,
}

/// Airy-side data of the homogeneous pair: `A_i`, `B_i`, `C_ij`.
#[derive(Debug, Clone, Copy)]
pub struct AiryCoefficients {
    pub a1: Scaled,
    pub a2: Scaled,
    pub b1: Scaled,
    pub b2: Scaled,
    pub c11: Scaled,
    pub c12: Scaled,
    pub c21: Scaled,
    pub c22: Scaled,
    /// `|A1 A2 - B1 B2| / |B1 B2|`.
    pub relative_det: f64,
}

/// `w₁, w₂` with `∫ e^{ky} w₁ = e^k`, `∫ e^{-ky} w₁ = e^{-k}`,
/// `∫ e^{ky} w₂ = -e^{-k}`, `∫ e^{-ky} w₂ = -e^k`, all with `k = |k|`.
#[derive(Debug, Clone)]
pub struct HomogeneousPair {
    pub w1: Vec<Complex64>,
    pub w2: Vec<Complex64>,
    pub phi1: Vec<Complex64>,
    pub phi2: Vec<Complex64>,
    pub d: Complex64,
    pub d_tilde: Complex64,
    pub airy: Option<AiryCoefficients>,
}

/// Which unknown a bordered system is written for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    Vorticity,
    StreamFunction,
}

#[derive(Debug, Clone)]
pub struct BorderedOperator {
    pub matrix: CMat,
    pub bordered_rows: Vec<usize>,
    pub unknown: Unknown,
}

/// `-ν(D2 - k²) + ik(y - λ) - s` without boundary rows.
pub fn interior_operator(case: &ResolventCase, disc: &Discretization) -> CMat {
    let k = case.kf();
    let nu = case.nu;
    let s = case.shift();
    let y = disc.nodes();
    let d2 = &disc.ops.d2;
    Mat::from_fn(disc.len(), disc.len(), |i, j| {
        let mut v = Complex64::new(-nu * d2[(i, j)], 0.0);
        if i == j {
            v += Complex64::new(nu * k * k - s, k * (y[i] - case.lambda));
        }
        v
    })
}

fn set_row(m: &mut CMat, row: usize, values: impl Iterator<Item = Complex64>) {
    for (j, v) in values.enumerate() {
        m[(row, j)] = v;
    }
}

fn unit_row(n: usize, at: usize) -> impl Iterator<Item = Complex64> {
    (0..n).map(move |j| Complex64::new(if j == at { 1.0 } else { 0.0 }, 0.0))
}

/// Vorticity operator with `w(±1) = 0`.
pub fn dirichlet_vorticity_operator(case: &ResolventCase, disc: &Discretization) -> CMat {
    let n = disc.order();
    let mut a = interior_operator(case, disc);
    set_row(&mut a, 0, unit_row(n + 1, 0));
    set_row(&mut a, n, unit_row(n + 1, n));
    a
}

/// Quadrature rows for `e^{-|k|} ∫ e^{±|k|y} w`.
pub fn moment_rows(k: f64, disc: &Discretization) -> (Vec<Complex64>, Vec<Complex64>) {
    let ka = k.abs();
    let w = disc.grid.quad_weights();
    let y = disc.nodes();
    let plus = y.iter().zip(w).map(|(&y, &w)| Complex64::new(w * (ka * y - ka).exp(), 0.0)).collect();
    let minus = y.iter().zip(w).map(|(&y, &w)| Complex64::new(w * (-ka * y - ka).exp(), 0.0)).collect();
    (plus, minus)
}

/// Vorticity operator with the two moment rows in place of the boundary rows.
pub fn moment_vorticity_operator(case: &ResolventCase, disc: &Discretization) -> CMat {
    let n = disc.order();
    let mut a = interior_operator(case, disc);
    let (plus, minus) = moment_rows(case.kf(), disc);
    set_row(&mut a, 0, plus.into_iter());
    set_row(&mut a, n, minus.into_iter());
    a
}

fn stream_operator(case: &ResolventCase, disc: &Discretization, clamp: bool) -> CMat {
    let k = case.kf();
    let k2 = k * k;
    let nu = case.nu;
    let s = case.shift();
    let y = disc.nodes();
    let (d1, d2, d4) = (&disc.ops.d1, &disc.ops.d2, &disc.ops.d4);
    let n = disc.order();
    let mut a = Mat::from_fn(n + 1, n + 1, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        let bi = d4[(i, j)] - 2.0 * k2 * d2[(i, j)] + k2 * k2 * id;
        let lap = d2[(i, j)] - k2 * id;
        Complex64::new(-nu * bi - s * lap, k * (y[i] - case.lambda) * lap)
    });
    set_row(&mut a, 0, unit_row(n + 1, 0));
    set_row(&mut a, n, unit_row(n + 1, n));
    let edge = if clamp { d1 } else { d2 };
    set_row(&mut a, 1, (0..=n).map(|j| Complex64::new(edge[(0, j)], 0.0)));
    set_row(&mut a, n - 1, (0..=n).map(|j| Complex64::new(edge[(n, j)], 0.0)));
    a
}

/// Fourth-order stream-function operator with `φ = φ' = 0` at the walls.
pub fn nonslip_stream_operator(case: &ResolventCase, disc: &Discretization) -> CMat {
    stream_operator(case, disc, true)
}

/// Fourth-order stream-function operator with `φ = φ'' = 0` at the walls.
pub fn navier_stream_operator(case: &ResolventCase, disc: &Discretization) -> CMat {
    stream_operator(case, disc, false)
}

/// The bordered system the case's boundary condition calls for.
pub fn build_operator(case: &ResolventCase, disc: &Discretization) -> BorderedOperator {
    let n = disc.order();
    match case.bc {
        BoundaryCondition::NavierSlip => BorderedOperator {
            matrix: dirichlet_vorticity_operator(case, disc),
            bordered_rows: vec![0, n],
            unknown: Unknown::Vorticity,
        },
        BoundaryCondition::NonSlip => BorderedOperator {
            matrix: nonslip_stream_operator(case, disc),
            bordered_rows: vec![0, 1, n - 1, n],
            unknown: Unknown::StreamFunction,
        },
    }
}

/// Dirichlet solver for `(∂² - k²)φ = w`, `φ(±1) = 0`.
#[derive(Debug)]
pub struct EllipticSolver {
    lu: RealLu,
    k: f64,
}

impl EllipticSolver {
    pub fn new(k: f64, disc: &Discretization) -> Result<Self> {
        let n = disc.order();
        let d2 = &disc.ops.d2;
        let m = Mat::from_fn(n + 1, n + 1, |i, j| {
            if i == 0 || i == n {
                if i == j { 1.0 } else { 0.0 }
            } else {
                d2[(i, j)] - if i == j { k * k } else { 0.0 }
            }
        });
        Ok(Self { lu: RealLu::new(&m, format!("elliptic solve at k = {k}"))?, k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn solve(&self, w: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = w.len() - 1;
        let mut rhs = w.to_vec();
        rhs[0] = Complex64::new(0.0, 0.0);
        rhs[n] = Complex64::new(0.0, 0.0);
        let mut phi = self.lu.solve(&rhs)?;
        phi[0] = Complex64::new(0.0, 0.0);
        phi[n] = Complex64::new(0.0, 0.0);
        Ok(phi)
    }

    /// Adjoint of `w ↦ φ`.
    pub fn solve_adjoint(&self, g: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = g.len() - 1;
        let mut out = self.lu.solve_transpose(g)?;
        out[0] = Complex64::new(0.0, 0.0);
        out[n] = Complex64::new(0.0, 0.0);
        Ok(out)
    }
}

/// `u = (∂_y φ, -ik φ)`.
pub fn recover_velocity(phi: &[Complex64], k: f64, ops: &DiffOps) -> (Vec<Complex64>, Vec<Complex64>) {
    let u1 = apply_real(&ops.d1, phi);
    let u2 = phi.iter().map(|p| Complex64::new(0.0, -k) * p).collect();
    (u1, u2)
}

fn interior_rhs(f: &[Complex64]) -> Vec<Complex64> {
    let mut b = f.to_vec();
    let n = b.len() - 1;
    b[0] = Complex64::new(0.0, 0.0);
    b[n] = Complex64::new(0.0, 0.0);
    b
}

fn require(case: &ResolventCase, bc: BoundaryCondition) -> Result<()> {
    if case.bc != bc {
        return Err(Error::InvalidParameter(format!(
            "case has boundary condition {}, solver needs {}",
            case.bc.label(),
            bc.label()
        )));
    }
    Ok(())
}

fn case_context(case: &ResolventCase) -> String {
    format!(
        "nu = {:e}, k = {}, lambda = {}, epsilon = {}, {}",
        case.nu,
        case.k,
        case.lambda,
        case.epsilon,
        case.bc.label()
    )
}

fn assemble_solution(
    w: Vec<Complex64>,
    phi: Vec<Complex64>,
    k: f64,
    disc: &Discretization,
    decomposition: Option<Decomposition>,
) -> ResolventSolution {
    let (u1, u2) = recover_velocity(&phi, k, &disc.ops);
    ResolventSolution { w, phi, u1, u2, decomposition, norms: None }
}

/// Dirichlet vorticity solve; the velocity comes from the elliptic problem.
pub fn solve_navier(case: &ResolventCase, forcing: &Forcing, disc: &Discretization) -> Result<ResolventSolution> {
    require(case, BoundaryCondition::NavierSlip)?;
    let f = forcing.assemble(case.kf(), disc)?;
    let lu = DenseLu::new(&dirichlet_vorticity_operator(case, disc), case_context(case))?;
    let w = lu.solve(&interior_rhs(&f))?;
    let phi = EllipticSolver::new(case.kf(), disc)?.solve(&w)?;
    Ok(assemble_solution(w, phi, case.kf(), disc, None))
}

/// Navier-slip solve through the fourth-order stream-function system.
pub fn solve_navier_stream(
    case: &ResolventCase,
    forcing: &Forcing,
    disc: &Discretization,
) -> Result<ResolventSolution> {
    require(case, BoundaryCondition::NavierSlip)?;
    let f = forcing.assemble(case.kf(), disc)?;
    let lu = DenseLu::new(&navier_stream_operator(case, disc), case_context(case))?;
    let n = disc.order();
    let mut b = interior_rhs(&f);
    b[1] = Complex64::new(0.0, 0.0);
    b[n - 1] = Complex64::new(0.0, 0.0);
    let phi = lu.solve(&b)?;
    let w: Vec<Complex64> = apply_real(&disc.ops.d2, &phi)
        .into_iter()
        .zip(&phi)
        .map(|(a, p)| a - p * case.kf() * case.kf())
        .collect();
    Ok(assemble_solution(w, phi, case.kf(), disc, None))
}

/// Where the homogeneous pair of the decomposition comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSource {
    BoundaryValueProblem,
    Airy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonslipPath {
    /// Fourth-order stream-function system with `φ = φ' = 0`.
    Monolithic,
    /// `w = w_Na + c₁ w₁ + c₂ w₂`.
    Decomposed(PairSource),
    /// Vorticity system bordered by the two moment rows.
    Moment,
}

pub fn solve_nonslip(
    case: &ResolventCase,
    forcing: &Forcing,
    disc: &Discretization,
    path: NonslipPath,
) -> Result<ResolventSolution> {
    require(case, BoundaryCondition::NonSlip)?;
    let k = case.kf();
    let f = forcing.assemble(k, disc)?;
    let n = disc.order();
    match path {
        NonslipPath::Monolithic => {
            let lu = DenseLu::new(&nonslip_stream_operator(case, disc), case_context(case))?;
            let mut b = interior_rhs(&f);
            b[1] = Complex64::new(0.0, 0.0);
            b[n - 1] = Complex64::new(0.0, 0.0);
            let phi = lu.solve(&b)?;
            let w: Vec<Complex64> = apply_real(&disc.ops.d2, &phi)
                .into_iter()
                .zip(&phi)
                .map(|(a, p)| a - p * k * k)
                .collect();
            Ok(assemble_solution(w, phi, k, disc, None))
        }
        NonslipPath::Moment => {
            let lu = DenseLu::new(&moment_vorticity_operator(case, disc), case_context(case))?;
            let w = lu.solve(&interior_rhs(&f))?;
            let phi = EllipticSolver::new(k, disc)?.solve(&w)?;
            Ok(assemble_solution(w, phi, k, disc, None))
        }
        NonslipPath::Decomposed(source) => {
            let navier = ResolventCase { bc: BoundaryCondition::NavierSlip, ..*case };
            let lu = DenseLu::new(&dirichlet_vorticity_operator(&navier, disc), case_context(case))?;
            let w_na = lu.solve(&interior_rhs(&f))?;
            let pair = match source {
                PairSource::BoundaryValueProblem => homogeneous_bvp(case, disc)?,
                PairSource::Airy => homogeneous_airy(case, disc)?,
            };
            let (c1, c2) = coefficients(&w_na, k, &disc.grid)?;
            let w: Vec<Complex64> = w_na
                .iter()
                .zip(pair.w1.iter().zip(&pair.w2))
                .map(|(a, (p, q))| a + c1 * p + c2 * q)
                .collect();
            let elliptic = EllipticSolver::new(k, disc)?;
            let phi_na = elliptic.solve(&w_na)?;
            let phi: Vec<Complex64> = phi_na
                .iter()
                .zip(pair.phi1.iter().zip(&pair.phi2))
                .map(|(a, (p, q))| a + c1 * p + c2 * q)
                .collect();
            let dec = Decomposition { w_na, c1, c2, w1: pair.w1, w2: pair.w2 };
            Ok(assemble_solution(w, phi, k, disc, Some(dec)))
        }
    }
}

/// `sinh(|k|(1 + y)) / sinh(2|k|)` without overflow.
pub fn sinh_ratio(k: f64, y: f64) -> f64 {
    let ka = k.abs();
    if ka * 4.0 < 1e-3 {
        // small-k limit (1 + y)/2 with the first correction
        let a = ka * (1.0 + y);
        let b = 2.0 * ka;
        return (a * (1.0 + a * a / 6.0)) / (b * (1.0 + b * b / 6.0));
    }
    (ka * (y - 1.0)).exp() * (-(-2.0 * ka * (1.0 + y)).exp_m1()) / (-(-4.0 * ka).exp_m1())
}

/// `c₁ = -∫ sinh k(y+1)/sinh 2k · w_Na`, `c₂ = ∫ sinh k(1-y)/sinh 2k · w_Na`.
pub fn coefficients(w_na: &[Complex64], k: f64, grid: &ChebGrid) -> Result<(Complex64, Complex64)> {
    let y = grid.nodes();
    let f1: Vec<Complex64> = w_na.iter().zip(y).map(|(w, &y)| w * sinh_ratio(k, y)).collect();
    let f2: Vec<Complex64> = w_na.iter().zip(y).map(|(w, &y)| w * sinh_ratio(k, -y)).collect();
    Ok((-grid.quadrature(&f1)?, grid.quadrature(&f2)?))
}

fn with_potentials(
    case: &ResolventCase,
    disc: &Discretization,
    w1: Vec<Complex64>,
    w2: Vec<Complex64>,
    airy: Option<AiryCoefficients>,
) -> Result<HomogeneousPair> {
    let elliptic = EllipticSolver::new(case.kf(), disc)?;
    let phi1 = elliptic.solve(&w1)?;
    let phi2 = elliptic.solve(&w2)?;
    Ok(HomogeneousPair { w1, w2, phi1, phi2, d: case.d(), d_tilde: case.d_tilde(), airy })
}

/// Homogeneous pair from the moment-bordered boundary-value problem.
pub fn homogeneous_bvp(case: &ResolventCase, disc: &Discretization) -> Result<HomogeneousPair> {
    let n = disc.order();
    let ka = case.kf().abs();
    let lu = DenseLu::new(&moment_vorticity_operator(case, disc), case_context(case))?;
    let zero = Complex64::new(0.0, 0.0);
    let mut b1 = vec![zero; n + 1];
    let mut b2 = vec![zero; n + 1];
    // rows carry the factor e^{-|k|}
    let small = Complex64::new((-2.0 * ka).exp(), 0.0);
    let one = Complex64::new(1.0, 0.0);
    b1[0] = one;
    b1[n] = small;
    b2[0] = -small;
    b2[n] = -one;
    let w1 = lu.solve(&b1)?;
    let w2 = lu.solve(&b2)?;
    with_potentials(case, disc, w1, w2, None)
}

/// Checks `L >= 6|k|` or `L >= |k| >= k₀`.
pub fn airy_hypothesis(case: &ResolventCase) -> Result<()> {
    let l = case.boundary_scale();
    let ka = case.kf().abs();
    if l >= 6.0 * ka || (l >= ka && ka >= K0) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "Airy representation needs L >= 6|k| or L >= |k| >= {K0}; got L = {l:.3}, |k| = {ka}"
        )))
    }
}

/// Homogeneous pair from the Airy functions
/// `W₁ = Ai(e^{iπ/6} Z)`, `W₂ = Ai(e^{i5π/6} Z)`, `Z = L(y - λ - ikν) + iε`.
pub fn homogeneous_airy(case: &ResolventCase, disc: &Discretization) -> Result<HomogeneousPair> {
    airy_hypothesis(case)?;
    let ka = case.kf().abs();
    let l = case.boundary_scale();
    let y = disc.nodes();
    let r1 = Complex64::from_polar(1.0, PI / 6.0);
    let r2 = Complex64::from_polar(1.0, 5.0 * PI / 6.0);
    let mut big1 = Vec::with_capacity(y.len());
    let mut big2 = Vec::with_capacity(y.len());
    for &yj in y {
        let z = Complex64::new(l * (yj - case.lambda), -l * ka * case.nu + case.epsilon);
        big1.push(airy::airy(r1 * z)?.ai);
        big2.push(airy::airy(r2 * z)?.ai);
    }
    let peak = |v: &[Scaled]| {
        v.iter()
            .copied()
            .max_by(|a, b| a.log10_abs().partial_cmp(&b.log10_abs()).unwrap_or(std::cmp::Ordering::Equal))
            .map(|s| Scaled::new(Complex64::new(s.mantissa.norm(), 0.0), s.exp10))
            .unwrap_or(Scaled::ONE)
    };
    let s1 = peak(&big1);
    let s2 = peak(&big2);
    let hat1: Vec<Complex64> = big1.iter().map(|v| (*v / s1).to_complex()).collect();
    let hat2: Vec<Complex64> = big2.iter().map(|v| (*v / s2).to_complex()).collect();
    let g = &disc.grid;
    let ep: Vec<f64> = y.iter().map(|&y| (ka * y).exp()).collect();
    let em: Vec<f64> = y.iter().map(|&y| (-ka * y).exp()).collect();
    let moment = |w: &[Complex64], e: &[f64]| -> Result<Complex64> {
        let v: Vec<Complex64> = w.iter().zip(e).map(|(a, b)| a * b).collect();
        g.quadrature(&v)
    };
    let a1 = moment(&hat1, &ep)?;
    let b1 = moment(&hat1, &em)?;
    let a2 = moment(&hat2, &em)?;
    let b2 = moment(&hat2, &ep)?;
    let alpha = a1 * a2 - b1 * b2;
    let scale = (b1 * b2).norm();
    let relative_det = alpha.norm() / scale;
    if !(relative_det > 1e-12) {
        return Err(Error::Degenerate { det: alpha.norm(), scale });
    }
    let (epk, emk) = (ka.exp(), (-ka).exp());
    let c11 = (a2 * epk - b2 * emk) / alpha;
    let c12 = (a1 * emk - b1 * epk) / alpha;
    let c21 = (b2 * epk - a2 * emk) / alpha;
    let c22 = (b1 * emk - a1 * epk) / alpha;
    let mut w1: Vec<Complex64> = hat1.iter().zip(&hat2).map(|(p, q)| c11 * p + c12 * q).collect();
    let mut w2: Vec<Complex64> = hat1.iter().zip(&hat2).map(|(p, q)| c21 * p + c22 * q).collect();
    let sc = Scaled::from_complex;
    let mut coeffs = AiryCoefficients {
        a1: sc(a1) * s1,
        a2: sc(a2) * s2,
        b1: sc(b1) * s1,
        b2: sc(b2) * s2,
        c11: sc(c11) / s1,
        c12: sc(c12) / s2,
        c21: sc(c21) / s1,
        c22: sc(c22) / s2,
        relative_det,
    };
    if case.k < 0 {
        // the negative-k problem is the complex conjugate of the |k| one
        w1.iter_mut().for_each(|v| *v = v.conj());
        w2.iter_mut().for_each(|v| *v = v.conj());
        coeffs = AiryCoefficients {
            a1: coeffs.a1.conj(),
            a2: coeffs.a2.conj(),
            b1: coeffs.b1.conj(),
            b2: coeffs.b2.conj(),
            c11: coeffs.c11.conj(),
            c12: coeffs.c12.conj(),
            c21: coeffs.c21.conj(),
            c22: coeffs.c22.conj(),
            relative_det,
        };
    }
    with_potentials(case, disc, w1, w2, Some(coeffs))
}

/// `e^{-|k|} ∫ e^{±|k|y} w`.
pub fn scaled_moments(w: &[Complex64], k: f64, disc: &Discretization) -> (Complex64, Complex64) {
    let (plus, minus) = moment_rows(k, disc);
    (
        plus.iter().zip(w).map(|(a, b)| a * b).sum(),
        minus.iter().zip(w).map(|(a, b)| a * b).sum(),
    )
}

/// Smallest singular value of a bordered matrix.
pub fn smallest_singular_value(m: &CMat) -> Result<f64> {
    Ok(linalg::singular_values(m)?.last().copied().unwrap_or(0.0))
}

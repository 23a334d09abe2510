//! Norms, resolvent-norm sweeps, exponent fits, spectra and the
//! recorded-constant checks built on the resolvent solvers.

use num_complex::Complex64;

use crate::airy;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, DenseLu, SingularPair};
use crate::resolvent::{
    self, dirichlet_vorticity_operator, moment_vorticity_operator, BoundaryCondition, Discretization,
    EllipticSolver, Forcing, HomogeneousPair, PairSource, ResolventCase, ResolventSolution,
};
use crate::spectral::{apply_real, apply_real_transpose, ChebGrid, PanelQuadrature, WeightKind};

const LANCZOS_TOL: f64 = 1e-10;
const LANCZOS_MAX_ITER: usize = 300;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Every norm used by the resolvent estimates, for one solution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormBundle {
    pub l2: f64,
    pub l1: f64,
    /// Nodal maximum.
    pub linf: f64,
    /// `‖φ'‖² + k²‖φ‖²`.
    pub h1_phi: f64,
    pub u_l2: f64,
    /// `‖(y - λ) w‖`.
    pub critical: f64,
    pub w_prime_l2: f64,
    pub rho_half: f64,
    pub rho_neg_quarter: f64,
    pub rho_threehalf: f64,
    /// `‖(1 - |y|)^{1/2} w‖`.
    pub boundary_weight: f64,
}

impl NormBundle {
    pub fn fields(&self) -> [(&'static str, f64); 11] {
        [
            ("l2", self.l2),
            ("l1", self.l1),
            ("linf", self.linf),
            ("h1_phi", self.h1_phi),
            ("u_l2", self.u_l2),
            ("critical", self.critical),
            ("w_prime_l2", self.w_prime_l2),
            ("rho_half", self.rho_half),
            ("rho_neg_quarter", self.rho_neg_quarter),
            ("rho_threehalf", self.rho_threehalf),
            ("boundary_weight", self.boundary_weight),
        ]
    }
}

fn panel_points(order: usize) -> usize {
    (order / 2).max(32)
}

/// Weighted integrals of `|w|^p` on the composite panel rule.
struct PanelValues {
    rule: PanelQuadrature,
    values: Vec<Complex64>,
}

impl PanelValues {
    fn new(grid: &ChebGrid, w: &[Complex64], l: f64) -> Result<Self> {
        let rule = PanelQuadrature::new(l, panel_points(grid.order()));
        let values = grid.interpolate(w, &rule.nodes)?;
        Ok(Self { rule, values })
    }

    fn square(&self, weight: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .zip(self.rule.nodes.iter().zip(&self.rule.weights))
            .map(|(v, (&y, &q))| v.norm_sqr() * weight(y) * q)
            .sum::<f64>()
            .max(0.0)
    }

    fn abs(&self) -> f64 {
        self.values.iter().zip(&self.rule.weights).map(|(v, q)| v.norm() * q).sum()
    }
}

/// `∫ |f|` on the panel rule matched to the boundary scale `l`.
pub fn l1_norm(grid: &ChebGrid, f: &[Complex64], l: f64) -> Result<f64> {
    Ok(PanelValues::new(grid, f, l)?.abs())
}

/// `(∫ ρ_k^p |f|²)^{1/2}` including negative powers.
pub fn rho_weighted_norm(grid: &ChebGrid, f: &[Complex64], l: f64, p: f64) -> Result<f64> {
    let rho = WeightKind::RhoK { l };
    rho.validate()?;
    Ok(PanelValues::new(grid, f, l)?.square(|y| rho.eval(y).powf(p)).sqrt())
}

/// All norms of a solved case.
pub fn norms(solution: &ResolventSolution, case: &ResolventCase, disc: &Discretization) -> Result<NormBundle> {
    let grid = &disc.grid;
    let w = &solution.w;
    if w.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: w.len() });
    }
    let l = case.boundary_scale();
    let y = grid.nodes();
    let k = case.kf();
    let panels = PanelValues::new(grid, w, l)?;
    let rho = WeightKind::RhoK { l };
    let dphi = apply_real(&disc.ops.d1, &solution.phi);
    let h1_phi = grid.l2_norm(&dphi).powi(2) + k * k * grid.l2_norm(&solution.phi).powi(2);
    let u_sq = grid.l2_norm(&solution.u1).powi(2) + grid.l2_norm(&solution.u2).powi(2);
    let crit: Vec<Complex64> = w.iter().zip(y).map(|(v, &y)| v * (y - case.lambda)).collect();
    Ok(NormBundle {
        l2: grid.l2_norm(w),
        l1: panels.abs(),
        linf: w.iter().map(|v| v.norm()).fold(0.0, f64::max),
        h1_phi,
        u_l2: u_sq.sqrt(),
        critical: grid.l2_norm(&crit),
        w_prime_l2: grid.l2_norm(&apply_real(&disc.ops.d1, w)),
        rho_half: panels.square(|y| rho.eval(y)).sqrt(),
        rho_neg_quarter: panels.square(|y| rho.eval(y).powf(-0.5)).sqrt(),
        rho_threehalf: panels.square(|y| rho.eval(y).powi(3)).sqrt(),
        boundary_weight: panels.square(|y| 1.0 - y.abs()).sqrt(),
    })
}

/// Log-log least-squares fit `value ≈ e^{intercept} · x^{exponent}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub name: String,
    pub variable: String,
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
    pub target_exponent: f64,
    pub tolerance: f64,
    pub points: usize,
    pub pass: bool,
}

/// Minimum coefficient of determination for an accepted fit.
pub const MIN_R2: f64 = 0.98;
/// Default exponent tolerance.
pub const EXPONENT_TOLERANCE: f64 = 0.05;

pub fn fit_power_law(
    name: &str,
    variable: &str,
    xs: &[f64],
    ys: &[f64],
    target: f64,
    tolerance: f64,
) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::FitRejected(format!("{name}: need at least two points")));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::FitRejected(format!("{name}: non-positive or non-finite data")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::FitRejected(format!("{name}: all abscissae coincide")));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    let pass = (exponent - target).abs() <= tolerance && r2 >= MIN_R2;
    Ok(ScalingFit {
        name: name.to_string(),
        variable: variable.to_string(),
        exponent,
        intercept,
        r2,
        target_exponent: target,
        tolerance,
        points: xs.len(),
        pass,
    })
}

/// How the spectral parameter is chosen for each case of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaStrategy {
    FixedList(Vec<f64>),
    /// 41-point scan of `[-1.5, 1.5]` refined by golden section.
    SupSearch,
}

/// Norm placed on the forcing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataNorm {
    /// `F` in `L²`.
    L2,
    /// `F = -∂_y f₂`, normalized by `‖f₂‖₂`.
    Hm1,
}

impl DataNorm {
    pub fn label(&self) -> &'static str {
        match self {
            DataNorm::L2 => "l2",
            DataNorm::Hm1 => "hm1",
        }
    }
}

/// Response measured in `L²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Response {
    Vorticity,
    Velocity,
    VorticityGradient,
    /// `(y - λ) w`.
    Critical,
    /// `ρ_k^{1/2} w`.
    RhoHalf,
}

impl Response {
    pub fn label(&self) -> &'static str {
        match self {
            Response::Vorticity => "w",
            Response::Velocity => "u",
            Response::VorticityGradient => "w_prime",
            Response::Critical => "critical",
            Response::RhoHalf => "rho_half_w",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub nu_values: Vec<f64>,
    pub k_values: Vec<i64>,
    pub lambda_strategy: LambdaStrategy,
    pub data: DataNorm,
    pub bc: BoundaryCondition,
    pub epsilon: f64,
    /// Grid order multiplier over the resolution rule.
    pub resolution: usize,
}

impl SweepSpec {
    pub fn new(nu_values: Vec<f64>, k_values: Vec<i64>, data: DataNorm, bc: BoundaryCondition) -> Self {
        Self {
            nu_values,
            k_values,
            lambda_strategy: LambdaStrategy::SupSearch,
            data,
            bc,
            epsilon: 0.0,
            resolution: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu_values.is_empty() || self.k_values.is_empty() {
            return Err(Error::InvalidParameter("sweep needs at least one nu and one k".into()));
        }
        if self.nu_values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("nu must be positive".into()));
        }
        if self.k_values.contains(&0) {
            return Err(Error::InvalidParameter("|k| must be at least 1".into()));
        }
        if self.resolution == 0 {
            return Err(Error::InvalidParameter("resolution multiplier must be at least 1".into()));
        }
        if let LambdaStrategy::FixedList(l) = &self.lambda_strategy {
            if l.is_empty() {
                return Err(Error::InvalidParameter("lambda list is empty".into()));
            }
        }
        Ok(())
    }

    /// Decades spanned by the viscosity list.
    pub fn nu_decades(&self) -> f64 {
        let (lo, hi) = self
            .nu_values
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
        (hi / lo).log10()
    }

    /// Rejects a viscosity fit over fewer than two decades.
    pub fn validate_for_fit(&self) -> Result<()> {
        self.validate()?;
        if self.nu_decades() < 2.0 - 1e-9 {
            return Err(Error::FitRejected("exponent fit requires ≥ 2 decades".into()));
        }
        Ok(())
    }
}

/// Default coarse λ grid for sup searches.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..41).map(|i| -1.5 + 0.075 * i as f64).collect()
}

/// Tolerance of the golden-section refinement in λ.
pub const LAMBDA_TOL: f64 = 1e-3;

/// Maximizes `f` over the coarse grid and refines by golden section.
pub fn sup_over_lambda(mut f: impl FnMut(f64) -> Result<f64>, grid: &[f64], extra: &[f64]) -> Result<(f64, f64)> {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    let mut values = Vec::with_capacity(grid.len());
    for &l in grid {
        let v = f(l)?;
        values.push(v);
        if v > best.1 {
            best = (l, v);
        }
    }
    for &l in extra {
        let v = f(l)?;
        if v > best.1 {
            best = (l, v);
        }
    }
    if grid.len() < 3 {
        return Ok(best);
    }
    let i = values
        .iter()
        .enumerate()
        .fold(0, |b, (j, v)| if *v > values[b] { j } else { b });
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let (l, v) = golden_max(&mut f, lo, hi, LAMBDA_TOL)?;
    if v > best.1 {
        best = (l, v);
    }
    Ok(best)
}

fn golden_max(f: &mut impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

fn sqrt_weights(grid: &ChebGrid) -> Vec<f64> {
    grid.quad_weights().iter().map(|w| w.sqrt()).collect()
}

fn zero_ends(v: &mut [Complex64]) {
    let n = v.len() - 1;
    v[0] = zero();
    v[n] = zero();
}

/// The map forcing → response for one case, in Clenshaw–Curtis weighted
/// coordinates, with its adjoint. Navier-slip uses the Dirichlet vorticity
/// system, non-slip the moment-bordered one.
pub struct ResolventMap<'a> {
    case: ResolventCase,
    disc: &'a Discretization,
    elliptic: &'a EllipticSolver,
    lu: DenseLu,
    sq: Vec<f64>,
    rho_sqrt: Vec<f64>,
}

impl std::fmt::Debug for ResolventMap<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResolventMap").field("case", &self.case).finish()
    }
}

impl<'a> ResolventMap<'a> {
    pub fn new(case: &ResolventCase, disc: &'a Discretization, elliptic: &'a EllipticSolver) -> Result<Self> {
        let matrix = match case.bc {
            BoundaryCondition::NavierSlip => dirichlet_vorticity_operator(case, disc),
            BoundaryCondition::NonSlip => moment_vorticity_operator(case, disc),
        };
        let lu = DenseLu::new(&matrix, format!("resolvent map at lambda = {}", case.lambda))?;
        let rho = WeightKind::RhoK { l: case.boundary_scale() };
        Ok(Self {
            case: *case,
            disc,
            elliptic,
            lu,
            sq: sqrt_weights(&disc.grid),
            rho_sqrt: disc.nodes().iter().map(|&y| rho.eval(y).sqrt()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.disc.len()
    }

    fn forcing(&self, data: DataNorm, x: &[Complex64]) -> Vec<Complex64> {
        let f: Vec<Complex64> = x.iter().zip(&self.sq).map(|(v, s)| v / s).collect();
        match data {
            DataNorm::L2 => f,
            DataNorm::Hm1 => apply_real(&self.disc.ops.d1, &f).into_iter().map(|v| -v).collect(),
        }
    }

    fn forcing_adjoint(&self, data: DataNorm, g: &[Complex64]) -> Vec<Complex64> {
        let g = match data {
            DataNorm::L2 => g.to_vec(),
            DataNorm::Hm1 => apply_real_transpose(&self.disc.ops.d1, g).into_iter().map(|v| -v).collect(),
        };
        g.iter().zip(&self.sq).map(|(v, s)| v / s).collect()
    }

    /// Vorticity for weighted input `x`.
    pub fn vorticity(&self, data: DataNorm, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut f = self.forcing(data, x);
        zero_ends(&mut f);
        self.lu.solve(&f)
    }

    fn vorticity_adjoint(&self, data: DataNorm, g: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut h = self.lu.solve_adjoint(g)?;
        zero_ends(&mut h);
        Ok(self.forcing_adjoint(data, &h))
    }

    fn respond(&self, response: Response, w: &[Complex64]) -> Result<Vec<Complex64>> {
        let sq = &self.sq;
        Ok(match response {
            Response::Vorticity => w.iter().zip(sq).map(|(v, s)| v * s).collect(),
            Response::VorticityGradient => apply_real(&self.disc.ops.d1, w).iter().zip(sq).map(|(v, s)| v * s).collect(),
            Response::Critical => w
                .iter()
                .zip(sq.iter().zip(self.disc.nodes()))
                .map(|(v, (s, &y))| v * s * (y - self.case.lambda))
                .collect(),
            Response::RhoHalf => w.iter().zip(sq.iter().zip(&self.rho_sqrt)).map(|(v, (s, r))| v * s * r).collect(),
            Response::Velocity => {
                let phi = self.elliptic.solve(w)?;
                let k = self.case.kf();
                let u1 = apply_real(&self.disc.ops.d1, &phi);
                let mut out: Vec<Complex64> = u1.iter().zip(sq).map(|(v, s)| v * s).collect();
                out.extend(phi.iter().zip(sq).map(|(p, s)| Complex64::new(0.0, -k) * p * s));
                out
            }
        })
    }

    fn respond_adjoint(&self, response: Response, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let sq = &self.sq;
        Ok(match response {
            Response::Vorticity => y.iter().zip(sq).map(|(v, s)| v * s).collect(),
            Response::VorticityGradient => {
                let t: Vec<Complex64> = y.iter().zip(sq).map(|(v, s)| v * s).collect();
                apply_real_transpose(&self.disc.ops.d1, &t)
            }
            Response::Critical => y
                .iter()
                .zip(sq.iter().zip(self.disc.nodes()))
                .map(|(v, (s, &yy))| v * s * (yy - self.case.lambda))
                .collect(),
            Response::RhoHalf => y.iter().zip(sq.iter().zip(&self.rho_sqrt)).map(|(v, (s, r))| v * s * r).collect(),
            Response::Velocity => {
                let n = self.dim();
                let k = self.case.kf();
                let t1: Vec<Complex64> = y[..n].iter().zip(sq).map(|(v, s)| v * s).collect();
                let mut phi_bar = apply_real_transpose(&self.disc.ops.d1, &t1);
                for ((p, v), s) in phi_bar.iter_mut().zip(&y[n..]).zip(sq) {
                    *p += Complex64::new(0.0, k) * v * s;
                }
                self.elliptic.solve_adjoint(&phi_bar)?
            }
        })
    }

    /// Operator norm of forcing → response with the top right singular vector.
    pub fn norm(&self, data: DataNorm, response: Response) -> Result<SingularPair> {
        linalg::largest_singular_pair(
            self.dim(),
            |x| {
                let w = self.vorticity(data, x)?;
                self.respond(response, &w)
            },
            |y| {
                let g = self.respond_adjoint(response, y)?;
                self.vorticity_adjoint(data, &g)
            },
            LANCZOS_TOL,
            LANCZOS_MAX_ITER,
        )
    }
}

/// Sup over λ of one operator norm, with the `L¹` norm of the extremal
/// response at the maximizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSup {
    pub lambda: f64,
    pub value: f64,
    pub extremal_l1: f64,
}

/// Resolvent-norm sup over λ for several (data, response) pairs on one case.
pub fn resolvent_sup(
    base: &ResolventCase,
    disc: &Discretization,
    queries: &[(DataNorm, Response)],
    strategy: &LambdaStrategy,
    extra_lambdas: &[f64],
) -> Result<Vec<LambdaSup>> {
    let elliptic = EllipticSolver::new(base.kf(), disc)?;
    let eval = |lambda: f64, q: (DataNorm, Response)| -> Result<f64> {
        let map = ResolventMap::new(&base.with_lambda(lambda), disc, &elliptic)?;
        Ok(map.norm(q.0, q.1)?.value)
    };
    let mut out = Vec::with_capacity(queries.len());
    match strategy {
        LambdaStrategy::FixedList(list) => {
            let mut best = vec![(f64::NAN, f64::NEG_INFINITY); queries.len()];
            for &l in list {
                let map = ResolventMap::new(&base.with_lambda(l), disc, &elliptic)?;
                for (b, q) in best.iter_mut().zip(queries) {
                    let v = map.norm(q.0, q.1)?.value;
                    if v > b.1 {
                        *b = (l, v);
                    }
                }
            }
            for (b, q) in best.iter().zip(queries) {
                out.push(finish_sup(base, disc, &elliptic, *q, b.0, b.1)?);
            }
        }
        LambdaStrategy::SupSearch => {
            let grid = default_lambda_grid();
            let mut table = vec![Vec::with_capacity(grid.len()); queries.len()];
            for &l in &grid {
                let map = ResolventMap::new(&base.with_lambda(l), disc, &elliptic)?;
                for (t, q) in table.iter_mut().zip(queries) {
                    t.push(map.norm(q.0, q.1)?.value);
                }
            }
            for (t, q) in table.iter().zip(queries) {
                let mut cached = |l: f64| -> Result<f64> {
                    if let Some(i) = grid.iter().position(|&g| g == l) {
                        return Ok(t[i]);
                    }
                    eval(l, *q)
                };
                let (l, v) = sup_over_lambda(&mut cached, &grid, extra_lambdas)?;
                out.push(finish_sup(base, disc, &elliptic, *q, l, v)?);
            }
        }
    }
    Ok(out)
}

fn finish_sup(
    base: &ResolventCase,
    disc: &Discretization,
    elliptic: &EllipticSolver,
    q: (DataNorm, Response),
    lambda: f64,
    value: f64,
) -> Result<LambdaSup> {
    let map = ResolventMap::new(&base.with_lambda(lambda), disc, elliptic)?;
    let pair = map.norm(q.0, q.1)?;
    let w = map.vorticity(q.0, &pair.right)?;
    let extremal_l1 = l1_norm(&disc.grid, &w, base.boundary_scale())?;
    Ok(LambdaSup { lambda, value, extremal_l1 })
}

/// Which viscosity regime a series applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Any,
    /// `ν k² ≤ 1`.
    Small,
    /// `ν k² ≥ 1`.
    Large,
}

impl Regime {
    fn admits(&self, nu: f64, k: f64) -> bool {
        let s = nu * k * k;
        match self {
            Regime::Any => true,
            Regime::Small => s <= 1.0,
            Regime::Large => s >= 1.0,
        }
    }
}

/// One measured quantity of a sweep with its predicted powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSpec {
    pub name: &'static str,
    pub response: Response,
    /// Use the `L¹` norm of the extremal vorticity instead of the operator norm.
    pub extremal_l1: bool,
    pub nu_power: f64,
    pub k_power: f64,
    pub fit: bool,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub series: String,
    pub nu: f64,
    pub k: i64,
    pub order: usize,
    pub lambda: f64,
    pub value: f64,
    /// `value · ν^{-nu_power} |k|^{-k_power}`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedConstant {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub bc: BoundaryCondition,
    pub data: DataNorm,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<ScalingFit>,
    pub constants: Vec<RecordedConstant>,
}

impl SweepReport {
    pub fn fit(&self, name: &str, variable: &str) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.name == name && f.variable == variable)
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }
}

fn order_for(case: &ResolventCase, resolution: usize) -> Result<usize> {
    Ok(case.grid_order()? * resolution)
}

/// Runs a sweep and fits every series along ν (per k) and along k (per ν).
pub fn run_sweep(spec: &SweepSpec, series: &[SeriesSpec]) -> Result<SweepReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &nu in &spec.nu_values {
        for &k in &spec.k_values {
            let active: Vec<&SeriesSpec> = series.iter().filter(|s| s.regime.admits(nu, k as f64)).collect();
            if active.is_empty() {
                continue;
            }
            let case = ResolventCase::new(nu, k, 0.0, spec.epsilon, spec.bc)?;
            let order = order_for(&case, spec.resolution)?;
            let required = (8.0 * case.boundary_scale()).ceil() as usize;
            if order < required {
                return Err(Error::InvalidParameter(format!("order {order} below the resolution rule {required}")));
            }
            let disc = Discretization::new(order)?;
            let mut queries: Vec<(DataNorm, Response)> = Vec::new();
            for s in &active {
                if !queries.contains(&(spec.data, s.response)) {
                    queries.push((spec.data, s.response));
                }
            }
            let sups = resolvent_sup(&case, &disc, &queries, &spec.lambda_strategy, &[])?;
            for s in &active {
                let idx = queries.iter().position(|q| *q == (spec.data, s.response)).unwrap_or(0);
                let sup = sups[idx];
                let value = if s.extremal_l1 { sup.extremal_l1 } else { sup.value };
                rows.push(SweepRow {
                    series: s.name.to_string(),
                    nu,
                    k,
                    order,
                    lambda: sup.lambda,
                    value,
                    normalized: value * nu.powf(-s.nu_power) * (k as f64).abs().powf(-s.k_power),
                });
            }
        }
    }
    let mut fits = Vec::new();
    let mut constants = Vec::new();
    for s in series {
        let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.series == s.name).collect();
        if mine.is_empty() {
            continue;
        }
        let c = mine.iter().map(|r| r.normalized).fold(0.0, f64::max);
        constants.push(RecordedConstant { name: s.name.to_string(), value: c });
        if !s.fit {
            continue;
        }
        for &k in &spec.k_values {
            let pts: Vec<&&SweepRow> = mine.iter().filter(|r| r.k == k).collect();
            if pts.len() >= 2 && spec.nu_decades() >= 2.0 - 1e-9 {
                let xs: Vec<f64> = pts.iter().map(|r| r.nu).collect();
                let ys: Vec<f64> = pts.iter().map(|r| r.value).collect();
                let name = if spec.k_values.len() > 1 { format!("{}@k={k}", s.name) } else { s.name.to_string() };
                fits.push(fit_power_law(&name, "nu", &xs, &ys, s.nu_power, EXPONENT_TOLERANCE)?);
            }
        }
        for &nu in &spec.nu_values {
            let pts: Vec<&&SweepRow> = mine.iter().filter(|r| r.nu == nu).collect();
            if pts.len() >= 2 {
                let xs: Vec<f64> = pts.iter().map(|r| (r.k as f64).abs()).collect();
                let ys: Vec<f64> = pts.iter().map(|r| r.value).collect();
                let name = if spec.nu_values.len() > 1 { format!("{}@nu={nu:e}", s.name) } else { s.name.to_string() };
                fits.push(fit_power_law(&name, "k", &xs, &ys, s.k_power, EXPONENT_TOLERANCE)?);
            }
        }
    }
    Ok(SweepReport { bc: spec.bc, data: spec.data, rows, fits, constants })
}

fn series(name: &'static str, response: Response, nu_power: f64, k_power: f64) -> SeriesSpec {
    SeriesSpec { name, response, extremal_l1: false, nu_power, k_power, fit: true, regime: Regime::Any }
}

/// Navier-slip, `L²` data: `(νk²)^{1/3}‖w‖`, `ν^{1/6}|k|^{4/3}‖u‖`,
/// `ν^{2/3}|k|^{1/3}‖w'‖`, `ν^{1/6}|k|^{5/6}‖w‖₁`, `|k|‖(y-λ)w‖`.
pub fn verify_navier_l2(spec: &SweepSpec) -> Result<SweepReport> {
    require_bc(spec, BoundaryCondition::NavierSlip, DataNorm::L2)?;
    run_sweep(
        spec,
        &[
            series("w_l2", Response::Vorticity, -1.0 / 3.0, -2.0 / 3.0),
            series("u_l2", Response::Velocity, -1.0 / 6.0, -4.0 / 3.0),
            series("w_prime_l2", Response::VorticityGradient, -2.0 / 3.0, -1.0 / 3.0),
            SeriesSpec { extremal_l1: true, ..series("w_l1", Response::Vorticity, -1.0 / 6.0, -5.0 / 6.0) },
            SeriesSpec { fit: false, ..series("critical", Response::Critical, 0.0, -1.0) },
        ],
    )
}

/// Navier-slip, divergence data: `(ν k²)^{1/2}‖u‖`, `ν‖w'‖`, `ν^{2/3}|k|^{1/3}‖w‖`.
pub fn verify_navier_hm1(spec: &SweepSpec) -> Result<SweepReport> {
    require_bc(spec, BoundaryCondition::NavierSlip, DataNorm::Hm1)?;
    run_sweep(
        spec,
        &[
            series("w_l2", Response::Vorticity, -2.0 / 3.0, -1.0 / 3.0),
            series("u_l2", Response::Velocity, -0.5, -1.0),
            series("w_prime_l2", Response::VorticityGradient, -1.0, 0.0),
        ],
    )
}

/// Non-slip. `L²` data: `ν^{5/12}|k|^{5/6}‖w‖`, `ν^{1/6}|k|^{5/6}‖w‖₁`
/// for `νk² ≤ 1` and `νk²‖w‖` for `νk² ≥ 1`. Divergence data:
/// `ν^{3/4}|k|^{1/2}‖w‖`, `ν^{2/3}|k|^{1/3}‖ρ_k^{1/2}w‖`, `(νk²)^{1/2}‖u‖`
/// for `νk² ≤ 1` and `νk²‖u‖`, `ν|k|‖w‖` for `νk² ≥ 1`.
pub fn verify_nonslip(spec: &SweepSpec) -> Result<SweepReport> {
    if spec.bc != BoundaryCondition::NonSlip {
        return Err(Error::InvalidParameter("verify_nonslip needs non_slip".into()));
    }
    let small = |s: SeriesSpec| SeriesSpec { regime: Regime::Small, ..s };
    let large = |s: SeriesSpec| SeriesSpec { regime: Regime::Large, ..s };
    let list = match spec.data {
        DataNorm::L2 => vec![
            small(series("w_l2", Response::Vorticity, -5.0 / 12.0, -5.0 / 6.0)),
            small(SeriesSpec { extremal_l1: true, ..series("w_l1", Response::Vorticity, -1.0 / 6.0, -5.0 / 6.0) }),
            large(series("w_l2_viscous", Response::Vorticity, -1.0, -2.0)),
        ],
        DataNorm::Hm1 => vec![
            small(series("w_l2", Response::Vorticity, -0.75, -0.5)),
            small(series("rho_half_w", Response::RhoHalf, -2.0 / 3.0, -1.0 / 3.0)),
            small(series("u_l2", Response::Velocity, -0.5, -1.0)),
            large(series("u_l2_viscous", Response::Velocity, -1.0, -2.0)),
            large(series("w_l2_viscous", Response::Vorticity, -1.0, -1.0)),
        ],
    };
    run_sweep(spec, &list)
}

fn require_bc(spec: &SweepSpec, bc: BoundaryCondition, data: DataNorm) -> Result<()> {
    if spec.bc != bc || spec.data != data {
        return Err(Error::InvalidParameter(format!(
            "sweep must use {} with {} data",
            bc.label(),
            data.label()
        )));
    }
    Ok(())
}

/// Weighted coefficient bounds for the non-slip decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct CBoundSpec {
    pub nu_values: Vec<f64>,
    pub k_values: Vec<i64>,
    pub lambdas: Vec<f64>,
    pub epsilon: f64,
    pub resolution: usize,
}

impl CBoundSpec {
    /// 41 values on `[-2, 2]` plus the windows `|λ ∓ 1| ≤ 1/|k|`.
    pub fn default_lambdas(k_values: &[i64]) -> Vec<f64> {
        let mut l: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        for &k in k_values {
            let h = 1.0 / (k as f64).abs();
            for j in -2..=2 {
                let s = 0.5 * h * j as f64;
                l.push(1.0 + s);
                l.push(-1.0 + s);
            }
        }
        l.sort_by(|a, b| a.total_cmp(b));
        l.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        l
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CBoundRow {
    pub nu: f64,
    pub k: i64,
    pub lambda: f64,
    /// `sup_F |c₁| / ‖F‖₂`.
    pub c1_l2: f64,
    pub c2_l2: f64,
    /// `sup_F ((1+|k(λ-1)|)|c₁| + (1+|k(λ+1)|)|c₂|) / ‖F‖₂ · ν^{1/6}|k|^{5/6}`.
    pub l2_normalized: f64,
    /// `sup_{f₂} ((1+|k(λ-1)|)^{3/4}|c₁| + (1+|k(λ+1)|)^{3/4}|c₂|) / ‖f₂‖₂ · ν^{1/2}|k|^{1/2}`.
    pub hm1_normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CBoundReport {
    pub rows: Vec<CBoundRow>,
    pub l2_constant: f64,
    pub hm1_constant: f64,
}

/// Riesz representers of `F ↦ c₁, c₂` in weighted coordinates, for both data norms.
#[derive(Debug, Clone)]
pub struct CoefficientFunctionals {
    pub l2: [Vec<Complex64>; 2],
    pub hm1: [Vec<Complex64>; 2],
}

pub fn coefficient_functionals(case: &ResolventCase, disc: &Discretization) -> Result<CoefficientFunctionals> {
    let navier = ResolventCase { bc: BoundaryCondition::NavierSlip, ..*case };
    let lu = DenseLu::new(&dirichlet_vorticity_operator(&navier, disc), "coefficient functionals")?;
    let q = disc.grid.quad_weights();
    let sq = sqrt_weights(&disc.grid);
    let k = case.kf();
    let y = disc.nodes();
    let mut l2: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
    let mut hm1: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
    for (idx, sign) in [(0usize, -1.0), (1, 1.0)] {
        // c = Σ q_j g_j w_j with w = A⁻¹ P F, so c = ⟨conj(P A^{-T}(q g)), F⟩
        let g: Vec<Complex64> = y
            .iter()
            .zip(q)
            .map(|(&yj, &qj)| {
                let s = if idx == 0 { resolvent::sinh_ratio(k, yj) } else { resolvent::sinh_ratio(k, -yj) };
                Complex64::new(sign * s * qj, 0.0)
            })
            .collect();
        let mut h: Vec<Complex64> = lu.solve_adjoint(&g)?.into_iter().map(|v| v.conj()).collect();
        zero_ends(&mut h);
        l2[idx] = h.iter().zip(&sq).map(|(v, s)| v / s).collect();
        let dh = apply_real_transpose(&disc.ops.d1, &h);
        hm1[idx] = dh.iter().zip(&sq).map(|(v, s)| -v / s).collect();
    }
    Ok(CoefficientFunctionals { l2, hm1 })
}

/// `sup_{‖x‖=1} α|⟨a₁,x⟩| + β|⟨a₂,x⟩|`.
pub fn weighted_pair_sup(alpha: f64, beta: f64, a1: &[Complex64], a2: &[Complex64]) -> f64 {
    let n1 = linalg::norm(a1);
    let n2 = linalg::norm(a2);
    let cross = linalg::dot(a1, a2).norm();
    (alpha * alpha * n1 * n1 + beta * beta * n2 * n2 + 2.0 * alpha * beta * cross).max(0.0).sqrt()
}

pub fn verify_c_bounds(spec: &CBoundSpec) -> Result<CBoundReport> {
    if spec.resolution == 0 || spec.lambdas.is_empty() {
        return Err(Error::InvalidParameter("c-bound sweep needs lambdas and resolution >= 1".into()));
    }
    let mut rows = Vec::new();
    for &nu in &spec.nu_values {
        for &k in &spec.k_values {
            let base = ResolventCase::new(nu, k, 0.0, spec.epsilon, BoundaryCondition::NonSlip)?;
            let disc = Discretization::new(order_for(&base, spec.resolution)?)?;
            let kf = base.kf().abs();
            for &lambda in &spec.lambdas {
                let case = base.with_lambda(lambda);
                let cf = coefficient_functionals(&case, &disc)?;
                let a = 1.0 + (kf * (lambda - 1.0)).abs();
                let b = 1.0 + (kf * (lambda + 1.0)).abs();
                let l2 = weighted_pair_sup(a, b, &cf.l2[0], &cf.l2[1]);
                let hm1 = weighted_pair_sup(a.powf(0.75), b.powf(0.75), &cf.hm1[0], &cf.hm1[1]);
                rows.push(CBoundRow {
                    nu,
                    k,
                    lambda,
                    c1_l2: linalg::norm(&cf.l2[0]),
                    c2_l2: linalg::norm(&cf.l2[1]),
                    l2_normalized: l2 * nu.powf(1.0 / 6.0) * kf.powf(5.0 / 6.0),
                    hm1_normalized: hm1 * nu.sqrt() * kf.sqrt(),
                });
            }
        }
    }
    let l2_constant = rows.iter().map(|r| r.l2_normalized).fold(0.0, f64::max);
    let hm1_constant = rows.iter().map(|r| r.hm1_normalized).fold(0.0, f64::max);
    Ok(CBoundReport { rows, l2_constant, hm1_constant })
}

/// Sweep of the homogeneous pair.
#[derive(Debug, Clone, PartialEq)]
pub struct W12Spec {
    pub nu_values: Vec<f64>,
    pub k_values: Vec<i64>,
    pub lambdas: Vec<f64>,
    pub epsilon: f64,
    pub resolution: usize,
    pub source: PairSource,
    /// Also build the other source and compare.
    pub cross_check: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct W12Row {
    pub nu: f64,
    pub k: i64,
    pub lambda: f64,
    pub order: usize,
    pub w1_linf: f64,
    pub w2_linf: f64,
    pub l1_sum: f64,
    pub rho_half_sum: f64,
    pub w1_rho_neg_quarter: f64,
    pub w2_rho_neg_quarter: f64,
    /// `‖w₁‖∞ / (ν^{-1/2}(1+|k||λ-1|)^{1/2})`.
    pub w1_linf_normalized: f64,
    pub w2_linf_normalized: f64,
    /// `(‖ρ^{1/2}w₁‖ + ‖ρ^{1/2}w₂‖) / L^{1/2}`.
    pub rho_half_normalized: f64,
    /// `‖ρ^{-1/4}w₁‖ / (ν^{-7/24}|k|^{-1/12}(1+|k(λ-1)|)^{3/8})`.
    pub w1_rho_neg_quarter_normalized: f64,
    pub w2_rho_neg_quarter_normalized: f64,
    /// `|C_ij| |A₀(L d + iε)| / (L e^{-2k})` and its three companions, Airy source only.
    pub c_ij_normalized: Option<[f64; 4]>,
    /// Relative `L²` distance between the Airy and BVP pairs.
    pub cross_w1: Option<f64>,
    pub cross_w2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct W12Report {
    pub rows: Vec<W12Row>,
    pub l1_constant: f64,
    pub linf_constant: f64,
    pub rho_half_constant: f64,
    pub rho_neg_quarter_constant: f64,
    pub c_ij_constant: Option<f64>,
    pub worst_cross: Option<f64>,
}

/// Relative `L²` distance.
pub fn relative_distance(grid: &ChebGrid, a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    grid.l2_norm(&d) / grid.l2_norm(b).max(f64::MIN_POSITIVE)
}

fn build_pair(case: &ResolventCase, disc: &Discretization, source: PairSource) -> Result<HomogeneousPair> {
    match source {
        PairSource::Airy => resolvent::homogeneous_airy(case, disc),
        PairSource::BoundaryValueProblem => resolvent::homogeneous_bvp(case, disc),
    }
}

/// `|C_ij| |A₀(·)| / (L e^{-2|k|})` or `/ L` as the four coefficient bounds read.
fn c_ij_ratios(case: &ResolventCase, pair: &HomogeneousPair) -> Result<Option<[f64; 4]>> {
    let Some(c) = pair.airy else { return Ok(None) };
    let l = case.boundary_scale();
    let ka = case.kf().abs();
    let d = Complex64::new(-1.0 - case.lambda, -ka * case.nu);
    let dt = Complex64::new(-1.0 + case.lambda, -ka * case.nu);
    let a_d = airy::a0(d * l + Complex64::new(0.0, case.epsilon))?.a0;
    let a_dt = airy::a0(dt * l + Complex64::new(0.0, case.epsilon))?.a0;
    let ln_l = l.ln();
    let r = |cij: airy::Scaled, a: airy::Scaled, decay: bool| {
        let ln = cij.ln_abs() + a.ln_abs() - ln_l + if decay { 2.0 * ka } else { 0.0 };
        ln.exp()
    };
    Ok(Some([
        r(c.c11, a_d, true),
        r(c.c12, a_dt, false),
        r(c.c21, a_d, false),
        r(c.c22, a_dt, true),
    ]))
}

pub fn verify_w12_bounds(spec: &W12Spec) -> Result<W12Report> {
    if spec.resolution == 0 || spec.lambdas.is_empty() {
        return Err(Error::InvalidParameter("w12 sweep needs lambdas and resolution >= 1".into()));
    }
    let mut rows = Vec::new();
    for &nu in &spec.nu_values {
        for &k in &spec.k_values {
            let base = ResolventCase::new(nu, k, 0.0, spec.epsilon, BoundaryCondition::NonSlip)?;
            let order = order_for(&base, spec.resolution)?;
            let disc = Discretization::new(order)?;
            let l = base.boundary_scale();
            let kf = base.kf().abs();
            for &lambda in &spec.lambdas {
                let case = base.with_lambda(lambda);
                let pair = build_pair(&case, &disc, spec.source)?;
                let (cross_w1, cross_w2) = if spec.cross_check {
                    let other = match spec.source {
                        PairSource::Airy => PairSource::BoundaryValueProblem,
                        PairSource::BoundaryValueProblem => PairSource::Airy,
                    };
                    let alt = build_pair(&case, &disc, other)?;
                    (
                        Some(relative_distance(&disc.grid, &pair.w1, &alt.w1)),
                        Some(relative_distance(&disc.grid, &pair.w2, &alt.w2)),
                    )
                } else {
                    (None, None)
                };
                let g = &disc.grid;
                let linf = |w: &[Complex64]| w.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let p1 = PanelValues::new(g, &pair.w1, l)?;
                let p2 = PanelValues::new(g, &pair.w2, l)?;
                let rho = WeightKind::RhoK { l };
                let w1_linf = linf(&pair.w1);
                let w2_linf = linf(&pair.w2);
                let rh1 = p1.square(|y| rho.eval(y)).sqrt();
                let rh2 = p2.square(|y| rho.eval(y)).sqrt();
                let rq1 = p1.square(|y| rho.eval(y).powf(-0.5)).sqrt();
                let rq2 = p2.square(|y| rho.eval(y).powf(-0.5)).sqrt();
                let a = 1.0 + kf * (lambda - 1.0).abs();
                let b = 1.0 + kf * (lambda + 1.0).abs();
                let qscale = nu.powf(-7.0 / 24.0) * kf.powf(-1.0 / 12.0);
                rows.push(W12Row {
                    nu,
                    k,
                    lambda,
                    order,
                    w1_linf,
                    w2_linf,
                    l1_sum: p1.abs() + p2.abs(),
                    rho_half_sum: rh1 + rh2,
                    w1_rho_neg_quarter: rq1,
                    w2_rho_neg_quarter: rq2,
                    w1_linf_normalized: w1_linf * nu.sqrt() / a.sqrt(),
                    w2_linf_normalized: w2_linf * nu.sqrt() / b.sqrt(),
                    rho_half_normalized: (rh1 + rh2) / l.sqrt(),
                    w1_rho_neg_quarter_normalized: rq1 / (qscale * a.powf(0.375)),
                    w2_rho_neg_quarter_normalized: rq2 / (qscale * b.powf(0.375)),
                    c_ij_normalized: c_ij_ratios(&case, &pair)?,
                    cross_w1,
                    cross_w2,
                });
            }
        }
    }
    let max = |f: &dyn Fn(&W12Row) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let c_ij: Vec<f64> = rows.iter().filter_map(|r| r.c_ij_normalized).flatten().collect();
    let cross: Vec<f64> = rows.iter().flat_map(|r| [r.cross_w1, r.cross_w2]).flatten().collect();
    Ok(W12Report {
        l1_constant: max(&|r| r.l1_sum),
        linf_constant: max(&|r| r.w1_linf_normalized.max(r.w2_linf_normalized)),
        rho_half_constant: max(&|r| r.rho_half_normalized),
        rho_neg_quarter_constant: max(&|r| r.w1_rho_neg_quarter_normalized.max(r.w2_rho_neg_quarter_normalized)),
        c_ij_constant: if c_ij.is_empty() { None } else { Some(c_ij.iter().copied().fold(0.0, f64::max)) },
        worst_cross: if cross.is_empty() { None } else { Some(cross.iter().copied().fold(0.0, f64::max)) },
        rows,
    })
}

/// `max |w₂(y; λ) + conj(w₁(-y; -λ))| / ‖w₂‖∞` on the symmetric nodes.
pub fn mirror_defect(case: &ResolventCase, disc: &Discretization, source: PairSource) -> Result<f64> {
    let pair = build_pair(case, disc, source)?;
    let mirror = build_pair(&case.with_lambda(-case.lambda), disc, source)?;
    let n = disc.order();
    let scale = pair.w2.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let worst = (0..=n)
        .map(|j| (pair.w2[j] + mirror.w1[n - j].conj()).norm())
        .fold(0.0, f64::max);
    Ok(worst / scale)
}

/// Spectrum of the discrete operator and the derived gap quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGapReport {
    /// Eigenvalues `μ` of `L_k` (solutions decay like `e^{-μ t}`).
    pub eigenvalues: Vec<Complex64>,
    /// `min Re μ`.
    pub gap: f64,
    /// `inf_λ σ_min(L_k - ikλ)`, Navier-slip only.
    pub psi: Option<f64>,
    /// Smallest real shift `a` with `min_λ σ_min(L_k - a - ikλ) ≤ η`.
    pub pseudo_abscissa: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub psi: bool,
    pub pseudo_eta: Option<f64>,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { psi: true, pseudo_eta: None }
    }
}

/// Interior operator with the boundary unknowns eliminated: Dirichlet
/// for Navier-slip, the two moment conditions for non-slip.
pub fn reduced_operator(case: &ResolventCase, disc: &Discretization) -> Result<CMat> {
    let full = resolvent::interior_operator(case, disc);
    let n = disc.order();
    let m = n - 1;
    let mut a = CMat::from_fn(m, m, |i, j| full[(i + 1, j + 1)]);
    if case.bc == BoundaryCondition::NonSlip {
        let (plus, minus) = resolvent::moment_rows(case.kf(), disc);
        // boundary values b = -M_B⁻¹ M_I x_I
        let mb = [[plus[0], plus[n]], [minus[0], minus[n]]];
        let mut coef = vec![[zero(); 2]; m];
        for (j, c) in coef.iter_mut().enumerate() {
            let s = linalg::solve_small(mb, [plus[j + 1], minus[j + 1]])?;
            *c = [-s[0], -s[1]];
        }
        for i in 0..m {
            let (l0, ln) = (full[(i + 1, 0)], full[(i + 1, n)]);
            for (j, c) in coef.iter().enumerate() {
                a[(i, j)] += l0 * c[0] + ln * c[1];
            }
        }
    }
    Ok(a)
}

fn min_singular_scan(case: &ResolventCase, disc: &Discretization, extra: &[f64]) -> Result<f64> {
    let elliptic = EllipticSolver::new(case.kf(), disc)?;
    let (_, sup) = sup_over_lambda(
        |l| Ok(ResolventMap::new(&case.with_lambda(l), disc, &elliptic)?.norm(DataNorm::L2, Response::Vorticity)?.value),
        &default_lambda_grid(),
        extra,
    )?;
    Ok(1.0 / sup)
}

pub fn spectrum(case: &ResolventCase, disc: &Discretization, options: SpectrumOptions) -> Result<SpectralGapReport> {
    let a = reduced_operator(case, disc)?;
    let mut eigenvalues = linalg::eigenvalues(&a)?;
    eigenvalues.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let gap = eigenvalues.first().map(|e| e.re).ok_or_else(|| Error::Decomposition("empty spectrum".into()))?;
    let k = case.kf();
    // shifts through the least-damped eigenvalues
    let extra: Vec<f64> = eigenvalues.iter().take(3).map(|e| case.lambda + e.im / k).collect();
    let psi = if options.psi && case.bc == BoundaryCondition::NavierSlip {
        Some(min_singular_scan(case, disc, &extra)?)
    } else {
        None
    };
    let pseudo_abscissa = match options.pseudo_eta {
        Some(eta) => Some(pseudo_abscissa(case, disc, eta, gap, &extra)?),
        None => None,
    };
    Ok(SpectralGapReport { eigenvalues, gap, psi, pseudo_abscissa })
}

fn pseudo_abscissa(case: &ResolventCase, disc: &Discretization, eta: f64, gap: f64, extra: &[f64]) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("pseudospectral level must be positive".into()));
    }
    let grid: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
    let sigma_min = |a: f64| -> Result<f64> {
        let shifted = ResolventCase { epsilon: 0.0, ..*case };
        let elliptic = EllipticSolver::new(case.kf(), disc)?;
        let mut best = f64::INFINITY;
        for &l in grid.iter().chain(extra) {
            let mut op = reduced_operator(&shifted.with_lambda(l), disc)?;
            for i in 0..op.nrows() {
                op[(i, i)] -= Complex64::new(a, 0.0);
            }
            let _ = &elliptic;
            let sq: Vec<f64> = sqrt_weights(&disc.grid)[1..disc.order()].to_vec();
            let weighted = CMat::from_fn(op.nrows(), op.ncols(), |i, j| op[(i, j)] * sq[i] / sq[j]);
            best = best.min(resolvent::smallest_singular_value(&weighted)?);
        }
        Ok(best)
    };
    if sigma_min(0.0)? <= eta {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, gap.max(0.0));
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if sigma_min(mid)? <= eta {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-6 * gap.abs().max(1e-12) {
            break;
        }
    }
    Ok(hi)
}

/// Pairing `⟨w, f⟩` against the weak-type majorant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakPairing {
    pub pairing: Complex64,
    pub majorant: f64,
    pub ratio: f64,
}

/// `|⟨w, f⟩|` for the Navier-slip solution with data `-∂_y f₂`, against
/// `|k|⁻¹‖f₂‖(δ^{-3/2}‖f‖_{L∞(layer)} + |f(j)|(|j-λ|+δ)^{-3/4}δ^{-3/4} + ‖fχ‖_{H¹} + δ⁻¹‖fχ‖)`.
/// `endpoint` is `j ∈ {1, -1}` with `f(-j) = 0`.
pub fn weak_resolvent_pairing(
    case: &ResolventCase,
    disc: &Discretization,
    f2: &[Complex64],
    f: &[Complex64],
    endpoint: i32,
) -> Result<WeakPairing> {
    if case.bc != BoundaryCondition::NavierSlip {
        return Err(Error::InvalidParameter("weak pairing needs navier_slip".into()));
    }
    if endpoint != 1 && endpoint != -1 {
        return Err(Error::InvalidParameter("endpoint must be 1 or -1".into()));
    }
    let n = disc.order();
    let zeros = vec![zero(); disc.len()];
    let sol = resolvent::solve_navier(case, &Forcing::Pair { f1: zeros, f2: f2.to_vec() }, disc)?;
    let pairing = disc.grid.inner(&sol.w, f)?;
    let delta = case.critical_width();
    let lambda = case.lambda;
    let y = disc.nodes();
    let layer = y
        .iter()
        .zip(f)
        .filter(|(&yy, _)| (yy - lambda).abs() < delta)
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max);
    let fj = if endpoint == 1 { f[0] } else { f[n] };
    let j = endpoint as f64;
    let chi = WeightKind::CutoffChi { lambda, delta };
    chi.validate()?;
    let chi_prime = |yy: f64| {
        let s = yy - lambda;
        if s.abs() >= delta {
            -1.0 / (s * s)
        } else {
            2.0 / (delta * delta) - 3.0 * s * s / (delta * delta * delta * delta)
        }
    };
    let fchi: Vec<Complex64> = f.iter().zip(y).map(|(v, &yy)| v * chi.eval(yy)).collect();
    let df = apply_real(&disc.ops.d1, f);
    let dfchi: Vec<Complex64> = df
        .iter()
        .zip(f.iter().zip(y))
        .map(|(d, (v, &yy))| d * chi.eval(yy) + v * chi_prime(yy))
        .collect();
    let l2 = disc.grid.l2_norm(&fchi);
    let h1 = (l2 * l2 + disc.grid.l2_norm(&dfchi).powi(2)).sqrt();
    let f2_norm = disc.grid.l2_norm(f2);
    let majorant = f2_norm / case.kf().abs()
        * (delta.powf(-1.5) * layer
            + fj.norm() * ((j - lambda).abs() + delta).powf(-0.75) * delta.powf(-0.75)
            + h1
            + l2 / delta);
    let ratio = if majorant > 0.0 { pairing.norm() / majorant } else { 0.0 };
    Ok(WeakPairing { pairing, majorant, ratio })
}

/// `Re⟨F, w⟩` against `ν‖w'‖² + (νk² - s)‖w‖²` for a Navier-slip solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_defect: f64,
}

pub fn energy_identity(
    case: &ResolventCase,
    forcing: &[Complex64],
    solution: &ResolventSolution,
    disc: &Discretization,
) -> Result<EnergyCheck> {
    let g = &disc.grid;
    let lhs = g.inner(forcing, &solution.w)?.re;
    let k = case.kf();
    let wp = g.l2_norm(&apply_real(&disc.ops.d1, &solution.w));
    let w2 = g.l2_norm(&solution.w).powi(2);
    let rhs = case.nu * wp * wp + (case.nu * k * k - case.shift()) * w2;
    Ok(EnergyCheck { lhs, rhs, relative_defect: (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE) })
}

/// `(‖φ'‖∞ + |k|‖φ‖∞)` divided by `‖w‖₁` and by `|k|^{-1/2}‖w‖₂`.
pub fn elliptic_ratios(solution: &ResolventSolution, k: f64, disc: &Discretization, l: f64) -> Result<(f64, f64)> {
    let linf = |v: &[Complex64]| v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let dphi = apply_real(&disc.ops.d1, &solution.phi);
    let lhs = linf(&dphi) + k.abs() * linf(&solution.phi);
    let l1 = l1_norm(&disc.grid, &solution.w, l)?;
    let l2 = disc.grid.l2_norm(&solution.w);
    Ok((lhs / l1, lhs / (l2 / k.abs().sqrt())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolvent::{solve_navier, solve_nonslip, NonslipPath};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn norms_of_simple_fields() {
        let disc = Discretization::new(64).unwrap();
        let case = ResolventCase::new(1e-3, 1, 0.0, 0.0, BoundaryCondition::NavierSlip).unwrap();
        let zero_sol = solve_navier(&case, &Forcing::zero(&disc), &disc).unwrap();
        let nb = norms(&zero_sol, &case, &disc).unwrap();
        assert!(nb.fields().iter().all(|(_, v)| *v == 0.0));
        let ones = vec![c(1.0); disc.len()];
        let sol = ResolventSolution {
            w: ones.clone(),
            phi: vec![c(0.0); disc.len()],
            u1: vec![c(0.0); disc.len()],
            u2: vec![c(0.0); disc.len()],
            decomposition: None,
            norms: None,
        };
        let nb = norms(&sol, &case, &disc).unwrap();
        assert!((nb.critical - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((nb.boundary_weight - 1.0).abs() < 1e-10);
        assert!((nb.l1 - 2.0).abs() < 1e-12);
        assert!(nb.l2 <= 2f64.sqrt() * nb.linf + 1e-14);
        assert!(nb.rho_half <= nb.l2 + 1e-12);
        // ∫ ρ^{-1/2} = 2(1 - 1/L) + 4/L for L = 10
        let l = case.boundary_scale();
        let expect = (2.0 * (1.0 - 1.0 / l) + 4.0 / l).sqrt();
        assert!((nb.rho_neg_quarter - expect).abs() < 1e-8, "{} vs {expect}", nb.rho_neg_quarter);
    }

    #[test]
    fn fit_recovers_power_law() {
        let xs = [1e-3, 1e-4, 1e-5, 1e-6];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.0 / 3.0)).collect();
        let f = fit_power_law("w", "nu", &xs, &ys, -1.0 / 3.0, 0.05).unwrap();
        assert!((f.exponent + 1.0 / 3.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12 && f.pass);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit_power_law("w", "nu", &[1.0], &[1.0], 0.0, 0.05).is_err());
        assert!(fit_power_law("w", "nu", &[1.0, 2.0], &[1.0, -1.0], 0.0, 0.05).is_err());
    }

    #[test]
    fn sweep_spec_decades() {
        let mut s = SweepSpec::new(vec![1e-3], vec![1], DataNorm::L2, BoundaryCondition::NavierSlip);
        assert!(s.validate().is_ok());
        let e = s.validate_for_fit().unwrap_err();
        assert!(e.to_string().contains("exponent fit requires ≥ 2 decades"));
        s.nu_values = vec![1e-3, 1e-5];
        assert!(s.validate_for_fit().is_ok());
        s.nu_values = vec![-1.0];
        assert!(s.validate().unwrap_err().to_string().contains("nu must be positive"));
    }

    #[test]
    fn golden_section_finds_peak() {
        let grid = default_lambda_grid();
        let (l, v) = sup_over_lambda(|x| Ok(1.0 / (1e-2 + (x - 0.3137).powi(2))), &grid, &[]).unwrap();
        assert!((l - 0.3137).abs() < 1e-3 && v > 99.0);
    }

    fn dense_map(map: &ResolventMap, data: DataNorm, response: Response) -> CMat {
        let n = map.dim();
        let cols: Vec<Vec<Complex64>> = (0..n)
            .map(|j| {
                let mut e = vec![c(0.0); n];
                e[j] = c(1.0);
                let w = map.vorticity(data, &e).unwrap();
                map.respond(response, &w).unwrap()
            })
            .collect();
        CMat::from_fn(cols[0].len(), n, |i, j| cols[j][i])
    }

    #[test]
    fn lanczos_norm_matches_dense_and_adjoint_is_consistent() {
        let disc = Discretization::new(40).unwrap();
        for bc in [BoundaryCondition::NavierSlip, BoundaryCondition::NonSlip] {
            let case = ResolventCase::new(1e-2, 2, 0.3, 0.0, bc).unwrap();
            let el = EllipticSolver::new(2.0, &disc).unwrap();
            let map = ResolventMap::new(&case, &disc, &el).unwrap();
            for data in [DataNorm::L2, DataNorm::Hm1] {
                for resp in [Response::Vorticity, Response::Velocity, Response::VorticityGradient, Response::RhoHalf] {
                    let m = dense_map(&map, data, resp);
                    let dense = linalg::singular_values(&m).unwrap()[0];
                    let lz = map.norm(data, resp).unwrap().value;
                    assert!((dense - lz).abs() < 1e-8 * dense, "{bc:?} {data:?} {resp:?}: {dense} vs {lz}");
                    // ⟨M x, y⟩ = ⟨x, M^H y⟩
                    let x: Vec<Complex64> = (0..disc.len()).map(|j| Complex64::new((j as f64).sin(), 0.3)).collect();
                    let yv: Vec<Complex64> =
                        (0..m.nrows()).map(|j| Complex64::new(0.2, (1.3 * j as f64).cos())).collect();
                    let mx = map.respond(resp, &map.vorticity(data, &x).unwrap()).unwrap();
                    let mhy = map.vorticity_adjoint(data, &map.respond_adjoint(resp, &yv).unwrap()).unwrap();
                    let lhs = linalg::dot(&yv, &mx);
                    let rhs = linalg::dot(&mhy, &x);
                    assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn coefficient_functionals_reproduce_c() {
        let disc = Discretization::new(64).unwrap();
        let case = ResolventCase::new(1e-3, 2, 0.4, 0.0, BoundaryCondition::NonSlip).unwrap();
        let cf = coefficient_functionals(&case, &disc).unwrap();
        let f: Vec<Complex64> = disc.nodes().iter().map(|&y| Complex64::new(y.cos(), y)).collect();
        let sol = solve_nonslip(&case, &Forcing::Direct(f.clone()), &disc, NonslipPath::Decomposed(PairSource::BoundaryValueProblem))
            .unwrap();
        let dec = sol.decomposition.unwrap();
        let sq = sqrt_weights(&disc.grid);
        let x: Vec<Complex64> = f.iter().zip(&sq).map(|(v, s)| v * s).collect();
        let c1: Complex64 = cf.l2[0].iter().zip(&x).map(|(a, b)| a * b).sum();
        let c2: Complex64 = cf.l2[1].iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((c1 - dec.c1).norm() < 1e-10 * dec.c1.norm().max(1e-3));
        assert!((c2 - dec.c2).norm() < 1e-10 * dec.c2.norm().max(1e-3));
    }

    #[test]
    fn pair_sup_closed_form() {
        let a1 = vec![c(1.0), c(0.0)];
        let a2 = vec![c(0.0), c(1.0)];
        assert!((weighted_pair_sup(3.0, 4.0, &a1, &a2) - 5.0).abs() < 1e-14);
        assert!((weighted_pair_sup(3.0, 4.0, &a1, &a1) - 7.0).abs() < 1e-14);
    }

    #[test]
    fn energy_identity_holds() {
        let disc = Discretization::new(96).unwrap();
        for eps in [0.0, 0.02] {
            let case = ResolventCase::new(1e-3, 1, 0.2, eps, BoundaryCondition::NavierSlip).unwrap();
            let f: Vec<Complex64> = disc.nodes().iter().map(|&y| Complex64::new(1.0 - y * y, y)).collect();
            let sol = solve_navier(&case, &Forcing::Direct(f.clone()), &disc).unwrap();
            let e = energy_identity(&case, &f, &sol, &disc).unwrap();
            assert!(e.relative_defect < 1e-8, "{e:?}");
        }
    }

    #[test]
    fn navier_gap_and_psi() {
        let case = ResolventCase::new(1e-2, 1, 0.0, 0.0, BoundaryCondition::NavierSlip).unwrap();
        let disc = Discretization::new(64).unwrap();
        let rep = spectrum(&case, &disc, SpectrumOptions::default()).unwrap();
        let psi = rep.psi.unwrap();
        assert!(psi > 0.0 && psi <= rep.gap + 1e-8, "psi {psi}, gap {}", rep.gap);
        // accretive: the gap is at least ν k²
        assert!(rep.gap >= case.nu - 1e-12);
    }

    #[test]
    fn pseudo_abscissa_lies_below_gap() {
        let case = ResolventCase::new(1e-2, 1, 0.0, 0.0, BoundaryCondition::NavierSlip).unwrap();
        let disc = Discretization::new(32).unwrap();
        let opts = SpectrumOptions { psi: false, pseudo_eta: Some(1e-3) };
        let rep = spectrum(&case, &disc, opts).unwrap();
        let a = rep.pseudo_abscissa.unwrap();
        assert!(a > 0.0 && a <= rep.gap + 1e-9);
    }

    #[test]
    fn elliptic_bounds_are_moderate() {
        let disc = Discretization::new(64).unwrap();
        let case = ResolventCase::new(1e-3, 2, 0.1, 0.0, BoundaryCondition::NavierSlip).unwrap();
        let f = Forcing::from_fn(&disc, |y| Complex64::new(y.exp(), 0.0));
        let sol = solve_navier(&case, &f, &disc).unwrap();
        let (r1, r2) = elliptic_ratios(&sol, 2.0, &disc, case.boundary_scale()).unwrap();
        assert!(r1 < 2.0 && r2 < 4.0, "{r1} {r2}");
    }

    #[test]
    fn weak_pairing_zero_test_function() {
        let disc = Discretization::new(64).unwrap();
        let case = ResolventCase::new(1e-3, 1, 0.1, 0.0, BoundaryCondition::NavierSlip).unwrap();
        let f2 = Forcing::from_fn(&disc, |y| c((std::f64::consts::FRAC_PI_2 * y).cos()));
        let Forcing::Direct(f2) = f2 else { unreachable!() };
        let zero_f = vec![c(0.0); disc.len()];
        let p = weak_resolvent_pairing(&case, &disc, &f2, &zero_f, 1).unwrap();
        assert_eq!(p.pairing, c(0.0));
    }
}

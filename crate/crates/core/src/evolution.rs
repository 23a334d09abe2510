//! Crank–Nicolson integration of `∂_t ω + L_k ω = -ik f₁ - ∂_y f₂` with
//! Navier-slip or non-slip (moment) boundary conditions, space-time norm
//! ledgers and the homogeneous splitting.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimates::{fit_power_law, ScalingFit};
use crate::linalg::{self, CMat, DenseLu};
use crate::resolvent::{moment_rows, BoundaryCondition, Discretization, EllipticSolver, Forcing};
use crate::spectral::{apply_real, grid_order_for, WeightKind};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Largest step allowed by the accuracy rule `0.1·min(1/|k|, ν^{-1/3}|k|^{-2/3})`.
pub fn max_dt(nu: f64, k: i64) -> f64 {
    let ka = (k as f64).abs();
    0.1 * (1.0 / ka).min(nu.powf(-1.0 / 3.0) * ka.powf(-2.0 / 3.0))
}

/// Relative tolerance on the initial moments.
pub const MOMENT_TOL: f64 = 1e-8;
/// Unforced runs continue until `‖ω‖ ≤ DECAY_TARGET ‖ω₀‖`.
pub const DECAY_TARGET: f64 = 1e-4;
/// Hard cap on auto-extension, in multiples of `t_end`.
const EXTENSION_CAP: f64 = 50.0;

/// Time dependence of a separable forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeProfile {
    Constant,
    /// `e^{-rate·t}`.
    Exponential { rate: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Exponential { rate } => (-rate * t).exp(),
        }
    }
}

/// `(f₁, f₂)(t, y) = p(t)·(f₁, f₂)(y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum EvolutionForcing {
    Zero,
    Separable { f1: Vec<Complex64>, f2: Vec<Complex64>, profile: TimeProfile },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionCase {
    pub nu: f64,
    pub k: i64,
    pub omega0: Vec<Complex64>,
    pub forcing: EvolutionForcing,
    pub dt: f64,
    pub t_end: f64,
    pub bc: BoundaryCondition,
    pub order: usize,
}

/// `e^{-|k|} |∫ e^{±|k|y} ω| / (‖ω‖₁)`, the larger of the two.
pub fn relative_moment_defect(omega: &[Complex64], k: f64, disc: &Discretization) -> f64 {
    let (plus, minus) = moment_rows(k, disc);
    let m = |r: &[Complex64]| r.iter().zip(omega).map(|(a, b)| a * b).sum::<Complex64>().norm();
    let l1: f64 = omega.iter().zip(disc.grid.quad_weights()).map(|(v, w)| v.norm() * w).sum();
    if l1 == 0.0 {
        return 0.0;
    }
    m(&plus).max(m(&minus)) / l1
}

impl EvolutionCase {
    /// Unforced case; the grid order is read off `omega0`.
    pub fn new(nu: f64, k: i64, omega0: Vec<Complex64>, dt: f64, t_end: f64, bc: BoundaryCondition) -> Result<Self> {
        if omega0.len() < 5 {
            return Err(Error::GridTooSmall(omega0.len().saturating_sub(1)));
        }
        let order = omega0.len() - 1;
        let case = Self { nu, k, omega0, forcing: EvolutionForcing::Zero, dt, t_end, bc, order };
        case.validate()?;
        Ok(case)
    }

    pub fn with_forcing(mut self, forcing: EvolutionForcing) -> Result<Self> {
        self.forcing = forcing;
        self.validate()?;
        Ok(self)
    }

    pub fn kf(&self) -> f64 {
        self.k as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::InvalidParameter("nu must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("|k| must be at least 1".into()));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::InvalidParameter("dt and t_end must be positive".into()));
        }
        let limit = max_dt(self.nu, self.k);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("dt = {} exceeds the accuracy limit {limit}", self.dt)));
        }
        if self.omega0.len() != self.order + 1 {
            return Err(Error::LengthMismatch { expected: self.order + 1, got: self.omega0.len() });
        }
        if let EvolutionForcing::Separable { f1, f2, .. } = &self.forcing {
            for f in [f1, f2] {
                if f.len() != self.order + 1 {
                    return Err(Error::LengthMismatch { expected: self.order + 1, got: f.len() });
                }
            }
        }
        if self.bc == BoundaryCondition::NonSlip {
            let disc = Discretization::new(self.order)?;
            let defect = relative_moment_defect(&self.omega0, self.kf(), &disc);
            if defect > MOMENT_TOL {
                return Err(Error::InvalidParameter(format!(
                    "initial vorticity violates the moment conditions (relative defect {defect:e})"
                )));
            }
        }
        Ok(())
    }
}

/// Vorticity `(∂_y² - k²)[(1 - y²)² g]` on the nodes; it satisfies the
/// moment conditions for any smooth `g`.
pub fn moment_compatible_vorticity(disc: &Discretization, k: f64, g: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let phi: Vec<Complex64> = disc.nodes().iter().map(|&y| (1.0 - y * y).powi(2) * g(y)).collect();
    apply_real(&disc.ops.d2, &phi).into_iter().zip(&phi).map(|(a, p)| a - p * k * k).collect()
}

/// `-ν(D2 - k²) + iky` applied on every node.
fn apply_lk(nu: f64, k: f64, disc: &Discretization, w: &[Complex64]) -> Vec<Complex64> {
    apply_real(&disc.ops.d2, w)
        .into_iter()
        .zip(w.iter().zip(disc.nodes()))
        .map(|(d2w, (v, &y))| -nu * d2w + v * Complex64::new(nu * k * k, k * y))
        .collect()
}

/// Factored Crank–Nicolson step with influence-matrix boundary enforcement.
pub struct CrankNicolson<'a> {
    nu: f64,
    k: f64,
    dt: f64,
    bc: BoundaryCondition,
    disc: &'a Discretization,
    lu: DenseLu,
    /// Responses to unit boundary data at `y = 1` and `y = -1`.
    responses: [Vec<Complex64>; 2],
    moments: (Vec<Complex64>, Vec<Complex64>),
    influence: [[Complex64; 2]; 2],
}

impl std::fmt::Debug for CrankNicolson<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CrankNicolson").field("nu", &self.nu).field("k", &self.k).field("dt", &self.dt).finish()
    }
}

fn row_dot(r: &[Complex64], w: &[Complex64]) -> Complex64 {
    r.iter().zip(w).map(|(a, b)| a * b).sum()
}

impl<'a> CrankNicolson<'a> {
    pub fn new(nu: f64, k: i64, dt: f64, bc: BoundaryCondition, disc: &'a Discretization) -> Result<Self> {
        let kf = k as f64;
        let n = disc.order();
        let y = disc.nodes();
        let d2 = &disc.ops.d2;
        let h = 0.5 * dt;
        let m = CMat::from_fn(n + 1, n + 1, |i, j| {
            if i == 0 || i == n {
                return Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0);
            }
            let mut v = Complex64::new(-h * nu * d2[(i, j)], 0.0);
            if i == j {
                v += Complex64::new(1.0 + h * nu * kf * kf, h * kf * y[i]);
            }
            v
        });
        let lu = DenseLu::new(&m, format!("Crank-Nicolson matrix at nu = {nu}, k = {k}, dt = {dt}"))?;
        let mut e0 = vec![zero(); n + 1];
        e0[0] = Complex64::new(1.0, 0.0);
        let mut en = vec![zero(); n + 1];
        en[n] = Complex64::new(1.0, 0.0);
        let responses = [lu.solve(&e0)?, lu.solve(&en)?];
        let moments = moment_rows(kf, disc);
        let influence = [
            [row_dot(&moments.0, &responses[0]), row_dot(&moments.0, &responses[1])],
            [row_dot(&moments.1, &responses[0]), row_dot(&moments.1, &responses[1])],
        ];
        if bc == BoundaryCondition::NonSlip {
            // fail early on a singular influence matrix
            linalg::solve_small(influence, [Complex64::new(1.0, 0.0), zero()]).map_err(|e| {
                Error::SolveFailed(format!("influence matrix at nu = {nu}, k = {k}, dt = {dt}: {e}"))
            })?;
        }
        Ok(Self { nu, k: kf, dt, bc, disc, lu, responses, moments, influence })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Scaled moments `e^{-|k|} ∫ e^{±|k|y} ω`.
    pub fn moments_of(&self, w: &[Complex64]) -> [Complex64; 2] {
        [row_dot(&self.moments.0, w), row_dot(&self.moments.1, w)]
    }

    /// One step. `forcing` is the step average of the right-hand side;
    /// `targets` are the scaled moments imposed at the new time (non-slip).
    pub fn advance(&self, w: &[Complex64], forcing: Option<&[Complex64]>, targets: [Complex64; 2]) -> Result<Vec<Complex64>> {
        self.advance_with(Scheme::CrankNicolson, w, forcing, targets)
    }

    /// Backward-Euler step of length `dt/2`, sharing the factorization.
    pub fn advance_euler_half(
        &self,
        w: &[Complex64],
        forcing: Option<&[Complex64]>,
        targets: [Complex64; 2],
    ) -> Result<Vec<Complex64>> {
        self.advance_with(Scheme::EulerHalf, w, forcing, targets)
    }

    fn advance_with(
        &self,
        scheme: Scheme,
        w: &[Complex64],
        forcing: Option<&[Complex64]>,
        targets: [Complex64; 2],
    ) -> Result<Vec<Complex64>> {
        let n = self.disc.order();
        let mut rhs = match scheme {
            Scheme::CrankNicolson => {
                let lw = apply_lk(self.nu, self.k, self.disc, w);
                w.iter().zip(&lw).map(|(a, b)| a - 0.5 * self.dt * b).collect()
            }
            Scheme::EulerHalf => w.to_vec(),
        };
        if let Some(f) = forcing {
            let h = scheme.length(self.dt);
            for (r, g) in rhs.iter_mut().zip(f) {
                *r += h * g;
            }
        }
        rhs[0] = zero();
        rhs[n] = zero();
        let mut next = self.lu.solve(&rhs)?;
        if self.bc == BoundaryCondition::NonSlip {
            let m = self.moments_of(&next);
            let ab = linalg::solve_small(self.influence, [targets[0] - m[0], targets[1] - m[1]])?;
            for ((v, r0), rn) in next.iter_mut().zip(&self.responses[0]).zip(&self.responses[1]) {
                *v += ab[0] * r0 + ab[1] * rn;
            }
        }
        Ok(next)
    }
}

/// Step type; both share the matrix `I + (dt/2) L_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scheme {
    CrankNicolson,
    EulerHalf,
}

impl Scheme {
    fn length(&self, dt: f64) -> f64 {
        match self {
            Scheme::CrankNicolson => dt,
            Scheme::EulerHalf => 0.5 * dt,
        }
    }
}

/// Full steps replaced by two backward-Euler half steps each at the start,
/// damping the stiff modes excited by incompatible initial data.
pub const STARTUP_STEPS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub time: f64,
    pub omega: Vec<Complex64>,
}

fn step_checked(
    cn: &CrankNicolson,
    state: &EvolutionState,
    forcing: Option<&[Complex64]>,
    bc: BoundaryCondition,
) -> Result<EvolutionState> {
    if cn.bc != bc {
        return Err(Error::InvalidParameter(format!("stepper was built for {}", cn.bc.label())));
    }
    let omega = cn.advance(&state.omega, forcing, [zero(); 2])?;
    Ok(EvolutionState { time: state.time + cn.dt, omega })
}

/// Crank–Nicolson step with `ω(±1) = 0`.
pub fn step_navier(cn: &CrankNicolson, state: &EvolutionState, forcing: Option<&[Complex64]>) -> Result<EvolutionState> {
    step_checked(cn, state, forcing, BoundaryCondition::NavierSlip)
}

/// Crank–Nicolson step with both moments held at zero.
pub fn step_nonslip(cn: &CrankNicolson, state: &EvolutionState, forcing: Option<&[Complex64]>) -> Result<EvolutionState> {
    step_checked(cn, state, forcing, BoundaryCondition::NonSlip)
}

/// Spatial norms at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSample {
    pub t: f64,
    pub w_l2: f64,
    pub u_linf: f64,
    pub u_l2: f64,
    pub boundary_w_l2: f64,
    pub rho_half_w_l2: f64,
    pub tilde_rho_half_w_l2: f64,
}

/// Space-time norms accumulated over a run. `*_l2l2` fields hold
/// `∫ ‖·‖² dt` (trapezoid on the samples); `*_linf_*` hold suprema.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpaceTimeLedger {
    pub u_linf_linf: f64,
    pub u_l2l2: f64,
    pub w_l2l2: f64,
    pub w_linf_l2: f64,
    pub boundary_w_linf_l2: f64,
    pub rho_half_w_l2l2: f64,
    pub rho_half_w_linf_l2: f64,
    pub tilde_rho_half_w_l2l2: f64,
    pub samples: Vec<TimeSample>,
    /// `max_t e^{-|k|}|∫e^{±|k|y}ω| / ‖ω‖₁`.
    pub max_moment_defect: f64,
    /// `‖ω₀‖² + k⁻²‖∂_yω₀‖² + ν^{-1/2}|k|‖f₁‖²_{L²L²} + ν⁻¹‖f₂‖²_{L²L²}`.
    pub data_functional: f64,
    /// `|k|‖u‖²_{L∞L∞} + k²‖u‖²_{L²L²} + (νk²)^{1/2}‖ω‖²_{L²L²} + ‖(1-|y|)^{1/2}ω‖²_{L∞L²}`.
    pub prop_lhs: f64,
    pub prop_ratio: f64,
    pub steps: usize,
    pub t_final: f64,
}

impl SpaceTimeLedger {
    pub fn decay_samples(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, s.w_l2)).collect()
    }

    fn push(&mut self, s: TimeSample) {
        if let Some(prev) = self.samples.last() {
            let h = 0.5 * (s.t - prev.t);
            self.u_l2l2 += h * (prev.u_l2.powi(2) + s.u_l2.powi(2));
            self.w_l2l2 += h * (prev.w_l2.powi(2) + s.w_l2.powi(2));
            self.rho_half_w_l2l2 += h * (prev.rho_half_w_l2.powi(2) + s.rho_half_w_l2.powi(2));
            self.tilde_rho_half_w_l2l2 += h * (prev.tilde_rho_half_w_l2.powi(2) + s.tilde_rho_half_w_l2.powi(2));
        }
        self.u_linf_linf = self.u_linf_linf.max(s.u_linf);
        self.w_linf_l2 = self.w_linf_l2.max(s.w_l2);
        self.boundary_w_linf_l2 = self.boundary_w_linf_l2.max(s.boundary_w_l2);
        self.rho_half_w_linf_l2 = self.rho_half_w_linf_l2.max(s.rho_half_w_l2);
        self.t_final = s.t;
        self.samples.push(s);
    }

    fn finish(&mut self, nu: f64, k: f64, data_functional: f64) {
        self.steps = self.samples.len().saturating_sub(1);
        self.data_functional = data_functional;
        let ka = k.abs();
        self.prop_lhs = ka * self.u_linf_linf.powi(2)
            + k * k * self.u_l2l2
            + (nu * k * k).sqrt() * self.w_l2l2
            + self.boundary_w_linf_l2.powi(2);
        self.prop_ratio = if data_functional > 0.0 { self.prop_lhs / data_functional } else { 0.0 };
    }
}

/// Evaluates the per-time norms of a vorticity field.
struct Sampler<'a> {
    disc: &'a Discretization,
    elliptic: EllipticSolver,
    k: f64,
    boundary: Vec<f64>,
    rho: Vec<f64>,
    tilde_rho: Vec<f64>,
}

impl<'a> Sampler<'a> {
    fn new(nu: f64, k: f64, disc: &'a Discretization) -> Result<Self> {
        let l = (k.abs() / nu).cbrt();
        let y = disc.nodes();
        let rho = WeightKind::RhoK { l };
        let tilde = WeightKind::TildeRhoK { l };
        Ok(Self {
            disc,
            elliptic: EllipticSolver::new(k, disc)?,
            k,
            boundary: y.iter().map(|y| 1.0 - y.abs()).collect(),
            rho: y.iter().map(|&y| rho.eval(y)).collect(),
            tilde_rho: y.iter().map(|&y| tilde.eval(y)).collect(),
        })
    }

    fn weighted(&self, w: &[Complex64], weight: &[f64]) -> f64 {
        w.iter()
            .zip(weight.iter().zip(self.disc.grid.quad_weights()))
            .map(|(v, (a, q))| v.norm_sqr() * a * q)
            .sum::<f64>()
            .sqrt()
    }

    fn sample(&self, t: f64, w: &[Complex64]) -> Result<TimeSample> {
        let phi = self.elliptic.solve(w)?;
        let u1 = apply_real(&self.disc.ops.d1, &phi);
        let g = &self.disc.grid;
        let u_linf = u1
            .iter()
            .zip(&phi)
            .map(|(a, p)| (a.norm_sqr() + self.k * self.k * p.norm_sqr()).sqrt())
            .fold(0.0, f64::max);
        let u_l2 = (g.l2_norm(&u1).powi(2) + self.k * self.k * g.l2_norm(&phi).powi(2)).sqrt();
        Ok(TimeSample {
            t,
            w_l2: g.l2_norm(w),
            u_linf,
            u_l2,
            boundary_w_l2: self.weighted(w, &self.boundary),
            rho_half_w_l2: self.weighted(w, &self.rho),
            tilde_rho_half_w_l2: self.weighted(w, &self.tilde_rho),
        })
    }
}

/// `‖ω₀‖² + k⁻²‖∂_yω₀‖²`.
pub fn initial_data_functional(omega0: &[Complex64], k: f64, disc: &Discretization) -> f64 {
    let d = apply_real(&disc.ops.d1, omega0);
    disc.grid.l2_norm(omega0).powi(2) + disc.grid.l2_norm(&d).powi(2) / (k * k)
}

/// Result of one run: ledger plus final state, and optionally the trajectory.
#[derive(Debug, Clone)]
pub struct EvolutionRun {
    pub ledger: SpaceTimeLedger,
    pub final_state: EvolutionState,
    /// `(t, ω(t))` at every sample.
    pub trajectory: Option<Trajectory>,
}

/// Source of the per-step forcing and moment targets.
trait StepInputs {
    /// Right-hand side over `[t0, t1]` as the scheme uses it.
    fn forcing(&mut self, scheme: Scheme, t0: f64, t1: f64) -> Option<Vec<Complex64>>;
    fn targets(&mut self, _t1: f64) -> [Complex64; 2] {
        [zero(); 2]
    }
}

struct SeparableInputs {
    spatial: Option<Vec<Complex64>>,
    profile: TimeProfile,
}

impl StepInputs for SeparableInputs {
    fn forcing(&mut self, scheme: Scheme, t0: f64, t1: f64) -> Option<Vec<Complex64>> {
        let s = self.spatial.as_ref()?;
        let p = match scheme {
            Scheme::CrankNicolson => 0.5 * (self.profile.eval(t0) + self.profile.eval(t1)),
            Scheme::EulerHalf => self.profile.eval(t1),
        };
        Some(s.iter().map(|v| v * p).collect())
    }
}

struct RunControl {
    t_end: f64,
    extend: bool,
    keep_trajectory: bool,
}

type Trajectory = Vec<(f64, Vec<Complex64>)>;

fn integrate(
    cn: &CrankNicolson,
    sampler: &Sampler,
    omega0: &[Complex64],
    inputs: &mut dyn StepInputs,
    control: RunControl,
) -> Result<(SpaceTimeLedger, EvolutionState, Option<Trajectory>)> {
    let dt = cn.dt;
    let mut ledger = SpaceTimeLedger::default();
    let mut w = omega0.to_vec();
    let w0 = sampler.disc.grid.l2_norm(omega0);
    let mut trajectory = control.keep_trajectory.then(|| vec![(0.0, w.clone())]);
    ledger.push(sampler.sample(0.0, &w)?);
    let nominal = (control.t_end / dt).round().max(1.0) as usize;
    let cap = if control.extend { (EXTENSION_CAP * nominal as f64) as usize } else { nominal };
    let mut step = 0;
    let mut record = |t: f64, w: &[Complex64], ledger: &mut SpaceTimeLedger| -> Result<f64> {
        let s = sampler.sample(t, w)?;
        ledger.max_moment_defect = ledger.max_moment_defect.max(relative_moment_defect(w, cn.k, sampler.disc));
        let now = s.w_l2;
        ledger.push(s);
        if let Some(tr) = trajectory.as_mut() {
            tr.push((t, w.to_vec()));
        }
        if !now.is_finite() {
            return Err(Error::BlowUp { time: t, magnitude: now });
        }
        Ok(now)
    };
    loop {
        let t0 = step as f64 * dt;
        let t1 = (step + 1) as f64 * dt;
        let w_now = if step < STARTUP_STEPS {
            let tm = t0 + 0.5 * dt;
            let f = inputs.forcing(Scheme::EulerHalf, t0, tm);
            let targets = inputs.targets(tm);
            w = cn.advance_euler_half(&w, f.as_deref(), targets)?;
            record(tm, &w, &mut ledger)?;
            let f = inputs.forcing(Scheme::EulerHalf, tm, t1);
            let targets = inputs.targets(t1);
            w = cn.advance_euler_half(&w, f.as_deref(), targets)?;
            record(t1, &w, &mut ledger)?
        } else {
            let f = inputs.forcing(Scheme::CrankNicolson, t0, t1);
            let targets = inputs.targets(t1);
            w = cn.advance(&w, f.as_deref(), targets)?;
            record(t1, &w, &mut ledger)?
        };
        step += 1;
        if step >= nominal && (!control.extend || w_now <= DECAY_TARGET * w0) {
            break;
        }
        if step >= cap {
            return Err(Error::NoConvergence(format!(
                "norm still above {DECAY_TARGET:e} of its initial value at t = {t1}"
            )));
        }
    }
    let t = step as f64 * dt;
    Ok((ledger, EvolutionState { time: t, omega: w }, trajectory))
}

fn run_inner(case: &EvolutionCase, keep_trajectory: bool) -> Result<EvolutionRun> {
    case.validate()?;
    let disc = Discretization::new(case.order)?;
    let k = case.kf();
    let cn = CrankNicolson::new(case.nu, case.k, case.dt, case.bc, &disc)?;
    let sampler = Sampler::new(case.nu, k, &disc)?;
    let (mut inputs, forcing_norms, forced) = match &case.forcing {
        EvolutionForcing::Zero => (SeparableInputs { spatial: None, profile: TimeProfile::Constant }, None, false),
        EvolutionForcing::Separable { f1, f2, profile } => {
            let spatial = Forcing::Pair { f1: f1.clone(), f2: f2.clone() }.assemble(k, &disc)?;
            let norms = (disc.grid.l2_norm(f1).powi(2), disc.grid.l2_norm(f2).powi(2));
            (SeparableInputs { spatial: Some(spatial), profile: *profile }, Some((norms, *profile)), true)
        }
    };
    let control = RunControl { t_end: case.t_end, extend: !forced, keep_trajectory };
    let (mut ledger, final_state, trajectory) = integrate(&cn, &sampler, &case.omega0, &mut inputs, control)?;
    let mut data = initial_data_functional(&case.omega0, k, &disc);
    if let Some(((n1, n2), profile)) = forcing_norms {
        let p2: f64 = ledger
            .samples
            .windows(2)
            .map(|s| 0.5 * (s[1].t - s[0].t) * (profile.eval(s[0].t).powi(2) + profile.eval(s[1].t).powi(2)))
            .sum();
        data += case.nu.powf(-0.5) * k.abs() * n1 * p2 + n2 * p2 / case.nu;
    }
    ledger.finish(case.nu, k, data);
    Ok(EvolutionRun { ledger, final_state, trajectory })
}

/// Integrates the case; unforced runs are extended until the norm has
/// dropped by `DECAY_TARGET`.
pub fn run(case: &EvolutionCase) -> Result<SpaceTimeLedger> {
    Ok(run_inner(case, false)?.ledger)
}

/// As [`run`], also returning the final state and the stored trajectory.
pub fn run_with_trajectory(case: &EvolutionCase) -> Result<EvolutionRun> {
    run_inner(case, true)
}

/// The three parts of the homogeneous splitting with the additivity defect.
#[derive(Debug, Clone)]
pub struct SplittingReport {
    pub direct: SpaceTimeLedger,
    /// Ledgers of `ω⁽¹⁾`, `ω⁽²⁾`, `ω⁽³⁾`.
    pub parts: [SpaceTimeLedger; 3],
    /// `sup_t ‖ω⁽¹⁾+ω⁽²⁾+ω⁽³⁾ - ω‖₂ / sup_t ‖ω‖₂`.
    pub defect: f64,
    /// `‖ω⁽ʲ⁾(0)‖₂`.
    pub initial_norms: [f64; 3],
    /// `max_t |‖ω⁽¹⁾(t)‖₂ - e^{-(νk²)^{1/3}t}‖ω₀‖₂| / ‖ω₀‖₂`.
    pub closed_form_defect: f64,
}

/// `ω⁽¹⁾(t, y) = e^{-(νk²)^{1/3}t - itky} ω₀(y)`.
pub fn closed_form_part(omega0: &[Complex64], nu: f64, k: f64, t: f64, y: &[f64]) -> Vec<Complex64> {
    let rate = (nu * k * k).cbrt();
    omega0
        .iter()
        .zip(y)
        .map(|(w, &yy)| w * Complex64::new(-rate * t, -t * k * yy).exp())
        .collect()
}

struct ClosedFormForcing<'a> {
    omega0: &'a [Complex64],
    nu: f64,
    k: f64,
    dt: f64,
    disc: &'a Discretization,
}

impl StepInputs for ClosedFormForcing<'_> {
    fn forcing(&mut self, scheme: Scheme, t0: f64, t1: f64) -> Option<Vec<Complex64>> {
        // discrete analogue of -(∂_t + L_k) ω⁽¹⁾ over the step
        let y = self.disc.nodes();
        let a = closed_form_part(self.omega0, self.nu, self.k, t0, y);
        let b = closed_form_part(self.omega0, self.nu, self.k, t1, y);
        let h = scheme.length(self.dt);
        let mid: Vec<Complex64> = match scheme {
            Scheme::CrankNicolson => a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect(),
            Scheme::EulerHalf => b.clone(),
        };
        let l = apply_lk(self.nu, self.k, self.disc, &mid);
        Some(a.iter().zip(&b).zip(&l).map(|((p, q), lv)| -((q - p) / h + lv)).collect())
    }
}

struct MomentTargets<'a> {
    cn: &'a CrankNicolson<'a>,
    omega0: &'a [Complex64],
    nu: f64,
    k: f64,
}

impl StepInputs for MomentTargets<'_> {
    fn forcing(&mut self, _scheme: Scheme, _t0: f64, _t1: f64) -> Option<Vec<Complex64>> {
        None
    }

    fn targets(&mut self, t1: f64) -> [Complex64; 2] {
        let w1 = closed_form_part(self.omega0, self.nu, self.k, t1, self.cn.disc.nodes());
        let m = self.cn.moments_of(&w1);
        [-m[0], -m[1]]
    }
}

/// Direct non-slip run against `ω⁽¹⁾` (closed form), `ω⁽²⁾` (forced, zero
/// moments) and `ω⁽³⁾` (unforced, moments cancelling those of `ω⁽¹⁾`).
pub fn homogeneous_splitting(case: &EvolutionCase) -> Result<SplittingReport> {
    if case.bc != BoundaryCondition::NonSlip || case.forcing != EvolutionForcing::Zero {
        return Err(Error::InvalidParameter("splitting needs an unforced non_slip case".into()));
    }
    case.validate()?;
    let disc = Discretization::new(case.order)?;
    let k = case.kf();
    let cn = CrankNicolson::new(case.nu, case.k, case.dt, case.bc, &disc)?;
    let sampler = Sampler::new(case.nu, k, &disc)?;
    let control = || RunControl { t_end: case.t_end, extend: false, keep_trajectory: true };
    let mut none = SeparableInputs { spatial: None, profile: TimeProfile::Constant };
    let (direct, _, direct_traj) = integrate(&cn, &sampler, &case.omega0, &mut none, control())?;
    let zeros = vec![zero(); disc.len()];
    let mut forced = ClosedFormForcing { omega0: &case.omega0, nu: case.nu, k, dt: case.dt, disc: &disc };
    let (l2, _, traj2) = integrate(&cn, &sampler, &zeros, &mut forced, control())?;
    let mut targets = MomentTargets { cn: &cn, omega0: &case.omega0, nu: case.nu, k };
    let (l3, _, traj3) = integrate(&cn, &sampler, &zeros, &mut targets, control())?;
    let (direct_traj, traj2, traj3) = (direct_traj.unwrap_or_default(), traj2.unwrap_or_default(), traj3.unwrap_or_default());
    let mut l1 = SpaceTimeLedger::default();
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    let mut closed_form_defect = 0.0_f64;
    let w0 = disc.grid.l2_norm(&case.omega0);
    let rate = (case.nu * k * k).cbrt();
    for (step, (t, w)) in direct_traj.iter().enumerate() {
        let t = *t;
        let w1 = closed_form_part(&case.omega0, case.nu, k, t, disc.nodes());
        let s1 = sampler.sample(t, &w1)?;
        closed_form_defect = closed_form_defect.max((s1.w_l2 - (-rate * t).exp() * w0).abs() / w0);
        l1.push(s1);
        let diff: Vec<Complex64> = (0..w.len()).map(|j| w1[j] + traj2[step].1[j] + traj3[step].1[j] - w[j]).collect();
        worst = worst.max(disc.grid.l2_norm(&diff));
        scale = scale.max(disc.grid.l2_norm(w));
    }
    let data = initial_data_functional(&case.omega0, k, &disc);
    let mut direct = direct;
    let mut parts = [l1, l2, l3];
    direct.finish(case.nu, k, data);
    for p in parts.iter_mut() {
        p.finish(case.nu, k, data);
    }
    let initial_norms = [parts[0].samples[0].w_l2, parts[1].samples[0].w_l2, parts[2].samples[0].w_l2];
    Ok(SplittingReport { direct, parts, defect: worst / scale, initial_norms, closed_form_defect })
}

/// Exponential decay rate fitted on a window of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub r2: f64,
    pub t_start: f64,
    pub t_stop: f64,
}

/// Fits `log ‖ω(t)‖` from `t₀ = 0.4 (νk²)^{-1/3}` over the next two e-foldings.
pub fn fit_decay_rate(samples: &[(f64, f64)], nu: f64, k: f64) -> Result<DecayFit> {
    let t_start = 0.4 * (nu * k * k).powf(-1.0 / 3.0);
    let i0 = samples
        .iter()
        .position(|s| s.0 >= t_start)
        .ok_or_else(|| Error::FitRejected("run ends before the fit window".into()))?;
    let floor = samples[i0].1 * (-2.0f64).exp();
    let i1 = samples[i0..]
        .iter()
        .position(|s| s.1 <= floor)
        .map(|p| p + i0)
        .ok_or_else(|| Error::FitRejected("run ends before two e-foldings".into()))?;
    let window = &samples[i0..=i1];
    if window.len() < 3 {
        return Err(Error::FitRejected("decay window has fewer than three samples".into()));
    }
    let n = window.len() as f64;
    let mt = window.iter().map(|s| s.0).sum::<f64>() / n;
    let ml = window.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let stt: f64 = window.iter().map(|s| (s.0 - mt).powi(2)).sum();
    let stl: f64 = window.iter().map(|s| (s.0 - mt) * (s.1.ln() - ml)).sum();
    let sll: f64 = window.iter().map(|s| (s.1.ln() - ml).powi(2)).sum();
    let slope = stl / stt;
    let r2 = if sll > 0.0 { stl * stl / (stt * sll) } else { 1.0 };
    Ok(DecayFit { rate: -slope, r2, t_start: window[0].0, t_stop: window[window.len() - 1].0 })
}

/// Decay rates over a (ν, k) grid with the exponent fits.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayStudy {
    pub bc: BoundaryCondition,
    /// `(ν, k, rate)`.
    pub rates: Vec<(f64, i64, f64)>,
    pub fits: Vec<ScalingFit>,
}

/// Default initial vorticity for decay runs.
pub fn decay_initial_data(disc: &Discretization, k: f64, bc: BoundaryCondition) -> Vec<Complex64> {
    match bc {
        BoundaryCondition::NavierSlip => disc
            .nodes()
            .iter()
            .map(|&y| Complex64::new((std::f64::consts::FRAC_PI_2 * (y + 1.0)).sin(), 0.0))
            .collect(),
        BoundaryCondition::NonSlip => moment_compatible_vorticity(disc, k, |y| Complex64::new(1.0 + 0.5 * y, 0.25 * y * y)),
    }
}

/// Fitted decay rates across `nu_values × k_values`; fits in ν per k and in k per ν.
pub fn decay_study(
    nu_values: &[f64],
    k_values: &[i64],
    bc: BoundaryCondition,
    nu_tolerance: f64,
    k_tolerance: f64,
) -> Result<DecayStudy> {
    let mut rates = Vec::new();
    for &nu in nu_values {
        for &k in k_values {
            let order = grid_order_for(nu, k as f64)?;
            let disc = Discretization::new(order)?;
            let kf = k as f64;
            let omega0 = decay_initial_data(&disc, kf, bc);
            let t_end = 4.0 * (nu * kf * kf).powf(-1.0 / 3.0);
            let case = EvolutionCase::new(nu, k, omega0, max_dt(nu, k), t_end, bc)?;
            let ledger = run(&case)?;
            let fit = fit_decay_rate(&ledger.decay_samples(), nu, kf)?;
            rates.push((nu, k, fit.rate));
        }
    }
    let mut fits = Vec::new();
    for &k in k_values {
        let pts: Vec<_> = rates.iter().filter(|r| r.1 == k).collect();
        if pts.len() >= 2 {
            let xs: Vec<f64> = pts.iter().map(|r| r.0).collect();
            let ys: Vec<f64> = pts.iter().map(|r| r.2).collect();
            fits.push(fit_power_law(&format!("decay_rate@k={k}"), "nu", &xs, &ys, 1.0 / 3.0, nu_tolerance)?);
        }
    }
    for &nu in nu_values {
        let pts: Vec<_> = rates.iter().filter(|r| r.0 == nu).collect();
        if pts.len() >= 2 {
            let xs: Vec<f64> = pts.iter().map(|r| (r.1 as f64).abs()).collect();
            let ys: Vec<f64> = pts.iter().map(|r| r.2).collect();
            fits.push(fit_power_law(&format!("decay_rate@nu={nu:e}"), "k", &xs, &ys, 2.0 / 3.0, k_tolerance)?);
        }
    }
    Ok(DecayStudy { bc, rates, fits })
}

/// Observed order from runs at `dt`, `dt/2`, `dt/4` to time `t`.
pub fn step_halving_order(case: &EvolutionCase) -> Result<f64> {
    let disc = Discretization::new(case.order)?;
    let finals: Vec<Vec<Complex64>> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&r| {
            let dt = case.dt / r;
            let cn = CrankNicolson::new(case.nu, case.k, dt, case.bc, &disc)?;
            let sampler = Sampler::new(case.nu, case.kf(), &disc)?;
            let mut none = SeparableInputs { spatial: None, profile: TimeProfile::Constant };
            let control = RunControl { t_end: case.t_end, extend: false, keep_trajectory: false };
            Ok(integrate(&cn, &sampler, &case.omega0, &mut none, control)?.1.omega)
        })
        .collect::<Result<_>>()?;
    let d = |a: &[Complex64], b: &[Complex64]| {
        let v: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        disc.grid.l2_norm(&v)
    };
    Ok((d(&finals[0], &finals[1]) / d(&finals[1], &finals[2])).log2())
}

/// `max_t ‖ω(t)‖ e^{tΨ - π/2} / ‖ω₀‖`; at most one when the
/// Gearhart–Prüss bound holds on the samples.
pub fn gearhart_pruss_ratio(ledger: &SpaceTimeLedger, psi: f64) -> f64 {
    let w0 = ledger.samples.first().map(|s| s.w_l2).unwrap_or(0.0);
    if w0 == 0.0 {
        return 0.0;
    }
    ledger
        .samples
        .iter()
        .map(|s| s.w_l2 / w0 * (s.t * psi - std::f64::consts::FRAC_PI_2).exp())
        .fold(0.0, f64::max)
}

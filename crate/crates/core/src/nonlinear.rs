//! Fourier-truncated perturbation solver around the Couette flow with
//! non-slip walls: per-mode Crank–Nicolson with Adams–Bashforth 2 for the
//! quadratic terms, the energy functional `Σ E_k` and amplitude probes.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimates::{fit_power_law, ScalingFit};
use crate::evolution::{max_dt, CrankNicolson, STARTUP_STEPS};
use crate::linalg::RealLu;
use crate::resolvent::{BoundaryCondition, Discretization, EllipticSolver};
use crate::spectral::{apply_real, grid_order_for};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Nodal magnitude above which a run is declared growing.
pub const BLOW_UP_GUARD: f64 = 1e8;
/// Required `sup_t ‖w_{K_max}‖ / sup_t ‖w_1‖`.
pub const TAIL_TOL: f64 = 1e-4;
/// A run is growing if `Σ E_k` at the end exceeds this multiple of its value at `t_end/10`.
pub const GROWTH_FACTOR: f64 = 4.0;

/// Modes `w_k`, `1 ≤ k ≤ K_max` (negative modes are the conjugates) and the
/// mean shear `ū¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationState {
    pub modes: Vec<Vec<Complex64>>,
    pub mean_shear: Vec<f64>,
    pub time: f64,
}

impl PerturbationState {
    pub fn zero(k_max: usize, disc: &Discretization) -> Self {
        Self { modes: vec![vec![zero(); disc.len()]; k_max], mean_shear: vec![0.0; disc.len()], time: 0.0 }
    }

    pub fn k_max(&self) -> usize {
        self.modes.len()
    }

    /// `w_k` for any `|k| ≤ K_max`, `k ≠ 0`.
    pub fn mode(&self, k: i64) -> Vec<Complex64> {
        let m = &self.modes[k.unsigned_abs() as usize - 1];
        if k > 0 {
            m.clone()
        } else {
            m.iter().map(|v| v.conj()).collect()
        }
    }

    /// `u₀ = amplitude·∇^⊥((1 - y²)² sin x) / ‖∇^⊥((1 - y²)² sin x)‖_{H²}`.
    pub fn initial(amplitude: f64, k_max: usize, disc: &Discretization) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::InvalidParameter("K_max must be at least 1".into()));
        }
        let phi: Vec<Complex64> = disc.nodes().iter().map(|&y| Complex64::new(0.0, -0.5) * (1.0 - y * y).powi(2)).collect();
        let norm = h2_norm_of_mode(&phi, 1.0, disc);
        let phi: Vec<Complex64> = phi.iter().map(|p| p * (amplitude / norm)).collect();
        let w1: Vec<Complex64> = apply_real(&disc.ops.d2, &phi).into_iter().zip(&phi).map(|(a, p)| a - p).collect();
        let mut state = Self::zero(k_max, disc);
        state.modes[0] = w1;
        Ok(state)
    }
}

/// `‖u‖_{H²(𝕋×(-1,1))}` of the real field carried by mode ±k of stream function `φ`.
fn h2_norm_of_mode(phi: &[Complex64], k: f64, disc: &Discretization) -> f64 {
    let g = &disc.grid;
    let d = |v: &[Complex64]| apply_real(&disc.ops.d1, v);
    let u1 = d(phi);
    let u2: Vec<Complex64> = phi.iter().map(|p| Complex64::new(0.0, -k) * p).collect();
    let mut sum = 0.0;
    for u in [u1, u2] {
        let du = d(&u);
        let ddu = d(&du);
        // Σ_{a+b≤2} k^{2a} ‖∂_y^b u‖²
        let (n0, n1, n2) = (g.l2_norm(&u).powi(2), g.l2_norm(&du).powi(2), g.l2_norm(&ddu).powi(2));
        sum += n0 * (1.0 + k * k + k.powi(4)) + n1 * (1.0 + k * k) + n2;
    }
    // modes ±k over a period of length 2π
    (2.0 * 2.0 * std::f64::consts::PI * sum).sqrt()
}

/// Velocity and vorticity of every mode `-K..=K`, index `l + K`.
struct Fields {
    k_max: usize,
    u1: Vec<Vec<Complex64>>,
    u2: Vec<Vec<Complex64>>,
    w: Vec<Vec<Complex64>>,
}

impl Fields {
    fn new(state: &PerturbationState, elliptic: &[EllipticSolver], disc: &Discretization) -> Result<Self> {
        let kk = state.k_max();
        let n = disc.len();
        let mut u1 = vec![vec![zero(); n]; 2 * kk + 1];
        let mut u2 = vec![vec![zero(); n]; 2 * kk + 1];
        let mut w = vec![vec![zero(); n]; 2 * kk + 1];
        let mean: Vec<Complex64> = state.mean_shear.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        w[kk] = apply_real(&disc.ops.d1, &mean);
        u1[kk] = mean;
        for k in 1..=kk {
            let wk = &state.modes[k - 1];
            let phi = elliptic[k - 1].solve(wk)?;
            let a = apply_real(&disc.ops.d1, &phi);
            let b: Vec<Complex64> = phi.iter().map(|p| Complex64::new(0.0, -(k as f64)) * p).collect();
            u1[kk - k] = a.iter().map(|v| v.conj()).collect();
            u2[kk - k] = b.iter().map(|v| v.conj()).collect();
            w[kk - k] = wk.iter().map(|v| v.conj()).collect();
            u1[kk + k] = a;
            u2[kk + k] = b;
            w[kk + k] = wk.clone();
        }
        Ok(Self { k_max: kk, u1, u2, w })
    }

    fn at(&self, v: &[Vec<Complex64>], l: i64) -> Option<usize> {
        let kk = self.k_max as i64;
        (l.abs() <= kk).then(|| (l + kk) as usize).filter(|&i| i < v.len())
    }

    /// `Σ_l a_l b_{k-l}` over `|l|, |k-l| ≤ K_max`.
    fn convolve(&self, a: &[Vec<Complex64>], b: &[Vec<Complex64>], k: i64) -> Vec<Complex64> {
        let kk = self.k_max as i64;
        let n = a[0].len();
        let mut out = vec![zero(); n];
        for l in -kk..=kk {
            let (Some(i), Some(j)) = (self.at(a, l), self.at(b, k - l)) else { continue };
            for ((o, x), y) in out.iter_mut().zip(&a[i]).zip(&b[j]) {
                *o += x * y;
            }
        }
        out
    }
}

/// Quadratic terms of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearForcing {
    /// `(f¹_k, f²_k)` for `k = 1..=K_max`.
    pub pairs: Vec<(Vec<Complex64>, Vec<Complex64>)>,
    /// `f²₀`, real.
    pub mean: Vec<f64>,
}

impl NonlinearForcing {
    /// `-ik f¹_k - ∂_y f²_k` for each mode.
    pub fn mode_rhs(&self, disc: &Discretization) -> Vec<Vec<Complex64>> {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, (f1, f2))| {
                let k = (i + 1) as f64;
                let df2 = apply_real(&disc.ops.d1, f2);
                f1.iter().zip(df2).map(|(a, b)| Complex64::new(0.0, -k) * a - b).collect()
            })
            .collect()
    }
}

fn rhs_with(state: &PerturbationState, elliptic: &[EllipticSolver], disc: &Discretization) -> Result<NonlinearForcing> {
    let fields = Fields::new(state, elliptic, disc)?;
    let pairs = (1..=state.k_max() as i64)
        .map(|k| (fields.convolve(&fields.u1, &fields.w, k), fields.convolve(&fields.u2, &fields.w, k)))
        .collect();
    let mean = fields.convolve(&fields.u2, &fields.w, 0).iter().map(|v| v.re).collect();
    Ok(NonlinearForcing { pairs, mean })
}

fn elliptic_solvers(k_max: usize, disc: &Discretization) -> Result<Vec<EllipticSolver>> {
    (1..=k_max).map(|k| EllipticSolver::new(k as f64, disc)).collect()
}

/// `f¹_k = Σ u¹_l w_{k-l}`, `f²_k = Σ u²_l w_{k-l}` with the mean included,
/// truncated to `|l|, |k-l| ≤ K_max` (exact products, no aliasing).
pub fn nonlinear_rhs(state: &PerturbationState, disc: &Discretization) -> Result<NonlinearForcing> {
    rhs_with(state, &elliptic_solvers(state.k_max(), disc)?, disc)
}

/// `Σ_{|k|≤K} ∫ (ik f¹_k + ∂_y f²_k) conj(w_k)` and the sum of the moduli of its terms.
pub fn enstrophy_transfer(state: &PerturbationState, disc: &Discretization) -> Result<(f64, f64)> {
    let rhs = nonlinear_rhs(state, disc)?;
    let g = &disc.grid;
    let modes = rhs.mode_rhs(disc);
    let mut total = 0.0;
    let mut scale = 0.0;
    for (f, w) in modes.iter().zip(&state.modes) {
        // the -k mode contributes the conjugate
        let v = -2.0 * g.inner(f, w)?.re;
        total += v;
        scale += v.abs();
    }
    let mean: Vec<Complex64> = rhs.mean.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let dmean = apply_real(&disc.ops.d1, &mean);
    let wbar = apply_real(&disc.ops.d1, &state.mean_shear.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
    let v0 = g.inner(&dmean, &wbar)?.re;
    total += v0;
    scale += v0.abs();
    Ok((total, scale))
}

/// Time stepper with cached factorizations for all modes and the mean.
pub struct NonlinearStepper<'a> {
    nu: f64,
    dt: f64,
    disc: &'a Discretization,
    modes: Vec<CrankNicolson<'a>>,
    elliptic: Vec<EllipticSolver>,
    mean_lu: RealLu,
    mean_d2: Mat<f64>,
    nonlinear: bool,
    previous: Option<(Vec<Vec<Complex64>>, Vec<f64>)>,
    steps: usize,
}

impl std::fmt::Debug for NonlinearStepper<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearStepper").field("nu", &self.nu).field("dt", &self.dt).field("steps", &self.steps).finish()
    }
}

impl<'a> NonlinearStepper<'a> {
    pub fn new(nu: f64, dt: f64, k_max: usize, disc: &'a Discretization, nonlinear: bool) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter("nu must be positive".into()));
        }
        if k_max < 1 {
            return Err(Error::InvalidParameter("K_max must be at least 1".into()));
        }
        let limit = max_dt(nu, k_max as i64);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("dt = {dt} outside (0, {limit}]")));
        }
        let modes = (1..=k_max as i64)
            .map(|k| CrankNicolson::new(nu, k, dt, BoundaryCondition::NonSlip, disc))
            .collect::<Result<Vec<_>>>()?;
        let n = disc.order();
        let d2 = disc.ops.d2.clone();
        let h = 0.5 * dt;
        let m = Mat::from_fn(n + 1, n + 1, |i, j| {
            if i == 0 || i == n {
                if i == j { 1.0 } else { 0.0 }
            } else {
                (if i == j { 1.0 } else { 0.0 }) - h * nu * d2[(i, j)]
            }
        });
        let mean_lu = RealLu::new(&m, "mean shear heat step")?;
        Ok(Self {
            nu,
            dt,
            disc,
            modes,
            elliptic: elliptic_solvers(k_max, disc)?,
            mean_lu,
            mean_d2: d2,
            nonlinear,
            previous: None,
            steps: 0,
        })
    }

    fn forcing(&self, state: &PerturbationState) -> Result<(Vec<Vec<Complex64>>, Vec<f64>)> {
        let rhs = rhs_with(state, &self.elliptic, self.disc)?;
        let modes = rhs.mode_rhs(self.disc);
        let mean = rhs.mean.iter().map(|v| -v).collect();
        Ok((modes, mean))
    }

    fn mean_step(&self, u: &[f64], g: Option<&[f64]>, h: f64, explicit: bool) -> Result<Vec<f64>> {
        let n = self.disc.order();
        let cu: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut rhs: Vec<Complex64> = if explicit {
            let d2u = apply_real(&self.mean_d2, &cu);
            cu.iter().zip(&d2u).map(|(a, b)| a + 0.5 * self.dt * self.nu * b).collect()
        } else {
            cu
        };
        if let Some(g) = g {
            for (r, v) in rhs.iter_mut().zip(g) {
                *r += h * v;
            }
        }
        rhs[0] = zero();
        rhs[n] = zero();
        Ok(self.mean_lu.solve(&rhs)?.iter().map(|v| v.re).collect())
    }

    fn sub_step(
        &self,
        state: &PerturbationState,
        forcing: Option<&(Vec<Vec<Complex64>>, Vec<f64>)>,
        euler: bool,
    ) -> Result<PerturbationState> {
        let mut modes = Vec::with_capacity(self.modes.len());
        for (i, cn) in self.modes.iter().enumerate() {
            let f = forcing.map(|f| f.0[i].as_slice());
            let w = if euler {
                cn.advance_euler_half(&state.modes[i], f, [zero(); 2])?
            } else {
                cn.advance(&state.modes[i], f, [zero(); 2])?
            };
            modes.push(w);
        }
        let h = if euler { 0.5 * self.dt } else { self.dt };
        let mean_shear = self.mean_step(&state.mean_shear, forcing.map(|f| f.1.as_slice()), h, !euler)?;
        let time = state.time + h;
        let out = PerturbationState { modes, mean_shear, time };
        guard(&out)?;
        Ok(out)
    }

    /// One step of length `dt`; the first steps are two backward-Euler halves.
    pub fn advance(&mut self, state: &PerturbationState) -> Result<PerturbationState> {
        self.advance_observed(state, &mut |_| Ok(()))
    }

    /// As [`Self::advance`], passing intermediate states to `observe`.
    pub fn advance_observed(
        &mut self,
        state: &PerturbationState,
        observe: &mut dyn FnMut(&PerturbationState) -> Result<()>,
    ) -> Result<PerturbationState> {
        let next = if self.steps < STARTUP_STEPS {
            let f0 = if self.nonlinear { Some(self.forcing(state)?) } else { None };
            let mid = self.sub_step(state, f0.as_ref(), true)?;
            observe(&mid)?;
            let f1 = if self.nonlinear { Some(self.forcing(&mid)?) } else { None };
            let next = self.sub_step(&mid, f1.as_ref(), true)?;
            self.previous = f0;
            next
        } else {
            let current = if self.nonlinear { Some(self.forcing(state)?) } else { None };
            let combined = match (&current, &self.previous) {
                (Some(c), Some(p)) => Some((
                    c.0.iter()
                        .zip(&p.0)
                        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 1.5 * x - 0.5 * y).collect())
                        .collect(),
                    c.1.iter().zip(&p.1).map(|(x, y)| 1.5 * x - 0.5 * y).collect(),
                )),
                (Some(c), None) => Some(c.clone()),
                _ => None,
            };
            let next = self.sub_step(state, combined.as_ref(), false)?;
            self.previous = current;
            next
        };
        self.steps += 1;
        Ok(next)
    }
}

fn guard(state: &PerturbationState) -> Result<()> {
    let mut worst = 0.0_f64;
    for m in &state.modes {
        for v in m {
            let a = v.norm();
            if !a.is_finite() {
                return Err(Error::BlowUp { time: state.time, magnitude: f64::INFINITY });
            }
            worst = worst.max(a);
        }
    }
    if worst > BLOW_UP_GUARD {
        return Err(Error::BlowUp { time: state.time, magnitude: worst });
    }
    Ok(())
}

/// One step from scratch (factorizations are rebuilt; use
/// [`NonlinearStepper`] for runs).
pub fn advance(state: &PerturbationState, nu: f64, dt: f64, disc: &Discretization) -> Result<PerturbationState> {
    NonlinearStepper::new(nu, dt, state.k_max(), disc, true)?.advance(state)
}

/// `E₀ = ‖w̄‖_{L∞L²}` and per-mode
/// `E_k = ‖(1-|y|)^{1/2}w_k‖_{L∞L²} + |k|‖u_k‖_{L²L²} + |k|^{1/2}‖u_k‖_{L∞L∞} + (νk²)^{1/4}‖w_k‖_{L²L²}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyFunctional {
    pub e0: f64,
    /// `E_k` for `k = 1..=K_max`; `E_{-k} = E_k`.
    pub ek: Vec<f64>,
    /// `E₀ + 2 Σ_{k≥1} E_k`.
    pub total: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct ModeSample {
    boundary_w: f64,
    u_l2_sq: f64,
    u_linf: f64,
    w_l2_sq: f64,
}

/// Running suprema and trapezoid time integrals of the energy terms.
#[derive(Debug, Clone)]
pub struct EnergyAccumulator {
    nu: f64,
    last: Option<(f64, Vec<ModeSample>)>,
    wbar_sup: f64,
    boundary_sup: Vec<f64>,
    u_l2l2: Vec<f64>,
    u_linf_sup: Vec<f64>,
    w_l2l2: Vec<f64>,
    w_mode_sup: Vec<f64>,
    velocity_sup: f64,
    samples: usize,
}

impl EnergyAccumulator {
    pub fn new(nu: f64, k_max: usize) -> Self {
        Self {
            nu,
            last: None,
            wbar_sup: 0.0,
            boundary_sup: vec![0.0; k_max],
            u_l2l2: vec![0.0; k_max],
            u_linf_sup: vec![0.0; k_max],
            w_l2l2: vec![0.0; k_max],
            w_mode_sup: vec![0.0; k_max],
            velocity_sup: 0.0,
            samples: 0,
        }
    }

    pub fn push(&mut self, state: &PerturbationState, disc: &Discretization, elliptic: &[EllipticSolver]) -> Result<()> {
        let g = &disc.grid;
        let weights = g.quad_weights();
        let y = disc.nodes();
        let mean: Vec<Complex64> = state.mean_shear.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let wbar = apply_real(&disc.ops.d1, &mean);
        self.wbar_sup = self.wbar_sup.max(g.l2_norm(&wbar));
        let mut velocity_sq = g.l2_norm(&mean).powi(2);
        let mut now = Vec::with_capacity(state.k_max());
        for (i, w) in state.modes.iter().enumerate() {
            let k = (i + 1) as f64;
            let phi = elliptic[i].solve(w)?;
            let u1 = apply_real(&disc.ops.d1, &phi);
            let u_linf = u1.iter().zip(&phi).map(|(a, p)| (a.norm_sqr() + k * k * p.norm_sqr()).sqrt()).fold(0.0, f64::max);
            let u_l2_sq = g.l2_norm(&u1).powi(2) + k * k * g.l2_norm(&phi).powi(2);
            let boundary_w = w
                .iter()
                .zip(y.iter().zip(weights))
                .map(|(v, (yy, q))| v.norm_sqr() * (1.0 - yy.abs()) * q)
                .sum::<f64>()
                .sqrt();
            let w_l2 = g.l2_norm(w);
            velocity_sq += 2.0 * u_l2_sq;
            self.w_mode_sup[i] = self.w_mode_sup[i].max(w_l2);
            now.push(ModeSample { boundary_w, u_l2_sq, u_linf, w_l2_sq: w_l2 * w_l2 });
        }
        self.velocity_sup = self.velocity_sup.max((2.0 * std::f64::consts::PI * velocity_sq).sqrt());
        for (i, s) in now.iter().enumerate() {
            self.boundary_sup[i] = self.boundary_sup[i].max(s.boundary_w);
            self.u_linf_sup[i] = self.u_linf_sup[i].max(s.u_linf);
        }
        if let Some((t0, prev)) = &self.last {
            let h = 0.5 * (state.time - t0);
            for (i, (p, s)) in prev.iter().zip(&now).enumerate() {
                self.u_l2l2[i] += h * (p.u_l2_sq + s.u_l2_sq);
                self.w_l2l2[i] += h * (p.w_l2_sq + s.w_l2_sq);
            }
        }
        self.last = Some((state.time, now));
        self.samples += 1;
        Ok(())
    }

    /// Functional so far; a single sample is weighted by `single_width` in time.
    pub fn functional(&self, single_width: f64) -> EnergyFunctional {
        let mut ek = Vec::with_capacity(self.u_l2l2.len());
        for i in 0..self.u_l2l2.len() {
            let k = (i + 1) as f64;
            let (u2, w2) = if self.samples == 1 {
                let s = &self.last.as_ref().map(|l| l.1[i]).unwrap_or_default();
                (single_width * s.u_l2_sq, single_width * s.w_l2_sq)
            } else {
                (self.u_l2l2[i], self.w_l2l2[i])
            };
            ek.push(
                self.boundary_sup[i] + k * u2.sqrt() + k.sqrt() * self.u_linf_sup[i] + (self.nu * k * k).powf(0.25) * w2.sqrt(),
            );
        }
        let total = self.wbar_sup + 2.0 * ek.iter().sum::<f64>();
        EnergyFunctional { e0: self.wbar_sup, ek, total }
    }

    /// `sup_t ‖w_{K_max}‖ / sup_t ‖w_1‖`.
    pub fn tail_ratio(&self) -> f64 {
        let first = self.w_mode_sup.first().copied().unwrap_or(0.0);
        let last = self.w_mode_sup.last().copied().unwrap_or(0.0);
        if first == 0.0 {
            0.0
        } else {
            last / first
        }
    }

    /// `sup_t ‖u(t)‖_{L²(𝕋×(-1,1))}`.
    pub fn velocity_sup(&self) -> f64 {
        self.velocity_sup
    }
}

/// Energy functional of a stored history (trapezoid in time; a single
/// snapshot counts for a time width `dt`).
pub fn energy(history: &[PerturbationState], nu: f64, dt: f64, disc: &Discretization) -> Result<EnergyFunctional> {
    let Some(first) = history.first() else { return Ok(EnergyFunctional::default()) };
    let elliptic = elliptic_solvers(first.k_max(), disc)?;
    let mut acc = EnergyAccumulator::new(nu, first.k_max());
    for s in history {
        acc.push(s, disc, &elliptic)?;
    }
    Ok(acc.functional(dt))
}

/// Settings of one nonlinear run.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearConfig {
    pub nu: f64,
    pub k_max: usize,
    /// `‖u₀‖_{H²}`.
    pub amplitude: f64,
    /// Defaults to `20 ν^{-1/3}`.
    pub t_end: Option<f64>,
    /// Defaults to the accuracy limit at `K_max`.
    pub dt: Option<f64>,
    /// Defaults to the resolution rule at `K_max`.
    pub order: Option<usize>,
    pub nonlinear: bool,
}

impl NonlinearConfig {
    pub fn new(nu: f64, amplitude: f64) -> Self {
        Self { nu, k_max: 8, amplitude, t_end: None, dt: None, order: None, nonlinear: true }
    }

    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(20.0 * self.nu.powf(-1.0 / 3.0))
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| max_dt(self.nu, self.k_max as i64))
    }

    pub fn order(&self) -> Result<usize> {
        match self.order {
            Some(n) => Ok(n),
            None => grid_order_for(self.nu, self.k_max as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Stable,
    Growing,
    Inconclusive,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Growing => "growing",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearRun {
    pub config: NonlinearConfig,
    pub energy: EnergyFunctional,
    /// `(t, Σ E_k)` once per unit of `t_end/100`.
    pub monitor: Vec<(f64, f64)>,
    pub verdict: Verdict,
    pub tail_ratio: f64,
    /// `sup_t ‖u‖_{L²} / ν^{1/2}`.
    pub velocity_ratio: f64,
    pub blow_up: Option<f64>,
    pub steps: usize,
    pub final_state: Option<PerturbationState>,
}

/// Runs one configuration to `t_end` and classifies it.
pub fn simulate(config: &NonlinearConfig) -> Result<NonlinearRun> {
    if !(config.amplitude >= 0.0) {
        return Err(Error::InvalidParameter("amplitude must be nonnegative".into()));
    }
    let disc = Discretization::new(config.order()?)?;
    let dt = config.dt();
    let t_end = config.t_end();
    let mut stepper = NonlinearStepper::new(config.nu, dt, config.k_max, &disc, config.nonlinear)?;
    let elliptic = elliptic_solvers(config.k_max, &disc)?;
    let mut acc = EnergyAccumulator::new(config.nu, config.k_max);
    let mut state = PerturbationState::initial(config.amplitude, config.k_max, &disc)?;
    acc.push(&state, &disc, &elliptic)?;
    let steps = (t_end / dt).round().max(1.0) as usize;
    let every = (steps / 100).max(1);
    let mut monitor = vec![(0.0, acc.functional(dt).total)];
    let mut blow_up = None;
    let mut done = 0;
    for step in 0..steps {
        let result = stepper.advance_observed(&state, &mut |s| acc.push(s, &disc, &elliptic));
        match result {
            Ok(next) => state = next,
            Err(Error::BlowUp { time, .. }) => {
                blow_up = Some(time);
                break;
            }
            Err(e) => return Err(e),
        }
        acc.push(&state, &disc, &elliptic)?;
        done = step + 1;
        if done % every == 0 || done == steps {
            monitor.push((state.time, acc.functional(dt).total));
        }
    }
    let energy = acc.functional(dt);
    let tail_ratio = acc.tail_ratio();
    let at_tenth = monitor
        .iter()
        .find(|(t, _)| *t >= 0.1 * t_end - 1e-9)
        .map(|m| m.1)
        .unwrap_or(energy.total);
    let verdict = if blow_up.is_some() || energy.total > GROWTH_FACTOR * at_tenth {
        Verdict::Growing
    } else if tail_ratio > TAIL_TOL || !energy.total.is_finite() {
        Verdict::Inconclusive
    } else {
        Verdict::Stable
    };
    Ok(NonlinearRun {
        config: config.clone(),
        energy,
        monitor,
        verdict,
        tail_ratio,
        velocity_ratio: acc.velocity_sup() / config.nu.sqrt(),
        blow_up,
        steps: done,
        final_state: blow_up.is_none().then_some(state),
    })
}

/// Amplitude bisection per viscosity.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdProbe {
    pub nu_values: Vec<f64>,
    /// Bracket in units of `ν^{1/2}`.
    pub amplitude_lo: f64,
    pub amplitude_hi: f64,
    pub k_max: usize,
    /// `(ν, amplitude, verdict)` for every run.
    pub verdicts: Vec<(f64, f64, Verdict)>,
    /// Smallest non-stable amplitude found per ν.
    pub thresholds: Vec<(f64, f64)>,
    pub fitted_beta: Option<ScalingFit>,
    /// Verdicts that were not monotone in amplitude.
    pub monotonicity_violations: Vec<(f64, f64)>,
}

impl ThresholdProbe {
    pub fn new(nu_values: Vec<f64>, amplitude_lo: f64, amplitude_hi: f64) -> Result<Self> {
        if !(amplitude_lo > 0.0 && amplitude_lo < amplitude_hi) {
            return Err(Error::InvalidParameter("need 0 < amplitude_lo < amplitude_hi".into()));
        }
        if nu_values.iter().any(|&v| !(v >= 1e-5)) {
            return Err(Error::InvalidParameter("probe viscosities must be at least 1e-5".into()));
        }
        Ok(Self {
            nu_values,
            amplitude_lo,
            amplitude_hi,
            k_max: 8,
            verdicts: Vec::new(),
            thresholds: Vec::new(),
            fitted_beta: None,
            monotonicity_violations: Vec::new(),
        })
    }
}

/// Bisects in amplitude (geometric) down to a 10% bracket for each ν and
/// fits `log a* ~ β log ν` when the viscosities span three decades.
pub fn probe_threshold(spec: &ThresholdProbe, t_end_scale: f64) -> Result<ThresholdProbe> {
    let mut out = spec.clone();
    out.verdicts.clear();
    out.thresholds.clear();
    out.monotonicity_violations.clear();
    for &nu in &spec.nu_values {
        let run_at = |c: f64| -> Result<Verdict> {
            let mut cfg = NonlinearConfig::new(nu, c * nu.sqrt());
            cfg.k_max = spec.k_max;
            cfg.t_end = Some(t_end_scale * cfg.t_end());
            Ok(simulate(&cfg)?.verdict)
        };
        let mut lo = spec.amplitude_lo;
        let mut hi = spec.amplitude_hi;
        let v_lo = run_at(lo)?;
        let v_hi = run_at(hi)?;
        out.verdicts.push((nu, lo, v_lo));
        out.verdicts.push((nu, hi, v_hi));
        if v_lo != Verdict::Stable || v_hi == Verdict::Stable {
            if v_lo != Verdict::Stable && v_hi == Verdict::Stable {
                out.monotonicity_violations.push((nu, hi));
            }
            continue;
        }
        while hi / lo > 1.1 {
            let mid = (lo * hi).sqrt();
            let v = run_at(mid)?;
            out.verdicts.push((nu, mid, v));
            if v == Verdict::Stable {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.thresholds.push((nu, hi * nu.sqrt()));
        // stable below, not stable above
        let mut sorted: Vec<&(f64, f64, Verdict)> = out.verdicts.iter().filter(|v| v.0 == nu).collect();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut seen_unstable = false;
        for v in sorted {
            if v.2 != Verdict::Stable {
                seen_unstable = true;
            } else if seen_unstable {
                out.monotonicity_violations.push((nu, v.1));
            }
        }
    }
    if out.thresholds.len() >= 2 {
        let xs: Vec<f64> = out.thresholds.iter().map(|t| t.0).collect();
        let ys: Vec<f64> = out.thresholds.iter().map(|t| t.1).collect();
        let span = xs.iter().copied().fold(0.0, f64::max) / xs.iter().copied().fold(f64::INFINITY, f64::min);
        if span.log10() >= 3.0 - 1e-9 {
            out.fitted_beta = Some(fit_power_law("threshold_amplitude", "nu", &xs, &ys, 0.5, f64::INFINITY)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{run_with_trajectory, EvolutionCase};

    fn disc() -> Discretization {
        Discretization::new(48).unwrap()
    }

    fn populated(disc: &Discretization, k_max: usize) -> PerturbationState {
        let mut s = PerturbationState::initial(0.3, k_max, disc).unwrap();
        let y = disc.nodes();
        s.modes[1] = crate::evolution::moment_compatible_vorticity(disc, 2.0, |y| Complex64::new(0.2 * y, 0.1));
        s.mean_shear = y.iter().map(|&y| 0.05 * (1.0 - y * y) * (1.0 + y)).collect();
        s
    }

    #[test]
    fn zero_state_gives_zero_forcing() {
        let d = disc();
        let f = nonlinear_rhs(&PerturbationState::zero(4, &d), &d).unwrap();
        assert!(f.pairs.iter().all(|(a, b)| a.iter().chain(b).all(|v| v.norm() == 0.0)));
        assert!(f.mean.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_mode_feeds_only_zero_and_two() {
        let d = disc();
        let mut s = PerturbationState::zero(4, &d);
        // mixed phase, so the Reynolds stress does not vanish
        s.modes[0] = crate::evolution::moment_compatible_vorticity(&d, 1.0, |y| Complex64::new(1.0 + 0.5 * y, 0.3 * y * y));
        let f = nonlinear_rhs(&s, &d).unwrap();
        let size = |v: &[Complex64]| v.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(size(&f.pairs[1].0) > 1e-6 && size(&f.pairs[1].1) > 1e-6);
        for k in [1usize, 3, 4] {
            assert_eq!(size(&f.pairs[k - 1].0) + size(&f.pairs[k - 1].1), 0.0, "mode {k}");
        }
        assert!(f.mean.iter().any(|v| v.abs() > 1e-8));
    }

    #[test]
    fn mean_forcing_is_real_and_conjugation_symmetric() {
        let d = disc();
        let s = populated(&d, 3);
        let fields = Fields::new(&s, &elliptic_solvers(3, &d).unwrap(), &d).unwrap();
        for k in 1..=3i64 {
            let plus = fields.convolve(&fields.u1, &fields.w, k);
            let minus = fields.convolve(&fields.u1, &fields.w, -k);
            assert!(plus.iter().zip(&minus).all(|(a, b)| (a - b.conj()).norm() < 1e-14));
        }
        let m = fields.convolve(&fields.u2, &fields.w, 0);
        assert!(m.iter().all(|v| v.im.abs() < 1e-14));
    }

    #[test]
    fn initial_data_is_normalized_and_compatible() {
        let d = Discretization::new(64).unwrap();
        let s = PerturbationState::initial(0.25, 8, &d).unwrap();
        let phi = EllipticSolver::new(1.0, &d).unwrap().solve(&s.modes[0]).unwrap();
        let got = h2_norm_of_mode(&phi, 1.0, &d);
        assert!((got / 0.25 - 1.0).abs() < 1e-8, "{got}");
        assert!(crate::evolution::relative_moment_defect(&s.modes[0], 1.0, &d) < 1e-12);
    }

    #[test]
    fn zero_data_stays_zero() {
        let d = disc();
        let s = PerturbationState::zero(3, &d);
        let next = advance(&s, 1e-2, 0.01, &d).unwrap();
        assert_eq!(next.modes, s.modes);
        assert_eq!(next.mean_shear, s.mean_shear);
    }

    #[test]
    fn linear_runs_match_the_evolution_module() {
        let nu = 1e-3;
        let order = grid_order_for(nu, 1.0).unwrap();
        let d = Discretization::new(order).unwrap();
        let dt = max_dt(nu, 2);
        let t_end = 5.0;
        let state0 = PerturbationState::initial(1.0, 2, &d).unwrap();
        let case = EvolutionCase::new(nu, 1, state0.modes[0].clone(), dt, t_end, BoundaryCondition::NonSlip).unwrap();
        let mut case = case;
        case.forcing = crate::evolution::EvolutionForcing::Separable {
            f1: vec![zero(); d.len()],
            f2: vec![zero(); d.len()],
            profile: crate::evolution::TimeProfile::Constant,
        };
        let reference = run_with_trajectory(&case).unwrap().final_state.omega;
        let mut stepper = NonlinearStepper::new(nu, dt, 2, &d, false).unwrap();
        let mut s = state0;
        for _ in 0..(t_end / dt).round() as usize {
            s = stepper.advance(&s).unwrap();
        }
        let diff: Vec<Complex64> = s.modes[0].iter().zip(&reference).map(|(a, b)| a - b).collect();
        assert!(d.grid.l2_norm(&diff) <= 1e-6 * d.grid.l2_norm(&reference));
    }

    #[test]
    fn enstrophy_transfer_is_boundary_free() {
        let d = Discretization::new(96).unwrap();
        let s = populated(&d, 4);
        let (total, scale) = enstrophy_transfer(&s, &d).unwrap();
        assert!(scale > 0.0 && total.abs() <= 1e-6 * scale, "{total:e} vs {scale:e}");
    }

    #[test]
    fn mean_momentum_changes_by_wall_flux_only() {
        let d = Discretization::new(96).unwrap();
        let s = populated(&d, 4);
        let f = nonlinear_rhs(&s, &d).unwrap();
        let total: f64 = f.mean.iter().zip(d.grid.quad_weights()).map(|(v, q)| v * q).sum();
        let size: f64 = f.mean.iter().zip(d.grid.quad_weights()).map(|(v, q)| v.abs() * q).sum();
        assert!(total.abs() <= 1e-6 * size, "{total:e} vs {size:e}");
    }

    #[test]
    fn energy_of_degenerate_histories() {
        let d = disc();
        assert_eq!(energy(&[], 1e-3, 0.1, &d).unwrap(), EnergyFunctional::default());
        let zero_state = PerturbationState::zero(2, &d);
        let e = energy(&[zero_state], 1e-3, 0.1, &d).unwrap();
        assert_eq!(e.total, 0.0);
        let s = populated(&d, 2);
        let a = energy(std::slice::from_ref(&s), 1e-3, 0.1, &d).unwrap();
        let b = energy(std::slice::from_ref(&s), 1e-3, 0.4, &d).unwrap();
        // L∞ parts equal, L² parts scale with sqrt(dt)
        assert_eq!(a.e0, b.e0);
        let k = 1.0f64;
        let l2_a = a.ek[0] - energy(std::slice::from_ref(&s), 1e-3, 0.0, &d).unwrap().ek[0];
        let l2_b = b.ek[0] - energy(std::slice::from_ref(&s), 1e-3, 0.0, &d).unwrap().ek[0];
        assert!((l2_b / l2_a - 2.0).abs() < 1e-12 && k > 0.0);
    }

    #[test]
    fn small_amplitude_run_is_stable() {
        let mut cfg = NonlinearConfig::new(1e-2, 0.01 * 0.1);
        cfg.k_max = 4;
        cfg.t_end = Some(10.0);
        let r = simulate(&cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Stable);
        assert!(r.blow_up.is_none() && r.energy.total > 0.0);
    }

    #[test]
    fn probe_rejects_bad_brackets() {
        assert!(ThresholdProbe::new(vec![1e-3], 2.0, 1.0).is_err());
        assert!(ThresholdProbe::new(vec![1e-6], 1.0, 2.0).is_err());
    }
}

use couette_core::estimates::{mirror_defect, relative_distance};
use couette_core::linalg;
use couette_core::resolvent::{
    homogeneous_airy, homogeneous_bvp, interior_operator, moment_vorticity_operator, scaled_moments,
    smallest_singular_value, solve_navier, solve_navier_stream, solve_nonslip, BoundaryCondition, Discretization,
    Forcing, NonslipPath, PairSource, ResolventCase,
};
use couette_core::spectral::apply_real;
use couette_core::Complex64;

fn eiy(disc: &Discretization) -> Forcing {
    Forcing::from_fn(disc, |y| Complex64::new(0.0, y).exp())
}

fn nonslip(nu: f64, k: i64, lambda: f64) -> ResolventCase {
    ResolventCase::new(nu, k, lambda, 0.0, BoundaryCondition::NonSlip).unwrap()
}

#[test]
fn nonslip_paths_agree() {
    for k in [2, -2] {
        let case = nonslip(1e-3, k, 0.5);
        let disc = Discretization::for_case(&case).unwrap();
        let f = eiy(&disc);
        let reference = solve_nonslip(&case, &f, &disc, NonslipPath::Moment).unwrap();
        for path in [
            NonslipPath::Monolithic,
            NonslipPath::Decomposed(PairSource::BoundaryValueProblem),
            NonslipPath::Decomposed(PairSource::Airy),
        ] {
            let s = solve_nonslip(&case, &f, &disc, path).unwrap();
            let d = relative_distance(&disc.grid, &s.w, &reference.w);
            assert!(d < 1e-7, "k = {k}, {path:?}: {d:e}");
            let dp = relative_distance(&disc.grid, &s.phi, &reference.phi);
            assert!(dp < 1e-7, "k = {k}, {path:?}: phi {dp:e}");
        }
    }
}

#[test]
fn nonslip_solution_satisfies_moment_and_clamp_conditions() {
    let case = nonslip(1e-3, 2, 0.5);
    let disc = Discretization::for_case(&case).unwrap();
    let s = solve_nonslip(&case, &eiy(&disc), &disc, NonslipPath::Decomposed(PairSource::Airy)).unwrap();
    let (p, m) = scaled_moments(&s.w, case.kf(), &disc);
    let scale = disc.grid.l2_norm(&s.w);
    assert!(p.norm() < 1e-10 * scale && m.norm() < 1e-10 * scale, "{p} {m}");
    let n = disc.order();
    let dphi = apply_real(&disc.ops.d1, &s.phi);
    let pscale = dphi.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(dphi[0].norm() < 1e-8 * pscale && dphi[n].norm() < 1e-8 * pscale);
    let phi_scale = s.phi.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(s.phi[0].norm() < 1e-13 * phi_scale && s.phi[n].norm() < 1e-13 * phi_scale);
}

#[test]
fn navier_paths_agree_and_satisfy_boundary_conditions() {
    let case = ResolventCase::new(1e-3, 3, -0.2, 0.0, BoundaryCondition::NavierSlip).unwrap();
    let disc = Discretization::for_case(&case).unwrap();
    let f = eiy(&disc);
    let a = solve_navier(&case, &f, &disc).unwrap();
    let b = solve_navier_stream(&case, &f, &disc).unwrap();
    assert!(relative_distance(&disc.grid, &b.w, &a.w) < 1e-7);
    let n = disc.order();
    let scale = a.w.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(a.w[0].norm() < 1e-13 * scale && a.w[n].norm() < 1e-13 * scale);
}

#[test]
fn grid_doubling_changes_little() {
    for bc in [BoundaryCondition::NavierSlip, BoundaryCondition::NonSlip] {
        let case = ResolventCase::new(1e-4, 2, 0.3, 0.0, bc).unwrap();
        let coarse = Discretization::for_case(&case).unwrap();
        let fine = Discretization::new(2 * coarse.order()).unwrap();
        let solve = |d: &Discretization| match bc {
            BoundaryCondition::NavierSlip => solve_navier(&case, &eiy(d), d).unwrap(),
            BoundaryCondition::NonSlip => solve_nonslip(&case, &eiy(d), d, NonslipPath::Moment).unwrap(),
        };
        let wc = solve(&coarse).w;
        let wf = solve(&fine).w;
        let on_fine = coarse.grid.interpolate(&wc, fine.nodes()).unwrap();
        let d = relative_distance(&fine.grid, &on_fine, &wf);
        assert!(d < 1e-8, "{bc:?}: {d:e}");
    }
}

#[test]
fn shift_enters_as_a_diagonal_term() {
    let case = ResolventCase::new(1e-3, 1, 0.1, 0.02, BoundaryCondition::NavierSlip).unwrap();
    let disc = Discretization::for_case(&case).unwrap();
    let f = eiy(&disc);
    let s = solve_navier(&case, &f, &disc).unwrap();
    let unshifted = ResolventCase { epsilon: 0.0, ..case };
    let a = interior_operator(&unshifted, &disc);
    let aw = linalg::matvec(&a, &s.w);
    let Forcing::Direct(fv) = f else { unreachable!() };
    let shift = case.shift();
    assert!(shift > 0.0);
    let n = disc.order();
    for j in 1..n {
        let r = aw[j] - shift * s.w[j] - fv[j];
        assert!(r.norm() < 1e-8, "row {j}: {r}");
    }
}

#[test]
fn airy_pair_matches_boundary_value_pair() {
    for (nu, k, lambda) in [(1e-3, 2, 0.3), (1e-4, 1, 0.0), (1e-5, 10, -0.7), (1e-3, -2, 0.3)] {
        let case = nonslip(nu, k, lambda);
        let disc = Discretization::for_case(&case).unwrap();
        let a = homogeneous_airy(&case, &disc).unwrap();
        let b = homogeneous_bvp(&case, &disc).unwrap();
        let d1 = relative_distance(&disc.grid, &a.w1, &b.w1);
        let d2 = relative_distance(&disc.grid, &a.w2, &b.w2);
        assert!(d1 < 1e-6 && d2 < 1e-6, "({nu}, {k}, {lambda}): {d1:e} {d2:e}");
    }
}

#[test]
fn airy_moments_are_boundary_dominated() {
    let case = nonslip(1e-4, 1, 0.0);
    let disc = Discretization::for_case(&case).unwrap();
    let pair = homogeneous_airy(&case, &disc).unwrap();
    let c = pair.airy.unwrap();
    let ratio = (c.a1.ln_abs() - c.b1.ln_abs()).exp();
    assert!(ratio.is_finite() && ratio > 0.0);
    assert!(c.relative_det > 1e-12);
}

#[test]
fn airy_hypothesis_is_enforced() {
    let case = nonslip(1e-1, 5, 0.0);
    let disc = Discretization::new(32).unwrap();
    assert!(homogeneous_airy(&case, &disc).is_err());
}

#[test]
fn homogeneous_pair_is_mirror_symmetric() {
    let case = nonslip(1e-3, 2, 0.4);
    let disc = Discretization::for_case(&case).unwrap();
    for source in [PairSource::BoundaryValueProblem, PairSource::Airy] {
        let d = mirror_defect(&case, &disc, source).unwrap();
        assert!(d < 1e-9, "{source:?}: {d:e}");
    }
}

#[test]
fn velocity_energy_equals_vorticity_pairing() {
    let case = nonslip(1e-3, 2, -0.3);
    let disc = Discretization::for_case(&case).unwrap();
    let s = solve_nonslip(&case, &eiy(&disc), &disc, NonslipPath::Moment).unwrap();
    let u2 = disc.grid.l2_norm(&s.u1).powi(2) + disc.grid.l2_norm(&s.u2).powi(2);
    let pairing = -disc.grid.inner(&s.w, &s.phi).unwrap();
    assert!((pairing.re - u2).abs() < 1e-8 * u2 && pairing.im.abs() < 1e-8 * u2);
}

#[test]
fn interior_operator_is_accretive_on_dirichlet_functions() {
    let case = ResolventCase::new(1e-3, 4, 0.2, 0.0, BoundaryCondition::NavierSlip).unwrap();
    let disc = Discretization::new(96).unwrap();
    let a = interior_operator(&case, &disc);
    let f: Vec<Complex64> = disc.nodes().iter().map(|&y| Complex64::new(1.0 - y * y, y * (1.0 - y * y))).collect();
    let af = linalg::matvec(&a, &f);
    let re = disc.grid.inner(&af, &f).unwrap().re;
    let df = apply_real(&disc.ops.d1, &f);
    let expect = case.nu * disc.grid.l2_norm(&df).powi(2) + case.nu * 16.0 * disc.grid.l2_norm(&f).powi(2);
    assert!(re > 0.0 && (re - expect).abs() < 1e-10 * expect, "{re} vs {expect}");
}

#[test]
fn moment_operator_is_well_conditioned() {
    let case = nonslip(1e-3, 1, 0.0);
    let disc = Discretization::new(64).unwrap();
    let s = smallest_singular_value(&moment_vorticity_operator(&case, &disc)).unwrap();
    assert!(s > 1e-10, "{s:e}");
}

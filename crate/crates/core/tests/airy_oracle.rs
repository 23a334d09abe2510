//! Airy kernel against the exact-arithmetic Maclaurin oracle.

use std::f64::consts::{FRAC_PI_6, PI};

use couette_core::airy::{self, a0, airy, damping, log_derivative_sup, AiryMethod, DELTA_0};
use num_complex::Complex64;

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

/// Deterministic scatter over `|z| <= radius` (golden-angle spiral).
fn scatter(count: usize, radius: f64) -> Vec<Complex64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let r = radius * ((i as f64 + 0.5) / count as f64).sqrt();
            Complex64::from_polar(r, i as f64 * golden)
        })
        .collect()
}

#[test]
fn oracle_reproduces_origin_constants() {
    let (ai, aip, int) = couette_oracle::airy(Complex64::new(0.0, 0.0));
    assert!((ai.re - airy::AI0).abs() < 1e-17);
    assert!((aip.re - airy::AIP0).abs() < 1e-17);
    assert_eq!(int, Complex64::new(0.0, 0.0));
    let b = airy(Complex64::new(0.0, 0.0)).unwrap();
    assert!(rel(b.ai(), ai) < 1e-11);
    assert!(rel(b.ai_prime(), aip) < 1e-11);
    assert!(rel(a0(Complex64::new(0.0, 0.0)).unwrap().value(), Complex64::new(1.0 / 3.0, 0.0)) < 1e-9);
}

#[test]
fn airy_matches_oracle_up_to_radius_40() {
    let mut pts = scatter(160, 40.0);
    pts.extend([
        Complex64::new(2.5, 0.0),
        Complex64::new(12.0, 0.0),
        Complex64::new(-12.0, 0.0),
        Complex64::new(6.5, 0.1),
        Complex64::new(-30.0, 1.0),
        Complex64::new(40.0, 0.0),
        Complex64::new(0.0, 40.0),
        Complex64::new(-9.0, -0.5),
    ]);
    let mut worst: f64 = 0.0;
    for z in pts {
        let (ai, aip, _) = couette_oracle::airy(z);
        let b = airy(z).unwrap();
        let e = rel(b.ai(), ai).max(rel(b.ai_prime(), aip));
        worst = worst.max(e);
        assert!(e < 1e-11, "z = {z}: relative error {e:e} ({:?})", b.method);
    }
    println!("worst Airy relative error {worst:e}");
}

#[test]
fn a0_matches_oracle_on_the_half_plane() {
    let pts: Vec<Complex64> = scatter(200, 40.0)
        .into_iter()
        .map(|z| if z.im > DELTA_0 { z.conj() } else { z })
        .chain([Complex64::new(-2.0, 0.1), Complex64::new(4.0, 0.0), Complex64::new(-40.0, 0.2)])
        .collect();
    let mut worst: f64 = 0.0;
    for z in pts {
        let exact = couette_oracle::a0(z);
        let v = a0(z).unwrap();
        let e = rel(v.value(), exact);
        worst = worst.max(e);
        assert!(e < 1e-9, "z = {z}: relative error {e:e}");
        let rot = Complex64::from_polar(1.0, FRAC_PI_6);
        let d = -rot * airy(rot * z).unwrap().ai();
        assert!(rel(v.derivative(), d) < 1e-15);
    }
    println!("worst A0 relative error {worst:e}");
}

#[test]
fn a0_at_origin_by_quadrature_along_the_ray() {
    // ∫_0^∞ Ai(e^{iπ/6} t) e^{iπ/6} dt by composite Gauss–Legendre
    let (gx, gw) = couette_core::spectral::gauss_legendre(20);
    let rot = Complex64::from_polar(1.0, FRAC_PI_6);
    let mut sum = Complex64::new(0.0, 0.0);
    for p in 0..60 {
        let (a, b) = (p as f64 * 0.5, (p + 1) as f64 * 0.5);
        for (x, w) in gx.iter().zip(&gw) {
            let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
            sum += airy(rot * t).unwrap().ai() * rot * (0.5 * (b - a) * w);
        }
    }
    assert!(rel(sum, Complex64::new(1.0 / 3.0, 0.0)) < 1e-12);
    assert!(rel(a0(Complex64::new(0.0, 0.0)).unwrap().value(), sum) < 1e-9);
}

#[test]
fn wronskian_at_scattered_points() {
    for z in scatter(20, 6.0) {
        let a = airy(z).unwrap();
        let (bi, bip) = airy::airy_bi(z).unwrap();
        let w = a.ai() * bip - a.ai_prime() * bi;
        assert!((w * PI - 1.0).norm() < 1e-9, "z = {z}");
    }
}

#[test]
fn ode_residual_through_taylor_transport() {
    // (Ai, Ai') at z transported by the recurrence to z + h must match the
    // independently evaluated pair at z + h
    let h = Complex64::new(0.05, -0.03);
    for z in scatter(100, 20.0) {
        let a = airy(z).unwrap();
        let b = airy(z + h).unwrap();
        let (y, dy, _) = airy::taylor_step(z, a.ai(), a.ai_prime(), h);
        let scale = 1.0 + b.ai().norm() * z.norm();
        assert!((y - b.ai()).norm() < 1e-9 * scale, "z = {z}");
        assert!((dy - b.ai_prime()).norm() < 1e-9 * (1.0 + b.ai_prime().norm() * z.norm()));
    }
}

#[test]
fn rotated_solution_solves_the_slanted_equation() {
    // f(y) = Ai(e^{iπ/6} y): f'' = i y f, checked by a fourth-order stencil
    let rot = Complex64::from_polar(1.0, FRAC_PI_6);
    let f = |y: f64| airy(rot * y).unwrap().ai();
    let h = 1e-2;
    for i in 0..40 {
        let y = -6.0 + 0.3 * i as f64;
        let d2 = (-f(y + 2.0 * h) + 16.0 * f(y + h) - 30.0 * f(y) + 16.0 * f(y - h) - f(y - 2.0 * h))
            / (12.0 * h * h);
        let res = d2 - Complex64::new(0.0, y) * f(y);
        assert!(res.norm() < 1e-7 * (1.0 + f(y).norm() * y.abs()), "y = {y}");
    }
}

#[test]
fn maclaurin_and_asymptotic_agree_on_overlap() {
    // the annulus 6.5 <= |z| <= 7 outside the decaying sector: the series
    // still has digits to spare and the asymptotic remainder is ~e^{-2|ξ|}
    for i in 0..40 {
        let r = 6.5 + 0.5 * i as f64 / 40.0;
        let arg = PI / 2.0 + (PI / 2.0) * (i as f64 / 39.0);
        for s in [1.0, -1.0] {
            let z = Complex64::from_polar(r, s * arg);
            let (m, md) = airy::airy_maclaurin(z);
            let (a, ad) = airy::airy_asymptotic(z);
            assert!(rel(m, a.to_complex()) < 1e-9, "z = {z}");
            assert!(rel(md, ad.to_complex()) < 1e-9, "z = {z}");
        }
    }
    assert_eq!(airy(Complex64::new(20.0, 0.0)).unwrap().method, AiryMethod::Asymptotic);
}

#[test]
fn a0_decays_along_the_positive_axis() {
    let mut prev = f64::INFINITY;
    for i in 0..100 {
        let m = a0(Complex64::new(5.0 + 0.35 * i as f64, 0.0)).unwrap().a0.ln_abs();
        assert!(m < prev);
        prev = m;
    }
}

#[test]
fn a0_is_zero_free_on_the_band() {
    // a zero would show up as an unbounded logarithmic derivative
    let mut worst: f64 = 0.0;
    for i in 0..321 {
        for j in 0..21 {
            let z = Complex64::new(-40.0 + 0.25 * i as f64, DELTA_0 - 0.25 * j as f64);
            if z.norm() > 40.0 {
                continue;
            }
            let v = a0(z).unwrap();
            assert!(!v.a0.is_zero());
            worst = worst.max(v.log_derivative().norm() / (1.0 + z.norm().sqrt()));
        }
    }
    assert!(worst < 5.0, "log-derivative ratio {worst}");
}

#[test]
fn log_derivative_supremum_at_zero() {
    let a = log_derivative_sup(0.0).unwrap();
    assert!((a + 0.4843).abs() < 5e-4, "a(0) = {a}");
    assert!(a < -1.0 / 3.0);
}

#[test]
fn log_derivative_band_edges() {
    let a1 = log_derivative_sup(airy::DELTA_1).unwrap();
    assert!(a1 <= -1.0 / 3.0, "a(delta_1) = {a1}");
    let a0_edge = log_derivative_sup(DELTA_0).unwrap();
    // the wider band is zero-free but loses the -1/3 margin
    assert!(a0_edge > -1.0 / 3.0 && a0_edge < 0.0);
}

#[test]
fn log_derivative_large_real_argument() {
    let x = 100.0;
    let ld = a0(Complex64::new(x, 0.0)).unwrap().log_derivative();
    let asym = airy::log_derivative_asymptotic(Complex64::new(x, 0.0));
    assert!(((ld.re - asym.re) / asym.re).abs() < 0.05);
    assert!((asym.re + (0.5f64).sqrt() * x.sqrt()).abs() < 1e-12);
}

#[test]
fn log_derivative_bounds_on_the_lower_band() {
    let mut big_c: f64 = 0.0;
    let mut small_c = f64::INFINITY;
    for i in 0..81 {
        for j in 0..41 {
            let z = Complex64::new(-40.0 + i as f64, DELTA_0 - j as f64);
            if z.norm() > 40.0 {
                continue;
            }
            let ld = a0(z).unwrap().log_derivative();
            let w = 1.0 + z.norm().sqrt();
            big_c = big_c.max(ld.norm() / w);
            small_c = small_c.min(-ld.re / w);
        }
    }
    println!("|A0'/A0| <= {big_c:.4} (1 + |z|^1/2), Re A0'/A0 <= -{small_c:.4} (1 + |z|^1/2)");
    assert!(big_c.is_finite() && big_c < 5.0);
    assert!(small_c > 0.0);
}

#[test]
fn damping_properties() {
    let exact = couette_oracle::a0(Complex64::new(4.0, 0.0)) / couette_oracle::a0(Complex64::new(0.0, 0.0));
    let w = damping(Complex64::new(0.0, 0.0), 4.0).unwrap();
    assert!(rel(w.omega, exact) < 1e-9);
    let mut cmin = f64::INFINITY;
    for i in 0..30 {
        let z = Complex64::new(-8.0 + 0.6 * i as f64, airy::DELTA_1 - 0.05 * (i % 4) as f64);
        for j in 1..20 {
            let x = 0.5 * j as f64;
            let d = damping(z, x).unwrap();
            assert!(d.omega.norm() <= (-x / 3.0).exp() * (1.0 + 1e-12), "z = {z}, x = {x}");
            cmin = cmin.min(-d.omega.norm().ln() / x.powf(1.5));
            let split = damping(z, 0.4 * x).unwrap().omega * damping(z + 0.4 * x, 0.6 * x).unwrap().omega;
            assert!(rel(split, d.omega) < 1e-10);
        }
    }
    println!("empirical c in |omega| <= exp(-c x^1.5): {cmin:.4}");
    assert!(cmin > 0.0);
}

#[test]
fn damping_matches_integrated_log_derivative() {
    let z = Complex64::new(-2.0, 0.0);
    let x = 3.0;
    let (gx, gw) = couette_core::spectral::gauss_legendre(40);
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..6 {
        let (a, b) = (p as f64 * 0.5, (p + 1) as f64 * 0.5);
        for (t, w) in gx.iter().zip(&gw) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * t;
            acc += a0(z + s).unwrap().log_derivative() * (0.5 * (b - a) * w);
        }
    }
    let d = damping(z, x).unwrap();
    assert!(rel(acc.exp(), d.omega) < 1e-8);
}

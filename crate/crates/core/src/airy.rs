//! Complex Airy function, the slanted primitive `A0`, its logarithmic
//! derivative and the damping factor `A0(z + x) / A0(z)`.
//!
//! Three evaluation regimes are used:
//! * `|z| <= 2.5`: Maclaurin series;
//! * `|z| >= 12`: Poincaré asymptotics, with the connection formula outside
//!   `|arg z| <= 2π/3`;
//! * in between: Taylor continuation along the ray through `z`, started
//!   from whichever end keeps the propagated solution non-decaying.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_6, LN_10, PI};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `Ai(0)`.
pub const AI0: f64 = 0.355_028_053_887_817_239_260_063_186_004;
/// `Ai'(0)`.
pub const AIP0: f64 = -0.258_819_403_792_806_798_405_183_560_189;

/// Radius of the Maclaurin disc.
pub const MACLAURIN_RADIUS: f64 = 2.5;
/// Radius beyond which the asymptotic expansion is used.
pub const ASYMPTOTIC_RADIUS: f64 = 12.0;
/// Largest Taylor step used for continuation.
const MAX_STEP: f64 = 0.75;

/// Half-width of the strip `Im z <= DELTA_0` on which `A0` is zero-free.
pub const DELTA_0: f64 = 0.2;
/// Strip on which `sup Re(A0'/A0) <= -1/3`; `a(0.2) ≈ -0.31` is too large,
/// so the damping estimates are restricted to the narrower band.
pub const DELTA_1: f64 = 0.15;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Complex number with a separate decimal exponent, `mantissa · 10^exp10`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: Complex64,
    pub exp10: i32,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { mantissa: Complex64 { re: 0.0, im: 0.0 }, exp10: 0 };
    pub const ONE: Scaled = Scaled { mantissa: Complex64 { re: 1.0, im: 0.0 }, exp10: 0 };

    pub fn new(mantissa: Complex64, exp10: i32) -> Self {
        Scaled { mantissa, exp10 }.normalized()
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z, 0)
    }

    /// `e^{log}` without overflow.
    pub fn from_exp(log: Complex64) -> Self {
        let e = (log.re / LN_10).floor();
        let rest = log.re - e * LN_10;
        Self::new(Complex64::from_polar(rest.exp(), log.im), e as i32)
    }

    fn normalized(self) -> Self {
        let a = self.mantissa.norm();
        if a == 0.0 || !a.is_finite() {
            return Scaled { mantissa: self.mantissa, exp10: if a == 0.0 { 0 } else { self.exp10 } };
        }
        let shift = a.log10().floor() as i32;
        Scaled {
            mantissa: self.mantissa * 10f64.powi(-shift),
            exp10: self.exp10 + shift,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.norm() == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.mantissa.re.is_finite() && self.mantissa.im.is_finite()
    }

    /// Plain value; overflows to infinity or underflows to zero when out of range.
    pub fn to_complex(&self) -> Complex64 {
        if self.exp10 > 330 {
            return self.mantissa * f64::INFINITY;
        }
        if self.exp10 < -345 {
            return Complex64::new(0.0, 0.0);
        }
        // split to keep the intermediate power representable
        let half = self.exp10 / 2;
        self.mantissa * 10f64.powi(half) * 10f64.powi(self.exp10 - half)
    }

    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.exp10 as f64 * LN_10
    }

    pub fn log10_abs(&self) -> f64 {
        self.mantissa.norm().log10() + self.exp10 as f64
    }

    pub fn conj(&self) -> Self {
        Scaled { mantissa: self.mantissa.conj(), exp10: self.exp10 }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.mantissa * s, self.exp10)
    }
}

impl Mul for Scaled {
    type Output = Scaled;
    fn mul(self, rhs: Scaled) -> Scaled {
        Scaled::new(self.mantissa * rhs.mantissa, self.exp10 + rhs.exp10)
    }
}

impl Div for Scaled {
    type Output = Scaled;
    fn div(self, rhs: Scaled) -> Scaled {
        Scaled::new(self.mantissa / rhs.mantissa, self.exp10 - rhs.exp10)
    }
}

impl Add for Scaled {
    type Output = Scaled;
    fn add(self, rhs: Scaled) -> Scaled {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.exp10 >= rhs.exp10 { (self, rhs) } else { (rhs, self) };
        let gap = big.exp10 - small.exp10;
        if gap > 40 {
            return big;
        }
        Scaled::new(big.mantissa + small.mantissa * 10f64.powi(-gap), big.exp10)
    }
}

impl Neg for Scaled {
    type Output = Scaled;
    fn neg(self) -> Scaled {
        Scaled { mantissa: -self.mantissa, exp10: self.exp10 }
    }
}

impl Sub for Scaled {
    type Output = Scaled;
    fn sub(self, rhs: Scaled) -> Scaled {
        self + (-rhs)
    }
}

/// Which expansion produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AiryMethod {
    Maclaurin,
    Asymptotic,
    TaylorContinuation,
}

/// `Ai(z)` and `Ai'(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryBundle {
    pub z: Complex64,
    pub ai: Scaled,
    pub ai_prime: Scaled,
    pub method: AiryMethod,
}

impl AiryBundle {
    pub fn ai(&self) -> Complex64 {
        self.ai.to_complex()
    }

    pub fn ai_prime(&self) -> Complex64 {
        self.ai_prime.to_complex()
    }
}

/// One Taylor step of `y'' = z y` from centre `z0` by `h`.
///
/// Returns `(y(z0 + h), y'(z0 + h), ∫_{z0}^{z0 + h} y)`.
pub fn taylor_step(
    z0: Complex64,
    y: Complex64,
    dy: Complex64,
    h: Complex64,
) -> (Complex64, Complex64, Complex64) {
    if h.norm() == 0.0 {
        return (y, dy, Complex64::new(0.0, 0.0));
    }
    // b_n = a_n h^n
    let h2c = h * h * z0;
    let h3 = h * h * h;
    let mut bm1 = Complex64::new(0.0, 0.0);
    let mut b0 = y;
    let mut b1 = dy * h;
    let mut val = b0 + b1;
    let mut der = b1;
    let mut int = b0 + b1 / 2.0;
    let mut biggest = b0.norm().max(b1.norm());
    let mut quiet = 0;
    for n in 0..400usize {
        let nf = n as f64;
        let b2 = (h2c * b0 + h3 * bm1) / ((nf + 1.0) * (nf + 2.0));
        val += b2;
        der += b2 * (nf + 2.0);
        int += b2 / (nf + 3.0);
        let m = b2.norm();
        biggest = biggest.max(m);
        if m <= 1e-18 * biggest {
            quiet += 1;
            if quiet >= 3 && n > 4 {
                break;
            }
        } else {
            quiet = 0;
        }
        bm1 = b0;
        b0 = b1;
        b1 = b2;
    }
    (val, der / h, int * h)
}

/// Maclaurin evaluation. Accurate for moderate `|z|`, loses digits where
/// `Ai` is exponentially small.
pub fn airy_maclaurin(z: Complex64) -> (Complex64, Complex64) {
    let (ai, aip, _) = taylor_step(c(0.0, 0.0), c(AI0, 0.0), c(AIP0, 0.0), z);
    (ai, aip)
}

const N_ASY: usize = 64;

fn asymptotic_coefficients() -> &'static ([f64; N_ASY], [f64; N_ASY]) {
    use std::sync::OnceLock;
    static COEFFS: OnceLock<([f64; N_ASY], [f64; N_ASY])> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let mut u = [0.0; N_ASY];
        let mut v = [0.0; N_ASY];
        u[0] = 1.0;
        v[0] = 1.0;
        for k in 1..N_ASY {
            let kf = k as f64;
            u[k] = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
                / ((2.0 * kf - 1.0) * 216.0 * kf);
            v[k] = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u[k];
        }
        (u, v)
    })
}

/// Optimally truncated `Σ (-1)^k c_k ξ^{-k}`.
fn truncated_series(coeffs: &[f64], xi: Complex64) -> Complex64 {
    let inv = -1.0 / xi;
    let mut pow = c(1.0, 0.0);
    let mut sum = c(0.0, 0.0);
    let mut last = f64::INFINITY;
    for &ck in coeffs {
        let term = pow * ck;
        let m = term.norm();
        if m > last {
            break;
        }
        sum += term;
        if m <= 1e-17 * sum.norm() {
            break;
        }
        last = m;
        pow *= inv;
    }
    sum
}

/// Asymptotic expansion valid for `|arg z| <= 2π/3` and large `|z|`.
pub fn airy_asymptotic_sector(z: Complex64) -> (Scaled, Scaled) {
    let (u, v) = asymptotic_coefficients();
    let sqrt_z = z.sqrt();
    let quarter = sqrt_z.sqrt();
    let xi = z * sqrt_z * (2.0 / 3.0);
    let pref = Scaled::from_exp(-xi);
    let norm = 1.0 / (2.0 * PI.sqrt());
    let su = truncated_series(u, xi);
    let sv = truncated_series(v, xi);
    (pref.scale(su * norm / quarter), pref.scale(-sv * norm * quarter))
}

/// Asymptotic evaluation on the whole plane (connection formula outside
/// the central sector).
pub fn airy_asymptotic(z: Complex64) -> (Scaled, Scaled) {
    if z.arg().abs() <= 2.0 * FRAC_PI_3 {
        return airy_asymptotic_sector(z);
    }
    let w = Complex64::from_polar(1.0, 2.0 * FRAC_PI_3);
    let w2 = w * w;
    let (a1, d1) = airy_asymptotic_sector(w * z);
    let (a2, d2) = airy_asymptotic_sector(w2 * z);
    let ai = a1.scale(-w) + a2.scale(-w2);
    let aip = d1.scale(-w2) + d2.scale(-w);
    (ai, aip)
}

/// Path description for the intermediate annulus.
fn continuation_anchor(z: Complex64) -> (Complex64, bool) {
    let dir = z / z.norm();
    if z.arg().abs() <= FRAC_PI_3 {
        (dir * ASYMPTOTIC_RADIUS, true)
    } else {
        (dir * MACLAURIN_RADIUS, false)
    }
}

/// Steps `(y, y')` from `start` to `end`, returning the values at `end`
/// and `∫_start^end y`.
fn continue_along(
    start: Complex64,
    end: Complex64,
    mut y: Complex64,
    mut dy: Complex64,
) -> (Complex64, Complex64, Complex64) {
    let span = end - start;
    let steps = (span.norm() / MAX_STEP).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut integral = c(0.0, 0.0);
    let mut pos = start;
    for _ in 0..steps {
        let (ny, ndy, int) = taylor_step(pos, y, dy, h);
        y = ny;
        dy = ndy;
        integral += int;
        pos += h;
    }
    (y, dy, integral)
}

/// `Ai(z)` and `Ai'(z)` for any finite `z`.
pub fn airy(z: Complex64) -> Result<AiryBundle> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite Airy argument {z}")));
    }
    let r = z.norm();
    if r <= MACLAURIN_RADIUS {
        let (ai, aip) = airy_maclaurin(z);
        return Ok(AiryBundle {
            z,
            ai: Scaled::from_complex(ai),
            ai_prime: Scaled::from_complex(aip),
            method: AiryMethod::Maclaurin,
        });
    }
    if r >= ASYMPTOTIC_RADIUS {
        let (ai, aip) = airy_asymptotic(z);
        return Ok(AiryBundle { z, ai, ai_prime: aip, method: AiryMethod::Asymptotic });
    }
    let (anchor, from_outside) = continuation_anchor(z);
    let (y0, dy0) = if from_outside {
        let (a, d) = airy_asymptotic(anchor);
        (a.to_complex(), d.to_complex())
    } else {
        airy_maclaurin(anchor)
    };
    let (ai, aip, _) = continue_along(anchor, z, y0, dy0);
    Ok(AiryBundle {
        z,
        ai: Scaled::from_complex(ai),
        ai_prime: Scaled::from_complex(aip),
        method: AiryMethod::TaylorContinuation,
    })
}

/// `Bi(z)` and `Bi'(z)` assembled from the rotated solutions
/// `Ai(z e^{±2πi/3})`.
pub fn airy_bi(z: Complex64) -> Result<(Complex64, Complex64)> {
    let w = Complex64::from_polar(1.0, 2.0 * FRAC_PI_3);
    let p = Complex64::from_polar(1.0, FRAC_PI_6);
    let a = airy(w * z)?;
    let b = airy(w.conj() * z)?;
    let bi = p * a.ai() + p.conj() * b.ai();
    let bip = p * w * a.ai_prime() + p.conj() * w.conj() * b.ai_prime();
    Ok((bi, bip))
}

/// `∫_ζ^∞ Ai` by the asymptotic primitive
/// `I = a Ai + b Ai' + [|arg ζ| > 2π/3]`.
fn primitive_asymptotic(zeta: Complex64) -> Scaled {
    let (ai, aip) = airy_asymptotic(zeta);
    let inv3 = 1.0 / (zeta * zeta * zeta);
    let mut cn = 1.0f64;
    let mut pw = c(1.0, 0.0);
    let mut a = c(0.0, 0.0);
    let mut b = c(0.0, 0.0);
    let mut last = f64::INFINITY;
    for n in 0..200usize {
        let nf = n as f64;
        let tb = pw * cn / zeta;
        let ta = pw * (cn * (3.0 * nf + 1.0)) / (zeta * zeta);
        let m = tb.norm().max(ta.norm() / zeta.norm().max(1.0));
        if m > last {
            break;
        }
        b -= tb;
        a -= ta;
        if m <= 1e-18 * b.norm() {
            break;
        }
        last = m;
        cn *= (3.0 * nf + 1.0) * (3.0 * nf + 2.0);
        pw *= inv3;
    }
    let mut total = ai.scale(a) + aip.scale(b);
    if zeta.arg().abs() > 2.0 * FRAC_PI_3 {
        total = total + Scaled::ONE;
    }
    total
}

/// `∫_ζ^∞ Ai(t) dt` for any finite `ζ`.
pub fn airy_primitive_tail(zeta: Complex64) -> Scaled {
    let r = zeta.norm();
    if r <= MACLAURIN_RADIUS {
        let (_, _, int) = taylor_step(c(0.0, 0.0), c(AI0, 0.0), c(AIP0, 0.0), zeta);
        return Scaled::from_complex(c(1.0 / 3.0, 0.0) - int);
    }
    if r >= ASYMPTOTIC_RADIUS {
        return primitive_asymptotic(zeta);
    }
    let (anchor, from_outside) = continuation_anchor(zeta);
    if from_outside {
        let (a, d) = airy_asymptotic(anchor);
        let base = primitive_asymptotic(anchor).to_complex();
        let (_, _, int) = continue_along(anchor, zeta, a.to_complex(), d.to_complex());
        Scaled::from_complex(base - int)
    } else {
        let (y0, dy0, int0) = taylor_step(c(0.0, 0.0), c(AI0, 0.0), c(AIP0, 0.0), anchor);
        let (_, _, int) = continue_along(anchor, zeta, y0, dy0);
        Scaled::from_complex(c(1.0 / 3.0, 0.0) - int0 - int)
    }
}

/// `A0(z)` and `A0'(z) = -e^{iπ/6} Ai(e^{iπ/6} z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A0Value {
    pub z: Complex64,
    pub a0: Scaled,
    pub a0_prime: Scaled,
}

impl A0Value {
    pub fn value(&self) -> Complex64 {
        self.a0.to_complex()
    }

    pub fn derivative(&self) -> Complex64 {
        self.a0_prime.to_complex()
    }

    /// `A0'(z) / A0(z)`.
    pub fn log_derivative(&self) -> Complex64 {
        (self.a0_prime / self.a0).to_complex()
    }
}

/// Slanted primitive `A0(z) = ∫_{e^{iπ/6} z}^∞ Ai(t) dt`.
pub fn a0(z: Complex64) -> Result<A0Value> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite argument {z}")));
    }
    let rot = Complex64::from_polar(1.0, FRAC_PI_6);
    let zeta = rot * z;
    let ai = airy(zeta)?;
    Ok(A0Value { z, a0: airy_primitive_tail(zeta), a0_prime: ai.ai.scale(-rot) })
}

/// Leading-order `A0'/A0 ≈ -e^{iπ/6} (z e^{iπ/6})^{1/2}` for large `|z|`.
pub fn log_derivative_asymptotic(z: Complex64) -> Complex64 {
    let rot = Complex64::from_polar(1.0, FRAC_PI_6);
    -rot * (z * rot).sqrt()
}

fn re_log_derivative(x: f64, delta: f64) -> Result<f64> {
    Ok(a0(c(x, delta))?.log_derivative().re)
}

/// Sampling window for the supremum search; outside it the asymptotic
/// form is below `-3`, far beneath the maximum.
const SUP_WINDOW: (f64, f64) = (-40.0, 40.0);

/// `a(δ) = sup_x Re(A0'/A0)(x + iδ)`.
///
/// A uniform scan is refined around its maximiser, halving the spacing each
/// round, until two rounds agree to `1e-4`; a golden-section search then
/// polishes the maximiser.
pub fn log_derivative_sup(delta: f64) -> Result<f64> {
    if !(0.0..=DELTA_0).contains(&delta) {
        return Err(Error::Domain(format!("delta = {delta} outside [0, {DELTA_0}]")));
    }
    let (lo, hi) = SUP_WINDOW;
    let mut h = 0.25;
    let mut best_x = lo;
    let mut best = f64::NEG_INFINITY;
    let mut x = lo;
    while x <= hi {
        let v = re_log_derivative(x, delta)?;
        if v > best {
            best = v;
            best_x = x;
        }
        x += h;
    }
    let mut converged = false;
    for _ in 0..12 {
        let prev = best;
        h *= 0.5;
        for j in -4..=4 {
            let x = best_x + j as f64 * h;
            let v = re_log_derivative(x, delta)?;
            if v > best {
                best = v;
                best_x = x;
            }
        }
        if (best - prev).abs() < 1e-4 && h < 0.05 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("a(delta) refinement".into()));
    }
    let (mut a, mut b) = (best_x - 2.0 * h, best_x + 2.0 * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = re_log_derivative(x1, delta)?;
    let mut f2 = re_log_derivative(x2, delta)?;
    while b - a > 1e-7 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = re_log_derivative(x1, delta)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = re_log_derivative(x2, delta)?;
        }
    }
    Ok(best.max(f1).max(f2))
}

/// `ω(z, x) = A0(z + x) / A0(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingFactor {
    pub z: Complex64,
    pub x: f64,
    pub omega: Complex64,
}

pub fn damping(z: Complex64, x: f64) -> Result<DampingFactor> {
    if z.im > DELTA_1 {
        return Err(Error::Domain(format!("Im z = {} exceeds {DELTA_1}", z.im)));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("x must be non-negative, got {x}")));
    }
    if x == 0.0 {
        return Ok(DampingFactor { z, x, omega: c(1.0, 0.0) });
    }
    let num = a0(z + x)?.a0;
    let den = a0(z)?.a0;
    Ok(DampingFactor { z, x, omega: (num / den).to_complex() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn values_at_origin() {
        let b = airy(c(0.0, 0.0)).unwrap();
        assert_eq!(b.method, AiryMethod::Maclaurin);
        assert!((b.ai().re - 0.355_028_053_887_817_24).abs() < 1e-16);
        assert!((b.ai_prime().re + 0.258_819_403_792_806_8).abs() < 1e-16);
        let a = a0(c(0.0, 0.0)).unwrap();
        assert!((a.value() - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn known_real_values() {
        // reference values of Ai and Ai' at 1, -5, 5 and 15
        let cases = [
            (1.0, 0.135_292_416_312_881_4, -0.159_147_441_296_793_2),
            (-5.0, 0.350_761_009_024_114_3, 0.327_192_818_554_443_1),
            (5.0, 1.083_444_281_360_744_3e-4, -2.474_138_908_684_624_6e-4),
            (15.0, 2.164_962_520_737_992_3e-18, -8.420_567_954_017_772_8e-18),
        ];
        for (x, ai, aip) in cases {
            let b = airy(c(x, 0.0)).unwrap();
            assert!(rel(b.ai(), c(ai, 0.0)) < 1e-11, "x={x} {}", b.ai());
            assert!(rel(b.ai_prime(), c(aip, 0.0)) < 1e-11, "x={x} {}", b.ai_prime());
            assert!(b.ai().im.abs() < 1e-13 * b.ai().norm());
        }
    }

    #[test]
    fn positive_axis_is_positive_and_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let v = airy(c(0.2 * i as f64, 0.0)).unwrap().ai();
            assert!(v.re > 0.0 && v.re < prev);
            prev = v.re;
        }
    }

    #[test]
    fn conjugation_symmetry() {
        for z in [c(1.0, 2.0), c(-7.0, 3.0), c(13.0, -5.0), c(-20.0, 0.5)] {
            let a = airy(z).unwrap();
            let b = airy(z.conj()).unwrap();
            assert!(rel(b.ai(), a.ai().conj()) < 1e-12, "z={z}");
        }
    }

    #[test]
    fn wronskian_with_bi() {
        for z in [c(0.0, 0.0), c(1.0, 1.0), c(-3.0, 0.0)] {
            let a = airy(z).unwrap();
            let (bi, bip) = airy_bi(z).unwrap();
            let w = a.ai() * bip - a.ai_prime() * bi;
            assert!((w - c(1.0 / PI, 0.0)).norm() < 1e-12, "z={z} w={w}");
        }
    }

    #[test]
    fn scaled_range_beyond_f64() {
        let b = airy(c(200.0, 0.0)).unwrap();
        // log10 Ai(200) ≈ -819.1
        assert!(b.ai.log10_abs() < -800.0 && b.ai.log10_abs() > -840.0);
        assert_eq!(b.ai(), c(0.0, 0.0));
        let g = airy(c(-50.0, 150.0)).unwrap();
        assert!(g.ai.is_finite() && g.ai.exp10 > 300);
    }

    #[test]
    fn scaled_arithmetic() {
        let a = Scaled::from_exp(c(1000.0, 0.3));
        let b = Scaled::from_exp(c(-990.0, -0.3));
        let p = (a * b).to_complex();
        assert!((p - c(10f64.exp(), 0.0)).norm() < 1e-10 * 10f64.exp());
        let q = (a / a).to_complex();
        assert!((q - c(1.0, 0.0)).norm() < 1e-14);
        let s = Scaled::from_complex(c(3.0, 0.0)) + Scaled::from_complex(c(-1.0, 0.0));
        assert!((s.to_complex() - c(2.0, 0.0)).norm() < 1e-15);
        assert!((Scaled::from_exp(c(2.0, 0.0)).ln_abs() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn damping_basics() {
        assert_eq!(damping(c(0.0, 0.0), 0.0).unwrap().omega, c(1.0, 0.0));
        assert!(damping(c(0.0, 0.5), 1.0).is_err());
        assert!(damping(c(0.0, 0.0), -1.0).is_err());
        let w = damping(c(-1.0, 0.0), 6.0).unwrap();
        assert!(w.omega.norm() <= (-2.0f64).exp());
    }

    #[test]
    fn sup_rejects_outside_band() {
        assert!(log_derivative_sup(0.5).is_err());
        assert!(log_derivative_sup(-0.1).is_err());
    }
}

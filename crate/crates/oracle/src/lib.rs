//! Exact-arithmetic references for the Airy kernel.
//!
//! The ascending series are summed in binary fixed point with 800
//! fractional bits, so the cancellation that ruins the double-precision
//! series far from the origin is harmless here.

use std::f64::consts::FRAC_PI_6;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};

const BITS: u32 = 800;

const AI0_DIGITS: &str = "35502805388781723926006318600418317639797917419917724058332651030081004245012671295717424605404027168842044873034949583975829267044616193710504024002258538638400990260103571281905156820329024916964476618232796777024189895947961734890864062573238976014176400568";
const AIP0_DIGITS: &str = "25881940379280679840518356018920396347909113835493458221000181385610277267679028065419640582727538431337119321178913338127503595216762601478505098984841944663202964488880560187838330512695052512829334249799988357074907925906015895105094432208938405967357771933";

#[derive(Clone)]
struct Fx {
    re: BigInt,
    im: BigInt,
}

fn one() -> BigInt {
    BigInt::one() << BITS
}

fn from_decimal(digits: &str) -> BigInt {
    // 0.<digits> in fixed point
    let num: BigInt = digits.parse().unwrap();
    let den = BigInt::from(10u32).pow(digits.len() as u32);
    (num << BITS) / den
}

fn from_f64(x: f64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = if exp == 0 { (bits & ((1 << 52) - 1)) << 1 } else { (bits & ((1 << 52) - 1)) | (1 << 52) };
    let shift = exp - 1075 + BITS as i64;
    let m = BigInt::from(mant) * sign;
    if shift >= 0 {
        m << shift as u32
    } else {
        m >> (-shift) as u32
    }
}

fn to_f64(x: &BigInt) -> f64 {
    // drop low bits first so the integer part stays inside the f64 range
    let s = x.bits().saturating_sub(900) as i32;
    let head = (x >> s as u32).to_f64().unwrap();
    let e = s - BITS as i32;
    head * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
}

impl Fx {
    fn new(z: Complex64) -> Self {
        Fx { re: from_f64(z.re), im: from_f64(z.im) }
    }
    fn real(r: BigInt) -> Self {
        Fx { re: r, im: BigInt::zero() }
    }
    fn mul(&self, o: &Fx) -> Fx {
        Fx {
            re: (&self.re * &o.re - &self.im * &o.im) >> BITS,
            im: (&self.re * &o.im + &self.im * &o.re) >> BITS,
        }
    }
    fn div_int(&self, d: u64) -> Fx {
        Fx { re: &self.re / d, im: &self.im / d }
    }
    fn add(&self, o: &Fx) -> Fx {
        Fx { re: &self.re + &o.re, im: &self.im + &o.im }
    }
    fn sub(&self, o: &Fx) -> Fx {
        Fx { re: &self.re - &o.re, im: &self.im - &o.im }
    }
    fn scale(&self, r: &BigInt) -> Fx {
        Fx { re: (&self.re * r) >> BITS, im: (&self.im * r) >> BITS }
    }
    fn tiny(&self) -> bool {
        self.re.abs().bits() < 2 && self.im.abs().bits() < 2
    }
    fn to_c(&self) -> Complex64 {
        Complex64::new(to_f64(&self.re), to_f64(&self.im))
    }
}

/// `(Ai, Ai', ∫_0^z Ai)` to far beyond double precision.
pub fn airy(z: Complex64) -> (Complex64, Complex64, Complex64) {
    let c1 = from_decimal(AI0_DIGITS);
    let c2 = from_decimal(AIP0_DIGITS);
    let zf = Fx::new(z);
    let z2 = zf.mul(&zf);
    let z3 = z2.mul(&zf);
    // f = Σ t_k, g = Σ s_k with t_0 = 1, s_0 = z
    let mut t = Fx::real(one());
    let mut s = zf.clone();
    // f' = Σ q_k (q_1 = z²/2), g' = Σ r_k (r_0 = 1)
    let mut q = z2.div_int(2);
    let mut r = Fx::real(one());
    let mut f = t.clone();
    let mut g = s.clone();
    let mut fp = q.clone();
    let mut gp = r.clone();
    // ∫f = Σ t_k z/(3k+1), ∫g = Σ s_k z/(3k+2)
    let mut fi = t.mul(&zf);
    let mut gi = s.mul(&zf).div_int(2);
    for k in 0..2000u64 {
        t = t.mul(&z3).div_int((3 * k + 2) * (3 * k + 3));
        s = s.mul(&z3).div_int((3 * k + 3) * (3 * k + 4));
        q = q.mul(&z3).div_int((3 * k + 3) * (3 * k + 5));
        r = r.mul(&z3).div_int((3 * k + 1) * (3 * k + 3));
        f = f.add(&t);
        g = g.add(&s);
        fp = fp.add(&q);
        gp = gp.add(&r);
        fi = fi.add(&t.mul(&zf).div_int(3 * k + 4));
        gi = gi.add(&s.mul(&zf).div_int(3 * k + 5));
        if t.tiny() && s.tiny() && q.tiny() && r.tiny() && k > 10 {
            break;
        }
    }
    let ai = f.scale(&c1).sub(&g.scale(&c2));
    let aip = fp.scale(&c1).sub(&gp.scale(&c2));
    let int = fi.scale(&c1).sub(&gi.scale(&c2));
    (ai.to_c(), aip.to_c(), int.to_c())
}

/// `A0(z) = 1/3 - ∫_0^{e^{iπ/6} z} Ai` in exact arithmetic.
pub fn a0(z: Complex64) -> Complex64 {
    let zeta = Complex64::from_polar(1.0, FRAC_PI_6) * z;
    let c1 = from_decimal(AI0_DIGITS);
    let c2 = from_decimal(AIP0_DIGITS);
    let zf = Fx::new(zeta);
    let z3 = zf.mul(&zf).mul(&zf);
    let mut t = Fx::real(one());
    let mut s = zf.clone();
    let mut fi = t.mul(&zf);
    let mut gi = s.mul(&zf).div_int(2);
    for k in 0..2000u64 {
        t = t.mul(&z3).div_int((3 * k + 2) * (3 * k + 3));
        s = s.mul(&z3).div_int((3 * k + 3) * (3 * k + 4));
        fi = fi.add(&t.mul(&zf).div_int(3 * k + 4));
        gi = gi.add(&s.mul(&zf).div_int(3 * k + 5));
        if t.tiny() && s.tiny() && k > 10 {
            break;
        }
    }
    let third = Fx::real(one() / 3u32);
    third.sub(&fi.scale(&c1).sub(&gi.scale(&c2))).to_c()
}

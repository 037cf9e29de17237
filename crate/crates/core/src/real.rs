//! Scalar abstraction shared by the `f64` and double-double code paths.
//!
//! Gramians for large decay parameters are conditioned far beyond what `f64`
//! resolves (about 1e18 at seven modes and `omega = 10`), so the adjoint
//! eigen-solutions, Gramian assembly and factorizations are generic over
//! [`Real`] and run in [`Dd`] where it matters.

use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use num_complex::Complex;
use num_traits::Num;

/// Double-double scalar (about 32 significant digits).
pub type Dd = qd::Quad;

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Num
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    /// `exp(x) - 1` without cancellation near zero.
    fn exp_m1(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn pi() -> Self;
    /// Unit roundoff of the representation.
    fn epsilon() -> f64;

    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    fn from_usize(k: usize) -> Self {
        Self::from_f64(k as f64)
    }

    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn epsilon() -> f64 {
        f64::EPSILON
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

const DD_HALF_PI: Dd = qd::Quad(std::f64::consts::FRAC_PI_2, 6.123233995736766e-17);

impl Real for Dd {
    fn from_f64(x: f64) -> Self {
        qd::Quad(x, 0.0)
    }
    fn to_f64(self) -> f64 {
        self.0 + self.1
    }
    fn sqrt(self) -> Self {
        if self.0 == 0.0 {
            return self;
        }
        qd::Quad::sqrt(self)
    }
    fn exp(self) -> Self {
        qd::Quad::exp(self)
    }
    fn exp_m1(self) -> Self {
        if self.0.abs() > 0.5 {
            return qd::Quad::exp(self) - Dd::ONE;
        }
        let mut term = self;
        let mut sum = self;
        for j in 2..40 {
            term = term * self / Dd::from_f64(j as f64);
            sum += term;
            if term.0.abs() <= 1e-34 * sum.0.abs() {
                break;
            }
        }
        sum
    }
    fn sin(self) -> Self {
        dd_sin_cos(self).0
    }
    fn cos(self) -> Self {
        dd_sin_cos(self).1
    }
    fn pi() -> Self {
        Dd::PI
    }
    fn epsilon() -> f64 {
        1.2e-32
    }
    fn abs(self) -> Self {
        qd::Quad::abs(self)
    }
}

/// Sine and cosine in double-double: reduction by `pi/2`, then Taylor series
/// on `|r| <= pi/4`.
fn dd_sin_cos(x: Dd) -> (Dd, Dd) {
    if x.0 == 0.0 {
        return (Dd::ZERO, Dd::ONE);
    }
    let quadrant = (x.0 / DD_HALF_PI.0).round();
    let r = x - DD_HALF_PI * Dd::from_f64(quadrant);
    let r2 = r * r;

    let mut s = r;
    let mut term = r;
    for j in 1..30 {
        let j = j as f64;
        term = -term * r2 / Dd::from_f64((2.0 * j) * (2.0 * j + 1.0));
        s += term;
        if term.0.abs() <= 1e-34 {
            break;
        }
    }
    let mut c = Dd::ONE;
    let mut term = Dd::ONE;
    for j in 1..30 {
        let j = j as f64;
        term = -term * r2 / Dd::from_f64((2.0 * j - 1.0) * (2.0 * j));
        c += term;
        if term.0.abs() <= 1e-34 {
            break;
        }
    }
    match (quadrant as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// `e^z` for complex `z`.
pub fn cexp<R: Real>(z: Complex<R>) -> Complex<R> {
    let m = z.re.exp();
    Complex::new(m * z.im.cos(), m * z.im.sin())
}

/// `e^z - 1` for complex `z`, accurate for small `|z|`.
pub fn cexp_m1<R: Real>(z: Complex<R>) -> Complex<R> {
    let two = R::from_f64(2.0);
    let half_sin = (z.im / two).sin();
    let cos_m1 = -two * half_sin * half_sin;
    let re = z.re.exp_m1() * z.im.cos() + cos_m1;
    let im = z.re.exp() * z.im.sin();
    Complex::new(re, im)
}

pub fn cabs<R: Real>(z: Complex<R>) -> R {
    let (a, b) = (z.re.abs(), z.im.abs());
    let (big, small) = if a >= b { (a, b) } else { (b, a) };
    if big == R::zero() {
        return R::zero();
    }
    let q = small / big;
    big * (R::one() + q * q).sqrt()
}

/// Principal square root.
pub fn csqrt<R: Real>(z: Complex<R>) -> Complex<R> {
    let zero = R::zero();
    if z.re == zero && z.im == zero {
        return Complex::new(zero, zero);
    }
    let half = R::from_f64(0.5);
    let r = cabs(z);
    if z.re >= zero {
        let t = ((r + z.re) * half).sqrt();
        Complex::new(t, z.im / (t + t))
    } else {
        let t = ((r - z.re) * half).sqrt();
        let t = if z.im < zero { -t } else { t };
        Complex::new(z.im / (t + t), t)
    }
}

pub fn to_f64_complex<R: Real>(z: Complex<R>) -> Complex<f64> {
    Complex::new(z.re.to_f64(), z.im.to_f64())
}

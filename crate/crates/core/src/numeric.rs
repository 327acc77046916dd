//! Roots of `Q_p(X) = X³ − aX² + āpX − p³`.

use num_bigint::BigInt;
use num_complex::Complex;
use num_traits::{Float, FromPrimitive, Zero};

use crate::gaussian::Gaussian;
use crate::GaussianInt;

/// Roots of the monic cubic `X³ + bX² + cX + d` by Cardano's formula,
/// followed by two Newton steps on the original polynomial.
pub fn cubic_roots<F: Float + FromPrimitive>(
    b: Complex<F>,
    c: Complex<F>,
    d: Complex<F>,
) -> [Complex<F>; 3] {
    let k = |v: f64| F::from_f64(v).unwrap();
    let three = k(3.0);
    let shift = b / three;
    // t = X + b/3 gives t³ + Pt + Q = 0
    let pp = c - b * b / three;
    let qq = b * b * b * k(2.0) / k(27.0) - b * c / three + d;
    let disc = (qq * qq / k(4.0) + pp * pp * pp / k(27.0)).sqrt();
    let half_q = -qq / k(2.0);
    let u1 = half_q + disc;
    let u2 = half_q - disc;
    let big = if u1.norm() >= u2.norm() { u1 } else { u2 };
    let omega = Complex::new(k(-0.5), k(3.0).sqrt() / k(2.0));
    let mut roots = [Complex::zero(); 3];
    if big.norm() == F::zero() {
        // P = Q = 0: triple root
        roots = [-shift; 3];
    } else {
        let cbrt = big.powf(F::one() / three);
        let mut w = Complex::new(F::one(), F::zero());
        for r in roots.iter_mut() {
            let ck = cbrt * w;
            *r = ck - pp / (ck * three) - shift;
            w = w * omega;
        }
    }
    let poly = |x: Complex<F>| ((x + b) * x + c) * x + d;
    let deriv = |x: Complex<F>| (x * three + b * k(2.0)) * x + c;
    for r in roots.iter_mut() {
        for _ in 0..2 {
            let dv = deriv(*r);
            if dv.norm() == F::zero() {
                break;
            }
            let step = poly(*r) / dv;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r = *r - step;
        }
    }
    roots
}

/// Coefficients `(b, c, d)` of `Q_p` in the `X³ + bX² + cX + d` convention.
pub fn qp_coefficients(
    a: &GaussianInt,
    p: u64,
) -> (Gaussian<BigInt>, Gaussian<BigInt>, Gaussian<BigInt>) {
    let a = Gaussian::new(BigInt::from(a.re), BigInt::from(a.im));
    let p = BigInt::from(p);
    let b = -a.clone();
    let c = a.conj().scale(p.clone());
    let d = Gaussian::from_int(-(&p * &p * &p));
    (b, c, d)
}

/// Discriminant of `Q_p`, exact.
pub fn qp_discriminant(a: &GaussianInt, p: u64) -> Gaussian<BigInt> {
    let (b, c, d) = qp_coefficients(a, p);
    let k = |v: i64| Gaussian::from_int(BigInt::from(v));
    let bb = b.clone() * b.clone();
    let cc = c.clone() * c.clone();
    bb.clone() * cc.clone()
        - k(4) * cc * c.clone()
        - k(4) * bb * b.clone() * d.clone()
        - k(27) * d.clone() * d.clone()
        + k(18) * b * c * d
}

fn to_complex<F: Float + FromPrimitive>(g: &Gaussian<BigInt>) -> Complex<F> {
    use num_traits::ToPrimitive;
    Complex::new(
        F::from_f64(g.re.to_f64().unwrap()).unwrap(),
        F::from_f64(g.im.to_f64().unwrap()).unwrap(),
    )
}

/// The three roots of `Q_p`. Repeated roots are detected from the exact
/// discriminant and then given in closed form.
pub fn qp_roots<F: Float + FromPrimitive>(a: &GaussianInt, p: u64) -> [Complex<F>; 3] {
    let (b, c, d) = qp_coefficients(a, p);
    if !qp_discriminant(a, p).is_zero() {
        return cubic_roots(to_complex(&b), to_complex(&c), to_complex(&d));
    }
    let three = Gaussian::from_int(BigInt::from(3));
    let den = b.clone() * b.clone() - three * c.clone();
    if den.is_zero() {
        let r = -to_complex::<F>(&b) / F::from_f64(3.0).unwrap();
        return [r; 3];
    }
    // double root (9d − bc) / (2(b² − 3c)), simple root −b − 2·double
    let num = Gaussian::from_int(BigInt::from(9)) * d - b.clone() * c;
    let two = F::from_f64(2.0).unwrap();
    let r2 = to_complex::<F>(&num) / (to_complex::<F>(&den) * two);
    let r1 = -to_complex::<F>(&b) - r2 * two;
    [r1, r2, r2]
}

//! Exact arithmetic in `Z[i]`: norms, the discs `C_r`, places of `Q(i)` and
//! reduction to their residue fields.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_integer::Integer;
use num_traits::{Num, Signed};
use thiserror::Error;

use crate::arith::{mod_inv, reduce_i64};

/// A Gaussian integer `re + im·i` over an exact integer scalar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Gaussian<T> {
    pub re: T,
    pub im: T,
}

impl<T> Gaussian<T> {
    pub const fn new(re: T, im: T) -> Self {
        Gaussian { re, im }
    }
}

impl<T: Clone + Integer + Signed> Gaussian<T> {
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn one() -> Self {
        Self::new(T::one(), T::zero())
    }

    pub fn i() -> Self {
        Self::new(T::zero(), T::one())
    }

    pub fn from_int(v: T) -> Self {
        Self::new(v, T::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    pub fn norm(&self) -> T {
        self.re.clone() * self.re.clone() + self.im.clone() * self.im.clone()
    }

    pub fn scale(&self, k: T) -> Self {
        Self::new(self.re.clone() * k.clone(), self.im.clone() * k)
    }

    /// Multiplication by `i`.
    pub fn mul_i(&self) -> Self {
        Self::new(-self.im.clone(), self.re.clone())
    }

    /// `self / k` when the rational integer `k` divides both components.
    pub fn div_int(&self, k: &T) -> Option<Self> {
        if k.is_zero() || !self.re.is_multiple_of(k) || !self.im.is_multiple_of(k) {
            return None;
        }
        Some(Self::new(
            self.re.clone() / k.clone(),
            self.im.clone() / k.clone(),
        ))
    }

    /// Exact quotient `self / d` in `Z[i]`, if it exists.
    pub fn div_exact(&self, d: &Self) -> Option<Self> {
        let n = d.norm();
        (self.clone() * d.conj()).div_int(&n)
    }

    /// The four units `1, i, -1, -i` in that order.
    pub fn units() -> [Self; 4] {
        [Self::one(), Self::i(), -Self::one(), -Self::i()]
    }

    pub fn is_unit(&self) -> bool {
        self.norm().is_one()
    }
}

impl<T: Clone + Integer + Signed> Add for Gaussian<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl<T: Clone + Integer + Signed> Sub for Gaussian<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl<T: Clone + Integer + Signed> Mul for Gaussian<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let re = self.re.clone() * rhs.re.clone() - self.im.clone() * rhs.im.clone();
        let im = self.re * rhs.im + self.im * rhs.re;
        Self::new(re, im)
    }
}

impl<T: Clone + Integer + Signed> Neg for Gaussian<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl<T: Clone + Integer + Signed> num_traits::Zero for Gaussian<T> {
    fn zero() -> Self {
        Gaussian::zero()
    }
    fn is_zero(&self) -> bool {
        Gaussian::is_zero(self)
    }
}

impl Gaussian<i64> {
    pub fn widen(self) -> Gaussian<i128> {
        Gaussian::new(self.re as i128, self.im as i128)
    }

    pub fn to_complex<F: num_traits::Float>(self) -> num_complex::Complex<F> {
        num_complex::Complex::new(
            F::from(self.re).expect("finite"),
            F::from(self.im).expect("finite"),
        )
    }
}

/// `re² + im²`.
pub fn norm<T: Clone + Integer + Signed>(a: &Gaussian<T>) -> T {
    a.norm()
}

/// `a ∈ C_r`, decided by the integer comparison `norm(a) <= r²`.
pub fn in_disc<T: Clone + Integer + Signed>(a: &Gaussian<T>, r: T) -> bool {
    a.norm() <= r.clone() * r
}

/// `a ∈ p·C_r`: `p` divides both components and `a / p ∈ C_r`.
pub fn scaled_disc_member<T: Clone + Integer + Signed>(a: &Gaussian<T>, p: T, r: T) -> bool {
    match a.div_int(&p) {
        Some(q) => in_disc(&q, r),
        None => false,
    }
}

/// The rational prime `p` divides `a` in `Z[i]`.
pub fn rational_divides<T: Clone + Integer + Signed>(p: T, a: &Gaussian<T>) -> bool {
    a.div_int(&p).is_some()
}

// ---------------------------------------------------------------------------
// Canonical text form: `<re><sign><|im|>i`, e.g. `3-2i`, `0+0i`, `-4+1i`.

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid Gaussian integer {input:?} at byte {position}: {reason}")]
pub struct GaussianParseError {
    pub input: String,
    pub position: usize,
    pub reason: &'static str,
}

impl<T: Clone + Integer + Signed + fmt::Display> fmt::Display for Gaussian<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.im.is_negative() { '-' } else { '+' };
        write!(f, "{}{}{}i", self.re, sign, self.im.abs())
    }
}

/// Length of a canonical unsigned decimal run starting at `s[0]`.
fn digit_run(s: &[u8]) -> usize {
    s.iter().take_while(|b| b.is_ascii_digit()).count()
}

impl<T: Clone + Integer + Signed + Num> FromStr for Gaussian<T> {
    type Err = GaussianParseError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let err = |position, reason| GaussianParseError {
            input: input.to_string(),
            position,
            reason,
        };
        let b = input.as_bytes();
        let mut pos = 0;
        let re_neg = b.first() == Some(&b'-');
        if re_neg {
            pos += 1;
        }
        let n = digit_run(&b[pos..]);
        if n == 0 {
            return Err(err(pos, "expected digits for real part"));
        }
        let re_digits = &input[pos..pos + n];
        if n > 1 && re_digits.starts_with('0') {
            return Err(err(pos, "leading zero"));
        }
        if re_neg && re_digits == "0" {
            return Err(err(0, "negative zero"));
        }
        pos += n;
        let im_neg = match b.get(pos) {
            Some(b'+') => false,
            Some(b'-') => true,
            _ => return Err(err(pos, "expected '+' or '-' before imaginary part")),
        };
        pos += 1;
        let m = digit_run(&b[pos..]);
        if m == 0 {
            return Err(err(pos, "expected digits for imaginary part"));
        }
        let im_digits = &input[pos..pos + m];
        if m > 1 && im_digits.starts_with('0') {
            return Err(err(pos, "leading zero"));
        }
        if im_neg && im_digits == "0" {
            return Err(err(pos - 1, "negative zero"));
        }
        pos += m;
        if b.get(pos) != Some(&b'i') {
            return Err(err(pos, "expected trailing 'i'"));
        }
        if pos + 1 != b.len() {
            return Err(err(pos + 1, "trailing characters"));
        }
        let parse =
            |d: &str, at| T::from_str_radix(d, 10).map_err(|_| err(at, "integer out of range"));
        let mut re = parse(re_digits, 0)?;
        let mut im = parse(im_digits, pos - m)?;
        if re_neg {
            re = -re;
        }
        if im_neg {
            im = -im;
        }
        Ok(Gaussian::new(re, im))
    }
}

// ---------------------------------------------------------------------------
// Places of Q(i)

use crate::GaussianInt;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PlaceKind {
    /// `p ≡ 1 (mod 4)`; the place is generated by `generator`, of norm `p`.
    Split { generator: GaussianInt },
    /// `p ≡ 3 (mod 4)`.
    Inert,
    /// `p = 2`, generated by `1 + i`.
    Ramified,
}

/// A finite place of `Q(i)` lying over the rational prime `p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QiPlace {
    pub p: u64,
    pub kind: PlaceKind,
}

impl QiPlace {
    /// Split place with an explicit generator. Returns `None` unless
    /// `norm(generator)` is a prime `≡ 1 (mod 4)`.
    pub fn split_with_generator(generator: GaussianInt) -> Option<Self> {
        let n = generator.norm();
        if n <= 0 || n % 4 != 1 || !crate::arith::is_prime(n as u64) {
            return None;
        }
        Some(QiPlace {
            p: n as u64,
            kind: PlaceKind::Split { generator },
        })
    }

    pub fn residue_cardinality(&self) -> u64 {
        match self.kind {
            PlaceKind::Inert => self.p * self.p,
            _ => self.p,
        }
    }

    pub fn is_split(&self) -> bool {
        matches!(self.kind, PlaceKind::Split { .. })
    }

    /// The Galois-conjugate place (equal to `self` unless split).
    pub fn conjugate(&self) -> Self {
        match &self.kind {
            PlaceKind::Split { generator } => QiPlace {
                p: self.p,
                kind: PlaceKind::Split {
                    generator: generator.conj(),
                },
            },
            _ => self.clone(),
        }
    }

    /// A uniformizer: the split generator, `p` itself, or `1 + i`.
    pub fn uniformizer(&self) -> GaussianInt {
        match &self.kind {
            PlaceKind::Split { generator } => *generator,
            PlaceKind::Inert => GaussianInt::from_int(self.p as i64),
            PlaceKind::Ramified => GaussianInt::new(1, 1),
        }
    }

    /// Image of `i` in the residue field for split and ramified places.
    fn sqrt_minus_one(&self) -> Option<u64> {
        match &self.kind {
            // g = x + y i ≡ 0 gives i ≡ −x / y.
            PlaceKind::Split { generator } => {
                let l = self.p;
                let x = reduce_i64(generator.re, l);
                let y = reduce_i64(generator.im, l);
                Some((l - x) % l * mod_inv(y, l) % l)
            }
            PlaceKind::Ramified => Some(1),
            PlaceKind::Inert => None,
        }
    }

    /// The residue field of this place.
    pub fn residue_field(&self) -> ResidueField {
        ResidueField {
            l: self.p,
            i_image: self.sqrt_minus_one(),
        }
    }
}

impl fmt::Display for QiPlace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PlaceKind::Split { generator } => write!(f, "({generator}) over {}", self.p),
            PlaceKind::Inert => write!(f, "({}) inert", self.p),
            PlaceKind::Ramified => write!(f, "(1+1i) over 2"),
        }
    }
}

/// Classifies `p` in `Q(i)`; split primes get the canonical generator
/// `re > im > 0`.
pub fn split_prime(p: u64) -> QiPlace {
    assert!(crate::arith::is_prime(p), "{p} is not prime");
    if p == 2 {
        return QiPlace {
            p,
            kind: PlaceKind::Ramified,
        };
    }
    if p % 4 == 3 {
        return QiPlace {
            p,
            kind: PlaceKind::Inert,
        };
    }
    let mut b: u64 = 1;
    while 2 * b * b < p {
        let rest = p - b * b;
        let a = rest.isqrt();
        if a * a == rest {
            return QiPlace {
                p,
                kind: PlaceKind::Split {
                    generator: GaussianInt::new(a as i64, b as i64),
                },
            };
        }
        b += 1;
    }
    unreachable!("prime {p} ≡ 1 mod 4 is a sum of two squares")
}

/// Valuation at a place; `Infinite` only for `0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Valuation {
    Finite(u32),
    Infinite,
}

pub fn place_valuation(a: &GaussianInt, v: &QiPlace) -> Valuation {
    if a.is_zero() {
        return Valuation::Infinite;
    }
    let pi = v.uniformizer();
    let mut cur = *a;
    let mut k = 0;
    while let Some(q) = cur.div_exact(&pi) {
        cur = q;
        k += 1;
    }
    Valuation::Finite(k)
}

/// `F_l` (when `i_image` is set) or `F_l[i]/(i² + 1)` for inert `l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResidueField {
    pub l: u64,
    i_image: Option<u64>,
}

/// Residue-field element `c0 + c1·i`; `c1 = 0` in prime residue fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResidueElem {
    pub c0: u64,
    pub c1: u64,
}

impl ResidueField {
    pub fn is_prime_field(&self) -> bool {
        self.i_image.is_some()
    }

    pub fn cardinality(&self) -> u64 {
        if self.is_prime_field() {
            self.l
        } else {
            self.l * self.l
        }
    }

    pub fn zero(&self) -> ResidueElem {
        ResidueElem { c0: 0, c1: 0 }
    }

    pub fn from_u64(&self, v: u64) -> ResidueElem {
        ResidueElem {
            c0: v % self.l,
            c1: 0,
        }
    }

    pub fn reduce(&self, a: &GaussianInt) -> ResidueElem {
        let l = self.l;
        let re = reduce_i64(a.re, l);
        let im = reduce_i64(a.im, l);
        match self.i_image {
            Some(s) => ResidueElem {
                c0: (re + im * s) % l,
                c1: 0,
            },
            None => ResidueElem { c0: re, c1: im },
        }
    }

    pub fn add(&self, a: ResidueElem, b: ResidueElem) -> ResidueElem {
        ResidueElem {
            c0: (a.c0 + b.c0) % self.l,
            c1: (a.c1 + b.c1) % self.l,
        }
    }

    pub fn sub(&self, a: ResidueElem, b: ResidueElem) -> ResidueElem {
        ResidueElem {
            c0: (a.c0 + self.l - b.c0) % self.l,
            c1: (a.c1 + self.l - b.c1) % self.l,
        }
    }

    pub fn neg(&self, a: ResidueElem) -> ResidueElem {
        self.sub(self.zero(), a)
    }

    pub fn mul(&self, a: ResidueElem, b: ResidueElem) -> ResidueElem {
        let l = self.l;
        // i² = −1 in the inert case; c1 stays 0 otherwise.
        let c0 = (a.c0 * b.c0 % l + l - a.c1 * b.c1 % l) % l;
        let c1 = (a.c0 * b.c1 + a.c1 * b.c0) % l;
        ResidueElem { c0, c1 }
    }

    pub fn pow(&self, a: ResidueElem, mut e: u64) -> ResidueElem {
        let mut base = a;
        let mut acc = self.from_u64(1);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: ResidueElem) -> Option<ResidueElem> {
        if a == self.zero() {
            return None;
        }
        Some(self.pow(a, self.cardinality() - 2))
    }

    /// All field elements, in a fixed order.
    pub fn elements(&self) -> impl Iterator<Item = ResidueElem> + '_ {
        let l = self.l;
        let top = if self.is_prime_field() { 1 } else { l };
        (0..top).flat_map(move |c1| (0..l).map(move |c0| ResidueElem { c0, c1 }))
    }
}

/// Image of `a` in the residue field of `v`.
pub fn reduce_mod_place(a: &GaussianInt, v: &QiPlace) -> ResidueElem {
    v.residue_field().reduce(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::primes_up_to;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn g(re: i64, im: i64) -> GaussianInt {
        GaussianInt::new(re, im)
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&g(3, 4)), 25);
        assert_eq!(norm(&g(0, 0)), 0);
        assert_eq!(norm(&g(1, -1)), 2);
    }

    #[test]
    fn disc_examples() {
        assert!(in_disc(&g(2, 2), 3));
        assert!(!in_disc(&g(3, 1), 3));
        assert!(in_disc(&g(0, 0), 0));
        assert!(scaled_disc_member(&g(5, 10), 5, 3));
        assert!(!scaled_disc_member(&g(1, 2), 5, 3));
        assert!(scaled_disc_member(&g(0, 0), 7, 3));
    }

    #[test]
    fn divisibility_examples() {
        assert!(rational_divides(5, &g(5, 10)));
        assert!(!rational_divides(5, &g(1, 2)));
        assert!(rational_divides(13, &g(0, 0)));
    }

    #[test]
    fn split_prime_examples() {
        assert_eq!(
            split_prime(13).kind,
            PlaceKind::Split { generator: g(3, 2) }
        );
        assert_eq!(split_prime(7).kind, PlaceKind::Inert);
        assert_eq!(split_prime(2).kind, PlaceKind::Ramified);
        assert_eq!(split_prime(7).residue_cardinality(), 49);
        assert_eq!(split_prime(13).residue_cardinality(), 13);
    }

    #[test]
    fn split_prime_classification_matches_residue_mod_4() {
        for p in primes_up_to(100_000) {
            let v = split_prime(p);
            match &v.kind {
                PlaceKind::Split { generator } => {
                    assert_eq!(p % 4, 1);
                    assert_eq!(generator.norm() as u64, p);
                    assert!(generator.re > generator.im && generator.im > 0);
                }
                PlaceKind::Inert => assert_eq!(p % 4, 3),
                PlaceKind::Ramified => assert_eq!(p, 2),
            }
        }
    }

    #[test]
    fn valuation_examples() {
        let v = QiPlace::split_with_generator(g(1, 2)).unwrap();
        assert_eq!(place_valuation(&g(5, 0), &v), Valuation::Finite(1));
        assert_eq!(place_valuation(&g(1, -2), &v), Valuation::Finite(0));
        assert_eq!(
            place_valuation(&g(49, 0), &split_prime(7)),
            Valuation::Finite(2)
        );
        assert_eq!(place_valuation(&g(0, 0), &v), Valuation::Infinite);
    }

    #[test]
    fn reduction_examples() {
        let v = QiPlace::split_with_generator(g(2, 1)).unwrap();
        assert_eq!(reduce_mod_place(&g(1, 2), &v), ResidueElem { c0: 2, c1: 0 });
        assert_eq!(
            reduce_mod_place(&g(13, 0), &split_prime(7)),
            ResidueElem { c0: 6, c1: 0 }
        );
        assert_eq!(reduce_mod_place(&g(0, 0), &v), ResidueElem { c0: 0, c1: 0 });
    }

    #[test]
    fn canonical_text_form() {
        assert_eq!(g(3, -2).to_string(), "3-2i");
        assert_eq!(g(0, 0).to_string(), "0+0i");
        assert_eq!(g(-4, 1).to_string(), "-4+1i");
        assert_eq!("3-2i".parse::<GaussianInt>().unwrap(), g(3, -2));
        assert_eq!("-4+1i".parse::<GaussianInt>().unwrap(), g(-4, 1));
        for bad in [
            "3--2i", "3-2", "3 -2i", "+3-2i", "3-2j", "03+1i", "-0+1i", "1-0i", "", "i", "1+i",
            "1+2i ",
        ] {
            assert!(bad.parse::<GaussianInt>().is_err(), "{bad:?} accepted");
        }
        let e = "3--2i".parse::<GaussianInt>().unwrap_err();
        assert_eq!(e.position, 2);
    }

    #[test]
    fn big_scalar_agrees_with_i64() {
        let a =
            Gaussian::<BigInt>::new(BigInt::from(123_456_789i64), BigInt::from(-987_654_321i64));
        let b = Gaussian::<BigInt>::new(BigInt::from(-3), BigInt::from(7));
        let n = (a.clone() * b.clone()).norm();
        assert_eq!(n, a.norm() * b.norm());
        assert_eq!(
            "123456789-987654321i".parse::<Gaussian<BigInt>>().unwrap(),
            a
        );
    }

    proptest! {
        #[test]
        fn norm_is_multiplicative(a in -10_000i64..10_000, b in -10_000i64..10_000,
                                  c in -10_000i64..10_000, d in -10_000i64..10_000) {
            let x = g(a, b);
            let y = g(c, d);
            prop_assert_eq!((x * y).norm(), x.norm() * y.norm());
        }

        #[test]
        fn disc_symmetric_under_units_and_conjugation(a in -50i64..50, b in -50i64..50, r in 0i64..60) {
            let x = g(a, b);
            prop_assert_eq!(in_disc(&x, r), in_disc(&x.conj(), r));
            prop_assert_eq!(in_disc(&x, r), in_disc(&x.mul_i(), r));
        }

        #[test]
        fn canonical_form_round_trips(a in any::<i64>(), b in any::<i64>()) {
            let x = g(a, b);
            prop_assert_eq!(x.to_string().parse::<GaussianInt>().unwrap(), x);
        }

        #[test]
        fn valuations_at_conjugate_places_sum_to_norm_valuation(
            pi in 0usize..40, a in -2_000i64..2_000, b in -2_000i64..2_000
        ) {
            prop_assume!(a != 0 || b != 0);
            let l = primes_up_to(1000).into_iter().filter(|p| p % 4 == 1).nth(pi).unwrap();
            let v = split_prime(l);
            let x = g(a, b);
            let (Valuation::Finite(e1), Valuation::Finite(e2)) =
                (place_valuation(&x, &v), place_valuation(&x, &v.conjugate())) else { unreachable!() };
            let mut n = x.norm() as u64;
            let mut e = 0;
            while n.is_multiple_of(l) { n /= l; e += 1; }
            prop_assert_eq!(e1 + e2, e);
        }

        #[test]
        fn reduction_is_a_ring_homomorphism(
            which in 0usize..3,
            a in -10_000i64..10_000, b in -10_000i64..10_000,
            c in -10_000i64..10_000, d in -10_000i64..10_000
        ) {
            let v = [split_prime(13), split_prime(7), split_prime(2)][which].clone();
            let k = v.residue_field();
            let (x, y) = (g(a, b), g(c, d));
            prop_assert_eq!(k.reduce(&(x + y)), k.add(k.reduce(&x), k.reduce(&y)));
            prop_assert_eq!(k.reduce(&(x * y)), k.mul(k.reduce(&x), k.reduce(&y)));
        }
    }
}

//! Arithmetic contexts for `F_p`, `F_{p²}` and `F_{p⁴}`.
//!
//! `F_{p²} = F_p[u]/(u² − n)` with `n` the least quadratic nonresidue, and
//! `F_{p⁴} = F_{p²}[v]/(v² − w)` with `w = a + u` for the least `a ≥ 0`
//! making `w` a nonsquare of `F_{p²}`. Elements are kept reduced in `[0, p)`.
#![allow(clippy::needless_range_loop)]

use thiserror::Error;

use crate::arith::{is_prime, mod_pow, reduce_i64};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("kernel of x -> x^(p^2) + x over F_{p} has dimension {dim}, expected 2")]
    KernelDimension { p: u64, dim: usize },
}

/// Minimal field interface used by the polynomial evaluators.
pub trait FieldOps {
    type Elem: Copy + PartialEq + std::fmt::Debug;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    #[allow(clippy::wrong_self_convention)]
    fn from_i64(&self, v: i64) -> Self::Elem;
    fn add(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn sub(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn mul(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
}

/// `F_p` with a precomputed quadratic-character table.
#[derive(Clone, Debug)]
pub struct PrimeField {
    p: u64,
    chi: Vec<i8>,
    nonresidue: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if p < 3 || !is_prime(p) || p >= 1 << 31 {
            return Err(FieldError::NotOddPrime(p));
        }
        let mut chi = vec![-1i8; p as usize];
        chi[0] = 0;
        for t in 1..=(p - 1) / 2 {
            chi[(t * t % p) as usize] = 1;
        }
        let nonresidue = (2..p).find(|&v| chi[v as usize] == -1).expect("p odd");
        Ok(PrimeField { p, chi, nonresidue })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    /// Legendre symbol of `v` (`0 <= v < p`).
    #[inline]
    pub fn quad_char(&self, v: u64) -> i8 {
        self.chi[v as usize]
    }

    pub fn chi_table(&self) -> &[i8] {
        &self.chi
    }

    /// Smallest quadratic nonresidue.
    pub fn nonresidue(&self) -> u64 {
        self.nonresidue
    }

    #[inline]
    pub fn reduce(&self, v: i64) -> u64 {
        reduce_i64(v, self.p)
    }

    pub fn pow(&self, a: u64, e: u64) -> u64 {
        mod_pow(a, e, self.p)
    }
}

/// Least `n >= 2` with `(n / p) = −1`.
pub fn nonresidue_search(p: u64) -> Result<u64, FieldError> {
    Ok(PrimeField::new(p)?.nonresidue())
}

impl FieldOps for PrimeField {
    type Elem = u64;
    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1
    }
    fn from_i64(&self, v: i64) -> u64 {
        self.reduce(v)
    }
    #[inline]
    fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }
    #[inline]
    fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }
    #[inline]
    fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.p
    }
}

/// Element `a + b·u` of `F_{p²}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Fp2 {
    pub a: u64,
    pub b: u64,
}

impl Fp2 {
    pub const ZERO: Fp2 = Fp2 { a: 0, b: 0 };

    pub fn new(a: u64, b: u64) -> Self {
        Fp2 { a, b }
    }

    /// True iff the element lies in the prime subfield.
    pub fn is_base(&self) -> bool {
        self.b == 0
    }
}

/// `F_{p²} = F_p[u]/(u² − n)`.
#[derive(Clone, Debug)]
pub struct Fp2Field {
    base: PrimeField,
    n: u64,
    #[cfg(feature = "fp2-char-table")]
    chi2: Vec<i8>,
}

impl Fp2Field {
    pub fn new(p: u64) -> Result<Self, FieldError> {
        let base = PrimeField::new(p)?;
        let n = base.nonresidue();
        Ok(Self::with_parts(base, n))
    }

    /// Uses a caller-chosen nonresidue `n` (e.g. `−1` for inert residue fields).
    pub fn with_nonresidue(p: u64, n: u64) -> Result<Self, FieldError> {
        let base = PrimeField::new(p)?;
        assert_eq!(base.quad_char(n % p), -1, "{n} is a square mod {p}");
        Ok(Self::with_parts(base, n % p))
    }

    fn with_parts(base: PrimeField, n: u64) -> Self {
        #[cfg(feature = "fp2-char-table")]
        {
            let p = base.p();
            let mut chi2 = vec![-1i8; (p * p) as usize];
            chi2[0] = 0;
            let mut field = Fp2Field {
                base,
                n,
                chi2: Vec::new(),
            };
            for a in 0..p {
                for b in 0..p {
                    let s = field.mul(Fp2::new(a, b), Fp2::new(a, b));
                    if s != Fp2::ZERO {
                        chi2[(s.a * p + s.b) as usize] = 1;
                    }
                }
            }
            field.chi2 = chi2;
            field
        }
        #[cfg(not(feature = "fp2-char-table"))]
        Fp2Field { base, n }
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.base.p()
    }

    pub fn base(&self) -> &PrimeField {
        &self.base
    }

    /// The defining constant `n = u²`.
    pub fn nonresidue(&self) -> u64 {
        self.n
    }

    pub fn u(&self) -> Fp2 {
        Fp2::new(0, 1)
    }

    pub fn embed(&self, v: u64) -> Fp2 {
        Fp2::new(v % self.p(), 0)
    }

    #[inline]
    pub fn neg(&self, x: Fp2) -> Fp2 {
        self.sub(Fp2::ZERO, x)
    }

    #[inline]
    pub fn scale(&self, x: Fp2, k: u64) -> Fp2 {
        let p = self.p();
        Fp2::new(x.a * k % p, x.b * k % p)
    }

    /// `x^p = a − b·u`.
    #[inline]
    pub fn conj(&self, x: Fp2) -> Fp2 {
        Fp2::new(x.a, if x.b == 0 { 0 } else { self.p() - x.b })
    }

    /// `N(x) = x^{p+1} = a² − n·b²`.
    #[inline]
    pub fn norm(&self, x: Fp2) -> u64 {
        let p = self.p();
        let aa = x.a * x.a % p;
        let nbb = self.n * (x.b * x.b % p) % p;
        if aa >= nbb {
            aa - nbb
        } else {
            aa + p - nbb
        }
    }

    pub fn pow(&self, x: Fp2, mut e: u64) -> Fp2 {
        let mut base = x;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, x: Fp2) -> Option<Fp2> {
        let n = self.norm(x);
        if n == 0 {
            return None;
        }
        let ninv = self.base.pow(n, self.p() - 2);
        Some(self.scale(self.conj(x), ninv))
    }

    /// Quadratic character of `F_{p²}`: `χ_p(N(x))`.
    #[inline]
    pub fn quad_char(&self, x: Fp2) -> i8 {
        #[cfg(feature = "fp2-char-table")]
        {
            self.chi2[(x.a * self.p() + x.b) as usize]
        }
        #[cfg(not(feature = "fp2-char-table"))]
        {
            self.base.quad_char(self.norm(x))
        }
    }

    /// All `p²` elements, ordered by `(a, b)`.
    pub fn elements(&self) -> impl Iterator<Item = Fp2> {
        let p = self.p();
        (0..p).flat_map(move |a| (0..p).map(move |b| Fp2::new(a, b)))
    }
}

/// Quadratic character on `F_{p²}`, through the norm map.
pub fn quad_char_ext(ctx: &Fp2Field, v: Fp2) -> i8 {
    ctx.quad_char(v)
}

impl FieldOps for Fp2Field {
    type Elem = Fp2;
    fn zero(&self) -> Fp2 {
        Fp2::ZERO
    }
    fn one(&self) -> Fp2 {
        Fp2::new(1, 0)
    }
    fn from_i64(&self, v: i64) -> Fp2 {
        Fp2::new(self.base.reduce(v), 0)
    }
    #[inline]
    fn add(&self, x: Fp2, y: Fp2) -> Fp2 {
        let b = &self.base;
        Fp2::new(b.add(x.a, y.a), b.add(x.b, y.b))
    }
    #[inline]
    fn sub(&self, x: Fp2, y: Fp2) -> Fp2 {
        let b = &self.base;
        Fp2::new(b.sub(x.a, y.a), b.sub(x.b, y.b))
    }
    #[inline]
    fn mul(&self, x: Fp2, y: Fp2) -> Fp2 {
        let p = self.p();
        let a = (x.a * y.a + self.n * (x.b * y.b % p)) % p;
        let b = (x.a * y.b + x.b * y.a) % p;
        Fp2::new(a, b)
    }
}

/// Element `c0 + c1·v` of `F_{p⁴}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Fp4 {
    pub c0: Fp2,
    pub c1: Fp2,
}

impl Fp4 {
    pub const ZERO: Fp4 = Fp4 {
        c0: Fp2::ZERO,
        c1: Fp2::ZERO,
    };

    /// Coordinates on the `F_p`-basis `(1, u, v, uv)`.
    pub fn coords(&self) -> [u64; 4] {
        [self.c0.a, self.c0.b, self.c1.a, self.c1.b]
    }

    pub fn from_coords(c: [u64; 4]) -> Self {
        Fp4 {
            c0: Fp2::new(c[0], c[1]),
            c1: Fp2::new(c[2], c[3]),
        }
    }

    /// Lies in the prime subfield `F_p`.
    pub fn is_base(&self) -> bool {
        self.c0.b == 0 && self.c1 == Fp2::ZERO
    }
}

/// `F_{p⁴}` as a quadratic extension of `F_{p²}`, with the Frobenius
/// `x -> x^p` precomputed as a 4×4 matrix over `F_p`.
#[derive(Clone, Debug)]
pub struct Fp4Field {
    f2: Fp2Field,
    w: Fp2,
    frob: [[u64; 4]; 4],
}

impl Fp4Field {
    pub fn new(p: u64) -> Result<Self, FieldError> {
        let f2 = Fp2Field::new(p)?;
        let base = f2.base();
        let n = f2.nonresidue();
        // w = a + u is a nonsquare of F_{p²} iff N(w) = a² − n is a nonresidue.
        let a = (0..p)
            .find(|&a| base.quad_char(base.sub(a * a % p, n)) == -1)
            .expect("a nonsquare of the form a + u exists");
        let w = Fp2::new(a, 1);
        let mut field = Fp4Field {
            f2,
            w,
            frob: [[0; 4]; 4],
        };
        // Columns are the images of the basis vectors 1, u, v, uv.
        let mut frob = [[0u64; 4]; 4];
        for j in 0..4 {
            let mut e = [0u64; 4];
            e[j] = 1;
            let img = field.pow(Fp4::from_coords(e), p).coords();
            for i in 0..4 {
                frob[i][j] = img[i];
            }
        }
        field.frob = frob;
        Ok(field)
    }

    pub fn p(&self) -> u64 {
        self.f2.p()
    }

    pub fn sub_field(&self) -> &Fp2Field {
        &self.f2
    }

    /// The constant `w = v²`.
    pub fn w(&self) -> Fp2 {
        self.w
    }

    pub fn frobenius_matrix(&self) -> &[[u64; 4]; 4] {
        &self.frob
    }

    pub fn embed(&self, x: Fp2) -> Fp4 {
        Fp4 {
            c0: x,
            c1: Fp2::ZERO,
        }
    }

    pub fn pow(&self, x: Fp4, mut e: u64) -> Fp4 {
        let mut base = x;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// `x -> x^p` through the precomputed matrix.
    #[inline]
    pub fn frobenius(&self, x: Fp4) -> Fp4 {
        let p = self.p();
        let c = x.coords();
        let m = &self.frob;
        let mut out = [0u64; 4];
        for (i, row) in m.iter().enumerate() {
            out[i] = (row[0] * c[0] + row[1] * c[1] + row[2] * c[2] + row[3] * c[3]) % p;
        }
        Fp4::from_coords(out)
    }

    pub fn scale(&self, x: Fp4, k: u64) -> Fp4 {
        Fp4 {
            c0: self.f2.scale(x.c0, k),
            c1: self.f2.scale(x.c1, k),
        }
    }

    /// All `p⁴` elements in coordinate order.
    pub fn elements(&self) -> impl Iterator<Item = Fp4> + '_ {
        let p = self.p();
        (0..p * p * p * p).map(move |mut k| {
            let mut c = [0u64; 4];
            for slot in c.iter_mut().rev() {
                *slot = k % p;
                k /= p;
            }
            Fp4::from_coords(c)
        })
    }
}

impl FieldOps for Fp4Field {
    type Elem = Fp4;
    fn zero(&self) -> Fp4 {
        Fp4::ZERO
    }
    fn one(&self) -> Fp4 {
        self.embed(self.f2.one())
    }
    fn from_i64(&self, v: i64) -> Fp4 {
        self.embed(self.f2.from_i64(v))
    }
    #[inline]
    fn add(&self, x: Fp4, y: Fp4) -> Fp4 {
        Fp4 {
            c0: self.f2.add(x.c0, y.c0),
            c1: self.f2.add(x.c1, y.c1),
        }
    }
    #[inline]
    fn sub(&self, x: Fp4, y: Fp4) -> Fp4 {
        Fp4 {
            c0: self.f2.sub(x.c0, y.c0),
            c1: self.f2.sub(x.c1, y.c1),
        }
    }
    #[inline]
    fn mul(&self, x: Fp4, y: Fp4) -> Fp4 {
        let f = &self.f2;
        let t = f.mul(x.c1, y.c1);
        let c0 = f.add(f.mul(x.c0, y.c0), f.mul(self.w, t));
        let c1 = f.add(f.mul(x.c0, y.c1), f.mul(x.c1, y.c0));
        Fp4 { c0, c1 }
    }
}

/// The `p²` solutions of `x^{p²} + x = 0` in `F_{p⁴}`, as the `F_p`-span of a
/// two-element basis.
#[derive(Clone, Debug)]
pub struct FrobeniusKernel {
    p: u64,
    basis: [Fp4; 2],
}

impl FrobeniusKernel {
    pub fn basis(&self) -> &[Fp4; 2] {
        &self.basis
    }

    pub fn len(&self) -> u64 {
        self.p * self.p
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `s·b0 + t·b1` for the `k`-th pair `(s, t) = (k / p, k % p)`.
    pub fn element(&self, field: &Fp4Field, k: u64) -> Fp4 {
        let (s, t) = (k / self.p, k % self.p);
        field.add(field.scale(self.basis[0], s), field.scale(self.basis[1], t))
    }

    pub fn iter<'a>(&'a self, field: &'a Fp4Field) -> impl Iterator<Item = Fp4> + 'a {
        (0..self.len()).map(move |k| self.element(field, k))
    }
}

/// Nullspace of a 4×4 matrix over `F_p`, by Gauss–Jordan elimination.
fn nullspace_mod_p(mut m: [[u64; 4]; 4], p: u64) -> Vec<[u64; 4]> {
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..4 {
        let Some(r) = (row..4).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(row, r);
        let inv = mod_pow(m[row][col], p - 2, p);
        for c in 0..4 {
            m[row][c] = m[row][c] * inv % p;
        }
        for r2 in 0..4 {
            if r2 != row && m[r2][col] != 0 {
                let f = m[r2][col];
                for c in 0..4 {
                    m[r2][c] = (m[r2][c] + p * p - f * m[row][c] % p) % p;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free: Vec<usize> = (0..4).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = [0u64; 4];
            v[fc] = 1;
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = (p - m[r][fc]) % p;
            }
            v
        })
        .collect()
}

/// Kernel of the `F_p`-linear map `x -> x^{p²} + x`; fails if its dimension
/// is not 2.
pub fn frobenius_kernel(field: &Fp4Field) -> Result<FrobeniusKernel, FieldError> {
    let p = field.p();
    let f = field.frobenius_matrix();
    let mut m = [[0u64; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0;
            for k in 0..4 {
                s = (s + f[i][k] * f[k][j]) % p;
            }
            m[i][j] = (s + u64::from(i == j)) % p;
        }
    }
    let ns = nullspace_mod_p(m, p);
    if ns.len() != 2 {
        return Err(FieldError::KernelDimension { p, dim: ns.len() });
    }
    Ok(FrobeniusKernel {
        p,
        basis: [Fp4::from_coords(ns[0]), Fp4::from_coords(ns[1])],
    })
}

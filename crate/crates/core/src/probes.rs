//! Dihedral pattern detection on trace sequences.

use std::collections::BTreeMap;

use num_rational::Ratio;
use thiserror::Error;

use crate::arith::{is_fundamental_discriminant, kronecker, mod_pow, prime_factors};
use crate::GaussianInt;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error("trace input is empty")]
    EmptyInput,
    #[error("N must be positive")]
    ZeroModulus,
    #[error("{count} characters exceed the limit of {limit}")]
    TooManyCharacters { count: usize, limit: usize },
    #[error("|a_p / p| > 3 at p = {0}")]
    WeilViolation(u64),
    #[error("prime factor {0} of N is too large for character tables")]
    FactorTooLarge(u64),
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error("at least {min} samples are needed, got {got}")]
    TooFewSamples { min: u64, got: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DihedralThresholds {
    pub min_inert: u64,
    pub vanishing: f64,
}

impl Default for DihedralThresholds {
    fn default() -> Self {
        DihedralThresholds {
            min_inert: 20,
            vanishing: 0.95,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DihedralVerdict {
    Flagged,
    Clear,
    InsufficientData,
}

impl DihedralVerdict {
    pub fn label(self) -> &'static str {
        match self {
            DihedralVerdict::Flagged => "flagged",
            DihedralVerdict::Clear => "clear",
            DihedralVerdict::InsufficientData => "insufficient_data",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscriminantRow {
    pub d: i64,
    pub inert: u64,
    pub vanishing: u64,
    pub verdict: DihedralVerdict,
}

impl DiscriminantRow {
    pub fn fraction(&self) -> Option<Ratio<u64>> {
        (self.inert > 0).then(|| Ratio::new(self.vanishing, self.inert))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DihedralReport {
    pub rows: Vec<DiscriminantRow>,
}

impl DihedralReport {
    pub fn flagged(&self) -> Vec<i64> {
        self.rows
            .iter()
            .filter(|r| r.verdict == DihedralVerdict::Flagged)
            .map(|r| r.d)
            .collect()
    }

    pub fn row(&self, d: i64) -> Option<&DiscriminantRow> {
        self.rows.iter().find(|r| r.d == d)
    }
}

/// Fundamental discriminants `|d| <= bound` ramified only at primes of `2N`.
pub fn admissible_discriminants(n: u128, bound: i64) -> Vec<i64> {
    let mut ram = prime_factors(n);
    if !ram.contains(&2) {
        ram.push(2);
    }
    (-bound..=bound)
        .filter(|&d| is_fundamental_discriminant(d))
        .filter(|&d| {
            prime_factors(d.unsigned_abs() as u128)
                .iter()
                .all(|q| ram.contains(q))
        })
        .collect()
}

/// For each admissible discriminant, the fraction of inert primes `p ∤ N`
/// with vanishing trace.
pub fn dihedral_probe(
    traces: &BTreeMap<u64, GaussianInt>,
    n: u128,
    disc_bound: i64,
    th: &DihedralThresholds,
) -> Result<DihedralReport, ProbeError> {
    if traces.is_empty() {
        return Err(ProbeError::EmptyInput);
    }
    if n == 0 {
        return Err(ProbeError::ZeroModulus);
    }
    let rows = admissible_discriminants(n, disc_bound)
        .into_iter()
        .map(|d| {
            let (mut inert, mut vanishing) = (0u64, 0u64);
            for (&p, b) in traces {
                if n.is_multiple_of(p as u128) || kronecker(d, p) != -1 {
                    continue;
                }
                inert += 1;
                if b.is_zero() {
                    vanishing += 1;
                }
            }
            let verdict = if inert < th.min_inert {
                DihedralVerdict::InsufficientData
            } else if vanishing as f64 >= th.vanishing * inert as f64 {
                DihedralVerdict::Flagged
            } else {
                DihedralVerdict::Clear
            };
            DiscriminantRow {
                d,
                inert,
                vanishing,
                verdict,
            }
        })
        .collect();
    Ok(DihedralReport { rows })
}

/// A primitive Dirichlet character with values in the fourth roots of unity,
/// stored as a product of characters on coprime moduli.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirichletChar {
    pub conductor: u64,
    parts: Vec<(u64, Vec<GaussianInt>)>,
}

impl DirichletChar {
    pub fn trivial() -> Self {
        DirichletChar {
            conductor: 1,
            parts: Vec::new(),
        }
    }

    pub fn eval(&self, n: u64) -> GaussianInt {
        self.parts
            .iter()
            .fold(GaussianInt::one(), |acc, (m, vals)| {
                acc * vals[(n % m) as usize]
            })
    }

    /// Least `k` with `χ^k` trivial.
    pub fn order(&self) -> u32 {
        let mut ord = 1;
        for (m, vals) in &self.parts {
            for r in 0..*m {
                let v = vals[r as usize];
                if !v.is_zero() {
                    let o = match (v.re, v.im) {
                        (1, 0) => 1,
                        (-1, 0) => 2,
                        _ => 4,
                    };
                    ord = ord.max(o);
                }
            }
        }
        ord
    }

    /// `χ(n)` for `n` in `0..conductor`, as canonical tokens.
    pub fn label(&self) -> String {
        if self.conductor == 1 {
            return "trivial".into();
        }
        let vals: Vec<String> = (1..self.conductor.min(64))
            .filter(|&r| !self.eval(r).is_zero())
            .map(|r| self.eval(r).to_string())
            .collect();
        format!("mod{}[{}]", self.conductor, vals.join(" "))
    }
}

fn primitive_root(p: u64) -> u64 {
    let fs = prime_factors((p - 1) as u128);
    (2..p)
        .find(|&g| fs.iter().all(|&q| mod_pow(g, (p - 1) / q as u64, p) != 1))
        .expect("primitive root exists")
}

fn units_pow(u: GaussianInt, k: u64) -> GaussianInt {
    (0..k % 4).fold(GaussianInt::one(), |acc, _| acc * u)
}

/// Primitive characters mod an odd prime `p` of order dividing 4.
fn odd_prime_parts(p: u64) -> Vec<Vec<GaussianInt>> {
    let g = primitive_root(p);
    let mut dlog = vec![0u64; p as usize];
    let mut x = 1;
    for k in 0..p - 1 {
        dlog[x as usize] = k;
        x = x * g % p;
    }
    let zetas: Vec<GaussianInt> = if (p - 1).is_multiple_of(4) {
        vec![GaussianInt::i(), -GaussianInt::one(), -GaussianInt::i()]
    } else {
        vec![-GaussianInt::one()]
    };
    zetas
        .into_iter()
        .map(|z| {
            (0..p)
                .map(|r| {
                    if r == 0 {
                        GaussianInt::zero()
                    } else {
                        units_pow(z, dlog[r as usize])
                    }
                })
                .collect()
        })
        .collect()
}

/// Primitive characters mod `2^e` of order dividing 4.
fn two_power_parts(e: u32) -> Vec<Vec<GaussianInt>> {
    let m = 1u64 << e;
    let one = GaussianInt::one();
    // write odd r as ±5^k
    let signed_log = |r: u64| -> (bool, u64) {
        let mut x = 1u64;
        for k in 0..m {
            if x == r {
                return (false, k);
            }
            if (m - x) % m == r {
                return (true, k);
            }
            x = x * 5 % m;
        }
        unreachable!()
    };
    let build = |minus: GaussianInt, five: GaussianInt| -> Vec<GaussianInt> {
        (0..m)
            .map(|r| {
                if r % 2 == 0 {
                    return GaussianInt::zero();
                }
                let (neg, k) = signed_log(r);
                let s = if neg { minus } else { one };
                s * units_pow(five, k)
            })
            .collect()
    };
    match e {
        2 => vec![build(-one, one)],
        3 => vec![build(one, -one), build(-one, -one)],
        4 => {
            let i = GaussianInt::i();
            vec![
                build(one, i),
                build(one, -i),
                build(-one, i),
                build(-one, -i),
            ]
        }
        _ => Vec::new(),
    }
}

/// Primitive characters of conductor dividing `N` with order dividing
/// `max_order`, ordered by conductor.
pub fn primitive_characters(
    n: u64,
    max_order: u32,
    limit: usize,
) -> Result<Vec<DirichletChar>, ProbeError> {
    if n == 0 {
        return Err(ProbeError::ZeroModulus);
    }
    let mut chars = vec![DirichletChar::trivial()];
    let two_exp = n.trailing_zeros();
    let mut components: Vec<Vec<(u64, Vec<GaussianInt>)>> = Vec::new();
    let mut twos = Vec::new();
    for e in 2..=two_exp.min(4) {
        for v in two_power_parts(e) {
            twos.push((1u64 << e, v));
        }
    }
    if !twos.is_empty() {
        components.push(twos);
    }
    for q in prime_factors(n as u128) {
        let q = q as u64;
        if q == 2 {
            continue;
        }
        if q > 1_000_000 {
            return Err(ProbeError::FactorTooLarge(q));
        }
        components.push(odd_prime_parts(q).into_iter().map(|v| (q, v)).collect());
    }
    // choose at most one primitive part per prime
    for comp in components {
        let mut next = chars.clone();
        for c in &chars {
            for (m, vals) in &comp {
                let mut parts = c.parts.clone();
                parts.push((*m, vals.clone()));
                next.push(DirichletChar {
                    conductor: c.conductor * m,
                    parts,
                });
                if next.len() > limit {
                    return Err(ProbeError::TooManyCharacters {
                        count: next.len(),
                        limit,
                    });
                }
            }
        }
        chars = next;
    }
    chars.retain(|c| max_order.is_multiple_of(c.order()));
    chars.sort_by_key(|a| (a.conductor, a.label()));
    Ok(chars)
}

/// A guess for the one-dimensional summand, turning `a_p` into `b_p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    /// `b_p = a_p`.
    NoSplit,
    /// `b_p = a_p − χ(p)·p`.
    Character(DirichletChar),
}

impl Hypothesis {
    pub fn label(&self) -> String {
        match self {
            Hypothesis::NoSplit => "no_split".into(),
            Hypothesis::Character(c) => c.label(),
        }
    }

    pub fn residual(&self, a: &GaussianInt, p: u64) -> GaussianInt {
        match self {
            Hypothesis::NoSplit => *a,
            Hypothesis::Character(c) => *a - c.eval(p).scale(p as i64),
        }
    }
}

/// `NoSplit` followed by one hypothesis per character of conductor dividing
/// `N` and order dividing `max_order`.
pub fn character_piece_hypotheses(n: u64, max_order: u32) -> Result<Vec<Hypothesis>, ProbeError> {
    let mut out = vec![Hypothesis::NoSplit];
    out.extend(
        primitive_characters(n, max_order, 4096)?
            .into_iter()
            .map(Hypothesis::Character),
    );
    Ok(out)
}

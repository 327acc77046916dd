//! Dirichlet coefficients and partial Euler products of the degree-3
//! L-series `Π_p det(1 − Frob_p p^{−s})^{−1}`.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::{Float, FromPrimitive};
use thiserror::Error;

use crate::extraction::EulerFactor;
use crate::GaussianInt;

/// Local factors with modulus below this abort the product.
pub const POLE_GUARD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LError {
    #[error("|a_p| > 3p at p = {0}")]
    WeilViolation(u64),
    #[error("local factor at p = {p} has modulus {modulus:e} at s = {s}")]
    Pole { p: u64, modulus: f64, s: String },
}

/// Euler factors at the good primes; every other prime is omitted
/// (local factor 1).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LSeries {
    traces: BTreeMap<u64, GaussianInt>,
    omitted: Vec<u64>,
}

impl LSeries {
    /// `omitted` lists the primes deliberately left out (bad primes, or
    /// primes without an unambiguous trace), for reporting only.
    pub fn new(
        factors: impl IntoIterator<Item = EulerFactor>,
        omitted: impl IntoIterator<Item = u64>,
    ) -> Result<Self, LError> {
        let mut traces = BTreeMap::new();
        for f in factors {
            let a = f.trace();
            let bound = 3 * f.p as i128;
            if a.widen().norm() > bound * bound {
                return Err(LError::WeilViolation(f.p));
            }
            traces.insert(f.p, a);
        }
        let mut omitted: Vec<u64> = omitted.into_iter().collect();
        omitted.sort_unstable();
        omitted.dedup();
        Ok(LSeries { traces, omitted })
    }

    pub fn from_traces(
        traces: impl IntoIterator<Item = (u64, GaussianInt)>,
        omitted: impl IntoIterator<Item = u64>,
    ) -> Result<Self, LError> {
        let factors: Vec<EulerFactor> = traces
            .into_iter()
            .map(|(p, a)| crate::extraction::euler_factor(&a, p))
            .collect();
        LSeries::new(factors, omitted)
    }

    pub fn trace(&self, p: u64) -> Option<GaussianInt> {
        self.traces.get(&p).copied()
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.traces.keys().copied()
    }

    pub fn omitted(&self) -> &[u64] {
        &self.omitted
    }

    pub fn conjugate(&self) -> LSeries {
        LSeries {
            traces: self.traces.iter().map(|(&p, a)| (p, a.conj())).collect(),
            omitted: self.omitted.clone(),
        }
    }
}

fn cpx<F: Float>(a: GaussianInt) -> Complex<F> {
    a.to_complex()
}

fn real<F: FromPrimitive>(v: u64) -> F {
    F::from_u64(v).expect("representable")
}

/// `c_1, …, c_n` (index 0 holds 0). Prime powers follow
/// `c_{p^k} = a c_{p^{k−1}} − ā p c_{p^{k−2}} + p³ c_{p^{k−3}}`.
pub fn dirichlet_coeffs<F: Float + FromPrimitive>(series: &LSeries, n: usize) -> Vec<Complex<F>> {
    let mut c = vec![Complex::new(F::zero(), F::zero()); n + 1];
    if n == 0 {
        return c;
    }
    c[1] = Complex::new(F::one(), F::zero());
    let mut spf = vec![0usize; n + 1];
    for i in 2..=n {
        if spf[i] != 0 {
            continue;
        }
        for j in (i..=n).step_by(i) {
            if spf[j] == 0 {
                spf[j] = i;
            }
        }
        // prime powers of i
        if let Some(a) = series.trace(i as u64) {
            let a1 = cpx::<F>(a);
            let a2 = cpx::<F>(a.conj()) * real::<F>(i as u64);
            let a3 = real::<F>((i as u64).pow(3));
            let (mut prev3, mut prev2, mut prev1) = (c[0], c[0], c[1]);
            let mut q = i;
            loop {
                let next = a1 * prev1 - a2 * prev2 + prev3 * a3;
                c[q] = next;
                prev3 = prev2;
                prev2 = prev1;
                prev1 = next;
                match q.checked_mul(i) {
                    Some(nq) if nq <= n => q = nq,
                    _ => break,
                }
            }
        }
    }
    for m in 2..=n {
        let p = spf[m];
        let mut pk = p;
        while m % (pk * p) == 0 {
            pk *= p;
        }
        if pk != m {
            c[m] = c[pk] * c[m / pk];
        }
    }
    c
}

/// `p^{−s}`, exact for real `s` whenever `powf` is.
fn p_to_minus_s<F: Float + FromPrimitive>(p: u64, s: Complex<F>) -> Complex<F> {
    let pf: F = real(p);
    if s.im.is_zero() {
        Complex::new(pf.powf(-s.re), F::zero())
    } else {
        (-s * pf.ln()).exp()
    }
}

fn local_factor<F: Float + FromPrimitive>(a: GaussianInt, p: u64, s: Complex<F>) -> Complex<F> {
    let x = p_to_minus_s(p, s);
    let pf: F = real(p);
    let one = Complex::new(F::one(), F::zero());
    one - cpx::<F>(a) * x + cpx::<F>(a.conj()) * x * x * pf - x * x * x * (pf * pf * pf)
}

/// `Π_{p ≤ P} (1 − a_p p^{−s} + ā_p p^{1−2s} − p^{3−3s})^{−1}` over the
/// included primes, folded in increasing `p`.
pub fn partial_l<F: Float + FromPrimitive + std::fmt::Display>(
    series: &LSeries,
    s: Complex<F>,
    p_max: u64,
) -> Result<Complex<F>, LError> {
    let guard: F = F::from_f64(POLE_GUARD).unwrap();
    let mut value = Complex::new(F::one(), F::zero());
    for (&p, &a) in series.traces.range(..=p_max) {
        let f = local_factor(a, p, s);
        if f.norm() < guard {
            return Err(LError::Pole {
                p,
                modulus: f.norm().to_f64().unwrap_or(0.0),
                s: format!("{s}"),
            });
        }
        value = value / f;
    }
    Ok(value)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow<F> {
    pub s: Complex<F>,
    pub p_max: u64,
    pub value: Complex<F>,
    /// `|L(P_i) − L(P_{i−1})| / |L(P_i)|`.
    pub difference: F,
}

/// Successive relative differences of `partial_l` along `grid`; a grid of
/// length one has no differences.
pub fn convergence_report<F: Float + FromPrimitive + std::fmt::Display>(
    series: &LSeries,
    s: Complex<F>,
    grid: &[u64],
) -> Result<Vec<ConvergenceRow<F>>, LError> {
    let values = grid
        .iter()
        .map(|&p| partial_l(series, s, p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(grid
        .windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| ConvergenceRow {
            s,
            p_max: g[1],
            value: v[1],
            difference: (v[1] - v[0]).norm() / v[1].norm(),
        })
        .collect())
}

pub const CONVERGENCE_HEADER: &str = "s_re,s_im,P,value_re,value_im,difference";

pub fn convergence_csv<F: Float + std::fmt::Display + std::fmt::LowerExp>(
    rows: &[ConvergenceRow<F>],
) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.15e},{:.15e},{:.6e}\n",
            r.s.re, r.s.im, r.p_max, r.value.re, r.value.im, r.difference
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn single_factor_at_two() {
        let series = LSeries::from_traces([(2, GaussianInt::zero())], []).unwrap();
        let v = partial_l(&series, c(3.0), 2).unwrap();
        assert!((v.re - 64.0 / 63.0).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
        assert_eq!(partial_l(&series, c(3.0), 1).unwrap(), c(1.0));
    }

    #[test]
    fn recursion_examples() {
        let series =
            LSeries::from_traces([(2, GaussianInt::zero()), (3, GaussianInt::new(1, 2))], [])
                .unwrap();
        let co = dirichlet_coeffs::<f64>(&series, 12);
        assert_eq!(co[1], c(1.0));
        assert_eq!(co[2], c(0.0));
        assert_eq!(co[4], c(0.0));
        assert_eq!(co[8], c(8.0));
        assert_eq!(co[6], co[2] * co[3]);
        assert_eq!(co[3], Complex::new(1.0, 2.0));
        // c_9 = a² − ā·3
        assert_eq!(
            co[9],
            Complex::new(1.0, 2.0).powi(2) - Complex::new(3.0, -6.0)
        );
        // 5 and 7 absent: omitted
        assert_eq!(co[5], c(0.0));
        assert_eq!(co[10], c(0.0));
    }

    #[test]
    fn weil_bound_enforced() {
        assert_eq!(
            LSeries::from_traces([(5, GaussianInt::new(16, 0))], []),
            Err(LError::WeilViolation(5))
        );
    }

    #[test]
    fn pole_guard_fires() {
        // a = 3p at s = 1 makes the factor (1 − 1)³ = 0
        let series = LSeries::from_traces([(5, GaussianInt::new(15, 0))], []).unwrap();
        assert!(matches!(
            partial_l(&series, c(1.0), 5),
            Err(LError::Pole { p: 5, .. })
        ));
    }

    #[test]
    fn convergence_edge_cases() {
        let empty = LSeries::default();
        let rows = convergence_report(&empty, c(3.0), &[10, 100, 1000]).unwrap();
        assert!(rows.iter().all(|r| r.difference == 0.0));
        assert!(convergence_report(&empty, c(3.0), &[10])
            .unwrap()
            .is_empty());
        let csv = convergence_csv(&rows);
        assert!(csv.starts_with(CONVERGENCE_HEADER));
        assert_eq!(csv.lines().count(), 3);
    }

    fn series_strategy() -> impl Strategy<Value = LSeries> {
        let primes = [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29];
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), primes.len()).prop_map(move |v| {
            LSeries::from_traces(
                primes.iter().zip(v).map(|(&p, (x, y))| {
                    let r = 2.0 * p as f64;
                    (p, GaussianInt::new((x * r) as i64, (y * r) as i64))
                }),
                [],
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn conjugation_reflects(series in series_strategy(), sr in 2.5f64..5.0, si in -3.0f64..3.0) {
            let s = Complex::new(sr, si);
            let v = partial_l(&series, s, 30).unwrap();
            let w = partial_l(&series.conjugate(), s.conj(), 30).unwrap();
            prop_assert!((v.conj() - w).norm() <= 1e-12 * v.norm());
        }

        #[test]
        fn coefficients_multiplicative(series in series_strategy()) {
            let co = dirichlet_coeffs::<f64>(&series, 2000);
            for m in 2..45usize {
                for n in 2..=2000 / m {
                    if num_integer::gcd(m, n) == 1 {
                        let lhs = co[m * n];
                        let rhs = co[m] * co[n];
                        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
                    }
                }
            }
        }
    }
}

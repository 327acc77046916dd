//! Trace-level checks: Weil bound, purity, ordinarity and the censuses.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_rational::Ratio;
use num_traits::{Float, FromPrimitive};
use thiserror::Error;

use crate::extraction::TraceCandidate;
use crate::gaussian::{
    place_valuation, rational_divides, scaled_disc_member, split_prime, QiPlace, ResidueElem,
    ResidueField, Valuation,
};
use crate::numeric::qp_roots;
use crate::GaussianInt;

/// Default relative tolerance on root moduli.
pub const PURITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerificationError {
    #[error("census input is empty")]
    EmptyInput,
    #[error("residual censuses need l > 7, got l = {0}")]
    SmallPlace(u64),
    #[error("place over {l} divides p = {p}")]
    PlaceDividesP { l: u64, p: u64 },
}

/// `norm(a) <= 9p²`.
pub fn weil_bound_check(a: &GaussianInt, p: u64) -> bool {
    let p = p as i128;
    a.widen().norm() <= 9 * p * p
}

/// Moduli of the three roots of `Q_p`.
pub fn root_moduli<F: Float + FromPrimitive>(a: &GaussianInt, p: u64) -> [F; 3] {
    qp_roots::<F>(a, p).map(|r: Complex<F>| r.norm())
}

/// Every root of `Q_p` has modulus within `tol·p` of `p`.
pub fn purity_check<F: Float + FromPrimitive>(a: &GaussianInt, p: u64, tol: F) -> bool {
    let pf = F::from_u64(p).unwrap();
    root_moduli::<F>(a, p)
        .iter()
        .all(|&m| (m - pf).abs() <= tol * pf)
}

/// Exact purity: `a/p` lies in the closed region traced by traces of
/// `SU(3)`, i.e. `27p⁴ − |a|⁴ + 8p·Re(a³) − 18p²|a|² >= 0`.
pub fn purity_exact(a: &GaussianInt, p: u64) -> bool {
    let a = a.widen();
    let p = p as i128;
    let n = a.norm();
    let cube = a * a * a;
    27 * p.pow(4) - n * n + 8 * p * cube.re - 18 * p * p * n >= 0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ordinarity {
    OrdinaryCertified,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrdinarityVerdict {
    pub p: u64,
    pub verdict: Ordinarity,
    /// Valuations of `a` at the places of `Q(i)` over `p`.
    pub witness: Vec<(QiPlace, Valuation)>,
}

/// Certified ordinary iff `p ∤ a` in `Z[i]`.
pub fn ordinarity_classify(p: u64, a: &GaussianInt) -> OrdinarityVerdict {
    let place = split_prime(p);
    let mut places = vec![place.clone()];
    if place.is_split() {
        places.push(place.conjugate());
    }
    let witness = places
        .into_iter()
        .map(|v| {
            let val = place_valuation(a, &v);
            (v, val)
        })
        .collect();
    let verdict = if rational_divides(p as i64, a) {
        Ordinarity::Undetermined
    } else {
        Ordinarity::OrdinaryCertified
    };
    OrdinarityVerdict {
        p,
        verdict,
        witness,
    }
}

/// One category of a census. `certain` counts primes where every sibling
/// candidate falls in the category, `possible` those where at least one does.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CensusRow {
    pub label: String,
    pub certain: u64,
    pub possible: u64,
}

/// Counts over a partition of the input primes. Primes whose candidates fall
/// in different categories go to the `mixed` row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CensusReport {
    pub predicate: String,
    pub p_min: u64,
    pub p_max: u64,
    pub total: u64,
    pub rows: Vec<CensusRow>,
}

pub const MIXED: &str = "mixed";

impl CensusReport {
    fn build<K: Ord + Copy>(
        predicate: &str,
        items: &[(u64, Vec<K>)],
        labels: &[(K, &str)],
    ) -> Result<Self, VerificationError> {
        if items.is_empty() {
            return Err(VerificationError::EmptyInput);
        }
        let mut certain: BTreeMap<K, u64> = BTreeMap::new();
        let mut possible: BTreeMap<K, u64> = BTreeMap::new();
        let mut mixed = 0u64;
        for (_, cats) in items {
            let mut distinct = cats.clone();
            distinct.sort();
            distinct.dedup();
            for k in &distinct {
                *possible.entry(*k).or_default() += 1;
            }
            if distinct.len() == 1 {
                *certain.entry(distinct[0]).or_default() += 1;
            } else {
                mixed += 1;
            }
        }
        let mut rows: Vec<CensusRow> = labels
            .iter()
            .map(|(k, label)| CensusRow {
                label: label.to_string(),
                certain: certain.get(k).copied().unwrap_or(0),
                possible: possible.get(k).copied().unwrap_or(0),
            })
            .collect();
        rows.push(CensusRow {
            label: MIXED.to_string(),
            certain: mixed,
            possible: mixed,
        });
        Ok(CensusReport {
            predicate: predicate.to_string(),
            p_min: items.iter().map(|x| x.0).min().unwrap(),
            p_max: items.iter().map(|x| x.0).max().unwrap(),
            total: items.len() as u64,
            rows,
        })
    }

    pub fn row(&self, label: &str) -> Option<&CensusRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Certain fraction of a category.
    pub fn fraction(&self, label: &str) -> Ratio<u64> {
        let n = self.row(label).map_or(0, |r| r.certain);
        Ratio::new(n, self.total)
    }

    pub fn possible_fraction(&self, label: &str) -> Ratio<u64> {
        let n = self.row(label).map_or(0, |r| r.possible);
        Ratio::new(n, self.total)
    }

    /// `range,predicate,category,semantics,numerator,denominator` rows.
    pub fn to_csv_rows(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (sem, n) in [("certain", r.certain), ("possible", r.possible)] {
                out.push(format!(
                    "{}-{},{},{},{},{},{}",
                    self.p_min, self.p_max, self.predicate, r.label, sem, n, self.total
                ));
            }
        }
        out
    }
}

fn candidate_values(cands: &[TraceCandidate]) -> Vec<(u64, Vec<GaussianInt>)> {
    cands.iter().map(|c| (c.p, c.all())).collect()
}

/// Fraction of primes with `a_p ∈ p·C_r`.
pub fn disc_census(cands: &[TraceCandidate], r: i64) -> Result<CensusReport, VerificationError> {
    let items: Vec<(u64, Vec<bool>)> = candidate_values(cands)
        .into_iter()
        .map(|(p, vals)| {
            let cats = vals
                .iter()
                .map(|a| scaled_disc_member(a, p as i64, r))
                .collect();
            (p, cats)
        })
        .collect();
    let name = format!("disc_pC{r}");
    CensusReport::build(&name, &items, &[(true, "inside"), (false, "outside")])
}

/// Certified-ordinary fraction.
pub fn ordinarity_census(cands: &[TraceCandidate]) -> Result<CensusReport, VerificationError> {
    let items: Vec<(u64, Vec<Ordinarity>)> = candidate_values(cands)
        .into_iter()
        .map(|(p, vals)| {
            let cats = vals
                .iter()
                .map(|a| ordinarity_classify(p, a).verdict)
                .collect();
            (p, cats)
        })
        .collect();
    CensusReport::build(
        "ordinarity",
        &items,
        &[
            (Ordinarity::OrdinaryCertified, "ordinary_certified"),
            (Ordinarity::Undetermined, "undetermined"),
        ],
    )
}

/// Factorization type of `Q_p` modulo a place.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResidualType {
    Irreducible,
    Split12,
    Split111,
}

impl ResidualType {
    pub fn label(self) -> &'static str {
        match self {
            ResidualType::Irreducible => "irreducible",
            ResidualType::Split12 => "split_1_2",
            ResidualType::Split111 => "split_1_1_1",
        }
    }
}

type Poly = Vec<ResidueElem>;

/// `(b, c, d)` of `Q_p = X³ + bX² + cX + d` reduced mod the place.
fn reduced_qp(k: &ResidueField, a: &GaussianInt, p: u64) -> [ResidueElem; 3] {
    let pi = p as i64;
    let pr = k.reduce(&GaussianInt::from_int(pi));
    [
        k.reduce(&-*a),
        k.reduce(&a.conj().scale(pi)),
        k.neg(k.mul(k.mul(pr, pr), pr)),
    ]
}

fn trim(k: &ResidueField, mut f: Poly) -> Poly {
    while f.last() == Some(&k.zero()) {
        f.pop();
    }
    f
}

fn poly_rem(k: &ResidueField, mut f: Poly, g: &Poly) -> Poly {
    let lead_inv = k.inv(*g.last().unwrap()).unwrap();
    f = trim(k, f);
    while f.len() >= g.len() {
        let shift = f.len() - g.len();
        let coef = k.mul(*f.last().unwrap(), lead_inv);
        for (i, &gi) in g.iter().enumerate() {
            f[shift + i] = k.sub(f[shift + i], k.mul(coef, gi));
        }
        f = trim(k, f);
    }
    f
}

fn poly_gcd_degree(k: &ResidueField, f: Poly, g: Poly) -> usize {
    let (mut a, mut b) = (trim(k, f), trim(k, g));
    while !b.is_empty() {
        let r = poly_rem(k, a, &b);
        a = b;
        b = r;
    }
    a.len().saturating_sub(1)
}

/// `x·y mod (X³ + bX² + cX + d)` on degree-≤2 residues.
fn mulmod(
    k: &ResidueField,
    x: &[ResidueElem; 3],
    y: &[ResidueElem; 3],
    q: &[ResidueElem; 3],
) -> [ResidueElem; 3] {
    let mut prod = [k.zero(); 5];
    for i in 0..3 {
        for j in 0..3 {
            prod[i + j] = k.add(prod[i + j], k.mul(x[i], y[j]));
        }
    }
    // X³ = −(bX² + cX + d)
    for top in (3..5).rev() {
        let t = prod[top];
        prod[top] = k.zero();
        prod[top - 1] = k.sub(prod[top - 1], k.mul(t, q[0]));
        prod[top - 2] = k.sub(prod[top - 2], k.mul(t, q[1]));
        prod[top - 3] = k.sub(prod[top - 3], k.mul(t, q[2]));
    }
    [prod[0], prod[1], prod[2]]
}

fn check_place(p: u64, v: &QiPlace) -> Result<(), VerificationError> {
    if v.p <= 7 {
        return Err(VerificationError::SmallPlace(v.p));
    }
    if p.is_multiple_of(v.p) {
        return Err(VerificationError::PlaceDividesP { l: v.p, p });
    }
    Ok(())
}

/// Factorization type of `Q_p` over the residue field of `v`, through the
/// number of distinct roots `deg gcd(Q, X^q − X)`.
pub fn residual_factor_type(a: &GaussianInt, p: u64, v: &QiPlace) -> ResidualType {
    assert!(v.p > 3 && !p.is_multiple_of(v.p), "need l > 3 and l ∤ p");
    let k = v.residue_field();
    let q = reduced_qp(&k, a, p);
    let one = k.from_u64(1);
    // X^card mod Q by square and multiply
    let x = [k.zero(), one, k.zero()];
    let mut acc = [one, k.zero(), k.zero()];
    let mut base = x;
    let mut e = k.cardinality();
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(&k, &acc, &base, &q);
        }
        base = mulmod(&k, &base, &base, &q);
        e >>= 1;
    }
    let h: Poly = vec![acc[0], k.sub(acc[1], one), acc[2]];
    let cubic: Poly = vec![q[2], q[1], q[0], one];
    match poly_gcd_degree(&k, cubic, h) {
        0 => ResidualType::Irreducible,
        2 | 3 => ResidualType::Split111,
        _ => {
            // one distinct root: simple root times an irreducible quadratic,
            // or a triple root −b/3
            let r = k.mul(k.neg(q[0]), k.inv(k.from_u64(3)).unwrap());
            let val = |x: ResidueElem| {
                let x2 = k.mul(x, x);
                k.add(
                    k.add(k.mul(x2, x), k.mul(q[0], x2)),
                    k.add(k.mul(q[1], x), q[2]),
                )
            };
            let d1 = k.add(
                k.add(
                    k.mul(k.from_u64(3), k.mul(r, r)),
                    k.mul(k.from_u64(2), k.mul(q[0], r)),
                ),
                q[1],
            );
            if val(r) == k.zero() && d1 == k.zero() {
                ResidualType::Split111
            } else {
                ResidualType::Split12
            }
        }
    }
}

/// Oracle: counts roots with multiplicity by scanning the residue field.
pub fn residual_factor_type_scan(a: &GaussianInt, p: u64, v: &QiPlace) -> ResidualType {
    let k = v.residue_field();
    let q = reduced_qp(&k, a, p);
    let three = k.from_u64(3);
    let two = k.from_u64(2);
    let six = k.from_u64(6);
    let mut total = 0;
    for x in k.elements() {
        let x2 = k.mul(x, x);
        let f0 = k.add(
            k.add(k.mul(x2, x), k.mul(q[0], x2)),
            k.add(k.mul(q[1], x), q[2]),
        );
        if f0 != k.zero() {
            continue;
        }
        let f1 = k.add(k.add(k.mul(three, x2), k.mul(two, k.mul(q[0], x))), q[1]);
        let f2 = k.add(k.mul(six, x), k.mul(two, q[0]));
        total += if f1 != k.zero() {
            1
        } else if f2 != k.zero() {
            2
        } else {
            3
        };
    }
    match total {
        0 => ResidualType::Irreducible,
        1 => ResidualType::Split12,
        _ => ResidualType::Split111,
    }
}

/// Factorization types of `Q_p` mod `v` over the candidates with `p ≠ l`.
pub fn residual_census(
    cands: &[TraceCandidate],
    v: &QiPlace,
) -> Result<CensusReport, VerificationError> {
    let items: Vec<(u64, Vec<ResidualType>)> = candidate_values(cands)
        .into_iter()
        .filter(|(p, _)| p % v.p != 0)
        .map(|(p, vals)| {
            let cats = vals.iter().map(|a| residual_factor_type(a, p, v)).collect();
            (p, cats)
        })
        .collect();
    check_place(items.first().map_or(1, |x| x.0), v)?;
    CensusReport::build(
        &format!("residual_{}", v.uniformizer()),
        &items,
        &[
            (ResidualType::Irreducible, "irreducible"),
            (ResidualType::Split12, "split_1_2"),
            (ResidualType::Split111, "split_1_1_1"),
        ],
    )
}

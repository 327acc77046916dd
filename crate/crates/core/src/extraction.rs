//! From raw counts to Gaussian-integer traces.
//!
//! At a good prime the counts decompose as
//!
//! ```text
//! S1 − 2·a_E(p)        = 2·Re α + p·m1 + c1
//! Sφ                   = −2·Im α + p·mφ + cφ
//! S2 − 2·(a_E(p)² − 2p) = 2·Re(α² − 2p·δ·ᾱ) + p²·m2 + c2
//! ```
//!
//! where `α` is the raw trace on one eigenspace, `a_E` the trace of the
//! elliptic curve `Y² = X³ + zX² − X` carried by the boundary, `δ = ε(p)⁻³`
//! the determinant unit of the untwisted system and `(m·, c·)` constants of
//! the symbol class of `p`. The twisted trace is `a_p = ε(p)·α`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::arith::{kronecker, legendre, reduce_i64};
use crate::counting::{elliptic_trace, CountError, CountRecord, SurfaceParams};
use crate::verification::{purity_check, weil_bound_check, PURITY_TOL};
use crate::GaussianInt;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractionError {
    #[error("no candidate trace survives at p = {p}")]
    EmptyCandidateSet { p: u64 },
    #[error("class {class} of p = {p} is not covered by the law")]
    UncoveredClass { p: u64, class: SymbolClass },
    #[error("epsilon is undefined at p = {0}")]
    TwistUndefined(u64),
    #[error(transparent)]
    Count(#[from] CountError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalibrationError {
    #[error("no constant tuple is consistent with class {class} (primes {primes:?})")]
    NoConsistentLaw {
        class: SymbolClass,
        primes: Vec<u64>,
    },
    #[error("several constant tuples survive in {} class(es)", .classes.len())]
    Ambiguous {
        law: Box<CorrectionLaw>,
        classes: Vec<SymbolClass>,
    },
    #[error("calibration record at p = {0} lacks S2 or oracle verification")]
    UnusableRecord(u64),
    #[error("no calibration records")]
    Empty,
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
}

/// The tuple `(p mod 8, χ(−1), χ(2), χ(z), χ(z²+4))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolClass {
    pub p_mod_8: u8,
    pub chi_minus_one: i8,
    pub chi_two: i8,
    pub chi_z: i8,
    pub chi_z2_plus_4: i8,
}

impl SymbolClass {
    pub fn of(params: &SurfaceParams, p: u64) -> Self {
        let z = params.z() as i128;
        let z2p4 = reduce_i64(((z * z + 4) % p as i128) as i64, p) as i64;
        SymbolClass {
            p_mod_8: (p % 8) as u8,
            chi_minus_one: legendre(-1, p),
            chi_two: legendre(2, p),
            chi_z: legendre(params.z(), p),
            chi_z2_plus_4: legendre(z2p4, p),
        }
    }
}

impl fmt::Display for SymbolClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |v: i8| if v > 0 { '+' } else { '-' };
        write!(
            f,
            "{}{}{}{}{}",
            self.p_mod_8,
            s(self.chi_minus_one),
            s(self.chi_two),
            s(self.chi_z),
            s(self.chi_z2_plus_4)
        )
    }
}

impl FromStr for SymbolClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let b = s.as_bytes();
        if b.len() != 5 || !(b'0'..=b'7').contains(&b[0]) {
            return Err(format!("bad symbol class {s:?}"));
        }
        let sign = |c: u8| match c {
            b'+' => Ok(1),
            b'-' => Ok(-1),
            _ => Err(format!("bad symbol class {s:?}")),
        };
        Ok(SymbolClass {
            p_mod_8: b[0] - b'0',
            chi_minus_one: sign(b[1])?,
            chi_two: sign(b[2])?,
            chi_z: sign(b[3])?,
            chi_z2_plus_4: sign(b[4])?,
        })
    }
}

/// Correction constants of one symbol class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Constants {
    pub m1: i64,
    pub c1: i64,
    pub mphi: i64,
    pub cphi: i64,
    pub m2: i64,
    pub c2: i64,
}

impl fmt::Display for Constants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.m1, self.c1, self.mphi, self.cphi, self.m2, self.c2
        )
    }
}

/// Surviving constant tuples of a class and the primes that support them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassLaw {
    pub candidates: Vec<Constants>,
    pub support: Vec<u64>,
}

/// Which eigenspace is labelled `W`: `Raw` keeps `α`, `Conjugate` replaces it by `ᾱ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Raw,
    Conjugate,
}

impl Orientation {
    pub fn apply(self, alpha: GaussianInt) -> GaussianInt {
        match self {
            Orientation::Raw => alpha,
            Orientation::Conjugate => alpha.conj(),
        }
    }
}

/// Per-class constants, the orientation and the classes left uncovered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrectionLaw {
    pub z: i64,
    pub classes: BTreeMap<SymbolClass, ClassLaw>,
    pub uncovered: BTreeMap<SymbolClass, Vec<u64>>,
    pub orientation: Orientation,
}

impl CorrectionLaw {
    pub fn is_ambiguous(&self) -> bool {
        self.classes.values().any(|c| c.candidates.len() > 1)
    }

    /// Deterministic text block, one line per class and candidate tuple.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "law z={} orientation={}\n",
            self.z,
            match self.orientation {
                Orientation::Raw => "raw",
                Orientation::Conjugate => "conjugate",
            }
        );
        out.push_str("# class m1 c1 mphi cphi m2 c2 support\n");
        for (class, law) in &self.classes {
            for k in &law.candidates {
                out.push_str(&format!("{class} {k} {}\n", law.support.len()));
            }
        }
        for (class, primes) in &self.uncovered {
            out.push_str(&format!("{class} uncovered {}\n", primes.len()));
        }
        out
    }
}

/// A quartic-or-smaller Dirichlet character used as `ε`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Twist {
    Trivial,
    /// `p ↦ (d / p)` (Kronecker symbol).
    Quadratic {
        d: i64,
    },
    /// Values on residues mod `modulus`; residues not listed are undefined.
    Table {
        modulus: u64,
        values: BTreeMap<u64, GaussianInt>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("epsilon spec line {line}: {reason}")]
pub struct TwistParseError {
    pub line: usize,
    pub reason: String,
}

impl Twist {
    /// `(−z / p)`, the default for parameter `z`.
    pub fn default_for(z: i64) -> Self {
        Twist::Quadratic { d: -z }
    }

    pub fn eval(&self, p: u64) -> Option<GaussianInt> {
        match self {
            Twist::Trivial => Some(GaussianInt::one()),
            Twist::Quadratic { d } => match kronecker(*d, p) {
                0 => None,
                s => Some(GaussianInt::from_int(s as i64)),
            },
            Twist::Table { modulus, values } => values.get(&(p % modulus)).copied(),
        }
    }

    /// Text accepted by [`Twist::parse`].
    pub fn to_spec(&self) -> String {
        match self {
            Twist::Trivial => "trivial\n".into(),
            Twist::Quadratic { d } => format!("quadratic {d}\n"),
            Twist::Table { modulus, values } => {
                let mut s = format!("modulus {modulus}\n");
                for (r, v) in values {
                    s.push_str(&format!("{r} {v}\n"));
                }
                s
            }
        }
    }

    /// Parses `trivial`, `quadratic <d>`, or `modulus <N>` followed by
    /// `<residue> <unit>` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TwistParseError> {
        let mut kind: Option<Twist> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| TwistParseError {
                line: n + 1,
                reason: reason.to_string(),
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            match (&mut kind, parts.as_slice()) {
                (None, ["trivial"]) => kind = Some(Twist::Trivial),
                (None, ["quadratic", d]) => {
                    let d = d.parse().map_err(|_| err("bad discriminant"))?;
                    kind = Some(Twist::Quadratic { d });
                }
                (None, ["modulus", m]) => {
                    let modulus: u64 = m.parse().map_err(|_| err("bad modulus"))?;
                    if modulus == 0 {
                        return Err(err("modulus must be positive"));
                    }
                    kind = Some(Twist::Table {
                        modulus,
                        values: BTreeMap::new(),
                    });
                }
                (Some(Twist::Table { modulus, values }), [r, v]) => {
                    let r: u64 = r.parse().map_err(|_| err("bad residue"))?;
                    let v: GaussianInt = v.parse().map_err(|_| err("bad value"))?;
                    if !v.is_unit() {
                        return Err(err("values must be fourth roots of unity"));
                    }
                    if r >= *modulus || values.insert(r, v).is_some() {
                        return Err(err("residue out of range or repeated"));
                    }
                }
                _ => return Err(err("unexpected line")),
            }
        }
        let twist = kind.ok_or(TwistParseError {
            line: 0,
            reason: "empty spec".into(),
        })?;
        if let Twist::Table { modulus, values } = &twist {
            for (&a, &va) in values {
                for (&b, &vb) in values {
                    let ab = a * b % modulus;
                    if let Some(&vab) = values.get(&ab) {
                        if vab != va * vb {
                            return Err(TwistParseError {
                                line: 0,
                                reason: format!("not multiplicative at {a}·{b}"),
                            });
                        }
                    }
                }
            }
        }
        Ok(twist)
    }
}

/// `a_p = ε(p)·α_p`.
pub fn apply_twist(
    alpha: &GaussianInt,
    p: u64,
    epsilon: &Twist,
) -> Result<GaussianInt, ExtractionError> {
    let e = epsilon.eval(p).ok_or(ExtractionError::TwistUndefined(p))?;
    Ok(e * *alpha)
}

/// Everything the identities need at one prime besides the counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeContext {
    pub p: u64,
    /// Trace of Frobenius on the boundary elliptic curve.
    pub a_e: i64,
    /// `ε(p)`.
    pub eps: GaussianInt,
    pub orientation: Orientation,
}

impl PrimeContext {
    pub fn new(
        params: &SurfaceParams,
        p: u64,
        twist: &Twist,
        orientation: Orientation,
    ) -> Result<Self, ExtractionError> {
        Ok(PrimeContext {
            p,
            a_e: elliptic_trace(params, p)?,
            eps: twist.eval(p).ok_or(ExtractionError::TwistUndefined(p))?,
            orientation,
        })
    }

    /// `δ = ε⁻³` in the raw frame.
    fn det_unit_raw(&self) -> GaussianInt {
        let d = self.eps.conj() * self.eps.conj() * self.eps.conj();
        self.orientation.apply(d)
    }

    fn s1_corrected(&self, s1: i64) -> i64 {
        s1 - 2 * self.a_e
    }

    fn s2_corrected(&self, s2: i64) -> i64 {
        s2 - 2 * (self.a_e * self.a_e - 2 * self.p as i64)
    }

    /// Twisted trace for a raw `α`.
    pub fn twisted(&self, alpha_raw: GaussianInt) -> GaussianInt {
        self.eps * self.orientation.apply(alpha_raw)
    }

    /// `2·Re(α² − 2p·δ·ᾱ)` for the raw `α`.
    fn frob2_trace(&self, alpha: &GaussianInt) -> i64 {
        let p = self.p as i64;
        let delta = self.det_unit_raw();
        let v = *alpha * *alpha - (delta * alpha.conj()).scale(2 * p);
        2 * v.re
    }
}

/// `α² − 2p·ᾱ`.
pub fn newton_frob2(alpha: &GaussianInt, p: u64) -> GaussianInt {
    *alpha * *alpha - alpha.conj().scale(2 * p as i64)
}

/// `α³ − 3p·N(α) + 3p³`.
pub fn newton_frob3(alpha: &GaussianInt, p: u64) -> GaussianInt {
    let p = p as i64;
    *alpha * *alpha * *alpha - GaussianInt::from_int(3 * p * alpha.norm() - 3 * p * p * p)
}

/// The counts that the identities predict for a raw `α` under constants `k`.
pub fn forward_counts(
    z: i64,
    alpha: GaussianInt,
    k: &Constants,
    ctx: &PrimeContext,
    with_s2: bool,
) -> CountRecord {
    let p = ctx.p as i64;
    let s2 = with_s2
        .then(|| ctx.frob2_trace(&alpha) + p * p * k.m2 + k.c2 + 2 * (ctx.a_e * ctx.a_e - 2 * p));
    CountRecord {
        z,
        p: ctx.p,
        s1: 2 * alpha.re + p * k.m1 + k.c1 + 2 * ctx.a_e,
        sphi: -2 * alpha.im + p * k.mphi + k.cphi,
        s2,
        oracle_verified: true,
    }
}

/// Checks the three count identities for a raw `α`.
pub fn extraction_identities(
    record: &CountRecord,
    alpha: &GaussianInt,
    k: &Constants,
    ctx: &PrimeContext,
) -> bool {
    let p = record.p as i64;
    let s1_ok = ctx.s1_corrected(record.s1) == 2 * alpha.re + p * k.m1 + k.c1;
    let sphi_ok = record.sphi == -2 * alpha.im + p * k.mphi + k.cphi;
    let s2_ok = match record.s2 {
        Some(s2) => ctx.s2_corrected(s2) == ctx.frob2_trace(alpha) + p * p * k.m2 + k.c2,
        None => true,
    };
    s1_ok && sphi_ok && s2_ok
}

fn half(v: i64) -> Option<i64> {
    (v % 2 == 0).then_some(v / 2)
}

/// Raw `α` from `S1` and `Sφ` under one constant tuple.
fn alpha_from(record: &CountRecord, k: &Constants, ctx: &PrimeContext) -> Option<GaussianInt> {
    let p = record.p as i64;
    let re = half(ctx.s1_corrected(record.s1) - p * k.m1 - k.c1)?;
    let im = half(-(record.sphi - p * k.mphi - k.cphi))?;
    Some(GaussianInt::new(re, im))
}

/// A resolved trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceCandidate {
    pub p: u64,
    /// Untwisted trace, oriented.
    pub alpha: GaussianInt,
    /// Twisted trace `ε(p)·α`.
    pub a: GaussianInt,
    pub law_class: SymbolClass,
    pub ambiguous: bool,
    /// Other admissible values of `a`.
    pub siblings: Vec<GaussianInt>,
}

impl TraceCandidate {
    /// `a` followed by its siblings.
    pub fn all(&self) -> Vec<GaussianInt> {
        let mut v = vec![self.a];
        v.extend(self.siblings.iter().copied());
        v
    }
}

/// Coefficients of `Q_p(X) = X³ − aX² + āpX − p³`, leading first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EulerFactor {
    pub p: u64,
    pub coeffs: [GaussianInt; 4],
}

impl EulerFactor {
    pub fn trace(&self) -> GaussianInt {
        -self.coeffs[1]
    }
}

pub fn euler_factor(a: &GaussianInt, p: u64) -> EulerFactor {
    let pi = p as i64;
    EulerFactor {
        p,
        coeffs: [
            GaussianInt::one(),
            -*a,
            a.conj().scale(pi),
            GaussianInt::from_int(-pi * pi * pi),
        ],
    }
}

/// Candidate traces for `record` under `law`.
pub fn resolve_trace(
    record: &CountRecord,
    law: &CorrectionLaw,
    twist: &Twist,
) -> Result<TraceCandidate, ExtractionError> {
    let params = SurfaceParams::new(record.z)?;
    let p = record.p;
    let class = SymbolClass::of(&params, p);
    let class_law = law
        .classes
        .get(&class)
        .ok_or(ExtractionError::UncoveredClass { p, class })?;
    let ctx = PrimeContext::new(&params, p, twist, law.orientation)?;
    resolve_with(record, &class_law.candidates, &ctx, class)
}

/// Resolution against an explicit list of constant tuples.
pub fn resolve_with(
    record: &CountRecord,
    candidates: &[Constants],
    ctx: &PrimeContext,
    class: SymbolClass,
) -> Result<TraceCandidate, ExtractionError> {
    let p = record.p;
    let mut found: Vec<(GaussianInt, GaussianInt)> = Vec::new();
    for k in candidates {
        let Some(alpha) = alpha_from(record, k, ctx) else {
            continue;
        };
        if !weil_bound_check(&alpha, p) || !extraction_identities(record, &alpha, k, ctx) {
            continue;
        }
        let a = ctx.twisted(alpha);
        if !purity_check(&a, p, PURITY_TOL) {
            continue;
        }
        if !found.iter().any(|(_, b)| *b == a) {
            found.push((ctx.orientation.apply(alpha), a));
        }
    }
    let Some(&(alpha, a)) = found.first() else {
        return Err(ExtractionError::EmptyCandidateSet { p });
    };
    let siblings: Vec<GaussianInt> = found[1..].iter().map(|(_, b)| *b).collect();
    Ok(TraceCandidate {
        p,
        alpha,
        a,
        law_class: class,
        ambiguous: !siblings.is_empty(),
        siblings,
    })
}

/// Search bounds and support threshold for calibration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CalibrationBounds {
    pub r_max: i64,
    pub c_max: i64,
    pub min_support: usize,
}

impl Default for CalibrationBounds {
    fn default() -> Self {
        CalibrationBounds {
            r_max: 40,
            c_max: 10,
            min_support: 3,
        }
    }
}

/// All `(m, c)` in bounds making `(v − p·m − c)/2` integral with
/// `|·| <= 3p` at every prime, with the resulting halves.
fn linear_candidates(
    values: &[(u64, i64)],
    bounds: &CalibrationBounds,
    negate: bool,
) -> Vec<((i64, i64), Vec<i64>)> {
    let mut out = Vec::new();
    for m in -bounds.r_max..=bounds.r_max {
        'c: for c in -bounds.c_max..=bounds.c_max {
            let mut halves = Vec::with_capacity(values.len());
            for &(p, v) in values {
                let pi = p as i64;
                let Some(h) = half(v - pi * m - c) else {
                    continue 'c;
                };
                let h = if negate { -h } else { h };
                if h.abs() > 3 * pi {
                    continue 'c;
                }
                halves.push(h);
            }
            out.push(((m, c), halves));
        }
    }
    out
}

/// Every constant tuple consistent with all records of one class.
pub fn calibrate_class(
    records: &[&CountRecord],
    contexts: &[PrimeContext],
    bounds: &CalibrationBounds,
) -> Vec<Constants> {
    let s1: Vec<(u64, i64)> = records
        .iter()
        .zip(contexts)
        .map(|(r, c)| (r.p, c.s1_corrected(r.s1)))
        .collect();
    let sphi: Vec<(u64, i64)> = records.iter().map(|r| (r.p, r.sphi)).collect();
    let re_cands = linear_candidates(&s1, bounds, false);
    let im_cands = linear_candidates(&sphi, bounds, true);
    let mut out = Vec::new();
    for ((m1, c1), res) in &re_cands {
        for ((mphi, cphi), ims) in &im_cands {
            let mut residuals = Vec::with_capacity(records.len());
            let mut ok = true;
            for (i, (r, ctx)) in records.iter().zip(contexts).enumerate() {
                let alpha = GaussianInt::new(res[i], ims[i]);
                if !weil_bound_check(&alpha, r.p)
                    || !purity_check(&ctx.twisted(alpha), r.p, PURITY_TOL)
                {
                    ok = false;
                    break;
                }
                let s2 = r.s2.expect("calibration records carry S2");
                residuals.push((r.p as i64, ctx.s2_corrected(s2) - ctx.frob2_trace(&alpha)));
            }
            if !ok {
                continue;
            }
            for m2 in -bounds.r_max..=bounds.r_max {
                let (p0, t0) = residuals[0];
                let c2 = t0 - p0 * p0 * m2;
                if c2.abs() <= bounds.c_max && residuals.iter().all(|&(p, t)| t == p * p * m2 + c2)
                {
                    out.push(Constants {
                        m1: *m1,
                        c1: *c1,
                        mphi: *mphi,
                        cphi: *cphi,
                        m2,
                        c2,
                    });
                }
            }
        }
    }
    out.sort();
    out
}

fn calibrate_oriented(
    params: &SurfaceParams,
    records: &[CountRecord],
    bounds: &CalibrationBounds,
    twist: &Twist,
    orientation: Orientation,
) -> Result<CorrectionLaw, CalibrationError> {
    let mut groups: BTreeMap<SymbolClass, Vec<&CountRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry(SymbolClass::of(params, r.p))
            .or_default()
            .push(r);
    }
    let mut law = CorrectionLaw {
        z: params.z(),
        classes: BTreeMap::new(),
        uncovered: BTreeMap::new(),
        orientation,
    };
    for (class, recs) in groups {
        let primes: Vec<u64> = recs.iter().map(|r| r.p).collect();
        if recs.len() < bounds.min_support {
            law.uncovered.insert(class, primes);
            continue;
        }
        let contexts = recs
            .iter()
            .map(|r| PrimeContext::new(params, r.p, twist, orientation))
            .collect::<Result<Vec<_>, _>>()?;
        let candidates = calibrate_class(&recs, &contexts, bounds);
        if candidates.is_empty() {
            return Err(CalibrationError::NoConsistentLaw { class, primes });
        }
        law.classes.insert(
            class,
            ClassLaw {
                candidates,
                support: primes,
            },
        );
    }
    Ok(law)
}

/// Learns the correction law from verified records carrying `S2`.
///
/// The orientation is fixed so that `Im α >= 0` at the smallest calibration
/// prime where the primary candidate has `Im α ≠ 0`.
pub fn calibrate_law(
    records: &[CountRecord],
    bounds: &CalibrationBounds,
    twist: &Twist,
) -> Result<CorrectionLaw, CalibrationError> {
    let first = records.first().ok_or(CalibrationError::Empty)?;
    if let Some(r) = records
        .iter()
        .find(|r| r.s2.is_none() || !r.oracle_verified)
    {
        return Err(CalibrationError::UnusableRecord(r.p));
    }
    let params = SurfaceParams::new(first.z).map_err(ExtractionError::from)?;
    let mut sorted: Vec<CountRecord> = records.to_vec();
    sorted.sort_by_key(|r| r.p);

    let mut law = calibrate_oriented(&params, &sorted, bounds, twist, Orientation::Raw)?;
    let first_im = sorted.iter().find_map(|r| {
        let cand = resolve_trace(r, &law, twist).ok()?;
        (cand.alpha.im != 0).then_some(cand.alpha.im)
    });
    if matches!(first_im, Some(im) if im < 0) {
        law = calibrate_oriented(&params, &sorted, bounds, twist, Orientation::Conjugate)?;
    }
    if law.is_ambiguous() {
        let classes = law
            .classes
            .iter()
            .filter(|(_, c)| c.candidates.len() > 1)
            .map(|(k, _)| *k)
            .collect();
        return Err(CalibrationError::Ambiguous {
            law: Box::new(law),
            classes,
        });
    }
    Ok(law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::primes_up_to;
    use crate::counting::{char_sum_s1, char_sum_s2, is_good_prime, twisted_sum_sphi_fast};
    use crate::verification::purity_exact;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(re: i64, im: i64) -> GaussianInt {
        GaussianInt::new(re, im)
    }

    #[test]
    fn newton_examples() {
        assert_eq!(newton_frob2(&g(1, 2), 5), g(-13, 24));
        assert_eq!(newton_frob2(&g(0, 0), 7), g(0, 0));
        assert_eq!(newton_frob2(&g(21, 0), 7), g(147, 0));
        assert_eq!(newton_frob3(&g(0, 0), 5), g(375, 0));
        assert_eq!(newton_frob3(&g(15, 0), 5), g(375, 0));
        let a = g(4, -9);
        assert_eq!(newton_frob3(&a.conj(), 11), newton_frob3(&a, 11).conj());
    }

    #[test]
    fn euler_factor_examples() {
        let e = euler_factor(&g(0, 0), 5);
        assert_eq!(e.coeffs, [g(1, 0), g(0, 0), g(0, 0), g(-125, 0)]);
        let e = euler_factor(&g(15, 0), 5);
        assert_eq!(e.coeffs, [g(1, 0), g(-15, 0), g(75, 0), g(-125, 0)]);
        let a = g(3, -7);
        let (e, ec) = (euler_factor(&a, 13), euler_factor(&a.conj(), 13));
        for k in 0..4 {
            assert_eq!(ec.coeffs[k], e.coeffs[k].conj());
        }
    }

    #[test]
    fn twist_examples() {
        let a = g(3, 4);
        assert_eq!(apply_twist(&a, 7, &Twist::Trivial).unwrap(), a);
        let minus = Twist::Table {
            modulus: 4,
            values: [(1, g(1, 0)), (3, g(-1, 0))].into(),
        };
        assert_eq!(apply_twist(&a, 7, &minus).unwrap(), -a);
        let quartic = Twist::Table {
            modulus: 5,
            values: [(1, g(1, 0)), (2, g(0, 1)), (4, g(-1, 0)), (3, g(0, -1))].into(),
        };
        let t = apply_twist(&a, 7, &quartic).unwrap();
        assert_eq!(t, a.mul_i());
        assert_eq!(t.norm(), a.norm());
        assert!(apply_twist(&a, 5, &quartic).is_err());
    }

    #[test]
    fn twist_parsing() {
        assert_eq!(Twist::parse("trivial\n").unwrap(), Twist::Trivial);
        assert_eq!(
            Twist::parse("# comment\nquadratic -8\n").unwrap(),
            Twist::Quadratic { d: -8 }
        );
        let t = Twist::parse("modulus 5\n1 1+0i\n2 0+1i\n3 0-1i\n4 -1+0i\n").unwrap();
        assert_eq!(t.eval(13), Some(g(0, -1)));
        assert!(Twist::parse("modulus 5\n1 2+0i\n").is_err());
        assert!(Twist::parse("modulus 5\n2 0+1i\n4 1+0i\n").is_err());
        assert!(Twist::parse("").is_err());
    }

    #[test]
    fn symbol_class_round_trip() {
        let params = SurfaceParams::new(2).unwrap();
        let c = SymbolClass::of(&params, 17);
        assert_eq!(c.to_string(), "1++++");
        assert_eq!("1++++".parse::<SymbolClass>().unwrap(), c);
        assert_eq!(SymbolClass::of(&params, 3).to_string(), "3----");
        assert!("9++++".parse::<SymbolClass>().is_err());
    }

    #[test]
    fn identity_examples() {
        let rec = |s1, sphi, s2| CountRecord {
            z: 2,
            p: 7,
            s1,
            sphi,
            s2,
            oracle_verified: true,
        };
        let ctx = PrimeContext {
            p: 7,
            a_e: 0,
            eps: g(1, 0),
            orientation: Orientation::Raw,
        };
        let zero = Constants::default();
        // with a_E = 0 the boundary still contributes 2·a_E(p²) = −4p to S2
        assert!(extraction_identities(
            &rec(0, 0, Some(-28)),
            &g(0, 0),
            &zero,
            &ctx
        ));
        assert!(!extraction_identities(
            &rec(0, 0, Some(0)),
            &g(0, 0),
            &zero,
            &ctx
        ));
        assert!(extraction_identities(
            &rec(2, 0, None),
            &g(1, 0),
            &zero,
            &ctx
        ));
        assert!(!extraction_identities(
            &rec(3, 0, None),
            &g(1, 0),
            &zero,
            &ctx
        ));
    }

    /// Draws `α` with `ε·α` pure, for a plausible planted trace.
    fn pure_alpha(rng: &mut ChaCha8Rng, p: u64, eps: GaussianInt) -> GaussianInt {
        let r = 3 * p as i64;
        loop {
            let a = g(rng.gen_range(-r..=r), rng.gen_range(-r..=r));
            if purity_exact(&(eps * a), p) {
                return a;
            }
        }
    }

    fn plant(
        p: u64,
        alpha: GaussianInt,
        k: &Constants,
        ctx: &PrimeContext,
        with_s2: bool,
    ) -> CountRecord {
        assert_eq!(ctx.p, p);
        forward_counts(2, alpha, k, ctx, with_s2)
    }

    fn random_constants(rng: &mut ChaCha8Rng, b: &CalibrationBounds) -> Constants {
        let m = |rng: &mut ChaCha8Rng| rng.gen_range(-b.r_max..=b.r_max);
        let c = |rng: &mut ChaCha8Rng| rng.gen_range(-b.c_max..=b.c_max);
        Constants {
            m1: m(rng),
            c1: c(rng),
            mphi: m(rng),
            cphi: c(rng),
            m2: m(rng),
            c2: c(rng),
        }
    }

    #[test]
    fn planted_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let params = SurfaceParams::new(2).unwrap();
        let primes: Vec<u64> = primes_up_to(3000).into_iter().skip(1).collect();
        let twist = Twist::default_for(2);
        let bounds = CalibrationBounds::default();
        for _ in 0..1000 {
            let p = primes[rng.gen_range(0..primes.len())];
            let k = random_constants(&mut rng, &bounds);
            let ctx = PrimeContext::new(&params, p, &twist, Orientation::Raw).unwrap();
            let alpha = pure_alpha(&mut rng, p, ctx.eps);
            let rec = plant(p, alpha, &k, &ctx, rng.gen_bool(0.5));
            let cand = resolve_with(&rec, &[k], &ctx, SymbolClass::of(&params, p)).unwrap();
            assert_eq!(cand.alpha, alpha);
            assert_eq!(cand.a, ctx.eps * alpha);
            assert!(!cand.ambiguous);
        }
    }

    #[test]
    fn odd_residual_gives_empty_set() {
        let params = SurfaceParams::new(2).unwrap();
        let ctx = PrimeContext::new(&params, 7, &Twist::Trivial, Orientation::Raw).unwrap();
        // S1 − 2a_E − 7·m1 − c1 odd for the only admissible tuple
        let k = Constants::default();
        let rec = CountRecord {
            z: 2,
            p: 7,
            s1: 2 * ctx.a_e + 1,
            sphi: 0,
            s2: None,
            oracle_verified: false,
        };
        let err = resolve_with(&rec, &[k], &ctx, SymbolClass::of(&params, 7)).unwrap_err();
        assert_eq!(err, ExtractionError::EmptyCandidateSet { p: 7 });
    }

    fn planted_records(
        rng: &mut ChaCha8Rng,
        law: &BTreeMap<SymbolClass, Constants>,
        twist: &Twist,
        max: u64,
    ) -> Vec<CountRecord> {
        let params = SurfaceParams::new(2).unwrap();
        primes_up_to(max)
            .into_iter()
            .filter(|&p| is_good_prime(&params, p))
            .map(|p| {
                let k = law[&SymbolClass::of(&params, p)];
                let ctx = PrimeContext::new(&params, p, twist, Orientation::Raw).unwrap();
                let alpha = pure_alpha(rng, p, ctx.eps);
                plant(p, alpha, &k, &ctx, true)
            })
            .collect()
    }

    #[test]
    fn calibration_recovers_planted_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let params = SurfaceParams::new(2).unwrap();
        let bounds = CalibrationBounds::default();
        let twist = Twist::default_for(2);
        for _ in 0..5 {
            let law: BTreeMap<SymbolClass, Constants> = [3u64, 5, 7, 17]
                .iter()
                .map(|&p| {
                    (
                        SymbolClass::of(&params, p),
                        random_constants(&mut rng, &bounds),
                    )
                })
                .collect();
            let records = planted_records(&mut rng, &law, &twist, 100);
            let learned = match calibrate_law(&records, &bounds, &twist) {
                Ok(l) => l,
                Err(CalibrationError::Ambiguous { law, .. }) => *law,
                Err(e) => panic!("{e}"),
            };
            // constants live in the raw frame, so orientation does not touch them
            for (class, k) in &law {
                assert_eq!(learned.classes[class].candidates, vec![*k]);
            }
        }
    }

    #[test]
    fn tight_bounds_give_no_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = SurfaceParams::new(2).unwrap();
        let k = Constants {
            m1: 3,
            c1: 1,
            mphi: -2,
            cphi: 3,
            m2: 5,
            c2: -4,
        };
        let law: BTreeMap<SymbolClass, Constants> = [3u64, 5, 7, 17]
            .iter()
            .map(|&p| (SymbolClass::of(&params, p), k))
            .collect();
        let twist = Twist::default_for(2);
        let records = planted_records(&mut rng, &law, &twist, 100);
        let zero = CalibrationBounds {
            r_max: 0,
            c_max: 0,
            min_support: 3,
        };
        assert!(matches!(
            calibrate_law(&records, &zero, &twist),
            Err(CalibrationError::NoConsistentLaw { .. })
        ));
    }

    fn real_records(z: i64, max: u64) -> Vec<CountRecord> {
        let params = SurfaceParams::new(z).unwrap();
        primes_up_to(max)
            .into_iter()
            .filter(|&p| is_good_prime(&params, p))
            .map(|p| CountRecord {
                z,
                p,
                s1: char_sum_s1(&params, p).unwrap(),
                sphi: twisted_sum_sphi_fast(&params, p).unwrap(),
                s2: Some(char_sum_s2(&params, p, max).unwrap()),
                oracle_verified: true,
            })
            .collect()
    }

    #[test]
    fn z2_calibration_is_unique() {
        let records = real_records(2, 100);
        let twist = Twist::default_for(2);
        let law = calibrate_law(&records, &CalibrationBounds::default(), &twist).unwrap();
        assert_eq!(law.orientation, Orientation::Conjugate);
        assert!(law.uncovered.is_empty());
        assert_eq!(law.classes.len(), 4);
        let params = SurfaceParams::new(2).unwrap();
        for (class, cl) in &law.classes {
            assert!(cl.support.len() >= 3);
            let chi_z = class.chi_z as i64;
            assert_eq!(
                cl.candidates,
                vec![Constants {
                    m1: 2 * chi_z,
                    m2: 2,
                    ..Constants::default()
                }]
            );
            for &p in &cl.support {
                assert_eq!(SymbolClass::of(&params, p), *class);
            }
        }
        // every calibration record resolves uniquely and satisfies its identities
        for r in &records {
            let c = resolve_trace(r, &law, &twist).unwrap();
            assert!(!c.ambiguous);
        }
        let text = law.to_text();
        assert!(text.starts_with("law z=2 orientation=conjugate\n"));
        assert!(text.contains("3---- -2 0 0 0 2 0 "));
    }
}

//! Moment diagnostics of normalized traces against Monte Carlo references
//! for compact subgroups of `U(3)`.
#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::{Float, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::counting::parallel_map;
use crate::probes::ProbeError;
use crate::GaussianInt;

/// Fewest Monte Carlo samples accepted.
pub const MIN_SAMPLES: u64 = 10_000;
/// Samples per independent random stream.
const CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupId {
    FullUnitaryRank3,
    TorusNormalizerOrder3,
    TorusNormalizerS3,
    DiagonalTorus,
}

impl GroupId {
    pub const ALL: [GroupId; 4] = [
        GroupId::FullUnitaryRank3,
        GroupId::TorusNormalizerOrder3,
        GroupId::TorusNormalizerS3,
        GroupId::DiagonalTorus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GroupId::FullUnitaryRank3 => "full_unitary_rank3",
            GroupId::TorusNormalizerOrder3 => "torus_normalizer_order3",
            GroupId::TorusNormalizerS3 => "torus_normalizer_s3",
            GroupId::DiagonalTorus => "diagonal_torus",
        }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupId {
    type Err = ProbeError;
    fn from_str(s: &str) -> Result<Self, ProbeError> {
        GroupId::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| ProbeError::UnknownGroup(s.to_string()))
    }
}

/// `(E[t], E[|t|²], E[t²], E[|t|⁴])` of a complex sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments<F> {
    pub mean: Complex<F>,
    pub abs2: F,
    pub square: Complex<F>,
    pub abs4: F,
}

impl<F: Float> Moments<F> {
    fn as_vec(&self) -> [F; 6] {
        [
            self.mean.re,
            self.mean.im,
            self.abs2,
            self.square.re,
            self.square.im,
            self.abs4,
        ]
    }

    /// Euclidean distance between the moment vectors.
    pub fn distance(&self, other: &Self) -> F {
        self.as_vec()
            .iter()
            .zip(other.as_vec())
            .fold(F::zero(), |acc, (a, b)| acc + (*a - b).powi(2))
            .sqrt()
    }
}

/// Estimates with standard errors (the standard errors stored as a
/// `Moments` whose complex slots hold `(σ, 0)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<F> {
    pub n: u64,
    pub value: Moments<F>,
    pub stderr: Moments<F>,
}

/// Running power sums of `t`, exact to the order of accumulation.
#[derive(Clone, Copy, Debug, Default)]
struct Sums {
    n: u64,
    t: Complex<f64>,
    t_abs2: f64,
    abs2: f64,
    abs2_sq: f64,
    sq: Complex<f64>,
    sq_abs2: f64,
    abs4: f64,
    abs4_sq: f64,
}

impl Sums {
    fn push(&mut self, t: Complex<f64>) {
        let a2 = t.norm_sqr();
        let s = t * t;
        self.n += 1;
        self.t += t;
        self.t_abs2 += a2;
        self.abs2 += a2;
        self.abs2_sq += a2 * a2;
        self.sq += s;
        self.sq_abs2 += s.norm_sqr();
        self.abs4 += a2 * a2;
        self.abs4_sq += a2.powi(4);
    }

    fn merge(&mut self, o: &Sums) {
        self.n += o.n;
        self.t += o.t;
        self.t_abs2 += o.t_abs2;
        self.abs2 += o.abs2;
        self.abs2_sq += o.abs2_sq;
        self.sq += o.sq;
        self.sq_abs2 += o.sq_abs2;
        self.abs4 += o.abs4;
        self.abs4_sq += o.abs4_sq;
    }

    fn estimate<F: Float + FromPrimitive>(&self) -> Estimate<F> {
        let n = self.n as f64;
        let f = |v: f64| F::from_f64(v).unwrap();
        let se = |second: f64, mean_abs2: f64| f(((second / n - mean_abs2).max(0.0) / n).sqrt());
        let mean = self.t / n;
        let abs2 = self.abs2 / n;
        let sq = self.sq / n;
        let abs4 = self.abs4 / n;
        Estimate {
            n: self.n,
            value: Moments {
                mean: Complex::new(f(mean.re), f(mean.im)),
                abs2: f(abs2),
                square: Complex::new(f(sq.re), f(sq.im)),
                abs4: f(abs4),
            },
            stderr: Moments {
                mean: Complex::new(se(self.t_abs2, mean.norm_sqr()), F::zero()),
                abs2: se(self.abs2_sq, abs2 * abs2),
                square: Complex::new(se(self.sq_abs2, sq.norm_sqr()), F::zero()),
                abs4: se(self.abs4_sq, abs4 * abs4),
            },
        }
    }
}

fn phase<R: Rng>(rng: &mut R) -> Complex<f64> {
    Complex::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Trace of a Haar-random element of `U(3)`: Gram–Schmidt on a complex
/// Gaussian matrix (the resulting `R` has positive diagonal).
fn unitary_trace<R: Rng>(rng: &mut R) -> Complex<f64> {
    let mut cols = [[Complex::new(0.0, 0.0); 3]; 3];
    for col in cols.iter_mut() {
        for x in col.iter_mut() {
            *x = Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    for j in 0..3 {
        for k in 0..j {
            let proj: Complex<f64> = (0..3).map(|r| cols[k][r].conj() * cols[j][r]).sum();
            for r in 0..3 {
                let v = cols[k][r] * proj;
                cols[j][r] -= v;
            }
        }
        let norm = (0..3).map(|r| cols[j][r].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..3 {
            cols[j][r] /= norm;
        }
    }
    cols[0][0] + cols[1][1] + cols[2][2]
}

/// One draw of the trace for the group; components weighted uniformly.
fn sample_trace<R: Rng>(group: GroupId, rng: &mut R) -> Complex<f64> {
    match group {
        GroupId::FullUnitaryRank3 => unitary_trace(rng),
        GroupId::DiagonalTorus => phase(rng) + phase(rng) + phase(rng),
        GroupId::TorusNormalizerOrder3 => {
            let d = [phase(rng), phase(rng), phase(rng)];
            // D·P^k has zero trace unless k = 0
            match rng.gen_range(0..3) {
                0 => d[0] + d[1] + d[2],
                _ => Complex::new(0.0, 0.0),
            }
        }
        GroupId::TorusNormalizerS3 => {
            let d = [phase(rng), phase(rng), phase(rng)];
            // trace of D·σ sums the phases at the fixed points of σ
            match rng.gen_range(0..6) {
                0 => d[0] + d[1] + d[2],
                1 => d[0],
                2 => d[1],
                3 => d[2],
                _ => Complex::new(0.0, 0.0),
            }
        }
    }
}

/// Monte Carlo reference moments of the trace. Stream `k` of the ChaCha
/// generator seeded with `seed` draws samples `k·4096 ..`, so the result does
/// not depend on `workers`.
pub fn haar_reference_moments<F: Float + FromPrimitive>(
    group: GroupId,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<Estimate<F>, ProbeError> {
    if samples < MIN_SAMPLES {
        return Err(ProbeError::TooFewSamples {
            min: MIN_SAMPLES,
            got: samples,
        });
    }
    let chunks: Vec<u64> = (0..samples.div_ceil(CHUNK)).collect();
    let partial = parallel_map(&chunks, workers, |&c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c);
        let count = CHUNK.min(samples - c * CHUNK);
        let mut s = Sums::default();
        for _ in 0..count {
            s.push(sample_trace(group, &mut rng));
        }
        s
    });
    let mut total = Sums::default();
    for s in &partial {
        total.merge(s);
    }
    Ok(total.estimate())
}

/// Reference moments for one group, keyed by sample count and seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reference {
    pub group: GroupId,
    pub samples: u64,
    pub seed: u64,
    pub estimate: Estimate<f64>,
}

/// Plain-text cache of references, one line per `(group, samples, seed)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReferenceCache {
    entries: BTreeMap<(GroupId, u64, u64), Estimate<f64>>,
}

impl ReferenceCache {
    pub fn load(path: &Path) -> io::Result<Self> {
        let mut cache = ReferenceCache::default();
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(e),
        };
        let bad = |line: usize| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("reference cache line {line}"),
            )
        };
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 14 {
                return Err(bad(i + 1));
            }
            let group: GroupId = f[0].parse().map_err(|_| bad(i + 1))?;
            let ints: Vec<u64> = f[1..4]
                .iter()
                .map(|x| x.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(i + 1))?;
            let v: Vec<f64> = f[4..]
                .iter()
                .map(|x| x.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(i + 1))?;
            let m = |o: usize| Moments {
                mean: Complex::new(v[o], v[o + 1]),
                abs2: v[o + 2],
                square: Complex::new(v[o + 3], v[o + 4]),
                abs4: v[o + 5],
            };
            let stderr = Moments {
                mean: Complex::new(v[6], 0.0),
                abs2: v[7],
                square: Complex::new(v[8], 0.0),
                abs4: v[9],
            };
            cache.entries.insert(
                (group, ints[0], ints[1]),
                Estimate {
                    n: ints[2],
                    value: m(0),
                    stderr,
                },
            );
        }
        Ok(cache)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(
            "# group samples seed n mean_re mean_im abs2 sq_re sq_im abs4 se_mean se_abs2 se_sq se_abs4\n",
        );
        for ((g, samples, seed), e) in &self.entries {
            let (v, s) = (&e.value, &e.stderr);
            out.push_str(&format!(
                "{g} {samples} {seed} {} {} {} {} {} {} {} {} {} {} {}\n",
                e.n,
                v.mean.re,
                v.mean.im,
                v.abs2,
                v.square.re,
                v.square.im,
                v.abs4,
                s.mean.re,
                s.abs2,
                s.square.re,
                s.abs4
            ));
        }
        out
    }

    pub fn store(&self, path: &Path) -> io::Result<()> {
        crate::pipeline::write_atomic(path, self.to_text().as_bytes())
    }

    /// Cached entry or a fresh Monte Carlo run.
    pub fn get_or_compute(
        &mut self,
        group: GroupId,
        samples: u64,
        seed: u64,
        workers: usize,
    ) -> Result<Reference, ProbeError> {
        let key = (group, samples, seed);
        let estimate = match self.entries.get(&key) {
            Some(e) => *e,
            None => {
                let e = haar_reference_moments(group, samples, seed, workers)?;
                self.entries.insert(key, e);
                e
            }
        };
        Ok(Reference {
            group,
            samples,
            seed,
            estimate,
        })
    }
}

/// Empirical moments of `a_p / p` and the reference groups ranked by
/// distance.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub empirical: Estimate<f64>,
    pub ranking: Vec<(GroupId, f64)>,
}

pub fn moment_diagnostics(
    traces: &[(u64, GaussianInt)],
    references: &[Reference],
) -> Result<MomentReport, ProbeError> {
    if traces.is_empty() {
        return Err(ProbeError::EmptyInput);
    }
    let mut s = Sums::default();
    for &(p, a) in traces {
        let t = a.to_complex::<f64>() / p as f64;
        if a.widen().norm() > 9 * (p as i128).pow(2) {
            return Err(ProbeError::WeilViolation(p));
        }
        s.push(t);
    }
    let empirical = s.estimate::<f64>();
    let mut ranking: Vec<(GroupId, f64)> = references
        .iter()
        .map(|r| (r.group, empirical.value.distance(&r.estimate.value)))
        .collect();
    ranking.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(MomentReport { empirical, ranking })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sequence() {
        let t: Vec<(u64, GaussianInt)> = [5u64, 7, 11]
            .iter()
            .map(|&p| (p, GaussianInt::from_int(3 * p as i64)))
            .collect();
        let r = moment_diagnostics(&t, &[]).unwrap();
        assert!((r.empirical.value.mean.re - 3.0).abs() < 1e-12);
        assert!((r.empirical.value.abs2 - 9.0).abs() < 1e-12);
        assert!(r.empirical.stderr.abs2.abs() < 1e-12);
        assert_eq!(moment_diagnostics(&[], &[]), Err(ProbeError::EmptyInput));
        assert_eq!(
            moment_diagnostics(&[(5, GaussianInt::new(16, 0))], &[]),
            Err(ProbeError::WeilViolation(5))
        );
    }

    #[test]
    fn group_names_round_trip() {
        for g in GroupId::ALL {
            assert_eq!(g.name().parse::<GroupId>().unwrap(), g);
        }
        assert!("sl2".parse::<GroupId>().is_err());
        assert!(haar_reference_moments::<f64>(GroupId::DiagonalTorus, 100, 1, 1).is_err());
    }

    #[test]
    fn small_references_have_expected_means() {
        for g in GroupId::ALL {
            let e = haar_reference_moments::<f64>(g, 40_000, 7, 1).unwrap();
            assert!(
                e.value.mean.norm() < 4.0 * e.stderr.mean.re.max(1e-3),
                "{g}"
            );
        }
        // E|Tr|² is 1 on U(3) and 3 on the torus
        let u = haar_reference_moments::<f64>(GroupId::FullUnitaryRank3, 40_000, 7, 1).unwrap();
        assert!((u.value.abs2 - 1.0).abs() < 4.0 * u.stderr.abs2);
        let t = haar_reference_moments::<f64>(GroupId::DiagonalTorus, 40_000, 7, 1).unwrap();
        assert!((t.value.abs2 - 3.0).abs() < 4.0 * t.stderr.abs2);
    }

    #[test]
    fn worker_count_does_not_change_estimates() {
        let a = haar_reference_moments::<f64>(GroupId::TorusNormalizerS3, 20_000, 3, 1).unwrap();
        let b = haar_reference_moments::<f64>(GroupId::TorusNormalizerS3, 20_000, 3, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("refs.txt");
        let mut cache = ReferenceCache::default();
        let r = cache
            .get_or_compute(GroupId::DiagonalTorus, 10_000, 5, 1)
            .unwrap();
        cache.store(&path).unwrap();
        let mut loaded = ReferenceCache::load(&path).unwrap();
        assert_eq!(loaded, cache);
        assert_eq!(
            loaded
                .get_or_compute(GroupId::DiagonalTorus, 10_000, 5, 1)
                .unwrap(),
            r
        );
    }
}

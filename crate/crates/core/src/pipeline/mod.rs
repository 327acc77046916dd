//! Staged, resumable runs over a persistent trace table.
//!
//! Every stage writes its products with temp-file-and-rename and then a
//! completion marker holding the configuration fingerprint. A completed stage
//! is never recomputed; a marker for a different configuration is an error.

pub mod config;
pub mod report;
pub mod table;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use num_complex::Complex;
use thiserror::Error;

use crate::arith::{prime_factors, primes_up_to};
use crate::counting::{count_records, is_good_prime, CountError, CountOptions, SurfaceParams};
use crate::extraction::{
    calibrate_law, resolve_trace, CalibrationError, ExtractionError, SymbolClass, TraceCandidate,
    Twist,
};
use crate::gaussian::{split_prime, QiPlace};
use crate::lfunction::{convergence_csv, convergence_report, ConvergenceRow, LError, LSeries};
use crate::moments::{moment_diagnostics, GroupId, MomentReport, Reference, ReferenceCache};
use crate::probes::{
    character_piece_hypotheses, dihedral_probe, DihedralReport, DihedralThresholds, ProbeError,
};
use crate::verification::{
    disc_census, ordinarity_census, purity_check, purity_exact, residual_census, weil_bound_check,
    CensusReport, VerificationError, PURITY_TOL,
};
use crate::GaussianInt;

pub use config::{ConfigError, RunConfig};
pub use table::{SplitKind, TableError, TraceRow, TraceTable, HEADER, SCHEMA_VERSION};

/// Primes counted between two table writes.
const BATCH: usize = 32;
/// Monte Carlo samples per reference group.
pub const MOMENT_SAMPLES: u64 = 100_000;
/// Largest `|d|` tried by the dihedral probe.
pub const DISC_BOUND: i64 = 100;
/// Radius of the disc census `a_p ∈ p·C_r`.
pub const DISC_RADIUS: i64 = 3;
/// Real point of the L-series convergence table.
pub const L_POINT: f64 = 3.0;
const L_GRID: [u64; 10] = [25, 50, 100, 200, 500, 1000, 2000, 5000, 10_000, 20_000];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Count,
    Extract,
    Verify,
    Census,
    Probe,
    LFunction,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Count,
        Stage::Extract,
        Stage::Verify,
        Stage::Census,
        Stage::Probe,
        Stage::LFunction,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Count => "count",
            Stage::Extract => "extract",
            Stage::Verify => "verify",
            Stage::Census => "census",
            Stage::Probe => "probe",
            Stage::LFunction => "lfunction",
            Stage::Report => "report",
        }
    }

    fn prerequisite(self) -> Option<Stage> {
        match self {
            Stage::Count => None,
            Stage::Extract => Some(Stage::Count),
            _ => Some(Stage::Extract),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: TableError },
    #[error("stage `{needed}` has not been run; `{stage}` needs it")]
    MissingStage {
        stage: &'static str,
        needed: &'static str,
    },
    #[error("{0} holds results for a different configuration")]
    ConfigMismatch(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Count(#[from] CountError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Verification(#[from] VerificationError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    LFunction(#[from] LError),
    #[error("{0} candidate traces fail the Weil bound or purity (see verify.csv)")]
    CandidateCheck(usize),
}

impl PipelineError {
    /// 2 usage, 3 data, 4 version, 5 computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Table {
                source: TableError::Version { .. },
                ..
            } => 4,
            PipelineError::Table { .. }
            | PipelineError::MissingStage { .. }
            | PipelineError::ConfigMismatch(_)
            | PipelineError::Io { .. } => 3,
            _ => 5,
        }
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    AlreadyDone,
}

/// Per-stage file names inside the output directory.
pub mod files {
    pub const TABLE: &str = "trace_table.csv";
    pub const LAW: &str = "law.txt";
    pub const VERIFY: &str = "verify.csv";
    pub const CENSUS: &str = "census.csv";
    pub const PROBE: &str = "probe.csv";
    pub const MOMENTS: &str = "moments.csv";
    pub const MOMENT_REFS: &str = "moment_refs.txt";
    pub const LFUNCTION: &str = "lfunction.csv";
    pub const REPORT_DIR: &str = "report";
    pub const STAGES_DIR: &str = ".stages";
}

pub struct Pipeline {
    cfg: RunConfig,
    params: SurfaceParams,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let params = SurfaceParams::new(cfg.z)?;
        Ok(Pipeline { cfg, params })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn marker(&self, stage: Stage, suffix: &str) -> PathBuf {
        self.cfg
            .out
            .join(files::STAGES_DIR)
            .join(format!("{}.{suffix}", stage.name()))
    }

    fn read_text(&self, path: &Path) -> Result<String, PipelineError> {
        fs::read_to_string(path).map_err(io_err(path))
    }

    fn write(&self, path: &Path, text: &str) -> Result<(), PipelineError> {
        write_atomic(path, text.as_bytes()).map_err(io_err(path))
    }

    /// Marker present with matching fingerprint.
    pub fn is_done(&self, stage: Stage) -> Result<bool, PipelineError> {
        let path = self.marker(stage, "done");
        match fs::read_to_string(&path) {
            Ok(text) if text == self.cfg.fingerprint() => Ok(true),
            Ok(_) => Err(PipelineError::ConfigMismatch(self.cfg.out.clone())),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    fn mark_done(&self, stage: Stage) -> Result<(), PipelineError> {
        self.write(&self.marker(stage, "done"), &self.cfg.fingerprint())
    }

    fn require(&self, stage: Stage) -> Result<(), PipelineError> {
        let mut need = stage.prerequisite();
        while let Some(n) = need {
            if !self.is_done(n)? {
                return Err(PipelineError::MissingStage {
                    stage: stage.name(),
                    needed: n.name(),
                });
            }
            need = n.prerequisite();
        }
        Ok(())
    }

    /// Runs one stage unless its marker is present. `report` also runs every
    /// stage it depends on.
    pub fn run(&self, stage: Stage) -> Result<Outcome, PipelineError> {
        if self.is_done(stage)? {
            return Ok(Outcome::AlreadyDone);
        }
        if stage == Stage::Report {
            for s in &Stage::ALL[..6] {
                self.run(*s)?;
            }
        } else {
            self.require(stage)?;
        }
        match stage {
            Stage::Count => self.count()?,
            Stage::Extract => self.extract()?,
            Stage::Verify => self.verify()?,
            Stage::Census => {
                let text = census_csv(&self.census_reports()?);
                self.write(&self.path(files::CENSUS), &text)?;
            }
            Stage::Probe => self.probe()?,
            Stage::LFunction => {
                let text = convergence_csv(&self.convergence()?);
                self.write(&self.path(files::LFUNCTION), &text)?;
            }
            Stage::Report => report::write_bundle(self)?,
        }
        self.mark_done(stage)?;
        Ok(Outcome::Completed)
    }

    pub fn load_table(&self) -> Result<TraceTable, PipelineError> {
        let path = self.path(files::TABLE);
        let text = self.read_text(&path)?;
        TraceTable::from_csv(&text).map_err(|source| PipelineError::Table { path, source })
    }

    fn store_table(&self, table: &TraceTable) -> Result<(), PipelineError> {
        self.write(&self.path(files::TABLE), &table.to_csv())
    }

    pub fn good_primes(&self) -> Vec<u64> {
        primes_up_to(self.cfg.pmax)
            .into_iter()
            .filter(|&p| is_good_prime(&self.params, p))
            .collect()
    }

    fn count(&self) -> Result<(), PipelineError> {
        let partial = self.marker(Stage::Count, "partial");
        let fp = self.cfg.fingerprint();
        let mut rows = match fs::read_to_string(&partial) {
            Ok(text) if text == fp => match self.load_table() {
                Ok(t) => t.rows().to_vec(),
                Err(PipelineError::Io { .. }) => Vec::new(),
                Err(e) => return Err(e),
            },
            Ok(_) => return Err(PipelineError::ConfigMismatch(self.cfg.out.clone())),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                self.write(&partial, &fp)?;
                Vec::new()
            }
            Err(e) => return Err(io_err(&partial)(e)),
        };
        let have: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.record.p).collect();
        let pending: Vec<u64> = self
            .good_primes()
            .into_iter()
            .filter(|p| !have.contains(p))
            .collect();
        let opts = CountOptions {
            p2max: self.cfg.p2max,
            verify: true,
        };
        let table = TraceTable::new(rows.clone()).map_err(|source| PipelineError::Table {
            path: self.path(files::TABLE),
            source,
        })?;
        self.store_table(&table)?;
        for batch in pending.chunks(BATCH) {
            for rec in count_records(&self.params, batch, opts, self.cfg.workers) {
                rows.push(TraceRow {
                    record: rec?,
                    cands: Vec::new(),
                });
            }
            let table = TraceTable::new(rows.clone()).expect("fresh primes are distinct");
            self.store_table(&table)?;
        }
        fs::remove_file(&partial).map_err(io_err(&partial))?;
        Ok(())
    }

    fn extract(&self) -> Result<(), PipelineError> {
        let mut table = self.load_table()?;
        let twist = self.cfg.twist();
        let calibration: Vec<_> = table
            .rows()
            .iter()
            .filter(|r| r.record.s2.is_some() && r.record.oracle_verified)
            .map(|r| r.record.clone())
            .collect();
        let law = calibrate_law(&calibration, &self.cfg.bounds(), &twist)?;
        for row in table.rows_mut() {
            row.cands = match resolve_trace(&row.record, &law, &twist) {
                Ok(c) => c.all(),
                Err(
                    ExtractionError::EmptyCandidateSet { .. }
                    | ExtractionError::UncoveredClass { .. }
                    | ExtractionError::TwistUndefined(_),
                ) => Vec::new(),
                Err(e) => return Err(e.into()),
            };
        }
        self.write(&self.path(files::LAW), &law.to_text())?;
        self.store_table(&table)
    }

    /// Resolved rows as candidates, ambiguous ones included.
    pub fn candidates(&self) -> Result<Vec<TraceCandidate>, PipelineError> {
        Ok(table_candidates(
            &self.load_table()?,
            &self.params,
            &self.cfg.twist(),
        ))
    }

    fn verify(&self) -> Result<(), PipelineError> {
        let (text, failures) = verify_csv(&self.candidates()?);
        self.write(&self.path(files::VERIFY), &text)?;
        if failures > 0 {
            return Err(PipelineError::CandidateCheck(failures));
        }
        Ok(())
    }

    pub fn census_reports(&self) -> Result<Vec<CensusReport>, PipelineError> {
        let cands = self.candidates()?;
        let mut out = vec![
            disc_census(&cands, DISC_RADIUS)?,
            ordinarity_census(&cands)?,
        ];
        for place in census_places() {
            out.push(residual_census(&cands, &place)?);
        }
        Ok(out)
    }

    /// Unambiguous traces keyed by `p`.
    pub fn unambiguous(&self) -> Result<BTreeMap<u64, GaussianInt>, PipelineError> {
        Ok(self
            .candidates()?
            .into_iter()
            .filter(|c| !c.ambiguous)
            .map(|c| (c.p, c.a))
            .collect())
    }

    /// Modulus for the probe: product of the primes where the cover has
    /// bad reduction.
    pub fn ramified_modulus(&self) -> u128 {
        prime_factors(self.params.bad_divisor().unsigned_abs())
            .iter()
            .product()
    }

    pub fn dihedral(&self) -> Result<Vec<(String, DihedralReport)>, PipelineError> {
        let traces = self.unambiguous()?;
        let n = self.ramified_modulus();
        // conductors of characters unramified outside N divide 16·(odd part of N)
        let odd: u128 = n >> n.trailing_zeros();
        let char_modulus =
            u64::try_from(16 * odd).map_err(|_| ProbeError::FactorTooLarge(u64::MAX))?;
        let mut out = Vec::new();
        for h in character_piece_hypotheses(char_modulus, 4)? {
            let b: BTreeMap<u64, GaussianInt> =
                traces.iter().map(|(&p, a)| (p, h.residual(a, p))).collect();
            out.push((
                h.label(),
                dihedral_probe(&b, n, DISC_BOUND, &DihedralThresholds::default())?,
            ));
        }
        Ok(out)
    }

    pub fn moment_references(&self) -> Result<Vec<Reference>, PipelineError> {
        let path = self.path(files::MOMENT_REFS);
        let mut cache = ReferenceCache::load(&path).map_err(io_err(&path))?;
        let refs = GroupId::ALL
            .iter()
            .map(|&g| cache.get_or_compute(g, MOMENT_SAMPLES, self.cfg.seed, self.cfg.workers))
            .collect::<Result<Vec<_>, _>>()?;
        cache.store(&path).map_err(io_err(&path))?;
        Ok(refs)
    }

    pub fn moments(&self) -> Result<(MomentReport, Vec<Reference>), PipelineError> {
        let traces: Vec<(u64, GaussianInt)> = self.unambiguous()?.into_iter().collect();
        let refs = self.moment_references()?;
        Ok((moment_diagnostics(&traces, &refs)?, refs))
    }

    fn probe(&self) -> Result<(), PipelineError> {
        let text = probe_csv(&self.dihedral()?);
        self.write(&self.path(files::PROBE), &text)?;
        let (report, refs) = self.moments()?;
        self.write(&self.path(files::MOMENTS), &moments_csv(&report, &refs))
    }

    /// Unambiguous traces at good primes, everything else omitted.
    pub fn l_series(&self) -> Result<LSeries, PipelineError> {
        let traces = self.unambiguous()?;
        let omitted: Vec<u64> = primes_up_to(self.cfg.pmax)
            .into_iter()
            .filter(|p| !traces.contains_key(p))
            .collect();
        Ok(LSeries::from_traces(traces, omitted)?)
    }

    pub fn convergence(&self) -> Result<Vec<ConvergenceRow<f64>>, PipelineError> {
        let mut grid: Vec<u64> = L_GRID
            .iter()
            .copied()
            .filter(|&g| g < self.cfg.pmax)
            .collect();
        grid.push(self.cfg.pmax);
        Ok(convergence_report(
            &self.l_series()?,
            Complex::new(L_POINT, 0.0),
            &grid,
        )?)
    }
}

/// Places `11`, `3+2i` and `4+i` used by the residual censuses.
pub fn census_places() -> Vec<QiPlace> {
    vec![split_prime(11), split_prime(13), split_prime(17)]
}

pub fn table_candidates(
    table: &TraceTable,
    params: &SurfaceParams,
    twist: &Twist,
) -> Vec<TraceCandidate> {
    table
        .rows()
        .iter()
        .filter(|r| !r.cands.is_empty())
        .map(|r| {
            let p = r.record.p;
            let a = r.cands[0];
            let eps = twist.eval(p).unwrap_or(GaussianInt::one());
            TraceCandidate {
                p,
                alpha: a * eps.conj(),
                a,
                law_class: SymbolClass::of(params, p),
                ambiguous: r.cands.len() > 1,
                siblings: r.cands[1..].to_vec(),
            }
        })
        .collect()
}

/// One line per candidate value; returns the text and the failure count.
pub fn verify_csv(cands: &[TraceCandidate]) -> (String, usize) {
    let mut out = String::from("p,candidate,weil,purity_numeric,purity_exact\n");
    let mut failures = 0;
    for c in cands {
        for a in c.all() {
            let checks = [
                weil_bound_check(&a, c.p),
                purity_check::<f64>(&a, c.p, PURITY_TOL),
                purity_exact(&a, c.p),
            ];
            if checks.contains(&false) {
                failures += 1;
            }
            let [w, n, e] = checks.map(u8::from);
            out.push_str(&format!("{},{a},{w},{n},{e}\n", c.p));
        }
    }
    (out, failures)
}

pub const CENSUS_HEADER: &str = "range,predicate,category,semantics,numerator,denominator";

pub fn census_csv(reports: &[CensusReport]) -> String {
    let mut out = String::from(CENSUS_HEADER);
    out.push('\n');
    for r in reports {
        for line in r.to_csv_rows() {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

pub fn probe_csv(reports: &[(String, DihedralReport)]) -> String {
    let mut out = String::from("hypothesis,d,inert,vanishing,verdict\n");
    for (h, rep) in reports {
        for row in &rep.rows {
            out.push_str(&format!(
                "{h},{},{},{},{}\n",
                row.d,
                row.inert,
                row.vanishing,
                row.verdict.label()
            ));
        }
    }
    out
}

pub fn moments_csv(report: &MomentReport, refs: &[Reference]) -> String {
    let mut out = String::from(
        "source,n,mean_re,mean_im,abs2,sq_re,sq_im,abs4,se_mean,se_abs2,se_sq,se_abs4,distance\n",
    );
    let mut line = |name: &str, e: &crate::moments::Estimate<f64>, dist: Option<f64>| {
        let (v, s) = (&e.value, &e.stderr);
        out.push_str(&format!(
            "{name},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
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
            s.abs4,
            dist.map(|d| format!("{d:.6}")).unwrap_or_default()
        ));
    };
    line("empirical", &report.empirical, None);
    for (g, d) in &report.ranking {
        if let Some(r) = refs.iter().find(|r| r.group == *g) {
            line(g.name(), &r.estimate, Some(*d));
        }
    }
    out
}

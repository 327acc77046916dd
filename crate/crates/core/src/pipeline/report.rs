//! The report bundle: stage outputs, histograms and a plain-text summary.

use std::fmt::Write as _;
use std::fs;

use super::{files, Pipeline, PipelineError};
use crate::probes::DihedralVerdict;

/// Placed at the top of the summary.
pub const WEIGHT_NOTE: &str = "\
Normalization: the roots of Q_p are taken to have absolute value p, so
a_p/p lies in the closed disc of radius 3 and the Euler product converges
for Re(s) > 2. Calling the system pure of weight 1 corresponds to a
different normalization (|root| = p^(w/2) would give weight 2); the
absolute-value statement is the one used throughout.";

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for v in values {
            if !(lo..=hi).contains(&v) {
                continue;
            }
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { lo, hi, counts }
    }

    fn edge(&self, k: usize) -> f64 {
        self.lo + (self.hi - self.lo) * k as f64 / self.counts.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{:.6},{:.6},{c}", self.edge(k), self.edge(k + 1));
        }
        out
    }

    /// Bar chart as a standalone SVG document.
    pub fn to_svg(&self, title: &str) -> String {
        let (w, h, margin) = (640.0, 260.0, 30.0);
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let bar = (w - 2.0 * margin) / self.counts.len() as f64;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <text x=\"{margin}\" y=\"18\" font-family=\"monospace\" font-size=\"12\">{title}</text>\n"
        );
        for (k, &c) in self.counts.iter().enumerate() {
            let bh = (h - 2.0 * margin) * c as f64 / max;
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#4a6fa5\"/>",
                margin + bar * k as f64,
                h - margin - bh,
                (bar - 1.0).max(0.5),
                bh
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{margin}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\">{:.3}</text>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">{:.3}</text>\n</svg>",
            h - 10.0,
            self.lo,
            w - margin,
            h - 10.0,
            self.hi
        );
        out
    }
}

pub fn summary(pl: &Pipeline) -> Result<String, PipelineError> {
    let cfg = pl.config();
    let table = pl.load_table()?;
    let cands = pl.candidates()?;
    let mut s = String::from("trace-engine report\n\n");
    s.push_str(WEIGHT_NOTE);
    s.push_str("\n\n[config]\n");
    s.push_str(&cfg.fingerprint());

    let rows = table.rows();
    let with_s2 = rows.iter().filter(|r| r.record.s2.is_some()).count();
    let verified = rows.iter().filter(|r| r.record.oracle_verified).count();
    let _ = write!(
        s,
        "\n[counts]\ngood primes: {}\nwith S2: {with_s2}\noracle verified: {verified}\n",
        rows.len()
    );

    s.push_str("\n[law]\n");
    s.push_str(
        &fs::read_to_string(pl.path(files::LAW)).map_err(|source| PipelineError::Io {
            path: pl.path(files::LAW),
            source,
        })?,
    );

    let ambiguous = cands.iter().filter(|c| c.ambiguous).count() as u64;
    let resolved = cands.len() as u64;
    let _ = write!(
        s,
        "\n[extraction]\nresolved: {resolved}\nambiguous: {ambiguous}\nunresolved: {}\nambiguity rate: {ambiguous}/{resolved}\n",
        rows.len() as u64 - resolved,
    );

    s.push_str("\n[census]\n");
    for rep in pl.census_reports()? {
        for row in &rep.rows {
            let _ = writeln!(
                s,
                "{} {}: certain {}/{n} possible {}/{n}",
                rep.predicate,
                row.label,
                row.certain,
                row.possible,
                n = rep.total
            );
        }
    }

    s.push_str("\n[probe]\n");
    let mut flagged = Vec::new();
    for (h, rep) in pl.dihedral()? {
        for row in rep
            .rows
            .iter()
            .filter(|r| r.verdict == DihedralVerdict::Flagged)
        {
            flagged.push(format!("{h} d={}", row.d));
        }
    }
    let _ = writeln!(
        s,
        "dihedral flags: {}",
        if flagged.is_empty() {
            "none".to_string()
        } else {
            flagged.join(", ")
        }
    );
    let (moments, _) = pl.moments()?;
    for (g, d) in &moments.ranking {
        let _ = writeln!(s, "moment distance {g}: {d:.6}");
    }

    s.push_str("\n[lfunction]\n");
    let series = pl.l_series()?;
    let _ = writeln!(s, "omitted primes <= pmax: {}", series.omitted().len());
    for row in pl.convergence()? {
        let _ = writeln!(
            s,
            "s={} P={} L={:.12} rel.diff={:.3e}",
            row.s.re, row.p_max, row.value.re, row.difference
        );
    }
    Ok(s)
}

/// Writes `report/` from the completed stages.
pub fn write_bundle(pl: &Pipeline) -> Result<(), PipelineError> {
    let dir = pl.path(files::REPORT_DIR);
    let put = |name: &str, text: &str| pl.write(&dir.join(name), text);
    for name in [
        files::TABLE,
        files::LAW,
        files::VERIFY,
        files::CENSUS,
        files::PROBE,
        files::MOMENTS,
        files::LFUNCTION,
    ] {
        put(name, &pl.read_text(&pl.path(name))?)?;
    }

    let traces = pl.unambiguous()?;
    let angle = Histogram::new(
        -std::f64::consts::PI,
        std::f64::consts::PI,
        24,
        traces
            .values()
            .filter(|a| !a.is_zero())
            .map(|a| (a.im as f64).atan2(a.re as f64)),
    );
    let modulus = Histogram::new(
        0.0,
        3.0,
        30,
        traces
            .iter()
            .map(|(&p, a)| (a.widen().norm() as f64).sqrt() / p as f64),
    );
    put("hist_angle.csv", &angle.to_csv())?;
    put("hist_angle.svg", &angle.to_svg("arg a_p"))?;
    put("hist_modulus.csv", &modulus.to_csv())?;
    put("hist_modulus.svg", &modulus.to_svg("|a_p| / p"))?;
    put("summary.txt", &summary(pl)?)
}

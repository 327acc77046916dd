use std::fmt::Write as _;

use thiserror::Error;

use crate::counting::CountRecord;
use crate::GaussianInt;

pub const SCHEMA_VERSION: u32 = 1;
pub const HEADER: &str = "schema_version,z,p,split,S1,Sphi,S2,has_S2,verified,cands";
const COLUMNS: [&str; 10] = [
    "schema_version",
    "z",
    "p",
    "split",
    "S1",
    "Sphi",
    "S2",
    "has_S2",
    "verified",
    "cands",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("line {line}, column {column} ({name}): {reason}")]
    Malformed {
        line: usize,
        column: usize,
        name: &'static str,
        reason: String,
    },
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("line {line}: schema version {found}, expected {SCHEMA_VERSION}")]
    Version { line: usize, found: String },
}

/// Splitting of `p` in `Z[i]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitKind {
    Split,
    Inert,
    Ramified,
}

impl SplitKind {
    pub fn of(p: u64) -> Self {
        match p % 4 {
            1 => SplitKind::Split,
            3 => SplitKind::Inert,
            _ => SplitKind::Ramified,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            SplitKind::Split => "s",
            SplitKind::Inert => "i",
            SplitKind::Ramified => "r",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub record: CountRecord,
    /// Primary candidate first; empty while unresolved.
    pub cands: Vec<GaussianInt>,
}

/// Rows sorted by `p`, one per prime, all with the same `z`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceTable {
    rows: Vec<TraceRow>,
}

impl TraceTable {
    pub fn new(mut rows: Vec<TraceRow>) -> Result<Self, TableError> {
        rows.sort_by_key(|r| r.record.p);
        for (i, w) in rows.windows(2).enumerate() {
            if w[0].record.p == w[1].record.p || w[0].record.z != w[1].record.z {
                return Err(TableError::BadRow {
                    line: i + 3,
                    reason: "duplicate prime or mixed z".into(),
                });
            }
        }
        Ok(TraceTable { rows })
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn rows_mut(&mut self) -> &mut [TraceRow] {
        &mut self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, p: u64) -> bool {
        self.rows.binary_search_by_key(&p, |r| r.record.p).is_ok()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for row in &self.rows {
            let r = &row.record;
            let cands: Vec<String> = row.cands.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(
                out,
                "{SCHEMA_VERSION},{},{},{},{},{},{},{},{},{}",
                r.z,
                r.p,
                SplitKind::of(r.p).code(),
                r.s1,
                r.sphi,
                r.s2.map(|v| v.to_string()).unwrap_or_default(),
                u8::from(r.s2.is_some()),
                u8::from(r.oracle_verified),
                cands.join(";")
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let mut lines = text.split_inclusive('\n');
        match lines.next() {
            Some(h) if h.trim_end_matches('\n') == HEADER => {}
            _ => {
                return Err(TableError::BadRow {
                    line: 1,
                    reason: format!("header must be `{HEADER}`"),
                })
            }
        }
        let mut rows = Vec::new();
        for (i, raw) in lines.enumerate() {
            let line = i + 2;
            let Some(body) = raw.strip_suffix('\n') else {
                return Err(TableError::BadRow {
                    line,
                    reason: "missing final newline".into(),
                });
            };
            rows.push(parse_row(body, line)?);
        }
        TraceTable::new(rows)
    }
}

fn parse_row(body: &str, line: usize) -> Result<TraceRow, TableError> {
    let fields: Vec<&str> = body.split(',').collect();
    if fields.len() != COLUMNS.len() {
        return Err(TableError::BadRow {
            line,
            reason: format!("expected {} fields, found {}", COLUMNS.len(), fields.len()),
        });
    }
    let err = |col: usize, reason: &str| TableError::Malformed {
        line,
        column: col + 1,
        name: COLUMNS[col],
        reason: reason.to_string(),
    };
    if fields[0] != SCHEMA_VERSION.to_string() {
        return Err(TableError::Version {
            line,
            found: fields[0].to_string(),
        });
    }
    let int = |col: usize| -> Result<i64, TableError> {
        let s = fields[col];
        let v: i64 = s.parse().map_err(|_| err(col, "not a decimal integer"))?;
        if v.to_string() != s {
            return Err(err(col, "non-canonical integer"));
        }
        Ok(v)
    };
    let flag = |col: usize| match fields[col] {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(err(col, "expected 0 or 1")),
    };
    let z = int(1)?;
    let p = int(2)?;
    if p < 2 {
        return Err(err(2, "not a prime"));
    }
    let p = p as u64;
    if fields[3] != SplitKind::of(p).code() {
        return Err(err(3, "split kind does not match p"));
    }
    let s1 = int(4)?;
    let sphi = int(5)?;
    let has_s2 = flag(7)?;
    let s2 = match (has_s2, fields[6]) {
        (false, "") => None,
        (true, s) if !s.is_empty() => Some(int(6)?),
        _ => return Err(err(6, "inconsistent with has_S2")),
    };
    let oracle_verified = flag(8)?;
    let mut cands = Vec::new();
    if !fields[9].is_empty() {
        for tok in fields[9].split(';') {
            let g: GaussianInt = tok
                .parse()
                .map_err(|_| err(9, &format!("bad Gaussian integer `{tok}`")))?;
            if g.to_string() != tok {
                return Err(err(9, &format!("non-canonical Gaussian integer `{tok}`")));
            }
            cands.push(g);
        }
    }
    Ok(TraceRow {
        record: CountRecord {
            z,
            p,
            s1,
            sphi,
            s2,
            oracle_verified,
        },
        cands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TraceTable {
        TraceTable::new(vec![
            TraceRow {
                record: CountRecord {
                    z: 2,
                    p: 3,
                    s1: -4,
                    sphi: 2,
                    s2: Some(-20),
                    oracle_verified: true,
                },
                cands: vec![GaussianInt::new(3, -2), GaussianInt::new(-1, 0)],
            },
            TraceRow {
                record: CountRecord {
                    z: 2,
                    p: 5,
                    s1: 6,
                    sphi: 0,
                    s2: None,
                    oracle_verified: false,
                },
                cands: vec![],
            },
        ])
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let t = sample();
        let csv = t.to_csv();
        assert_eq!(csv.lines().nth(1), Some("1,2,3,i,-4,2,-20,1,1,3-2i;-1+0i"));
        assert_eq!(csv.lines().nth(2), Some("1,2,5,s,6,0,,0,0,"));
        assert_eq!(TraceTable::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn errors_carry_positions() {
        let csv = sample().to_csv().replace("3-2i", "3--2i");
        match TraceTable::from_csv(&csv) {
            Err(TableError::Malformed { line, column, .. }) => assert_eq!((line, column), (2, 10)),
            other => panic!("{other:?}"),
        }
        let csv = sample().to_csv().replace(",-20,", ",-020,");
        assert!(matches!(
            TraceTable::from_csv(&csv),
            Err(TableError::Malformed {
                line: 2,
                column: 7,
                ..
            })
        ));
        let csv = sample().to_csv().replace("\n1,2,5", "\n2,2,5");
        assert!(matches!(
            TraceTable::from_csv(&csv),
            Err(TableError::Version { line: 3, .. })
        ));
        let csv = sample().to_csv().replace(",s,", ",i,");
        assert!(matches!(
            TraceTable::from_csv(&csv),
            Err(TableError::Malformed { column: 4, .. })
        ));
        assert!(TraceTable::from_csv("p,z\n").is_err());
        let dup = format!("{}{}", sample().to_csv(), "1,2,5,s,6,0,,0,0,\n");
        assert!(matches!(
            TraceTable::from_csv(&dup),
            Err(TableError::BadRow { .. })
        ));
    }
}

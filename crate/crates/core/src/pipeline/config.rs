use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::counting::PMAX_LIMIT;
use crate::extraction::{CalibrationBounds, Twist, TwistParseError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Epsilon {
        path: PathBuf,
        source: TwistParseError,
    },
}

/// Everything a pipeline run depends on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub z: i64,
    pub pmax: u64,
    pub p2max: u64,
    pub r_max: i64,
    pub c_max: i64,
    pub min_support: usize,
    /// `None` selects [`Twist::default_for`].
    pub epsilon: Option<Twist>,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = CalibrationBounds::default();
        RunConfig {
            z: 2,
            pmax: 500,
            p2max: 100,
            r_max: b.r_max,
            c_max: b.c_max,
            min_support: b.min_support,
            epsilon: None,
            seed: 1,
            workers: 1,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl RunConfig {
    pub fn twist(&self) -> Twist {
        self.epsilon
            .clone()
            .unwrap_or_else(|| Twist::default_for(self.z))
    }

    pub fn bounds(&self) -> CalibrationBounds {
        CalibrationBounds {
            r_max: self.r_max,
            c_max: self.c_max,
            min_support: self.min_support,
        }
    }

    /// Sets one field. Keys are the flag names without dashes; relative
    /// epsilon paths are taken against `base`.
    pub fn apply(&mut self, key: &str, value: &str, base: &Path) -> Result<(), ConfigError> {
        match key {
            "z" => self.z = parse_num(key, value)?,
            "pmax" => self.pmax = parse_num(key, value)?,
            "p2max" => self.p2max = parse_num(key, value)?,
            "rmax" => self.r_max = parse_num(key, value)?,
            "cmax" => self.c_max = parse_num(key, value)?,
            "min-support" | "min_support" => self.min_support = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "workers" => self.workers = parse_num(key, value)?,
            "out" => self.out = base.join(value),
            "epsilon" => {
                let path = base.join(value);
                let text = fs::read_to_string(&path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                let twist =
                    Twist::parse(&text).map_err(|source| ConfigError::Epsilon { path, source })?;
                self.epsilon = Some(twist);
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a `key = value` file on top of `self`.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: n + 1 })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Syntax { line: n + 1 });
            }
            self.apply(k, v, base)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.z == 0 {
            return bad("z must be nonzero");
        }
        if self.pmax < self.p2max {
            return bad("pmax must be at least p2max");
        }
        if self.pmax > PMAX_LIMIT {
            return bad(&format!("pmax must not exceed {PMAX_LIMIT}"));
        }
        if self.r_max < 0 || self.c_max < 0 {
            return bad("rmax and cmax must be nonnegative");
        }
        if self.min_support == 0 {
            return bad("min-support must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be positive");
        }
        Ok(())
    }

    /// Canonical text of the fields that determine results (not the worker
    /// count or the output directory).
    pub fn fingerprint(&self) -> String {
        let eps = self.twist().to_spec().trim_end().replace('\n', "; ");
        format!(
            "z = {}\npmax = {}\np2max = {}\nrmax = {}\ncmax = {}\nmin-support = {}\nepsilon = {}\nseed = {}\n",
            self.z, self.pmax, self.p2max, self.r_max, self.c_max, self.min_support, eps, self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("eps.txt"), "modulus 4\n1 1+0i\n3 -1+0i\n").unwrap();
        let path = dir.path().join("run.conf");
        fs::write(
            &path,
            "# run\nz = 3\npmax = 200 # inline\nepsilon = eps.txt\nmin-support = 4\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_file(&path).unwrap();
        cfg.apply("pmax", "300", Path::new(".")).unwrap();
        assert_eq!(cfg.z, 3);
        assert_eq!(cfg.pmax, 300);
        assert_eq!(cfg.min_support, 4);
        assert!(matches!(cfg.twist(), Twist::Table { modulus: 4, .. }));
        cfg.validate().unwrap();
        assert!(cfg
            .fingerprint()
            .contains("epsilon = modulus 4; 1 1+0i; 3 -1+0i"));
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = RunConfig::default();
        assert!(matches!(
            cfg.apply("zz", "1", Path::new(".")),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.apply("pmax", "-1", Path::new(".")),
            Err(ConfigError::BadValue { .. })
        ));
        cfg.z = 0;
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            pmax: 50,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        fs::write(&path, "z 2\n").unwrap();
        assert!(matches!(
            RunConfig::default().apply_file(&path),
            Err(ConfigError::Syntax { line: 1 })
        ));
    }

    #[test]
    fn fingerprint_ignores_workers() {
        let a = RunConfig::default();
        let b = RunConfig {
            workers: 8,
            out: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.fingerprint(), b.fingerprint());
    }
}

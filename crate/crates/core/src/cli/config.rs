//! Flat `key = value` configuration files and output-path resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::centroaffine::CubicBound;
use crate::error::{Error, Result};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "HCL_OUT_DIR";

const KNOWN_KEYS: &[&str] = &[
    "gamma",
    "n",
    "dh_max",
    "samples",
    "grid",
    "times",
    "controls",
    "tol",
    "fd_step",
    "seed",
    "out_dir",
    "step",
    "horizon",
    "x0",
    "y0",
    "seam_samples",
    "brute_grid",
    "epsilons",
    "problem",
    "mode",
];

/// Values read from a config file. Lines are `key = value`; blank lines and
/// lines starting with `#` are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", i + 1)))?;
            let key = k.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Parse(format!("config line {}: unknown key '{}'", i + 1, k.trim())));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Parse(format!("config key '{key}': {e}"))))
            .transpose()
    }
}

/// Settings shared by every command after merging flags, file and defaults.
#[derive(Debug, Clone)]
pub struct Resolver {
    file: ConfigFile,
}

impl Resolver {
    pub fn new(file: ConfigFile) -> Self {
        Self { file }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.file.raw(key)
    }

    /// Flag if given, else the file's value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.file.get(key)?.unwrap_or(default)),
        }
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get(key),
        }
    }

    /// Comma-separated list.
    pub fn pick_list(&self, flag: Option<Vec<f64>>, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.raw(key) {
            Some(text) => parse_list(text),
            None => Ok(default.to_vec()),
        }
    }

    /// The cubic-form bound from `gamma` or the Blaschke dimension `n`.
    pub fn bound(&self, gamma: Option<f64>, n: Option<u32>) -> Result<CubicBound> {
        match (gamma, n) {
            (Some(_), Some(_)) => Err(Error::Parse("--gamma and --n are mutually exclusive".into())),
            (Some(g), None) => CubicBound::from_gamma(g),
            (None, Some(n)) => CubicBound::blaschke(n),
            (None, None) => match (self.file.get::<f64>("gamma")?, self.file.get::<u32>("n")?) {
                (Some(_), Some(_)) => Err(Error::Parse("config sets both gamma and n".into())),
                (Some(g), None) => CubicBound::from_gamma(g),
                (None, Some(n)) => CubicBound::blaschke(n),
                (None, None) => CubicBound::from_gamma(0.5),
            },
        }
    }

    /// Output directory: flag, then the environment, then the file, then `.`.
    pub fn out_dir(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        if let Some(p) = flag {
            return Ok(p);
        }
        if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return Ok(PathBuf::from(p));
        }
        Ok(self.file.raw("out_dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")))
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad number '{}': {e}", s.trim()))))
        .collect()
}

/// `name` inside `dir`, unless `name` is absolute.
pub fn output_path(dir: &Path, name: &Path) -> PathBuf {
    if name.is_absolute() {
        name.to_path_buf()
    } else {
        dir.join(name)
    }
}

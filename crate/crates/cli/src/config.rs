//! Pipeline settings. Values come from defaults, then an optional
//! `key = value` file, then command-line flags, in that order.

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use decovid::{CovidKind, ModelId, Month};

use crate::error::{config, CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub macro_path: Option<PathBuf>,
    pub financial_path: Option<PathBuf>,
    pub covid_path: Option<PathBuf>,
    /// Adjustment design, 1 to 4.
    pub model: u8,
    pub kind: CovidKind,
    pub q: usize,
    pub r_m: usize,
    pub r_f: usize,
    /// VAR lag order.
    pub p: usize,
    /// Largest impulse-response horizon.
    pub horizon: usize,
    /// Bootstrap replications for response bands; 0 skips the bands.
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub last_pre_covid: Month,
    pub sample_start: Option<Month>,
    pub sample_end: Option<Month>,
    /// Rank of the imputation model; defaults to `r_m`.
    pub em_rank: Option<usize>,
    pub min_obs: usize,
    pub forecast_h: usize,
    pub p_y: usize,
    pub p_w: usize,
    pub threshold: f64,
    /// VAR variables in recursive order; empty means the first two series.
    pub var_series: Vec<String>,
    pub sim_n: usize,
    pub sim_t: usize,
    pub sim_t0: usize,
    pub sim_r: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            macro_path: None,
            financial_path: None,
            covid_path: None,
            model: 4,
            kind: CovidKind::Positive,
            q: 2,
            r_m: 8,
            r_f: 4,
            p: 6,
            horizon: 48,
            reps: 500,
            level: 0.95,
            seed: 20200301,
            out_dir: PathBuf::from("out"),
            last_pre_covid: Month::new(2020, 2).expect("valid month"),
            sample_start: None,
            sample_end: None,
            em_rank: None,
            min_obs: 24,
            forecast_h: 1,
            p_y: 4,
            p_w: 2,
            threshold: 2.56,
            var_series: vec![],
            sim_n: 100,
            sim_t: 730,
            sim_t0: 720,
            sim_r: 3,
        }
    }
}

/// Every key accepted by [`PipelineConfig::set`], in echo order.
pub const KEYS: &[&str] = &[
    "macro",
    "financial",
    "covid",
    "model",
    "kind",
    "q",
    "r_m",
    "r_f",
    "p",
    "horizon",
    "reps",
    "level",
    "seed",
    "out",
    "last_pre_covid",
    "sample_start",
    "sample_end",
    "em_rank",
    "min_obs",
    "forecast_h",
    "p_y",
    "p_w",
    "threshold",
    "var_series",
    "sim_n",
    "sim_t",
    "sim_t0",
    "sim_r",
];

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .trim()
        .parse()
        .map_err(|_| config(format!("`{key}`: cannot parse `{value}`")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> CliResult<Option<T>> {
    if value.trim().is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn month(key: &str, value: &str) -> CliResult<Month> {
    value
        .parse()
        .map_err(|_| config(format!("`{key}`: `{value}` is not a month (use yyyy-mm)")))
}

fn show<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

impl PipelineConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        match k {
            "macro" => self.macro_path = path(value),
            "financial" => self.financial_path = path(value),
            "covid" => self.covid_path = path(value),
            "model" => self.model = parse(k, value)?,
            "kind" => {
                self.kind = value
                    .parse()
                    .map_err(|e: decovid::Error| config(format!("`kind`: {e}")))?
            }
            "q" => self.q = parse(k, value)?,
            "r_m" => self.r_m = parse(k, value)?,
            "r_f" => self.r_f = parse(k, value)?,
            "p" => self.p = parse(k, value)?,
            "horizon" => self.horizon = parse(k, value)?,
            "reps" => self.reps = parse(k, value)?,
            "level" => self.level = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "out" => self.out_dir = PathBuf::from(value.trim()),
            "last_pre_covid" => self.last_pre_covid = month(k, value)?,
            "sample_start" => self.sample_start = (!value.trim().is_empty()).then(|| month(k, value)).transpose()?,
            "sample_end" => self.sample_end = (!value.trim().is_empty()).then(|| month(k, value)).transpose()?,
            "em_rank" => self.em_rank = optional(k, value)?,
            "min_obs" => self.min_obs = parse(k, value)?,
            "forecast_h" => self.forecast_h = parse(k, value)?,
            "p_y" => self.p_y = parse(k, value)?,
            "p_w" => self.p_w = parse(k, value)?,
            "threshold" => self.threshold = parse(k, value)?,
            "var_series" => {
                self.var_series = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "sim_n" => self.sim_n = parse(k, value)?,
            "sim_t" => self.sim_t = parse(k, value)?,
            "sim_t0" => self.sim_t0 = parse(k, value)?,
            "sim_r" => self.sim_r = parse(k, value)?,
            _ => return Err(config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Current value of `key` in the form [`set`](Self::set) accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let p = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        Some(match key {
            "macro" => p(&self.macro_path),
            "financial" => p(&self.financial_path),
            "covid" => p(&self.covid_path),
            "model" => self.model.to_string(),
            "kind" => self.kind.letter().to_string(),
            "q" => self.q.to_string(),
            "r_m" => self.r_m.to_string(),
            "r_f" => self.r_f.to_string(),
            "p" => self.p.to_string(),
            "horizon" => self.horizon.to_string(),
            "reps" => self.reps.to_string(),
            "level" => format!("{:?}", self.level),
            "seed" => self.seed.to_string(),
            "out" => self.out_dir.display().to_string(),
            "last_pre_covid" => self.last_pre_covid.to_string(),
            "sample_start" => show(&self.sample_start),
            "sample_end" => show(&self.sample_end),
            "em_rank" => show(&self.em_rank),
            "min_obs" => self.min_obs.to_string(),
            "forecast_h" => self.forecast_h.to_string(),
            "p_y" => self.p_y.to_string(),
            "p_w" => self.p_w.to_string(),
            "threshold" => format!("{:?}", self.threshold),
            "var_series" => self.var_series.join(","),
            "sim_n" => self.sim_n.to_string(),
            "sim_t" => self.sim_t.to_string(),
            "sim_t0" => self.sim_t0.to_string(),
            "sim_r" => self.sim_r.to_string(),
            _ => return None,
        })
    }

    /// Reads `key = value` lines. Blank lines and `#` comments are skipped,
    /// and so is everything under a `[section]` header, which lets a run
    /// manifest serve as a config file.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
            self.set(k, v).map_err(|e| match e {
                CliError::Config(m) => config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, file: &Path) -> CliResult<()> {
        let text = read_text(file)?;
        self.apply_text(&text)
    }

    /// All settings as `key = value` lines.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("known key"));
        }
        out
    }

    pub fn model_id(&self) -> CliResult<ModelId> {
        ModelId::from_number(self.model).map_err(|_| config(format!("model must be 1, 2, 3 or 4, got {}", self.model)))
    }

    /// Checks the parameters every estimation command shares.
    pub fn validate(&self) -> CliResult<()> {
        self.model_id()?;
        if self.q == 0 {
            return Err(config("q must be at least 1"));
        }
        if self.r_m == 0 {
            return Err(config("r_m must be at least 1"));
        }
        if self.r_f == 0 {
            return Err(config("r_f must be at least 1"));
        }
        if self.p == 0 {
            return Err(config("VAR lag order p must be at least 1"));
        }
        if self.reps != 0 && self.reps < 200 {
            return Err(config(format!("reps must be 0 (no bands) or at least 200, got {}", self.reps)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if let (Some(a), Some(b)) = (self.sample_start, self.sample_end) {
            if a > b {
                return Err(config(format!("sample_start {a} is after sample_end {b}")));
            }
        }
        if self.forecast_h == 0 || self.p_y == 0 || self.p_w == 0 {
            return Err(config("forecast_h, p_y and p_w must be at least 1"));
        }
        Ok(())
    }

    pub fn sample(&self) -> Option<(Month, Month)> {
        match (self.sample_start, self.sample_end) {
            (None, None) => None,
            (a, b) => Some((
                a.unwrap_or(Month::new(1, 1).expect("valid month")),
                b.unwrap_or(Month::new(9999, 12).expect("valid month")),
            )),
        }
    }
}

/// Reads a file, reporting a missing path as "file not found".
pub fn read_text(file: &Path) -> CliResult<String> {
    std::fs::read_to_string(file).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::NotFound(file.to_path_buf())
        } else {
            CliError::Io {
                action: "read",
                path: file.to_path_buf(),
                source: e,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut c = PipelineConfig::default();
        c.apply_text("macro = a.csv\nmodel = 2\nkind = D\nsample_end = 2019-12\nvar_series = UNRATE, INDPRO\nlevel = 0.9\n")
            .unwrap();
        let mut back = PipelineConfig::default();
        back.apply_text(&c.echo()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.var_series, vec!["UNRATE", "INDPRO"]);
    }

    #[test]
    fn sections_are_ignored() {
        let mut c = PipelineConfig::default();
        c.apply_text("# run\nseed = 7\n[outputs]\nmu1.csv = abc\n").unwrap();
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn bad_lines_name_the_line() {
        let mut c = PipelineConfig::default();
        let e = c.apply_text("seed = 1\nr_m = many\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("r_m"), "{e}");
        assert!(c.apply_text("colour = red").unwrap_err().to_string().contains("unknown key"));
    }

    #[test]
    fn model_outside_range_is_rejected() {
        let c = PipelineConfig {
            model: 5,
            ..PipelineConfig::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("model"));
    }
}

//! One function per subcommand. Each computes every artifact in memory,
//! then writes the CSVs and a manifest into the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use decovid::export::{dated_matrix_csv, dated_series_csv, format_number, table_csv};
use decovid::factors::{factor_correlations, pca_standardized};
use decovid::forecast::forecast_panel;
use decovid::ingest::{parse_covid_tracking, parse_fredmd};
use decovid::pipeline::{adjust, adjusted_predictors, covid_regressor, prepare_panel, uncertainty_decomposition, AdjustSettings, PreparedPanel};
use decovid::synthetic::simulate_dgp;
use decovid::var::{bootstrap_ci, build_exog, estimate_var, irf, orthogonalized_shocks, shock_correlation, IrfResult, VarModel};
use decovid::{DailyCovidSeries, DecovidSpec, DgpConfig, ForecastConfig, Month};
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::config::{read_text, PipelineConfig};
use crate::error::{config, CliError, CliResult, Context};

/// What a run wrote.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    /// Output files in write order, manifest last.
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Artifacts {
    command: &'static str,
    inputs: Vec<(&'static str, PathBuf, String)>,
    files: Vec<(String, String)>,
    warnings: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Artifacts {
    fn new(command: &'static str) -> Self {
        Artifacts {
            command,
            inputs: vec![],
            files: vec![],
            warnings: vec![],
        }
    }

    /// Reads an input file and records its hash.
    fn input(&mut self, key: &'static str, file: &Path) -> CliResult<String> {
        let text = read_text(file)?;
        self.inputs.push((key, file.to_path_buf(), sha256_hex(text.as_bytes())));
        Ok(text)
    }

    fn add(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    fn manifest(&self, cfg: &PipelineConfig) -> String {
        let mut m = format!("# decovid {} {}\n", env!("CARGO_PKG_VERSION"), self.command);
        m.push_str(&cfg.echo());
        m.push_str("\n[inputs]\n");
        for (key, file, hash) in &self.inputs {
            let _ = writeln!(m, "{key} = {} sha256:{hash}", file.display());
        }
        m.push_str("\n[outputs]\n");
        for (name, content) in &self.files {
            let _ = writeln!(m, "{name} = sha256:{}", sha256_hex(content.as_bytes()));
        }
        if !self.warnings.is_empty() {
            m.push_str("\n[warnings]\n");
            for w in &self.warnings {
                let _ = writeln!(m, "{w}");
            }
        }
        m
    }

    fn write(self, cfg: &PipelineConfig) -> CliResult<RunOutput> {
        let dir = cfg.out_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            action: "create",
            path: dir.clone(),
            source,
        })?;
        let manifest = self.manifest(cfg);
        let mut files = Vec::new();
        for (name, content) in self.files.iter().chain(std::iter::once(&("manifest.txt".to_string(), manifest))) {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(|source| CliError::Io {
                action: "write",
                path: path.clone(),
                source,
            })?;
            files.push(path);
        }
        Ok(RunOutput {
            dir,
            files,
            warnings: self.warnings,
        })
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str, key: &str) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| config(format!("{what} path is not set (`{key}`)")))
}

fn settings(cfg: &PipelineConfig) -> CliResult<AdjustSettings> {
    Ok(AdjustSettings {
        model: cfg.model_id()?,
        kind: cfg.kind,
        q: cfg.q,
        last_pre_covid: cfg.last_pre_covid,
        macro_factors: cfg.r_m,
        financial_factors: cfg.r_f,
        forecast: ForecastConfig {
            h: cfg.forecast_h,
            p_y: cfg.p_y,
            p_w: cfg.p_w,
            threshold: cfg.threshold,
        },
    })
}

fn load_panel(art: &mut Artifacts, cfg: &PipelineConfig, key: &'static str, file: &Path, rank: usize) -> CliResult<PreparedPanel> {
    let text = art.input(key, file)?;
    let what = format!("{key} panel {}", file.display());
    let raw = parse_fredmd(&text).context(what.clone())?;
    let prepared =
        prepare_panel(&raw, cfg.last_pre_covid, cfg.sample(), cfg.em_rank.unwrap_or(rank), cfg.min_obs).context(what.clone())?;
    art.warnings
        .extend(prepared.warnings.iter().map(|w| format!("{key}: {w}")));
    Ok(prepared)
}

fn load_macro(art: &mut Artifacts, cfg: &PipelineConfig) -> CliResult<PreparedPanel> {
    let file = required(&cfg.macro_path, "macro panel", "macro")?;
    load_panel(art, cfg, "macro", file, cfg.r_m)
}

fn load_financial(art: &mut Artifacts, cfg: &PipelineConfig) -> CliResult<Option<PreparedPanel>> {
    match &cfg.financial_path {
        Some(file) => load_panel(art, cfg, "financial", file, cfg.r_f).map(Some),
        None => Ok(None),
    }
}

fn load_covid(art: &mut Artifacts, cfg: &PipelineConfig) -> CliResult<DailyCovidSeries> {
    let file = required(&cfg.covid_path, "covid counts", "covid")?;
    let text = art.input("covid", file)?;
    let daily = parse_covid_tracking(&text).context(format!("covid counts {}", file.display()))?;
    art.warnings
        .extend(daily.warnings.iter().map(|w| format!("covid: {w}")));
    Ok(daily)
}

fn check_factor_count(panel: &PreparedPanel, r: usize, key: &str) -> CliResult<()> {
    let n = panel.names.len();
    if r > n {
        return Err(config(format!("{key} = {r} exceeds the {n} series left in the panel")));
    }
    Ok(())
}

fn outbreak_row(dates: &[Month], last_pre: Month) -> Option<usize> {
    dates
        .iter()
        .position(|&d| d == last_pre)
        .filter(|&t0| t0 + 1 < dates.len())
}

fn indexed_names(prefix: &str, r: usize, suffix: &str) -> Vec<String> {
    (1..=r).map(|k| format!("{prefix}{k}{suffix}")).collect()
}

/// Fitted COVID components (`mu1.csv`) and the adjusted panel (`x_panel.csv`).
pub fn run_decovid(cfg: &PipelineConfig) -> CliResult<RunOutput> {
    cfg.validate()?;
    let mut art = Artifacts::new("decovid");
    let panel = load_macro(&mut art, cfg)?;
    let daily = load_covid(&mut art, cfg)?;
    let set = settings(cfg)?;
    let v = covid_regressor(&daily, cfg.kind, &panel.dates, cfg.last_pre_covid).context("covid growth")?;
    let (_, res) = adjust(&panel.values, &panel.names, &panel.dates, &v, &set).context("adjustment")?;
    let res = res.ok_or_else(|| config(format!("the sample has no months after last_pre_covid = {}", cfg.last_pre_covid)))?;
    let t0 = panel.dates.len() - res.mu1.nrows() - 1;
    art.add("mu1.csv", dated_matrix_csv(&panel.dates[t0 + 1..], &panel.names, &res.mu1));
    art.add("x_panel.csv", dated_matrix_csv(&panel.dates, &panel.names, &res.x));
    art.write(cfg)
}

/// Factors of the adjusted and unadjusted panels, their variance shares and
/// the correlations of the adjusted factors with pre-outbreak factors.
pub fn run_factors(cfg: &PipelineConfig) -> CliResult<RunOutput> {
    cfg.validate()?;
    let mut art = Artifacts::new("factors");
    let panel = load_macro(&mut art, cfg)?;
    check_factor_count(&panel, cfg.r_m, "r_m")?;
    let daily = load_covid(&mut art, cfg)?;
    let set = settings(cfg)?;
    let r = cfg.r_m;
    let v = covid_regressor(&daily, cfg.kind, &panel.dates, cfg.last_pre_covid).context("covid growth")?;
    let (x, res) = adjust(&panel.values, &panel.names, &panel.dates, &v, &set).context("adjustment")?;
    if res.is_none() {
        art.warnings
            .push("no post-outbreak months: adjusted and unadjusted factors coincide".into());
    }
    let fa = pca_standardized(&x, &panel.names, r).context("factors of the adjusted panel")?;
    let fu = pca_standardized(&panel.values, &panel.names, r).context("factors of the unadjusted panel")?;

    let mut names = indexed_names("F", r, "");
    names.extend(indexed_names("F", r, "_unadjusted"));
    let mut both = DMatrix::zeros(panel.dates.len(), 2 * r);
    both.columns_mut(0, r).copy_from(&fa.f);
    both.columns_mut(r, r).copy_from(&fu.f);
    art.add("factors.csv", dated_matrix_csv(&panel.dates, &names, &both));

    let rows: Vec<Vec<String>> = (0..r)
        .map(|k| {
            vec![
                format!("F{}", k + 1),
                format_number(fa.variance_shares[k]),
                format_number(fu.variance_shares[k]),
            ]
        })
        .collect();
    art.add("variance_shares.csv", table_csv(&["factor", "adjusted", "unadjusted"], &rows));

    let pre_rows = panel
        .dates
        .iter()
        .take_while(|&&d| d <= cfg.last_pre_covid)
        .count();
    if pre_rows <= r {
        return Err(config(format!(
            "{pre_rows} months up to last_pre_covid = {} are too few for {r} pre-outbreak factors",
            cfg.last_pre_covid
        )));
    }
    let pre_panel = panel.values.rows(0, pre_rows).into_owned();
    let fp = pca_standardized(&pre_panel, &panel.names, r).context("pre-outbreak factors")?;
    let window = (panel.dates[0], panel.dates[pre_rows - 1]);
    let corr = factor_correlations(&fa.f, &panel.dates, &fp.f, &panel.dates[..pre_rows], window).context("factor correlations")?;
    let header: Vec<String> = std::iter::once("factor".to_string())
        .chain(indexed_names("F", r, "_pre"))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..r)
        .map(|k| {
            std::iter::once(format!("F{}", k + 1))
                .chain(corr.row(k).iter().map(|&c| format_number(c)))
                .collect()
        })
        .collect();
    art.add("correlations.csv", table_csv(&header, &rows));
    art.write(cfg)
}

/// Diffusion-index forecast errors of the adjusted panel, the selected
/// predictor columns and the predictor values.
pub fn run_forecast(cfg: &PipelineConfig) -> CliResult<RunOutput> {
    cfg.validate()?;
    let mut art = Artifacts::new("forecast");
    let panel = load_macro(&mut art, cfg)?;
    check_factor_count(&panel, cfg.r_m, "r_m")?;
    let financial = load_financial(&mut art, cfg)?;
    if let Some(f) = &financial {
        check_factor_count(f, cfg.r_f, "r_f")?;
    }
    let daily = load_covid(&mut art, cfg)?;
    let set = settings(cfg)?;
    let ap = adjusted_predictors(&panel, financial.as_ref(), &daily, &set).context("predictors")?;
    let fc = forecast_panel(&ap.x, &panel.names, &ap.predictors, &set.forecast).context("forecasts")?;
    art.add("predictors.csv", dated_matrix_csv(&panel.dates, &ap.predictors.names, &ap.predictors.values));
    art.add("forecast_errors.csv", dated_matrix_csv(&panel.dates, &panel.names, &fc.error_matrix()));
    let rows: Vec<Vec<String>> = fc
        .series
        .iter()
        .chain(&fc.factor_equations)
        .map(|r| vec![r.target.clone(), r.selected.join(" ")])
        .collect();
    art.add("selected.csv", table_csv(&["target", "selected"], &rows));
    art.write(cfg)
}

fn index_csv(dates: &[Month], idx: &decovid::UncertaintyIndex, label: &str) -> String {
    let mut names = vec![label.to_string()];
    names.extend(idx.names.iter().cloned());
    let mut m = DMatrix::zeros(dates.len(), names.len());
    for (i, u) in idx.u.iter().enumerate() {
        m[(i, 0)] = *u;
    }
    m.columns_mut(1, idx.names.len()).copy_from(&idx.u_j);
    dated_matrix_csv(dates, &names, &m)
}

/// Uncertainty of the unadjusted (`U_X.csv`) and adjusted (`U_x.csv`)
/// panels and their difference (`covid_U.csv`).
pub fn run_uncertainty(cfg: &PipelineConfig) -> CliResult<RunOutput> {
    cfg.validate()?;
    let mut art = Artifacts::new("uncertainty");
    let panel = load_macro(&mut art, cfg)?;
    check_factor_count(&panel, cfg.r_m, "r_m")?;
    let financial = load_financial(&mut art, cfg)?;
    if let Some(f) = &financial {
        check_factor_count(f, cfg.r_f, "r_f")?;
    }
    let daily = load_covid(&mut art, cfg)?;
    let set = settings(cfg)?;
    let d = uncertainty_decomposition(&panel, financial.as_ref(), &daily, &set).context("uncertainty")?;
    if d.adjustment.is_none() {
        art.warnings
            .push("no post-outbreak months: both indices use the same panel".into());
    }
    art.add("U_X.csv", index_csv(&panel.dates, &d.unadjusted.index, "U_X"));
    art.add("U_x.csv", index_csv(&panel.dates, &d.adjusted.index, "U_x"));
    art.add("covid_U.csv", dated_series_csv(&panel.dates, &["covid_U"], &[&d.covid]));
    art.write(cfg)
}

fn irf_rows(label: &str, res: &IrfResult, names: &[String], rows: &mut Vec<Vec<String>>) {
    for (h, m) in res.responses.iter().enumerate() {
        for (i, resp) in names.iter().enumerate() {
            for (k, shock) in names.iter().enumerate() {
                rows.push(vec![
                    label.to_string(),
                    h.to_string(),
                    resp.clone(),
                    shock.clone(),
                    format_number(m[(i, k)]),
                ]);
            }
        }
    }
}

fn band_rows(label: &str, res: &IrfResult, names: &[String], rows: &mut Vec<Vec<String>>) {
    let Some(b) = &res.bands else { return };
    for (h, m) in res.responses.iter().enumerate() {
        for (i, resp) in names.iter().enumerate() {
            for (k, shock) in names.iter().enumerate() {
                rows.push(vec![
                    label.to_string(),
                    h.to_string(),
                    resp.clone(),
                    shock.clone(),
                    format_number(b.lower[h][(i, k)]),
                    format_number(m[(i, k)]),
                    format_number(b.upper[h][(i, k)]),
                ]);
            }
        }
    }
}

/// Impulse responses of the pre-outbreak, unadjusted and COVID-controlled
/// VARs, bootstrap bands, and a table of shocks in the post-outbreak months.
pub fn run_var(cfg: &PipelineConfig) -> CliResult<RunOutput> {
    cfg.validate()?;
    let mut art = Artifacts::new("var");
    let panel = load_macro(&mut art, cfg)?;
    let daily = load_covid(&mut art, cfg)?;
    let series: Vec<String> = if cfg.var_series.is_empty() {
        panel.names.iter().take(2).cloned().collect()
    } else {
        cfg.var_series.clone()
    };
    let cols = series
        .iter()
        .map(|s| {
            panel
                .names
                .iter()
                .position(|n| n == s)
                .ok_or_else(|| config(format!("VAR series `{s}` is not in the macro panel")))
        })
        .collect::<CliResult<Vec<usize>>>()?;
    // Back to transformed units: the VAR should not depend on the sample
    // used for standardization.
    let y = DMatrix::from_fn(panel.dates.len(), cols.len(), |i, j| {
        panel.values[(i, cols[j])] * panel.sds[cols[j]] + panel.means[cols[j]]
    });
    let t0 = outbreak_row(&panel.dates, cfg.last_pre_covid);

    let unadjusted = estimate_var(&y, &series, cfg.p, None).context("unadjusted VAR")?;
    let (reference, adjusted) = match t0 {
        Some(t0) => {
            let pre = y.rows(0, t0 + 1).into_owned();
            let reference = estimate_var(&pre, &series, cfg.p, None).context("pre-outbreak VAR")?;
            let v = covid_regressor(&daily, cfg.kind, &panel.dates, cfg.last_pre_covid).context("covid growth")?;
            let spec = DecovidSpec::new(cfg.model_id()?, cfg.kind, t0).with_q(cfg.q);
            let exog = build_exog(&spec, &v).context("COVID controls")?;
            let adjusted = estimate_var(&y, &series, cfg.p, Some(&exog)).context("VAR with COVID controls")?;
            art.warnings.extend(adjusted.warnings.iter().cloned());
            (reference, adjusted)
        }
        None => {
            art.warnings
                .push("no post-outbreak months: all three VARs use the same sample".into());
            (unadjusted.clone(), unadjusted.clone())
        }
    };
    let models: [(&str, &VarModel); 3] = [("pre_covid", &reference), ("unadjusted", &unadjusted), ("adjusted", &adjusted)];

    let mut rows = Vec::new();
    for (label, m) in &models {
        irf_rows(label, &irf(m, cfg.horizon), &series, &mut rows);
    }
    art.add("irf.csv", table_csv(&["model", "horizon", "response", "shock", "value"], &rows));

    if cfg.reps > 0 {
        let mut rows = Vec::new();
        for (s, (label, m)) in models.iter().enumerate() {
            // One stream family per model, all derived from the master seed.
            let seed = cfg.seed.wrapping_add(s as u64);
            let res = bootstrap_ci(m, cfg.horizon, cfg.reps, cfg.level, seed).context(format!("{label} bootstrap"))?;
            if let Some(b) = &res.bands {
                if b.failed > 0 {
                    art.warnings
                        .push(format!("{label} bootstrap: {} of {} replications failed", b.failed, b.reps));
                }
            }
            band_rows(label, &res, &series, &mut rows);
        }
        art.add(
            "irf_bands.csv",
            table_csv(&["model", "horizon", "response", "shock", "lower", "point", "upper"], &rows),
        );
    }

    art.add("shocks_table.csv", shocks_table(&panel.dates, t0, &series, &reference, &unadjusted, &adjusted, cfg.p)?);
    art.write(cfg)
}

/// Orthogonalized shocks of the unadjusted and adjusted VARs in every
/// post-outbreak month, then their correlation with the pre-outbreak VAR's
/// shocks over the pre-outbreak months.
fn shocks_table(
    dates: &[Month],
    t0: Option<usize>,
    series: &[String],
    reference: &VarModel,
    unadjusted: &VarModel,
    adjusted: &VarModel,
    p: usize,
) -> CliResult<String> {
    let e_ref = orthogonalized_shocks(reference).context("pre-outbreak shocks")?;
    let mut rows = Vec::new();
    let mut cors = Vec::new();
    let last_pre = t0.unwrap_or(dates.len() - 1);
    for (label, m) in [("unadjusted", unadjusted), ("adjusted", adjusted)] {
        let e = orthogonalized_shocks(m).context(format!("{label} shocks"))?;
        for t in last_pre + 1..dates.len() {
            let mut row = vec![decovid::export::iso_date(dates[t]), label.to_string()];
            row.extend((0..series.len()).map(|k| format_number(e[(t - m.rows.start, k)])));
            rows.push(row);
        }
        let mut row = vec!["cor".to_string(), label.to_string()];
        for k in 0..series.len() {
            let c = shock_correlation(&e, &m.rows, &e_ref, &reference.rows, k, p..last_pre + 1).context("shock correlation")?;
            row.push(format_number(c));
        }
        cors.push(row);
    }
    rows.extend(cors);
    let mut header = vec!["date", "model"];
    header.extend(series.iter().map(String::as_str));
    Ok(table_csv(&header, &rows))
}

/// Writes a synthetic FRED-MD style panel (`macro.csv`), matching daily
/// COVID counts (`covid.csv`) and the true factors (`truth.csv`).
pub fn run_simulate(cfg: &PipelineConfig) -> CliResult<RunOutput> {
    let dgp = DgpConfig {
        n: cfg.sim_n,
        t: cfg.sim_t,
        t0: cfg.sim_t0,
        r: cfg.sim_r,
        seed: cfg.seed,
        ..DgpConfig::default()
    };
    let sim = simulate_dgp(&dgp).context("simulation")?;
    let mut art = Artifacts::new("simulate");
    art.add("macro.csv", sim.to_raw_panel().to_csv());
    art.add("covid.csv", sim.to_daily_covid(dgp.t0).to_csv());
    let mut names = indexed_names("F", dgp.r, "");
    names.extend(["V".to_string(), "v_P".to_string(), "v_D".to_string()]);
    let mut truth = DMatrix::zeros(dgp.t, dgp.r + 3);
    truth.columns_mut(0, dgp.r).copy_from(&sim.f);
    for i in 0..dgp.t {
        truth[(i, dgp.r)] = sim.v_factor[i];
        truth[(i, dgp.r + 1)] = sim.v[i];
        truth[(i, dgp.r + 2)] = sim.v_secondary[i];
    }
    art.add("truth.csv", dated_matrix_csv(&sim.dates, &names, &truth));
    art.write(cfg)
}

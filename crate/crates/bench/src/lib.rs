//! Shared inputs for the benchmarks: a default-sized synthetic panel and a
//! bivariate VAR sample with a COVID block.

use decovid::pipeline::{adjust, AdjustSettings};
use decovid::synthetic::{simulate_dgp, simulate_var};
use decovid::var::build_exog;
use decovid::{CovidKind, DecovidSpec, DgpConfig, ExogBlock, ModelId, Month, SimulatedPanel, VarDgp};
use nalgebra::DMatrix;

pub fn panel(seed: u64) -> SimulatedPanel {
    simulate_dgp(&DgpConfig {
        seed,
        ..DgpConfig::default()
    })
    .expect("default configuration is valid")
}

/// Column-standardized copy of the simulated panel and its adjusted version.
pub fn standardized_and_adjusted(sim: &SimulatedPanel) -> (DMatrix<f64>, DMatrix<f64>, Vec<String>) {
    let names: Vec<String> = (0..sim.x.ncols()).map(|j| format!("X{j}")).collect();
    let mut x = sim.x.clone();
    for mut c in x.column_iter_mut() {
        let n = c.len() as f64;
        let m = c.sum() / n;
        let sd = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
        c.apply(|v| *v = (*v - m) / sd);
    }
    let settings = AdjustSettings {
        last_pre_covid: Month::new(2020, 2).expect("valid month"),
        ..AdjustSettings::default()
    };
    let (adj, _) = adjust(&x, &names, &sim.dates, &sim.v, &settings).expect("adjustment succeeds");
    (x, adj, names)
}

/// Bivariate sample of length `t` whose last 10 months follow the outbreak,
/// with the Model 4 COVID block.
pub fn var_sample(t: usize, seed: u64) -> (DMatrix<f64>, Vec<String>, ExogBlock) {
    let dgp = VarDgp::unemployment_production();
    let y = simulate_var(&dgp, t, None, seed).expect("stable system");
    let t0 = t - 11;
    let mut v = vec![0.0; t];
    for (i, g) in [9.4, 1.5, -0.2, 0.1, 0.8, 0.3, -0.1, 0.2, 0.0, 0.1].iter().enumerate() {
        v[t0 + 1 + i] = *g;
    }
    let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, t0);
    let exog = build_exog(&spec, &v).expect("valid design");
    (y, dgp.names.clone(), exog)
}

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use decovid::decovid::decovid_panel;
use decovid::factors::pca;
use decovid::uncertainty::fit_sv;
use decovid::var::{bootstrap_ci, estimate_var};
use decovid::{CovidKind, DecovidSpec, ModelId};
use decovid_bench::{panel, standardized_and_adjusted, var_sample};

fn bench_pca(c: &mut Criterion) {
    let sim = panel(1);
    let (x, _, _) = standardized_and_adjusted(&sim);
    c.bench_function("pca 730x100 r=8", |b| b.iter(|| pca(black_box(&x), 8).unwrap()));
}

fn bench_decovid(c: &mut Criterion) {
    let sim = panel(2);
    let (x, _, names) = standardized_and_adjusted(&sim);
    let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, 720);
    c.bench_function("decovid panel 730x100 model 4", |b| {
        b.iter(|| decovid_panel(black_box(&x), &names, &spec, &sim.v).unwrap())
    });
}

fn bench_var_bootstrap(c: &mut Criterion) {
    let (y, names, exog) = var_sample(730, 3);
    let model = estimate_var(&y, &names, 6, Some(&exog)).unwrap();
    let mut g = c.benchmark_group("var");
    g.sample_size(10);
    g.bench_function("bootstrap 500 reps p=6 h=48", |b| {
        b.iter(|| bootstrap_ci(black_box(&model), 48, 500, 0.95, 7).unwrap())
    });
    g.finish();
}

fn bench_sv(c: &mut Criterion) {
    let sim = panel(4);
    let e: Vec<f64> = sim.e.column(0).iter().copied().collect();
    c.bench_function("sv fit T=730", |b| b.iter(|| fit_sv(black_box(&e)).unwrap()));
}

criterion_group!(benches, bench_pca, bench_decovid, bench_var_bootstrap, bench_sv);
criterion_main!(benches);

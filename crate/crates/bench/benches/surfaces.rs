use std::hint::black_box;
use std::sync::Arc;

use cmfp_core::ambiguity::{surface_broadband_compressive, surface_narrowband, surface_narrowband_compressive};
use cmfp_core::experiments::GridSpec;
use cmfp_core::{compress_field, draw_encoder, greens_field, solve_modes, Environment, ReceiverArray, C64};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn setup() -> (Environment, ReceiverArray, Arc<cmfp_core::SearchGrid>) {
    let grid = Arc::new(GridSpec::wide().build().unwrap());
    (Environment::default(), ReceiverArray::default(), grid)
}

fn modes_and_field(c: &mut Criterion) {
    let (env, array, grid) = setup();
    c.bench_function("solve_modes 150 Hz", |b| b.iter(|| solve_modes(black_box(&env), 150.0).unwrap()));
    let modes = solve_modes(&env, 150.0).unwrap();
    c.bench_function("greens_field 37x8100", |b| {
        b.iter(|| greens_field(black_box(&modes), &env, &array, &grid).unwrap())
    });
}

fn compression(c: &mut Criterion) {
    let (env, array, grid) = setup();
    let field = greens_field(&solve_modes(&env, 150.0).unwrap(), &env, &array, &grid).unwrap();
    let mut group = c.benchmark_group("compress_field");
    for m in [2usize, 10, 37] {
        let phi = draw_encoder(m, 37, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &phi, |b, phi| {
            b.iter(|| compress_field(black_box(phi), &field).unwrap())
        });
    }
    group.finish();
}

fn surfaces(c: &mut Criterion) {
    let (env, array, grid) = setup();
    let field = greens_field(&solve_modes(&env, 150.0).unwrap(), &env, &array, &grid).unwrap();
    let y: Vec<C64> = field.column(4321).to_vec();
    c.bench_function("nMFP surface", |b| b.iter(|| surface_narrowband(black_box(&y), &field, true).unwrap()));
    let mut group = c.benchmark_group("cMFP surface");
    for m in [2usize, 10, 37] {
        let enc = compress_field(&draw_encoder(m, 37, 2).unwrap(), &field).unwrap();
        let py = enc.compress(&y).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| surface_narrowband_compressive(black_box(&py), &enc).unwrap())
        });
    }
    group.finish();

    let freqs: Vec<f64> = (141..=160).map(f64::from).collect();
    let encoders: Vec<_> = freqs
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let field = greens_field(&solve_modes(&env, f).unwrap(), &env, &array, &grid).unwrap();
            compress_field(&draw_encoder(2, 37, k as u64).unwrap(), &field).unwrap()
        })
        .collect();
    let pys: Vec<Vec<C64>> = encoders.iter().map(|e| e.compress(&y).unwrap()).collect();
    let alphas = vec![C64::new(1.0, 0.0); freqs.len()];
    c.bench_function("coherent cMFP surface K=20 M=2", |b| {
        b.iter(|| surface_broadband_compressive(black_box(&pys), &encoders, true, &alphas).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = modes_and_field, compression, surfaces
}
criterion_main!(benches);

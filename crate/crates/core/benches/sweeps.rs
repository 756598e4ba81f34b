//! Parallel sweeps against a one-thread pool. Build with
//! `--no-default-features` to time the purely sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use purcell_core::blochsim::sequence::{pi_amplitude, rabi_sweep, EchoTiming, PI_DURATION};
use purcell_core::blochsim::{init_ensemble, EnsembleSpec, SimControls};
use purcell_core::coupling::{
    coupling_distribution, coupling_map, field_map, vacuum_current, Binning, GridSpec,
    ImplantationProfile, WireGeometry,
};
use purcell_core::hamiltonian::{field_grid, spectrum_vs_field, SpinSystemParams};
use purcell_core::thermal::ResonatorParams;

#[cfg(feature = "parallel")]
type Backend = rayon::ThreadPool;
#[cfg(not(feature = "parallel"))]
type Backend = ();

#[cfg(feature = "parallel")]
fn backends() -> Vec<(&'static str, Backend)> {
    let build = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    vec![("parallel", build(0)), ("single", build(1))]
}

#[cfg(not(feature = "parallel"))]
fn backends() -> Vec<(&'static str, Backend)> {
    vec![("sequential", ())]
}

#[cfg(feature = "parallel")]
fn on<T: Send>(pool: &Backend, f: impl FnOnce() -> T + Send) -> T {
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn on<T: Send>(_: &Backend, f: impl FnOnce() -> T + Send) -> T {
    f()
}

fn bench_all(c: &mut Criterion) {
    let res = ResonatorParams::with_rates(1e5, 1.1e6);
    let grid = field_grid(0.0, 0.07, 1e-4).unwrap();
    let params = SpinSystemParams::bismuth();
    let geom = WireGeometry::default();
    let spec = GridSpec::default();
    let field = field_map(&geom, vacuum_current(&res), &spec).unwrap();
    let a = coupling_map(&field, 0.28).unwrap();
    let b = coupling_map(&field, 0.22).unwrap();
    let rho = coupling_distribution(
        &[(&a, 0.5), (&b, 0.5)],
        &ImplantationProfile::default(),
        &Binning::default(),
    )
    .unwrap();
    let groups = init_ensemble(
        &rho,
        &EnsembleSpec {
            n_g: 10,
            n_delta: 11,
            ..Default::default()
        },
        &res,
    )
    .unwrap();
    let timing = EchoTiming::for_resonator(&res);
    let amp = pi_amplitude(rho.quantile(0.5), &res, PI_DURATION);
    let amps: Vec<f64> = (1..=8).map(|i| amp * i as f64 / 4.0).collect();

    let backends = backends();

    let mut group = c.benchmark_group("sweeps");
    group.sample_size(10);
    for (name, pool) in &backends {
        group.bench_function(BenchmarkId::new("spectrum_vs_field", name), |bench| {
            bench.iter(|| on(pool, || spectrum_vs_field(&params, &grid, 7.408e9).unwrap()))
        });
        group.bench_function(BenchmarkId::new("field_map", name), |bench| {
            bench.iter(|| {
                on(pool, || {
                    field_map(&geom, vacuum_current(&res), &spec).unwrap()
                })
            })
        });
        group.bench_function(BenchmarkId::new("rabi_sweep", name), |bench| {
            bench.iter(|| {
                on(pool, || {
                    rabi_sweep(&groups, &res, amp, &timing, &amps, &SimControls::default()).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_all);
criterion_main!(benches);

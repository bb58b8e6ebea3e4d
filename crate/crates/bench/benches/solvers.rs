//! Solver throughput benchmarks: uniform RK4 vs the log-time stepper,
//! Euler-Maruyama paths, and the Lyapunov pipeline.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use pantolab::det::{solve_pantograph, GridSpec, PantographParams};
use pantolab::forcing::ForcingSpec;
use pantolab::linalg::Mat;
use pantolab::multidim::lyapunov_solve;
use pantolab::stoch::{sample_brownian, sdde_times, solve_sdde, SddeMethod};

fn bench_uniform_rk4(c: &mut Criterion) {
    let p = PantographParams::new(0.5, -1.0, 0.5).unwrap();
    c.bench_function("rk4_uniform_10k_steps", |bch| {
        bch.iter(|| {
            solve_pantograph(
                &p,
                &ForcingSpec::Zero,
                1.0,
                &GridSpec::UniformTime {
                    h: 1e-3,
                    t_end: 10.0,
                },
            )
            .unwrap()
        })
    });
}

fn bench_logtime(c: &mut Criterion) {
    let p = PantographParams::new(0.5, -1.0, 0.5).unwrap();
    c.bench_function("logtime_to_1e6", |bch| {
        bch.iter(|| {
            solve_pantograph(
                &p,
                &ForcingSpec::Zero,
                1.0,
                &GridSpec::LogTime {
                    steps_per_delay: 16,
                    t0: 1.0,
                    t_end: 1e6,
                },
            )
            .unwrap()
        })
    });
}

fn bench_euler_maruyama(c: &mut Criterion) {
    let p = PantographParams::new(0.5, -1.0, 0.5).unwrap();
    let times = sdde_times(1e-3, 10.0);
    c.bench_function("euler_maruyama_10k_steps", |bch| {
        bch.iter_batched(
            || sample_brownian(&times, 42, 0).unwrap(),
            |path| {
                solve_sdde(
                    &p,
                    &ForcingSpec::Zero,
                    &ForcingSpec::Constant { c: 0.5 },
                    &path,
                    1.0,
                    SddeMethod::EulerMaruyama,
                )
                .unwrap()
            },
            BatchSize::LargeInput,
        )
    });
}

fn bench_lyapunov(c: &mut Criterion) {
    let b = Mat::from_rows(&[
        vec![-2.0, 0.4, 0.1, 0.0],
        vec![0.0, -1.5, 0.3, 0.2],
        vec![0.1, 0.0, -1.0, 0.5],
        vec![0.0, 0.1, 0.0, -2.5],
    ])
    .unwrap();
    let a = Mat::identity(4);
    c.bench_function("lyapunov_solve_4x4", |bch| {
        bch.iter(|| lyapunov_solve(&b, &a).unwrap())
    });
}

criterion_group!(
    benches,
    bench_uniform_rk4,
    bench_logtime,
    bench_euler_maruyama,
    bench_lyapunov
);
criterion_main!(benches);

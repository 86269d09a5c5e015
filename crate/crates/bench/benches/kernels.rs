use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use pdmp_core::analysis::{tv_distance, Binning, EmpiricalLaw};
use pdmp_core::coupling_engine::{couple_reflected, couple_unreflected, DEFAULT_WINDOW};
use pdmp_core::jump_sampler::sample_jump;
use pdmp_core::pdmp_sim::simulate;
use pdmp_core::rng::replica_stream;
use pdmp_core::scaling_lab::{scaled_marginal, InitialVelocity};
use pdmp_core::{Flavor, RatePair, RateSpec, ScalingFamily, State, Velocity};

fn jumps(c: &mut Criterion) {
    let affine = RatePair::affine(1.0, 1.0).unwrap();
    let tabulated = RatePair::new(
        RateSpec::constant(1.0),
        RateSpec::tabulated(vec![0.0, 1.0, 2.0, 4.0], vec![1.0, 1.5, 3.0, 4.0]).unwrap(),
    )
    .unwrap();
    let mut rng = replica_stream(1, 0);
    c.bench_function("jump affine +1", |b| {
        b.iter(|| sample_jump(&affine, black_box(2.0), Velocity::Plus, &mut rng))
    });
    c.bench_function("jump tabulated +1", |b| {
        b.iter(|| sample_jump(&tabulated, black_box(2.0), Velocity::Plus, &mut rng))
    });
}

fn paths(c: &mut Criterion) {
    let pair = RatePair::affine(1.0, 1.0).unwrap();
    let mut rng = replica_stream(2, 0);
    c.bench_function("simulate horizon 10", |b| {
        b.iter(|| {
            simulate(
                &pair,
                State::new(1.0, Velocity::Plus),
                10.0,
                Flavor::Unreflected,
                &mut rng,
            )
            .unwrap()
        })
    });
    c.bench_function("couple reflected", |b| {
        b.iter(|| {
            couple_reflected(
                &pair,
                State::new(2.0, Velocity::Plus),
                State::new(0.0, Velocity::Minus),
                &mut rng,
            )
            .unwrap()
        })
    });
    c.bench_function("couple unreflected", |b| {
        b.iter(|| {
            couple_unreflected(
                &pair,
                State::new(1.0, Velocity::Plus),
                State::new(0.0, Velocity::Minus),
                DEFAULT_WINDOW,
                &mut rng,
            )
            .unwrap()
        })
    });
    let family = ScalingFamily::ornstein_uhlenbeck(64);
    c.bench_function("scaled marginal N=64", |b| {
        b.iter(|| scaled_marginal(&family, 1.0, InitialVelocity::Uniform, 1.0, &mut rng).unwrap())
    });
}

fn histograms(c: &mut Criterion) {
    let mut rng = replica_stream(3, 0);
    let pair = RatePair::affine(1.0, 1.0).unwrap();
    let xs: Vec<f64> = (0..10_000)
        .map(|_| {
            simulate(
                &pair,
                State::new(0.0, Velocity::Plus),
                5.0,
                Flavor::Unreflected,
                &mut rng,
            )
            .unwrap()
            .final_state()
            .position
        })
        .collect();
    let bins = Binning::new(-4.0, 4.0, 200).unwrap();
    let p = EmpiricalLaw::from_positions(&xs[..5000], bins).unwrap();
    let q = EmpiricalLaw::from_positions(&xs[5000..], bins).unwrap();
    c.bench_function("histogram 10k", |b| {
        b.iter(|| EmpiricalLaw::from_positions(black_box(&xs), bins).unwrap())
    });
    c.bench_function("tv distance 200 bins", |b| {
        b.iter(|| tv_distance(black_box(&p), black_box(&q)).unwrap())
    });
}

criterion_group!(benches, jumps, paths, histograms);
criterion_main!(benches);

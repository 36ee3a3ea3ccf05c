use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use hsctc::bcjr::{BcjrDecoder, MaxStar};
use hsctc::erasure::{ChannelErasure, ErasureDe, ErasureState, TransferFn, TransferMode};
use hsctc::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bcjr(c: &mut Criterion) {
    let t = Trellis::new(&GeneratorSpec::g537()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let obs: Vec<Vec<f32>> = (0..3).map(|_| (0..1024).map(|_| rng.gen_range(-4.0f32..6.0)).collect()).collect();
    for (name, ms) in [("bcjr_g537_1024_linear", MaxStar::LINEAR), ("bcjr_g537_1024_exact", MaxStar::Exact)] {
        let mut dec = BcjrDecoder::new(&t, ms).unwrap();
        let mut ext = vec![Vec::new(); 3];
        c.bench_function(name, |b| b.iter(|| dec.decode(black_box(&obs), true, &mut ext, None).unwrap()));
    }
}

fn transfer(c: &mut Criterion) {
    let tr = Trellis::new(&GeneratorSpec::g15_13()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // fresh functions per batch so the memo does not hide the solve
    c.bench_function("exact_transfer_g15_13", |b| {
        b.iter_batched(
            || (TransferFn::new(&tr, TransferMode::ExactSubset).unwrap(), [rng.gen::<f64>(), rng.gen::<f64>()]),
            |(tf, p)| tf.eval(&p).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn de_step(c: &mut Criterion) {
    let spec = EnsembleSpec::hsc_bcc(GeneratorSpec::g537(), 2, 20, 8);
    let graph = CouplingGraph::build(&spec).unwrap();
    let tf = TransferFn::new(&Trellis::new(&spec.generator).unwrap(), TransferMode::ExactSubset).unwrap();
    let de = ErasureDe::new(&graph, &tf).unwrap();
    let ch = ChannelErasure::unpunctured(0.65);
    let mut s = ErasureState::new(&graph);
    for _ in 0..5 {
        s = de.step(&s, ch).unwrap();
    }
    c.bench_function("de_step_hsc_bcc_t20", |b| b.iter(|| de.step(black_box(&s), ch).unwrap()));
}

fn window_trial(c: &mut Criterion) {
    let setup = TrialSetup {
        spec: EnsembleSpec::hsc_bcc(GeneratorSpec::g537(), 2, 6, 256),
        rate: None,
        window: WindowConfig::new(3, 5, Sweep::RoundTrip),
        fresh_interleavers: false,
    };
    let mut trial = 0;
    c.bench_function("window_trial_hsc_bcc_t6_k256", |b| {
        b.iter(|| {
            trial += 1;
            setup.run_trial(ChannelParams::Awgn { ebn0_db: 1.0 }, 1, trial, false).unwrap()
        })
    });
}

criterion_group!(benches, bcjr, transfer, de_step, window_trial);
criterion_main!(benches);

//! Structural invariants of trellises, chain encoders and density evolution.

use hsctc::ensemble::{InterleaverSet, Permutation};
use hsctc::erasure::{head_tail_thresholds, ChannelErasure, ErasureDe, ErasureState, Schedule, ThresholdConfig, TransferFn, TransferMode};
use hsctc::{CouplingGraph, EnsembleKind, EnsembleSpec, GeneratorSpec, Rational, Trellis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn generators() -> Vec<GeneratorSpec> {
    vec![GeneratorSpec::g457(), GeneratorSpec::g537(), GeneratorSpec::g357(), GeneratorSpec::g15_13()]
}

fn all_kinds(t: usize, k: usize) -> Vec<EnsembleSpec> {
    let g2 = GeneratorSpec::g537;
    vec![
        EnsembleSpec::type1(g2(), t, k),
        EnsembleSpec::type2(g2(), 1, t, k),
        EnsembleSpec::type2(g2(), 2, t, 2 * k),
        EnsembleSpec::sc_pcc(GeneratorSpec::g15_13(), 1, t, k),
        EnsembleSpec::single_sided(GeneratorSpec::g15_13(), vec![0.75, 0.25], t, k),
        EnsembleSpec::hsc_pcc(GeneratorSpec::g15_13(), t, k),
        EnsembleSpec::hsc_bcc(g2(), 2, t, k),
        EnsembleSpec::hsc_bcc(g2(), 3, t, k),
        EnsembleSpec::variant(g2(), t, k),
    ]
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..2)).collect()
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// Parity of a rate-1/2 code `num/den` (octal, first digit = D^0 side) by
/// long division of the impulse response and convolution.
fn division_parity(u: &[u8], num: u32, den: u32, nu: usize) -> Vec<u8> {
    let coef = |g: u32| (0..=nu).map(|j| (g >> (nu - j) & 1) as u8).collect::<Vec<_>>();
    let (n, d) = (coef(num), coef(den));
    let len = u.len();
    let mut rem: Vec<u8> = (0..len + nu + 1).map(|j| if j <= nu { n[j] } else { 0 }).collect();
    let mut h = vec![0u8; len];
    for i in 0..len {
        h[i] = rem[i];
        if h[i] == 1 {
            for j in 0..=nu {
                rem[i + j] ^= d[j];
            }
        }
    }
    (0..len).map(|i| (0..=i).fold(0, |acc, j| acc ^ (u[j] & h[i - j]))).collect()
}

#[test]
fn hsc_pcc_small_chain_matches_hand_walk() {
    let spec = EnsembleSpec::hsc_pcc(GeneratorSpec::g15_13(), 2, 4);
    let graph = CouplingGraph::build(&spec).unwrap();
    let ils = InterleaverSet::identity(&graph.interleavers);
    let frame = hsctc::encode_chain(&spec, &[1, 0, 1, 1, 0, 0], &ils).unwrap();
    let hand: [[u8; 4]; 4] = [[1, 1, 1, 1], [1, 0, 1, 1], [0, 0, 1, 0], [0, 0, 0, 0]];
    let inputs: [[u8; 4]; 4] = [[1, 0, 0, 0], [1, 1, 1, 0], [0, 0, 1, 1], [0, 0, 0, 0]];
    for tau in 0..4 {
        assert_eq!(frame.parity(tau), hand[tau], "tau = {}", tau + 1);
        assert_eq!(division_parity(&inputs[tau], 0o15, 0o13, 3), hand[tau]);
    }
}

#[test]
fn hsc_bcc_matches_direct_encoder() {
    let (t, k) = (6, 16);
    let h = k / 2;
    for delta in 2..=4 {
        for g in [GeneratorSpec::g537(), GeneratorSpec::g457()] {
            let spec = EnsembleSpec::hsc_bcc(g.clone(), delta, t, k);
            let graph = CouplingGraph::build(&spec).unwrap();
            let ils = InterleaverSet::generate(delta as u64, &graph.interleavers);
            let (p1, p2) = (ils.get("pi1").unwrap(), ils.get("pi2").unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(delta as u64);
            let n = 2 * t;
            let info = random_bits(&mut rng, (n - delta) * h);
            let frame = hsctc::encode_chain(&spec, &info, &ils).unwrap();

            let tr = Trellis::new(&g).unwrap();
            let u = |tau: i64| -> Vec<u8> {
                if tau >= 1 && tau as usize <= n - delta {
                    info[(tau as usize - 1) * h..tau as usize * h].to_vec()
                } else {
                    vec![0; h]
                }
            };
            let mut v: Vec<Vec<u8>> = Vec::new();
            for tau in 1..=n as i64 {
                let mut u1 = u(tau);
                u1.extend(p1.apply(&u(tau - delta as i64 + 1)));
                let src = tau - delta as i64;
                let prev = if src >= 1 { v[src as usize - 1].clone() } else { vec![0; k] };
                let (par, _) = tr.encode(&[u1, p2.apply(&prev)], 0).unwrap();
                assert_eq!(frame.parity(tau as usize - 1), par, "delta {delta} tau {tau}");
                v.push(par);
            }
        }
    }
}

#[test]
fn type1_matches_direct_encoder() {
    let (t, k) = (5, 12);
    let spec = EnsembleSpec::type1(GeneratorSpec::g457(), t, k);
    let graph = CouplingGraph::build(&spec).unwrap();
    let ils = InterleaverSet::generate(9, &graph.interleavers);
    let pi = |n: &str| ils.get(n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let info = random_bits(&mut rng, t * k);
    let frame = hsctc::encode_chain(&spec, &info, &ils).unwrap();
    let tr = Trellis::new(&GeneratorSpec::g457()).unwrap();
    let (mut vu, mut vl) = (vec![0u8; k], vec![0u8; k]);
    for s in 0..t {
        let u = &info[s * k..(s + 1) * k];
        let (nu, _) = tr.encode(&[u.to_vec(), pi("pi2").apply(&vl)], 0).unwrap();
        let (nl, _) = tr.encode(&[pi("pi1").apply(u), pi("pi3").apply(&vu)], 0).unwrap();
        assert_eq!(frame.parity(2 * s), nu);
        assert_eq!(frame.parity(2 * s + 1), nl);
        (vu, vl) = (nu, nl);
    }
}

/// Folded HSC-PCC against single-sided SC-PCC with `lambda = (0.5, 0.5)`:
/// upper node `t` is half instant `2t - 1`, lower node `t` is `2t`.
fn single_sided_identification(ils: &InterleaverSet, k: usize) -> InterleaverSet {
    let h = k / 2;
    let p1 = ils.get("pi1").unwrap();
    let upper: Vec<u32> = (0..k).map(|i| if i < h { i } else { h + p1.source(i - h) } as u32).collect();
    let lower: Vec<u32> = (0..k).map(|i| if i < h { h + i } else { p1.source(i - h) } as u32).collect();
    let mut out = InterleaverSet::default();
    out.insert("pi", Permutation::from_vec(upper).unwrap());
    out.insert("pi_lower", Permutation::from_vec(lower).unwrap());
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn trellis_encoding_is_linear(gen in 0usize..4, seed in any::<u64>(), n in 1usize..80) {
        let g = &generators()[gen];
        let tr = Trellis::new(g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Vec<u8>> = (0..tr.num_inputs()).map(|_| random_bits(&mut rng, n)).collect();
        let b: Vec<Vec<u8>> = (0..tr.num_inputs()).map(|_| random_bits(&mut rng, n)).collect();
        let ab: Vec<Vec<u8>> = a.iter().zip(&b).map(|(x, y)| xor(x, y)).collect();
        let (pa, sa) = tr.encode(&a, 0).unwrap();
        let (pb, sb) = tr.encode(&b, 0).unwrap();
        let (pab, sab) = tr.encode(&ab, 0).unwrap();
        prop_assert_eq!(pab, xor(&pa, &pb));
        prop_assert_eq!(sab, sa ^ sb);
    }

    #[test]
    fn rate_half_parity_matches_division(seed in any::<u64>(), n in 1usize..64) {
        let tr = Trellis::new(&GeneratorSpec::g15_13()).unwrap();
        let u = random_bits(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let (p, _) = tr.encode(&[&u], 0).unwrap();
        prop_assert_eq!(p, division_parity(&u, 0o15, 0o13, 3));
    }

    #[test]
    fn re_encoding_reproduces_parity(kind in 0usize..9, seed in any::<u64>(), t in 3usize..7) {
        let spec = all_kinds(t, 24).swap_remove(kind);
        let graph = CouplingGraph::build(&spec).unwrap();
        let ils = InterleaverSet::generate(seed, &graph.interleavers);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let info = random_bits(&mut rng, graph.free_info_bits());
        let frame = hsctc::encode_chain(&spec, &info, &ils).unwrap();
        let tr = Trellis::new(&spec.generator).unwrap();
        // gather each port from its segments with whole-block permutations
        for (f, node) in graph.factors.iter().enumerate() {
            let inputs: Vec<Vec<u8>> = node.ports[..node.parity_port()]
                .iter()
                .map(|port| {
                    let flat: Vec<u8> = port
                        .segments
                        .iter()
                        .flat_map(|s| match s.interleaver.as_deref().and_then(|n| ils.get(n)) {
                            Some(p) => p.apply(&frame.bits[s.piece]),
                            None => frame.bits[s.piece].clone(),
                        })
                        .collect();
                    // an optional interleaver left out of the set is the identity
                    match port.interleaver.as_deref().and_then(|n| ils.get(n)) {
                        Some(p) => p.apply(&flat),
                        None => flat,
                    }
                })
                .collect();
            let (parity, _) = tr.encode(&inputs, 0).unwrap();
            prop_assert_eq!(parity, frame.parity(f), "{} factor {}", spec.kind, f);
        }
        // termination blocks stay zero
        for (p, piece) in graph.pieces.iter().enumerate() {
            if piece.observation == hsctc::ensemble::Observation::Known {
                prop_assert!(frame.bits[p].iter().all(|&b| b == 0));
            }
        }
    }

    #[test]
    fn folded_hsc_pcc_equals_single_sided(seed in any::<u64>(), t in 1usize..6) {
        let k = 16;
        let folded = EnsembleSpec::hsc_pcc(GeneratorSpec::g15_13(), t, k);
        let single = EnsembleSpec::single_sided(GeneratorSpec::g15_13(), vec![0.5, 0.5], t, k);
        let gf = CouplingGraph::build(&folded).unwrap();
        let ils = InterleaverSet::generate(seed, &gf.interleavers);
        let info = random_bits(&mut ChaCha8Rng::seed_from_u64(seed), gf.free_info_bits());
        let a = hsctc::encode_chain(&folded, &info, &ils).unwrap();
        let b = hsctc::encode_chain(&single, &info, &single_sided_identification(&ils, k)).unwrap();
        prop_assert_eq!(a.transmitted(), b.transmitted());
        prop_assert_eq!(a.graph.factors.len(), b.graph.factors.len());
        for f in 0..a.graph.factors.len() {
            prop_assert_eq!(a.parity(f), b.parity(f));
        }
    }

    #[test]
    fn frames_are_deterministic(kind in 0usize..9, seed in any::<u64>()) {
        let spec = all_kinds(4, 24).swap_remove(kind);
        let graph = CouplingGraph::build(&spec).unwrap();
        let info = random_bits(&mut ChaCha8Rng::seed_from_u64(seed), graph.free_info_bits());
        let a = hsctc::encode_chain(&spec, &info, &InterleaverSet::generate(seed, &graph.interleavers)).unwrap();
        let b = hsctc::encode_chain(&spec, &info, &InterleaverSet::generate(seed, &graph.interleavers)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn next_state_is_a_permutation_for_every_input() {
    for g in generators() {
        let tr = Trellis::new(&g).unwrap();
        for u in 0..tr.num_tuples() {
            let mut seen = vec![false; tr.num_states()];
            for s in 0..tr.num_states() {
                seen[tr.next_state(s, u)] = true;
            }
            assert!(seen.iter().all(|&x| x), "{} input {u}", g.label);
        }
    }
}

fn exact(g: &GeneratorSpec) -> TransferFn {
    TransferFn::new(&Trellis::new(g).unwrap(), TransferMode::ExactSubset).unwrap()
}

#[test]
fn folded_hsc_pcc_density_evolution_equals_single_sided() {
    let tf = exact(&GeneratorSpec::g15_13());
    let gf = CouplingGraph::build(&EnsembleSpec::hsc_pcc(GeneratorSpec::g15_13(), 8, 8)).unwrap();
    let gs = CouplingGraph::build(&EnsembleSpec::single_sided(GeneratorSpec::g15_13(), vec![0.5, 0.5], 8, 8)).unwrap();
    let (df, ds) = (ErasureDe::new(&gf, &tf).unwrap(), ErasureDe::new(&gs, &tf).unwrap());
    let pf: Vec<usize> = gf.info_by_position().concat();
    let ps: Vec<usize> = gs.info_by_position().concat();
    assert_eq!(pf.len(), ps.len());
    for ch in [ChannelErasure::unpunctured(0.64), ChannelErasure { eps: 0.45, eps_v: 0.72 }] {
        let (mut sf, mut ss) = (ErasureState::new(&gf), ErasureState::new(&gs));
        for _ in 0..60 {
            sf = df.step(&sf, ch).unwrap();
            ss = ds.step(&ss, ch).unwrap();
            for (&a, &b) in pf.iter().zip(&ps) {
                let (x, y) = (df.piece_app(&sf, a, ch), ds.piece_app(&ss, b, ch));
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn density_evolution_is_monotone_in_iterations() {
    for spec in all_kinds(6, 24) {
        let tf = exact(&spec.generator);
        let g = CouplingGraph::build(&spec).unwrap();
        let de = ErasureDe::new(&g, &tf).unwrap();
        for eps in [0.3, 0.62, 0.7] {
            let ch = ChannelErasure::unpunctured(eps);
            let mut s = ErasureState::new(&g);
            for _ in 0..40 {
                let next = de.step(&s, ch).unwrap();
                for (a, b) in next.ext.iter().flatten().zip(s.ext.iter().flatten()) {
                    assert!(*a <= *b + 1e-12, "{} eps {eps}: {a} > {b}", spec.kind);
                }
                s = next;
            }
        }
    }
}

#[test]
fn perfect_channel_converges_in_one_step() {
    for spec in all_kinds(4, 24) {
        let tf = exact(&spec.generator);
        let g = CouplingGraph::build(&spec).unwrap();
        let de = ErasureDe::new(&g, &tf).unwrap();
        let ch = ChannelErasure::unpunctured(0.0);
        let s = de.step(&ErasureState::new(&g), ch).unwrap();
        assert!(s.ext.iter().flatten().all(|&x| x == 0.0), "{}", spec.kind);
    }
}

#[test]
fn type1_upper_and_lower_evolve_symmetrically() {
    let tf = exact(&GeneratorSpec::g457());
    let g = CouplingGraph::build(&EnsembleSpec::type1(GeneratorSpec::g457(), 8, 8)).unwrap();
    let de = ErasureDe::new(&g, &tf).unwrap();
    let ch = ChannelErasure::unpunctured(0.66);
    let mut s = ErasureState::new(&g);
    for _ in 0..30 {
        s = de.step(&s, ch).unwrap();
        for t in 1..=8 {
            let u = g.factor_at(t, hsctc::ensemble::Side::Upper).unwrap();
            let l = g.factor_at(t, hsctc::ensemble::Side::Lower).unwrap();
            for port in 0..3 {
                let (a, b) = (de.port_apriori(&s, u, port, ch), de.port_apriori(&s, l, port, ch));
                assert!((a - b).abs() < 1e-12, "t {t} port {port}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn thresholds_decrease_with_rate() {
    let cfg = ThresholdConfig::default();
    let rates = [Rational::new(1, 3), Rational::new(1, 2), Rational::new(2, 3), Rational::new(9, 10)];
    for spec in [EnsembleSpec::hsc_bcc(GeneratorSpec::g537(), 2, 10, 8), EnsembleSpec::type1(GeneratorSpec::g457(), 10, 8)] {
        let th: Vec<f64> = rates.iter().map(|&r| head_tail_thresholds(&spec, r, &cfg).unwrap().eps_bp_window).collect();
        assert!(th.windows(2).all(|w| w[0] > w[1]), "{}: {th:?}", spec.kind);
    }
}

#[test]
fn full_chain_converges_between_head_and_tail() {
    let cfg = ThresholdConfig::default();
    let spec = EnsembleSpec::type1(GeneratorSpec::g457(), 20, 8);
    let r = head_tail_thresholds(&spec, Rational::new(1, 3), &cfg).unwrap();
    assert!(r.eps_h < r.eps_t);
    assert_eq!(r.eps_bp_full, r.eps_t);
    let tf = exact(&spec.generator);
    let g = CouplingGraph::build(&spec).unwrap();
    let de = ErasureDe::new(&g, &tf).unwrap();
    let mid = 0.5 * (r.eps_h + r.eps_t);
    let run = de.run(ChannelErasure::unpunctured(mid), Schedule::Full, 20_000, 1e-6, false).unwrap();
    assert!(run.converged, "full chain at {mid}: {:?}", run.final_app);
    let head_only = de.run(ChannelErasure::unpunctured(mid), Schedule::Window(10), 20_000, 1e-6, false).unwrap();
    assert!(!head_only.converged);
    let above = de.run(ChannelErasure::unpunctured(r.eps_t + 2e-3), Schedule::Full, 20_000, 1e-6, false).unwrap();
    assert!(!above.converged);
}

/// BP threshold of the uncoupled parallel concatenation from the scalar
/// recursion `p_U = F1(eps p_L, eps_v)`, `p_L = F1(eps p_U, eps_v)`.
fn uncoupled_pcc_threshold(tf: &TransferFn, rate: Rational) -> f64 {
    let converges = |eps: f64| {
        let ev = hsctc::erasure::punctured_parity_erasure(eps, rate).unwrap();
        let (mut pu, mut pl) = (1.0f64, 1.0f64);
        for _ in 0..4000 {
            let nu = tf.eval(&[eps * pl, ev]).unwrap()[0];
            let nl = tf.eval(&[eps * nu, ev]).unwrap()[0];
            if eps * nu * nl < 1e-6 {
                return true;
            }
            if (nu - pu).abs().max((nl - pl).abs()) < 1e-13 {
                return false;
            }
            (pu, pl) = (nu, nl);
        }
        false
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-5 {
        let mid = 0.5 * (lo + hi);
        if converges(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn zero_coupling_single_sided_equals_uncoupled_recursion() {
    let g = GeneratorSpec::g15_13();
    let tf = exact(&g);
    let cfg = ThresholdConfig::default();
    let spec = EnsembleSpec::single_sided(g.clone(), vec![1.0, 0.0], 10, 1000);
    for rate in [Rational::new(1, 3), Rational::new(1, 2), Rational::new(4, 5)] {
        let graph_th = head_tail_thresholds(&spec, rate, &cfg).unwrap().eps_bp_full;
        let scalar = uncoupled_pcc_threshold(&tf, rate);
        assert!((graph_th - scalar).abs() < 1e-4, "R = {rate}: {graph_th} vs {scalar}");
    }
}

/// 375 comparisons per generator: a handful of 3-sigma excursions is
/// expected by chance, so the check bounds their count and the worst one.
#[test]
fn monte_carlo_transfer_agrees_with_exact() {
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    for g in [GeneratorSpec::g457(), GeneratorSpec::g537()] {
        let tr = Trellis::new(&g).unwrap();
        let ex = TransferFn::new(&tr, TransferMode::ExactSubset).unwrap();
        let mc = TransferFn::new(&tr, TransferMode::MonteCarlo { samples: 200_000, seed: 17 }).unwrap();
        let mut z = Vec::new();
        for &a in &grid {
            for &b in &grid {
                for &q in &grid {
                    let p = [a, b, q];
                    let e = ex.eval(&p).unwrap();
                    let m = mc.eval_with_error(&p).unwrap();
                    for i in 0..3 {
                        if m.std_err[i] == 0.0 {
                            assert_eq!(m.extrinsic[i], e[i]);
                        } else {
                            z.push((m.extrinsic[i] - e[i]).abs() / m.std_err[i]);
                        }
                    }
                }
            }
        }
        let beyond = z.iter().filter(|&&x| x > 3.0).count();
        let worst = z.iter().fold(0.0f64, |a, &b| a.max(b));
        assert!(beyond <= 4 && worst < 4.5, "{}: {beyond} of {} beyond 3 sigma, worst {worst:.2}", g.label, z.len());
    }
}

#[test]
fn every_kind_is_covered() {
    let kinds: Vec<EnsembleKind> = all_kinds(4, 24).iter().map(|s| s.kind).collect();
    for k in EnsembleKind::ALL {
        assert!(kinds.contains(&k), "{k}");
    }
}

#[test]
fn shipped_generator_file_matches_builtins() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/generators.txt")).unwrap();
    assert_eq!(GeneratorSpec::parse_file(&text).unwrap(), generators());
}

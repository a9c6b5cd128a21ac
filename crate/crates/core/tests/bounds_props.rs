mod common;

use common::{coupling_vertices, entropy_bits, random_joint};
use pidq::bounds::{
    min_conditional_mi, min_entropy_coupling_greedy, performance_bounds, synergy_bounds,
    DisagreementConfig,
};
use pidq::dist::{conditional_mutual_info, pairwise_marginals};
use pidq::solver::pid;
use pidq::SolverConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn bounds_sandwich_synergy() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = SolverConfig::default();
    let dcfg = DisagreementConfig::default();
    for k in 0..100 {
        let (n1, n2) = if k % 2 == 0 { (2, 2) } else { (3, 3) };
        let p = random_joint(&mut rng, n1, n2, 2);
        let s = pid(&p, &cfg).unwrap().s;
        let b = synergy_bounds(&pairwise_marginals(&p, true), &cfg, &dcfg).unwrap();
        assert!(b.s_r_lower <= s + 1e-6, "S_R {} > S {}", b.s_r_lower, s);
        assert!(s <= b.s_upper + 1e-6, "S {} > upper {}", s, b.s_upper);
        assert!(b.min_cmi <= conditional_mutual_info(&p) + 1e-9);
        let perf = b.performance(2).unwrap();
        assert!(perf.p_lower <= perf.p_upper);
    }
}

#[test]
fn min_cmi_dual_trace_rises_to_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let cfg = SolverConfig::default();
    for _ in 0..30 {
        let (n1, n2, ny) = (rng.random_range(2..5), rng.random_range(2..5), rng.random_range(2..4));
        let p = random_joint(&mut rng, n1, n2, ny);
        let res = min_conditional_mi(&pairwise_marginals(&p, true), &cfg).unwrap();
        assert!(res.converged);
        assert!(res.max_marginal_violation <= 1e-8);
        for w in res.dual_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        assert!((res.dual_trace.last().unwrap() + res.r_star.entropy()).abs() < 1e-6);
    }
}

#[test]
fn greedy_coupling_is_optimal_on_two_by_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let a: f64 = rng.random();
        let b: f64 = rng.random();
        let (mu, nu) = ([a, 1.0 - a], [b, 1.0 - b]);
        let greedy = min_entropy_coupling_greedy(&mu, &nu).unwrap().entropy;
        let best = coupling_vertices(&mu, &nu)
            .iter()
            .map(|v| entropy_bits(v))
            .fold(f64::INFINITY, f64::min);
        assert!((greedy - best).abs() < 1e-12, "{greedy} vs {best}");
    }
}

#[test]
fn greedy_coupling_three_by_two_fixture() {
    let (mu, nu) = ([0.5, 0.25, 0.25], [0.5, 0.5]);
    let vertices = coupling_vertices(&mu, &nu);
    assert!(!vertices.is_empty());
    let best = vertices.iter().map(|v| entropy_bits(v)).fold(f64::INFINITY, f64::min);
    let greedy = min_entropy_coupling_greedy(&mu, &nu).unwrap().entropy;
    assert!((best - 1.5).abs() < 1e-12);
    assert!((greedy - best).abs() < 1e-12);
}

#[test]
fn performance_bounds_are_ordered() {
    for ny in 2..=32usize {
        let log_ny = (ny as f64).log2();
        for hi in 0..=20 {
            let h = log_ny * hi as f64 / 20.0;
            for ii in 0..=20 {
                let b = performance_bounds(h * ii as f64 / 20.0, h, ny).unwrap();
                assert!(b.p_lower <= b.p_upper + 1e-15);
                assert!((0.0..=1.0).contains(&b.p_lower) && (0.0..=1.0).contains(&b.p_upper));
            }
        }
    }
}

fn distribution(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("all zero", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|v| v / s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn greedy_coupling_invariants(mu in distribution(1..12), nu in distribution(1..12)) {
        let c = min_entropy_coupling_greedy(&mu, &nu).unwrap();
        for (s, t) in c.joint.row_sums().iter().zip(&mu) {
            prop_assert!((s - t).abs() <= 1e-9);
        }
        for (s, t) in c.joint.col_sums().iter().zip(&nu) {
            prop_assert!((s - t).abs() <= 1e-9);
        }
        let (hm, hn) = (entropy_bits(&mu), entropy_bits(&nu));
        prop_assert!(c.entropy >= hm.max(hn) - 1e-9);
        prop_assert!(c.entropy <= hm + hn + 1e-9);
    }
}

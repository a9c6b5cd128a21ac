mod common;

use common::{brute_q_star_222, random_joint};
use pidq::dist::{co_information, pairwise_marginals, total_information};
use pidq::objective::{
    conditional_entropy, conditional_entropy_gradient, conditional_mi, conditional_mi_gradient,
};
use pidq::solver::{compute_pid, pid, pid_from_samples, solve_q_star, SolveTrace};
use pidq::{Cardinalities, DiscretizeConfig, Features, JointDist, SampleTable, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gate(f: impl Fn(usize, usize) -> usize) -> JointDist {
    JointDist::from_fn(Cardinalities::new(2, 2, 2).unwrap(), |a, b, y| {
        if f(a, b) == y {
            0.25
        } else {
            0.0
        }
    })
    .unwrap()
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let h = 1e-6 * x[i].max(1e-3);
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[i] += h;
    minus[i] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (n1, n2, ny) = (rng.random_range(2..4), rng.random_range(2..4), rng.random_range(2..4));
        let p = random_joint(&mut rng, n1, n2, ny);
        let card = p.card();
        let x = p.probs();
        let g_h = conditional_entropy_gradient(card, x, 1e-300);
        let g_i = conditional_mi_gradient(card, x, 1e-300);
        for i in 0..x.len() {
            let fd_h = central_difference(|q| conditional_entropy(card, q), x, i);
            let fd_i = central_difference(|q| conditional_mi(card, q), x, i);
            assert!((g_h[i] - fd_h).abs() <= 1e-5 * g_h[i].abs().max(1.0), "{} vs {}", g_h[i], fd_h);
            assert!((g_i[i] - fd_i).abs() <= 1e-5 * g_i[i].abs().max(1.0), "{} vs {}", g_i[i], fd_i);
        }
    }
}

fn check_trace(trace: &SolveTrace) {
    for w in trace.objective_per_sweep.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "objective fell from {} to {}", w[0], w[1]);
    }
    assert!(trace.max_marginal_violation <= 1e-8);
}

#[test]
fn solver_traces_are_monotone_and_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = SolverConfig::default();
    for _ in 0..40 {
        let (n1, n2, ny) = (rng.random_range(2..5), rng.random_range(2..5), rng.random_range(2..4));
        let p = random_joint(&mut rng, n1, n2, ny);
        let (_, trace) = solve_q_star(&pairwise_marginals(&p, false), &cfg).unwrap();
        assert!(trace.converged);
        check_trace(&trace);
    }
}

#[test]
fn restarts_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let p = random_joint(&mut rng, 3, 3, 2);
        let a = pid(&p, &SolverConfig { seed: 1, init_jitter: 0.5, ..SolverConfig::default() }).unwrap();
        let b = pid(&p, &SolverConfig { seed: 2, init_jitter: 0.5, ..SolverConfig::default() }).unwrap();
        for (x, y) in a.components().iter().zip(b.components()).take(3) {
            assert!((x - y).abs() < 1e-4, "{x} vs {y}");
        }
    }
}

#[test]
fn gates_match_grid_search() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut cases = vec![gate(|a, b| a & b), gate(|a, b| a | b), gate(|a, b| a ^ b), gate(|a, _| a)];
    cases.extend((0..6).map(|_| random_joint(&mut rng, 2, 2, 2)));
    for p in cases {
        let m = pairwise_marginals(&p, false);
        let (q, trace) = solve_q_star(&m, &cfg).unwrap();
        let brute = brute_q_star_222(&m);
        let card = p.card();
        let (hq, hb) = (conditional_entropy(card, q.probs()), conditional_entropy(card, &brute));
        assert!(hq >= hb - 1e-5, "solver {hq} below grid {hb}");
        let got = compute_pid(&p, &q, &trace, &cfg).unwrap();
        let brute_q = JointDist::from_weights(card, brute).unwrap();
        let want = compute_pid(&p, &brute_q, &trace, &cfg).unwrap();
        for (g, w) in got.components().iter().zip(want.components()) {
            assert!((g - w).abs() < 1e-4, "{g} vs {w}");
        }
    }
}

#[test]
fn decomposition_identities_on_random_joints() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let cfg = SolverConfig::default();
    for k in 0..200 {
        let (n1, n2, ny) = [(2, 2, 2), (3, 2, 2), (3, 3, 2), (2, 3, 3)][k % 4];
        let p = random_joint(&mut rng, n1, n2, ny);
        let r = pid(&p, &cfg).unwrap();
        assert!(r.components().iter().all(|&v| v >= -1e-6), "{r:?}");
        let sum: f64 = r.components().iter().sum();
        assert!((sum - total_information(&p)).abs() <= 1e-6);
        assert!((r.s - (r.r - co_information(&p))).abs() <= 1e-4);
    }
}

#[test]
fn swapping_modalities_swaps_unique_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let cfg = SolverConfig::default();
    for _ in 0..10 {
        let p = random_joint(&mut rng, 3, 2, 2);
        let a = pid(&p, &cfg).unwrap();
        let b = pid(&p.swap_modalities(), &cfg).unwrap();
        assert!((a.r - b.r).abs() < 1e-5);
        assert!((a.u1 - b.u2).abs() < 1e-5);
        assert!((a.u2 - b.u1).abs() < 1e-5);
        assert!((a.s - b.s).abs() < 1e-5);
    }
}

fn sampled_gate(f: impl Fn(usize, usize) -> usize, n: usize, seed: u64) -> SampleTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x1, mut x2, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let (a, b) = (rng.random_range(0..2usize), rng.random_range(0..2usize));
        x1.push(a as f64);
        x2.push(b as f64);
        y.push(f(a, b));
    }
    SampleTable::new(
        Features::from_scalars(x1).unwrap(),
        Features::from_scalars(x2).unwrap(),
        y,
        Some(2),
    )
    .unwrap()
}

#[test]
fn sampled_gates_approach_exact_values() {
    let dcfg = DiscretizeConfig {
        bins: pidq::discretize::BinCount::Fixed(2),
        ..DiscretizeConfig::default()
    };
    let cfg = SolverConfig::default();
    let gates: [(fn(usize, usize) -> usize, u64); 2] = [(|a, b| a & b, 1), (|a, b| a ^ b, 2)];
    for (f, seed) in gates {
        let exact = pid(&gate(f), &cfg).unwrap();
        let est = pid_from_samples(&sampled_gate(f, 10_000, seed), &dcfg, &cfg).unwrap();
        for (e, x) in est.components().iter().zip(exact.components()) {
            assert!((e - x).abs() < 0.02, "{e} vs {x}");
        }
    }
}

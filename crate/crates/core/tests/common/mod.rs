#![allow(dead_code)]

use pidq::objective::conditional_entropy;
use pidq::{Cardinalities, JointDist, PairwiseMarginals};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Dirichlet(1, ..., 1) draw, i.e. uniform on the simplex.
pub fn random_joint(rng: &mut impl Rng, n1: usize, n2: usize, ny: usize) -> JointDist {
    let card = Cardinalities::new(n1, n2, ny).unwrap();
    let w: Vec<f64> = (0..card.cells()).map(|_| Exp1.sample(rng)).collect();
    JointDist::from_weights(card, w).unwrap()
}

/// Maximizes `H_q(Y | X1, X2)` over 2x2x2 joints with the given `p(x1,y)`
/// and `p(x2,y)` by grid search over the one free cell of each y-slice,
/// zooming in around the best point. Returns the maximizer.
pub fn brute_q_star_222(m: &PairwiseMarginals) -> Vec<f64> {
    let card = Cardinalities::new(2, 2, 2).unwrap();
    let (a, b) = (m.m1y(), m.m2y());
    // slice y: [[t, a0 - t], [b0 - t, a1 - b0 + t]]
    let range = |y: usize| {
        let (a0, a1, b0) = (a.get(0, y), a.get(1, y), b.get(0, y));
        ((b0 - a1).max(0.0), a0.min(b0))
    };
    let build = |t: [f64; 2]| {
        let mut q = vec![0.0; 8];
        for y in 0..2 {
            let (a0, a1, b0) = (a.get(0, y), a.get(1, y), b.get(0, y));
            q[card.index(0, 0, y)] = t[y];
            q[card.index(0, 1, y)] = (a0 - t[y]).max(0.0);
            q[card.index(1, 0, y)] = (b0 - t[y]).max(0.0);
            q[card.index(1, 1, y)] = (a1 - b0 + t[y]).max(0.0);
        }
        q
    };
    let mut lo = [range(0).0, range(1).0];
    let mut hi = [range(0).1, range(1).1];
    let mut best = (f64::NEG_INFINITY, [lo[0], lo[1]]);
    let steps = 200;
    for _ in 0..10 {
        for i in 0..=steps {
            for j in 0..=steps {
                let t = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / steps as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / steps as f64,
                ];
                let v = conditional_entropy(card, &build(t));
                if v > best.0 {
                    best = (v, t);
                }
            }
        }
        let (r0, r1) = (range(0), range(1));
        let w = [(hi[0] - lo[0]) / 100.0, (hi[1] - lo[1]) / 100.0];
        lo = [(best.1[0] - w[0]).max(r0.0), (best.1[1] - w[1]).max(r1.0)];
        hi = [(best.1[0] + w[0]).min(r0.1), (best.1[1] + w[1]).min(r1.1)];
        best.0 = f64::NEG_INFINITY;
        best.1 = [best.1[0].clamp(lo[0], hi[0]), best.1[1].clamp(lo[1], hi[1])];
    }
    build(best.1)
}

/// All vertices of the transportation polytope with marginals `mu`, `nu`:
/// basic feasible solutions on supports of size `m + n - 1`.
pub fn coupling_vertices(mu: &[f64], nu: &[f64]) -> Vec<Vec<f64>> {
    let (m, n) = (mu.len(), nu.len());
    let cells = m * n;
    let size = m + n - 1;
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mask in 0u32..(1 << cells) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let support: Vec<usize> = (0..cells).filter(|c| mask >> c & 1 == 1).collect();
        // equations: row sums then column sums, unknowns on the support
        let rows = m + n;
        let mut a = vec![vec![0.0; size + 1]; rows];
        for (k, &c) in support.iter().enumerate() {
            a[c / n][k] = 1.0;
            a[m + c % n][k] = 1.0;
        }
        for i in 0..m {
            a[i][size] = mu[i];
        }
        for j in 0..n {
            a[m + j][size] = nu[j];
        }
        let Some(x) = solve_least(&mut a, size) else {
            continue;
        };
        if x.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut full = vec![0.0; cells];
        for (k, &c) in support.iter().enumerate() {
            full[c] = x[k].max(0.0);
        }
        let ok = (0..m).all(|i| (full[i * n..(i + 1) * n].iter().sum::<f64>() - mu[i]).abs() < 1e-9)
            && (0..n).all(|j| ((0..m).map(|i| full[i * n + j]).sum::<f64>() - nu[j]).abs() < 1e-9);
        if ok {
            out.push(full);
        }
    }
    out
}

/// Gauss-Jordan on an overdetermined consistent system; `None` when the
/// support does not determine a unique solution.
fn solve_least(a: &mut [Vec<f64>], unknowns: usize) -> Option<Vec<f64>> {
    let rows = a.len();
    let mut r = 0;
    for c in 0..unknowns {
        let p = (r..rows).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(r, p);
        let d = a[r][c];
        a[r].iter_mut().for_each(|v| *v /= d);
        for i in 0..rows {
            if i != r && a[i][c] != 0.0 {
                let f = a[i][c];
                let pivot_row = a[r].clone();
                a[i].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
        r += 1;
    }
    if (r..rows).any(|i| a[i][unknowns].abs() > 1e-9) {
        return None;
    }
    Some((0..unknowns).map(|c| a[c][unknowns]).collect())
}

pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.log2()).sum::<f64>()
}

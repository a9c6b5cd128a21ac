use pidq::discretize::{
    bin_scalar_features, discretize, empirical_joint, kmeans_discretize, BinCount, Method,
};
use pidq::{Cardinalities, DiscretizeConfig, Features, SampleTable};
use proptest::prelude::*;

const FIXTURE: [[f64; 2]; 12] = [
    [0.0, 0.1],
    [0.3, -0.2],
    [0.6, 0.4],
    [-0.4, 0.2],
    [2.1, 2.0],
    [2.6, 1.7],
    [1.5, 2.4],
    [2.2, 2.9],
    [-1.8, 2.2],
    [-2.4, 1.6],
    [-1.1, 1.4],
    [-2.0, 2.8],
];

fn sse(points: &[[f64; 2]], labels: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&[f64; 2]> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
        let n = members.len() as f64;
        let cx = members.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = members.iter().map(|p| p[1]).sum::<f64>() / n;
        total += members.iter().map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sum::<f64>();
    }
    total
}

/// Relabels clusters in order of first appearance.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = Vec::new();
    labels
        .iter()
        .map(|l| match map.iter().position(|m| m == l) {
            Some(i) => i,
            None => {
                map.push(*l);
                map.len() - 1
            }
        })
        .collect()
}

#[test]
fn kmeans_matches_exhaustive_partition_search() {
    let k = 3;
    let n = FIXTURE.len();
    let mut best = (f64::INFINITY, Vec::new());
    let mut labels = vec![0usize; n];
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        if (0..k).all(|j| labels.contains(&j)) {
            let v = sse(&FIXTURE, &labels, k);
            if v < best.0 - 1e-12 {
                best = (v, canonical(&labels));
            }
        }
    }

    let rows = Features::new(n, 2, FIXTURE.iter().flatten().copied().collect()).unwrap();
    let cfg = DiscretizeConfig {
        method: Method::KMeans,
        bins: BinCount::Fixed(k),
        seed: 7,
        ..DiscretizeConfig::default()
    };
    let got = kmeans_discretize(&rows, k, &cfg).unwrap();
    assert!((got.inertia - best.0).abs() < 1e-9, "{} vs {}", got.inertia, best.0);
    assert_eq!(canonical(&got.codes), best.1);
}

#[test]
fn weighted_rows_reproduce_table() {
    // 99 weighted rows of a printed 2x2x2 table reproduce it exactly
    let weights = [0usize, 5, 3, 28, 53, 3, 1, 6];
    let (mut x1, mut x2, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (cell, &w) in weights.iter().enumerate() {
        for _ in 0..w {
            x1.push(cell / 4);
            x2.push((cell / 2) % 2);
            y.push(cell % 2);
        }
    }
    let card = Cardinalities::new(2, 2, 2).unwrap();
    let p = empirical_joint(&x1, &x2, &y, card).unwrap();
    for (cell, &w) in weights.iter().enumerate() {
        assert!((p.probs()[cell] - w as f64 / 99.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn binning_is_monotone(mut values in prop::collection::vec(-1e3f64..1e3, 1..200), bins in 2usize..20) {
        values.sort_by(f64::total_cmp);
        let b = bin_scalar_features(&values, BinCount::Fixed(bins)).unwrap();
        for w in b.codes.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        prop_assert!(b.codes.iter().all(|&c| c < b.bins));
    }

    #[test]
    fn empirical_joint_is_a_distribution(
        rows in prop::collection::vec((0usize..3, 0usize..4, 0usize..2), 1..300)
    ) {
        let card = Cardinalities::new(3, 4, 2).unwrap();
        let x1: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let x2: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let y: Vec<usize> = rows.iter().map(|r| r.2).collect();
        let p = empirical_joint(&x1, &x2, &y, card).unwrap();
        let sum: f64 = p.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        for (i1, i2, iy) in &rows {
            let count = rows.iter().filter(|r| r == &&(*i1, *i2, *iy)).count();
            prop_assert!((p.get(*i1, *i2, *iy) - count as f64 / rows.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn discretization_is_deterministic(
        data in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0usize..3), 10..80),
        seed in any::<u64>(),
        kmeans in any::<bool>(),
    ) {
        let x1 = Features::from_scalars(data.iter().map(|d| d.0).collect()).unwrap();
        let x2 = Features::from_scalars(data.iter().map(|d| d.1).collect()).unwrap();
        let table = SampleTable::new(x1, x2, data.iter().map(|d| d.2).collect(), Some(3)).unwrap();
        let cfg = DiscretizeConfig {
            method: if kmeans { Method::KMeans } else { Method::Histogram },
            bins: BinCount::Fixed(3),
            seed,
            ..DiscretizeConfig::default()
        };
        let a = discretize(&table, &cfg).unwrap();
        let b = discretize(&table, &cfg).unwrap();
        prop_assert_eq!(a.joint.probs(), b.joint.probs());
        prop_assert_eq!(&a.x1.codes, &b.x1.codes);
        prop_assert_eq!(&a.x2.codes, &b.x2.codes);
    }
}

//! The two concave/convex objectives optimized by the solvers, with their
//! analytic gradients. Both accept any non-negative tensor in the
//! `(i1, i2, iy)` layout (normalization is not required), so they can be
//! differentiated coordinate-wise.

use crate::dist::Cardinalities;

/// Pairwise and single marginals of a flat tensor.
pub(crate) struct Margins {
    pub x1x2: Vec<f64>,
    pub x1y: Vec<f64>,
    pub x2y: Vec<f64>,
    pub y: Vec<f64>,
}

pub(crate) fn margins(card: Cardinalities, q: &[f64]) -> Margins {
    let [n1, n2, ny] = card.dims();
    let mut m = Margins {
        x1x2: vec![0.0; n1 * n2],
        x1y: vec![0.0; n1 * ny],
        x2y: vec![0.0; n2 * ny],
        y: vec![0.0; ny],
    };
    let mut flat = 0;
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            for iy in 0..ny {
                let v = q[flat];
                m.x1x2[i1 * n2 + i2] += v;
                m.x1y[i1 * ny + iy] += v;
                m.x2y[i2 * ny + iy] += v;
                m.y[iy] += v;
                flat += 1;
            }
        }
    }
    m
}

fn plogp(v: &[f64]) -> f64 {
    v.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum()
}

/// `H(Y | X1, X2)` in bits.
pub fn conditional_entropy(card: Cardinalities, q: &[f64]) -> f64 {
    let m = margins(card, q);
    plogp(&m.x1x2) - plogp(q)
}

/// Gradient of [`conditional_entropy`]: `log2 q(x1,x2) - log2 q(x1,x2,y)`.
/// Zero cells are clamped to `floor` before taking logs.
pub fn conditional_entropy_gradient(card: Cardinalities, q: &[f64], floor: f64) -> Vec<f64> {
    let [n1, n2, ny] = card.dims();
    let m = margins(card, q);
    let mut g = Vec::with_capacity(q.len());
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let l12 = m.x1x2[i1 * n2 + i2].max(floor).log2();
            for iy in 0..ny {
                let v = q[card.index(i1, i2, iy)].max(floor);
                g.push(l12 - v.log2());
            }
        }
    }
    g
}

/// `I(X1; X2 | Y)` in bits.
pub fn conditional_mi(card: Cardinalities, r: &[f64]) -> f64 {
    let m = margins(card, r);
    plogp(r) + plogp(&m.y) - plogp(&m.x1y) - plogp(&m.x2y)
}

/// Gradient of [`conditional_mi`]:
/// `log2 [ r(x1,x2,y) r(y) / (r(x1,y) r(x2,y)) ]`.
pub fn conditional_mi_gradient(card: Cardinalities, r: &[f64], floor: f64) -> Vec<f64> {
    let [n1, n2, ny] = card.dims();
    let m = margins(card, r);
    let mut g = Vec::with_capacity(r.len());
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            for iy in 0..ny {
                let v = r[card.index(i1, i2, iy)].max(floor);
                let num = v * m.y[iy].max(floor);
                let den = m.x1y[i1 * ny + iy].max(floor) * m.x2y[i2 * ny + iy].max(floor);
                g.push((num / den).log2());
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_entropy_of_deterministic_label_is_zero() {
        let card = Cardinalities::new(2, 2, 2).unwrap();
        let q: Vec<f64> = (0..8)
            .map(|i| {
                let (a, b, y) = (i / 4, (i / 2) % 2, i % 2);
                if a ^ b == y {
                    0.25
                } else {
                    0.0
                }
            })
            .collect();
        assert!(conditional_entropy(card, &q).abs() < 1e-15);
        assert!((conditional_mi(card, &q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_tensor() {
        let card = Cardinalities::new(3, 2, 4).unwrap();
        let q = vec![1.0 / 24.0; 24];
        assert!((conditional_entropy(card, &q) - 2.0).abs() < 1e-12);
        assert!(conditional_mi(card, &q).abs() < 1e-12);
        assert!(conditional_entropy_gradient(card, &q, 1e-15)
            .iter()
            .all(|g| (g - 2.0).abs() < 1e-12));
    }
}

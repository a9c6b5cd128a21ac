//! KL projection of a non-negative matrix onto a transportation polytope
//! (prescribed row and column sums), i.e. matrix scaling
//! `x_ij = c_ij exp(a_i + b_j)`.
//!
//! Proportional fitting is tried first. It contracts slowly when the matrix
//! is close to decomposable (huge cross-ratios), which is exactly what
//! happens when the solution lies near the boundary of the polytope, so a
//! damped Newton method on the dual takes over when fitting stalls.

const FIT_SWEEPS: usize = 64;
const NEWTON_STEPS: usize = 200;

/// Scales `m` (row-major `rows.len() x cols.len()`) in place so that its row
/// sums approach `rows` and its column sums approach `cols`. Rows and
/// columns with zero target are zeroed. Returns the final max violation.
pub(crate) fn fit(m: &mut [f64], rows: &[f64], cols: &[f64], tol: f64) -> f64 {
    let (n, k) = (rows.len(), cols.len());
    debug_assert_eq!(m.len(), n * k);
    for i in 0..n {
        for j in 0..k {
            if rows[i] <= 0.0 || cols[j] <= 0.0 {
                m[i * k + j] = 0.0;
            }
        }
    }
    let ri: Vec<usize> = (0..n).filter(|&i| rows[i] > 0.0).collect();
    let cj: Vec<usize> = (0..k).filter(|&j| cols[j] > 0.0).collect();
    if ri.is_empty() || cj.is_empty() {
        return 0.0;
    }
    let mut v = violation(m, rows, cols);
    for _ in 0..FIT_SWEEPS {
        if v < tol {
            return v;
        }
        fit_sweep(m, rows, cols, &ri, &cj);
        v = violation(m, rows, cols);
    }
    if v < tol {
        return v;
    }
    newton(m, rows, cols, &ri, &cj, tol)
}

fn fit_sweep(m: &mut [f64], rows: &[f64], cols: &[f64], ri: &[usize], cj: &[usize]) {
    let k = cols.len();
    for &i in ri {
        let sum: f64 = cj.iter().map(|&j| m[i * k + j]).sum();
        if sum > 0.0 {
            let s = rows[i] / sum;
            cj.iter().for_each(|&j| m[i * k + j] *= s);
        }
    }
    for &j in cj {
        let sum: f64 = ri.iter().map(|&i| m[i * k + j]).sum();
        if sum > 0.0 {
            let s = cols[j] / sum;
            ri.iter().for_each(|&i| m[i * k + j] *= s);
        }
    }
}

pub(crate) fn violation(m: &[f64], rows: &[f64], cols: &[f64]) -> f64 {
    let k = cols.len();
    let mut worst: f64 = 0.0;
    let mut csum = vec![0.0; k];
    for (i, row) in m.chunks(k).enumerate() {
        let s: f64 = row.iter().sum();
        worst = worst.max((s - rows[i]).abs());
        for (c, v) in csum.iter_mut().zip(row) {
            *c += v;
        }
    }
    for (c, t) in csum.iter().zip(cols) {
        worst = worst.max((c - t).abs());
    }
    worst
}

/// Newton ascent on the dual `sum r_i a_i + sum s_j b_j - sum x_ij(a, b)`.
fn newton(m: &mut [f64], rows: &[f64], cols: &[f64], ri: &[usize], cj: &[usize], tol: f64) -> f64 {
    let k = cols.len();
    let (na, nb) = (ri.len(), cj.len());
    let base: Vec<f64> = m.to_vec();
    let mut a = vec![0.0; na];
    let mut b = vec![0.0; nb];

    let eval = |a: &[f64], b: &[f64], out: &mut [f64]| -> f64 {
        let mut total = 0.0;
        for (p, &i) in ri.iter().enumerate() {
            for (q, &j) in cj.iter().enumerate() {
                let c = base[i * k + j];
                let x = if c > 0.0 { c * (a[p] + b[q]).exp() } else { 0.0 };
                out[i * k + j] = x;
                total += x;
            }
        }
        let lin: f64 = ri.iter().zip(a).map(|(&i, ap)| rows[i] * ap).sum::<f64>()
            + cj.iter().zip(b).map(|(&j, bq)| cols[j] * bq).sum::<f64>();
        lin - total
    };

    let mut x = m.to_vec();
    let mut dual = eval(&a, &b, &mut x);
    // the last column potential is pinned to remove the gauge freedom
    let dim = na + nb - 1;
    let mut hess = vec![0.0; dim * dim];
    let mut grad = vec![0.0; dim];
    for _ in 0..NEWTON_STEPS {
        let rs: Vec<f64> = ri.iter().map(|&i| cj.iter().map(|&j| x[i * k + j]).sum()).collect();
        let cs: Vec<f64> = cj.iter().map(|&j| ri.iter().map(|&i| x[i * k + j]).sum()).collect();
        let worst = ri
            .iter()
            .zip(&rs)
            .map(|(&i, s)| (rows[i] - s).abs())
            .chain(cj.iter().zip(&cs).map(|(&j, s)| (cols[j] - s).abs()))
            .fold(0.0, f64::max);
        if worst < tol {
            break;
        }
        hess.iter_mut().for_each(|h| *h = 0.0);
        for p in 0..na {
            grad[p] = rows[ri[p]] - rs[p];
            hess[p * dim + p] = rs[p];
        }
        for q in 0..nb - 1 {
            grad[na + q] = cols[cj[q]] - cs[q];
            hess[(na + q) * dim + na + q] = cs[q];
            for p in 0..na {
                let v = x[ri[p] * k + cj[q]];
                hess[p * dim + na + q] = v;
                hess[(na + q) * dim + p] = v;
            }
        }
        // tiny ridge keeps the system solvable when a row carries no mass
        let ridge = 1e-300_f64.max(1e-18 * rs.iter().chain(&cs).fold(0.0_f64, |m, v| m.max(*v)));
        for d in 0..dim {
            hess[d * dim + d] += ridge;
        }
        let Some(step) = solve_dense(&mut hess.clone(), &grad, dim) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        let mut a_new = a.clone();
        let mut b_new = b.clone();
        let mut x_new = x.clone();
        for _ in 0..60 {
            for p in 0..na {
                a_new[p] = a[p] + t * step[p];
            }
            for q in 0..nb - 1 {
                b_new[q] = b[q] + t * step[na + q];
            }
            let d = eval(&a_new, &b_new, &mut x_new);
            if d.is_finite() && d >= dual - 1e-15 * dual.abs() {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        a = a_new;
        b = b_new;
        x = x_new;
        dual = eval(&a, &b, &mut x);
    }
    m.copy_from_slice(&x);
    // finish with fitting sweeps: columns exact, rows within the Newton residual
    fit_sweep(m, rows, cols, ri, cj);
    violation(m, rows, cols)
}

/// Gaussian elimination with partial pivoting; `a` is overwritten.
fn solve_dense(a: &mut [f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
        if a[pivot * n + col] == 0.0 || !a[pivot * n + col].is_finite() {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            x.swap(pivot, col);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for c in col + 1..n {
            s -= a[col * n + c] * x[c];
        }
        x[col] = s / a[col * n + col];
    }
    Some(x)
}

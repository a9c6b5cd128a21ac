//! Lower and upper bounds on synergy when only the pairwise marginals
//! `p(x1,y)`, `p(x2,y)` and `p(x1,x2)` are observed, and the accuracy
//! bounds they imply.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dist::{
    entropy_bits, validate_distribution, JointDist, Matrix, PairwiseMarginals,
};
use crate::error::{Error, Result};
use crate::objective;
use crate::solver::{partial_pid, PartialPid, SolverConfig};

/// Result of minimizing `I_r(X1; X2 | Y)` over joints that share all three
/// pairwise marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct MinCmi {
    pub r_star: JointDist,
    pub value: f64,
    /// IPF dual objective `sum_r log2 r_t` (the same for every feasible `r`)
    /// after each full cycle. Non-decreasing; it converges to `-H(r*)`.
    pub dual_trace: Vec<f64>,
    pub max_marginal_violation: f64,
    pub cycles: usize,
    pub converged: bool,
}

const PROBE_CYCLES: usize = 1000;

/// `min_{r in Δ_{p_{1,2,12}}} I_r(X1; X2 | Y)`.
///
/// On that set `H(X1,Y)`, `H(X2,Y)` and `H(Y)` are fixed, so the minimizer
/// is the maximum-entropy joint, found by cyclic proportional fitting from
/// the uniform tensor over the cells no marginal forces to zero. When some
/// of those cells are zero in every feasible joint, fitting only creeps
/// towards the boundary; it is then restarted on the exact support.
pub fn min_conditional_mi(marginals: &PairwiseMarginals, config: &SolverConfig) -> Result<MinCmi> {
    config.validate()?;
    let m12 = marginals.m12().ok_or(Error::MissingPairMarginal)?;
    let (m1y, m2y) = (marginals.m1y(), marginals.m2y());
    let card = marginals.card();
    let [n1, n2, ny] = card.dims();

    let mut support = vec![false; card.cells()];
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            for iy in 0..ny {
                support[card.index(i1, i2, iy)] =
                    m12.get(i1, i2) > 0.0 && m1y.get(i1, iy) > 0.0 && m2y.get(i2, iy) > 0.0;
            }
        }
    }
    let tol = config.tol_marginal * 0.1;
    // from an interior limit fitting converges linearly, so a short probe
    // that stalls points at forced zeros
    let probe = config.max_iters.min(PROBE_CYCLES);
    let mut fit = fit_max_entropy(marginals, &support, tol, probe)?;
    if !fit.converged {
        let exact = feasible_support(marginals, &support)?;
        if exact != support || probe < config.max_iters {
            let first = fit.cycles;
            fit = fit_max_entropy(marginals, &exact, tol, config.max_iters)?;
            fit.cycles += first;
        }
    }

    let r_star = JointDist::from_solver(card, fit.r);
    let max_marginal_violation = marginals.violation(&r_star);
    let value = entropy_bits(m1y.as_slice()) + entropy_bits(m2y.as_slice())
        - entropy_bits(&marginals.p_y())
        - r_star.entropy();
    Ok(MinCmi {
        r_star,
        value,
        dual_trace: fit.trace,
        max_marginal_violation,
        cycles: fit.cycles,
        converged: fit.converged,
    })
}

struct Fit {
    r: Vec<f64>,
    trace: Vec<f64>,
    cycles: usize,
    converged: bool,
}

/// Cyclic proportional fitting of all three pairwise marginals from the
/// uniform tensor on `support`.
fn fit_max_entropy(marginals: &PairwiseMarginals, support: &[bool], tol: f64, max_cycles: usize) -> Result<Fit> {
    let m12 = marginals.m12().ok_or(Error::MissingPairMarginal)?;
    let (m1y, m2y) = (marginals.m1y(), marginals.m2y());
    let card = marginals.card();
    let [n1, n2, ny] = card.dims();

    let count = support.iter().filter(|&&s| s).count();
    if count == 0 {
        return Err(Error::Infeasible("no cell is compatible with all three marginals".into()));
    }
    let u = 1.0 / count as f64;
    let mut r: Vec<f64> = support.iter().map(|&s| if s { u } else { 0.0 }).collect();
    // every positive marginal entry needs at least one supporting cell
    let m = objective::margins(card, &r);
    for (what, have, want) in [
        ("p(x1,x2)", &m.x1x2, m12.as_slice()),
        ("p(x1,y)", &m.x1y, m1y.as_slice()),
        ("p(x2,y)", &m.x2y, m2y.as_slice()),
    ] {
        if let Some(idx) = (0..want.len()).find(|&i| want[i] > 0.0 && have[i] == 0.0) {
            return Err(Error::Infeasible(format!("{what} entry {idx} has no supporting cell")));
        }
    }

    let mut log_a = vec![0.0; n1 * n2];
    let mut log_b = vec![0.0; n1 * ny];
    let mut log_c = vec![0.0; n2 * ny];
    let dual = |la: &[f64], lb: &[f64], lc: &[f64]| -> f64 {
        let dot = |w: &[f64], l: &[f64]| -> f64 {
            w.iter().zip(l).filter(|(w, _)| **w > 0.0).map(|(w, l)| w * l).sum()
        };
        (u.ln() + dot(m12.as_slice(), la) + dot(m1y.as_slice(), lb) + dot(m2y.as_slice(), lc))
            / std::f64::consts::LN_2
    };

    let mut trace = Vec::new();
    let mut cycles = 0;
    let mut violation = f64::INFINITY;
    while cycles < max_cycles {
        let m = objective::margins(card, &r);
        for i in 0..n1 * n2 {
            if m.x1x2[i] > 0.0 {
                let s = m12.as_slice()[i] / m.x1x2[i];
                log_a[i] += s.ln();
                (0..ny).for_each(|iy| r[i * ny + iy] *= s);
            }
        }
        let m = objective::margins(card, &r);
        for i1 in 0..n1 {
            for iy in 0..ny {
                let have = m.x1y[i1 * ny + iy];
                if have > 0.0 {
                    let s = m1y.get(i1, iy) / have;
                    log_b[i1 * ny + iy] += s.ln();
                    (0..n2).for_each(|i2| r[card.index(i1, i2, iy)] *= s);
                }
            }
        }
        let m = objective::margins(card, &r);
        for i2 in 0..n2 {
            for iy in 0..ny {
                let have = m.x2y[i2 * ny + iy];
                if have > 0.0 {
                    let s = m2y.get(i2, iy) / have;
                    log_c[i2 * ny + iy] += s.ln();
                    (0..n1).for_each(|i1| r[card.index(i1, i2, iy)] *= s);
                }
            }
        }
        cycles += 1;
        trace.push(dual(&log_a, &log_b, &log_c));
        let m = objective::margins(card, &r);
        violation = max_dev(&m.x1x2, m12.as_slice()).max(max_dev(&m.x1y, m1y.as_slice()));
        if violation < tol {
            break;
        }
    }
    Ok(Fit {
        r,
        trace,
        cycles,
        converged: violation < tol,
    })
}

/// Cells of `candidates` that are positive in at least one joint with the
/// three pairwise marginals.
///
/// Each round solves `max sum s_c` over the undecided cells subject to
/// `0 <= s_c <= min(r_c, eps)` and the marginal constraints on `r`. Every
/// cell with `s_c > 0` is in the support; a zero optimum proves the rest
/// are zero in every feasible joint.
fn feasible_support(marginals: &PairwiseMarginals, candidates: &[bool]) -> Result<Vec<bool>> {
    use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

    let m12 = marginals.m12().ok_or(Error::MissingPairMarginal)?;
    let (m1y, m2y) = (marginals.m1y(), marginals.m2y());
    let card = marginals.card();
    let [n1, n2, ny] = card.dims();
    let cells: Vec<usize> = (0..candidates.len()).filter(|&c| candidates[c]).collect();
    let eps = 1.0 / cells.len().max(1) as f64;

    let mut found = vec![false; candidates.len()];
    loop {
        let open: Vec<usize> = cells.iter().copied().filter(|&c| !found[c]).collect();
        if open.is_empty() {
            break;
        }
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let r: Vec<_> = cells.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
        let mut at = vec![usize::MAX; candidates.len()];
        cells.iter().enumerate().for_each(|(k, &c)| at[c] = k);
        let mut s = Vec::with_capacity(open.len());
        for &c in &open {
            let v = lp.add_var(1.0, (0.0, eps));
            lp.add_constraint(&[(v, 1.0), (r[at[c]], -1.0)], ComparisonOp::Le, 0.0);
            s.push(v);
        }
        let mut rows: Vec<(LinearExpr, f64)> = Vec::new();
        let mut push = |terms: Vec<usize>, rhs: f64| {
            let mut e = LinearExpr::empty();
            terms.into_iter().filter(|&c| candidates[c]).for_each(|c| e.add(r[at[c]], 1.0));
            rows.push((e, rhs));
        };
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                push((0..ny).map(|iy| card.index(i1, i2, iy)).collect(), m12.get(i1, i2));
            }
            for iy in 0..ny {
                push((0..n2).map(|i2| card.index(i1, i2, iy)).collect(), m1y.get(i1, iy));
            }
        }
        for i2 in 0..n2 {
            for iy in 0..ny {
                push((0..n1).map(|i1| card.index(i1, i2, iy)).collect(), m2y.get(i2, iy));
            }
        }
        for (e, rhs) in rows {
            lp.add_constraint(e, ComparisonOp::Eq, rhs);
        }
        let solution = lp
            .solve()
            .and_then(|o| o.into_solution().map_err(|_| microlp::Error::Infeasible))
            .map_err(|e| Error::Infeasible(format!("support search failed: {e}")))?;
        let mut progress = false;
        for (&c, &v) in open.iter().zip(&s) {
            if solution.var_value(v) > eps * 1e-9 {
                found[c] = true;
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    Ok(found)
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Components of the redundancy-based lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedundancyBound {
    /// `R - I(X1; X2) + min_cmi`; may be negative.
    pub s_r: f64,
    pub shared_info: f64,
    pub min_cmi: f64,
}

/// `S_R = R - I_p(X1; X2) + min_r I_r(X1; X2 | Y)`.
pub fn synergy_lower_redundancy(
    marginals: &PairwiseMarginals,
    redundancy: f64,
    config: &SolverConfig,
) -> Result<(RedundancyBound, MinCmi)> {
    let m12 = marginals.m12().ok_or(Error::MissingPairMarginal)?;
    let shared_info =
        entropy_bits(&m12.row_sums()) + entropy_bits(&m12.col_sums()) - entropy_bits(m12.as_slice());
    let min = min_conditional_mi(marginals, config)?;
    let bound = RedundancyBound {
        s_r: redundancy - shared_info + min.value,
        shared_info,
        min_cmi: min.value,
    };
    Ok((bound, min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    #[default]
    ZeroOne,
}

impl Distance {
    fn eval(self, a: usize, b: usize) -> f64 {
        match self {
            Distance::ZeroOne => f64::from(u8::from(a != b)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisagreementConfig {
    pub distance: Distance,
    /// Scale applied to the disagreement in the uniqueness-based bound.
    pub c: f64,
    pub tie_break: TieBreak,
}

impl Default for DisagreementConfig {
    fn default() -> Self {
        Self {
            distance: Distance::ZeroOne,
            c: 1.0,
            tie_break: TieBreak::LowestIndex,
        }
    }
}

impl DisagreementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("c must be positive, got {}", self.c)));
        }
        Ok(())
    }
}

/// Bayes-optimal unimodal classifier `x -> argmax_y p(y | x)` from a joint
/// `p(x, y)` matrix. Rows with no mass map to label 0.
pub fn bayes_classifier(m_xy: &Matrix, tie_break: TieBreak) -> Vec<usize> {
    match tie_break {
        TieBreak::LowestIndex => m_xy
            .to_rows()
            .iter()
            .map(|row| {
                let mut best = 0;
                for (y, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = y;
                    }
                }
                best
            })
            .collect(),
    }
}

/// `alpha = E_{p(x1,x2)} d(f1(x1), f2(x2))`.
pub fn disagreement(m12: &Matrix, f1: &[usize], f2: &[usize], config: &DisagreementConfig) -> Result<f64> {
    if f1.len() != m12.rows() || f2.len() != m12.cols() {
        return Err(Error::InvalidArgument(format!(
            "classifiers cover {}x{} inputs but p(x1,x2) is {}x{}",
            f1.len(),
            f2.len(),
            m12.rows(),
            m12.cols()
        )));
    }
    let mut alpha = 0.0;
    for (i1, &a) in f1.iter().enumerate() {
        for (i2, &b) in f2.iter().enumerate() {
            alpha += m12.get(i1, i2) * config.distance.eval(a, b);
        }
    }
    Ok(alpha.clamp(0.0, 1.0))
}

/// `S_U = alpha * c - max(U1, U2)`; may be negative.
pub fn synergy_lower_uniqueness(alpha: f64, u1: f64, u2: f64, config: &DisagreementConfig) -> f64 {
    alpha * config.c - u1.max(u2)
}

/// A joint with prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    /// `mu.len() x nu.len()`.
    pub joint: Matrix,
    pub entropy: f64,
}

#[derive(Debug, PartialEq)]
struct Mass(f64, usize);

impl Eq for Mass {}

impl Ord for Mass {
    fn cmp(&self, other: &Self) -> Ordering {
        // larger mass first, then lower index
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Mass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy approximation of the minimum-entropy coupling of `mu` and `nu`:
/// repeatedly pair the two largest remaining masses. `O(k log k)`.
pub fn min_entropy_coupling_greedy(mu: &[f64], nu: &[f64]) -> Result<Coupling> {
    validate_distribution(mu)?;
    validate_distribution(nu)?;
    let heap = |p: &[f64]| -> BinaryHeap<Mass> {
        p.iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| Mass(v, i))
            .collect()
    };
    let (mut a, mut b) = (heap(mu), heap(nu));
    let mut joint = vec![0.0; mu.len() * nu.len()];
    let mut masses = Vec::with_capacity(mu.len() + nu.len());
    while let (Some(Mass(x, i)), Some(Mass(y, j))) = (a.pop(), b.pop()) {
        let m = x.min(y);
        joint[i * nu.len() + j] += m;
        masses.push(m);
        // remainders at rounding level are dropped
        if x - m > 1e-15 {
            a.push(Mass(x - m, i));
        }
        if y - m > 1e-15 {
            b.push(Mass(y - m, j));
        }
    }
    Ok(Coupling {
        joint: Matrix::new(mu.len(), nu.len(), joint)?,
        entropy: entropy_bits(&masses),
    })
}

/// Components of the coupling-based upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBound {
    /// `H(X1,X2) + H(Y) - H_coupling - R - U1 - U2`.
    pub s_upper: f64,
    pub h_x1x2: f64,
    pub h_y: f64,
    pub coupling_entropy: f64,
}

/// Upper bound on synergy from the relaxation that keeps only `p(x1,x2)`
/// and `p(y)`: `(X1, X2)` is flattened to one variable and greedily coupled
/// with `Y`.
pub fn synergy_upper(marginals: &PairwiseMarginals, partial: &PartialPid) -> Result<UpperBound> {
    let m12 = marginals.m12().ok_or(Error::MissingPairMarginal)?;
    let p_y = marginals.p_y();
    let coupling = min_entropy_coupling_greedy(m12.as_slice(), &p_y)?;
    let h_x1x2 = entropy_bits(m12.as_slice());
    let h_y = entropy_bits(&p_y);
    Ok(UpperBound {
        s_upper: h_x1x2 + h_y - coupling.entropy - partial.r - partial.u1 - partial.u2,
        h_x1x2,
        h_y,
        coupling_entropy: coupling.entropy,
    })
}

/// Accuracy bounds for the Bayes-optimal multimodal classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfBounds {
    pub p_lower: f64,
    pub p_upper: f64,
    /// Midpoint of the two bounds.
    pub p_hat: f64,
}

fn lower_accuracy(total_mi: f64, h_y: f64) -> f64 {
    2f64.powf(total_mi - h_y).clamp(0.0, 1.0)
}

/// Fano: `P_acc <= (I + 1 + log2|Y| - H(Y)) / log2|Y|`. For uniform labels
/// this is `(I + 1) / log2|Y|`.
fn upper_accuracy(total_mi: f64, h_y: f64, ny: usize) -> f64 {
    let log_ny = (ny as f64).log2();
    ((total_mi + 1.0 + log_ny - h_y) / log_ny).clamp(0.0, 1.0)
}

fn check_perf_inputs(total_mi: f64, h_y: f64, ny: usize) -> Result<()> {
    const SLACK: f64 = 1e-9;
    if ny == 0 {
        return Err(Error::InvalidArgument("ny must be positive".into()));
    }
    if !(total_mi >= -SLACK) {
        return Err(Error::InvalidArgument(format!("total information {total_mi} is negative")));
    }
    if !(h_y >= -SLACK && h_y <= (ny as f64).log2() + SLACK) {
        return Err(Error::InvalidArgument(format!(
            "H(Y) = {h_y} is outside [0, log2 {ny}]"
        )));
    }
    Ok(())
}

/// `2^(I - H(Y)) <= P_acc <= upper`, both clamped to `[0, 1]`. A single
/// label is trivially predicted: `(1, 1, 1)`.
pub fn performance_bounds(total_mi: f64, h_y: f64, ny: usize) -> Result<PerfBounds> {
    check_perf_inputs(total_mi, h_y, ny)?;
    if ny == 1 {
        return Ok(PerfBounds {
            p_lower: 1.0,
            p_upper: 1.0,
            p_hat: 1.0,
        });
    }
    let p_lower = lower_accuracy(total_mi, h_y);
    let p_upper = upper_accuracy(total_mi, h_y, ny);
    Ok(PerfBounds {
        p_lower,
        p_upper,
        p_hat: 0.5 * (p_lower + p_upper),
    })
}

/// Range mode: the lower bound uses `R + U1 + U2 + max(S_lower, 0)` and the
/// upper bound `R + U1 + U2 + S_upper`. When approximation slack puts the
/// upper synergy estimate below the lower one, the lower one is used for
/// both.
pub fn performance_range(
    partial: &PartialPid,
    s_lower: f64,
    s_upper: f64,
    h_y: f64,
    ny: usize,
) -> Result<PerfBounds> {
    let base = partial.r + partial.u1 + partial.u2;
    let lo = (base + s_lower.max(0.0)).max(0.0);
    let hi = (base + s_upper).max(lo);
    check_perf_inputs(lo, h_y, ny)?;
    if ny == 1 {
        return performance_bounds(0.0, 0.0, 1);
    }
    let p_lower = lower_accuracy(lo, h_y);
    let p_upper = upper_accuracy(hi, h_y, ny);
    Ok(PerfBounds {
        p_lower,
        p_upper,
        p_hat: 0.5 * (p_lower + p_upper),
    })
}

/// Upper bound `1 - 2^(I(X1;X2;Y) - H(Y))` on the Bayes error of
/// representations that keep only the information shared by both
/// modalities, clamped to `[0, 1]`.
pub fn cl_suboptimality_bound(co_info: f64, h_y: f64) -> Result<f64> {
    if !(h_y >= 0.0) {
        return Err(Error::InvalidArgument(format!("H(Y) = {h_y} is negative")));
    }
    Ok((1.0 - 2f64.powf(co_info - h_y)).clamp(0.0, 1.0))
}

/// Everything computable from the pairwise marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct SynergyBounds {
    pub pid: PartialPid,
    pub s_r_lower: f64,
    pub s_u_lower: f64,
    pub s_upper: f64,
    pub min_cmi: f64,
    pub shared_info: f64,
    pub alpha: f64,
    pub f1: Vec<usize>,
    pub f2: Vec<usize>,
    pub coupling_entropy: f64,
    pub h_y: f64,
    /// The greedy coupling left the upper bound below a lower bound.
    pub approximation_slack: bool,
    pub min_cmi_converged: bool,
}

impl SynergyBounds {
    /// `max(S_R, S_U, 0)`.
    pub fn s_lower(&self) -> f64 {
        self.s_r_lower.max(self.s_u_lower).max(0.0)
    }

    pub fn performance(&self, ny: usize) -> Result<PerfBounds> {
        performance_range(&self.pid, self.s_lower(), self.s_upper, self.h_y, ny)
    }
}

/// Rounding gap tolerated between a lower bound and `S_upper` before the
/// report flags approximation slack.
const SLACK_TOL: f64 = 1e-6;

/// All synergy bounds for marginals that include `p(x1,x2)`.
pub fn synergy_bounds(
    marginals: &PairwiseMarginals,
    solver: &SolverConfig,
    disagreement_config: &DisagreementConfig,
) -> Result<SynergyBounds> {
    disagreement_config.validate()?;
    let m12 = marginals.m12().ok_or(Error::MissingPairMarginal)?;
    let pid = partial_pid(marginals, solver)?;
    let (red, min) = synergy_lower_redundancy(marginals, pid.r, solver)?;
    let f1 = bayes_classifier(marginals.m1y(), disagreement_config.tie_break);
    let f2 = bayes_classifier(marginals.m2y(), disagreement_config.tie_break);
    let alpha = disagreement(m12, &f1, &f2, disagreement_config)?;
    let s_u_lower = synergy_lower_uniqueness(alpha, pid.u1, pid.u2, disagreement_config);
    let upper = synergy_upper(marginals, &pid)?;
    Ok(SynergyBounds {
        pid,
        s_r_lower: red.s_r,
        s_u_lower,
        s_upper: upper.s_upper,
        min_cmi: red.min_cmi,
        shared_info: red.shared_info,
        alpha,
        f1,
        f2,
        coupling_entropy: upper.coupling_entropy,
        h_y: upper.h_y,
        approximation_slack: upper.s_upper < red.s_r.max(s_u_lower) - SLACK_TOL,
        min_cmi_converged: min.converged,
    })
}

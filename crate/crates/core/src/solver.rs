//! Exact PID through the max-entropy program
//! `q* = argmax_{q in Δp} H_q(Y | X1, X2)`, where `Δp` is the set of joints
//! sharing the label-modality marginals `p(x1,y)` and `p(x2,y)`.
//!
//! The program is solved by exponentiated-gradient ascent. After every
//! multiplicative step the iterate is Bregman (KL) projected back onto `Δp`.
//! `Δp` factors into one transportation polytope per label value, and the
//! KL projection onto a transportation polytope is matrix scaling, so each
//! projection is a row/column proportional fit of every `y` slice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::{
    co_information, conditional_mutual_info_of, total_information, Cardinalities, JointDist,
    PairwiseMarginals, VarSet, CONSISTENCY_TOL,
};
use crate::discretize::{discretize, DiscretizeConfig, SampleTable};
use crate::error::{Error, Result};
use crate::objective;
use crate::scaling;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Initial step of each sweep, in nats. A unit step sets every cell to
    /// `q(x1,x2)` before projection; smaller steps interpolate geometrically.
    pub step_size: f64,
    pub max_iters: usize,
    /// Convergence threshold on the per-sweep objective gain (bits).
    pub tol_obj: f64,
    /// Allowed deviation from the prescribed marginals.
    pub tol_marginal: f64,
    /// Cells are clamped to this mass before taking logs.
    pub floor_eps: f64,
    pub seed: u64,
    /// Amplitude of the seeded multiplicative jitter applied to the
    /// starting point (0 disables it).
    pub init_jitter: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 0.25,
            max_iters: 50_000,
            tol_obj: 1e-10,
            tol_marginal: 1e-9,
            floor_eps: 1e-15,
            seed: 0,
            init_jitter: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "step_size must lie in (0, 1], got {}",
                self.step_size
            )));
        }
        for (name, v) in [
            ("tol_obj", self.tol_obj),
            ("tol_marginal", self.tol_marginal),
            ("floor_eps", self.floor_eps),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.init_jitter >= 0.0 && self.init_jitter.is_finite()) {
            return Err(Error::InvalidArgument("init_jitter must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveTrace {
    /// Objective after each accepted sweep; the first entry is the start.
    pub objective_per_sweep: Vec<f64>,
    pub max_marginal_violation: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// `q0(x1,x2,y) = p(x1,y) p(x2,y) / p(y)`: the conditionally independent
/// member of `Δp`.
pub fn feasible_init(marginals: &PairwiseMarginals) -> Result<JointDist> {
    let card = marginals.card();
    let (m1y, m2y) = (marginals.m1y(), marginals.m2y());
    let py1 = m1y.col_sums();
    let py2 = m2y.col_sums();
    for (index, (a, b)) in py1.iter().zip(&py2).enumerate() {
        let deviation = (a - b).abs();
        if deviation > CONSISTENCY_TOL {
            return Err(Error::Infeasible(format!(
                "p(y={index}) differs by {deviation:e} between the two label marginals"
            )));
        }
    }
    let mut q = vec![0.0; card.cells()];
    for i1 in 0..card.n1() {
        for i2 in 0..card.n2() {
            for iy in 0..card.ny() {
                if py1[iy] > 0.0 {
                    q[card.index(i1, i2, iy)] = m1y.get(i1, iy) * m2y.get(i2, iy) / py1[iy];
                }
            }
        }
    }
    Ok(JointDist::from_solver(card, q))
}

/// Per-slice data for the proportional-fitting projection onto `Δp`.
struct SliceConstraints {
    card: Cardinalities,
    /// `p(x1, y)` laid out `[iy][i1]`.
    rows: Vec<Vec<f64>>,
    /// `p(x2, y)` laid out `[iy][i2]`.
    cols: Vec<Vec<f64>>,
}

impl SliceConstraints {
    fn new(m: &PairwiseMarginals) -> Self {
        let card = m.card();
        let rows = (0..card.ny())
            .map(|iy| (0..card.n1()).map(|i| m.m1y().get(i, iy)).collect())
            .collect();
        let cols = (0..card.ny())
            .map(|iy| (0..card.n2()).map(|j| m.m2y().get(j, iy)).collect())
            .collect();
        Self { card, rows, cols }
    }

    fn in_support(&self, i1: usize, i2: usize, iy: usize) -> bool {
        self.rows[iy][i1] > 0.0 && self.cols[iy][i2] > 0.0
    }

    /// Scales each `y` slice of `q` in place until its row and column sums
    /// match within `tol`. Returns the final max violation.
    fn project(&self, q: &mut [f64], tol: f64) -> f64 {
        let [n1, n2, ny] = self.card.dims();
        let mut slice = vec![0.0; n1 * n2];
        let mut worst: f64 = 0.0;
        for iy in 0..ny {
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    slice[i1 * n2 + i2] = q[self.card.index(i1, i2, iy)];
                }
            }
            worst = worst.max(scaling::fit(&mut slice, &self.rows[iy], &self.cols[iy], tol));
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    q[self.card.index(i1, i2, iy)] = slice[i1 * n2 + i2];
                }
            }
        }
        worst
    }
}

/// Maximizes `H_q(Y | X1, X2)` over `Δp`. Only `p(x1,y)` and `p(x2,y)` are
/// used; `p(x1,x2)` is left free.
///
/// Running out of sweeps is not an error: the best iterate is returned with
/// `converged = false`.
pub fn solve_q_star(
    marginals: &PairwiseMarginals,
    config: &SolverConfig,
) -> Result<(JointDist, SolveTrace)> {
    config.validate()?;
    let init = feasible_init(marginals)?;
    let card = init.card();
    if card.ny() == 1 {
        let obj = objective::conditional_entropy(card, init.probs());
        let trace = SolveTrace {
            objective_per_sweep: vec![obj],
            max_marginal_violation: marginals.without_pair().violation(&init),
            sweeps: 0,
            converged: true,
        };
        return Ok((init, trace));
    }

    let cons = SliceConstraints::new(marginals);
    let proj_tol = config.tol_marginal * 0.1;
    let support: Vec<bool> = (0..card.cells())
        .map(|flat| {
            let iy = flat % card.ny();
            let i2 = (flat / card.ny()) % card.n2();
            let i1 = flat / (card.ny() * card.n2());
            cons.in_support(i1, i2, iy)
        })
        .collect();

    let mut q = init.into_probs();
    if config.init_jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for (v, &s) in q.iter_mut().zip(&support) {
            let u: f64 = rng.random_range(-1.0..1.0);
            if s {
                *v = v.max(config.floor_eps) * (config.init_jitter * u).exp();
            }
        }
        cons.project(&mut q, proj_tol);
    }

    let mut obj = objective::conditional_entropy(card, &q);
    let mut trace = SolveTrace {
        objective_per_sweep: vec![obj],
        ..SolveTrace::default()
    };
    let mut cand = vec![0.0; q.len()];

    while trace.sweeps < config.max_iters {
        let grad = objective::conditional_entropy_gradient(card, &q, config.floor_eps);
        let mut step = config.step_size;
        let accepted = loop {
            for (((c, &v), &g), &s) in cand.iter_mut().zip(&q).zip(&grad).zip(&support) {
                // g is in bits; the step is in nats
                *c = if s {
                    (v.max(config.floor_eps) * (step * g * std::f64::consts::LN_2).exp())
                        .max(config.floor_eps)
                } else {
                    0.0
                };
            }
            cons.project(&mut cand, proj_tol);
            let next = objective::conditional_entropy(card, &cand);
            if next >= obj - 1e-13 {
                break Some(next);
            }
            step *= 0.5;
            if step < 1e-12 {
                break None;
            }
        };
        trace.sweeps += 1;
        let Some(next) = accepted else {
            // no ascent direction left at machine precision
            trace.converged = true;
            break;
        };
        std::mem::swap(&mut q, &mut cand);
        let gain = next - obj;
        obj = next;
        trace.objective_per_sweep.push(obj);
        if gain.abs() < config.tol_obj {
            trace.converged = true;
            break;
        }
    }

    let q = JointDist::from_solver(card, q);
    // p(x1,x2) is not a constraint of this problem
    trace.max_marginal_violation = marginals.without_pair().violation(&q);
    Ok((q, trace))
}

/// Redundancy, uniqueness and synergy in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidResult {
    pub r: f64,
    pub u1: f64,
    pub u2: f64,
    pub s: f64,
    /// `I_p({X1, X2}; Y)`.
    pub total_mi: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl PidResult {
    pub fn components(&self) -> [f64; 4] {
        [self.r, self.u1, self.u2, self.s]
    }
}

/// The part of the decomposition available from pairwise marginals alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialPid {
    pub r: f64,
    pub u1: f64,
    pub u2: f64,
    /// `I_{q*}({X1, X2}; Y) = R + U1 + U2`.
    pub min_total_mi: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn check_fresh(marginals: &PairwiseMarginals, q_star: &JointDist, config: &SolverConfig) -> Result<()> {
    let violation = marginals.without_pair().violation(q_star);
    let limit = 10.0 * config.tol_marginal;
    if violation > limit {
        return Err(Error::StaleSolution { violation, limit });
    }
    Ok(())
}

fn decompose(q_star: &JointDist) -> (f64, f64, f64) {
    let r = co_information(q_star);
    // the group arguments are fixed and disjoint
    let u1 = conditional_mutual_info_of(q_star, VarSet::X1, VarSet::Y, VarSet::X2).unwrap();
    let u2 = conditional_mutual_info_of(q_star, VarSet::X2, VarSet::Y, VarSet::X1).unwrap();
    (r, u1, u2)
}

/// `R`, `U1`, `U2` from a solution of the max-entropy program.
pub fn compute_partial_pid(
    marginals: &PairwiseMarginals,
    q_star: &JointDist,
    trace: &SolveTrace,
    config: &SolverConfig,
) -> Result<PartialPid> {
    check_fresh(marginals, q_star, config)?;
    let (r, u1, u2) = decompose(q_star);
    Ok(PartialPid {
        r,
        u1,
        u2,
        min_total_mi: total_information(q_star),
        converged: trace.converged,
        iterations: trace.sweeps,
    })
}

/// The full decomposition; synergy needs the true joint `p`.
pub fn compute_pid(
    p: &JointDist,
    q_star: &JointDist,
    trace: &SolveTrace,
    config: &SolverConfig,
) -> Result<PidResult> {
    let marginals = crate::dist::pairwise_marginals(p, false);
    let partial = compute_partial_pid(&marginals, q_star, trace, config)?;
    let total_mi = total_information(p);
    Ok(PidResult {
        r: partial.r,
        u1: partial.u1,
        u2: partial.u2,
        s: total_mi - partial.min_total_mi,
        total_mi,
        converged: partial.converged,
        iterations: partial.iterations,
    })
}

/// Solves the program for the marginals of `p` and decomposes.
pub fn pid(p: &JointDist, config: &SolverConfig) -> Result<PidResult> {
    let marginals = crate::dist::pairwise_marginals(p, false);
    let (q_star, trace) = solve_q_star(&marginals, config)?;
    compute_pid(p, &q_star, &trace, config)
}

/// Discretizes the samples and decomposes their empirical joint.
pub fn pid_from_samples(
    table: &SampleTable,
    dconfig: &DiscretizeConfig,
    sconfig: &SolverConfig,
) -> Result<PidResult> {
    let d = discretize(table, dconfig)?;
    pid(&d.joint, sconfig)
}

/// Marginals-only mode.
pub fn partial_pid(marginals: &PairwiseMarginals, config: &SolverConfig) -> Result<PartialPid> {
    let (q_star, trace) = solve_q_star(marginals, config)?;
    compute_partial_pid(marginals, &q_star, &trace, config)
}

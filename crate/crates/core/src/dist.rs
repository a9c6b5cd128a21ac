//! Finite joint distributions over `(X1, X2, Y)` and the entropy and
//! mutual-information primitives built on them.
//!
//! All quantities are in bits. Tensors are stored densely in
//! `(i1, i2, iy)` order with `iy` varying fastest, so the flat index of a
//! cell is `(i1 * n2 + i2) * ny + iy`.

use crate::error::{Error, Result};

/// Cell cap applied by [`Cardinalities::new`].
pub const DEFAULT_MAX_CELLS: usize = 10_000_000;

/// Tolerance on the total mass of a distribution.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Tolerance when two marginal tables must imply the same lower marginal.
pub const CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cardinalities {
    n1: usize,
    n2: usize,
    ny: usize,
}

impl Cardinalities {
    pub fn new(n1: usize, n2: usize, ny: usize) -> Result<Self> {
        Self::with_cap(n1, n2, ny, DEFAULT_MAX_CELLS)
    }

    pub fn with_cap(n1: usize, n2: usize, ny: usize, cap: usize) -> Result<Self> {
        for (axis, n) in [("n1", n1), ("n2", n2), ("ny", ny)] {
            if n == 0 {
                return Err(Error::ZeroCardinality { axis });
            }
        }
        let cells = n1
            .checked_mul(n2)
            .and_then(|c| c.checked_mul(ny))
            .unwrap_or(usize::MAX);
        if cells > cap {
            return Err(Error::CellCapExceeded { cells, cap });
        }
        Ok(Self { n1, n2, ny })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cells(&self) -> usize {
        self.n1 * self.n2 * self.ny
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, iy: usize) -> usize {
        (i1 * self.n2 + i2) * self.ny + iy
    }

    /// Size of each axis in `(X1, X2, Y)` order.
    pub fn dims(&self) -> [usize; 3] {
        [self.n1, self.n2, self.ny]
    }
}

/// One of the three random variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X1,
    X2,
    Y,
}

impl Var {
    fn axis(self) -> usize {
        match self {
            Var::X1 => 0,
            Var::X2 => 1,
            Var::Y => 2,
        }
    }
}

/// A subset of `{X1, X2, Y}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VarSet(u8);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);
    pub const X1: VarSet = VarSet(0b001);
    pub const X2: VarSet = VarSet(0b010);
    pub const Y: VarSet = VarSet(0b100);
    pub const X1X2: VarSet = VarSet(0b011);
    pub const X1Y: VarSet = VarSet(0b101);
    pub const X2Y: VarSet = VarSet(0b110);
    pub const ALL: VarSet = VarSet(0b111);

    pub fn of(vars: &[Var]) -> Self {
        vars.iter().fold(Self::EMPTY, |acc, v| acc.with(*v))
    }

    pub fn with(self, v: Var) -> Self {
        VarSet(self.0 | (1 << v.axis()))
    }

    pub fn contains(self, v: Var) -> bool {
        self.0 & (1 << v.axis()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn intersects(self, other: VarSet) -> bool {
        self.0 & other.0 != 0
    }

    /// Members in axis order.
    pub fn vars(self) -> impl Iterator<Item = Var> {
        [Var::X1, Var::X2, Var::Y]
            .into_iter()
            .filter(move |v| self.contains(*v))
    }
}

/// Row-major dense matrix used for the two-variable marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(
                "matrix dimensions must be positive".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.get(r, c);
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// Checks that `p` is a probability vector: finite, non-negative, and
/// summing to one within [`NORMALIZATION_TOL`].
pub fn validate_distribution(p: &[f64]) -> Result<()> {
    for (index, &value) in p.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        if value < 0.0 {
            return Err(Error::NegativeMass { index, value });
        }
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { sum });
    }
    Ok(())
}

/// A normalized probability tensor over `(X1, X2, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    card: Cardinalities,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(card: Cardinalities, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != card.cells() {
            return Err(Error::ShapeMismatch {
                expected: card.cells(),
                found: probs.len(),
            });
        }
        validate_distribution(&probs)?;
        Ok(Self { card, probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(card: Cardinalities, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != card.cells() {
            return Err(Error::ShapeMismatch {
                expected: card.cells(),
                found: weights.len(),
            });
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeMass { index, value });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::NotNormalized { sum: total });
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { card, probs })
    }

    pub fn from_fn(card: Cardinalities, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut probs = Vec::with_capacity(card.cells());
        for i1 in 0..card.n1 {
            for i2 in 0..card.n2 {
                for iy in 0..card.ny {
                    probs.push(f(i1, i2, iy));
                }
            }
        }
        Self::new(card, probs)
    }

    /// Wraps a tensor produced by a solver. The caller guarantees shape and
    /// non-negativity; the mass is renormalized to absorb rounding.
    pub(crate) fn from_solver(card: Cardinalities, mut probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), card.cells());
        let total: f64 = probs.iter().sum();
        if total > 0.0 && total != 1.0 {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        Self { card, probs }
    }

    pub fn card(&self) -> Cardinalities {
        self.card
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    #[inline]
    pub fn get(&self, i1: usize, i2: usize, iy: usize) -> f64 {
        self.probs[self.card.index(i1, i2, iy)]
    }

    /// The same distribution with the roles of `X1` and `X2` exchanged.
    pub fn swap_modalities(&self) -> JointDist {
        let c = self.card;
        let card = Cardinalities {
            n1: c.n2,
            n2: c.n1,
            ny: c.ny,
        };
        let mut probs = vec![0.0; c.cells()];
        for i1 in 0..c.n1 {
            for i2 in 0..c.n2 {
                for iy in 0..c.ny {
                    probs[card.index(i2, i1, iy)] = self.get(i1, i2, iy);
                }
            }
        }
        JointDist { card, probs }
    }

    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    /// Entropy of the marginal over `vars`; zero for the empty set.
    pub fn marginal_entropy(&self, vars: VarSet) -> f64 {
        if vars.is_empty() {
            return 0.0;
        }
        entropy_bits(&marginal_probs(self, vars).1)
    }
}

/// Marginal of a [`JointDist`] over a subset of its variables. `probs` is
/// row-major over `vars` in axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    pub vars: VarSet,
    pub shape: Vec<usize>,
    pub probs: Vec<f64>,
}

fn marginal_probs(dist: &JointDist, keep: VarSet) -> (Vec<usize>, Vec<f64>) {
    let dims = dist.card.dims();
    let kept: Vec<usize> = keep.vars().map(Var::axis).collect();
    let shape: Vec<usize> = kept.iter().map(|&a| dims[a]).collect();
    let mut out = vec![0.0; shape.iter().product()];
    let mut flat = 0;
    for i1 in 0..dims[0] {
        for i2 in 0..dims[1] {
            for iy in 0..dims[2] {
                let idx = [i1, i2, iy];
                let target = kept.iter().fold(0, |acc, &a| acc * dims[a] + idx[a]);
                out[target] += dist.probs[flat];
                flat += 1;
            }
        }
    }
    (shape, out)
}

/// Sums out every variable not in `keep`.
pub fn marginalize(dist: &JointDist, keep: VarSet) -> Result<MarginalTable> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument(
            "marginalize needs at least one variable to keep".into(),
        ));
    }
    let (shape, probs) = marginal_probs(dist, keep);
    Ok(MarginalTable {
        vars: keep,
        shape,
        probs,
    })
}

/// Shannon entropy in bits of an already-validated mass vector.
pub(crate) fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// Shannon entropy in bits; `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    validate_distribution(p)?;
    Ok(entropy_bits(p))
}

/// `I(A; B)` for disjoint, non-empty variable groups.
pub fn mutual_info(dist: &JointDist, a: VarSet, b: VarSet) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "mutual information needs two non-empty groups".into(),
        ));
    }
    if a.intersects(b) {
        return Err(Error::InvalidArgument(
            "mutual information groups must be disjoint".into(),
        ));
    }
    Ok(dist.marginal_entropy(a) + dist.marginal_entropy(b) - dist.marginal_entropy(a.union(b)))
}

/// `I(A; B | C)` for pairwise disjoint groups with `A`, `B` non-empty.
pub fn conditional_mutual_info_of(
    dist: &JointDist,
    a: VarSet,
    b: VarSet,
    given: VarSet,
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "conditional mutual information needs two non-empty groups".into(),
        ));
    }
    if a.intersects(b) || a.intersects(given) || b.intersects(given) {
        return Err(Error::InvalidArgument(
            "conditional mutual information groups must be disjoint".into(),
        ));
    }
    Ok(dist.marginal_entropy(a.union(given)) + dist.marginal_entropy(b.union(given))
        - dist.marginal_entropy(given)
        - dist.marginal_entropy(a.union(b).union(given)))
}

/// `I(X1; X2 | Y)`.
pub fn conditional_mutual_info(dist: &JointDist) -> f64 {
    dist.marginal_entropy(VarSet::X1Y) + dist.marginal_entropy(VarSet::X2Y)
        - dist.marginal_entropy(VarSet::Y)
        - dist.entropy()
}

/// Co-information `I(X1; X2; Y) = I(X1; X2) - I(X1; X2 | Y)`; may be negative.
pub fn co_information(dist: &JointDist) -> f64 {
    let h1 = dist.marginal_entropy(VarSet::X1);
    let h2 = dist.marginal_entropy(VarSet::X2);
    let hy = dist.marginal_entropy(VarSet::Y);
    let h12 = dist.marginal_entropy(VarSet::X1X2);
    let h1y = dist.marginal_entropy(VarSet::X1Y);
    let h2y = dist.marginal_entropy(VarSet::X2Y);
    let h = dist.entropy();
    h1 + h2 + hy - h12 - h1y - h2y + h
}

/// `I({X1, X2}; Y)`.
pub fn total_information(dist: &JointDist) -> f64 {
    dist.marginal_entropy(VarSet::X1X2) + dist.marginal_entropy(VarSet::Y) - dist.entropy()
}

/// The observable pairwise marginals `p(x1,y)`, `p(x2,y)` and optionally
/// `p(x1,x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMarginals {
    m1y: Matrix,
    m2y: Matrix,
    m12: Option<Matrix>,
}

impl PairwiseMarginals {
    pub fn new(m1y: Matrix, m2y: Matrix, m12: Option<Matrix>) -> Result<Self> {
        Self::with_cap(m1y, m2y, m12, DEFAULT_MAX_CELLS)
    }

    pub fn with_cap(m1y: Matrix, m2y: Matrix, m12: Option<Matrix>, cap: usize) -> Result<Self> {
        if m2y.cols != m1y.cols {
            return Err(Error::ShapeMismatch {
                expected: m1y.cols,
                found: m2y.cols,
            });
        }
        Cardinalities::with_cap(m1y.rows, m2y.rows, m1y.cols, cap)?;
        validate_distribution(&m1y.data)?;
        validate_distribution(&m2y.data)?;
        check_agree("p(y) from m1y and m2y", &m1y.col_sums(), &m2y.col_sums())?;
        if let Some(m12) = &m12 {
            if m12.rows != m1y.rows {
                return Err(Error::ShapeMismatch {
                    expected: m1y.rows,
                    found: m12.rows,
                });
            }
            if m12.cols != m2y.rows {
                return Err(Error::ShapeMismatch {
                    expected: m2y.rows,
                    found: m12.cols,
                });
            }
            validate_distribution(&m12.data)?;
            check_agree("p(x1) from m1y and m12", &m1y.row_sums(), &m12.row_sums())?;
            check_agree("p(x2) from m2y and m12", &m2y.row_sums(), &m12.col_sums())?;
        }
        Ok(Self { m1y, m2y, m12 })
    }

    pub fn m1y(&self) -> &Matrix {
        &self.m1y
    }

    pub fn m2y(&self) -> &Matrix {
        &self.m2y
    }

    pub fn m12(&self) -> Option<&Matrix> {
        self.m12.as_ref()
    }

    pub fn n1(&self) -> usize {
        self.m1y.rows
    }

    pub fn n2(&self) -> usize {
        self.m2y.rows
    }

    pub fn ny(&self) -> usize {
        self.m1y.cols
    }

    pub fn card(&self) -> Cardinalities {
        Cardinalities {
            n1: self.n1(),
            n2: self.n2(),
            ny: self.ny(),
        }
    }

    /// Label marginal `p(y)`, taken from `m1y`.
    pub fn p_y(&self) -> Vec<f64> {
        self.m1y.col_sums()
    }

    pub fn without_pair(&self) -> PairwiseMarginals {
        PairwiseMarginals {
            m12: None,
            ..self.clone()
        }
    }

    /// Largest absolute deviation of the marginals of `q` from these.
    pub fn violation(&self, q: &JointDist) -> f64 {
        let c = q.card();
        if c != self.card() {
            return f64::INFINITY;
        }
        let (_, q1y) = marginal_probs(q, VarSet::X1Y);
        let (_, q2y) = marginal_probs(q, VarSet::X2Y);
        let mut worst = max_abs_diff(&q1y, &self.m1y.data).max(max_abs_diff(&q2y, &self.m2y.data));
        if let Some(m12) = &self.m12 {
            let (_, q12) = marginal_probs(q, VarSet::X1X2);
            worst = worst.max(max_abs_diff(&q12, &m12.data));
        }
        worst
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_agree(what: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    for (index, (x, y)) in a.iter().zip(b).enumerate() {
        let deviation = (x - y).abs();
        if deviation > CONSISTENCY_TOL {
            return Err(Error::InconsistentMarginals {
                what,
                index,
                deviation,
            });
        }
    }
    Ok(())
}

/// Projects `dist` onto its pairwise marginals.
pub fn pairwise_marginals(dist: &JointDist, include_m12: bool) -> PairwiseMarginals {
    let c = dist.card;
    let (_, m1y) = marginal_probs(dist, VarSet::X1Y);
    let (_, m2y) = marginal_probs(dist, VarSet::X2Y);
    let m12 = include_m12.then(|| Matrix {
        rows: c.n1,
        cols: c.n2,
        data: marginal_probs(dist, VarSet::X1X2).1,
    });
    PairwiseMarginals {
        m1y: Matrix {
            rows: c.n1,
            cols: c.ny,
            data: m1y,
        },
        m2y: Matrix {
            rows: c.n2,
            cols: c.ny,
            data: m2y,
        },
        m12,
    }
}

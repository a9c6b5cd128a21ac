//! Turning raw per-modality features into discrete codes and an empirical
//! joint distribution, either by fixed-width histogram binning or k-means
//! clustering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::{Cardinalities, JointDist};
use crate::error::{Error, Result};

/// Upper clamp for the automatic bin count.
pub const MAX_AUTO_BINS: usize = 100;

/// `n` rows of `dim`-dimensional finite features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "features need at least one row and one column".into(),
            ));
        }
        if data.len() != rows * dim {
            return Err(Error::ShapeMismatch {
                expected: rows * dim,
                found: data.len(),
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::new(values.len(), 1, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.dim + j]).collect()
    }
}

/// Paired samples `(x1, x2, y)` with integer labels in `[0, ny)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    x1: Features,
    x2: Features,
    y: Vec<usize>,
    ny: usize,
}

impl SampleTable {
    /// `ny` defaults to one more than the largest label.
    pub fn new(x1: Features, x2: Features, y: Vec<usize>, ny: Option<usize>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidArgument("sample table is empty".into()));
        }
        for (what, rows) in [("x1", x1.rows), ("x2", x2.rows)] {
            if rows != y.len() {
                return Err(Error::InvalidArgument(format!(
                    "{what} has {rows} rows but y has {}",
                    y.len()
                )));
            }
        }
        let ny = ny.unwrap_or_else(|| y.iter().max().map_or(1, |m| m + 1));
        if let Some((row, &code)) = y.iter().enumerate().find(|(_, &v)| v >= ny) {
            return Err(Error::CodeOutOfRange {
                row,
                column: "y",
                code,
                card: ny,
            });
        }
        Ok(Self { x1, x2, y, ny })
    }

    pub fn x1(&self) -> &Features {
        &self.x1
    }

    pub fn x2(&self) -> &Features {
        &self.x2
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// The same inputs with the label column replaced, e.g. by model
    /// predictions.
    pub fn with_labels(&self, y: Vec<usize>, ny: Option<usize>) -> Result<Self> {
        Self::new(self.x1.clone(), self.x2.clone(), y, ny)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Histogram,
    KMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinCount {
    Auto,
    Fixed(usize),
}

impl BinCount {
    fn resolve(self, n: usize) -> usize {
        match self {
            BinCount::Auto => auto_bin_count(n),
            BinCount::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizeConfig {
    pub method: Method,
    /// Bins per feature for histograms, clusters for k-means.
    pub bins: BinCount,
    pub seed: u64,
    pub kmeans_max_iters: usize,
    pub kmeans_restarts: usize,
}

impl Default for DiscretizeConfig {
    fn default() -> Self {
        Self {
            method: Method::Histogram,
            bins: BinCount::Auto,
            seed: 0,
            kmeans_max_iters: 100,
            kmeans_restarts: 5,
        }
    }
}

impl DiscretizeConfig {
    pub fn validate(&self) -> Result<()> {
        if let BinCount::Fixed(k) = self.bins {
            if k < 2 {
                return Err(Error::InvalidArgument(format!(
                    "bin/cluster count must be at least 2, got {k}"
                )));
            }
        }
        if self.kmeans_restarts == 0 {
            return Err(Error::InvalidArgument("kmeans_restarts must be positive".into()));
        }
        Ok(())
    }
}

/// Cube-root rule: the smallest `k` with `k^3 >= n`, clamped to
/// `[2, MAX_AUTO_BINS]`.
pub fn auto_bin_count(n: usize) -> usize {
    let mut k = (n as f64).cbrt().floor() as usize;
    while k.saturating_pow(3) < n {
        k += 1;
    }
    while k > 1 && (k - 1).saturating_pow(3) >= n {
        k -= 1;
    }
    k.clamp(2, MAX_AUTO_BINS)
}

/// Fixed-width binning of one scalar feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    pub codes: Vec<usize>,
    /// Interior edges; the first and last bins are unbounded. A value equal
    /// to an edge goes to the upper bin.
    pub edges: Vec<f64>,
    pub bins: usize,
    pub min: f64,
    pub max: f64,
    /// Every value was identical, so a single bin was used.
    pub degenerate: bool,
}

impl Binning {
    /// Bin of an arbitrary value under these edges.
    pub fn code_of(&self, v: f64) -> usize {
        self.edges.partition_point(|&e| e <= v)
    }
}

pub fn bin_scalar_features(values: &[f64], bins: BinCount) -> Result<Binning> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot bin an empty column".into()));
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    if let BinCount::Fixed(k) = bins {
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "bin count must be at least 2, got {k}"
            )));
        }
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(Binning {
            codes: vec![0; values.len()],
            edges: Vec::new(),
            bins: 1,
            min,
            max,
            degenerate: true,
        });
    }
    let k = bins.resolve(values.len());
    let width = (max - min) / k as f64;
    let edges: Vec<f64> = (1..k).map(|j| min + width * j as f64).collect();
    let mut binning = Binning {
        codes: Vec::new(),
        edges,
        bins: k,
        min,
        max,
        degenerate: false,
    };
    binning.codes = values.iter().map(|&v| binning.code_of(v)).collect();
    Ok(binning)
}

/// Result of k-means clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub codes: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares of the returned partition.
    pub inertia: f64,
    /// Inertia after every Lloyd update of the winning restart.
    pub inertia_trace: Vec<f64>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp(rows: &Features, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.rows();
    let mut centroids = vec![rows.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(rows.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = rows.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(rows.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(rows: &Features, mut centroids: Vec<Vec<f64>>, max_iters: usize) -> Clustering {
    let (n, dim, k) = (rows.rows(), rows.dim(), centroids.len());
    let mut codes = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut cost = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(rows.row(i), &centroids);
            if codes[i] != c {
                codes[i] = c;
                changed = true;
            }
            cost[i] = d;
        }
        let mut counts = vec![0usize; k];
        codes.iter().for_each(|&c| counts[c] += 1);
        // empty clusters take over the point farthest from its centroid
        for c in 0..k {
            if counts[c] == 0 {
                let (far, &d) = cost
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| counts[codes[*i]] > 1)
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                    .unwrap_or((0, &0.0));
                if d > 0.0 {
                    counts[codes[far]] -= 1;
                    codes[far] = c;
                    counts[c] = 1;
                    cost[far] = 0.0;
                    changed = true;
                }
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for i in 0..n {
            for (s, v) in sums[codes[i]].iter_mut().zip(rows.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let inertia: f64 = (0..n).map(|i| sq_dist(rows.row(i), &centroids[codes[i]])).sum();
        trace.push(inertia);
        if !changed {
            break;
        }
    }
    Clustering {
        codes,
        centroids,
        inertia: *trace.last().unwrap_or(&0.0),
        inertia_trace: trace,
    }
}

/// Lloyd's algorithm with k-means++ seeding; the best of
/// `config.kmeans_restarts` runs by inertia is returned (earliest on ties).
pub fn kmeans_discretize(rows: &Features, k: usize, config: &DiscretizeConfig) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > rows.rows() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} available points",
            rows.rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<Clustering> = None;
    for _ in 0..config.kmeans_restarts.max(1) {
        let run = lloyd(rows, kmeans_pp(rows, k, &mut rng), config.kmeans_max_iters);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// `count(i1, i2, iy) / n`.
pub fn empirical_joint(
    x1_codes: &[usize],
    x2_codes: &[usize],
    y: &[usize],
    card: Cardinalities,
) -> Result<JointDist> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if x1_codes.len() != n || x2_codes.len() != n {
        return Err(Error::InvalidArgument(format!(
            "code columns have lengths {}, {}, {}",
            x1_codes.len(),
            x2_codes.len(),
            n
        )));
    }
    let mut counts = vec![0u64; card.cells()];
    for row in 0..n {
        for (column, code, limit) in [
            ("x1", x1_codes[row], card.n1()),
            ("x2", x2_codes[row], card.n2()),
            ("y", y[row], card.ny()),
        ] {
            if code >= limit {
                return Err(Error::CodeOutOfRange {
                    row,
                    column,
                    code,
                    card: limit,
                });
            }
        }
        counts[card.index(x1_codes[row], x2_codes[row], y[row])] += 1;
    }
    let probs = counts.into_iter().map(|c| c as f64 / n as f64).collect();
    JointDist::new(card, probs)
}

/// How a modality's codes were produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoding {
    /// One binning per feature. With several features the per-feature bins
    /// are combined and only the occupied combinations become categories,
    /// listed in `combos` in ascending order.
    Bins {
        per_feature: Vec<Binning>,
        combos: Option<Vec<Vec<usize>>>,
    },
    Clusters(Clustering),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModality {
    pub codes: Vec<usize>,
    pub card: usize,
    pub encoding: Encoding,
}

impl DiscreteModality {
    pub fn degenerate(&self) -> bool {
        match &self.encoding {
            Encoding::Bins { per_feature, .. } => per_feature.iter().any(|b| b.degenerate),
            Encoding::Clusters(_) => false,
        }
    }
}

pub fn discretize_modality(features: &Features, config: &DiscretizeConfig) -> Result<DiscreteModality> {
    config.validate()?;
    match config.method {
        Method::Histogram => {
            let per_feature = (0..features.dim())
                .map(|j| bin_scalar_features(&features.column(j), config.bins))
                .collect::<Result<Vec<_>>>()?;
            if per_feature.len() == 1 {
                let b = &per_feature[0];
                return Ok(DiscreteModality {
                    codes: b.codes.clone(),
                    card: b.bins,
                    encoding: Encoding::Bins {
                        per_feature,
                        combos: None,
                    },
                });
            }
            let tuples: Vec<Vec<usize>> = (0..features.rows())
                .map(|i| per_feature.iter().map(|b| b.codes[i]).collect())
                .collect();
            let mut combos = tuples.clone();
            combos.sort();
            combos.dedup();
            let codes = tuples
                .iter()
                .map(|t| combos.binary_search(t).expect("combo present"))
                .collect();
            Ok(DiscreteModality {
                codes,
                card: combos.len(),
                encoding: Encoding::Bins {
                    per_feature,
                    combos: Some(combos),
                },
            })
        }
        Method::KMeans => {
            let k = config.bins.resolve(features.rows()).min(features.rows());
            let clustering = kmeans_discretize(features, k, config)?;
            Ok(DiscreteModality {
                codes: clustering.codes.clone(),
                card: k,
                encoding: Encoding::Clusters(clustering),
            })
        }
    }
}

/// Both modalities discretized independently plus the empirical joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub joint: JointDist,
    pub x1: DiscreteModality,
    pub x2: DiscreteModality,
}

pub fn discretize(table: &SampleTable, config: &DiscretizeConfig) -> Result<Discretized> {
    discretize_with_cap(table, config, crate::dist::DEFAULT_MAX_CELLS)
}

pub fn discretize_with_cap(table: &SampleTable, config: &DiscretizeConfig, cap: usize) -> Result<Discretized> {
    let x1 = discretize_modality(table.x1(), config)?;
    let x2 = discretize_modality(table.x2(), &DiscretizeConfig {
        seed: config.seed.wrapping_add(1),
        ..config.clone()
    })?;
    let card = Cardinalities::with_cap(x1.card, x2.card, table.ny(), cap)?;
    let joint = empirical_joint(&x1.codes, &x2.codes, table.y(), card)?;
    Ok(Discretized { joint, x1, x2 })
}

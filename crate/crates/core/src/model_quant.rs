//! Interactions captured by models, PID agreement between a dataset and a
//! model, and nearest-dataset model selection.

use crate::discretize::{DiscretizeConfig, SampleTable};
use crate::dist::{marginalize, Cardinalities, JointDist, VarSet};
use crate::error::{Error, Result};
use crate::solver::{pid, pid_from_samples, PidResult, SolverConfig};

/// Totals at or below this are treated as carrying no information.
pub const DEGENERATE_TOTAL: f64 = 1e-9;

/// PID of a model: the same pipeline as for a dataset, with the model's
/// predictions in place of the labels.
pub fn model_pid(
    predictions: &SampleTable,
    dconfig: &DiscretizeConfig,
    sconfig: &SolverConfig,
) -> Result<PidResult> {
    pid_from_samples(predictions, dconfig, sconfig)
}

/// Joint of the inputs of `p` with the output of a deterministic predictor
/// `f(x1, x2) in 0..n_labels`.
pub fn prediction_joint(
    p: &JointDist,
    n_labels: usize,
    f: impl Fn(usize, usize) -> usize,
) -> Result<JointDist> {
    let c = p.card();
    let card = Cardinalities::new(c.n1(), c.n2(), n_labels)?;
    let m12 = marginalize(p, VarSet::X1X2)?;
    let mut probs = vec![0.0; card.cells()];
    for i1 in 0..c.n1() {
        for i2 in 0..c.n2() {
            let label = f(i1, i2);
            if label >= n_labels {
                return Err(Error::InvalidArgument(format!(
                    "predictor returned label {label} for ({i1}, {i2}) but only {n_labels} labels exist"
                )));
            }
            probs[card.index(i1, i2, label)] = m12.probs[i1 * c.n2() + i2];
        }
    }
    JointDist::from_weights(card, probs)
}

/// PID shares that sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedPid {
    pub r_hat: f64,
    pub u1_hat: f64,
    pub u2_hat: f64,
    pub s_hat: f64,
    /// Set when the interactions sum to (almost) nothing; all shares are
    /// then zero and the profile is rejected downstream.
    pub degenerate: bool,
}

impl NormalizedPid {
    /// Negative components are floored at zero before dividing by the sum.
    pub fn from_components(c: [f64; 4]) -> Self {
        let c = c.map(|v| if v.is_finite() { v.max(0.0) } else { 0.0 });
        let total: f64 = c.iter().sum();
        if total <= DEGENERATE_TOTAL {
            return Self {
                r_hat: 0.0,
                u1_hat: 0.0,
                u2_hat: 0.0,
                s_hat: 0.0,
                degenerate: true,
            };
        }
        let [r_hat, u1_hat, u2_hat, s_hat] = c.map(|v| v / total);
        Self {
            r_hat,
            u1_hat,
            u2_hat,
            s_hat,
            degenerate: false,
        }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.r_hat, self.u1_hat, self.u2_hat, self.s_hat]
    }

    fn usable(&self) -> Result<&Self> {
        if self.degenerate {
            Err(Error::DegenerateProfile)
        } else {
            Ok(self)
        }
    }
}

pub fn normalize_pid(pid: &PidResult) -> NormalizedPid {
    NormalizedPid::from_components(pid.components())
}

/// Per-interaction agreement `normalized dataset share x model bits`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementScore {
    /// Ordered `R, U1, U2, S`.
    pub per_interaction: [f64; 4],
    pub total: f64,
}

/// The dataset PID is normalized, the model PID is used in bits as is.
pub fn agreement(dataset_pid: &PidResult, model_pid: &PidResult) -> Result<AgreementScore> {
    agreement_with_profile(&normalize_pid(dataset_pid), model_pid)
}

pub fn agreement_with_profile(profile: &NormalizedPid, model_pid: &PidResult) -> Result<AgreementScore> {
    let w = profile.usable()?.components();
    let m = model_pid.components();
    let per_interaction = [w[0] * m[0], w[1] * m[1], w[2] * m[2], w[3] * m[3]];
    Ok(AgreementScore {
        per_interaction,
        total: per_interaction.iter().sum(),
    })
}

/// L1 distance between two normalized profiles, in `[0, 2]`.
pub fn dataset_similarity(a: &NormalizedPid, b: &NormalizedPid) -> Result<f64> {
    let (a, b) = (a.usable()?.components(), b.usable()?.components());
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedModel {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    pub dataset_id: u32,
    pub name: String,
    pub profile: NormalizedPid,
    /// Best first.
    pub models: Vec<RankedModel>,
}

/// Datasets with known interaction profiles and the models that did best
/// on each.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelLibrary {
    entries: Vec<LibraryEntry>,
}

impl ModelLibrary {
    /// Checks that profiles are usable, dataset ids are unique, model ids
    /// are unique within an entry and scores never increase down a ranking.
    pub fn new(entries: Vec<LibraryEntry>) -> Result<Self> {
        for (k, e) in entries.iter().enumerate() {
            e.profile.usable()?;
            if entries[..k].iter().any(|o| o.dataset_id == e.dataset_id) {
                return Err(Error::InvalidArgument(format!("duplicate dataset id {}", e.dataset_id)));
            }
            for (j, m) in e.models.iter().enumerate() {
                if !m.score.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "model {} of dataset {} has a non-finite score",
                        m.id, e.dataset_id
                    )));
                }
                if e.models[..j].iter().any(|o| o.id == m.id) {
                    return Err(Error::InvalidArgument(format!(
                        "model {} listed twice for dataset {}",
                        m.id, e.dataset_id
                    )));
                }
                if j > 0 && m.score > e.models[j - 1].score {
                    return Err(Error::InvalidArgument(format!(
                        "models of dataset {} are not ranked by score",
                        e.dataset_id
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub dataset_id: u32,
    pub distance: f64,
    pub models: Vec<RankedModel>,
}

/// Models of the library dataset whose profile is closest to `target`;
/// equal distances go to the lowest dataset id.
pub fn select_models(target: &NormalizedPid, library: &ModelLibrary, top_k: usize) -> Result<Selection> {
    target.usable()?;
    let mut best: Option<(f64, &LibraryEntry)> = None;
    for e in library.entries() {
        let d = dataset_similarity(target, &e.profile)?;
        let better = match best {
            None => true,
            Some((bd, be)) => d < bd || (d == bd && e.dataset_id < be.dataset_id),
        };
        if better {
            best = Some((d, e));
        }
    }
    let (distance, entry) = best.ok_or(Error::EmptyLibrary)?;
    Ok(Selection {
        dataset_id: entry.dataset_id,
        distance,
        models: entry.models.iter().take(top_k).cloned().collect(),
    })
}

/// Building blocks of the synthetic bitwise datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interaction {
    /// One bit seen by both modalities and copied to the label.
    Redundant,
    /// One bit seen only by `x1` and copied to the label.
    Unique1,
    /// One bit seen only by `x2` and copied to the label.
    Unique2,
    /// `x1` and `x2` each see one bit; the label carries their XOR.
    Synergy,
}

impl Interaction {
    pub const ALL: [Interaction; 4] = [
        Interaction::Redundant,
        Interaction::Unique1,
        Interaction::Unique2,
        Interaction::Synergy,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Interaction::Redundant => "R",
            Interaction::Unique1 => "U1",
            Interaction::Unique2 => "U2",
            Interaction::Synergy => "S",
        }
    }
}

/// Uniform joint over independent random bits in which every listed
/// interaction contributes one bit of label information.
pub fn bitwise_dataset(parts: &[Interaction]) -> Result<JointDist> {
    let has = |i: Interaction| parts.contains(&i);
    use Interaction::*;
    // (bits of x1, bits of x2, bits of y) per interaction
    let widths = |i: Interaction| match i {
        Redundant => (1, 1, 1),
        Unique1 => (1, 0, 1),
        Unique2 => (0, 1, 1),
        Synergy => (1, 1, 1),
    };
    let (mut b1, mut b2, mut by) = (0u32, 0u32, 0u32);
    for i in Interaction::ALL.into_iter().filter(|&i| has(i)) {
        let (a, b, c) = widths(i);
        b1 += a;
        b2 += b;
        by += c;
    }
    let card = Cardinalities::new(1 << b1, 1 << b2, 1 << by)?;
    let mut probs = vec![0.0; card.cells()];
    let sources = 5u32;
    let weight = 1.0 / f64::from(1u32 << sources);
    for bits in 0..1usize << sources {
        let [r, u1, u2, s1, s2] = [0, 1, 2, 3, 4].map(|k| (bits >> k) & 1);
        let (mut x1, mut x2, mut y) = (0usize, 0usize, 0usize);
        let push = |acc: &mut usize, bit: usize| *acc = (*acc << 1) | bit;
        if has(Redundant) {
            push(&mut x1, r);
            push(&mut x2, r);
            push(&mut y, r);
        }
        if has(Unique1) {
            push(&mut x1, u1);
            push(&mut y, u1);
        }
        if has(Unique2) {
            push(&mut x2, u2);
            push(&mut y, u2);
        }
        if has(Synergy) {
            push(&mut x1, s1);
            push(&mut x2, s2);
            push(&mut y, s1 ^ s2);
        }
        probs[card.index(x1, x2, y)] += weight;
    }
    JointDist::new(card, probs)
}

/// Deterministic predictors used as the candidate models of the synthetic
/// library. All are built from the true distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    /// `argmax_y p(y | x1)`.
    UnimodalX1,
    /// `argmax_y p(y | x2)`.
    UnimodalX2,
    /// `argmax_y p(y | x1) + p(y | x2)`.
    AdditiveFusion,
    /// `argmax_y p(y | x1) p(y | x2) / p(y)`.
    ProductOfExperts,
    /// `argmax_y p(y | x1, x2)`.
    JointBayes,
}

impl Predictor {
    pub const ALL: [Predictor; 5] = [
        Predictor::UnimodalX1,
        Predictor::UnimodalX2,
        Predictor::AdditiveFusion,
        Predictor::ProductOfExperts,
        Predictor::JointBayes,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Predictor::UnimodalX1 => "unimodal_x1",
            Predictor::UnimodalX2 => "unimodal_x2",
            Predictor::AdditiveFusion => "additive_fusion",
            Predictor::ProductOfExperts => "product_of_experts",
            Predictor::JointBayes => "joint_bayes",
        }
    }

    /// Label predicted for every `(x1, x2)`, row-major; ties go to the
    /// lowest label.
    pub fn predict(self, p: &JointDist) -> Vec<usize> {
        let [n1, n2, ny] = p.card().dims();
        let m1y = marginalize(p, VarSet::X1Y).expect("non-empty variable set").probs;
        let m2y = marginalize(p, VarSet::X2Y).expect("non-empty variable set").probs;
        let py = marginalize(p, VarSet::Y).expect("non-empty variable set").probs;
        let cond = |m: &[f64], i: usize, y: usize| {
            let row: f64 = m[i * ny..(i + 1) * ny].iter().sum();
            if row > 0.0 {
                m[i * ny + y] / row
            } else {
                0.0
            }
        };
        let mut out = Vec::with_capacity(n1 * n2);
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let score = |y: usize| match self {
                    Predictor::UnimodalX1 => cond(&m1y, i1, y),
                    Predictor::UnimodalX2 => cond(&m2y, i2, y),
                    Predictor::AdditiveFusion => cond(&m1y, i1, y) + cond(&m2y, i2, y),
                    Predictor::ProductOfExperts => {
                        if py[y] > 0.0 {
                            cond(&m1y, i1, y) * cond(&m2y, i2, y) / py[y]
                        } else {
                            0.0
                        }
                    }
                    Predictor::JointBayes => p.get(i1, i2, y),
                };
                let mut best = 0;
                for y in 1..ny {
                    if score(y) > score(best) {
                        best = y;
                    }
                }
                out.push(best);
            }
        }
        out
    }

    /// Probability that the prediction matches the label under `p`.
    pub fn accuracy(self, p: &JointDist) -> f64 {
        let [n1, n2, _] = p.card().dims();
        let labels = self.predict(p);
        let mut acc = 0.0;
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                acc += p.get(i1, i2, labels[i1 * n2 + i2]);
            }
        }
        acc
    }
}

/// The four single-interaction datasets followed by the six pairwise
/// mixtures.
pub fn synthetic_datasets() -> Vec<(String, Vec<Interaction>)> {
    let mut out: Vec<(String, Vec<Interaction>)> = Interaction::ALL
        .iter()
        .map(|&i| (format!("D_{}", i.tag()), vec![i]))
        .collect();
    for a in 0..4 {
        for b in a + 1..4 {
            let (x, y) = (Interaction::ALL[a], Interaction::ALL[b]);
            out.push((format!("D_{}+{}", x.tag(), y.tag()), vec![x, y]));
        }
    }
    out
}

/// Library over [`synthetic_datasets`]; each dataset ranks the
/// [`Predictor`]s by exact accuracy, ties in declaration order.
pub fn synthetic_library(config: &SolverConfig) -> Result<ModelLibrary> {
    let mut entries = Vec::new();
    for (id, (name, parts)) in synthetic_datasets().into_iter().enumerate() {
        let p = bitwise_dataset(&parts)?;
        let profile = normalize_pid(&pid(&p, config)?);
        let mut models: Vec<RankedModel> = Predictor::ALL
            .iter()
            .map(|m| RankedModel {
                id: m.id().to_string(),
                score: m.accuracy(&p),
            })
            .collect();
        // stable sort keeps declaration order among ties
        models.sort_by(|a, b| b.score.total_cmp(&a.score));
        entries.push(LibraryEntry {
            dataset_id: id as u32,
            name,
            profile,
            models,
        });
    }
    ModelLibrary::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn profile(c: [f64; 4]) -> NormalizedPid {
        NormalizedPid::from_components(c)
    }

    fn raw(c: [f64; 4]) -> PidResult {
        PidResult {
            r: c[0],
            u1: c[1],
            u2: c[2],
            s: c[3],
            total_mi: c.iter().sum(),
            converged: true,
            iterations: 0,
        }
    }

    fn entry(id: u32, c: [f64; 4], models: &[&str]) -> LibraryEntry {
        LibraryEntry {
            dataset_id: id,
            name: format!("d{id}"),
            profile: profile(c),
            models: models
                .iter()
                .enumerate()
                .map(|(k, m)| RankedModel {
                    id: m.to_string(),
                    score: 1.0 - k as f64 * 0.1,
                })
                .collect(),
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(profile([0.5, 0.0, 0.0, 0.5]).components(), [0.5, 0.0, 0.0, 0.5]);
        let xor = bitwise_dataset(&[Interaction::Synergy]).unwrap();
        let n = normalize_pid(&pid(&xor, &SolverConfig::default()).unwrap());
        for (a, b) in n.components().iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
        assert!(profile([0.0; 4]).degenerate);
        let n = profile([-1e-12, 0.2, 0.2, 0.6]);
        assert_eq!(n.r_hat, 0.0);
        assert_abs_diff_eq!(n.components().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn agreement_examples() {
        let a = agreement_with_profile(&profile([1.0, 0.0, 0.0, 0.0]), &raw([0.5, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(a.per_interaction, [0.5, 0.0, 0.0, 0.0]);
        assert_eq!(a.total, 0.5);
        let a = agreement(&raw([0.2, 0.3, 0.1, 0.4]), &raw([0.0; 4])).unwrap();
        assert_eq!(a.total, 0.0);
        assert_eq!(agreement(&raw([0.0; 4]), &raw([1.0; 4])).unwrap_err(), Error::DegenerateProfile);
    }

    #[test]
    fn similarity_examples() {
        let a = profile([0.5, 0.0, 0.0, 0.5]);
        assert_eq!(dataset_similarity(&a, &a).unwrap(), 0.0);
        assert_eq!(
            dataset_similarity(&profile([1.0, 0.0, 0.0, 0.0]), &profile([0.0, 0.0, 0.0, 1.0])).unwrap(),
            2.0
        );
        assert_eq!(dataset_similarity(&a, &profile([0.0, 0.0, 0.0, 1.0])).unwrap(), 1.0);
        assert!(dataset_similarity(&a, &profile([0.0; 4])).is_err());
    }

    #[test]
    fn select_examples() {
        let lib = ModelLibrary::new(vec![entry(3, [1.0, 0.0, 0.0, 0.0], &["a", "b", "c", "d"])]).unwrap();
        let s = select_models(&profile([0.0, 0.0, 0.0, 1.0]), &lib, 3).unwrap();
        assert_eq!(s.dataset_id, 3);
        assert_eq!(s.models.iter().map(|m| m.id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);

        let lib = ModelLibrary::new(vec![
            entry(1, [1.0, 0.0, 0.0, 0.0], &["r"]),
            entry(0, [0.0, 0.0, 0.0, 1.0], &["s"]),
            // equidistant from a 50/50 R/S target: lowest id wins
            entry(2, [0.0, 0.5, 0.5, 0.0], &["u"]),
        ])
        .unwrap();
        assert_eq!(select_models(&profile([0.0, 0.0, 0.0, 1.0]), &lib, 3).unwrap().dataset_id, 0);
        assert_eq!(select_models(&profile([0.5, 0.0, 0.0, 0.5]), &lib, 3).unwrap().dataset_id, 0);

        let empty = ModelLibrary::new(vec![]).unwrap();
        assert_eq!(select_models(&profile([1.0; 4]), &empty, 3).unwrap_err(), Error::EmptyLibrary);
    }

    #[test]
    fn library_validation() {
        assert!(ModelLibrary::new(vec![entry(1, [1.0; 4], &["a"]), entry(1, [1.0; 4], &["b"])]).is_err());
        assert!(ModelLibrary::new(vec![entry(1, [1.0; 4], &["a", "a"])]).is_err());
        assert!(ModelLibrary::new(vec![entry(1, [0.0; 4], &["a"])]).is_err());
        let mut e = entry(1, [1.0; 4], &["a", "b"]);
        e.models[1].score = 2.0;
        assert!(ModelLibrary::new(vec![e]).is_err());
    }

    #[test]
    fn model_on_xor_and_constant_predictor() {
        let xor = bitwise_dataset(&[Interaction::Synergy]).unwrap();
        let cfg = SolverConfig::default();
        let perfect = prediction_joint(&xor, 2, |a, b| a ^ b).unwrap();
        let m = pid(&perfect, &cfg).unwrap();
        assert_abs_diff_eq!(m.s, 1.0, epsilon = 1e-4);
        let constant = prediction_joint(&xor, 2, |_, _| 0).unwrap();
        for v in pid(&constant, &cfg).unwrap().components() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
        assert!(prediction_joint(&xor, 2, |_, _| 2).is_err());
    }

    #[test]
    fn bitwise_datasets_have_expected_profiles() {
        let cfg = SolverConfig::default();
        for (_, parts) in synthetic_datasets() {
            let p = bitwise_dataset(&parts).unwrap();
            let got = pid(&p, &cfg).unwrap();
            let want = Interaction::ALL.map(|i| f64::from(u8::from(parts.contains(&i))));
            for (g, w) in got.components().iter().zip(want) {
                assert_abs_diff_eq!(*g, w, epsilon = 1e-4);
            }
            assert_abs_diff_eq!(got.total_mi, parts.len() as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn predictors_on_bitwise_data() {
        let xor = bitwise_dataset(&[Interaction::Synergy]).unwrap();
        assert_eq!(Predictor::JointBayes.accuracy(&xor), 1.0);
        assert_eq!(Predictor::UnimodalX1.accuracy(&xor), 0.5);
        assert_eq!(Predictor::AdditiveFusion.accuracy(&xor), 0.5);
        let red = bitwise_dataset(&[Interaction::Redundant]).unwrap();
        for m in Predictor::ALL {
            assert_eq!(m.accuracy(&red), 1.0);
        }
    }

    #[test]
    fn synthetic_library_shape() {
        let lib = synthetic_library(&SolverConfig::default()).unwrap();
        assert_eq!(lib.len(), 10);
        let s = select_models(&profile([0.0, 0.0, 0.0, 1.0]), &lib, 3).unwrap();
        assert_eq!(lib.entries()[s.dataset_id as usize].name, "D_S");
        assert_eq!(s.models[0].id, "joint_bayes");
    }
}

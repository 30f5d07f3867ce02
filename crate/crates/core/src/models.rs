//! Prediction forms, the model plug-in contract and built-in baselines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{Sample, SampleInput};
use crate::geometry::{Position, Trajectory};
use crate::scalar::{total_cmp, Real};

/// Default number of equally likely trajectories per prediction.
pub const DEFAULT_NP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionForm {
    Binary,
    Timing,
    Trajectory,
}

impl PredictionForm {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictionForm::Binary => "binary",
            PredictionForm::Timing => "timing",
            PredictionForm::Trajectory => "trajectory",
        }
    }
}

/// Nine non-decreasing decile values of an acceptance-time distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecileSet<T>(pub [T; 9]);

impl<T: Real> DecileSet<T> {
    pub fn new(q: [T; 9]) -> Result<Self> {
        if q.iter().any(|v| !v.is_finite()) || q.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(format!("deciles must be finite and sorted: {q:?}")));
        }
        Ok(Self(q))
    }

    pub fn values(&self) -> &[T; 9] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Prediction<T> {
    Binary {
        a_pred: T,
    },
    /// `deciles` is absent when no acceptance is predicted at all.
    Timing {
        a_pred: T,
        deciles: Option<DecileSet<T>>,
    },
    TrajectorySet {
        trajs: Vec<Trajectory<T>>,
    },
}

impl<T: Real> Prediction<T> {
    pub fn form(&self) -> PredictionForm {
        match self {
            Prediction::Binary { .. } => PredictionForm::Binary,
            Prediction::Timing { .. } => PredictionForm::Timing,
            Prediction::TrajectorySet { .. } => PredictionForm::Trajectory,
        }
    }

    pub fn a_pred(&self) -> Option<T> {
        match *self {
            Prediction::Binary { a_pred } | Prediction::Timing { a_pred, .. } => Some(a_pred),
            Prediction::TrajectorySet { .. } => None,
        }
    }
}

/// Engineered inputs for the built-in models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub gap_at_t0: T,
    /// Target distance to the contested space.
    pub d_t: T,
    pub v_t: T,
    pub v_e: T,
    /// `Δt_D(t_0)`.
    pub dtd: T,
    /// Target positions over `T_I` relative to its position at `t_0`,
    /// flattened as `x0, y0, x1, y1, ...`.
    pub recent: Vec<T>,
}

impl<T: Real> FeatureVector<T> {
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = vec![self.gap_at_t0, self.d_t, self.v_t, self.v_e, self.dtd];
        v.extend_from_slice(&self.recent);
        v
    }
}

/// Velocity over the last input step.
pub fn last_velocity<T: Real>(positions: &[Position<T>], step: T) -> Position<T> {
    match positions {
        [.., a, b] => (*b - *a) * (T::one() / step),
        _ => Position::zero(),
    }
}

pub fn featurize<T: Real>(input: &SampleInput<T>) -> FeatureVector<T> {
    let step = input.step();
    let target = &input.target().positions;
    let anchor = input.target_anchor();
    FeatureVector {
        gap_at_t0: input.gap_at_t0,
        d_t: input.target_distance,
        v_t: last_velocity(target, step).norm(),
        v_e: last_velocity(&input.ego().positions, step).norm(),
        dtd: input.safety_margin,
        recent: target.iter().flat_map(|&p| {
            let r = p - anchor;
            [r.x, r.y]
        })
        .collect(),
    }
}

/// Per-feature affine standardization fit on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    pub fn fit(rows: &[Vec<T>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("feature rows"))?;
        let dim = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::LengthMismatch { what: "feature dimension", left: dim, right: bad.len() });
        }
        let n = T::from_usize_lossy(rows.len());
        let mut mean = vec![T::zero(); dim];
        for row in rows {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m = *m + x;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); dim];
        for row in rows {
            for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
                *v = *v + (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > T::lit(1e-12) {
                    s
                } else {
                    T::one()
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&x, &m), &s)| (x - m) / s)
            .collect()
    }
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus<T: Real>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegHyper {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogRegHyper {
    fn default() -> Self {
        Self { lr: 0.5, epochs: 500, l2: 1e-3 }
    }
}

/// Logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel<T> {
    pub standardizer: Standardizer<T>,
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Real> LogRegModel<T> {
    /// Zero weights: predicts 0.5 everywhere.
    pub fn untrained(standardizer: Standardizer<T>) -> Self {
        let dim = standardizer.mean.len();
        Self { standardizer, weights: vec![T::zero(); dim], bias: T::zero() }
    }

    pub fn train(rows: &[Vec<T>], labels: &[bool], hyper: &LogRegHyper) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch { what: "logreg rows/labels", left: rows.len(), right: labels.len() });
        }
        if !labels.iter().any(|&a| a) || labels.iter().all(|&a| a) {
            return Err(Error::SingleClass("logistic regression training labels"));
        }
        if !(hyper.lr > 0.0) || hyper.l2 < 0.0 {
            return Err(Error::InvalidArgument(format!("invalid logreg hyperparameters {hyper:?}")));
        }
        let standardizer = Standardizer::fit(rows)?;
        let z: Vec<Vec<T>> = rows.iter().map(|r| standardizer.apply(r)).collect();
        let mut model = Self::untrained(standardizer);
        let lr = T::lit(hyper.lr);
        for _ in 0..hyper.epochs {
            let (_, gw, gb) = model.loss_and_grad_standardized(&z, labels, T::lit(hyper.l2));
            for (w, g) in model.weights.iter_mut().zip(gw) {
                *w = *w - lr * g;
            }
            model.bias = model.bias - lr * gb;
        }
        Ok(model)
    }

    /// Mean logistic loss plus `l2/2 · |w|²` and its gradient, over rows
    /// that are already standardized.
    pub fn loss_and_grad_standardized(&self, z: &[Vec<T>], labels: &[bool], l2: T) -> (T, Vec<T>, T) {
        let n = T::from_usize_lossy(z.len());
        let mut loss = T::zero();
        let mut gw = vec![T::zero(); self.weights.len()];
        let mut gb = T::zero();
        for (row, &a) in z.iter().zip(labels) {
            let s = self.score_standardized(row);
            let y = if a { T::one() } else { T::zero() };
            // -[y log σ(s) + (1-y) log(1-σ(s))] = softplus(s) - y s
            loss = loss + softplus(s) - y * s;
            let r = sigmoid(s) - y;
            for (g, &x) in gw.iter_mut().zip(row) {
                *g = *g + r * x;
            }
            gb = gb + r;
        }
        let reg = self.weights.iter().map(|&w| w * w).sum::<T>() * l2 * T::half();
        for (g, &w) in gw.iter_mut().zip(&self.weights) {
            *g = *g / n + l2 * w;
        }
        (loss / n + reg, gw, gb / n)
    }

    fn score_standardized(&self, z: &[T]) -> T {
        self.weights.iter().zip(z).map(|(&w, &x)| w * x).sum::<T>() + self.bias
    }

    pub fn predict(&self, row: &[T]) -> T {
        sigmoid(self.score_standardized(&self.standardizer.apply(row)))
    }
}

/// Arithmetic mean of several probability predictions.
pub fn ensemble_mean<T: Real>(preds: &[Prediction<T>]) -> Result<Prediction<T>> {
    if preds.is_empty() {
        return Err(Error::Empty("ensemble inputs"));
    }
    let mut sum = T::zero();
    for p in preds {
        sum = sum
            + p.a_pred().ok_or_else(|| {
                Error::InvalidArgument("ensemble members must produce a probability".into())
            })?;
    }
    Ok(Prediction::Binary { a_pred: sum / T::from_usize_lossy(preds.len()) })
}

/// Constant-velocity rollouts perturbed by Gaussian acceleration noise,
/// one independent draw per axis and output step.
pub fn noisy_cv_predict<T: Real>(input: &SampleInput<T>, n_p: usize, sigma_a: T, seed: u64) -> Result<Prediction<T>> {
    if n_p == 0 {
        return Err(Error::InvalidArgument("n_p must be at least 1".into()));
    }
    let noise = Normal::new(0.0, sigma_a.to_f64_lossy())
        .map_err(|e| Error::InvalidArgument(format!("sigma_a: {e}")))?;
    let start_v = last_velocity(&input.target().positions, input.step());
    let anchor = input.target_anchor();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajs = (0..n_p)
        .map(|_| {
            let (mut p, mut v, mut t) = (anchor, start_v, input.t_0);
            input
                .output_times
                .iter()
                .map(|&next| {
                    let dt = next - t;
                    let a = Position::new(T::lit(noise.sample(&mut rng)), T::lit(noise.sample(&mut rng)));
                    p = p + v * dt + a * (T::half() * dt * dt);
                    v = v + a * dt;
                    t = next;
                    p
                })
                .collect()
        })
        .collect();
    Ok(Prediction::TrajectorySet { trajs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RetrievalEntry<T> {
    scene_id: String,
    features: Vec<T>,
    /// Future offsets from the anchor, starting with `(0, origin)`.
    future: Vec<(T, Position<T>)>,
}

/// Nearest-neighbour lookup of recorded futures, optionally restricted to
/// one gap-acceptance class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalModel<T> {
    pub class: Option<bool>,
    standardizer: Standardizer<T>,
    entries: Vec<RetrievalEntry<T>>,
}

/// Position along a time-stamped path; constant velocity past either end.
fn sample_path<T: Real>(path: &[(T, Position<T>)], t: T) -> Position<T> {
    let seg = match path.iter().position(|&(ti, _)| ti >= t) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => path.len() - 2,
    };
    let ((ta, pa), (tb, pb)) = (path[seg], path[seg + 1]);
    pa.lerp(pb, (t - ta) / (tb - ta))
}

impl<T: Real> RetrievalModel<T> {
    pub fn train(samples: &[&Sample<T>], class: Option<bool>) -> Result<Self> {
        let kept: Vec<&Sample<T>> = samples
            .iter()
            .copied()
            .filter(|s| class.is_none_or(|c| s.output.accepted == c))
            .collect();
        if kept.is_empty() {
            return Err(Error::Empty("retrieval training class"));
        }
        let rows: Vec<Vec<T>> = kept.iter().map(|s| featurize(&s.input).to_vec()).collect();
        let standardizer = Standardizer::fit(&rows)?;
        let entries = kept
            .iter()
            .zip(&rows)
            .map(|(s, row)| {
                let anchor = s.input.target_anchor();
                let t_0 = s.input.t_0;
                let future = std::iter::once((T::zero(), Position::zero()))
                    .chain(
                        s.input
                            .output_times
                            .iter()
                            .zip(&s.output.target_future)
                            .map(|(&t, &p)| (t - t_0, p - anchor)),
                    )
                    .collect();
                RetrievalEntry { scene_id: s.input.scene_id.clone(), features: standardizer.apply(row), future }
            })
            .collect();
        Ok(Self { class, standardizer, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Training entries ordered by feature distance to the query, ties
    /// broken by scene id.
    pub fn ranked(&self, input: &SampleInput<T>) -> Vec<usize> {
        let query = self.standardizer.apply(&featurize(input).to_vec());
        let mut ranked: Vec<(T, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let d = e.features.iter().zip(&query).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
                (d, i)
            })
            .collect();
        ranked.sort_by(|a, b| {
            total_cmp(&a.0, &b.0).then_with(|| self.entries[a.1].scene_id.cmp(&self.entries[b.1].scene_id))
        });
        ranked.into_iter().map(|(_, i)| i).collect()
    }

    /// Future of entry `index` moved to the query's anchor and sampled at
    /// the query's output times.
    pub fn aligned(&self, index: usize, input: &SampleInput<T>) -> Trajectory<T> {
        let anchor = input.target_anchor();
        let future = &self.entries[index].future;
        input
            .output_times
            .iter()
            .map(|&t| anchor + sample_path(future, t - input.t_0))
            .collect()
    }

    /// Neighbours ranked `page·n_p .. (page+1)·n_p` by distance (wrapping),
    /// aligned to the query. Page 0 holds the nearest ones; later pages
    /// serve re-queries for fresh candidates.
    pub fn predict_page(&self, input: &SampleInput<T>, n_p: usize, page: usize) -> Result<Prediction<T>> {
        if n_p == 0 {
            return Err(Error::InvalidArgument("n_p must be at least 1".into()));
        }
        if n_p > self.entries.len() {
            return Err(Error::InsufficientPool {
                class: self.class_name(),
                needed: n_p,
                found: self.entries.len(),
            });
        }
        let ranked = self.ranked(input);
        let trajs = (0..n_p)
            .map(|k| self.aligned(ranked[(page * n_p + k) % ranked.len()], input))
            .collect();
        Ok(Prediction::TrajectorySet { trajs })
    }

    pub fn class_name(&self) -> String {
        match self.class {
            Some(true) => "accepted".into(),
            Some(false) => "rejected".into(),
            None => "all".into(),
        }
    }
}

/// Contract every benchmarked model implements. Training sees only the
/// training split; prediction sees only sample inputs.
pub trait PredictionModel<T: Real>: Send + Sync {
    fn name(&self) -> String;
    fn output_form(&self) -> PredictionForm;
    fn train(&mut self, train: &[&Sample<T>]) -> Result<()>;
    fn predict(&self, input: &SampleInput<T>, seed: u64) -> Result<Prediction<T>>;
}

/// Model selection in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    LogisticRegression {
        #[serde(default)]
        hyper: LogRegHyper,
    },
    /// Training-set acceptance rate for every input.
    Prior,
    NoisyConstantVelocity {
        #[serde(default = "default_sigma_a")]
        sigma_a: f64,
    },
    Retrieval,
    Ensemble {
        members: Vec<ModelSpec>,
    },
}

fn default_sigma_a() -> f64 {
    0.5
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::LogisticRegression { .. } => "logistic_regression".into(),
            ModelSpec::Prior => "prior".into(),
            ModelSpec::NoisyConstantVelocity { .. } => "noisy_cv".into(),
            ModelSpec::Retrieval => "retrieval".into(),
            ModelSpec::Ensemble { members } => {
                let names: Vec<String> = members.iter().map(ModelSpec::name).collect();
                format!("ensemble[{}]", names.join("+"))
            }
        }
    }

    pub fn build<T: Real>(&self, n_p: usize) -> Result<Box<dyn PredictionModel<T>>> {
        Ok(match self {
            ModelSpec::LogisticRegression { hyper } => Box::new(LogisticRegression { hyper: *hyper, model: None }),
            ModelSpec::Prior => Box::new(Prior { rate: None }),
            ModelSpec::NoisyConstantVelocity { sigma_a } => {
                if !(sigma_a.is_finite() && *sigma_a >= 0.0) {
                    return Err(Error::Config(format!("sigma_a must be non-negative, got {sigma_a}")));
                }
                Box::new(NoisyConstantVelocity { n_p, sigma_a: T::lit(*sigma_a) })
            }
            ModelSpec::Retrieval => Box::new(Retrieval { n_p, model: None }),
            ModelSpec::Ensemble { members } => {
                if members.is_empty() {
                    return Err(Error::Config("ensemble needs at least one member".into()));
                }
                let built = members
                    .iter()
                    .map(|m| m.build(n_p))
                    .collect::<Result<Vec<Box<dyn PredictionModel<T>>>>>()?;
                if let Some(bad) = built.iter().find(|m| m.output_form() == PredictionForm::Trajectory) {
                    return Err(Error::Config(format!(
                        "ensemble member {} does not produce a probability",
                        bad.name()
                    )));
                }
                Box::new(Ensemble { name: self.name(), members: built })
            }
        })
    }
}

fn not_trained(name: &str) -> Error {
    Error::InvalidArgument(format!("model {name} used before training"))
}

pub struct LogisticRegression<T> {
    pub hyper: LogRegHyper,
    pub model: Option<LogRegModel<T>>,
}

impl<T: Real> PredictionModel<T> for LogisticRegression<T> {
    fn name(&self) -> String {
        "logistic_regression".into()
    }

    fn output_form(&self) -> PredictionForm {
        PredictionForm::Binary
    }

    fn train(&mut self, train: &[&Sample<T>]) -> Result<()> {
        let rows: Vec<Vec<T>> = train.iter().map(|s| featurize(&s.input).to_vec()).collect();
        let labels: Vec<bool> = train.iter().map(|s| s.output.accepted).collect();
        self.model = Some(LogRegModel::train(&rows, &labels, &self.hyper)?);
        Ok(())
    }

    fn predict(&self, input: &SampleInput<T>, _seed: u64) -> Result<Prediction<T>> {
        let model = self.model.as_ref().ok_or_else(|| not_trained("logistic_regression"))?;
        Ok(Prediction::Binary { a_pred: model.predict(&featurize(input).to_vec()) })
    }
}

pub struct Prior<T> {
    pub rate: Option<T>,
}

impl<T: Real> PredictionModel<T> for Prior<T> {
    fn name(&self) -> String {
        "prior".into()
    }

    fn output_form(&self) -> PredictionForm {
        PredictionForm::Binary
    }

    fn train(&mut self, train: &[&Sample<T>]) -> Result<()> {
        if train.is_empty() {
            return Err(Error::Empty("prior training set"));
        }
        let accepted = train.iter().filter(|s| s.output.accepted).count();
        self.rate = Some(T::from_usize_lossy(accepted) / T::from_usize_lossy(train.len()));
        Ok(())
    }

    fn predict(&self, _input: &SampleInput<T>, _seed: u64) -> Result<Prediction<T>> {
        Ok(Prediction::Binary { a_pred: self.rate.ok_or_else(|| not_trained("prior"))? })
    }
}

pub struct NoisyConstantVelocity<T> {
    pub n_p: usize,
    pub sigma_a: T,
}

impl<T: Real> PredictionModel<T> for NoisyConstantVelocity<T> {
    fn name(&self) -> String {
        "noisy_cv".into()
    }

    fn output_form(&self) -> PredictionForm {
        PredictionForm::Trajectory
    }

    fn train(&mut self, _train: &[&Sample<T>]) -> Result<()> {
        Ok(())
    }

    fn predict(&self, input: &SampleInput<T>, seed: u64) -> Result<Prediction<T>> {
        noisy_cv_predict(input, self.n_p, self.sigma_a, seed)
    }
}

/// Unconditional retrieval over the whole training split.
pub struct Retrieval<T> {
    pub n_p: usize,
    pub model: Option<RetrievalModel<T>>,
}

impl<T: Real> PredictionModel<T> for Retrieval<T> {
    fn name(&self) -> String {
        "retrieval".into()
    }

    fn output_form(&self) -> PredictionForm {
        PredictionForm::Trajectory
    }

    fn train(&mut self, train: &[&Sample<T>]) -> Result<()> {
        self.model = Some(RetrievalModel::train(train, None)?);
        Ok(())
    }

    fn predict(&self, input: &SampleInput<T>, _seed: u64) -> Result<Prediction<T>> {
        self.model
            .as_ref()
            .ok_or_else(|| not_trained("retrieval"))?
            .predict_page(input, self.n_p, 0)
    }
}

pub struct Ensemble<T> {
    name: String,
    members: Vec<Box<dyn PredictionModel<T>>>,
}

impl<T: Real> PredictionModel<T> for Ensemble<T> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn output_form(&self) -> PredictionForm {
        PredictionForm::Binary
    }

    fn train(&mut self, train: &[&Sample<T>]) -> Result<()> {
        self.members.iter_mut().try_for_each(|m| m.train(train))
    }

    fn predict(&self, input: &SampleInput<T>, seed: u64) -> Result<Prediction<T>> {
        let preds = self
            .members
            .iter()
            .map(|m| m.predict(input, seed))
            .collect::<Result<Vec<_>>>()?;
        ensemble_mean(&preds)
    }
}

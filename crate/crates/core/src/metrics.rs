//! Evaluation metrics for binary and trajectory predictions.
//!
//! Every metric has a set of prediction-time policies under which it is
//! meaningful. Using it elsewhere is allowed but flagged with a warning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::T0Policy;
use crate::geometry::{Position, Trajectory};
use crate::models::PredictionForm;
use crate::scalar::{ceil_tolerant, total_cmp, Real};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum PolicyCheck {
    Pass,
    Warn(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult<T> {
    pub name: String,
    pub value: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sample: Option<Vec<T>>,
    pub policy_check: PolicyCheck,
}

impl<T> MetricResult<T> {
    fn new(name: impl Into<String>, value: T, per_sample: Option<Vec<T>>) -> Self {
        Self {
            name: name.into(),
            value,
            per_sample,
            policy_check: PolicyCheck::Pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    Auc,
    Ade {
        beta: f64,
    },
    Fde {
        beta: f64,
    },
    MissRate {
        #[serde(default = "default_miss_radius")]
        r_miss: f64,
    },
    TnrPr,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_miss_radius() -> f64 {
    2.0
}

impl MetricKind {
    pub fn name(&self) -> String {
        match self {
            MetricKind::Accuracy { threshold } if *threshold == 0.5 => "accuracy".into(),
            MetricKind::Accuracy { threshold } => format!("accuracy@{threshold}"),
            MetricKind::Auc => "auc".into(),
            MetricKind::Ade { beta } => format!("ade_{beta}"),
            MetricKind::Fde { beta } => format!("fde_{beta}"),
            MetricKind::MissRate { r_miss } => format!("miss_rate_{r_miss}m"),
            MetricKind::TnrPr => "tnr_pr".into(),
        }
    }

    pub fn required_form(&self) -> PredictionForm {
        match self {
            MetricKind::Accuracy { .. } | MetricKind::Auc | MetricKind::TnrPr => PredictionForm::Binary,
            MetricKind::Ade { .. } | MetricKind::Fde { .. } | MetricKind::MissRate { .. } => {
                PredictionForm::Trajectory
            }
        }
    }

    pub fn is_binary(&self) -> bool {
        self.required_form() == PredictionForm::Binary
    }

    /// Symmetric metrics belong to early predictions, TNR-PR to the last
    /// useful one.
    pub fn check_policy<T: Real>(&self, policy: &T0Policy<T>) -> PolicyCheck {
        let critical = matches!(policy, T0Policy::Critical { .. });
        match (self, critical) {
            (MetricKind::TnrPr, false) => PolicyCheck::Warn(format!(
                "tnr_pr is meant for critical-gap predictions, got {}",
                policy.name()
            )),
            (MetricKind::TnrPr, true) => PolicyCheck::Pass,
            (MetricKind::MissRate { .. }, _) => PolicyCheck::Pass,
            (_, true) => PolicyCheck::Warn(format!(
                "{} is meant for predictions well before t_crit, got {}",
                self.name(),
                policy.name()
            )),
            (_, false) => PolicyCheck::Pass,
        }
    }
}

fn check_pair(what: &'static str, left: usize, right: usize) -> Result<()> {
    if left == 0 {
        return Err(Error::Empty(what));
    }
    if left != right {
        return Err(Error::LengthMismatch { what, left, right });
    }
    Ok(())
}

fn class_counts(truths: &[bool]) -> (usize, usize) {
    let pos = truths.iter().filter(|&&a| a).count();
    (pos, truths.len() - pos)
}

/// Fraction of samples where `(a_pred >= threshold) == a`.
pub fn accuracy<T: Real>(preds: &[T], truths: &[bool], threshold: T) -> Result<MetricResult<T>> {
    check_pair("accuracy inputs", preds.len(), truths.len())?;
    let hits: Vec<T> = preds
        .iter()
        .zip(truths)
        .map(|(&p, &a)| if (p >= threshold) == a { T::one() } else { T::zero() })
        .collect();
    let value = hits.iter().copied().sum::<T>() / T::from_usize_lossy(hits.len());
    Ok(MetricResult::new("accuracy", value, Some(hits)))
}

/// ROC AUC as the Mann–Whitney statistic, ties counted one half.
pub fn auc<T: Real>(preds: &[T], truths: &[bool]) -> Result<MetricResult<T>> {
    check_pair("auc inputs", preds.len(), truths.len())?;
    let (n_pos, n_neg) = class_counts(truths);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("auc truths"));
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| total_cmp(&preds[a], &preds[b]));
    // average ranks (1-based) over tie groups
    let mut rank_sum_pos = 0.0_f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && preds[order[j]] == preds[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| truths[k]).count();
        rank_sum_pos += avg_rank * pos_in_group as f64;
        i = j;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(MetricResult::new("auc", T::lit(u / (p * n)), None))
}

/// True negative rate at the lowest threshold that still has perfect recall.
pub fn tnr_pr<T: Real>(preds: &[T], truths: &[bool]) -> Result<MetricResult<T>> {
    check_pair("tnr_pr inputs", preds.len(), truths.len())?;
    let (n_pos, n_neg) = class_counts(truths);
    if n_pos == 0 {
        return Err(Error::SingleClass("tnr_pr truths (no positives, threshold undefined)"));
    }
    if n_neg == 0 {
        return Err(Error::SingleClass("tnr_pr truths (no negatives, TNR undefined)"));
    }
    let theta = preds
        .iter()
        .zip(truths)
        .filter(|(_, &a)| a)
        .map(|(&p, _)| p)
        .fold(T::infinity(), T::min);
    let true_negatives = preds
        .iter()
        .zip(truths)
        .filter(|(&p, &a)| !a && p < theta)
        .count();
    Ok(MetricResult::new(
        "tnr_pr",
        T::from_usize_lossy(true_negatives) / T::from_usize_lossy(n_neg),
        None,
    ))
}

fn check_sets<T: Real>(predsets: &[Vec<Trajectory<T>>], truths: &[Trajectory<T>]) -> Result<()> {
    check_pair("trajectory metric inputs", predsets.len(), truths.len())?;
    for (set, truth) in predsets.iter().zip(truths) {
        if set.is_empty() {
            return Err(Error::Empty("trajectory set"));
        }
        if truth.is_empty() {
            return Err(Error::Empty("true trajectory"));
        }
        for traj in set {
            if traj.len() != truth.len() {
                return Err(Error::LengthMismatch {
                    what: "prediction horizon",
                    left: traj.len(),
                    right: truth.len(),
                });
            }
        }
    }
    Ok(())
}

/// Mean of the `ceil(n_p * beta)` smallest per-trajectory errors.
fn best_fraction_mean<T: Real>(mut errors: Vec<T>, beta: T) -> T {
    errors.sort_by(total_cmp);
    let k = ceil_tolerant(T::from_usize_lossy(errors.len()) * beta).clamp(1, errors.len());
    errors[..k].iter().copied().sum::<T>() / T::from_usize_lossy(k)
}

fn check_beta<T: Real>(beta: T) -> Result<()> {
    if beta > T::zero() && beta <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must lie in (0, 1], got {beta}")))
    }
}

fn mean<T: Real>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_usize_lossy(values.len())
}

fn average_displacement<T: Real>(a: &[Position<T>], b: &[Position<T>]) -> T {
    a.iter().zip(b).map(|(&p, &q)| p.distance(q)).sum::<T>() / T::from_usize_lossy(a.len())
}

fn final_displacement<T: Real>(a: &[Position<T>], b: &[Position<T>]) -> T {
    a[a.len() - 1].distance(b[b.len() - 1])
}

pub fn ade_beta<T: Real>(
    predsets: &[Vec<Trajectory<T>>],
    truths: &[Trajectory<T>],
    beta: T,
) -> Result<MetricResult<T>> {
    check_beta(beta)?;
    check_sets(predsets, truths)?;
    let per: Vec<T> = predsets
        .iter()
        .zip(truths)
        .map(|(set, truth)| {
            best_fraction_mean(set.iter().map(|p| average_displacement(p, truth)).collect(), beta)
        })
        .collect();
    Ok(MetricResult::new(format!("ade_{beta}"), mean(&per), Some(per)))
}

pub fn fde_beta<T: Real>(
    predsets: &[Vec<Trajectory<T>>],
    truths: &[Trajectory<T>],
    beta: T,
) -> Result<MetricResult<T>> {
    check_beta(beta)?;
    check_sets(predsets, truths)?;
    let per: Vec<T> = predsets
        .iter()
        .zip(truths)
        .map(|(set, truth)| {
            best_fraction_mean(set.iter().map(|p| final_displacement(p, truth)).collect(), beta)
        })
        .collect();
    Ok(MetricResult::new(format!("fde_{beta}"), mean(&per), Some(per)))
}

/// Fraction of samples whose best final displacement exceeds `r_miss`.
pub fn miss_rate<T: Real>(
    predsets: &[Vec<Trajectory<T>>],
    truths: &[Trajectory<T>],
    r_miss: T,
) -> Result<MetricResult<T>> {
    check_sets(predsets, truths)?;
    let per: Vec<T> = predsets
        .iter()
        .zip(truths)
        .map(|(set, truth)| {
            let best = set
                .iter()
                .map(|p| final_displacement(p, truth))
                .fold(T::infinity(), T::min);
            if best > r_miss {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(MetricResult::new("miss_rate", mean(&per), Some(per)))
}

/// Expected score of a predictor drawing `a_pred ~ U(0, 1)` independently
/// per sample. `None` for trajectory metrics.
///
/// AUC: 0.5. Accuracy at threshold θ: `(1-θ)·P + θ·N` over the sample count.
/// TNR-PR: a negative is a true negative iff it falls below the minimum of
/// `P` uniform positives, which happens with probability `1 / (P + 1)`.
pub fn random_baseline<T: Real>(kind: &MetricKind, truths: &[bool]) -> Result<Option<T>> {
    if truths.is_empty() {
        return Err(Error::Empty("baseline truths"));
    }
    let (p, n) = class_counts(truths);
    let value = match *kind {
        MetricKind::Auc => Some(0.5),
        MetricKind::Accuracy { threshold } => {
            let theta = threshold.clamp(0.0, 1.0);
            Some(((1.0 - theta) * p as f64 + theta * n as f64) / truths.len() as f64)
        }
        MetricKind::TnrPr => Some(1.0 / (p as f64 + 1.0)),
        _ => None,
    };
    Ok(value.map(T::lit))
}

/// Dispatches a binary metric.
pub fn evaluate_binary<T: Real>(kind: &MetricKind, preds: &[T], truths: &[bool]) -> Result<MetricResult<T>> {
    let mut result = match *kind {
        MetricKind::Accuracy { threshold } => accuracy(preds, truths, T::lit(threshold))?,
        MetricKind::Auc => auc(preds, truths)?,
        MetricKind::TnrPr => tnr_pr(preds, truths)?,
        _ => return Err(Error::InvalidArgument(format!("{} is not a binary metric", kind.name()))),
    };
    result.name = kind.name();
    Ok(result)
}

/// Dispatches a trajectory metric.
pub fn evaluate_trajectory<T: Real>(
    kind: &MetricKind,
    predsets: &[Vec<Trajectory<T>>],
    truths: &[Trajectory<T>],
) -> Result<MetricResult<T>> {
    let mut result = match *kind {
        MetricKind::Ade { beta } => ade_beta(predsets, truths, T::lit(beta))?,
        MetricKind::Fde { beta } => fde_beta(predsets, truths, T::lit(beta))?,
        MetricKind::MissRate { r_miss } => miss_rate(predsets, truths, T::lit(r_miss))?,
        _ => return Err(Error::InvalidArgument(format!("{} is not a trajectory metric", kind.name()))),
    };
    result.name = kind.name();
    Ok(result)
}

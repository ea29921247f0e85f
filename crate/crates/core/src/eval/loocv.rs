// SPDX-License-Identifier: Apache-2.0
//! Leave-one-out cross-validation over prepared designs.

use std::collections::HashSet;

use super::{confusion_for_labels, DesignMetrics, GroundTruth, MetricsReport};
use crate::gate::train;
use crate::pipeline::{build_corpus, label_design, LabelsDoc, PipelineConfig, PreparedDesign};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LabeledDesign {
    pub design: PreparedDesign,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone)]
pub struct FoldReport {
    pub held_out: String,
    pub train_seed: u64,
    /// Path structures contributed by the training designs.
    pub training_structures: usize,
    /// Distinct samples actually trained on.
    pub training_samples: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub labels: LabelsDoc,
    pub metrics: DesignMetrics,
}

#[derive(Debug, Clone)]
pub struct LoocvReport {
    pub folds: Vec<FoldReport>,
    pub report: MetricsReport,
}

/// Seed of fold `fold`, derived from the pipeline seed.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    let mut z = seed ^ (fold as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn loocv(designs: &[LabeledDesign], config: &PipelineConfig) -> Result<LoocvReport> {
    loocv_with_progress(designs, config, |_| {})
}

/// Trains on all designs but one, labels the held-out design and scores
/// it, once per design.
pub fn loocv_with_progress(
    designs: &[LabeledDesign],
    config: &PipelineConfig,
    mut on_fold: impl FnMut(&FoldReport),
) -> Result<LoocvReport> {
    if designs.len() < 2 {
        return Err(Error::TooFewDesigns(designs.len()));
    }
    config.validate()?;
    let mut folds = Vec::with_capacity(designs.len());
    for (held, target) in designs.iter().enumerate() {
        let training: Vec<(usize, &PreparedDesign)> = designs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held)
            .map(|(i, d)| (i, &d.design))
            .collect();
        let corpus = build_corpus::<f64>(&training, config.train.dedup)?;
        let held_ids: HashSet<(usize, usize)> = target.design.structures.keys().map(|&id| (held, id)).collect();
        assert!(
            corpus.members.iter().chain(&corpus.origins).all(|m| !held_ids.contains(m) && m.0 != held),
            "held-out design leaked into the training corpus"
        );

        let mut tc = config.train_config();
        tc.seed = fold_seed(config.seed, held);
        let outcome = train(&corpus.corpus.samples, &tc)?;
        let labels = label_design(&outcome.model, &target.design, config.t1, config.t2, config.seed)?;
        let counts = confusion_for_labels(&labels, &target.truth)?;
        let fold = FoldReport {
            held_out: target.design.name.clone(),
            train_seed: tc.seed,
            training_structures: corpus.members.len(),
            training_samples: corpus.corpus.len(),
            initial_loss: outcome.initial_loss,
            final_loss: outcome.final_loss,
            metrics: DesignMetrics::new(target.design.name.clone(), counts),
            labels,
        };
        on_fold(&fold);
        folds.push(fold);
    }
    let report = MetricsReport::new(folds.iter().map(|f| f.metrics.clone()).collect());
    Ok(LoocvReport { folds, report })
}

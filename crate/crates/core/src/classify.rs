// SPDX-License-Identifier: Apache-2.0
//! Threshold clustering of register embeddings and state/data labeling.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gate::RegisterEmbedding;
use crate::{Error, Result, Scalar};

pub const DEFAULT_T1: f64 = 1e-3;
pub const DEFAULT_T2: usize = 4;

/// Feature difference value between two register embeddings.
pub fn fdv<T: Scalar>(a: &RegisterEmbedding<T>, b: &RegisterEmbedding<T>) -> T {
    (a.value - b.value).abs()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    /// Starting register of the group.
    pub srn: usize,
    /// Member ids in ascending order, SRN included.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub groups: Vec<Group>,
}

impl ClusterSet {
    pub fn register_count(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }
}

/// Repeatedly draws a random SRN from the candidate group and moves it,
/// together with every candidate closer than `t1` to it, into a new group.
/// A single remaining candidate becomes its own group.
pub fn cluster<T: Scalar>(embeddings: &[(usize, RegisterEmbedding<T>)], t1: f64, seed: u64) -> Result<ClusterSet> {
    if !(t1 > 0.0) {
        return Err(Error::InvalidArgument(format!("t1 must be positive, got {t1}")));
    }
    let mut seen = std::collections::HashSet::new();
    for (id, e) in embeddings {
        if !seen.insert(*id) {
            return Err(Error::InvalidArgument(format!("duplicate register id {id}")));
        }
        if !e.value.is_finite() {
            return Err(Error::InvalidArgument(format!("register {id} has a non-finite embedding")));
        }
    }
    let t1 = T::from_f64_lossy(t1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cg: Vec<(usize, RegisterEmbedding<T>)> = embeddings.to_vec();
    cg.sort_by_key(|(id, _)| *id);
    let mut groups = Vec::new();
    while cg.len() > 1 {
        let pick = rng.gen_range(0..cg.len());
        let (srn, srn_emb) = cg[pick];
        let (mut members, rest): (Vec<_>, Vec<_>) = cg
            .into_iter()
            .partition(|(id, e)| *id == srn || fdv(&srn_emb, e) < t1);
        cg = rest;
        members.sort_by_key(|(id, _)| *id);
        groups.push(Group {
            srn,
            members: members.into_iter().map(|(id, _)| id).collect(),
        });
    }
    if let Some((id, _)) = cg.pop() {
        groups.push(Group {
            srn: id,
            members: vec![id],
        });
    }
    Ok(ClusterSet { groups })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegisterLabel {
    State,
    Data,
}

impl fmt::Display for RegisterLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegisterLabel::State => "STATE",
            RegisterLabel::Data => "DATA",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub label: RegisterLabel,
    /// Index into [`ClusterSet::groups`].
    pub group: usize,
    pub group_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub labels: BTreeMap<usize, Assignment>,
}

impl Classification {
    pub fn label(&self, id: usize) -> Option<RegisterLabel> {
        self.labels.get(&id).map(|a| a.label)
    }

    pub fn count(&self, label: RegisterLabel) -> usize {
        self.labels.values().filter(|a| a.label == label).count()
    }
}

/// Groups smaller than `t2` are state registers, the rest data registers.
pub fn label_groups(clusters: &ClusterSet, t2: usize) -> Classification {
    let mut labels = BTreeMap::new();
    for (gi, g) in clusters.groups.iter().enumerate() {
        let size = g.members.len();
        let label = if size < t2 {
            RegisterLabel::State
        } else {
            RegisterLabel::Data
        };
        for &id in &g.members {
            labels.insert(
                id,
                Assignment {
                    label,
                    group: gi,
                    group_size: size,
                },
            );
        }
    }
    Classification { labels }
}

pub fn classify<T: Scalar>(
    embeddings: &[(usize, RegisterEmbedding<T>)],
    t1: f64,
    t2: usize,
    seed: u64,
) -> Result<Classification> {
    Ok(label_groups(&cluster(embeddings, t1, seed)?, t2))
}

//! Cluster exemplars and harm-category labels.

mod exemplar;
mod file;
mod oracle;
mod prompt;
mod taxonomy;
mod vote;

pub use exemplar::{extract_exemplars, ExemplarRule, ExemplarSet};
pub use file::read_label_file;
pub use oracle::{
    ChatChoice, ChatMessage, ChatRequest, ChatResponse, HttpLabelOracle, LabelClientConfig,
    LabelOracle,
};
pub use prompt::render_prompt;
pub use taxonomy::{Category, Taxonomy, OTHER};
pub use vote::{majority, request_labels, vote_cluster, LabelOptions, LabelVote};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Service,
    File,
    /// No label could be obtained; the cluster is reported as unlabeled.
    Unavailable,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Service => "service",
            Self::File => "file",
            Self::Unavailable => "unavailable",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabel {
    pub cluster_id: usize,
    pub label: Option<String>,
    pub source: LabelSource,
    pub vote: Option<LabelVote>,
}

impl ClusterLabel {
    pub fn from_vote(vote: LabelVote) -> Self {
        Self {
            cluster_id: vote.cluster_id,
            label: Some(vote.final_label.clone()),
            source: LabelSource::Service,
            vote: Some(vote),
        }
    }

    pub fn from_file(cluster_id: usize, label: String) -> Self {
        Self {
            cluster_id,
            label: Some(label),
            source: LabelSource::File,
            vote: None,
        }
    }

    pub fn unavailable(cluster_id: usize) -> Self {
        Self {
            cluster_id,
            label: None,
            source: LabelSource::Unavailable,
            vote: None,
        }
    }
}

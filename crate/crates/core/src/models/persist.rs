//! Versioned JSON model documents.

use serde::{Deserialize, Serialize};

use super::{DecisionTree, LinearModel, MlpModel};
use crate::cbm::{ConceptScores, ConceptVector};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "obygaze-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum Payload {
    Linear(LinearModel),
    Tree(DecisionTree),
    Mlp(MlpModel),
    Cavs(Vec<ConceptVector>),
    ConceptScores(Vec<ConceptScores>),
}

impl Payload {
    fn dims(&self) -> usize {
        match self {
            Payload::Linear(m) => m.weights.len(),
            Payload::Tree(t) => t.n_features,
            Payload::Mlp(m) => m.dim,
            Payload::Cavs(c) => c.first().map_or(0, |v| v.unit_normal.len()),
            Payload::ConceptScores(_) => crate::annotation::Concept::COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub dims: usize,
    #[serde(flatten)]
    pub payload: Payload,
}

impl ModelDocument {
    pub fn new(payload: Payload) -> Self {
        ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            dims: payload.dims(),
            payload,
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model documents always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unknown format {:?}",
                doc.format
            )));
        }
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {}",
                doc.version
            )));
        }
        Ok(doc)
    }
}

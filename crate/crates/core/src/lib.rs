//! Margin assessment of breast tissue in OCT volumes.
//!
//! The crate covers the whole pipeline: tissue-surface detection and patch
//! extraction ([`preproc`]), a small convolutional network with exact
//! gradients ([`nn`]), four regularization strategies including function-norm
//! penalties estimated on unlabeled data or by slice sampling
//! ([`regularizers`]), cross-validated model selection ([`modelsel`]),
//! classification metrics and ROC analysis ([`eval`]), dense slice overlays
//! ([`overlay`]) and a phantom generator standing in for clinical data
//! ([`synth`]).

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod modelsel;
pub mod nn;
pub mod overlay;
pub mod preproc;
pub mod regularizers;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};

/// Tissue class of a patch or pixel. Tumor is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TissueClass {
    Tumor,
    Normal,
}

impl TissueClass {
    /// Network output index: the first logit scores tumor, the second normal.
    pub fn index(self) -> usize {
        match self {
            TissueClass::Tumor => 0,
            TissueClass::Normal => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            TissueClass::Tumor
        } else {
            TissueClass::Normal
        }
    }

    pub fn is_positive(self) -> bool {
        self == TissueClass::Tumor
    }

    pub fn name(self) -> &'static str {
        match self {
            TissueClass::Tumor => "tumor",
            TissueClass::Normal => "normal",
        }
    }
}

impl std::str::FromStr for TissueClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tumor" | "cancer" | "1" => Ok(TissueClass::Tumor),
            "normal" | "healthy" | "0" => Ok(TissueClass::Normal),
            other => Err(Error::InvalidArgument(format!("unknown tissue class `{other}`"))),
        }
    }
}

//! Detection of multiple change-points in the second-order structure of
//! high-dimensional time series under a factor model.
//!
//! The observed panel is split into common and idiosyncratic components by
//! (capped) principal component analysis. Each component is mapped by Haar
//! wavelet transforms to a panel whose means shift wherever the
//! autocovariance or cross-covariance structure changes, and those shifts
//! are located by Double CUSUM binary segmentation with stationary
//! bootstrap thresholds. See [`pipeline::detect`] for the full procedure.

use serde::{Deserialize, Serialize};

pub mod benchmark;
pub mod bootstrap;
pub mod error;
pub mod factor;
pub mod panel;
pub mod pipeline;
pub mod rng;
pub mod segment;
pub mod simgen;
pub mod wavelet;

pub use error::{Error, Result};
pub use factor::{CapRule, FactorDecomposition, Pca};
pub use panel::{load_csv, parse_csv, Orientation, TimeSeriesPanel};
pub use pipeline::{detect, DetectConfig, DetectionReport};
pub use segment::{ChangePoint, ChangePointSet};
pub use wavelet::{PanelMode, WaveletPanel};

/// Which part of the panel a statistic or change-point refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    Common,
    Idiosyncratic,
    /// The observed panel without factor analysis.
    Raw,
}

impl Component {
    pub(crate) fn tag(self) -> u64 {
        match self {
            Component::Common => 1,
            Component::Idiosyncratic => 2,
            Component::Raw => 3,
        }
    }
}

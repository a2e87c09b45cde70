use std::path::{Path, PathBuf};

use log::warn;

use super::config::PipelineConfig;
use crate::detections::{LabelList, LabelSpace};
use crate::error::Result;
use crate::label_fusion::{HardAssociation, LikelihoodMatrix};

pub const OPEN_LABELS_FILE: &str = "open_labels.txt";
pub const CLOSED_LABELS_FILE: &str = "closed_labels.txt";

/// Label spaces and the likelihood matrix used for fusion.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionModel {
    pub space: LabelSpace,
    pub matrix: LikelihoodMatrix,
}

impl FusionModel {
    /// Label lists come from the config, else from `open_labels.txt` and
    /// `closed_labels.txt` in `input`. The matrix is read from the config's
    /// CSV when given, otherwise built manually from a hard association.
    pub fn from_config(config: &PipelineConfig, input: &Path) -> Result<Self> {
        let pick = |p: &Option<PathBuf>, default: &str| p.clone().unwrap_or_else(|| input.join(default));
        let space = LabelSpace::new(
            LabelList::read(&pick(&config.open_labels, OPEN_LABELS_FILE))?,
            LabelList::read(&pick(&config.closed_labels, CLOSED_LABELS_FILE))?,
        );
        let matrix = match &config.likelihood_matrix {
            Some(p) => LikelihoodMatrix::read_csv(p, &space)?,
            None => {
                let assoc = match &config.hard_association {
                    Some(p) => HardAssociation::read_csv(p, &space)?,
                    None => HardAssociation::by_name(&space)?,
                };
                LikelihoodMatrix::manual(&assoc, config.manual_likelihood)?
            }
        };
        for c in matrix.empty_columns() {
            warn!("class `{}` has no supporting open label", space.closed_set.name(c));
        }
        Ok(Self { space, matrix })
    }
}

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{DhRow, LinkInertial, RobotModel};
use crate::math::N_JOINTS;
use crate::{Error, Result};

/// On-disk model document (TOML). Units are SI and radians.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub spacecraft: LinkInertial,
    pub links: Vec<LinkInertial>,
    pub dh: Vec<DhRow>,
    pub mount_offset: [f64; 3],
}

impl ModelConfig {
    pub fn into_model(self) -> Result<RobotModel> {
        let links: [LinkInertial; N_JOINTS] = self.links.try_into().map_err(|v: Vec<_>| {
            Error::Schema(format!("expected {N_JOINTS} `links` entries, found {}", v.len()))
        })?;
        let dh: [DhRow; N_JOINTS] = self.dh.try_into().map_err(|v: Vec<_>| {
            Error::Schema(format!("expected {N_JOINTS} `dh` rows, found {}", v.len()))
        })?;
        RobotModel::new(self.spacecraft, links, dh, Vector3::from(self.mount_offset))
    }

    pub fn from_model(model: &RobotModel) -> Self {
        Self {
            spacecraft: model.spacecraft,
            links: model.arm_links.to_vec(),
            dh: model.dh.to_vec(),
            mount_offset: model.mount_offset.into(),
        }
    }
}

/// Parses and validates a model document.
pub fn load_model(config_text: &str) -> Result<RobotModel> {
    let cfg: ModelConfig =
        toml::from_str(config_text).map_err(|e| Error::Schema(e.message().to_string()))?;
    cfg.into_model()
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<RobotModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_model(&text).map_err(|e| match e {
        Error::Schema(msg) => Error::format(path, format!("schema error: {msg}")),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_text() -> String {
        toml::to_string(&ModelConfig::from_model(&RobotModel::reference())).unwrap()
    }

    #[test]
    fn reference_document_round_trips() {
        let model = load_model(&reference_text()).unwrap();
        assert_eq!(model, RobotModel::reference());
        assert_eq!(model.total_mass, 360.0);
    }

    #[test]
    fn negative_link_mass_names_the_field() {
        let mut cfg = ModelConfig::from_model(&RobotModel::reference());
        cfg.links[2].mass = -1.0;
        let err = cfg.into_model().unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "links[2].mass"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn six_dh_rows_is_a_schema_error() {
        let mut cfg = ModelConfig::from_model(&RobotModel::reference());
        cfg.dh.pop();
        assert!(matches!(cfg.into_model(), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_section_is_a_schema_error() {
        let text = reference_text().replace("mount_offset", "mount_offzet");
        assert!(matches!(load_model(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn shipped_reference_config_matches() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml");
        let model = load_model_file(path).unwrap();
        assert_eq!(model, RobotModel::reference());
    }
}

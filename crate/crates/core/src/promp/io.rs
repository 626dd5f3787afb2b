use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BasisConfig, ProMPModel};
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProMPDocument {
    basis: BasisConfig,
    n_dof: usize,
    mu_w: Vec<f64>,
    /// Row-major.
    sigma_w: Vec<f64>,
    sigma_x: f64,
    ridge_lambda: f64,
    dt: f64,
    n_steps: usize,
    dataset_hash: Option<String>,
}

impl ProMPModel {
    pub fn to_json(&self) -> String {
        let n = self.sigma_w.nrows();
        let doc = ProMPDocument {
            basis: self.basis.clone(),
            n_dof: self.n_dof,
            mu_w: self.mu_w.iter().copied().collect(),
            sigma_w: (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|rc| self.sigma_w[rc]).collect(),
            sigma_x: self.sigma_x,
            ridge_lambda: self.ridge_lambda,
            dt: self.dt,
            n_steps: self.n_steps,
            dataset_hash: self.dataset_hash.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("plain data serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProMPDocument = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let n = doc.mu_w.len();
        if doc.sigma_w.len() != n * n {
            return Err(Error::Schema(format!("sigma_w has {} entries, expected {}", doc.sigma_w.len(), n * n)));
        }
        let model = ProMPModel {
            basis: doc.basis,
            n_dof: doc.n_dof,
            mu_w: DVector::from_vec(doc.mu_w),
            sigma_w: DMatrix::from_row_slice(n, n, &doc.sigma_w),
            sigma_x: doc.sigma_x,
            ridge_lambda: doc.ridge_lambda,
            dt: doc.dt,
            n_steps: doc.n_steps,
            dataset_hash: doc.dataset_hash,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn save_promp(path: impl AsRef<Path>, promp: &ProMPModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, promp.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_promp(path: impl AsRef<Path>) -> Result<ProMPModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ProMPModel::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
}

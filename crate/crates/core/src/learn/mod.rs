//! Regression models trained on feature matrices.

mod gbdt;
mod linear;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub use gbdt::{fit_gbdt_columns, GbdtModel, GbdtParams, Node, Presorted, Tree};
pub use linear::LinearModel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbdt,
    Linear,
    BaselineAvg,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gbdt => "gbdt",
            ModelKind::Linear => "linear",
            ModelKind::BaselineAvg => "avg",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbdt" => Ok(ModelKind::Gbdt),
            "linear" => Ok(ModelKind::Linear),
            "avg" | "baseline_avg" => Ok(ModelKind::BaselineAvg),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelState {
    Gbdt(GbdtModel),
    Linear(LinearModel),
    BaselineAvg { mean: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub version: u32,
    /// `None` for models that ignore their input.
    pub schema_digest: Option<String>,
    pub columns: Vec<String>,
    pub state: ModelState,
}

fn check_targets(x: &FeatureMatrix, y: &[f64]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::Contract(format!("{} rows but {} targets", x.n_rows(), y.len())));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Fit(format!("non-finite target {bad}")));
    }
    Ok(())
}

pub fn fit_gbdt(x: &FeatureMatrix, y: &[f64], params: &GbdtParams) -> Result<Model> {
    check_targets(x, y)?;
    let data = gbdt::Presorted::new(x.n_rows(), x.n_cols(), |i, j| x.get(i, j));
    let cols: Vec<usize> = (0..x.n_cols()).collect();
    let state = gbdt::fit_gbdt_columns(&data, &cols, y, params)?;
    Ok(Model::with_schema(x, ModelState::Gbdt(state)))
}

pub fn fit_linear(x: &FeatureMatrix, y: &[f64]) -> Result<Model> {
    check_targets(x, y)?;
    let state = linear::fit_linear_rows(x.n_rows(), x.n_cols(), |i, j| x.get(i, j), y)?;
    Ok(Model::with_schema(x, ModelState::Linear(state)))
}

pub fn fit_baseline_avg(y_train: &[f64]) -> Result<Model> {
    if y_train.is_empty() {
        return Err(Error::Fit("baseline average of an empty training set".into()));
    }
    let mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
    if !mean.is_finite() {
        return Err(Error::Fit("non-finite training targets".into()));
    }
    Ok(Model {
        version: MODEL_FORMAT_VERSION,
        schema_digest: None,
        columns: Vec::new(),
        state: ModelState::BaselineAvg { mean },
    })
}

impl Model {
    /// Wraps a GBDT fitted on the selected columns `columns`.
    pub fn from_gbdt(columns: Vec<String>, state: GbdtModel) -> Self {
        Self {
            version: MODEL_FORMAT_VERSION,
            schema_digest: Some(crate::features::schema_digest(&columns)),
            columns,
            state: ModelState::Gbdt(state),
        }
    }

    fn with_schema(x: &FeatureMatrix, state: ModelState) -> Self {
        Self {
            version: MODEL_FORMAT_VERSION,
            schema_digest: Some(x.schema_digest()),
            columns: x.columns().to_vec(),
            state,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.state {
            ModelState::Gbdt(_) => ModelKind::Gbdt,
            ModelState::Linear(_) => ModelKind::Linear,
            ModelState::BaselineAvg { .. } => ModelKind::BaselineAvg,
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if let Some(digest) = &self.schema_digest {
            let got = x.schema_digest();
            if &got != digest {
                return Err(Error::Contract(format!(
                    "feature schema {got} does not match the model's {digest}"
                )));
            }
        }
        let rows = 0..x.n_rows();
        Ok(match &self.state {
            ModelState::Gbdt(m) => rows.map(|i| m.predict_row(x.row(i))).collect(),
            ModelState::Linear(m) => rows.map(|i| m.predict_row(x.row(i))).collect(),
            ModelState::BaselineAvg { mean } => rows.map(|_| *mean).collect(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let model: Model = serde_json::from_reader(file)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Contract(format!(
                "model format version {} is not supported",
                model.version
            )));
        }
        Ok(model)
    }
}

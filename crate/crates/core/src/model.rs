//! JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmark::{Method, MethodFit};
use crate::error::{AatrError, Result};
use crate::grid::{Grid, GridSpec, Standardization};
use crate::ridge::RidgeFit;
use crate::template::{Rectangle, Template};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub rects: Vec<Rectangle>,
}

/// A fitted model as stored on disk. `beta` and `gamma` are in standardized
/// units; prediction applies `col_means` and `col_scales` first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    #[serde(default = "default_method")]
    pub method: Method,
    pub grid: GridSpec,
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub gamma: TemplateRecord,
    pub lambda: f64,
    pub q: usize,
    pub col_means: Vec<f64>,
    pub col_scales: Vec<f64>,
}

fn default_method() -> Method {
    Method::Aatr
}

impl ModelFile {
    pub fn from_fit(fit: &MethodFit) -> Self {
        let rects = fit.template.as_ref().map_or_else(Vec::new, |t| t.rects.clone());
        ModelFile {
            version: FORMAT_VERSION,
            method: fit.method,
            grid: fit.fit.grid.spec(),
            beta0: fit.fit.beta0,
            beta: fit.fit.beta.clone(),
            q: rects.len(),
            gamma: TemplateRecord { rects },
            lambda: fit.fit.lambda,
            col_means: fit.fit.standardization.means.clone(),
            col_scales: fit.fit.standardization.scales.clone(),
        }
    }

    /// Rebuild the fit, checking that every vector matches the grid.
    pub fn to_fit(&self) -> Result<RidgeFit> {
        if self.version != FORMAT_VERSION {
            return Err(AatrError::data(format!(
                "unsupported model version {} (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        let grid = Grid::try_from(self.grid)?;
        for (what, len) in [
            ("model beta", self.beta.len()),
            ("model col_means", self.col_means.len()),
            ("model col_scales", self.col_scales.len()),
        ] {
            if len != grid.p() {
                return Err(AatrError::DimensionMismatch { what, expected: grid.p(), actual: len });
            }
        }
        if self.q != self.gamma.rects.len() {
            return Err(AatrError::data(format!(
                "model q = {} but gamma has {} rectangle(s)",
                self.q,
                self.gamma.rects.len()
            )));
        }
        let gamma = if self.gamma.rects.is_empty() {
            vec![0.0; grid.p()]
        } else {
            Template::new(self.gamma.rects.clone(), &grid)?.eval(&grid)
        };
        Ok(RidgeFit {
            beta0: self.beta0,
            beta: self.beta.clone(),
            lambda: self.lambda,
            gamma,
            grid,
            standardization: Standardization {
                means: self.col_means.clone(),
                scales: self.col_scales.clone(),
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::dataio::write_text(path, &(serde_json::to_string_pretty(self)? + "\n"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| AatrError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| AatrError::data(format!("{}: not a model file: {e}", path.display())))
    }
}

//! In-memory datasets: responses, exposures and mixed-type feature columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker stored in categorical columns for a missing value.
pub const CATEGORY_MISSING: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Category labels indexed by code; empty for numeric features.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

/// Column layout of a dataset and how it maps onto the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    pub target: String,
    pub exposure: Option<String>,
    pub missing_markers: Vec<String>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>, target: impl Into<String>, exposure: Option<String>) -> Result<Self> {
        let schema = Self {
            features,
            target: target.into(),
            exposure,
            missing_markers: vec![String::new(), "NA".to_string()],
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Schema with `p` numeric features named `x0..x{p-1}`.
    pub fn numeric(p: usize) -> Self {
        Self {
            features: (0..p)
                .map(|j| FeatureSpec {
                    name: format!("x{j}"),
                    kind: FeatureKind::Numeric,
                    categories: Vec::new(),
                })
                .collect(),
            target: "y".to_string(),
            exposure: Some("w".to_string()),
            missing_markers: vec![String::new(), "NA".to_string()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::SchemaMismatch(format!("duplicate feature name {:?}", f.name)));
            }
            if f.name == self.target {
                return Err(Error::SchemaMismatch(format!(
                    "target column {:?} is also listed as a feature",
                    f.name
                )));
            }
            if f.kind == FeatureKind::Numeric && !f.categories.is_empty() {
                return Err(Error::SchemaMismatch(format!(
                    "numeric feature {:?} carries a category dictionary",
                    f.name
                )));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> FeatureLayout {
        let numeric = self
            .features
            .iter()
            .filter(|f| f.kind == FeatureKind::Numeric)
            .count();
        FeatureLayout {
            numeric,
            categorical: self.features.len() - numeric,
        }
    }

    pub fn is_missing(&self, cell: &str) -> bool {
        let cell = cell.trim();
        self.missing_markers.iter().any(|m| m == cell)
    }
}

/// Number of numeric and categorical features, in schema order within each kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub numeric: usize,
    pub categorical: usize,
}

/// Read access to one row of features.
pub trait Features {
    fn numeric(&self, j: usize) -> Option<f64>;
    fn categorical(&self, j: usize) -> Option<u32>;
    fn layout(&self) -> FeatureLayout;
}

/// A single owned row of features.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    pub numeric: Vec<Option<f64>>,
    pub categorical: Vec<Option<u32>>,
}

impl FeatureVector {
    pub fn new(numeric: Vec<Option<f64>>, categorical: Vec<Option<u32>>) -> Self {
        Self { numeric, categorical }
    }

    pub fn missing(layout: FeatureLayout) -> Self {
        Self {
            numeric: vec![None; layout.numeric],
            categorical: vec![None; layout.categorical],
        }
    }
}

impl Features for FeatureVector {
    fn numeric(&self, j: usize) -> Option<f64> {
        self.numeric[j].filter(|v| !v.is_nan())
    }

    fn categorical(&self, j: usize) -> Option<u32> {
        self.categorical[j].filter(|&c| c != CATEGORY_MISSING)
    }

    fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            numeric: self.numeric.len(),
            categorical: self.categorical.len(),
        }
    }
}

/// Column-major feature storage. Missing numeric cells are `NaN`, missing
/// categorical cells are [`CATEGORY_MISSING`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub n_rows: usize,
    pub numeric: Vec<Vec<f64>>,
    pub categorical: Vec<Vec<u32>>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, numeric: Vec<Vec<f64>>, categorical: Vec<Vec<u32>>) -> Result<Self> {
        for col in &numeric {
            if col.len() != n_rows {
                return Err(Error::LengthMismatch { expected: n_rows, found: col.len() });
            }
        }
        for col in &categorical {
            if col.len() != n_rows {
                return Err(Error::LengthMismatch { expected: n_rows, found: col.len() });
            }
        }
        Ok(Self { n_rows, numeric, categorical })
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            numeric: self.numeric.len(),
            categorical: self.categorical.len(),
        }
    }

    pub fn row(&self, i: usize) -> RowRef<'_> {
        RowRef { matrix: self, row: i }
    }

    pub fn to_vector(&self, i: usize) -> FeatureVector {
        let r = self.row(i);
        let l = self.layout();
        FeatureVector {
            numeric: (0..l.numeric).map(|j| r.numeric(j)).collect(),
            categorical: (0..l.categorical).map(|j| r.categorical(j)).collect(),
        }
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            n_rows: rows.len(),
            numeric: self
                .numeric
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            categorical: self
                .categorical
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RowRef<'a> {
    matrix: &'a FeatureMatrix,
    row: usize,
}

impl Features for RowRef<'_> {
    #[inline]
    fn numeric(&self, j: usize) -> Option<f64> {
        let v = self.matrix.numeric[j][self.row];
        (!v.is_nan()).then_some(v)
    }

    #[inline]
    fn categorical(&self, j: usize) -> Option<u32> {
        let c = self.matrix.categorical[j][self.row];
        (c != CATEGORY_MISSING).then_some(c)
    }

    fn layout(&self) -> FeatureLayout {
        self.matrix.layout()
    }
}

/// Responses per unit exposure, exposures and features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub features: FeatureMatrix,
    pub target: Vec<f64>,
    pub exposure: Vec<f64>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, features: FeatureMatrix, target: Vec<f64>, exposure: Vec<f64>) -> Result<Self> {
        let n = features.n_rows;
        if target.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: target.len() });
        }
        if exposure.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: exposure.len() });
        }
        if schema.layout() != features.layout() {
            return Err(Error::SchemaMismatch(format!(
                "schema declares {:?} but the feature matrix has {:?}",
                schema.layout(),
                features.layout()
            )));
        }
        if let Some(i) = target.iter().position(|&y| !(y >= 0.0 && y.is_finite())) {
            return Err(Error::invalid(format!("row {i}: response {} is not a finite value >= 0", target[i])));
        }
        if let Some(i) = exposure.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!("row {i}: exposure {} is not positive", exposure[i])));
        }
        Ok(Self { schema, features, target, exposure })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.target.iter().filter(|&&y| y > 0.0).count()
    }

    pub fn zero_fraction(&self) -> f64 {
        1.0 - self.n_positive() as f64 / self.len() as f64
    }

    /// Copy of the listed rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            features: self.features.select(rows),
            target: rows.iter().map(|&i| self.target[i]).collect(),
            exposure: rows.iter().map(|&i| self.exposure[i]).collect(),
        }
    }

    /// Exposure-weighted mean response.
    pub fn weighted_mean(&self) -> f64 {
        let (num, den) = self
            .target
            .iter()
            .zip(&self.exposure)
            .fold((0.0, 0.0), |(n, d), (&y, &w)| (n + w * y, d + w));
        num / den
    }
}

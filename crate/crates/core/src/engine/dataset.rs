use log::warn;

use crate::error::{Error, Result};
use crate::location::{diameter, Location};

/// Observations at fixed locations, possibly replicated.
///
/// `values[r][i]` is replicate `r` at `locations[i]`. Replicates are treated as
/// independent draws of the same field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialDataset {
    pub locations: Vec<Location>,
    pub values: Vec<Vec<f64>>,
    pub covariates: Option<Vec<Vec<f64>>>,
}

impl SpatialDataset {
    pub fn new(locations: Vec<Location>, values: Vec<Vec<f64>>, covariates: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let d = Self {
            locations,
            values,
            covariates,
        };
        d.validate()?;
        Ok(d)
    }

    /// One replicate.
    pub fn single(locations: Vec<Location>, values: Vec<f64>) -> Result<Self> {
        Self::new(locations, vec![values], None)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn replicates(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.locations.first().map(|l| l.dim()).unwrap_or(2)
    }

    pub fn covariates(&self) -> Option<&[Vec<f64>]> {
        self.covariates.as_deref()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.locations.len();
        if n == 0 || self.values.is_empty() {
            return Err(Error::EmptyData);
        }
        let dim = self.locations[0].dim();
        for (i, l) in self.locations.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::Input(format!("location {i} is not finite")));
            }
            if l.dim() != dim {
                return Err(Error::Shape(format!("location {i} has dimension {}, expected {dim}", l.dim())));
            }
        }
        for (r, y) in self.values.iter().enumerate() {
            if y.len() != n {
                return Err(Error::Shape(format!("replicate {r} has {} values for {n} locations", y.len())));
            }
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::Input(format!("value at location {i}, replicate {r} is not finite")));
            }
        }
        if let Some(c) = &self.covariates {
            if c.len() != n {
                return Err(Error::Shape(format!("{} covariate rows for {n} locations", c.len())));
            }
            for (i, row) in c.iter().enumerate() {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Input(format!("covariate at location {i} is not finite")));
                }
            }
        }
        let dups = self.duplicate_count();
        if dups > 0 {
            warn!("{dups} duplicated locations; the nugget must be positive for a nonsingular likelihood");
        }
        Ok(())
    }

    fn duplicate_count(&self) -> usize {
        let mut sorted: Vec<[u64; 2]> = self
            .locations
            .iter()
            .map(|l| {
                let c = l.coords();
                [c[0].to_bits(), c.get(1).copied().unwrap_or(0.0).to_bits()]
            })
            .collect();
        sorted.sort_unstable();
        sorted.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// The dataset restricted to `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> SpatialDataset {
        SpatialDataset {
            locations: indices.iter().map(|&i| self.locations[i]).collect(),
            values: self
                .values
                .iter()
                .map(|y| indices.iter().map(|&i| y[i]).collect())
                .collect(),
            covariates: self
                .covariates
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i].clone()).collect()),
        }
    }

    /// Pooled sample variance over all replicates, each centred on its own mean.
    pub fn sample_variance(&self) -> f64 {
        let mut ss = 0.0;
        let mut count = 0usize;
        for y in &self.values {
            let m = y.iter().sum::<f64>() / y.len() as f64;
            ss += y.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
            count += y.len().saturating_sub(1);
        }
        if count == 0 {
            0.0
        } else {
            ss / count as f64
        }
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.locations)
    }
}

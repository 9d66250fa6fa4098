//! Grids for credible bands: vary one covariate, hold the rest at an exemplar.

use serde::Serialize;

use crate::design::{DesignSpec, TermKind, Value};
use crate::error::{ensure, Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandPoint {
    pub x: Value,
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band {
    pub variable: String,
    pub scale: String,
    pub ci_level: f64,
    /// Term values used for the covariates that are held fixed.
    pub exemplar: Vec<Value>,
    /// Kept-row index of the medoid when no exemplar was supplied.
    pub medoid_row: Option<usize>,
    pub points: Vec<BandPoint>,
}

pub struct BandGrid {
    pub exemplar: Vec<Value>,
    pub medoid_row: Option<usize>,
    pub xs: Vec<Value>,
    pub rows: Vec<Vec<f64>>,
}

/// Encoded design rows sweeping `variable` over its observed range (or its
/// levels), other terms fixed at `exemplar` or at the medoid observation.
pub fn band_grid(design: &DesignSpec, variable: &str, exemplar: Option<Vec<Value>>, points: usize) -> Result<BandGrid> {
    let t = design
        .terms
        .iter()
        .position(|t| t.name == variable)
        .ok_or_else(|| Error::InvalidArgument(format!("'{variable}' is not a term of the model")))?;
    ensure!(points >= 2, InvalidArgument, "a band needs at least two grid points");
    let (base, medoid_row) = match exemplar {
        Some(e) => {
            ensure!(e.len() == design.terms.len(), InvalidArgument, "exemplar needs {} term values", design.terms.len());
            (e, None)
        }
        None => {
            let m = design.medoid();
            (design.raw[m].clone(), Some(m))
        }
    };
    let xs: Vec<Value> = match &design.terms[t].kind {
        TermKind::Numeric { min, max, .. } => (0..points)
            .map(|i| Value::Num(min + (max - min) * i as f64 / (points - 1) as f64))
            .collect(),
        TermKind::Factor { levels } => levels.iter().cloned().map(Value::Level).collect(),
    };
    let rows = xs
        .iter()
        .map(|x| {
            let mut v = base.clone();
            v[t] = x.clone();
            design.encode(&v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandGrid { exemplar: base, medoid_row, xs, rows })
}

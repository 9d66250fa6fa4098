//! Design matrices with treatment-contrast factor coding.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::{Column, Dataset};
use crate::error::{ensure, Error, Result};
use crate::formula::{Formula, Response};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Intercept,
    Numeric,
    FactorContrast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    Numeric { mean: f64, sd: f64, min: f64, max: f64 },
    /// `levels[0]` is the reference level.
    Factor { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub name: String,
    pub kind: TermKind,
    /// First design column belonging to this term.
    pub first_column: usize,
    pub width: usize,
}

/// A raw covariate value before encoding.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Level(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignResponse {
    Numeric(DVector<f64>),
    Survival { time: Vec<f64>, event: Vec<bool> },
}

#[derive(Debug, Clone)]
pub struct DesignSpec {
    pub formula: Formula,
    pub x: DMatrix<f64>,
    pub labels: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    /// Sample SD of each column (numeric columns and contrasts; `None` for the intercept).
    pub column_sd: Vec<Option<f64>>,
    pub terms: Vec<Term>,
    pub response: DesignResponse,
    pub response_name: String,
    /// Level names when a two-level categorical response was coded 0/1.
    pub response_levels: Option<(String, String)>,
    /// Rows of the source dataset that were kept.
    pub rows: Vec<usize>,
    pub dropped_rows: usize,
    /// Raw term values per kept row, aligned with `terms`.
    pub raw: Vec<Vec<Value>>,
}

impl DesignSpec {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn has_intercept(&self) -> bool {
        self.kinds.first() == Some(&ColumnKind::Intercept)
    }

    pub fn y(&self) -> Result<&DVector<f64>> {
        match &self.response {
            DesignResponse::Numeric(y) => Ok(y),
            DesignResponse::Survival { .. } => {
                Err(Error::Design("expected a numeric response, found a survival response".into()))
            }
        }
    }

    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn numerical_rank(&self) -> usize {
        let svd = self.x.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let tol = smax * (self.n().max(self.p()) as f64) * f64::EPSILON;
        svd.singular_values.iter().filter(|&&s| s > tol).count()
    }

    pub fn ensure_full_rank(&self) -> Result<()> {
        let r = self.numerical_rank();
        ensure!(r == self.p(), Design, "design matrix is rank deficient (rank {r} < {} columns)", self.p());
        Ok(())
    }

    /// Encodes raw term values (aligned with `terms`) into a design row.
    pub fn encode(&self, values: &[Value]) -> Result<Vec<f64>> {
        ensure!(values.len() == self.terms.len(), InvalidArgument, "expected {} term values, got {}", self.terms.len(), values.len());
        let mut row = vec![0.0; self.p()];
        if self.has_intercept() {
            row[0] = 1.0;
        }
        for (term, value) in self.terms.iter().zip(values) {
            match (&term.kind, value) {
                (TermKind::Numeric { .. }, Value::Num(x)) => row[term.first_column] = *x,
                (TermKind::Factor { levels }, Value::Level(l)) => {
                    let idx = levels
                        .iter()
                        .position(|x| x == l)
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown level '{l}' for '{}'", term.name)))?;
                    if idx > 0 {
                        row[term.first_column + idx - 1] = 1.0;
                    }
                }
                _ => {
                    return Err(Error::InvalidArgument(format!("value of wrong type for term '{}'", term.name)))
                }
            }
        }
        Ok(row)
    }

    /// Index of the medoid row: the kept row minimizing summed Gower distance
    /// over the model terms.
    pub fn medoid(&self) -> usize {
        medoid(&self.terms, &self.raw)
    }

    pub fn intercept_column(&self) -> Option<usize> {
        self.has_intercept().then_some(0)
    }

    /// Design restricted to a subset of terms (intercept kept).
    pub fn subset_terms(&self, keep: &[usize]) -> DesignSpec {
        let mut cols = Vec::new();
        if self.has_intercept() {
            cols.push(0);
        }
        let mut terms = Vec::new();
        let mut next = cols.len();
        for &t in keep {
            let term = &self.terms[t];
            cols.extend(term.first_column..term.first_column + term.width);
            terms.push(Term { first_column: next, ..term.clone() });
            next += term.width;
        }
        let x = self.x.select_columns(cols.iter());
        let pick = |v: &Vec<Option<f64>>| cols.iter().map(|&c| v[c]).collect::<Vec<_>>();
        DesignSpec {
            formula: self.formula.clone(),
            x,
            labels: cols.iter().map(|&c| self.labels[c].clone()).collect(),
            kinds: cols.iter().map(|&c| self.kinds[c]).collect(),
            column_sd: pick(&self.column_sd),
            terms,
            response: self.response.clone(),
            response_name: self.response_name.clone(),
            response_levels: self.response_levels.clone(),
            rows: self.rows.clone(),
            dropped_rows: self.dropped_rows,
            raw: self.raw.iter().map(|r| keep.iter().map(|&t| r[t].clone()).collect()).collect(),
        }
    }
}

pub(crate) fn medoid(terms: &[Term], raw: &[Vec<Value>]) -> usize {
    let n = raw.len();
    if n <= 1 {
        return 0;
    }
    let ranges: Vec<f64> = terms
        .iter()
        .map(|t| match t.kind {
            TermKind::Numeric { min, max, .. } => max - min,
            TermKind::Factor { .. } => 1.0,
        })
        .collect();
    let dist = |a: &[Value], b: &[Value]| -> f64 {
        if terms.is_empty() {
            return 0.0;
        }
        let mut d = 0.0;
        for (k, (u, v)) in a.iter().zip(b).enumerate() {
            d += match (u, v) {
                (Value::Num(x), Value::Num(y)) => {
                    if ranges[k] > 0.0 {
                        (x - y).abs() / ranges[k]
                    } else {
                        0.0
                    }
                }
                (Value::Level(x), Value::Level(y)) => f64::from(u8::from(x != y)),
                _ => 1.0,
            };
        }
        d / terms.len() as f64
    };
    let mut totals = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(&raw[i], &raw[j]);
            totals[i] += d;
            totals[j] += d;
        }
    }
    totals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn build_design(formula: &Formula, data: &Dataset) -> Result<DesignSpec> {
    let term_names = formula.expand_terms(data);
    let resp_vars = formula.response.variables();
    for v in resp_vars.iter().copied().chain(term_names.iter().map(String::as_str)) {
        ensure!(data.column(v).is_some(), Design, "variable '{v}' not found in data");
    }

    let used: Vec<&Column> = resp_vars
        .iter()
        .copied()
        .chain(term_names.iter().map(String::as_str))
        .map(|v| data.column(v).unwrap())
        .collect();
    let rows: Vec<usize> =
        (0..data.nrows()).filter(|&r| used.iter().all(|c| !c.is_missing(r))).collect();
    let dropped_rows = data.nrows() - rows.len();
    ensure!(!rows.is_empty(), Design, "no rows without missing values in the model variables");
    let n = rows.len();

    let mut labels = Vec::new();
    let mut kinds = Vec::new();
    let mut column_sd = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if formula.has_intercept {
        labels.push("(Intercept)".to_string());
        kinds.push(ColumnKind::Intercept);
        column_sd.push(None);
        cols.push(vec![1.0; n]);
    }

    let mut terms = Vec::new();
    let mut raw: Vec<Vec<Value>> = vec![Vec::with_capacity(term_names.len()); n];
    for name in &term_names {
        let first_column = cols.len();
        match data.column(name).unwrap() {
            Column::Numeric(v) => {
                let x: Vec<f64> = rows.iter().map(|&r| v[r].unwrap()).collect();
                let sd = if n > 1 { sample_sd(&x) } else { 0.0 };
                ensure!(sd > 0.0 && sd.is_finite(), Design, "numeric column '{name}' is constant");
                let mean = x.iter().sum::<f64>() / n as f64;
                let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for (r, &xi) in raw.iter_mut().zip(&x) {
                    r.push(Value::Num(xi));
                }
                labels.push(name.clone());
                kinds.push(ColumnKind::Numeric);
                column_sd.push(Some(sd));
                cols.push(x);
                terms.push(Term { name: name.clone(), kind: TermKind::Numeric { mean, sd, min, max }, first_column, width: 1 });
            }
            Column::Categorical { levels, codes } => {
                let obs: Vec<usize> = rows.iter().map(|&r| codes[r].unwrap()).collect();
                let present: Vec<usize> =
                    (0..levels.len()).filter(|l| obs.contains(l)).collect();
                ensure!(present.len() >= 2, Design, "factor '{name}' has fewer than two observed levels");
                let kept: Vec<String> = present.iter().map(|&l| levels[l].clone()).collect();
                for (r, &c) in raw.iter_mut().zip(&obs) {
                    r.push(Value::Level(levels[c].clone()));
                }
                for &lvl in &present[1..] {
                    let x: Vec<f64> = obs.iter().map(|&c| f64::from(u8::from(c == lvl))).collect();
                    let sd = if n > 1 { sample_sd(&x) } else { 0.0 };
                    labels.push(format!("{name}{}", levels[lvl]));
                    kinds.push(ColumnKind::FactorContrast);
                    column_sd.push(Some(sd));
                    cols.push(x);
                }
                terms.push(Term {
                    name: name.clone(),
                    kind: TermKind::Factor { levels: kept.clone() },
                    first_column,
                    width: kept.len() - 1,
                });
            }
        }
    }

    let p = cols.len();
    let x = DMatrix::from_fn(n, p, |i, j| cols[j][i]);

    let (response, response_name, response_levels) = match &formula.response {
        Response::Single(name) => match data.column(name).unwrap() {
            Column::Numeric(v) => (
                DesignResponse::Numeric(DVector::from_iterator(n, rows.iter().map(|&r| v[r].unwrap()))),
                name.clone(),
                None,
            ),
            Column::Categorical { levels, codes } => {
                let present: Vec<usize> =
                    (0..levels.len()).filter(|l| rows.iter().any(|&r| codes[r] == Some(*l))).collect();
                ensure!(present.len() == 2, Design, "categorical response '{name}' must have exactly two levels");
                let y = DVector::from_iterator(
                    n,
                    rows.iter().map(|&r| f64::from(u8::from(codes[r] == Some(present[1])))),
                );
                (
                    DesignResponse::Numeric(y),
                    name.clone(),
                    Some((levels[present[0]].clone(), levels[present[1]].clone())),
                )
            }
        },
        Response::Survival { time, event } => {
            let t = data.select_rows(&rows).numeric(time)?;
            let e = data.select_rows(&rows).numeric(event)?;
            let event = e
                .iter()
                .map(|&v| match v {
                    0.0 => Ok(false),
                    1.0 => Ok(true),
                    _ => Err(Error::Design(format!("event indicator must be 0 or 1, found {v}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            (DesignResponse::Survival { time: t, event }, time.clone(), None)
        }
    };

    Ok(DesignSpec {
        formula: formula.clone(),
        x,
        labels,
        kinds,
        column_sd,
        terms,
        response,
        response_name,
        response_levels,
        rows,
        dropped_rows,
        raw,
    })
}

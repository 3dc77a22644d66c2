//! Finitely supported probability measures on R^d.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Allowed deviation of the total mass from one before renormalization.
pub const MASS_SUM_TOL: f64 = 1e-9;

/// Relative resolution under which two points are considered identical.
pub const POINT_DEDUP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
}

/// A probability measure with finitely many atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure<T> {
    dim: usize,
    points: Vec<Vec<T>>,
    masses: Vec<T>,
}

impl<T: Scalar> DiscreteMeasure<T> {
    /// Validates and normalizes the atoms.
    ///
    /// Zero-mass atoms are dropped, coincident points are merged and the
    /// masses are rescaled to sum to one.
    pub fn new(dim: usize, points: Vec<Vec<T>>, masses: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        if points.len() != masses.len() {
            return Err(Error::Validation(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::Dimension { expected: dim, got: p.len() });
            }
            if p.iter().any(|c| !c.to_f64().is_finite()) {
                return Err(Error::Validation("non-finite coordinate".into()));
            }
        }
        let zero = T::zero();
        if let Some(m) = masses.iter().find(|m| **m < zero) {
            return Err(Error::Validation(format!("negative mass {:?}", m)));
        }

        let scale = 1.0
            + points
                .iter()
                .flatten()
                .map(|c| c.to_f64().abs())
                .fold(0.0, f64::max);
        let tol = POINT_DEDUP_TOL * scale;

        let mut kept_points: Vec<Vec<T>> = Vec::new();
        let mut kept_masses: Vec<T> = Vec::new();
        for (p, m) in points.into_iter().zip(masses) {
            if m.is_zero() {
                continue;
            }
            match kept_points.iter().position(|q| same_point(q, &p, tol)) {
                Some(idx) => kept_masses[idx] = kept_masses[idx].clone() + m,
                None => {
                    kept_points.push(p);
                    kept_masses.push(m);
                }
            }
        }
        if kept_points.is_empty() {
            return Err(Error::Validation("measure has no positive mass".into()));
        }

        let total = kept_masses.iter().fold(T::zero(), |acc, m| acc + m.clone());
        if (total.to_f64() - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::Validation(format!(
                "masses sum to {} instead of 1",
                total.to_f64()
            )));
        }
        let mut masses: Vec<T> = kept_masses.into_iter().map(|m| m / total.clone()).collect();
        if !T::EXACT {
            // Push the rounding residue onto the heaviest atom.
            let heaviest = (0..masses.len())
                .max_by(|&a, &b| masses[a].partial_cmp(&masses[b]).unwrap().then(b.cmp(&a)))
                .unwrap();
            let rest = masses
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != heaviest)
                .fold(T::zero(), |acc, (_, m)| acc + m.clone());
            masses[heaviest] = T::one() - rest;
        }
        Ok(Self { dim, points: kept_points, masses })
    }

    /// A unit point mass.
    pub fn dirac(point: Vec<T>) -> Self {
        Self { dim: point.len(), points: vec![point], masses: vec![T::one()] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// E|X|^2 under this measure.
    pub fn second_moment(&self) -> T {
        self.points
            .iter()
            .zip(&self.masses)
            .fold(T::zero(), |acc, (p, m)| acc + m.clone() * squared_norm(p))
    }

    /// Shift every atom by `v`.
    pub fn translated(&self, v: &[T]) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| p.iter().zip(v).map(|(a, b)| a.clone() + b.clone()).collect())
            .collect();
        Self { dim: self.dim, points, masses: self.masses.clone() }
    }

    pub fn to_doc(&self) -> MeasureDoc {
        MeasureDoc {
            dim: Some(self.dim),
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(Scalar::to_f64).collect())
                .collect(),
            masses: Some(self.masses.iter().map(Scalar::to_f64).collect()),
            masses_exact: T::EXACT
                .then(|| self.masses.iter().map(Scalar::to_exact_string).collect()),
        }
    }

    pub fn from_doc(doc: &MeasureDoc) -> Result<Self> {
        let dim = match (doc.dim, doc.points.first()) {
            (Some(d), _) => d,
            (None, Some(p)) => p.len(),
            (None, None) => return Err(Error::Validation("empty measure".into())),
        };
        let points = doc
            .points
            .iter()
            .map(|p| p.iter().map(|&c| T::from_f64(c)).collect())
            .collect();
        let exact = doc.masses_exact.as_ref().filter(|_| T::EXACT || doc.masses.is_none());
        let masses = match (exact, &doc.masses) {
            (Some(strs), _) => strs
                .iter()
                .map(|s| {
                    T::parse_exact(s).ok_or_else(|| Error::Parse(format!("bad mass literal {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?,
            (None, Some(ms)) => ms.iter().map(|&m| T::from_f64(m)).collect(),
            (None, None) => return Err(Error::Parse("missing \"masses\"".into())),
        };
        Self::new(dim, points, masses)
    }
}

pub(crate) fn same_point<T: Scalar>(a: &[T], b: &[T], tol: f64) -> bool {
    if T::EXACT {
        a == b
    } else {
        a.iter().zip(b).all(|(x, y)| (x.to_f64() - y.to_f64()).abs() <= tol)
    }
}

pub fn squared_norm<T: Scalar>(p: &[T]) -> T {
    p.iter().fold(T::zero(), |acc, c| acc + c.clone() * c.clone())
}

pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| {
        let d = x.clone() - y.clone();
        acc + d.clone() * d
    })
}

/// Ordered collection of measures sharing one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSet<T> {
    measures: Vec<DiscreteMeasure<T>>,
}

impl<T: Scalar> MeasureSet<T> {
    pub fn new(measures: Vec<DiscreteMeasure<T>>) -> Result<Self> {
        let first = measures
            .first()
            .ok_or_else(|| Error::Validation("at least one measure is required".into()))?;
        let dim = first.dim();
        if let Some(m) = measures.iter().find(|m| m.dim() != dim) {
            return Err(Error::Dimension { expected: dim, got: m.dim() });
        }
        Ok(Self { measures })
    }

    pub fn measures(&self) -> &[DiscreteMeasure<T>] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    /// Support sizes S_i.
    pub fn support_sizes(&self) -> Vec<usize> {
        self.measures.iter().map(DiscreteMeasure::len).collect()
    }

    /// Row offsets of the (i, k) marginal blocks, plus the total as the last entry.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut acc = 0;
        for m in &self.measures {
            out.push(acc);
            acc += m.len();
        }
        out.push(acc);
        out
    }

    /// The bound sum S_i - N + 1 on the sparsest barycenter support.
    pub fn sparsity_bound(&self) -> usize {
        self.support_sizes().iter().sum::<usize>() - self.len() + 1
    }

    pub fn translated(&self, v: &[T]) -> Self {
        Self { measures: self.measures.iter().map(|m| m.translated(v)).collect() }
    }

    pub fn to_doc(&self) -> MeasureSetDoc {
        MeasureSetDoc { measures: self.measures.iter().map(DiscreteMeasure::to_doc).collect() }
    }

    pub fn from_doc(doc: &MeasureSetDoc) -> Result<Self> {
        Self::new(doc.measures.iter().map(DiscreteMeasure::from_doc).collect::<Result<_>>()?)
    }
}

/// JSON form of a measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses_exact: Option<Vec<String>>,
}

/// JSON form of a measure-set file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSetDoc {
    pub measures: Vec<MeasureDoc>,
}

pub fn load_measure<T: Scalar>(source: impl Read, format: Format) -> Result<DiscreteMeasure<T>> {
    match format {
        Format::Json => {
            let doc: MeasureDoc = serde_json::from_reader(source)?;
            DiscreteMeasure::from_doc(&doc)
        }
    }
}

/// Loads either a `{"measures": [...]}` file or a single bare measure.
pub fn load_measure_set<T: Scalar>(source: impl Read, format: Format) -> Result<MeasureSet<T>> {
    match format {
        Format::Json => {
            let value: serde_json::Value = serde_json::from_reader(source)?;
            if value.get("measures").is_some() {
                let doc: MeasureSetDoc = serde_json::from_value(value)?;
                MeasureSet::from_doc(&doc)
            } else {
                let doc: MeasureDoc = serde_json::from_value(value)?;
                MeasureSet::new(vec![DiscreteMeasure::from_doc(&doc)?])
            }
        }
    }
}

use std::collections::{HashMap, HashSet};

use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// N×D matrix of activation vectors, one row per image, with a stable
/// image identifier per row.
///
/// Rows are stored row-major. Construction rejects empty matrices,
/// duplicate ids and non-finite values, so every instance satisfies those
/// invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    ids: Vec<String>,
    data: Vec<T>,
    dim: usize,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(ids: Vec<String>, data: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("feature dimension must be positive"));
        }
        if ids.is_empty() {
            return Err(Error::validation("feature matrix needs at least one row"));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::validation(format!(
                "expected {} values for {} rows of dimension {dim}, got {}",
                ids.len() * dim,
                ids.len(),
                data.len()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::validation(format!("duplicate row id {id:?}")));
            }
        }
        for (id, row) in ids.iter().zip(data.chunks_exact(dim)) {
            if let Some(col) = row.iter().position(|v| !Float::is_finite(*v)) {
                return Err(Error::validation(format!(
                    "non-finite value in row {id:?} at column {col}"
                )));
            }
        }
        Ok(Self { ids, data, dim })
    }

    /// Builds a matrix from `(id, row)` pairs; every row must have the same
    /// length.
    pub fn from_rows<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<T>)>,
    {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (id, row) in rows {
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::validation(format!(
                        "row {id:?} has length {}, expected {d}",
                        row.len()
                    )))
                }
                _ => {}
            }
            ids.push(id);
            data.extend(row);
        }
        Self::new(ids, data, dim.unwrap_or(0))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Row-major values.
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Map from id to row index.
    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(indices.len());
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::validation(format!(
                    "row index {i} out of range for {} rows",
                    self.len()
                )));
            }
            ids.push(self.ids[i].clone());
            data.extend_from_slice(self.row(i));
        }
        Self::new(ids, data, self.dim)
    }

    /// Applies `f` to every value, keeping ids.
    pub fn map_values(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(
            self.ids.clone(),
            self.data.iter().map(|&v| f(v)).collect(),
            self.dim,
        )
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> FeatureMatrix<U> {
        FeatureMatrix {
            ids: self.ids.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::lit(v.to_f64_lossy()))
                .collect(),
            dim: self.dim,
        }
    }
}

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One matched pair of normalized image points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    /// Point in the first image.
    pub y: Vector2<f64>,
    /// Point in the second image.
    pub z: Vector2<f64>,
}

impl Correspondence {
    pub fn new(y: Vector2<f64>, z: Vector2<f64>) -> Self {
        Self { y, z }
    }

    pub fn from_coords(y1: f64, y2: f64, z1: f64, z2: f64) -> Self {
        Self::new(Vector2::new(y1, y2), Vector2::new(z1, z2))
    }

    /// Homogeneous lift `[y; 1]`.
    #[inline]
    pub fn y_h(&self) -> Vector3<f64> {
        Vector3::new(self.y.x, self.y.y, 1.0)
    }

    /// Homogeneous lift `[z; 1]`.
    #[inline]
    pub fn z_h(&self) -> Vector3<f64> {
        Vector3::new(self.z.x, self.z.y, 1.0)
    }

    pub fn is_finite(&self) -> bool {
        self.y.iter().chain(self.z.iter()).all(|v| v.is_finite())
    }
}

/// Ordered list of correspondences.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceSet {
    items: Vec<Correspondence>,
}

impl CorrespondenceSet {
    /// Builds a set, rejecting non-finite coordinates.
    pub fn new(items: Vec<Correspondence>) -> Result<Self> {
        if let Some(i) = items.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "correspondence {i} has non-finite coordinates"
            )));
        }
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Correspondence] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Correspondence> {
        self.items.iter()
    }

    pub fn get(&self, index: usize) -> Option<&Correspondence> {
        self.items.get(index)
    }

    /// Keeps the correspondences whose mask entry is `true`.
    pub fn subset(&self, mask: &[bool]) -> Self {
        debug_assert_eq!(mask.len(), self.items.len());
        Self {
            items: self
                .items
                .iter()
                .zip(mask)
                .filter(|(_, &keep)| keep)
                .map(|(c, _)| *c)
                .collect(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            items: indices.iter().map(|&i| self.items[i]).collect(),
        }
    }

    pub fn into_inner(self) -> Vec<Correspondence> {
        self.items
    }
}

impl<'a> IntoIterator for &'a CorrespondenceSet {
    type Item = &'a Correspondence;
    type IntoIter = std::slice::Iter<'a, Correspondence>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

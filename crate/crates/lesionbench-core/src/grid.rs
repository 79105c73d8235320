//! Voxel grids, label masks and their shared geometry.
//!
//! Data is stored x-fastest: the linear index of voxel `(i, j, k)` is
//! `i + nx * (j + ny * k)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::CoreError;

/// A 4x4 voxel-index to world-mm affine, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine4(pub [[f64; 4]; 4]);

impl Affine4 {
    /// Diagonal affine from spacing, zero translation.
    pub fn from_spacing(spacing: [f64; 3]) -> Self {
        let mut m = [[0.0; 4]; 4];
        m[0][0] = spacing[0];
        m[1][1] = spacing[1];
        m[2][2] = spacing[2];
        m[3][3] = 1.0;
        Affine4(m)
    }

    /// Euclidean norms of the first three columns (the voxel step sizes in mm).
    pub fn column_norms(&self) -> [f64; 3] {
        let mut norms = [0.0; 3];
        for (c, norm) in norms.iter_mut().enumerate() {
            let mut s = 0.0;
            for r in 0..3 {
                s += self.0[r][c] * self.0[r][c];
            }
            *norm = libm::sqrt(s);
        }
        norms
    }

    /// Rescale the direction columns so their norms equal `new_spacing`,
    /// keeping direction and translation.
    pub fn with_column_norms(&self, new_spacing: [f64; 3]) -> Self {
        let norms = self.column_norms();
        let mut m = self.0;
        for c in 0..3 {
            if norms[c] > 0.0 {
                let f = new_spacing[c] / norms[c];
                for row in m.iter_mut().take(3) {
                    row[c] *= f;
                }
            }
        }
        Affine4(m)
    }
}

/// Shared geometry of a volume: voxel counts, physical spacing and affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub dims: (usize, usize, usize),
    pub spacing_mm: [f64; 3],
    pub affine: Affine4,
}

impl Geometry {
    pub fn new(dims: (usize, usize, usize), spacing_mm: [f64; 3], affine: Affine4) -> Result<Self, CoreError> {
        let g = Geometry { dims, spacing_mm, affine };
        g.validate()?;
        Ok(g)
    }

    /// Geometry with a diagonal affine derived from the spacing.
    pub fn isotropic(dims: (usize, usize, usize), spacing_mm: [f64; 3]) -> Result<Self, CoreError> {
        Geometry::new(dims, spacing_mm, Affine4::from_spacing(spacing_mm))
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    fn validate(&self) -> Result<(), CoreError> {
        let (nx, ny, nz) = self.dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(CoreError::InvalidGrid(format!("dims must be >= 1, got {:?}", self.dims)));
        }
        for (axis, &s) in self.spacing_mm.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(CoreError::InvalidGrid(format!("spacing[{axis}] = {s} must be positive")));
            }
        }
        let norms = self.affine.column_norms();
        for axis in 0..3 {
            if libm::fabs(norms[axis] - self.spacing_mm[axis]) > 1e-4 {
                return Err(CoreError::InvalidGrid(format!(
                    "affine column {axis} norm {} disagrees with spacing {}",
                    norms[axis], self.spacing_mm[axis]
                )));
            }
        }
        Ok(())
    }

    /// Same dims and spacing, within exact equality on dims and 1e-9 on spacing.
    pub fn compatible_with(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self
                .spacing_mm
                .iter()
                .zip(other.spacing_mm.iter())
                .all(|(a, b)| libm::fabs(a - b) <= 1e-9)
    }
}

/// A 3D scalar field with physical spacing and a voxel-to-world affine.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub geometry: Geometry,
    pub data: Vec<f64>,
}

impl VoxelGrid {
    pub fn new(geometry: Geometry, data: Vec<f64>) -> Result<Self, CoreError> {
        if data.len() != geometry.voxel_count() {
            return Err(CoreError::InvalidGrid(format!(
                "data length {} != voxel count {}",
                data.len(),
                geometry.voxel_count()
            )));
        }
        Ok(VoxelGrid { geometry, data })
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.geometry.index(i, j, k)]
    }
}

/// Per-voxel non-negative integer labels over a grid geometry; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    pub geometry: Geometry,
    pub labels: Vec<u32>,
}

impl LabelMask {
    pub fn new(geometry: Geometry, labels: Vec<u32>) -> Result<Self, CoreError> {
        if labels.len() != geometry.voxel_count() {
            return Err(CoreError::InvalidGrid(format!(
                "label length {} != voxel count {}",
                labels.len(),
                geometry.voxel_count()
            )));
        }
        Ok(LabelMask { geometry, labels })
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> u32 {
        self.labels[self.geometry.index(i, j, k)]
    }

    /// Any nonzero label counts as foreground.
    pub fn is_foreground(&self, idx: usize) -> bool {
        self.labels[idx] != 0
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.labels.iter().all(|&v| v == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_zero_dims_and_nonpositive_spacing() {
        assert!(Geometry::isotropic((0, 2, 2), [1.0, 1.0, 1.0]).is_err());
        assert!(Geometry::isotropic((2, 2, 2), [1.0, -1.0, 1.0]).is_err());
        assert!(Geometry::isotropic((2, 2, 2), [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_affine_spacing_disagreement() {
        let affine = Affine4::from_spacing([2.0, 1.0, 1.0]);
        assert!(Geometry::new((2, 2, 2), [1.0, 1.0, 1.0], affine).is_err());
    }

    #[test]
    fn rejects_wrong_data_length() {
        let g = Geometry::isotropic((2, 2, 2), [1.0; 3]).unwrap();
        assert!(VoxelGrid::new(g, vec![0.0; 7]).is_err());
    }

    #[test]
    fn x_fastest_indexing() {
        let g = Geometry::isotropic((2, 3, 4), [1.0; 3]).unwrap();
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 2);
        assert_eq!(g.index(0, 0, 1), 6);
        assert_eq!(g.index(1, 2, 3), 1 + 2 * (2 + 3 * 3));
    }

    #[test]
    fn affine_rescale_preserves_direction() {
        let a = Affine4::from_spacing([2.0, 3.0, 4.0]);
        let b = a.with_column_norms([1.0, 1.0, 1.0]);
        let n = b.column_norms();
        for v in n {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}

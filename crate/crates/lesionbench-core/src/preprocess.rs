//! Resampling to isotropic spacing and per-volume z-score normalization.

use alloc::format;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::grid::{Geometry, LabelMask, VoxelGrid};

/// Interpolation mode for [`resample_isotropic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    Trilinear,
    Nearest,
}

/// Round half away from zero; used for output dimension computation.
fn round_half_away(x: f64) -> f64 {
    libm::round(x)
}

fn output_geometry(geom: &Geometry, target_mm: f64) -> Geometry {
    let (nx, ny, nz) = geom.dims;
    let dims_in = [nx, ny, nz];
    let mut dims_out = [0usize; 3];
    for axis in 0..3 {
        let extent = dims_in[axis] as f64 * geom.spacing_mm[axis] / target_mm;
        dims_out[axis] = (round_half_away(extent) as usize).max(1);
    }
    Geometry {
        dims: (dims_out[0], dims_out[1], dims_out[2]),
        spacing_mm: [target_mm; 3],
        affine: geom.affine.with_column_norms([target_mm; 3]),
    }
}

/// Map an output voxel index to a source-space (voxel index) coordinate,
/// clamped to the volume so edge samples repeat the border value.
fn source_coord(out_idx: usize, src_spacing: f64, target_mm: f64, src_n: usize) -> f64 {
    let x = out_idx as f64 * target_mm / src_spacing;
    x.clamp(0.0, (src_n - 1) as f64)
}

fn check_target(target_mm: f64) -> Result<(), CoreError> {
    if !(target_mm > 0.0) || !target_mm.is_finite() {
        return Err(CoreError::InvalidParameter(format!("target_mm = {target_mm} must be positive")));
    }
    Ok(())
}

/// Resample a scalar grid to cubic `target_mm` spacing.
///
/// Output dims are `max(1, round(n_i * s_i / target))` with
/// round-half-away-from-zero; trilinear samples are edge clamped. A grid
/// already at the target spacing passes through unchanged.
pub fn resample_isotropic(grid: &VoxelGrid, target_mm: f64, mode: ResampleMode) -> Result<VoxelGrid, CoreError> {
    check_target(target_mm)?;
    let geom = &grid.geometry;
    if geom.spacing_mm.iter().all(|&s| s == target_mm) {
        return Ok(grid.clone());
    }
    let out_geom = output_geometry(geom, target_mm);
    let (onx, ony, onz) = out_geom.dims;
    let (nx, ny, nz) = geom.dims;
    let mut data = Vec::with_capacity(out_geom.voxel_count());
    for k in 0..onz {
        let z = source_coord(k, geom.spacing_mm[2], target_mm, nz);
        for j in 0..ony {
            let y = source_coord(j, geom.spacing_mm[1], target_mm, ny);
            for i in 0..onx {
                let x = source_coord(i, geom.spacing_mm[0], target_mm, nx);
                let v = match mode {
                    ResampleMode::Trilinear => trilinear_sample(grid, x, y, z),
                    ResampleMode::Nearest => {
                        let (si, sj, sk) = nearest_index(x, y, z, (nx, ny, nz));
                        grid.at(si, sj, sk)
                    }
                };
                data.push(v);
            }
        }
    }
    VoxelGrid::new(out_geom, data)
}

/// Resample a label mask; only nearest-neighbour is allowed so no labels
/// are invented.
pub fn resample_isotropic_mask(mask: &LabelMask, target_mm: f64, mode: ResampleMode) -> Result<LabelMask, CoreError> {
    check_target(target_mm)?;
    if mode != ResampleMode::Nearest {
        return Err(CoreError::InvalidMode(
            "label masks must be resampled with nearest-neighbour interpolation".into(),
        ));
    }
    let geom = &mask.geometry;
    if geom.spacing_mm.iter().all(|&s| s == target_mm) {
        return Ok(mask.clone());
    }
    let out_geom = output_geometry(geom, target_mm);
    let (onx, ony, onz) = out_geom.dims;
    let (nx, ny, nz) = geom.dims;
    let mut labels = Vec::with_capacity(out_geom.voxel_count());
    for k in 0..onz {
        let z = source_coord(k, geom.spacing_mm[2], target_mm, nz);
        for j in 0..ony {
            let y = source_coord(j, geom.spacing_mm[1], target_mm, ny);
            for i in 0..onx {
                let x = source_coord(i, geom.spacing_mm[0], target_mm, nx);
                let (si, sj, sk) = nearest_index(x, y, z, (nx, ny, nz));
                labels.push(mask.at(si, sj, sk));
            }
        }
    }
    LabelMask::new(out_geom, labels)
}

/// Nearest voxel center; exact half-way ties go to the lower index.
fn nearest_index(x: f64, y: f64, z: f64, dims: (usize, usize, usize)) -> (usize, usize, usize) {
    let pick = |c: f64, n: usize| -> usize {
        let lo = libm::floor(c) as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = c - lo as f64;
        if frac > 0.5 {
            hi
        } else {
            lo
        }
    };
    (pick(x, dims.0), pick(y, dims.1), pick(z, dims.2))
}

fn trilinear_sample(grid: &VoxelGrid, x: f64, y: f64, z: f64) -> f64 {
    let (nx, ny, nz) = grid.geometry.dims;
    let x0 = libm::floor(x) as usize;
    let y0 = libm::floor(y) as usize;
    let z0 = libm::floor(z) as usize;
    let x1 = (x0 + 1).min(nx - 1);
    let y1 = (y0 + 1).min(ny - 1);
    let z1 = (z0 + 1).min(nz - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let fz = z - z0 as f64;

    let c000 = grid.at(x0, y0, z0);
    let c100 = grid.at(x1, y0, z0);
    let c010 = grid.at(x0, y1, z0);
    let c110 = grid.at(x1, y1, z0);
    let c001 = grid.at(x0, y0, z1);
    let c101 = grid.at(x1, y0, z1);
    let c011 = grid.at(x0, y1, z1);
    let c111 = grid.at(x1, y1, z1);

    let c00 = c000 + (c100 - c000) * fx;
    let c10 = c010 + (c110 - c010) * fx;
    let c01 = c001 + (c101 - c001) * fx;
    let c11 = c011 + (c111 - c011) * fx;
    let c0 = c00 + (c10 - c00) * fy;
    let c1 = c01 + (c11 - c01) * fy;
    c0 + (c1 - c0) * fz
}

/// Per-volume z-score: `(x - mean) / std` with population std over all
/// voxels. A near-constant volume (std < 1e-8) maps to all zeros.
pub fn zscore_normalize(grid: &VoxelGrid) -> VoxelGrid {
    let n = grid.data.len() as f64;
    let mean = grid.data.iter().sum::<f64>() / n;
    let var = grid.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    let data = if std < 1e-8 {
        alloc::vec![0.0; grid.data.len()]
    } else {
        grid.data.iter().map(|v| (v - mean) / std).collect()
    };
    VoxelGrid {
        geometry: grid.geometry.clone(),
        data,
    }
}

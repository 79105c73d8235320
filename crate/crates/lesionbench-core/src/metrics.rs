//! Dice and Normalized Surface Dice at a millimeter tolerance, backed by
//! an exact anisotropic Euclidean distance transform.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::grid::{Geometry, LabelMask};

/// Slack added to the NSD tolerance so exact-distance ties are not lost
/// to floating point.
const TOLERANCE_SLACK_MM: f64 = 1e-9;

/// A metric value in [0, 1], or undefined when both masks are empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue {
    Undefined,
    Defined(f64),
}

impl MetricValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Undefined => None,
            MetricValue::Defined(v) => Some(*v),
        }
    }

    pub fn is_undefined(&self) -> bool {
        matches!(self, MetricValue::Undefined)
    }
}

/// Voxel counts underlying a Dice score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapCounts {
    pub gt_voxels: usize,
    pub pred_voxels: usize,
    pub intersection_voxels: usize,
}

/// Per-voxel distance in mm to the nearest reference voxel; infinite
/// everywhere when the reference set is empty.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub geometry: Geometry,
    pub distances_mm: Vec<f64>,
}

fn check_shared_geometry(gt: &LabelMask, pred: &LabelMask) -> Result<(), CoreError> {
    if !gt.geometry.compatible_with(&pred.geometry) {
        return Err(CoreError::ShapeMismatch(format!(
            "gt dims {:?} spacing {:?} vs pred dims {:?} spacing {:?}",
            gt.geometry.dims, gt.geometry.spacing_mm, pred.geometry.dims, pred.geometry.spacing_mm
        )));
    }
    Ok(())
}

pub fn overlap_counts(gt: &LabelMask, pred: &LabelMask) -> Result<OverlapCounts, CoreError> {
    check_shared_geometry(gt, pred)?;
    let mut g = 0;
    let mut p = 0;
    let mut i = 0;
    for (a, b) in gt.labels.iter().zip(pred.labels.iter()) {
        let fa = *a != 0;
        let fb = *b != 0;
        g += fa as usize;
        p += fb as usize;
        i += (fa && fb) as usize;
    }
    Ok(OverlapCounts {
        gt_voxels: g,
        pred_voxels: p,
        intersection_voxels: i,
    })
}

/// Dice overlap `2|A∩B| / (|A| + |B|)`; undefined when both masks are
/// empty, 0 when exactly one is.
pub fn dice(gt: &LabelMask, pred: &LabelMask) -> Result<MetricValue, CoreError> {
    let c = overlap_counts(gt, pred)?;
    Ok(match (c.gt_voxels, c.pred_voxels) {
        (0, 0) => MetricValue::Undefined,
        (g, p) => MetricValue::Defined(2.0 * c.intersection_voxels as f64 / (g + p) as f64),
    })
}

/// Surface voxels of a binary mask: foreground voxels with at least one
/// background (or out-of-volume) 6-neighbour.
pub fn extract_surface(mask: &LabelMask) -> Vec<(usize, usize, usize)> {
    let (nx, ny, nz) = mask.geometry.dims;
    let mut surface = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if mask.at(i, j, k) == 0 {
                    continue;
                }
                let boundary = i == 0
                    || i == nx - 1
                    || j == 0
                    || j == ny - 1
                    || k == 0
                    || k == nz - 1
                    || mask.at(i - 1, j, k) == 0
                    || mask.at(i + 1, j, k) == 0
                    || mask.at(i, j - 1, k) == 0
                    || mask.at(i, j + 1, k) == 0
                    || mask.at(i, j, k - 1) == 0
                    || mask.at(i, j, k + 1) == 0;
                if boundary {
                    surface.push((i, j, k));
                }
            }
        }
    }
    surface
}

/// Exact Euclidean distance transform in mm to a reference voxel set,
/// anisotropy-aware via the geometry's spacing.
///
/// Separable lower-envelope scheme on squared distances, one pass per
/// axis with spacing-squared weights.
pub fn edt(reference: &[(usize, usize, usize)], geometry: &Geometry) -> DistanceField {
    let n = geometry.voxel_count();
    let mut sq = vec![f64::INFINITY; n];
    for &(i, j, k) in reference {
        sq[geometry.index(i, j, k)] = 0.0;
    }
    let (nx, ny, nz) = geometry.dims;
    let [sx, sy, sz] = geometry.spacing_mm;

    let mut line = Vec::new();
    // x axis: contiguous rows.
    line.resize(nx, 0.0);
    let mut out_line = vec![0.0; nx];
    for k in 0..nz {
        for j in 0..ny {
            let base = geometry.index(0, j, k);
            line.copy_from_slice(&sq[base..base + nx]);
            dt_line(&line, sx, &mut out_line);
            sq[base..base + nx].copy_from_slice(&out_line);
        }
    }
    // y axis.
    line.resize(ny, 0.0);
    out_line.resize(ny, 0.0);
    for k in 0..nz {
        for i in 0..nx {
            for j in 0..ny {
                line[j] = sq[geometry.index(i, j, k)];
            }
            dt_line(&line, sy, &mut out_line);
            for j in 0..ny {
                sq[geometry.index(i, j, k)] = out_line[j];
            }
        }
    }
    // z axis.
    line.resize(nz, 0.0);
    out_line.resize(nz, 0.0);
    for j in 0..ny {
        for i in 0..nx {
            for k in 0..nz {
                line[k] = sq[geometry.index(i, j, k)];
            }
            dt_line(&line, sz, &mut out_line);
            for k in 0..nz {
                sq[geometry.index(i, j, k)] = out_line[k];
            }
        }
    }

    let distances_mm = sq.into_iter().map(libm::sqrt).collect();
    DistanceField {
        geometry: geometry.clone(),
        distances_mm,
    }
}

/// 1D squared-distance transform along a line with sample pitch `w` mm:
/// `out[p] = min_q (w(p-q))^2 + f[q]`. Infinite inputs carry through when
/// a whole line is unreached.
fn dt_line(f: &[f64], w: f64, out: &mut [f64]) {
    let n = f.len();
    // Hull of parabolas: v[k] is the site, z[k] the left boundary of its
    // interval. Infinite parabolas never win and are skipped.
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    for q in 0..n {
        if f[q] == f64::INFINITY {
            continue;
        }
        let xq = q as f64 * w;
        if v.is_empty() {
            v.push(q);
            z.push(f64::NEG_INFINITY);
            z.push(f64::INFINITY);
            continue;
        }
        loop {
            let p = *v.last().unwrap();
            let xp = p as f64 * w;
            let s = ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
            if s <= *z.get(z.len() - 2).unwrap() && v.len() > 1 {
                v.pop();
                z.pop();
                z.pop();
                z.push(f64::INFINITY);
            } else {
                v.push(q);
                z.pop();
                z.push(s);
                z.push(f64::INFINITY);
                break;
            }
        }
    }
    if v.is_empty() {
        out[..n].copy_from_slice(&f[..n]);
        return;
    }
    let mut k = 0;
    for (p, slot) in out.iter_mut().enumerate().take(n) {
        let xp = p as f64 * w;
        while z[k + 1] < xp {
            k += 1;
        }
        let q = v[k];
        let d = xp - q as f64 * w;
        *slot = d * d + f[q];
    }
}

/// Normalized Surface Dice at `tolerance_mm`: the fraction of both masks'
/// surface voxels lying within the tolerance of the other mask's surface.
pub fn nsd(gt: &LabelMask, pred: &LabelMask, tolerance_mm: f64) -> Result<MetricValue, CoreError> {
    check_shared_geometry(gt, pred)?;
    if !(tolerance_mm > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "tolerance_mm = {tolerance_mm} must be positive"
        )));
    }
    let gt_empty = gt.is_empty_mask();
    let pred_empty = pred.is_empty_mask();
    match (gt_empty, pred_empty) {
        (true, true) => return Ok(MetricValue::Undefined),
        (true, false) | (false, true) => return Ok(MetricValue::Defined(0.0)),
        _ => {}
    }
    let s_gt = extract_surface(gt);
    let s_pred = extract_surface(pred);
    let tau = tolerance_mm + TOLERANCE_SLACK_MM;

    let d_to_gt = edt(&s_gt, &gt.geometry);
    let d_to_pred = edt(&s_pred, &pred.geometry);

    let within = |surface: &[(usize, usize, usize)], field: &DistanceField| -> usize {
        surface
            .iter()
            .filter(|&&(i, j, k)| field.distances_mm[field.geometry.index(i, j, k)] <= tau)
            .count()
    };
    let hits = within(&s_pred, &d_to_gt) + within(&s_gt, &d_to_pred);
    Ok(MetricValue::Defined(hits as f64 / (s_pred.len() + s_gt.len()) as f64))
}

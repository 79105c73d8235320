//! Probability-map ensembling under a configurable accumulation
//! precision, and conversion of ensembled probabilities to label masks.
//!
//! Half and single precision are emulated by quantizing after every
//! load, addition and division (round-to-nearest-even), so reduced
//! precision behaves identically on every host. This reproduces the
//! failure mode where float16 accumulation flips the argmax of nearly
//! tied class probabilities.

use alloc::format;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::grid::{Geometry, LabelMask};

/// Accumulation precision for [`ensemble_probs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecisionMode {
    /// IEEE binary16 (1-5-10) at every step.
    Half,
    /// IEEE binary32 at every step.
    Single,
    /// Native f64; the reference.
    Double,
}

impl PrecisionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrecisionMode::Half => "half",
            PrecisionMode::Single => "single",
            PrecisionMode::Double => "double",
        }
    }

    fn quantize(&self, x: f64) -> f64 {
        match self {
            PrecisionMode::Half => quantize_f16(x),
            PrecisionMode::Single => x as f32 as f64,
            PrecisionMode::Double => x,
        }
    }
}

/// Round to nearest integer, ties to even.
fn round_ties_even(x: f64) -> f64 {
    let floor = libm::floor(x);
    let frac = x - floor;
    if frac > 0.5 {
        floor + 1.0
    } else if frac < 0.5 {
        floor
    } else if libm::fmod(floor, 2.0) == 0.0 {
        floor
    } else {
        floor + 1.0
    }
}

/// Nearest IEEE binary16 value of `x` (round-to-nearest-even), as f64.
/// Direct from f64, so no double rounding through f32.
pub fn quantize_f16(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let a = libm::fabs(x);
    // floor(log2(a)) via frexp: a = m * 2^e with m in [0.5, 1).
    let (_, e) = libm::frexp(a);
    let exp = (e - 1).clamp(-15, 15);
    // Normal ulp is 2^(exp-10); below 2^-14 the format is subnormal with
    // a fixed ulp of 2^-24.
    let ulp_exp = if exp < -14 { -24 } else { exp - 10 };
    let q = round_ties_even(libm::ldexp(x, -ulp_exp));
    let y = libm::ldexp(q, ulp_exp);
    // Rounding may carry into the next binade; 65504 is the f16 maximum.
    if libm::fabs(y) > 65504.0 {
        return if x > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    // Carry can also change the ulp (e.g. 0.9999 -> 1.0); requantize once.
    let (_, e2) = libm::frexp(libm::fabs(y));
    if (e2 - 1).clamp(-15, 15) != exp {
        let exp2 = (e2 - 1).clamp(-15, 15);
        let ulp_exp2 = if exp2 < -14 { -24 } else { exp2 - 10 };
        return libm::ldexp(round_ties_even(libm::ldexp(x, -ulp_exp2)), ulp_exp2);
    }
    y
}

/// C per-class probability grids over one geometry, stored class-major
/// (`probs[c * n + v]` for class c, voxel v).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityStack {
    pub geometry: Geometry,
    pub classes: usize,
    pub probs: Vec<f64>,
}

impl ProbabilityStack {
    pub fn new(geometry: Geometry, classes: usize, probs: Vec<f64>) -> Result<Self, CoreError> {
        if classes < 2 {
            return Err(CoreError::InvalidParameter(format!("need >= 2 classes, got {classes}")));
        }
        let n = geometry.voxel_count();
        if probs.len() != classes * n {
            return Err(CoreError::InvalidGrid(format!(
                "probs length {} != classes {classes} * voxels {n}",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(CoreError::InvalidGrid("probabilities must lie in [0, 1]".into()));
        }
        Ok(ProbabilityStack { geometry, classes, probs })
    }

    pub fn prob(&self, class: usize, voxel: usize) -> f64 {
        self.probs[class * self.geometry.voxel_count() + voxel]
    }

    /// Largest |sum - 1| of any voxel's class vector.
    pub fn max_simplex_deviation(&self) -> f64 {
        let n = self.geometry.voxel_count();
        (0..n)
            .map(|v| {
                let s: f64 = (0..self.classes).map(|c| self.probs[c * n + v]).sum();
                libm::fabs(s - 1.0)
            })
            .fold(0.0, f64::max)
    }
}

/// An ensembled stack together with the precision it was accumulated in.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    pub stack: ProbabilityStack,
    pub mode: PrecisionMode,
}

/// Per-voxel per-class mean of the input stacks, with every load, add
/// and divide rounded to the selected precision. Accumulation order is
/// the input order, so reduced-precision results are reproducible.
pub fn ensemble_probs(stacks: &[ProbabilityStack], mode: PrecisionMode) -> Result<EnsembleOutput, CoreError> {
    let first = stacks
        .first()
        .ok_or_else(|| CoreError::InvalidParameter("need at least one probability stack".into()))?;
    for (i, s) in stacks.iter().enumerate().skip(1) {
        if s.classes != first.classes || !s.geometry.compatible_with(&first.geometry) {
            return Err(CoreError::ShapeMismatch(format!(
                "stack {i} does not match stack 0 (classes {} vs {}, dims {:?} vs {:?})",
                s.classes, first.classes, s.geometry.dims, first.geometry.dims
            )));
        }
    }
    let k = stacks.len() as f64;
    let len = first.probs.len();
    let mut out = Vec::with_capacity(len);
    for idx in 0..len {
        let mut acc = 0.0;
        for s in stacks {
            let v = mode.quantize(s.probs[idx]);
            acc = mode.quantize(acc + v);
        }
        out.push(mode.quantize(acc / k).clamp(0.0, 1.0));
    }
    Ok(EnsembleOutput {
        stack: ProbabilityStack {
            geometry: first.geometry.clone(),
            classes: first.classes,
            probs: out,
        },
        mode,
    })
}

/// Per-voxel argmax over classes; ties break toward the lowest class
/// index, and class 0 is background.
pub fn argmax_labels(stack: &ProbabilityStack) -> LabelMask {
    let n = stack.geometry.voxel_count();
    let mut labels = Vec::with_capacity(n);
    for v in 0..n {
        let mut best_class = 0usize;
        let mut best = stack.probs[v];
        for c in 1..stack.classes {
            let p = stack.probs[c * n + v];
            if p > best {
                best = p;
                best_class = c;
            }
        }
        labels.push(best_class as u32);
    }
    LabelMask {
        geometry: stack.geometry.clone(),
        labels,
    }
}

/// Voxels where two labelings disagree; the listed indices are capped,
/// the count is not.
#[derive(Debug, Clone, PartialEq)]
pub struct DisagreementReport {
    pub count: usize,
    pub voxels: Vec<(usize, usize, usize)>,
    pub cap: usize,
}

pub fn compare_labelings(a: &LabelMask, b: &LabelMask, cap: usize) -> Result<DisagreementReport, CoreError> {
    if !a.geometry.compatible_with(&b.geometry) {
        return Err(CoreError::ShapeMismatch(format!(
            "dims {:?} vs {:?}",
            a.geometry.dims, b.geometry.dims
        )));
    }
    let (nx, ny, _) = a.geometry.dims;
    let mut count = 0;
    let mut voxels = Vec::new();
    for (idx, (la, lb)) in a.labels.iter().zip(b.labels.iter()).enumerate() {
        if la != lb {
            count += 1;
            if voxels.len() < cap {
                let i = idx % nx;
                let j = (idx / nx) % ny;
                let k = idx / (nx * ny);
                voxels.push((i, j, k));
            }
        }
    }
    Ok(DisagreementReport { count, voxels, cap })
}

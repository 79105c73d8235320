//! Training-side pure math: inverse-square-root dataset sampling,
//! poly and warm-up learning-rate schedules, and deterministic k-fold
//! splitting.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};

use crate::error::CoreError;

/// Counter-based generator used for all sampling; ChaCha keeps the
/// sequences identical across platforms.
type Rng = rand_chacha::ChaCha8Rng;

fn uniform01(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unbiased integer in [0, n) via rejection.
fn uniform_below(rng: &mut Rng, n: u64) -> u64 {
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % n;
        }
    }
}

/// Normalized dataset sampling probabilities, `p_i ∝ sizes_i^(-1/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub dataset_ids: Vec<String>,
    pub sizes: Vec<u64>,
    pub probabilities: Vec<f64>,
}

/// Probabilities inversely proportional to the square root of each
/// dataset's image count.
pub fn sampling_weights(dataset_ids: &[String], sizes: &[u64]) -> Result<SamplingPlan, CoreError> {
    if sizes.is_empty() || dataset_ids.len() != sizes.len() {
        return Err(CoreError::InvalidParameter(format!(
            "need matching nonempty id/size lists, got {} ids and {} sizes",
            dataset_ids.len(),
            sizes.len()
        )));
    }
    if let Some(pos) = sizes.iter().position(|&s| s == 0) {
        return Err(CoreError::InvalidParameter(format!(
            "dataset {} has size 0; sizes must be >= 1",
            dataset_ids[pos]
        )));
    }
    let weights: Vec<f64> = sizes.iter().map(|&s| 1.0 / libm::sqrt(s as f64)).collect();
    let total: f64 = weights.iter().sum();
    Ok(SamplingPlan {
        dataset_ids: dataset_ids.to_vec(),
        sizes: sizes.to_vec(),
        probabilities: weights.iter().map(|w| w / total).collect(),
    })
}

/// Draw `count` dataset ids from the plan, deterministically per seed.
pub fn sample_sequence(plan: &SamplingPlan, seed: u64, count: usize) -> Vec<String> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut cumulative = Vec::with_capacity(plan.probabilities.len());
    let mut acc = 0.0;
    for p in &plan.probabilities {
        acc += p;
        cumulative.push(acc);
    }
    (0..count)
        .map(|_| {
            let u = uniform01(&mut rng);
            let idx = cumulative.partition_point(|&c| c <= u).min(plan.dataset_ids.len() - 1);
            plan.dataset_ids[idx].clone()
        })
        .collect()
}

/// Learning-rate schedule: plain poly decay, or a linear warm-up ramp
/// followed by poly decay over the remaining epochs.
#[derive(Debug, Clone, PartialEq)]
pub enum LrSchedule {
    Poly {
        lr0: f64,
        total_epochs: u32,
        exponent: f64,
    },
    WarmupThenPoly {
        target: f64,
        warmup_epochs: u32,
        total_epochs: u32,
        exponent: f64,
    },
}

impl LrSchedule {
    /// The framework-default poly schedule: exponent 0.9.
    pub fn poly_default(lr0: f64, total_epochs: u32) -> Self {
        LrSchedule::Poly {
            lr0,
            total_epochs,
            exponent: 0.9,
        }
    }

    pub fn warmup_default(target: f64, warmup_epochs: u32, total_epochs: u32) -> Self {
        LrSchedule::WarmupThenPoly {
            target,
            warmup_epochs,
            total_epochs,
            exponent: 0.9,
        }
    }

    pub fn total_epochs(&self) -> u32 {
        match self {
            LrSchedule::Poly { total_epochs, .. } | LrSchedule::WarmupThenPoly { total_epochs, .. } => *total_epochs,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let (rate, total) = match self {
            LrSchedule::Poly { lr0, total_epochs, .. } => (*lr0, *total_epochs),
            LrSchedule::WarmupThenPoly {
                target,
                warmup_epochs,
                total_epochs,
                ..
            } => {
                if *warmup_epochs == 0 || warmup_epochs >= total_epochs {
                    return Err(CoreError::InvalidParameter(format!(
                        "warmup_epochs {warmup_epochs} must lie in (0, total_epochs {total_epochs})"
                    )));
                }
                (*target, *total_epochs)
            }
        };
        if !(rate > 0.0) {
            return Err(CoreError::InvalidParameter(format!("learning rate {rate} must be positive")));
        }
        if total == 0 {
            return Err(CoreError::InvalidParameter("total_epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Learning rate at a 0-indexed epoch.
///
/// Poly: `lr0 * (1 - epoch/total)^exponent`. Warm-up: `target*(epoch+1)/W`
/// for the first W epochs (so epoch W-1 trains at the full target), then
/// poly decay stretched over the remaining `total - W` epochs.
pub fn lr_at(schedule: &LrSchedule, epoch: u32) -> Result<f64, CoreError> {
    schedule.validate()?;
    if epoch >= schedule.total_epochs() {
        return Err(CoreError::InvalidParameter(format!(
            "epoch {epoch} out of range [0, {})",
            schedule.total_epochs()
        )));
    }
    Ok(match *schedule {
        LrSchedule::Poly {
            lr0,
            total_epochs,
            exponent,
        } => lr0 * libm::pow(1.0 - epoch as f64 / total_epochs as f64, exponent),
        LrSchedule::WarmupThenPoly {
            target,
            warmup_epochs,
            total_epochs,
            exponent,
        } => {
            if epoch < warmup_epochs {
                target * (epoch + 1) as f64 / warmup_epochs as f64
            } else {
                let rem = (total_epochs - warmup_epochs) as f64;
                target * libm::pow(1.0 - (epoch - warmup_epochs) as f64 / rem, exponent)
            }
        }
    })
}

/// Seeded shuffle then round-robin assignment into k folds; fold sizes
/// differ by at most one and the folds partition the input.
pub fn make_folds(case_ids: &[String], k: usize, seed: u64) -> Result<Vec<Vec<String>>, CoreError> {
    if k < 2 {
        return Err(CoreError::InvalidParameter(format!("k = {k} must be >= 2")));
    }
    if case_ids.len() < k {
        return Err(CoreError::InvalidParameter(format!(
            "{} cases cannot fill {k} folds",
            case_ids.len()
        )));
    }
    let mut ids = case_ids.to_vec();
    let mut rng = Rng::seed_from_u64(seed);
    // Fisher-Yates.
    for i in (1..ids.len()).rev() {
        let j = uniform_below(&mut rng, (i + 1) as u64) as usize;
        ids.swap(i, j);
    }
    let mut folds: Vec<Vec<String>> = (0..k).map(|_| Vec::new()).collect();
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn equal_sizes_give_uniform_probabilities() {
        let plan = sampling_weights(&ids(&["a", "b", "c"]), &[50, 50, 50]).unwrap();
        for p in &plan.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_sqrt_ratio_20_80_180() {
        // 1/sqrt(20) : 1/sqrt(80) : 1/sqrt(180) = 6 : 3 : 2.
        let plan = sampling_weights(&ids(&["a", "b", "c"]), &[20, 80, 180]).unwrap();
        let expect = [6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0];
        for (p, e) in plan.probabilities.iter().zip(expect.iter()) {
            assert!((p - e).abs() < 1e-12);
        }
        let total: f64 = plan.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probabilities_invariant_under_uniform_scaling() {
        let a = sampling_weights(&ids(&["x", "y", "z"]), &[20, 80, 180]).unwrap();
        let b = sampling_weights(&ids(&["x", "y", "z"]), &[200, 800, 1800]).unwrap();
        for (p, q) in a.probabilities.iter().zip(b.probabilities.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn single_dataset_and_zero_size() {
        let plan = sampling_weights(&ids(&["only"]), &[7]).unwrap();
        assert_eq!(plan.probabilities, vec![1.0]);
        assert!(sampling_weights(&ids(&["bad"]), &[0]).is_err());
    }

    #[test]
    fn sample_sequence_degenerate_and_empty() {
        let plan = sampling_weights(&ids(&["only"]), &[7]).unwrap();
        assert!(sample_sequence(&plan, 1, 0).is_empty());
        assert_eq!(sample_sequence(&plan, 9, 5), ids(&["only", "only", "only", "only", "only"]));
    }

    #[test]
    fn sample_sequence_deterministic_per_seed() {
        let plan = sampling_weights(&ids(&["a", "b", "c"]), &[20, 80, 180]).unwrap();
        assert_eq!(sample_sequence(&plan, 11, 1000), sample_sequence(&plan, 11, 1000));
        assert_ne!(sample_sequence(&plan, 11, 1000), sample_sequence(&plan, 12, 1000));
    }

    #[test]
    fn sample_sequence_chi_square() {
        let plan = sampling_weights(&ids(&["a", "b", "c"]), &[20, 80, 180]).unwrap();
        let n = 100_000usize;
        let draws = sample_sequence(&plan, 20240901, n);
        let mut counts = [0.0f64; 3];
        for d in &draws {
            let idx = plan.dataset_ids.iter().position(|x| x == d).unwrap();
            counts[idx] += 1.0;
        }
        let mut chi2 = 0.0;
        for (c, p) in counts.iter().zip(plan.probabilities.iter()) {
            let e = p * n as f64;
            chi2 += (c - e) * (c - e) / e;
        }
        // 99.9% critical value for 2 degrees of freedom.
        assert!(chi2 < 13.8155, "chi2 = {chi2}");
    }

    #[test]
    fn poly_start_midpoint_and_monotone() {
        let s = LrSchedule::poly_default(0.01, 1000);
        assert_eq!(lr_at(&s, 0).unwrap(), 0.01);
        let mid = lr_at(&s, 500).unwrap();
        assert!((mid - 0.01 * libm::pow(0.5, 0.9)).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for e in 0..1000 {
            let v = lr_at(&s, e).unwrap();
            assert!(v < prev && v >= 0.0);
            prev = v;
        }
    }

    #[test]
    fn warmup_ramp_hits_target_at_epoch_49() {
        for target in [0.01, 0.001] {
            let s = LrSchedule::warmup_default(target, 50, 1000);
            assert_eq!(lr_at(&s, 49).unwrap(), target);
            assert_eq!(lr_at(&s, 50).unwrap(), target); // poly restarts at full rate
            assert!((lr_at(&s, 0).unwrap() - target / 50.0).abs() < 1e-15);
        }
    }

    #[test]
    fn epoch_out_of_range_rejected() {
        let s = LrSchedule::poly_default(0.01, 10);
        assert!(lr_at(&s, 10).is_err());
        assert!(lr_at(&s, 9).is_ok());
    }

    #[test]
    fn folds_even_split_and_388_case_sizes() {
        let cases: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        let folds = make_folds(&cases, 5, 0).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));

        let cases: Vec<String> = (0..388).map(|i| format!("c{i:03}")).collect();
        let folds = make_folds(&cases, 5, 7).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![77, 77, 78, 78, 78]);
    }

    #[test]
    fn folds_partition_and_deterministic() {
        let cases: Vec<String> = (0..23).map(|i| format!("c{i}")).collect();
        let a = make_folds(&cases, 5, 99).unwrap();
        let b = make_folds(&cases, 5, 99).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<String> = a.iter().flatten().cloned().collect();
        all.sort();
        let mut want = cases.clone();
        want.sort();
        assert_eq!(all, want);
    }

    #[test]
    fn folds_parameter_errors() {
        let cases: Vec<String> = (0..3).map(|i| format!("c{i}")).collect();
        assert!(make_folds(&cases, 1, 0).is_err());
        assert!(make_folds(&cases, 5, 0).is_err());
    }
}

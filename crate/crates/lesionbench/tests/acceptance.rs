//! Acceptance suite: one test per criterion, each printing a pass line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).

use std::path::{Path, PathBuf};
use std::time::Instant;

use lesionbench::nifti::{self, Endianness, NiftiDatatype};
use lesionbench_core::ensemble::{argmax_labels, compare_labelings, ensemble_probs, PrecisionMode, ProbabilityStack};
use lesionbench_core::evaluation::{
    aggregate, fold_average, round2, subgroup_report, AggregationPolicy, CaseMeta, CaseResult, Sex, SubgroupSpec,
};
use lesionbench_core::grid::{Geometry, LabelMask, VoxelGrid};
use lesionbench_core::metrics::{edt, nsd, MetricValue};
use lesionbench_core::preprocess::{resample_isotropic, zscore_normalize, ResampleMode};
use lesionbench_core::schedules::{lr_at, sample_sequence, sampling_weights, LrSchedule};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(criterion: u32, what: &str) {
    println!("[PASS] criterion {criterion}: {what}");
}

#[test]
fn criterion_01_fold_average_table_arithmetic() {
    assert_eq!(round2(fold_average(&[54.22, 53.54, 55.18, 43.09, 56.66])), 52.54);
    assert_eq!(round2(fold_average(&[58.62, 54.30, 56.36, 45.40, 56.36])), 54.21);
    pass(1, "5-fold averages 52.54 and 54.21, exact at two decimals");
}

#[test]
fn criterion_02_weighted_mean_consistency() {
    let mut results = Vec::new();
    let mut metas = Vec::new();
    let mut add = |id: String, dice: f64, nsd: f64, sex: Sex| {
        results.push(CaseResult {
            case_id: id.clone(),
            dice: MetricValue::Defined(dice),
            nsd: MetricValue::Defined(nsd),
            gt_empty: false,
            pred_empty: false,
        });
        metas.push(CaseMeta {
            case_id: id,
            sex,
            age_years: None,
            tsi_months: None,
            cohort: String::new(),
        });
    };
    for i in 0..175 {
        add(format!("m{i:03}"), 0.6402, 0.7311, Sex::Male);
    }
    for i in 0..100 {
        add(format!("f{i:03}"), 0.5885, 0.6616, Sex::Female);
    }
    let all = aggregate(&results, AggregationPolicy::NanAsOne).unwrap();
    assert!((all.mean_dice_pct.unwrap() - 62.14).abs() <= 0.005);

    let rows = subgroup_report(&results, &metas, &SubgroupSpec::sex(false)).unwrap();
    let male = rows.iter().find(|r| r.group == "male").unwrap();
    let female = rows.iter().find(|r| r.group == "female").unwrap();
    assert_eq!((male.n_included, female.n_included), (175, 100));
    assert_eq!(round2(male.mean_dice_pct.unwrap()), 64.02);
    assert_eq!(round2(female.mean_dice_pct.unwrap()), 58.85);
    pass(2, "175x64.02 / 100x58.85 aggregates to All 62.14 with matching sex rows");
}

fn mask(dims: (usize, usize, usize), spacing: [f64; 3], fg: &[(usize, usize, usize)]) -> LabelMask {
    let geom = Geometry::isotropic(dims, spacing).unwrap();
    let mut labels = vec![0u32; geom.voxel_count()];
    for &(i, j, k) in fg {
        labels[geom.index(i, j, k)] = 1;
    }
    LabelMask::new(geom, labels).unwrap()
}

#[test]
fn criterion_03_policy_contrast() {
    let dims = (4, 4, 4);
    let sp = [1.0; 3];
    let empty = mask(dims, sp, &[]);
    let blob = mask(dims, sp, &[(1, 1, 1), (2, 1, 1)]);
    let blob_half = mask(dims, sp, &[(1, 1, 1), (3, 3, 3)]);
    let one = mask(dims, sp, &[(0, 0, 0)]);

    let results = vec![
        lesionbench_core::evaluation::evaluate_case("empty_empty", &empty, &empty, 1.0).unwrap(),
        lesionbench_core::evaluation::evaluate_case("empty_gt_pred", &empty, &one, 1.0).unwrap(),
        lesionbench_core::evaluation::evaluate_case("normal", &blob, &blob_half, 1.0).unwrap(),
    ];
    assert_eq!(results[0].dice, MetricValue::Undefined);
    assert_eq!(results[1].dice, MetricValue::Defined(0.0));
    assert_eq!(results[2].dice, MetricValue::Defined(0.5));

    // NanAsOne: (1.0 + 0.0 + 0.5) / 3; IgnoreNan: (0.0 + 0.5) / 2.
    let nan1 = aggregate(&results, AggregationPolicy::NanAsOne).unwrap();
    assert_eq!(nan1.n_included, 3);
    assert_eq!(nan1.mean_dice_pct.unwrap(), 150.0 / 3.0);
    let ign = aggregate(&results, AggregationPolicy::IgnoreNan).unwrap();
    assert_eq!(ign.n_included, 2);
    assert_eq!(ign.mean_dice_pct.unwrap(), 25.0);
    pass(3, "NanAsOne scores empty/empty 100 and empty-GT-with-prediction 0; IgnoreNan excludes only the former");
}

fn brute_edt(reference: &[(usize, usize, usize)], geom: &Geometry) -> Vec<f64> {
    let (nx, ny, nz) = geom.dims;
    let [sx, sy, sz] = geom.spacing_mm;
    let mut out = vec![f64::INFINITY; geom.voxel_count()];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut best = f64::INFINITY;
                for &(ri, rj, rk) in reference {
                    let dx = (i as f64 - ri as f64) * sx;
                    let dy = (j as f64 - rj as f64) * sy;
                    let dz = (k as f64 - rk as f64) * sz;
                    best = best.min((dx * dx + dy * dy + dz * dz).sqrt());
                }
                out[geom.index(i, j, k)] = best;
            }
        }
    }
    out
}

// Independent surface extraction + all-pairs NSD oracle.
fn brute_nsd(gt: &LabelMask, pred: &LabelMask, tau: f64) -> MetricValue {
    let surface = |m: &LabelMask| -> Vec<(usize, usize, usize)> {
        let (nx, ny, nz) = m.geometry.dims;
        let mut out = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if m.at(i, j, k) == 0 {
                        continue;
                    }
                    let mut exposed = false;
                    for (di, dj, dk) in [(-1i64, 0i64, 0i64), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)] {
                        let (pi, pj, pk) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                        if pi < 0 || pj < 0 || pk < 0 || pi >= nx as i64 || pj >= ny as i64 || pk >= nz as i64 {
                            exposed = true;
                        } else if m.at(pi as usize, pj as usize, pk as usize) == 0 {
                            exposed = true;
                        }
                    }
                    if exposed {
                        out.push((i, j, k));
                    }
                }
            }
        }
        out
    };
    let gt_empty = gt.is_empty_mask();
    let pred_empty = pred.is_empty_mask();
    if gt_empty && pred_empty {
        return MetricValue::Undefined;
    }
    if gt_empty || pred_empty {
        return MetricValue::Defined(0.0);
    }
    let sg = surface(gt);
    let sp = surface(pred);
    let [sx, sy, sz] = gt.geometry.spacing_mm;
    let dist = |a: (usize, usize, usize), b: (usize, usize, usize)| -> f64 {
        let dx = (a.0 as f64 - b.0 as f64) * sx;
        let dy = (a.1 as f64 - b.1 as f64) * sy;
        let dz = (a.2 as f64 - b.2 as f64) * sz;
        (dx * dx + dy * dy + dz * dz).sqrt()
    };
    let slack = tau + 1e-9;
    let hits_p = sp
        .iter()
        .filter(|&&p| sg.iter().any(|&g| dist(p, g) <= slack))
        .count();
    let hits_g = sg
        .iter()
        .filter(|&&g| sp.iter().any(|&p| dist(g, p) <= slack))
        .count();
    MetricValue::Defined((hits_p + hits_g) as f64 / (sp.len() + sg.len()) as f64)
}

#[test]
fn criterion_04_metric_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    for round in 0..100 {
        let dims = (16, 16, 16);
        let spacing = [
            rng.gen_range(0.4..2.5),
            rng.gen_range(0.4..2.5),
            rng.gen_range(0.4..2.5),
        ];
        let geom = Geometry::isotropic(dims, spacing).unwrap();

        // Random reference set for the EDT check.
        let n_ref = rng.gen_range(0..20);
        let reference: Vec<_> = (0..n_ref)
            .map(|_| (rng.gen_range(0..16), rng.gen_range(0..16), rng.gen_range(0..16)))
            .collect();
        let field = edt(&reference, &geom);
        let brute = brute_edt(&reference, &geom);
        for (a, b) in field.distances_mm.iter().zip(brute.iter()) {
            if a.is_infinite() && b.is_infinite() {
                continue;
            }
            assert!((a - b).abs() < 1e-9, "round {round}: edt {a} vs brute {b}");
        }

        // Random mask pair for the NSD check.
        let random_mask = |rng: &mut ChaCha8Rng| -> LabelMask {
            let density = rng.gen_range(0.0..0.2);
            let labels: Vec<u32> = (0..geom.voxel_count())
                .map(|_| (rng.gen_bool(density)) as u32)
                .collect();
            LabelMask::new(geom.clone(), labels).unwrap()
        };
        let gt = random_mask(&mut rng);
        let pred = random_mask(&mut rng);
        let tau = rng.gen_range(0.5..4.0);
        assert_eq!(nsd(&gt, &pred, tau).unwrap(), brute_nsd(&gt, &pred, tau), "round {round}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    pass(4, "100 random instances: edt within 1e-9 mm of brute force, nsd exactly equal");
}

#[test]
fn criterion_05_half_precision_ensembling_failure() {
    let geom = Geometry::isotropic((1, 1, 1), [1.0; 3]).unwrap();
    let model_a = ProbabilityStack::new(geom.clone(), 2, vec![0.5004, 0.4996]).unwrap();
    let model_b = ProbabilityStack::new(geom, 2, vec![0.4994, 0.5006]).unwrap();
    let stacks = [model_a, model_b];

    let double = argmax_labels(&ensemble_probs(&stacks, PrecisionMode::Double).unwrap().stack);
    let single = argmax_labels(&ensemble_probs(&stacks, PrecisionMode::Single).unwrap().stack);
    let half = argmax_labels(&ensemble_probs(&stacks, PrecisionMode::Half).unwrap().stack);

    assert_eq!(double.labels, vec![1]);
    assert_eq!(single.labels, vec![1]);
    assert_eq!(half.labels, vec![0]);
    assert!(compare_labelings(&half, &double, 10).unwrap().count >= 1);
    assert_eq!(compare_labelings(&single, &double, 10).unwrap().count, 0);
    pass(5, "half mode flips the crafted argmax to class 0 while single agrees with double");
}

#[test]
fn criterion_06_sampling_plan() {
    let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let plan = sampling_weights(&ids, &[20, 80, 180]).unwrap();
    for (p, e) in plan.probabilities.iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
        assert!((p - e).abs() < 1e-12);
    }

    let n = 100_000;
    let draws = sample_sequence(&plan, 42, n);
    let mut counts = [0.0f64; 3];
    for d in &draws {
        counts[plan.dataset_ids.iter().position(|x| x == d).unwrap()] += 1.0;
    }
    let chi2: f64 = counts
        .iter()
        .zip(plan.probabilities.iter())
        .map(|(c, p)| {
            let e = p * n as f64;
            (c - e) * (c - e) / e
        })
        .sum();
    assert!(chi2 < 13.8155, "chi2 = {chi2} exceeds the 99.9% critical value for 2 dof");

    let scaled = sampling_weights(&ids, &[20 * 17, 80 * 17, 180 * 17]).unwrap();
    for (p, q) in plan.probabilities.iter().zip(scaled.probabilities.iter()) {
        assert!((p - q).abs() < 1e-12);
    }
    pass(6, "inverse-sqrt probabilities 6/11,3/11,2/11; 100k draws pass chi-square; scale invariant");
}

#[test]
fn criterion_07_learning_rate_schedules() {
    let poly = LrSchedule::poly_default(0.01, 1000);
    assert_eq!(lr_at(&poly, 0).unwrap(), 0.01);
    assert!((lr_at(&poly, 500).unwrap() - 0.01 * 0.5f64.powf(0.9)).abs() < 1e-12);
    let mut prev = f64::INFINITY;
    for e in 0..1000 {
        let v = lr_at(&poly, e).unwrap();
        assert!(v < prev);
        prev = v;
    }
    for target in [0.01, 0.001] {
        let warm = LrSchedule::warmup_default(target, 50, 1000);
        assert_eq!(lr_at(&warm, 49).unwrap(), target);
    }
    pass(7, "poly starts at 0.01, strictly decreases, hits 0.01*0.5^0.9 at midpoint; warm-ups reach target at epoch 49");
}

#[test]
fn criterion_08_preprocessing() {
    // Identity resample at 1 mm is bit-stable.
    let geom = Geometry::isotropic((6, 5, 4), [1.0; 3]).unwrap();
    let data: Vec<f64> = (0..120).map(|i| (i as f64).sin()).collect();
    let grid = VoxelGrid::new(geom, data).unwrap();
    let out = resample_isotropic(&grid, 1.0, ResampleMode::Trilinear).unwrap();
    assert_eq!(out, grid);

    // Constant volumes stay constant.
    let geom = Geometry::isotropic((5, 5, 5), [1.7, 0.6, 2.2]).unwrap();
    let constant = VoxelGrid::new(geom, vec![3.25; 125]).unwrap();
    let out = resample_isotropic(&constant, 1.0, ResampleMode::Trilinear).unwrap();
    assert!(out.data.iter().all(|&v| (v - 3.25).abs() < 1e-12));

    // Z-scored 64^3 random volume has near-exact unit moments.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let geom = Geometry::isotropic((64, 64, 64), [1.0; 3]).unwrap();
    let data: Vec<f64> = (0..64 * 64 * 64).map(|_| rng.gen_range(0.0..1000.0)).collect();
    let z = zscore_normalize(&VoxelGrid::new(geom, data).unwrap());
    let n = z.data.len() as f64;
    let mean = z.data.iter().sum::<f64>() / n;
    let var = z.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    assert!(mean.abs() < 1e-6);
    assert!((var.sqrt() - 1.0).abs() < 1e-6);

    // 4x1x1 ramp at 2 mm -> 8x1x1 at 1 mm matches direct interpolation.
    let geom = Geometry::isotropic((4, 1, 1), [2.0, 1.0, 1.0]).unwrap();
    let ramp = VoxelGrid::new(geom, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let out = resample_isotropic(&ramp, 1.0, ResampleMode::Trilinear).unwrap();
    assert_eq!(out.geometry.dims, (8, 1, 1));
    for (i, &v) in out.data.iter().enumerate() {
        let x = (i as f64 * 0.5).clamp(0.0, 3.0);
        let direct = x.floor() + (x - x.floor()) * ((x.floor() + 1.0).min(3.0) - x.floor());
        assert!((v - direct).abs() < 1e-6, "voxel {i}: {v} vs {direct}");
    }
    pass(8, "identity resample bit-stable, constants preserved, z-score moments exact, ramp matches oracle");
}

#[test]
fn criterion_09_io_round_trip() {
    let dir = std::env::temp_dir().join("lesionbench-acceptance-io");
    std::fs::create_dir_all(&dir).unwrap();
    let geom = Geometry::isotropic((4, 3, 5), [0.7, 1.1, 2.3]).unwrap();
    let cases: Vec<(NiftiDatatype, Vec<f64>)> = vec![
        (NiftiDatatype::Uint8, (0..60).map(|i| (i % 256) as f64).collect()),
        (NiftiDatatype::Int16, (0..60).map(|i| (i as i64 * 37 - 300) as f64).collect()),
        (
            NiftiDatatype::Float32,
            (0..60).map(|i| (i as f32 * 0.731 - 7.5) as f64).collect(),
        ),
    ];
    for (dtype, values) in &cases {
        for endian in [Endianness::Little, Endianness::Big] {
            for ext in ["nii", "nii.gz"] {
                let path = dir.join(format!("rt_{}_{endian:?}.{ext}", dtype.code()));
                let grid = VoxelGrid::new(geom.clone(), values.clone()).unwrap();
                nifti::write_grid_as(&grid, &path, *dtype, endian).unwrap();
                let back = nifti::read_grid(&path).unwrap();
                assert_eq!(back.data, grid.data, "{path:?}");
                assert_eq!(back.geometry.dims, grid.geometry.dims);
                for (a, b) in back.geometry.spacing_mm.iter().zip(grid.geometry.spacing_mm.iter()) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }
    pass(9, "uint8/int16/float32 volumes round-trip bit-exactly, plain and gzip, both endiannesses");
}

fn build_throughput_corpus(root: &Path, n_cases: usize) -> (PathBuf, PathBuf) {
    let gt_dir = root.join("gt");
    let pred_dir = root.join("pred");
    std::fs::create_dir_all(&gt_dir).unwrap();
    std::fs::create_dir_all(&pred_dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let geom = Geometry::isotropic((64, 64, 64), [1.0; 3]).unwrap();
    for c in 0..n_cases {
        let mut gt = vec![0u32; geom.voxel_count()];
        let mut pred = vec![0u32; geom.voxel_count()];
        // A random lesion box, and a jittered prediction of it.
        let (cx, cy, cz): (usize, usize, usize) =
            (rng.gen_range(8..56), rng.gen_range(8..56), rng.gen_range(8..56));
        let r = rng.gen_range(2usize..6);
        let (jx, jy, jz) = (
            rng.gen_range(-2i64..3),
            rng.gen_range(-2i64..3),
            rng.gen_range(-2i64..3),
        );
        for k in cz.saturating_sub(r)..(cz + r).min(63) {
            for j in cy.saturating_sub(r)..(cy + r).min(63) {
                for i in cx.saturating_sub(r)..(cx + r).min(63) {
                    gt[geom.index(i, j, k)] = 1;
                    let (pi, pj, pk) = (i as i64 + jx, j as i64 + jy, k as i64 + jz);
                    if (0..64).contains(&pi) && (0..64).contains(&pj) && (0..64).contains(&pk) {
                        pred[geom.index(pi as usize, pj as usize, pk as usize)] = 1;
                    }
                }
            }
        }
        let mask_gt = LabelMask::new(geom.clone(), gt).unwrap();
        let mask_pred = LabelMask::new(geom.clone(), pred).unwrap();
        nifti::write_mask(&mask_gt, &gt_dir.join(format!("case{c:03}.nii.gz"))).unwrap();
        nifti::write_mask(&mask_pred, &pred_dir.join(format!("case{c:03}.nii.gz"))).unwrap();
    }
    (gt_dir, pred_dir)
}

#[test]
fn criterion_10_throughput_and_parallel_determinism() {
    let root = std::env::temp_dir().join("lesionbench-acceptance-throughput");
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    let (gt_dir, pred_dir) = build_throughput_corpus(&root, 100);

    let run = |jobs: &str, out: &Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_lesionbench"))
            .args([
                "evaluate",
                "--gt-dir",
                gt_dir.to_str().unwrap(),
                "--pred-dir",
                pred_dir.to_str().unwrap(),
                "--out-dir",
                out.to_str().unwrap(),
                "--jobs",
                jobs,
            ])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    };

    let start = Instant::now();
    run("4", &root.join("out_parallel"));
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "parallel evaluate took {elapsed:?}");

    run("1", &root.join("out_serial"));
    for name in ["cases.csv", "summary_nan_as_one.json", "summary_ignore_nan.json"] {
        let a = std::fs::read(root.join("out_parallel").join(name)).unwrap();
        let b = std::fs::read(root.join("out_serial").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between parallel and serial runs");
    }
    pass(10, "100-case 64^3 evaluate finishes under 60 s with parallel output identical to serial");
}

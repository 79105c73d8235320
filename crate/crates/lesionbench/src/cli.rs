//! Command-line interface: `preprocess`, `evaluate`, `ensemble`,
//! `schedule` and `folds` subcommands.
//!
//! Exit codes are a stable contract: 0 success, 1 usage or configuration
//! error, 2 partial data failure (a manifest lists what failed).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use lesionbench_core::ensemble::{argmax_labels, compare_labelings, ensemble_probs, PrecisionMode};
use lesionbench_core::evaluation::{
    aggregate, evaluate_case, subgroup_report, AggregationPolicy, CaseResult, SubgroupAxis, SubgroupSpec,
};
use lesionbench_core::preprocess::{resample_isotropic, resample_isotropic_mask, zscore_normalize, ResampleMode};
use lesionbench_core::schedules::{lr_at, make_folds, sample_sequence, sampling_weights, LrSchedule};

use crate::meta::read_meta_table;
use crate::nifti;
use crate::report;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(name = "lesionbench", version, about = "Volumetric lesion segmentation evaluation toolkit")]
struct Cli {
    /// Worker threads for case-level parallelism (falls back to
    /// LESIONBENCH_JOBS, then to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliResampleMode {
    /// Scalar images: trilinear resample then z-score normalization.
    Trilinear,
    /// Label masks: nearest-neighbour resample, no normalization.
    Nearest,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliPrecision {
    Half,
    Single,
    Double,
}

impl From<CliPrecision> for PrecisionMode {
    fn from(p: CliPrecision) -> Self {
        match p {
            CliPrecision::Half => PrecisionMode::Half,
            CliPrecision::Single => PrecisionMode::Single,
            CliPrecision::Double => PrecisionMode::Double,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Resample volumes to cubic spacing and z-score normalize them.
    Preprocess {
        in_dir: PathBuf,
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        target_mm: f64,
        #[arg(long, value_enum, default_value_t = CliResampleMode::Trilinear)]
        mode: CliResampleMode,
    },
    /// Compute per-case Dice/NSD, both aggregation policies and
    /// subgroup reports.
    Evaluate(EvaluateArgs),
    /// Average per-model probability stacks and write argmax masks.
    Ensemble {
        /// One directory of probability stacks per model.
        #[arg(required = true)]
        model_dirs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = CliPrecision::Single)]
        mode: CliPrecision,
        /// Also ensemble in double precision and report argmax
        /// disagreements against the selected mode.
        #[arg(long)]
        compare_mode: bool,
    },
    /// Emit sampling-probability and learning-rate tables as CSV.
    Schedule(ScheduleArgs),
    /// Deterministic seeded k-fold split of a case list.
    Folds {
        /// File with one case id per line.
        #[arg(long)]
        cases: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gt_dir: PathBuf,
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Demographic CSV (case_id,sex,age_years,tsi_months,cohort);
    /// enables the subgroup reports.
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    tolerance: f64,
    /// Override bin edges per axis, e.g. `age=0,10,20,30` or `tsi=0,6,12`.
    #[arg(long)]
    bins: Vec<String>,
    /// Continue despite unmatched case stems.
    #[arg(long)]
    allow_partial: bool,
    /// Count empty-GT/empty-prediction cases as full score in subgroup
    /// reports instead of excluding them (the figure convention).
    #[arg(long)]
    subgroup_include_undefined: bool,
}

#[derive(Args)]
struct ScheduleArgs {
    /// CSV of `dataset,count` rows; emits the sampling probability table.
    #[arg(long)]
    sizes_csv: Option<PathBuf>,
    /// Additionally draw this many dataset samples from the plan.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit a poly learning-rate table.
    #[arg(long)]
    poly: bool,
    /// Warm-up epochs before the poly decay (implies the warm-up schedule).
    #[arg(long)]
    warmup: Option<u32>,
    #[arg(long, default_value_t = 0.01)]
    lr0: f64,
    /// Peak rate the warm-up ramps to.
    #[arg(long, default_value_t = 0.01)]
    target: f64,
    #[arg(long, default_value_t = 1000)]
    epochs: u32,
    #[arg(long, default_value_t = 0.9)]
    exponent: f64,
    /// Write tables here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run() -> ExitCode {
    ExitCode::from(run_from(std::env::args_os()))
}

/// Entry point with injectable arguments, for tests.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version paths are success, not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };

    let jobs = cli
        .jobs
        .or_else(|| std::env::var("LESIONBENCH_JOBS").ok().and_then(|v| v.parse().ok()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot build thread pool: {e}");
            return EXIT_USAGE;
        }
    };

    pool.install(|| match cli.command {
        Command::Preprocess {
            in_dir,
            out_dir,
            target_mm,
            mode,
        } => cmd_preprocess(&in_dir, &out_dir, target_mm, mode),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Ensemble {
            model_dirs,
            out_dir,
            mode,
            compare_mode,
        } => cmd_ensemble(&model_dirs, &out_dir, mode.into(), compare_mode),
        Command::Schedule(args) => cmd_schedule(&args),
        Command::Folds { cases, k, seed, out } => cmd_folds(&cases, k, seed, out.as_deref()),
    })
}

/// Case stem: file name up to the first dot, so `c1.nii.gz` and
/// `c1.nii` pair up.
fn stem_of(path: &Path) -> Option<String> {
    let name = path.file_name()?.to_str()?;
    if !(name.ends_with(".nii") || name.ends_with(".nii.gz")) {
        return None;
    }
    Some(name.split('.').next().unwrap_or(name).to_string())
}

fn list_volumes(dir: &Path) -> Result<BTreeMap<String, PathBuf>, String> {
    let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut map = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| format!("{}: {e}", dir.display()))?;
        let path = entry.path();
        if let Some(stem) = stem_of(&path) {
            map.insert(stem, path);
        }
    }
    Ok(map)
}

fn write_failure_manifest(out_dir: &Path, failures: &[(String, String)]) {
    let mut text = String::new();
    for (name, reason) in failures {
        let _ = writeln!(text, "{name}\t{reason}");
    }
    let _ = std::fs::write(out_dir.join("failures.txt"), text);
}

fn cmd_preprocess(in_dir: &Path, out_dir: &Path, target_mm: f64, mode: CliResampleMode) -> u8 {
    let volumes = match list_volumes(in_dir) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if volumes.is_empty() {
        eprintln!(
            "error: no .nii/.nii.gz files in {}; point `preprocess` at a directory of NIfTI volumes",
            in_dir.display()
        );
        return EXIT_USAGE;
    }
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_USAGE;
    }

    let entries: Vec<(&String, &PathBuf)> = volumes.iter().collect();
    let outcomes: Vec<(String, Result<(), String>)> = entries
        .par_iter()
        .map(|(stem, path)| {
            let result = preprocess_one(path, out_dir, target_mm, mode);
            ((*stem).clone(), result)
        })
        .collect();

    let mut failures = Vec::new();
    for (stem, outcome) in outcomes {
        match outcome {
            Ok(()) => println!("preprocessed {stem}"),
            Err(reason) => {
                eprintln!("failed {stem}: {reason}");
                failures.push((stem, reason));
            }
        }
    }
    if failures.is_empty() {
        EXIT_OK
    } else {
        write_failure_manifest(out_dir, &failures);
        EXIT_PARTIAL
    }
}

// The tmp name keeps the final extension so gzip-by-extension detection
// behaves the same before and after the rename.
fn atomic_name(path: &Path) -> PathBuf {
    let mut name = std::ffi::OsString::from(".tmp.");
    name.push(path.file_name().unwrap_or_default());
    path.with_file_name(name)
}

fn preprocess_one(path: &Path, out_dir: &Path, target_mm: f64, mode: CliResampleMode) -> Result<(), String> {
    let out_path = out_dir.join(path.file_name().unwrap());
    let tmp_path = atomic_name(&out_path);
    match mode {
        CliResampleMode::Trilinear => {
            let grid = nifti::read_grid(path).map_err(|e| e.to_string())?;
            let resampled = resample_isotropic(&grid, target_mm, ResampleMode::Trilinear).map_err(|e| e.to_string())?;
            let normalized = zscore_normalize(&resampled);
            nifti::write_grid(&normalized, &tmp_path).map_err(|e| e.to_string())?;
        }
        CliResampleMode::Nearest => {
            let mask = nifti::read_mask(path).map_err(|e| e.to_string())?;
            let resampled =
                resample_isotropic_mask(&mask, target_mm, ResampleMode::Nearest).map_err(|e| e.to_string())?;
            nifti::write_mask(&resampled, &tmp_path).map_err(|e| e.to_string())?;
        }
    }
    std::fs::rename(&tmp_path, &out_path).map_err(|e| e.to_string())
}

fn parse_bins(specs: &[String]) -> Result<BTreeMap<String, Vec<f64>>, String> {
    let mut out = BTreeMap::new();
    for spec in specs {
        let (axis, edges) = spec
            .split_once('=')
            .ok_or_else(|| format!("--bins must look like axis=e0,e1,..., got '{spec}'"))?;
        if !matches!(axis, "age" | "tsi") {
            return Err(format!("--bins axis must be 'age' or 'tsi', got '{axis}'"));
        }
        let edges: Result<Vec<f64>, _> = edges.split(',').map(|e| e.trim().parse::<f64>()).collect();
        let edges = edges.map_err(|e| format!("--bins {axis}: {e}"))?;
        out.insert(axis.to_string(), edges);
    }
    Ok(out)
}

fn cmd_evaluate(args: &EvaluateArgs) -> u8 {
    let bins = match parse_bins(&args.bins) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let (gt, pred) = match (list_volumes(&args.gt_dir), list_volumes(&args.pred_dir)) {
        (Ok(g), Ok(p)) => (g, p),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if gt.is_empty() {
        eprintln!("error: no .nii/.nii.gz files in {}", args.gt_dir.display());
        return EXIT_USAGE;
    }
    let unmatched: Vec<&String> = gt
        .keys()
        .filter(|s| !pred.contains_key(*s))
        .chain(pred.keys().filter(|s| !gt.contains_key(*s)))
        .collect();
    if !unmatched.is_empty() {
        eprintln!(
            "unmatched case stems: {}",
            unmatched.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        );
        if !args.allow_partial {
            eprintln!("error: aborting; pass --allow-partial to evaluate the intersection");
            return EXIT_USAGE;
        }
    }
    let metas = match &args.meta {
        Some(path) => match read_meta_table(path) {
            Ok(m) => Some(m),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        },
        None => None,
    };
    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        eprintln!("error: cannot create {}: {e}", args.out_dir.display());
        return EXIT_USAGE;
    }

    let pairs: Vec<(String, PathBuf, PathBuf)> = gt
        .iter()
        .filter_map(|(stem, gt_path)| {
            pred.get(stem)
                .map(|pred_path| (stem.clone(), gt_path.clone(), pred_path.clone()))
        })
        .collect();

    let outcomes: Vec<Result<CaseResult, (String, String)>> = pairs
        .par_iter()
        .map(|(stem, gt_path, pred_path)| {
            let gt_mask = nifti::read_mask(gt_path).map_err(|e| (stem.clone(), e.to_string()))?;
            let pred_mask = nifti::read_mask(pred_path).map_err(|e| (stem.clone(), e.to_string()))?;
            evaluate_case(stem, &gt_mask, &pred_mask, args.tolerance).map_err(|e| (stem.clone(), e.to_string()))
        })
        .collect();

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    for (stem, reason) in &failures {
        eprintln!("failed {stem}: {reason}");
    }
    if results.is_empty() {
        eprintln!("error: every case failed");
        write_failure_manifest(&args.out_dir, &failures);
        return EXIT_USAGE;
    }
    results.sort_by(|a, b| a.case_id.cmp(&b.case_id));

    if let Err(e) = emit_evaluation_reports(args, &bins, &results, metas.as_deref()) {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }

    if failures.is_empty() && unmatched.is_empty() {
        EXIT_OK
    } else {
        write_failure_manifest(&args.out_dir, &failures);
        EXIT_PARTIAL
    }
}

fn emit_evaluation_reports(
    args: &EvaluateArgs,
    bins: &BTreeMap<String, Vec<f64>>,
    results: &[CaseResult],
    metas: Option<&[lesionbench_core::evaluation::CaseMeta]>,
) -> Result<(), String> {
    report::write_case_csv(results, &args.out_dir.join("cases.csv")).map_err(|e| e.to_string())?;

    for policy in [AggregationPolicy::NanAsOne, AggregationPolicy::IgnoreNan] {
        let path = args.out_dir.join(format!("summary_{}.json", policy.as_str()));
        match aggregate(results, policy) {
            Ok(row) => {
                report::SummaryJson::new(policy.as_str(), args.tolerance, &[row])
                    .write(&path)
                    .map_err(|e| e.to_string())?;
            }
            Err(lesionbench_core::CoreError::EmptySummary) => {
                report::SummaryJson::new(policy.as_str(), args.tolerance, &[])
                    .write(&path)
                    .map_err(|e| e.to_string())?;
                eprintln!("note: every case excluded under {}", policy.as_str());
            }
            Err(e) => return Err(e.to_string()),
        }
    }

    let Some(metas) = metas else { return Ok(()) };
    let exclude = !args.subgroup_include_undefined;
    let mut specs = vec![
        SubgroupSpec::sex(exclude),
        SubgroupSpec::age_decades(exclude),
        SubgroupSpec::tsi_default(exclude),
    ];
    for spec in &mut specs {
        let key = spec.axis.as_str();
        if let Some(edges) = bins.get(key) {
            spec.bin_edges = edges.clone();
        }
    }
    for spec in &specs {
        let rows = subgroup_report(results, metas, spec).map_err(|e| e.to_string())?;
        let axis = spec.axis.as_str();
        report::write_subgroup_csv(&rows, &args.out_dir.join(format!("subgroup_{axis}.csv")))
            .map_err(|e| e.to_string())?;
        report::write_subgroup_svg(axis, &rows, &args.out_dir.join(format!("subgroup_{axis}.svg")))
            .map_err(|e| e.to_string())?;
        let _ = SubgroupAxis::Sex; // axes are fixed; bins are configurable
    }
    Ok(())
}

fn cmd_ensemble(model_dirs: &[PathBuf], out_dir: &Path, mode: PrecisionMode, compare: bool) -> u8 {
    if mode == PrecisionMode::Half {
        eprintln!(
            "warning: half-precision accumulation is known to corrupt near-tied \
             probabilities; use single or double unless reproducing the failure"
        );
    }
    let mut listings = Vec::new();
    for dir in model_dirs {
        match list_volumes(dir) {
            Ok(map) if map.is_empty() => {
                eprintln!("error: no probability stacks in {}", dir.display());
                return EXIT_USAGE;
            }
            Ok(map) => listings.push(map),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_USAGE;
    }

    let stems: Vec<String> = listings[0]
        .keys()
        .filter(|s| listings.iter().all(|l| l.contains_key(*s)))
        .cloned()
        .collect();
    if stems.is_empty() {
        eprintln!("error: no case stem appears in every model directory");
        return EXIT_USAGE;
    }

    let outcomes: Vec<(String, Result<usize, String>)> = stems
        .par_iter()
        .map(|stem| {
            let result = ensemble_one(stem, &listings, out_dir, mode, compare);
            (stem.clone(), result)
        })
        .collect();

    let mut failures = Vec::new();
    let mut disagreements = Vec::new();
    for (stem, outcome) in outcomes {
        match outcome {
            Ok(count) => {
                println!("ensembled {stem}");
                disagreements.push((stem, count));
            }
            Err(reason) => {
                eprintln!("skipped {stem}: {reason}");
                failures.push((stem, reason));
            }
        }
    }
    if compare {
        let mut text = String::from("case_id,disagreeing_voxels\n");
        for (stem, count) in &disagreements {
            let _ = writeln!(text, "{stem},{count}");
        }
        if std::fs::write(out_dir.join("disagreements.csv"), text).is_err() {
            eprintln!("error: cannot write disagreement report");
            return EXIT_USAGE;
        }
    }
    if failures.is_empty() {
        EXIT_OK
    } else {
        write_failure_manifest(out_dir, &failures);
        EXIT_PARTIAL
    }
}

fn ensemble_one(
    stem: &str,
    listings: &[BTreeMap<String, PathBuf>],
    out_dir: &Path,
    mode: PrecisionMode,
    compare: bool,
) -> Result<usize, String> {
    let stacks: Result<Vec<_>, String> = listings
        .iter()
        .map(|l| nifti::read_prob_stack(&l[stem]).map_err(|e| e.to_string()))
        .collect();
    let stacks = stacks?;
    let out = ensemble_probs(&stacks, mode).map_err(|e| e.to_string())?;
    let mask = argmax_labels(&out.stack);

    let probs_path = out_dir.join(format!("{stem}_probs.nii.gz"));
    let tmp = atomic_name(&probs_path);
    nifti::write_prob_stack(&out.stack, &tmp).map_err(|e| e.to_string())?;
    std::fs::rename(&tmp, &probs_path).map_err(|e| e.to_string())?;

    let mask_path = out_dir.join(format!("{stem}_mask.nii.gz"));
    let tmp = atomic_name(&mask_path);
    nifti::write_mask(&mask, &tmp).map_err(|e| e.to_string())?;
    std::fs::rename(&tmp, &mask_path).map_err(|e| e.to_string())?;

    if compare {
        let reference = ensemble_probs(&stacks, PrecisionMode::Double).map_err(|e| e.to_string())?;
        let ref_mask = argmax_labels(&reference.stack);
        let diff = compare_labelings(&mask, &ref_mask, 100).map_err(|e| e.to_string())?;
        Ok(diff.count)
    } else {
        Ok(0)
    }
}

fn cmd_schedule(args: &ScheduleArgs) -> u8 {
    let mut out = String::new();
    if let Some(csv_path) = &args.sizes_csv {
        let (ids, sizes) = match read_sizes_csv(csv_path) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        let plan = match sampling_weights(&ids, &sizes) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        out.push_str("dataset,size,probability\n");
        for ((id, size), p) in plan.dataset_ids.iter().zip(plan.sizes.iter()).zip(plan.probabilities.iter()) {
            let _ = writeln!(out, "{id},{size},{p:.12}");
        }
        if let Some(draws) = args.draws {
            out.push_str("draw,dataset\n");
            for (i, id) in sample_sequence(&plan, args.seed, draws).iter().enumerate() {
                let _ = writeln!(out, "{i},{id}");
            }
        }
    } else if args.poly || args.warmup.is_some() {
        let schedule = match args.warmup {
            Some(w) => LrSchedule::WarmupThenPoly {
                target: args.target,
                warmup_epochs: w,
                total_epochs: args.epochs,
                exponent: args.exponent,
            },
            None => LrSchedule::Poly {
                lr0: args.lr0,
                total_epochs: args.epochs,
                exponent: args.exponent,
            },
        };
        if let Err(e) = schedule.validate() {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
        // Warm-up restarts the poly clock over the remaining epochs.
        out.push_str("epoch,lr\n");
        for epoch in 0..args.epochs {
            let lr = lr_at(&schedule, epoch).expect("epoch in range");
            let _ = writeln!(out, "{epoch},{lr:.12}");
        }
    } else {
        eprintln!("error: `schedule` needs --sizes-csv, --poly or --warmup");
        return EXIT_USAGE;
    }

    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, out) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_USAGE;
            }
        }
        None => print!("{out}"),
    }
    EXIT_OK
}

fn read_sizes_csv(path: &Path) -> Result<(Vec<String>, Vec<u64>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut ids = Vec::new();
    let mut sizes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.to_ascii_lowercase().starts_with("dataset")) {
            continue;
        }
        let (id, count) = line
            .split_once(',')
            .ok_or_else(|| format!("{} line {}: expected `dataset,count`", path.display(), i + 1))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| format!("{} line {}: unparsable count '{}'", path.display(), i + 1, count.trim()))?;
        ids.push(id.trim().to_string());
        sizes.push(count);
    }
    if ids.is_empty() {
        return Err(format!("{}: no dataset rows", path.display()));
    }
    Ok((ids, sizes))
}

fn cmd_folds(cases_path: &Path, k: usize, seed: u64, out: Option<&Path>) -> u8 {
    let text = match std::fs::read_to_string(cases_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", cases_path.display());
            return EXIT_USAGE;
        }
    };
    let ids: Vec<String> = text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect();
    let folds = match make_folds(&ids, k, seed) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut csv = String::from("fold,case_id\n");
    for (i, fold) in folds.iter().enumerate() {
        for id in fold {
            let _ = writeln!(csv, "{i},{id}");
        }
    }
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, csv) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_USAGE;
            }
        }
        None => print!("{csv}"),
    }
    EXIT_OK
}

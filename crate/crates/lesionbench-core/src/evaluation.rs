//! Per-case evaluation, the two competing aggregation policies, fold
//! averaging, and demographic subgroup reports.
//!
//! The challenge scored empty-ground-truth cases with an empty prediction
//! as a full score ([`AggregationPolicy::NanAsOne`]); the alternative
//! convention drops those cases entirely ([`AggregationPolicy::IgnoreNan`]).
//! Per-case metrics are identical under both; only the mean changes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::grid::LabelMask;
use crate::metrics::{dice, nsd, MetricValue};

/// Per-case Dice/NSD values plus the emptiness flags that drive the
/// aggregation policies.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub case_id: String,
    pub dice: MetricValue,
    pub nsd: MetricValue,
    pub gt_empty: bool,
    pub pred_empty: bool,
}

/// How undefined (empty/empty) cases enter the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationPolicy {
    /// Undefined counts as a full score of 1 (reported 100).
    NanAsOne,
    /// Undefined cases are excluded from the mean.
    IgnoreNan,
}

impl AggregationPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggregationPolicy::NanAsOne => "nan_as_one",
            AggregationPolicy::IgnoreNan => "ignore_nan",
        }
    }
}

/// Sex recorded in the demographic table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

impl Sex {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
            Sex::Unknown => "unknown",
        }
    }
}

/// Demographic record for subgroup stratification.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseMeta {
    pub case_id: String,
    pub sex: Sex,
    pub age_years: Option<f64>,
    pub tsi_months: Option<f64>,
    pub cohort: String,
}

/// Stratification axis for a subgroup report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgroupAxis {
    Sex,
    Age,
    Tsi,
}

impl SubgroupAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubgroupAxis::Sex => "sex",
            SubgroupAxis::Age => "age",
            SubgroupAxis::Tsi => "tsi",
        }
    }
}

/// Subgroup report request: an axis, bin edges for the numeric axes
/// (half-open `[lo, hi)` bins, last bin closed), and whether to apply
/// the figure exclusion rule (drop empty-GT/empty-prediction cases).
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupSpec {
    pub axis: SubgroupAxis,
    pub bin_edges: Vec<f64>,
    pub exclude_undefined: bool,
}

impl SubgroupSpec {
    pub fn sex(exclude_undefined: bool) -> Self {
        SubgroupSpec {
            axis: SubgroupAxis::Sex,
            bin_edges: Vec::new(),
            exclude_undefined,
        }
    }

    /// Decade bins 0,10,...,80.
    pub fn age_decades(exclude_undefined: bool) -> Self {
        SubgroupSpec {
            axis: SubgroupAxis::Age,
            bin_edges: (0..=8).map(|i| (i * 10) as f64).collect(),
            exclude_undefined,
        }
    }

    /// Default TSI bins in months: 0-6, 6-12, 12-24, 24-60, 60+.
    pub fn tsi_default(exclude_undefined: bool) -> Self {
        SubgroupSpec {
            axis: SubgroupAxis::Tsi,
            bin_edges: alloc::vec![0.0, 6.0, 12.0, 24.0, 60.0],
            exclude_undefined,
        }
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.axis != SubgroupAxis::Sex {
            if self.bin_edges.len() < 2 {
                return Err(CoreError::InvalidParameter(
                    "numeric subgroup axes need at least two bin edges".into(),
                ));
            }
            if !self.bin_edges.windows(2).all(|w| w[0] < w[1]) {
                return Err(CoreError::InvalidParameter("bin edges must be strictly increasing".into()));
            }
        }
        Ok(())
    }
}

/// One row of a summary table; means are in percent and present only
/// when at least one case was included.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub group: String,
    pub n_included: usize,
    pub mean_dice_pct: Option<f64>,
    pub mean_nsd_pct: Option<f64>,
}

/// Compute Dice and NSD for one case pair.
pub fn evaluate_case(
    case_id: &str,
    gt: &LabelMask,
    pred: &LabelMask,
    tolerance_mm: f64,
) -> Result<CaseResult, CoreError> {
    let dice_v = dice(gt, pred).map_err(|e| annotate(e, case_id))?;
    let nsd_v = nsd(gt, pred, tolerance_mm).map_err(|e| annotate(e, case_id))?;
    Ok(CaseResult {
        case_id: case_id.to_string(),
        dice: dice_v,
        nsd: nsd_v,
        gt_empty: gt.is_empty_mask(),
        pred_empty: pred.is_empty_mask(),
    })
}

fn annotate(err: CoreError, case_id: &str) -> CoreError {
    match err {
        CoreError::ShapeMismatch(msg) => CoreError::ShapeMismatch(format!("case {case_id}: {msg}")),
        other => other,
    }
}

fn policy_value(v: MetricValue, policy: AggregationPolicy) -> Option<f64> {
    match (v, policy) {
        (MetricValue::Defined(x), _) => Some(x),
        (MetricValue::Undefined, AggregationPolicy::NanAsOne) => Some(1.0),
        (MetricValue::Undefined, AggregationPolicy::IgnoreNan) => None,
    }
}

fn mean_pct(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(100.0 * values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Aggregate case results into one summary row under a policy.
///
/// Cases are reduced in case_id order so the result is independent of
/// input order and of any parallelism upstream.
pub fn aggregate(results: &[CaseResult], policy: AggregationPolicy) -> Result<SummaryRow, CoreError> {
    if results.is_empty() {
        return Err(CoreError::InvalidParameter("no case results to aggregate".into()));
    }
    let mut sorted: Vec<&CaseResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.case_id.cmp(&b.case_id));

    let mut dices = Vec::new();
    let mut nsds = Vec::new();
    let mut included = 0usize;
    for r in sorted {
        let d = policy_value(r.dice, policy);
        let s = policy_value(r.nsd, policy);
        if d.is_none() && s.is_none() {
            continue;
        }
        included += 1;
        if let Some(v) = d {
            dices.push(v);
        }
        if let Some(v) = s {
            nsds.push(v);
        }
    }
    if included == 0 {
        return Err(CoreError::EmptySummary);
    }
    Ok(SummaryRow {
        group: "all".to_string(),
        n_included: included,
        mean_dice_pct: mean_pct(&dices),
        mean_nsd_pct: mean_pct(&nsds),
    })
}

/// Mean of five per-fold Dice percentages.
pub fn fold_average(per_fold_means_pct: &[f64; 5]) -> f64 {
    per_fold_means_pct.iter().sum::<f64>() / 5.0
}

/// Two-decimal display rounding, half away from zero.
pub fn round2(x: f64) -> f64 {
    libm::round(x * 100.0) / 100.0
}

fn bin_label(edges: &[f64], idx: usize) -> String {
    let last = edges.len() - 2;
    if idx == last {
        format!("[{}, {}]", edges[idx], edges[idx + 1])
    } else {
        format!("[{}, {})", edges[idx], edges[idx + 1])
    }
}

/// Bin index for a value, or None when it falls outside every bin.
/// Bins are half-open except the last, which is closed.
fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    let n_bins = edges.len() - 1;
    for b in 0..n_bins {
        let hit = if b == n_bins - 1 {
            v >= edges[b] && v <= edges[b + 1]
        } else {
            v >= edges[b] && v < edges[b + 1]
        };
        if hit {
            return Some(b);
        }
    }
    None
}

/// Stratified summary over a demographic axis.
///
/// With the exclusion flag set, undefined (empty/empty) cases are dropped
/// before binning, matching the figure convention; otherwise they count
/// as a full score. Cases with a missing value on the axis land in an
/// `unknown` row, never silently dropped.
pub fn subgroup_report(
    results: &[CaseResult],
    metas: &[CaseMeta],
    spec: &SubgroupSpec,
) -> Result<Vec<SummaryRow>, CoreError> {
    spec.validate()?;
    let meta_by_id: BTreeMap<&str, &CaseMeta> = metas.iter().map(|m| (m.case_id.as_str(), m)).collect();
    let mut missing: Vec<String> = results
        .iter()
        .filter(|r| !meta_by_id.contains_key(r.case_id.as_str()))
        .map(|r| r.case_id.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(CoreError::MissingMeta(missing));
    }

    let mut sorted: Vec<&CaseResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.case_id.cmp(&b.case_id));

    let policy = if spec.exclude_undefined {
        AggregationPolicy::IgnoreNan
    } else {
        AggregationPolicy::NanAsOne
    };

    // group label -> (dice values, nsd values)
    let labels: Vec<String> = match spec.axis {
        SubgroupAxis::Sex => ["male", "female", "unknown"].iter().map(|s| s.to_string()).collect(),
        _ => {
            let mut v: Vec<String> = (0..spec.bin_edges.len() - 1)
                .map(|b| bin_label(&spec.bin_edges, b))
                .collect();
            v.push("unknown".to_string());
            v
        }
    };
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>, usize)> =
        labels.iter().map(|l| (l.as_str(), (Vec::new(), Vec::new(), 0))).collect();

    for r in sorted {
        let d = policy_value(r.dice, policy);
        let s = policy_value(r.nsd, policy);
        if d.is_none() && s.is_none() {
            continue;
        }
        let meta = meta_by_id[r.case_id.as_str()];
        let label: String = match spec.axis {
            SubgroupAxis::Sex => meta.sex.as_str().to_string(),
            SubgroupAxis::Age => meta
                .age_years
                .and_then(|v| bin_of(&spec.bin_edges, v))
                .map(|b| bin_label(&spec.bin_edges, b))
                .unwrap_or_else(|| "unknown".to_string()),
            SubgroupAxis::Tsi => meta
                .tsi_months
                .and_then(|v| bin_of(&spec.bin_edges, v))
                .map(|b| bin_label(&spec.bin_edges, b))
                .unwrap_or_else(|| "unknown".to_string()),
        };
        let entry = groups.get_mut(label.as_str()).expect("label set is closed");
        entry.2 += 1;
        if let Some(v) = d {
            entry.0.push(v);
        }
        if let Some(v) = s {
            entry.1.push(v);
        }
    }

    Ok(labels
        .iter()
        .map(|l| {
            let (dices, nsds, n) = &groups[l.as_str()];
            SummaryRow {
                group: l.clone(),
                n_included: *n,
                mean_dice_pct: mean_pct(dices),
                mean_nsd_pct: mean_pct(nsds),
            }
        })
        .collect())
}

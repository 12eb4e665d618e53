//! Memorization estimation by subset resampling: plan fixed-size inclusion
//! masks, train cheap learners per mask, and contrast per-example prediction
//! rates between including and excluding models.

mod learners;

pub use learners::{knn_predict, run_learners, Learner, LogisticModel};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{LabelVector, PredictionRecordSet};
use crate::error::{Error, Result};
use crate::rng;

/// Per-model inclusion masks over a fixed heldout set.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPlan {
    heldout_indices: Vec<usize>,
    inclusion_rate: f64,
    seed: u64,
    masks: Vec<Vec<bool>>,
}

impl SubsetPlan {
    /// Builds a plan from explicit masks (used for exhaustive enumeration).
    /// Every mask must cover the heldout set and share one inclusion count.
    pub fn from_masks(
        heldout_indices: Vec<usize>,
        masks: Vec<Vec<bool>>,
        inclusion_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        validate_heldout(&heldout_indices)?;
        if masks.is_empty() {
            return Err(Error::Argument("plan needs at least one mask".into()));
        }
        let h = heldout_indices.len();
        let ones = masks[0].iter().filter(|&&b| b).count();
        for (m, mask) in masks.iter().enumerate() {
            if mask.len() != h {
                return Err(Error::Argument(format!(
                    "mask {m} has length {}, expected {h}",
                    mask.len()
                )));
            }
            if mask.iter().filter(|&&b| b).count() != ones {
                return Err(Error::Argument(format!(
                    "mask {m} has a different inclusion count than mask 0"
                )));
            }
        }
        Ok(Self {
            heldout_indices,
            inclusion_rate,
            seed,
            masks,
        })
    }

    pub fn heldout_indices(&self) -> &[usize] {
        &self.heldout_indices
    }

    pub fn num_models(&self) -> usize {
        self.masks.len()
    }

    pub fn inclusion_rate(&self) -> f64 {
        self.inclusion_rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }
}

fn validate_heldout(heldout: &[usize]) -> Result<()> {
    if heldout.is_empty() {
        return Err(Error::Argument("heldout set must be non-empty".into()));
    }
    for w in heldout.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::Argument(
                "heldout indices must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

/// Draws `num_models` inclusion masks, each containing exactly
/// `round(inclusion_rate · H)` heldout examples chosen uniformly without
/// replacement. Deterministic given the seed.
pub fn plan_subsets(
    heldout_indices: &[usize],
    num_models: usize,
    inclusion_rate: f64,
    seed: u64,
) -> Result<SubsetPlan> {
    validate_heldout(heldout_indices)?;
    if num_models == 0 {
        return Err(Error::Argument("need at least one model".into()));
    }
    if !(0.0 < inclusion_rate && inclusion_rate < 1.0) {
        return Err(Error::Argument(format!(
            "inclusion rate {inclusion_rate} outside (0, 1)"
        )));
    }
    let h = heldout_indices.len();
    let include = (inclusion_rate * h as f64).round() as usize;
    if include == 0 || include == h {
        return Err(Error::Argument(format!(
            "round({inclusion_rate} * {h}) = {include} leaves nothing to contrast"
        )));
    }

    let masks: Vec<Vec<bool>> = (0..num_models)
        .map(|m| {
            let mut r = rng::stream(seed, m as u64);
            let mut mask = vec![false; h];
            for pos in rand::seq::index::sample(&mut r, h, include) {
                mask[pos] = true;
            }
            mask
        })
        .collect();

    Ok(SubsetPlan {
        heldout_indices: heldout_indices.to_vec(),
        inclusion_rate,
        seed,
        masks,
    })
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    heldout_indices: Vec<usize>,
    num_models: usize,
    inclusion_rate: f64,
    seed: u64,
    /// Masks as '0'/'1' strings, one per model.
    masks: Vec<String>,
}

/// Writes a plan as a single JSON document.
pub fn write_plan(plan: &SubsetPlan, path: impl AsRef<Path>) -> Result<()> {
    let file = PlanFile {
        heldout_indices: plan.heldout_indices.clone(),
        num_models: plan.num_models(),
        inclusion_rate: plan.inclusion_rate,
        seed: plan.seed,
        masks: plan
            .masks
            .iter()
            .map(|m| m.iter().map(|&b| if b { '1' } else { '0' }).collect())
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("plan serializes");
    text.push('\n');
    crate::dataio::write_bytes_atomic(path, text.as_bytes())
}

pub fn read_plan(path: impl AsRef<Path>) -> Result<SubsetPlan> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: PlanFile =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let mut masks = Vec::with_capacity(file.masks.len());
    for (m, s) in file.masks.iter().enumerate() {
        let mut mask = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => mask.push(false),
                '1' => mask.push(true),
                other => {
                    return Err(Error::schema(
                        path,
                        format!("mask {m} contains {other:?}, expected '0'/'1'"),
                    ))
                }
            }
        }
        masks.push(mask);
    }
    if masks.len() != file.num_models {
        return Err(Error::schema(
            path,
            format!(
                "plan declares {} models but carries {} masks",
                file.num_models,
                masks.len()
            ),
        ));
    }
    SubsetPlan::from_masks(file.heldout_indices, masks, file.inclusion_rate, file.seed)
        .map_err(|e| Error::schema(path, e.to_string()))
}

/// One heldout example's estimates. Probabilities are present only when the
/// example was both included and excluded at least once.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorizationRow {
    pub include_count: usize,
    pub exclude_count: usize,
    pub inclusion_probability: Option<f64>,
    pub exclusion_probability: Option<f64>,
    pub memorization: Option<f64>,
    pub defined: bool,
}

/// Per-heldout-example memorization estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorizationTable {
    pub heldout_indices: Vec<usize>,
    pub rows: Vec<MemorizationRow>,
}

/// Estimates inclusion/exclusion probabilities from prediction records.
///
/// `heldout_labels` pairs with the record set's heldout indices (length H)
/// and carries the label y_i whose prediction rate is being measured.
pub fn estimate_memorization(
    records: &PredictionRecordSet,
    heldout_labels: &LabelVector,
) -> Result<MemorizationTable> {
    if records.records().is_empty() {
        return Err(Error::Argument("record set has no models".into()));
    }
    let h = records.heldout_len();
    if heldout_labels.len() != h {
        return Err(Error::Argument(format!(
            "heldout labels have length {}, expected {h}",
            heldout_labels.len()
        )));
    }
    if heldout_labels.num_classes() != records.num_classes() {
        return Err(Error::Argument(format!(
            "labels declare {} classes but records declare {}",
            heldout_labels.num_classes(),
            records.num_classes()
        )));
    }

    let mut include_count = vec![0usize; h];
    let mut include_hits = vec![0usize; h];
    let mut exclude_count = vec![0usize; h];
    let mut exclude_hits = vec![0usize; h];

    for record in records.records() {
        for j in 0..h {
            let hit = record.predictions[j] == heldout_labels.get(j);
            if record.inclusion_mask[j] {
                include_count[j] += 1;
                include_hits[j] += usize::from(hit);
            } else {
                exclude_count[j] += 1;
                exclude_hits[j] += usize::from(hit);
            }
        }
    }

    let rows = (0..h)
        .map(|j| {
            let defined = include_count[j] > 0 && exclude_count[j] > 0;
            if defined {
                let incl = include_hits[j] as f64 / include_count[j] as f64;
                let excl = exclude_hits[j] as f64 / exclude_count[j] as f64;
                MemorizationRow {
                    include_count: include_count[j],
                    exclude_count: exclude_count[j],
                    inclusion_probability: Some(incl),
                    exclusion_probability: Some(excl),
                    memorization: Some(incl - excl),
                    defined,
                }
            } else {
                MemorizationRow {
                    include_count: include_count[j],
                    exclude_count: exclude_count[j],
                    inclusion_probability: None,
                    exclusion_probability: None,
                    memorization: None,
                    defined,
                }
            }
        })
        .collect();

    Ok(MemorizationTable {
        heldout_indices: records.heldout_indices().to_vec(),
        rows,
    })
}

/// Dataset indices of incorrect labels that were learned without
/// memorization: noisy ≠ clean with both probabilities strictly above the
/// threshold.
pub fn select_learned_incorrect(
    table: &MemorizationTable,
    noisy: &LabelVector,
    clean: &LabelVector,
    threshold: f64,
) -> Result<Vec<usize>> {
    if noisy.len() != clean.len() {
        return Err(Error::Argument(format!(
            "label vectors have different lengths: {} vs {}",
            noisy.len(),
            clean.len()
        )));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Argument(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    if let Some(&bad) = table.heldout_indices.iter().find(|&&i| i >= noisy.len()) {
        return Err(Error::Argument(format!(
            "table heldout index {bad} outside dataset of {} examples",
            noisy.len()
        )));
    }

    let selected = table
        .heldout_indices
        .iter()
        .zip(&table.rows)
        .filter(|(&i, row)| {
            row.defined
                && noisy.get(i) != clean.get(i)
                && row.inclusion_probability.unwrap() > threshold
                && row.exclusion_probability.unwrap() > threshold
        })
        .map(|(&i, _)| i)
        .collect();
    Ok(selected)
}

/// Convenience heldout sampler: every incorrect label plus an equal number of
/// correct labels drawn uniformly without replacement (seeded). When fewer
/// correct labels exist than incorrect ones, all of them are taken. The
/// result is sorted.
pub fn balanced_heldout(noisy: &LabelVector, clean: &LabelVector, seed: u64) -> Result<Vec<usize>> {
    if noisy.len() != clean.len() {
        return Err(Error::Argument(format!(
            "label vectors have different lengths: {} vs {}",
            noisy.len(),
            clean.len()
        )));
    }
    let incorrect: Vec<usize> = (0..noisy.len())
        .filter(|&i| noisy.get(i) != clean.get(i))
        .collect();
    if incorrect.is_empty() {
        return Err(Error::Argument(
            "no incorrect labels; nothing to hold out".into(),
        ));
    }
    let correct: Vec<usize> = (0..noisy.len())
        .filter(|&i| noisy.get(i) == clean.get(i))
        .collect();
    let take = incorrect.len().min(correct.len());

    let mut r = rng::master(seed);
    let mut heldout = incorrect;
    heldout.extend(
        rand::seq::index::sample(&mut r, correct.len(), take)
            .iter()
            .map(|pos| correct[pos]),
    );
    heldout.sort_unstable();
    Ok(heldout)
}

/// CSV header used by [`write_table_csv`].
pub const TABLE_CSV_HEADER: &str = "index,incl,excl,mem,include_count,exclude_count,defined";

pub fn table_to_csv(table: &MemorizationTable) -> String {
    let mut out = String::from(TABLE_CSV_HEADER);
    out.push('\n');
    for (&index, row) in table.heldout_indices.iter().zip(&table.rows) {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{index},{},{},{},{},{},{}\n",
            fmt(row.inclusion_probability),
            fmt(row.exclusion_probability),
            fmt(row.memorization),
            row.include_count,
            row.exclude_count,
            row.defined
        ));
    }
    out
}

pub fn write_table_csv(table: &MemorizationTable, path: impl AsRef<Path>) -> Result<()> {
    crate::dataio::write_bytes_atomic(path, table_to_csv(table).as_bytes())
}

pub fn read_table_csv(path: impl AsRef<Path>) -> Result<MemorizationTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == TABLE_CSV_HEADER => {}
        other => {
            return Err(Error::format(
                path,
                format!("bad header {other:?}, expected {TABLE_CSV_HEADER:?}"),
            ))
        }
    }
    let mut heldout_indices = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::format(
                path,
                format!(
                    "line {}: expected 7 fields, found {}",
                    lineno + 2,
                    fields.len()
                ),
            ));
        }
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| {
                    Error::format(path, format!("line {}: bad float {s:?}", lineno + 2))
                })
            }
        };
        let parse_usize = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::format(path, format!("line {}: bad count {s:?}", lineno + 2)))
        };
        heldout_indices.push(parse_usize(fields[0])?);
        let defined = match fields[6] {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::format(
                    path,
                    format!("line {}: bad flag {other:?}", lineno + 2),
                ))
            }
        };
        rows.push(MemorizationRow {
            inclusion_probability: parse_opt(fields[1])?,
            exclusion_probability: parse_opt(fields[2])?,
            memorization: parse_opt(fields[3])?,
            include_count: parse_usize(fields[4])?,
            exclude_count: parse_usize(fields[5])?,
            defined,
        });
    }
    if rows.is_empty() {
        return Err(Error::schema(path, "table has no rows"));
    }
    Ok(MemorizationTable {
        heldout_indices,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::ModelRecord;

    #[test]
    fn plan_masks_have_exact_inclusion_count() {
        let heldout: Vec<usize> = (0..10).collect();
        let plan = plan_subsets(&heldout, 25, 0.7, 9).unwrap();
        for mask in plan.masks() {
            assert_eq!(mask.iter().filter(|&&b| b).count(), 7);
        }
    }

    #[test]
    fn plan_include_counts_concentrate_binomially() {
        // m = 1500, rho = 0.7, H = 200: each example's include count stays
        // within 5 sigma of Binomial(1500, 0.7), i.e. inside [950, 1150].
        let heldout: Vec<usize> = (0..200).collect();
        let plan = plan_subsets(&heldout, 1500, 0.7, 123).unwrap();
        let mut counts = vec![0usize; 200];
        for mask in plan.masks() {
            for (j, &included) in mask.iter().enumerate() {
                counts[j] += usize::from(included);
            }
        }
        for (j, &count) in counts.iter().enumerate() {
            assert!(
                (950..=1150).contains(&count),
                "example {j} included {count} times"
            );
        }
    }

    #[test]
    fn plan_is_deterministic_and_rejects_degenerate_rates() {
        let heldout: Vec<usize> = (0..10).collect();
        let a = plan_subsets(&heldout, 5, 0.7, 1).unwrap();
        let b = plan_subsets(&heldout, 5, 0.7, 1).unwrap();
        assert_eq!(a, b);
        // round(0.96 * 10) = 10: nothing excluded.
        assert!(matches!(
            plan_subsets(&heldout, 5, 0.96, 1),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            plan_subsets(&heldout, 5, 0.04, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn plan_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.json");
        let plan = plan_subsets(&[2, 5, 9, 11], 6, 0.5, 77).unwrap();
        write_plan(&plan, &path).unwrap();
        assert_eq!(read_plan(&path).unwrap(), plan);
    }

    fn record(id: &str, mask: Vec<bool>, predictions: Vec<usize>) -> ModelRecord {
        ModelRecord {
            model_id: id.into(),
            inclusion_mask: mask,
            predictions,
        }
    }

    #[test]
    fn all_models_correct_means_zero_memorization() {
        let mut records = PredictionRecordSet::new(vec![0, 1], 2).unwrap();
        records
            .push(record("a", vec![true, false], vec![0, 1]))
            .unwrap();
        records
            .push(record("b", vec![false, true], vec![0, 1]))
            .unwrap();
        let labels = LabelVector::new(vec![0, 1], 2).unwrap();
        let table = estimate_memorization(&records, &labels).unwrap();
        for row in &table.rows {
            assert_eq!(row.inclusion_probability, Some(1.0));
            assert_eq!(row.exclusion_probability, Some(1.0));
            assert_eq!(row.memorization, Some(0.0));
        }
    }

    #[test]
    fn pure_memorization_scores_one() {
        // Including models predict the label, excluding models never do.
        let mut records = PredictionRecordSet::new(vec![4], 2).unwrap();
        records.push(record("a", vec![true], vec![1])).unwrap();
        records.push(record("b", vec![true], vec![1])).unwrap();
        records.push(record("c", vec![false], vec![0])).unwrap();
        let labels = LabelVector::new(vec![1], 2).unwrap();
        let table = estimate_memorization(&records, &labels).unwrap();
        assert_eq!(table.rows[0].memorization, Some(1.0));
        assert_eq!(table.rows[0].include_count, 2);
        assert_eq!(table.rows[0].exclude_count, 1);
    }

    #[test]
    fn estimator_matches_counting_oracle_on_random_records() {
        use rand::Rng;
        let mut r = crate::rng::master(55);
        let h = 12;
        let m = 50;
        let c = 3;
        let heldout: Vec<usize> = (0..h).collect();
        let labels = LabelVector::new((0..h).map(|_| r.random_range(0..c)).collect(), c).unwrap();
        let mut records = PredictionRecordSet::new(heldout, c).unwrap();
        let mut raw = Vec::new();
        for i in 0..m {
            let mask: Vec<bool> = (0..h).map(|_| r.random_bool(0.7)).collect();
            let predictions: Vec<usize> = (0..h).map(|_| r.random_range(0..c)).collect();
            raw.push((mask.clone(), predictions.clone()));
            records
                .push(record(&format!("m{i}"), mask, predictions))
                .unwrap();
        }
        let table = estimate_memorization(&records, &labels).unwrap();

        // Independent brute-force counting oracle.
        for j in 0..h {
            let mut ic = 0;
            let mut ih = 0;
            let mut ec = 0;
            let mut eh = 0;
            for (mask, predictions) in &raw {
                if mask[j] {
                    ic += 1;
                    ih += usize::from(predictions[j] == labels.get(j));
                } else {
                    ec += 1;
                    eh += usize::from(predictions[j] == labels.get(j));
                }
            }
            let row = &table.rows[j];
            assert_eq!(row.include_count, ic);
            assert_eq!(row.exclude_count, ec);
            assert_eq!(row.include_count + row.exclude_count, m);
            if ic > 0 && ec > 0 {
                assert_eq!(row.inclusion_probability, Some(ih as f64 / ic as f64));
                assert_eq!(row.exclusion_probability, Some(eh as f64 / ec as f64));
                assert_eq!(
                    row.memorization,
                    Some(ih as f64 / ic as f64 - eh as f64 / ec as f64)
                );
            } else {
                assert!(!row.defined);
            }
        }
    }

    #[test]
    fn estimator_is_invariant_to_record_order() {
        let labels = LabelVector::new(vec![0, 1, 1], 2).unwrap();
        let make = |ids: [&str; 3], reverse: bool| {
            let mut records = PredictionRecordSet::new(vec![0, 1, 2], 2).unwrap();
            let mut data = vec![
                (ids[0], vec![true, false, true], vec![0, 0, 1]),
                (ids[1], vec![false, true, true], vec![1, 1, 1]),
                (ids[2], vec![true, true, false], vec![0, 1, 0]),
            ];
            if reverse {
                data.reverse();
            }
            for (id, mask, predictions) in data {
                records.push(record(id, mask, predictions)).unwrap();
            }
            records
        };
        let forward = estimate_memorization(&make(["a", "b", "c"], false), &labels).unwrap();
        let backward = estimate_memorization(&make(["a", "b", "c"], true), &labels).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn selection_uses_strict_threshold_and_mismatch() {
        let table = MemorizationTable {
            heldout_indices: vec![0, 1, 2],
            rows: vec![
                MemorizationRow {
                    include_count: 10,
                    exclude_count: 10,
                    inclusion_probability: Some(0.9),
                    exclusion_probability: Some(0.7),
                    memorization: Some(0.2),
                    defined: true,
                },
                MemorizationRow {
                    include_count: 10,
                    exclude_count: 10,
                    inclusion_probability: Some(1.0),
                    exclusion_probability: Some(1.0),
                    memorization: Some(0.0),
                    defined: true,
                },
                MemorizationRow {
                    include_count: 10,
                    exclude_count: 10,
                    inclusion_probability: Some(0.9),
                    exclusion_probability: Some(0.5),
                    memorization: Some(0.4),
                    defined: true,
                },
            ],
        };
        let noisy = LabelVector::new(vec![1, 0, 1], 2).unwrap();
        let clean = LabelVector::new(vec![0, 0, 0], 2).unwrap();
        // Row 0: incorrect and both above 0.6 -> selected. Row 1: correct.
        // Row 2: excl 0.5 below the threshold.
        assert_eq!(
            select_learned_incorrect(&table, &noisy, &clean, 0.6).unwrap(),
            vec![0]
        );
        // Strict inequality: threshold 1.0 selects nothing.
        assert_eq!(
            select_learned_incorrect(&table, &noisy, &clean, 1.0).unwrap(),
            Vec::<usize>::new()
        );
    }

    #[test]
    fn balanced_heldout_has_equal_sides() {
        let clean = LabelVector::new(vec![0; 100], 2).unwrap();
        let mut noisy_labels = vec![0usize; 100];
        for i in 0..20 {
            noisy_labels[i * 5] = 1;
        }
        let noisy = LabelVector::new(noisy_labels, 2).unwrap();
        let heldout = balanced_heldout(&noisy, &clean, 3).unwrap();
        assert_eq!(heldout.len(), 40);
        let incorrect = heldout
            .iter()
            .filter(|&&i| noisy.get(i) != clean.get(i))
            .count();
        assert_eq!(incorrect, 20);
        for w in heldout.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn table_csv_round_trip_with_undefined_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        let table = MemorizationTable {
            heldout_indices: vec![3, 8],
            rows: vec![
                MemorizationRow {
                    include_count: 7,
                    exclude_count: 3,
                    inclusion_probability: Some(6.0 / 7.0),
                    exclusion_probability: Some(1.0 / 3.0),
                    memorization: Some(6.0 / 7.0 - 1.0 / 3.0),
                    defined: true,
                },
                MemorizationRow {
                    include_count: 10,
                    exclude_count: 0,
                    inclusion_probability: None,
                    exclusion_probability: None,
                    memorization: None,
                    defined: false,
                },
            ],
        };
        write_table_csv(&table, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(TABLE_CSV_HEADER));
        assert!(text.contains("8,,,,10,0,false"));
        assert_eq!(read_table_csv(&path).unwrap(), table);
    }
}

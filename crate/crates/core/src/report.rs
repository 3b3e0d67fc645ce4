//! Cross-seed aggregation and the efficiency / tradeoff tables.
//!
//! Every writer produces the same bytes for the same input rows. Wall-clock
//! columns naturally differ between runs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::al_sim::IterationMetrics;
use crate::prune::PruneMode;

/// Sample mean and standard error of the mean (sample standard deviation
/// over `sqrt(n)`). A single value has zero error.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One finished run: a mode, a seed and its per-iteration metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub mode: PruneMode,
    pub seed: u64,
    pub metrics: Vec<IterationMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub mode: PruneMode,
    pub iteration: u64,
    pub runs: usize,
    pub f1_macro_mean: f64,
    pub f1_macro_sem: f64,
    pub labeled_count_mean: f64,
    pub scorer_calls_mean: f64,
}

/// Mean and SEM per (mode, iteration), modes in first-seen order.
pub fn aggregate(runs: &[RunRecord]) -> Vec<AggregateRow> {
    let mut order: Vec<PruneMode> = Vec::new();
    let mut groups: BTreeMap<(usize, u64), Vec<&IterationMetrics>> = BTreeMap::new();
    for r in runs {
        let slot = order.iter().position(|m| *m == r.mode).unwrap_or_else(|| {
            order.push(r.mode);
            order.len() - 1
        });
        for m in &r.metrics {
            groups.entry((slot, m.iteration)).or_default().push(m);
        }
    }
    groups
        .into_iter()
        .map(|((slot, iteration), ms)| {
            let col = |f: fn(&IterationMetrics) -> f64| ms.iter().map(|m| f(m)).collect::<Vec<_>>();
            let (f1_macro_mean, f1_macro_sem) = mean_sem(&col(|m| m.f1_macro));
            AggregateRow {
                mode: order[slot],
                iteration,
                runs: ms.len(),
                f1_macro_mean,
                f1_macro_sem,
                labeled_count_mean: mean_sem(&col(|m| m.labeled_count as f64)).0,
                scorer_calls_mean: mean_sem(&col(|m| m.scorer_calls as f64)).0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub mode: PruneMode,
    pub runs: usize,
    pub pruning_s: f64,
    pub scoring_s: f64,
    pub scorer_calls: f64,
    pub acquisition_training_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub mode: PruneMode,
    pub runs: usize,
    pub final_f1_macro: f64,
    pub total_s: f64,
}

fn per_mode(runs: &[RunRecord]) -> Vec<(PruneMode, Vec<&RunRecord>)> {
    let mut out: Vec<(PruneMode, Vec<&RunRecord>)> = Vec::new();
    for r in runs {
        match out.iter_mut().find(|(m, _)| *m == r.mode) {
            Some((_, v)) => v.push(r),
            None => out.push((r.mode, vec![r])),
        }
    }
    out
}

fn secs(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

/// Per mode: totals over iterations, averaged over seeds.
pub fn efficiency(runs: &[RunRecord]) -> Vec<EfficiencyRow> {
    per_mode(runs)
        .into_iter()
        .map(|(mode, rs)| {
            let avg = |f: &dyn Fn(&IterationMetrics) -> f64| {
                mean_sem(&rs.iter().map(|r| r.metrics.iter().map(f).sum()).collect::<Vec<f64>>()).0
            };
            let pruning_s = avg(&|m| secs(m.pruning_ms));
            let scoring_s = avg(&|m| secs(m.scoring_ms));
            let acquisition_training_s = avg(&|m| secs(m.acquisition_ms + m.training_ms));
            EfficiencyRow {
                mode,
                runs: rs.len(),
                pruning_s,
                scoring_s,
                scorer_calls: avg(&|m| m.scorer_calls as f64),
                acquisition_training_s,
                total_s: pruning_s + scoring_s + acquisition_training_s,
            }
        })
        .collect()
}

/// Final-iteration F1 against total time, fastest mode first.
pub fn tradeoff(runs: &[RunRecord]) -> Vec<TradeoffRow> {
    let eff = efficiency(runs);
    let mut rows: Vec<TradeoffRow> = per_mode(runs)
        .into_iter()
        .zip(&eff)
        .map(|((mode, rs), e)| {
            let finals: Vec<f64> = rs.iter().filter_map(|r| r.metrics.last()).map(|m| m.f1_macro).collect();
            TradeoffRow {
                mode,
                runs: rs.len(),
                final_f1_macro: mean_sem(&finals).0,
                total_s: e.total_s,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.total_s.total_cmp(&b.total_s).then(a.mode.name().cmp(b.mode.name())));
    rows
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn it(iteration: u64, f1: f64, ms: u64, calls: usize) -> IterationMetrics {
        IterationMetrics {
            iteration,
            f1_macro: f1,
            labeled_count: iteration as usize * 10,
            pruning_ms: ms,
            scoring_ms: ms,
            acquisition_ms: ms,
            training_ms: ms,
            scorer_calls: calls,
        }
    }

    #[test]
    fn sem_of_one_two_three() {
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((s - 0.5774).abs() < 1e-4);
    }

    #[test]
    fn aggregate_shape() {
        let mut runs = Vec::new();
        for mode in [PruneMode::ActivePrune, PruneMode::Random] {
            for seed in 1..=3 {
                runs.push(RunRecord {
                    mode,
                    seed,
                    metrics: (1..=5).map(|i| it(i, 0.5, 1, 0)).collect(),
                });
            }
        }
        let rows = aggregate(&runs);
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.runs == 3 && r.f1_macro_sem == 0.0));
        assert_eq!(rows[0].mode, PruneMode::ActivePrune);
        assert_eq!(rows[5].mode, PruneMode::Random);
    }

    #[test]
    fn tradeoff_sorted_by_time() {
        let runs = vec![
            RunRecord {
                mode: PruneMode::QualityOnly,
                seed: 1,
                metrics: vec![it(1, 0.7, 900, 100)],
            },
            RunRecord {
                mode: PruneMode::ActivePrune,
                seed: 1,
                metrics: vec![it(1, 0.8, 10, 5)],
            },
        ];
        let t = tradeoff(&runs);
        assert_eq!(t[0].mode, PruneMode::ActivePrune);
        assert!(t[0].total_s <= t[1].total_s);
        let e = efficiency(&runs);
        assert_eq!(e[0].scorer_calls, 100.0);
    }
}

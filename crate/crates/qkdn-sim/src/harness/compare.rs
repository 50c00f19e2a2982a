//! Cross-model ordering report over aggregated rows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{slope, HarnessError, Metric, StatRow};
use crate::protocol::Model;

/// Per-n orderings of median times plus slope and growth estimates.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// Circuit sizes covered by all three models.
    pub shared_sizes: Vec<usize>,
    /// median microseconds keyed by (model, metric, n).
    medians: BTreeMap<(Model, Metric, usize), f64>,
    /// Least-squares slope of median vs n, keyed by (model, metric).
    pub slopes: BTreeMap<(Model, Metric), f64>,
}

impl ComparisonReport {
    pub fn median(&self, model: Model, metric: Metric, n: usize) -> Option<f64> {
        self.medians.get(&(model, metric, n)).copied()
    }

    /// Models ordered by descending median for the metric at circuit size n.
    pub fn ordering(&self, metric: Metric, n: usize) -> Vec<Model> {
        let mut models: Vec<(Model, f64)> = Model::ALL
            .iter()
            .filter_map(|m| self.median(*m, metric, n).map(|v| (*m, v)))
            .collect();
        models.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite medians"));
        models.into_iter().map(|(m, _)| m).collect()
    }

    /// Absolute median growth from the smallest to the largest shared size.
    pub fn growth(&self, model: Model, metric: Metric) -> Option<f64> {
        let first = *self.shared_sizes.first()?;
        let last = *self.shared_sizes.last()?;
        Some(self.median(model, metric, last)? - self.median(model, metric, first)?)
    }

    /// The model with the largest absolute growth for the metric.
    pub fn largest_growth(&self, metric: Metric) -> Option<Model> {
        Model::ALL
            .iter()
            .filter_map(|m| self.growth(*m, metric).map(|g| (*m, g)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite growth"))
            .map(|(m, _)| m)
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for metric in [Metric::EncryptionTime, Metric::DistributionTime] {
            writeln!(f, "{}:", metric.as_str())?;
            for &n in &self.shared_sizes {
                let order = self.ordering(metric, n);
                let ranked: Vec<String> = order
                    .iter()
                    .map(|m| {
                        format!(
                            "{m}={:.3}us",
                            self.median(*m, metric, n).unwrap_or(f64::NAN)
                        )
                    })
                    .collect();
                writeln!(f, "  n={n:>2}: {}", ranked.join(" > "))?;
            }
            for model in Model::ALL {
                if let Some(s) = self.slopes.get(&(model, metric)) {
                    writeln!(f, "  slope[{model}] = {s:.3} us/node")?;
                }
            }
            if let Some(m) = self.largest_growth(metric) {
                let growth = self.growth(m, metric).unwrap_or(f64::NAN);
                writeln!(f, "  largest growth: {m} (+{growth:.3} us)")?;
            }
        }
        Ok(())
    }
}

/// Build the report. Requires every model to appear and at least one
/// circuit size shared by all three.
pub fn compare_models(rows: &[StatRow]) -> Result<ComparisonReport, HarnessError> {
    let mut medians = BTreeMap::new();
    let mut sizes_by_model: BTreeMap<Model, BTreeSet<usize>> = BTreeMap::new();
    for row in rows {
        medians.insert((row.model, row.metric, row.n_nodes), row.median_us);
        sizes_by_model
            .entry(row.model)
            .or_default()
            .insert(row.n_nodes);
    }

    let missing: Vec<Model> = Model::ALL
        .iter()
        .filter(|m| !sizes_by_model.contains_key(m))
        .copied()
        .collect();
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|m| m.as_str()).collect();
        return Err(HarnessError::IncompleteData(format!(
            "missing models: {}",
            names.join(", ")
        )));
    }

    let mut shared = sizes_by_model
        .values()
        .cloned()
        .reduce(|a, b| a.intersection(&b).copied().collect())
        .unwrap_or_default();
    shared.retain(|n| {
        Model::ALL.iter().all(|m| {
            medians.contains_key(&(*m, Metric::EncryptionTime, *n))
                && medians.contains_key(&(*m, Metric::DistributionTime, *n))
        })
    });
    if shared.is_empty() {
        return Err(HarnessError::IncompleteData(
            "no circuit size is covered by all three models with both metrics".into(),
        ));
    }
    let shared_sizes: Vec<usize> = shared.into_iter().collect();

    let mut slopes = BTreeMap::new();
    for model in Model::ALL {
        for metric in [Metric::EncryptionTime, Metric::DistributionTime] {
            let points: Vec<(f64, f64)> = shared_sizes
                .iter()
                .filter_map(|n| {
                    medians
                        .get(&(model, metric, *n))
                        .map(|v| (*n as f64, *v))
                })
                .collect();
            if let Some(s) = slope(&points) {
                slopes.insert((model, metric), s);
            }
        }
    }

    Ok(ComparisonReport {
        shared_sizes,
        medians,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: Model, n: usize, metric: Metric, median: f64) -> StatRow {
        StatRow {
            model,
            n_nodes: n,
            metric,
            mean_us: median,
            median_us: median,
            p95_us: median,
            stddev_us: 0.0,
            trials: 1000,
        }
    }

    /// Rows shaped like measurements from a hardware testbed: KR encryption
    /// flat at 1.5..3 us, TN 4.6 -> 12.5 us, ORR 45.35 -> 77.65 us;
    /// distribution 226/224/246 us at n=3 growing to 480/655/541 us at n=11.
    fn testbed_shaped_rows() -> Vec<StatRow> {
        let sizes = [3usize, 5, 7, 9, 11];
        let lerp = |a: f64, b: f64, n: usize| {
            a + (b - a) * ((n - 3) as f64) / 8.0
        };
        let mut rows = Vec::new();
        for &n in &sizes {
            rows.push(row(Model::Kr, n, Metric::EncryptionTime, lerp(1.5, 3.0, n)));
            rows.push(row(Model::Tn, n, Metric::EncryptionTime, lerp(4.6, 12.5, n)));
            rows.push(row(Model::Orr, n, Metric::EncryptionTime, lerp(45.35, 77.65, n)));
            rows.push(row(Model::Kr, n, Metric::DistributionTime, lerp(226.0, 480.0, n)));
            rows.push(row(Model::Tn, n, Metric::DistributionTime, lerp(224.0, 655.0, n)));
            rows.push(row(Model::Orr, n, Metric::DistributionTime, lerp(246.0, 541.0, n)));
        }
        rows
    }

    #[test]
    fn encryption_ordering_matches_expectations_at_each_n() {
        let report = compare_models(&testbed_shaped_rows()).unwrap();
        for &n in &report.shared_sizes.clone() {
            assert_eq!(
                report.ordering(Metric::EncryptionTime, n),
                vec![Model::Orr, Model::Tn, Model::Kr],
                "at n={n}"
            );
        }
    }

    #[test]
    fn distribution_extremes_match_expectations() {
        let report = compare_models(&testbed_shaped_rows()).unwrap();
        // At n=3 the trusted node is fastest (or tied); at n=11 slowest.
        let at3 = report.ordering(Metric::DistributionTime, 3);
        assert_eq!(*at3.last().unwrap(), Model::Tn);
        let at11 = report.ordering(Metric::DistributionTime, 11);
        assert_eq!(at11[0], Model::Tn);
        assert_eq!(report.largest_growth(Metric::DistributionTime), Some(Model::Tn));
    }

    #[test]
    fn single_model_input_is_incomplete() {
        let rows = vec![
            row(Model::Kr, 3, Metric::EncryptionTime, 1.0),
            row(Model::Kr, 3, Metric::DistributionTime, 2.0),
        ];
        assert!(matches!(
            compare_models(&rows),
            Err(HarnessError::IncompleteData(_))
        ));
    }

    #[test]
    fn disjoint_sizes_are_incomplete() {
        let rows = vec![
            row(Model::Kr, 3, Metric::EncryptionTime, 1.0),
            row(Model::Kr, 3, Metric::DistributionTime, 1.0),
            row(Model::Tn, 5, Metric::EncryptionTime, 1.0),
            row(Model::Tn, 5, Metric::DistributionTime, 1.0),
            row(Model::Orr, 7, Metric::EncryptionTime, 1.0),
            row(Model::Orr, 7, Metric::DistributionTime, 1.0),
        ];
        assert!(matches!(
            compare_models(&rows),
            Err(HarnessError::IncompleteData(_))
        ));
    }

    #[test]
    fn slopes_reflect_the_trend() {
        let report = compare_models(&testbed_shaped_rows()).unwrap();
        let kr = report.slopes[&(Model::Kr, Metric::EncryptionTime)];
        let orr = report.slopes[&(Model::Orr, Metric::EncryptionTime)];
        assert!(kr < 0.5, "KR encryption slope should be nearly flat");
        assert!(orr > 3.0, "ORR encryption slope should grow");
    }
}

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::gnn::Aggregator;

use super::TrialResult;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResultKey {
    pub aggregator: Aggregator,
    pub feature: FeatureKind,
    pub dataset: String,
}

impl fmt::Display for ResultKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.aggregator, self.feature, self.dataset)
    }
}

/// Results keyed by aggregator, feature and dataset. Datasets keep the
/// order in which they first appear.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    entries: Vec<(ResultKey, TrialResult)>,
    datasets: Vec<String>,
}

impl ResultsTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn get(
        &self,
        aggregator: Aggregator,
        feature: FeatureKind,
        dataset: &str,
    ) -> Option<&TrialResult> {
        self.entries
            .iter()
            .find(|(k, _)| {
                k.aggregator == aggregator && k.feature == feature && k.dataset == dataset
            })
            .map(|(_, r)| r)
    }

    pub fn entries(&self) -> &[(ResultKey, TrialResult)] {
        &self.entries
    }

    /// Distinct `(aggregator, feature)` rows: mean before sum, positional
    /// before structural, then the canonical feature order.
    pub fn rows(&self) -> Vec<(Aggregator, FeatureKind)> {
        let mut rows: Vec<(Aggregator, FeatureKind)> = self
            .entries
            .iter()
            .map(|(k, _)| (k.aggregator, k.feature))
            .collect();
        rows.sort_by_key(|&(a, f)| (aggregator_rank(a), f.type_tag() as u8, f));
        rows.dedup();
        rows
    }
}

fn aggregator_rank(a: Aggregator) -> u8 {
    match a {
        Aggregator::Mean => 0,
        Aggregator::Sum => 1,
    }
}

pub fn aggregate(results: Vec<(ResultKey, TrialResult)>) -> Result<ResultsTable> {
    let mut table = ResultsTable::default();
    for (key, result) in results {
        if table.entries.iter().any(|(k, _)| *k == key) {
            return Err(Error::DuplicateKey(key.to_string()));
        }
        if !table.datasets.contains(&key.dataset) {
            table.datasets.push(key.dataset.clone());
        }
        table.entries.push((key, result));
    }
    Ok(table)
}

/// `mean±std` with one decimal, e.g. `75.3±1.0`.
pub fn format_cell(mean: f64, std: f64) -> String {
    // avoid "-0.0"
    let clean = |x: f64| if x == 0.0 { 0.0 } else { x };
    format!("{:.1}±{:.1}", clean(mean), clean(std))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(Error::InvalidArgument(format!(
                "unknown format {s:?} (csv|markdown)"
            ))),
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "markdown",
        })
    }
}

fn grid(t: &ResultsTable) -> Vec<Vec<String>> {
    let mut lines = vec![["Aggr.", "Type", "Feature"]
        .iter()
        .map(|s| s.to_string())
        .chain(t.datasets.iter().cloned())
        .collect::<Vec<_>>()];
    for (aggr, feature) in t.rows() {
        let mut row = vec![
            aggr.to_string(),
            feature.type_tag().symbol().to_string(),
            feature.display_name().to_string(),
        ];
        for d in &t.datasets {
            row.push(
                t.get(aggr, feature, d)
                    .map_or("-".to_string(), TrialResult::cell),
            );
        }
        lines.push(row);
    }
    lines
}

pub fn emit_table(t: &ResultsTable, format: TableFormat) -> String {
    let lines = grid(t);
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for l in &lines {
                w.write_record(l).expect("writing to memory");
            }
            String::from_utf8(w.into_inner().expect("flushing to memory")).expect("utf-8 cells")
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            for (i, l) in lines.iter().enumerate() {
                out.push_str("| ");
                out.push_str(&l.join(" | "));
                out.push_str(" |\n");
                if i == 0 {
                    out.push('|');
                    for _ in l {
                        out.push_str(" --- |");
                    }
                    out.push('\n');
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::RunOutcome;
    use std::time::Duration;

    fn r(v: f64) -> TrialResult {
        let run = RunOutcome {
            test_acc: v,
            val_acc: v,
            best_epoch: 1,
            diverged: false,
        };
        TrialResult::from_runs(&[run], Duration::ZERO)
    }

    fn key(a: Aggregator, f: FeatureKind, d: &str) -> ResultKey {
        ResultKey {
            aggregator: a,
            feature: f,
            dataset: d.to_string(),
        }
    }

    #[test]
    fn duplicates_and_order() {
        let t = aggregate(vec![
            (key(Aggregator::Sum, FeatureKind::Degree, "a"), r(1.0)),
            (key(Aggregator::Mean, FeatureKind::Pagerank, "a"), r(2.0)),
            (key(Aggregator::Mean, FeatureKind::Random, "b"), r(3.0)),
        ])
        .unwrap();
        assert_eq!(
            t.rows(),
            vec![
                (Aggregator::Mean, FeatureKind::Random),
                (Aggregator::Mean, FeatureKind::Pagerank),
                (Aggregator::Sum, FeatureKind::Degree)
            ]
        );
        let md = emit_table(&t, TableFormat::Markdown);
        assert_eq!(md.lines().count(), 3 + 2);
        assert!(md.contains("| mean | P | random | - | 3.0±0.0 |"), "{md}");

        let dup = aggregate(vec![
            (key(Aggregator::Sum, FeatureKind::Degree, "a"), r(1.0)),
            (key(Aggregator::Sum, FeatureKind::Degree, "a"), r(2.0)),
        ]);
        assert!(matches!(dup, Err(Error::DuplicateKey(_))));
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = aggregate(Vec::new()).unwrap();
        assert_eq!(emit_table(&t, TableFormat::Csv), "Aggr.,Type,Feature\n");
        assert_eq!(emit_table(&t, TableFormat::Markdown).lines().count(), 2);
    }

    #[test]
    fn cell_format() {
        assert_eq!(format_cell(75.3, 1.0), "75.3±1.0");
        assert_eq!(format_cell(17.94, -0.0), "17.9±0.0");
    }
}

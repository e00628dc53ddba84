//! Evaluation report assembly and rendering: one JSON document covering all
//! compared approaches, CSV projections for spreadsheets, and an aligned
//! text table for the terminal.

use std::io;

use serde_json::{json, Map, Value};

use crate::metrics::{AccuracyReport, CalibrationReport, VisibilityReport};
use crate::{Error, Result};

/// All metrics of one approach under a shared evaluation setup.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproachMetrics {
    pub name: String,
    pub visibility: VisibilityReport,
    pub calibration: CalibrationReport,
    /// `None` when no user had test items, in which case the ranking
    /// quality column is absent rather than zero.
    pub accuracy: Option<AccuracyReport>,
}

/// Metrics for every compared approach at a common list length.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub topk: usize,
    pub approaches: Vec<ApproachMetrics>,
}

/// Canonical display order: the untouched lists first, then the two
/// single-objective re-rankers, then the joint one, then anything else in
/// the order given.
pub fn canonical_rank(name: &str) -> usize {
    match name.to_ascii_lowercase().as_str() {
        "or" => 0,
        "cl" => 1,
        "pf" => 2,
        "moregin" => 3,
        _ => 4,
    }
}

impl EvaluationReport {
    /// Sorts approaches into canonical order, keeping the given order among
    /// unknown names.
    pub fn canonicalize(&mut self) {
        self.approaches.sort_by_key(|a| canonical_rank(&a.name));
    }

    /// One JSON object keyed by approach name, insertion-ordered.
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        for approach in &self.approaches {
            let mut entry = Map::new();
            entry.insert("topk".into(), json!(self.topk));

            let per_continent: Map<String, Value> = approach
                .visibility
                .per_continent
                .iter()
                .map(|(c, v)| (c.to_string(), json!(v)))
                .collect();
            entry.insert("delta_visibility".into(), Value::Object(per_continent));
            entry.insert("delta_total".into(), json!(approach.visibility.delta_total));
            entry.insert("delta_genre_mean".into(), json!(approach.calibration.delta_genre_mean));
            entry.insert("delta_genre_sum".into(), json!(approach.calibration.delta_genre_sum));
            if let Some(accuracy) = &approach.accuracy {
                entry.insert("ndcg_at_k".into(), json!(accuracy.ndcg_at_k));
            }
            entry.insert(
                "users".into(),
                json!({
                    "visibility_evaluated": approach.visibility.evaluated_users,
                    "visibility_skipped": approach.visibility.skipped_users,
                    "calibration_evaluated": approach.calibration.evaluated_users,
                    "calibration_skipped": approach.calibration.skipped_users,
                    "accuracy_evaluated":
                        approach.accuracy.as_ref().map_or(0, |a| a.evaluated_users),
                }),
            );
            root.insert(approach.name.clone(), Value::Object(entry));
        }
        Value::Object(root)
    }

    pub fn write_json<W: io::Write>(&self, mut sink: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut sink, &self.to_json())?;
        sink.write_all(b"\n")?;
        Ok(())
    }

    /// One CSV row per approach with the headline numbers; the ndcg cell is
    /// empty when ranking quality was not evaluated.
    pub fn write_summary_csv<W: io::Write>(&self, sink: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record([
            "approach",
            "delta_total",
            "delta_genre_mean",
            "delta_genre_sum",
            "ndcg_at_k",
        ])?;
        for approach in &self.approaches {
            writer.write_record([
                approach.name.as_str(),
                &format!("{}", approach.visibility.delta_total),
                &format!("{}", approach.calibration.delta_genre_mean),
                &format!("{}", approach.calibration.delta_genre_sum),
                &approach.accuracy.as_ref().map_or(String::new(), |a| format!("{}", a.ndcg_at_k)),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// One CSV row per (approach, continent) with the signed visibility gap.
    pub fn write_visibility_csv<W: io::Write>(&self, sink: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(["approach", "continent", "delta_visibility"])?;
        for approach in &self.approaches {
            for (continent, delta) in &approach.visibility.per_continent {
                writer.write_record([
                    approach.name.as_str(),
                    continent.as_str(),
                    &format!("{delta}"),
                ])?;
            }
        }
        writer.flush()?;
        Ok(())
    }
}

/// Renders a report JSON document (as produced by [`EvaluationReport::to_json`])
/// as an aligned text table.
pub fn render_table(report: &Value) -> Result<String> {
    let Some(root) = report.as_object() else {
        return Err(Error::invalid("report must be a JSON object keyed by approach"));
    };

    let headers = ["approach", "delta_total", "delta_genre_mean", "delta_genre_sum", "ndcg_at_k"];
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (name, entry) in root {
        let cell = |key: &str| -> String {
            match entry.get(key) {
                Some(Value::Number(n)) => format!("{:.6}", n.as_f64().unwrap_or(f64::NAN)),
                _ => "-".to_string(),
            }
        };
        rows.push(vec![
            name.clone(),
            cell("delta_total"),
            cell("delta_genre_mean"),
            cell("delta_genre_sum"),
            cell("ndcg_at_k"),
        ]);
    }

    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }

    let mut out = String::new();
    let render_row = |cells: &[String], out: &mut String| {
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            for _ in cell.len()..widths[i] {
                out.push(' ');
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    render_row(&headers.iter().map(|h| h.to_string()).collect::<Vec<_>>(), &mut out);
    render_row(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>(), &mut out);
    for row in &rows {
        render_row(row, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{AccuracyReport, CalibrationReport, VisibilityReport};
    use std::collections::BTreeMap;

    fn sample(name: &str, with_accuracy: bool) -> ApproachMetrics {
        ApproachMetrics {
            name: name.to_string(),
            visibility: VisibilityReport {
                per_continent: [("EU".into(), -0.05), ("NA".into(), 0.05)].into(),
                delta_total: 0.1,
                evaluated_users: 4,
                skipped_users: 0,
            },
            calibration: CalibrationReport {
                per_user_genre: BTreeMap::new(),
                delta_genre_mean: 0.25,
                delta_genre_sum: 1.0,
                evaluated_users: 4,
                skipped_users: 0,
            },
            accuracy: with_accuracy.then(|| AccuracyReport {
                ndcg_at_k: 0.75,
                per_user: BTreeMap::new(),
                evaluated_users: 3,
            }),
        }
    }

    #[test]
    fn json_is_keyed_by_approach_in_canonical_order() {
        let mut report = EvaluationReport {
            topk: 10,
            approaches: vec![sample("MOReGIn", true), sample("OR", true), sample("CL", true)],
        };
        report.canonicalize();
        let value = report.to_json();
        let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["OR", "CL", "MOReGIn"]);
        assert_eq!(value["OR"]["topk"], 10);
        assert_eq!(value["OR"]["delta_visibility"]["NA"], 0.05);
    }

    #[test]
    fn ndcg_column_is_absent_without_test_users() {
        let report = EvaluationReport { topk: 5, approaches: vec![sample("OR", false)] };
        let value = report.to_json();
        assert!(value["OR"].get("ndcg_at_k").is_none());
        assert_eq!(value["OR"]["users"]["accuracy_evaluated"], 0);

        let mut csv = Vec::new();
        report.write_summary_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(','), "empty trailing ndcg cell");
    }

    #[test]
    fn csv_projections_have_expected_shapes() {
        let report =
            EvaluationReport { topk: 5, approaches: vec![sample("OR", true), sample("PF", true)] };
        let mut csv = Vec::new();
        report.write_summary_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("approach,delta_total,"));

        let mut csv = Vec::new();
        report.write_visibility_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 5, "header + 2 approaches x 2 continents");
        assert!(text.contains("OR,EU,-0.05"));
    }

    #[test]
    fn table_renders_all_approaches_and_dashes_for_missing_ndcg() {
        let report = EvaluationReport {
            topk: 5,
            approaches: vec![sample("OR", true), sample("MOReGIn", false)],
        };
        let table = render_table(&report.to_json()).unwrap();
        assert!(table.contains("approach"));
        assert!(table.contains("MOReGIn"));
        let moregin_line = table.lines().find(|l| l.starts_with("MOReGIn")).unwrap();
        assert!(moregin_line.trim_end().ends_with('-'));

        assert!(render_table(&serde_json::json!([1, 2])).is_err());
    }
}

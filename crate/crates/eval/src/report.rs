//! Fixed-width results tables: one panel per turn, one row per
//! (system prompt, model) run.

use std::fmt::Write;

use cursorbench_core::metrics::MetricsSummary;
use serde::{Deserialize, Serialize};

use crate::error::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub system_prompt: String,
    pub model: String,
    pub metrics: MetricsSummary,
}

const NA: &str = "NA";

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |v| format!("{:.2}", 100.0 * v))
}

fn px(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |v| format!("{v:.2}"))
}

const HEADERS: [&str; 6] = ["Accuracy", "Distance (bbox)", "Distance (Center)", "Character", "Word", "Line"];

/// Renders the per-turn panels followed by a summary block. Percentages for
/// accuracies, pixels for distances, `NA` where a value is undefined.
pub fn format_table(runs: &[RunSummary]) -> Result<String, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::Report("no runs to report".into()));
    }
    let max_turns = runs.iter().map(|r| r.metrics.max_turns).max().unwrap_or(1);
    let pw = runs.iter().map(|r| r.system_prompt.len()).max().unwrap_or(0).max("System prompt".len());
    let mw = runs.iter().map(|r| r.model.len()).max().unwrap_or(0).max("Model".len());
    let widths: Vec<usize> = HEADERS.iter().map(|h| h.len().max(8)).collect();
    let elem_start = widths[..3].iter().map(|w| w + 2).sum::<usize>();
    let elem_width = widths[3..].iter().map(|w| w + 2).sum::<usize>() - 2;

    let mut out = String::new();
    let header = {
        let mut h = format!("{:<pw$}  {:<mw$}", "System prompt", "Model");
        for (name, w) in HEADERS.iter().zip(&widths) {
            write!(h, "  {name:>w$}").unwrap();
        }
        h
    };
    let rule = "-".repeat(header.len());
    for t in 1..=max_turns {
        writeln!(out, "Turn {t}").unwrap();
        let group = format!("{:lead$}{:^elem_width$}", "", "Element-wise Accuracy", lead = pw + 2 + mw + elem_start + 2);
        writeln!(out, "{}", group.trim_end()).unwrap();
        writeln!(out, "{header}").unwrap();
        writeln!(out, "{rule}").unwrap();
        for run in runs {
            let cells = match run.metrics.turn(t) {
                Some(m) => [
                    pct(Some(m.accuracy)),
                    px(m.mean_dist_box),
                    px(m.mean_dist_center),
                    pct(m.element_accuracy.character),
                    pct(m.element_accuracy.word),
                    pct(m.element_accuracy.line),
                ],
                None => std::array::from_fn(|_| NA.to_string()),
            };
            let mut row = format!("{:<pw$}  {:<mw$}", run.system_prompt, run.model);
            for (c, w) in cells.iter().zip(&widths) {
                write!(row, "  {c:>w$}").unwrap();
            }
            writeln!(out, "{}", row.trim_end()).unwrap();
        }
        out.push('\n');
    }

    let sum_headers = ["Samples", "Infra failed", "Any-turn hit", "Correction", "Parse failures"];
    let mut h = format!("{:<pw$}  {:<mw$}", "System prompt", "Model");
    for name in sum_headers {
        write!(h, "  {name:>12}").unwrap();
    }
    writeln!(out, "Summary").unwrap();
    writeln!(out, "{h}").unwrap();
    writeln!(out, "{}", "-".repeat(h.len())).unwrap();
    for run in runs {
        let m = &run.metrics;
        let cells = [
            m.samples_evaluated.to_string(),
            m.infrastructure_failed.to_string(),
            pct(Some(m.any_turn_hit_rate)),
            pct(m.correction_rate),
            pct(Some(m.parse_failure_rate)),
        ];
        let mut row = format!("{:<pw$}  {:<mw$}", run.system_prompt, run.model);
        for c in cells {
            write!(row, "  {c:>12}").unwrap();
        }
        writeln!(out, "{row}").unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cursorbench_core::metrics::{ElementAccuracy, TurnMetrics};

    fn summary(max_turns: u32, acc: &[f64]) -> MetricsSummary {
        MetricsSummary {
            max_turns,
            samples_total: 4,
            samples_evaluated: 4,
            infrastructure_failed: 0,
            per_turn: acc
                .iter()
                .enumerate()
                .map(|(i, a)| TurnMetrics {
                    turn: i as u32 + 1,
                    accuracy: *a,
                    hits: (a * 4.0) as usize,
                    mean_dist_box: Some(3.5),
                    mean_dist_center: None,
                    distance_samples: 4,
                    distance_excluded: 0,
                    element_accuracy: ElementAccuracy { character: Some(0.5), word: None, line: Some(1.0) },
                })
                .collect(),
            any_turn_hit_rate: 0.75,
            any_turn_hits: 3,
            never_hit: 1,
            turn1_misses: 2,
            corrected: 1,
            correction_rate: Some(0.5),
            turns_total: 6,
            parse_failures: 0,
            parse_failure_rate: 0.0,
        }
    }

    #[test]
    fn one_panel_per_turn() {
        let runs = vec![
            RunSummary { system_prompt: "baseline_cot".into(), model: "a".into(), metrics: summary(2, &[0.5, 0.75]) },
            RunSummary { system_prompt: "grid_cot".into(), model: "b".into(), metrics: summary(1, &[0.25]) },
        ];
        let t = format_table(&runs).unwrap();
        assert!(t.contains("Turn 1\n") && t.contains("Turn 2\n") && !t.contains("Turn 3"));
        for h in HEADERS {
            assert!(t.contains(h), "{h}");
        }
        assert!(t.contains("Element-wise Accuracy"));
        let turn2 = t.split("Turn 2").nth(1).unwrap();
        let row_b = turn2.lines().find(|l| l.starts_with("grid_cot")).unwrap();
        assert_eq!(row_b.split_whitespace().filter(|c| *c == NA).count(), 6);
        let row_a = turn2.lines().find(|l| l.starts_with("baseline_cot")).unwrap();
        assert!(row_a.contains("75.00") && row_a.contains("3.50") && row_a.contains(NA));
        assert!(format_table(&[]).is_err());
    }
}

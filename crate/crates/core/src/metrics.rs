//! Cumulative multi-turn metrics.
//!
//! A hit at turn `k` counts as a hit for every `t >= k`. Distances at turn `t`
//! come from the sample's turn `min(t, last attempted turn)`: a hit sample keeps
//! the distances of its hitting turn, a never-hit sample keeps its final miss.
//! When that turn failed to parse, the sample is left out of the distance means
//! at `t` and counted in `distance_excluded` instead. Samples whose backend
//! failed are excluded from every rate and reported in `infrastructure_failed`.

use serde::{Deserialize, Serialize};

use crate::dataset::Granularity;
use crate::trace::{EvalTrace, TerminalStatus};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementAccuracy {
    pub character: Option<f64>,
    pub word: Option<f64>,
    pub line: Option<f64>,
}

impl ElementAccuracy {
    pub fn get(&self, granularity: Granularity) -> Option<f64> {
        match granularity {
            Granularity::Character => self.character,
            Granularity::Word => self.word,
            Granularity::Line => self.line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnMetrics {
    pub turn: u32,
    pub accuracy: f64,
    pub hits: usize,
    pub mean_dist_box: Option<f64>,
    pub mean_dist_center: Option<f64>,
    pub distance_samples: usize,
    pub distance_excluded: usize,
    pub element_accuracy: ElementAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub max_turns: u32,
    pub samples_total: usize,
    pub samples_evaluated: usize,
    pub infrastructure_failed: usize,
    pub per_turn: Vec<TurnMetrics>,
    pub any_turn_hit_rate: f64,
    pub any_turn_hits: usize,
    pub never_hit: usize,
    pub turn1_misses: usize,
    pub corrected: usize,
    /// `None` when nothing was missed at turn 1.
    pub correction_rate: Option<f64>,
    pub turns_total: usize,
    pub parse_failures: usize,
    pub parse_failure_rate: f64,
}

impl MetricsSummary {
    pub fn turn(&self, t: u32) -> Option<&TurnMetrics> {
        self.per_turn.get(t.checked_sub(1)? as usize)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn aggregate(traces: &[EvalTrace], max_turns: u32) -> Result<MetricsSummary> {
    if traces.is_empty() {
        return Err(Error::EmptyInput);
    }
    if max_turns == 0 {
        return Err(Error::InvalidArgument("max_turns must be at least 1".into()));
    }
    // Fixed summation order regardless of completion order.
    let mut evaluated: Vec<&EvalTrace> = traces
        .iter()
        .filter(|t| t.terminal_status != TerminalStatus::InfrastructureFailed)
        .collect();
    evaluated.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let infrastructure_failed = traces.len() - evaluated.len();
    let n = evaluated.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = evaluated.iter().find(|t| t.turns.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "trace {} has no turns",
            bad.sample_id
        )));
    }

    let mut per_turn = Vec::with_capacity(max_turns as usize);
    for t in 1..=max_turns {
        let hit_by = |tr: &&&EvalTrace| tr.first_hit_turn.is_some_and(|k| k <= t);
        let hits = evaluated.iter().filter(hit_by).count();

        let mut sum_box = 0.0;
        let mut sum_center = 0.0;
        let mut distance_samples = 0;
        let mut distance_excluded = 0;
        for tr in &evaluated {
            let idx = (t as usize).min(tr.turns.len()) - 1;
            let turn = &tr.turns[idx];
            match (turn.dist_box, turn.dist_center) {
                (Some(b), Some(c)) => {
                    sum_box += b;
                    sum_center += c;
                    distance_samples += 1;
                }
                _ => distance_excluded += 1,
            }
        }

        let element = |g: Granularity| {
            let group: Vec<_> = evaluated.iter().filter(|tr| tr.granularity == g).collect();
            ratio(group.iter().filter(|tr| hit_by(tr)).count(), group.len())
        };
        per_turn.push(TurnMetrics {
            turn: t,
            accuracy: hits as f64 / n as f64,
            hits,
            mean_dist_box: (distance_samples > 0).then(|| sum_box / distance_samples as f64),
            mean_dist_center: (distance_samples > 0).then(|| sum_center / distance_samples as f64),
            distance_samples,
            distance_excluded,
            element_accuracy: ElementAccuracy {
                character: element(Granularity::Character),
                word: element(Granularity::Word),
                line: element(Granularity::Line),
            },
        });
    }

    let any_turn_hits = evaluated
        .iter()
        .filter(|tr| tr.first_hit_turn.is_some_and(|k| k <= max_turns))
        .count();
    let turn1_misses = evaluated.iter().filter(|tr| tr.first_hit_turn != Some(1)).count();
    let corrected = evaluated
        .iter()
        .filter(|tr| tr.first_hit_turn.is_some_and(|k| k >= 2 && k <= max_turns))
        .count();
    let turns_total: usize = evaluated.iter().map(|tr| tr.turns.len()).sum();
    let parse_failures = evaluated
        .iter()
        .flat_map(|tr| tr.turns.iter())
        .filter(|turn| !turn.parse.is_parsed())
        .count();

    Ok(MetricsSummary {
        max_turns,
        samples_total: traces.len(),
        samples_evaluated: n,
        infrastructure_failed,
        per_turn,
        any_turn_hit_rate: any_turn_hits as f64 / n as f64,
        any_turn_hits,
        never_hit: n - any_turn_hits,
        turn1_misses,
        corrected,
        correction_rate: ratio(corrected, turn1_misses),
        turns_total,
        parse_failures,
        parse_failure_rate: ratio(parse_failures, turns_total).unwrap_or(0.0),
    })
}

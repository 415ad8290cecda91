//! Paired multi-seed comparison of planners.

use serde::{Deserialize, Serialize};

use crate::apf::ApfConfig;
use crate::world::{RobotStatus, ScenarioSource, WorldConfig};

use super::{metrics, run_episode, EpisodeTrace, EvalError, Planner};

/// One (planner, seed) cell. Metric fields are empty when the episode failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub planner: String,
    pub scenario: String,
    pub seed: u64,
    pub l: Option<f64>,
    pub xi: Option<f64>,
    pub success_rate: Option<f64>,
    pub collisions: Option<usize>,
    pub steps: Option<usize>,
    /// Some robot did not reach its goal.
    pub partial: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerSummary {
    pub planner: String,
    pub episodes: usize,
    pub failed: usize,
    pub l_mean: f64,
    pub l_std: f64,
    pub xi_mean: f64,
    pub xi_std: f64,
    pub success_mean: f64,
    pub success_std: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("row serializes");
        }
        if self.rows.is_empty() {
            w.write_record(["planner", "scenario", "seed", "l", "xi", "success_rate", "collisions", "steps", "partial", "error"])
                .expect("header writes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r
            .deserialize()
            .collect::<Result<Vec<ComparisonRow>, _>>()
            .map_err(|e| EvalError::Malformed(format!("comparison csv: {e}")))?;
        Ok(Self { rows })
    }

    /// Planner names in first-appearance order.
    pub fn planners(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.planner) {
                out.push(r.planner.clone());
            }
        }
        out
    }

    pub fn summaries(&self) -> Vec<PlannerSummary> {
        self.planners()
            .into_iter()
            .map(|p| {
                let rows: Vec<&ComparisonRow> = self.rows.iter().filter(|r| r.planner == p).collect();
                let ok: Vec<&&ComparisonRow> = rows.iter().filter(|r| r.error.is_none()).collect();
                let (l_mean, l_std) = mean_std(&ok.iter().filter_map(|r| r.l).collect::<Vec<_>>());
                let (xi_mean, xi_std) = mean_std(&ok.iter().filter_map(|r| r.xi).collect::<Vec<_>>());
                let (success_mean, success_std) = mean_std(&ok.iter().filter_map(|r| r.success_rate).collect::<Vec<_>>());
                PlannerSummary {
                    planner: p,
                    episodes: rows.len(),
                    failed: rows.len() - ok.len(),
                    l_mean,
                    l_std,
                    xi_mean,
                    xi_std,
                    success_mean,
                    success_std,
                }
            })
            .collect()
    }

    /// Fixed-width text table of the summaries.
    pub fn summary_text(&self) -> String {
        let mut s = format!(
            "{:<16} {:>6} {:>17} {:>19} {:>15}\n",
            "planner", "n", "l (m)", "xi", "success"
        );
        for p in self.summaries() {
            s.push_str(&format!(
                "{:<16} {:>6} {:>8.3} ± {:<6.3} {:>9.5} ± {:<7.5} {:>6.3} ± {:<5.3}{}\n",
                p.planner,
                p.episodes,
                p.l_mean,
                p.l_std,
                p.xi_mean,
                p.xi_std,
                p.success_mean,
                p.success_std,
                if p.failed > 0 { format!("  ({} failed)", p.failed) } else { String::new() }
            ));
        }
        s
    }
}

/// Runs every planner on the scenario drawn for each seed, so all planners
/// see identical instances. Failed cells are recorded, not propagated.
pub fn compare(
    planners: &[Planner],
    scenarios: &ScenarioSource,
    seeds: &[u64],
    world: &WorldConfig,
    apf: &ApfConfig,
    mut on_trace: impl FnMut(&EpisodeTrace),
) -> ComparisonTable {
    let mut rows = Vec::with_capacity(planners.len() * seeds.len());
    for planner in planners {
        for &seed in seeds {
            let mut row = ComparisonRow {
                planner: planner.kind().as_str().to_string(),
                scenario: scenarios.kind().as_str().to_string(),
                seed,
                l: None,
                xi: None,
                success_rate: None,
                collisions: None,
                steps: None,
                partial: true,
                error: None,
            };
            let result = scenarios
                .sample(seed)
                .map_err(EvalError::from)
                .and_then(|s| run_episode(&s, planner, world, apf, seed))
                .and_then(|t| metrics(&t).map(|m| (t, m)));
            match result {
                Ok((trace, m)) => {
                    on_trace(&trace);
                    row.l = Some(m.traveling_distance);
                    row.xi = Some(m.smoothness);
                    row.success_rate = Some(m.success_rate);
                    row.collisions = Some(m.per_robot.iter().filter(|r| r.status == RobotStatus::Collided).count());
                    row.steps = Some(trace.steps);
                    row.partial = m.partial;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
    }
    ComparisonTable { rows }
}

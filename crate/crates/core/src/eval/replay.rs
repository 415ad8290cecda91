//! Flat per-step export of traces: `t, robot, x, y, heading, status`.
//!
//! Row `t` holds the state after step `t` (1-based), so a trace of `T`
//! steps and `N` robots yields `T·N` rows. Floats are written in shortest
//! round-trip form, which makes re-exporting an export byte-identical.

use serde::{Deserialize, Serialize};

use crate::world::RobotStatus;

use super::{EpisodeTrace, EvalError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub t: usize,
    pub robot: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub status: RobotStatus,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplayTable {
    pub rows: Vec<ReplayRow>,
}

const HEADER: [&str; 6] = ["t", "robot", "x", "y", "heading", "status"];

impl ReplayTable {
    pub fn from_trace(trace: &EpisodeTrace) -> Self {
        let mut rows = Vec::with_capacity(trace.steps * trace.robots.len());
        for t in 0..trace.steps {
            for (i, r) in trace.robots.iter().enumerate() {
                rows.push(ReplayRow {
                    t: t + 1,
                    robot: i,
                    x: r.positions[t].x,
                    y: r.positions[t].y,
                    heading: r.headings[t],
                    status: r.statuses[t],
                });
            }
        }
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER).expect("header writes");
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.robot.to_string(),
                r.x.to_string(),
                r.y.to_string(),
                r.heading.to_string(),
                r.status.as_str().to_string(),
            ])
            .expect("row writes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| EvalError::Malformed(e.to_string()))?;
        if header.iter().ne(HEADER) {
            return Err(EvalError::Malformed(format!("replay header must be {}", HEADER.join(","))));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| EvalError::Malformed(e.to_string()))?;
            let field = |i: usize| rec.get(i).ok_or_else(|| EvalError::Malformed("short row".into()));
            let num = |i: usize| -> Result<f64, EvalError> {
                let v: f64 = field(i)?.parse().map_err(|_| EvalError::Malformed(format!("bad number in column {}", HEADER[i])))?;
                if v.is_finite() { Ok(v) } else { Err(EvalError::Malformed(format!("non-finite {}", HEADER[i]))) }
            };
            let int = |i: usize| -> Result<usize, EvalError> {
                field(i)?.parse().map_err(|_| EvalError::Malformed(format!("bad integer in column {}", HEADER[i])))
            };
            rows.push(ReplayRow {
                t: int(0)?,
                robot: int(1)?,
                x: num(2)?,
                y: num(3)?,
                heading: num(4)?,
                status: field(5)?.parse().map_err(EvalError::Malformed)?,
            });
        }
        Ok(Self { rows })
    }

    /// Accepts a JSON trace or a replay CSV.
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        if text.trim_start().starts_with('{') {
            Ok(Self::from_trace(&EpisodeTrace::from_json(text)?))
        } else {
            Self::from_csv(text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apf::ApfConfig;
    use crate::eval::{run_episode, Planner};
    use crate::world::{sample_scenario, ScenarioKind, WorldConfig};

    fn trace(n: usize, steps: usize) -> EpisodeTrace {
        let s = sample_scenario(ScenarioKind::CircleSwap, n, 1).unwrap();
        let cfg = WorldConfig { max_steps: steps, ..Default::default() };
        run_episode(&s, &Planner::vanilla(), &cfg, &ApfConfig::default(), 1).unwrap()
    }

    #[test]
    fn row_count_is_steps_times_robots() {
        let t = ReplayTable::from_trace(&trace(2, 10));
        assert_eq!(t.rows.len(), 20);
    }

    #[test]
    fn empty_trace_is_header_only() {
        let mut tr = trace(2, 10);
        tr.steps = 0;
        let csv = ReplayTable::from_trace(&tr).to_csv();
        assert_eq!(csv, "t,robot,x,y,heading,status\n");
    }

    #[test]
    fn replay_of_replay_is_identical() {
        let tr = trace(3, 40);
        let first = ReplayTable::parse(&tr.to_json()).unwrap().to_csv();
        let second = ReplayTable::parse(&first).unwrap().to_csv();
        assert_eq!(first, second);
    }

    #[test]
    fn corrupt_input_rejected() {
        assert!(ReplayTable::parse("{ not json").is_err());
        assert!(ReplayTable::parse("a,b\n1,2\n").is_err());
        assert!(ReplayTable::parse("t,robot,x,y,heading,status\n1,0,0.5,zz,0,active\n").is_err());
        assert!(ReplayTable::parse("t,robot,x,y,heading,status\n1,0,0.5,1,0,flying\n").is_err());
    }
}

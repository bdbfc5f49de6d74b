//! Run records, file export/import, and summary statistics.
//!
//! The state and barrier traces are deterministic and serialize to CSV with
//! shortest-roundtrip float formatting, so identical runs produce bitwise
//! identical files and parsing recovers exact values. Wall-clock timings are
//! machine-dependent and live only in the summary.

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::scenario::config::ScenarioConfig;

/// One control step: state and filter data sampled before integration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// Pose [x, y, z, theta, psi] per controlled agent.
    pub poses: Vec<[f64; 5]>,
    /// Nominal input per controlled agent.
    pub nominal: Vec<[f64; 5]>,
    /// Filtered input per controlled agent.
    pub safe: Vec<[f64; 5]>,
    pub h_g: f64,
    pub leaf_values: Vec<f64>,
    pub active_smooth: usize,
    pub active_nonsmooth: usize,
    /// Collision-avoidance distance solves this step.
    pub ca_solves: usize,
    /// Sight-corridor distance solves this step.
    pub los_solves: usize,
    /// Distance solves skipped by the broad phase.
    pub skipped: usize,
}

/// Wall-clock timings for one step, in milliseconds.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StepTiming {
    pub distance_ms: f64,
    pub filter_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// The composed barrier went negative at a logged step.
    Violation {
        t: f64,
        h_g: f64,
        negative_leaves: Vec<String>,
    },
    /// The filter QP failed; the agents held zero input for the step.
    SolverFault { t: f64, message: String },
    /// The one-step decrease check fell short (logged, not enforced).
    DecreaseShortfall { t: f64, h_now: f64, h_next: f64, floor: f64 },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::Violation { t, .. }
            | Event::SolverFault { t, .. }
            | Event::DecreaseShortfall { t, .. } => *t,
        }
    }

    pub fn is_violation(&self) -> bool {
        matches!(self, Event::Violation { .. })
    }

    pub fn is_fault(&self) -> bool {
        matches!(self, Event::SolverFault { .. })
    }
}

/// Full record of one scenario run.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub agent_ids: Vec<u32>,
    pub leaf_names: Vec<String>,
    pub steps: Vec<StepRecord>,
    pub events: Vec<Event>,
    pub timings: Vec<StepTiming>,
    /// Poses after the final integration step.
    pub final_poses: Vec<[f64; 5]>,
    /// Goal poses, for summary convergence reporting.
    pub goal_poses: Vec<[f64; 5]>,
    pub config: ScenarioConfig,
}

impl RunLog {
    pub fn min_h_g(&self) -> f64 {
        self.steps.iter().map(|s| s.h_g).fold(f64::INFINITY, f64::min)
    }

    pub fn violations(&self) -> usize {
        self.events.iter().filter(|e| e.is_violation()).count()
    }

    pub fn faults(&self) -> usize {
        self.events.iter().filter(|e| e.is_fault()).count()
    }

    /// Position error to goal per agent at the end of the run.
    pub fn final_goal_errors(&self) -> Vec<f64> {
        self.final_poses
            .iter()
            .zip(&self.goal_poses)
            .map(|(p, g)| {
                ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2) + (p[2] - g[2]).powi(2)).sqrt()
            })
            .collect()
    }

    /// Trajectory table: one row per step per agent.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from(
            "t,agent,x,y,z,theta,psi,nom_u,nom_v,nom_w,nom_q,nom_r,safe_u,safe_v,safe_w,safe_q,safe_r\n",
        );
        for step in &self.steps {
            for (a, id) in self.agent_ids.iter().enumerate() {
                let p = step.poses[a];
                let n = step.nominal[a];
                let s = step.safe[a];
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    step.t,
                    id,
                    p[0],
                    p[1],
                    p[2],
                    p[3],
                    p[4],
                    n[0],
                    n[1],
                    n[2],
                    n[3],
                    n[4],
                    s[0],
                    s[1],
                    s[2],
                    s[3],
                    s[4]
                ));
            }
        }
        out
    }

    /// Barrier table: one wide row per step.
    pub fn barriers_csv(&self) -> String {
        let mut out = String::from("t,h_g,active_smooth,active_nonsmooth,ca_solves,los_solves,skipped");
        for name in &self.leaf_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for step in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}",
                step.t,
                step.h_g,
                step.active_smooth,
                step.active_nonsmooth,
                step.ca_solves,
                step.los_solves,
                step.skipped
            ));
            for v in &step.leaf_values {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Rebuild the deterministic portion of a log from exported tables.
    pub fn from_tables(
        trajectory_csv: &str,
        barriers_csv: &str,
        events_json: &str,
    ) -> Result<(Vec<u32>, Vec<String>, Vec<StepRecord>, Vec<Event>), ScenarioError> {
        let parse_f = |s: &str| -> Result<f64, ScenarioError> {
            s.parse::<f64>()
                .map_err(|_| ScenarioError::Config(format!("bad float {s:?} in exported table")))
        };
        let parse_u = |s: &str| -> Result<usize, ScenarioError> {
            s.parse::<usize>()
                .map_err(|_| ScenarioError::Config(format!("bad count {s:?} in exported table")))
        };

        let mut lines = barriers_csv.lines();
        let header = lines
            .next()
            .ok_or_else(|| ScenarioError::Config("empty barrier table".into()))?;
        let leaf_names: Vec<String> = header
            .split(',')
            .skip(7)
            .map(|s| s.to_string())
            .collect();
        let mut steps = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 + leaf_names.len() {
                return Err(ScenarioError::Config("barrier row width mismatch".into()));
            }
            let leaf_values = cols[7..]
                .iter()
                .map(|s| parse_f(s))
                .collect::<Result<Vec<_>, _>>()?;
            steps.push(StepRecord {
                t: parse_f(cols[0])?,
                poses: Vec::new(),
                nominal: Vec::new(),
                safe: Vec::new(),
                h_g: parse_f(cols[1])?,
                leaf_values,
                active_smooth: parse_u(cols[2])?,
                active_nonsmooth: parse_u(cols[3])?,
                ca_solves: parse_u(cols[4])?,
                los_solves: parse_u(cols[5])?,
                skipped: parse_u(cols[6])?,
            });
        }

        let mut agent_ids: Vec<u32> = Vec::new();
        let mut traj_lines = trajectory_csv.lines();
        let _ = traj_lines
            .next()
            .ok_or_else(|| ScenarioError::Config("empty trajectory table".into()))?;
        let mut row_idx = 0usize;
        for line in traj_lines {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 17 {
                return Err(ScenarioError::Config("trajectory row width mismatch".into()));
            }
            let id: u32 = cols[1]
                .parse()
                .map_err(|_| ScenarioError::Config("bad agent id in trajectory".into()))?;
            if !agent_ids.contains(&id) {
                agent_ids.push(id);
            }
            let step_idx = row_idx / agent_ids.len().max(1);
            if step_idx >= steps.len() {
                return Err(ScenarioError::Config(
                    "trajectory has more steps than the barrier table".into(),
                ));
            }
            let mut pose = [0.0; 5];
            let mut nominal = [0.0; 5];
            let mut safe = [0.0; 5];
            for k in 0..5 {
                pose[k] = parse_f(cols[2 + k])?;
                nominal[k] = parse_f(cols[7 + k])?;
                safe[k] = parse_f(cols[12 + k])?;
            }
            steps[step_idx].poses.push(pose);
            steps[step_idx].nominal.push(nominal);
            steps[step_idx].safe.push(safe);
            row_idx += 1;
        }

        let events: Vec<Event> = serde_json::from_str(events_json)?;
        Ok((agent_ids, leaf_names, steps, events))
    }
}

/// Mean and sample standard deviation.
fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregate statistics of a run, shaped for the scaling table: active-set
/// sizes, per-step distance-solve counts, and solve times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub steps: usize,
    pub num_agents: usize,
    pub num_leaves: usize,
    pub min_h_g: f64,
    pub violations: usize,
    pub solver_faults: usize,
    pub active_set_mean: f64,
    pub active_set_std: f64,
    pub ca_solves_per_step: f64,
    pub los_solves_per_step: f64,
    pub skipped_per_step: f64,
    pub distance_ms_mean: f64,
    pub distance_ms_std: f64,
    pub filter_ms_mean: f64,
    pub filter_ms_std: f64,
    pub total_ms_mean: f64,
    pub total_ms_std: f64,
    pub final_goal_errors: Vec<f64>,
    pub max_goal_error: f64,
    pub config: ScenarioConfig,
}

pub fn summarize(log: &RunLog) -> Summary {
    let (active_mean, active_std) = mean_std(
        log.steps
            .iter()
            .map(|s| (s.active_smooth + s.active_nonsmooth) as f64),
    );
    let (ca_mean, _) = mean_std(log.steps.iter().map(|s| s.ca_solves as f64));
    let (los_mean, _) = mean_std(log.steps.iter().map(|s| s.los_solves as f64));
    let (skip_mean, _) = mean_std(log.steps.iter().map(|s| s.skipped as f64));
    let (dist_mean, dist_std) = mean_std(log.timings.iter().map(|t| t.distance_ms));
    let (filter_mean, filter_std) = mean_std(log.timings.iter().map(|t| t.filter_ms));
    let (total_mean, total_std) = mean_std(log.timings.iter().map(|t| t.total_ms));
    let goal_errors = log.final_goal_errors();
    let max_goal_error = goal_errors.iter().copied().fold(0.0, f64::max);
    Summary {
        name: log.config.name.clone(),
        steps: log.steps.len(),
        num_agents: log.agent_ids.len(),
        num_leaves: log.leaf_names.len(),
        min_h_g: if log.steps.is_empty() {
            f64::INFINITY
        } else {
            log.min_h_g()
        },
        violations: log.violations(),
        solver_faults: log.faults(),
        active_set_mean: active_mean,
        active_set_std: active_std,
        ca_solves_per_step: ca_mean,
        los_solves_per_step: los_mean,
        skipped_per_step: skip_mean,
        distance_ms_mean: dist_mean,
        distance_ms_std: dist_std,
        filter_ms_mean: filter_mean,
        filter_ms_std: filter_std,
        total_ms_mean: total_mean,
        total_ms_std: total_std,
        final_goal_errors: goal_errors,
        max_goal_error,
        config: log.config.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::ScenarioConfig;

    fn tiny_config() -> ScenarioConfig {
        ScenarioConfig::from_json(
            r#"{
                "name": "tiny",
                "dt": 0.1,
                "duration": 0.2,
                "params": {"r_min": 0.5, "r_max": 8.0, "r_ca": 0.3},
                "agents": [
                    {"id": 1, "role": "leader", "pose": [0,0,0,0,0], "goal": [1,0,0,0,0]}
                ]
            }"#,
        )
        .unwrap()
    }

    fn sample_log() -> RunLog {
        let config = tiny_config();
        RunLog {
            agent_ids: vec![1],
            leaf_names: vec!["state:1".into()],
            steps: vec![
                StepRecord {
                    t: 0.0,
                    poses: vec![[0.0, 0.0, 0.0, 0.0, 0.0]],
                    nominal: vec![[0.2, 0.0, 0.0, 0.0, 0.0]],
                    safe: vec![[0.2, 0.0, 0.0, 0.0, 0.0]],
                    h_g: 0.888,
                    leaf_values: vec![0.888],
                    active_smooth: 1,
                    active_nonsmooth: 0,
                    ca_solves: 0,
                    los_solves: 0,
                    skipped: 0,
                },
                StepRecord {
                    t: 0.1,
                    poses: vec![[0.02, 0.0, 0.0, 0.0, 0.0]],
                    nominal: vec![[0.2, 0.0, 0.0, 0.0, 0.0]],
                    safe: vec![[0.2, 0.0, 0.0, 0.0, 0.0]],
                    h_g: 0.888,
                    leaf_values: vec![0.888],
                    active_smooth: 1,
                    active_nonsmooth: 0,
                    ca_solves: 0,
                    los_solves: 0,
                    skipped: 0,
                },
            ],
            events: vec![Event::Violation {
                t: 0.1,
                h_g: -0.01,
                negative_leaves: vec!["state:1".into()],
            }],
            timings: vec![StepTiming::default(), StepTiming::default()],
            final_poses: vec![[0.04, 0.0, 0.0, 0.0, 0.0]],
            goal_poses: vec![[1.0, 0.0, 0.0, 0.0, 0.0]],
            config,
        }
    }

    #[test]
    fn csv_roundtrip_is_lossless() {
        let log = sample_log();
        let traj = log.trajectory_csv();
        let barriers = log.barriers_csv();
        let events = serde_json::to_string(&log.events).unwrap();
        let (ids, names, steps, parsed_events) =
            RunLog::from_tables(&traj, &barriers, &events).unwrap();
        assert_eq!(ids, log.agent_ids);
        assert_eq!(names, log.leaf_names);
        assert_eq!(steps.len(), log.steps.len());
        for (a, b) in steps.iter().zip(&log.steps) {
            assert_eq!(a, b, "round trip changed a record");
        }
        assert_eq!(parsed_events, log.events);
    }

    #[test]
    fn summary_counts() {
        let log = sample_log();
        let s = summarize(&log);
        assert_eq!(s.steps, 2);
        assert_eq!(s.violations, 1);
        assert_eq!(s.solver_faults, 0);
        assert!((s.active_set_mean - 1.0).abs() < 1e-12);
        assert!((s.min_h_g - 0.888).abs() < 1e-12);
        assert!((s.max_goal_error - 0.96).abs() < 1e-12);
    }

    #[test]
    fn empty_log_has_valid_headers() {
        let mut log = sample_log();
        log.steps.clear();
        log.timings.clear();
        let traj = log.trajectory_csv();
        let barriers = log.barriers_csv();
        assert!(traj.starts_with("t,agent,"));
        assert!(barriers.starts_with("t,h_g,"));
        assert_eq!(traj.lines().count(), 1);
        assert_eq!(barriers.lines().count(), 1);
    }
}

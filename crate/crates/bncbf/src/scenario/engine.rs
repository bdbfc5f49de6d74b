//! Scenario engine: loads a configuration, validates the standing
//! assumptions, and runs the filtered closed loop deterministically.
//!
//! Per step: evaluate every barrier leaf (solving the distance QPs), compose
//! the global value, extract the almost-active sets, assemble and solve the
//! filter QP, log, then integrate. Distance leaves within one step are
//! independent and evaluated in parallel; steps are strictly sequential.

use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::composition::{active_sets, evaluate, ActiveSets, BarrierExpr, LeafKind};
use crate::constraints::{
    collision_value, fov_value, range_values, regularity_value, state_value, LosCorridor,
    RangeBand, SmoothValue,
};
use crate::distance::{derivative_bound_terms, min_distance, DistanceResult, MovingBody};
use crate::dynamics::{
    nominal_input, step as integrate_step, velocity_transform, ActuationMask, InputVector,
};
use crate::error::{FilterError, QpError, ScenarioError};
use crate::filter::{assemble, AgentChannel, FilterParams, NonsmoothRow, SmoothRow};
use crate::geometry::{Pose, Polytope, PolytopeTemplate};
use crate::qp::QpSettings;
use crate::scenario::config::{Role, ScenarioConfig};
use crate::scenario::log::{Event, RunLog, StepRecord, StepTiming};
use crate::scenario::tree::{build_tree, AgentIndex, BodyRef, LeafOp, LeafSpec};

/// Environment variable capping the number of threads used for concurrent
/// distance solves within a step.
pub const THREADS_ENV: &str = "BNCBF_THREADS";

#[derive(Debug, Clone)]
pub struct ControlledAgent {
    pub id: u32,
    pub role: Role,
    pub template: PolytopeTemplate,
    pub mask: ActuationMask,
    pub start: Pose,
    pub goal: Pose,
}

#[derive(Debug, Clone)]
pub struct ObstacleBody {
    pub id: u32,
    pub body: MovingBody,
    pub center: Vector3<f64>,
    pub radius: f64,
}

/// Which body a distance leaf referenced during evaluation.
#[derive(Debug, Clone, Copy)]
enum BodyId {
    Agent(usize),
    Obstacle(usize),
    Corridor(usize),
}

#[derive(Debug, Clone)]
enum LeafPayload {
    Smooth(SmoothValue),
    Distance {
        result: DistanceResult,
        a: BodyId,
        b: BodyId,
    },
    /// Value came from the bounding-sphere bound or payloads were not
    /// requested; carries no derivative information.
    ValueOnly,
}

/// Pose-dependent bodies of one step: agent hulls and sight corridors.
struct StepBodies {
    agents: Vec<MovingBody>,
    corridors: Vec<((usize, usize), MovingBody)>,
}

struct LeafEvaluation {
    values: Vec<f64>,
    payloads: Vec<LeafPayload>,
    ca_solves: usize,
    los_solves: usize,
    skipped: usize,
}

/// One check line of a validation report.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckLine>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub struct Engine {
    pub config: ScenarioConfig,
    pub agents: Vec<ControlledAgent>,
    pub obstacles: Vec<ObstacleBody>,
    pub leaves: Vec<LeafSpec>,
    pub kinds: Vec<LeafKind>,
    pub tree: BarrierExpr,
    corridor: LosCorridor,
    band: RangeBand,
    pool: Option<rayon::ThreadPool>,
}

impl Engine {
    /// Build the world, the leaf registry, and the barrier tree, applying
    /// seeded initial-position jitter. Structural assumption violations
    /// (degenerate templates, bad masks, inconsistent roles) fail here.
    pub fn new(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        let index = AgentIndex::build(&config.agents)?;
        let fov = config.fov.resolve()?;

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
        let mut agents = Vec::new();
        let mut obstacles = Vec::new();
        for a in &config.agents {
            let template = a.template.build()?;
            let mut pose = Pose::new(
                Vector3::new(a.pose[0], a.pose[1], a.pose[2]),
                a.pose[3],
                a.pose[4],
            );
            if a.role != Role::Obstacle && config.jitter > 0.0 {
                pose.position.x += rng.random_range(-config.jitter..config.jitter);
                pose.position.y += rng.random_range(-config.jitter..config.jitter);
            }
            match a.role {
                Role::Obstacle => {
                    let poly = template.instantiate(&pose)?;
                    let verts = poly.vertices();
                    let n = verts.len().max(1) as f64;
                    let center = verts.iter().sum::<Vector3<f64>>() / n;
                    let radius = verts
                        .iter()
                        .map(|v| (v - center).norm())
                        .fold(0.0, f64::max);
                    obstacles.push(ObstacleBody {
                        id: a.id,
                        body: MovingBody::fixed(poly),
                        center,
                        radius,
                    });
                }
                Role::Leader | Role::Follower => {
                    let mask = a.mask.build();
                    let goal_arr = a.goal.ok_or_else(|| {
                        ScenarioError::Config(format!("agent {} missing goal", a.id))
                    })?;
                    let goal = Pose::new(
                        Vector3::new(goal_arr[0], goal_arr[1], goal_arr[2]),
                        goal_arr[3],
                        goal_arr[4],
                    );
                    if mask != ActuationMask::full() && (pose.theta != 0.0 || goal.theta != 0.0) {
                        return Err(ScenarioError::Config(format!(
                            "agent {}: masked actuation requires zero pitch",
                            a.id
                        )));
                    }
                    agents.push(ControlledAgent {
                        id: a.id,
                        role: a.role,
                        template,
                        mask,
                        start: pose,
                        goal,
                    });
                }
            }
        }

        let (leaves, tree) = build_tree(&config.tree, &fov, &index)?;
        let kinds: Vec<LeafKind> = leaves.iter().map(|l| l.kind).collect();
        tree.validate(&kinds)?;

        let corridor = LosCorridor::new(config.params.mu, config.params.r_los);
        let band = RangeBand::new(config.params.r_min, config.params.r_max)?;
        let pool = match std::env::var(THREADS_ENV) {
            Ok(v) => {
                let n: usize = v.parse().map_err(|_| {
                    ScenarioError::Config(format!("{THREADS_ENV} must be a positive integer"))
                })?;
                if n == 0 {
                    return Err(ScenarioError::Config(format!(
                        "{THREADS_ENV} must be positive"
                    )));
                }
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| ScenarioError::Config(e.to_string()))?,
                )
            }
            Err(_) => None,
        };

        Ok(Self {
            config,
            agents,
            obstacles,
            leaves,
            kinds,
            tree,
            corridor,
            band,
            pool,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        Engine::new(ScenarioConfig::load(path)?)
    }

    fn initial_poses(&self) -> Vec<Pose> {
        self.agents.iter().map(|a| a.start).collect()
    }

    /// Evaluate h_g at the initial state; unsafe starts fail with the
    /// offending leaves listed.
    pub fn initial_check(&self) -> Result<f64, ScenarioError> {
        let poses = self.initial_poses();
        let bodies = self.step_bodies(&poses)?;
        let eval = self.evaluate_leaves(&poses, &bodies, f64::INFINITY, false)?;
        let h_g = evaluate(&self.tree, &eval.values)?;
        if h_g < 0.0 {
            let leaves = self
                .leaves
                .iter()
                .zip(&eval.values)
                .filter(|(_, v)| **v < 0.0)
                .map(|(l, _)| l.name.clone())
                .collect();
            return Err(ScenarioError::InitialStateUnsafe { h_g, leaves });
        }
        Ok(h_g)
    }

    /// Assumption checks as a structured report: template regularity, pitch
    /// domain, sight-corridor containment at the start, and initial safety.
    /// Failures are reported, not raised.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for a in &self.agents {
            report.checks.push(CheckLine {
                name: format!("template agent {}", a.id),
                passed: true,
                detail: format!(
                    "{} faces, bound radius {:.3}",
                    a.template.num_faces(),
                    a.template.bound_radius()
                ),
            });
        }
        for a in &self.agents {
            let ok = a.start.theta.abs() < std::f64::consts::FRAC_PI_2 - 1e-6;
            report.checks.push(CheckLine {
                name: format!("pitch domain agent {}", a.id),
                passed: ok,
                detail: format!("theta(0) = {}", a.start.theta),
            });
        }
        let poses = self.initial_poses();
        let mut corridor_pairs: Vec<(usize, usize)> = Vec::new();
        for leaf in &self.leaves {
            if let LeafOp::Los { i, j, .. } = leaf.op {
                if !corridor_pairs.contains(&(i, j)) {
                    corridor_pairs.push((i, j));
                }
            }
        }
        for (i, j) in corridor_pairs {
            let name = format!(
                "sight corridor containment {}->{}",
                self.agents[i].id, self.agents[j].id
            );
            match self.corridor.over_bound(&poses[i], &poses[j]) {
                Ok(poly) => {
                    let mut ok = true;
                    for k in 0..50 {
                        let alpha = k as f64 / 49.0;
                        let p = poses[j].position * alpha + poses[i].position * (1.0 - alpha);
                        if !poly.contains(&p, 1e-9) {
                            ok = false;
                            break;
                        }
                    }
                    report.checks.push(CheckLine {
                        name,
                        passed: ok,
                        detail: "50 segment samples".into(),
                    });
                }
                Err(e) => report.checks.push(CheckLine {
                    name,
                    passed: false,
                    detail: e.to_string(),
                }),
            }
        }
        match self.initial_check() {
            Ok(h_g) => report.checks.push(CheckLine {
                name: "initial safety h_g(0) >= 0".into(),
                passed: true,
                detail: format!("h_g(0) = {h_g}"),
            }),
            Err(e) => report.checks.push(CheckLine {
                name: "initial safety h_g(0) >= 0".into(),
                passed: false,
                detail: e.to_string(),
            }),
        }
        report
    }

    /// Leaf values and the composed barrier at arbitrary poses.
    pub fn barrier_at(&self, poses: &[Pose]) -> Result<(Vec<f64>, f64), ScenarioError> {
        let bodies = self.step_bodies(poses)?;
        let eval = self.evaluate_leaves(poses, &bodies, f64::INFINITY, false)?;
        let h_g = evaluate(&self.tree, &eval.values)?;
        Ok((eval.values, h_g))
    }

    /// One-shot filter solve at arbitrary poses: evaluate leaves, extract the
    /// almost-active sets, and return the safe input for the given nominal.
    pub fn filter_at(
        &self,
        poses: &[Pose],
        nominal: &[InputVector],
    ) -> Result<crate::filter::FilterSolution, ScenarioError> {
        let bodies = self.step_bodies(poses)?;
        let eval = self.evaluate_leaves(poses, &bodies, f64::INFINITY, true)?;
        let h_g = evaluate(&self.tree, &eval.values)?;
        let active = active_sets(&self.tree, &eval.values, &self.kinds, self.config.params.eps1)?;
        let filter_params = FilterParams {
            alpha_slope: self.config.params.alpha_slope,
            q: None,
            settings: QpSettings::default(),
        };
        let inputs = self
            .build_filter_problem(poses, &bodies, h_g, &active, &eval, nominal, 0, &filter_params)
            .map_err(ScenarioError::Filter)?;
        inputs.solve().map_err(ScenarioError::Filter)
    }

    fn step_bodies(&self, poses: &[Pose]) -> Result<StepBodies, ScenarioError> {
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(slot, a)| {
                MovingBody::from_template(&a.template, &poses[slot], slot)
                    .map_err(|e| ScenarioError::Constraint(e.into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut corridors = Vec::new();
        for leaf in &self.leaves {
            if let LeafOp::Los { i, j, .. } = leaf.op {
                if !corridors.iter().any(|((a, b), _)| *a == i && *b == j) {
                    let body = self.corridor.moving_body(i, &poses[i], j, &poses[j])?;
                    corridors.push(((i, j), body));
                }
            }
        }
        Ok(StepBodies { agents, corridors })
    }

    /// Conservative lower bound on a distance leaf from bounding spheres.
    fn sphere_bound(&self, leaf: &LeafOp, poses: &[Pose]) -> Option<f64> {
        let agent_sphere = |slot: usize| -> Option<(Vector3<f64>, f64)> {
            let rot = poses[slot].rotation().ok()?;
            Some((
                self.agents[slot]
                    .template
                    .bound_center(&rot, &poses[slot].position),
                self.agents[slot].template.bound_radius(),
            ))
        };
        let body_sphere = |body: &BodyRef| -> Option<(Vector3<f64>, f64)> {
            match body {
                BodyRef::Agent(s) => agent_sphere(*s),
                BodyRef::Obstacle(k) => {
                    Some((self.obstacles[*k].center, self.obstacles[*k].radius))
                }
            }
        };
        match leaf {
            LeafOp::Collision { a, b } => {
                let (ca, ra) = body_sphere(a)?;
                let (cb, rb) = body_sphere(b)?;
                Some((ca - cb).norm() - ra - rb - self.config.params.r_ca)
            }
            LeafOp::Los { i, j, k } => {
                let mid = (poses[*i].position + poses[*j].position) * 0.5;
                let half = (poses[*i].position - poses[*j].position).norm() * 0.5;
                let (ck, rk) = body_sphere(k)?;
                Some(
                    (mid - ck).norm()
                        - (half + 1.0 / self.config.params.mu)
                        - rk
                        - self.config.params.r_los,
                )
            }
            _ => None,
        }
    }

    fn resolve_body<'a>(
        &'a self,
        body: &BodyRef,
        bodies: &'a StepBodies,
    ) -> (&'a Polytope, BodyId) {
        match body {
            BodyRef::Agent(s) => (&bodies.agents[*s].poly, BodyId::Agent(*s)),
            BodyRef::Obstacle(k) => (&self.obstacles[*k].body.poly, BodyId::Obstacle(*k)),
        }
    }

    fn body_for<'a>(&'a self, id: BodyId, bodies: &'a StepBodies) -> &'a MovingBody {
        match id {
            BodyId::Agent(s) => &bodies.agents[s],
            BodyId::Corridor(c) => &bodies.corridors[c].1,
            BodyId::Obstacle(k) => &self.obstacles[k].body,
        }
    }

    fn evaluate_one(
        &self,
        leaf: &LeafSpec,
        poses: &[Pose],
        bodies: &StepBodies,
        prev_hg: f64,
        want_payload: bool,
    ) -> Result<(f64, LeafPayload), ScenarioError> {
        let params = &self.config.params;
        let smooth = |v: SmoothValue| -> (f64, LeafPayload) {
            (
                v.value,
                if want_payload {
                    LeafPayload::Smooth(v)
                } else {
                    LeafPayload::ValueOnly
                },
            )
        };
        match &leaf.op {
            LeafOp::Fov {
                observer,
                target,
                cone,
            } => Ok(smooth(fov_value(
                cone,
                *observer,
                &poses[*observer],
                *target,
                &poses[*target],
            )?)),
            LeafOp::RangeMin { i, j } => {
                let (lo, _) = range_values(&self.band, *i, &poses[*i], *j, &poses[*j])?;
                Ok(smooth(lo))
            }
            LeafOp::RangeMax { i, j } => {
                let (_, hi) = range_values(&self.band, *i, &poses[*i], *j, &poses[*j])?;
                Ok(smooth(hi))
            }
            LeafOp::State { i } => Ok(smooth(state_value(*i, &poses[*i]))),
            LeafOp::Regularity { i, j } => Ok(smooth(regularity_value(
                *i, &poses[*i], *j, &poses[*j],
            ))),
            LeafOp::Collision { a, b } => {
                if self.config.broad_phase {
                    if let Some(lb) = self.sphere_bound(&leaf.op, poses) {
                        if lb > prev_hg + params.eps1 + self.config.broad_phase_margin {
                            return Ok((lb, LeafPayload::ValueOnly));
                        }
                    }
                }
                let (poly_a, id_a) = self.resolve_body(a, bodies);
                let (poly_b, id_b) = self.resolve_body(b, bodies);
                let result = collision_value(poly_a, poly_b, params.r_ca)?;
                let value = result.h;
                let payload = if want_payload {
                    LeafPayload::Distance {
                        result,
                        a: id_a,
                        b: id_b,
                    }
                } else {
                    LeafPayload::ValueOnly
                };
                Ok((value, payload))
            }
            LeafOp::Los { i, j, k } => {
                if self.config.broad_phase {
                    if let Some(lb) = self.sphere_bound(&leaf.op, poses) {
                        if lb > prev_hg + params.eps1 + self.config.broad_phase_margin {
                            return Ok((lb, LeafPayload::ValueOnly));
                        }
                    }
                }
                let corridor_idx = bodies
                    .corridors
                    .iter()
                    .position(|((a, b), _)| a == i && b == j)
                    .expect("corridor prebuilt for every sight leaf");
                let corridor_body = &bodies.corridors[corridor_idx].1;
                let (poly_k, id_k) = self.resolve_body(k, bodies);
                let result = min_distance(&corridor_body.poly, poly_k, params.r_los)
                    .map_err(crate::error::ConstraintError::from)?;
                let value = result.h;
                let payload = if want_payload {
                    LeafPayload::Distance {
                        result,
                        a: BodyId::Corridor(corridor_idx),
                        b: id_k,
                    }
                } else {
                    LeafPayload::ValueOnly
                };
                Ok((value, payload))
            }
        }
    }

    /// Evaluate all leaves at the given poses. Distance solves fan out over
    /// the thread pool; results are collected in leaf order so the outcome
    /// is independent of scheduling.
    fn evaluate_leaves(
        &self,
        poses: &[Pose],
        bodies: &StepBodies,
        prev_hg: f64,
        want_payload: bool,
    ) -> Result<LeafEvaluation, ScenarioError> {
        let eval_one =
            |leaf: &LeafSpec| self.evaluate_one(leaf, poses, bodies, prev_hg, want_payload);
        let results: Result<Vec<(f64, LeafPayload)>, ScenarioError> = match &self.pool {
            Some(pool) => pool.install(|| self.leaves.par_iter().map(eval_one).collect()),
            None => self.leaves.par_iter().map(eval_one).collect(),
        };
        let results = results?;
        let mut values = Vec::with_capacity(results.len());
        let mut payloads = Vec::with_capacity(results.len());
        let mut ca_solves = 0;
        let mut los_solves = 0;
        let mut skipped = 0;
        for (leaf, (value, payload)) in self.leaves.iter().zip(results) {
            let solved = !matches!(payload, LeafPayload::ValueOnly) || !self.config.broad_phase;
            match &leaf.op {
                LeafOp::Collision { .. } => {
                    if solved {
                        ca_solves += 1;
                    } else {
                        skipped += 1;
                    }
                }
                LeafOp::Los { .. } => {
                    if solved {
                        los_solves += 1;
                    } else {
                        skipped += 1;
                    }
                }
                _ => {}
            }
            values.push(value);
            payloads.push(payload);
        }
        Ok(LeafEvaluation {
            values,
            payloads,
            ca_solves,
            los_solves,
            skipped,
        })
    }

    /// Run the closed loop and collect the full log.
    pub fn run(&self) -> Result<RunLog, ScenarioError> {
        self.initial_check()?;
        let dt = self.config.dt;
        let params = self.config.params.clone();
        let steps = (self.config.duration / dt).round() as usize;
        let mut poses = self.initial_poses();
        let mut records = Vec::with_capacity(steps);
        let mut timings = Vec::with_capacity(steps);
        let mut events = Vec::new();
        let mut prev_hg = f64::INFINITY;

        let filter_params = FilterParams {
            alpha_slope: params.alpha_slope,
            q: None,
            settings: QpSettings::default(),
        };

        for step_idx in 0..steps {
            let t = step_idx as f64 * dt;
            let t_start = Instant::now();

            let bodies = self.step_bodies(&poses)?;
            let eval = self.evaluate_leaves(&poses, &bodies, prev_hg, true)?;
            let h_g = evaluate(&self.tree, &eval.values)?;
            let distance_ms = t_start.elapsed().as_secs_f64() * 1e3;

            if h_g < 0.0 {
                let negative_leaves = self
                    .leaves
                    .iter()
                    .zip(&eval.values)
                    .filter(|(_, v)| **v < 0.0)
                    .map(|(l, _)| l.name.clone())
                    .collect();
                events.push(Event::Violation {
                    t,
                    h_g,
                    negative_leaves,
                });
            }

            let active = active_sets(&self.tree, &eval.values, &self.kinds, params.eps1)?;

            let nominal: Vec<InputVector> = self
                .agents
                .iter()
                .zip(&poses)
                .map(|(a, p)| nominal_input(p, &a.goal, &a.mask, params.u_max))
                .collect::<Result<_, _>>()
                .map_err(ScenarioError::Dynamics)?;

            let t_filter = Instant::now();
            let safe: Vec<InputVector> = if self.config.filter_bypass {
                nominal.clone()
            } else {
                match self.solve_filter(
                    &poses,
                    &bodies,
                    h_g,
                    &active,
                    &eval,
                    &nominal,
                    step_idx,
                    &filter_params,
                ) {
                    Ok(inputs) => inputs,
                    Err(FilterError::Solver { source }) => {
                        let message = match source {
                            QpError::Infeasible => "filter QP infeasible".to_string(),
                            other => format!("filter QP failed: {other}"),
                        };
                        events.push(Event::SolverFault { t, message });
                        vec![InputVector::zeros(); self.agents.len()]
                    }
                    Err(e) => return Err(e.into()),
                }
            };
            let filter_ms = t_filter.elapsed().as_secs_f64() * 1e3;

            if self.config.verify_decrease && !self.config.filter_bypass {
                let next = self.integrate(&poses, &safe)?;
                let next_bodies = self.step_bodies(&next)?;
                let next_eval =
                    self.evaluate_leaves(&next, &next_bodies, f64::INFINITY, false)?;
                let h_next = evaluate(&self.tree, &next_eval.values)?;
                let report =
                    crate::filter::verify_decrease(h_g, h_next, params.alpha_slope, dt, 1e-6);
                if !report.satisfied {
                    events.push(Event::DecreaseShortfall {
                        t,
                        h_now: report.h_now,
                        h_next: report.h_next,
                        floor: report.floor,
                    });
                }
            }

            records.push(StepRecord {
                t,
                poses: poses.iter().map(pose_array).collect(),
                nominal: nominal.iter().map(input_array).collect(),
                safe: safe.iter().map(input_array).collect(),
                h_g,
                leaf_values: eval.values.clone(),
                active_smooth: active.smooth.len(),
                active_nonsmooth: active.nonsmooth.len(),
                ca_solves: eval.ca_solves,
                los_solves: eval.los_solves,
                skipped: eval.skipped,
            });
            timings.push(StepTiming {
                distance_ms,
                filter_ms,
                total_ms: t_start.elapsed().as_secs_f64() * 1e3,
            });

            poses = self.integrate(&poses, &safe)?;
            prev_hg = h_g;
        }

        Ok(RunLog {
            agent_ids: self.agents.iter().map(|a| a.id).collect(),
            leaf_names: self.leaves.iter().map(|l| l.name.clone()).collect(),
            steps: records,
            events,
            timings,
            final_poses: poses.iter().map(pose_array).collect(),
            goal_poses: self.agents.iter().map(|a| pose_array(&a.goal)).collect(),
            config: self.config.clone(),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn solve_filter(
        &self,
        poses: &[Pose],
        bodies: &StepBodies,
        h_g: f64,
        active: &ActiveSets,
        eval: &LeafEvaluation,
        nominal: &[InputVector],
        step_idx: usize,
        filter_params: &FilterParams,
    ) -> Result<Vec<InputVector>, FilterError> {
        let problem = self.build_filter_problem(
            poses,
            bodies,
            h_g,
            active,
            eval,
            nominal,
            step_idx,
            filter_params,
        )?;
        let solution = problem.solve()?;
        Ok(solution.inputs)
    }

    #[allow(clippy::too_many_arguments)]
    fn build_filter_problem(
        &self,
        poses: &[Pose],
        bodies: &StepBodies,
        h_g: f64,
        active: &ActiveSets,
        eval: &LeafEvaluation,
        nominal: &[InputVector],
        step_idx: usize,
        filter_params: &FilterParams,
    ) -> Result<crate::filter::FilterProblem, FilterError> {
        let channels: Vec<AgentChannel> = self
            .agents
            .iter()
            .zip(poses)
            .map(|(a, p)| {
                velocity_transform(p)
                    .map(|transform| AgentChannel {
                        transform,
                        mask: a.mask,
                        input_limit: self.config.params.u_max,
                    })
                    .map_err(|_| FilterError::Solver {
                        source: QpError::BadProblem("pitch singularity in transform".into()),
                    })
            })
            .collect::<Result<_, _>>()?;

        let mut smooth_rows = Vec::new();
        for leaf in &active.smooth {
            match &eval.payloads[leaf.leaf] {
                LeafPayload::Smooth(v) => smooth_rows.push(SmoothRow {
                    leaf: *leaf,
                    gradients: v.gradients.clone(),
                }),
                _ => {
                    return Err(FilterError::Solver {
                        source: QpError::BadProblem(
                            "smooth active leaf without gradient payload".into(),
                        ),
                    })
                }
            }
        }
        let mut nonsmooth_rows = Vec::new();
        for leaf in &active.nonsmooth {
            match &eval.payloads[leaf.leaf] {
                LeafPayload::Distance { result, a, b } => {
                    let body_a = self.body_for(*a, bodies);
                    let body_b = self.body_for(*b, bodies);
                    let terms =
                        derivative_bound_terms(body_a, body_b, result, self.config.params.eps2);
                    nonsmooth_rows.push(NonsmoothRow {
                        leaf: *leaf,
                        terms,
                        cache_step: step_idx as u64,
                    });
                }
                _ => {
                    return Err(FilterError::Solver {
                        source: QpError::BadProblem(
                            "distance active leaf without dual payload (broad phase too eager)"
                                .into(),
                        ),
                    })
                }
            }
        }

        assemble(
            &channels,
            nominal,
            h_g,
            &smooth_rows,
            &nonsmooth_rows,
            filter_params,
            step_idx as u64,
        )
    }

    fn integrate(
        &self,
        poses: &[Pose],
        inputs: &[InputVector],
    ) -> Result<Vec<Pose>, ScenarioError> {
        poses
            .iter()
            .zip(inputs)
            .zip(&self.agents)
            .map(|((p, nu), a)| {
                let masked = a.mask.apply(nu);
                integrate_step(p, &masked, self.config.dt).map_err(ScenarioError::Dynamics)
            })
            .collect()
    }
}

fn pose_array(p: &Pose) -> [f64; 5] {
    [p.position.x, p.position.y, p.position.z, p.theta, p.psi]
}

fn input_array(nu: &InputVector) -> [f64; 5] {
    [nu[0], nu[1], nu[2], nu[3], nu[4]]
}

//! Leaf registry and barrier-tree construction, either derived from agent
//! roles or parsed from an explicit nested expression.
//!
//! Leaf names use config agent ids:
//!   state:<i>         yaw-limit barrier of agent i
//!   reg:<i>:<j>       corridor regularity between i and j
//!   rngmin:<i>:<j>    minimum range, rngmax:<i>:<j> maximum range
//!   fov:<i>:<j>       elliptic cone (or fov:<i>:<j>:<f> one polyhedral face)
//!   ca:<i>:<j>        collision avoidance between bodies of i and j
//!   los:<i>:<j>:<k>   corridor from i to j kept clear of body k

use std::collections::BTreeMap;

use crate::composition::{BarrierExpr, LeafKind};
use crate::constraints::FovCone;
use crate::error::ScenarioError;
use crate::scenario::config::{AgentConfig, ResolvedFov, Role, TreeConfig};

/// A body participating in a distance leaf: a controlled agent's hull or a
/// static obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyRef {
    Agent(usize),
    Obstacle(usize),
}

/// What a leaf computes, with controlled-agent slots resolved.
#[derive(Debug, Clone)]
pub enum LeafOp {
    Fov {
        observer: usize,
        target: usize,
        cone: FovCone,
    },
    RangeMin {
        i: usize,
        j: usize,
    },
    RangeMax {
        i: usize,
        j: usize,
    },
    State {
        i: usize,
    },
    Regularity {
        i: usize,
        j: usize,
    },
    Collision {
        a: BodyRef,
        b: BodyRef,
    },
    Los {
        i: usize,
        j: usize,
        k: BodyRef,
    },
}

#[derive(Debug, Clone)]
pub struct LeafSpec {
    pub name: String,
    pub kind: LeafKind,
    pub op: LeafOp,
}

/// Agent bookkeeping: config ids resolved to controlled slots and obstacle
/// indices, with role groupings.
#[derive(Debug, Clone)]
pub struct AgentIndex {
    pub leader: Option<usize>,
    pub followers: Vec<usize>,
    pub controlled_ids: Vec<u32>,
    pub obstacle_ids: Vec<u32>,
    by_id: BTreeMap<u32, BodyRef>,
}

impl AgentIndex {
    pub fn build(agents: &[AgentConfig]) -> Result<Self, ScenarioError> {
        let mut leader = None;
        let mut followers = Vec::new();
        let mut controlled_ids = Vec::new();
        let mut obstacle_ids = Vec::new();
        let mut by_id = BTreeMap::new();
        for a in agents {
            match a.role {
                Role::Obstacle => {
                    by_id.insert(a.id, BodyRef::Obstacle(obstacle_ids.len()));
                    obstacle_ids.push(a.id);
                }
                Role::Leader | Role::Follower => {
                    let slot = controlled_ids.len();
                    by_id.insert(a.id, BodyRef::Agent(slot));
                    controlled_ids.push(a.id);
                    if a.role == Role::Leader {
                        if leader.is_some() {
                            return Err(ScenarioError::Config(
                                "more than one leader declared".into(),
                            ));
                        }
                        leader = Some(slot);
                    } else {
                        followers.push(slot);
                    }
                }
            }
        }
        Ok(Self {
            leader,
            followers,
            controlled_ids,
            obstacle_ids,
            by_id,
        })
    }

    pub fn resolve(&self, id: u32) -> Result<BodyRef, ScenarioError> {
        self.by_id
            .get(&id)
            .copied()
            .ok_or_else(|| ScenarioError::Config(format!("unknown agent id {id}")))
    }

    fn resolve_controlled(&self, id: u32) -> Result<usize, ScenarioError> {
        match self.resolve(id)? {
            BodyRef::Agent(slot) => Ok(slot),
            BodyRef::Obstacle(_) => Err(ScenarioError::Config(format!(
                "agent id {id} is an obstacle where a controlled agent is required"
            ))),
        }
    }

    pub fn id_of_slot(&self, slot: usize) -> u32 {
        self.controlled_ids[slot]
    }
}

/// Collects leaves, deduplicating by name.
struct Registry {
    leaves: Vec<LeafSpec>,
    by_name: BTreeMap<String, usize>,
}

impl Registry {
    fn new() -> Self {
        Self {
            leaves: Vec::new(),
            by_name: BTreeMap::new(),
        }
    }

    fn intern(&mut self, spec: LeafSpec) -> usize {
        if let Some(&idx) = self.by_name.get(&spec.name) {
            return idx;
        }
        let idx = self.leaves.len();
        self.by_name.insert(spec.name.clone(), idx);
        self.leaves.push(spec);
        idx
    }
}

/// Build registry and expression from the scenario's tree setting.
pub fn build_tree(
    tree: &TreeConfig,
    fov: &ResolvedFov,
    index: &AgentIndex,
) -> Result<(Vec<LeafSpec>, BarrierExpr), ScenarioError> {
    match tree {
        TreeConfig::Named(name) if name == "auto" => auto_tree(fov, index),
        TreeConfig::Named(other) => Err(ScenarioError::Config(format!(
            "unknown tree setting {other:?}"
        ))),
        TreeConfig::Expression(value) => {
            let mut registry = Registry::new();
            let expr = parse_expr(value, fov, index, &mut registry)?;
            Ok((registry.leaves, expr))
        }
    }
}

/// Role-derived composition: yaw limits and pairwise collision avoidance for
/// every controlled agent, corridor regularity per follower, and a
/// disjunction requiring at least one follower to keep the full tracking
/// conjunction (field of view, range band, clear sight lines) to the leader.
fn auto_tree(
    fov: &ResolvedFov,
    index: &AgentIndex,
) -> Result<(Vec<LeafSpec>, BarrierExpr), ScenarioError> {
    let mut registry = Registry::new();
    let mut top = Vec::new();

    if !index.followers.is_empty() && index.leader.is_none() {
        return Err(ScenarioError::Config(
            "followers declared but no leader to track".into(),
        ));
    }

    let mut ordered: Vec<usize> = Vec::new();
    if let Some(l) = index.leader {
        ordered.push(l);
    }
    ordered.extend(index.followers.iter().copied());

    // Yaw-limit barriers.
    for &slot in &ordered {
        let id = index.id_of_slot(slot);
        top.push(BarrierExpr::Leaf(registry.intern(LeafSpec {
            name: format!("state:{id}"),
            kind: LeafKind::Smooth,
            op: LeafOp::State { i: slot },
        })));
    }

    // Corridor regularity per follower toward the leader.
    if let Some(leader) = index.leader {
        let lid = index.id_of_slot(leader);
        for &f in &index.followers {
            let fid = index.id_of_slot(f);
            top.push(BarrierExpr::Leaf(registry.intern(LeafSpec {
                name: format!("reg:{fid}:{lid}"),
                kind: LeafKind::Smooth,
                op: LeafOp::Regularity { i: f, j: leader },
            })));
        }
    }

    // Ordered pairwise collision avoidance: every controlled agent against
    // every other body.
    for &i in &ordered {
        let iid = index.id_of_slot(i);
        let mut others: Vec<(u32, BodyRef)> = Vec::new();
        for (k, &oid) in index.obstacle_ids.iter().enumerate() {
            others.push((oid, BodyRef::Obstacle(k)));
        }
        for &j in &ordered {
            if j != i {
                others.push((index.id_of_slot(j), BodyRef::Agent(j)));
            }
        }
        others.sort_by_key(|(id, _)| *id);
        for (jid, body) in others {
            top.push(BarrierExpr::Leaf(registry.intern(LeafSpec {
                name: format!("ca:{iid}:{jid}"),
                kind: LeafKind::Distance,
                op: LeafOp::Collision {
                    a: BodyRef::Agent(i),
                    b: body,
                },
            })));
        }
    }

    // Tracking disjunction over followers.
    if let Some(leader) = index.leader {
        if !index.followers.is_empty() {
            let lid = index.id_of_slot(leader);
            let mut tracking = Vec::new();
            for &f in &index.followers {
                let fid = index.id_of_slot(f);
                let mut conj = Vec::new();
                for leaf in fov_leaves(fov, f, fid, leader, lid) {
                    conj.push(BarrierExpr::Leaf(registry.intern(leaf)));
                }
                conj.push(BarrierExpr::Leaf(registry.intern(LeafSpec {
                    name: format!("rngmax:{fid}:{lid}"),
                    kind: LeafKind::Smooth,
                    op: LeafOp::RangeMax { i: f, j: leader },
                })));
                conj.push(BarrierExpr::Leaf(registry.intern(LeafSpec {
                    name: format!("rngmin:{fid}:{lid}"),
                    kind: LeafKind::Smooth,
                    op: LeafOp::RangeMin { i: f, j: leader },
                })));
                // Sight corridor to the leader against every other body.
                let mut blockers: Vec<(u32, BodyRef)> = Vec::new();
                for (k, &oid) in index.obstacle_ids.iter().enumerate() {
                    blockers.push((oid, BodyRef::Obstacle(k)));
                }
                for &other in &index.followers {
                    if other != f {
                        blockers.push((index.id_of_slot(other), BodyRef::Agent(other)));
                    }
                }
                blockers.sort_by_key(|(id, _)| *id);
                for (kid, body) in blockers {
                    conj.push(BarrierExpr::Leaf(registry.intern(LeafSpec {
                        name: format!("los:{fid}:{lid}:{kid}"),
                        kind: LeafKind::Distance,
                        op: LeafOp::Los {
                            i: f,
                            j: leader,
                            k: body,
                        },
                    })));
                }
                tracking.push(BarrierExpr::and(conj));
            }
            top.push(BarrierExpr::or(tracking));
        }
    }

    Ok((registry.leaves, BarrierExpr::and(top)))
}

fn fov_leaves(
    fov: &ResolvedFov,
    observer_slot: usize,
    observer_id: u32,
    target_slot: usize,
    target_id: u32,
) -> Vec<LeafSpec> {
    match fov {
        ResolvedFov::Ellipsoidal { half_angle } => vec![LeafSpec {
            name: format!("fov:{observer_id}:{target_id}"),
            kind: LeafKind::Smooth,
            op: LeafOp::Fov {
                observer: observer_slot,
                target: target_slot,
                cone: FovCone::ellipsoidal(*half_angle),
            },
        }],
        ResolvedFov::Polyhedral { faces } => faces
            .iter()
            .enumerate()
            .map(|(f, c)| LeafSpec {
                name: format!("fov:{observer_id}:{target_id}:{f}"),
                kind: LeafKind::Smooth,
                op: LeafOp::Fov {
                    observer: observer_slot,
                    target: target_slot,
                    cone: FovCone::affine_face(*c),
                },
            })
            .collect(),
    }
}

fn parse_expr(
    value: &serde_json::Value,
    fov: &ResolvedFov,
    index: &AgentIndex,
    registry: &mut Registry,
) -> Result<BarrierExpr, ScenarioError> {
    let arr = value
        .as_array()
        .ok_or_else(|| ScenarioError::Config(format!("tree node must be an array: {value}")))?;
    let head = arr
        .first()
        .and_then(|v| v.as_str())
        .ok_or_else(|| ScenarioError::Config("tree node missing operator".into()))?;
    match head {
        "and" | "or" => {
            if arr.len() < 2 {
                return Err(ScenarioError::Config(format!("{head} needs children")));
            }
            let children = arr[1..]
                .iter()
                .map(|v| parse_expr(v, fov, index, registry))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(if head == "and" {
                BarrierExpr::and(children)
            } else {
                BarrierExpr::or(children)
            })
        }
        "not" => {
            if arr.len() != 2 {
                return Err(ScenarioError::Config("not takes exactly one child".into()));
            }
            Ok(BarrierExpr::not(parse_expr(&arr[1], fov, index, registry)?))
        }
        "leaf" => {
            let name = arr
                .get(1)
                .and_then(|v| v.as_str())
                .ok_or_else(|| ScenarioError::Config("leaf needs a name".into()))?;
            let spec = parse_leaf_name(name, fov, index)?;
            Ok(BarrierExpr::Leaf(registry.intern(spec)))
        }
        other => Err(ScenarioError::Config(format!(
            "unknown tree operator {other:?}"
        ))),
    }
}

fn parse_leaf_name(
    name: &str,
    fov: &ResolvedFov,
    index: &AgentIndex,
) -> Result<LeafSpec, ScenarioError> {
    let parts: Vec<&str> = name.split(':').collect();
    let id = |s: &str| -> Result<u32, ScenarioError> {
        s.parse::<u32>()
            .map_err(|_| ScenarioError::Config(format!("bad agent id {s:?} in leaf {name:?}")))
    };
    let op = match (parts.as_slice(), fov) {
        (["state", i], _) => LeafOp::State {
            i: index.resolve_controlled(id(i)?)?,
        },
        (["reg", i, j], _) => LeafOp::Regularity {
            i: index.resolve_controlled(id(i)?)?,
            j: index.resolve_controlled(id(j)?)?,
        },
        (["rngmin", i, j], _) => LeafOp::RangeMin {
            i: index.resolve_controlled(id(i)?)?,
            j: index.resolve_controlled(id(j)?)?,
        },
        (["rngmax", i, j], _) => LeafOp::RangeMax {
            i: index.resolve_controlled(id(i)?)?,
            j: index.resolve_controlled(id(j)?)?,
        },
        (["fov", i, j], ResolvedFov::Ellipsoidal { half_angle }) => LeafOp::Fov {
            observer: index.resolve_controlled(id(i)?)?,
            target: index.resolve_controlled(id(j)?)?,
            cone: FovCone::ellipsoidal(*half_angle),
        },
        (["fov", _, _], ResolvedFov::Polyhedral { .. }) => {
            return Err(ScenarioError::Config(format!(
                "leaf {name:?}: polyhedral fov needs a face index (fov:i:j:f)"
            )))
        }
        (["fov", i, j, f], ResolvedFov::Polyhedral { faces }) => {
            let fi: usize = f
                .parse()
                .map_err(|_| ScenarioError::Config(format!("bad face index in {name:?}")))?;
            let face = faces.get(fi).ok_or_else(|| {
                ScenarioError::Config(format!("face index {fi} out of range in {name:?}"))
            })?;
            LeafOp::Fov {
                observer: index.resolve_controlled(id(i)?)?,
                target: index.resolve_controlled(id(j)?)?,
                cone: FovCone::affine_face(*face),
            }
        }
        (["fov", _, _, _], ResolvedFov::Ellipsoidal { .. }) => {
            return Err(ScenarioError::Config(format!(
                "leaf {name:?}: face index given but the fov is ellipsoidal"
            )))
        }
        (["ca", i, j], _) => {
            let a = index.resolve(id(i)?)?;
            let b = index.resolve(id(j)?)?;
            if !matches!(a, BodyRef::Agent(_)) {
                return Err(ScenarioError::Config(format!(
                    "leaf {name:?}: first body must be a controlled agent"
                )));
            }
            LeafOp::Collision { a, b }
        }
        (["los", i, j, k], _) => LeafOp::Los {
            i: index.resolve_controlled(id(i)?)?,
            j: index.resolve_controlled(id(j)?)?,
            k: index.resolve(id(k)?)?,
        },
        _ => {
            return Err(ScenarioError::Config(format!(
                "unrecognized leaf name {name:?}"
            )))
        }
    };
    let kind = match op {
        LeafOp::Collision { .. } | LeafOp::Los { .. } => LeafKind::Distance,
        _ => LeafKind::Smooth,
    };
    Ok(LeafSpec {
        name: name.to_string(),
        kind,
        op,
    })
}

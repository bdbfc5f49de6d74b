//! Boolean composition of barrier functions: expression trees evaluated with
//! min (AND), max (OR), and negation (NOT), plus extraction of the
//! almost-active leaf sets the filter turns into constraint rows.

use crate::error::CompositionError;

/// How a leaf's derivative information reaches the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    /// Explicit gradient available.
    Smooth,
    /// Backed by a polytope distance solve; handled through dual rates.
    Distance,
}

/// Expression tree over barrier leaves, identified by registry index.
#[derive(Debug, Clone, PartialEq)]
pub enum BarrierExpr {
    Leaf(usize),
    And(Vec<BarrierExpr>),
    Or(Vec<BarrierExpr>),
    Not(Box<BarrierExpr>),
}

/// One leaf that sits within eps1 of the composed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveLeaf {
    pub leaf: usize,
    /// True when the leaf sits under an odd number of negations; the filter
    /// then constrains the negated gradient.
    pub negated: bool,
    /// Signed value as composed: value or -value.
    pub effective: f64,
}

/// Almost-active index sets, partitioned by leaf kind.
#[derive(Debug, Clone)]
pub struct ActiveSets {
    pub eps1: f64,
    pub smooth: Vec<ActiveLeaf>,
    pub nonsmooth: Vec<ActiveLeaf>,
}

impl ActiveSets {
    pub fn total(&self) -> usize {
        self.smooth.len() + self.nonsmooth.len()
    }
}

impl BarrierExpr {
    pub fn and(children: Vec<BarrierExpr>) -> Self {
        BarrierExpr::And(children)
    }

    pub fn or(children: Vec<BarrierExpr>) -> Self {
        BarrierExpr::Or(children)
    }

    pub fn not(child: BarrierExpr) -> Self {
        BarrierExpr::Not(Box::new(child))
    }

    /// Every (leaf index, parity) occurrence in the tree.
    pub fn leaf_occurrences(&self) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        collect_leaves(self, false, &mut out);
        out
    }

    /// Structural checks: nonempty nodes, registered leaves, and no
    /// distance-backed leaf under an odd number of negations.
    pub fn validate(&self, kinds: &[LeafKind]) -> Result<(), CompositionError> {
        match self {
            BarrierExpr::Leaf(id) => {
                if *id >= kinds.len() {
                    return Err(CompositionError::UnknownLeaf(*id));
                }
                Ok(())
            }
            BarrierExpr::And(ch) | BarrierExpr::Or(ch) => {
                if ch.is_empty() {
                    return Err(CompositionError::EmptyTree);
                }
                ch.iter().try_for_each(|c| c.validate(kinds))
            }
            BarrierExpr::Not(c) => c.validate(kinds),
        }?;
        for (leaf, negated) in self.leaf_occurrences() {
            if negated && kinds[leaf] == LeafKind::Distance {
                return Err(CompositionError::NegatedDistanceLeaf(leaf));
            }
        }
        Ok(())
    }
}

fn collect_leaves(expr: &BarrierExpr, negated: bool, out: &mut Vec<(usize, bool)>) {
    match expr {
        BarrierExpr::Leaf(id) => out.push((*id, negated)),
        BarrierExpr::And(ch) | BarrierExpr::Or(ch) => {
            for c in ch {
                collect_leaves(c, negated, out);
            }
        }
        BarrierExpr::Not(c) => collect_leaves(c, !negated, out),
    }
}

/// Evaluate the composed barrier over cached leaf values.
///
/// Implemented iteratively with an explicit work stack; the test oracle uses
/// plain recursion so the two paths stay independent.
pub fn evaluate(expr: &BarrierExpr, values: &[f64]) -> Result<f64, CompositionError> {
    enum Frame<'a> {
        Visit(&'a BarrierExpr),
        CombineAnd(usize),
        CombineOr(usize),
        Negate,
    }
    let mut work = vec![Frame::Visit(expr)];
    let mut results: Vec<f64> = Vec::new();
    while let Some(frame) = work.pop() {
        match frame {
            Frame::Visit(e) => match e {
                BarrierExpr::Leaf(id) => {
                    let v = values
                        .get(*id)
                        .copied()
                        .ok_or(CompositionError::UnknownLeaf(*id))?;
                    results.push(v);
                }
                BarrierExpr::And(ch) => {
                    if ch.is_empty() {
                        return Err(CompositionError::EmptyTree);
                    }
                    work.push(Frame::CombineAnd(ch.len()));
                    for c in ch.iter().rev() {
                        work.push(Frame::Visit(c));
                    }
                }
                BarrierExpr::Or(ch) => {
                    if ch.is_empty() {
                        return Err(CompositionError::EmptyTree);
                    }
                    work.push(Frame::CombineOr(ch.len()));
                    for c in ch.iter().rev() {
                        work.push(Frame::Visit(c));
                    }
                }
                BarrierExpr::Not(c) => {
                    work.push(Frame::Negate);
                    work.push(Frame::Visit(c));
                }
            },
            Frame::CombineAnd(n) => {
                let cut = results.len() - n;
                let v = results.drain(cut..).fold(f64::INFINITY, f64::min);
                results.push(v);
            }
            Frame::CombineOr(n) => {
                let cut = results.len() - n;
                let v = results.drain(cut..).fold(f64::NEG_INFINITY, f64::max);
                results.push(v);
            }
            Frame::Negate => {
                let v = results.pop().expect("negation operand");
                results.push(-v);
            }
        }
    }
    debug_assert_eq!(results.len(), 1);
    Ok(results[0])
}

/// Push negations down to the leaves and cancel double negations. The
/// evaluation is unchanged on every state.
pub fn normalize(expr: &BarrierExpr) -> BarrierExpr {
    push_not(expr, false)
}

fn push_not(expr: &BarrierExpr, negate: bool) -> BarrierExpr {
    match expr {
        BarrierExpr::Leaf(id) => {
            if negate {
                BarrierExpr::not(BarrierExpr::Leaf(*id))
            } else {
                BarrierExpr::Leaf(*id)
            }
        }
        BarrierExpr::And(ch) => {
            let mapped = ch.iter().map(|c| push_not(c, negate)).collect();
            if negate {
                BarrierExpr::Or(mapped)
            } else {
                BarrierExpr::And(mapped)
            }
        }
        BarrierExpr::Or(ch) => {
            let mapped = ch.iter().map(|c| push_not(c, negate)).collect();
            if negate {
                BarrierExpr::And(mapped)
            } else {
                BarrierExpr::Or(mapped)
            }
        }
        BarrierExpr::Not(c) => push_not(c, !negate),
    }
}

/// Extract the almost-active leaf sets: every leaf whose signed value sits
/// within eps1 of the composed value, partitioned by kind. Ties are not
/// broken; every qualifying leaf enters.
pub fn active_sets(
    expr: &BarrierExpr,
    values: &[f64],
    kinds: &[LeafKind],
    eps1: f64,
) -> Result<ActiveSets, CompositionError> {
    let h_g = evaluate(expr, values)?;
    let mut smooth = Vec::new();
    let mut nonsmooth = Vec::new();
    let mut seen: Vec<(usize, bool)> = Vec::new();
    for (leaf, negated) in expr.leaf_occurrences() {
        if leaf >= values.len() || leaf >= kinds.len() {
            return Err(CompositionError::UnknownLeaf(leaf));
        }
        if seen.contains(&(leaf, negated)) {
            continue;
        }
        seen.push((leaf, negated));
        let effective = if negated { -values[leaf] } else { values[leaf] };
        if (effective - h_g).abs() <= eps1 {
            let entry = ActiveLeaf {
                leaf,
                negated,
                effective,
            };
            match kinds[leaf] {
                LeafKind::Smooth => smooth.push(entry),
                LeafKind::Distance => nonsmooth.push(entry),
            }
        }
    }
    Ok(ActiveSets {
        eps1,
        smooth,
        nonsmooth,
    })
}

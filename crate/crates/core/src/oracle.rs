//! Brute-force closure of the chain-based weak deduction, used to certify
//! the agent.
//!
//! The deduction tree rooted at `(origin, q)` has one child per neighbor of
//! each node's peer, labeled with the one-step rewriting (or the empty
//! marker). The tree is infinite on cyclic networks but has finitely many
//! distinct nodes, so a breadth-first search that expands each distinct
//! `(peer, canonical query)` once visits all of them. Normalizing the visited
//! nodes yields the per-peer sets the agent must reproduce.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::agent::{run_with, AgentOptions, AgentResult};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::query::{canonicalize, equivalent, ConjunctiveQuery};
use crate::rewriting::rew;

pub const DEFAULT_NODE_CEILING: usize = 100_000;

/// A node of the deduction tree; `query == None` is the empty marker, which
/// is always a leaf.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DeductionNode {
    pub peer: String,
    pub query: Option<ConjunctiveQuery>,
}

pub type Closure = BTreeMap<String, BTreeSet<ConjunctiveQuery>>;

/// Children of `node`: one per neighbor of its peer, in declaration order.
pub fn expand(net: &Network, node: &DeductionNode) -> Result<Vec<DeductionNode>> {
    let Some(query) = &node.query else {
        return Ok(Vec::new());
    };
    net.neighbors(&node.peer)?
        .into_iter()
        .map(|j| {
            Ok(DeductionNode {
                peer: j.to_owned(),
                query: rew(query, net, &node.peer, j)?.into_query(),
            })
        })
        .collect()
}

/// Drops empty nodes, groups by peer and keeps one representative per
/// equivalence class.
pub fn normalize(nodes: impl IntoIterator<Item = DeductionNode>) -> Closure {
    let mut grouped: BTreeMap<String, Vec<ConjunctiveQuery>> = BTreeMap::new();
    for node in nodes {
        let Some(q) = node.query else { continue };
        let q = canonicalize(&q);
        let members = grouped.entry(node.peer).or_default();
        if !members.iter().any(|m| equivalent(m, &q).unwrap_or(false)) {
            members.push(q);
        }
    }
    grouped
        .into_iter()
        .map(|(p, qs)| (p, qs.into_iter().collect()))
        .collect()
}

pub fn weak_closure(net: &Network, origin: &str, q: &ConjunctiveQuery) -> Result<Closure> {
    weak_closure_with(net, origin, q, DEFAULT_NODE_CEILING)
}

pub fn weak_closure_with(
    net: &Network,
    origin: &str,
    q: &ConjunctiveQuery,
    ceiling: usize,
) -> Result<Closure> {
    Ok(normalize(reachable_nodes(net, origin, q, ceiling)?))
}

/// Every distinct non-empty node of the deduction tree, in BFS order.
pub fn reachable_nodes(
    net: &Network,
    origin: &str,
    q: &ConjunctiveQuery,
    ceiling: usize,
) -> Result<Vec<DeductionNode>> {
    net.peer(origin)?.check_query(q)?;
    let root = DeductionNode {
        peer: origin.to_owned(),
        query: Some(canonicalize(q)),
    };
    let mut visited: BTreeSet<DeductionNode> = BTreeSet::new();
    let mut order = Vec::new();
    let mut frontier = VecDeque::from([root]);
    while let Some(node) = frontier.pop_front() {
        if node.query.is_none() || visited.contains(&node) {
            continue;
        }
        if visited.len() >= ceiling {
            return Err(Error::ClosureCeiling(ceiling));
        }
        visited.insert(node.clone());
        frontier.extend(expand(net, &node)?);
        order.push(node);
    }
    Ok(order)
}

/// Outcome of comparing the agent's fixpoint with the oracle's closure.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TheoremReport {
    pub holds: bool,
    pub agent_only: Vec<(String, ConjunctiveQuery)>,
    pub oracle_only: Vec<(String, ConjunctiveQuery)>,
}

impl std::fmt::Display for TheoremReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.holds {
            return f.write_str("agent fixpoint equals weak-deduction closure");
        }
        writeln!(f, "agent fixpoint differs from weak-deduction closure")?;
        for (p, q) in &self.agent_only {
            writeln!(f, "  only in agent:  {p}: {q}")?;
        }
        for (p, q) in &self.oracle_only {
            writeln!(f, "  only in oracle: {p}: {q}")?;
        }
        Ok(())
    }
}

fn missing_from(left: &Closure, right: &Closure) -> Vec<(String, ConjunctiveQuery)> {
    let mut out = Vec::new();
    for (peer, qs) in left {
        let others = right.get(peer);
        for q in qs {
            let present = others
                .into_iter()
                .flatten()
                .any(|o| equivalent(o, q).unwrap_or(false));
            if !present {
                out.push((peer.clone(), q.clone()));
            }
        }
    }
    out
}

/// Per-peer set equality modulo query equivalence.
pub fn compare(agent: &AgentResult, closure: &Closure) -> TheoremReport {
    let agent_only = missing_from(&agent.per_peer_queries, closure);
    let oracle_only = missing_from(closure, &agent.per_peer_queries);
    TheoremReport {
        holds: agent_only.is_empty() && oracle_only.is_empty(),
        agent_only,
        oracle_only,
    }
}

pub fn check_theorem(net: &Network, origin: &str, q: &ConjunctiveQuery) -> Result<TheoremReport> {
    check_theorem_with(net, origin, q, &AgentOptions::default())
}

pub fn check_theorem_with(
    net: &Network,
    origin: &str,
    q: &ConjunctiveQuery,
    opts: &AgentOptions,
) -> Result<TheoremReport> {
    let agent = run_with(net, origin, q, opts)?;
    let closure = weak_closure(net, origin, q)?;
    Ok(compare(&agent, &closure))
}

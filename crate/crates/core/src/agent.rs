//! The query agent: a deterministic state machine that elaborates one
//! pending query per step, rewriting it toward every neighbor of its peer,
//! until no peer has pending work.
//!
//! Each peer holds a list of queries and a pointer to the number already
//! elaborated. Lists only grow by appends; a rewritten query is appended
//! unless it is equivalent to one already in the target list.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::query::{canonicalize, contains, equivalent, ConjunctiveQuery};
use crate::rewriting::{rew, RewriteOutcome};

pub const DEFAULT_STEP_CEILING: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentOptions {
    pub step_ceiling: usize,
    /// Also discard a new query when an existing one on the same peer
    /// contains it.
    pub prune_subsumed: bool,
}

impl Default for AgentOptions {
    fn default() -> Self {
        AgentOptions {
            step_ceiling: DEFAULT_STEP_CEILING,
            prune_subsumed: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PeerQueue {
    pub queries: Vec<ConjunctiveQuery>,
    pub pointer: usize,
}

impl PeerQueue {
    pub fn pending(&self) -> usize {
        self.queries.len() - self.pointer
    }
}

/// One queue per peer, in the network's declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub per_peer: Vec<(String, PeerQueue)>,
}

impl AgentState {
    pub fn queue(&self, peer: &str) -> Option<&PeerQueue> {
        self.per_peer
            .iter()
            .find(|(p, _)| p == peer)
            .map(|(_, q)| q)
    }

    pub fn is_exhausted(&self) -> bool {
        self.per_peer.iter().all(|(_, q)| q.pending() == 0)
    }

    fn collect(&self) -> AgentResult {
        AgentResult {
            per_peer_queries: self
                .per_peer
                .iter()
                .filter(|(_, q)| !q.queries.is_empty())
                .map(|(p, q)| (p.clone(), q.queries.iter().cloned().collect()))
                .collect(),
        }
    }
}

/// Final per-peer query sets; peers that received nothing are absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgentResult {
    pub per_peer_queries: BTreeMap<String, BTreeSet<ConjunctiveQuery>>,
}

impl AgentResult {
    pub fn total(&self) -> usize {
        self.per_peer_queries.values().map(BTreeSet::len).sum()
    }

    pub fn queries(&self, peer: &str) -> impl Iterator<Item = &ConjunctiveQuery> {
        self.per_peer_queries.get(peer).into_iter().flatten()
    }
}

/// Audit record of one elaboration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub step: usize,
    pub peer: String,
    pub query: ConjunctiveQuery,
    pub appended: Vec<(String, ConjunctiveQuery)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Done(AgentResult),
    Next(AgentState, StepRecord),
}

/// Initial state: the canonical user query pending on `origin`, every other
/// queue empty.
pub fn new_agent(net: &Network, origin: &str, q: &ConjunctiveQuery) -> Result<AgentState> {
    net.peer(origin)?.check_query(q)?;
    let per_peer = net
        .peers
        .iter()
        .map(|p| {
            let queue = if p.id == origin {
                PeerQueue {
                    queries: vec![canonicalize(q)],
                    pointer: 0,
                }
            } else {
                PeerQueue::default()
            };
            (p.id.clone(), queue)
        })
        .collect();
    Ok(AgentState { per_peer })
}

fn admits(
    existing: &[ConjunctiveQuery],
    candidate: &ConjunctiveQuery,
    opts: &AgentOptions,
) -> bool {
    !existing.iter().any(|e| {
        if opts.prune_subsumed {
            contains(e, candidate).unwrap_or(false)
        } else {
            equivalent(e, candidate).unwrap_or(false)
        }
    })
}

pub fn step(net: &Network, state: &AgentState, opts: &AgentOptions) -> Result<Step> {
    step_numbered(net, state, opts, 0)
}

fn step_numbered(
    net: &Network,
    state: &AgentState,
    opts: &AgentOptions,
    index: usize,
) -> Result<Step> {
    let Some(k) = state.per_peer.iter().position(|(_, q)| q.pending() > 0) else {
        return Ok(Step::Done(state.collect()));
    };
    let mut next = state.clone();
    let (peer, queue) = &mut next.per_peer[k];
    let peer = peer.clone();
    let query = queue.queries[queue.pointer].clone();
    queue.pointer += 1;

    let mut appended = Vec::new();
    for j in net.neighbors(&peer)? {
        let RewriteOutcome::Query(derived) = rew(&query, net, &peer, j)? else {
            continue;
        };
        let (_, target) = next
            .per_peer
            .iter_mut()
            .find(|(p, _)| p == j)
            .expect("every peer has a queue");
        if admits(&target.queries, &derived, opts) {
            target.queries.push(derived.clone());
            appended.push((j.to_owned(), derived));
        }
    }
    Ok(Step::Next(
        next,
        StepRecord {
            step: index,
            peer,
            query,
            appended,
        },
    ))
}

/// Runs the agent to its fixpoint, returning the result and the audit log.
pub fn trace_with(
    net: &Network,
    origin: &str,
    q: &ConjunctiveQuery,
    opts: &AgentOptions,
) -> Result<(AgentResult, Vec<StepRecord>)> {
    let mut state = new_agent(net, origin, q)?;
    let mut log = Vec::new();
    loop {
        if log.len() >= opts.step_ceiling {
            return Err(Error::FixpointCeiling(opts.step_ceiling));
        }
        match step_numbered(net, &state, opts, log.len())? {
            Step::Done(result) => return Ok((result, log)),
            Step::Next(s, record) => {
                state = s;
                log.push(record);
            }
        }
    }
}

pub fn trace(net: &Network, origin: &str, q: &ConjunctiveQuery) -> Result<Vec<StepRecord>> {
    Ok(trace_with(net, origin, q, &AgentOptions::default())?.1)
}

pub fn run_with(
    net: &Network,
    origin: &str,
    q: &ConjunctiveQuery,
    opts: &AgentOptions,
) -> Result<AgentResult> {
    Ok(trace_with(net, origin, q, opts)?.0)
}

pub fn run(net: &Network, origin: &str, q: &ConjunctiveQuery) -> Result<AgentResult> {
    run_with(net, origin, q, &AgentOptions::default())
}

/// Rebuilds the final result from the user query and an audit log.
pub fn replay(origin: &str, q: &ConjunctiveQuery, log: &[StepRecord]) -> AgentResult {
    let mut result = AgentResult::default();
    result
        .per_peer_queries
        .entry(origin.to_owned())
        .or_default()
        .insert(canonicalize(q));
    for record in log {
        for (peer, query) in &record.appended {
            result
                .per_peer_queries
                .entry(peer.clone())
                .or_default()
                .insert(query.clone());
        }
    }
    result
}

//! Known answers: evaluation of conjunctive queries over a peer's facts and
//! the union of answers over every query the agent derives.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agent::{run_with, trace_with, AgentOptions, AgentResult, StepRecord};
use crate::error::{Error, Result};
use crate::network::{Network, Peer};
use crate::query::{Atom, ConjunctiveQuery, Term, Value};

/// A relation of fixed arity. Arity 0 encodes truth values: `{}` is false
/// and `{<>}` is true.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleSet {
    pub arity: usize,
    pub rows: BTreeSet<Vec<Value>>,
}

impl TupleSet {
    pub fn empty(arity: usize) -> Self {
        TupleSet {
            arity,
            rows: BTreeSet::new(),
        }
    }

    pub fn truth() -> Self {
        TupleSet {
            arity: 0,
            rows: BTreeSet::from([Vec::new()]),
        }
    }

    pub fn from_rows(arity: usize, rows: impl IntoIterator<Item = Vec<Value>>) -> Result<Self> {
        let rows: BTreeSet<Vec<Value>> = rows.into_iter().collect();
        if let Some(bad) = rows.iter().find(|r| r.len() != arity) {
            return Err(Error::JoinAnnotation(format!(
                "row of length {} in a relation of arity {arity}",
                bad.len()
            )));
        }
        Ok(TupleSet { arity, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_subset(&self, other: &TupleSet) -> bool {
        self.rows.is_subset(&other.rows)
    }

    pub fn extend(&mut self, other: &TupleSet) {
        self.rows.extend(other.rows.iter().cloned());
    }
}

/// Natural join of `left` and `right` on the column pairs `on`
/// (left index, right index). Output rows are the left row followed by the
/// right columns not joined on.
pub fn join(left: &TupleSet, right: &TupleSet, on: &[(usize, usize)]) -> Result<TupleSet> {
    for &(l, r) in on {
        if l >= left.arity || r >= right.arity {
            return Err(Error::JoinAnnotation(format!(
                "column pair ({l},{r}) outside arities {} and {}",
                left.arity, right.arity
            )));
        }
    }
    let joined: BTreeSet<usize> = on.iter().map(|&(_, r)| r).collect();
    let keep: Vec<usize> = (0..right.arity).filter(|c| !joined.contains(c)).collect();
    let mut rows = BTreeSet::new();
    for lrow in &left.rows {
        for rrow in &right.rows {
            if on.iter().all(|&(l, r)| lrow[l] == rrow[r]) {
                let mut row = lrow.clone();
                row.extend(keep.iter().map(|&c| rrow[c].clone()));
                rows.insert(row);
            }
        }
    }
    Ok(TupleSet {
        arity: left.arity + keep.len(),
        rows,
    })
}

fn bind_atom(
    atom: &Atom,
    fact: &Atom,
    binding: &mut BTreeMap<String, Value>,
    added: &mut Vec<String>,
) -> bool {
    for (t, f) in atom.args.iter().zip(&fact.args) {
        let Term::Const(value) = f else { return false };
        match t {
            Term::Const(c) if c != value => return false,
            Term::Const(_) => {}
            Term::Var(v) => match binding.get(v) {
                Some(b) if b != value => return false,
                Some(_) => {}
                None => {
                    binding.insert(v.clone(), value.clone());
                    added.push(v.clone());
                }
            },
        }
    }
    true
}

/// All head tuples of `q` over `peer`'s facts. Atoms are joined left to
/// right; built-ins are checked once every body atom is matched.
pub fn evaluate(q: &ConjunctiveQuery, peer: &Peer) -> Result<TupleSet> {
    peer.check_query(q)?;
    let mut by_predicate: BTreeMap<&str, Vec<&Atom>> = BTreeMap::new();
    for fact in &peer.facts {
        by_predicate
            .entry(fact.predicate.as_str())
            .or_default()
            .push(fact);
    }
    let mut out = TupleSet::empty(q.arity());
    let mut binding = BTreeMap::new();
    search(q, &by_predicate, 0, &mut binding, &mut out);
    Ok(out)
}

fn search(
    q: &ConjunctiveQuery,
    facts: &BTreeMap<&str, Vec<&Atom>>,
    depth: usize,
    binding: &mut BTreeMap<String, Value>,
    out: &mut TupleSet,
) {
    let Some(atom) = q.body.get(depth) else {
        let value = |t: &Term| match t {
            Term::Var(v) => binding[v].clone(),
            Term::Const(c) => c.clone(),
        };
        if q.builtins
            .iter()
            .all(|b| b.op.holds(&value(&b.lhs), &value(&b.rhs)))
        {
            out.rows
                .insert(q.head.iter().map(|v| binding[v].clone()).collect());
        }
        return;
    };
    for fact in facts.get(atom.predicate.as_str()).into_iter().flatten() {
        let mut added = Vec::new();
        if bind_atom(atom, fact, binding, &mut added) {
            search(q, facts, depth + 1, binding, out);
        }
        for v in added {
            binding.remove(&v);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerAnswer {
    pub queries: Vec<ConjunctiveQuery>,
    pub tuples: TupleSet,
}

/// The union of known answers over every query equivalent to the user query
/// under the declared mappings, each evaluated on its own peer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerReport {
    pub origin: String,
    pub original_query: ConjunctiveQuery,
    pub per_peer: BTreeMap<String, PeerAnswer>,
    pub union: TupleSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

/// Serializable form of an agent step record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub peer: String,
    pub query: ConjunctiveQuery,
    pub appended: Vec<(String, ConjunctiveQuery)>,
}

impl From<&StepRecord> for TraceEntry {
    fn from(r: &StepRecord) -> Self {
        TraceEntry {
            step: r.step,
            peer: r.peer.clone(),
            query: r.query.clone(),
            appended: r.appended.clone(),
        }
    }
}

/// Evaluates every derived query on its own peer and unions the results.
pub fn aggregate(
    net: &Network,
    origin: &str,
    q: &ConjunctiveQuery,
    derived: &AgentResult,
) -> Result<AnswerReport> {
    let mut per_peer = BTreeMap::new();
    let mut union = TupleSet::empty(q.arity());
    for (peer_id, queries) in &derived.per_peer_queries {
        let peer = net.peer(peer_id)?;
        let mut tuples = TupleSet::empty(q.arity());
        for query in queries {
            tuples.extend(&evaluate(query, peer)?);
        }
        union.extend(&tuples);
        per_peer.insert(
            peer_id.clone(),
            PeerAnswer {
                queries: queries.iter().cloned().collect(),
                tuples,
            },
        );
    }
    Ok(AnswerReport {
        origin: origin.to_owned(),
        original_query: q.clone(),
        per_peer,
        union,
        trace: None,
    })
}

pub fn answer_with(
    net: &Network,
    origin: &str,
    q: &ConjunctiveQuery,
    opts: &AgentOptions,
) -> Result<AnswerReport> {
    let derived = run_with(net, origin, q, opts)?;
    aggregate(net, origin, q, &derived)
}

pub fn answer(net: &Network, origin: &str, q: &ConjunctiveQuery) -> Result<AnswerReport> {
    answer_with(net, origin, q, &AgentOptions::default())
}

/// As [`answer_with`], with the agent's audit log attached.
pub fn answer_traced(
    net: &Network,
    origin: &str,
    q: &ConjunctiveQuery,
    opts: &AgentOptions,
) -> Result<AnswerReport> {
    let (derived, log) = trace_with(net, origin, q, opts)?;
    let mut report = aggregate(net, origin, q, &derived)?;
    report.trace = Some(log.iter().map(TraceEntry::from).collect());
    Ok(report)
}

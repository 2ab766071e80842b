//! One-step peer-to-peer rewriting: an equivalent rewriting of a query over
//! the mapped views of its peer, renaming of those views along the declared
//! mapping pairs, and unfolding over the target peer's schema.
//!
//! Built-ins never enter the view machinery: they are split off first and
//! re-attached to the unfolded result.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::network::{Interface, Network, Peer, ViewDefinition};
use crate::query::homomorphism::AtomMatcher;
use crate::query::{canonicalize, contains, Atom, Builtin, ConjunctiveQuery, Substitution};

/// A conjunctive query whose body atoms are views of `owner`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ViewExpression {
    pub owner: String,
    pub query: ConjunctiveQuery,
}

impl fmt::Display for ViewExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.query, self.owner)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RewriteOutcome {
    Query(ConjunctiveQuery),
    Empty,
}

impl RewriteOutcome {
    pub fn query(&self) -> Option<&ConjunctiveQuery> {
        match self {
            RewriteOutcome::Query(q) => Some(q),
            RewriteOutcome::Empty => None,
        }
    }

    pub fn into_query(self) -> Option<ConjunctiveQuery> {
        match self {
            RewriteOutcome::Query(q) => Some(q),
            RewriteOutcome::Empty => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, RewriteOutcome::Empty)
    }
}

impl fmt::Display for RewriteOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewriteOutcome::Query(q) => q.fmt(f),
            RewriteOutcome::Empty => f.write_str("EMPTY"),
        }
    }
}

/// Separates the relational part of `q` from its built-in constraints.
pub fn split_builtins(q: &ConjunctiveQuery) -> Result<(ConjunctiveQuery, Vec<Builtin>)> {
    q.check_builtins_bound(&q.body_vars())?;
    let reduct = ConjunctiveQuery {
        builtins: Vec::new(),
        ..q.clone()
    };
    Ok((reduct, q.builtins.clone()))
}

/// Every view atom `v(h(head_v))` for a homomorphism `h` from the body of
/// `v` into the body of `q`, in sorted order.
fn candidate_atoms(q: &ConjunctiveQuery, views: &[&ViewDefinition]) -> Vec<Atom> {
    let mut out = BTreeSet::new();
    for view in views {
        let def = &view.definition;
        let matcher = AtomMatcher::new(&def.body, &q.body);
        matcher.for_each(Default::default(), &mut |binding| {
            let args = def.head.iter().map(|v| binding[v].clone()).collect();
            out.insert(Atom::new(view.name.clone(), args));
            false
        });
    }
    out.into_iter().collect()
}

fn covers_head(q: &ConjunctiveQuery, atoms: &[Atom]) -> bool {
    let vars: BTreeSet<&str> = atoms.iter().flat_map(Atom::vars).collect();
    q.head.iter().all(|v| vars.contains(v.as_str()))
}

/// Unfolds the view atoms `atoms` (named after entries of `views`) under
/// the head of `q`; `None` if a view is missing.
fn unfold_atoms(
    q: &ConjunctiveQuery,
    atoms: &[Atom],
    views: &[&ViewDefinition],
) -> Option<ConjunctiveQuery> {
    let expr = ConjunctiveQuery {
        name: q.name.clone(),
        head: q.head.clone(),
        body: atoms.to_vec(),
        builtins: Vec::new(),
    };
    unfold_with(&expr, |name| views.iter().copied().find(|v| v.name == name))
}

fn rewrites_equivalently(q: &ConjunctiveQuery, atoms: &[Atom], views: &[&ViewDefinition]) -> bool {
    if !covers_head(q, atoms) {
        return false;
    }
    // q is always contained in the unfolding of candidate atoms; only the
    // converse needs checking.
    match unfold_atoms(q, atoms, views) {
        Some(unfolded) => contains(q, &unfolded).unwrap_or(false),
        None => false,
    }
}

/// An equivalent rewriting of the built-in-free query `q` as a conjunction
/// of `views`, or `None` when none exists.
///
/// Any equivalent rewriting maps onto a subset of the candidate atoms, so
/// one exists iff the full candidate set is an equivalent rewriting. The
/// result drops candidate atoms greedily, in sorted order, while
/// equivalence is kept.
pub fn minicon(
    q: &ConjunctiveQuery,
    owner: &str,
    views: &[&ViewDefinition],
) -> Option<ViewExpression> {
    if !q.builtins.is_empty() {
        return None;
    }
    let mut chosen = candidate_atoms(q, views);
    if !rewrites_equivalently(q, &chosen, views) {
        return None;
    }
    let mut k = 0;
    while k < chosen.len() {
        let mut without = chosen.clone();
        without.remove(k);
        if !without.is_empty() && rewrites_equivalently(q, &without, views) {
            chosen = without;
        } else {
            k += 1;
        }
    }
    Some(ViewExpression {
        owner: owner.to_owned(),
        query: ConjunctiveQuery {
            name: q.name.clone(),
            head: q.head.clone(),
            body: chosen,
            builtins: Vec::new(),
        },
    })
}

/// Renames each view atom of `psi` to its partner in `group`; `None` if an
/// atom's view is not mapped by the group.
pub fn subst(
    psi: &ViewExpression,
    group: &Interface,
    from: &Peer,
    to: &Peer,
) -> Result<Option<ViewExpression>> {
    let mut body = Vec::with_capacity(psi.query.body.len());
    for atom in &psi.query.body {
        let Some(target) = group.target_of(&atom.predicate) else {
            return Ok(None);
        };
        let source_arity = from.view(&atom.predicate).map(ViewDefinition::arity);
        let target_arity = to.view(target).map(ViewDefinition::arity);
        if let (Some(a), Some(b)) = (source_arity, target_arity) {
            if a != b {
                return Err(Error::MalformedMapping(format!(
                    "`{}` has arity {a} but its partner `{target}` has arity {b}",
                    atom.predicate
                )));
            }
        }
        body.push(Atom::new(target, atom.args.clone()));
    }
    Ok(Some(ViewExpression {
        owner: group.to.clone(),
        query: ConjunctiveQuery {
            body,
            ..psi.query.clone()
        },
    }))
}

/// Replaces every view atom of `phi` by a fresh instance of the view's
/// definition. `None` when `phi` names a view that `peer` does not define.
pub fn unfold(phi: &ViewExpression, peer: &Peer) -> Option<ConjunctiveQuery> {
    unfold_with(&phi.query, |name| peer.view(name))
}

fn unfold_with<'v>(
    expr: &ConjunctiveQuery,
    lookup: impl Fn(&str) -> Option<&'v ViewDefinition>,
) -> Option<ConjunctiveQuery> {
    let mut used: BTreeSet<String> = expr.vars().into_iter().map(str::to_owned).collect();
    let mut body = Vec::new();
    for atom in &expr.body {
        let view = lookup(&atom.predicate)?;
        if view.arity() != atom.arity() {
            return None;
        }
        let instance = view.definition.freshen(&used);
        used.extend(instance.vars().into_iter().map(str::to_owned));
        let bind: Substitution = instance
            .head
            .iter()
            .cloned()
            .zip(atom.args.iter().cloned())
            .collect();
        body.extend(instance.body.iter().map(|a| bind.apply_atom(a)));
    }
    Some(ConjunctiveQuery {
        name: expr.name.clone(),
        head: expr.head.clone(),
        body,
        builtins: expr.builtins.clone(),
    })
}

/// Intermediate results of one rewriting step, for auditing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteSteps {
    pub reduct: ConjunctiveQuery,
    pub constraints: Vec<Builtin>,
    pub psi: Option<ViewExpression>,
    pub phi: Option<ViewExpression>,
    pub unfolded: Option<ConjunctiveQuery>,
    pub outcome: RewriteOutcome,
}

/// Rewrites `q`, posed over peer `i`, into an equivalent query over peer
/// `j` through the declared group from `i` to `j`.
pub fn rew(q: &ConjunctiveQuery, net: &Network, i: &str, j: &str) -> Result<RewriteOutcome> {
    Ok(rew_steps(q, net, i, j)?.outcome)
}

pub fn rew_steps(q: &ConjunctiveQuery, net: &Network, i: &str, j: &str) -> Result<RewriteSteps> {
    let from = net.peer(i)?;
    let to = net.peer(j)?;
    let group = net
        .interface(i, j)
        .filter(|g| !g.pairs.is_empty())
        .ok_or_else(|| Error::UndeclaredInterface {
            from: i.to_owned(),
            to: j.to_owned(),
        })?;

    let q = canonicalize(q);
    let (reduct, constraints) = split_builtins(&q)?;
    let mut steps = RewriteSteps {
        reduct,
        constraints,
        psi: None,
        phi: None,
        unfolded: None,
        outcome: RewriteOutcome::Empty,
    };
    if from.check_query(&steps.reduct).is_err() {
        return Ok(steps);
    }

    let views: Vec<&ViewDefinition> = group
        .pairs
        .iter()
        .filter_map(|p| from.view(&p.from_view))
        .collect();
    steps.psi = minicon(&steps.reduct, i, &views);
    let Some(psi) = &steps.psi else {
        return Ok(steps);
    };
    steps.phi = subst(psi, group, from, to)?;
    let Some(phi) = &steps.phi else {
        return Ok(steps);
    };
    steps.unfolded = unfold(phi, to);
    let Some(unfolded) = &steps.unfolded else {
        return Ok(steps);
    };
    if to.check_query(unfolded).is_err() {
        return Ok(steps);
    }

    let surviving: BTreeSet<&str> = unfolded.body_vars();
    let carried = steps
        .constraints
        .iter()
        .all(|b| b.vars().all(|v| surviving.contains(v)));
    if !carried {
        return Ok(steps);
    }
    let full = unfolded.with_builtins(steps.constraints.iter().cloned())?;
    steps.outcome = RewriteOutcome::Query(canonicalize(&full));
    Ok(steps)
}

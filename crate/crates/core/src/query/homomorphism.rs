//! Homomorphism search between conjunctive queries.
//!
//! A homomorphism from `general` to `specific` maps the head of `general`
//! pointwise onto the head of `specific`, sends every body atom into the body
//! of `specific`, and carries each built-in of `general` either to a ground
//! built-in that evaluates true or to a built-in present (up to orientation)
//! among those of `specific`.

use std::collections::{BTreeMap, BTreeSet};

use super::{Atom, Builtin, ConjunctiveQuery, Substitution, Term};
use crate::error::{Error, Result};

/// Backtracking matcher of a list of pattern atoms into a list of target atoms.
pub(crate) struct AtomMatcher<'a> {
    patterns: Vec<&'a Atom>,
    targets: BTreeMap<(&'a str, usize), Vec<&'a Atom>>,
}

impl<'a> AtomMatcher<'a> {
    pub(crate) fn new(patterns: &'a [Atom], targets: &'a [Atom]) -> Self {
        let mut index: BTreeMap<(&str, usize), Vec<&Atom>> = BTreeMap::new();
        for t in targets {
            index
                .entry((t.predicate.as_str(), t.arity()))
                .or_default()
                .push(t);
        }
        let mut patterns: Vec<&Atom> = patterns.iter().collect();
        // most constrained first
        patterns.sort_by_key(|p| {
            index
                .get(&(p.predicate.as_str(), p.arity()))
                .map_or(0, Vec::len)
        });
        AtomMatcher {
            patterns,
            targets: index,
        }
    }

    /// Calls `visit` on every extension of `init` that maps all patterns into
    /// the targets. Stops early when `visit` returns `true`; the return value
    /// reports whether it did.
    pub(crate) fn for_each(
        &self,
        init: BTreeMap<String, Term>,
        visit: &mut dyn FnMut(&BTreeMap<String, Term>) -> bool,
    ) -> bool {
        let mut binding = init;
        self.descend(0, &mut binding, visit)
    }

    fn descend(
        &self,
        depth: usize,
        binding: &mut BTreeMap<String, Term>,
        visit: &mut dyn FnMut(&BTreeMap<String, Term>) -> bool,
    ) -> bool {
        let Some(pattern) = self.patterns.get(depth) else {
            return visit(binding);
        };
        let Some(candidates) = self
            .targets
            .get(&(pattern.predicate.as_str(), pattern.arity()))
        else {
            return false;
        };
        for target in candidates {
            let mut added = Vec::new();
            if unify(pattern, target, binding, &mut added)
                && self.descend(depth + 1, binding, visit)
            {
                return true;
            }
            for v in added {
                binding.remove(&v);
            }
        }
        false
    }
}

fn unify(
    pattern: &Atom,
    target: &Atom,
    binding: &mut BTreeMap<String, Term>,
    added: &mut Vec<String>,
) -> bool {
    for (p, t) in pattern.args.iter().zip(&target.args) {
        match p {
            Term::Const(_) => {
                if p != t {
                    return false;
                }
            }
            Term::Var(v) => match binding.get(v) {
                Some(bound) if bound != t => return false,
                Some(_) => {}
                None => {
                    binding.insert(v.clone(), t.clone());
                    added.push(v.clone());
                }
            },
        }
    }
    true
}

pub(crate) fn normalized_set(builtins: &[Builtin]) -> BTreeSet<Builtin> {
    builtins.iter().map(Builtin::normalized).collect()
}

/// Whether every built-in of the general side survives the mapping.
pub(crate) fn builtins_carried(
    binding: &BTreeMap<String, Term>,
    general: &[Builtin],
    specific: &BTreeSet<Builtin>,
) -> bool {
    general.iter().all(|b| {
        let image = Builtin {
            op: b.op,
            lhs: image_of(binding, &b.lhs),
            rhs: image_of(binding, &b.rhs),
        };
        match image.eval_ground() {
            Some(true) => true,
            _ => specific.contains(&image.normalized()),
        }
    })
}

fn image_of(binding: &BTreeMap<String, Term>, t: &Term) -> Term {
    match t {
        Term::Var(v) => binding.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Const(_) => t.clone(),
    }
}

fn head_binding(
    general: &ConjunctiveQuery,
    specific: &ConjunctiveQuery,
) -> Result<BTreeMap<String, Term>> {
    if general.arity() != specific.arity() {
        return Err(Error::Incomparable(format!(
            "`{}` has head arity {}, `{}` has head arity {}",
            general.name,
            general.arity(),
            specific.name,
            specific.arity()
        )));
    }
    Ok(general
        .head
        .iter()
        .zip(&specific.head)
        .map(|(g, s)| (g.clone(), Term::Var(s.clone())))
        .collect())
}

fn search(
    general: &ConjunctiveQuery,
    specific: &ConjunctiveQuery,
    visit: &mut dyn FnMut(&BTreeMap<String, Term>) -> bool,
) -> Result<bool> {
    let init = head_binding(general, specific)?;
    let specific_builtins = normalized_set(&specific.builtins);
    let matcher = AtomMatcher::new(&general.body, &specific.body);
    Ok(matcher.for_each(init, &mut |binding| {
        builtins_carried(binding, &general.builtins, &specific_builtins) && visit(binding)
    }))
}

/// All homomorphisms from `from` to `to`, each defined on every variable of
/// `from`.
pub fn homomorphisms(from: &ConjunctiveQuery, to: &ConjunctiveQuery) -> Result<Vec<Substitution>> {
    let mut out = Vec::new();
    search(from, to, &mut |binding| {
        out.push(
            binding
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        );
        false
    })?;
    Ok(out)
}

/// `true` iff every answer of `specific` is an answer of `general` on every
/// database, witnessed by a homomorphism `general -> specific`.
pub fn contains(general: &ConjunctiveQuery, specific: &ConjunctiveQuery) -> Result<bool> {
    search(general, specific, &mut |_| true)
}

pub fn equivalent(q1: &ConjunctiveQuery, q2: &ConjunctiveQuery) -> Result<bool> {
    Ok(contains(q1, q2)? && contains(q2, q1)?)
}

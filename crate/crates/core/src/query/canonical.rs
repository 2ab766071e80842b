//! Canonical forms: core computation followed by a deterministic labeling.
//!
//! The core is reached by repeatedly folding the query onto itself minus one
//! atom. The labeling names head variables `v0..vk` by head position and
//! existential variables in first-occurrence order along the
//! lexicographically least atom sequence, found by branching only on ties.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use super::homomorphism::{builtins_carried, normalized_set, AtomMatcher};
use super::{Atom, Builtin, BuiltinOp, ConjunctiveQuery, Substitution, Term, Value};

pub fn canonicalize(q: &ConjunctiveQuery) -> ConjunctiveQuery {
    let core = core_of(q);
    label(&core)
}

fn tidy(q: &ConjunctiveQuery) -> ConjunctiveQuery {
    let mut seen = BTreeSet::new();
    let body = q.body.iter().filter(|a| seen.insert(*a)).cloned().collect();
    let builtins: BTreeSet<Builtin> = q
        .builtins
        .iter()
        .filter(|b| b.eval_ground() != Some(true))
        .map(Builtin::normalized)
        .collect();
    ConjunctiveQuery {
        name: q.name.clone(),
        head: q.head.clone(),
        body,
        builtins: builtins.into_iter().collect(),
    }
}

fn core_of(q: &ConjunctiveQuery) -> ConjunctiveQuery {
    let mut current = tidy(q);
    'shrink: loop {
        let own_builtins = normalized_set(&current.builtins);
        let fixed_head: BTreeMap<String, Term> = current
            .head
            .iter()
            .map(|v| (v.clone(), Term::Var(v.clone())))
            .collect();
        for drop in 0..current.body.len() {
            let rest: Vec<Atom> = current
                .body
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != drop)
                .map(|(_, a)| a.clone())
                .collect();
            let matcher = AtomMatcher::new(&current.body, &rest);
            let mut found = None;
            matcher.for_each(fixed_head.clone(), &mut |binding| {
                if builtins_carried(binding, &current.builtins, &own_builtins) {
                    found = Some(binding.clone());
                    true
                } else {
                    false
                }
            });
            if let Some(binding) = found {
                let h: Substitution = binding.into_iter().collect();
                current = tidy(&h.apply_query_unchecked(&current));
                continue 'shrink;
            }
        }
        return current;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Label {
    Var(usize),
    Const(Value),
}

type LabeledAtom = (String, Vec<Label>);
type LabeledBuiltin = (BuiltinOp, Label, Label);

struct Best {
    atoms: Vec<LabeledAtom>,
    builtins: Vec<LabeledBuiltin>,
}

struct Labeler<'q> {
    query: &'q ConjunctiveQuery,
    best: Option<Best>,
}

fn render(atom: &Atom, naming: &BTreeMap<&str, usize>, next: usize) -> LabeledAtom {
    let mut provisional: Vec<&str> = Vec::new();
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Label::Const(c.clone()),
            Term::Var(v) => match naming.get(v.as_str()) {
                Some(&n) => Label::Var(n),
                None => {
                    let k = provisional.iter().position(|p| p == v).unwrap_or_else(|| {
                        provisional.push(v);
                        provisional.len() - 1
                    });
                    Label::Var(next + k)
                }
            },
        })
        .collect();
    (atom.predicate.clone(), args)
}

fn label_term(t: &Term, naming: &BTreeMap<&str, usize>) -> Label {
    match t {
        Term::Const(c) => Label::Const(c.clone()),
        Term::Var(v) => Label::Var(naming[v.as_str()]),
    }
}

fn label_builtin(b: &Builtin, naming: &BTreeMap<&str, usize>) -> LabeledBuiltin {
    let (lhs, rhs) = (label_term(&b.lhs, naming), label_term(&b.rhs, naming));
    match b.op {
        BuiltinOp::Gt => (BuiltinOp::Lt, rhs, lhs),
        BuiltinOp::Ge => (BuiltinOp::Le, rhs, lhs),
        BuiltinOp::Eq | BuiltinOp::Ne if rhs < lhs => (b.op, rhs, lhs),
        op => (op, lhs, rhs),
    }
}

impl<'q> Labeler<'q> {
    fn search(
        &mut self,
        remaining: &[usize],
        naming: &mut BTreeMap<&'q str, usize>,
        prefix: &mut Vec<LabeledAtom>,
    ) {
        let next = naming.len();
        if remaining.is_empty() {
            let mut builtins: Vec<LabeledBuiltin> = self
                .query
                .builtins
                .iter()
                .map(|b| label_builtin(b, naming))
                .collect();
            builtins.sort();
            builtins.dedup();
            let better = match &self.best {
                None => true,
                Some(best) => {
                    (prefix.as_slice(), &builtins) < (best.atoms.as_slice(), &best.builtins)
                }
            };
            if better {
                self.best = Some(Best {
                    atoms: prefix.clone(),
                    builtins,
                });
            }
            return;
        }

        let rendered: Vec<(usize, LabeledAtom)> = remaining
            .iter()
            .map(|&k| (k, render(&self.query.body[k], naming, next)))
            .collect();
        let least = rendered
            .iter()
            .map(|(_, r)| r)
            .min()
            .cloned()
            .expect("nonempty");

        if let Some(best) = &self.best {
            let depth = prefix.len();
            let ours = prefix.iter().chain(std::iter::once(&least));
            if ours.cmp(best.atoms[..=depth].iter()) == Ordering::Greater {
                return;
            }
        }

        for (k, r) in rendered.iter().filter(|(_, r)| *r == least) {
            let atom = &self.query.body[*k];
            let mut introduced = Vec::new();
            for v in atom.vars() {
                if !naming.contains_key(v) {
                    naming.insert(v, naming.len());
                    introduced.push(v);
                }
            }
            let rest: Vec<usize> = remaining.iter().copied().filter(|j| j != k).collect();
            prefix.push(r.clone());
            self.search(&rest, naming, prefix);
            prefix.pop();
            for v in introduced {
                naming.remove(v);
            }
        }
    }
}

fn label(q: &ConjunctiveQuery) -> ConjunctiveQuery {
    let mut naming: BTreeMap<&str, usize> = BTreeMap::new();
    for (k, v) in q.head.iter().enumerate() {
        naming.insert(v.as_str(), k);
    }
    let mut labeler = Labeler {
        query: q,
        best: None,
    };
    let all: Vec<usize> = (0..q.body.len()).collect();
    labeler.search(&all, &mut naming, &mut Vec::new());
    let best = labeler.best.expect("body is nonempty");

    let term = |l: Label| match l {
        Label::Var(n) => Term::Var(format!("v{n}")),
        Label::Const(c) => Term::Const(c),
    };
    ConjunctiveQuery {
        name: q.name.clone(),
        head: (0..q.head.len()).map(|n| format!("v{n}")).collect(),
        body: best
            .atoms
            .into_iter()
            .map(|(predicate, args)| Atom {
                predicate,
                args: args.into_iter().map(term).collect(),
            })
            .collect(),
        builtins: best
            .builtins
            .into_iter()
            .map(|(op, lhs, rhs)| Builtin {
                op,
                lhs: term(lhs),
                rhs: term(rhs),
            })
            .collect(),
    }
}

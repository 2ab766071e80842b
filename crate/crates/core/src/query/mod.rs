//! Conjunctive queries: syntax, substitutions, containment and canonical forms.

mod canonical;
pub(crate) mod homomorphism;
mod parse;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use canonical::canonicalize;
pub use homomorphism::{contains, equivalent, homomorphisms};
pub use parse::{parse_atom, parse_query};

/// A typed literal. Integers and strings never compare equal to each other.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn int(n: i64) -> Self {
        Term::Const(Value::Int(n))
    }

    pub fn str(s: impl Into<String>) -> Self {
        Term::Const(Value::Str(s.into()))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn as_const(&self) -> Option<&Value> {
        match self {
            Term::Var(_) => None,
            Term::Const(c) => Some(c),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => c.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| matches!(t, Term::Const(_)))
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }

    /// Ground tuple of this atom, if every argument is a constant.
    pub fn tuple(&self) -> Option<Vec<Value>> {
        self.args.iter().map(|t| t.as_const().cloned()).collect()
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (k, arg) in self.args.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            arg.fmt(f)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BuiltinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BuiltinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BuiltinOp::Eq => "=",
            BuiltinOp::Ne => "!=",
            BuiltinOp::Lt => "<",
            BuiltinOp::Le => "<=",
            BuiltinOp::Gt => ">",
            BuiltinOp::Ge => ">=",
        }
    }

    /// Integers compare numerically and strings lexicographically. Mixed
    /// types are never related, so only `!=` holds between them.
    pub fn holds(self, lhs: &Value, rhs: &Value) -> bool {
        let ord = match (lhs, rhs) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            _ => return self == BuiltinOp::Ne,
        };
        match self {
            BuiltinOp::Eq => ord == Ordering::Equal,
            BuiltinOp::Ne => ord != Ordering::Equal,
            BuiltinOp::Lt => ord == Ordering::Less,
            BuiltinOp::Le => ord != Ordering::Greater,
            BuiltinOp::Gt => ord == Ordering::Greater,
            BuiltinOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Builtin {
    pub op: BuiltinOp,
    pub lhs: Term,
    pub rhs: Term,
}

impl Builtin {
    pub fn new(lhs: Term, op: BuiltinOp, rhs: Term) -> Self {
        Builtin { op, lhs, rhs }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.lhs, &self.rhs].into_iter().filter_map(Term::as_var)
    }

    /// Truth value when both sides are constants.
    pub fn eval_ground(&self) -> Option<bool> {
        match (&self.lhs, &self.rhs) {
            (Term::Const(a), Term::Const(b)) => Some(self.op.holds(a, b)),
            _ => None,
        }
    }

    /// Orientation-free form: `>`/`>=` become `<`/`<=` with swapped sides,
    /// and the symmetric `=`/`!=` put the smaller term on the left.
    pub fn normalized(&self) -> Builtin {
        let (op, lhs, rhs) = match self.op {
            BuiltinOp::Gt => (BuiltinOp::Lt, &self.rhs, &self.lhs),
            BuiltinOp::Ge => (BuiltinOp::Le, &self.rhs, &self.lhs),
            BuiltinOp::Eq | BuiltinOp::Ne if self.rhs < self.lhs => (self.op, &self.rhs, &self.lhs),
            op => (op, &self.lhs, &self.rhs),
        };
        Builtin {
            op,
            lhs: lhs.clone(),
            rhs: rhs.clone(),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

/// `name(head) :- body, builtins`.
///
/// Head variables are distinct, every head variable and every built-in
/// variable occurs in some body atom, and the body is nonempty. An empty head
/// is a Boolean query.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConjunctiveQuery {
    pub name: String,
    pub head: Vec<String>,
    pub body: Vec<Atom>,
    pub builtins: Vec<Builtin>,
}

impl ConjunctiveQuery {
    pub fn new(
        name: impl Into<String>,
        head: Vec<String>,
        body: Vec<Atom>,
        builtins: Vec<Builtin>,
    ) -> Result<Self> {
        let q = ConjunctiveQuery {
            name: name.into(),
            head,
            body,
            builtins,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_query(text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for v in &self.head {
            if !seen.insert(v.as_str()) {
                return Err(Error::HeadCollapse(format!(
                    "variable `{v}` repeats in the head of `{}`",
                    self.name
                )));
            }
        }
        if self.body.is_empty() {
            return Err(Error::InvalidQuery(format!(
                "`{}` has an empty body",
                self.name
            )));
        }
        let bound = self.body_vars();
        if let Some(v) = self.head.iter().find(|v| !bound.contains(v.as_str())) {
            return Err(Error::InvalidQuery(format!(
                "head variable `{v}` of `{}` does not occur in the body",
                self.name
            )));
        }
        self.check_builtins_bound(&bound)
    }

    pub(crate) fn check_builtins_bound(&self, bound: &BTreeSet<&str>) -> Result<()> {
        for b in &self.builtins {
            if let Some(v) = b.vars().find(|v| !bound.contains(v)) {
                return Err(Error::UnsafeConstraint(format!(
                    "variable `{v}` in `{b}` is not bound by the body of `{}`",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.head.len()
    }

    pub fn body_vars(&self) -> BTreeSet<&str> {
        self.body.iter().flat_map(Atom::vars).collect()
    }

    /// Every variable in the query, in first-occurrence order (head first).
    pub fn vars(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let all = self
            .head
            .iter()
            .map(String::as_str)
            .chain(self.body.iter().flat_map(Atom::vars))
            .chain(self.builtins.iter().flat_map(Builtin::vars));
        for v in all {
            if seen.insert(v) {
                out.push(v);
            }
        }
        out
    }

    pub fn predicates(&self) -> BTreeSet<&str> {
        self.body.iter().map(|a| a.predicate.as_str()).collect()
    }

    pub fn head_terms(&self) -> Vec<Term> {
        self.head.iter().cloned().map(Term::Var).collect()
    }

    /// Same query with the given built-ins appended.
    pub fn with_builtins(&self, extra: impl IntoIterator<Item = Builtin>) -> Result<Self> {
        let mut q = self.clone();
        q.builtins.extend(extra);
        q.validate()?;
        Ok(q)
    }

    /// Alpha-renamed copy in which no variable name belongs to `avoid`.
    /// Clashing names get primes appended until unique.
    pub fn freshen(&self, avoid: &BTreeSet<String>) -> ConjunctiveQuery {
        let mut taken: BTreeSet<String> = avoid.clone();
        taken.extend(self.vars().into_iter().map(str::to_owned));
        let mut sub = Substitution::default();
        for v in self.vars() {
            if avoid.contains(v) {
                let mut fresh = format!("{v}'");
                while taken.contains(&fresh) {
                    fresh.push('\'');
                }
                taken.insert(fresh.clone());
                sub.insert(v, Term::Var(fresh));
            }
        }
        sub.apply_query_unchecked(self)
    }
}

/// Free function form of [`ConjunctiveQuery::freshen`].
pub fn freshen(q: &ConjunctiveQuery, avoid: &BTreeSet<String>) -> ConjunctiveQuery {
    q.freshen(avoid)
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) :- ", self.name, self.head.join(","))?;
        let mut first = true;
        for a in &self.body {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            a.fmt(f)?;
        }
        for b in &self.builtins {
            write!(f, ", {b}")?;
        }
        Ok(())
    }
}

impl Serialize for ConjunctiveQuery {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConjunctiveQuery {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_query(&text).map_err(serde::de::Error::custom)
    }
}

/// Finite map from variable names to terms, applied simultaneously.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution {
    map: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, var: impl Into<String>, term: Term) -> Option<Term> {
        self.map.insert(var.into(), term)
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.map.get(var)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        }
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(|t| self.apply_term(t)).collect(),
        }
    }

    pub fn apply_builtin(&self, b: &Builtin) -> Builtin {
        Builtin {
            op: b.op,
            lhs: self.apply_term(&b.lhs),
            rhs: self.apply_term(&b.rhs),
        }
    }

    /// Applies to head, body and built-ins. Fails with a head collapse when
    /// two head variables become identical or a head variable becomes a
    /// constant.
    pub fn apply_query(&self, q: &ConjunctiveQuery) -> Result<ConjunctiveQuery> {
        let mut head = Vec::with_capacity(q.head.len());
        for v in &q.head {
            match self.apply_term(&Term::Var(v.clone())) {
                Term::Var(w) => head.push(w),
                Term::Const(c) => {
                    return Err(Error::HeadCollapse(format!(
                        "head variable `{v}` of `{}` bound to constant {c}",
                        q.name
                    )))
                }
            }
        }
        let out = ConjunctiveQuery {
            name: q.name.clone(),
            head,
            body: q.body.iter().map(|a| self.apply_atom(a)).collect(),
            builtins: q.builtins.iter().map(|b| self.apply_builtin(b)).collect(),
        };
        out.validate()?;
        Ok(out)
    }

    /// Renaming-only application; callers guarantee injectivity on the head.
    pub(crate) fn apply_query_unchecked(&self, q: &ConjunctiveQuery) -> ConjunctiveQuery {
        ConjunctiveQuery {
            name: q.name.clone(),
            head: q
                .head
                .iter()
                .map(|v| match self.map.get(v) {
                    Some(Term::Var(w)) => w.clone(),
                    _ => v.clone(),
                })
                .collect(),
            body: q.body.iter().map(|a| self.apply_atom(a)).collect(),
            builtins: q.builtins.iter().map(|b| self.apply_builtin(b)).collect(),
        }
    }
}

impl FromIterator<(String, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Substitution {
            map: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (v, t)) in self.map.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}->{t}")?;
        }
        f.write_str("}")
    }
}

//! Test kit shared by the integration suites: seeded generators for queries,
//! fact sets and networks, plus brute-force oracles that do not reuse the
//! library's search code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use p2pq::network::{
    MappingDocument, NetworkDocument, PeerDocument, RelationDocument, ViewDocument,
};
use p2pq::query::parse_query;
use p2pq::{Atom, Builtin, BuiltinOp, ConjunctiveQuery, Network, Peer, Term, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(text: &str) -> ConjunctiveQuery {
    parse_query(text).unwrap_or_else(|e| panic!("{text}: {e}"))
}

pub fn fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

// ---------------------------------------------------------------------------
// Brute-force containment
// ---------------------------------------------------------------------------

fn oracle_compare(op: BuiltinOp, a: &Value, b: &Value) -> bool {
    use std::cmp::Ordering::*;
    let ord = match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        _ => return op == BuiltinOp::Ne,
    };
    match op {
        BuiltinOp::Eq => ord == Equal,
        BuiltinOp::Ne => ord != Equal,
        BuiltinOp::Lt => ord == Less,
        BuiltinOp::Le => ord != Greater,
        BuiltinOp::Gt => ord == Greater,
        BuiltinOp::Ge => ord != Less,
    }
}

/// Orientation-free key of a built-in, written independently of the library.
fn oracle_key(op: BuiltinOp, l: &Term, r: &Term) -> (BuiltinOp, Term, Term) {
    match op {
        BuiltinOp::Gt => (BuiltinOp::Lt, r.clone(), l.clone()),
        BuiltinOp::Ge => (BuiltinOp::Le, r.clone(), l.clone()),
        BuiltinOp::Eq | BuiltinOp::Ne if r < l => (op, r.clone(), l.clone()),
        _ => (op, l.clone(), r.clone()),
    }
}

/// Enumerates every map from the variables of `general` into the terms of
/// `specific` and checks the containment conditions directly.
pub fn brute_contains(general: &ConjunctiveQuery, specific: &ConjunctiveQuery) -> bool {
    assert_eq!(general.head.len(), specific.head.len());
    let mut vars: Vec<String> = Vec::new();
    for a in &general.body {
        for t in &a.args {
            if let Term::Var(v) = t {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
    }
    let mut image_pool: Vec<Term> = Vec::new();
    for a in &specific.body {
        for t in &a.args {
            if !image_pool.contains(t) {
                image_pool.push(t.clone());
            }
        }
    }
    let target_atoms: BTreeSet<&Atom> = specific.body.iter().collect();
    let target_builtins: BTreeSet<(BuiltinOp, Term, Term)> = specific
        .builtins
        .iter()
        .map(|b| oracle_key(b.op, &b.lhs, &b.rhs))
        .collect();

    let n = vars.len();
    let m = image_pool.len();
    let total = m.pow(n as u32);
    'assignments: for code in 0..total {
        let mut c = code;
        let mut map: BTreeMap<&str, &Term> = BTreeMap::new();
        for v in &vars {
            map.insert(v, &image_pool[c % m]);
            c /= m;
        }
        let img = |t: &Term| -> Term {
            match t {
                Term::Var(v) => map[v.as_str()].clone(),
                Term::Const(_) => t.clone(),
            }
        };
        for (g, s) in general.head.iter().zip(&specific.head) {
            if img(&Term::Var(g.clone())) != Term::Var(s.clone()) {
                continue 'assignments;
            }
        }
        for a in &general.body {
            let image = Atom::new(a.predicate.clone(), a.args.iter().map(img).collect());
            if !target_atoms.contains(&image) {
                continue 'assignments;
            }
        }
        for b in &general.builtins {
            let (l, r) = (img(&b.lhs), img(&b.rhs));
            let ok = match (&l, &r) {
                (Term::Const(x), Term::Const(y)) if oracle_compare(b.op, x, y) => true,
                _ => target_builtins.contains(&oracle_key(b.op, &l, &r)),
            };
            if !ok {
                continue 'assignments;
            }
        }
        return true;
    }
    false
}

// ---------------------------------------------------------------------------
// Brute-force evaluation
// ---------------------------------------------------------------------------

/// Tries every assignment of the body variables into the active domain.
pub fn brute_evaluate(query: &ConjunctiveQuery, peer: &Peer) -> BTreeSet<Vec<Value>> {
    let mut domain: Vec<Value> = Vec::new();
    let consts = peer
        .facts
        .iter()
        .flat_map(|f| f.args.iter())
        .chain(query.body.iter().flat_map(|a| a.args.iter()))
        .chain(query.builtins.iter().flat_map(|b| [&b.lhs, &b.rhs]));
    for t in consts {
        if let Term::Const(c) = t {
            if !domain.contains(c) {
                domain.push(c.clone());
            }
        }
    }
    let vars: Vec<&str> = {
        let mut v: Vec<&str> = query.body.iter().flat_map(|a| a.vars()).collect();
        v.sort();
        v.dedup();
        v
    };
    let mut out = BTreeSet::new();
    if domain.is_empty() && !vars.is_empty() {
        return out;
    }
    let total = domain.len().pow(vars.len() as u32);
    'assignments: for code in 0..total {
        let mut c = code;
        let mut g: BTreeMap<&str, &Value> = BTreeMap::new();
        for v in &vars {
            g.insert(v, &domain[c % domain.len()]);
            c /= domain.len();
        }
        let val = |t: &Term| -> Value {
            match t {
                Term::Var(v) => g[v.as_str()].clone(),
                Term::Const(c) => c.clone(),
            }
        };
        for a in &query.body {
            let ground = Atom::new(
                a.predicate.clone(),
                a.args.iter().map(|t| Term::Const(val(t))).collect(),
            );
            if !peer.facts.contains(&ground) {
                continue 'assignments;
            }
        }
        for b in &query.builtins {
            if !oracle_compare(b.op, &val(&b.lhs), &val(&b.rhs)) {
                continue 'assignments;
            }
        }
        out.insert(query.head.iter().map(|v| g[v.as_str()].clone()).collect());
    }
    out
}

// ---------------------------------------------------------------------------
// Random queries
// ---------------------------------------------------------------------------

pub const SMALL_SCHEMA: &[(&str, usize)] = &[("A", 2), ("B", 1), ("C", 2)];
const VAR_POOL: &[&str] = &["x", "y", "z", "u", "w"];

fn random_term(rng: &mut TestRng, vars: &[&str], const_prob: f64) -> Term {
    if rng.gen_bool(const_prob) {
        Term::int(rng.gen_range(0..3))
    } else {
        Term::var(*vars.choose(rng).unwrap())
    }
}

fn random_builtin(rng: &mut TestRng, vars: &[String]) -> Builtin {
    let ops = [
        BuiltinOp::Eq,
        BuiltinOp::Ne,
        BuiltinOp::Lt,
        BuiltinOp::Le,
        BuiltinOp::Gt,
        BuiltinOp::Ge,
    ];
    let op = *ops.choose(rng).unwrap();
    let lhs = Term::var(vars.choose(rng).unwrap().clone());
    let rhs = if vars.len() > 1 && rng.gen_bool(0.5) {
        Term::var(vars.choose(rng).unwrap().clone())
    } else {
        Term::int(rng.gen_range(0..3))
    };
    Builtin::new(lhs, op, rhs)
}

/// A random safe query with `1..=max_atoms` atoms over `schema`, variables
/// drawn from the first `max_vars` of a fixed pool.
pub fn random_query(
    rng: &mut TestRng,
    schema: &[(&str, usize)],
    max_atoms: usize,
    max_vars: usize,
    head_arity: usize,
    builtin_prob: f64,
) -> ConjunctiveQuery {
    let pool = &VAR_POOL[..max_vars.min(VAR_POOL.len())];
    loop {
        let n = rng.gen_range(1..=max_atoms);
        let body: Vec<Atom> = (0..n)
            .map(|_| {
                let (p, arity) = *schema.choose(rng).unwrap();
                Atom::new(p, (0..arity).map(|_| random_term(rng, pool, 0.1)).collect())
            })
            .collect();
        let mut body_vars: Vec<String> = body
            .iter()
            .flat_map(|a| a.vars().map(str::to_owned))
            .collect();
        body_vars.sort();
        body_vars.dedup();
        if body_vars.len() < head_arity {
            continue;
        }
        body_vars.shuffle(rng);
        let head: Vec<String> = body_vars[..head_arity].to_vec();
        let mut builtins = Vec::new();
        if !body_vars.is_empty() && rng.gen_bool(builtin_prob) {
            builtins.push(random_builtin(rng, &body_vars));
        }
        if let Ok(q) = ConjunctiveQuery::new("q", head, body, builtins) {
            return q;
        }
    }
}

/// A query contained in `general` by construction: the image of `general`
/// under a random head-preserving variable map, plus optional extra atoms.
pub fn random_specialization(
    rng: &mut TestRng,
    general: &ConjunctiveQuery,
    schema: &[(&str, usize)],
) -> ConjunctiveQuery {
    let vars = general.vars();
    let mut map: BTreeMap<&str, Term> = BTreeMap::new();
    for v in &vars {
        if general.head.iter().any(|h| h == v) {
            map.insert(v, Term::var(*v));
        } else if rng.gen_bool(0.5) {
            map.insert(v, Term::var(*vars.choose(rng).unwrap()));
        } else {
            map.insert(v, Term::var(*v));
        }
    }
    let img = |t: &Term| match t {
        Term::Var(v) => map[v.as_str()].clone(),
        c => c.clone(),
    };
    let mut body: Vec<Atom> = general
        .body
        .iter()
        .map(|a| Atom::new(a.predicate.clone(), a.args.iter().map(img).collect()))
        .collect();
    let builtins: Vec<Builtin> = general
        .builtins
        .iter()
        .map(|b| Builtin::new(img(&b.lhs), b.op, img(&b.rhs)))
        .collect();
    let pool: Vec<&str> = body.iter().flat_map(|a| a.vars()).collect::<Vec<_>>();
    let pool: Vec<String> = pool.into_iter().map(str::to_owned).collect();
    if rng.gen_bool(0.5) && !pool.is_empty() {
        let (p, arity) = *schema.choose(rng).unwrap();
        body.push(Atom::new(
            p,
            (0..arity)
                .map(|_| Term::var(pool.choose(rng).unwrap().clone()))
                .collect(),
        ));
    }
    ConjunctiveQuery {
        name: general.name.clone(),
        head: general.head.clone(),
        body,
        builtins,
    }
}

/// A random peer over `SMALL_SCHEMA` with up to `max_facts` facts on values
/// `0..4`.
pub fn random_peer(rng: &mut TestRng, max_facts: usize) -> Peer {
    let n = rng.gen_range(0..=max_facts);
    let facts = (0..n)
        .map(|_| {
            let (p, arity) = *SMALL_SCHEMA.choose(rng).unwrap();
            Atom::new(
                p,
                (0..arity).map(|_| Term::int(rng.gen_range(0..4))).collect(),
            )
        })
        .collect();
    Peer {
        id: "P".into(),
        schema: SMALL_SCHEMA
            .iter()
            .map(|&(name, arity)| p2pq::network::RelationSignature {
                name: name.into(),
                arity,
            })
            .collect(),
        views: Vec::new(),
        facts,
    }
}

// ---------------------------------------------------------------------------
// Random networks
// ---------------------------------------------------------------------------

const GLOBAL_RELATIONS: &[(&str, usize)] = &[("A", 2), ("B", 1), ("C", 2), ("D", 1)];

#[derive(Debug, Clone)]
struct Template {
    head: Vec<String>,
    body: Vec<(usize, Vec<String>)>,
}

fn random_template(rng: &mut TestRng, relations: &[usize]) -> Template {
    let vars = ["x", "y", "z"];
    let n = rng.gen_range(1..=2);
    let body: Vec<(usize, Vec<String>)> = (0..n)
        .map(|_| {
            let g = *relations.choose(rng).unwrap();
            let arity = GLOBAL_RELATIONS[g].1;
            (
                g,
                (0..arity)
                    .map(|_| vars.choose(rng).unwrap().to_string())
                    .collect(),
            )
        })
        .collect();
    let mut bv: Vec<String> = body.iter().flat_map(|(_, a)| a.clone()).collect();
    bv.sort();
    bv.dedup();
    let arity = rng.gen_range(1..=2.min(bv.len()));
    bv.shuffle(rng);
    let mut head = bv[..arity].to_vec();
    head.sort();
    Template { head, body }
}

fn render_template(name: &str, t: &Template, peer: usize) -> String {
    let atoms: Vec<String> = t
        .body
        .iter()
        .map(|(g, args)| format!("{}{peer}({})", GLOBAL_RELATIONS[*g].0, args.join(",")))
        .collect();
    format!("{name}({}) :- {}", t.head.join(","), atoms.join(", "))
}

#[derive(Debug, Clone)]
struct GenView {
    name: String,
    template: Option<usize>,
    atoms: usize,
    arity: usize,
}

/// Network generation knobs.
#[derive(Debug, Clone, Copy)]
pub struct NetworkShape {
    pub min_peers: usize,
    pub max_peers: usize,
    pub max_views: usize,
    pub max_group: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            min_peers: 2,
            max_peers: 5,
            max_views: 4,
            max_group: 3,
        }
    }
}

/// A generated instance: network, origin peer and user query.
#[derive(Debug, Clone)]
pub struct Instance {
    pub net: Network,
    pub origin: String,
    pub query: ConjunctiveQuery,
}

/// Random network: peers hold renamed copies of shared relations, views
/// are drawn from shared templates (so mapped pairs are often isomorphic)
/// or are single-atom local views, and interface groups of 1..=max_group
/// pairs connect random peer pairs, cycles included. Peers carry random
/// facts.
pub fn random_network(rng: &mut TestRng, shape: NetworkShape) -> Network {
    let n = rng.gen_range(shape.min_peers..=shape.max_peers);
    let all: Vec<usize> = (0..GLOBAL_RELATIONS.len()).collect();
    let templates: Vec<Template> = (0..rng.gen_range(3..=6))
        .map(|_| random_template(rng, &all))
        .collect();

    let mut peers = Vec::new();
    let mut gen_views: Vec<Vec<GenView>> = Vec::new();
    for k in 0..n {
        let mut has: Vec<usize> = all.iter().copied().filter(|_| rng.gen_bool(0.8)).collect();
        if has.is_empty() {
            has.push(rng.gen_range(0..all.len()));
        }
        let schema: Vec<RelationDocument> = has
            .iter()
            .map(|&g| RelationDocument {
                name: format!("{}{k}", GLOBAL_RELATIONS[g].0),
                arity: GLOBAL_RELATIONS[g].1,
            })
            .collect();
        let mut views = Vec::new();
        let mut meta = Vec::new();
        for m in 0..rng.gen_range(1..=shape.max_views) {
            let name = format!("v{k}x{m}");
            let usable: Vec<usize> = (0..templates.len())
                .filter(|&t| templates[t].body.iter().all(|(g, _)| has.contains(g)))
                .collect();
            let (template, tpl) = if !usable.is_empty() && rng.gen_bool(0.75) {
                let t = *usable.choose(rng).unwrap();
                (Some(t), templates[t].clone())
            } else {
                (None, random_template(rng, &has))
            };
            let local = if template.is_none() {
                // local views are single-atom
                Template {
                    body: vec![tpl.body[0].clone()],
                    head: {
                        let mut h: Vec<String> = tpl.body[0].1.clone();
                        h.sort();
                        h.dedup();
                        h.truncate(rng.gen_range(1..=h.len()));
                        h
                    },
                }
            } else {
                tpl
            };
            views.push(ViewDocument {
                name: name.clone(),
                def: render_template(&name, &local, k),
            });
            meta.push(GenView {
                name,
                template,
                atoms: local.body.len(),
                arity: local.head.len(),
            });
        }
        let facts: Vec<String> = (0..rng.gen_range(0..=8))
            .map(|_| {
                let g = *has.choose(rng).unwrap();
                let (r, arity) = GLOBAL_RELATIONS[g];
                let args: Vec<String> = (0..arity)
                    .map(|_| rng.gen_range(0..4).to_string())
                    .collect();
                format!("{r}{k}({})", args.join(","))
            })
            .collect();
        peers.push(PeerDocument {
            id: format!("P{k}"),
            schema,
            views,
            facts,
        });
        gen_views.push(meta);
    }

    let mut mappings = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n));
        for j in 0..n {
            if i != j && j != (i + 1) % n && rng.gen_bool(0.3) {
                edges.push((i, j));
            }
        }
    }
    if rng.gen_bool(0.5) {
        // break the ring sometimes so acyclic shapes appear too
        let k = rng.gen_range(0..n);
        edges.retain(|&(a, b)| !(a == k && b == (k + 1) % n));
    }
    edges.shuffle(rng);
    for (i, j) in edges {
        let mut candidates: Vec<(&GenView, &GenView)> = Vec::new();
        for a in &gen_views[i] {
            for b in &gen_views[j] {
                let coherent = a.template.is_some() && a.template == b.template;
                let simple = a.atoms == 1 && b.atoms == 1 && a.arity == b.arity;
                if coherent || simple {
                    candidates.push((a, b));
                }
            }
        }
        candidates.shuffle(rng);
        let size = rng.gen_range(1..=shape.max_group);
        let mut used = BTreeSet::new();
        for (a, b) in candidates {
            if used.len() >= size {
                break;
            }
            if used.insert(a.name.clone()) {
                mappings.push(MappingDocument {
                    from_peer: format!("P{i}"),
                    from_view: a.name.clone(),
                    to_peer: format!("P{j}"),
                    to_view: b.name.clone(),
                });
            }
        }
    }
    Network::from_document(&NetworkDocument { peers, mappings })
        .expect("generated network is valid")
}

/// A user query at `origin`: usually the unfolding of one or two mapped
/// views (so rewriting has something to do), otherwise a random query over
/// the origin's schema. At most three atoms.
pub fn random_user_query(rng: &mut TestRng, net: &Network, origin: &str) -> ConjunctiveQuery {
    let peer = net.peer(origin).unwrap();
    let mapped: Vec<&p2pq::ViewDefinition> = net
        .interfaces
        .iter()
        .filter(|g| g.from == origin)
        .flat_map(|g| g.pairs.iter().filter_map(|p| peer.view(&p.from_view)))
        .collect();
    let schema: Vec<(&str, usize)> = peer
        .schema
        .iter()
        .map(|r| (r.name.as_str(), r.arity))
        .collect();
    for _ in 0..20 {
        if !mapped.is_empty() && rng.gen_bool(0.7) {
            let pool = ["x", "y", "z"];
            let k = rng.gen_range(1..=2);
            let mut body = Vec::new();
            let mut visible: Vec<String> = Vec::new();
            for inst in 0..k {
                let v = *mapped.choose(rng).unwrap();
                let args: Vec<Term> = (0..v.arity())
                    .map(|_| Term::var(*pool.choose(rng).unwrap()))
                    .collect();
                let sub: p2pq::Substitution = v
                    .definition
                    .head
                    .iter()
                    .cloned()
                    .zip(args.iter().cloned())
                    .collect();
                for a in &v.definition.body {
                    let mut atom = sub.apply_atom(a);
                    for t in atom.args.iter_mut() {
                        if let Term::Var(name) = t {
                            if !v.definition.head.contains(name) {
                                *name = format!("e{inst}{name}");
                            }
                        }
                    }
                    body.push(atom);
                }
                visible.extend(args.iter().filter_map(|t| t.as_var().map(str::to_owned)));
            }
            visible.sort();
            visible.dedup();
            if body.len() > 3 || visible.is_empty() {
                continue;
            }
            visible.shuffle(rng);
            let arity = rng.gen_range(1..=visible.len().min(2));
            let head: Vec<String> = visible[..arity].to_vec();
            let mut builtins = Vec::new();
            if rng.gen_bool(0.15) {
                builtins.push(Builtin::new(
                    Term::var(head[0].clone()),
                    BuiltinOp::Ge,
                    Term::int(rng.gen_range(0..3)),
                ));
            }
            if let Ok(q) = ConjunctiveQuery::new("q", head, body, builtins) {
                return q;
            }
        } else {
            let arity = rng.gen_range(1..=2);
            return random_query(rng, &schema, 3, 3, arity, 0.1);
        }
    }
    random_query(rng, &schema, 1, 2, 1, 0.0)
}

pub fn random_instance(rng: &mut TestRng, shape: NetworkShape) -> Instance {
    let net = random_network(rng, shape);
    let origin = net.peers.choose(rng).unwrap().id.clone();
    let query = random_user_query(rng, &net, &origin);
    Instance { net, origin, query }
}

//! Peers, their schemas, views and facts, and the declared view mappings
//! between them.
//!
//! Networks are loaded from a JSON document:
//!
//! ```json
//! {"peers":[{"id":"P1","schema":[{"name":"A","arity":2}],
//!            "views":[{"name":"v1","def":"v1(x,y) :- A(x,y)"}],
//!            "facts":["A(1,2)"]}],
//!  "mappings":[{"from_peer":"P1","from_view":"v1","to_peer":"P2","to_view":"w1"}]}
//! ```

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{parse_atom, parse_query, Atom, ConjunctiveQuery};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSignature {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewDefinition {
    pub name: String,
    pub definition: ConjunctiveQuery,
}

impl ViewDefinition {
    pub fn arity(&self) -> usize {
        self.definition.arity()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Peer {
    pub id: String,
    pub schema: Vec<RelationSignature>,
    pub views: Vec<ViewDefinition>,
    pub facts: BTreeSet<Atom>,
}

impl Peer {
    pub fn relation(&self, name: &str) -> Option<&RelationSignature> {
        self.schema.iter().find(|r| r.name == name)
    }

    pub fn view(&self, name: &str) -> Option<&ViewDefinition> {
        self.views.iter().find(|v| v.name == name)
    }

    /// Checks that every body atom names a relation of this peer's schema
    /// with the declared arity.
    pub fn check_query(&self, q: &ConjunctiveQuery) -> Result<()> {
        for atom in &q.body {
            match self.relation(&atom.predicate) {
                Some(r) if r.arity == atom.arity() => {}
                Some(r) => {
                    return Err(Error::SchemaMismatch(format!(
                        "`{atom}` in `{}` has arity {}, relation `{}` of peer `{}` has arity {}",
                        q.name,
                        atom.arity(),
                        r.name,
                        self.id,
                        r.arity
                    )))
                }
                None => {
                    return Err(Error::SchemaMismatch(format!(
                        "relation `{}` used by `{}` is not in the schema of peer `{}`",
                        atom.predicate, q.name, self.id
                    )))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MappingPair {
    pub from_view: String,
    pub to_view: String,
}

/// The declared group of mapping pairs from one peer toward another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interface {
    pub from: String,
    pub to: String,
    pub pairs: Vec<MappingPair>,
}

impl Interface {
    pub fn target_of(&self, from_view: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|p| p.from_view == from_view)
            .map(|p| p.to_view.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    pub peers: Vec<Peer>,
    /// Groups in order of first declaration.
    pub interfaces: Vec<Interface>,
}

/// Reflexive-transitive closure of the neighbor relation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Accessibility {
    pub edges: BTreeSet<(String, String)>,
}

impl Accessibility {
    pub fn reaches(&self, from: &str, to: &str) -> bool {
        self.edges.contains(&(from.to_owned(), to.to_owned()))
    }

    /// Closes the relation again; a no-op on any closure.
    pub fn reclose(&self) -> Accessibility {
        let nodes: BTreeSet<&String> = self.edges.iter().flat_map(|(a, b)| [a, b]).collect();
        let mut edges = self.edges.clone();
        for n in &nodes {
            edges.insert(((*n).clone(), (*n).clone()));
        }
        loop {
            let mut added = Vec::new();
            for (a, b) in &edges {
                for (c, d) in edges.range((b.clone(), String::new())..) {
                    if c != b {
                        break;
                    }
                    if !edges.contains(&(a.clone(), d.clone())) {
                        added.push((a.clone(), d.clone()));
                    }
                }
            }
            if added.is_empty() {
                return Accessibility { edges };
            }
            edges.extend(added);
        }
    }
}

impl Network {
    pub fn peer(&self, id: &str) -> Result<&Peer> {
        self.peers
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::UnknownPeer(id.to_owned()))
    }

    pub fn interface(&self, from: &str, to: &str) -> Option<&Interface> {
        self.interfaces
            .iter()
            .find(|g| g.from == from && g.to == to)
    }

    /// Peers `j` with a nonempty group from `i`, in declaration order.
    pub fn neighbors(&self, i: &str) -> Result<Vec<&str>> {
        self.peer(i)?;
        Ok(self
            .interfaces
            .iter()
            .filter(|g| g.from == i && !g.pairs.is_empty())
            .map(|g| g.to.as_str())
            .collect())
    }

    pub fn accessibility(&self) -> Accessibility {
        let mut edges = BTreeSet::new();
        for start in &self.peers {
            let mut seen: BTreeSet<&str> = BTreeSet::new();
            let mut queue = VecDeque::from([start.id.as_str()]);
            while let Some(p) = queue.pop_front() {
                if !seen.insert(p) {
                    continue;
                }
                edges.insert((start.id.clone(), p.to_owned()));
                for n in self.neighbors(p).unwrap_or_default() {
                    queue.push_back(n);
                }
            }
        }
        Accessibility { edges }
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            peers: self
                .peers
                .iter()
                .map(|p| PeerDocument {
                    id: p.id.clone(),
                    schema: p
                        .schema
                        .iter()
                        .map(|r| RelationDocument {
                            name: r.name.clone(),
                            arity: r.arity,
                        })
                        .collect(),
                    views: p
                        .views
                        .iter()
                        .map(|v| ViewDocument {
                            name: v.name.clone(),
                            def: v.definition.to_string(),
                        })
                        .collect(),
                    facts: p.facts.iter().map(Atom::to_string).collect(),
                })
                .collect(),
            mappings: self
                .interfaces
                .iter()
                .flat_map(|g| {
                    g.pairs.iter().map(|pair| MappingDocument {
                        from_peer: g.from.clone(),
                        from_view: pair.from_view.clone(),
                        to_peer: g.to.clone(),
                        to_view: pair.to_view.clone(),
                    })
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }
}

pub fn neighbors<'n>(net: &'n Network, i: &str) -> Result<Vec<&'n str>> {
    net.neighbors(i)
}

pub fn accessibility(net: &Network) -> Accessibility {
    net.accessibility()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub peers: Vec<PeerDocument>,
    #[serde(default)]
    pub mappings: Vec<MappingDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerDocument {
    pub id: String,
    pub schema: Vec<RelationDocument>,
    #[serde(default)]
    pub views: Vec<ViewDocument>,
    #[serde(default)]
    pub facts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationDocument {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewDocument {
    pub name: String,
    pub def: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingDocument {
    pub from_peer: String,
    pub from_view: String,
    pub to_peer: String,
    pub to_view: String,
}

/// Parses and validates a network document.
pub fn load_network(source: &str) -> Result<Network> {
    let doc: NetworkDocument = serde_json::from_str(source).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Network::from_document(&doc)
}

fn located(context: String) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Parse {
            line,
            column,
            message,
        } => Error::Parse {
            line,
            column,
            message: format!("{context}: {message}"),
        },
        other => Error::Validation(format!("{context}: {other}")),
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Network {
    pub fn from_document(doc: &NetworkDocument) -> Result<Network> {
        let mut peers = Vec::with_capacity(doc.peers.len());
        let mut ids = BTreeSet::new();
        for pd in &doc.peers {
            if !is_identifier(&pd.id) {
                return Err(Error::Validation(format!(
                    "peer id `{}` is not an identifier",
                    pd.id
                )));
            }
            if !ids.insert(pd.id.as_str()) {
                return Err(Error::Validation(format!("duplicate peer id `{}`", pd.id)));
            }
            peers.push(load_peer(pd)?);
        }
        let net = Network {
            peers,
            interfaces: Vec::new(),
        };
        let mut interfaces: Vec<Interface> = Vec::new();
        for (k, m) in doc.mappings.iter().enumerate() {
            let label = format!(
                "mapping #{k} ({}.{} -> {}.{})",
                m.from_peer, m.from_view, m.to_peer, m.to_view
            );
            let from = net.peer(&m.from_peer).map_err(located(label.clone()))?;
            let to = net.peer(&m.to_peer).map_err(located(label.clone()))?;
            if from.id == to.id {
                return Err(Error::Validation(format!(
                    "{label}: mappings from a peer to itself are not allowed"
                )));
            }
            let fv = from.view(&m.from_view).ok_or_else(|| {
                Error::Validation(format!(
                    "{label}: unknown view `{}` of peer `{}`",
                    m.from_view, from.id
                ))
            })?;
            let tv = to.view(&m.to_view).ok_or_else(|| {
                Error::Validation(format!(
                    "{label}: unknown view `{}` of peer `{}`",
                    m.to_view, to.id
                ))
            })?;
            if fv.arity() != tv.arity() {
                return Err(Error::MalformedMapping(format!(
                    "{label}: view arities differ ({} vs {})",
                    fv.arity(),
                    tv.arity()
                )));
            }
            let pair = MappingPair {
                from_view: m.from_view.clone(),
                to_view: m.to_view.clone(),
            };
            let group = match interfaces
                .iter_mut()
                .position(|g| g.from == from.id && g.to == to.id)
            {
                Some(pos) => &mut interfaces[pos],
                None => {
                    interfaces.push(Interface {
                        from: from.id.clone(),
                        to: to.id.clone(),
                        pairs: Vec::new(),
                    });
                    interfaces.last_mut().expect("just pushed")
                }
            };
            if group.pairs.contains(&pair) {
                return Err(Error::Validation(format!("{label}: duplicate mapping")));
            }
            if let Some(other) = group.target_of(&pair.from_view) {
                return Err(Error::Validation(format!(
                    "{label}: view `{}` is already mapped to `{other}` in this group",
                    pair.from_view
                )));
            }
            group.pairs.push(pair);
        }
        Ok(Network { interfaces, ..net })
    }
}

fn load_peer(pd: &PeerDocument) -> Result<Peer> {
    let mut schema: Vec<RelationSignature> = Vec::new();
    for r in &pd.schema {
        if !is_identifier(&r.name) {
            return Err(Error::Validation(format!(
                "peer `{}`: relation name `{}` is not an identifier",
                pd.id, r.name
            )));
        }
        if r.arity == 0 {
            return Err(Error::Validation(format!(
                "peer `{}`: relation `{}` must have positive arity",
                pd.id, r.name
            )));
        }
        if schema.iter().any(|s| s.name == r.name) {
            return Err(Error::Validation(format!(
                "peer `{}`: duplicate relation `{}`",
                pd.id, r.name
            )));
        }
        schema.push(RelationSignature {
            name: r.name.clone(),
            arity: r.arity,
        });
    }
    let mut peer = Peer {
        id: pd.id.clone(),
        schema,
        views: Vec::new(),
        facts: BTreeSet::new(),
    };

    for vd in &pd.views {
        let context = format!("peer `{}`, view `{}`", pd.id, vd.name);
        if peer.view(&vd.name).is_some() {
            return Err(Error::Validation(format!("{context}: duplicate view name")));
        }
        if peer.relation(&vd.name).is_some() {
            return Err(Error::Validation(format!(
                "{context}: view name clashes with a relation"
            )));
        }
        let definition = parse_query(&vd.def).map_err(located(context.clone()))?;
        if definition.name != vd.name {
            return Err(Error::Validation(format!(
                "{context}: definition is named `{}`",
                definition.name
            )));
        }
        if !definition.builtins.is_empty() {
            return Err(Error::Validation(format!(
                "{context}: view definitions may not contain built-ins"
            )));
        }
        peer.check_query(&definition)
            .map_err(located(context.clone()))?;
        peer.views.push(ViewDefinition {
            name: vd.name.clone(),
            definition,
        });
    }

    for (k, text) in pd.facts.iter().enumerate() {
        let context = format!("peer `{}`, fact #{k}", pd.id);
        let atom = parse_atom(text).map_err(located(context.clone()))?;
        if !atom.is_ground() {
            return Err(Error::Validation(format!(
                "{context}: `{atom}` is not ground"
            )));
        }
        match peer.relation(&atom.predicate) {
            Some(r) if r.arity == atom.arity() => {}
            _ => {
                return Err(Error::Validation(format!(
                    "{context}: `{atom}` does not match the schema"
                )))
            }
        }
        peer.facts.insert(atom);
    }
    Ok(peer)
}

/// Convenience: peers in declaration order keyed by id.
pub fn peer_index(net: &Network) -> BTreeMap<&str, usize> {
    net.peers
        .iter()
        .enumerate()
        .map(|(k, p)| (p.id.as_str(), k))
        .collect()
}

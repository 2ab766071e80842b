//! Query answering for peer-to-peer databases connected by intensional
//! view mappings.
//!
//! A [`Network`] of peers exposes views over local schemas; pairs of views on
//! different peers are declared equivalent. A user query posed at one peer is
//! rewritten across those declared pairs by [`rewriting::rew`], the
//! [`agent`] drives the rewriting to a fixpoint, and [`answers`] evaluates
//! every derived query on its own peer and unions the known answers.
//! [`oracle`] recomputes the same closure by an independent memoized
//! breadth-first search and certifies the agent against it.

pub mod agent;
pub mod answers;
pub mod error;
pub mod network;
pub mod oracle;
pub mod query;
pub mod rewriting;

pub use agent::{run, AgentOptions, AgentResult, AgentState};
pub use answers::{answer, evaluate, AnswerReport, TupleSet};
pub use error::{Error, Result};
pub use network::{load_network, MappingPair, Network, Peer, ViewDefinition};
pub use oracle::{check_theorem, weak_closure, TheoremReport};
pub use query::{
    canonicalize, contains, equivalent, homomorphisms, Atom, Builtin, BuiltinOp, ConjunctiveQuery,
    Substitution, Term, Value,
};
pub use rewriting::{rew, RewriteOutcome, ViewExpression};

//! Knowledge canvas core: a scoped knowledge graph with dimensional zooms,
//! source credibility scoring, deterministic query resolution and
//! versioned exploration pathways, plus the canonical on-disk format.

pub mod canonical;
pub mod canvas;
pub mod corpus;
pub mod credibility;
pub mod graph;
pub mod ids;
pub mod interval;
pub mod par;
pub mod pathways;
pub mod persist;
pub mod query;
pub mod region;
pub mod report;
pub mod scope;

use thiserror::Error;

pub use canvas::{Canvas, CanvasConfig, Command, Outcome};
pub use ids::{AuthorId, EntryId, PathwayId, ReportId, SessionId, SourceId, TaxonomyNodeId};
pub use interval::{End, Interval};
pub use par::Execution;
pub use region::{RegionSet, RegionTable};
pub use scope::{DimensionalConstraint, Scope};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Credibility(#[from] credibility::CredibilityError),
    #[error(transparent)]
    Query(#[from] query::QueryError),
    #[error(transparent)]
    Pathway(#[from] pathways::PathwayError),
    #[error(transparent)]
    Interval(#[from] interval::IntervalError),
    #[error(transparent)]
    Persist(#[from] persist::PersistError),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Conflict(String),
}

/// Coarse classification used for HTTP statuses and CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    NotFound,
    Invalid,
    Conflict,
    Forbidden,
    Invariant,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use credibility::CredibilityError as C;
        use graph::GraphError as G;
        use pathways::PathwayError as P;
        use query::QueryError as Q;
        let graph = |g: &G| match g {
            G::UnknownEntry(_) | G::UnknownBlock { .. } => ErrorKind::NotFound,
            G::DuplicateId(_) | G::CycleDetected { .. } | G::DuplicateEdge { .. } | G::DerivedEntry(_) => {
                ErrorKind::Conflict
            }
            _ => ErrorKind::Invalid,
        };
        match self {
            Error::Graph(g) => graph(g),
            Error::Credibility(C::UnknownSource(_) | C::NoReport { .. }) => ErrorKind::NotFound,
            Error::Credibility(C::DuplicateSource(_)) => ErrorKind::Conflict,
            Error::Credibility(_) => ErrorKind::Invalid,
            Error::Query(Q::Graph(g)) => graph(g),
            Error::Query(Q::NoMatch) => ErrorKind::NotFound,
            Error::Query(_) => ErrorKind::Invalid,
            Error::Pathway(P::UnknownSession(_) | P::UnknownPathway(_) | P::UnknownNode { .. }) => ErrorKind::NotFound,
            Error::Pathway(P::AccessDenied { .. } | P::NotAuthor(_)) => ErrorKind::Forbidden,
            Error::Pathway(P::ImmutablePathway(_) | P::InactiveSession(_) | P::EmptySession(_)) => ErrorKind::Conflict,
            Error::Pathway(_) => ErrorKind::Invalid,
            Error::Interval(_) | Error::Invalid(_) => ErrorKind::Invalid,
            Error::Persist(persist::PersistError::Io(_) | persist::PersistError::Locked(_)) => ErrorKind::Io,
            Error::Persist(_) => ErrorKind::Invariant,
            Error::NotFound(_) => ErrorKind::NotFound,
            Error::Conflict(_) => ErrorKind::Conflict,
        }
    }

    /// Stable machine-readable name of the error variant.
    pub fn code(&self) -> &'static str {
        use pathways::PathwayError as P;
        match self {
            Error::Graph(g) | Error::Query(query::QueryError::Graph(g)) => graph_code(g),
            Error::Credibility(c) => match c {
                credibility::CredibilityError::OutOfRange { .. } => "OutOfRange",
                credibility::CredibilityError::UnknownSource(_) => "UnknownSource",
                credibility::CredibilityError::DuplicateSource(_) => "DuplicateSource",
                credibility::CredibilityError::SourceMismatch { .. } => "SourceMismatch",
                credibility::CredibilityError::NoReport { .. } => "NoReport",
                credibility::CredibilityError::EmptyNote => "EmptyNote",
                credibility::CredibilityError::InvalidSource(_) => "InvalidSource",
                credibility::CredibilityError::InvalidConfig(_) => "InvalidConfig",
            },
            Error::Query(q) => match q {
                query::QueryError::EmptyQuery => "EmptyQuery",
                query::QueryError::NoMatch => "NoMatch",
                query::QueryError::SeedingDisabled => "SeedingDisabled",
                query::QueryError::InvalidTaxonomy(_) => "InvalidTaxonomy",
                query::QueryError::Graph(_) => unreachable!("handled above"),
            },
            Error::Pathway(p) => match p {
                P::UnknownSession(_) => "UnknownSession",
                P::UnknownPathway(_) => "UnknownPathway",
                P::UnknownNode { .. } => "UnknownNode",
                P::ImmutablePathway(_) => "ImmutablePathway",
                P::EmptySession(_) => "EmptySession",
                P::InactiveSession(_) => "InactiveSession",
                P::TimestampRegression { .. } => "TimestampRegression",
                P::InvalidPayload(_) => "InvalidPayload",
                P::AccessDenied { .. } => "AccessDenied",
                P::NotAuthor(_) => "NotAuthor",
                P::EmptyAuthor => "EmptyAuthor",
            },
            Error::Interval(_) => "InvalidInterval",
            Error::Persist(p) => match p {
                persist::PersistError::Parse { .. } => "ParseError",
                persist::PersistError::UnsupportedSchema { .. } => "UnsupportedSchema",
                persist::PersistError::InvariantViolation(_) => "InvariantViolation",
                persist::PersistError::Locked(_) => "StoreLocked",
                persist::PersistError::Replay { .. } => "ReplayError",
                persist::PersistError::Io(_) => "IoError",
            },
            Error::NotFound(_) => "NotFound",
            Error::Invalid(_) => "Invalid",
            Error::Conflict(_) => "Conflict",
        }
    }
}

fn graph_code(g: &graph::GraphError) -> &'static str {
    use graph::GraphError as G;
    match g {
        G::UnknownEntry(_) => "UnknownEntry",
        G::DuplicateId(_) => "DuplicateId",
        G::EmptyTitle => "EmptyTitle",
        G::InvalidScope(_) => "InvalidScope",
        G::InvalidBlock { .. } => "InvalidBlock",
        G::InvalidEntry(_) => "InvalidEntry",
        G::CycleDetected { .. } => "CycleDetected",
        G::DuplicateEdge { .. } => "DuplicateEdge",
        G::SelfReference => "SelfReference",
        G::EmptyIntersection(_) => "EmptyIntersection",
        G::InvalidConstraint(_) => "InvalidConstraint",
        G::InvalidInterval(_) => "InvalidInterval",
        G::DerivedEntry(_) => "DerivedEntry",
        G::UnknownBlock { .. } => "UnknownBlock",
    }
}

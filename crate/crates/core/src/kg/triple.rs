use std::fmt;

/// Lowercases, trims, and collapses internal whitespace.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// A normalized `(subject, relation, object)` edge.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    subject: String,
    relation: String,
    object: String,
}

impl Triple {
    /// `None` if any field is empty after normalization.
    pub fn new(subject: &str, relation: &str, object: &str) -> Option<Self> {
        let (s, r, o) = (normalize(subject), normalize(relation), normalize(object));
        if s.is_empty() || r.is_empty() || o.is_empty() {
            return None;
        }
        Some(Self {
            subject: s,
            relation: r,
            object: o,
        })
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn object(&self) -> &str {
        &self.object
    }

    pub fn involves(&self, node: &str) -> bool {
        self.subject == node || self.object == node
    }

    /// Snapshot line: tab-separated fields.
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.subject, self.relation, self.object)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "('{}', '{}', '{}')", self.subject, self.relation, self.object)
    }
}

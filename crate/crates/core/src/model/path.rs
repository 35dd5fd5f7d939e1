//! Element paths (schema addressing) and instance paths (document addressing).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("path must start with '/': {0:?}")]
    MissingLeadingSlash(String),
    #[error("invalid element name {name:?} in path {path:?}: {reason}")]
    InvalidName {
        path: String,
        name: String,
        reason: &'static str,
    },
    #[error("invalid sibling ordinal in {0:?}")]
    InvalidOrdinal(String),
}

/// Checks that `name` can be used as an element type name.
///
/// Names are non-empty, carry no leading or trailing whitespace, and never
/// contain `/`, `"`, `[`, `]` or control characters.
pub fn check_name(name: &str) -> Result<(), &'static str> {
    if name.is_empty() {
        return Err("empty name");
    }
    if name.trim() != name {
        return Err("leading or trailing whitespace");
    }
    if let Some(c) = name
        .chars()
        .find(|c| matches!(c, '/' | '"' | '[' | ']') || c.is_control())
    {
        return Err(match c {
            '/' => "contains '/'",
            '"' => "contains '\"'",
            '[' | ']' => "contains a bracket",
            _ => "contains a control character",
        });
    }
    Ok(())
}

/// Root-to-node sequence of element type names. The empty path is the
/// schema root and prints as `/`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementPath(Vec<String>);

impl ElementPath {
    pub fn root() -> Self {
        ElementPath(Vec::new())
    }

    pub fn from_segments<I, S>(segments: I) -> Result<Self, PathError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segments: Vec<String> = segments.into_iter().map(Into::into).collect();
        for s in &segments {
            check_name(s).map_err(|reason| PathError::InvalidName {
                path: format!("/{}", segments.join("/")),
                name: s.clone(),
                reason,
            })?;
        }
        Ok(ElementPath(segments))
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn name(&self) -> Option<&str> {
        self.0.last().map(String::as_str)
    }

    pub fn parent(&self) -> Option<ElementPath> {
        if self.0.is_empty() {
            None
        } else {
            Some(ElementPath(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, name: impl Into<String>) -> ElementPath {
        let mut v = self.0.clone();
        v.push(name.into());
        ElementPath(v)
    }

    /// True when `self` equals `other` or lies below it.
    pub fn starts_with(&self, other: &ElementPath) -> bool {
        self.0.len() >= other.0.len() && self.0[..other.0.len()] == other.0[..]
    }

    /// Replaces the prefix `from` by `to`. Caller guarantees `self.starts_with(from)`.
    pub fn rebase(&self, from: &ElementPath, to: &ElementPath) -> ElementPath {
        debug_assert!(self.starts_with(from));
        let mut v = to.0.clone();
        v.extend_from_slice(&self.0[from.0.len()..]);
        ElementPath(v)
    }

    pub fn common_prefix(&self, other: &ElementPath) -> ElementPath {
        let n = self
            .0
            .iter()
            .zip(other.0.iter())
            .take_while(|(a, b)| a == b)
            .count();
        ElementPath(self.0[..n].to_vec())
    }
}

impl fmt::Display for ElementPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for s in &self.0 {
            write!(f, "/{s}")?;
        }
        Ok(())
    }
}

impl FromStr for ElementPath {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s
            .strip_prefix('/')
            .ok_or_else(|| PathError::MissingLeadingSlash(s.to_string()))?;
        if rest.is_empty() {
            return Ok(ElementPath::root());
        }
        ElementPath::from_segments(rest.split('/'))
    }
}

impl Serialize for ElementPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElementPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One step of an [`InstancePath`]: an element name plus the 0-based
/// ordinal among same-typed siblings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstanceStep {
    pub name: String,
    pub ordinal: usize,
}

/// Addresses one element instance inside a document, e.g.
/// `/Cases/Images[1]/Caption`. A missing `[n]` means ordinal 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct InstancePath(pub Vec<InstanceStep>);

impl InstancePath {
    pub fn root() -> Self {
        InstancePath(Vec::new())
    }

    pub fn steps(&self) -> &[InstanceStep] {
        &self.0
    }

    pub fn element_path(&self) -> ElementPath {
        ElementPath(self.0.iter().map(|s| s.name.clone()).collect())
    }

    pub fn child(&self, name: impl Into<String>, ordinal: usize) -> InstancePath {
        let mut v = self.0.clone();
        v.push(InstanceStep {
            name: name.into(),
            ordinal,
        });
        InstancePath(v)
    }
}

impl fmt::Display for InstancePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for s in &self.0 {
            write!(f, "/{}", s.name)?;
            if s.ordinal != 0 {
                write!(f, "[{}]", s.ordinal)?;
            }
        }
        Ok(())
    }
}

impl FromStr for InstancePath {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s
            .strip_prefix('/')
            .ok_or_else(|| PathError::MissingLeadingSlash(s.to_string()))?;
        if rest.is_empty() {
            return Ok(InstancePath::root());
        }
        let mut steps = Vec::new();
        for raw in rest.split('/') {
            let (name, ordinal) = match raw.strip_suffix(']') {
                Some(head) => {
                    let open = head
                        .rfind('[')
                        .ok_or_else(|| PathError::InvalidOrdinal(s.to_string()))?;
                    let n: usize = head[open + 1..]
                        .parse()
                        .map_err(|_| PathError::InvalidOrdinal(s.to_string()))?;
                    (&head[..open], n)
                }
                None => (raw, 0),
            };
            check_name(name).map_err(|reason| PathError::InvalidName {
                path: s.to_string(),
                name: name.to_string(),
                reason,
            })?;
            steps.push(InstanceStep {
                name: name.to_string(),
                ordinal,
            });
        }
        Ok(InstancePath(steps))
    }
}

impl Serialize for InstancePath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InstancePath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_path_round_trips_through_text() {
        let p: ElementPath = "/Cases/Personal Data/Age".parse().unwrap();
        assert_eq!(p.segments().len(), 3);
        assert_eq!(p.to_string(), "/Cases/Personal Data/Age");
        assert_eq!("/".parse::<ElementPath>().unwrap(), ElementPath::root());
    }

    #[test]
    fn rejects_malformed_paths() {
        assert!("Cases".parse::<ElementPath>().is_err());
        assert!("/Cases//Age".parse::<ElementPath>().is_err());
        assert!("/Cases/ Age".parse::<ElementPath>().is_err());
    }

    #[test]
    fn instance_path_ordinals() {
        let p: InstancePath = "/Cases/Images[1]/Caption".parse().unwrap();
        assert_eq!(p.steps()[1].ordinal, 1);
        assert_eq!(p.steps()[2].ordinal, 0);
        assert_eq!(p.to_string(), "/Cases/Images[1]/Caption");
        assert_eq!(p.element_path().to_string(), "/Cases/Images/Caption");
        assert!("/Cases/Images[x]".parse::<InstancePath>().is_err());
    }

    #[test]
    fn rebase_and_prefix() {
        let p: ElementPath = "/A/B/C".parse().unwrap();
        let from: ElementPath = "/A/B".parse().unwrap();
        let to: ElementPath = "/X".parse().unwrap();
        assert_eq!(p.rebase(&from, &to).to_string(), "/X/C");
        let q: ElementPath = "/A/D".parse().unwrap();
        assert_eq!(p.common_prefix(&q).to_string(), "/A");
    }
}

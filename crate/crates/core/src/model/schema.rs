//! Collection schema: the tree of element types every document conforms to.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::path::ElementPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    Atomic,
    Composite,
    ResourceRef,
    Link,
    Quiz,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Atomic => "atomic",
            ElementKind::Composite => "composite",
            ElementKind::ResourceRef => "resource-ref",
            ElementKind::Link => "link",
            ElementKind::Quiz => "quiz",
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How many same-typed siblings an instance may have. Ordered from tightest
/// to loosest so that `max` widens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multiplicity {
    One,
    Optional,
    Many,
}

impl Multiplicity {
    pub fn as_str(self) -> &'static str {
        match self {
            Multiplicity::One => "one",
            Multiplicity::Optional => "optional",
            Multiplicity::Many => "many",
        }
    }

    /// Whether `count` same-typed siblings are allowed.
    pub fn admits(self, count: usize) -> bool {
        self == Multiplicity::Many || count <= 1
    }
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementType {
    pub name: String,
    pub kind: ElementKind,
    pub multiplicity: Multiplicity,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ElementType>,
}

impl ElementType {
    pub fn leaf(name: impl Into<String>, kind: ElementKind, multiplicity: Multiplicity) -> Self {
        ElementType {
            name: name.into(),
            kind,
            multiplicity,
            children: Vec::new(),
        }
    }

    pub fn composite(
        name: impl Into<String>,
        multiplicity: Multiplicity,
        children: Vec<ElementType>,
    ) -> Self {
        ElementType {
            name: name.into(),
            kind: ElementKind::Composite,
            multiplicity,
            children,
        }
    }

    pub fn child(&self, name: &str) -> Option<&ElementType> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn child_mut(&mut self, name: &str) -> Option<&mut ElementType> {
        self.children.iter_mut().find(|c| c.name == name)
    }

    pub fn child_index(&self, name: &str) -> Option<usize> {
        self.children.iter().position(|c| c.name == name)
    }

    /// Number of nodes in this subtree, including `self`.
    pub fn subtree_size(&self) -> usize {
        1 + self.children.iter().map(ElementType::subtree_size).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub root: ElementType,
    pub version: u64,
}

impl Default for Schema {
    fn default() -> Self {
        Schema::empty()
    }
}

impl Schema {
    pub const ROOT_NAME: &'static str = "collection";

    /// A bare root with no element types.
    pub fn empty() -> Self {
        Schema {
            root: ElementType::composite(Self::ROOT_NAME, Multiplicity::One, Vec::new()),
            version: 0,
        }
    }

    pub fn with_children(children: Vec<ElementType>) -> Self {
        Schema {
            root: ElementType::composite(Self::ROOT_NAME, Multiplicity::One, children),
            version: 0,
        }
    }

    pub fn get(&self, path: &ElementPath) -> Option<&ElementType> {
        let mut node = &self.root;
        for seg in path.segments() {
            node = node.child(seg)?;
        }
        Some(node)
    }

    pub fn get_mut(&mut self, path: &ElementPath) -> Option<&mut ElementType> {
        let mut node = &mut self.root;
        for seg in path.segments() {
            node = node.child_mut(seg)?;
        }
        Some(node)
    }

    pub fn contains(&self, path: &ElementPath) -> bool {
        self.get(path).is_some()
    }

    /// Number of element types, not counting the root.
    pub fn type_count(&self) -> usize {
        self.root.subtree_size() - 1
    }

    /// Every element type with its path, depth-first in declared order.
    pub fn walk(&self) -> Vec<(ElementPath, &ElementType)> {
        fn go<'a>(
            node: &'a ElementType,
            path: ElementPath,
            out: &mut Vec<(ElementPath, &'a ElementType)>,
        ) {
            for c in &node.children {
                let p = path.child(c.name.clone());
                out.push((p.clone(), c));
                go(c, p, out);
            }
        }
        let mut out = Vec::new();
        go(&self.root, ElementPath::root(), &mut out);
        out
    }

    /// Position of each path in depth-first declared order. Used to sort
    /// sibling instances.
    pub fn child_rank(&self, parent: &ElementPath, name: &str) -> usize {
        self.get(parent)
            .and_then(|p| p.child_index(name))
            .unwrap_or(usize::MAX)
    }
}

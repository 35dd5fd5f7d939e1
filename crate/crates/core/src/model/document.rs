//! Documents: trees of element instances (element-value pairs).

use serde::{Deserialize, Serialize};

use super::path::ElementPath;
use super::resource::ResourceId;
use super::schema::ElementKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkKind {
    InternalDocument,
    InternalAnnotation,
    ExternalUrl,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkTarget {
    pub kind: LinkKind,
    pub value: String,
}

impl LinkTarget {
    pub fn document(id: impl Into<String>) -> Self {
        LinkTarget {
            kind: LinkKind::InternalDocument,
            value: id.into(),
        }
    }

    pub fn annotation(id: impl Into<String>) -> Self {
        LinkTarget {
            kind: LinkKind::InternalAnnotation,
            value: id.into(),
        }
    }

    pub fn url(url: impl Into<String>) -> Self {
        LinkTarget {
            kind: LinkKind::ExternalUrl,
            value: url.into(),
        }
    }
}

/// Multiple-choice question with exactly one correct option.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mcq {
    pub stem: String,
    pub choices: Vec<String>,
    pub correct_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

impl Mcq {
    /// Returns the first broken invariant, if any.
    pub fn check(&self) -> Result<(), String> {
        if self.choices.len() < 2 {
            return Err(format!("needs at least 2 choices, has {}", self.choices.len()));
        }
        if self.correct_index >= self.choices.len() {
            return Err(format!(
                "correct index {} out of range for {} choices",
                self.correct_index,
                self.choices.len()
            ));
        }
        if self.choices.iter().any(|c| c.trim().is_empty()) {
            return Err("empty choice".into());
        }
        for (i, a) in self.choices.iter().enumerate() {
            if self.choices[i + 1..].contains(a) {
                return Err(format!("duplicate choice {a:?}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Text(String),
    Children(Vec<ElementInstance>),
    Resource(ResourceId),
    Link(LinkTarget),
    Quiz(Mcq),
}

impl Payload {
    pub fn kind(&self) -> ElementKind {
        match self {
            Payload::Text(_) => ElementKind::Atomic,
            Payload::Children(_) => ElementKind::Composite,
            Payload::Resource(_) => ElementKind::ResourceRef,
            Payload::Link(_) => ElementKind::Link,
            Payload::Quiz(_) => ElementKind::Quiz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementInstance {
    #[serde(rename = "path")]
    pub type_path: ElementPath,
    #[serde(flatten)]
    pub payload: Payload,
}

impl ElementInstance {
    pub fn new(type_path: ElementPath, payload: Payload) -> Self {
        ElementInstance { type_path, payload }
    }

    pub fn text(type_path: ElementPath, text: impl Into<String>) -> Self {
        Self::new(type_path, Payload::Text(text.into()))
    }

    pub fn composite(type_path: ElementPath, children: Vec<ElementInstance>) -> Self {
        Self::new(type_path, Payload::Children(children))
    }

    pub fn name(&self) -> Option<&str> {
        self.type_path.name()
    }

    pub fn children(&self) -> &[ElementInstance] {
        match &self.payload {
            Payload::Children(c) => c,
            _ => &[],
        }
    }

    pub fn children_mut(&mut self) -> Option<&mut Vec<ElementInstance>> {
        match &mut self.payload {
            Payload::Children(c) => Some(c),
            _ => None,
        }
    }

    /// Pre-order visit of this instance and every descendant.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a ElementInstance)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Number of instances in this subtree, including `self`.
    pub fn count(&self) -> usize {
        1 + self.children().iter().map(ElementInstance::count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub plugin: String,
    pub locator: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub root: ElementInstance,
    pub origin: Origin,
}

impl Document {
    pub fn new(id: impl Into<String>, children: Vec<ElementInstance>, origin: Origin) -> Self {
        Document {
            id: id.into(),
            root: ElementInstance::composite(ElementPath::root(), children),
            origin,
        }
    }

    /// Every instance below the document root, pre-order.
    pub fn instances(&self) -> Vec<&ElementInstance> {
        let mut out = Vec::new();
        for c in self.root.children() {
            c.visit(&mut |i| out.push(i));
        }
        out
    }

    /// Instances below the root (the root itself is not counted).
    pub fn instance_count(&self) -> usize {
        self.root.count() - 1
    }

    pub fn instances_of<'a>(&'a self, path: &ElementPath) -> Vec<&'a ElementInstance> {
        self.instances()
            .into_iter()
            .filter(|i| &i.type_path == path)
            .collect()
    }
}

/// Document ids appear in file names and hrefs, so they are restricted to a
/// conservative character set.
pub fn check_document_id(id: &str) -> Result<(), String> {
    if id.is_empty() || id.len() > 128 {
        return Err("document id must be 1..=128 characters".into());
    }
    if id.starts_with('.') {
        return Err("document id must not start with '.'".into());
    }
    if let Some(c) = id
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')))
    {
        return Err(format!("document id contains {c:?}"));
    }
    Ok(())
}

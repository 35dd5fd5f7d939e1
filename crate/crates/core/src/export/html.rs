//! XHTML rendering of one document. Pages are well-formed XML so that the
//! package importer can read them back.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{check_profile, kind_of, ExportError, ExportProfile, PackageFormat};
use crate::model::{
    Collection, Document, ElementInstance, ElementKind, InstancePath, LinkKind, Mcq, Payload,
    ResourceId, ResourceKind,
};
use crate::store::Bundle;

pub(crate) const STYLE: &str = "\
body { font-family: sans-serif; max-width: 60em; margin: 1em auto; line-height: 1.4; }
section.el { margin: 0.5em 0; }
p.v { margin: 0.2em 0; white-space: pre-wrap; }
figure.image .frame { position: relative; display: inline-block; }
figure.image img { display: block; }
.marker { position: absolute; box-sizing: border-box; border: 2px solid #e33; color: #e33; font-size: 0.8em; }
ol.annotations { font-size: 0.9em; }
section.quiz { border-top: 1px solid #aaa; margin-top: 1.5em; }
";

pub(crate) struct RenderedPage {
    pub html: String,
    pub title: String,
    /// Resources shown on the page.
    pub assets: BTreeSet<ResourceId>,
}

/// Escapes text for element content and double-quoted attributes.
pub(crate) fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

/// Page title: the first atomic `Title` value, else the document id.
pub(crate) fn document_title(doc: &Document) -> String {
    doc.instances()
        .into_iter()
        .find_map(|i| match (&i.payload, i.name()) {
            (Payload::Text(t), Some("Title")) if !t.trim().is_empty() => Some(t.clone()),
            _ => None,
        })
        .unwrap_or_else(|| doc.id.clone())
}

pub(crate) fn page_head(out: &mut String, title: &str, css: &str, scripts: &[&str]) {
    out.push_str("<!DOCTYPE html>\n<html xmlns=\"http://www.w3.org/1999/xhtml\" lang=\"en\">\n<head>\n");
    out.push_str("<meta charset=\"utf-8\"/>\n");
    let _ = writeln!(out, "<title>{}</title>", esc(title));
    let _ = writeln!(out, "<link rel=\"stylesheet\" href=\"{css}\"/>");
    for s in scripts {
        let _ = writeln!(out, "<script src=\"{s}\"></script>");
    }
    out.push_str("</head>\n");
}

/// Renders one document as it would appear in a package built with
/// `profile`. Links to documents outside the export become plain text.
pub fn render_document_html(
    b: &Bundle,
    doc_id: &str,
    profile: &ExportProfile,
) -> Result<String, ExportError> {
    let ids = check_profile(b, profile)?;
    if !ids.iter().any(|i| i == doc_id) {
        return Err(ExportError::UnknownDocument(doc_id.to_string()));
    }
    let exported: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let doc = &b.collection.documents[doc_id];
    Ok(render_page(&b.collection, doc, profile, &exported).html)
}

struct Renderer<'a> {
    c: &'a Collection,
    profile: &'a ExportProfile,
    exported: &'a BTreeSet<&'a str>,
    /// Resources rendered as figures; annotation links point at these.
    figures: BTreeSet<ResourceId>,
    assets: BTreeSet<ResourceId>,
    /// Resources whose markers already carry anchor ids.
    anchored: BTreeSet<ResourceId>,
    out: String,
}

pub(crate) fn render_page(
    c: &Collection,
    doc: &Document,
    profile: &ExportProfile,
    exported: &BTreeSet<&str>,
) -> RenderedPage {
    let title = document_title(doc);
    let mut r = Renderer {
        c,
        profile,
        exported,
        figures: BTreeSet::new(),
        assets: BTreeSet::new(),
        anchored: BTreeSet::new(),
        out: String::new(),
    };
    for i in doc.instances() {
        if let Payload::Resource(rid) = &i.payload {
            if profile.renders(&i.type_path)
                && c.resources.get(rid).is_some_and(|res| res.is_image())
            {
                r.figures.insert(rid.clone());
            }
        }
    }
    let scripts: &[&str] = if profile.format == PackageFormat::Scorm12 {
        &["../shared/sco.js"]
    } else {
        &[]
    };
    page_head(&mut r.out, &title, "../shared/style.css", scripts);
    let _ = writeln!(r.out, "<body data-doc=\"{}\">", esc(&doc.id));
    let _ = writeln!(r.out, "<h1>{}</h1>", esc(&title));
    r.children(doc.root.children(), &InstancePath::root(), 2);
    if profile.include_quizzes {
        r.quiz_block(doc);
    }
    r.out.push_str("</body>\n</html>\n");
    RenderedPage {
        html: r.out,
        title,
        assets: r.assets,
    }
}

impl Renderer<'_> {
    /// Same-typed siblings are contiguous (child order is normalized), so
    /// each run becomes one section.
    fn children(&mut self, kids: &[ElementInstance], parent: &InstancePath, level: usize) {
        let mut i = 0;
        while i < kids.len() {
            let tp = &kids[i].type_path;
            let run = kids[i..].iter().take_while(|k| &k.type_path == tp).count();
            let group = &kids[i..i + run];
            i += run;
            let name = tp.name().unwrap_or_default();
            let kind = kind_of(self.c, tp).unwrap_or(ElementKind::Atomic);
            if kind == ElementKind::Quiz {
                continue;
            }
            if self.profile.renders(tp) {
                let _ = writeln!(self.out, "<section class=\"el\" data-path=\"{}\">", esc(&tp.to_string()));
                let h = level.min(6);
                let _ = writeln!(self.out, "<h{h}>{}</h{h}>", esc(name));
                for (ord, inst) in group.iter().enumerate() {
                    self.value(inst, &parent.child(name, ord), level + 1);
                }
                self.out.push_str("</section>\n");
            } else if kind == ElementKind::Composite && self.profile.leads_to_render(tp) {
                for (ord, inst) in group.iter().enumerate() {
                    self.children(inst.children(), &parent.child(name, ord), level);
                }
            }
        }
    }

    fn value(&mut self, inst: &ElementInstance, ip: &InstancePath, level: usize) {
        let ipa = esc(&ip.to_string());
        match &inst.payload {
            Payload::Text(t) => {
                let _ = writeln!(self.out, "<p class=\"v\" data-ipath=\"{ipa}\">{}</p>", esc(t));
            }
            Payload::Children(kids) => {
                let _ = writeln!(self.out, "<div class=\"instance\" data-ipath=\"{ipa}\">");
                self.children(kids, ip, level);
                self.out.push_str("</div>\n");
            }
            Payload::Resource(rid) => self.resource(rid, &ipa),
            Payload::Link(target) => {
                let _ = write!(self.out, "<p class=\"link\" data-ipath=\"{ipa}\">");
                match target.kind {
                    LinkKind::ExternalUrl => {
                        let u = esc(&target.value);
                        let _ = write!(self.out, "<a href=\"{u}\">{u}</a>");
                    }
                    LinkKind::InternalDocument => {
                        let label = self
                            .c
                            .documents
                            .get(&target.value)
                            .map(document_title)
                            .unwrap_or_else(|| target.value.clone());
                        if self.exported.contains(target.value.as_str()) {
                            let _ = write!(
                                self.out,
                                "<a href=\"{}.html\">{}</a>",
                                esc(&target.value),
                                esc(&label)
                            );
                        } else {
                            let _ = write!(self.out, "<span class=\"ref\">{}</span>", esc(&label));
                        }
                    }
                    LinkKind::InternalAnnotation => match self.c.annotations.get(&target.value) {
                        Some(a) if self.figures.contains(&a.resource_id) => {
                            let _ = write!(
                                self.out,
                                "<a href=\"#{}\">{}</a>",
                                esc(&a.id),
                                esc(&a.comment)
                            );
                        }
                        Some(a) => {
                            let _ = write!(self.out, "<span class=\"ref\">{}</span>", esc(&a.comment));
                        }
                        None => {}
                    },
                }
                self.out.push_str("</p>\n");
            }
            Payload::Quiz(_) => {}
        }
    }

    fn resource(&mut self, rid: &ResourceId, ipa: &str) {
        let Some(res) = self.c.resources.get(rid) else {
            return;
        };
        let src = match res.kind {
            ResourceKind::LocalFile => {
                self.assets.insert(rid.clone());
                format!("../assets/{}", res.file_name())
            }
            ResourceKind::ExternalUrl => res.locator.clone(),
        };
        let src = esc(&src);
        if !res.is_image() {
            let _ = writeln!(
                self.out,
                "<p class=\"resource\" data-ipath=\"{ipa}\"><a href=\"{src}\">{}</a></p>",
                esc(&res.file_name())
            );
            return;
        }
        let size = res
            .image
            .map(|s| format!(" width=\"{}\" height=\"{}\"", s.width, s.height))
            .unwrap_or_default();
        let anchor = self.anchored.insert(rid.clone());
        let notes: Vec<_> = self.c.annotations_for(rid).collect();
        let _ = writeln!(self.out, "<figure class=\"image\" data-ipath=\"{ipa}\">");
        self.out.push_str("<div class=\"frame\">\n");
        let _ = writeln!(self.out, "<img src=\"{src}\" alt=\"{}\"{size}/>", esc(&res.file_name()));
        for (n, a) in notes.iter().enumerate() {
            let id = if anchor {
                format!(" id=\"{}\"", esc(&a.id))
            } else {
                String::new()
            };
            let g = a.region;
            let _ = writeln!(
                self.out,
                "<span class=\"marker\"{id} style=\"left:{}px;top:{}px;width:{}px;height:{}px\">{}</span>",
                g.x,
                g.y,
                g.w,
                g.h,
                n + 1
            );
        }
        self.out.push_str("</div>\n");
        if !notes.is_empty() {
            self.out.push_str("<figcaption><ol class=\"annotations\">\n");
            for a in &notes {
                let _ = writeln!(
                    self.out,
                    "<li>{} <span class=\"author\">({})</span></li>",
                    esc(&a.comment),
                    esc(&a.author)
                );
            }
            self.out.push_str("</ol></figcaption>\n");
        }
        self.out.push_str("</figure>\n");
    }

    fn quiz_block(&mut self, doc: &Document) {
        let quizzes: Vec<&Mcq> = doc
            .instances()
            .into_iter()
            .filter_map(|i| match &i.payload {
                Payload::Quiz(q) => Some(q),
                _ => None,
            })
            .collect();
        if quizzes.is_empty() {
            return;
        }
        self.out.push_str("<section class=\"quiz\">\n<h2>Self-assessment</h2>\n");
        if self.profile.format == PackageFormat::Scorm12 {
            // the graded version is a separate item; no answers on this page
            let _ = writeln!(
                self.out,
                "<p>{} question(s) for this case are in the quiz item that follows it.</p>",
                quizzes.len()
            );
            self.out.push_str("<ol>\n");
            for q in &quizzes {
                let _ = writeln!(self.out, "<li>{}</li>", esc(&q.stem));
            }
            self.out.push_str("</ol>\n");
        } else {
            self.out.push_str("<ol>\n");
            for q in &quizzes {
                let _ = writeln!(self.out, "<li class=\"mcq\">\n<p class=\"stem\">{}</p>\n<ol type=\"A\">", esc(&q.stem));
                for ch in &q.choices {
                    let _ = writeln!(self.out, "<li>{}</li>", esc(ch));
                }
                self.out.push_str("</ol>\n<details><summary>Answer</summary>\n");
                let _ = writeln!(self.out, "<p>{}</p>", esc(&q.choices[q.correct_index]));
                if let Some(e) = &q.explanation {
                    let _ = writeln!(self.out, "<p>{}</p>", esc(e));
                }
                self.out.push_str("</details>\n</li>\n");
            }
            self.out.push_str("</ol>\n");
        }
        self.out.push_str("</section>\n");
    }
}

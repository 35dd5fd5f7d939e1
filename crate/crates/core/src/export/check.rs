//! Structural checks for IMS CP and SCORM 1.2 packages: manifest present
//! and well-formed, required elements, closed references, no orphans.

use std::collections::BTreeSet;

use crate::model::{ValidationReport, Violation};
use crate::zipio;

pub mod rule {
    pub const BAD_ZIP: &str = "bad-zip";
    pub const MISSING_MANIFEST: &str = "missing-manifest";
    pub const MALFORMED_XML: &str = "malformed-xml";
    pub const MISSING_ELEMENT: &str = "missing-element";
    pub const DUPLICATE_IDENTIFIER: &str = "duplicate-identifier";
    pub const DANGLING_HREF: &str = "dangling-href";
    pub const DANGLING_IDENTIFIERREF: &str = "dangling-identifierref";
    pub const ORPHAN_FILE: &str = "orphan-file";
}

const MANIFEST: &str = "imsmanifest.xml";

fn push(report: &mut ValidationReport, path: impl Into<String>, rule: &str, message: String) {
    report.0.push(Violation {
        document: String::new(),
        path: path.into(),
        rule: rule.into(),
        message,
    });
}

/// Checks a package zip. An empty report means the package is well formed.
pub fn validate_package(bytes: &[u8]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let entries = match zipio::read_zip(bytes) {
        Ok(e) => e,
        Err(e) => {
            push(&mut report, "", rule::BAD_ZIP, e.to_string());
            return report;
        }
    };
    let Some(manifest) = entries.get(MANIFEST) else {
        push(&mut report, MANIFEST, rule::MISSING_MANIFEST, "no manifest at the archive root".into());
        return report;
    };
    let text = match std::str::from_utf8(manifest) {
        Ok(t) => t,
        Err(e) => {
            push(&mut report, MANIFEST, rule::MALFORMED_XML, e.to_string());
            return report;
        }
    };
    let xml = match roxmltree::Document::parse(text) {
        Ok(x) => x,
        Err(e) => {
            push(&mut report, MANIFEST, rule::MALFORMED_XML, e.to_string());
            return report;
        }
    };
    let root = xml.root_element();
    if root.tag_name().name() != "manifest" {
        push(&mut report, MANIFEST, rule::MISSING_ELEMENT, "root element is not <manifest>".into());
        return report;
    }
    let child = |name: &str| root.children().find(|n| n.tag_name().name() == name);
    let elements = |name: &'static str| xml.descendants().filter(move |n| n.tag_name().name() == name);

    if root.attribute("identifier").is_none() {
        push(&mut report, MANIFEST, rule::MISSING_ELEMENT, "<manifest> has no identifier".into());
    }
    for name in ["organizations", "resources"] {
        if child(name).is_none() {
            push(&mut report, MANIFEST, rule::MISSING_ELEMENT, format!("no <{name}>"));
        }
    }
    let schema = elements("schema").next().and_then(|n| n.text()).map(str::trim);
    let scorm = schema == Some("ADL SCORM")
        || root.attributes().any(|a| a.namespace() == Some("http://www.adlnet.org/xsd/adlcp_rootv1p2"));
    if scorm {
        let version = elements("schemaversion").next().and_then(|n| n.text()).map(str::trim);
        if version != Some("1.2") {
            push(
                &mut report,
                MANIFEST,
                rule::MISSING_ELEMENT,
                format!("SCORM schemaversion must be 1.2, found {version:?}"),
            );
        }
    }

    let mut ids = BTreeSet::new();
    for n in xml.descendants().filter(|n| n.is_element()) {
        if let Some(id) = n.attribute("identifier") {
            if !ids.insert(id) {
                push(&mut report, MANIFEST, rule::DUPLICATE_IDENTIFIER, format!("identifier {id:?} repeated"));
            }
        }
    }
    let resources: BTreeSet<&str> = elements("resource").filter_map(|n| n.attribute("identifier")).collect();
    if resources.is_empty() {
        push(&mut report, MANIFEST, rule::MISSING_ELEMENT, "no <resource>".into());
    }
    if let Some(orgs) = child("organizations") {
        let org_ids: BTreeSet<&str> = orgs
            .children()
            .filter(|n| n.tag_name().name() == "organization")
            .filter_map(|n| n.attribute("identifier"))
            .collect();
        if let Some(d) = orgs.attribute("default") {
            if !org_ids.contains(d) {
                push(&mut report, MANIFEST, rule::DANGLING_IDENTIFIERREF, format!("default organization {d:?}"));
            }
        }
    }
    for n in elements("item").chain(elements("dependency")) {
        if let Some(r) = n.attribute("identifierref") {
            if !resources.contains(r) {
                push(
                    &mut report,
                    MANIFEST,
                    rule::DANGLING_IDENTIFIERREF,
                    format!("<{}> refers to missing resource {r:?}", n.tag_name().name()),
                );
            }
        }
    }

    let mut referenced = BTreeSet::new();
    for n in elements("resource").chain(elements("file")) {
        let Some(href) = n.attribute("href") else {
            if n.tag_name().name() == "file" {
                push(&mut report, MANIFEST, rule::MISSING_ELEMENT, "<file> without href".into());
            }
            continue;
        };
        // hrefs may carry a query or fragment
        let file = href.split(['?', '#']).next().unwrap_or_default();
        if entries.contains_key(file) {
            referenced.insert(file.to_string());
        } else {
            push(&mut report, href, rule::DANGLING_HREF, "referenced file is not in the archive".into());
        }
    }
    for name in entries.keys() {
        if name != MANIFEST && !referenced.contains(name) {
            push(&mut report, name.clone(), rule::ORPHAN_FILE, "file is not referenced by the manifest".into());
        }
    }
    report
}

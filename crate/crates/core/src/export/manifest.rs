//! `imsmanifest.xml` for IMS CP 1.1.4 and SCORM 1.2.

use std::fmt::Write as _;

use super::html::esc;
use super::{
    asset_path, page_path, quiz_page_path, quiz_script_path, ExportProfile, PackageFormat,
    PageSpec, SCO_SCRIPT_PATH, STYLE_PATH,
};
use crate::model::{content_id, Collection};

pub(crate) fn manifest(c: &Collection, profile: &ExportProfile, pages: &[PageSpec]) -> String {
    let scorm = profile.format == PackageFormat::Scorm12;
    let ids: Vec<&str> = pages.iter().map(|p| p.id.as_str()).collect();
    let ident = content_id(format!("{}\n{}", profile.title, ids.join("\n")).as_bytes());
    let sco = if scorm { " adlcp:scormtype=\"sco\"" } else { "" };
    let asset = if scorm { " adlcp:scormtype=\"asset\"" } else { "" };

    let mut m = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if scorm {
        let _ = writeln!(
            m,
            "<manifest identifier=\"MANIFEST-{ident}\" version=\"1.0\" \
             xmlns=\"http://www.imsproject.org/xsd/imscp_rootv1p1p2\" \
             xmlns:adlcp=\"http://www.adlnet.org/xsd/adlcp_rootv1p2\" \
             xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
             xsi:schemaLocation=\"http://www.imsproject.org/xsd/imscp_rootv1p1p2 imscp_rootv1p1p2.xsd \
             http://www.imsglobal.org/xsd/imsmd_rootv1p2p1 imsmd_rootv1p2p1.xsd \
             http://www.adlnet.org/xsd/adlcp_rootv1p2 adlcp_rootv1p2.xsd\">"
        );
        m.push_str("  <metadata>\n    <schema>ADL SCORM</schema>\n    <schemaversion>1.2</schemaversion>\n  </metadata>\n");
    } else {
        let _ = writeln!(
            m,
            "<manifest identifier=\"MANIFEST-{ident}\" version=\"1.0\" \
             xmlns=\"http://www.imsglobal.org/xsd/imscp_v1p1\" \
             xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
             xsi:schemaLocation=\"http://www.imsglobal.org/xsd/imscp_v1p1 imscp_v1p1.xsd\">"
        );
        m.push_str("  <metadata>\n    <schema>IMS Content</schema>\n    <schemaversion>1.1.4</schemaversion>\n  </metadata>\n");
    }

    m.push_str("  <organizations default=\"ORG-1\">\n    <organization identifier=\"ORG-1\">\n");
    let _ = writeln!(m, "      <title>{}</title>", esc(&profile.title));
    for p in pages {
        let id = esc(&p.id);
        let _ = writeln!(
            m,
            "      <item identifier=\"ITEM-{id}\" identifierref=\"RES-{id}\">\n        <title>{}</title>\n      </item>",
            esc(&p.title)
        );
        if p.quizzes > 0 {
            let _ = writeln!(
                m,
                "      <item identifier=\"ITEM-{id}-quiz\" identifierref=\"RES-{id}-quiz\">\n        <title>Quiz: {}</title>\n      </item>",
                esc(&p.title)
            );
        }
    }
    m.push_str("    </organization>\n  </organizations>\n  <resources>\n");

    for p in pages {
        let id = esc(&p.id);
        let href = esc(&page_path(&p.id));
        let _ = writeln!(
            m,
            "    <resource identifier=\"RES-{id}\" type=\"webcontent\"{sco} href=\"{href}\">"
        );
        let _ = writeln!(m, "      <file href=\"{href}\"/>");
        for rid in &p.assets {
            let _ = writeln!(
                m,
                "      <file href=\"{}\"/>",
                esc(&asset_path(&c.resources[rid].file_name()))
            );
        }
        m.push_str("      <dependency identifierref=\"RES-shared\"/>\n    </resource>\n");
        if p.quizzes > 0 {
            let qhref = esc(&quiz_page_path(&p.id));
            let _ = writeln!(
                m,
                "    <resource identifier=\"RES-{id}-quiz\" type=\"webcontent\"{sco} href=\"{qhref}\">\n      <file href=\"{qhref}\"/>\n      <file href=\"{}\"/>\n      <dependency identifierref=\"RES-shared\"/>\n    </resource>",
                esc(&quiz_script_path(&p.id))
            );
        }
    }
    let _ = writeln!(m, "    <resource identifier=\"RES-shared\" type=\"webcontent\"{asset}>");
    let _ = writeln!(m, "      <file href=\"{STYLE_PATH}\"/>");
    if scorm {
        let _ = writeln!(m, "      <file href=\"{SCO_SCRIPT_PATH}\"/>");
    }
    m.push_str("    </resource>\n  </resources>\n</manifest>\n");
    m
}

//! MedPix-style REST client: paginated case listing, per-case topic,
//! question and image retrieval.
//!
//! Source layout, relative to the base URL:
//!
//! ```text
//! index.json          {"cases": "cases/page-1.json", ...}
//! cases/page-N.json   {"cases": ["MPX1001", ...], "next": "cases/page-2.json" | null}
//! cases/<id>.json     case record; "topics", "questions" and "images" reference the rest
//! topics/<id>.json    topic record
//! questions/<id>.json {"stem", "choices", "answer", "explanation"}
//! ```
//!
//! Everything that depends on response shapes lives in the `map_*`
//! functions, so an adapter for another endpoint only replaces those.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::json::{fields, pascal};
use super::source::{FetchError, Source};
use super::{Fetched, ImportError, ImportParams, ImportPlugin, RawField, RawRecord, RawValue};
use crate::model::{guess_media_type, LinkTarget, Mcq, Resource, ResourceId};

pub struct MedpixPlugin;

/// Resume state: which records an earlier, interrupted run already stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedpixCursor {
    pub base_url: String,
    pub done_cases: BTreeSet<String>,
    pub done_topics: BTreeSet<String>,
}

struct Options {
    max_cases: Option<usize>,
    max_topics: Option<usize>,
    max_questions: Option<usize>,
    parallelism: usize,
}

impl ImportPlugin for MedpixPlugin {
    fn name(&self) -> &'static str {
        "medpix"
    }

    fn fetch(&self, params: &ImportParams) -> Result<Fetched, ImportError> {
        let base = params.require("base_url")?;
        let rate = params.parse::<f64>("rate")?.unwrap_or(2.0);
        let opts = Options {
            max_cases: params.parse("max_cases")?,
            max_topics: params.parse("max_topics")?,
            max_questions: params.parse("max_questions")?,
            parallelism: params.parse("parallelism")?.unwrap_or(4).max(1),
        };
        let source = Source::new(base, rate)?;
        let mut cursor = params
            .cursor
            .as_ref()
            .and_then(|v| serde_json::from_value::<MedpixCursor>(v.clone()).ok())
            .filter(|c| c.base_url == source.base().as_str())
            .unwrap_or_else(|| MedpixCursor {
                base_url: source.base().to_string(),
                ..MedpixCursor::default()
            });
        let out = Harvest {
            source: &source,
            opts: &opts,
        }
        .run(&mut cursor)?;
        log::info!("medpix: {} requests", source.requests());
        Ok(out)
    }
}

struct Harvest<'a> {
    source: &'a Source,
    opts: &'a Options,
}

/// A case as listed by the source, before assembly.
struct CaseData {
    id: String,
    json: serde_json::Map<String, Value>,
    topics: Vec<String>,
    questions: Vec<String>,
    images: Vec<String>,
}

impl Harvest<'_> {
    fn run(&self, cursor: &mut MedpixCursor) -> Result<Fetched, ImportError> {
        let mut out = Fetched::default();
        let index = self
            .source
            .get_json("index.json")
            .map_err(|e| ImportError::Unreachable(e.to_string()))?;
        let (case_ids, interrupted) = self.list_cases(&index)?;
        out.interrupted = interrupted;
        let pending: Vec<String> = case_ids
            .into_iter()
            .filter(|id| !cursor.done_cases.contains(id))
            .collect();

        // cases
        let results = parallel_map(&pending, self.opts.parallelism, |id| {
            self.source.get_json(&format!("cases/{id}.json"))
        });
        let mut cases = Vec::new();
        for (id, r) in pending.iter().zip(results) {
            match r.and_then(|v| map_case(id, v)) {
                Ok(c) => cases.push(c),
                Err(e) => self.fail(&mut out, format!("case {id}: {e}"), e.is_client_error(), true),
            }
        }

        // topics, questions and images, each deduplicated in case order
        let topic_ids = limit(
            unique(cases.iter().flat_map(|c| &c.topics))
                .filter(|t| !cursor.done_topics.contains(*t)),
            self.opts.max_topics,
        );
        let topic_results = parallel_map(&topic_ids, self.opts.parallelism, |id| {
            self.source.get_json(&format!("topics/{id}.json"))
        });
        let mut topics = BTreeMap::new();
        let mut lost = BTreeSet::new();
        for (id, r) in topic_ids.iter().zip(topic_results) {
            match r.and_then(|v| map_topic(id, v)) {
                Ok(t) => {
                    topics.insert(id.clone(), t);
                }
                Err(e) => {
                    if !e.is_client_error() {
                        lost.insert(id.clone());
                    }
                    self.fail(&mut out, format!("topic {id}: {e}"), e.is_client_error(), true);
                }
            }
        }

        let question_ids = limit(unique(cases.iter().flat_map(|c| &c.questions)), self.opts.max_questions);
        let question_results = parallel_map(&question_ids, self.opts.parallelism, |id| {
            self.source.get_json(&format!("questions/{id}.json"))
        });
        let mut questions = BTreeMap::new();
        for (id, r) in question_ids.iter().zip(question_results) {
            match r.and_then(map_question) {
                Ok(q) => {
                    questions.insert(id.clone(), q);
                }
                Err(e) => {
                    if !e.is_client_error() {
                        lost.insert(format!("q:{id}"));
                    }
                    self.fail(&mut out, format!("question {id}: {e}"), e.is_client_error(), false);
                }
            }
        }

        let image_refs: Vec<String> = unique(cases.iter().flat_map(|c| &c.images)).cloned().collect();
        let image_results = parallel_map(&image_refs, self.opts.parallelism, |r| self.source.get(r));
        let mut images: BTreeMap<String, ResourceId> = BTreeMap::new();
        for (r, bytes) in image_refs.iter().zip(image_results) {
            match bytes {
                Ok(bytes) => {
                    let media = guess_media_type(r, &bytes);
                    let res = Resource::local(&bytes, media);
                    images.insert(r.clone(), out.add_resource(res, Some(bytes)));
                }
                Err(e) => {
                    if !e.is_client_error() {
                        lost.insert(format!("i:{r}"));
                    }
                    self.fail(&mut out, format!("image {r}: {e}"), e.is_client_error(), false);
                }
            }
        }

        // assemble; a case touched by a transport failure is left for a later run
        for c in cases {
            let incomplete = c.topics.iter().any(|t| lost.contains(t))
                || c.questions.iter().any(|q| lost.contains(&format!("q:{q}")))
                || c.images.iter().any(|i| lost.contains(&format!("i:{i}")));
            if incomplete {
                continue;
            }
            let known_topic = |t: &String| topics.contains_key(t) || cursor.done_topics.contains(t);
            match assemble_case(&c, &known_topic, &questions, &images) {
                Ok(tree) => {
                    cursor.done_cases.insert(c.id.clone());
                    let locator = self.source.url(&format!("cases/{}.json", c.id));
                    out.records.push(RawRecord::new(
                        c.id.clone(),
                        locator.map(|u| u.to_string()).unwrap_or_default(),
                        tree,
                    ));
                }
                Err(e) => out.skip(format!("case {}: {e}", c.id)),
            }
        }
        for (id, tree) in topics {
            cursor.done_topics.insert(id.clone());
            let locator = self.source.url(&format!("topics/{id}.json"));
            let mut r = RawRecord::new(id, locator.map(|u| u.to_string()).unwrap_or_default(), tree);
            r.auxiliary = true;
            out.records.push(r);
        }
        if out.interrupted.is_some() {
            out.cursor = Some(serde_json::to_value(&*cursor).expect("cursor encodes"));
        }
        Ok(out)
    }

    /// Follows the page chain. A transport failure part-way keeps the ids
    /// listed so far and reports the interruption.
    fn list_cases(&self, index: &Value) -> Result<(Vec<String>, Option<String>), ImportError> {
        let mut next = index
            .get("cases")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ImportError::Malformed("index.json: missing \"cases\" link".into()))?;
        let mut ids = Vec::new();
        let mut visited = BTreeSet::new();
        loop {
            if !visited.insert(next.clone()) {
                return Err(ImportError::Malformed(format!("page cycle at {next}")));
            }
            let page = match self.source.get_json(&next) {
                Ok(p) => p,
                Err(e) => return Ok((ids, Some(format!("listing {next}: {e}")))),
            };
            let listed = page
                .get("cases")
                .and_then(Value::as_array)
                .ok_or_else(|| ImportError::Malformed(format!("{next}: missing \"cases\"")))?;
            for id in listed {
                let id = id
                    .as_str()
                    .ok_or_else(|| ImportError::Malformed(format!("{next}: non-string case id")))?;
                if self.opts.max_cases.is_some_and(|m| ids.len() >= m) {
                    return Ok((ids, None));
                }
                ids.push(id.to_string());
            }
            match page.get("next").and_then(Value::as_str) {
                Some(n) => next = n.to_string(),
                None => return Ok((ids, None)),
            }
        }
    }

    /// Client errors skip the record; anything else interrupts the run.
    fn fail(&self, out: &mut Fetched, message: String, client_error: bool, record: bool) {
        if client_error {
            if record {
                out.skip(message);
            } else {
                out.messages.push(message);
            }
        } else if out.interrupted.is_none() {
            out.interrupted = Some(message);
        } else {
            out.messages.push(message);
        }
    }
}

fn unique<'a>(items: impl Iterator<Item = &'a String>) -> impl Iterator<Item = &'a String> {
    let mut seen = BTreeSet::new();
    items.filter(move |s| seen.insert(s.as_str()))
}

fn limit<'a>(items: impl Iterator<Item = &'a String>, max: Option<usize>) -> Vec<String> {
    items.take(max.unwrap_or(usize::MAX)).cloned().collect()
}

/// Runs `f` over `items` on up to `parallelism` threads; results keep the
/// input order.
fn parallel_map<T: Send>(
    items: &[String],
    parallelism: usize,
    f: impl Fn(&str) -> T + Sync,
) -> Vec<T> {
    if parallelism <= 1 || items.len() <= 1 {
        return items.iter().map(|i| f(i)).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..parallelism.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every slot is filled"))
        .collect()
}

fn strings(v: Option<&Value>) -> Result<Vec<String>, FetchError> {
    match v {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| {
                i.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| FetchError::Malformed(format!("expected string, got {i}")))
            })
            .collect(),
        Some(other) => Err(FetchError::Malformed(format!("expected array, got {other}"))),
    }
}

fn map_case(id: &str, v: Value) -> Result<CaseData, FetchError> {
    let Value::Object(json) = v else {
        return Err(FetchError::Malformed("case is not an object".into()));
    };
    let topics = strings(json.get("topics"))?;
    let questions = strings(json.get("questions"))?;
    let images = match json.get("images") {
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|i| i.get("file").and_then(Value::as_str).map(str::to_string))
            .collect(),
        _ => Vec::new(),
    };
    Ok(CaseData {
        id: id.to_string(),
        json,
        topics,
        questions,
        images,
    })
}

fn case_field_name(key: &str) -> String {
    match key {
        "questions" => "Quiz".into(),
        k => pascal(k),
    }
}

fn assemble_case(
    c: &CaseData,
    known_topic: &dyn Fn(&String) -> bool,
    questions: &BTreeMap<String, Mcq>,
    images: &BTreeMap<String, ResourceId>,
) -> Result<Vec<RawField>, String> {
    let mut hook = |key: &str, v: &Value| -> Option<Result<RawValue, String>> {
        match key {
            "topics" => Some(Ok(RawValue::List(
                c.topics
                    .iter()
                    .filter(|t| known_topic(t))
                    .map(|t| RawValue::Link(LinkTarget::document(t.clone())))
                    .collect(),
            ))),
            "questions" => Some(Ok(RawValue::List(
                c.questions
                    .iter()
                    .filter_map(|q| questions.get(q))
                    .map(|q| RawValue::Quiz(q.clone()))
                    .collect(),
            ))),
            "file" => {
                let r = v.as_str()?;
                // an image that could not be fetched drops out of the record
                Some(Ok(images
                    .get(r)
                    .map(|id| RawValue::Resource(id.clone()))
                    .unwrap_or(RawValue::List(Vec::new()))))
            }
            _ => None,
        }
    };
    let inner = fields(&c.json, &case_field_name, &mut hook)?;
    Ok(vec![RawField::new("Cases", RawValue::Record(inner))])
}

fn map_topic(_id: &str, v: Value) -> Result<Vec<RawField>, FetchError> {
    let Value::Object(json) = v else {
        return Err(FetchError::Malformed("topic is not an object".into()));
    };
    let mut hook = |key: &str, v: &Value| -> Option<Result<RawValue, String>> {
        if key != "externalLinks" {
            return None;
        }
        let urls = match strings(Some(v)) {
            Ok(u) => u,
            Err(e) => return Some(Err(e.to_string())),
        };
        Some(Ok(RawValue::List(
            urls.into_iter().map(|u| RawValue::Link(LinkTarget::url(u))).collect(),
        )))
    };
    let inner = fields(&json, &pascal, &mut hook).map_err(FetchError::Malformed)?;
    Ok(vec![RawField::new("Topic", RawValue::Record(inner))])
}

fn map_question(v: Value) -> Result<Mcq, FetchError> {
    let bad = |m: &str| FetchError::Malformed(format!("question: {m}"));
    let stem = v.get("stem").and_then(Value::as_str).ok_or_else(|| bad("missing stem"))?;
    let choices = strings(v.get("choices"))?;
    let answer = v
        .get("answer")
        .and_then(Value::as_u64)
        .ok_or_else(|| bad("missing answer index"))?;
    let q = Mcq {
        stem: stem.to_string(),
        choices,
        correct_index: answer as usize,
        explanation: v.get("explanation").and_then(Value::as_str).map(str::to_string),
    };
    q.check().map_err(|e| bad(&e))?;
    Ok(q)
}

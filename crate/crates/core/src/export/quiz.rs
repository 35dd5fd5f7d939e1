//! SCORM 1.2 runtime pieces: the per-document quiz SCO and the small
//! script that marks case pages completed.

use std::fmt::Write as _;

use super::html::{esc, page_head};
use crate::model::Mcq;

/// Included by every case page of a SCORM package.
pub(crate) const SCO_SCRIPT: &str = r#"// SCORM 1.2 page runtime: a case page is completed once viewed.
(function () {
  "use strict";
  function findAPI(win) {
    var tries = 0;
    while (win && !win.API && win.parent && win.parent !== win && tries < 500) {
      tries++;
      win = win.parent;
    }
    return win && win.API ? win.API : null;
  }
  var api = findAPI(window);
  if (!api && window.opener) api = findAPI(window.opener);
  if (!api) return;
  var done = false;
  api.LMSInitialize("");
  api.LMSSetValue("cmi.core.lesson_status", "completed");
  function finish() {
    if (done) return;
    done = true;
    api.LMSCommit("");
    api.LMSFinish("");
  }
  window.addEventListener("unload", finish);
})();
"#;

const QUIZ_RUNTIME: &str = r#"
  var api = null, started = false, finished = false, lastScore = null;

  function findAPI(win) {
    var tries = 0;
    while (win && !win.API && win.parent && win.parent !== win && tries < 500) {
      tries++;
      win = win.parent;
    }
    return win && win.API ? win.API : null;
  }

  function getAPI() {
    if (typeof window === "undefined") return null;
    var a = findAPI(window);
    if (!a && window.opener) a = findAPI(window.opener);
    return a;
  }

  function init() {
    if (started) return;
    started = true;
    api = getAPI();
    if (api) api.LMSInitialize("");
  }

  // answers[i] is the chosen option index for question i, or -1
  function score(answers) {
    var c = 0;
    for (var i = 0; i < KEY.length; i++) {
      if (answers[i] === KEY[i]) c++;
    }
    return Math.round(100 * c / KEY.length);
  }

  function finish() {
    if (finished || !api) return;
    finished = true;
    api.LMSCommit("");
    api.LMSFinish("");
  }

  function record(answers) {
    init();
    var s = score(answers);
    if (api && !finished) {
      api.LMSSetValue("cmi.core.score.raw", String(s));
      api.LMSSetValue("cmi.core.lesson_status", "completed");
      finish();
    }
    lastScore = s;
    return s;
  }

  function readForm() {
    var answers = [];
    for (var i = 0; i < KEY.length; i++) {
      answers.push(-1);
      var opts = document.getElementsByName("q" + i);
      for (var j = 0; j < opts.length; j++) {
        if (opts[j].checked) answers[i] = Number(opts[j].value);
      }
    }
    return answers;
  }

  function submit() {
    if (lastScore === null) {
      var s = record(readForm());
      var out = document.getElementById("result");
      if (out) out.textContent = "Score: " + s + "%";
    }
    return false;
  }

  if (typeof window !== "undefined" && window.addEventListener) {
    window.addEventListener("load", init);
    window.addEventListener("unload", finish);
  }

  return { key: KEY, init: init, score: score, record: record, submit: submit, finish: finish };
"#;

/// Quiz script with the answer key embedded. Exposes `RloQuiz`.
pub(crate) fn quiz_script(quizzes: &[&Mcq]) -> String {
    let key: Vec<String> = quizzes.iter().map(|q| q.correct_index.to_string()).collect();
    let mut out = String::from("// SCORM 1.2 quiz runtime.\nvar RloQuiz = (function () {\n  \"use strict\";\n");
    let _ = writeln!(out, "  var KEY = [{}];", key.join(", "));
    out.push_str(QUIZ_RUNTIME);
    out.push_str("})();\n");
    out
}

pub(crate) fn quiz_page(doc: &str, title: &str, quizzes: &[&Mcq]) -> String {
    let mut out = String::new();
    let script = format!("{}.js", esc(doc));
    page_head(&mut out, &format!("Quiz: {title}"), "../shared/style.css", &[&script]);
    let _ = writeln!(out, "<body data-quiz=\"{}\">", esc(doc));
    let _ = writeln!(out, "<h1>Quiz: {}</h1>", esc(title));
    out.push_str("<form id=\"quiz\" action=\"#\" onsubmit=\"return RloQuiz.submit();\">\n");
    for (i, q) in quizzes.iter().enumerate() {
        let _ = writeln!(out, "<fieldset class=\"mcq\" data-q=\"{i}\">");
        let _ = writeln!(out, "<legend>{}</legend>", esc(&q.stem));
        for (j, ch) in q.choices.iter().enumerate() {
            let _ = writeln!(
                out,
                "<label><input type=\"radio\" name=\"q{i}\" value=\"{j}\"/> {}</label><br/>",
                esc(ch)
            );
        }
        out.push_str("</fieldset>\n");
    }
    out.push_str("<button type=\"submit\">Submit</button>\n</form>\n<p id=\"result\"></p>\n</body>\n</html>\n");
    out
}

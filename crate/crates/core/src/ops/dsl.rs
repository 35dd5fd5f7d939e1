//! Line-oriented curation language.
//!
//! ```text
//! # comment
//! rename <path> as <NAME>
//! remove <path>
//! merge <path> into <path> [as <NAME>]
//! move <path> under <path> [at <INT>]
//! group <path> {, <path>} as <NAME>
//! ```
//!
//! Paths are `/NAME{/NAME}`; a NAME may be double-quoted to hold spaces,
//! both as a bare token and as a path segment (`/Cases/"Personal Data"`).
//! `move ... under /` targets the schema root.

use std::fmt;

use thiserror::Error;

use super::{CurationOp, CurationScript};
use crate::model::{check_name, ElementPath};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Path(ElementPath),
    Comma,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "{w:?}"),
            Tok::Quoted(q) => write!(f, "quoted name \"{q}\""),
            Tok::Path(p) => write!(f, "path {p}"),
            Tok::Comma => f.write_str("','"),
        }
    }
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Lexer {
    fn new(src: &str, line: usize) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn err(&self, col0: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: col0 + 1,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn is_boundary(c: Option<char>) -> bool {
        matches!(c, None | Some(',')) || c.is_some_and(char::is_whitespace)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while self.peek().is_some_and(char::is_whitespace) {
                self.pos += 1;
            }
            let start = self.pos;
            let Some(c) = self.peek() else { break };
            match c {
                '#' => break,
                ',' => {
                    self.pos += 1;
                    out.push((Tok::Comma, start));
                }
                '"' => {
                    let q = self.quoted()?;
                    if !Self::is_boundary(self.peek()) {
                        return Err(self.err(self.pos, "unexpected character after closing quote"));
                    }
                    out.push((Tok::Quoted(q), start));
                }
                '/' => {
                    let p = self.path()?;
                    out.push((Tok::Path(p), start));
                }
                _ => {
                    let w = self.bare(false)?;
                    out.push((Tok::Word(w), start));
                }
            }
        }
        Ok(out)
    }

    /// Reads `"..."`; the cursor sits on the opening quote.
    fn quoted(&mut self) -> Result<String, ParseError> {
        let open = self.pos;
        self.pos += 1;
        let mut s = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err(open, "unterminated quoted name")),
                Some('"') => {
                    self.pos += 1;
                    if self.peek() == Some('"') {
                        return Err(self.err(self.pos, "duplicate quote"));
                    }
                    return Ok(s);
                }
                Some(c) => {
                    s.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    /// Reads an unquoted run. Inside paths `/` also ends the run.
    fn bare(&mut self, in_path: bool) -> Result<String, ParseError> {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == ',' || (in_path && c == '/') {
                break;
            }
            if c == '"' {
                return Err(self.err(self.pos, "quote inside an unquoted name"));
            }
            s.push(c);
            self.pos += 1;
        }
        Ok(s)
    }

    fn path(&mut self) -> Result<ElementPath, ParseError> {
        let start = self.pos;
        let mut segments = Vec::new();
        while self.peek() == Some('/') {
            self.pos += 1;
            let seg_start = self.pos;
            let seg = if self.peek() == Some('"') {
                let q = self.quoted()?;
                if !(Self::is_boundary(self.peek()) || self.peek() == Some('/')) {
                    return Err(self.err(self.pos, "unexpected character after closing quote"));
                }
                q
            } else {
                self.bare(true)?
            };
            if seg.is_empty() {
                if segments.is_empty() && Self::is_boundary(self.peek()) {
                    return Ok(ElementPath::root());
                }
                return Err(self.err(seg_start, "empty path segment"));
            }
            if let Err(reason) = check_name(&seg) {
                return Err(self.err(seg_start, format!("invalid name {seg:?}: {reason}")));
            }
            segments.push(seg);
        }
        if !Self::is_boundary(self.peek()) {
            return Err(self.err(self.pos, "unexpected character in path"));
        }
        ElementPath::from_segments(segments).map_err(|e| self.err(start, e.to_string()))
    }
}

struct Line {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    width: usize,
}

impl Line {
    fn err(&self, col0: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: col0 + 1,
            message: message.into(),
        }
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.width, |t| t.1)
    }

    fn next(&mut self, what: &str) -> Result<(Tok, usize), ParseError> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.err(self.width, format!("expected {what}, found end of line")))?;
        self.pos += 1;
        Ok(t)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.next(&format!("'{kw}'"))? {
            (Tok::Word(w), _) if w == kw => Ok(()),
            (t, col) => Err(self.err(col, format!("expected '{kw}', found {t}"))),
        }
    }

    fn try_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.toks.get(self.pos), Some((Tok::Word(w), _)) if w == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn path(&mut self, allow_root: bool) -> Result<ElementPath, ParseError> {
        match self.next("a path")? {
            (Tok::Path(p), col) => {
                if p.is_root() && !allow_root {
                    Err(self.err(col, "the root path '/' is only allowed after 'under'"))
                } else {
                    Ok(p)
                }
            }
            (t, col) => Err(self.err(col, format!("expected a path, found {t}"))),
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        let (name, col) = match self.next("a name")? {
            (Tok::Word(w), col) | (Tok::Quoted(w), col) => (w, col),
            (t, col) => return Err(self.err(col, format!("expected a name, found {t}"))),
        };
        check_name(&name).map_err(|reason| self.err(col, format!("invalid name {name:?}: {reason}")))?;
        Ok(name)
    }

    fn int(&mut self) -> Result<usize, ParseError> {
        match self.next("an integer")? {
            (Tok::Word(w), col) => w
                .parse()
                .map_err(|_| self.err(col, format!("expected an integer, found {w:?}"))),
            (t, col) => Err(self.err(col, format!("expected an integer, found {t}"))),
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some((t, col)) => Err(self.err(*col, format!("unexpected {t}"))),
        }
    }
}

fn parse_line(toks: Vec<(Tok, usize)>, line: usize, width: usize) -> Result<CurationOp, ParseError> {
    let mut l = Line {
        toks,
        pos: 0,
        line,
        width,
    };
    let (verb, col) = l.next("a command")?;
    let op = match verb {
        Tok::Word(w) if w == "rename" => {
            let path = l.path(false)?;
            l.keyword("as")?;
            let new_name = l.name()?;
            CurationOp::Rename { path, new_name }
        }
        Tok::Word(w) if w == "remove" => CurationOp::Remove {
            path: l.path(false)?,
        },
        Tok::Word(w) if w == "merge" => {
            let source = l.path(false)?;
            l.keyword("into")?;
            let target = l.path(false)?;
            let new_name = if l.try_keyword("as") {
                Some(l.name()?)
            } else {
                None
            };
            CurationOp::Merge {
                source,
                target,
                new_name,
            }
        }
        Tok::Word(w) if w == "move" => {
            let path = l.path(false)?;
            l.keyword("under")?;
            let new_parent = l.path(true)?;
            let index = if l.try_keyword("at") {
                Some(l.int()?)
            } else {
                None
            };
            CurationOp::Move {
                path,
                new_parent,
                index,
            }
        }
        Tok::Word(w) if w == "group" => {
            let mut paths = vec![l.path(false)?];
            while matches!(l.toks.get(l.pos), Some((Tok::Comma, _))) {
                l.pos += 1;
                paths.push(l.path(false)?);
            }
            if !matches!(l.toks.get(l.pos), Some((Tok::Word(w), _)) if w == "as") {
                return Err(l.err(l.here(), "expected ',' or 'as'"));
            }
            l.keyword("as")?;
            let new_name = l.name()?;
            CurationOp::Group { paths, new_name }
        }
        t => {
            return Err(l.err(
                col,
                format!("unknown command {t}; expected rename, remove, merge, move or group"),
            ))
        }
    };
    l.end()?;
    Ok(op)
}

/// Parses curation text. Reports the first syntax error with its line and
/// column (both 1-based).
pub fn parse_script(text: &str) -> Result<CurationScript, ParseError> {
    let mut ops = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let toks = Lexer::new(raw, i + 1).tokens()?;
        if toks.is_empty() {
            continue;
        }
        ops.push(parse_line(toks, i + 1, raw.chars().count())?);
    }
    Ok(CurationScript {
        ops,
        source: text.to_string(),
    })
}

fn needs_quotes(name: &str, in_path: bool) -> bool {
    name.chars().any(|c| c.is_whitespace() || c == ',')
        || (!in_path && (name.starts_with('#') || name.starts_with('/')))
}

fn fmt_name(name: &str) -> String {
    if needs_quotes(name, false) {
        format!("\"{name}\"")
    } else {
        name.to_string()
    }
}

fn fmt_path(p: &ElementPath) -> String {
    if p.is_root() {
        return "/".into();
    }
    let mut s = String::new();
    for seg in p.segments() {
        s.push('/');
        if needs_quotes(seg, true) {
            s.push('"');
            s.push_str(seg);
            s.push('"');
        } else {
            s.push_str(seg);
        }
    }
    s
}

/// Renders one op as a single DSL line (no trailing newline).
pub fn print_op(op: &CurationOp) -> String {
    match op {
        CurationOp::Rename { path, new_name } => {
            format!("rename {} as {}", fmt_path(path), fmt_name(new_name))
        }
        CurationOp::Remove { path } => format!("remove {}", fmt_path(path)),
        CurationOp::Merge {
            source,
            target,
            new_name,
        } => {
            let mut s = format!("merge {} into {}", fmt_path(source), fmt_path(target));
            if let Some(n) = new_name {
                s.push_str(" as ");
                s.push_str(&fmt_name(n));
            }
            s
        }
        CurationOp::Move {
            path,
            new_parent,
            index,
        } => {
            let mut s = format!("move {} under {}", fmt_path(path), fmt_path(new_parent));
            if let Some(i) = index {
                s.push_str(&format!(" at {i}"));
            }
            s
        }
        CurationOp::Group { paths, new_name } => {
            let ps: Vec<String> = paths.iter().map(fmt_path).collect();
            format!("group {} as {}", ps.join(", "), fmt_name(new_name))
        }
    }
}

/// One op per line, LF-terminated.
pub fn print_script<'a>(ops: impl IntoIterator<Item = &'a CurationOp>) -> String {
    let mut out = String::new();
    for op in ops {
        out.push_str(&print_op(op));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> ElementPath {
        s.parse().unwrap()
    }

    #[test]
    fn empty_text_is_an_empty_script() {
        assert!(parse_script("").unwrap().ops.is_empty());
        assert!(parse_script("\n# only a comment\n   \n").unwrap().ops.is_empty());
    }

    #[test]
    fn group_with_quoted_name() {
        let s = parse_script("group /Cases/Sex, /Cases/Age as \"Personal Data\"").unwrap();
        assert_eq!(
            s.ops,
            [CurationOp::Group {
                paths: vec![p("/Cases/Sex"), p("/Cases/Age")],
                new_name: "Personal Data".into()
            }]
        );
    }

    #[test]
    fn merge_without_rename() {
        let s = parse_script("merge /Cases/Dx into /Cases/Diagnosis").unwrap();
        assert_eq!(
            s.ops,
            [CurationOp::Merge {
                source: p("/Cases/Dx"),
                target: p("/Cases/Diagnosis"),
                new_name: None
            }]
        );
    }

    #[test]
    fn every_form_parses() {
        let text = "rename /A/B as C\nremove /A/\"X Y\"/Z  # trailing comment\n\
                    merge /A/B into /A/C as \"B and C\"\nmove /A/B under / at 0\n\
                    move /A/B under /D\ngroup /A/B as G\n";
        let s = parse_script(text).unwrap();
        assert_eq!(s.ops.len(), 6);
        assert_eq!(s.ops[1], CurationOp::Remove { path: p("/A/X Y/Z") });
        assert_eq!(
            s.ops[3],
            CurationOp::Move {
                path: p("/A/B"),
                new_parent: ElementPath::root(),
                index: Some(0)
            }
        );
    }

    #[test]
    fn errors_carry_line_and_column() {
        let e = parse_script("remove /A\nrename /A/B to C").unwrap_err();
        assert_eq!((e.line, e.col), (2, 13));
        let e = parse_script("Rename /A as B").unwrap_err();
        assert_eq!((e.line, e.col), (1, 1));
        let e = parse_script("rename /A as \"B").unwrap_err();
        assert!(e.message.contains("unterminated"));
        let e = parse_script("rename /A as \"B\"\"C\"").unwrap_err();
        assert!(e.message.contains("duplicate quote"), "{e}");
        let e = parse_script("remove /").unwrap_err();
        assert!(e.message.contains("root"));
        let e = parse_script("remove /A//B").unwrap_err();
        assert_eq!(e.col, 11);
        let e = parse_script("move /A under /B at x").unwrap_err();
        assert!(e.message.contains("integer"));
        let e = parse_script("group /A /B as C").unwrap_err();
        assert_eq!(e.col, 10);
        let e = parse_script("remove /A extra").unwrap_err();
        assert!(e.message.contains("unexpected"));
        let e = parse_script("rename /A as \" B\"").unwrap_err();
        assert!(e.message.contains("whitespace"));
    }

    #[test]
    fn printing_quotes_only_when_needed() {
        let op = CurationOp::Group {
            paths: vec![p("/Cases/Sex"), p("/Cases/Age")],
            new_name: "Personal Data".into(),
        };
        assert_eq!(print_op(&op), "group /Cases/Sex, /Cases/Age as \"Personal Data\"");
        let op = CurationOp::Remove {
            path: p("/Cases/Personal Data/Age"),
        };
        assert_eq!(print_op(&op), "remove /Cases/\"Personal Data\"/Age");
    }
}

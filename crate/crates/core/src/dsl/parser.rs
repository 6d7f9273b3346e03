use std::collections::BTreeSet;

use super::ast::{Annotation, AnnotationArg, AnnotationName, DeclKind, Declaration, Location, Param, SourceFile};
use super::lexer::{is_ident_continue, is_ident_start, tokenize, Token, TokenKind};
use super::DslError;

/// Identifiers that never count as references to declarations.
const RESERVED: &[&str] = &[
    "fun",
    "val",
    "var",
    "object",
    "return",
    "if",
    "else",
    "when",
    "while",
    "for",
    "do",
    "in",
    "is",
    "as",
    "true",
    "false",
    "null",
    "this",
    "super",
    "try",
    "catch",
    "finally",
    "throw",
    "break",
    "continue",
    "class",
    "interface",
];

/// Parses one declaration-language file. CRLF line endings are accepted.
/// The first error aborts the file.
pub fn parse_file(source: &str, path: &str) -> Result<SourceFile, DslError> {
    let normalized = source.replace("\r\n", "\n");
    let tokens = tokenize(&normalized).map_err(|source| DslError::Lex {
        file: path.to_string(),
        source,
    })?;
    Parser {
        src: &normalized,
        file: path,
        tokens,
        pos: 0,
    }
    .file()
}

struct Parser<'a> {
    src: &'a str,
    file: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn current_line(&self) -> u32 {
        self.peek().or_else(|| self.tokens.last()).map_or(1, |t| t.line)
    }

    fn error(&self, expected: &str) -> DslError {
        let found = self
            .peek()
            .map_or_else(|| "end of input".to_string(), |t| format!("{:?} {:?}", t.kind, t.text));
        DslError::Parse {
            file: self.file.to_string(),
            line: self.current_line(),
            expected: expected.to_string(),
            found,
        }
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> Result<Token, DslError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                let t = t.clone();
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if self.peek().is_some_and(|t| t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn location(&self, line: u32) -> Location {
        Location {
            file: self.file.to_string(),
            line,
        }
    }

    fn file(mut self) -> Result<SourceFile, DslError> {
        let mut declarations: Vec<Declaration> = Vec::new();
        while self.peek().is_some() {
            let decl = self.declaration()?;
            if declarations.iter().any(|d| d.name == decl.name) {
                return Err(DslError::Parse {
                    file: self.file.to_string(),
                    line: decl.location.line,
                    expected: "unique declaration name".into(),
                    found: format!("duplicate {:?}", decl.name),
                });
            }
            declarations.push(decl);
        }
        Ok(SourceFile {
            path: self.file.to_string(),
            declarations,
        })
    }

    fn declaration(&mut self) -> Result<Declaration, DslError> {
        let mut annotations = Vec::new();
        while self.peek().is_some_and(|t| t.kind == TokenKind::At) {
            annotations.push(self.annotation()?);
        }
        let routing: Vec<_> = annotations.iter().filter(|a| a.name.is_routing()).collect();
        if routing.len() > 1 {
            return Err(DslError::Parse {
                file: self.file.to_string(),
                line: routing[1].location.line,
                expected: "at most one routing annotation".into(),
                found: format!("@{}", routing[1].name),
            });
        }

        let mut decl = match self.peek().map(|t| t.kind) {
            Some(TokenKind::KwFun) => self.function()?,
            Some(TokenKind::KwVal) => self.value()?,
            Some(TokenKind::KwObject) => self.object()?,
            _ => return Err(self.error("declaration (fun, val or object)")),
        };
        decl.body_refs.remove(&decl.name);
        decl.annotations = annotations;
        Ok(decl)
    }

    fn annotation(&mut self) -> Result<Annotation, DslError> {
        let at = self.expect(TokenKind::At, "'@'")?;
        let name_tok = self.expect(TokenKind::Ident, "annotation name")?;
        let name = AnnotationName::parse(&name_tok.text).ok_or_else(|| DslError::UnknownAnnotation {
            file: self.file.to_string(),
            name: name_tok.text.clone(),
            line: name_tok.line,
        })?;
        self.expect(TokenKind::LParen, "'('")?;
        let mut args = Vec::new();
        if !self.eat(TokenKind::RParen) {
            loop {
                args.push(self.annotation_arg()?);
                if self.eat(TokenKind::RParen) {
                    break;
                }
                self.expect(TokenKind::Comma, "',' or ')'")?;
            }
        }
        if args.len() != name.arity() {
            return Err(DslError::ArityMismatch {
                file: self.file.to_string(),
                name: name.to_string(),
                line: at.line,
                expected: name.arity(),
                found: args.len(),
            });
        }
        Ok(Annotation {
            name,
            args,
            location: self.location(at.line),
        })
    }

    fn annotation_arg(&mut self) -> Result<AnnotationArg, DslError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("annotation argument"));
        };
        match tok.kind {
            TokenKind::StringLit => {
                self.pos += 1;
                Ok(AnnotationArg::Str(tok.text))
            }
            TokenKind::IntLit => {
                self.pos += 1;
                tok.text
                    .parse()
                    .map(AnnotationArg::Int)
                    .map_err(|_| self.error("integer that fits in 64 bits"))
            }
            TokenKind::Ident => {
                self.pos += 1;
                let mut path = tok.text;
                while self.eat(TokenKind::Dot) {
                    let part = self.expect(TokenKind::Ident, "identifier after '.'")?;
                    path.push('.');
                    path.push_str(&part.text);
                }
                Ok(AnnotationArg::Ident(path))
            }
            _ => Err(self.error("string, integer or identifier argument")),
        }
    }

    fn function(&mut self) -> Result<Declaration, DslError> {
        let kw = self.expect(TokenKind::KwFun, "'fun'")?;
        let name = self.expect(TokenKind::Ident, "function name")?.text;
        self.expect(TokenKind::LParen, "'('")?;
        let mut params = Vec::new();
        if !self.eat(TokenKind::RParen) {
            loop {
                let pname = self.expect(TokenKind::Ident, "parameter name")?.text;
                self.expect(TokenKind::Colon, "':'")?;
                let ty = self.expect(TokenKind::Ident, "parameter type")?.text;
                params.push(Param {
                    name: pname,
                    type_name: ty,
                });
                if self.eat(TokenKind::RParen) {
                    break;
                }
                self.expect(TokenKind::Comma, "',' or ')'")?;
            }
        }
        let return_type = if self.eat(TokenKind::Colon) {
            Some(self.expect(TokenKind::Ident, "return type")?.text)
        } else {
            None
        };
        let body = self.expect(TokenKind::BodyText, "function body")?;
        let mut body_refs = identifiers_in(&body.text);
        for p in &params {
            body_refs.remove(&p.name);
        }
        Ok(Declaration {
            kind: DeclKind::Function,
            name,
            annotations: Vec::new(),
            params,
            return_type,
            initializer: None,
            body_refs,
            location: self.location(kw.line),
        })
    }

    fn value(&mut self) -> Result<Declaration, DslError> {
        let kw = self.expect(TokenKind::KwVal, "'val'")?;
        let name = self.expect(TokenKind::Ident, "value name")?.text;
        let eq = self.expect(TokenKind::Equals, "'='")?;
        let start = self.pos;
        while self.peek().is_some_and(|t| t.line == eq.line) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("initializer on the same line as '='"));
        }
        let rest = &self.tokens[start..self.pos];
        let initializer = self.src[rest[0].span.start..rest[rest.len() - 1].span.end].to_string();
        let body_refs = rest
            .iter()
            .filter(|t| t.kind == TokenKind::Ident && !RESERVED.contains(&t.text.as_str()))
            .map(|t| t.text.clone())
            .collect();
        Ok(Declaration {
            kind: DeclKind::Value,
            name,
            annotations: Vec::new(),
            params: Vec::new(),
            return_type: None,
            initializer: Some(initializer),
            body_refs,
            location: self.location(kw.line),
        })
    }

    fn object(&mut self) -> Result<Declaration, DslError> {
        let kw = self.expect(TokenKind::KwObject, "'object'")?;
        let name = self.expect(TokenKind::Ident, "object name")?.text;
        let body = self.expect(TokenKind::BodyText, "object body")?;
        Ok(Declaration {
            kind: DeclKind::Object,
            name,
            annotations: Vec::new(),
            params: Vec::new(),
            return_type: None,
            initializer: None,
            body_refs: identifiers_in(&body.text),
            location: self.location(kw.line),
        })
    }
}

/// Collects identifiers from uninterpreted body text. Comments and plain
/// string contents are skipped; `$name` and `${...}` string templates are
/// scanned since they can mention declarations.
pub(crate) fn identifiers_in(body: &str) -> BTreeSet<String> {
    let chars: Vec<char> = body.chars().collect();
    let mut out = BTreeSet::new();
    let mut i = 0;

    let take_ident = |i: &mut usize, out: &mut BTreeSet<String>| {
        let start = *i;
        while *i < chars.len() && is_ident_continue(chars[*i]) {
            *i += 1;
        }
        let word: String = chars[start..*i].iter().collect();
        if !RESERVED.contains(&word.as_str()) {
            out.insert(word);
        }
    };

    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if c == '/' && next == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && next == Some('*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i += 2;
        } else if c == '"' {
            let triple = chars.get(i + 1) == Some(&'"') && chars.get(i + 2) == Some(&'"');
            i += if triple { 3 } else { 1 };
            while i < chars.len() {
                if triple {
                    if chars[i] == '"' && chars.get(i + 1) == Some(&'"') && chars.get(i + 2) == Some(&'"') {
                        i += 3;
                        break;
                    }
                } else if chars[i] == '"' {
                    i += 1;
                    break;
                } else if chars[i] == '\\' {
                    i += 2;
                    continue;
                }
                if chars[i] == '$' && chars.get(i + 1) == Some(&'{') {
                    i += 2;
                    while i < chars.len() && chars[i] != '}' {
                        if is_ident_start(chars[i]) {
                            take_ident(&mut i, &mut out);
                        } else {
                            i += 1;
                        }
                    }
                } else if chars[i] == '$' && chars.get(i + 1).is_some_and(|&c| is_ident_start(c)) {
                    i += 1;
                    take_ident(&mut i, &mut out);
                    continue;
                }
                i += 1;
            }
        } else if c == '\'' {
            i += 1;
            while i < chars.len() && chars[i] != '\'' {
                i += if chars[i] == '\\' { 2 } else { 1 };
            }
            i += 1;
        } else if c.is_ascii_digit() {
            while i < chars.len() && (is_ident_continue(chars[i]) || chars[i] == '.') {
                i += 1;
            }
        } else if is_ident_start(c) {
            take_ident(&mut i, &mut out);
        } else {
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const STATIC_SITE: &str = "@StaticGet(\"/style.css\", MimeType.CSS)\nval style = File(\"css/style.css\")\n";
    const HELLO_WORLD: &str = "@Get(\"/\")\nfun root(): String {\n    return \"Hello world!\"\n}\n";

    #[test]
    fn hello_world() {
        let file = parse_file(HELLO_WORLD, "app.kls").unwrap();
        assert_eq!(file.declarations.len(), 1);
        let root = &file.declarations[0];
        assert_eq!(root.kind, DeclKind::Function);
        assert_eq!(root.name, "root");
        assert_eq!(root.annotations[0].name, AnnotationName::Get);
        assert_eq!(root.annotations[0].args, vec![AnnotationArg::Str("/".into())]);
        assert!(root.params.is_empty());
        assert_eq!(root.return_type.as_deref(), Some("String"));
        assert!(root.body_refs.is_empty());
        assert_eq!(root.location.line, 2);
    }

    #[test]
    fn static_site() {
        let file = parse_file(STATIC_SITE, "static.kls").unwrap();
        let style = &file.declarations[0];
        assert_eq!(style.kind, DeclKind::Value);
        assert_eq!(style.name, "style");
        assert_eq!(
            style.annotations[0].args,
            vec![
                AnnotationArg::Str("/style.css".into()),
                AnnotationArg::Ident("MimeType.CSS".into())
            ]
        );
        assert_eq!(style.initializer.as_deref(), Some("File(\"css/style.css\")"));
        assert_eq!(style.body_refs, BTreeSet::from(["File".to_string()]));
    }

    #[test]
    fn crlf_is_normalized() {
        let crlf = HELLO_WORLD.replace('\n', "\r\n");
        assert_eq!(
            parse_file(&crlf, "a.kls").unwrap(),
            parse_file(HELLO_WORLD, "a.kls").unwrap()
        );
    }

    #[test]
    fn unknown_annotation() {
        assert_eq!(
            parse_file("@Gett(\"/\") fun f() {}", "x.kls"),
            Err(DslError::UnknownAnnotation {
                file: "x.kls".into(),
                name: "Gett".into(),
                line: 1
            })
        );
    }

    #[test]
    fn arity_mismatch() {
        let err = parse_file("@StaticGet(\"/a.css\")\nval a = File(\"a.css\")", "x.kls").unwrap_err();
        assert!(matches!(
            err,
            DslError::ArityMismatch {
                expected: 2,
                found: 1,
                ..
            }
        ));
    }

    #[test]
    fn syntax_errors_report_line() {
        let err = parse_file("\n\nfun f(a Int) {}", "x.kls").unwrap_err();
        match err {
            DslError::Parse { line, expected, .. } => {
                assert_eq!(line, 3);
                assert_eq!(expected, "':'");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_file("@Get(\"/\")", "x.kls"),
            Err(DslError::Parse { .. })
        ));
        assert!(matches!(parse_file("val x =\n1", "x.kls"), Err(DslError::Parse { .. })));
    }

    #[test]
    fn two_routing_annotations_rejected() {
        let err = parse_file("@Get(\"/\")\n@Post(\"/\")\nfun f() {}", "x.kls").unwrap_err();
        assert!(matches!(err, DslError::Parse { line: 2, .. }));
    }

    #[test]
    fn duplicate_declaration_rejected() {
        let err = parse_file("fun f() {}\nval f = 1", "x.kls").unwrap_err();
        assert!(matches!(err, DslError::Parse { line: 2, .. }));
    }

    #[test]
    fn body_refs_exclude_params_keywords_and_self() {
        let src = "fun get(id: String): String {\n  // Ignored comment mentions Secret\n  val r = Storage.table.get(id)\n  return \"user ${Users.name} $Audit\" + get(id)\n}";
        let file = parse_file(src, "x.kls").unwrap();
        let refs: Vec<_> = file.declarations[0].body_refs.iter().cloned().collect();
        assert_eq!(refs, vec!["Audit", "Storage", "Users", "name", "r", "table"]);
    }

    #[test]
    fn object_declaration() {
        let src = "@DynamoDBTable(\"id\", ReadWrite)\nobject Storage {\n    val table = DynamoTable(\"id\")\n}\n";
        let file = parse_file(src, "x.kls").unwrap();
        let d = &file.declarations[0];
        assert_eq!(d.kind, DeclKind::Object);
        assert_eq!(d.annotations[0].args[1], AnnotationArg::Ident("ReadWrite".into()));
        assert_eq!(
            d.body_refs,
            BTreeSet::from(["DynamoTable".to_string(), "table".to_string()])
        );
    }
}

//! Front end for the annotated declaration language (`.kls` files).
//!
//! The language is a small Kotlin-flavored subset: top-level `fun`, `val` and
//! `object` declarations preceded by annotations. Function and object bodies
//! are not interpreted; the parser only records which identifiers they
//! mention, which is what the permission analysis needs.

mod ast;
mod lexer;
mod parser;

pub use ast::{Annotation, AnnotationArg, AnnotationName, DeclKind, Declaration, Location, Param, SourceFile};
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::parse_file;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("{file}: {source}")]
    Lex {
        file: String,
        #[source]
        source: LexError,
    },
    #[error("{file}:{line}: ParseError: expected {expected}, found {found}")]
    Parse {
        file: String,
        line: u32,
        expected: String,
        found: String,
    },
    #[error("{file}:{line}: UnknownAnnotation: @{name}")]
    UnknownAnnotation { file: String, name: String, line: u32 },
    #[error("{file}:{line}: ArityMismatch: @{name} takes {expected} argument(s), got {found}")]
    ArityMismatch {
        file: String,
        name: String,
        line: u32,
        expected: usize,
        found: usize,
    },
    #[error("{location}: MalformedInitializer: expected File(\"<path>\"), found {initializer:?}")]
    MalformedInitializer { location: Location, initializer: String },
}

/// Returns the path inside a `File("<path>")` initializer.
pub fn extract_static_path(decl: &Declaration) -> Result<String, DslError> {
    let malformed = || DslError::MalformedInitializer {
        location: decl.location.clone(),
        initializer: decl.initializer.clone().unwrap_or_default(),
    };
    let init = decl.initializer.as_deref().ok_or_else(malformed)?;
    let tokens = tokenize(init).map_err(|_| malformed())?;
    match tokens.as_slice() {
        [f, open, path, close]
            if f.kind == TokenKind::Ident
                && f.text == "File"
                && open.kind == TokenKind::LParen
                && path.kind == TokenKind::StringLit
                && close.kind == TokenKind::RParen =>
        {
            Ok(path.text.clone())
        }
        _ => Err(malformed()),
    }
}

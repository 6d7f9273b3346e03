use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Where a declaration or annotation appears in its source file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub line: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

/// The annotations understood by the front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnnotationName {
    Get,
    Post,
    StaticGet,
    DynamoDBTable,
}

impl AnnotationName {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "Get" => Some(Self::Get),
            "Post" => Some(Self::Post),
            "StaticGet" => Some(Self::StaticGet),
            "DynamoDBTable" => Some(Self::DynamoDBTable),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Get => "Get",
            Self::Post => "Post",
            Self::StaticGet => "StaticGet",
            Self::DynamoDBTable => "DynamoDBTable",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Self::Get | Self::Post => 1,
            Self::StaticGet | Self::DynamoDBTable => 2,
        }
    }

    /// Routing annotations turn a declaration into an HTTP endpoint.
    pub fn is_routing(self) -> bool {
        matches!(self, Self::Get | Self::Post | Self::StaticGet)
    }
}

impl fmt::Display for AnnotationName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum AnnotationArg {
    Str(String),
    Int(i64),
    /// A bare, possibly dotted, identifier path such as `MimeType.CSS`.
    Ident(String),
}

impl AnnotationArg {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Self::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_ident(&self) -> Option<&str> {
        match self {
            Self::Ident(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for AnnotationArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Self::Int(n) => write!(f, "{n}"),
            Self::Ident(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub name: AnnotationName,
    pub args: Vec<AnnotationArg>,
    pub location: Location,
}

impl fmt::Display for Annotation {
    /// Renders the annotation back into source form, e.g. `@Get("/")`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}(", self.name)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{arg}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeclKind {
    Function,
    Value,
    Object,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub kind: DeclKind,
    pub name: String,
    pub annotations: Vec<Annotation>,
    pub params: Vec<Param>,
    pub return_type: Option<String>,
    pub initializer: Option<String>,
    /// Identifiers mentioned in the body or initializer. Lexical only: no
    /// scoping or name resolution is applied.
    pub body_refs: BTreeSet<String>,
    pub location: Location,
}

impl Declaration {
    pub fn annotation(&self, name: AnnotationName) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.name == name)
    }

    pub fn routing_annotation(&self) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.name.is_routing())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub declarations: Vec<Declaration>,
}

impl SourceFile {
    pub fn declaration(&self, name: &str) -> Option<&Declaration> {
        self.declarations.iter().find(|d| d.name == name)
    }
}

//! The cloud-agnostic serverless schema built from parsed source files.

mod path;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{extract_static_path, AnnotationArg, AnnotationName, DeclKind, Declaration, Location, SourceFile};

pub use path::{join_segments, normalize_path, split_path, InvalidPath, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HttpMethod {
    #[serde(rename = "GET")]
    Get,
    #[serde(rename = "POST")]
    Post,
}

impl HttpMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Get => "GET",
            Self::Post => "POST",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "GET" => Some(Self::Get),
            "POST" => Some(Self::Post),
            _ => None,
        }
    }
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Type of a handler parameter or return value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ValueType {
    Int,
    Long,
    Float,
    Double,
    Boolean,
    String,
    Unit,
    /// Anything else; only usable at runtime through a registered converter.
    Custom(std::string::String),
}

impl ValueType {
    pub fn from_name(name: &str) -> Self {
        match name {
            "Int" => Self::Int,
            "Long" => Self::Long,
            "Float" => Self::Float,
            "Double" => Self::Double,
            "Boolean" => Self::Boolean,
            "String" => Self::String,
            "Unit" => Self::Unit,
            other => Self::Custom(other.to_string()),
        }
    }

    pub fn is_primitive(&self) -> bool {
        !matches!(self, Self::Unit | Self::Custom(_))
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Custom(name) => f.write_str(name),
            other => write!(f, "{other:?}"),
        }
    }
}

/// A declaration, identified by file and name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub file: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RouteParam {
    pub name: String,
    pub ty: ValueType,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DynamicRoute {
    pub method: HttpMethod,
    pub path: String,
    pub handler: EntityRef,
    pub params: Vec<RouteParam>,
    pub return_type: ValueType,
    pub line: u32,
}

impl DynamicRoute {
    /// Parameters that are not bound to a `{segment}` of the path.
    pub fn query_params(&self) -> impl Iterator<Item = &RouteParam> {
        let bound: BTreeSet<String> = split_path(&self.path)
            .unwrap_or_default()
            .into_iter()
            .filter_map(|s| match s {
                Segment::Param(p) => Some(p),
                Segment::Literal(_) => None,
            })
            .collect();
        self.params.iter().filter(move |p| !bound.contains(&p.name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MimeType {
    #[serde(rename = "CSS")]
    Css,
    #[serde(rename = "HTML")]
    Html,
    #[serde(rename = "JS")]
    Js,
    #[serde(rename = "PNG")]
    Png,
    #[serde(rename = "JPEG")]
    Jpeg,
    #[serde(rename = "JSON")]
    Json,
    #[serde(rename = "TXT")]
    Txt,
    #[serde(rename = "BIN")]
    Bin,
}

impl MimeType {
    /// Accepts `MimeType.CSS` as well as the bare `CSS`.
    pub fn from_identifier(ident: &str) -> Option<Self> {
        let name = ident.strip_prefix("MimeType.").unwrap_or(ident);
        Some(match name {
            "CSS" => Self::Css,
            "HTML" => Self::Html,
            "JS" => Self::Js,
            "PNG" => Self::Png,
            "JPEG" => Self::Jpeg,
            "JSON" => Self::Json,
            "TXT" => Self::Txt,
            "BIN" => Self::Bin,
            _ => return None,
        })
    }

    pub fn content_type(self) -> &'static str {
        match self {
            Self::Css => "text/css",
            Self::Html => "text/html",
            Self::Js => "application/javascript",
            Self::Png => "image/png",
            Self::Jpeg => "image/jpeg",
            Self::Json => "application/json",
            Self::Txt => "text/plain",
            Self::Bin => "application/octet-stream",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StaticRoute {
    pub path: String,
    pub mime: MimeType,
    pub source_file: String,
    pub origin: Location,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CloudService {
    DynamoDB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AccessMode {
    Read,
    Write,
    ReadWrite,
}

impl AccessMode {
    pub fn from_identifier(ident: &str) -> Option<Self> {
        let name = ident.rsplit('.').next().unwrap_or(ident);
        match name {
            "Read" => Some(Self::Read),
            "Write" => Some(Self::Write),
            "ReadWrite" => Some(Self::ReadWrite),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PermissionGrant {
    pub entity: EntityRef,
    pub service: CloudService,
    pub resource_name: String,
    pub mode: AccessMode,
    pub line: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WarmingConfig {
    pub enabled: bool,
    pub period_minutes: u32,
}

impl Default for WarmingConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            period_minutes: 5,
        }
    }
}

/// Project-level inputs to [`build_schema`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaConfig {
    pub app_name: String,
    pub warming: WarmingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub app_name: String,
    pub dynamic_routes: Vec<DynamicRoute>,
    pub static_routes: Vec<StaticRoute>,
    pub grants: Vec<PermissionGrant>,
    pub warming: WarmingConfig,
    pub declarations: Vec<SourceFile>,
}

impl Schema {
    /// Compact JSON with sorted keys. Byte-stable for equal schemas.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("schema is always serializable");
        serde_json::to_string(&value).expect("json value is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn declaration(&self, entity: &EntityRef) -> Option<&Declaration> {
        self.declarations
            .iter()
            .find(|f| f.path == entity.file)
            .and_then(|f| f.declaration(&entity.name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SchemaErrorKind {
    DuplicateRoute { method: HttpMethod, path: String },
    UnknownMime { identifier: String },
    EmptyStaticSource { path: String },
    UnresolvedHandler { name: String },
    UnsupportedParamType { name: String, ty: String },
    UnsupportedReturnType { handler: String, ty: String },
    PathParamMismatch { route: String, reason: String },
    ConflictingPathParams { route: String, other: String },
    InvalidPath { raw: String, reason: String },
    MalformedInitializer { name: String, initializer: String },
    MisplacedAnnotation { annotation: String, name: String },
    InvalidArgument { annotation: String, reason: String },
    DuplicateGrant { entity: String, resource: String },
}

impl fmt::Display for SchemaErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateRoute { method, path } => write!(f, "DuplicateRoute({method}, {path:?})"),
            Self::UnknownMime { identifier } => write!(f, "UnknownMime({identifier})"),
            Self::EmptyStaticSource { path } => write!(f, "EmptyStaticSource({path:?})"),
            Self::UnresolvedHandler { name } => write!(f, "UnresolvedHandler({name})"),
            Self::UnsupportedParamType { name, ty } => write!(f, "UnsupportedParamType({name}, {ty})"),
            Self::UnsupportedReturnType { handler, ty } => {
                write!(f, "UnsupportedReturnType({handler}, {ty})")
            }
            Self::PathParamMismatch { route, reason } => write!(f, "PathParamMismatch({route:?}): {reason}"),
            Self::ConflictingPathParams { route, other } => {
                write!(f, "ConflictingPathParams({route:?}, {other:?})")
            }
            Self::InvalidPath { raw, reason } => write!(f, "InvalidPath({raw:?}): {reason}"),
            Self::MalformedInitializer { name, initializer } => {
                write!(
                    f,
                    "MalformedInitializer({name}): expected File(\"<path>\"), found {initializer:?}"
                )
            }
            Self::MisplacedAnnotation { annotation, name } => {
                write!(f, "MisplacedAnnotation(@{annotation} on {name})")
            }
            Self::InvalidArgument { annotation, reason } => write!(f, "InvalidArgument(@{annotation}): {reason}"),
            Self::DuplicateGrant { entity, resource } => write!(f, "DuplicateGrant({entity}, {resource:?})"),
        }
    }
}

/// A schema problem with the source position it came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Error)]
#[error("{file}:{line}: {kind}")]
pub struct SchemaError {
    pub file: String,
    pub line: u32,
    pub kind: SchemaErrorKind,
}

impl SchemaError {
    fn at(file: &str, line: u32, kind: SchemaErrorKind) -> Self {
        Self {
            file: file.to_string(),
            line,
            kind,
        }
    }
}

/// Builds the schema for a set of parsed files.
///
/// Files are processed in path order and routes are sorted by
/// `(method, path)`, so the result does not depend on the input order.
pub fn build_schema(files: &[SourceFile], config: &SchemaConfig) -> Result<Schema, Vec<SchemaError>> {
    let mut files = files.to_vec();
    files.sort_by(|a, b| a.path.cmp(&b.path));

    let mut errors = Vec::new();
    let mut dynamic_routes = Vec::new();
    let mut static_routes = Vec::new();
    let mut grants = Vec::new();

    for file in &files {
        for decl in &file.declarations {
            for ann in &decl.annotations {
                let err = |kind| SchemaError::at(&file.path, ann.location.line, kind);
                let result = match ann.name {
                    AnnotationName::Get | AnnotationName::Post => {
                        dynamic_route(file, decl, ann.name, &ann.args).map(|r| dynamic_routes.push(r))
                    }
                    AnnotationName::StaticGet => static_route(decl, &ann.args).map(|r| static_routes.push(r)),
                    AnnotationName::DynamoDBTable => grant(file, decl, &ann.args).map(|g| grants.push(g)),
                };
                if let Err(kind) = result {
                    errors.push(err(kind));
                }
            }
        }
    }

    dynamic_routes.sort_by(|a: &DynamicRoute, b| (a.method, &a.path, &a.handler).cmp(&(b.method, &b.path, &b.handler)));
    static_routes.sort_by(|a: &StaticRoute, b| (&a.path, &a.origin).cmp(&(&b.path, &b.origin)));
    grants.sort_by(|a: &PermissionGrant, b| {
        (&a.entity, a.service, &a.resource_name, a.mode).cmp(&(&b.entity, b.service, &b.resource_name, b.mode))
    });

    let schema = Schema {
        app_name: config.app_name.clone(),
        dynamic_routes,
        static_routes,
        grants,
        warming: config.warming,
        declarations: files,
    };
    errors.extend(validate_schema(&schema));
    if errors.is_empty() {
        Ok(schema)
    } else {
        errors.sort();
        errors.dedup();
        Err(errors)
    }
}

fn string_arg<'a>(ann: AnnotationName, arg: &'a AnnotationArg, what: &str) -> Result<&'a str, SchemaErrorKind> {
    arg.as_str().ok_or_else(|| SchemaErrorKind::InvalidArgument {
        annotation: ann.to_string(),
        reason: format!("{what} must be a string literal, found {arg}"),
    })
}

fn dynamic_route(
    file: &SourceFile,
    decl: &Declaration,
    ann: AnnotationName,
    args: &[AnnotationArg],
) -> Result<DynamicRoute, SchemaErrorKind> {
    if decl.kind != DeclKind::Function {
        return Err(SchemaErrorKind::MisplacedAnnotation {
            annotation: ann.to_string(),
            name: decl.name.clone(),
        });
    }
    let raw = string_arg(ann, &args[0], "route path")?;
    let path = normalize_path(raw).map_err(|e| SchemaErrorKind::InvalidPath {
        raw: e.raw,
        reason: e.reason,
    })?;
    Ok(DynamicRoute {
        method: if ann == AnnotationName::Get {
            HttpMethod::Get
        } else {
            HttpMethod::Post
        },
        path,
        handler: EntityRef {
            file: file.path.clone(),
            name: decl.name.clone(),
        },
        params: decl
            .params
            .iter()
            .map(|p| RouteParam {
                name: p.name.clone(),
                ty: ValueType::from_name(&p.type_name),
            })
            .collect(),
        return_type: decl
            .return_type
            .as_deref()
            .map_or(ValueType::Unit, ValueType::from_name),
        line: decl.location.line,
    })
}

fn static_route(decl: &Declaration, args: &[AnnotationArg]) -> Result<StaticRoute, SchemaErrorKind> {
    let ann = AnnotationName::StaticGet;
    if decl.kind != DeclKind::Value {
        return Err(SchemaErrorKind::MisplacedAnnotation {
            annotation: ann.to_string(),
            name: decl.name.clone(),
        });
    }
    let raw = string_arg(ann, &args[0], "route path")?;
    let path = normalize_path(raw).map_err(|e| SchemaErrorKind::InvalidPath {
        raw: e.raw,
        reason: e.reason,
    })?;
    let ident = args[1].as_ident().ok_or_else(|| SchemaErrorKind::InvalidArgument {
        annotation: ann.to_string(),
        reason: format!(
            "MIME type must be an identifier such as MimeType.CSS, found {}",
            args[1]
        ),
    })?;
    let mime = MimeType::from_identifier(ident).ok_or_else(|| SchemaErrorKind::UnknownMime {
        identifier: ident.to_string(),
    })?;
    let source_file = extract_static_path(decl).map_err(|_| SchemaErrorKind::MalformedInitializer {
        name: decl.name.clone(),
        initializer: decl.initializer.clone().unwrap_or_default(),
    })?;
    Ok(StaticRoute {
        path,
        mime,
        source_file,
        origin: decl.location.clone(),
    })
}

fn grant(file: &SourceFile, decl: &Declaration, args: &[AnnotationArg]) -> Result<PermissionGrant, SchemaErrorKind> {
    let ann = AnnotationName::DynamoDBTable;
    let table = string_arg(ann, &args[0], "table name")?;
    if table.is_empty() {
        return Err(SchemaErrorKind::InvalidArgument {
            annotation: ann.to_string(),
            reason: "table name is empty".into(),
        });
    }
    let mode = args[1]
        .as_ident()
        .and_then(AccessMode::from_identifier)
        .ok_or_else(|| SchemaErrorKind::InvalidArgument {
            annotation: ann.to_string(),
            reason: format!("access mode must be Read, Write or ReadWrite, found {}", args[1]),
        })?;
    Ok(PermissionGrant {
        entity: EntityRef {
            file: file.path.clone(),
            name: decl.name.clone(),
        },
        service: CloudService::DynamoDB,
        resource_name: table.to_string(),
        mode,
        line: decl.location.line,
    })
}

/// Checks every schema invariant. An empty result means the schema can be
/// synthesized and loaded by the dispatcher.
pub fn validate_schema(schema: &Schema) -> Vec<SchemaError> {
    let mut errors = Vec::new();
    let mut seen: BTreeMap<(HttpMethod, &str), ()> = BTreeMap::new();
    let mut get_paths = BTreeSet::new();
    // Parameter name used at each (parent prefix, position) for API Gateway
    // sibling uniqueness.
    let mut param_slots: BTreeMap<String, (String, String)> = BTreeMap::new();

    for route in &schema.dynamic_routes {
        let file = route.handler.file.as_str();
        let err = |kind| SchemaError::at(file, route.line, kind);

        if seen.insert((route.method, route.path.as_str()), ()).is_some() {
            errors.push(err(SchemaErrorKind::DuplicateRoute {
                method: route.method,
                path: route.path.clone(),
            }));
        }
        if route.method == HttpMethod::Get {
            get_paths.insert(route.path.as_str());
        }

        match schema.declaration(&route.handler) {
            Some(d) if d.kind == DeclKind::Function => {}
            _ => errors.push(err(SchemaErrorKind::UnresolvedHandler {
                name: route.handler.name.clone(),
            })),
        }

        for p in &route.params {
            if !p.ty.is_primitive() {
                errors.push(err(SchemaErrorKind::UnsupportedParamType {
                    name: p.name.clone(),
                    ty: p.ty.to_string(),
                }));
            }
        }
        if !(route.return_type.is_primitive() || route.return_type == ValueType::Unit) {
            errors.push(err(SchemaErrorKind::UnsupportedReturnType {
                handler: route.handler.name.clone(),
                ty: route.return_type.to_string(),
            }));
        }

        let segments = match split_path(&route.path) {
            Ok(s) if join_segments(&s) == route.path => s,
            Ok(_) => {
                errors.push(err(SchemaErrorKind::InvalidPath {
                    raw: route.path.clone(),
                    reason: "path is not normalized".into(),
                }));
                continue;
            }
            Err(e) => {
                errors.push(err(SchemaErrorKind::InvalidPath {
                    raw: e.raw,
                    reason: e.reason,
                }));
                continue;
            }
        };

        let mut path_params = BTreeSet::new();
        for (i, seg) in segments.iter().enumerate() {
            let Segment::Param(name) = seg else { continue };
            if !path_params.insert(name.as_str()) {
                errors.push(err(SchemaErrorKind::PathParamMismatch {
                    route: route.path.clone(),
                    reason: format!("path parameter {{{name}}} appears more than once"),
                }));
            }
            if !route.params.iter().any(|p| &p.name == name) {
                errors.push(err(SchemaErrorKind::PathParamMismatch {
                    route: route.path.clone(),
                    reason: format!("path parameter {{{name}}} has no matching function parameter"),
                }));
            }
            let parent = join_segments(&segments[..i]);
            match param_slots.get(&parent) {
                Some((existing, other)) if existing != name => {
                    errors.push(err(SchemaErrorKind::ConflictingPathParams {
                        route: route.path.clone(),
                        other: other.clone(),
                    }));
                }
                Some(_) => {}
                None => {
                    param_slots.insert(parent, (name.clone(), route.path.clone()));
                }
            }
        }
    }

    let mut static_paths = BTreeSet::new();
    for st in &schema.static_routes {
        let err = |kind| SchemaError::at(&st.origin.file, st.origin.line, kind);
        match normalize_path(&st.path) {
            Ok(p) if p == st.path => {}
            _ => errors.push(err(SchemaErrorKind::InvalidPath {
                raw: st.path.clone(),
                reason: "path is not normalized".into(),
            })),
        }
        if split_path(&st.path).is_ok_and(|s| s.iter().any(|seg| !seg.is_literal())) {
            errors.push(err(SchemaErrorKind::InvalidPath {
                raw: st.path.clone(),
                reason: "static routes cannot have path parameters".into(),
            }));
        }
        if st.source_file.is_empty() {
            errors.push(err(SchemaErrorKind::EmptyStaticSource { path: st.path.clone() }));
        }
        if !static_paths.insert(st.path.as_str()) || get_paths.contains(st.path.as_str()) {
            errors.push(err(SchemaErrorKind::DuplicateRoute {
                method: HttpMethod::Get,
                path: st.path.clone(),
            }));
        }
    }

    let mut grant_keys = BTreeSet::new();
    for g in &schema.grants {
        if g.resource_name.is_empty() {
            errors.push(SchemaError::at(
                &g.entity.file,
                g.line,
                SchemaErrorKind::InvalidArgument {
                    annotation: "DynamoDBTable".into(),
                    reason: "table name is empty".into(),
                },
            ));
        }
        if !grant_keys.insert((&g.entity, g.service, g.resource_name.as_str())) {
            errors.push(SchemaError::at(
                &g.entity.file,
                g.line,
                SchemaErrorKind::DuplicateGrant {
                    entity: g.entity.name.clone(),
                    resource: g.resource_name.clone(),
                },
            ));
        }
    }

    errors.sort();
    errors
}

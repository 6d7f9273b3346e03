use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{Arc, Once};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::value::{deserialize_params, render_value, Converter, Converters, Value};
use crate::schema::{HttpMethod, MimeType, RouteParam, Schema, Segment, ValueType};

pub type HandlerFn = Arc<dyn Fn(&[Value]) -> Result<Value, String> + Send + Sync>;
pub type Interceptor = Arc<dyn Fn(&HttpRequest) -> Option<Response> + Send + Sync>;
pub type Hook = Arc<dyn Fn() + Send + Sync>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: String,
    pub path: String,
    #[serde(default)]
    pub query: BTreeMap<String, String>,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: Option<String>,
}

impl HttpRequest {
    pub fn new(method: &str, path: &str) -> Self {
        Self {
            method: method.to_string(),
            path: path.to_string(),
            ..Self::default()
        }
    }

    pub fn query(mut self, key: &str, value: &str) -> Self {
        self.query.insert(key.to_string(), value.to_string());
        self
    }
}

/// An event delivered to the dispatcher, as read from batch input:
/// `{"type":"http",...}` or `{"type":"warming","sequence":0}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Event {
    Http(HttpRequest),
    Warming { sequence: u64 },
}

fn body_as_text<S: Serializer>(body: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&String::from_utf8_lossy(body))
}

fn body_from_text<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
    Option::<String>::deserialize(d).map(|s| s.unwrap_or_default().into_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub status: u16,
    pub headers: BTreeMap<String, String>,
    #[serde(serialize_with = "body_as_text", deserialize_with = "body_from_text")]
    pub body: Vec<u8>,
}

impl Response {
    pub fn new(status: u16, content_type: &str, body: impl Into<Vec<u8>>) -> Self {
        Self {
            status,
            headers: BTreeMap::from([("Content-Type".to_string(), content_type.to_string())]),
            body: body.into(),
        }
    }

    pub fn text(status: u16, body: impl Into<String>) -> Self {
        Self::new(status, "text/plain", body.into())
    }

    pub fn no_content() -> Self {
        Self {
            status: 204,
            headers: BTreeMap::new(),
            body: Vec::new(),
        }
    }

    pub fn body_text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("UnresolvedHandler({})", .0.join(", "))]
    UnresolvedHandler(Vec<String>),
}

/// Host callables and hooks that back a schema at runtime.
#[derive(Clone, Default)]
pub struct HandlerRegistry {
    handlers: BTreeMap<String, HandlerFn>,
    interceptors: Vec<Interceptor>,
    init_hooks: Vec<Hook>,
    warming_hooks: Vec<Hook>,
    converters: Converters,
}

impl HandlerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn handler(
        mut self,
        name: &str,
        f: impl Fn(&[Value]) -> Result<Value, String> + Send + Sync + 'static,
    ) -> Self {
        self.handlers.insert(name.to_string(), Arc::new(f));
        self
    }

    pub fn interceptor(mut self, f: impl Fn(&HttpRequest) -> Option<Response> + Send + Sync + 'static) -> Self {
        self.interceptors.push(Arc::new(f));
        self
    }

    /// Runs once, before the first event of any kind is handled.
    pub fn on_init(mut self, f: impl Fn() + Send + Sync + 'static) -> Self {
        self.init_hooks.push(Arc::new(f));
        self
    }

    /// Runs on every warming event.
    pub fn on_warming(mut self, f: impl Fn() + Send + Sync + 'static) -> Self {
        self.warming_hooks.push(Arc::new(f));
        self
    }

    pub fn converter(mut self, type_name: &str, c: impl Converter + 'static) -> Self {
        self.converters.insert(type_name.to_string(), Arc::new(c));
        self
    }

    pub fn has_handler(&self, name: &str) -> bool {
        self.handlers.contains_key(name)
    }
}

#[derive(Clone)]
pub struct HandlerEntry {
    pub name: String,
    pub method: HttpMethod,
    pub path: String,
    pub params: Vec<RouteParam>,
    pub return_type: ValueType,
    func: HandlerFn,
}

impl std::fmt::Debug for HandlerEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "HandlerEntry({} {} -> {})", self.method, self.path, self.name)
    }
}

#[derive(Debug, Clone)]
struct ParamRoute {
    segments: Vec<Segment>,
    literal_count: usize,
    entry: HandlerEntry,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticEntry {
    pub path: String,
    pub source_file: String,
    pub mime: MimeType,
}

/// Routing state derived from a schema. Immutable once loaded and safe to
/// share between serving threads.
pub struct DispatchTable {
    exact: HashMap<(HttpMethod, String), HandlerEntry>,
    /// Sorted by precedence: most literal segments first, then path.
    parameterized: Vec<ParamRoute>,
    statics: BTreeMap<String, StaticEntry>,
    static_root: Option<PathBuf>,
    interceptors: Vec<Interceptor>,
    init_hooks: Vec<Hook>,
    warming_hooks: Vec<Hook>,
    converters: Converters,
    init: Once,
}

impl DispatchTable {
    /// Directory that static route source files are read from.
    pub fn with_static_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.static_root = Some(root.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty() && self.parameterized.is_empty() && self.statics.is_empty()
    }

    pub fn exact_routes(&self) -> impl Iterator<Item = (HttpMethod, &str)> {
        self.exact.keys().map(|(m, p)| (*m, p.as_str()))
    }

    fn ensure_initialized(&self) {
        self.init.call_once(|| {
            for hook in &self.init_hooks {
                hook();
            }
        });
    }
}

pub fn load_dispatch_table(schema: &Schema, registry: &HandlerRegistry) -> Result<DispatchTable, RuntimeError> {
    let mut missing: Vec<String> = schema
        .dynamic_routes
        .iter()
        .filter(|r| !registry.handlers.contains_key(&r.handler.name))
        .map(|r| r.handler.name.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(RuntimeError::UnresolvedHandler(missing));
    }

    let mut exact = HashMap::new();
    let mut parameterized = Vec::new();
    for route in &schema.dynamic_routes {
        let entry = HandlerEntry {
            name: route.handler.name.clone(),
            method: route.method,
            path: route.path.clone(),
            params: route.params.clone(),
            return_type: route.return_type.clone(),
            func: registry.handlers[&route.handler.name].clone(),
        };
        let segments = crate::schema::split_path(&route.path).unwrap_or_default();
        let literal_count = segments.iter().filter(|s| s.is_literal()).count();
        if literal_count == segments.len() {
            exact.insert((route.method, route.path.clone()), entry);
        } else {
            parameterized.push(ParamRoute {
                segments,
                literal_count,
                entry,
            });
        }
    }
    parameterized.sort_by(|a, b| {
        b.literal_count
            .cmp(&a.literal_count)
            .then_with(|| a.entry.path.cmp(&b.entry.path))
    });

    let statics = schema
        .static_routes
        .iter()
        .map(|s| {
            (
                s.path.clone(),
                StaticEntry {
                    path: s.path.clone(),
                    source_file: s.source_file.clone(),
                    mime: s.mime,
                },
            )
        })
        .collect();

    Ok(DispatchTable {
        exact,
        parameterized,
        statics,
        static_root: None,
        interceptors: registry.interceptors.clone(),
        init_hooks: registry.init_hooks.clone(),
        warming_hooks: registry.warming_hooks.clone(),
        converters: registry.converters.clone(),
        init: Once::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteMatch<'a> {
    Handler {
        entry: &'a HandlerEntry,
        path_params: BTreeMap<String, String>,
    },
    Static(&'a StaticEntry),
    NotFound,
}

impl PartialEq for HandlerEntry {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.method == other.method && self.path == other.path
    }
}

impl Eq for HandlerEntry {}

fn request_segments(path: &str) -> Vec<&str> {
    path.split('/').filter(|s| !s.is_empty()).collect()
}

/// Resolves a request. Exact routes win; then the parameterized route with
/// the most literal segments (ties to the smallest route path); then static
/// files for GET.
pub fn match_route<'a>(table: &'a DispatchTable, method: &str, path: &str) -> RouteMatch<'a> {
    let segs = request_segments(path);
    let canonical = format!("/{}", segs.join("/"));
    let Some(method) = HttpMethod::parse(method) else {
        return RouteMatch::NotFound;
    };

    if let Some(entry) = table.exact.get(&(method, canonical.clone())) {
        return RouteMatch::Handler {
            entry,
            path_params: BTreeMap::new(),
        };
    }

    for route in &table.parameterized {
        if route.entry.method != method || route.segments.len() != segs.len() {
            continue;
        }
        let mut params = BTreeMap::new();
        let matched = route.segments.iter().zip(&segs).all(|(pattern, actual)| match pattern {
            Segment::Literal(l) => l == actual,
            Segment::Param(p) => {
                params.insert(p.clone(), actual.to_string());
                true
            }
        });
        if matched {
            return RouteMatch::Handler {
                entry: &route.entry,
                path_params: params,
            };
        }
    }

    if method == HttpMethod::Get {
        if let Some(st) = table.statics.get(&canonical) {
            return RouteMatch::Static(st);
        }
    }
    RouteMatch::NotFound
}

fn invoke(entry: &HandlerEntry, args: &[Value], converters: &Converters) -> Response {
    let result = catch_unwind(AssertUnwindSafe(|| (entry.func)(args)));
    let value = match result {
        Ok(Ok(v)) => v,
        Ok(Err(msg)) => return Response::text(500, format!("handler {} failed: {msg}", entry.name)),
        Err(_) => return Response::text(500, format!("handler {} panicked", entry.name)),
    };
    if entry.return_type == ValueType::Unit {
        return Response::no_content();
    }
    match render_value(&value, converters) {
        Some(text) => Response::text(200, text),
        None if matches!(value, Value::Unit) => Response::no_content(),
        None => Response::text(500, format!("no converter can serialize the result of {}", entry.name)),
    }
}

/// Handles one event. Failures never escape: they become 4xx/5xx responses.
pub fn handle_event(event: &Event, table: &DispatchTable) -> Response {
    table.ensure_initialized();
    let req = match event {
        Event::Warming { .. } => {
            for hook in &table.warming_hooks {
                if catch_unwind(AssertUnwindSafe(|| hook())).is_err() {
                    return Response::text(500, "warming hook panicked");
                }
            }
            return Response::text(200, "warm");
        }
        Event::Http(req) => req,
    };

    for interceptor in &table.interceptors {
        if let Some(resp) = interceptor(req) {
            return resp;
        }
    }

    match match_route(table, &req.method, &req.path) {
        RouteMatch::Handler { entry, path_params } => {
            let mut raw = req.query.clone();
            raw.extend(path_params);
            match deserialize_params(&entry.params, &raw, &table.converters) {
                Ok(args) => invoke(entry, &args, &table.converters),
                Err(e) => Response::text(400, e.to_string()),
            }
        }
        RouteMatch::Static(st) => {
            let Some(root) = &table.static_root else {
                return Response::text(500, format!("no static root configured for {}", st.path));
            };
            match std::fs::read(root.join(&st.source_file)) {
                Ok(bytes) => Response::new(200, st.mime.content_type(), bytes),
                Err(e) => Response::text(500, format!("cannot read {}: {e}", st.source_file)),
            }
        }
        RouteMatch::NotFound => Response::text(404, "Not Found"),
    }
}

//! Browser demo. Each operation takes plain strings and returns a JSON
//! document, so the same functions run natively under test and in the page
//! through the `wasm_bindgen` exports at the bottom.

use std::collections::BTreeMap;

use infraloom::dsl::parse_file;
use infraloom::permissions::derive_policy;
use infraloom::runtime::{
    constant_rate, handle_event, load_dispatch_table, match_route, percentile, render_value, simulate_warm_pool,
    Converters, Event, HandlerRegistry, HttpRequest, Metrics, RouteMatch, Value, WarmPoolParams,
};
use infraloom::schema::{build_schema, Schema, SchemaConfig, ValueType, WarmingConfig};
use infraloom::synth::{generate_hcl, ProviderConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const SOURCE_NAME: &str = "App.kls";
/// Keeps a page from freezing on an oversized workload.
const MAX_REQUESTS: f64 = 2_000_000.0;

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Preview {
    pub hcl: String,
    pub hcl_lines: usize,
    pub policy: String,
    pub schema: serde_json::Value,
}

fn schema_from(source: &str, app_name: &str, warming: bool) -> Result<Schema, String> {
    let file = parse_file(source, SOURCE_NAME).map_err(|e| e.to_string())?;
    let config = SchemaConfig {
        app_name: app_name.to_string(),
        warming: WarmingConfig {
            enabled: warming,
            ..WarmingConfig::default()
        },
    };
    build_schema(&[file], &config).map_err(|errs| errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))
}

pub fn preview(source: &str, app_name: &str, warming: bool) -> Result<Preview, String> {
    let schema = schema_from(source, app_name, warming)?;
    let hcl = generate_hcl(&schema, &ProviderConfig::default()).map_err(|e| e.to_string())?;
    let policy = derive_policy(&schema).map_err(|e| e.to_string())?;
    Ok(Preview {
        hcl_lines: hcl.lines().count(),
        hcl,
        policy: policy.to_string(),
        schema: serde_json::from_str(&schema.to_canonical_json()).expect("schema JSON parses"),
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SimRequest {
    pub rps: f64,
    pub duration_seconds: f64,
    pub warming: bool,
    pub period_minutes: u32,
    #[serde(flatten)]
    pub params: WarmPoolParams,
}

impl Default for SimRequest {
    fn default() -> Self {
        Self {
            rps: 300.0,
            duration_seconds: 60.0,
            warming: true,
            period_minutes: 5,
            params: WarmPoolParams::default(),
        }
    }
}

/// Per-second buckets by arrival time.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Bucket {
    pub second: u64,
    pub requests: usize,
    pub cold: usize,
    pub p99_latency_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct SimResult {
    pub metrics: Metrics,
    pub series: Vec<Bucket>,
}

pub fn simulate(request: &SimRequest) -> Result<SimResult, String> {
    if !(request.rps > 0.0 && request.duration_seconds > 0.0) {
        return Err("rps and duration must be positive".into());
    }
    if request.rps * request.duration_seconds > MAX_REQUESTS {
        return Err(format!("at most {MAX_REQUESTS} requests per run"));
    }
    let workload = constant_rate(request.rps, request.duration_seconds * 1000.0, 0.0);
    let warming = WarmingConfig {
        enabled: request.warming,
        period_minutes: request.period_minutes,
    };
    let report = simulate_warm_pool(&workload, &request.params, &warming).map_err(|e| e.to_string())?;

    let mut buckets: BTreeMap<u64, (usize, Vec<f64>)> = BTreeMap::new();
    for r in &report.records {
        let b = buckets.entry((r.arrival_ms / 1000.0) as u64).or_default();
        b.0 += usize::from(r.cold);
        b.1.push(r.latency_ms);
    }
    let series = buckets
        .into_iter()
        .map(|(second, (cold, mut latencies))| {
            latencies.sort_by(f64::total_cmp);
            Bucket {
                second,
                requests: latencies.len(),
                cold,
                p99_latency_ms: percentile(&latencies, 0.99),
            }
        })
        .collect();
    Ok(SimResult {
        metrics: report.metrics,
        series,
    })
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Routed {
    pub status: u16,
    /// `handler`, `static` or `none`.
    pub matched: String,
    pub target: Option<String>,
    pub path_params: BTreeMap<String, String>,
    pub body: String,
}

/// Handlers that describe the arguments they received.
fn echo_registry(schema: &Schema) -> HandlerRegistry {
    schema.dynamic_routes.iter().fold(HandlerRegistry::new(), |reg, route| {
        let name = route.handler.name.clone();
        let names: Vec<String> = route.params.iter().map(|p| p.name.clone()).collect();
        let unit = route.return_type == ValueType::Unit;
        reg.handler(&route.handler.name.clone(), move |args: &[Value]| {
            if unit {
                return Ok(Value::Unit);
            }
            let converters = Converters::new();
            let shown: Vec<String> = names
                .iter()
                .zip(args)
                .map(|(n, v)| format!("{n}={}", render_value(v, &converters).unwrap_or_default()))
                .collect();
            Ok(Value::Str(format!("{name}({})", shown.join(", "))))
        })
    })
}

/// Routes `METHOD /path?query` against the schema of `source`.
pub fn route(source: &str, method: &str, target: &str) -> Result<Routed, String> {
    let schema = schema_from(source, "demo", false)?;
    let table = load_dispatch_table(&schema, &echo_registry(&schema)).map_err(|e| e.to_string())?;
    let (path, query) = target.split_once('?').unwrap_or((target, ""));
    let method = method.to_ascii_uppercase();

    let (matched, name, path_params) = match match_route(&table, &method, path) {
        RouteMatch::Handler { entry, path_params } => ("handler", Some(entry.name.clone()), path_params),
        RouteMatch::Static(st) => {
            return Ok(Routed {
                status: 200,
                matched: "static".into(),
                target: Some(st.source_file.clone()),
                path_params: BTreeMap::new(),
                body: format!("contents of {} as {}", st.source_file, st.mime.content_type()),
            })
        }
        RouteMatch::NotFound => ("none", None, BTreeMap::new()),
    };
    let mut request = HttpRequest::new(&method, path);
    for (k, v) in form_urlencoded::parse(query.as_bytes()) {
        request = request.query(&k, &v);
    }
    let response = handle_event(&Event::Http(request), &table);
    Ok(Routed {
        status: response.status,
        matched: matched.into(),
        target: name,
        path_params,
        body: response.body_text(),
    })
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsError> {
    result
        .map(|v| serde_json::to_string(&v).expect("plain data serializes"))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = synthPreview)]
pub fn synth_preview_js(source: &str, app_name: &str, warming: bool) -> Result<String, JsError> {
    to_js(preview(source, app_name, warming))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(request_json: &str) -> Result<String, JsError> {
    let request: SimRequest = serde_json::from_str(request_json).map_err(|e| JsError::new(&e.to_string()))?;
    to_js(simulate(&request))
}

#[wasm_bindgen(js_name = route)]
pub fn route_js(source: &str, method: &str, target: &str) -> Result<String, JsError> {
    to_js(route(source, method, target))
}

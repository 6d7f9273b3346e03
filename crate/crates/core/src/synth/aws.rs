use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use super::hcl::{BlockKind, HclValue, ResourceGraph, ResourceGroup, TfResource};
use super::SynthError;
use crate::permissions::{derive_policy, PolicyDocument};
use crate::schema::{split_path, CloudService, HttpMethod, Schema, Segment};

/// Deployment parameters that are not part of the application schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderConfig {
    pub provider: String,
    pub region: String,
    /// Pre-existing bucket that receives static files.
    pub bucket: String,
    /// Directory prefix for static file `source` paths, as seen from the
    /// directory Terraform runs in.
    pub static_root: String,
    pub memory_mb: u32,
    pub timeout_seconds: u32,
    pub runtime: String,
    /// Content digests of static sources, keyed by source file. When present
    /// they are emitted as `source_hash` so changed files are re-uploaded.
    pub static_digests: BTreeMap<String, String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            provider: "aws".into(),
            region: "us-east-1".into(),
            bucket: "infraloom-artifacts".into(),
            static_root: "static".into(),
            memory_mb: 3072,
            timeout_seconds: 30,
            runtime: "java11".into(),
            static_digests: BTreeMap::new(),
        }
    }
}

const LAMBDA_HANDLER: &str = "infraloom.Dispatcher::handleRequest";
const BUNDLE_FILE: &str = "bundle.zip";
const API_STAGE: &str = "live";

/// Lowercases and replaces anything outside `[a-z0-9_]` with `_`.
pub fn sanitize_name(raw: &str) -> String {
    let s: String = raw
        .chars()
        .map(|c| {
            let c = c.to_ascii_lowercase();
            if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

fn segment_words(segments: &[Segment]) -> String {
    segments
        .iter()
        .map(|s| match s {
            Segment::Literal(l) => sanitize_name(l),
            Segment::Param(p) => sanitize_name(p),
        })
        .collect::<Vec<_>>()
        .join("_")
}

/// Hands out unique resource names, suffixing `_2`, `_3`, ... on collision.
#[derive(Default)]
struct Names {
    taken: BTreeSet<String>,
}

impl Names {
    fn claim(&mut self, base: String) -> String {
        if self.taken.insert(base.clone()) {
            return base;
        }
        (2..)
            .map(|n| format!("{base}_{n}"))
            .find(|candidate| self.taken.insert(candidate.clone()))
            .expect("unbounded suffix search")
    }
}

fn heredoc(value: &serde_json::Value) -> HclValue {
    HclValue::Heredoc {
        marker: "POLICY".into(),
        body: serde_json::to_string_pretty(value).expect("json is serializable"),
    }
}

fn role_policy_json(policy: &PolicyDocument, region: &str) -> serde_json::Value {
    let mut statements = vec![json!({
        "Effect": "Allow",
        "Action": ["logs:CreateLogGroup", "logs:CreateLogStream", "logs:PutLogEvents"],
        "Resource": "arn:aws:logs:*:*:*",
    })];
    for st in &policy.statements {
        let resource = match st.service {
            CloudService::DynamoDB => format!("arn:aws:dynamodb:{region}:*:table/{}", st.resource_pattern),
        };
        statements.push(json!({
            "Effect": "Allow",
            "Action": st.actions.iter().collect::<Vec<_>>(),
            "Resource": resource,
        }));
    }
    json!({ "Version": "2012-10-17", "Statement": statements })
}

fn schedule_expression(minutes: u32) -> String {
    if minutes == 1 {
        "rate(1 minute)".into()
    } else {
        format!("rate({minutes} minutes)")
    }
}

/// Maps a valid schema onto AWS resources: one dispatcher Lambda behind an
/// API Gateway REST API, S3 objects for static routes and an optional
/// CloudWatch schedule that sends warming events.
pub fn synthesize(schema: &Schema, provider: &ProviderConfig) -> Result<ResourceGraph, SynthError> {
    if provider.provider != "aws" {
        return Err(SynthError::UnsupportedProvider(provider.provider.clone()));
    }
    let policy = derive_policy(schema)?;
    let app = sanitize_name(&schema.app_name);
    let mut graph = ResourceGraph::new();

    graph.insert(TfResource {
        kind: BlockKind::Settings,
        resource_type: "terraform".into(),
        name: "settings".into(),
        group: ResourceGroup::Provider,
        attributes: vec![(
            "required_providers".into(),
            HclValue::Block(vec![(
                "aws".into(),
                HclValue::Map(vec![
                    ("source".into(), HclValue::str("hashicorp/aws")),
                    ("version".into(), HclValue::str("~> 5.0")),
                ]),
            )]),
        )],
    })?;
    graph.insert(TfResource {
        kind: BlockKind::Provider,
        resource_type: "provider".into(),
        name: "aws".into(),
        group: ResourceGroup::Provider,
        attributes: vec![("region".into(), HclValue::str(&provider.region))],
    })?;

    // IAM
    let assume = json!({
        "Version": "2012-10-17",
        "Statement": [{
            "Effect": "Allow",
            "Action": "sts:AssumeRole",
            "Principal": { "Service": "lambda.amazonaws.com" },
        }],
    });
    graph.insert(
        TfResource::resource(ResourceGroup::Iam, "aws_iam_role", &app)
            .attr("name", HclValue::str(format!("{}-dispatcher", schema.app_name)))
            .attr("assume_role_policy", heredoc(&assume)),
    )?;
    graph.insert(
        TfResource::resource(ResourceGroup::Iam, "aws_iam_role_policy", &app)
            .attr("name", HclValue::str(format!("{}-dispatcher", schema.app_name)))
            .attr("role", HclValue::reference("aws_iam_role", &app, "id"))
            .attr("policy", heredoc(&role_policy_json(&policy, &provider.region))),
    )?;

    // Lambda
    graph.insert(
        TfResource::resource(ResourceGroup::Lambda, "aws_lambda_function", &app)
            .attr("function_name", HclValue::str(&schema.app_name))
            .attr(
                "description",
                HclValue::str(format!("Request dispatcher for {}", schema.app_name)),
            )
            .attr("role", HclValue::reference("aws_iam_role", &app, "arn"))
            .attr("handler", HclValue::str(LAMBDA_HANDLER))
            .attr("runtime", HclValue::str(&provider.runtime))
            .attr("filename", HclValue::str(BUNDLE_FILE))
            .attr("memory_size", HclValue::Number(provider.memory_mb.into()))
            .attr("timeout", HclValue::Number(provider.timeout_seconds.into()))
            .attr(
                "environment",
                HclValue::Block(vec![(
                    "variables".into(),
                    HclValue::Map(vec![
                        ("INFRALOOM_APP".into(), HclValue::str(&schema.app_name)),
                        ("INFRALOOM_SCHEMA".into(), HclValue::str("schema.json")),
                    ]),
                )]),
            ),
    )?;
    graph.insert(
        TfResource::resource(ResourceGroup::Lambda, "aws_lambda_permission", &format!("{app}_api"))
            .attr("statement_id", HclValue::str("AllowApiGatewayInvoke"))
            .attr("action", HclValue::str("lambda:InvokeFunction"))
            .attr(
                "function_name",
                HclValue::reference("aws_lambda_function", &app, "function_name"),
            )
            .attr("principal", HclValue::str("apigateway.amazonaws.com"))
            .attr(
                "source_arn",
                HclValue::str(format!("${{aws_api_gateway_rest_api.{app}.execution_arn}}/*/*")),
            ),
    )?;

    // API Gateway
    graph.insert(
        TfResource::resource(ResourceGroup::ApiGateway, "aws_api_gateway_rest_api", &app)
            .attr("name", HclValue::str(&schema.app_name))
            .attr(
                "description",
                HclValue::str(format!("HTTP API for {}", schema.app_name)),
            ),
    )?;
    let rest_api_id = HclValue::reference("aws_api_gateway_rest_api", &app, "id");

    let mut names = Names::default();
    let mut prefix_resources: BTreeMap<Vec<Segment>, String> = BTreeMap::new();
    let mut parsed_routes = Vec::new();
    for route in &schema.dynamic_routes {
        let segments = split_path(&route.path).map_err(|e| SynthError::InvalidPath(e.to_string()))?;
        for k in 1..=segments.len() {
            prefix_resources.entry(segments[..k].to_vec()).or_default();
        }
        parsed_routes.push((route, segments));
    }
    // BTreeMap order visits parents before children.
    let prefixes: Vec<Vec<Segment>> = prefix_resources.keys().cloned().collect();
    for prefix in prefixes {
        let name = names.claim(format!("res_{}", segment_words(&prefix)));
        let parent = match prefix.len() {
            1 => HclValue::reference("aws_api_gateway_rest_api", &app, "root_resource_id"),
            n => HclValue::reference("aws_api_gateway_resource", &prefix_resources[&prefix[..n - 1]], "id"),
        };
        let path_part = match &prefix[prefix.len() - 1] {
            Segment::Literal(l) => l.clone(),
            Segment::Param(p) => format!("{{{p}}}"),
        };
        graph.insert(
            TfResource::resource(ResourceGroup::ApiGateway, "aws_api_gateway_resource", &name)
                .attr("rest_api_id", rest_api_id.clone())
                .attr("parent_id", parent)
                .attr("path_part", HclValue::str(path_part)),
        )?;
        prefix_resources.insert(prefix, name);
    }

    let mut integrations = Vec::new();
    for (route, segments) in &parsed_routes {
        let words = if segments.is_empty() {
            "root".to_string()
        } else {
            segment_words(segments)
        };
        let method_word = match route.method {
            HttpMethod::Get => "get",
            HttpMethod::Post => "post",
        };
        let name = names.claim(format!("{method_word}_{words}"));
        let resource_id = if segments.is_empty() {
            HclValue::reference("aws_api_gateway_rest_api", &app, "root_resource_id")
        } else {
            HclValue::reference("aws_api_gateway_resource", &prefix_resources[segments], "id")
        };

        let mut request_parameters: Vec<(String, HclValue)> = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Param(p) => Some((format!("method.request.path.{p}"), HclValue::Bool(true))),
                Segment::Literal(_) => None,
            })
            .collect();
        request_parameters.extend(
            route
                .query_params()
                .map(|p| (format!("method.request.querystring.{}", p.name), HclValue::Bool(false))),
        );

        let mut method = TfResource::resource(ResourceGroup::ApiGateway, "aws_api_gateway_method", &name)
            .attr("rest_api_id", rest_api_id.clone())
            .attr("resource_id", resource_id.clone())
            .attr("http_method", HclValue::str(route.method.as_str()))
            .attr("authorization", HclValue::str("NONE"));
        if !request_parameters.is_empty() {
            method = method.attr("request_parameters", HclValue::Map(request_parameters));
        }
        graph.insert(method)?;

        graph.insert(
            TfResource::resource(ResourceGroup::ApiGateway, "aws_api_gateway_integration", &name)
                .attr("rest_api_id", rest_api_id.clone())
                .attr("resource_id", resource_id)
                .attr(
                    "http_method",
                    HclValue::reference("aws_api_gateway_method", &name, "http_method"),
                )
                .attr("integration_http_method", HclValue::str("POST"))
                .attr("type", HclValue::str("AWS_PROXY"))
                .attr("uri", HclValue::reference("aws_lambda_function", &app, "invoke_arn")),
        )?;
        integrations.push(name);
    }

    let mut deployment = TfResource::resource(ResourceGroup::ApiGateway, "aws_api_gateway_deployment", &app)
        .attr("rest_api_id", rest_api_id)
        .attr("stage_name", HclValue::str(API_STAGE));
    if !integrations.is_empty() {
        let refs: Vec<String> = integrations
            .iter()
            .map(|n| format!("${{aws_api_gateway_integration.{n}.id}}"))
            .collect();
        deployment = deployment.attr(
            "triggers",
            HclValue::Map(vec![("redeployment".into(), HclValue::str(refs.join(",")))]),
        );
    }
    graph.insert(deployment.attr(
        "lifecycle",
        HclValue::Block(vec![("create_before_destroy".into(), HclValue::Bool(true))]),
    ))?;

    // S3
    for st in &schema.static_routes {
        let key = st.path.trim_start_matches('/');
        let key = if key.is_empty() { "index" } else { key };
        let name = names.claim(format!("static_{}", sanitize_name(key)));
        let mut object = TfResource::resource(ResourceGroup::S3, "aws_s3_bucket_object", &name)
            .attr("bucket", HclValue::str(&provider.bucket))
            .attr("key", HclValue::str(key))
            .attr(
                "source",
                HclValue::str(format!("{}/{}", provider.static_root, st.source_file)),
            )
            .attr("content_type", HclValue::str(st.mime.content_type()));
        if let Some(digest) = provider.static_digests.get(&st.source_file) {
            object = object.attr("source_hash", HclValue::str(digest));
        }
        graph.insert(object)?;
    }

    // CloudWatch
    if schema.warming.enabled {
        let rule = format!("{app}_warming");
        graph.insert(
            TfResource::resource(ResourceGroup::CloudWatch, "aws_cloudwatch_event_rule", &rule)
                .attr("name", HclValue::str(format!("{}-warming", schema.app_name)))
                .attr("description", HclValue::str("Periodic warming of the dispatcher"))
                .attr(
                    "schedule_expression",
                    HclValue::str(schedule_expression(schema.warming.period_minutes)),
                ),
        )?;
        graph.insert(
            TfResource::resource(ResourceGroup::CloudWatch, "aws_cloudwatch_event_target", &rule)
                .attr("rule", HclValue::reference("aws_cloudwatch_event_rule", &rule, "name"))
                .attr("target_id", HclValue::str("warming"))
                .attr("arn", HclValue::reference("aws_lambda_function", &app, "arn"))
                .attr("input", HclValue::str(r#"{"sequence":0,"type":"warming"}"#)),
        )?;
        graph.insert(
            TfResource::resource(ResourceGroup::CloudWatch, "aws_lambda_permission", &rule)
                .attr("statement_id", HclValue::str("AllowWarmingInvoke"))
                .attr("action", HclValue::str("lambda:InvokeFunction"))
                .attr(
                    "function_name",
                    HclValue::reference("aws_lambda_function", &app, "function_name"),
                )
                .attr("principal", HclValue::str("events.amazonaws.com"))
                .attr(
                    "source_arn",
                    HclValue::reference("aws_cloudwatch_event_rule", &rule, "arn"),
                ),
        )?;
    }

    Ok(graph)
}

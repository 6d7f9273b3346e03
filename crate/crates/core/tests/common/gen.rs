//! Random but valid `.kls` projects.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use infraloom::dsl::{parse_file, SourceFile};
use infraloom::schema::{build_schema, Schema, SchemaConfig, WarmingConfig};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

pub const PRIMITIVES: [&str; 6] = ["Int", "Long", "Float", "Double", "Boolean", "String"];
const LITERALS: [&str; 6] = ["users", "items", "v1", "a-b", "x.y", "report_2"];
const MIMES: [(&str, &str); 4] = [("CSS", "css"), ("JS", "js"), ("PNG", "png"), ("TXT", "txt")];
const MODES: [&str; 4] = ["Read", "Write", "ReadWrite", "AccessMode.Read"];
const NOISE: [&str; 6] = ["println", "listOf", "it", "value", "size", "map"];

#[derive(Debug, Clone)]
pub struct Project {
    pub files: Vec<(String, String)>,
    /// Declared objects carrying a table grant, by name.
    pub tables: Vec<String>,
}

struct State {
    rng: StdRng,
    names: usize,
    routes: BTreeSet<(String, String)>,
    objects: Vec<String>,
    helpers: Vec<String>,
    statics: usize,
}

impl State {
    fn pick<'a>(&mut self, items: &'a [&'a str]) -> &'a str {
        items[self.rng.random_range(0..items.len())]
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.names += 1;
        format!("{prefix}{}", self.names)
    }

    fn blank(&mut self, out: &mut String) {
        match self.rng.random_range(0..5) {
            0 => out.push_str("\n// comment with { braces\n"),
            1 => out.push_str("/* block\n comment } */\n"),
            2 => out.push_str("\n\n"),
            _ => out.push('\n'),
        }
    }

    /// Body text mentioning some known declarations plus noise.
    fn body(&mut self, params: &[String]) -> String {
        let mut body = String::from("{\n");
        let known: Vec<String> = self.objects.iter().chain(&self.helpers).cloned().collect();
        for _ in 0..self.rng.random_range(0..4) {
            match self.rng.random_range(0..7) {
                0 | 4 | 5 if !known.is_empty() => {
                    let target = &known[self.rng.random_range(0..known.len())];
                    let _ = writeln!(body, "    val r = {target}.table.get(\"k\")");
                }
                1 => body.push_str("    if (x) { nested { deeper } }\n"),
                2 => body.push_str("    val s = \"quoted } brace\"\n"),
                3 if !params.is_empty() => {
                    let p = &params[self.rng.random_range(0..params.len())];
                    let _ = writeln!(body, "    return {p}");
                }
                _ => {
                    let n = self.pick(&NOISE);
                    let _ = writeln!(body, "    {n}(1, 'c')");
                }
            }
        }
        body.push('}');
        body
    }

    fn route_path(&mut self) -> (String, Vec<String>) {
        let depth = self.rng.random_range(0..=3);
        let mut segs = Vec::new();
        let mut params = Vec::new();
        for i in 0..depth {
            if self.rng.random_bool(0.3) {
                // Parameter names are fixed per depth, so siblings never
                // disagree.
                let name = format!("p{i}");
                segs.push(format!("{{{name}}}"));
                params.push(name);
            } else {
                segs.push(self.pick(&LITERALS).to_string());
            }
        }
        (format!("/{}", segs.join("/")), params)
    }

    fn route(&mut self, out: &mut String) {
        let method = if self.rng.random_bool(0.6) { "Get" } else { "Post" };
        let (path, path_params) = loop {
            let (p, params) = self.route_path();
            if self.routes.insert((method.to_string(), p.clone())) {
                break (p, params);
            }
        };
        let name = self.fresh("handle");
        let mut params: Vec<String> = path_params.clone();
        for i in 0..self.rng.random_range(0..3) {
            params.push(format!("q{i}"));
        }
        let sig: Vec<String> = params
            .iter()
            .map(|p| {
                let ty = self.pick(&PRIMITIVES);
                format!("{p}: {ty}")
            })
            .collect();
        let ret = if self.rng.random_bool(0.7) {
            format!(": {}", self.pick(&PRIMITIVES))
        } else {
            String::new()
        };
        let body = self.body(&params);
        let _ = writeln!(out, "@{method}(\"{path}\")\nfun {name}({}){ret} {body}", sig.join(", "));
    }

    fn table(&mut self, out: &mut String, tables: &mut Vec<String>) {
        let name = self.fresh("Store");
        let table = format!("t{}", self.rng.random_range(0..4));
        let mode = self.pick(&MODES);
        let body = self.body(&[]);
        let _ = writeln!(out, "@DynamoDBTable(\"{table}\", {mode})\nobject {name} {body}");
        self.objects.push(name.clone());
        tables.push(name);
    }

    fn static_file(&mut self, out: &mut String) {
        self.statics += 1;
        let (mime, ext) = MIMES[self.rng.random_range(0..MIMES.len())];
        let name = self.fresh("asset");
        let n = self.statics;
        let _ = writeln!(
            out,
            "@StaticGet(\"/static/f{n}.{ext}\", MimeType.{mime})\nval {name} = File(\"files/f{n}.{ext}\")"
        );
    }

    fn helper(&mut self, out: &mut String) {
        let name = self.fresh("helper");
        let body = self.body(&[]);
        let _ = writeln!(out, "fun {name}(): String {body}");
        self.helpers.push(name);
    }
}

pub fn project(seed: u64) -> Project {
    let mut st = State {
        rng: StdRng::seed_from_u64(seed),
        names: 0,
        routes: BTreeSet::new(),
        objects: Vec::new(),
        helpers: Vec::new(),
        statics: 0,
    };
    let mut tables = Vec::new();
    let file_count = st.rng.random_range(1..=3);
    let mut files = Vec::new();
    for f in 0..file_count {
        let mut text = String::new();
        if st.rng.random_bool(0.6) {
            st.table(&mut text, &mut tables);
        }
        for _ in 0..st.rng.random_range(0..=6) {
            st.blank(&mut text);
            match st.rng.random_range(0..6) {
                0 | 1 => st.route(&mut text),
                2 => st.table(&mut text, &mut tables),
                3 => st.static_file(&mut text),
                _ => st.helper(&mut text),
            }
        }
        if st.rng.random_bool(0.2) {
            text = text.replace('\n', "\r\n");
        }
        files.push((format!("src/f{f}.kls"), text));
    }
    Project { files, tables }
}

pub fn parse(project: &Project) -> Vec<SourceFile> {
    project
        .files
        .iter()
        .map(|(path, text)| parse_file(text, path).unwrap_or_else(|e| panic!("{e}\n{text}")))
        .collect()
}

pub fn config(warming: bool) -> SchemaConfig {
    SchemaConfig {
        app_name: "gen-app".into(),
        warming: WarmingConfig {
            enabled: warming,
            period_minutes: 5,
        },
    }
}

pub fn schema(project: &Project) -> Schema {
    let files = parse(project);
    build_schema(&files, &config(true)).unwrap_or_else(|e| panic!("{e:?}\n{:#?}", project.files))
}

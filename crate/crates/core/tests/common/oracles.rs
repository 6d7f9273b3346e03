//! Brute-force reference implementations checked against the library.
//! Each suite panics on the first mismatch and returns how many cases it
//! compared.

use std::collections::{BTreeMap, BTreeSet};

use infraloom::dsl::{DeclKind, Declaration, Location, SourceFile};
use infraloom::permissions::reference_closure;
use infraloom::runtime::{load_dispatch_table, match_route, HandlerRegistry, RouteMatch, Value};
use infraloom::schema::{EntityRef, HttpMethod, MimeType, RouteParam, Schema, StaticRoute, ValueType, WarmingConfig};
use infraloom::synth::{order_resources, HclValue, ResourceGraph, ResourceGroup, SynthError, TfResource};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

// ---------------------------------------------------------------- dispatch

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Route {
    pub method: HttpMethod,
    pub path: String,
}

fn handler_name(i: usize) -> String {
    format!("h{i}")
}

/// Patterns with up to two segments over literals `a`, `b` and one parameter
/// per position, so sibling parameters never conflict.
pub fn route_patterns() -> Vec<String> {
    let first = ["a", "b", "{x}"];
    let second = ["a", "b", "{y}"];
    let mut out = vec!["/".to_string()];
    out.extend(first.iter().map(|s| format!("/{s}")));
    for f in first {
        out.extend(second.iter().map(|s| format!("/{f}/{s}")));
    }
    out
}

fn schema_for(routes: &[Route], statics: &[String]) -> Schema {
    let dynamic_routes = routes
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let params = r
                .path
                .split('/')
                .filter(|s| s.starts_with('{'))
                .map(|s| RouteParam {
                    name: s.trim_matches(|c| c == '{' || c == '}').to_string(),
                    ty: ValueType::String,
                })
                .collect();
            infraloom::schema::DynamicRoute {
                method: r.method,
                path: r.path.clone(),
                handler: EntityRef {
                    file: "t.kls".into(),
                    name: handler_name(i),
                },
                params,
                return_type: ValueType::String,
                line: 1,
            }
        })
        .collect();
    let static_routes = statics
        .iter()
        .map(|p| StaticRoute {
            path: p.clone(),
            mime: MimeType::Txt,
            source_file: "f.txt".into(),
            origin: Location {
                file: "t.kls".into(),
                line: 1,
            },
        })
        .collect();
    Schema {
        app_name: "t".into(),
        dynamic_routes,
        static_routes,
        grants: Vec::new(),
        warming: WarmingConfig::default(),
        declarations: Vec::new(),
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Handler(String, BTreeMap<String, String>),
    Static(String),
    NotFound,
}

/// The precedence rule applied directly to every route.
fn oracle_match(routes: &[Route], statics: &[String], method: HttpMethod, path: &str) -> Outcome {
    let req: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
    let mut candidates = Vec::new();
    for (i, r) in routes.iter().enumerate() {
        let pat: Vec<&str> = r.path.split('/').filter(|s| !s.is_empty()).collect();
        if r.method != method || pat.len() != req.len() {
            continue;
        }
        let mut params = BTreeMap::new();
        let mut ok = true;
        for (p, s) in pat.iter().zip(&req) {
            if p.starts_with('{') {
                params.insert(p.trim_matches(|c| c == '{' || c == '}').to_string(), s.to_string());
            } else if p != s {
                ok = false;
            }
        }
        if ok {
            let literals = pat.iter().filter(|p| !p.starts_with('{')).count();
            let exact = literals == pat.len();
            candidates.push((!exact, std::cmp::Reverse(literals), r.path.clone(), i, params));
        }
    }
    candidates.sort();
    if let Some((_, _, _, i, params)) = candidates.into_iter().next() {
        return Outcome::Handler(handler_name(i), params);
    }
    let canonical = format!("/{}", req.join("/"));
    if method == HttpMethod::Get && statics.contains(&canonical) {
        return Outcome::Static(canonical);
    }
    Outcome::NotFound
}

fn request_paths() -> Vec<String> {
    let alphabet = ["a", "b", "c"];
    let mut out = vec!["/".to_string()];
    let mut prev = vec![String::new()];
    for _ in 0..3 {
        let next: Vec<String> = prev
            .iter()
            .flat_map(|p| alphabet.iter().map(move |s| format!("{p}/{s}")))
            .collect();
        out.extend(next.iter().cloned());
        prev = next;
    }
    out
}

fn check_table(routes: &[Route], statics: &[String], requests: &[(HttpMethod, String)]) -> usize {
    let schema = schema_for(routes, statics);
    let registry = (0..routes.len()).fold(HandlerRegistry::new(), |r, i| {
        r.handler(&handler_name(i), |_| Ok(Value::Unit))
    });
    let table = load_dispatch_table(&schema, &registry).expect("all handlers registered");
    for (method, path) in requests {
        let got = match match_route(&table, method.as_str(), path) {
            RouteMatch::Handler { entry, path_params } => Outcome::Handler(entry.name.clone(), path_params),
            RouteMatch::Static(s) => Outcome::Static(s.path.clone()),
            RouteMatch::NotFound => Outcome::NotFound,
        };
        let want = oracle_match(routes, statics, *method, path);
        assert_eq!(
            got, want,
            "routes {routes:?}, statics {statics:?}, request {method} {path}"
        );
    }
    requests.len()
}

fn subsets<T: Clone>(items: &[T], max: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for item in items {
        let grown: Vec<Vec<T>> = out
            .iter()
            .filter(|s| s.len() < max)
            .map(|s| {
                let mut s = s.clone();
                s.push(item.clone());
                s
            })
            .collect();
        out.extend(grown);
    }
    out
}

/// Every GET table of up to four routes drawn from [`route_patterns`],
/// against every request path of up to three segments; then `random` mixed
/// tables with POST routes and static files.
pub fn dispatch_suite(random: usize, seed: u64) -> usize {
    let patterns = route_patterns();
    let paths = request_paths();
    let requests: Vec<(HttpMethod, String)> = paths
        .iter()
        .flat_map(|p| [(HttpMethod::Get, p.clone()), (HttpMethod::Post, p.clone())])
        .collect();
    let mut checked = 0;
    for table in subsets(&patterns, 4) {
        let routes: Vec<Route> = table
            .into_iter()
            .map(|path| Route {
                method: HttpMethod::Get,
                path,
            })
            .collect();
        checked += check_table(&routes, &[], &requests);
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let literal_paths: Vec<String> = paths.iter().filter(|p| p.matches('/').count() <= 2).cloned().collect();
    for _ in 0..random {
        let mut keys = BTreeSet::new();
        for _ in 0..rng.random_range(0..=8) {
            let method = if rng.random_bool(0.5) {
                HttpMethod::Get
            } else {
                HttpMethod::Post
            };
            keys.insert(Route {
                method,
                path: patterns[rng.random_range(0..patterns.len())].clone(),
            });
        }
        let routes: Vec<Route> = keys.into_iter().collect();
        let get_paths: BTreeSet<&str> = routes
            .iter()
            .filter(|r| r.method == HttpMethod::Get)
            .map(|r| r.path.as_str())
            .collect();
        let statics: Vec<String> = (0..rng.random_range(0..=3))
            .map(|_| literal_paths[rng.random_range(0..literal_paths.len())].clone())
            .filter(|p| !get_paths.contains(p.as_str()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let sample: Vec<(HttpMethod, String)> = (0..16)
            .map(|_| requests[rng.random_range(0..requests.len())].clone())
            .collect();
        checked += check_table(&routes, &statics, &sample);
    }
    checked
}

// ----------------------------------------------------------------- closure

fn decl(name: &str, refs: &BTreeSet<String>, file: &str) -> Declaration {
    Declaration {
        kind: DeclKind::Function,
        name: name.to_string(),
        annotations: Vec::new(),
        params: Vec::new(),
        return_type: None,
        initializer: None,
        body_refs: refs.clone(),
        location: Location {
            file: file.to_string(),
            line: 1,
        },
    }
}

/// A random reference graph over at most 12 declarations spread over up to
/// three files. Bodies also mention names that are not declarations.
pub fn random_program(rng: &mut StdRng) -> (Vec<String>, Vec<Vec<bool>>, Vec<SourceFile>) {
    let n = rng.random_range(1..=12);
    let names: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
    let density = rng.random_range(0.0..0.4);
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i != j && rng.random_bool(density)).collect())
        .collect();
    let files_count = rng.random_range(1..=3);
    let mut files: Vec<SourceFile> = (0..files_count)
        .map(|f| SourceFile {
            path: format!("f{f}.kls"),
            declarations: Vec::new(),
        })
        .collect();
    for i in 0..n {
        let mut refs: BTreeSet<String> = (0..n).filter(|&j| adj[i][j]).map(|j| names[j].clone()).collect();
        if rng.random_bool(0.5) {
            refs.insert("println".into());
        }
        let f = rng.random_range(0..files_count);
        let path = files[f].path.clone();
        files[f].declarations.push(decl(&names[i], &refs, &path));
    }
    (names, adj, files)
}

/// Reflexive-transitive closure by repeated boolean matrix squaring.
pub fn matrix_closure(adj: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut m: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || adj[i][j]).collect()).collect();
    loop {
        let sq: Vec<Vec<bool>> = (0..n)
            .map(|i| (0..n).map(|j| (0..n).any(|k| m[i][k] && m[k][j])).collect())
            .collect();
        if sq == m {
            return m;
        }
        m = sq;
    }
}

pub fn closure_suite(graphs: usize, seed: u64) -> usize {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..graphs {
        let (names, adj, files) = random_program(&mut rng);
        let m = matrix_closure(&adj);
        for (i, root) in names.iter().enumerate() {
            let want: BTreeSet<String> = (0..names.len())
                .filter(|&j| m[i][j])
                .map(|j| names[j].clone())
                .collect();
            let got = reference_closure(root, &files).expect("root is declared");
            assert_eq!(got, want, "root {root}, adjacency {adj:?}");
            checked += 1;
        }
    }
    checked
}

// ---------------------------------------------------------------- ordering

const GROUPS: [ResourceGroup; 3] = [ResourceGroup::Iam, ResourceGroup::Lambda, ResourceGroup::ApiGateway];

fn graph_of(names: &[String], groups: &[ResourceGroup], edges: &[(usize, usize)]) -> ResourceGraph {
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            edges
                .iter()
                .filter(|(from, _)| *from == i)
                .enumerate()
                .fold(TfResource::resource(groups[i], "r", name), |r, (k, (_, to))| {
                    r.attr(&format!("d{k}"), HclValue::reference("r", &names[*to], "id"))
                })
        })
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn group_rank(g: ResourceGroup) -> usize {
    ResourceGroup::ALL.iter().position(|x| *x == g).expect("known group")
}

/// Checks one graph. With `minimal`, also enumerates every permutation to
/// confirm the output is the smallest valid order by name. Acyclicity is
/// brute-forced unless the caller already knows it.
fn check_order(
    names: &[String],
    groups: &[ResourceGroup],
    edges: &[(usize, usize)],
    minimal: bool,
    known_acyclic: bool,
) {
    let n = names.len();
    let graph = graph_of(names, groups, edges);
    // Acyclic iff some permutation puts every dependency first.
    let acyclic = known_acyclic
        || permutations(n).iter().any(|p| {
            let pos: Vec<usize> = (0..n).map(|i| p.iter().position(|&x| x == i).unwrap()).collect();
            edges.iter().all(|&(from, to)| pos[to] < pos[from])
        });
    let result = order_resources(&graph);
    if !acyclic {
        assert!(
            matches!(result, Err(SynthError::CyclicDependency(_))),
            "{names:?} {edges:?}: {result:?}"
        );
        return;
    }
    let ordered = result.unwrap_or_else(|e| panic!("{names:?} {edges:?}: {e}"));
    let got: Vec<usize> = ordered
        .iter()
        .map(|r| names.iter().position(|nm| *nm == r.name).expect("known name"))
        .collect();
    let mut sorted = got.clone();
    sorted.sort();
    assert_eq!(sorted, (0..n).collect::<Vec<_>>(), "not a permutation");

    let valid = |order: &[usize]| {
        let pos: Vec<usize> = (0..n).map(|i| order.iter().position(|&x| x == i).unwrap()).collect();
        order
            .windows(2)
            .all(|w| group_rank(groups[w[0]]) <= group_rank(groups[w[1]]))
            && edges
                .iter()
                .filter(|(from, to)| groups[*from] == groups[*to])
                .all(|&(from, to)| pos[to] < pos[from])
    };
    assert!(valid(&got), "{names:?} {groups:?} {edges:?} -> {got:?}");

    if minimal {
        let key = |order: &[usize]| order.iter().map(|&i| names[i].clone()).collect::<Vec<_>>();
        let best = permutations(n)
            .into_iter()
            .filter(|p| valid(p))
            .map(|p| key(&p))
            .min()
            .expect("an acyclic graph has a valid order");
        assert_eq!(key(&got), best, "{groups:?} {edges:?}");
    }
}

/// Exhaustive over all directed graphs (cycles included) up to four nodes
/// and all acyclic edge sets up to six nodes, with names shuffled so the
/// dependency order disagrees with the name order. Every DAG is a relabeling
/// of one of those edge sets. `sampled` arbitrary graphs per size add cycles
/// at five and six nodes. Permutation brute force decides acyclicity and
/// confirms minimality up to five nodes and on `sampled` six-node DAGs.
pub fn topo_suite(sampled: usize, seed: u64) -> usize {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut checked = 0;
    let letters = ["a", "b", "c", "d", "e", "f"];

    for n in 1..=4 {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, e)| *e)
                .collect();
            let names: Vec<String> = letters[..n].iter().map(|s| s.to_string()).collect();
            let groups: Vec<ResourceGroup> = (0..n).map(|_| GROUPS[rng.random_range(0..GROUPS.len())]).collect();
            check_order(&names, &groups, &edges, true, false);
            let same: Vec<ResourceGroup> = vec![ResourceGroup::Iam; n];
            check_order(&names, &same, &edges, true, false);
            checked += 2;
        }
    }

    for n in 4..=6 {
        // Edges only run from a higher index to a lower one, so every edge
        // set is acyclic; shuffled names decouple index from name order.
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
        let total = 1u32 << pairs.len();
        let brute: BTreeSet<u32> = if n <= 5 {
            (0..total).collect()
        } else {
            (0..sampled).map(|_| rng.random_range(0..total)).collect()
        };
        for mask in 0..total {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, e)| *e)
                .collect();
            let mut names: Vec<String> = letters[..n].iter().map(|s| s.to_string()).collect();
            for i in (1..n).rev() {
                names.swap(i, rng.random_range(0..=i));
            }
            let groups: Vec<ResourceGroup> = if rng.random_bool(0.5) {
                vec![ResourceGroup::Lambda; n]
            } else {
                (0..n).map(|_| GROUPS[rng.random_range(0..GROUPS.len())]).collect()
            };
            check_order(&names, &groups, &edges, brute.contains(&mask), true);
            checked += 1;
        }

        // Arbitrary edge sets, cycles included.
        let all: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .collect();
        for _ in 0..sampled {
            let edges: Vec<(usize, usize)> = all.iter().filter(|_| rng.random_bool(0.2)).copied().collect();
            let names: Vec<String> = letters[..n].iter().map(|s| s.to_string()).collect();
            let groups: Vec<ResourceGroup> = (0..n).map(|_| GROUPS[rng.random_range(0..GROUPS.len())]).collect();
            check_order(&names, &groups, &edges, n <= 5, false);
            checked += 1;
        }
    }
    checked
}

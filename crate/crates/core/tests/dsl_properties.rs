mod common;

use common::gen;
use infraloom::dsl::{parse_file, tokenize, AnnotationArg, DeclKind, TokenKind};
use proptest::prelude::*;

/// Line and column (in chars) of a byte offset, counted from scratch.
fn position(src: &str, offset: usize) -> (u32, u32) {
    let before = &src[..offset];
    let line = before.matches('\n').count() as u32 + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let col = src[line_start..offset].chars().count() as u32 + 1;
    (line, col)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

const ALPHABET: &str = "[@(){}\",:=.a-zA-Z0-9_ \n\t/*'\\\\-]{0,80}";

proptest! {
    #[test]
    fn tokenizer_is_total(src in any::<String>()) {
        let _ = tokenize(&src);
        let _ = parse_file(&src, "x.kls");
    }

    #[test]
    fn tokenizer_is_total_on_near_miss_input(src in ALPHABET) {
        let _ = tokenize(&src);
        let _ = parse_file(&src, "x.kls");
    }

    #[test]
    fn string_arguments_round_trip(arg in "[^\n\r]{0,40}", table in "[a-z]{1,8}", n in 0i64..1_000_000) {
        let src = format!(
            "@Get(\"{}\")\nfun f() {{ }}\n@DynamoDBTable(\"{table}\", {n})\nobject O {{ }}\n",
            escape(&arg)
        );
        let file = parse_file(&src, "a.kls").unwrap();
        let first = &file.declarations[0].annotations[0];
        prop_assert_eq!(&first.args, &vec![AnnotationArg::Str(arg.clone())]);
        for decl in &file.declarations {
            for ann in &decl.annotations {
                let again = parse_file(&format!("{ann}\nfun g() {{ }}"), "b.kls").unwrap();
                prop_assert_eq!(&again.declarations[0].annotations[0].args, &ann.args);
                prop_assert_eq!(again.declarations[0].annotations[0].name, ann.name);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn token_positions_match_offsets(seed in any::<u64>()) {
        let project = gen::project(seed);
        for (_, src) in &project.files {
            for tok in tokenize(src).unwrap() {
                prop_assert_eq!((tok.line, tok.col), position(src, tok.span.start), "{:?}", tok);
                let slice = &src[tok.span.clone()];
                match tok.kind {
                    TokenKind::StringLit => prop_assert!(slice.starts_with('"') && slice.ends_with('"')),
                    _ => prop_assert_eq!(slice, tok.text.as_str()),
                }
            }
        }
    }

    #[test]
    fn declaration_lines_point_at_the_declaration(seed in any::<u64>()) {
        let project = gen::project(seed);
        for (file, (_, src)) in gen::parse(&project).iter().zip(&project.files) {
            let lines: Vec<&str> = src.lines().collect();
            for decl in &file.declarations {
                let keyword = match decl.kind {
                    DeclKind::Function => "fun",
                    DeclKind::Value => "val",
                    DeclKind::Object => "object",
                };
                let line = lines[decl.location.line as usize - 1];
                prop_assert!(line.starts_with(&format!("{keyword} {}", decl.name)), "{line:?} for {}", decl.name);
                for ann in &decl.annotations {
                    let text = lines[ann.location.line as usize - 1];
                    prop_assert!(text.starts_with(&format!("@{}", ann.name)), "{text:?}");
                }
            }
        }
    }

    #[test]
    fn parsing_is_deterministic_and_round_trips_annotations(seed in any::<u64>()) {
        let project = gen::project(seed);
        let a = gen::parse(&project);
        let b = gen::parse(&project);
        prop_assert_eq!(&a, &b);
        for decl in a.iter().flat_map(|f| &f.declarations) {
            for ann in &decl.annotations {
                let again = parse_file(&format!("{ann}\nval v = File(\"x\")"), "r.kls").unwrap();
                prop_assert_eq!(&again.declarations[0].annotations[0].args, &ann.args);
            }
        }
    }
}

#[test]
fn generated_projects_are_valid() {
    for seed in 0..500 {
        gen::schema(&gen::project(seed));
    }
}

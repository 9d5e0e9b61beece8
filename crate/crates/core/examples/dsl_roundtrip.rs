//! Parses every bundled scenario, prints it back in canonical form and checks
//! that the printed text parses to the same document. Also shows a located
//! diagnostic for an ill-formed net.
//!
//! Run with `cargo run --example dsl_roundtrip`.

use dbnet::dsl;
use dbnet::scenarios;

pub fn run() -> String {
    let mut out = String::new();
    for (name, text) in scenarios::ALL {
        let (doc, map) = dsl::parse_with_map(text).expect("bundled scenarios parse");
        let printed = dsl::serialize(&doc);
        let again = dsl::parse(&printed).expect("canonical text parses");
        assert_eq!(doc, again, "{name} changes across a round trip");
        let diags = dsl::check_document(&doc, &map);
        out.push_str(&format!("{name}: {} canonical line(s), {} diagnostic(s)\n", printed.lines().count(), diags.len()));
        for d in &diags {
            out.push_str(&d.render(text, name, false));
        }
    }
    out.push_str("\ncanonical form of black_token.dbnet:\n");
    out.push_str(&dsl::serialize(&dsl::parse(scenarios::BLACK_TOKEN).unwrap()));

    let broken = "schema { relation R(int); }\nnet { place p : (int); transition t { vars x:int; in p : <x>; out p : <y>; } }\n";
    if let Err(diags) = dsl::parse(broken) {
        out.push_str(&format!("\n{}", diags.render(broken, "broken.dbnet", false)));
    }
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}

//! Search for seed fixtures: a config and gold per bundled spec whose
//! validation catches every single-condition negation.
//!
//! Usage: `cargo run --release -p puzzlegen-core --example make_seeds [spec...]`

use std::collections::BTreeMap;

use puzzlegen_core::pipeline::{generate_one, validate_seed, GenerateOptions};
use puzzlegen_core::rng::RngStream;
use puzzlegen_core::spec::parse_spec_named;
use puzzlegen_core::verify::{brute_force_verify, condition_names, negate_condition};

const SPECS: [&str; 6] = ["hamburger", "graduation", "vase", "wine", "product", "exam"];

fn main() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/specs");
    let args: Vec<String> = std::env::args().skip(1).collect();
    let names: Vec<&str> = if args.is_empty() { SPECS.to_vec() } else { args.iter().map(String::as_str).collect() };
    let opts = GenerateOptions {
        retry_budget: 2000,
        ..GenerateOptions::default()
    };
    for name in names {
        let text = std::fs::read_to_string(format!("{dir}/{name}.spec")).unwrap();
        let t = parse_spec_named(&text, name).unwrap();
        let mutants: Vec<_> = condition_names(&t)
            .into_iter()
            .map(|c| (c.clone(), negate_condition(&t, &c).unwrap()))
            .collect();
        let mut found = false;
        for job in 0..200u64 {
            let inst = generate_one(&t, RngStream::new(20260101, job), &opts).unwrap();
            let gold: BTreeMap<String, String> =
                inst.answers.iter().map(|a| (a.query_name.clone(), a.rendered.clone())).collect();
            if !validate_seed(&t, &inst.config, &gold).pass {
                continue;
            }
            if let Some(r) = brute_force_verify(&t, &inst.config, 20).unwrap() {
                if !r.ok() {
                    continue;
                }
            }
            let missed: Vec<&str> = mutants
                .iter()
                .filter(|(_, m)| validate_seed(m, &inst.config, &gold).pass)
                .map(|(c, _)| c.as_str())
                .collect();
            if !missed.is_empty() {
                eprintln!("{name} job {job}: undetected {missed:?}");
                continue;
            }
            std::fs::write(format!("{dir}/seeds/{name}.config"), inst.config.to_pretty_string()).unwrap();
            std::fs::write(
                format!("{dir}/seeds/{name}.gold"),
                serde_json::to_string_pretty(&gold).unwrap() + "\n",
            )
            .unwrap();
            println!("{name}: job {job}, {} mutants detected", mutants.len());
            found = true;
            break;
        }
        if !found {
            println!("{name}: no fixture found");
        }
    }
}

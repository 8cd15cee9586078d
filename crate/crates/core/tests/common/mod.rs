#![allow(dead_code)]

use puzzlegen_core::spec::{parse_spec_named, PuzzleTemplate};

pub const BUNDLED: [&str; 6] = ["hamburger", "graduation", "vase", "wine", "product", "exam"];

pub fn spec_text(name: &str) -> String {
    std::fs::read_to_string(format!("{}/specs/{name}.spec", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub fn spec(name: &str) -> PuzzleTemplate {
    parse_spec_named(&spec_text(name), name).unwrap()
}

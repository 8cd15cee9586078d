use puzzlegen_core::spec::*;
use puzzlegen_core::Error;

const SPECS: [&str; 6] = ["hamburger", "graduation", "vase", "wine", "product", "exam"];

fn load(name: &str) -> PuzzleTemplate {
    let path = format!("{}/specs/{name}.spec", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(path).unwrap();
    parse_spec_named(&text, name).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn bundled_specs_parse_without_diagnostics() {
    for name in SPECS {
        let t = load(name);
        let diags = validate_spec(&t);
        assert!(diags.is_empty(), "{name}: {diags:?}");
    }
}

#[test]
fn hamburger_shape() {
    let t = load("hamburger");
    assert_eq!(t.variables.len(), 4);
    assert_eq!(t.symbols.len(), 1);
    assert_eq!(t.conditions.len(), 6);
    assert_eq!(t.queries.len(), 1);
    assert!(matches!(t.queries[0].kind, QueryKind::Selection { opt_num: 4, .. }));
    assert_eq!(t.max_solution, DEFAULT_MAX_SOLUTION);
    assert!(t.calc_solution);
}

#[test]
fn serialize_round_trip_is_identity() {
    for name in SPECS {
        let t = load(name);
        let text = serialize_spec(&t);
        let back = parse_spec_named(&text, name).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
        assert_eq!(back, t, "{name}");
    }
}

#[test]
fn minimal_document_is_valid() {
    let t = parse_spec("variables:\n  x: {type: int, domain: \"[1, 3]\"}\ndesc: \"x is {x}\"\n").unwrap();
    assert!(t.symbols.is_empty() && t.conditions.is_empty() && t.queries.is_empty());
    assert!(validate_spec(&t).is_empty());
}

#[test]
fn formula_with_type_is_a_constraint_error() {
    let e = parse_spec("variables:\n  x: {type: int, formula: \"1 + 1\"}\ndesc: \"{x}\"\n").unwrap_err();
    assert_eq!(e.class(), "ConstraintError");
}

#[test]
fn unknown_field_is_a_schema_error() {
    let e = parse_spec("variables:\n  x: {type: int, domain: \"[1, 2]\", colour: red}\ndesc: \"{x}\"\n").unwrap_err();
    assert_eq!(e.class(), "SchemaError");
}

#[test]
fn syntax_errors_carry_field_and_column() {
    let e = parse_spec("variables:\n  x: {formula: \"x +\"}\ndesc: \"\"\n").unwrap_err();
    match e {
        Error::ExprSyntax { field, column, .. } => {
            assert_eq!(field, "variables.x.formula");
            assert_eq!(column, 4);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn undefined_placeholder_gives_one_diagnostic() {
    let t = parse_spec("variables:\n  x: {type: int, domain: \"[1, 2]\"}\ndesc: \"{x} {question2}\"\n").unwrap();
    let d = validate_spec(&t);
    assert_eq!(d.len(), 1, "{d:?}");
    assert!(d[0].message.contains("question2"));
    assert_eq!(d[0].location, "desc");
}

#[test]
fn amount_length_mismatch_gives_one_diagnostic() {
    let doc = "variables:\n  n: {type: int, domain: \"[3, 4]\"}\n  xs: {formula: \"range(n)\"}\nsymbols:\n  b: {source: [xs], type: bool}\nconditions:\n  c:\n    source: [xs]\n    amount: ['1', '1']\n    formula: \"b[_sym[0][0]]\"\ndesc: \"{c}\"\n";
    let t = parse_spec(doc).unwrap();
    let d = validate_spec(&t);
    assert_eq!(d.len(), 1, "{d:?}");
    assert_eq!(d[0].location, "conditions.c.amount");
}

#[test]
fn external_operator_paths_are_rejected() {
    let doc = "custom_operator:\n  f: scripts/f.py\ndesc: \"\"\n";
    assert_eq!(parse_spec(doc).unwrap_err().class(), "ConstraintError");
    let ok = "custom_operator:\n  twice: \"lambda x: x * 2\"\n  g: \"plugin:gcd\"\nvariables:\n  y: {formula: \"twice(g(4, 6))\"}\ndesc: \"{y}\"\n";
    let t = parse_spec(ok).unwrap();
    assert!(validate_spec(&t).is_empty());
}

#[test]
fn config_parse_and_round_trip() {
    let text = r#"{"spec_id":"hamburger","variable_values":{"s_num":4,"f_num":3,"names":["Ann","Bo","Cy","Di"],"food":["tea","pie","jam"]},"condition_params":{"at_least_one_person_bought":[{"params":["pie"],"indices":[[[1]]]}]}}"#;
    let c = parse_config(text).unwrap();
    assert_eq!(c.variable_values["s_num"], 4);
    let again = parse_config(&c.to_canonical_string()).unwrap();
    assert_eq!(again, c);
    assert_eq!(again.to_canonical_string(), c.to_canonical_string());
}

#[test]
fn config_missing_variable_values_is_schema_error() {
    let e = parse_config(r#"{"spec_id":"x"}"#).unwrap_err();
    assert_eq!(e.class(), "SchemaError");
    let e = parse_config(r#"{"spec_id":"x","variable_values":{},"extra":1}"#).unwrap_err();
    assert_eq!(e.class(), "SchemaError");
}

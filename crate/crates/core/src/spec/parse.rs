//! YAML document to [`PuzzleTemplate`].

use serde_yaml::{Mapping, Value as Yaml};

use super::model::*;
use crate::error::{Error, Result};
use crate::expr::{parse_lambda, Template};
use crate::solver::term::Sort;

/// Default model-enumeration cap.
pub const DEFAULT_MAX_SOLUTION: usize = 6000;

/// Parse a specification document; the template id is `"spec"`.
pub fn parse_spec(text: &str) -> Result<PuzzleTemplate> {
    parse_spec_named(text, "spec")
}

/// Parse a specification document under the given id.
pub fn parse_spec_named(text: &str, id: &str) -> Result<PuzzleTemplate> {
    let doc: Yaml = serde_yaml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let mut top = Obj::new(&doc, "")?;
    let mut custom_operators = Vec::new();
    for key in ["custom_operator", "custom_operators"] {
        if let Some(v) = top.take(key) {
            for (name, def) in entries(v, key)? {
                let loc = format!("{key}.{name}");
                custom_operators.push((name, operator(&def, &loc)?));
            }
        }
    }
    let mut variables = Vec::new();
    if let Some(v) = top.take("variables") {
        for (name, def) in entries(v, "variables")? {
            variables.push(variable(&name, &def)?);
        }
    }
    let mut symbols = Vec::new();
    if let Some(v) = top.take("symbols") {
        for (name, def) in entries(v, "symbols")? {
            symbols.push(symbol(&name, &def)?);
        }
    }
    let mut conditions = Vec::new();
    if let Some(v) = top.take("conditions") {
        for (name, def) in entries(v, "conditions")? {
            conditions.push(condition(&name, &def, &format!("conditions.{name}"))?);
        }
    }
    let calc_solution = match top.take("calc_solution") {
        Some(v) => boolean(v, "calc_solution")?,
        None => true,
    };
    let max_solution = match top.take("max_solution") {
        Some(v) => {
            let n = integer(v, "max_solution")?;
            if n < 1 {
                return Err(Error::Constraint("max_solution must be at least 1".into()));
            }
            n as usize
        }
        None => DEFAULT_MAX_SOLUTION,
    };
    let post_generation = top.take("post_generation").map(post_gen).transpose()?;
    let optimize = top.take("optimize").map(optimize_decl).transpose()?;
    let mut queries = Vec::new();
    if let Some(v) = top.take("queries") {
        for (name, def) in entries(v, "queries")? {
            queries.push(query(&name, &def)?);
        }
    }
    let desc = match top.take("desc") {
        Some(v) => template(v, "desc")?,
        None => return Err(Error::Schema("missing required field `desc`".into())),
    };
    top.finish()?;
    Ok(PuzzleTemplate {
        id: id.to_string(),
        custom_operators,
        variables,
        symbols,
        conditions,
        calc_solution,
        max_solution,
        post_generation,
        optimize,
        queries,
        desc,
    })
}

/// Mapping accessor that rejects keys nobody asked for.
struct Obj<'a> {
    map: &'a Mapping,
    loc: String,
    used: Vec<String>,
}

impl<'a> Obj<'a> {
    fn new(v: &'a Yaml, loc: &str) -> Result<Obj<'a>> {
        match v {
            Yaml::Mapping(map) => Ok(Obj {
                map,
                loc: loc.to_string(),
                used: Vec::new(),
            }),
            _ => Err(Error::Schema(format!("{}: expected a mapping", display_loc(loc)))),
        }
    }

    fn take(&mut self, key: &str) -> Option<&'a Yaml> {
        self.used.push(key.to_string());
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn has(&self, key: &str) -> bool {
        self.map.get(key).is_some_and(|v| !v.is_null())
    }

    fn at(&self, key: &str) -> String {
        if self.loc.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.loc)
        }
    }

    fn finish(self) -> Result<()> {
        for k in self.map.keys() {
            let name = match k {
                Yaml::String(s) => s.clone(),
                other => format!("{other:?}"),
            };
            if !self.used.contains(&name) {
                return Err(Error::Schema(format!("{}: unknown field `{name}`", display_loc(&self.loc))));
            }
        }
        Ok(())
    }
}

fn display_loc(loc: &str) -> &str {
    if loc.is_empty() {
        "top level"
    } else {
        loc
    }
}

fn entries(v: &Yaml, loc: &str) -> Result<Vec<(String, Yaml)>> {
    let Yaml::Mapping(map) = v else {
        return Err(Error::Schema(format!("{loc}: expected a mapping")));
    };
    map.iter()
        .map(|(k, v)| match k {
            Yaml::String(s) => Ok((s.clone(), v.clone())),
            _ => Err(Error::Schema(format!("{loc}: keys must be strings"))),
        })
        .collect()
}

fn text(v: &Yaml, loc: &str) -> Result<String> {
    match v {
        Yaml::String(s) => Ok(s.clone()),
        Yaml::Number(n) => Ok(n.to_string()),
        Yaml::Bool(b) => Ok(if *b { "True" } else { "False" }.to_string()),
        _ => Err(Error::Schema(format!("{loc}: expected a scalar"))),
    }
}

fn code(v: &Yaml, loc: &str) -> Result<Code> {
    Code::parse(text(v, loc)?.trim()).map_err(|e| e.in_field(loc))
}

fn template(v: &Yaml, loc: &str) -> Result<Template> {
    Template::parse(&text(v, loc)?).map_err(|e| e.in_field(loc))
}

fn seq<'a>(v: &'a Yaml, loc: &str) -> Result<&'a Vec<Yaml>> {
    match v {
        Yaml::Sequence(s) => Ok(s),
        _ => Err(Error::Schema(format!("{loc}: expected a list"))),
    }
}

fn codes(v: &Yaml, loc: &str) -> Result<Vec<Code>> {
    seq(v, loc)?
        .iter()
        .enumerate()
        .map(|(i, x)| code(x, &format!("{loc}[{i}]")))
        .collect()
}

fn boolean(v: &Yaml, loc: &str) -> Result<bool> {
    match v {
        Yaml::Bool(b) => Ok(*b),
        _ => Err(Error::Schema(format!("{loc}: expected a boolean"))),
    }
}

fn booleans(v: &Yaml, loc: &str) -> Result<Vec<bool>> {
    seq(v, loc)?
        .iter()
        .enumerate()
        .map(|(i, x)| boolean(x, &format!("{loc}[{i}]")))
        .collect()
}

fn integer(v: &Yaml, loc: &str) -> Result<i64> {
    v.as_i64()
        .ok_or_else(|| Error::Schema(format!("{loc}: expected an integer")))
}

fn index_list(v: &Yaml, loc: &str) -> Result<Vec<usize>> {
    seq(v, loc)?
        .iter()
        .map(|x| {
            let i = integer(x, loc)?;
            usize::try_from(i).map_err(|_| Error::Schema(format!("{loc}: negative index")))
        })
        .collect()
}

fn operator(v: &Yaml, loc: &str) -> Result<OperatorDef> {
    let t = text(v, loc)?;
    let t = t.trim();
    if let Some(name) = t.strip_prefix("plugin:") {
        let name = name.trim();
        if crate::expr::plugin(name).is_none() {
            return Err(Error::Constraint(format!("{loc}: no registered plugin `{name}`")));
        }
        return Ok(OperatorDef::Plugin(name.to_string()));
    }
    if t.starts_with("lambda") {
        let l = parse_lambda(t).map_err(|e| e.in_field(loc))?;
        return Ok(OperatorDef::Lambda {
            text: t.to_string(),
            params: l.params.clone(),
            body: l.body.clone(),
        });
    }
    Err(Error::Constraint(format!(
        "{loc}: operators must be a `lambda` expression or `plugin:<name>`; external scripts are not executed"
    )))
}

fn scalar_type(v: &Yaml, loc: &str) -> Result<ScalarType> {
    let t = text(v, loc)?;
    Ok(match t.to_ascii_lowercase().as_str() {
        "int" | "integer" => ScalarType::Int,
        "bool" | "boolean" => ScalarType::Bool,
        "float" | "real" => ScalarType::Float,
        "text" | "str" | "string" => ScalarType::Text,
        _ => return Err(Error::Schema(format!("{loc}: unknown variable type `{t}`"))),
    })
}

fn sort(v: &Yaml, loc: &str) -> Result<Sort> {
    let t = text(v, loc)?;
    match t.to_ascii_lowercase().as_str() {
        "int" | "integer" => Ok(Sort::Int),
        "bool" | "boolean" => Ok(Sort::Bool),
        "real" | "float" => Err(Error::Constraint(format!(
            "{loc}: Real-sorted symbols are not supported by the finite-domain backend"
        ))),
        _ => Err(Error::Schema(format!("{loc}: unknown sort `{t}`"))),
    }
}

fn diff_factor(v: &Yaml, loc: &str) -> Result<i8> {
    match integer(v, loc)? {
        d @ -1..=1 => Ok(d as i8),
        d => Err(Error::Constraint(format!("{loc}: diff_factor must be -1, 0 or 1, got {d}"))),
    }
}

fn variable(name: &str, v: &Yaml) -> Result<VariableDef> {
    let loc = format!("variables.{name}");
    let mut o = Obj::new(v, &loc)?;
    let ty = o.take("type");
    let domain = o.take("domain");
    let formula = o.take("formula");
    let diff = match o.take("diff_factor") {
        Some(d) => diff_factor(d, &o.at("diff_factor"))?,
        None => 0,
    };
    let kind = match (ty, domain, formula) {
        (None, None, Some(f)) => VariableKind::Formula(code(f, &o.at("formula"))?),
        (Some(t), Some(d), None) => VariableKind::Domain {
            ty: scalar_type(t, &o.at("type"))?,
            domain: code(d, &o.at("domain"))?,
        },
        (_, _, Some(_)) => {
            return Err(Error::Constraint(format!(
                "{loc}: type and domain must be omitted when formula is given"
            )))
        }
        (Some(_), None, None) => return Err(Error::Constraint(format!("{loc}: type requires a domain"))),
        (None, Some(_), None) => return Err(Error::Constraint(format!("{loc}: domain requires a type"))),
        (None, None, None) => {
            return Err(Error::Constraint(format!("{loc}: needs either type+domain or formula")))
        }
    };
    o.finish()?;
    Ok(VariableDef {
        name: name.to_string(),
        kind,
        diff_factor: diff,
    })
}

const SELECTION_KEYS: [&str; 8] = [
    "amount",
    "order",
    "duplicate",
    "domain",
    "domain_cond",
    "dim",
    "dim_cond",
    "custom_cond",
];

fn custom_conds(v: &Yaml, loc: &str) -> Result<Vec<CustomCond>> {
    seq(v, loc)?
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let loc = format!("{loc}[{i}]");
            let mut o = Obj::new(c, &loc)?;
            let scope = match o.take("scope").map(|s| text(s, &loc)).transpose()?.as_deref() {
                Some("domain") => Scope::Domain,
                Some("dim") | None => Scope::Dim,
                Some(other) => return Err(Error::Schema(format!("{loc}: unknown scope `{other}`"))),
            };
            let fields = match o.take("fields") {
                Some(f) => index_list(f, &o.at("fields"))?,
                None => return Err(Error::Schema(format!("{loc}: missing `fields`"))),
            };
            let ctext = match o.take("constraint") {
                Some(c) => text(c, &o.at("constraint"))?.trim().to_string(),
                None => return Err(Error::Schema(format!("{loc}: missing `constraint`"))),
            };
            let lambda = parse_lambda(&ctext).map_err(|e| e.in_field(&o.at("constraint")))?;
            o.finish()?;
            Ok(CustomCond {
                scope,
                fields,
                params: lambda.params.clone(),
                body: Code {
                    text: ctext.clone(),
                    expr: lambda.body.clone(),
                },
                text: ctext,
            })
        })
        .collect()
}

/// Reads the selection fields; `source` must already be taken.
fn selection(o: &mut Obj<'_>, source: Vec<Code>) -> Result<SelectionSpec> {
    let mut s = SelectionSpec::with_sources(source);
    if let Some(v) = o.take("amount") {
        s.amount = Some(codes(v, &o.at("amount"))?);
    }
    if let Some(v) = o.take("order") {
        s.order = Some(booleans(v, &o.at("order"))?);
    }
    if let Some(v) = o.take("duplicate") {
        s.duplicate = Some(booleans(v, &o.at("duplicate"))?);
    }
    if let Some(v) = o.take("domain") {
        s.domain = Some(code(v, &o.at("domain"))?);
    }
    if let Some(v) = o.take("domain_cond") {
        s.domain_cond = boolean(v, &o.at("domain_cond"))?;
    }
    if let Some(v) = o.take("dim") {
        let d = integer(v, &o.at("dim"))?;
        if d < 1 {
            return Err(Error::Constraint(format!("{}: dim must be positive", o.at("dim"))));
        }
        s.dim = d as usize;
    }
    if let Some(v) = o.take("dim_cond") {
        let loc = o.at("dim_cond");
        s.dim_cond = seq(v, &loc)?
            .iter()
            .map(|g| index_list(g, &loc))
            .collect::<Result<_>>()?;
    }
    if let Some(v) = o.take("custom_cond") {
        s.custom_cond = custom_conds(v, &o.at("custom_cond"))?;
    }
    Ok(s)
}

fn symbol(name: &str, v: &Yaml) -> Result<SymbolDecl> {
    let loc = format!("symbols.{name}");
    let mut o = Obj::new(v, &loc)?;
    let derived = o.has("formula") || SELECTION_KEYS.iter().any(|k| o.has(k));
    let source = match o.take("source") {
        Some(s) => codes(s, &o.at("source"))?,
        None => return Err(Error::Schema(format!("{loc}: missing `source`"))),
    };
    let kind = if derived {
        let selection = selection(&mut o, source)?;
        let formula = o.take("formula").map(|f| code(f, &o.at("formula"))).transpose()?;
        let desc = o.take("desc").map(|d| template(d, &o.at("desc"))).transpose()?;
        o.take("type");
        SymbolKind::Derived {
            selection,
            formula,
            desc,
        }
    } else {
        let attrs = match o.take("attr") {
            Some(a) => seq(a, &o.at("attr"))?
                .iter()
                .map(|x| text(x, &o.at("attr")))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let sorts = match o.take("type") {
            None => return Err(Error::Schema(format!("{loc}: missing `type`"))),
            Some(Yaml::Sequence(list)) => {
                if attrs.is_empty() || list.len() != attrs.len() {
                    return Err(Error::Schema(format!("{loc}: `type` list length must equal |attr|")));
                }
                list.iter().map(|t| sort(t, &o.at("type"))).collect::<Result<Vec<_>>>()?
            }
            Some(t) => {
                let s = sort(t, &o.at("type"))?;
                vec![s; attrs.len().max(1)]
            }
        };
        let desc = match o.take("desc") {
            None => Vec::new(),
            Some(Yaml::Sequence(list)) => {
                if attrs.is_empty() || list.len() != attrs.len() {
                    return Err(Error::Schema(format!("{loc}: `desc` list length must equal |attr|")));
                }
                list.iter()
                    .map(|d| template(d, &o.at("desc")))
                    .collect::<Result<Vec<_>>>()?
            }
            Some(d) => vec![template(d, &o.at("desc"))?],
        };
        SymbolKind::Defined {
            source,
            attrs,
            sorts,
            desc,
        }
    };
    o.finish()?;
    Ok(SymbolDecl {
        name: name.to_string(),
        kind,
    })
}

fn condition(name: &str, v: &Yaml, loc: &str) -> Result<ConditionDecl> {
    let mut o = Obj::new(v, loc)?;
    let formula = match o.take("formula") {
        Some(f) => code(f, &o.at("formula"))?,
        None => return Err(Error::Schema(format!("{loc}: missing `formula`"))),
    };
    let desc = o.take("desc").map(|d| template(d, &o.at("desc"))).transpose()?;
    let selection = match o.take("source") {
        Some(s) => {
            let source = codes(s, &o.at("source"))?;
            Some(selection(&mut o, source)?)
        }
        None => {
            if let Some(k) = SELECTION_KEYS.iter().find(|k| o.has(k)) {
                return Err(Error::Schema(format!("{loc}: `{k}` requires `source` (dynamic condition)")));
            }
            None
        }
    };
    o.finish()?;
    Ok(ConditionDecl {
        name: name.to_string(),
        formula,
        desc,
        selection,
    })
}

fn option_template(o: &mut Obj<'_>) -> Result<OptionTemplate> {
    let loc = o.loc.clone();
    let source = match o.take("source") {
        Some(s) => codes(s, &o.at("source"))?,
        None => return Err(Error::Schema(format!("{loc}: missing `source`"))),
    };
    let selection = selection(o, source)?;
    let cond = match o.take("cond").map(|c| text(c, &o.at("cond"))).transpose()?.as_deref() {
        Some("any") => CondScope::Any,
        Some("all") | None => CondScope::All,
        Some(other) => return Err(Error::Constraint(format!("{loc}: cond must be any or all, got `{other}`"))),
    };
    let opt_formula = match o.take("opt_formula") {
        Some(f) => code(f, &o.at("opt_formula"))?,
        None => return Err(Error::Schema(format!("{loc}: missing `opt_formula`"))),
    };
    let opt_text = match o.take("opt_text") {
        Some(t) => template(t, &o.at("opt_text"))?,
        None => Template::parse("{_opt}")?,
    };
    Ok(OptionTemplate {
        selection,
        cond,
        opt_formula,
        opt_text,
    })
}

fn query(name: &str, v: &Yaml) -> Result<QueryDecl> {
    let loc = format!("queries.{name}");
    let mut o = Obj::new(v, &loc)?;
    let desc = match o.take("desc") {
        Some(d) => template(d, &o.at("desc"))?,
        None => return Err(Error::Schema(format!("{loc}: missing `desc`"))),
    };
    let eval_type = match o.take("eval_type") {
        Some(e) => {
            let t = text(e, &o.at("eval_type"))?;
            Some(EvalType::from_name(&t).ok_or_else(|| Error::Schema(format!("{loc}: unknown eval_type `{t}`")))?)
        }
        None => None,
    };
    let query_type = o.take("query_type").map(|q| text(q, &o.at("query_type"))).transpose()?;
    let kind = if o.has("ans_formula") {
        let ans_formula = code(o.take("ans_formula").unwrap(), &o.at("ans_formula"))?;
        let ans_text = match o.take("ans_text") {
            Some(t) => {
                let s = text(t, &o.at("ans_text"))?;
                if s.contains('{') {
                    AnsText::Template(Template::parse(&s).map_err(|e| e.in_field(&o.at("ans_text")))?)
                } else {
                    AnsText::Expr(code(t, &o.at("ans_text"))?)
                }
            }
            None => return Err(Error::Schema(format!("{loc}: open query needs `ans_text`"))),
        };
        let ans_assertion = o
            .take("ans_assertion")
            .map(|a| code(a, &o.at("ans_assertion")))
            .transpose()?;
        QueryKind::Open {
            ans_formula,
            ans_text,
            ans_assertion,
            eval_type,
            query_type,
        }
    } else {
        if eval_type.is_some_and(|e| e != EvalType::Option) {
            return Err(Error::Constraint(format!("{loc}: selection queries are graded as options")));
        }
        let select_type = match o.take("select_type").map(|s| text(s, &o.at("select_type"))).transpose()?.as_deref() {
            Some("single") | None => SelectType::Single,
            Some("multiple") => SelectType::Multiple,
            Some(other) => return Err(Error::Schema(format!("{loc}: select_type must be single or multiple, got `{other}`"))),
        };
        let opt_num = match o.take("opt_num") {
            Some(n) => integer(n, &o.at("opt_num"))?,
            None => return Err(Error::Schema(format!("{loc}: selection query needs `opt_num`"))),
        };
        if !(2..=26).contains(&opt_num) {
            return Err(Error::Constraint(format!("{loc}: opt_num must be within 2..=26, got {opt_num}")));
        }
        let redundancy_guard = match o.take("redundancy_guard") {
            Some(b) => boolean(b, &o.at("redundancy_guard"))?,
            None => true,
        };
        let (templates, inline) = match o.take("templates") {
            Some(list) => {
                let loc_t = o.at("templates");
                let mut out = Vec::new();
                for (i, t) in seq(list, &loc_t)?.iter().enumerate() {
                    let mut to = Obj::new(t, &format!("{loc_t}[{i}]"))?;
                    out.push(option_template(&mut to)?);
                    to.finish()?;
                }
                if out.is_empty() {
                    return Err(Error::Constraint(format!("{loc}: at least one option template is required")));
                }
                (out, false)
            }
            None => (vec![option_template(&mut o)?], true),
        };
        let default_type = match select_type {
            SelectType::Single => "single_choice",
            SelectType::Multiple => "multiple_choice",
        };
        QueryKind::Selection {
            query_type: query_type.unwrap_or_else(|| default_type.to_string()),
            select_type,
            opt_num: opt_num as usize,
            templates,
            inline,
            redundancy_guard,
        }
    };
    o.finish()?;
    Ok(QueryDecl {
        name: name.to_string(),
        desc,
        kind,
    })
}

fn post_gen(v: &Yaml) -> Result<PostGenDecl> {
    let mut o = Obj::new(v, "post_generation")?;
    let mut vars = Vec::new();
    if let Some(m) = o.take("post_gen_vars") {
        for (name, f) in entries(m, "post_generation.post_gen_vars")? {
            let c = code(&f, &format!("post_generation.post_gen_vars.{name}"))?;
            vars.push((name, c));
        }
    }
    let mut conditions = Vec::new();
    if let Some(m) = o.take("post_gen_conditions") {
        for (name, def) in entries(m, "post_generation.post_gen_conditions")? {
            let loc = format!("post_generation.post_gen_conditions.{name}");
            let c = condition(&name, &def, &loc)?;
            if c.is_dynamic() {
                return Err(Error::Constraint(format!("{loc}: post-generation conditions must be static")));
            }
            conditions.push(c);
        }
    }
    o.finish()?;
    Ok(PostGenDecl { vars, conditions })
}

fn optimize_decl(v: &Yaml) -> Result<OptimizeDecl> {
    let mut o = Obj::new(v, "optimize")?;
    let direction = match o.take("type").map(|t| text(t, "optimize.type")).transpose()?.as_deref() {
        Some("minimize") => OptimizeDirection::Minimize,
        Some("maximize") => OptimizeDirection::Maximize,
        Some(other) => return Err(Error::Schema(format!("optimize.type must be minimize or maximize, got `{other}`"))),
        None => return Err(Error::Schema("optimize: missing `type`".into())),
    };
    let formula = match o.take("formula") {
        Some(f) => code(f, "optimize.formula")?,
        None => return Err(Error::Schema("optimize: missing `formula`".into())),
    };
    o.finish()?;
    Ok(OptimizeDecl { direction, formula })
}

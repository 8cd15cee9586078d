//! `{expression}` interpolation.

use super::ast::Expr;
use super::{evaluate, parse_expression, Env};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Part {
    Text(String),
    Expr { src: String, expr: Expr },
}

/// A parsed template. `{{` and `}}` are literal braces.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    source: String,
    parts: Vec<Part>,
}

impl Template {
    pub fn parse(text: &str) -> Result<Template> {
        let chars: Vec<char> = text.chars().collect();
        let mut parts = Vec::new();
        let mut buf = String::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c == '{' && chars.get(i + 1) == Some(&'{') {
                buf.push('{');
                i += 2;
            } else if c == '}' && chars.get(i + 1) == Some(&'}') {
                buf.push('}');
                i += 2;
            } else if c == '{' {
                let start = i + 1;
                let end = closing_brace(&chars, start)
                    .ok_or_else(|| Error::syntax(i + 1, "unclosed `{` in template"))?;
                let src: String = chars[start..end].iter().collect();
                let expr = parse_expression(&src).map_err(|e| match e {
                    Error::ExprSyntax { column, message, .. } => Error::syntax(start + column, message),
                    other => other,
                })?;
                if !buf.is_empty() {
                    parts.push(Part::Text(std::mem::take(&mut buf)));
                }
                parts.push(Part::Expr { src, expr });
                i = end + 1;
            } else {
                buf.push(c);
                i += 1;
            }
        }
        if !buf.is_empty() {
            parts.push(Part::Text(buf));
        }
        Ok(Template {
            source: text.to_string(),
            parts,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Placeholder expressions in order.
    pub fn exprs(&self) -> impl Iterator<Item = &Expr> {
        self.parts.iter().filter_map(|p| match p {
            Part::Expr { expr, .. } => Some(expr),
            Part::Text(_) => None,
        })
    }

    pub fn render(&self, env: &mut Env) -> Result<String> {
        let mut out = String::new();
        for p in &self.parts {
            match p {
                Part::Text(t) => out.push_str(t),
                Part::Expr { src, expr } => {
                    let v = evaluate(expr, env)?;
                    let text = v.py_str().map_err(|e| match e {
                        Error::Render(m) => Error::Render(format!("{{{src}}}: {m}")),
                        other => other,
                    })?;
                    out.push_str(&text);
                }
            }
        }
        Ok(out)
    }
}

/// Index of the `}` closing a placeholder whose body starts at `start`.
fn closing_brace(chars: &[char], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut i = start;
    while i < chars.len() {
        let c = chars[i];
        if let Some(q) = quote {
            if c == '\\' {
                i += 1;
            } else if c == q {
                quote = None;
            }
        } else {
            match c {
                '\'' | '"' => quote = Some(c),
                '(' | '[' | '{' => depth += 1,
                ')' | ']' => depth = depth.saturating_sub(1),
                '}' if depth == 0 => return Some(i),
                '}' => depth -= 1,
                _ => {}
            }
        }
        i += 1;
    }
    None
}

/// Parse and render in one step.
pub fn render_template(text: &str, env: &mut Env) -> Result<String> {
    Template::parse(text)?.render(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Value;

    #[test]
    fn substitution() {
        let mut env = Env::new();
        env.set("s_num", Value::Int(5));
        env.set("names", Value::list(vec![Value::str("A"), Value::str("B")]));
        env.set("_sym", Value::list(vec![Value::Int(0), Value::Int(0), Value::Bool(false)]));
        assert_eq!(render_template("{s_num} students", &mut env).unwrap(), "5 students");
        assert_eq!(render_template("{', '.join(names)}", &mut env).unwrap(), "A, B");
        assert_eq!(
            render_template("{'bought' if _sym[2] else 'did not buy'}", &mut env).unwrap(),
            "did not buy"
        );
        assert_eq!(render_template("{{literal}} {s_num}", &mut env).unwrap(), "{literal} 5");
    }

    #[test]
    fn quoted_braces_inside_placeholder() {
        let mut env = Env::new();
        assert_eq!(render_template("x{'}'}y", &mut env).unwrap(), "x}y");
    }

    #[test]
    fn errors() {
        let mut env = Env::new();
        assert!(matches!(Template::parse("a {b"), Err(Error::ExprSyntax { .. })));
        assert_eq!(render_template("{nope}", &mut env), Err(Error::UnboundName("nope".into())));
        let t = crate::solver::term::Term::Var(crate::solver::term::VarId(0), crate::solver::term::Sort::Bool);
        env.set("b", Value::term(t));
        assert!(matches!(render_template("{b}", &mut env), Err(Error::Render(_))));
    }
}

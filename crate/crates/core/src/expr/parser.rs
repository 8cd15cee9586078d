//! Tokenizer and recursive-descent parser for the expression language.
//!
//! The grammar is a closed subset of Python expression syntax. Columns in
//! errors are 1-based character positions.

use super::ast::{BinOp, CmpOp, Expr, ForClause, Lambda, Literal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Float(f64),
    Str(String),
    Name(String),
    Op(&'static str),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

const OPS: [&str; 21] = [
    "//", "==", "!=", "<=", ">=", "+", "-", "*", "/", "%", "<", ">", "(", ")", "[", "]", ",", ":",
    ".", "{", "}",
];

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                i += 1;
            }
            let mut is_float = false;
            if i < chars.len() && chars[i] == '.' {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    is_float = true;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            let tok = if is_float {
                Tok::Float(s.parse().map_err(|_| Error::syntax(col, "bad number"))?)
            } else {
                Tok::Int(s.parse().map_err(|_| Error::syntax(col, "integer literal out of range"))?)
            };
            out.push(Token { tok, col });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Name(chars[start..i].iter().collect()),
                col,
            });
        } else if c == '\'' || c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(Error::syntax(col, "unterminated string literal")),
                    Some(&q) if q == c => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = chars
                            .get(i + 1)
                            .ok_or_else(|| Error::syntax(col, "unterminated string literal"))?;
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            other => *other,
                        });
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), col });
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let op = OPS
                .iter()
                .find(|op| rest.starts_with(**op))
                .ok_or_else(|| Error::syntax(col, format!("unexpected character `{c}`")))?;
            i += op.chars().count();
            out.push(Token { tok: Tok::Op(op), col });
        }
    }
    out.push(Token {
        tok: Tok::End,
        col: chars.len() + 1,
    });
    Ok(out)
}

const KEYWORDS: [&str; 12] = [
    "if", "else", "for", "in", "lambda", "and", "or", "not", "is", "True", "False", "None",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn col(&self) -> usize {
        self.toks[self.pos].col
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{op}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.at_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{kw}`")))
        }
    }

    fn unexpected(&self, what: &str) -> Error {
        let found = match self.peek() {
            Tok::End => "unexpected end of expression".to_string(),
            Tok::Int(v) => format!("unexpected number `{v}`"),
            Tok::Float(v) => format!("unexpected number `{v}`"),
            Tok::Str(s) => format!("unexpected string '{s}'"),
            Tok::Name(n) => format!("unexpected name `{n}`"),
            Tok::Op(o) => format!("unexpected `{o}`"),
        };
        Error::syntax(self.col(), format!("{found}; {what}"))
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Name(n) if !KEYWORDS.contains(&n.as_str()) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected("expected a name")),
        }
    }

    /// ternary := disj ['if' disj 'else' ternary]
    fn expr(&mut self) -> Result<Expr> {
        let then = self.disj()?;
        if self.at_kw("if") {
            self.bump();
            let cond = self.disj()?;
            self.expect_kw("else")?;
            let otherwise = self.expr()?;
            return Ok(Expr::IfElse {
                cond: Box::new(cond),
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            });
        }
        Ok(then)
    }

    /// Python's `or_test` level. The boolean keywords are outside the
    /// grammar, so this is just a comparison.
    fn disj(&mut self) -> Result<Expr> {
        if self.at_kw("not") || self.at_kw("lambda") {
            return Err(self.unexpected("use Not(...) or a custom operator"));
        }
        let e = self.comparison()?;
        if self.at_kw("and") || self.at_kw("or") || self.at_kw("is") {
            return Err(self.unexpected("use And(...)/Or(...) instead"));
        }
        Ok(e)
    }

    fn comparison(&mut self) -> Result<Expr> {
        let first = self.arith()?;
        let mut rest = Vec::new();
        loop {
            let op = match self.peek() {
                Tok::Op("==") => CmpOp::Eq,
                Tok::Op("!=") => CmpOp::Ne,
                Tok::Op("<") => CmpOp::Lt,
                Tok::Op("<=") => CmpOp::Le,
                Tok::Op(">") => CmpOp::Gt,
                Tok::Op(">=") => CmpOp::Ge,
                _ => break,
            };
            self.bump();
            rest.push((op, self.arith()?));
        }
        if rest.is_empty() {
            Ok(first)
        } else {
            Ok(Expr::Compare(Box::new(first), rest))
        }
    }

    fn arith(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                _ => break,
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat_op("-") {
            let inner = self.factor()?;
            return Ok(match inner {
                Expr::Lit(Literal::Int(v)) => Expr::Lit(Literal::Int(-v)),
                Expr::Lit(Literal::Float(v)) => Expr::Lit(Literal::Float(-v)),
                other => Expr::Neg(Box::new(other)),
            });
        }
        if self.eat_op("+") {
            return self.factor();
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr> {
        let mut e = self.atom()?;
        loop {
            if self.at_op("(") {
                let name = match &e {
                    Expr::Name(n) => n.clone(),
                    _ => return Err(self.unexpected("only named functions can be called")),
                };
                self.bump();
                let args = self.args(")")?;
                e = Expr::Call(name, args);
            } else if self.eat_op("[") {
                e = self.subscript(e)?;
            } else if self.at_op(".") {
                self.bump();
                let col = self.col();
                let method = self.ident()?;
                self.expect_op("(")?;
                let mut args = self.args(")")?;
                if args.len() != 1 {
                    return Err(Error::syntax(col, format!("`.{method}` takes exactly one argument")));
                }
                let arg = Box::new(args.remove(0));
                e = match method.as_str() {
                    "get" => Expr::GetAttr(Box::new(e), arg),
                    "join" => Expr::Join(Box::new(e), arg),
                    _ => return Err(Error::syntax(col, format!("unsupported method `.{method}`"))),
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn subscript(&mut self, target: Expr) -> Result<Expr> {
        let lo = if self.at_op(":") {
            None
        } else {
            Some(self.expr()?)
        };
        if self.eat_op(":") {
            let hi = if self.at_op("]") {
                None
            } else {
                Some(Box::new(self.expr()?))
            };
            self.expect_op("]")?;
            return Ok(Expr::Slice(Box::new(target), lo.map(Box::new), hi));
        }
        let mut index = lo.expect("non-slice subscript has an index");
        if self.at_op(",") {
            let mut items = vec![index];
            while self.eat_op(",") {
                if self.at_op("]") {
                    break;
                }
                items.push(self.expr()?);
            }
            index = Expr::Tuple(items);
        }
        self.expect_op("]")?;
        Ok(Expr::Index(Box::new(target), Box::new(index)))
    }

    fn args(&mut self, close: &str) -> Result<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat_op(close) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat_op(",") {
                if self.eat_op(close) {
                    return Ok(args);
                }
                continue;
            }
            self.expect_op(close)?;
            return Ok(args);
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.col();
        match self.bump() {
            Tok::Int(v) => Ok(Expr::Lit(Literal::Int(v))),
            Tok::Float(v) => Ok(Expr::Lit(Literal::Float(v))),
            Tok::Str(s) => {
                let mut s = s;
                // adjacent literals concatenate
                while let Tok::Str(more) = self.peek().clone() {
                    self.bump();
                    s.push_str(&more);
                }
                Ok(Expr::Lit(Literal::Str(s)))
            }
            Tok::Name(n) => match n.as_str() {
                "True" => Ok(Expr::Lit(Literal::Bool(true))),
                "False" => Ok(Expr::Lit(Literal::Bool(false))),
                "None" => Ok(Expr::Lit(Literal::None)),
                kw if KEYWORDS.contains(&kw) => {
                    self.pos -= 1;
                    Err(self.unexpected("expected an operand"))
                }
                _ => Ok(Expr::Name(n)),
            },
            Tok::Op("(") => {
                if self.eat_op(")") {
                    return Ok(Expr::Tuple(Vec::new()));
                }
                let first = self.expr()?;
                if self.at_kw("for") {
                    return Err(self.unexpected("generator expressions are not supported; use [...]"));
                }
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.at_op(")") {
                        break;
                    }
                    items.push(self.expr()?);
                }
                self.expect_op(")")?;
                Ok(Expr::Tuple(items))
            }
            Tok::Op("[") => {
                if self.eat_op("]") {
                    return Ok(Expr::List(Vec::new()));
                }
                let first = self.expr()?;
                if self.at_kw("for") {
                    return self.comprehension(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.at_op("]") {
                        break;
                    }
                    items.push(self.expr()?);
                }
                self.expect_op("]")?;
                Ok(Expr::List(items))
            }
            Tok::End => {
                self.pos = self.toks.len() - 1;
                Err(Error::syntax(col, "unexpected end of expression"))
            }
            _ => {
                self.pos -= 1;
                Err(self.unexpected("expected an operand"))
            }
        }
    }

    fn comprehension(&mut self, elem: Expr) -> Result<Expr> {
        let mut clauses = Vec::new();
        let mut filter = None;
        while self.at_kw("for") {
            self.bump();
            let (targets, unpack) = self.targets()?;
            self.expect_kw("in")?;
            let iter = self.disj()?;
            clauses.push(ForClause {
                targets,
                unpack,
                iter,
            });
            if self.at_kw("if") {
                self.bump();
                filter = Some(Box::new(self.disj()?));
                break;
            }
        }
        self.expect_op("]")?;
        Ok(Expr::Comp {
            elem: Box::new(elem),
            clauses,
            filter,
        })
    }

    fn targets(&mut self) -> Result<(Vec<String>, bool)> {
        if self.eat_op("(") {
            let mut names = vec![self.ident()?];
            while self.eat_op(",") {
                if self.at_op(")") {
                    break;
                }
                names.push(self.ident()?);
            }
            self.expect_op(")")?;
            return Ok((names, true));
        }
        let mut names = vec![self.ident()?];
        let mut unpack = false;
        while self.eat_op(",") {
            unpack = true;
            names.push(self.ident()?);
        }
        Ok((names, unpack))
    }

    fn finish(&self) -> Result<()> {
        if matches!(self.peek(), Tok::End) {
            Ok(())
        } else {
            Err(self.unexpected("expected end of expression"))
        }
    }
}

/// Parse one expression.
pub fn parse_expression(text: &str) -> Result<Expr> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };
    if matches!(p.peek(), Tok::End) {
        return Err(Error::syntax(1, "empty expression"));
    }
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parse `lambda a, b: body`.
pub fn parse_lambda(text: &str) -> Result<Lambda> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };
    p.expect_kw("lambda")?;
    let mut params = Vec::new();
    if !p.at_op(":") {
        params.push(p.ident()?);
        while p.eat_op(",") {
            params.push(p.ident()?);
        }
    }
    p.expect_op(":")?;
    let body = p.expr()?;
    p.finish()?;
    Ok(Lambda { params, body })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col_of(text: &str) -> usize {
        match parse_expression(text) {
            Err(Error::ExprSyntax { column, .. }) => column,
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn dice_sum_is_call_plus_call() {
        let e = parse_expression("randint(1,6) + randint(1,6)").unwrap();
        let call = Expr::Call(
            "randint".into(),
            vec![Expr::Lit(Literal::Int(1)), Expr::Lit(Literal::Int(6))],
        );
        assert_eq!(e, Expr::Binary(BinOp::Add, Box::new(call.clone()), Box::new(call)));
    }

    #[test]
    fn dangling_operator_reports_column_4() {
        assert_eq!(col_of("x +"), 4);
    }

    #[test]
    fn nested_comprehension() {
        let e = parse_expression("[Or([buy[(p, f)] for f in food]) for p in names]").unwrap();
        let Expr::Comp { elem, clauses, filter } = e else {
            panic!("not a comprehension")
        };
        assert!(filter.is_none());
        assert_eq!(clauses[0].targets, vec!["p".to_string()]);
        let Expr::Call(name, args) = *elem else {
            panic!("element is not a call")
        };
        assert_eq!(name, "Or");
        assert!(matches!(args[0], Expr::Comp { .. }));
    }

    #[test]
    fn comprehension_iter_does_not_swallow_filter() {
        let e = parse_expression("[1 for f in food if g(f)]").unwrap();
        let Expr::Comp { clauses, filter, .. } = e else {
            panic!()
        };
        assert_eq!(clauses[0].iter, Expr::Name("food".into()));
        assert!(filter.is_some());
    }

    #[test]
    fn tuple_unpacking_targets() {
        let e = parse_expression("[a + b for a, b in zip(x, y)]").unwrap();
        let Expr::Comp { clauses, .. } = e else {
            panic!()
        };
        assert_eq!(clauses[0].targets, vec!["a".to_string(), "b".to_string()]);
        assert!(clauses[0].unpack);
    }

    #[test]
    fn methods_and_slices() {
        assert!(matches!(parse_expression("', '.join(names)").unwrap(), Expr::Join(..)));
        assert!(matches!(parse_expression("w.get('volume')").unwrap(), Expr::GetAttr(..)));
        assert!(matches!(parse_expression("x[1:]").unwrap(), Expr::Slice(..)));
        assert!(matches!(parse_expression("x[a, b]").unwrap(), Expr::Index(..)));
    }

    #[test]
    fn outside_grammar_is_rejected() {
        assert!(parse_expression("a and b").is_err());
        assert!(parse_expression("x.upper()").is_err());
        assert!(parse_expression("f(x)(y)").is_err());
        assert!(parse_expression("{1: 2}").is_err());
        assert!(parse_expression("").is_err());
        assert!(parse_expression("'abc").is_err());
    }

    #[test]
    fn ternary_binds_loosest() {
        let e = parse_expression("'bought' if s[2] else 'did not buy'").unwrap();
        assert!(matches!(e, Expr::IfElse { .. }));
        let e = parse_expression("'no' if d == 1 else str(d - 1)").unwrap();
        let Expr::IfElse { cond, .. } = e else { panic!() };
        assert!(matches!(*cond, Expr::Compare(..)));
    }

    #[test]
    fn lambda_definition() {
        let l = parse_lambda("lambda a, b: a + b").unwrap();
        assert_eq!(l.params, vec!["a".to_string(), "b".to_string()]);
        assert!(parse_lambda("a + b").is_err());
    }
}

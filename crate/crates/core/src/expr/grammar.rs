//! S-expression text form of [`Expr`].
//!
//! ```text
//! expr := number | var | "(" op expr* ")"
//! var  := x<k> | y<k> | z<k>      (block-local, needs a partition)
//!       | v<k>                    (flat index)
//! ops  := + neg * - sq powi pow exp log sin cos max0 abs aff @convex @concave @affine @unknown
//! ```
//!
//! `(aff v0 2 v3 -1 0.5)` is `2 v0 - v3 + 0.5`. A `@tag` wrapper overrides
//! the curvature tag; the printer emits one only where the tag differs from
//! the composition rules, so printing then parsing gives back an equal tree.

use crate::domain::{Block, VarPartition};
use crate::error::ExprError;

use super::{Curvature, Expr, Node};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

fn tokenize(src: &str) -> Vec<(usize, Tok)> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            '(' => {
                out.push((i + 1, Tok::Open));
                chars.next();
            }
            ')' => {
                out.push((i + 1, Tok::Close));
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let start = i;
                let mut s = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c == '(' || c == ')' || c.is_whitespace() {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push((start + 1, Tok::Atom(s)));
            }
        }
    }
    out
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    partition: Option<&'a VarPartition>,
}

fn err(column: usize, message: impl Into<String>) -> ExprError {
    ExprError::Parse {
        column,
        message: message.into(),
    }
}

impl Parser<'_> {
    fn column(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let col = self.column();
        match self.toks.get(self.pos).cloned() {
            None => Err(err(col, "unexpected end of input")),
            Some((_, Tok::Close)) => Err(err(col, "unexpected `)`")),
            Some((_, Tok::Atom(a))) => {
                self.pos += 1;
                self.atom(&a, col)
            }
            Some((_, Tok::Open)) => {
                self.pos += 1;
                let op_col = self.column();
                let op = match self.toks.get(self.pos).cloned() {
                    Some((_, Tok::Atom(a))) => a,
                    _ => return Err(err(op_col, "expected an operator after `(`")),
                };
                self.pos += 1;
                let e = self.form(&op, op_col)?;
                match self.toks.get(self.pos) {
                    Some((_, Tok::Close)) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(err(self.column(), format!("expected `)` to close `{op}`"))),
                }
            }
        }
    }

    fn atom(&self, a: &str, col: usize) -> Result<Expr, ExprError> {
        if let Some(i) = self.variable(a, col)? {
            return Ok(Expr::var(i));
        }
        a.parse::<f64>()
            .map(Expr::constant)
            .map_err(|_| err(col, format!("unknown symbol `{a}`")))
    }

    fn variable(&self, a: &str, col: usize) -> Result<Option<usize>, ExprError> {
        let mut chars = a.chars();
        let head = match chars.next() {
            Some(c @ ('x' | 'y' | 'z' | 'v')) => c,
            _ => return Ok(None),
        };
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Ok(None);
        }
        let k: usize = digits
            .parse()
            .map_err(|_| err(col, format!("bad variable index in `{a}`")))?;
        if head == 'v' {
            return Ok(Some(k));
        }
        let p = self
            .partition
            .ok_or_else(|| err(col, format!("`{a}` needs a variable partition; use v<k>")))?;
        let (block, size) = match head {
            'x' => (Block::X, p.n),
            'y' => (Block::Y, p.m1),
            _ => (Block::Z, p.m2),
        };
        if k >= size {
            return Err(err(
                col,
                format!("`{a}` is outside its block of size {size}"),
            ));
        }
        Ok(Some(p.index(block, k)))
    }

    fn args(&mut self) -> Result<Vec<(usize, Expr)>, ExprError> {
        let mut out = Vec::new();
        while let Some((_, t)) = self.toks.get(self.pos) {
            if *t == Tok::Close {
                break;
            }
            let col = self.column();
            out.push((col, self.expr()?));
        }
        Ok(out)
    }

    fn number(arg: &(usize, Expr), what: &str) -> Result<f64, ExprError> {
        match arg.1.node() {
            Node::Const(c) if arg.1.curvature() == Curvature::Affine => Ok(*c),
            _ => Err(err(arg.0, format!("{what} must be a number"))),
        }
    }

    fn form(&mut self, op: &str, col: usize) -> Result<Expr, ExprError> {
        let args = self.args()?;
        let arity = |n: usize| -> Result<(), ExprError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(err(
                    col,
                    format!("`{op}` takes {n} argument(s), got {}", args.len()),
                ))
            }
        };
        let one = |args: &[(usize, Expr)]| args[0].1.clone();
        Ok(match op {
            "+" => Expr::sum(args.into_iter().map(|a| a.1).collect()),
            "neg" => {
                arity(1)?;
                one(&args).scale(-1.0)
            }
            "*" => {
                arity(2)?;
                let c = Self::number(&args[0], "the factor of `*`")?;
                args[1].1.clone().scale(c)
            }
            "-" => {
                arity(2)?;
                Expr::sum(vec![args[0].1.clone(), args[1].1.clone().scale(-1.0)])
            }
            "sq" => {
                arity(1)?;
                one(&args).square()
            }
            "powi" => {
                arity(2)?;
                let k = Self::number(&args[1], "the exponent of `powi`")?;
                if k < 0.0 || k.fract() != 0.0 || k > u32::MAX as f64 {
                    return Err(err(
                        args[1].0,
                        "`powi` needs a nonnegative integer exponent",
                    ));
                }
                one(&args).powi(k as u32)
            }
            "pow" => {
                arity(2)?;
                let p = Self::number(&args[1], "the exponent of `pow`")?;
                one(&args).powf(p)
            }
            "exp" => {
                arity(1)?;
                one(&args).exp()
            }
            "log" => {
                arity(1)?;
                one(&args).ln()
            }
            "sin" => {
                if args.len() == 1 {
                    one(&args).sin()
                } else {
                    arity(3)?;
                    let scale = Self::number(&args[1], "the scale of `sin`")?;
                    let shift = Self::number(&args[2], "the shift of `sin`")?;
                    one(&args).sin_affine(scale, shift)
                }
            }
            "cos" => {
                arity(1)?;
                one(&args).cos()
            }
            "max0" => {
                arity(1)?;
                one(&args).max_zero()
            }
            "abs" => {
                arity(1)?;
                one(&args).abs()
            }
            "aff" => {
                if args.len() % 2 == 0 {
                    return Err(err(
                        col,
                        "`aff` takes variable/coefficient pairs and an offset",
                    ));
                }
                let mut terms = Vec::new();
                for pair in args[..args.len() - 1].chunks(2) {
                    let idx = match pair[0].1.node() {
                        Node::Var(i) => *i,
                        _ => return Err(err(pair[0].0, "expected a variable in `aff`")),
                    };
                    terms.push((idx, Self::number(&pair[1], "an `aff` coefficient")?));
                }
                let offset = Self::number(&args[args.len() - 1], "the `aff` offset")?;
                Expr::affine(terms, offset)
            }
            tag if tag.starts_with('@') => {
                arity(1)?;
                let c = match tag {
                    "@convex" => Curvature::Convex,
                    "@concave" => Curvature::Concave,
                    "@affine" => Curvature::Affine,
                    "@unknown" => Curvature::Unknown,
                    _ => return Err(err(col, format!("unknown tag `{tag}`"))),
                };
                one(&args).with_curvature(c)
            }
            _ => return Err(err(col, format!("unknown operator `{op}`"))),
        })
    }
}

/// Parses the text form. Block-local names (`x0`, `y1`, `z0`) need `partition`.
pub fn parse_expr(src: &str, partition: Option<&VarPartition>) -> Result<Expr, ExprError> {
    let mut p = Parser {
        toks: tokenize(src),
        pos: 0,
        end: src.chars().count() + 1,
        partition,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(err(p.column(), "trailing input"));
    }
    Ok(e)
}

fn num(c: f64) -> String {
    format!("{c:?}")
}

/// Prints the text form; with a partition, variables get block-local names.
pub fn print_expr(e: &Expr, partition: Option<&VarPartition>) -> String {
    let mut s = String::new();
    write_expr(e, partition, &mut s);
    s
}

fn var_name(i: usize, partition: Option<&VarPartition>) -> String {
    match partition {
        Some(p) if i < p.total() => p.name(i),
        _ => format!("v{i}"),
    }
}

fn write_expr(e: &Expr, p: Option<&VarPartition>, s: &mut String) {
    let tagged = e.curvature() != e.natural_curvature();
    if tagged {
        s.push_str(&format!("(@{} ", e.curvature()));
    }
    let unary = |name: &str, a: &Expr, s: &mut String| {
        s.push('(');
        s.push_str(name);
        s.push(' ');
        write_expr(a, p, s);
        s.push(')');
    };
    match e.node() {
        Node::Const(c) => s.push_str(&num(*c)),
        Node::Var(i) => s.push_str(&var_name(*i, p)),
        Node::Affine { terms, offset } => {
            s.push_str("(aff");
            for (i, c) in terms {
                s.push(' ');
                s.push_str(&var_name(*i, p));
                s.push(' ');
                s.push_str(&num(*c));
            }
            s.push(' ');
            s.push_str(&num(*offset));
            s.push(')');
        }
        Node::Sum(items) => {
            s.push_str("(+");
            for a in items {
                s.push(' ');
                write_expr(a, p, s);
            }
            s.push(')');
        }
        Node::Scaled(c, a) => {
            s.push_str(&format!("(* {} ", num(*c)));
            write_expr(a, p, s);
            s.push(')');
        }
        Node::Square(a) => unary("sq", a, s),
        Node::Powi(a, k) => {
            s.push_str("(powi ");
            write_expr(a, p, s);
            s.push_str(&format!(" {k})"));
        }
        Node::Powf(a, q) => {
            s.push_str("(pow ");
            write_expr(a, p, s);
            s.push_str(&format!(" {})", num(*q)));
        }
        Node::Exp(a) => unary("exp", a, s),
        Node::Ln(a) => unary("log", a, s),
        Node::Sin { arg, scale, shift } => {
            s.push_str("(sin ");
            write_expr(arg, p, s);
            s.push_str(&format!(" {} {})", num(*scale), num(*shift)));
        }
        Node::MaxZero(a) => unary("max0", a, s),
        Node::Abs(a) => unary("abs", a, s),
    }
    if tagged {
        s.push(')');
    }
}

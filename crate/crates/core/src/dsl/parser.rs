use super::{BinOp, Expr, Func};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

/// Token with its 1-based character position.
type Spanned = (Tok, usize);

fn syntax(position: usize, expected: &[&str]) -> Error {
    Error::Syntax { position, expected: expected.iter().map(|s| s.to_string()).collect() }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| syntax(pos, &["number"]))?;
            out.push((Tok::Num(v), pos));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => return Err(syntax(pos, &["number", "symbol", "operator", "(", ")"])),
            };
            out.push((tok, pos));
            i += 1;
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

const OPERAND: &[&str] = &["number", "symbol", "(", "-"];

struct Parser<'a> {
    toks: Vec<Spanned>,
    at: usize,
    resolve: &'a dyn Fn(&str) -> Option<usize>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn binop(&self) -> Option<BinOp> {
        match self.peek() {
            Tok::Op('+') => Some(BinOp::Add),
            Tok::Op('-') => Some(BinOp::Sub),
            Tok::Op('*') => Some(BinOp::Mul),
            Tok::Op('/') => Some(BinOp::Div),
            _ => None,
        }
    }

    /// Precedence climbing over the binary levels 1 and 2.
    fn expr(&mut self, min: u8) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let p = op.precedence();
            if p < min {
                break;
            }
            self.bump();
            let rhs = self.expr(p + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let pos = self.pos();
        // right-associative, and the exponent may carry a sign
        let exponent = self.unary()?;
        match exponent.constant_value() {
            Some(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => Ok(Expr::Pow(Box::new(base), v as i32)),
            _ => Err(syntax(pos, &["integer exponent"])),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr(1)?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(Error::UnknownSymbol { name: name.clone(), position: pos })?;
                    self.bump();
                    let mut args = vec![self.expr(1)?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr(1)?);
                    }
                    self.expect_rparen()?;
                    if args.len() != 1 {
                        return Err(Error::Arity { function: name, got: args.len(), position: pos });
                    }
                    return Ok(Expr::Call(func, Box::new(args.pop().unwrap())));
                }
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                if Func::from_name(&name).is_some() {
                    return Err(syntax(self.pos(), &["("]));
                }
                match (self.resolve)(&name) {
                    Some(slot) => Ok(Expr::Var(slot, name)),
                    None => Err(Error::UnknownSymbol { name, position: pos }),
                }
            }
            _ => Err(syntax(pos, OPERAND)),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek() {
            Tok::RParen => {
                self.bump();
                Ok(())
            }
            _ => Err(syntax(self.pos(), &[")", "operator"])),
        }
    }
}

/// Parses with a custom symbol table mapping names to environment slots.
pub fn parse_with(text: &str, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<Expr> {
    let mut p = Parser { toks: lex(text)?, at: 0, resolve };
    let e = p.expr(1)?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.pos(), &["operator", "end of input"]));
    }
    Ok(e)
}

/// Parses a map component over the coordinates `x1..x{n_vars}`.
pub fn parse(text: &str, n_vars: usize) -> Result<Expr> {
    parse_with(text, &|name| {
        let i: usize = name.strip_prefix('x')?.parse().ok()?;
        (1..=n_vars).contains(&i).then(|| i - 1)
    })
}

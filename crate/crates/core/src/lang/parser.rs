//! Hand-written LL(1) parser for formulae and terms.
//!
//! Precedence, loosest first: `<->` (left), `->` (right), `|`, `&`, then the
//! prefix operators `!`, `K[i]`, `B[i]`, `CK[G]`, `CB[G]`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::{Comparison, Declarations, Formula, Group, LangError, Term};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Cmp(Option<Comparison>), // None is `<=`
    Bang,
    Amp,
    Pipe,
    Arrow,
    DoubleArrow,
    Eof,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(_) => "number".into(),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, LangError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, message: String| LangError::Syntax { pos, message };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let two = |s: &str| src[i..].starts_with(s);
        let tok = if two("<->") {
            i += 3;
            Tok::DoubleArrow
        } else if two("->") {
            i += 2;
            Tok::Arrow
        } else if two("<=") {
            i += 2;
            Tok::Cmp(None)
        } else if two(">=") {
            i += 2;
            Tok::Cmp(Some(Comparison::Ge))
        } else if two("!=") {
            i += 2;
            Tok::Cmp(Some(Comparison::Ne))
        } else if c.is_ascii_digit() || (c == b'-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let (num, len) = lex_number(&src[i..]).map_err(|m| err(start, m))?;
            i += len;
            Tok::Num(num)
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else {
            i += 1;
            match c {
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'[' => Tok::LBracket,
                b']' => Tok::RBracket,
                b'{' => Tok::LBrace,
                b'}' => Tok::RBrace,
                b',' => Tok::Comma,
                b'<' => Tok::Cmp(Some(Comparison::Lt)),
                b'>' => Tok::Cmp(Some(Comparison::Gt)),
                b'=' => Tok::Cmp(Some(Comparison::Eq)),
                b'!' => Tok::Bang,
                b'&' => Tok::Amp,
                b'|' => Tok::Pipe,
                _ => {
                    let ch = src[start..].chars().next().unwrap_or('?');
                    return Err(err(start, format!("unexpected character `{ch}`")));
                }
            }
        };
        out.push((start, tok));
    }
    out.push((src.len(), Tok::Eof));
    Ok(out)
}

/// `-?digits(.digits)?(/digits)?`, returning the value and bytes consumed.
fn lex_number(s: &str) -> Result<(BigRational, usize), String> {
    let b = s.as_bytes();
    let mut i = 0;
    let neg = b[0] == b'-';
    if neg {
        i += 1;
    }
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        &s[start..*i]
    };
    let int = digits(&mut i);
    let mut value = BigRational::from_integer(int.parse::<BigInt>().map_err(|e| e.to_string())?);
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac = digits(&mut i);
        if frac.is_empty() {
            return Err("expected digits after `.`".into());
        }
        let scale = BigInt::from(10).pow(frac.len() as u32);
        value += BigRational::new(frac.parse::<BigInt>().map_err(|e| e.to_string())?, scale);
    }
    if i < b.len() && b[i] == b'/' {
        i += 1;
        let den = digits(&mut i);
        if den.is_empty() {
            return Err("expected a denominator after `/`".into());
        }
        let den: BigInt = den.parse().map_err(|e: num_bigint::ParseBigIntError| e.to_string())?;
        if den.is_zero() {
            return Err("zero denominator".into());
        }
        value /= BigRational::from_integer(den);
    }
    if neg {
        value = -value;
    }
    Ok((value, i))
}

struct Parser<'d> {
    toks: Vec<(usize, Tok)>,
    cur: usize,
    decls: &'d Declarations,
}

impl<'d> Parser<'d> {
    fn new(src: &str, decls: &'d Declarations) -> Result<Self, LangError> {
        Ok(Parser {
            toks: lex(src)?,
            cur: 0,
            decls,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.cur].1
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.cur + 1).min(self.toks.len() - 1)].1
    }

    fn pos(&self) -> usize {
        self.toks[self.cur].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.cur].1.clone();
        if self.cur + 1 < self.toks.len() {
            self.cur += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, LangError> {
        Err(LangError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), LangError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn finish(&mut self) -> Result<(), LangError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.error(format!("unexpected {} after end of expression", describe(self.peek())))
        }
    }

    fn formula(&mut self) -> Result<Formula, LangError> {
        let mut lhs = self.implication()?;
        while *self.peek() == Tok::DoubleArrow {
            self.bump();
            let rhs = self.implication()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> Result<Formula, LangError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, LangError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, LangError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, LangError> {
        match (self.peek().clone(), self.peek2()) {
            (Tok::Bang, _) => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            (Tok::Ident(op), Tok::LBracket) if matches!(op.as_str(), "K" | "B" | "CK" | "CB") => {
                self.bump();
                self.bump();
                if op.len() == 1 {
                    let agent = self.agent()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    let body = self.unary()?;
                    Ok(if op == "K" {
                        Formula::knows(&agent, body)
                    } else {
                        Formula::believes(&agent, body)
                    })
                } else {
                    let group = self.group()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    let body = self.unary()?;
                    Ok(if op == "CK" {
                        Formula::common_knowledge(group, body)
                    } else {
                        Formula::common_belief(group, body)
                    })
                }
            }
            (Tok::LParen, _) => {
                self.bump();
                let inner = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => self.atom(),
        }
    }

    fn agent(&mut self) -> Result<String, LangError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Ident(name) => {
                if self.decls.agents.contains(&name) {
                    Ok(name)
                } else {
                    Err(LangError::UnknownAgent { pos, name })
                }
            }
            other => Err(LangError::Syntax {
                pos,
                message: format!("expected an agent, found {}", describe(&other)),
            }),
        }
    }

    fn group(&mut self) -> Result<Group, LangError> {
        let pos = self.pos();
        if *self.peek() == Tok::Ident("all".into()) {
            self.bump();
            return Group::new(self.decls.agents.iter().cloned()).ok_or(LangError::EmptyGroup { pos });
        }
        self.expect(Tok::LBrace, "`{` or `all`")?;
        let mut agents = Vec::new();
        if *self.peek() != Tok::RBrace {
            agents.push(self.agent()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                agents.push(self.agent()?);
            }
        }
        self.expect(Tok::RBrace, "`}`")?;
        Group::new(agents).ok_or(LangError::EmptyGroup { pos })
    }

    fn atom(&mut self) -> Result<Formula, LangError> {
        let lhs = self.term()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            other => return self.error(format!("expected a comparison, found {}", describe(other))),
        };
        self.bump();
        let rhs = self.term()?;
        Ok(match op {
            None => Formula::Leq(lhs, rhs),
            Some(c) => Formula::Compare(c, lhs, rhs),
        })
    }

    fn term(&mut self) -> Result<Term, LangError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(r) => Ok(Term::Const(r)),
            Tok::Ident(name) if name == "now" => Ok(Term::Now),
            Tok::Ident(name) => {
                let args = if *self.peek() == Tok::LParen {
                    self.bump();
                    let mut args = vec![self.term()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.term()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    args
                } else {
                    Vec::new()
                };
                let arity_error = |expected| LangError::Arity {
                    pos,
                    name: name.clone(),
                    expected,
                    got: args.len(),
                };
                if self.decls.processes.contains(&name) {
                    if args.len() != 1 {
                        return Err(arity_error(1));
                    }
                    let inner = args.into_iter().next().expect("one argument");
                    Ok(Term::Proc(name, Box::new(inner)))
                } else if let Some(f) = self.decls.functions.get(&name) {
                    if args.len() != f.arity() {
                        return Err(arity_error(f.arity()));
                    }
                    Ok(Term::Func(name, args))
                } else {
                    Err(LangError::UnknownIdentifier { pos, name })
                }
            }
            other => Err(LangError::Syntax {
                pos,
                message: format!("expected a term, found {}", describe(&other)),
            }),
        }
    }
}

/// Parses a formula and rewrites its abbreviations into core connectives.
pub fn parse_formula(src: &str, decls: &Declarations) -> Result<Formula, LangError> {
    Ok(parse_formula_sugared(src, decls)?.desugar())
}

/// Parses a formula, keeping abbreviations such as `>=`, `|` and `->`.
pub fn parse_formula_sugared(src: &str, decls: &Declarations) -> Result<Formula, LangError> {
    let mut p = Parser::new(src, decls)?;
    let f = p.formula()?;
    p.finish()?;
    Ok(f)
}

pub fn parse_term(src: &str, decls: &Declarations) -> Result<Term, LangError> {
    let mut p = Parser::new(src, decls)?;
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

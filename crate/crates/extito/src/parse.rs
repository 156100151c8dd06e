//! Text syntax for catalog functions, as used in config files.
//!
//! ```text
//! identity | x | tanh | square | x^2 | atan | sign
//! const(c) | abs(a) | negpart(a) | indicator(lo, hi)
//! scaled(k, f) | clamp(b, f)
//! ```
//! Planar functions: `product` (`xy`), `sum` (`x+y`), `const(c)`,
//! `separable(f, g)` and `additive(f, g)`.

use anyhow::{anyhow, bail, Result};
use extito_core::{Fn2, FnForm, FunctionDescriptor};

#[derive(Debug, Clone, PartialEq)]
enum Arg {
    Num(f64),
    Call(String, Vec<Arg>),
}

struct Parser<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.s[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.s[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn token(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.s[self.pos..];
        let end = rest
            .find(|c: char| c == '(' || c == ')' || c == ',' || c.is_whitespace())
            .unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn arg(&mut self) -> Result<Arg> {
        let tok = self.token();
        if tok.is_empty() {
            bail!("expected a number or a function at byte {}", self.pos);
        }
        if let Ok(v) = tok.parse::<f64>() {
            return Ok(Arg::Num(v));
        }
        let mut args = Vec::new();
        if self.eat('(')
            && !self.eat(')') {
                loop {
                    args.push(self.arg()?);
                    if self.eat(')') {
                        break;
                    }
                    if !self.eat(',') {
                        bail!("expected `,` or `)` at byte {}", self.pos);
                    }
                }
            }
        Ok(Arg::Call(tok.to_ascii_lowercase(), args))
    }
}

fn parse_arg(s: &str) -> Result<Arg> {
    let mut p = Parser { s, pos: 0 };
    let a = p.arg()?;
    p.skip_ws();
    if p.pos != s.len() {
        bail!("trailing input `{}`", &s[p.pos..]);
    }
    Ok(a)
}

fn num(a: &Arg) -> Result<f64> {
    match a {
        Arg::Num(v) => Ok(*v),
        other => Err(anyhow!("expected a number, got {other:?}")),
    }
}

fn arity(name: &str, args: &[Arg], n: usize) -> Result<()> {
    if args.len() != n {
        bail!("`{name}` takes {n} argument(s), got {}", args.len());
    }
    Ok(())
}

fn to_form(a: &Arg) -> Result<FnForm> {
    let Arg::Call(name, args) = a else {
        bail!("expected a function, got a number");
    };
    let name = name.as_str();
    Ok(match name {
        "identity" | "x" | "id" => {
            arity(name, args, 0)?;
            FnForm::Identity
        }
        "tanh" => {
            arity(name, args, 0)?;
            FnForm::Tanh
        }
        "square" | "x^2" => {
            arity(name, args, 0)?;
            FnForm::Square
        }
        "atan" => {
            arity(name, args, 0)?;
            FnForm::Atan
        }
        "sign" => {
            arity(name, args, 0)?;
            FnForm::Sign
        }
        "const" => {
            arity(name, args, 1)?;
            FnForm::Constant(num(&args[0])?)
        }
        "abs" => {
            arity(name, args, 1)?;
            FnForm::AbsShift(num(&args[0])?)
        }
        "negpart" => {
            arity(name, args, 1)?;
            FnForm::NegPart(num(&args[0])?)
        }
        "indicator" => {
            arity(name, args, 2)?;
            FnForm::Indicator { lo: num(&args[0])?, hi: num(&args[1])? }
        }
        "scaled" => {
            arity(name, args, 2)?;
            FnForm::Scaled { factor: num(&args[0])?, inner: Box::new(to_form(&args[1])?) }
        }
        "clamp" => {
            arity(name, args, 2)?;
            FnForm::Clamp { bound: num(&args[0])?, inner: Box::new(to_form(&args[1])?) }
        }
        other => bail!("unknown function `{other}`"),
    })
}

pub fn parse_function(s: &str) -> Result<FunctionDescriptor> {
    let arg = parse_arg(s).map_err(|e| anyhow!("function `{s}`: {e}"))?;
    Ok(to_form(&arg).map_err(|e| anyhow!("function `{s}`: {e}"))?.into())
}

pub fn parse_function2(s: &str) -> Result<Fn2> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    match compact.as_str() {
        "product" | "xy" | "x*y" => return Ok(Fn2::Product),
        "sum" | "x+y" => return Ok(Fn2::Sum),
        _ => {}
    }
    let arg = parse_arg(s).map_err(|e| anyhow!("function `{s}`: {e}"))?;
    let Arg::Call(name, args) = &arg else {
        bail!("function `{s}`: expected a planar function");
    };
    Ok(match name.as_str() {
        "product" => Fn2::Product,
        "sum" => Fn2::Sum,
        "const" => {
            arity(name, args, 1)?;
            Fn2::Constant(num(&args[0])?)
        }
        "separable" => {
            arity(name, args, 2)?;
            Fn2::Separable(to_form(&args[0])?.into(), to_form(&args[1])?.into())
        }
        "additive" => {
            arity(name, args, 2)?;
            Fn2::Additive(to_form(&args[0])?.into(), to_form(&args[1])?.into())
        }
        other => bail!("function `{s}`: unknown planar function `{other}`"),
    })
}

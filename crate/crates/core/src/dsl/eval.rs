use std::ops::{Add, Mul, Neg, Sub};

use super::{BinOp, Expr, Func};
use crate::error::{Error, Result};
use crate::scalar::Jet;

/// Evaluation arguments within this distance of the kink of `abs` are counted.
pub const KINK_TOLERANCE: f64 = 1e-9;

/// Number types the expression language evaluates over.
pub trait DslScalar: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn value(&self) -> f64;
    /// A constant shaped like `self`.
    fn constant(&self, c: f64) -> Self;
    /// `f(self)` given `f(v)` and `f'(v)` at the current value.
    fn apply(&self, f: f64, df: f64) -> Self;
    /// Whether the derivative of `sqrt` must exist at the current value.
    fn needs_derivative(&self) -> bool;
}

impl DslScalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn constant(&self, c: f64) -> Self {
        c
    }
    fn apply(&self, f: f64, _df: f64) -> Self {
        f
    }
    fn needs_derivative(&self) -> bool {
        false
    }
}

impl DslScalar for Jet {
    fn value(&self) -> f64 {
        self.value
    }
    fn constant(&self, c: f64) -> Self {
        Jet::constant(c, self.n_vars())
    }
    fn apply(&self, f: f64, df: f64) -> Self {
        self.chain(f, df)
    }
    fn needs_derivative(&self) -> bool {
        true
    }
}

fn domain(message: impl Into<String>) -> Error {
    Error::Domain { message: message.into(), point: Vec::new() }
}

fn powi<T: DslScalar>(x: T, n: i32) -> Result<T> {
    let v = x.value();
    if n < 0 && v == 0.0 {
        return Err(domain("negative power of zero"));
    }
    let f = v.powi(n);
    let df = if n == 0 { 0.0 } else { n as f64 * v.powi(n - 1) };
    Ok(x.apply(f, df))
}

impl Expr {
    /// Evaluates with symbol slot `i` bound to `vars[i]`. Arguments of `abs`
    /// within [`KINK_TOLERANCE`] of zero increment `kinks`.
    ///
    /// Domain errors carry an empty point; callers attach coordinates.
    pub fn eval<T: DslScalar>(&self, vars: &[T], kinks: &mut usize) -> Result<T> {
        let template = || vars.first().cloned();
        let konst = |c: f64| -> Result<T> {
            match template() {
                Some(t) => Ok(t.constant(c)),
                None => Err(domain("constant expression evaluated without an environment")),
            }
        };
        Ok(match self {
            Expr::Num(v) => konst(*v)?,
            Expr::Pi => konst(std::f64::consts::PI)?,
            Expr::Var(i, name) => {
                vars.get(*i).cloned().ok_or_else(|| domain(format!("symbol `{name}` is not bound")))?
            }
            Expr::Neg(a) => -a.eval(vars, kinks)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval(vars, kinks)?;
                let b = b.eval(vars, kinks)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        let d = b.value();
                        if d == 0.0 {
                            return Err(domain("division by zero"));
                        }
                        a * b.apply(1.0 / d, -1.0 / (d * d))
                    }
                }
            }
            Expr::Pow(a, n) => powi(a.eval(vars, kinks)?, *n)?,
            Expr::Call(func, a) => {
                let a = a.eval(vars, kinks)?;
                let v = a.value();
                match func {
                    Func::Sin => a.apply(v.sin(), v.cos()),
                    Func::Cos => a.apply(v.cos(), -v.sin()),
                    Func::Exp => a.apply(v.exp(), v.exp()),
                    Func::Tanh => {
                        let t = v.tanh();
                        a.apply(t, 1.0 - t * t)
                    }
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(domain(format!("log of nonpositive value {v}")));
                        }
                        a.apply(v.ln(), 1.0 / v)
                    }
                    Func::Sqrt => {
                        if v < 0.0 || (v == 0.0 && a.needs_derivative()) {
                            return Err(domain(format!("sqrt outside its smooth domain at {v}")));
                        }
                        let s = v.sqrt();
                        a.apply(s, if s > 0.0 { 0.5 / s } else { 0.0 })
                    }
                    Func::Abs => {
                        if v.abs() <= KINK_TOLERANCE {
                            *kinks += 1;
                        }
                        let sign = if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        a.apply(v.abs(), sign)
                    }
                }
            }
        })
    }
}

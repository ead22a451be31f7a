//! Polynomial expressions over `x1..xn` and the vector fields built from them.
//!
//! The text grammar is deliberately small: decimal literals, variables `x1..xn`,
//! infix `+ - *`, integer powers `^`, unary minus and parentheses. Precedence from
//! tightest to loosest is `^`, unary minus, `*`, then `+`/`-`; `^` associates to the
//! right. Division is not part of the language, so differentiation stays closed.
//!
//! Variables are zero-based in the Rust API (`Expr::Var(0)` is `x1` in text).

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ParseError, Result, VviError};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Sum(Box<Expr>, Box<Expr>),
    Product(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    // Smart constructors below apply only the trivial rewrites: zero/one
    // absorption and constant folding.

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            e => Expr::Neg(Box::new(e)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (Expr::Const(z), e) | (e, Expr::Const(z)) if z == 0.0 => e,
            (a, b) => Expr::Sum(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            (Expr::Const(z), _) | (_, Expr::Const(z)) if z == 0.0 => Expr::Const(0.0),
            (Expr::Const(o), e) | (e, Expr::Const(o)) if o == 1.0 => e,
            (a, b) => Expr::Product(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(e: Expr, k: u32) -> Expr {
        match (e, k) {
            (_, 0) => Expr::Const(1.0),
            (e, 1) => e,
            (Expr::Const(c), k) => Expr::Const(int_pow(c, k)),
            (e, k) => Expr::Pow(Box::new(e), k),
        }
    }

    /// Parses `text` as an expression over `x1..x{dim}`.
    pub fn parse(text: &str, dim: usize) -> std::result::Result<Expr, ParseError> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
            dim,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.syntax("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(e) => -e.eval(x),
            Expr::Sum(a, b) => a.eval(x) + b.eval(x),
            Expr::Product(a, b) => a.eval(x) * b.eval(x),
            Expr::Pow(e, k) => int_pow(e.eval(x), *k),
        }
    }

    /// Symbolic partial derivative with respect to the zero-based variable `var`.
    pub fn differentiate(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(e) => Expr::neg(e.differentiate(var)),
            Expr::Sum(a, b) => Expr::add(a.differentiate(var), b.differentiate(var)),
            Expr::Product(a, b) => Expr::add(
                Expr::mul(a.differentiate(var), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate(var)),
            ),
            Expr::Pow(e, k) => {
                let inner = e.differentiate(var);
                if inner == Expr::Const(0.0) {
                    return Expr::Const(0.0);
                }
                Expr::mul(
                    Expr::mul(Expr::Const(*k as f64), Expr::pow((**e).clone(), k - 1)),
                    inner,
                )
            }
        }
    }

    /// Largest zero-based variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) | Expr::Pow(e, _) => e.max_var(),
            Expr::Sum(a, b) | Expr::Product(a, b) => match (a.max_var(), b.max_var()) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
        }
    }
}

/// `base^k` by repeated squaring; deterministic on every platform.
fn int_pow(base: f64, mut k: u32) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while k > 0 {
        if k & 1 == 1 {
            acc *= b;
        }
        k >>= 1;
        if k > 0 {
            b *= b;
        }
    }
    acc
}

// Printing is fully parenthesized so that parsing the output rebuilds the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Sum(a, b) => write!(f, "({a} + {b})"),
            Expr::Product(a, b) => write!(f, "({a} * {b})"),
            Expr::Pow(e, k) => write!(f, "({e})^{k}"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sum(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    let rhs = match rhs {
                        Expr::Const(c) => Expr::Const(-c),
                        e => Expr::Neg(Box::new(e)),
                    };
                    lhs = Expr::Sum(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Product(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> std::result::Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let e = self.unary()?;
            return Ok(match e {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> std::result::Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let at = self.pos;
        // The exponent binds like a unary operand so `x1^-1` is reported as a
        // bad exponent rather than a syntax error.
        let exponent = self.unary()?;
        let k = match exponent {
            Expr::Const(c) if c >= 0.0 && c.fract() == 0.0 && c <= u32::MAX as f64 => c as u32,
            _ => return Err(ParseError::BadExponent { offset: at }),
        };
        Ok(match base {
            Expr::Const(c) => Expr::Const(int_pow(c, k)),
            base => Expr::Pow(Box::new(base), k),
        })
    }

    fn primary(&mut self) -> std::result::Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b'x') => {
                let start = self.pos;
                self.pos += 1;
                let digits_start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if digits_start == self.pos {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: "expected variable index after `x`".into(),
                    });
                }
                let text = std::str::from_utf8(&self.src[digits_start..self.pos]).unwrap();
                let index: usize = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: "variable index too large".into(),
                })?;
                if index == 0 || index > self.dim {
                    return Err(ParseError::VariableOutOfRange {
                        offset: start,
                        index,
                        dim: self.dim,
                    });
                }
                Ok(Expr::Var(index - 1))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.syntax("unexpected character")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> std::result::Result<Expr, ParseError> {
        let start = self.pos;
        let src = self.src;
        let digits = |p: &mut usize| {
            let s = *p;
            while *p < src.len() && src[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - s
        };
        let mut p = self.pos;
        let mut count = digits(&mut p);
        if p < src.len() && src[p] == b'.' {
            p += 1;
            count += digits(&mut p);
        }
        if count == 0 {
            return Err(self.syntax("malformed number"));
        }
        if p < src.len() && (src[p] == b'e' || src[p] == b'E') {
            let mut q = p + 1;
            if q < src.len() && (src[q] == b'+' || src[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) > 0 {
                p = q;
            }
        }
        let text = std::str::from_utf8(&src[start..p]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        self.pos = p;
        Ok(Expr::Const(value))
    }
}

/// A map `R^n -> R^n`, either given entrywise by polynomials or as `x ↦ Mx + q`.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    Polynomial { dim: usize, exprs: Vec<Expr> },
    Affine { matrix: DMatrix<f64>, offset: Vec<f64> },
}

impl VectorField {
    pub fn polynomial(dim: usize, exprs: Vec<Expr>) -> Result<VectorField> {
        if exprs.len() != dim {
            return Err(VviError::Dimension {
                expected: dim,
                got: exprs.len(),
            });
        }
        if let Some(i) = exprs.iter().filter_map(Expr::max_var).max() {
            if i >= dim {
                return Err(VviError::IndexOutOfRange { index: i + 1, dim });
            }
        }
        Ok(VectorField::Polynomial { dim, exprs })
    }

    /// Parses one expression string per component.
    pub fn parse<S: AsRef<str>>(dim: usize, texts: &[S]) -> Result<VectorField> {
        let exprs = texts
            .iter()
            .map(|t| Expr::parse(t.as_ref(), dim))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        VectorField::polynomial(dim, exprs)
    }

    pub fn affine(matrix: DMatrix<f64>, offset: Vec<f64>) -> Result<VectorField> {
        let n = offset.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(VviError::Dimension {
                expected: n,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(VectorField::Affine { matrix, offset })
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorField::Polynomial { dim, .. } => *dim,
            VectorField::Affine { offset, .. } => offset.len(),
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            VectorField::Polynomial { exprs, .. } => {
                for (o, e) in out.iter_mut().zip(exprs) {
                    *o = e.eval(x);
                }
            }
            VectorField::Affine { matrix, offset } => {
                let n = offset.len();
                for i in 0..n {
                    let mut acc = offset[i];
                    for j in 0..n {
                        acc += matrix[(i, j)] * x[j];
                    }
                    out[i] = acc;
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    /// Row `i` is the gradient of component `i`.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            VectorField::Polynomial { dim, exprs } => {
                DMatrix::from_fn(*dim, *dim, |i, j| exprs[i].differentiate(j).eval(x))
            }
            VectorField::Affine { matrix, .. } => matrix.clone(),
        }
    }

    /// Symbolic Jacobian entries, row-major; usable for repeated evaluation.
    pub fn symbolic_jacobian(&self) -> Vec<Vec<Expr>> {
        let expanded = self.to_polynomial();
        let VectorField::Polynomial { dim, exprs } = &expanded else {
            unreachable!()
        };
        exprs
            .iter()
            .map(|e| (0..*dim).map(|j| e.differentiate(j)).collect())
            .collect()
    }

    /// The polynomial form of this field. Affine rows expand to `q_i + Σ_j M_ij x_j`.
    pub fn to_polynomial(&self) -> VectorField {
        match self {
            VectorField::Polynomial { .. } => self.clone(),
            VectorField::Affine { matrix, offset } => {
                let n = offset.len();
                let exprs = (0..n)
                    .map(|i| {
                        let mut acc = Expr::Const(offset[i]);
                        for j in 0..n {
                            acc = Expr::add(acc, Expr::mul(Expr::Const(matrix[(i, j)]), Expr::Var(j)));
                        }
                        acc
                    })
                    .collect();
                VectorField::Polynomial { dim: n, exprs }
            }
        }
    }

    /// `Σ_l w_l F_l`. All-affine inputs combine matrices and offsets directly.
    pub fn weighted_sum(weights: &[f64], fields: &[VectorField]) -> Result<VectorField> {
        if weights.len() != fields.len() || fields.is_empty() {
            return Err(VviError::Dimension {
                expected: fields.len(),
                got: weights.len(),
            });
        }
        let n = fields[0].dim();
        if let Some(bad) = fields.iter().find(|f| f.dim() != n) {
            return Err(VviError::Dimension {
                expected: n,
                got: bad.dim(),
            });
        }
        if fields.iter().all(|f| matches!(f, VectorField::Affine { .. })) {
            let mut matrix = DMatrix::zeros(n, n);
            let mut offset = vec![0.0; n];
            for (w, f) in weights.iter().zip(fields) {
                if let VectorField::Affine { matrix: m, offset: q } = f {
                    matrix += m * *w;
                    for (o, qi) in offset.iter_mut().zip(q) {
                        *o += w * qi;
                    }
                }
            }
            return Ok(VectorField::Affine { matrix, offset });
        }
        let exprs = (0..n)
            .map(|i| {
                weights.iter().zip(fields).fold(Expr::Const(0.0), |acc, (w, f)| {
                    let VectorField::Polynomial { exprs, .. } = f.to_polynomial() else {
                        unreachable!()
                    };
                    Expr::add(acc, Expr::mul(Expr::Const(*w), exprs[i].clone()))
                })
            })
            .collect();
        Ok(VectorField::Polynomial { dim: n, exprs })
    }
}

/// Serialized field as it appears in problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FieldSpec {
    Poly {
        exprs: Vec<String>,
    },
    Affine {
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
        q: Vec<f64>,
    },
}

impl From<&VectorField> for FieldSpec {
    fn from(f: &VectorField) -> Self {
        match f {
            VectorField::Polynomial { exprs, .. } => FieldSpec::Poly {
                exprs: exprs.iter().map(|e| e.to_string()).collect(),
            },
            VectorField::Affine { matrix, offset } => FieldSpec::Affine {
                m: matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
                q: offset.clone(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s, 2).unwrap()
    }

    #[test]
    fn parses_cubic_entries() {
        assert_eq!(p("x1^3"), Expr::Pow(Box::new(Expr::Var(0)), 3));
        assert_eq!(
            p("x2^3 - 1"),
            Expr::Sum(
                Box::new(Expr::Pow(Box::new(Expr::Var(1)), 3)),
                Box::new(Expr::Const(-1.0))
            )
        );
    }

    #[test]
    fn rejects_out_of_range_variable() {
        assert!(matches!(
            Expr::parse("x3", 2),
            Err(ParseError::VariableOutOfRange {
                index: 3,
                offset: 0,
                ..
            })
        ));
        assert!(matches!(
            Expr::parse("x0", 2),
            Err(ParseError::VariableOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_bad_exponents_and_syntax() {
        assert!(matches!(
            Expr::parse("x1^-1", 2),
            Err(ParseError::BadExponent { offset: 3 })
        ));
        assert!(matches!(Expr::parse("x1^1.5", 2), Err(ParseError::BadExponent { .. })));
        assert!(matches!(Expr::parse("x1^x2", 2), Err(ParseError::BadExponent { .. })));
        assert!(matches!(
            Expr::parse("x1 +", 2),
            Err(ParseError::Syntax { offset: 4, .. })
        ));
        assert!(matches!(
            Expr::parse("x1 / 2", 2),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(Expr::parse("(x1", 2), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let x = [2.0, 3.0];
        assert_eq!(p("-x1^2").eval(&x), -4.0);
        assert_eq!(p("2^3^2").eval(&x), 512.0);
        assert_eq!(p("1 - 2 - 3").eval(&x), -4.0);
        assert_eq!(p("x1 * -x2").eval(&x), -6.0);
        assert_eq!(p("2 * x1 + x2 * x2").eval(&x), 13.0);
        assert_eq!(p("(x1 + x2)^2").eval(&x), 25.0);
        assert_eq!(p("1.5e1").eval(&x), 15.0);
    }

    #[test]
    fn evaluates_examples() {
        assert_eq!(p("x1^3").eval(&[2.0, 0.0]), 8.0);
        assert_eq!(p("x2^3 - 1").eval(&[0.0, 1.0]), 0.0);
        assert_eq!(p("-x2 - 1").eval(&[0.0, -1.0]), 0.0);
    }

    #[test]
    fn derivative_shapes() {
        assert_eq!(
            p("x1^3").differentiate(0),
            Expr::Product(
                Box::new(Expr::Const(3.0)),
                Box::new(Expr::Pow(Box::new(Expr::Var(0)), 2))
            )
        );
        assert_eq!(p("x1^3").differentiate(1), Expr::Const(0.0));
        assert_eq!(p("-x2 - 1").differentiate(0), Expr::Const(0.0));
        assert_eq!(p("-x2 - 1").differentiate(1), Expr::Const(-1.0));
    }

    #[test]
    fn jacobians_of_cubic_fields() {
        let q1 = VectorField::parse(2, &["x1^3", "x2^3 - 1"]).unwrap();
        assert_eq!(
            q1.jacobian(&[1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 3.0])
        );
        let p2 = VectorField::parse(2, &["x2 - 1", "-x1^3 - 1"]).unwrap();
        assert_eq!(
            p2.jacobian(&[1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -3.0, 0.0])
        );
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let a = VectorField::affine(m.clone(), vec![0.5, -1.0]).unwrap();
        assert_eq!(a.jacobian(&[7.0, -9.0]), m);
    }

    #[test]
    fn field_construction_checks_dimension() {
        assert!(VectorField::parse(2, &["x1"]).is_err());
        assert!(VectorField::affine(DMatrix::zeros(2, 3), vec![0.0, 0.0]).is_err());
        assert!(VectorField::polynomial(1, vec![Expr::Var(1)]).is_err());
    }

    #[test]
    fn weighted_sum_of_affine_stays_affine() {
        let a = VectorField::affine(DMatrix::identity(2, 2), vec![1.0, 0.0]).unwrap();
        let b = VectorField::affine(DMatrix::from_element(2, 2, 2.0), vec![0.0, 1.0]).unwrap();
        let s = VectorField::weighted_sum(&[0.25, 0.75], &[a, b]).unwrap();
        assert!(matches!(s, VectorField::Affine { .. }));
        assert_eq!(s.eval(&[1.0, 1.0]), vec![0.25 + 0.25 + 3.0, 0.25 + 3.0 + 0.75]);
    }

    fn arb_expr(dim: usize) -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-3.0f64..3.0).prop_map(|c| Expr::Const((c * 100.0).round() / 100.0)),
            (0..dim).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sum(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Product(Box::new(a), Box::new(b))),
                (inner, 0u32..4).prop_map(|(e, k)| Expr::Pow(Box::new(e), k)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr(3), pts in prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 100)) {
            let back = Expr::parse(&e.to_string(), 3).unwrap();
            for x in &pts {
                prop_assert_eq!(back.eval(x).to_bits(), e.eval(x).to_bits());
            }
        }

        #[test]
        fn affine_matches_expansion(entries in prop::collection::vec(-5.0f64..5.0, 12), pts in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 100)) {
            let m = DMatrix::from_row_slice(3, 3, &entries[..9]);
            let field = VectorField::affine(m, entries[9..].to_vec()).unwrap();
            let poly = field.to_polynomial();
            for x in &pts {
                for (a, b) in field.eval(x).iter().zip(poly.eval(x)) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
                }
            }
        }

        #[test]
        fn derivatives_match_central_differences(
            terms in prop::collection::vec((-1.0f64..1.0, prop::collection::vec(0usize..3, 0..=5)), 1..6),
            x in prop::array::uniform3(-2.0f64..2.0),
        ) {
            // sum of monomials c * x_{i1} * ... * x_{ik}, k <= 5
            let e = terms.iter().fold(Expr::Const(0.0), |acc, (c, vars)| {
                let mono = vars.iter().fold(Expr::Const(*c), |m, &v| Expr::Product(Box::new(m), Box::new(Expr::Var(v))));
                Expr::Sum(Box::new(acc), Box::new(mono))
            });
            let h = 1e-5;
            for i in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[i] += h;
                xm[i] -= h;
                let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * h);
                let sym = e.differentiate(i).eval(&x);
                prop_assert!((sym - fd).abs() <= 1e-4 * (1.0 + sym.abs()), "{} vs {}", sym, fd);
            }
        }
    }
}

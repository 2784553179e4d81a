//! Scale sequences `s_n` and their tails `R_n = sum_{i > n} s_i`, held in log space.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logspace::log_add_exp;
use crate::real::Real;

/// `s_n = c * lambda^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometric {
    c: Real,
    lambda: Real,
}

impl Geometric {
    pub fn new(c: Real, lambda: Real) -> Result<Self> {
        if !(c.value() > 0.0 && c.value().is_finite()) {
            return Err(Error::validation(format!(
                "geometric c must be positive, got {c}"
            )));
        }
        if !(lambda.value() > 0.0 && lambda.value() < 1.0) {
            return Err(Error::validation(format!(
                "geometric lambda must lie in (0, 1), got {lambda}"
            )));
        }
        Ok(Geometric { c, lambda })
    }

    pub fn c(&self) -> Real {
        self.c
    }

    pub fn lambda(&self) -> Real {
        self.lambda
    }

    /// `ln(c * lambda^k)` for any `k >= 0`.
    fn log_at(&self, k: f64) -> f64 {
        self.c.ln() + k * self.lambda.ln()
    }

    /// `ln(sum_{j > k} c * lambda^j) = ln(c lambda^{k+1} / (1 - lambda))`.
    fn log_tail_at(&self, k: f64) -> f64 {
        self.c.ln() + (k + 1.0) * self.lambda.ln() - self.lambda.ln_one_minus()
    }
}

/// Tabulated head `ln s_1 .. ln s_K` followed by `s_{K+j} = c * lambda^j`, `j >= 1`.
#[derive(Debug, Clone)]
pub struct Table {
    log_values: Vec<f64>,
    tail: Geometric,
    /// `ln R_n` for `n = 0..=K`.
    head_tails: Vec<f64>,
}

impl Table {
    pub fn new(log_values: Vec<f64>, tail: Geometric) -> Result<Self> {
        if let Some((i, v)) = log_values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::validation(format!(
                "table log value at index {} is not finite: {v}",
                i + 1
            )));
        }
        let k = log_values.len();
        let mut head_tails = vec![0.0; k + 1];
        head_tails[k] = tail.log_tail_at(0.0);
        for n in (0..k).rev() {
            head_tails[n] = log_add_exp(log_values[n], head_tails[n + 1]);
        }
        Ok(Table {
            log_values,
            tail,
            head_tails,
        })
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn tail(&self) -> &Geometric {
        &self.tail
    }
}

type IndexFn = dyn Fn(usize) -> f64 + Send + Sync;

/// Closed-form log rules `n -> ln s_n` and `n -> ln R_n` supplied by the caller.
#[derive(Clone)]
pub struct LogExpression {
    log_s: Arc<IndexFn>,
    log_tail: Arc<IndexFn>,
    label: String,
}

impl LogExpression {
    pub fn new<F, G>(label: impl Into<String>, log_s: F, log_tail: G) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
        G: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        LogExpression {
            log_s: Arc::new(log_s),
            log_tail: Arc::new(log_tail),
            label: label.into(),
        }
    }

    /// Compiles the two rules from expression strings in the variable `n`.
    pub fn parse(log_s: &str, log_tail: &str) -> Result<Self> {
        let s_tree = compile_expression(log_s)?;
        let r_tree = compile_expression(log_tail)?;
        Ok(LogExpression::new(
            format!("ln s_n = {log_s}; ln R_n = {log_tail}"),
            move |n| eval_expression(&s_tree, n),
            move |n| eval_expression(&r_tree, n),
        ))
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for LogExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogExpression")
            .field("label", &self.label)
            .finish()
    }
}

fn compile_expression(src: &str) -> Result<evalexpr::Node> {
    let tree = evalexpr::build_operator_tree(src)
        .map_err(|e| Error::Parse(format!("expression {src:?}: {e}")))?;
    // Probe once so obviously broken expressions fail at load time.
    let mut ctx = evalexpr::HashMapContext::new();
    evalexpr::ContextWithMutableVariables::set_value(&mut ctx, "n".into(), 1.0.into())
        .map_err(|e| Error::Parse(e.to_string()))?;
    tree.eval_number_with_context(&ctx)
        .map_err(|e| Error::Parse(format!("expression {src:?}: {e}")))?;
    Ok(tree)
}

fn eval_expression(tree: &evalexpr::Node, n: usize) -> f64 {
    let mut ctx = evalexpr::HashMapContext::new();
    if evalexpr::ContextWithMutableVariables::set_value(&mut ctx, "n".into(), (n as f64).into())
        .is_err()
    {
        return f64::NAN;
    }
    tree.eval_number_with_context(&ctx).unwrap_or(f64::NAN)
}

/// `t_i = s_{pi(i)}` for `i <= horizon`, continuing as `s_{max pi + k}` beyond.
#[derive(Debug, Clone)]
pub struct Subsequence {
    base: Arc<SequenceSpec>,
    index_map: Arc<[usize]>,
    log_terms: Vec<f64>,
    /// `ln R^t_n` for `n = 0..=horizon`.
    log_tails: Vec<f64>,
    max_index: usize,
}

impl Subsequence {
    /// `index_map[i - 1] = pi(i)`; must be injective with all values `>= 1`.
    pub fn new(base: Arc<SequenceSpec>, index_map: Arc<[usize]>) -> Result<Self> {
        let max_index = index_map.iter().copied().max().unwrap_or(0);
        if index_map.contains(&0) {
            return Err(Error::validation("subsequence index map contains 0"));
        }
        let log_terms: Vec<f64> = index_map
            .iter()
            .map(|&j| base.log_term(j))
            .collect::<Result<_>>()?;
        let h = index_map.len();
        let mut log_tails = vec![0.0; h + 1];
        log_tails[h] = base.log_tail(max_index);
        for n in (0..h).rev() {
            log_tails[n] = log_add_exp(log_terms[n], log_tails[n + 1]);
        }
        Ok(Subsequence {
            base,
            index_map,
            log_terms,
            log_tails,
            max_index,
        })
    }

    pub fn base(&self) -> &SequenceSpec {
        &self.base
    }

    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    pub fn horizon(&self) -> usize {
        self.index_map.len()
    }

    /// Original index of term `i` (1-based), including the continuation.
    pub fn original_index(&self, i: usize) -> usize {
        let h = self.index_map.len();
        if i <= h {
            self.index_map[i - 1]
        } else {
            self.max_index + (i - h)
        }
    }
}

/// A summable positive sequence `(s_n)_{n >= 1}`.
#[derive(Debug, Clone)]
pub enum SequenceSpec {
    Geometric(Geometric),
    Table(Table),
    LogExpression(LogExpression),
    Subsequence(Subsequence),
}

impl SequenceSpec {
    pub fn geometric(c: impl Into<Real>, lambda: impl Into<Real>) -> Result<Self> {
        Ok(SequenceSpec::Geometric(Geometric::new(
            c.into(),
            lambda.into(),
        )?))
    }

    /// `s_n = 2 * 3^-n`.
    pub fn cantor() -> Self {
        SequenceSpec::Geometric(Geometric::new(Real::ratio(2, 1), Real::ratio(1, 3)).unwrap())
    }

    /// `ln s_n` for `n >= 1`.
    pub fn log_term(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::domain("sequence index must be at least 1"));
        }
        Ok(match self {
            SequenceSpec::Geometric(g) => g.log_at(n as f64),
            SequenceSpec::Table(t) => {
                let k = t.log_values.len();
                if n <= k {
                    t.log_values[n - 1]
                } else {
                    t.tail.log_at((n - k) as f64)
                }
            }
            SequenceSpec::LogExpression(e) => (e.log_s)(n),
            SequenceSpec::Subsequence(s) => {
                let h = s.index_map.len();
                if n <= h {
                    s.log_terms[n - 1]
                } else {
                    s.base.log_term(s.max_index + (n - h))?
                }
            }
        })
    }

    /// `ln R_n` for `n >= 0`.
    pub fn log_tail(&self, n: usize) -> f64 {
        match self {
            SequenceSpec::Geometric(g) => g.log_tail_at(n as f64),
            SequenceSpec::Table(t) => {
                let k = t.log_values.len();
                if n <= k {
                    t.head_tails[n]
                } else {
                    t.tail.log_tail_at((n - k) as f64)
                }
            }
            SequenceSpec::LogExpression(e) => (e.log_tail)(n),
            SequenceSpec::Subsequence(s) => {
                let h = s.index_map.len();
                if n <= h {
                    s.log_tails[n]
                } else {
                    s.base.log_tail(s.max_index + (n - h))
                }
            }
        }
    }

    /// `s_n` in linear space; underflows to 0 for deep levels.
    pub fn term(&self, n: usize) -> Result<f64> {
        Ok(self.log_term(n)?.exp())
    }

    /// Checks positivity, finiteness and strict tail decrease on `1..=horizon`.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        let mut prev = self.log_tail(0);
        if !prev.is_finite() {
            return Err(Error::validation(format!("ln R_0 is not finite: {prev}")));
        }
        for n in 1..=horizon {
            let s = self.log_term(n)?;
            if !s.is_finite() {
                return Err(Error::validation(format!("ln s_{n} is not finite: {s}")));
            }
            let r = self.log_tail(n);
            if r.is_nan() || r >= prev {
                return Err(Error::validation(format!(
                    "tail sums must strictly decrease: ln R_{n} = {r}, ln R_{} = {prev}",
                    n - 1
                )));
            }
            prev = r;
        }
        Ok(())
    }

    /// Closed forms collapse every sup/limit over `n` to finitely many indices.
    pub fn is_closed_form(&self) -> bool {
        match self {
            SequenceSpec::Geometric(_) | SequenceSpec::Table(_) => true,
            SequenceSpec::LogExpression(_) => false,
            SequenceSpec::Subsequence(s) => s.base.is_closed_form(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SequenceSpec::Geometric(_) => "geometric",
            SequenceSpec::Table(_) => "table",
            SequenceSpec::LogExpression(_) => "log-expression",
            SequenceSpec::Subsequence(_) => "subsequence",
        }
    }

    /// The geometric rule governing every index past the tabulated head, if any.
    pub fn geometric_tail(&self) -> Option<&Geometric> {
        match self {
            SequenceSpec::Geometric(g) => Some(g),
            SequenceSpec::Table(t) => Some(&t.tail),
            _ => None,
        }
    }
}

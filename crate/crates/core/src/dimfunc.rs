//! Dimension functions: power laws and the doubling gauge `h` built from a spec
//! so that `N^j h(kappa R_j) = 1` at every breakpoint.
//!
//! The constructed `h` is `1 / f^{-1}`, where `f` is the decreasing
//! piecewise-linear interpolant through `(N^j, kappa R_j)`. Everything is
//! evaluated from log inputs because `kappa R_j` underflows long before the
//! breakpoints run out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqcore::SumSetSpec;

/// Which part of the domain an evaluation fell in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// `x = 0`.
    Origin,
    /// Between stored breakpoints (or any `x > 0` for a power law).
    Exact,
    /// Below the last stored breakpoint; segments continue at the last tail ratio.
    Extrapolated,
    /// Above `kappa R_0`, where `h` is held at 1.
    AboveDomain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HValue {
    pub ln_value: f64,
    pub region: Region,
}

impl HValue {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

/// The constructed doubling gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedH {
    n_digits: usize,
    ln_n: f64,
    /// `ln(kappa R_j)` for `j = 0..=J`, strictly decreasing.
    log_breaks: Vec<f64>,
    /// `ln(R_J / R_{J-1})`, used past the last breakpoint.
    log_tail_ratio: f64,
    /// `tau M / kappa` of the source spec.
    theta: f64,
}

impl ConstructedH {
    pub fn n_digits(&self) -> usize {
        self.n_digits
    }

    /// Number of stored segments `J`.
    pub fn breakpoint_count(&self) -> usize {
        self.log_breaks.len() - 1
    }

    pub fn log_breakpoints(&self) -> &[f64] {
        &self.log_breaks
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `ln(kappa R_j)` for any `j`, continuing geometrically past `J`.
    fn log_break(&self, j: usize) -> f64 {
        let last = self.breakpoint_count();
        if j <= last {
            self.log_breaks[j]
        } else {
            self.log_breaks[last] + (j - last) as f64 * self.log_tail_ratio
        }
    }

    /// Segment `j` with `kappa R_{j+1} < y <= kappa R_j`, for `ln y <= ln(kappa R_0)`.
    fn segment(&self, ln_y: f64) -> (usize, Region) {
        let last = self.breakpoint_count();
        if ln_y > self.log_breaks[last] {
            // Largest j with log_breaks[j] >= ln_y.
            let j = self.log_breaks.partition_point(|&b| b >= ln_y) - 1;
            (j, Region::Exact)
        } else if ln_y == self.log_breaks[last] {
            (last, Region::Exact)
        } else {
            let steps = ((ln_y - self.log_breaks[last]) / self.log_tail_ratio).floor() as usize;
            let mut j = last + steps;
            // Guard the floor against rounding at segment ends.
            while self.log_break(j + 1) >= ln_y {
                j += 1;
            }
            while j > last && self.log_break(j) < ln_y {
                j -= 1;
            }
            (j, Region::Extrapolated)
        }
    }

    /// `ln f^{-1}(y)` from `ln y`.
    fn log_inverse(&self, ln_y: f64) -> (f64, Region) {
        let (j, region) = self.segment(ln_y);
        let hi = self.log_break(j);
        let lo = self.log_break(j + 1);
        // t = (kappa R_j - y) / (kappa R_j - kappa R_{j+1}) in [0, 1)
        let t = (-(ln_y - hi).exp_m1()) / (-(lo - hi).exp_m1());
        let ln_x = j as f64 * self.ln_n + ((self.n_digits - 1) as f64 * t).ln_1p();
        (ln_x, region)
    }

    /// `ln f(x)` from `ln x` for `x >= 1`.
    pub fn log_f(&self, ln_x: f64) -> f64 {
        let j = (ln_x / self.ln_n).floor().max(0.0) as usize;
        let j = if ((j + 1) as f64) * self.ln_n <= ln_x {
            j + 1
        } else {
            j
        };
        let hi = self.log_break(j);
        let lo = self.log_break(j + 1);
        // u = (x - N^j) / (N^{j+1} - N^j)
        let u = (ln_x - j as f64 * self.ln_n).exp_m1() / (self.n_digits - 1) as f64;
        // f = kappa R_j - u (kappa R_j - kappa R_{j+1})
        hi + (-u * (-(lo - hi).exp_m1())).ln_1p()
    }
}

/// A dimension function usable from log-space inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum DimensionFunction {
    /// `h(x) = x^s`, doubling with constant `2^s`.
    PowerLaw(f64),
    Constructed(ConstructedH),
}

impl DimensionFunction {
    /// `x^s`; rejects `s <= 0` since `x^0` has `h(0) != 0`.
    pub fn power_law(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!(
                "power-law exponent must be positive and finite, got {s}"
            )));
        }
        Ok(DimensionFunction::PowerLaw(s))
    }

    /// `ln h(x)` given `ln x` (`-inf` for `x = 0`).
    pub fn log_eval(&self, ln_x: f64) -> HValue {
        if ln_x == f64::NEG_INFINITY {
            return HValue {
                ln_value: f64::NEG_INFINITY,
                region: Region::Origin,
            };
        }
        match self {
            DimensionFunction::PowerLaw(s) => HValue {
                ln_value: s * ln_x,
                region: Region::Exact,
            },
            DimensionFunction::Constructed(c) => {
                if ln_x > c.log_breaks[0] {
                    return HValue {
                        ln_value: 0.0,
                        region: Region::AboveDomain,
                    };
                }
                let (ln_inv, region) = c.log_inverse(ln_x);
                HValue {
                    ln_value: -ln_inv,
                    region,
                }
            }
        }
    }

    pub fn eval_detailed(&self, x: f64) -> Result<HValue> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("h is defined on [0, inf), got {x}")));
        }
        Ok(self.log_eval(x.ln()))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.eval_detailed(x)?.value())
    }

    pub fn describe(&self) -> String {
        match self {
            DimensionFunction::PowerLaw(s) => format!("x^{s}"),
            DimensionFunction::Constructed(c) => format!(
                "constructed doubling gauge (N = {}, J = {})",
                c.n_digits,
                c.breakpoint_count()
            ),
        }
    }
}

/// Builds `h` with `h(kappa R_j) = N^-j` for `j = 0..=breakpoints`.
pub fn build_h(spec: &SumSetSpec, breakpoints: usize) -> Result<DimensionFunction> {
    if breakpoints < 1 {
        return Err(Error::domain(
            "the constructed gauge needs at least one segment",
        ));
    }
    spec.require_strict()?;
    let log_breaks: Vec<f64> = (0..=breakpoints).map(|j| spec.log_kappa_tail(j)).collect();
    if log_breaks.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::validation("kappa R_j must strictly decrease"));
    }
    let log_tail_ratio = log_breaks[breakpoints] - log_breaks[breakpoints - 1];
    let n = spec.n_digits();
    Ok(DimensionFunction::Constructed(ConstructedH {
        n_digits: n,
        ln_n: (n as f64).ln(),
        log_breaks,
        log_tail_ratio,
        theta: spec.tau() * spec.m() / spec.kappa(),
    }))
}

/// Result of sampling `h(2x) / h(x)`.
#[derive(Debug, Clone, Serialize)]
pub struct DoublingAudit {
    pub empirical_sup: f64,
    pub argsup: f64,
    /// `N^{2 - ln 2 / ln theta}` for constructed gauges.
    pub theoretical_bound: Option<f64>,
    /// `2^s` for power laws.
    pub exact_constant: Option<f64>,
    pub theta: Option<f64>,
    pub samples: usize,
    pub x_range: (f64, f64),
    pub passed: bool,
}

/// Samples `h(2x)/h(x)` on a log-uniform grid in `[x_lo, kappa R_0 / 2]` plus the breakpoints.
pub fn doubling_audit(
    h: &DimensionFunction,
    spec: &SumSetSpec,
    sample_count: usize,
) -> Result<DoublingAudit> {
    if sample_count < 2 {
        return Err(Error::domain("doubling audit needs at least two samples"));
    }
    let ln_hi = spec.log_kappa_tail(0) - std::f64::consts::LN_2;
    let (ln_lo, extra): (f64, Vec<f64>) = match h {
        DimensionFunction::PowerLaw(_) => (ln_hi - 12.0 * std::f64::consts::LN_10, Vec::new()),
        DimensionFunction::Constructed(c) => (
            c.log_breaks[c.breakpoint_count()],
            c.log_breaks[1..]
                .iter()
                .copied()
                .filter(|&b| b <= ln_hi)
                .collect(),
        ),
    };
    let grid = (0..sample_count)
        .map(|k| ln_lo + (ln_hi - ln_lo) * k as f64 / (sample_count - 1) as f64)
        .chain(extra);
    let mut sup = f64::NEG_INFINITY;
    let mut arg = f64::NAN;
    let mut count = 0;
    for ln_x in grid {
        let num = h.log_eval(ln_x + std::f64::consts::LN_2).ln_value;
        let den = h.log_eval(ln_x).ln_value;
        let ratio = (num - den).exp();
        count += 1;
        if ratio > sup {
            sup = ratio;
            arg = ln_x.exp();
        }
    }
    Ok(match h {
        DimensionFunction::PowerLaw(s) => {
            let exact = 2f64.powf(*s);
            DoublingAudit {
                empirical_sup: sup,
                argsup: arg,
                theoretical_bound: None,
                exact_constant: Some(exact),
                theta: None,
                samples: count,
                x_range: (ln_lo.exp(), ln_hi.exp()),
                passed: (sup - exact).abs() <= 1e-12 * exact,
            }
        }
        DimensionFunction::Constructed(c) => {
            let n = c.n_digits as f64;
            let bound = n.powf(2.0 - std::f64::consts::LN_2 / c.theta.ln());
            DoublingAudit {
                empirical_sup: sup,
                argsup: arg,
                theoretical_bound: Some(bound),
                exact_constant: None,
                theta: Some(c.theta),
                samples: count,
                x_range: (ln_lo.exp(), ln_hi.exp()),
                passed: sup <= bound,
            }
        }
    })
}

/// Grid of `t` values, log-uniform from `t_hi` down to `t_lo`.
#[derive(Debug, Clone, Copy)]
pub struct Window {
    pub ln_t_hi: f64,
    pub ln_t_lo: f64,
    pub points: usize,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            ln_t_hi: (0.1f64).ln(),
            ln_t_lo: -1000.0,
            points: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecedesVerdict {
    Precedes,
    NotPrecedes,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecedesReport {
    pub verdict: PrecedesVerdict,
    /// `(ln t, ln(g(t)/f(t)))` as `t` decreases.
    pub trajectory: Vec<(f64, f64)>,
    pub monotone_decreasing: bool,
}

/// Log-ratio below which `g/f` is taken to have reached zero.
const PRECEDES_LOG_FLOOR: f64 = -13.815510557964274; // ln 1e-6

/// Decides `f < g`, i.e. `g(t)/f(t) -> 0` as `t -> 0+`, from a window of samples.
pub fn precedes(f: &DimensionFunction, g: &DimensionFunction, window: Window) -> PrecedesReport {
    let points = window.points.max(2);
    let trajectory: Vec<(f64, f64)> = (0..points)
        .map(|k| {
            let ln_t =
                window.ln_t_hi + (window.ln_t_lo - window.ln_t_hi) * k as f64 / (points - 1) as f64;
            (ln_t, g.log_eval(ln_t).ln_value - f.log_eval(ln_t).ln_value)
        })
        .collect();
    let first = trajectory[0].1;
    let last = trajectory[points - 1].1;
    let scale = first.abs().max(last.abs()).max(1.0);
    let tol = 1e-12 * scale;
    let monotone_decreasing = trajectory.windows(2).all(|w| w[1].1 <= w[0].1 + tol);
    let non_decreasing = trajectory.windows(2).all(|w| w[1].1 >= w[0].1 - tol);
    let verdict = if monotone_decreasing && last < first - tol && last < PRECEDES_LOG_FLOOR {
        PrecedesVerdict::Precedes
    } else if non_decreasing {
        PrecedesVerdict::NotPrecedes
    } else {
        PrecedesVerdict::Inconclusive
    };
    PrecedesReport {
        verdict,
        trajectory,
        monotone_decreasing,
    }
}

/// Breakpoint table for reuse across runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeTable {
    pub kind: String,
    pub n_digits: usize,
    pub theta: f64,
    /// `[j, ln(N^j), ln(kappa R_j)]`.
    pub breakpoints: Vec<(usize, f64, f64)>,
}

impl ConstructedH {
    pub fn to_table(&self) -> GaugeTable {
        GaugeTable {
            kind: "constructed".into(),
            n_digits: self.n_digits,
            theta: self.theta,
            breakpoints: self
                .log_breaks
                .iter()
                .enumerate()
                .map(|(j, &b)| (j, j as f64 * self.ln_n, b))
                .collect(),
        }
    }

    pub fn from_table(table: &GaugeTable) -> Result<ConstructedH> {
        if table.kind != "constructed" {
            return Err(Error::validation(format!(
                "unknown gauge kind {:?}",
                table.kind
            )));
        }
        if table.n_digits < 2 || table.breakpoints.len() < 2 {
            return Err(Error::validation(
                "gauge table needs N >= 2 and at least two breakpoints",
            ));
        }
        let log_breaks: Vec<f64> = table.breakpoints.iter().map(|b| b.2).collect();
        if table.breakpoints.iter().enumerate().any(|(j, b)| b.0 != j)
            || log_breaks.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(Error::validation(
                "gauge breakpoints must be indexed 0..=J with strictly decreasing ln(kappa R_j)",
            ));
        }
        let last = log_breaks.len() - 1;
        Ok(ConstructedH {
            n_digits: table.n_digits,
            ln_n: (table.n_digits as f64).ln(),
            log_tail_ratio: log_breaks[last] - log_breaks[last - 1],
            log_breaks,
            theta: table.theta,
        })
    }
}

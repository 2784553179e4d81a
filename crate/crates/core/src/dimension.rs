//! Dimension formulas and the measure-sequence classifier.
//!
//! `dim_H` and `dim_P` are the liminf and limsup of `-n ln N / ln s_n`. The
//! classifier looks at `N^n h(kappa R_n)` (or `N^n h(s_n)`) in log space and
//! only emits the bounds whose hypotheses its window estimates witness.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::dimfunc::{DimensionFunction, Region};
use crate::error::{Error, Result};
use crate::export::ExtReal;
use crate::seqcore::{SequenceSpec, SumSetSpec};

pub use crate::dimfunc::{precedes, PrecedesReport, PrecedesVerdict, Window};

/// Points of the ratio trajectory kept in a report.
const EVIDENCE_POINTS: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct DimensionReport {
    #[serde(rename = "dim_H")]
    pub dim_h: f64,
    #[serde(rename = "dim_P")]
    pub dim_p: f64,
    pub certified: bool,
    /// Closed form when one applies, e.g. `-ln N / ln lambda`.
    pub formula: Option<String>,
    /// Range of `n` over which liminf/limsup were estimated.
    pub window: (usize, usize),
    /// Least-squares slope of the ratio over the window.
    pub drift: f64,
    /// `[n, -n ln N / ln s_n]`, subsampled.
    pub trajectory: Vec<(usize, f64)>,
    pub notes: Vec<String>,
}

fn ratio_at(seq: &SequenceSpec, ln_n: f64, n: usize) -> Result<Option<f64>> {
    let ls = seq.log_term(n)?;
    // The ratio is only meaningful once s_n < 1.
    Ok((ls < 0.0).then(|| -(n as f64) * ln_n / ls))
}

fn evidence_indices(horizon: usize) -> Vec<usize> {
    if horizon <= EVIDENCE_POINTS {
        return (1..=horizon).collect();
    }
    let mut out: Vec<usize> = (0..EVIDENCE_POINTS)
        .map(|k| {
            let t = k as f64 / (EVIDENCE_POINTS - 1) as f64;
            (horizon as f64).powf(t).round() as usize
        })
        .collect();
    out.dedup();
    out
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Dimensions from the closed form when one exists, else window estimates over `1..=horizon`.
pub fn dims_exact(spec: &SumSetSpec, horizon: usize) -> Result<DimensionReport> {
    spec.require_separation()?;
    if horizon < 2 {
        return Err(Error::domain("dimension horizon must be at least 2"));
    }
    let seq = spec.sequence();
    let ln_n = (spec.n_digits() as f64).ln();
    let mut notes = Vec::new();

    let mut trajectory = Vec::new();
    for n in evidence_indices(horizon) {
        if let Some(r) = ratio_at(seq, ln_n, n)? {
            trajectory.push((n, r));
        }
    }

    let closed = match seq {
        SequenceSpec::Geometric(g) => Some((g.lambda().ln(), "-ln N / ln lambda")),
        SequenceSpec::Table(t) => Some((t.tail().lambda().ln(), "-ln N / ln lambda_tail")),
        _ => None,
    };
    if let Some((ln_lambda, formula)) = closed {
        let d = -ln_n / ln_lambda;
        if matches!(seq, SequenceSpec::Table(_)) {
            notes.push("limit fixed by the geometric tail of the table".into());
        }
        return Ok(DimensionReport {
            dim_h: d,
            dim_p: d,
            certified: true,
            formula: Some(formula.into()),
            window: (1, horizon),
            drift: 0.0,
            trajectory,
            notes,
        });
    }

    let lo = (horizon / 2).max(1);
    let mut xs = Vec::with_capacity(horizon - lo + 1);
    let mut ys = Vec::with_capacity(horizon - lo + 1);
    for n in lo..=horizon {
        if let Some(r) = ratio_at(seq, ln_n, n)? {
            xs.push(n as f64);
            ys.push(r);
        }
    }
    if ys.is_empty() {
        return Err(Error::validation(format!(
            "s_n >= 1 throughout n in {lo}..={horizon}; no ratio to estimate"
        )));
    }
    let dim_h = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let dim_p = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let drift = ls_slope(&xs, &ys);
    notes.push(format!(
        "liminf/limsup estimated as min/max over n in {lo}..={horizon}; not certified"
    ));
    if dim_p > spec.dim() as f64 {
        notes.push(format!(
            "window estimate {dim_p} exceeds the ambient dimension {}",
            spec.dim()
        ));
    }
    Ok(DimensionReport {
        dim_h,
        dim_p,
        certified: false,
        formula: None,
        window: (lo, horizon),
        drift,
        trajectory,
        notes,
    })
}

/// `-(b - a) ln N / (ln x_b - ln x_a)`: the ratio limit with the constant offset cancelled.
///
/// `log_x` is any of `ln s_n`, `ln R_n`, `ln(kappa R_n)`.
pub fn secant_estimate<F: Fn(usize) -> f64>(n_digits: usize, log_x: F, a: usize, b: usize) -> f64 {
    -((b - a) as f64) * (n_digits as f64).ln() / (log_x(b) - log_x(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// `N^n h(kappa R_n)`.
    KappaTail,
    /// `N^n h(s_n)`.
    Term,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Flat,
    Increasing,
    Decreasing,
}

/// A bound licensed by one item of the measure classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum MeasureVerdict {
    /// `H^h = 0` (item 1 with liminf 0).
    HausdorffZero { item: u8 },
    /// `H^h <= bound` (item 1).
    HausdorffFinite { item: u8, bound: f64 },
    /// `H^h > 0` (item 2).
    HausdorffPositive { item: u8 },
    /// `P^h <= N * alpha` (item 3).
    PackingFiniteBound { item: u8, alpha: f64, bound: f64 },
    /// `P^h > 0` (item 4).
    PackingPositive { item: u8 },
}

impl MeasureVerdict {
    pub fn item(&self) -> u8 {
        match *self {
            MeasureVerdict::HausdorffZero { item }
            | MeasureVerdict::HausdorffFinite { item, .. }
            | MeasureVerdict::HausdorffPositive { item }
            | MeasureVerdict::PackingFiniteBound { item, .. }
            | MeasureVerdict::PackingPositive { item } => item,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifierConfig {
    /// Log-values above this make the limsup `+inf`.
    pub overflow_log: f64,
    /// Log-values below this make the liminf 0.
    pub zero_log: f64,
    /// Slope (per step, in log space) below which the window counts as flat.
    pub drift_tol: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            overflow_log: 700.0,
            zero_log: -100.0,
            drift_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureClassification {
    pub h: String,
    pub scale: Scale,
    pub n_range: (usize, usize),
    pub window: (usize, usize),
    pub liminf_est: ExtReal,
    pub limsup_est: ExtReal,
    pub trend: Trend,
    pub drift: f64,
    /// `[n, ln(N^n h(x_n))]`.
    pub trajectory: Vec<(usize, f64)>,
    pub verdicts: Vec<MeasureVerdict>,
    pub notes: Vec<String>,
}

impl MeasureClassification {
    pub fn has_item(&self, item: u8) -> bool {
        self.verdicts.iter().any(|v| v.item() == item)
    }
}

/// Classifies `N^n h(kappa R_n)` over `n_range`.
pub fn measure_sequence(
    spec: &SumSetSpec,
    h: &DimensionFunction,
    n_range: RangeInclusive<usize>,
) -> Result<MeasureClassification> {
    classify(
        spec,
        h,
        n_range,
        Scale::KappaTail,
        ClassifierConfig::default(),
    )
}

/// Classifies `N^n h(s_n)` over `n_range`; `n_range` must start at 1 or later.
pub fn measure_sequence_s_variant(
    spec: &SumSetSpec,
    h: &DimensionFunction,
    n_range: RangeInclusive<usize>,
) -> Result<MeasureClassification> {
    classify(spec, h, n_range, Scale::Term, ClassifierConfig::default())
}

pub fn classify(
    spec: &SumSetSpec,
    h: &DimensionFunction,
    n_range: RangeInclusive<usize>,
    scale: Scale,
    config: ClassifierConfig,
) -> Result<MeasureClassification> {
    let (start, end) = (*n_range.start(), *n_range.end());
    if start > end {
        return Err(Error::domain(format!("empty n range {start}..={end}")));
    }
    if scale == Scale::Term && start == 0 {
        return Err(Error::domain("s_n is indexed from 1"));
    }
    let ln_n = (spec.n_digits() as f64).ln();
    let mut trajectory = Vec::with_capacity(end - start + 1);
    let mut extrapolated = false;
    for n in start..=end {
        let ln_x = match scale {
            Scale::KappaTail => spec.log_kappa_tail(n),
            Scale::Term => spec.sequence().log_term(n)?,
        };
        let hv = h.log_eval(ln_x);
        extrapolated |= hv.region == Region::Extrapolated;
        trajectory.push((n, n as f64 * ln_n + hv.ln_value));
    }

    let w0 = start + (end - start) / 2;
    let window: Vec<(usize, f64)> = trajectory
        .iter()
        .copied()
        .filter(|&(n, _)| n >= w0)
        .collect();
    let xs: Vec<f64> = window.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = window.iter().map(|&(_, v)| v).collect();
    let drift = ls_slope(&xs, &ys);
    let trend = if drift > config.drift_tol {
        Trend::Increasing
    } else if drift < -config.drift_tol {
        Trend::Decreasing
    } else {
        Trend::Flat
    };
    let min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let liminf_est = if min <= config.zero_log {
        ExtReal::Finite(0.0)
    } else if min >= config.overflow_log {
        ExtReal::PosInf
    } else {
        ExtReal::Finite(min.exp())
    };
    let limsup_est = if max >= config.overflow_log {
        ExtReal::PosInf
    } else if max <= config.zero_log {
        ExtReal::Finite(0.0)
    } else {
        ExtReal::Finite(max.exp())
    };

    // Upper bounds need the window not to be climbing; lower bounds need it not to be falling.
    let mut verdicts = Vec::new();
    let n_digits = spec.n_digits() as f64;
    if trend != Trend::Increasing {
        match liminf_est {
            ExtReal::Finite(0.0) => verdicts.push(MeasureVerdict::HausdorffZero { item: 1 }),
            ExtReal::Finite(a) => {
                verdicts.push(MeasureVerdict::HausdorffFinite { item: 1, bound: a })
            }
            ExtReal::PosInf => {}
        }
    }
    if trend != Trend::Decreasing && liminf_est != ExtReal::Finite(0.0) {
        verdicts.push(MeasureVerdict::HausdorffPositive { item: 2 });
    }
    if trend != Trend::Increasing {
        if let ExtReal::Finite(a) = limsup_est {
            verdicts.push(MeasureVerdict::PackingFiniteBound {
                item: 3,
                alpha: a,
                bound: n_digits * a,
            });
        }
    }
    if trend != Trend::Decreasing && limsup_est != ExtReal::Finite(0.0) {
        verdicts.push(MeasureVerdict::PackingPositive { item: 4 });
    }

    let mut notes = Vec::new();
    if extrapolated {
        notes.push("h evaluated below its last stored breakpoint (extrapolated)".into());
    }
    if !spec.separation().passed() {
        notes.push("spec fails its separation condition; verdicts are not licensed".into());
        verdicts.clear();
    }
    Ok(MeasureClassification {
        h: h.describe(),
        scale,
        n_range: (start, end),
        window: (w0, end),
        liminf_est,
        limsup_est,
        trend,
        drift,
        trajectory,
        verdicts,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimfunc::build_h;
    use crate::real::Real;
    use crate::seqcore::{DigitSystem, SeparationMode};

    fn cantor_d() -> f64 {
        2f64.ln() / 3f64.ln()
    }

    #[test]
    fn cantor_dims() {
        let r = dims_exact(&SumSetSpec::cantor(), 1000).unwrap();
        assert!((r.dim_h - cantor_d()).abs() < 1e-15);
        assert_eq!(r.dim_h, r.dim_p);
        assert!(r.certified);
        assert!((r.dim_h - 0.630930).abs() < 1e-6);
    }

    #[test]
    fn cube_weak_dims() {
        // lambda = 2^{-p/alpha}, p = 2, alpha = 1.5
        let lambda = 2f64.powf(-4.0 / 3.0);
        let spec = SumSetSpec::new(
            SequenceSpec::geometric(1.0, lambda).unwrap(),
            DigitSystem::cube(2).unwrap(),
            SeparationMode::CubeWeak,
        )
        .unwrap();
        let r = dims_exact(&spec, 100).unwrap();
        assert!((r.dim_h - 1.5).abs() < 1e-14);
    }

    #[test]
    fn quarter_ratio_half_dim() {
        let spec = SumSetSpec::new(
            SequenceSpec::geometric(Real::ratio(1, 1), Real::ratio(1, 4)).unwrap(),
            DigitSystem::constant(&[vec![0.0], vec![1.0]]).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap();
        assert_eq!(dims_exact(&spec, 10).unwrap().dim_h, 0.5);
    }

    #[test]
    fn refuses_failed_separation() {
        let spec = SumSetSpec::new(
            SequenceSpec::geometric(1.0, 0.6).unwrap(),
            DigitSystem::constant(&[vec![0.0], vec![1.0]]).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap();
        assert!(matches!(dims_exact(&spec, 10), Err(Error::Separation(_))));
    }

    #[test]
    fn three_ratio_sequences_agree() {
        let spec = SumSetSpec::new(
            SequenceSpec::geometric(1.7, 0.2).unwrap(),
            DigitSystem::constant(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap();
        let seq = spec.sequence();
        let n = 1000;
        let a = secant_estimate(3, |k| seq.log_term(k).unwrap(), n / 2, n);
        let b = secant_estimate(3, |k| seq.log_tail(k), n / 2, n);
        let c = secant_estimate(3, |k| spec.log_kappa_tail(k), n / 2, n);
        assert!((a - b).abs() < 1e-9 && (b - c).abs() < 1e-9);
        assert!((a - dims_exact(&spec, 10).unwrap().dim_h).abs() < 1e-9);
    }

    #[test]
    fn exact_exponent_is_constant_one() {
        let spec = SumSetSpec::cantor();
        let h = DimensionFunction::power_law(cantor_d()).unwrap();
        let c = measure_sequence(&spec, &h, 0..=100).unwrap();
        for &(_, v) in &c.trajectory {
            assert!((v.exp() - 1.0).abs() < 1e-10);
        }
        assert!(c.drift.abs() < 1e-10);
        assert_eq!(c.trend, Trend::Flat);
        for item in 1..=4 {
            assert!(c.has_item(item), "missing item {item}");
        }
        let p = c
            .verdicts
            .iter()
            .find_map(|v| match v {
                MeasureVerdict::PackingFiniteBound { bound, .. } => Some(*bound),
                _ => None,
            })
            .unwrap();
        assert!((p - 2.0).abs() < 1e-9);
    }

    #[test]
    fn larger_exponent_gives_zero() {
        let spec = SumSetSpec::cantor();
        let h = DimensionFunction::power_law(0.7).unwrap();
        let c = measure_sequence(&spec, &h, 1..=2000).unwrap();
        assert_eq!(c.liminf_est, ExtReal::Finite(0.0));
        assert!(c
            .verdicts
            .contains(&MeasureVerdict::HausdorffZero { item: 1 }));
        assert!(!c.has_item(2) && !c.has_item(4));
        assert!(c.trajectory.last().unwrap().1 < -100.0);
    }

    #[test]
    fn smaller_exponent_overflows() {
        let spec = SumSetSpec::cantor();
        let h = DimensionFunction::power_law(0.5).unwrap();
        let c = measure_sequence(&spec, &h, 1..=10_000).unwrap();
        assert_eq!(c.limsup_est, ExtReal::PosInf);
        assert!(c.has_item(4) && !c.has_item(3) && !c.has_item(1));
    }

    #[test]
    fn s_variant_constants() {
        let spec = SumSetSpec::cantor();
        let d = cantor_d();
        let c =
            measure_sequence_s_variant(&spec, &DimensionFunction::power_law(d).unwrap(), 1..=200)
                .unwrap();
        for &(_, v) in &c.trajectory {
            assert!((v - d * 2f64.ln()).abs() < 1e-10);
        }
        let g = SumSetSpec::new(
            SequenceSpec::geometric(1.9, 0.1).unwrap(),
            DigitSystem::constant(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap();
        let d = -(3f64).ln() / 0.1f64.ln();
        let c = measure_sequence_s_variant(&g, &DimensionFunction::power_law(d).unwrap(), 1..=500)
            .unwrap();
        for &(_, v) in &c.trajectory {
            assert!((v - d * 1.9f64.ln()).abs() < 1e-10);
        }
        assert!(
            measure_sequence_s_variant(&spec, &DimensionFunction::PowerLaw(0.5), 0..=3).is_err()
        );
    }

    #[test]
    fn constructed_gauge_is_identically_one() {
        let spec = SumSetSpec::new(
            SequenceSpec::geometric(0.8, 0.15).unwrap(),
            DigitSystem::constant(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.8]]).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap();
        let h = build_h(&spec, 300).unwrap();
        let c = measure_sequence(&spec, &h, 0..=300).unwrap();
        for &(n, v) in &c.trajectory {
            assert!(v.abs() < 1e-9, "n = {n}: {v}");
        }
        for item in 1..=4 {
            assert!(c.has_item(item));
        }
    }

    #[test]
    fn window_estimates_for_log_expression() {
        use crate::seqcore::LogExpression;
        // s_n = 2 * 3^-n written as an opaque expression.
        let seq = SequenceSpec::LogExpression(LogExpression::new(
            "cantor",
            |n| 2f64.ln() - n as f64 * 3f64.ln(),
            |n| -(n as f64) * 3f64.ln(),
        ));
        let spec = SumSetSpec::with_horizon(
            seq,
            DigitSystem::constant(&[vec![0.0], vec![1.0]]).unwrap(),
            SeparationMode::Strict,
            500,
        )
        .unwrap();
        let r = dims_exact(&spec, 4000).unwrap();
        assert!(!r.certified);
        assert!(r.dim_h <= r.dim_p);
        assert!((r.dim_h - cantor_d()).abs() < 1e-3);
    }
}

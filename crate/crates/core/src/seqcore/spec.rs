use serde::Serialize;

use super::digits::{Certification, DigitSystem};
use super::sequence::SequenceSpec;
use crate::error::{Error, Result};

/// Default index horizon for quantities that have no closed form.
pub const DEFAULT_HORIZON: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SeparationMode {
    /// `sup kappa R_n / (tau s_n) < 1`.
    #[default]
    Strict,
    /// `sup R_n / s_n < 1`, valid only for unit-cube corner digits.
    CubeWeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of a separation check.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub mode: SeparationMode,
    /// `sup_n kappa R_n / (tau s_n)` over the scanned range.
    pub m_estimate: f64,
    pub log_m: f64,
    /// Index attaining the supremum (first such index).
    pub argmax: usize,
    /// `sup_n R_n / s_n`, the quantity tested in cube-weak mode.
    pub weak_ratio: f64,
    pub horizon: usize,
    /// The supremum is exact over all `n`, not just the scanned range.
    pub certified: bool,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl SeparationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// A sequence paired with a digit system, with `kappa`, `tau` and `M` cached.
#[derive(Debug, Clone)]
pub struct SumSetSpec {
    seq: SequenceSpec,
    digits: DigitSystem,
    mode: SeparationMode,
    separation: SeparationReport,
}

impl SumSetSpec {
    /// Validates the pair and evaluates separation over [`DEFAULT_HORIZON`].
    ///
    /// A spec that fails separation is still constructed; operations that
    /// need the condition refuse it via [`SumSetSpec::require_separation`].
    pub fn new(seq: SequenceSpec, digits: DigitSystem, mode: SeparationMode) -> Result<Self> {
        Self::with_horizon(seq, digits, mode, DEFAULT_HORIZON)
    }

    pub fn with_horizon(
        seq: SequenceSpec,
        digits: DigitSystem,
        mode: SeparationMode,
        horizon: usize,
    ) -> Result<Self> {
        if mode == SeparationMode::CubeWeak && !digits.is_cube() {
            return Err(Error::validation(
                "cube-weak separation requires cube digits",
            ));
        }
        if !seq.is_closed_form() {
            seq.validate(horizon.min(DEFAULT_HORIZON))?;
        }
        let separation = separation_scan(&seq, &digits, mode, horizon)?;
        Ok(SumSetSpec {
            seq,
            digits,
            mode,
            separation,
        })
    }

    /// Middle-thirds Cantor set: `s_n = 2 * 3^-n`, `D = {0, 1}`.
    pub fn cantor() -> Self {
        SumSetSpec::new(
            SequenceSpec::cantor(),
            DigitSystem::constant(&[vec![0.0], vec![1.0]]).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap()
    }

    pub fn sequence(&self) -> &SequenceSpec {
        &self.seq
    }

    pub fn digits(&self) -> &DigitSystem {
        &self.digits
    }

    pub fn mode(&self) -> SeparationMode {
        self.mode
    }

    pub fn kappa(&self) -> f64 {
        self.digits.kappa()
    }

    pub fn tau(&self) -> f64 {
        self.digits.tau()
    }

    /// Cached `M`.
    pub fn m(&self) -> f64 {
        self.separation.m_estimate
    }

    /// Cached separation report at construction horizon.
    pub fn separation(&self) -> &SeparationReport {
        &self.separation
    }

    /// Number of digits per level.
    pub fn n_digits(&self) -> usize {
        self.digits.len()
    }

    pub fn dim(&self) -> usize {
        self.digits.dim()
    }

    /// Errors unless the spec's own separation mode holds.
    pub fn require_separation(&self) -> Result<()> {
        if self.separation.passed() {
            Ok(())
        } else {
            Err(Error::Separation(refusal_text(&self.separation)))
        }
    }

    /// Errors unless the strict condition `M < 1` holds.
    pub fn require_strict(&self) -> Result<()> {
        if self.separation.m_estimate < 1.0 {
            Ok(())
        } else {
            Err(Error::Separation(format!(
                "strict separation needs M < 1, found M = {}",
                self.separation.m_estimate
            )))
        }
    }

    /// `ln(kappa R_n)`.
    pub fn log_kappa_tail(&self, n: usize) -> f64 {
        self.kappa().ln() + self.seq.log_tail(n)
    }
}

fn refusal_text(r: &SeparationReport) -> String {
    match r.mode {
        SeparationMode::Strict => format!(
            "rapid-decay condition fails: M = {} >= 1 (at n = {}); dimension formulas and \
             constructions assume M < 1",
            r.m_estimate, r.argmax
        ),
        SeparationMode::CubeWeak => format!(
            "cube separation fails: sup R_n/s_n = {} >= 1 (at n = {})",
            r.weak_ratio, r.argmax
        ),
    }
}

/// Re-evaluates the separation condition of `spec` over `1..=horizon`.
pub fn check_separation(spec: &SumSetSpec, horizon: usize) -> Result<SeparationReport> {
    if horizon == 0 {
        return Err(Error::domain("separation horizon must be at least 1"));
    }
    separation_scan(&spec.seq, &spec.digits, spec.mode, horizon)
}

fn separation_scan(
    seq: &SequenceSpec,
    digits: &DigitSystem,
    mode: SeparationMode,
    horizon: usize,
) -> Result<SeparationReport> {
    if horizon == 0 {
        return Err(Error::domain("separation horizon must be at least 1"));
    }
    let log_scale = digits.kappa().ln() - digits.tau().ln();
    let mut notes: Vec<String> = digits.notes().to_vec();
    let digits_exact = digits.certification() == Certification::Exact;

    // Closed forms: the ratio R_n / s_n is eventually constant.
    let (log_weak, argmax, scanned, seq_exact) = match seq {
        SequenceSpec::Geometric(g) => (g.lambda().odds().ln(), 1, 1, true),
        _ => {
            let (last, exact) = match seq {
                SequenceSpec::Table(t) => (t.log_values().len() + 1, true),
                SequenceSpec::Subsequence(s) if s.base().is_closed_form() => {
                    // Past the map the continuation is a shifted tail of the base.
                    (s.horizon() + 1, true)
                }
                _ => (horizon, false),
            };
            let mut best = f64::NEG_INFINITY;
            let mut arg = 1;
            for n in 1..=last {
                let v = seq.log_tail(n) - seq.log_term(n)?;
                if v.is_nan() {
                    return Err(Error::validation(format!(
                        "ratio R_n/s_n undefined at n = {n}"
                    )));
                }
                if v > best {
                    best = v;
                    arg = n;
                }
            }
            if let SequenceSpec::Subsequence(s) = seq {
                if exact {
                    if let Some(g) = s.base().geometric_tail() {
                        best = best.max(g.lambda().odds().ln());
                    }
                }
            }
            (best, arg, last, exact)
        }
    };

    // Geometric ratio is exact-then-rounded; keep the linear value unrounded by logs.
    let (m_estimate, weak_ratio) = match seq {
        SequenceSpec::Geometric(g) => {
            let odds = g.lambda().odds();
            (digits.kappa() * odds / digits.tau(), odds)
        }
        _ => ((log_scale + log_weak).exp(), log_weak.exp()),
    };
    let certified = seq_exact && digits_exact;
    if !certified {
        notes.push(format!(
            "supremum taken over n <= {scanned}; not certified beyond"
        ));
    }
    let verdict = match mode {
        SeparationMode::Strict if m_estimate < 1.0 => Verdict::Pass,
        SeparationMode::CubeWeak if weak_ratio < 1.0 => Verdict::Pass,
        _ => Verdict::Fail,
    };
    Ok(SeparationReport {
        mode,
        m_estimate,
        log_m: m_estimate.ln(),
        argmax,
        weak_ratio,
        horizon: scanned,
        certified,
        verdict,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::Real;

    fn binary(lambda: Real) -> SumSetSpec {
        SumSetSpec::new(
            SequenceSpec::geometric(Real::ratio(1, 1), lambda).unwrap(),
            DigitSystem::constant(&[vec![0.0], vec![1.0]]).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap()
    }

    #[test]
    fn cantor_m_is_exactly_half() {
        let spec = SumSetSpec::cantor();
        let r = check_separation(&spec, 50).unwrap();
        assert_eq!(r.m_estimate, 0.5);
        assert!(r.certified);
        assert!(r.passed());
    }

    #[test]
    fn cantor_ratio_numerically_constant() {
        let spec = SumSetSpec::cantor();
        for n in 1..=50 {
            let v = spec.log_kappa_tail(n) - spec.tau().ln() - spec.sequence().log_term(n).unwrap();
            assert!((v - 0.5f64.ln()).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn lambda_point_six_fails() {
        let r = binary("0.6".parse().unwrap()).separation().clone();
        assert!((r.m_estimate - 1.5).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(matches!(
            binary("0.6".parse().unwrap()).require_separation(),
            Err(Error::Separation(_))
        ));
    }

    #[test]
    fn cube_weak_versus_strict() {
        let seq =
            || SequenceSpec::geometric(Real::ratio(1, 1), "0.45".parse::<Real>().unwrap()).unwrap();
        let weak = SumSetSpec::new(
            seq(),
            DigitSystem::cube(2).unwrap(),
            SeparationMode::CubeWeak,
        )
        .unwrap();
        assert_eq!(weak.separation().weak_ratio, 9.0 / 11.0);
        assert!(weak.separation().passed());
        let strict =
            SumSetSpec::new(seq(), DigitSystem::cube(2).unwrap(), SeparationMode::Strict).unwrap();
        assert!((strict.m() - 2f64.sqrt() * 9.0 / 11.0).abs() < 1e-15);
        assert!(!strict.separation().passed());
    }

    #[test]
    fn cube_weak_needs_cube_digits() {
        let r = SumSetSpec::new(
            SequenceSpec::cantor(),
            DigitSystem::constant(&[vec![0.0], vec![1.0]]).unwrap(),
            SeparationMode::CubeWeak,
        );
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn tail_chain_in_log_space() {
        // kappa s_{n+1} < kappa R_n <= M tau s_n < kappa s_n
        let spec = SumSetSpec::new(
            SequenceSpec::geometric(1.3, 0.2).unwrap(),
            DigitSystem::constant(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.3, 0.9]]).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap();
        let (k, t, m) = (spec.kappa().ln(), spec.tau().ln(), spec.m().ln());
        let seq = spec.sequence();
        for n in 1..2000 {
            let s = seq.log_term(n).unwrap();
            let s1 = seq.log_term(n + 1).unwrap();
            let r = seq.log_tail(n);
            assert!(k + s1 < k + r);
            assert!(k + r <= m + t + s + 1e-12);
            assert!(m + t + s < k + s);
        }
    }

    #[test]
    fn zero_horizon_rejected() {
        assert!(check_separation(&SumSetSpec::cantor(), 0).is_err());
    }
}

//! Subsequence thinning: index maps `pi` with `t_i = s_{pi(i)}` that steer the
//! Hausdorff and packing dimension (or measure exponents) of the sum set.
//!
//! Three constructions are provided:
//! - [`plan_block_density`]: alternating uniform removal between anchor indices,
//!   retaining density `alpha/A` up to each `n_j` and `beta/B` up to each `m_j`.
//! - [`plan_scaled_index`]: `pi(i) = floor((A/a) i)`, patched so every anchor is hit.
//! - [`plan_two_ratio`]: the four-branch map that sends `Q_j -> n_j` and
//!   `P_j -> m_j` while keeping `B/b <= pi(i)/i <= A/a` eventually.
//!
//! All index arithmetic is done in integers when the parameters are rational.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::seqcore::{DigitSystem, SequenceSpec, Subsequence, SumSetSpec, DEFAULT_HORIZON};

/// Default number of thinned indices computed by the CLI.
pub const DEFAULT_THINNING_HORIZON: usize = 100_000;

pub const PLAN_SCHEMA_VERSION: u32 = 1;

const TRAJECTORY_POINTS: usize = 1000;

/// `{ q + floor(i / xi) : 0 <= i <= floor(xi (ell - q) - 1) }`, sorted. Never contains `ell`.
pub fn uniform_remove(q: usize, ell: usize, xi: &Real) -> Result<Vec<usize>> {
    if !(xi.value() > 0.0 && xi.value() <= 1.0) {
        return Err(Error::domain(format!(
            "removal density must lie in (0, 1], got {xi}"
        )));
    }
    if q > ell {
        return Err(Error::domain(format!("empty segment [{q}, {ell}]")));
    }
    let last = xi.floor_mul((ell - q) as i128) - 1;
    if last < 0 {
        return Ok(Vec::new());
    }
    Ok((0..=last)
        .map(|i| q + xi.floor_div_into(i) as usize)
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorsRaw {
    n: Vec<usize>,
    m: Vec<usize>,
}

/// Strictly interleaved anchors `n_1 < m_1 < n_2 < m_2 < ...`.
///
/// `n` may carry one more entry than `m`, closing the last block at `n_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AnchorsRaw", into = "AnchorsRaw")]
pub struct AnchorSequences {
    n: Vec<usize>,
    m: Vec<usize>,
}

impl TryFrom<AnchorsRaw> for AnchorSequences {
    type Error = Error;

    fn try_from(raw: AnchorsRaw) -> Result<Self> {
        AnchorSequences::new(raw.n, raw.m)
    }
}

impl From<AnchorSequences> for AnchorsRaw {
    fn from(a: AnchorSequences) -> Self {
        AnchorsRaw { n: a.n, m: a.m }
    }
}

/// Ratios between consecutive anchors, against the growth the asymptotic argument assumes.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthDiagnostics {
    pub m_over_n: Vec<f64>,
    pub next_n_over_m: Vec<f64>,
    /// `n_1 >= 100`, `m_j >= 2^{n_j}` and `n_{j+1} >= 2^{m_j}` all hold.
    pub meets_asymptotic_growth: bool,
    pub note: String,
}

fn at_least_pow2(x: usize, e: usize) -> bool {
    e < usize::BITS as usize && x >= 1usize << e
}

impl AnchorSequences {
    pub fn new(n: Vec<usize>, m: Vec<usize>) -> Result<Self> {
        if n.is_empty() {
            return Err(Error::validation("anchor sequence n is empty"));
        }
        if !(m.len() == n.len() || m.len() + 1 == n.len()) {
            return Err(Error::validation(format!(
                "anchors need |m| = |n| or |n| - 1, got |n| = {}, |m| = {}",
                n.len(),
                m.len()
            )));
        }
        let a = AnchorSequences { n, m };
        let seq: Vec<usize> = a.interleaved().map(|(x, _)| x).collect();
        if seq[0] == 0 {
            return Err(Error::validation("anchors are 1-based indices"));
        }
        if let Some(w) = seq.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "anchors must interleave strictly (n_j < m_j < n_(j+1)); {} >= {}",
                seq[w],
                seq[w + 1]
            )));
        }
        Ok(a)
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn m(&self) -> &[usize] {
        &self.m
    }

    /// `(index, is_m)` in increasing order.
    fn interleaved(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        (0..self.n.len()).flat_map(move |j| {
            std::iter::once((self.n[j], false)).chain(self.m.get(j).map(|&m| (m, true)))
        })
    }

    pub fn last(&self) -> usize {
        self.interleaved().last().map(|(x, _)| x).unwrap_or(0)
    }

    pub fn diagnostics(&self) -> GrowthDiagnostics {
        let m_over_n: Vec<f64> = self
            .m
            .iter()
            .zip(&self.n)
            .map(|(&m, &n)| m as f64 / n as f64)
            .collect();
        let next_n_over_m: Vec<f64> = self
            .m
            .iter()
            .zip(self.n.iter().skip(1))
            .map(|(&m, &n)| n as f64 / m as f64)
            .collect();
        let meets = self.n[0] >= 100
            && self
                .m
                .iter()
                .zip(&self.n)
                .all(|(&m, &n)| at_least_pow2(m, n))
            && self
                .m
                .iter()
                .zip(self.n.iter().skip(1))
                .all(|(&m, &n)| at_least_pow2(n, m));
        let note = if meets {
            "anchors meet the asymptotic growth requirements".into()
        } else {
            "anchors are below the asymptotic growth requirements; finite-horizon estimates \
             carry an error that shrinks as the ratios grow"
                .into()
        };
        GrowthDiagnostics {
            m_over_n,
            next_n_over_m,
            meets_asymptotic_growth: meets,
            note,
        }
    }
}

/// How a plan was produced; serialized alongside the index map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Provenance {
    Identity,
    /// Original indices dropped one by one.
    Explicit {
        removed: Vec<usize>,
    },
    BlockDensity {
        #[serde(rename = "A")]
        cap_a: Real,
        #[serde(rename = "B")]
        cap_b: Real,
        alpha: Real,
        beta: Real,
        anchors: AnchorSequences,
        original_horizon: usize,
    },
    ScaledIndex {
        #[serde(rename = "A")]
        cap_a: Real,
        a: Real,
        anchors: AnchorSequences,
    },
    TwoRatio {
        #[serde(rename = "A")]
        cap_a: Real,
        a: Real,
        #[serde(rename = "B")]
        cap_b: Real,
        b: Real,
        delta: Real,
        gamma: Real,
        anchors: AnchorSequences,
        /// First index from which `B/b <= pi(i)/i <= A/a` holds through the horizon.
        i0: Option<usize>,
    },
}

/// An injective index map `pi` on `[1, horizon]`, `pi[i - 1] = pi(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinningPlan {
    pi: Arc<[usize]>,
    provenance: Provenance,
    notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDocument {
    schema_version: u32,
    provenance: Provenance,
    horizon: usize,
    /// Maximal runs `[first, last]` of consecutive original indices, in order of `i`.
    retained: Vec<[usize; 2]>,
    #[serde(default)]
    notes: Vec<String>,
}

/// Errors unless `pi` is injective and never 0.
fn check_injective(pi: &[usize]) -> Result<()> {
    if pi.contains(&0) {
        return Err(Error::validation("index map contains 0"));
    }
    let mut sorted = pi.to_vec();
    sorted.par_sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::validation(format!(
            "index map is not injective: {} appears twice",
            w[0]
        )));
    }
    Ok(())
}

impl ThinningPlan {
    fn from_parts(pi: Vec<usize>, provenance: Provenance, notes: Vec<String>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::validation("thinning plan retains no indices"));
        }
        check_injective(&pi)?;
        Ok(ThinningPlan {
            pi: pi.into(),
            provenance,
            notes,
        })
    }

    pub fn identity(horizon: usize) -> Result<Self> {
        Self::from_parts((1..=horizon).collect(), Provenance::Identity, Vec::new())
    }

    /// Drops the listed original indices from `1..=original_horizon`.
    pub fn remove_indices(removed: &[usize], original_horizon: usize) -> Result<Self> {
        let mut removed = removed.to_vec();
        removed.sort_unstable();
        removed.dedup();
        if let Some(&bad) = removed.iter().find(|&&r| r == 0 || r > original_horizon) {
            return Err(Error::domain(format!(
                "removed index {bad} outside 1..={original_horizon}"
            )));
        }
        let pi = (1..=original_horizon)
            .filter(|i| removed.binary_search(i).is_err())
            .collect();
        Self::from_parts(pi, Provenance::Explicit { removed }, Vec::new())
    }

    pub fn pi(&self) -> &[usize] {
        &self.pi
    }

    pub fn index_map(&self) -> Arc<[usize]> {
        Arc::clone(&self.pi)
    }

    pub fn horizon(&self) -> usize {
        self.pi.len()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// `pi(i)` for `1 <= i <= horizon`.
    pub fn original_index(&self, i: usize) -> usize {
        self.pi[i - 1]
    }

    pub fn is_identity(&self) -> bool {
        self.pi.iter().enumerate().all(|(k, &x)| x == k + 1)
    }

    pub fn is_monotone(&self) -> bool {
        self.pi.windows(2).all(|w| w[0] < w[1])
    }

    /// Errors with a resource error when fewer than `needed` indices were computed.
    pub fn require_horizon(&self, needed: usize) -> Result<()> {
        if needed > self.horizon() {
            return Err(Error::Resource {
                what: "thinning plan horizon".into(),
                required: needed as u128,
                budget: self.horizon() as u128,
            });
        }
        Ok(())
    }

    pub fn retained_runs(&self) -> Vec<[usize; 2]> {
        let mut runs: Vec<[usize; 2]> = Vec::new();
        for &x in self.pi.iter() {
            match runs.last_mut() {
                Some(r) if r[1] + 1 == x => r[1] = x,
                _ => runs.push([x, x]),
            }
        }
        runs
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PlanDocument {
            schema_version: PLAN_SCHEMA_VERSION,
            provenance: self.provenance.clone(),
            horizon: self.horizon(),
            retained: self.retained_runs(),
            notes: self.notes.clone(),
        };
        Ok(crate::export::to_json_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: PlanDocument = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Parse(format!("plan document, field `{path}`: {}", e.into_inner()))
        })?;
        if doc.schema_version != PLAN_SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "unsupported plan schema_version {}",
                doc.schema_version
            )));
        }
        let mut pi = Vec::with_capacity(doc.horizon);
        for [a, b] in doc.retained {
            if a > b {
                return Err(Error::validation(format!("bad run [{a}, {b}]")));
            }
            if pi.len() + (b - a + 1) > doc.horizon {
                return Err(Error::validation("runs exceed the declared horizon"));
            }
            pi.extend(a..=b);
        }
        if pi.len() != doc.horizon {
            return Err(Error::validation(format!(
                "runs cover {} indices, horizon says {}",
                pi.len(),
                doc.horizon
            )));
        }
        Self::from_parts(pi, doc.provenance, doc.notes)
    }
}

fn nonneg(x: &Real, name: &str) -> Result<()> {
    if x.value() >= 0.0 && x.value().is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be finite and >= 0, got {x}"
        )))
    }
}

fn positive(x: &Real, name: &str) -> Result<()> {
    if x.value() > 0.0 && x.value().is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be finite and > 0, got {x}"
        )))
    }
}

/// `x < y`, exactly when both are rational.
fn real_lt(x: &Real, y: &Real) -> bool {
    match (x.exact(), y.exact()) {
        (Some(p), Some(q)) => p
            .checked_sub(q)
            .map(|d| d.num < 0)
            .unwrap_or(x.value() < y.value()),
        _ => x.value() < y.value(),
    }
}

fn real_is_one(x: &Real) -> bool {
    match x.exact() {
        Some(r) => r.num == r.den,
        None => x.value() == 1.0,
    }
}

/// Alternating uniform removal: retention `alpha/A` on `[1, n_1]` and each
/// `[m_j + 1, n_(j+1)]`, retention `beta/B` on each `[n_j + 1, m_j]`.
///
/// Indices past the last anchor up to `original_horizon` form one more block
/// of the alternating kind.
pub fn plan_block_density(
    cap_a: Real,
    cap_b: Real,
    alpha: Real,
    beta: Real,
    anchors: &AnchorSequences,
    original_horizon: usize,
) -> Result<ThinningPlan> {
    positive(&cap_a, "A")?;
    positive(&cap_b, "B")?;
    nonneg(&alpha, "alpha")?;
    nonneg(&beta, "beta")?;
    if real_lt(&cap_a, &alpha) || real_lt(&cap_b, &beta) {
        return Err(Error::Hypothesis(format!(
            "need alpha <= A and beta <= B, got alpha = {alpha}, A = {cap_a}, beta = {beta}, B = {cap_b}"
        )));
    }
    let keep_alpha = alpha.div(&cap_a);
    let keep_beta = beta.div(&cap_b);
    if real_lt(&keep_beta, &keep_alpha) {
        return Err(Error::Hypothesis(format!(
            "need alpha/A <= beta/B, got {keep_alpha} > {keep_beta}"
        )));
    }
    if original_horizon < anchors.last() {
        return Err(Error::domain(format!(
            "original horizon {original_horizon} stops before the last anchor {}",
            anchors.last()
        )));
    }

    let mut blocks: Vec<(usize, usize, bool)> = Vec::new();
    let mut q = 1;
    let mut last_is_m = true;
    for (x, is_m) in anchors.interleaved() {
        blocks.push((q, x, is_m));
        q = x + 1;
        last_is_m = is_m;
    }
    if q <= original_horizon {
        blocks.push((q, original_horizon, !last_is_m));
    }

    let drop_alpha = keep_alpha.one_minus();
    let drop_beta = keep_beta.one_minus();
    let mut pi = Vec::new();
    for &(q, ell, is_m) in &blocks {
        let xi = if is_m { &drop_beta } else { &drop_alpha };
        let removed = if xi.value() <= 0.0 {
            Vec::new()
        } else {
            uniform_remove(q, ell, xi)?
        };
        let mut r = removed.iter().peekable();
        for k in q..=ell {
            if r.peek() == Some(&&k) {
                r.next();
            } else {
                pi.push(k);
            }
        }
    }

    let mut notes = Vec::new();
    let endpoint = |x: &Real| x.value() == 0.0 || real_is_one(x);
    if endpoint(&keep_alpha) || endpoint(&keep_beta) {
        notes.push("endpoint densities (0 or 1) applied literally".into());
    }
    ThinningPlan::from_parts(
        pi,
        Provenance::BlockDensity {
            cap_a,
            cap_b,
            alpha,
            beta,
            anchors: anchors.clone(),
            original_horizon,
        },
        notes,
    )
}

/// `x > r`, exactly when `r` is rational.
fn int_gt(x: i128, r: &Real) -> bool {
    match r.exact() {
        Some(q) => x.checked_mul(q.den).map(|v| v > q.num).unwrap_or(true),
        None => x as f64 > r.value(),
    }
}

/// `pi(i) = floor((A/a) i)` on `[1, horizon]`, patched so every anchor is in the image.
///
/// Anchors must be more than `2A/a` apart so patches cannot collide.
pub fn plan_scaled_index(
    cap_a: Real,
    a: Real,
    anchors: &AnchorSequences,
    horizon: usize,
) -> Result<ThinningPlan> {
    positive(&a, "a")?;
    positive(&cap_a, "A")?;
    if real_lt(&cap_a, &a) {
        return Err(Error::Hypothesis(format!(
            "need 0 < a <= A, got a = {a}, A = {cap_a}"
        )));
    }
    if horizon == 0 {
        return Err(Error::domain("plan horizon must be at least 1"));
    }
    let provenance = Provenance::ScaledIndex {
        cap_a,
        a,
        anchors: anchors.clone(),
    };
    let ratio = cap_a.div(&a);
    if real_is_one(&ratio) {
        let mut plan = ThinningPlan::identity(horizon)?;
        plan.provenance = provenance;
        plan.notes.push("a = A: the map is the identity".into());
        return Ok(plan);
    }

    let twice = ratio.mul(&Real::ratio(2, 1));
    for (j, &n) in anchors.n().iter().enumerate() {
        for &m in anchors.m() {
            let gap = (n as i128 - m as i128).abs();
            if !int_gt(gap, &twice) {
                return Err(Error::AnchorInadequate {
                    j: j + 1,
                    reason: format!("|n_j - m_k| = |{n} - {m}| = {gap} is not > 2A/a = {twice}"),
                });
            }
        }
    }

    let inv = a.div(&cap_a);
    let mut pi: Vec<usize> = (1..=horizon as i128)
        .map(|i| ratio.floor_mul(i) as usize)
        .collect();
    let mut patched = 0;
    for (j, x) in anchors.interleaved().map(|(x, _)| x).enumerate() {
        let hit = inv.ceil_mul(x as i128);
        if hit >= 1 && ratio.floor_mul(hit) == x as i128 {
            if hit as usize > horizon {
                return Err(Error::domain(format!(
                    "horizon {horizon} does not reach anchor {x} (needs i = {hit})"
                )));
            }
            continue;
        }
        let i = inv.floor_mul(x as i128);
        if i < 1 {
            return Err(Error::AnchorInadequate {
                j: j / 2 + 1,
                reason: format!("anchor {x} would be placed at i = {i}"),
            });
        }
        if i as usize > horizon {
            return Err(Error::domain(format!(
                "horizon {horizon} does not reach anchor {x} (needs i = {i})"
            )));
        }
        pi[i as usize - 1] = x;
        patched += 1;
    }
    let notes = vec![format!("{patched} anchor(s) patched into the map")];
    ThinningPlan::from_parts(pi, provenance, notes)
        .map_err(|e| Error::Internal(format!("patched map failed verification: {e}")))
}

/// Per-anchor quantities of the two-ratio construction.
#[derive(Debug, Clone, Serialize)]
pub struct TwoRatioRow {
    pub j: usize,
    pub n: usize,
    pub m: usize,
    pub n_prime: i128,
    pub m_prime: i128,
    pub q: i128,
    pub q_prime: i128,
    pub p_prime: i128,
    pub p: i128,
    /// `Q_(j+1)` when `n_(j+1)` is known.
    pub q_next: Option<i128>,
    /// `floor((1 - a/A) n_j)`.
    pub shift_n: i128,
    /// `ceil((1 - b/B) m_j)`.
    pub shift_m: i128,
    /// First violated link of `Q_j < Q'_j < P'_j < P_j < Q_(j+1)`.
    pub violation: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoRatioQuantities {
    pub gamma0: Real,
    pub gamma: Real,
    pub rows: Vec<TwoRatioRow>,
    /// `Q_(k+1)` and `n_(k+1)` when anchors end with an extra `n`.
    pub closing: Option<(i128, usize)>,
}

impl TwoRatioQuantities {
    pub fn chain_holds(&self) -> bool {
        self.rows.iter().all(|r| r.violation.is_none())
    }
}

/// Computes `gamma`, `n'_j`, `m'_j`, `P_j`, `P'_j`, `Q_j`, `Q'_j` without building the map.
pub fn two_ratio_quantities(
    cap_a: &Real,
    a: &Real,
    cap_b: &Real,
    b: &Real,
    delta: &Real,
    anchors: &AnchorSequences,
) -> Result<TwoRatioQuantities> {
    for (x, name) in [
        (cap_a, "A"),
        (a, "a"),
        (cap_b, "B"),
        (b, "b"),
        (delta, "delta"),
    ] {
        positive(x, name)?;
    }
    if !real_lt(a, cap_a) {
        return Err(Error::Hypothesis(format!(
            "need a < A, got a = {a}, A = {cap_a}"
        )));
    }
    if real_lt(cap_b, b) {
        return Err(Error::Hypothesis(format!(
            "need b <= B, got b = {b}, B = {cap_b}"
        )));
    }
    let ra = a.div(cap_a);
    let rb = b.div(cap_b);
    if !real_lt(&ra, &rb) {
        return Err(Error::Hypothesis(format!(
            "need a/A < b/B strictly, got {ra} >= {rb}"
        )));
    }
    let one = Real::ratio(1, 1);
    let gamma0 = cap_b.div(b).sub(&one).div(&cap_a.div(a).sub(&one));
    let gamma = gamma0.add(delta);
    if !real_lt(&gamma, &one) {
        return Err(Error::domain(format!(
            "gamma = gamma0 + delta = {gamma} must be < 1 (gamma0 = {gamma0})"
        )));
    }
    let fa = ra.one_minus();
    let fb = rb.one_minus();
    let q_of = |n: i128| n - fa.floor_mul(n);
    let p_of = |m: i128| m - fb.ceil_mul(m);

    let mut rows = Vec::with_capacity(anchors.m().len());
    for j in 0..anchors.m().len() {
        let n = anchors.n()[j];
        let m = anchors.m()[j];
        let n_prime = gamma.floor_div_into(n as i128);
        let m_prime = gamma.floor_mul(m as i128);
        let q = q_of(n as i128);
        let q_prime = q_of(n_prime);
        let p_prime = p_of(m_prime);
        let p = p_of(m as i128);
        let q_next = anchors.n().get(j + 1).map(|&x| q_of(x as i128));
        let links = [
            (q, q_prime, "Q_j < Q'_j"),
            (q_prime, p_prime, "Q'_j < P'_j"),
            (p_prime, p, "P'_j < P_j"),
        ];
        let mut violation = links
            .iter()
            .find(|(x, y, _)| x >= y)
            .map(|(x, y, what)| format!("{what} fails: {x} >= {y}"));
        if violation.is_none() {
            if let Some(qn) = q_next {
                if p >= qn {
                    violation = Some(format!("P_j < Q_(j+1) fails: {p} >= {qn}"));
                }
            }
        }
        rows.push(TwoRatioRow {
            j: j + 1,
            n,
            m,
            n_prime,
            m_prime,
            q,
            q_prime,
            p_prime,
            p,
            q_next,
            shift_n: fa.floor_mul(n as i128),
            shift_m: fb.ceil_mul(m as i128),
            violation,
        });
    }
    let closing = if anchors.n().len() > anchors.m().len() {
        let n = *anchors.n().last().unwrap();
        Some((q_of(n as i128), n))
    } else {
        None
    };
    Ok(TwoRatioQuantities {
        gamma0,
        gamma,
        rows,
        closing,
    })
}

fn floor_frac(k: i128, num: i128, den: i128) -> i128 {
    (k * num).div_euclid(den)
}

fn ceil_frac(k: i128, num: i128, den: i128) -> i128 {
    -(-(k * num)).div_euclid(den)
}

/// First `i0` such that `B/b <= pi(i)/i <= A/a` for every `i` in `[i0, pi.len()]`.
fn sandwich_start(pi: &[usize], lower: &Real, upper: &Real) -> Option<usize> {
    let ok = |i: usize| {
        let v = pi[i - 1] as i128;
        lower.ceil_mul(i as i128) <= v && v <= upper.floor_mul(i as i128)
    };
    let h = pi.len();
    let mut i = h;
    while i >= 1 && ok(i) {
        i -= 1;
    }
    (i < h).then_some(i + 1)
}

/// The four-branch map for `a/A < b/B`; identity before `Q_1`.
///
/// The map is defined on `[1, P_k]`, or `[1, Q_(k+1)]` when `n` has one more
/// anchor than `m`.
pub fn plan_two_ratio(
    cap_a: Real,
    a: Real,
    cap_b: Real,
    b: Real,
    delta: Real,
    anchors: &AnchorSequences,
) -> Result<ThinningPlan> {
    let qs = two_ratio_quantities(&cap_a, &a, &cap_b, &b, &delta, anchors)?;
    if qs.rows.is_empty() {
        return Err(Error::AnchorInadequate {
            j: 1,
            reason: "the construction needs at least one (n_j, m_j) pair".into(),
        });
    }
    if let Some(r) = qs.rows.iter().find(|r| r.violation.is_some()) {
        return Err(Error::AnchorInadequate {
            j: r.j,
            reason: r.violation.clone().unwrap(),
        });
    }
    let end = match qs.closing {
        Some((q, _)) => q,
        None => qs.rows.last().unwrap().p,
    } as usize;
    let mut slots: Vec<Option<usize>> = vec![None; end];
    let mut set = |i: i128, v: i128| -> Result<()> {
        let slot = &mut slots[i as usize - 1];
        if slot.is_some() || v < 1 {
            return Err(Error::Internal(format!(
                "branch overlap or bad value at i = {i}"
            )));
        }
        *slot = Some(v as usize);
        Ok(())
    };

    let q1 = qs.rows[0].q;
    for i in 1..q1 {
        set(i, i)?;
    }
    for (idx, r) in qs.rows.iter().enumerate() {
        for i in r.q..r.q_prime {
            set(i, i + r.shift_n)?;
        }
        // d_j = (P'_j + C_j - (Q'_j + F_j)) / (P'_j - Q'_j)
        let d_num = r.p_prime + r.shift_m - (r.q_prime + r.shift_n);
        let d_den = r.p_prime - r.q_prime;
        for k in 0..=d_den {
            set(
                r.q_prime + k,
                r.q_prime + r.shift_n + floor_frac(k, d_num, d_den),
            )?;
        }
        for i in (r.p_prime + 1)..=r.p {
            set(i, i + r.shift_m)?;
        }
        let next = qs.rows.get(idx + 1).map(|nr| (nr.q, nr.n)).or(qs.closing);
        if let Some((q_next, n_next)) = next {
            // e_j = (Q_(j+1) + F_(j+1) - (P_j + C_j)) / (Q_(j+1) - P_j) = (n_(j+1) - m_j) / (Q_(j+1) - P_j)
            let e_num = n_next as i128 - r.m as i128;
            let e_den = q_next - r.p;
            for k in 1..e_den {
                set(r.p + k, r.m as i128 + ceil_frac(k, e_num, e_den))?;
            }
        }
    }
    if let Some((q, n)) = qs.closing {
        set(q, n as i128)?;
    }
    let pi: Vec<usize> = slots
        .into_iter()
        .enumerate()
        .map(|(k, s)| s.ok_or_else(|| Error::Internal(format!("index {} left unassigned", k + 1))))
        .collect::<Result<_>>()?;

    for r in &qs.rows {
        if pi[r.q as usize - 1] != r.n || pi[r.p as usize - 1] != r.m {
            return Err(Error::Internal(format!(
                "anchor identities fail at j = {}",
                r.j
            )));
        }
    }
    let i0 = sandwich_start(&pi, &cap_b.div(&b), &cap_a.div(&a));
    let mut notes = vec![format!("gamma0 = {}, gamma = {}", qs.gamma0, qs.gamma)];
    notes.push("pi(i) = i for i < Q_1".into());
    if i0.is_none() {
        notes.push("ratio sandwich fails at the end of the horizon".into());
    }
    let provenance = Provenance::TwoRatio {
        cap_a,
        a,
        cap_b,
        b,
        delta,
        gamma: qs.gamma,
        anchors: anchors.clone(),
        i0,
    };
    ThinningPlan::from_parts(pi, provenance, notes)
        .map_err(|e| Error::Internal(format!("two-ratio map failed verification: {e}")))
}

impl ThinningPlan {
    /// Sandwich start recorded for two-ratio plans.
    pub fn sandwich_i0(&self) -> Option<usize> {
        match &self.provenance {
            Provenance::TwoRatio { i0, .. } => *i0,
            _ => None,
        }
    }
}

/// Which digit set level `i` of a thinned spec uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DigitAssignment {
    /// `D^{pi(i)}`: each retained term keeps its own digits.
    #[default]
    Travel,
    /// `D^i`: digits stay attached to positions.
    ByPosition,
}

/// The thinned spec `t_i = s_{pi(i)}`, re-validated for separation.
pub fn apply_plan(
    spec: &SumSetSpec,
    plan: &ThinningPlan,
    digits: DigitAssignment,
) -> Result<SumSetSpec> {
    let seq = Subsequence::new(Arc::new(spec.sequence().clone()), plan.index_map())?;
    let digits = match digits {
        DigitAssignment::Travel => DigitSystem::reindexed(spec.digits(), plan.index_map()),
        DigitAssignment::ByPosition => spec.digits().clone(),
    };
    SumSetSpec::with_horizon(
        SequenceSpec::Subsequence(seq),
        digits,
        spec.mode(),
        DEFAULT_HORIZON,
    )
}

/// `[l, -l ln N / ln t_l]` for `l` in `range`, with `t_l = s_{pi(l)}`.
pub fn thinned_trajectory(
    spec: &SumSetSpec,
    plan: &ThinningPlan,
    range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<(usize, f64)>> {
    plan.require_horizon(*range.end())?;
    if *range.start() == 0 {
        return Err(Error::domain("thinned indices start at 1"));
    }
    let ln_n = (spec.n_digits() as f64).ln();
    let seq = spec.sequence();
    let values: Vec<Result<(usize, f64)>> = range
        .into_par_iter()
        .map(|l| {
            let lt = seq.log_term(plan.original_index(l))?;
            Ok((l, -(l as f64) * ln_n / lt))
        })
        .collect();
    values.into_iter().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ThinnedDimensionReport {
    pub target_alpha: f64,
    pub target_beta: f64,
    pub horizon: usize,
    pub window: (usize, usize),
    pub liminf_est: f64,
    pub limsup_est: f64,
    pub liminf_error: f64,
    pub limsup_error: f64,
    /// Largest distance of the windowed trajectory from `[alpha, beta]`.
    pub max_band_excursion: f64,
    /// `min, max` of `pi(i)/i` over the window.
    pub index_ratio_range: (f64, f64),
    pub growth: Option<GrowthDiagnostics>,
    pub trajectory: Vec<(usize, f64)>,
    pub notes: Vec<String>,
}

/// Compares the windowed trajectory `-l ln N / ln t_l`, `l in [window_start, horizon]`, with the targets.
pub fn thinned_dimension_check(
    spec: &SumSetSpec,
    plan: &ThinningPlan,
    targets: (f64, f64),
    horizon: usize,
    window_start: usize,
) -> Result<ThinnedDimensionReport> {
    if window_start == 0 || window_start > horizon {
        return Err(Error::domain(format!(
            "window start {window_start} must lie in 1..={horizon}"
        )));
    }
    let (alpha, beta) = targets;
    let all = thinned_trajectory(spec, plan, 1..=horizon)?;
    let window: Vec<(usize, f64)> = all
        .iter()
        .copied()
        .filter(|&(l, v)| l >= window_start && v.is_finite() && v > 0.0)
        .collect();
    if window.is_empty() {
        return Err(Error::validation("no terms below 1 inside the window"));
    }
    let lo = window.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = window.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (band_lo, band_hi) = (alpha.min(beta), alpha.max(beta));
    let excursion = window
        .iter()
        .map(|&(_, v)| (band_lo - v).max(v - band_hi).max(0.0))
        .fold(0.0, f64::max);
    let ratios = (window_start..=horizon).map(|i| plan.original_index(i) as f64 / i as f64);
    let rmin = ratios.clone().fold(f64::INFINITY, f64::min);
    let rmax = ratios.fold(f64::NEG_INFINITY, f64::max);

    let step = (all.len() / TRAJECTORY_POINTS).max(1);
    let mut trajectory: Vec<(usize, f64)> = all.iter().copied().step_by(step).collect();
    if trajectory.last() != all.last() {
        trajectory.push(*all.last().unwrap());
    }
    let growth = match plan.provenance() {
        Provenance::BlockDensity { anchors, .. }
        | Provenance::ScaledIndex { anchors, .. }
        | Provenance::TwoRatio { anchors, .. } => Some(anchors.diagnostics()),
        _ => None,
    };
    let mut notes = vec![format!(
        "liminf/limsup estimated as min/max over l in {window_start}..={horizon}"
    )];
    if let Some(g) = &growth {
        if !g.meets_asymptotic_growth {
            notes.push(g.note.clone());
        }
    }
    Ok(ThinnedDimensionReport {
        target_alpha: alpha,
        target_beta: beta,
        horizon,
        window: (window_start, horizon),
        liminf_est: lo,
        limsup_est: hi,
        liminf_error: (lo - alpha).abs(),
        limsup_error: (hi - beta).abs(),
        max_band_excursion: excursion,
        index_ratio_range: (rmin, rmax),
        growth,
        trajectory,
        notes,
    })
}

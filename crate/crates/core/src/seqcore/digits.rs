//! Per-level digit sets `D^n` in `R^p`, each holding `N` distinct points with `d^n_1 = 0`.

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// One level's digits, stored as a flat `N * p` coordinate array.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitSet {
    p: usize,
    coords: Vec<f64>,
}

/// What normalization did to a raw digit list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Unchanged,
    /// The origin was present and moved to the front.
    Reordered,
    /// No origin was present; every digit was shifted by `-d_1`.
    Translated,
}

impl DigitSet {
    /// Builds a digit set, checking dimensions, finiteness and distinctness.
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let p = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::domain("digit set is empty"))?;
        if p == 0 {
            return Err(Error::validation(
                "digits must have at least one coordinate",
            ));
        }
        let mut coords = Vec::with_capacity(points.len() * p);
        for (i, pt) in points.iter().enumerate() {
            if pt.len() != p {
                return Err(Error::validation(format!(
                    "digit {} has {} coordinates, expected {p}",
                    i + 1,
                    pt.len()
                )));
            }
            if pt.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(format!("digit {} is not finite", i + 1)));
            }
            coords.extend_from_slice(pt);
        }
        let set = DigitSet { p, coords };
        set.check_distinct()?;
        Ok(set)
    }

    /// All `2^p` corners of the unit cube, origin first, in binary counting order.
    pub fn cube(p: usize) -> Result<Self> {
        if p == 0 || p > 20 {
            return Err(Error::domain(format!(
                "cube dimension must be in 1..=20, got {p}"
            )));
        }
        let count = 1usize << p;
        let mut coords = Vec::with_capacity(count * p);
        for mask in 0..count {
            for axis in 0..p {
                coords.push(((mask >> (p - 1 - axis)) & 1) as f64);
            }
        }
        Ok(DigitSet { p, coords })
    }

    fn check_distinct(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                if self.point(i) == self.point(j) {
                    return Err(Error::validation(format!(
                        "digits {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Zero-based access; letter `k` of a word selects `point(k - 1)`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.p..(i + 1) * self.p]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.p)
    }

    /// Puts the origin first, translating when it is absent.
    pub fn normalized(mut self) -> (Self, Normalization) {
        let origin = self.points().position(|pt| pt.iter().all(|&x| x == 0.0));
        match origin {
            Some(0) => (self, Normalization::Unchanged),
            Some(i) => {
                let p = self.p;
                let mut coords = self.coords[i * p..(i + 1) * p].to_vec();
                for (k, pt) in self.coords.chunks_exact(p).enumerate() {
                    if k != i {
                        coords.extend_from_slice(pt);
                    }
                }
                self.coords = coords;
                (self, Normalization::Reordered)
            }
            None => {
                let first: Vec<f64> = self.point(0).to_vec();
                for chunk in self.coords.chunks_exact_mut(first.len()) {
                    for (x, o) in chunk.iter_mut().zip(&first) {
                        *x -= o;
                    }
                }
                (self, Normalization::Translated)
            }
        }
    }

    /// `(kappa_n, tau_n)`: largest and smallest distance between distinct digits.
    pub fn extremes(&self) -> Result<(f64, f64)> {
        let n = self.len();
        if n < 2 {
            return Err(Error::domain("a digit set needs at least two digits"));
        }
        let mut kappa = 0.0f64;
        let mut tau = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let d = distance(self.point(i), self.point(j));
                kappa = kappa.max(d);
                tau = tau.min(d);
            }
        }
        Ok((kappa, tau))
    }

    fn rotated(&self, matrix: &[f64]) -> DigitSet {
        let p = self.p;
        let mut coords = vec![0.0; self.coords.len()];
        for (src, dst) in self.coords.chunks_exact(p).zip(coords.chunks_exact_mut(p)) {
            for r in 0..p {
                dst[r] = (0..p).map(|c| matrix[r * p + c] * src[c]).sum();
            }
        }
        DigitSet { p, coords }
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

type LevelFn = dyn Fn(usize) -> Vec<Vec<f64>> + Send + Sync;

/// How the digit set varies with the level.
#[derive(Clone)]
pub enum DigitRule {
    /// The same digits at every level.
    Constant(DigitSet),
    /// Corners of the unit cube in `R^p`.
    Cube(DigitSet),
    /// Levels `1..=K` listed; past `K` the levels from `period_start` on repeat.
    Periodic {
        levels: Vec<DigitSet>,
        period_start: usize,
    },
    /// `D^n = O^n D` for an orthogonal `p x p` matrix `O` (row-major).
    Rotating { base: DigitSet, rotation: Vec<f64> },
    /// Arbitrary level callback; bounds hold only up to the certification horizon.
    Callback { f: Arc<LevelFn>, horizon: usize },
    /// Level `i` uses level `index_map[i - 1]` of `base` (offset continuation past the map).
    Reindexed {
        base: Arc<DigitSystem>,
        index_map: Arc<[usize]>,
    },
}

impl fmt::Debug for DigitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DigitRule::Constant(d) => f.debug_tuple("Constant").field(d).finish(),
            DigitRule::Cube(d) => write!(f, "Cube(p = {})", d.dim()),
            DigitRule::Periodic {
                levels,
                period_start,
            } => f
                .debug_struct("Periodic")
                .field("levels", &levels.len())
                .field("period_start", period_start)
                .finish(),
            DigitRule::Rotating { base, .. } => {
                f.debug_struct("Rotating").field("base", base).finish()
            }
            DigitRule::Callback { horizon, .. } => f
                .debug_struct("Callback")
                .field("horizon", horizon)
                .finish(),
            DigitRule::Reindexed { index_map, .. } => f
                .debug_struct("Reindexed")
                .field("mapped_levels", &index_map.len())
                .finish(),
        }
    }
}

/// How trustworthy the reported `kappa`, `tau` are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "horizon")]
pub enum Certification {
    /// True supremum/infimum over all levels.
    Exact,
    /// Extremes over levels `1..=horizon` only.
    Horizon(usize),
}

/// Validated digit system with cached `kappa = sup kappa_n` and `tau = inf tau_n`.
#[derive(Debug, Clone)]
pub struct DigitSystem {
    p: usize,
    n_digits: usize,
    rule: DigitRule,
    kappa: f64,
    tau: f64,
    certification: Certification,
    notes: Vec<String>,
}

impl DigitSystem {
    pub fn constant(points: &[Vec<f64>]) -> Result<Self> {
        let (set, how) = DigitSet::new(points)?.normalized();
        let mut notes = Vec::new();
        note_normalization(&mut notes, None, how);
        let (kappa, tau) = set.extremes()?;
        Ok(DigitSystem {
            p: set.dim(),
            n_digits: set.len(),
            rule: DigitRule::Constant(set),
            kappa,
            tau,
            certification: Certification::Exact,
            notes,
        })
    }

    pub fn cube(p: usize) -> Result<Self> {
        let set = DigitSet::cube(p)?;
        Ok(DigitSystem {
            p,
            n_digits: set.len(),
            rule: DigitRule::Cube(set),
            kappa: (p as f64).sqrt(),
            tau: 1.0,
            certification: Certification::Exact,
            notes: Vec::new(),
        })
    }

    /// `levels[k]` is `D^{k+1}`; levels past the list cycle through `levels[period_start - 1..]`.
    pub fn periodic(levels: Vec<Vec<Vec<f64>>>, period_start: usize) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::validation(
                "per-level digits need at least one level",
            ));
        }
        if period_start == 0 || period_start > levels.len() {
            return Err(Error::validation(format!(
                "period_start must be in 1..={}, got {period_start}",
                levels.len()
            )));
        }
        let mut notes = Vec::new();
        let mut sets = Vec::with_capacity(levels.len());
        for (k, pts) in levels.iter().enumerate() {
            let (set, how) = DigitSet::new(pts)?.normalized();
            note_normalization(&mut notes, Some(k + 1), how);
            sets.push(set);
        }
        let (p, n) = (sets[0].dim(), sets[0].len());
        check_shape(&sets, p, n)?;
        let (kappa, tau) = fold_extremes(sets.iter())?;
        Ok(DigitSystem {
            p,
            n_digits: n,
            rule: DigitRule::Periodic {
                levels: sets,
                period_start,
            },
            kappa,
            tau,
            certification: Certification::Exact,
            notes,
        })
    }

    /// `D^n = O^n D`; distances are invariant so `kappa`, `tau` are those of `D`.
    pub fn rotating(points: &[Vec<f64>], rotation: &[Vec<f64>]) -> Result<Self> {
        let (base, how) = DigitSet::new(points)?.normalized();
        let p = base.dim();
        if rotation.len() != p || rotation.iter().any(|r| r.len() != p) {
            return Err(Error::validation(format!(
                "rotation must be a {p}x{p} matrix"
            )));
        }
        let flat: Vec<f64> = rotation.concat();
        for i in 0..p {
            for j in 0..p {
                let dot: f64 = (0..p).map(|k| flat[k * p + i] * flat[k * p + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-12 {
                    return Err(Error::validation("rotation matrix is not orthogonal"));
                }
            }
        }
        let mut notes = Vec::new();
        note_normalization(&mut notes, None, how);
        let (kappa, tau) = base.extremes()?;
        Ok(DigitSystem {
            p,
            n_digits: base.len(),
            rule: DigitRule::Rotating {
                base,
                rotation: flat,
            },
            kappa,
            tau,
            certification: Certification::Exact,
            notes,
        })
    }

    /// Arbitrary per-level rule, scanned over `1..=horizon` for `kappa` and `tau`.
    pub fn callback<F>(f: F, horizon: usize) -> Result<Self>
    where
        F: Fn(usize) -> Vec<Vec<f64>> + Send + Sync + 'static,
    {
        if horizon == 0 {
            return Err(Error::domain("certification horizon must be at least 1"));
        }
        let f: Arc<LevelFn> = Arc::new(f);
        let mut notes = Vec::new();
        let mut sets = Vec::with_capacity(horizon);
        for n in 1..=horizon {
            let (set, how) = DigitSet::new(&f(n))?.normalized();
            note_normalization(&mut notes, Some(n), how);
            sets.push(set);
        }
        let (p, n_digits) = (sets[0].dim(), sets[0].len());
        check_shape(&sets, p, n_digits)?;
        let (kappa, tau) = fold_extremes(sets.iter())?;
        notes.push(format!(
            "kappa and tau certified over levels 1..={horizon} only"
        ));
        Ok(DigitSystem {
            p,
            n_digits,
            rule: DigitRule::Callback { f, horizon },
            kappa,
            tau,
            certification: Certification::Horizon(horizon),
            notes,
        })
    }

    /// Digits for a thinned sequence: level `i` takes `D^{index_map[i-1]}`.
    ///
    /// Level-independent systems are returned unchanged. Otherwise `kappa` and
    /// `tau` are inherited from `base`, which bound the subfamily's extremes.
    pub fn reindexed(base: &DigitSystem, index_map: Arc<[usize]>) -> DigitSystem {
        if base.is_level_independent() {
            return base.clone();
        }
        let mut notes = base.notes.clone();
        notes.push("levels re-indexed along a thinning plan; kappa/tau inherited".into());
        DigitSystem {
            p: base.p,
            n_digits: base.n_digits,
            rule: DigitRule::Reindexed {
                base: Arc::new(base.clone()),
                index_map,
            },
            kappa: base.kappa,
            tau: base.tau,
            certification: base.certification,
            notes,
        }
    }

    pub fn is_level_independent(&self) -> bool {
        matches!(self.rule, DigitRule::Constant(_) | DigitRule::Cube(_))
            || matches!(&self.rule, DigitRule::Periodic { levels, .. } if levels.len() == 1)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// `N`, the number of digits per level.
    pub fn len(&self) -> usize {
        self.n_digits
    }

    pub fn is_empty(&self) -> bool {
        self.n_digits == 0
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn certification(&self) -> Certification {
        self.certification
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn rule(&self) -> &DigitRule {
        &self.rule
    }

    pub fn is_cube(&self) -> bool {
        matches!(self.rule, DigitRule::Cube(_))
    }

    pub fn kind(&self) -> &'static str {
        match self.rule {
            DigitRule::Constant(_) => "constant",
            DigitRule::Cube(_) => "cube",
            _ => "per-level",
        }
    }

    /// `D^n` for `n >= 1`.
    pub fn level(&self, n: usize) -> Result<Cow<'_, DigitSet>> {
        if n == 0 {
            return Err(Error::domain("digit levels start at 1"));
        }
        Ok(match &self.rule {
            DigitRule::Constant(d) | DigitRule::Cube(d) => Cow::Borrowed(d),
            DigitRule::Periodic {
                levels,
                period_start,
            } => {
                let k = levels.len();
                if n <= k {
                    Cow::Borrowed(&levels[n - 1])
                } else {
                    let start = period_start - 1;
                    let period = k - start;
                    Cow::Borrowed(&levels[start + (n - 1 - start) % period])
                }
            }
            DigitRule::Rotating { base, rotation } => {
                Cow::Owned(base.rotated(&matrix_power(rotation, self.p, n)))
            }
            DigitRule::Callback { f, .. } => {
                let (set, _) = DigitSet::new(&f(n))?.normalized();
                if set.len() != self.n_digits || set.dim() != self.p {
                    return Err(Error::validation(format!(
                        "level {n} has {} digits in R^{}, expected {} in R^{}",
                        set.len(),
                        set.dim(),
                        self.n_digits,
                        self.p
                    )));
                }
                Cow::Owned(set)
            }
            DigitRule::Reindexed { base, index_map } => {
                let h = index_map.len();
                let original = if n <= h {
                    index_map[n - 1]
                } else {
                    index_map.iter().copied().max().unwrap_or(0) + (n - h)
                };
                Cow::Owned(base.level(original)?.into_owned())
            }
        })
    }

    /// Digit sets for levels `1..=depth`.
    pub fn levels(&self, depth: usize) -> Result<Vec<DigitSet>> {
        (1..=depth)
            .map(|n| Ok(self.level(n)?.into_owned()))
            .collect()
    }

    /// `(kappa_n, tau_n)` of level `n`.
    pub fn extremes(&self, n: usize) -> Result<(f64, f64)> {
        match &self.rule {
            DigitRule::Cube(_) => Ok((self.kappa, self.tau)),
            _ => self.level(n)?.extremes(),
        }
    }
}

fn note_normalization(notes: &mut Vec<String>, level: Option<usize>, how: Normalization) {
    let at = level.map(|n| format!(" at level {n}")).unwrap_or_default();
    match how {
        Normalization::Unchanged => {}
        Normalization::Reordered => notes.push(format!("origin moved to first digit{at}")),
        Normalization::Translated => notes.push(format!(
            "digits translated so the first digit is the origin{at}"
        )),
    }
}

fn check_shape(sets: &[DigitSet], p: usize, n: usize) -> Result<()> {
    for (k, s) in sets.iter().enumerate() {
        if s.dim() != p || s.len() != n {
            return Err(Error::validation(format!(
                "level {} has {} digits in R^{}, expected {n} in R^{p}",
                k + 1,
                s.len(),
                s.dim()
            )));
        }
    }
    if n < 2 {
        return Err(Error::validation("each level needs at least two digits"));
    }
    Ok(())
}

fn fold_extremes<'a>(sets: impl Iterator<Item = &'a DigitSet>) -> Result<(f64, f64)> {
    let mut kappa = 0.0f64;
    let mut tau = f64::INFINITY;
    for s in sets {
        let (k, t) = s.extremes()?;
        kappa = kappa.max(k);
        tau = tau.min(t);
    }
    Ok((kappa, tau))
}

fn matrix_power(m: &[f64], p: usize, mut e: usize) -> Vec<f64> {
    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = (0..p).map(|k| a[i * p + k] * b[k * p + j]).sum();
            }
        }
        out
    };
    let mut result: Vec<f64> = (0..p * p)
        .map(|i| if i / p == i % p { 1.0 } else { 0.0 })
        .collect();
    let mut base = m.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            result = mul(&result, &base);
        }
        base = mul(&base, &base);
        e >>= 1;
    }
    result
}

//! Symbol words, cylinder anchors, level enumeration and natural-measure sampling.
//!
//! Anchors are accumulated left to right, `((s_1 d_1 + s_2 d_2) + ...)`, by
//! every routine here, so a word's anchor is bit-identical whether it comes
//! from [`phi_partial`], [`generate_level`], [`level_anchors`] or sampling.

use std::borrow::Borrow;
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::fmt17;
use crate::logspace::SignedLog;
use crate::seqcore::{DigitSet, SumSetSpec};

/// Default cap on the number of anchors a single enumeration may produce.
pub const DEFAULT_BUDGET: u64 = 1 << 24;

/// Samples per independently seeded RNG stream.
const SAMPLE_CHUNK: usize = 4096;

/// A finite word over `{1..N}`; its length is the level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolWord {
    letters: Vec<u32>,
}

impl SymbolWord {
    pub fn new(letters: Vec<u32>, n_digits: usize) -> Result<Self> {
        if let Some(bad) = letters.iter().find(|&&l| l == 0 || l as usize > n_digits) {
            return Err(Error::domain(format!(
                "letter {bad} outside 1..={n_digits}"
            )));
        }
        Ok(SymbolWord { letters })
    }

    pub fn empty() -> Self {
        SymbolWord {
            letters: Vec::new(),
        }
    }

    pub fn level(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[u32] {
        &self.letters
    }

    pub fn starts_with(&self, prefix: &SymbolWord) -> bool {
        self.letters.starts_with(&prefix.letters)
    }

    /// The word `w1` extended by one letter.
    pub fn extended(&self, letter: u32) -> SymbolWord {
        let mut letters = self.letters.clone();
        letters.push(letter);
        SymbolWord { letters }
    }

    /// Word at lexicographic position `index` among all `N^level` words.
    pub fn from_index(mut index: u64, level: usize, n_digits: usize) -> SymbolWord {
        let mut letters = vec![0u32; level];
        for slot in letters.iter_mut().rev() {
            *slot = (index % n_digits as u64) as u32 + 1;
            index /= n_digits as u64;
        }
        SymbolWord { letters }
    }

    /// Digit string for `N <= 9` (`"121"`), dot-separated letters otherwise (`"1.12.3"`).
    pub fn encode(&self, n_digits: usize) -> String {
        let parts: Vec<String> = self.letters.iter().map(u32::to_string).collect();
        if n_digits <= 9 {
            parts.concat()
        } else {
            parts.join(".")
        }
    }
}

impl fmt::Display for SymbolWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.letters.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `C_{sigma,n}` described by its anchor `x_sigma` and the diameter bound `kappa R_n`.
#[derive(Debug, Clone)]
pub struct Cylinder {
    pub word: SymbolWord,
    pub anchor: Vec<f64>,
    pub diameter_bound: f64,
}

/// Precomputed `s_i` and `D^i` for levels `1..=depth`.
struct LevelTable {
    p: usize,
    n_digits: usize,
    terms: Vec<f64>,
    digits: Vec<DigitSet>,
}

impl LevelTable {
    fn new(spec: &SumSetSpec, depth: usize) -> Result<Self> {
        let terms = (1..=depth)
            .map(|i| spec.sequence().term(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(LevelTable {
            p: spec.dim(),
            n_digits: spec.n_digits(),
            terms,
            digits: spec.digits().levels(depth)?,
        })
    }

    /// `acc += s_level * d^level_letter`, `level` 1-based.
    #[inline]
    fn add_term(&self, acc: &mut [f64], level: usize, letter: u32) {
        let s = self.terms[level - 1];
        let d = self.digits[level - 1].point(letter as usize - 1);
        for (a, x) in acc.iter_mut().zip(d) {
            *a += s * x;
        }
    }

    fn anchor(&self, letters: &[u32]) -> Vec<f64> {
        let mut acc = vec![0.0; self.p];
        for (i, &l) in letters.iter().enumerate() {
            self.add_term(&mut acc, i + 1, l);
        }
        acc
    }
}

/// `x_sigma = sum_{i <= n} s_i d^i_{sigma_i}`.
pub fn phi_partial(spec: &SumSetSpec, word: &SymbolWord) -> Result<Vec<f64>> {
    let n = spec.n_digits();
    if let Some(bad) = word.letters.iter().find(|&&l| l == 0 || l as usize > n) {
        return Err(Error::domain(format!("letter {bad} outside 1..={n}")));
    }
    Ok(LevelTable::new(spec, word.level())?.anchor(&word.letters))
}

pub fn cylinder(spec: &SumSetSpec, word: SymbolWord) -> Result<Cylinder> {
    let anchor = phi_partial(spec, &word)?;
    let diameter_bound = uniform_tail_bound(spec, word.level());
    Ok(Cylinder {
        word,
        anchor,
        diameter_bound,
    })
}

fn level_count(n_digits: usize, level: usize, budget: u64) -> Result<u64> {
    let required = (n_digits as u128)
        .checked_pow(level as u32)
        .unwrap_or(u128::MAX);
    if required > budget as u128 {
        return Err(Error::Resource {
            what: format!("enumerating level {level} ({n_digits}^{level} anchors)"),
            required,
            budget: budget as u128,
        });
    }
    Ok(required as u64)
}

/// Streams `(word, anchor)` for all `N^L` words in lexicographic order.
pub fn generate_level(spec: &SumSetSpec, level: usize, budget: u64) -> Result<LevelIter> {
    let total = level_count(spec.n_digits(), level, budget)?;
    let table = LevelTable::new(spec, level)?;
    let p = table.p;
    Ok(LevelIter {
        table,
        letters: vec![1; level],
        partial: vec![0.0; p * (level + 1)],
        valid_from: 0,
        emitted: 0,
        total,
    })
}

/// Odometer over words with per-depth partial sums; only the changed suffix is recomputed.
pub struct LevelIter {
    table: LevelTable,
    letters: Vec<u32>,
    /// `partial[k*p..(k+1)*p]` holds the anchor of the first `k` letters.
    partial: Vec<f64>,
    /// Partial sums at depth `> valid_from` need recomputing.
    valid_from: usize,
    emitted: u64,
    total: u64,
}

impl LevelIter {
    /// Words not yet emitted.
    pub fn remaining(&self) -> u64 {
        self.total - self.emitted
    }
}

impl Iterator for LevelIter {
    type Item = (SymbolWord, Vec<f64>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.emitted == self.total {
            return None;
        }
        let p = self.table.p;
        let level = self.letters.len();
        for k in self.valid_from..level {
            let (head, tail) = self.partial.split_at_mut((k + 1) * p);
            let dst = &mut tail[..p];
            dst.copy_from_slice(&head[k * p..]);
            self.table.add_term(dst, k + 1, self.letters[k]);
        }
        let item = (
            SymbolWord {
                letters: self.letters.clone(),
            },
            self.partial[level * p..].to_vec(),
        );
        self.emitted += 1;
        // Advance the odometer.
        let n = self.table.n_digits as u32;
        let mut k = level;
        while k > 0 {
            k -= 1;
            if self.letters[k] < n {
                self.letters[k] += 1;
                self.valid_from = k;
                break;
            }
            self.letters[k] = 1;
        }
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total - self.emitted) as usize;
        (left, Some(left))
    }
}

/// All level-`L` anchors, flat and in lexicographic word order.
#[derive(Debug, Clone)]
pub struct LevelAnchors {
    pub level: usize,
    pub p: usize,
    pub n_digits: usize,
    pub coords: Vec<f64>,
}

impl LevelAnchors {
    pub fn len(&self) -> usize {
        self.coords.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn anchor(&self, index: usize) -> &[f64] {
        &self.coords[index * self.p..(index + 1) * self.p]
    }

    pub fn word(&self, index: usize) -> SymbolWord {
        SymbolWord::from_index(index as u64, self.level, self.n_digits)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.p)
    }
}

/// Materializes a level in parallel, split by word prefix; output order is lexicographic.
pub fn level_anchors(spec: &SumSetSpec, level: usize, budget: u64) -> Result<LevelAnchors> {
    let total = level_count(spec.n_digits(), level, budget)? as usize;
    let table = LevelTable::new(spec, level)?;
    let (p, n) = (table.p, table.n_digits);
    let mut coords = vec![0.0; total * p];

    // Prefix depth giving a few hundred independent blocks.
    let mut depth = 0;
    let mut blocks = 1usize;
    while depth < level && blocks < 256 {
        depth += 1;
        blocks *= n;
    }
    let block_len = total / blocks;
    coords
        .par_chunks_mut(block_len * p)
        .enumerate()
        .for_each(|(b, out)| {
            let prefix = SymbolWord::from_index(b as u64, depth, n);
            fill_block(&table, &prefix.letters, level, out);
        });
    Ok(LevelAnchors {
        level,
        p,
        n_digits: n,
        coords,
    })
}

/// Writes anchors of every completion of `prefix` to `out`, depth-first.
fn fill_block(table: &LevelTable, prefix: &[u32], level: usize, out: &mut [f64]) {
    let p = table.p;
    let start = table.anchor(prefix);
    let depth = prefix.len();
    if depth == level {
        out[..p].copy_from_slice(&start);
        return;
    }
    let mut partial = vec![0.0; p * (level + 1)];
    partial[depth * p..(depth + 1) * p].copy_from_slice(&start);
    let mut letters = vec![1u32; level];
    letters[..depth].copy_from_slice(prefix);
    let mut valid_from = depth;
    let n = table.n_digits as u32;
    for chunk in out.chunks_exact_mut(p) {
        for k in valid_from..level {
            let (head, tail) = partial.split_at_mut((k + 1) * p);
            let dst = &mut tail[..p];
            dst.copy_from_slice(&head[k * p..]);
            table.add_term(dst, k + 1, letters[k]);
        }
        chunk.copy_from_slice(&partial[level * p..]);
        let mut k = level;
        while k > depth {
            k -= 1;
            if letters[k] < n {
                letters[k] += 1;
                valid_from = k;
                break;
            }
            letters[k] = 1;
        }
    }
}

/// Lower bound `s_n tau - kappa R_n` on the distance between points whose words first differ at `n`.
pub fn separation_lower_bound(spec: &SumSetSpec, n: usize) -> Result<SignedLog> {
    let log_s = spec.sequence().log_term(n)?;
    Ok(SignedLog::difference(
        log_s + spec.tau().ln(),
        spec.log_kappa_tail(n),
    ))
}

/// `kappa R_L`: distance from a level-`L` anchor to any point of its cylinder.
pub fn uniform_tail_bound(spec: &SumSetSpec, level: usize) -> f64 {
    spec.log_kappa_tail(level).exp()
}

/// One draw from the natural measure, truncated at the sampling level.
#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    #[serde(skip)]
    pub word: SymbolWord,
    pub point: Vec<f64>,
}

/// Draws `count` words with i.i.d. uniform letters and returns their level-`L` anchors.
///
/// Sample `k` comes from stream `k / 4096` of a ChaCha8 generator seeded by
/// `seed`, so output is independent of the worker count. Each point sits
/// within `kappa R_L` of the true random point.
pub fn sample_natural_measure(
    spec: &SumSetSpec,
    level: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Sample>> {
    if count == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let table = LevelTable::new(spec, level)?;
    let n = table.n_digits as u32;
    let chunks = count.div_ceil(SAMPLE_CHUNK);
    let out: Vec<Vec<Sample>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = SAMPLE_CHUNK.min(count - c * SAMPLE_CHUNK);
            (0..len)
                .map(|_| {
                    let letters: Vec<u32> = (0..level).map(|_| rng.gen_range(1..=n)).collect();
                    let point = table.anchor(&letters);
                    Sample {
                        word: SymbolWord { letters },
                        point,
                    }
                })
                .collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// CSV with header `word,x1,...,xp`; LF line endings, 17 significant digits.
pub fn write_points_csv<W, I, S, X>(mut w: W, p: usize, n_digits: usize, rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (S, X)>,
    S: Borrow<SymbolWord>,
    X: AsRef<[f64]>,
{
    let header: Vec<String> = std::iter::once("word".to_string())
        .chain((1..=p).map(|i| format!("x{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (word, x) in rows {
        let mut line = word.borrow().encode(n_digits);
        for v in x.as_ref() {
            line.push(',');
            line.push_str(&fmt17(*v));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// JSON lines `{"word":"12","x":[...]}`, one per point.
pub fn write_points_jsonl<W, I, S, X>(mut w: W, n_digits: usize, rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (S, X)>,
    S: Borrow<SymbolWord>,
    X: AsRef<[f64]>,
{
    for (word, x) in rows {
        let coords: Vec<String> = x.as_ref().iter().map(|v| fmt17(*v)).collect();
        writeln!(
            w,
            "{{\"word\":\"{}\",\"x\":[{}]}}",
            word.borrow().encode(n_digits),
            coords.join(",")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::{DigitSystem, SeparationMode, SequenceSpec};

    fn word(letters: &[u32]) -> SymbolWord {
        SymbolWord::new(letters.to_vec(), 2).unwrap()
    }

    #[test]
    fn cantor_anchors() {
        let spec = SumSetSpec::cantor();
        assert_eq!(phi_partial(&spec, &word(&[1, 1, 1])).unwrap(), vec![0.0]);
        assert!((phi_partial(&spec, &word(&[2])).unwrap()[0] - 2.0 / 3.0).abs() < 1e-16);
        for len in [1usize, 5, 20, 35] {
            let x = phi_partial(&spec, &word(&vec![2; len])).unwrap()[0];
            let expected = 1.0 - 3f64.powi(-(len as i32));
            assert!((x - expected).abs() < 1e-15, "L = {len}");
        }
    }

    #[test]
    fn letter_out_of_range() {
        assert!(SymbolWord::new(vec![3], 2).is_err());
        let bad = SymbolWord { letters: vec![0] };
        assert!(matches!(
            phi_partial(&SumSetSpec::cantor(), &bad),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn cantor_level_two() {
        let spec = SumSetSpec::cantor();
        let got: Vec<f64> = generate_level(&spec, 2, DEFAULT_BUDGET)
            .unwrap()
            .map(|(_, x)| x[0])
            .collect();
        let expected = [0.0, 2.0 / 9.0, 2.0 / 3.0, 8.0 / 9.0];
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
        let words: Vec<String> = generate_level(&spec, 1, 10)
            .unwrap()
            .map(|(w, _)| w.encode(2))
            .collect();
        assert_eq!(words, vec!["1", "2"]);
    }

    #[test]
    fn level_zero_single_empty_word() {
        let spec = SumSetSpec::cantor();
        let all: Vec<_> = generate_level(&spec, 0, 1).unwrap().collect();
        assert_eq!(all, vec![(SymbolWord::empty(), vec![0.0])]);
        let flat = level_anchors(&spec, 0, 1).unwrap();
        assert_eq!(flat.coords, vec![0.0]);
    }

    #[test]
    fn budget_exceeded_names_requirement() {
        let err = generate_level(&SumSetSpec::cantor(), 30, DEFAULT_BUDGET)
            .err()
            .unwrap();
        match err {
            Error::Resource { required, .. } => assert_eq!(required, 1 << 30),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parallel_matches_stream_bitwise() {
        let spec = SumSetSpec::new(
            SequenceSpec::geometric(1.0, 0.2).unwrap(),
            DigitSystem::constant(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.2, 0.9]]).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap();
        let flat = level_anchors(&spec, 7, DEFAULT_BUDGET).unwrap();
        let stream: Vec<(SymbolWord, Vec<f64>)> =
            generate_level(&spec, 7, DEFAULT_BUDGET).unwrap().collect();
        assert_eq!(flat.len(), stream.len());
        for (i, (w, x)) in stream.iter().enumerate() {
            assert_eq!(flat.anchor(i), &x[..]);
            assert_eq!(&flat.word(i), w);
            assert_eq!(&phi_partial(&spec, w).unwrap(), x);
        }
    }

    #[test]
    fn refinement_by_letter_one() {
        let spec = SumSetSpec::cantor();
        let w = word(&[2, 1, 2]);
        assert_eq!(
            phi_partial(&spec, &w).unwrap(),
            phi_partial(&spec, &w.extended(1)).unwrap()
        );
    }

    #[test]
    fn cantor_gap_bounds() {
        let spec = SumSetSpec::cantor();
        assert!((separation_lower_bound(&spec, 1).unwrap().value() - 1.0 / 3.0).abs() < 1e-15);
        assert!((separation_lower_bound(&spec, 2).unwrap().value() - 1.0 / 9.0).abs() < 1e-15);
        for n in [1usize, 10, 500, 5000] {
            assert!(separation_lower_bound(&spec, n).unwrap().is_positive());
        }
    }

    #[test]
    fn tail_bounds() {
        let spec = SumSetSpec::cantor();
        assert!((uniform_tail_bound(&spec, 3) - 1.0 / 27.0).abs() < 1e-16);
        assert!((uniform_tail_bound(&spec, 0) - 1.0).abs() < 1e-15);
        let cube = SumSetSpec::new(
            SequenceSpec::geometric(1.0, 0.2).unwrap(),
            DigitSystem::cube(2).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap();
        for l in 0..5 {
            let r = cube.sequence().log_tail(l).exp();
            assert!((uniform_tail_bound(&cube, l) - 2f64.sqrt() * r).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let spec = SumSetSpec::cantor();
        let a = sample_natural_measure(&spec, 10, 1, 7).unwrap();
        let b = sample_natural_measure(&spec, 10, 1, 7).unwrap();
        assert_eq!(a[0].point, b[0].point);
        assert_eq!(a[0].word, b[0].word);
        assert!(sample_natural_measure(&spec, 3, 0, 7).is_err());
    }

    #[test]
    fn first_level_mass_is_half() {
        let spec = SumSetSpec::cantor();
        let n = 100_000;
        let s = sample_natural_measure(&spec, 8, n, 42).unwrap();
        let ones = s.iter().filter(|x| x.word.letters()[0] == 1).count() as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((ones / n as f64 - 0.5).abs() < 3.0 * sigma);
        // Letter 1 at level 1 means the point lies in [0, 1/3].
        for x in &s {
            assert_eq!(x.word.letters()[0] == 1, x.point[0] <= 1.0 / 3.0);
        }
    }

    #[test]
    fn csv_and_jsonl_layout() {
        let spec = SumSetSpec::cantor();
        let rows: Vec<(SymbolWord, Vec<f64>)> = generate_level(&spec, 1, 10).unwrap().collect();
        let mut csv = Vec::new();
        write_points_csv(&mut csv, 1, 2, rows.iter().map(|(w, x)| (w, &x[..]))).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "word,x1\n1,0.0000000000000000e0\n2,6.6666666666666663e-1\n"
        );
        let mut jl = Vec::new();
        write_points_jsonl(&mut jl, 2, rows.iter().map(|(w, x)| (w, &x[..]))).unwrap();
        assert_eq!(
            String::from_utf8(jl).unwrap(),
            "{\"word\":\"1\",\"x\":[0.0000000000000000e0]}\n{\"word\":\"2\",\"x\":[6.6666666666666663e-1]}\n"
        );
    }

    #[test]
    fn long_alphabet_encoding() {
        let w = SymbolWord::new(vec![1, 12, 3], 16).unwrap();
        assert_eq!(w.encode(16), "1.12.3");
        assert_eq!(SymbolWord::from_index(5, 3, 2).letters(), &[2, 1, 2]);
    }
}

//! Box-counting oracle on level-`L` anchor sets.
//!
//! The grid is axis-aligned and anchored at the origin. Cell indices are
//! `floor(x / eps)` with values within `1e-9` relative (capped at `1e-6`) of an integer snapped to
//! it, so anchors that sit on a cell boundary up to rounding land in the cell
//! that starts there.

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dimension::{dims_exact, ls_slope};
use crate::error::{Error, Result};
use crate::export::fmt17;
use crate::geometry::{level_anchors, DEFAULT_BUDGET};
use crate::real::{snap_floor, snap_floor_f64};
use crate::seqcore::SumSetSpec;

pub const DEFAULT_SAFETY: f64 = 3.0;

/// Cell indices stay exact integers in `f64` below this magnitude.
const MAX_CELL: f64 = (1u64 << 52) as f64;

fn cell_of(point: &[f64], eps: f64) -> Vec<i128> {
    point.iter().map(|&x| snap_floor(x / eps)).collect()
}

/// Per-axis offsets and bit shifts packing a cell into one integer key.
struct Packing {
    min: Vec<f64>,
    shift: Vec<u32>,
    bits: u32,
}

fn packing(coords: &[f64], p: usize, eps: f64) -> Option<Packing> {
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for pt in coords.chunks_exact(p) {
        for (k, &x) in pt.iter().enumerate() {
            let c = snap_floor_f64(x / eps);
            lo[k] = lo[k].min(c);
            hi[k] = hi[k].max(c);
        }
    }
    let mut shift = Vec::with_capacity(p);
    let mut bits = 0u32;
    for k in 0..p {
        if !(lo[k].abs() <= MAX_CELL && hi[k].abs() <= MAX_CELL) {
            return None;
        }
        shift.push(bits);
        bits += 64 - ((hi[k] - lo[k]) as u64).leading_zeros();
    }
    Some(Packing {
        min: lo,
        shift,
        bits,
    })
}

impl Packing {
    #[inline]
    fn key(&self, pt: &[f64], eps: f64) -> u128 {
        let mut key = 0u128;
        for (k, &x) in pt.iter().enumerate() {
            let c = (snap_floor_f64(x / eps) - self.min[k]) as u64;
            key |= (c as u128) << self.shift[k];
        }
        key
    }

    #[inline]
    fn key64(&self, pt: &[f64], eps: f64) -> u64 {
        let mut key = 0u64;
        for (k, &x) in pt.iter().enumerate() {
            let c = (snap_floor_f64(x / eps) - self.min[k]) as u64;
            key |= c << self.shift[k];
        }
        key
    }
}

fn distinct<K: Ord + Send>(mut keys: Vec<K>) -> usize {
    // Anchors arrive in word order, so neighbours often share a cell.
    keys.dedup();
    keys.par_sort_unstable();
    keys.dedup();
    keys.len()
}

/// Number of grid cells of side `eps` that contain at least one of the points.
///
/// `coords` holds the points flat, `p` coordinates each.
pub fn count_boxes(coords: &[f64], p: usize, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!(
            "box side must be positive and finite, got {eps}"
        )));
    }
    if p == 0 || coords.is_empty() || !coords.len().is_multiple_of(p) {
        return Err(Error::domain("box counting needs a nonempty point set"));
    }
    Ok(match packing(coords, p, eps) {
        Some(pk) if pk.bits <= 64 => distinct(
            coords
                .par_chunks_exact(p)
                .map(|pt| pk.key64(pt, eps))
                .collect(),
        ),
        Some(pk) if pk.bits <= 128 => distinct(
            coords
                .par_chunks_exact(p)
                .map(|pt| pk.key(pt, eps))
                .collect(),
        ),
        _ => coords
            .chunks_exact(p)
            .map(|pt| cell_of(pt, eps))
            .collect::<HashSet<_>>()
            .len(),
    })
}

/// Box sides used by [`estimate_dimension`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    pub epsilons: Vec<f64>,
}

impl BoxGrid {
    /// `base^-k` for `k` in `k_range`.
    pub fn powers(base: f64, k_range: std::ops::RangeInclusive<i32>) -> Result<Self> {
        if !(base > 1.0) {
            return Err(Error::domain(format!(
                "grid base must exceed 1, got {base}"
            )));
        }
        Ok(BoxGrid {
            epsilons: k_range.map(|k| base.powi(-k)).collect(),
        })
    }

    /// `count` log-uniform sides from `kappa R_0 / 2` down to the validity floor.
    pub fn auto(spec: &SumSetSpec, level: usize, safety: f64, count: usize) -> Result<Self> {
        let hi = spec.log_kappa_tail(0) - std::f64::consts::LN_2;
        let lo = safety.ln() + spec.log_kappa_tail(level);
        if count < 2 || lo >= hi {
            return Err(Error::domain(format!(
                "no room for a grid at level {level}: validity floor {} is above kappa R_0 / 2 = {}",
                lo.exp(),
                hi.exp()
            )));
        }
        // The last side is the floor itself, computed the way the estimator checks it.
        let floor = safety * spec.log_kappa_tail(level).exp();
        Ok(BoxGrid {
            epsilons: (0..count)
                .map(|k| {
                    (hi + (lo - hi) * k as f64 / (count - 1) as f64)
                        .exp()
                        .max(floor)
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxCountRun {
    pub level: usize,
    pub points: usize,
    pub safety: f64,
    /// `safety * kappa R_L`; every grid side must be at least this.
    pub validity_floor: f64,
    pub epsilons: Vec<f64>,
    pub counts: Vec<usize>,
    /// Least-squares slope of `ln count` against `ln(1/eps)`.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    /// Counts never increase as `eps` grows.
    pub monotone: bool,
    pub formula_dim: Option<f64>,
    pub formula_certified: bool,
    pub difference: Option<f64>,
}

impl BoxCountRun {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"epsilon,count\n")?;
        for (e, c) in self.epsilons.iter().zip(&self.counts) {
            writeln!(w, "{},{}", fmt17(*e), c)?;
        }
        Ok(())
    }
}

/// Box-counting slope of the level-`level` anchors over `grid`.
pub fn estimate_dimension(
    spec: &SumSetSpec,
    level: usize,
    grid: &BoxGrid,
    safety: f64,
    budget: Option<u64>,
) -> Result<BoxCountRun> {
    if grid.epsilons.len() < 2 {
        return Err(Error::domain("a slope fit needs at least two box sides"));
    }
    if !(safety >= 1.0) {
        return Err(Error::domain(format!(
            "safety factor must be >= 1, got {safety}"
        )));
    }
    let floor = safety * spec.log_kappa_tail(level).exp();
    if let Some(&bad) = grid.epsilons.iter().find(|&&e| !(e >= floor)) {
        return Err(Error::domain(format!(
            "box side {bad} is below the validity floor eps >= {safety} * kappa R_{level} = {floor}"
        )));
    }
    let anchors = level_anchors(spec, level, budget.unwrap_or(DEFAULT_BUDGET))?;
    let counts: Vec<usize> = grid
        .epsilons
        .iter()
        .map(|&e| count_boxes(&anchors.coords, anchors.p, e))
        .collect::<Result<_>>()?;

    let xs: Vec<f64> = grid.epsilons.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let slope = ls_slope(&xs, &ys);
    let slope = if slope.is_finite() { slope } else { 0.0 };
    let n = xs.len() as f64;
    let intercept = ys.iter().sum::<f64>() / n - slope * xs.iter().sum::<f64>() / n;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();

    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| grid.epsilons[a].total_cmp(&grid.epsilons[b]));
    let monotone = order.windows(2).all(|w| counts[w[0]] >= counts[w[1]]);

    let (formula_dim, formula_certified) = match dims_exact(spec, 1000) {
        Ok(r) if r.dim_h == r.dim_p => (Some(r.dim_h), r.certified),
        _ => (None, false),
    };
    Ok(BoxCountRun {
        level,
        points: anchors.len(),
        safety,
        validity_floor: floor,
        epsilons: grid.epsilons.clone(),
        counts,
        slope,
        intercept,
        residual,
        monotone,
        formula_dim,
        formula_certified,
        difference: formula_dim.map(|d| slope - d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::Real;
    use crate::seqcore::{DigitSystem, SeparationMode, SequenceSpec};

    #[test]
    fn single_point() {
        for &e in &[1e-6, 0.3, 7.0] {
            assert_eq!(count_boxes(&[0.25, 0.75], 2, e).unwrap(), 1);
        }
        assert!(count_boxes(&[0.0], 1, 0.0).is_err());
        assert!(count_boxes(&[], 1, 0.5).is_err());
    }

    #[test]
    fn cantor_aligned_counts() {
        let spec = SumSetSpec::cantor();
        let run = estimate_dimension(
            &spec,
            12,
            &BoxGrid::powers(3.0, 2..=10).unwrap(),
            DEFAULT_SAFETY,
            None,
        )
        .unwrap();
        for (k, &c) in (2..=10).zip(&run.counts) {
            assert_eq!(c, 1 << k);
        }
        assert!((run.slope - 2f64.ln() / 3f64.ln()).abs() < 1e-9);
        assert!(run.monotone);
    }

    #[test]
    fn unit_square_corners_quarter_boxes() {
        let spec = SumSetSpec::new(
            SequenceSpec::geometric(Real::ratio(1, 1), Real::ratio(1, 2)).unwrap(),
            DigitSystem::cube(2).unwrap(),
            SeparationMode::CubeWeak,
        );
        // lambda = 1/2 has R_n / s_n = 1: the weak condition fails but the limit set is the square.
        let spec = spec.unwrap();
        let a = level_anchors(&spec, 6, DEFAULT_BUDGET).unwrap();
        assert_eq!(count_boxes(&a.coords, 2, 0.5).unwrap(), 4);
    }

    #[test]
    fn quarter_ratio_slope() {
        let spec = SumSetSpec::new(
            SequenceSpec::geometric(Real::ratio(1, 1), Real::ratio(1, 4)).unwrap(),
            DigitSystem::constant(&[vec![0.0], vec![1.0]]).unwrap(),
            SeparationMode::Strict,
        )
        .unwrap();
        let grid = BoxGrid::auto(&spec, 12, DEFAULT_SAFETY, 12).unwrap();
        let run = estimate_dimension(&spec, 12, &grid, DEFAULT_SAFETY, None).unwrap();
        assert!((run.slope - 0.5).abs() < 0.02, "slope {}", run.slope);
        assert_eq!(run.formula_dim, Some(0.5));
    }

    #[test]
    fn level_zero_slope_zero() {
        let run = estimate_dimension(
            &SumSetSpec::cantor(),
            0,
            &BoxGrid {
                epsilons: vec![4.0, 8.0],
            },
            DEFAULT_SAFETY,
            None,
        )
        .unwrap();
        assert_eq!(run.slope, 0.0);
        assert_eq!(run.counts, vec![1, 1]);
    }

    #[test]
    fn validity_floor_enforced() {
        let err = estimate_dimension(
            &SumSetSpec::cantor(),
            5,
            &BoxGrid::powers(3.0, 2..=5).unwrap(),
            DEFAULT_SAFETY,
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("validity floor"), "{err}");
    }

    #[test]
    fn anchor_sufficiency_on_cantor() {
        let spec = SumSetSpec::cantor();
        let shallow = level_anchors(&spec, 8, DEFAULT_BUDGET).unwrap();
        let deep = level_anchors(&spec, 12, DEFAULT_BUDGET).unwrap();
        for k in 0..=7 {
            let e = 3f64.powi(-k);
            assert_eq!(
                count_boxes(&shallow.coords, 1, e).unwrap(),
                count_boxes(&deep.coords, 1, e).unwrap()
            );
        }
    }

    #[test]
    fn csv_output() {
        let run = estimate_dimension(
            &SumSetSpec::cantor(),
            6,
            &BoxGrid::powers(3.0, 1..=2).unwrap(),
            DEFAULT_SAFETY,
            None,
        )
        .unwrap();
        let mut out = Vec::new();
        run.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "epsilon,count\n3.3333333333333331e-1,2\n1.1111111111111110e-1,4\n"
        );
    }
}

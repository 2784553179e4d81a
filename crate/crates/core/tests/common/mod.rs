#![allow(dead_code)]

use rand::Rng;
use sumset::seqcore::{Geometric, Table};
use sumset::{DigitSystem, Real, SeparationMode, SequenceSpec, SumSetSpec};

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distinct digits on a quarter-integer lattice in `[-2, 2]^p`.
pub fn random_digits<R: Rng>(rng: &mut R, p: usize, n: usize) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    while points.len() < n {
        let pt: Vec<f64> = (0..p)
            .map(|_| rng.gen_range(-8i32..=8) as f64 / 4.0)
            .collect();
        if !points.contains(&pt) {
            points.push(pt);
        }
    }
    points
}

/// A strictly separated spec: every consecutive ratio `r` satisfies `r / (1 - r) < tau / kappa`.
pub fn random_spec<R: Rng>(rng: &mut R) -> SumSetSpec {
    loop {
        let p = rng.gen_range(1..=3);
        let n = rng.gen_range(2..=4);
        let digits = if p > 1 && rng.gen_bool(0.2) {
            DigitSystem::cube(p).unwrap()
        } else {
            DigitSystem::constant(&random_digits(rng, p, n)).unwrap()
        };
        let cap = digits.tau() / (digits.kappa() + digits.tau());
        let ratio = |rng: &mut R| {
            // Rational ratios so geometric tails stay in closed form.
            let k = rng.gen_range(10..=90) as i64;
            Real::ratio(((cap * k as f64) * 1000.0).floor().max(1.0) as i64, 100_000)
        };
        let c = Real::ratio(rng.gen_range(1..=30), 10);
        let seq = if rng.gen_bool(0.5) {
            SequenceSpec::Geometric(Geometric::new(c, ratio(rng)).unwrap())
        } else {
            let k = rng.gen_range(1..=6);
            let mut logs = vec![c.ln() + ratio(rng).ln()];
            for _ in 1..k {
                let last = *logs.last().unwrap();
                logs.push(last + ratio(rng).ln());
            }
            let last = *logs.last().unwrap();
            let tail = Geometric::new(Real::from(last.exp()), ratio(rng)).unwrap();
            SequenceSpec::Table(Table::new(logs, tail).unwrap())
        };
        if let Ok(spec) = SumSetSpec::new(seq, digits, SeparationMode::Strict) {
            if spec.separation().passed() {
                return spec;
            }
        }
    }
}

/// Largest level with at most `cap` anchors.
pub fn level_for(spec: &SumSetSpec, cap: usize) -> usize {
    let n = spec.n_digits();
    let mut level = 0;
    let mut count = 1;
    while count * n <= cap {
        count *= n;
        level += 1;
    }
    level
}

pub fn cantor_doc() -> &'static str {
    r#"{
  "sequence": {"kind": "geometric", "c": "2", "lambda": "1/3"},
  "digits": {"kind": "constant", "points": [["0"], ["1"]], "p": 1},
  "separation_mode": "strict"
}
"#
}

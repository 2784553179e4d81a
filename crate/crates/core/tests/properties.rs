mod common;

use common::{dist, level_for, random_spec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sumset::boxcount::count_boxes;
use sumset::dimension::{dims_exact, measure_sequence};
use sumset::dimfunc::{build_h, DimensionFunction};
use sumset::geometry::{level_anchors, phi_partial, sample_natural_measure, SymbolWord};
use sumset::thinning::{
    apply_plan, plan_block_density, AnchorSequences, DigitAssignment, ThinningPlan,
};
use sumset::{DigitSystem, Real, SeparationMode, SequenceSpec, SumSetSpec};

const BUDGET: u64 = 1 << 20;

fn spec_from_seed(seed: u64) -> SumSetSpec {
    random_spec(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn geometric(c: (i64, i64), lambda: (i64, i64)) -> SumSetSpec {
    SumSetSpec::new(
        SequenceSpec::geometric(Real::ratio(c.0, c.1), Real::ratio(lambda.0, lambda.1)).unwrap(),
        DigitSystem::constant(&[vec![0.0], vec![1.0]]).unwrap(),
        SeparationMode::Strict,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tail_chain_in_log_space(seed in any::<u64>()) {
        let spec = spec_from_seed(seed);
        let seq = spec.sequence();
        let (lk, lt) = (spec.kappa().ln(), spec.tau().ln());
        let lm = spec.m().ln();
        for n in 1..=300 {
            let kr = spec.log_kappa_tail(n);
            prop_assert!(lk + seq.log_term(n + 1).unwrap() < kr);
            prop_assert!(kr <= lm + lt + seq.log_term(n).unwrap() + 1e-12);
            prop_assert!(lm + lt < lk);
            prop_assert!(seq.log_tail(n + 1) < seq.log_tail(n));
        }
    }

    #[test]
    fn geometric_tail_matches_partial_sums(cn in 1i64..50, ln in 1i64..=95) {
        // Independent oracle: R_n = c lambda^(n+1) * sum_k lambda^k, summed term by term.
        let lambda = ln as f64 / 100.0;
        let seq = SequenceSpec::geometric(Real::ratio(cn, 10), Real::ratio(ln, 100)).unwrap();
        let mut series = 0.0;
        let mut term = 1.0;
        while term > 1e-20 {
            series += term;
            term *= lambda;
        }
        for n in [0usize, 1, 2, 7, 50, 333, 1000] {
            let expect = (cn as f64 / 10.0).ln() + (n + 1) as f64 * lambda.ln() + series.ln();
            let got = seq.log_tail(n);
            prop_assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0), "n={} {} vs {}", n, got, expect);
        }
    }

    #[test]
    fn anchors_respect_separation_bound(seed in any::<u64>()) {
        let spec = spec_from_seed(seed);
        let level = level_for(&spec, 256);
        let a = level_anchors(&spec, level, BUDGET).unwrap();
        let seq = spec.sequence();
        for i in 0..a.len() {
            let wi = a.word(i);
            for j in i + 1..a.len() {
                let wj = a.word(j);
                let n = wi.letters().iter().zip(wj.letters()).position(|(x, y)| x != y).unwrap() + 1;
                let bound = seq.term(n).unwrap() * spec.tau() - spec.log_kappa_tail(n).exp();
                let d = dist(a.anchor(i), a.anchor(j));
                prop_assert!(d > 0.0);
                prop_assert!(d >= bound * (1.0 - 1e-12), "words {} {}: {} < {}", wi, wj, d, bound);
            }
        }
    }

    #[test]
    fn cylinders_are_translates(seed in any::<u64>(), a_idx in any::<u64>(), b_idx in any::<u64>()) {
        let spec = spec_from_seed(seed);
        let n = 2;
        let k = level_for(&spec, 64);
        let nd = spec.n_digits();
        let total = (nd * nd) as u64;
        let sigma = SymbolWord::from_index(a_idx % total, n, nd);
        let alpha = SymbolWord::from_index(b_idx % total, n, nd);
        let xs = phi_partial(&spec, &sigma).unwrap();
        let xa = phi_partial(&spec, &alpha).unwrap();
        let scale = spec.log_kappa_tail(0).exp().max(1.0);
        for t in 0..(nd as u64).pow(k as u32) {
            let tail = SymbolWord::from_index(t, k, nd);
            let mut ws = sigma.clone();
            let mut wa = alpha.clone();
            for &l in tail.letters() {
                ws = ws.extended(l);
                wa = wa.extended(l);
            }
            let ps = phi_partial(&spec, &ws).unwrap();
            let pa = phi_partial(&spec, &wa).unwrap();
            for c in 0..spec.dim() {
                let shifted = ps[c] - xs[c] + xa[c];
                prop_assert!((shifted - pa[c]).abs() <= 1e-13 * scale, "{} vs {}", shifted, pa[c]);
            }
        }
    }

    #[test]
    fn cylinder_diameter_bound(seed in any::<u64>(), prefix in any::<u64>()) {
        let spec = spec_from_seed(seed);
        let lvl = 1;
        let nd = spec.n_digits();
        let sigma = SymbolWord::from_index(prefix % nd as u64, lvl, nd);
        let deep = level_for(&spec, 512);
        let a = level_anchors(&spec, deep, BUDGET).unwrap();
        let members: Vec<&[f64]> = (0..a.len())
            .filter(|&i| a.word(i).starts_with(&sigma))
            .map(|i| a.anchor(i))
            .collect();
        let bound = spec.log_kappa_tail(lvl).exp();
        for x in &members {
            for y in &members {
                prop_assert!(dist(x, y) <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn appending_first_letter_is_a_no_op(seed in any::<u64>(), w in any::<u64>()) {
        let spec = spec_from_seed(seed);
        let nd = spec.n_digits();
        let word = SymbolWord::from_index(w % (nd as u64).pow(3), 3, nd);
        prop_assert_eq!(phi_partial(&spec, &word).unwrap(), phi_partial(&spec, &word.extended(1)).unwrap());
    }

    #[test]
    fn hausdorff_at_most_packing(seed in any::<u64>()) {
        let spec = spec_from_seed(seed);
        let r = dims_exact(&spec, 400).unwrap();
        prop_assert!(r.dim_h <= r.dim_p);
        prop_assert!(r.dim_h > 0.0);
    }

    #[test]
    fn exact_exponent_trajectory_is_flat(cn in 1i64..30, ln in 1i64..=33) {
        let spec = geometric((cn, 10), (ln, 100));
        let d = dims_exact(&spec, 100).unwrap().dim_h;
        let m = measure_sequence(&spec, &DimensionFunction::power_law(d).unwrap(), 0..=400).unwrap();
        for w in m.trajectory.windows(2) {
            prop_assert!((w[1].1 - w[0].1).abs() < 1e-10);
        }
    }

    #[test]
    fn larger_exponent_never_exceeds_smaller(seed in any::<u64>(), s1 in 0.05f64..2.0, ds in 0.01f64..1.0) {
        // x^s decreases in s only for x <= 1, so the comparison is made where kappa R_n <= 1.
        let spec = spec_from_seed(seed);
        let lo = measure_sequence(&spec, &DimensionFunction::power_law(s1).unwrap(), 0..=200).unwrap();
        let hi = measure_sequence(&spec, &DimensionFunction::power_law(s1 + ds).unwrap(), 0..=200).unwrap();
        for (a, b) in lo.trajectory.iter().zip(&hi.trajectory) {
            if spec.log_kappa_tail(a.0) <= 0.0 {
                prop_assert!(b.1 <= a.1);
            }
        }
    }

    #[test]
    fn constructed_gauge_identities(seed in any::<u64>(), j in 2usize..60) {
        let spec = spec_from_seed(seed);
        let h = build_h(&spec, j).unwrap();
        let DimensionFunction::Constructed(c) = &h else { unreachable!() };
        let ln_n = (spec.n_digits() as f64).ln();
        for k in 0..=j {
            let v = k as f64 * ln_n + h.log_eval(spec.log_kappa_tail(k)).ln_value;
            prop_assert!(v.abs() <= 1e-12, "j={} value {}", k, v);
        }
        let (top, bottom) = (spec.log_kappa_tail(0), spec.log_kappa_tail(j));
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let ln_x = bottom + (top - bottom) * i as f64 / 400.0;
            let hv = h.log_eval(ln_x).ln_value;
            if i > 0 {
                prop_assert!(hv > prev);
            }
            prev = hv;
            let back = c.log_f(-hv);
            prop_assert!((back - ln_x).abs() <= 1e-12 * ln_x.abs().max(1.0), "{} vs {}", back, ln_x);
        }
    }

    #[test]
    fn removal_plans_keep_separation(seed in any::<u64>(), removed in prop::collection::vec(1usize..200, 0..40)) {
        let spec = spec_from_seed(seed);
        let plan = ThinningPlan::remove_indices(&removed, 400).unwrap();
        let mut pi = plan.pi().to_vec();
        pi.sort_unstable();
        pi.dedup();
        prop_assert_eq!(pi.len(), plan.horizon());
        let thinned = apply_plan(&spec, &plan, DigitAssignment::Travel).unwrap();
        prop_assert!(thinned.m() <= spec.m() * (1.0 + 1e-12));
    }

    #[test]
    fn block_density_matches_targets(
        a_num in 1i64..10, b_extra in 0i64..10, ka in 1i64..=10, kb_extra in 0i64..=10,
        n1 in 5usize..200, gap1 in 5usize..400, gap2 in 5usize..400,
    ) {
        // A = a_num/10, B = A + b_extra/10; retentions ka/10 <= kb/10.
        let cap_a = Real::ratio(a_num, 10);
        let cap_b = Real::ratio(a_num + b_extra, 10);
        let keep_a = Real::ratio(ka, 10);
        let keep_b = Real::ratio((ka + kb_extra).min(10), 10);
        let alpha = keep_a.mul(&cap_a);
        let beta = keep_b.mul(&cap_b);
        let m1 = n1 + gap1;
        let n2 = m1 + gap2;
        let anchors = AnchorSequences::new(vec![n1, n2], vec![m1]).unwrap();
        let plan = plan_block_density(cap_a, cap_b, alpha, beta, &anchors, n2).unwrap();
        let pi = plan.pi();
        prop_assert!(pi.windows(2).all(|w| w[0] < w[1]));
        for (u, v, keep) in [(1, n1, &keep_a), (n1 + 1, m1, &keep_b), (m1 + 1, n2, &keep_a)] {
            let len = (v - u + 1) as f64;
            let kept = pi.iter().filter(|&&i| i >= u && i <= v).count() as f64;
            prop_assert!((kept / len - keep.value()).abs() <= 2.0 / len, "[{}, {}] kept {} target {}", u, v, kept, keep.value());
        }
    }

    #[test]
    fn plan_json_round_trip(removed in prop::collection::vec(1usize..500, 0..60), h in 500usize..800) {
        let plan = ThinningPlan::remove_indices(&removed, h).unwrap();
        let back = ThinningPlan::from_json(&plan.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.pi(), plan.pi());
        prop_assert_eq!(back.to_json().unwrap(), plan.to_json().unwrap());
    }

    #[test]
    fn nested_grid_counts_are_monotone(seed in any::<u64>(), k in 1usize..6, e in -6i32..0) {
        // Each cell of side k*eps is a union of cells of side eps only when the grids nest.
        let spec = spec_from_seed(seed);
        let a = level_anchors(&spec, level_for(&spec, 4096), BUDGET).unwrap();
        let eps = 2f64.powi(e);
        let fine = count_boxes(&a.coords, a.p, eps).unwrap();
        let coarse = count_boxes(&a.coords, a.p, eps * k as f64).unwrap();
        prop_assert!(fine >= coarse);
    }

    #[test]
    fn sampling_ignores_thread_count(seed in any::<u64>(), count in 1usize..10_000) {
        let spec = SumSetSpec::cantor();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample_natural_measure(&spec, 12, count, seed).unwrap());
        let b = four.install(|| sample_natural_measure(&spec, 12, count, seed).unwrap());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.word == y.word && x.point == y.point));
    }
}

#[test]
fn anchor_sufficiency_on_aligned_grids() {
    for spec in [SumSetSpec::cantor(), geometric((1, 1), (1, 4))] {
        let shallow = level_anchors(&spec, 8, BUDGET).unwrap();
        let deep = level_anchors(&spec, 13, BUDGET).unwrap();
        let floor = 3.0 * spec.log_kappa_tail(8).exp();
        let ratio = match spec.sequence() {
            SequenceSpec::Geometric(g) => 1.0 / g.lambda().value(),
            _ => unreachable!(),
        };
        let mut eps = 1.0;
        while eps >= floor {
            assert_eq!(
                count_boxes(&shallow.coords, 1, eps).unwrap(),
                count_boxes(&deep.coords, 1, eps).unwrap(),
                "eps = {eps}"
            );
            eps /= ratio;
        }
    }
}

use approx::assert_relative_eq;
use proptest::prelude::*;
use strip6v::dynamics::StripParams;
use strip6v::exact::{asep_generator, stationary_exact, transition_matrix, Distribution, Kernel, Target};
use strip6v::lattice::{decompose_translation, DownRightPath, EdgeKind};
use strip6v::mpa::*;

fn example() -> StripParams {
    StripParams::theorem(0.5, 0.3, 0.4, 0.2, 0.2, 0.5).unwrap()
}

fn all_paths(n: usize) -> Vec<DownRightPath> {
    (0..1usize << n)
        .map(|m| {
            let labels = (0..n).map(|i| if m >> i & 1 == 1 { EdgeKind::Up } else { EdgeKind::Right }).collect();
            let ups = (0..n).filter(|i| m >> i & 1 == 1).count() as i64;
            // the right endpoint sits low enough for the left end to stay in the strip
            DownRightPath::new(n, Some(labels), ups).unwrap()
        })
        .collect()
}

/// `dist * kernel`, as a distribution.
fn push(dist: &Distribution, k: &Kernel) -> Vec<f64> {
    let n = dist.probs().len();
    (0..n).map(|j| (0..n).map(|i| dist.probs()[i] * k.get(i, j)).sum()).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn horizontal_two_sites_matches_kernel() {
    let path = DownRightPath::horizontal(2).unwrap();
    let mu = stationary_exact(&transition_matrix(&path, &Target::Translation, &example()).unwrap()).unwrap();
    let m = mpa_measure(&path, &example()).unwrap();
    assert!(mu.max_abs_diff(&m) < 1e-10);
}

#[test]
fn right_up_path_matches_kernel() {
    let path = DownRightPath::parse("RU", 0).unwrap();
    let mu = stationary_exact(&transition_matrix(&path, &Target::Translation, &example()).unwrap()).unwrap();
    let m = mpa_measure(&path, &example()).unwrap();
    assert!(mu.max_abs_diff(&m) < 1e-10, "{:?} vs {:?}", mu.probs(), m.probs());
}

#[test]
fn every_path_up_to_five_sites() {
    for n in 1..=5 {
        for path in all_paths(n) {
            let k = transition_matrix(&path, &Target::Translation, &example()).unwrap();
            let mu = stationary_exact(&k).unwrap();
            let m = mpa_measure(&path, &example()).unwrap();
            assert!(mu.max_abs_diff(&m) < 1e-10, "{path}");
        }
    }
}

#[test]
fn local_moves_push_measures_forward() {
    let p = example();
    for n in 1..=4 {
        for path in all_paths(n) {
            let mut cur = path.clone();
            for mv in decompose_translation(&path) {
                let next = strip6v::lattice::apply_local_move(&cur, mv).unwrap();
                let k = strip6v::exact::move_kernel(n, mv, &p);
                let pushed = push(&mpa_measure(&cur, &p).unwrap(), &k);
                let target = mpa_measure(&next, &p).unwrap();
                assert!(max_diff(&pushed, target.probs()) < 1e-10, "{cur} -> {next}");
                cur = next;
            }
        }
    }
}

#[test]
fn asep_ansatz_matches_generator() {
    let rates = derive_params(&example()).rates();
    for n in 1..=6 {
        let pi = stationary_exact(&asep_generator(n, &rates).unwrap()).unwrap();
        let m = asep_mpa_measure(n, &rates).unwrap();
        assert!(pi.max_abs_diff(&m) < 1e-10, "N = {n}");
    }
}

#[test]
fn bernoulli_product_is_stationary() {
    let s = bernoulli_special(0.5, 0.3, 0.4, 0.2, 0.5, BernoulliMode::Theorem).unwrap();
    let p = StripParams::new(0.5, 0.3, 0.4, 0.2, s.theta1, 0.5).unwrap();
    for n in 1..=4 {
        for path in all_paths(n) {
            let k = transition_matrix(&path, &Target::Translation, &p).unwrap();
            let prod = product_measure(&path, s.p_up, s.p_right);
            assert!(max_diff(&push(&prod, &k), prod.probs()) < 1e-10, "{path}");
        }
    }
}

#[test]
fn parity_measures_are_stationary() {
    let p = StripParams::new(1.0, 1.0, 1.0, 1.0, 0.2, 0.5).unwrap();
    for path in all_paths(3) {
        let k = transition_matrix(&path, &Target::Translation, &p).unwrap();
        for i in 0..8usize {
            for j in 0..8usize {
                if (i.count_ones() + j.count_ones()) % 2 == 1 {
                    assert_eq!(k.get(i, j), 0.0);
                }
            }
        }
        let m = parity_bernoulli(0.2, 0.5, &path).unwrap();
        for d in [&m.even, &m.odd] {
            assert!(max_diff(&push(d, &k), d.probs()) < 1e-10, "{path}");
        }
    }
}

#[test]
fn qvolume_is_stationary_in_each_sector() {
    let p = StripParams::new(0.0, 0.0, 0.0, 0.0, 0.2, 0.5).unwrap();
    for n in 1..=4 {
        for path in all_paths(n) {
            let k = transition_matrix(&path, &Target::Translation, &p).unwrap();
            for particles in 0..=n {
                let d = qvolume_measure(n, particles, p.q()).unwrap();
                assert!(max_diff(&push(&d, &k), d.probs()) < 1e-10, "{path} k={particles}");
            }
        }
    }
}

#[test]
fn tilting_through_the_ansatz() {
    let p = example();
    let rates = derive_params(&p).rates();
    for n in 1..=6 {
        let strip = mpa_measure(&DownRightPath::horizontal(n).unwrap(), &p).unwrap();
        let asep = asep_mpa_measure(n, &rates).unwrap();
        let w = asep.probs().iter().enumerate().map(|(i, x)| x * p.r().powi(i.count_ones() as i32)).collect();
        assert!(strip.max_abs_diff(&Distribution::from_weights(n, w).unwrap()) < 1e-12);
    }
}

#[test]
fn horizontal_partition_matches_enumeration() {
    let p = example();
    let mut ansatz = StripAnsatz::new(&p).unwrap();
    for n in 1..=8 {
        let total: f64 = ansatz.weights(&DownRightPath::horizontal(n).unwrap()).iter().sum();
        assert_relative_eq!(ansatz.log_partition_horizontal(n, 1.0), total.ln(), epsilon = 1e-11);
    }
}

fn word_strategy() -> impl Strategy<Value = Vec<Letter>> {
    prop::collection::vec(prop_oneof![Just(Letter::D), Just(Letter::E)], 0..=8)
}

fn theorem_params() -> impl Strategy<Value = StripParams> {
    (0.05..0.95f64, 0.05..0.6f64, 0.05..0.95f64, 0.05..0.35f64, 0.05..0.9f64, 0.1..0.95f64)
        .prop_filter_map("theorem mode", |(a, b, c, d, t1f, t2)| {
            StripParams::theorem(a, b, c, d, t1f * t2, t2).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rewrite_strategies_agree(word in word_strategy(), p in theorem_params()) {
        let rates = derive_params(&p).rates();
        let direct = dehp_value(&word, &rates).unwrap();
        let left = dehp_value_left(&word, &rates).unwrap();
        let mut ev = DehpEvaluator::new(&rates).unwrap();
        let nf = ev.normal_form(&NormalForm::from_word(&word, rates.l));
        let scale = direct.abs().max(1.0);
        prop_assert!((direct - left).abs() < 1e-10 * scale, "{direct} vs {left}");
        prop_assert!((direct - nf).abs() < 1e-10 * scale, "{direct} vs {nf}");
    }

    #[test]
    fn words_are_positive(word in word_strategy(), p in theorem_params()) {
        let rates = derive_params(&p).rates();
        prop_assume!(rates.alpha * rates.beta > rates.gamma * rates.delta);
        prop_assert!(dehp_value(&word, &rates).unwrap() > 0.0);
    }

    #[test]
    fn eight_relations(
        left in prop::collection::vec(0..4u8, 0..4),
        right in prop::collection::vec(0..4u8, 0..4),
        p in theorem_params(),
    ) {
        use StripOp::*;
        let ops = |v: &[u8]| -> Vec<StripOp> {
            v.iter().map(|&x| [DUp, DRight, EUp, ERight][x as usize]).collect()
        };
        let (l, r) = (ops(&left), ops(&right));
        let mut an = StripAnsatz::new(&p).unwrap();
        let mut ev = |mid: &[StripOp], with_l: bool, with_r: bool| {
            let mut w = if with_l { l.clone() } else { vec![] };
            w.extend_from_slice(mid);
            if with_r { w.extend_from_slice(&r); }
            an.value(&w)
        };
        let (t1, t2) = (p.theta1, p.theta2);
        let tol = |x: f64| 1e-9 * x.abs().max(1.0);
        // bulk
        let lhs = ev(&[DUp, DRight], true, true);
        prop_assert!((lhs - ev(&[DRight, DUp], true, true)).abs() < tol(lhs));
        let lhs = ev(&[EUp, ERight], true, true);
        prop_assert!((lhs - ev(&[ERight, EUp], true, true)).abs() < tol(lhs));
        let lhs = ev(&[DUp, ERight], true, true);
        let rhs = (1.0 - t2) * ev(&[DRight, EUp], true, true) + t1 * ev(&[ERight, DUp], true, true);
        prop_assert!((lhs - rhs).abs() < tol(lhs));
        let lhs = ev(&[EUp, DRight], true, true);
        let rhs = t2 * ev(&[DRight, EUp], true, true) + (1.0 - t1) * ev(&[ERight, DUp], true, true);
        prop_assert!((lhs - rhs).abs() < tol(lhs));
        // left boundary
        let lhs = ev(&[DRight], false, true);
        let rhs = (1.0 - p.c) * ev(&[DUp], false, true) + p.a * ev(&[EUp], false, true);
        prop_assert!((lhs - rhs).abs() < tol(lhs));
        let lhs = ev(&[ERight], false, true);
        let rhs = (1.0 - p.a) * ev(&[EUp], false, true) + p.c * ev(&[DUp], false, true);
        prop_assert!((lhs - rhs).abs() < tol(lhs));
        // right boundary
        let lhs = ev(&[DUp], true, false);
        let rhs = (1.0 - p.b) * ev(&[DRight], true, false) + p.d * ev(&[ERight], true, false);
        prop_assert!((lhs - rhs).abs() < tol(lhs));
        let lhs = ev(&[EUp], true, false);
        let rhs = (1.0 - p.d) * ev(&[ERight], true, false) + p.b * ev(&[DRight], true, false);
        prop_assert!((lhs - rhs).abs() < tol(lhs));
    }

    #[test]
    fn mpa_equals_exact_random(p in theorem_params(), n in 1usize..=4, mask in 0usize..16) {
        let labels = (0..n).map(|i| if mask >> i & 1 == 1 { EdgeKind::Up } else { EdgeKind::Right }).collect();
        let ups = (0..n).filter(|i| mask >> i & 1 == 1).count() as i64;
        let path = DownRightPath::new(n, Some(labels), ups).unwrap();
        let rates = derive_params(&p).rates();
        prop_assume!(rates.alpha * rates.beta > rates.gamma * rates.delta);
        let mu = stationary_exact(&transition_matrix(&path, &Target::Translation, &p).unwrap()).unwrap();
        let m = mpa_measure(&path, &p).unwrap();
        prop_assert!(mu.max_abs_diff(&m) < 1e-10);
    }
}

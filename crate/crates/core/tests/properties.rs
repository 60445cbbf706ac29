use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qso::markov::{all_sequences, CylinderSet, TransitionFamily};
use qso::operator::random::{random_b_bistochastic, random_tensor, BBistochasticBounds};
use qso::simplex::{b_leq, majorizes};
use qso::{HeredityTensor, QsoOperator, SimplexPoint};

fn point(n: usize) -> impl Strategy<Value = SimplexPoint> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| SimplexPoint::new(w.iter().map(|v| v / s).collect()).unwrap())
    })
}

fn dim_and_point() -> impl Strategy<Value = (usize, SimplexPoint)> {
    (2usize..=5).prop_flat_map(|n| (Just(n), point(n)))
}

fn b_operator(n: usize, seed: u64) -> QsoOperator {
    random_b_bistochastic(n, BBistochasticBounds::general(), &mut ChaCha8Rng::seed_from_u64(seed))
}

fn raw_eval(t: &HeredityTensor, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| t.get(i, j, k) * x[i] * x[j]).sum())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn b_order_is_reflexive_and_transitive((n, x) in dim_and_point(), seed in any::<u64>()) {
        prop_assert!(b_leq(&x, &x).unwrap().holds);
        let v = b_operator(n, seed);
        let y = v.evaluate(&x).unwrap();
        let z = v.evaluate(&y).unwrap();
        if b_leq(&z, &y).unwrap().holds && b_leq(&y, &x).unwrap().holds {
            prop_assert!(b_leq(&z, &x).unwrap().holds);
        }
    }

    #[test]
    fn b_order_is_antisymmetric((n, x) in dim_and_point(), y_seed in any::<u64>()) {
        let y = qso::simplex::sample_simplex(n, 1, y_seed).unwrap().remove(0);
        if b_leq(&x, &y).unwrap().holds && b_leq(&y, &x).unwrap().holds {
            prop_assert!(x.l1_distance(&y).unwrap() < 1e-9);
        }
    }

    #[test]
    fn majorization_extremes((n, x) in dim_and_point()) {
        let bary = SimplexPoint::barycenter(n).unwrap();
        let vertex = SimplexPoint::vertex(n, 0).unwrap();
        prop_assert!(majorizes(&bary, &x).unwrap().holds);
        prop_assert!(majorizes(&x, &vertex).unwrap().holds);
        prop_assert!(majorizes(&x, &x.rearrange_desc()).unwrap().holds);
    }

    #[test]
    fn evaluate_stays_on_simplex((n, x) in dim_and_point(), seed in any::<u64>()) {
        let v = random_tensor(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let y = v.evaluate(&x).unwrap();
        prop_assert!(y.coords().iter().all(|&c| c >= 0.0));
        prop_assert!((y.coords().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(v.evaluate_canonical(&x).is_err() || qso::classify::check_necessary_bbistochastic(&v).all_pass());
    }

    #[test]
    fn canonical_form_agrees_on_b_bistochastic((n, x) in dim_and_point(), seed in any::<u64>()) {
        let v = b_operator(n, seed);
        let y = v.evaluate(&x).unwrap();
        let c = v.evaluate_canonical(&x).unwrap();
        prop_assert!(y.l1_distance(&c).unwrap() < 1e-14);
    }

    #[test]
    fn symmetrization_preserves_the_quadratic_form((n, x) in dim_and_point(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = HeredityTensor::zeros(n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let row = random_tensor(n, &mut rng);
                for k in 0..n {
                    t.set_entry(i, j, k, row.coef(0, 0, k));
                }
            }
        }
        let v = QsoOperator::new(t.clone(), true).unwrap();
        let expected = raw_eval(&t, x.coords());
        let got = v.evaluate(&x).unwrap();
        for (a, b) in got.coords().iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn b_bistochastic_image_is_below((n, x) in dim_and_point(), seed in any::<u64>()) {
        let v = b_operator(n, seed);
        prop_assert!(b_leq(&v.evaluate(&x).unwrap(), &x).unwrap().holds);
    }

    #[test]
    fn prefix_sums_decrease_along_trajectories((n, x) in dim_and_point(), seed in any::<u64>()) {
        let v = b_operator(n, seed);
        let mut cur = x;
        for _ in 0..50 {
            let next = v.evaluate(&cur).unwrap();
            for (u_next, u_cur) in next.partial_sums().iter().zip(cur.partial_sums()) {
                prop_assert!(*u_next <= u_cur + 1e-12);
            }
            cur = next;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn chapman_kolmogorov((n, x) in (2usize..=4).prop_flat_map(|n| (Just(n), point(n))), seed in any::<u64>(),
                          k in 0usize..5, d1 in 1usize..6, d2 in 1usize..6) {
        let fam = TransitionFamily::new(b_operator(n, seed), x).unwrap();
        let (j, m) = (k + d1, k + d1 + d2);
        let direct = fam.compose_transitions(k, m).unwrap();
        let split = fam.compose_transitions(k, j).unwrap() * fam.compose_transitions(j, m).unwrap();
        prop_assert!((direct - split).abs().max() < 1e-13);
        for r in 0..n {
            let row = fam.transition_matrix(k);
            prop_assert!((row.row(r).sum() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn kolmogorov_consistency((n, x) in (2usize..=3).prop_flat_map(|n| (Just(n), point(n))), seed in any::<u64>(),
                              l in 0usize..4, len in 1usize..4) {
        let fam = TransitionFamily::new(b_operator(n, seed), x).unwrap();
        let mut total = 0.0;
        for seq in all_sequences(n, len) {
            let c = CylinderSet::new(l, seq.clone()).unwrap();
            let mu = fam.cylinder_measure(&c).unwrap();
            total += mu;
            let extended: f64 = (0..n)
                .map(|s| {
                    let mut longer = seq.clone();
                    longer.push(s);
                    fam.cylinder_measure(&CylinderSet::new(l, longer).unwrap()).unwrap()
                })
                .sum();
            prop_assert!((extended - mu).abs() < 1e-13);
            let first: f64 = (0..n)
                .map(|s| {
                    let mut earlier = vec![s];
                    earlier.extend(&seq);
                    if l == 0 {
                        return f64::NAN;
                    }
                    fam.cylinder_measure(&CylinderSet::new(l - 1, earlier).unwrap()).unwrap()
                })
                .sum();
            if l > 0 {
                prop_assert!((first - mu).abs() < 1e-13);
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn cylinder_round_trips_through_text(l in 0usize..20, states in prop::collection::vec(1usize..6, 1..6)) {
        let c = CylinderSet::from_one_based(l, &states).unwrap();
        let back: CylinderSet = c.to_string().parse().unwrap();
        prop_assert_eq!(back, c);
    }
}

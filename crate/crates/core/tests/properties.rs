use ndarray::{Array2, Axis as NdAxis};
use proptest::prelude::*;
use qsvmf::baselines::{chi2_scores, f_regression_scores, select_k_best};
use qsvmf::data::{fit_scaler, pairwise_covariance_score, stratified_kfold};
use qsvmf::encoding::{chromosome_length, decode, gate_counts, Axis, Chromosome};

fn chromosome(bits: Vec<bool>, p: usize, n: usize) -> Chromosome {
    Chromosome::new(bits, p, n).unwrap()
}

fn bits_for(p: usize, n: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), chromosome_length(p, n))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(0.0f64..50.0, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

proptest! {
    #[test]
    fn decode_is_total_and_valid((p, n, bits) in (1usize..12, 1usize..7).prop_flat_map(|(p, n)| (Just(p), Just(n), bits_for(p, n))), seed in any::<u64>()) {
        let c = chromosome(bits, p, n);
        let spec = decode(&c, seed);
        prop_assert!(spec.validate(p).is_ok());
        prop_assert_eq!(spec.n_qubits(), n);
        prop_assert!(!spec.selected_features.is_empty());
        if spec.selected_features.len() <= n {
            for f in &spec.selected_features {
                prop_assert!(spec.qubit_feature.contains(f));
            }
        } else {
            let mut q = spec.qubit_feature.clone();
            q.sort_unstable();
            q.dedup();
            prop_assert_eq!(q.len(), n);
        }
        prop_assert_eq!(decode(&c, seed), spec);
    }

    #[test]
    fn gate_counts_match_a_walk_of_the_circuit((p, n, bits) in (1usize..8, 1usize..7).prop_flat_map(|(p, n)| (Just(p), Just(n), bits_for(p, n)))) {
        let spec = decode(&chromosome(bits, p, n), 0);
        let mut local = 0;
        let mut cnot = 0;
        for _ in 0..spec.repetitions {
            local += n;
            if spec.axis != Axis::I {
                local += spec.rotation_flags.iter().filter(|&&f| f).count();
            }
            for _ in &spec.entangler_pairs {
                cnot += 2;
                local += 1;
            }
        }
        let g = gate_counts(&spec);
        prop_assert_eq!(g.local, local);
        prop_assert_eq!(g.cnot, cnot);
        prop_assert_eq!(g.cnot, 2 * spec.repetitions * spec.entangler_pairs.len());
    }

    #[test]
    fn mask_does_not_change_cnot((bits, mask) in (bits_for(6, 4), prop::collection::vec(any::<bool>(), 6))) {
        let a = chromosome(bits.clone(), 6, 4);
        let mut other = bits;
        other[..6].copy_from_slice(&mask);
        let b = chromosome(other, 6, 4);
        prop_assert_eq!(gate_counts(&decode(&a, 1)).cnot, gate_counts(&decode(&b, 1)).cnot);
    }

    #[test]
    fn covariance_permutation_invariant(x in matrix(12, 6), cols in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let forward = pairwise_covariance_score(x.view(), &cols).unwrap();
        let mut rev = cols.clone();
        rev.reverse();
        let backward = pairwise_covariance_score(x.view(), &rev).unwrap();
        let sorted: Vec<usize> = (0..6).collect();
        prop_assert!(forward >= 0.0);
        prop_assert!((forward - backward).abs() < 1e-9);
        prop_assert!((forward - pairwise_covariance_score(x.view(), &sorted).unwrap()).abs() < 1e-9);
        // at most one per pair
        prop_assert!(forward <= 15.0 + 1e-9);
    }

    #[test]
    fn k_best_is_nested(x in matrix(20, 8), labels in prop::collection::vec(any::<bool>(), 20)) {
        let y: Vec<i8> = labels.iter().map(|&b| if b { 1 } else { -1 }).collect();
        for scores in [chi2_scores(x.view(), &y).unwrap(), f_regression_scores(x.view(), &y).unwrap()] {
            for k in 1..8 {
                let small = select_k_best(&scores, k).unwrap();
                let big = select_k_best(&scores, k + 1).unwrap();
                prop_assert_eq!(small.len(), k);
                prop_assert!(small.iter().all(|f| big.contains(f)));
                prop_assert!(small.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn chi2_invariant_to_row_order(x in matrix(15, 4), labels in prop::collection::vec(any::<bool>(), 15), order in Just((0..15).collect::<Vec<usize>>()).prop_shuffle()) {
        let y: Vec<i8> = labels.iter().map(|&b| if b { 1 } else { -1 }).collect();
        let xp = x.select(NdAxis(0), &order);
        let yp: Vec<i8> = order.iter().map(|&i| y[i]).collect();
        let a = chi2_scores(x.view(), &y).unwrap().scores;
        let b = chi2_scores(xp.view(), &yp).unwrap().scores;
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
        }
    }

    #[test]
    fn folds_partition_rows(pos in 5usize..60, neg in 5usize..60, k in 2usize..6, seed in any::<u64>()) {
        let labels: Vec<i8> = (0..pos + neg).map(|i| if i < pos { 1 } else { -1 }).collect();
        let plan = stratified_kfold(&labels, k, seed).unwrap();
        let mut seen = vec![0; labels.len()];
        for f in 0..k {
            let test = plan.test_indices(f);
            let train = plan.train_indices(f);
            prop_assert_eq!(test.len() + train.len(), labels.len());
            for &i in &test {
                seen[i] += 1;
                prop_assert!(!train.contains(&i));
            }
            let test_pos = test.iter().filter(|&&i| labels[i] == 1).count();
            prop_assert!(test_pos >= pos / k && test_pos <= pos.div_ceil(k));
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        let sizes = plan.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn scaling_matches_formula_and_commutes_with_rows(x in matrix(10, 3), lo in -2.0f64..0.0, width in 0.5f64..4.0, order in Just((0..10).collect::<Vec<usize>>()).prop_shuffle()) {
        let hi = lo + width;
        let all: Vec<usize> = (0..10).collect();
        let scaler = fit_scaler(x.view(), &all, lo, hi).unwrap();
        let scaled = scaler.transform(x.view()).unwrap();
        for c in 0..3 {
            let col = x.column(c);
            let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for r in 0..10 {
                let want = if max > min { lo + (x[[r, c]] - min) / (max - min) * (hi - lo) } else { lo };
                prop_assert!((scaled[[r, c]] - want).abs() < 1e-9);
            }
        }
        let permuted = x.select(NdAxis(0), &order);
        let refit = fit_scaler(permuted.view(), &all, lo, hi).unwrap();
        prop_assert_eq!(refit.transform(permuted.view()).unwrap(), scaled.select(NdAxis(0), &order));
    }
}

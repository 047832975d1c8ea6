mod common;

use std::sync::Arc;

use common::*;
use netcontrast::centrality::{degree, kcore};
use netcontrast::datasets::karate;
use netcontrast::features::*;
use netcontrast::graph::Direction;
use proptest::prelude::*;

fn op(summary: Summary, direction: Direction) -> RelationalOperator {
    RelationalOperator::new(summary, direction)
}

#[test]
fn mean_of_mean_in_degree_is_two_passes() {
    let g = graph(true, 4, &[(0, 1), (1, 2), (2, 0), (3, 2), (0, 3)]);
    let mean = op(Summary::Mean, Direction::All);
    let def = FeatureDefinition {
        id: 0,
        base: BaseFeature::InDegree,
        chain: vec![mean, mean],
    };
    let eval = evaluate_feature(&g, &def).unwrap();
    let x = degree(&g, Direction::In).values;
    let once = rfo_oracle(&g, &x, mean);
    let twice = rfo_oracle(&g, &once, mean);
    assert_eq!(eval.stages, vec![x, once, twice]);
}

#[test]
fn three_operator_feature_has_four_stages() {
    // (Φ⁺_sum ∘ Φ_sum ∘ Φ⁻_mean)(total-degree) on a small digraph.
    let g = graph(true, 5, &[(0, 1), (0, 2), (1, 2), (2, 3), (3, 1), (4, 0), (4, 3)]);
    let def = FeatureDefinition {
        id: 0,
        base: BaseFeature::TotalDegree,
        chain: vec![
            op(Summary::Mean, Direction::In),
            op(Summary::Sum, Direction::All),
            op(Summary::Sum, Direction::Out),
        ],
    };
    assert_eq!(def.describe(), "out-sum(all-sum(in-mean(total-degree)))");
    let eval = evaluate_feature(&g, &def).unwrap();
    assert_eq!(eval.stages.len(), 4);
    let mut want = vec![degree(&g, Direction::All).values];
    for &o in &def.chain {
        let next = rfo_oracle(&g, want.last().unwrap(), o);
        want.push(next);
    }
    assert_eq!(eval.stages, want);
}

#[test]
fn kcore_base_on_karate_matches_peeling() {
    let g = karate();
    assert_eq!(compute_base(&g, BaseFeature::KCore).unwrap().values, kcore_oracle(&g));
    assert_eq!(compute_base(&g, BaseFeature::KCore).unwrap(), kcore(&g));
}

#[test]
fn log_binning_strictly_increasing() {
    let v: Vec<f64> = (0..8).map(f64::from).collect();
    assert_eq!(log_binning(&v, 0.5), vec![0, 0, 0, 0, 1, 1, 2, 3]);
}

/// Enumerates layer sizes independently: layer 0 holds the bases, layer k
/// one candidate per (layer k−1 survivor, operator) pair.
fn enumerate_candidates(defs: &[FeatureDefinition], ops: &[RelationalOperator], bases: usize, h: usize) -> Vec<usize> {
    let mut sizes = vec![bases];
    for k in 1..=h {
        let parents = defs.iter().filter(|d| d.chain.len() == k - 1).count();
        sizes.push(parents * ops.len());
    }
    sizes
}

#[test]
fn candidate_pool_matches_enumeration() {
    let g = random_graph(&mut rng(4), 30, 0.1, true);
    let config = LearnConfig {
        bases: vec![BaseFeature::InDegree, BaseFeature::OutDegree],
        summaries: vec![Summary::Mean, Summary::Sum],
        directions: vec![Direction::All],
        max_hops: 2,
        prune_threshold: 0.9,
        bin_fraction: 0.5,
    };
    let learned = learn_features_with_report(&g, &config).unwrap();
    let got: Vec<usize> = learned.layers.iter().map(|l| l.candidates).collect();
    let want = enumerate_candidates(&learned.definitions, &config.operators(), 2, 2);
    assert_eq!(got[..], want[..got.len()]);
    // Every survivor is a base or an operator applied to an earlier survivor.
    for d in &learned.definitions {
        if let Some((_, parent)) = d.chain.split_last() {
            assert!(learned
                .definitions
                .iter()
                .any(|p| p.base == d.base && p.chain == parent));
        }
    }
    let ids: Vec<usize> = learned.definitions.iter().map(|d| d.id).collect();
    assert_eq!(ids, (0..ids.len()).collect::<Vec<_>>());
}

#[test]
fn matrices_share_definitions_and_match_per_column() {
    let t = random_graph(&mut rng(1), 12, 0.3, false);
    let b = random_graph(&mut rng(2), 9, 0.3, false);
    let defs = Arc::new(learn_features(&t, &LearnConfig::default()).unwrap());
    let (xt, xb) = build_feature_matrices(Arc::clone(&defs), &t, &b).unwrap();
    assert!(Arc::ptr_eq(&xt.definitions, &xb.definitions));
    assert_eq!((xt.nrows(), xb.nrows()), (12, 9));
    for (j, d) in defs.iter().enumerate() {
        assert_eq!(xt.column(j), evaluate_feature(&t, d).unwrap().into_final());
        assert_eq!(xb.column(j), evaluate_feature(&b, d).unwrap().into_final());
    }
    let (a, c) = build_feature_matrices(Arc::clone(&defs), &t, &t).unwrap();
    assert_eq!(a.values, c.values);
}

fn arb_chain() -> impl Strategy<Value = Vec<RelationalOperator>> {
    let summary = prop_oneof![
        Just(Summary::Mean),
        Just(Summary::Sum),
        Just(Summary::Max),
        Just(Summary::L2norm)
    ];
    let direction = prop_oneof![Just(Direction::In), Just(Direction::Out), Just(Direction::All)];
    prop::collection::vec((summary, direction).prop_map(|(s, d)| op(s, d)), 0..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sum_of_ones_is_degree(seed in any::<u64>(), n in 1usize..25, p in 0.0f64..0.4, directed in any::<bool>()) {
        let g = random_graph(&mut rng(seed), n, p, directed);
        let ones = vec![1.0; n];
        for d in Direction::ALL {
            prop_assert_eq!(apply_rfo(&g, &ones, op(Summary::Sum, d)), degree(&g, d).values);
        }
    }

    #[test]
    fn log_binning_is_permutation_equivariant(values in prop::collection::vec(0u8..6, 1..40), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let mut perm: Vec<usize> = (0..values.len()).collect();
        perm.shuffle(&mut rng(seed));
        let permuted: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
        let bins = log_binning(&values, 0.5);
        let want: Vec<usize> = perm.iter().map(|&i| bins[i]).collect();
        prop_assert_eq!(log_binning(&permuted, 0.5), want);
    }

    #[test]
    fn evaluation_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..20, chain in arb_chain()) {
        use rand::seq::SliceRandom;
        let g = random_graph(&mut rng(seed), n, 0.25, true);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng(!seed));
        let h = g.permuted(&perm);
        let def = FeatureDefinition { id: 0, base: BaseFeature::TotalDegree, chain };
        let a = evaluate_feature(&g, &def).unwrap().into_final();
        let b = evaluate_feature(&h, &def).unwrap().into_final();
        for v in 0..n {
            prop_assert!((a[v] - b[perm[v]]).abs() <= 1e-9 * a[v].abs().max(1.0));
        }
    }

    #[test]
    fn learned_features_are_deduplicated(seed in any::<u64>(), n in 5usize..30, p in 0.05f64..0.4, directed in any::<bool>()) {
        let g = random_graph(&mut rng(seed), n, p, directed);
        let config = LearnConfig::default_for(directed);
        let defs = learn_features(&g, &config).unwrap();
        let bins: Vec<Vec<usize>> = defs
            .iter()
            .map(|d| log_binning(evaluate_feature(&g, d).unwrap().final_values(), config.bin_fraction))
            .collect();
        for i in 0..bins.len() {
            for j in i + 1..bins.len() {
                prop_assert!(
                    bin_agreement(&bins[i], &bins[j]) < config.prune_threshold,
                    "{} and {} agree", defs[i].describe(), defs[j].describe()
                );
            }
        }
    }
}

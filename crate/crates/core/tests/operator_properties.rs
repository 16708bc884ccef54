use hhgnn_core::nn::{sparse_dense_matmul, Tensor2};
use hhgnn_core::{Error, Hypergraph, NodeType};
use proptest::prelude::*;

fn hypergraph_strategy() -> impl Strategy<Value = Hypergraph> {
    (2..16usize)
        .prop_flat_map(|n| {
            let edge = proptest::collection::btree_set(0..n, 2..=n.min(5));
            (
                Just(n),
                proptest::collection::vec((edge, 0.01..10.0f64), 1..12),
            )
        })
        .prop_map(|(n, edges)| {
            let mut list: Vec<Vec<usize>> = edges.iter().map(|(e, _)| e.iter().copied().collect()).collect();
            let mut weights: Vec<f64> = edges.iter().map(|(_, w)| *w).collect();
            // Cover stray nodes with one extra edge so none is isolated.
            let covered: std::collections::BTreeSet<usize> = list.iter().flatten().copied().collect();
            let mut stray: Vec<usize> = (0..n).filter(|v| !covered.contains(v)).collect();
            if !stray.is_empty() {
                if stray.len() == 1 {
                    stray.push(if stray[0] == 0 { 1 } else { 0 });
                }
                list.push(stray);
                weights.push(1.0);
            }
            Hypergraph::new(vec![NodeType::Activity; n], list, weights, None).unwrap()
        })
}

proptest! {
    #[test]
    fn row_stochastic_with_co_membership_support(g in hypergraph_strategy()) {
        let l = g.conv_operator().unwrap();
        for (r, s) in l.row_sums().iter().enumerate() {
            prop_assert!((s - 1.0).abs() < 1e-12, "row {} sums to {}", r, s);
        }
        for &(u, v, x) in l.entries() {
            prop_assert!(x > 0.0);
            prop_assert!(g.edges().iter().any(|e| e.contains(&u) && e.contains(&v)));
        }
    }

    #[test]
    fn uniform_weight_scaling_leaves_operator_unchanged(g in hypergraph_strategy(), c in 0.1..50.0f64) {
        let a = g.conv_operator().unwrap().to_dense();
        let b = g.scaled_weights(c).unwrap().conv_operator().unwrap().to_dense();
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn propagation_preserves_constant_signals(g in hypergraph_strategy(), k in -5.0..5.0f64) {
        let l = g.conv_operator().unwrap();
        let x = Tensor2::from_fn(g.num_nodes(), 3, |_, c| k * (c + 1) as f64);
        let y = sparse_dense_matmul(&l, &x).unwrap();
        prop_assert!(y.max_abs_diff(&x) < 1e-12);
    }
}

#[test]
fn isolated_node_is_reported() {
    let g = Hypergraph::new(vec![NodeType::User; 3], vec![vec![0, 1]], vec![1.0], None).unwrap();
    assert!(matches!(g.conv_operator(), Err(Error::IsolatedNode(2))));
}

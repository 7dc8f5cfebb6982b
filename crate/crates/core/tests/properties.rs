//! Property tests: CSR constructor invariants, loss permutation equivariance,
//! and grid symmetry under swapping an orthonormal basis.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lossland::graph::{generate_synthetic_sbm, sparsify_edges};
use lossland::landscape::{evaluate_landscape_grid, MaskKind};
use lossland::mat::norm2;
use lossland::model::{cross_entropy_loss, model_forward, Architecture, JumpingKnowledge, ModelConfig};
use lossland::projection::DirectionPair;
use lossland::{FlatParams, Graph, Mat};

fn config(arch: Architecture, seed: u64) -> ModelConfig {
    ModelConfig {
        architecture: arch,
        num_layers: 2,
        hidden_dim: 4,
        jumping_knowledge: JumpingKnowledge::None,
        gin_epsilon_init: 0.1,
        gat_leaky_slope: 0.2,
        seed,
    }
}

/// Arbitrary simple undirected edge list over `n` nodes.
fn edge_list(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    if n < 2 {
        return Just(Vec::new()).boxed();
    }
    proptest::collection::btree_set((0..n, 0..n), 0..=(n * (n - 1) / 2).min(40))
        .prop_map(|set| {
            let mut seen = std::collections::BTreeSet::new();
            let mut edges = Vec::new();
            for (u, v) in set {
                if u == v {
                    continue;
                }
                let key = (u.min(v), u.max(v));
                if seen.insert(key) {
                    edges.push(key);
                }
            }
            edges
        })
        .boxed()
}

fn trivial_graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    let mut train = vec![false; n];
    let mut val = vec![false; n];
    let mut test = vec![false; n];
    for i in 0..n {
        match i % 3 {
            0 => train[i] = true,
            1 => val[i] = true,
            _ => test[i] = true,
        }
    }
    Graph::from_undirected_edges(
        n,
        edges,
        Mat::from_vec(n, 2, (0..2 * n).map(|x| x as f64 * 0.1).collect()),
        (0..n).map(|i| i % 2).collect(),
        train,
        val,
        test,
        2,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn csr_invariants_from_edge_constructor(n in 2usize..12, edges in edge_list(11)) {
        let edges: Vec<_> = edges.into_iter().filter(|&(u, v)| u < n && v < n).collect();
        let g = trivial_graph(n, &edges);
        g.validate().unwrap();
        // adjacency is symmetric and loop-free
        for i in 0..n {
            for &j in g.neighbors(i) {
                prop_assert!(i != j);
                prop_assert!(g.neighbors(j).contains(&i));
            }
        }
        let entries: usize = (0..n).map(|i| g.neighbors(i).len()).sum();
        prop_assert_eq!(entries, 2 * edges.len());
    }

    #[test]
    fn csr_invariants_sbm_and_sparsify(seed in 0u64..200, keep in 0.0f64..=1.0) {
        let g = generate_synthetic_sbm(2, 6, 0.6, 0.2, 3, seed).unwrap();
        g.validate().unwrap();
        let s = sparsify_edges(&g, keep, seed).unwrap();
        s.validate().unwrap();
        // kept adjacency is a subset of the original
        for i in 0..s.num_nodes {
            for &j in s.neighbors(i) {
                prop_assert!(g.neighbors(i).contains(&j));
            }
        }
    }

    #[test]
    fn loss_is_permutation_equivariant(seed in 0u64..50, arch_ix in 0usize..3) {
        let arch = [Architecture::Gcn, Architecture::Gat, Architecture::Gin][arch_ix];
        let g = generate_synthetic_sbm(2, 6, 0.7, 0.2, 3, seed).unwrap();
        let cfg = config(arch, seed);
        let params = cfg.init_params(g.features.cols(), g.num_classes);
        let (logits, _) = model_forward(&cfg, &g, &params).unwrap();
        let loss = cross_entropy_loss(&logits, &g.labels, &g.train_mask).unwrap();

        // relabel nodes by a seeded permutation
        let n = g.num_nodes;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let mut edges = Vec::new();
        for u in 0..n {
            for &v in g.neighbors(u) {
                if u < v {
                    edges.push((perm[u], perm[v]));
                }
            }
        }
        let mut feats = Mat::zeros(n, g.features.cols());
        let mut labels = vec![0usize; n];
        let mut train = vec![false; n];
        let mut val = vec![false; n];
        let mut test = vec![false; n];
        for i in 0..n {
            feats.row_mut(perm[i]).copy_from_slice(g.features.row(i));
            labels[perm[i]] = g.labels[i];
            train[perm[i]] = g.train_mask[i];
            val[perm[i]] = g.val_mask[i];
            test[perm[i]] = g.test_mask[i];
        }
        let gp = Graph::from_undirected_edges(
            n, &edges, feats, labels, train, val, test, g.num_classes,
        ).unwrap();
        let (logits_p, _) = model_forward(&cfg, &gp, &params).unwrap();
        let loss_p = cross_entropy_loss(&logits_p, &gp.labels, &gp.train_mask).unwrap();
        prop_assert!((loss - loss_p).abs() < 1e-12, "loss {} vs permuted {}", loss, loss_p);
    }

    #[test]
    fn grid_transposes_under_basis_swap(seed in 0u64..20) {
        let g = generate_synthetic_sbm(2, 5, 0.8, 0.1, 3, seed).unwrap();
        let cfg = config(Architecture::Gcn, seed);
        let star = cfg.init_params(g.features.cols(), g.num_classes);
        let d = star.dim();
        // orthonormal pair from seeded Gaussians
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b1: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut b2: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n1 = norm2(&b1);
        prop_assume!(n1 > 1e-9);
        for v in &mut b1 { *v /= n1; }
        let proj: f64 = b1.iter().zip(&b2).map(|(a, b)| a * b).sum();
        for (v, u) in b2.iter_mut().zip(&b1) { *v -= proj * u; }
        let n2 = norm2(&b2);
        prop_assume!(n2 > 1e-9);
        for v in &mut b2 { *v /= n2; }

        let dirs = DirectionPair::new(
            b1.clone(), b2.clone(), lossland::ProjectionMethod::Random, None,
        );
        let swapped = DirectionPair::new(
            b2, b1, lossland::ProjectionMethod::Random, None,
        );
        let res = 7;
        let eval = |dirs: &DirectionPair| {
            evaluate_landscape_grid(
                &cfg, &g, &star, dirs, (-0.5, 0.5), (-0.5, 0.5), res,
                MaskKind::Train, "t",
            ).unwrap()
        };
        let a = eval(&dirs);
        let b = eval(&swapped);
        for ix in 0..res {
            for iy in 0..res {
                // x·b1 + y·b2 is summed in swapped order, so allow fp slack
                let (va, vb) = (a.value(ix, iy), b.value(iy, ix));
                prop_assert!((va - vb).abs() <= 1e-12 * va.abs().max(1.0));
            }
        }
    }
}

#[test]
fn flat_params_dim_helper() {
    let cfg = config(Architecture::Gcn, 0);
    let p: FlatParams = cfg.init_params(3, 2);
    assert_eq!(p.dim(), p.values.len());
}

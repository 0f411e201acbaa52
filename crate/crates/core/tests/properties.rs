use nalgebra::DMatrix;
use proptest::prelude::*;

use loopfield::bridges::{bridge_integral, zero_probability_closed_form, BridgeProblem};
use loopfield::clusters::ClusterPartition;
use loopfield::coupling::{couple, opening_probability, structural_violations};
use loopfield::experiment::{ExperimentConfig, NetworkSpec};
use loopfield::green::{compute_green, energy_matrix, interpolated_green, sqrt_det_ratio, EdgePoint};
use loopfield::interlacement::compute_capacity;
use loopfield::loopsoup::LoopSoupSampler;
use loopfield::network::{modified_network, Edge, Network};
use loopfield::rng::derive_stream;

/// Connected networks: a random spanning tree plus extra edges, with at
/// least one vertex killed.
fn networks() -> impl Strategy<Value = Network> {
    (2usize..8).prop_flat_map(|n| {
        let parents: Vec<BoxedStrategy<usize>> = (1..n).map(|i| (0..i).boxed()).collect();
        (
            parents,
            proptest::collection::vec((0..n, 0..n), 0..n),
            proptest::collection::vec(0.1f64..5.0, 2 * n),
            proptest::collection::vec(prop_oneof![Just(0.0), 0.05f64..3.0], n),
            0..n,
        )
            .prop_map(move |(parents, extra, cond, mut killing, killed)| {
                let mut pairs: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();
                for (a, b) in extra {
                    let key = (a.min(b), a.max(b));
                    if a != b && !pairs.iter().any(|&(u, v)| (u.min(v), u.max(v)) == key) {
                        pairs.push((a, b));
                    }
                }
                if killing[killed] == 0.0 {
                    killing[killed] = 0.5;
                }
                let edges = pairs
                    .iter()
                    .zip(cond.iter().cycle())
                    .map(|(&(u, v), &c)| Edge { u, v, conductance: c })
                    .collect();
                Network::new(n, edges, killing).unwrap()
            })
    })
}

fn dense_det(m: &DMatrix<f64>) -> f64 {
    m.clone().determinant()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jump_probabilities_sum_to_one(net in networks()) {
        for x in 0..net.vertex_count() {
            let s: f64 = net.neighbors(x).iter().map(|&(y, _)| net.jump_probability(x, y)).sum::<f64>()
                + net.killing_probability(x);
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
        for (id, e) in net.edges().iter().enumerate() {
            prop_assert!((net.edge_length(id) * 2.0 * e.conductance - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn modification_preserves_rates(net in networks(), pick in any::<prop::sample::Index>()) {
        let id = pick.index(net.edge_count());
        let m = modified_network(&net, &[id]).unwrap();
        prop_assert_eq!(m.edge_count(), net.edge_count() - 1);
        for x in 0..net.vertex_count() {
            prop_assert!((m.total_rate(x) - net.total_rate(x)).abs() < 1e-12 * net.total_rate(x));
        }
    }

    #[test]
    fn green_inverts_energy(net in networks()) {
        let gop = compute_green(&net).unwrap();
        let n = net.vertex_count();
        let prod = energy_matrix(&net) * gop.matrix();
        for x in 0..n {
            for y in 0..n {
                let want = if x == y { 1.0 } else { 0.0 };
                prop_assert!((prod[(x, y)] - want).abs() < 1e-9);
                prop_assert_eq!(gop.green(x, y), gop.green(y, x));
                prop_assert!(gop.green(x, y) > 0.0);
                prop_assert!(gop.normalized(x, y).unwrap() <= 1.0);
            }
        }
    }

    #[test]
    fn det_ratio_matches_determinants_and_is_monotone(net in networks(), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let e1 = a.index(net.edge_count());
        let e2 = b.index(net.edge_count());
        let one = sqrt_det_ratio(&net, &[e1]).unwrap();
        let mut both = vec![e1, e2];
        both.dedup();
        let two = sqrt_det_ratio(&net, &both).unwrap();
        let dense = (dense_det(&energy_matrix(&net)) / dense_det(&energy_matrix(&modified_network(&net, &[e1]).unwrap()))).sqrt();
        prop_assert!((one - dense).abs() < 1e-9 * dense);
        prop_assert!(one > 0.0 && one <= 1.0 + 1e-12);
        prop_assert!(two <= one + 1e-12);
    }

    #[test]
    fn cable_green_is_symmetric(net in networks(), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>(), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let gop = compute_green(&net).unwrap();
        let (e1, e2) = (a.index(net.edge_count()), b.index(net.edge_count()));
        let p = EdgePoint::new(e1, s * net.edge_length(e1));
        let q = EdgePoint::new(e2, t * net.edge_length(e2));
        let pq = interpolated_green(&gop, &net, p, q).unwrap();
        let qp = interpolated_green(&gop, &net, q, p).unwrap();
        prop_assert!((pq - qp).abs() < 1e-12 * pq.abs().max(1.0));
        prop_assert!(pq > 0.0);
    }

    #[test]
    fn capacity_matches_green_inverse(net in networks(), picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..4)) {
        let mut k: Vec<usize> = picks.iter().map(|i| i.index(net.vertex_count())).collect();
        k.sort_unstable();
        k.dedup();
        let gop = compute_green(&net).unwrap();
        let m = DMatrix::from_fn(k.len(), k.len(), |i, j| gop.green(k[i], k[j]));
        let want: f64 = m.try_inverse().unwrap().iter().sum();
        let got = compute_capacity(&net, &k).unwrap();
        prop_assert!((got.capacity - want).abs() < 1e-8 * want);
        prop_assert!(got.equilibrium.iter().all(|&e| e >= -1e-12));
    }

    #[test]
    fn coupled_samples_satisfy_invariants(net in networks(), seed in any::<u64>()) {
        let gop = compute_green(&net).unwrap();
        let sampler = LoopSoupSampler::new(&net, &gop, 1e-6).unwrap();
        let mut rng = derive_stream(seed, 0);
        for _ in 0..20 {
            let soup = sampler.sample(0.5, &mut rng).unwrap();
            for l in &soup.loops {
                prop_assert!(l.skeleton.is_valid(&net));
            }
            let c = couple(&net, soup, &mut rng).unwrap();
            prop_assert_eq!(structural_violations(&c), 0);
            prop_assert!(c.base_clusters.refines(&c.merged_clusters));
        }
    }

    #[test]
    fn cluster_links_are_respected(n in 1usize..30, links in proptest::collection::vec((0usize..30, 0usize..30), 0..40)) {
        let links: Vec<(usize, usize, usize)> = links.into_iter().enumerate().map(|(i, (a, b))| (a % n, b % n, i)).collect();
        let p = ClusterPartition::from_links(n, links.iter().copied());
        for &(a, b, _) in &links {
            prop_assert!(p.same_cluster(a, b));
        }
        let total: usize = p.clusters().iter().map(|c| c.vertices.len()).sum();
        prop_assert_eq!(total, n);
        for c in p.clusters() {
            prop_assert!(c.vertices.iter().all(|&x| p.label(x) == c.vertices[0]));
        }
        prop_assert!(ClusterPartition::from_links(n, std::iter::empty()).refines(&p));
    }

    #[test]
    fn cable_opening_is_the_bridge_law(c in 0.01f64..10.0, l1 in 1e-6f64..10.0, l2 in 1e-6f64..10.0) {
        let p = BridgeProblem::new(1.0 / (2.0 * c), l1, l2).unwrap();
        let closed = zero_probability_closed_form(&p);
        prop_assert!(((-2.0 * c * (l1 * l2).sqrt()).exp() - closed).abs() < 1e-12);
        prop_assert!((opening_probability(c, l1, l2) - (1.0 - closed)).abs() < 1e-12);
    }

    #[test]
    fn quadrature_tracks_closed_form(lambda in 0.0f64..30.0) {
        let got = bridge_integral(lambda, 1e-10).unwrap();
        let want = std::f64::consts::PI.sqrt() * (-2.0 * lambda.sqrt()).exp();
        prop_assert!((got - want).abs() < 1e-9 * want);
    }

    #[test]
    fn configs_round_trip(seed in any::<u64>(), replicas in 1usize..1_000_000, u in proptest::collection::vec(0.01f64..5.0, 1..4)) {
        let mut c = ExperimentConfig::new("levelset");
        c.seed = seed;
        c.replicas = replicas;
        c.params.u = Some(u);
        c.network = Some(NetworkSpec::Builtin("grid3x3".into()));
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}

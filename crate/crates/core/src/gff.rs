//! Gaussian free field samples and metric-graph sign percolation.
//!
//! The field on the cables is never sampled pathwise. Conditional on the
//! vertex values, the field along an edge of length `ρ = 1/(2C)` is a
//! Brownian bridge of variance 2 per unit length, and it has no zero with
//! probability `1 - exp(-2 C φ_x φ_y)` when `φ_x φ_y > 0`. That indicator is
//! all the sign clusters need.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::clusters::ClusterPartition;
use crate::error::{Error, Result};
use crate::green::GreenOperator;
use crate::network::Network;
use crate::report::TestRecord;
use crate::rng::replicate;
use crate::stats::{Estimate, Thresholds};

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub values: Vec<f64>,
}

impl FieldSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeConfiguration {
    pub open: Vec<bool>,
}

/// `φ = L z` with `L Lᵀ = G` and `z` standard normal, drawn in vertex order.
pub fn sample_gff<R: Rng + ?Sized>(gop: &GreenOperator, rng: &mut R) -> FieldSample {
    let n = gop.vertex_count();
    let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let phi = gop.chol() * z;
    FieldSample { values: phi.as_slice().to_vec() }
}

/// Probability that the cable of conductance `c` between field values `a`
/// and `b` carries no zero. Exact zeros close the edge.
pub fn edge_open_probability(c: f64, a: f64, b: f64) -> f64 {
    let prod = a * b;
    if prod > 0.0 {
        -(-2.0 * c * prod).exp_m1()
    } else {
        0.0
    }
}

/// Opens each edge independently with [`edge_open_probability`]. One
/// uniform is consumed per edge, in edge order.
pub fn sample_edge_configuration<R: Rng + ?Sized>(
    field: &FieldSample,
    net: &Network,
    rng: &mut R,
) -> Result<EdgeConfiguration> {
    if field.len() != net.vertex_count() {
        return Err(Error::InvalidParameter(format!(
            "field has {} values for {} vertices",
            field.len(),
            net.vertex_count()
        )));
    }
    let open = net
        .edges()
        .iter()
        .map(|e| {
            let p = edge_open_probability(e.conductance, field.values[e.u], field.values[e.v]);
            rng.random::<f64>() < p
        })
        .collect();
    Ok(EdgeConfiguration { open })
}

/// `(2/π) arcsin g(x,y)`: probability that `x` and `y` share a sign cluster
/// of the metric-graph field.
pub fn connectivity_probability(gop: &GreenOperator, x: usize, y: usize) -> Result<f64> {
    Ok(std::f64::consts::FRAC_2_PI * gop.normalized(x, y)?.asin())
}

pub fn cluster_edges(config: &EdgeConfiguration, net: &Network) -> ClusterPartition {
    ClusterPartition::from_links(
        net.vertex_count(),
        net.edges()
            .iter()
            .enumerate()
            .filter(|(id, _)| config.open[*id])
            .map(|(id, e)| (e.u, e.v, id)),
    )
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Monte Carlo check of the arcsine law for the pair `(x, y)`: the
/// frequency of `x ↔ y` in ω and the sign correlation of the vertex field,
/// both against `(2/π) arcsin g(x,y)`.
pub fn verify_connectivity(
    net: &Network,
    gop: &GreenOperator,
    x: usize,
    y: usize,
    replicas: usize,
    seed: u64,
    th: &Thresholds,
) -> Result<Vec<TestRecord>> {
    net.check_vertex(x)?;
    net.check_vertex(y)?;
    let exact = connectivity_probability(gop, x, y)?;
    let draws: Vec<(bool, f64)> = replicate(replicas, seed, |rng| {
        let phi = sample_gff(gop, rng);
        let config = sample_edge_configuration(&phi, net, rng).expect("field matches network");
        let connected = cluster_edges(&config, net).same_cluster(x, y);
        (connected, sign(phi.values[x]) * sign(phi.values[y]))
    });
    let freq = Estimate::from_bools(draws.iter().map(|d| d.0));
    let corr = Estimate::from_iter(draws.iter().map(|d| d.1));
    Ok(vec![
        TestRecord::z_test(
            format!("connectivity({x},{y})"),
            "P(x <-> y in omega) = (2/pi) arcsin g(x,y)",
            exact,
            freq,
            th,
        ),
        TestRecord::z_test(
            format!("sign-correlation({x},{y})"),
            "E[sign phi_x sign phi_y] = (2/pi) arcsin g(x,y)",
            exact,
            corr,
            th,
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::compute_green;
    use crate::network::{build_grid_network, build_path_network};
    use crate::rng::derive_stream;
    use crate::stats::{ks_test, normal_cdf};
    use approx::assert_abs_diff_eq;

    fn two_vertex() -> Network {
        Network::from_triples(2, &[(0, 1, 1.0)], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn opening_probabilities() {
        assert_eq!(edge_open_probability(1.0, 1.0, -1.0), 0.0);
        assert_eq!(edge_open_probability(1.0, 0.0, 3.0), 0.0);
        assert_abs_diff_eq!(edge_open_probability(1.0, 1.0, 1.0), 0.864_664_716_763_387_3, epsilon = 1e-15);
        assert_abs_diff_eq!(edge_open_probability(1.0, -1.0, -1.0), 1.0 - (-2.0f64).exp(), epsilon = 1e-15);
    }

    // Oracle: simulate the variance-2 bridge on a fine grid and look for a
    // sign change. Discretisation misses some zeros, so the estimate is an
    // upper bound on the no-zero probability that tightens with the grid.
    #[test]
    fn opening_probability_matches_discretised_bridge() {
        let (a, b, c) = (1.0, 1.0, 1.0);
        let rho = 1.0 / (2.0 * c);
        let steps = 2000;
        let dt = rho / steps as f64;
        let mut rng = derive_stream(11, 0);
        let reps = 20_000;
        let mut no_zero = 0;
        for _ in 0..reps {
            // Brownian motion of variance 2 per unit time, pinned afterwards
            let mut w = vec![0.0; steps + 1];
            for i in 1..=steps {
                w[i] = w[i - 1] + (2.0 * dt).sqrt() * rng.sample::<f64, _>(StandardNormal);
            }
            let wt = w[steps];
            let positive = (0..=steps).all(|i| {
                let t = i as f64 / steps as f64;
                a + (b - a) * t + w[i] - t * wt > 0.0
            });
            no_zero += positive as usize;
        }
        let est = Estimate::from_bools((0..reps).map(|i| i < no_zero));
        let exact = edge_open_probability(c, a, b);
        // the discretised walk overestimates by O(sqrt(dt))
        assert!(est.mean > exact - 4.0 * est.stderr, "{} vs {exact}", est.mean);
        assert!(est.mean < exact + 0.02, "{} vs {exact}", est.mean);
    }

    #[test]
    fn arcsin_values() {
        let gop = compute_green(&two_vertex()).unwrap();
        assert_abs_diff_eq!(connectivity_probability(&gop, 0, 1).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(connectivity_probability(&gop, 1, 1).unwrap(), 1.0);
        let far = Network::from_triples(2, &[(0, 1, 1e-300)], vec![1.0, 1.0]).unwrap();
        let gop = compute_green(&far).unwrap();
        assert_abs_diff_eq!(connectivity_probability(&gop, 0, 1).unwrap(), 0.0, epsilon = 1e-200);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let gop = compute_green(&build_grid_network(&[3, 3], 1.0, 0.5).unwrap()).unwrap();
        let a = sample_gff(&gop, &mut derive_stream(5, 17));
        let b = sample_gff(&gop, &mut derive_stream(5, 17));
        assert_eq!(a, b);
    }

    #[test]
    fn single_vertex_marginal() {
        let net = Network::from_triples(1, &[], vec![3.0]).unwrap();
        let gop = compute_green(&net).unwrap();
        let xs: Vec<f64> = replicate(20_000, 1, |rng| sample_gff(&gop, rng).values[0]);
        let r = ks_test(&xs, |x| normal_cdf(x, 1.0 / 3.0));
        assert!(r.p_value > 1e-3, "{r:?}");
    }

    #[test]
    fn two_vertex_covariance() {
        let gop = compute_green(&two_vertex()).unwrap();
        let fields: Vec<FieldSample> = replicate(100_000, 2, |rng| sample_gff(&gop, rng));
        let target = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                let est = Estimate::from_iter(fields.iter().map(|f| f.values[i] * f.values[j]));
                assert!(est.z_against(target[i][j]).abs() < 3.9, "({i},{j}): {est:?}");
            }
        }
    }

    #[test]
    fn never_opens_across_a_sign_change() {
        let net = build_grid_network(&[4, 4], 1.0, 0.5).unwrap();
        let gop = compute_green(&net).unwrap();
        let mut rng = derive_stream(3, 0);
        for _ in 0..2000 {
            let phi = sample_gff(&gop, &mut rng);
            let conf = sample_edge_configuration(&phi, &net, &mut rng).unwrap();
            for (e, &open) in net.edges().iter().zip(&conf.open) {
                if open {
                    assert!(phi.values[e.u] * phi.values[e.v] > 0.0);
                }
            }
        }
    }

    #[test]
    fn cluster_edges_examples() {
        let net = build_path_network(3, 1.0, 1.0).unwrap();
        let closed = EdgeConfiguration { open: vec![false; 2] };
        assert_eq!(cluster_edges(&closed, &net).len(), 3);
        let open = EdgeConfiguration { open: vec![true; 2] };
        assert_eq!(cluster_edges(&open, &net).len(), 1);
        let ab = EdgeConfiguration { open: vec![true, false] };
        let p = cluster_edges(&ab, &net);
        assert_eq!(p.clusters()[0].vertices, vec![0, 1]);
        assert_eq!(p.clusters()[1].vertices, vec![2]);
    }

    #[test]
    fn wrong_field_length_rejected() {
        let net = build_path_network(3, 1.0, 1.0).unwrap();
        let phi = FieldSample { values: vec![1.0; 2] };
        assert!(sample_edge_configuration(&phi, &net, &mut derive_stream(0, 0)).is_err());
    }
}

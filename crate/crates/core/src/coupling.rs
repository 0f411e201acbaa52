//! The loop soup at one-half, turned into a free field.
//!
//! Edges no loop crosses are opened with probability
//! `1 - exp(-2C √(L̂^x L̂^y))`, loop clusters are merged across them, and each
//! merged cluster receives an independent uniform sign. The field
//! `σ √(2 L̂)` is then a centred Gaussian vector with covariance `G`.

use rand::Rng;

use crate::clusters::ClusterPartition;
use crate::error::{Error, Result};
use crate::gff::{sample_gff, sign};
use crate::green::GreenOperator;
use crate::gff::FieldSample;
use crate::loopsoup::{
    loop_clusters, occupation_field, traversed_edges, LoopSoupSample, LoopSoupSampler, OccupationField,
};
use crate::network::{EdgeId, Network};
use crate::report::TestRecord;
use crate::rng::replicate;
use crate::stats::{ks_test, normal_cdf, Estimate, Thresholds};

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSample {
    pub soup: LoopSoupSample,
    pub occupation: OccupationField,
    pub base_clusters: ClusterPartition,
    pub traversed: Vec<bool>,
    /// Untraversed edges opened by the extra coin flips, in increasing order.
    pub extra_open_edges: Vec<EdgeId>,
    pub merged_clusters: ClusterPartition,
    /// One sign per merged cluster, in cluster order.
    pub signs: Vec<f64>,
    pub field: FieldSample,
}

impl CoupledSample {
    /// Edges inside a merged cluster: traversed or extra-opened.
    pub fn open_edges(&self) -> Vec<bool> {
        let mut open = self.traversed.clone();
        for &e in &self.extra_open_edges {
            open[e] = true;
        }
        open
    }
}

/// `1 - exp(-2C √(ℓ_x ℓ_y))`.
pub fn opening_probability(conductance: f64, lx: f64, ly: f64) -> f64 {
    -(-2.0 * conductance * (lx * ly).sqrt()).exp_m1()
}

/// Builds the coupled field from a soup sampled at α = ½. Consumes one
/// uniform per untraversed edge in edge order, then one sign per merged
/// cluster ordered by smallest vertex.
pub fn couple<R: Rng + ?Sized>(net: &Network, soup: LoopSoupSample, rng: &mut R) -> Result<CoupledSample> {
    if soup.alpha != 0.5 {
        return Err(Error::InvalidParameter(format!(
            "coupling needs a soup at alpha = 1/2, got {}",
            soup.alpha
        )));
    }
    if soup.trivial_occupation.len() != net.vertex_count() {
        return Err(Error::InvalidParameter("soup does not belong to this network".into()));
    }
    let occupation = occupation_field(&soup);
    let base_clusters = loop_clusters(&soup, net);
    let traversed = traversed_edges(&soup, net);
    let l = &occupation.values;

    let mut extra_open_edges = Vec::new();
    for (id, e) in net.edges().iter().enumerate() {
        if traversed[id] {
            continue;
        }
        if rng.random::<f64>() < opening_probability(e.conductance, l[e.u], l[e.v]) {
            extra_open_edges.push(id);
        }
    }

    let merged_clusters = ClusterPartition::from_links(
        net.vertex_count(),
        net.edges()
            .iter()
            .enumerate()
            .filter(|(id, _)| traversed[*id] || extra_open_edges.binary_search(id).is_ok())
            .map(|(id, e)| (e.u, e.v, id)),
    );
    let signs: Vec<f64> = (0..merged_clusters.len())
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let values = l
        .iter()
        .enumerate()
        .map(|(x, &lx)| signs[merged_clusters.cluster_of(x)] * (2.0 * lx).sqrt())
        .collect();

    Ok(CoupledSample {
        soup,
        occupation,
        base_clusters,
        traversed,
        extra_open_edges,
        merged_clusters,
        signs,
        field: FieldSample { values },
    })
}

/// Violations of the coupling's structural invariants in one sample: sign
/// changes inside a base loop cluster, base clusters split by the merge,
/// extra edges that were traversed, and `|φ| ≠ √(2 L̂)`.
pub fn structural_violations(sample: &CoupledSample) -> usize {
    let phi = &sample.field.values;
    let mut bad = 0;
    for c in sample.base_clusters.clusters() {
        let s = sign(phi[c.vertices[0]]);
        bad += c.vertices.iter().filter(|&&x| sign(phi[x]) != s).count();
    }
    if !sample.base_clusters.refines(&sample.merged_clusters) {
        bad += 1;
    }
    bad += sample.extra_open_edges.iter().filter(|&&e| sample.traversed[e]).count();
    for (x, &l) in sample.occupation.values.iter().enumerate() {
        if (phi[x].abs() - (2.0 * l).sqrt()).abs() > 1e-12 * (1.0 + phi[x].abs()) {
            bad += 1;
        }
    }
    bad
}

struct Draw {
    field: Vec<f64>,
    violations: usize,
    closed: bool,
}

/// Checks that the coupled field is a GFF: per-vertex KS against
/// `N(0, G(x,x))`, second moments against `G`, sign correlations against
/// `(2/π) arcsin g`, the exact sign-constancy invariant, and for the first
/// edge the probability that it lies outside every merged cluster against
/// `E[exp(-C(|ψ_xψ_y| + ψ_xψ_y))]` from independent GFF samples.
pub fn verify_gff_law(
    net: &Network,
    gop: &GreenOperator,
    replicas: usize,
    seed: u64,
    length_cutoff_eps: f64,
    th: &Thresholds,
) -> Result<Vec<TestRecord>> {
    let sampler = LoopSoupSampler::new(net, gop, length_cutoff_eps)?;
    let draws: Vec<Draw> = replicate(replicas, seed, |rng| {
        let soup = sampler.sample(0.5, rng).expect("valid alpha");
        let c = couple(net, soup, rng).expect("soup at one-half");
        let closed = net.edge_count() > 0 && !c.open_edges()[0];
        Draw { violations: structural_violations(&c), field: c.field.values, closed }
    });
    let n = net.vertex_count();
    let mut records = Vec::new();
    for x in 0..n {
        let xs: Vec<f64> = draws.iter().map(|d| d.field[x]).collect();
        records.push(TestRecord::ks(
            format!("coupled-normal[{x}]"),
            "phi_x ~ N(0, G(x,x))",
            ks_test(&xs, |t| normal_cdf(t, gop.green(x, x))),
            th,
        ));
    }
    for x in 0..n {
        for y in x..n {
            records.push(TestRecord::z_test(
                format!("coupled-covariance[{x},{y}]"),
                "E[phi_x phi_y] = G(x,y)",
                gop.green(x, y),
                Estimate::from_iter(draws.iter().map(|d| d.field[x] * d.field[y])),
                th,
            ));
        }
    }
    for x in 0..n {
        for y in x + 1..n {
            records.push(TestRecord::z_test(
                format!("coupled-sign-correlation[{x},{y}]"),
                "E[sign phi_x sign phi_y] = (2/pi) arcsin g(x,y)",
                std::f64::consts::FRAC_2_PI * gop.normalized(x, y)?.asin(),
                Estimate::from_iter(draws.iter().map(|d| sign(d.field[x]) * sign(d.field[y]))),
                th,
            ));
        }
    }
    records.push(TestRecord::structural(
        "sign-constancy",
        "sign of phi is constant on every loop cluster",
        draws.iter().map(|d| d.violations).sum(),
    ));
    if let Some(e) = net.edges().first() {
        let (u, v, c) = (e.u, e.v, e.conductance);
        let gff: Vec<f64> = replicate(replicas, seed ^ 0x9e37_79b9_7f4a_7c15, |rng| {
            let psi = sample_gff(gop, rng).values;
            let p = psi[u] * psi[v];
            (-c * (p.abs() + p)).exp()
        });
        records.push(TestRecord::two_sample(
            format!("closed-edge({u},{v})"),
            "P(e outside all augmented clusters) = E[exp(-C(|psi_x psi_y| + psi_x psi_y))]",
            Estimate::from_bools(draws.iter().map(|d| d.closed)),
            Estimate::from_samples(&gff),
            None,
            th,
        ));
    }
    Ok(records)
}

//! Poisson ensembles of Markov loops.
//!
//! Nontrivial loops are sampled through their discrete skeletons. A rooted
//! skeleton `(x₀, …, x_{n-1})` with `n ≥ 2` carries weight
//! `Π P(x_i, x_{i+1}) / n`; summing over the `n` rootings gives the unrooted
//! loop measure, so rotations are never de-duplicated. The total mass of
//! rooted skeletons is `Σ_n tr(Pⁿ)/n = -log det(I - P)`.
//!
//! Conditional on the skeleton, each visit to `x` holds for an independent
//! `Exp(λ_x)` time. Loops that never leave their vertex are not enumerated:
//! at `x` their durations form a Poisson process with intensity
//! `α t⁻¹ e^{-λ_x t} dt`, whose sum is `Gamma(α, rate λ_x)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::clusters::ClusterPartition;
use crate::error::{Error, Result};
use crate::green::{sqrt_det_ratio, GreenOperator};
use crate::network::{EdgeId, Network};
use crate::report::TestRecord;
use crate::rng::replicate;
use crate::stats::{gamma_cdf, ks_test, Estimate, Thresholds};

/// Default bound on the skeleton mass discarded by length truncation,
/// relative to the total mass.
pub const DEFAULT_LENGTH_CUTOFF: f64 = 1e-9;

const MAX_LOOP_LENGTH: usize = 200_000;

/// Cyclic vertex sequence of a loop; consecutive entries (and last to
/// first) are adjacent.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopSkeleton {
    pub vertices: Vec<usize>,
}

impl LoopSkeleton {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Consecutive vertex pairs, closing the cycle.
    pub fn steps(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn is_valid(&self, net: &Network) -> bool {
        self.len() >= 2 && self.steps().all(|(a, b)| net.edge_id(a, b).is_some())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteLoop {
    pub skeleton: LoopSkeleton,
    pub holding_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopSoupSample {
    pub loops: Vec<DiscreteLoop>,
    pub trivial_occupation: Vec<f64>,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupationField {
    pub values: Vec<f64>,
}

/// Precomputed skeleton law of a network: matrix powers, the truncated
/// length distribution and the loop mass.
#[derive(Clone, Debug)]
pub struct LoopSoupSampler<'a> {
    net: &'a Network,
    powers: Vec<DMatrix<f64>>,
    length_cdf: Vec<f64>,
    mass: f64,
    truncated_mass: f64,
    tail_bound: f64,
    spectral_radius: f64,
}

fn jump_matrix(net: &Network) -> DMatrix<f64> {
    let n = net.vertex_count();
    let mut p = DMatrix::zeros(n, n);
    for e in net.edges() {
        p[(e.u, e.v)] = e.conductance / net.total_rate(e.u);
        p[(e.v, e.u)] = e.conductance / net.total_rate(e.v);
    }
    p
}

/// Eigenvalues of `P`, through the symmetric matrix `Λ^{-1/2} C Λ^{-1/2}`.
pub fn jump_spectrum(net: &Network) -> Vec<f64> {
    let n = net.vertex_count();
    let mut s = DMatrix::zeros(n, n);
    for e in net.edges() {
        let w = e.conductance / (net.total_rate(e.u) * net.total_rate(e.v)).sqrt();
        s[(e.u, e.v)] = w;
        s[(e.v, e.u)] = w;
    }
    SymmetricEigen::new(s).eigenvalues.as_slice().to_vec()
}

fn tail_bound(spectrum: &[f64], cutoff: usize) -> f64 {
    let k = (cutoff + 1) as f64;
    spectrum
        .iter()
        .map(|m| m.abs())
        .filter(|&m| m > 0.0)
        .map(|m| (k * m.ln()).exp() / (k * (1.0 - m)))
        .sum()
}

impl<'a> LoopSoupSampler<'a> {
    pub fn new(net: &'a Network, gop: &GreenOperator, length_cutoff_eps: f64) -> Result<Self> {
        if !(length_cutoff_eps > 0.0 && length_cutoff_eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "length cutoff {length_cutoff_eps} must lie in (0, 1)"
            )));
        }
        let spectrum = jump_spectrum(net);
        let spectral_radius = spectrum.iter().fold(0.0f64, |a, m| a.max(m.abs()));
        if spectral_radius >= 1.0 {
            return Err(Error::Truncation(spectral_radius));
        }
        // -log det(I - P) = Σ log λ_x - log det A
        let mass = (net.total_rates().iter().map(|l| l.ln()).sum::<f64>() + gop.log_det_g()).max(0.0);
        let mut cutoff = 1;
        let mut bound = tail_bound(&spectrum, cutoff);
        while mass > 0.0 && bound >= length_cutoff_eps * mass {
            cutoff += 1;
            if cutoff > MAX_LOOP_LENGTH {
                return Err(Error::Truncation(spectral_radius));
            }
            bound = tail_bound(&spectrum, cutoff);
        }
        let n = net.vertex_count();
        let p = jump_matrix(net);
        let mut powers = Vec::with_capacity(cutoff + 1);
        powers.push(DMatrix::identity(n, n));
        for k in 1..=cutoff {
            // P^k = P · P^{k-1}, using the sparsity of P
            let prev = &powers[k - 1];
            let mut next = DMatrix::<f64>::zeros(n, n);
            for x in 0..n {
                for &(y, _) in net.neighbors(x) {
                    let pxy = p[(x, y)];
                    for j in 0..n {
                        next[(x, j)] += pxy * prev[(y, j)];
                    }
                }
            }
            powers.push(next);
        }
        let mut length_cdf = Vec::with_capacity(cutoff.saturating_sub(1));
        let mut acc = 0.0;
        for (k, pk) in powers.iter().enumerate().skip(2) {
            acc += pk.trace().max(0.0) / k as f64;
            length_cdf.push(acc);
        }
        Ok(Self { net, powers, length_cdf, mass, truncated_mass: acc, tail_bound: bound, spectral_radius })
    }

    /// `-log det(I - P)`, the mass of all nontrivial rooted skeletons.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Mass actually sampled: skeletons of length at most [`Self::max_length`].
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Upper bound on the discarded mass of longer skeletons.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn max_length(&self) -> usize {
        self.powers.len() - 1
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn sample<R: Rng + ?Sized>(&self, alpha: f64, rng: &mut R) -> Result<LoopSoupSample> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
        }
        let net = self.net;
        let n = net.vertex_count();
        let count = if self.truncated_mass > 0.0 {
            let poisson = Poisson::new(alpha * self.truncated_mass)
                .map_err(|e| Error::InvalidParameter(format!("loop count: {e}")))?;
            poisson.sample(rng) as usize
        } else {
            0
        };
        let mut loops = Vec::with_capacity(count);
        for _ in 0..count {
            let skeleton = self.sample_skeleton(rng);
            let holding_times = skeleton
                .vertices
                .iter()
                .map(|&x| rng.sample::<f64, _>(rand_distr::Exp1) / net.total_rate(x))
                .collect();
            loops.push(DiscreteLoop { skeleton, holding_times });
        }
        let mut trivial_occupation = Vec::with_capacity(n);
        for x in 0..n {
            let gamma = Gamma::new(alpha, 1.0 / net.total_rate(x))
                .map_err(|e| Error::InvalidParameter(format!("trivial occupation: {e}")))?;
            trivial_occupation.push(gamma.sample(rng));
        }
        Ok(LoopSoupSample { loops, trivial_occupation, alpha })
    }

    fn sample_skeleton<R: Rng + ?Sized>(&self, rng: &mut R) -> LoopSkeleton {
        let total = *self.length_cdf.last().expect("positive mass");
        let u = rng.random::<f64>() * total;
        let idx = self.length_cdf.partition_point(|&c| c <= u).min(self.length_cdf.len() - 1);
        let len = idx + 2;
        let pn = &self.powers[len];
        let n = self.net.vertex_count();

        let target = rng.random::<f64>() * pn.trace();
        let mut acc = 0.0;
        let mut root = n - 1;
        for x in 0..n {
            acc += pn[(x, x)];
            if target < acc {
                root = x;
                break;
            }
        }

        let mut vertices = Vec::with_capacity(len);
        vertices.push(root);
        let mut cur = root;
        for i in 0..len - 1 {
            let rest = &self.powers[len - i - 1];
            let rate = self.net.total_rate(cur);
            let nbrs = self.net.neighbors(cur);
            let weight = |y: usize, id: EdgeId| self.net.edge(id).conductance / rate * rest[(y, root)];
            let total: f64 = nbrs.iter().map(|&(y, id)| weight(y, id)).sum();
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut next = None;
            for &(y, id) in nbrs {
                let w = weight(y, id);
                acc += w;
                if w > 0.0 {
                    next = Some(y);
                    if target < acc {
                        break;
                    }
                }
            }
            cur = next.expect("bridge weights cannot all vanish");
            vertices.push(cur);
        }
        LoopSkeleton { vertices }
    }
}

/// One draw of the loop soup at intensity `alpha`.
///
/// Builds the skeleton tables on every call; use [`LoopSoupSampler`] to
/// amortise them over replicas.
pub fn sample_loop_soup<R: Rng + ?Sized>(
    net: &Network,
    gop: &GreenOperator,
    alpha: f64,
    rng: &mut R,
    length_cutoff_eps: f64,
) -> Result<LoopSoupSample> {
    LoopSoupSampler::new(net, gop, length_cutoff_eps)?.sample(alpha, rng)
}

/// Total time spent at each vertex: loop visits plus trivial loops.
pub fn occupation_field(sample: &LoopSoupSample) -> OccupationField {
    let mut values = sample.trivial_occupation.clone();
    for l in &sample.loops {
        for (&x, &t) in l.skeleton.vertices.iter().zip(&l.holding_times) {
            values[x] += t;
        }
    }
    OccupationField { values }
}

/// Edges crossed by at least one loop.
pub fn traversed_edges(sample: &LoopSoupSample, net: &Network) -> Vec<bool> {
    let mut used = vec![false; net.edge_count()];
    for l in &sample.loops {
        for (a, b) in l.skeleton.steps() {
            used[net.edge_id(a, b).expect("loop steps follow edges")] = true;
        }
    }
    used
}

/// Clusters of loops chained through shared vertices. Vertices no
/// nontrivial loop visits are singletons.
pub fn loop_clusters(sample: &LoopSoupSample, net: &Network) -> ClusterPartition {
    ClusterPartition::from_links(
        net.vertex_count(),
        sample.loops.iter().flat_map(|l| {
            l.skeleton
                .steps()
                .map(|(a, b)| (a, b, net.edge_id(a, b).expect("loop steps follow edges")))
        }),
    )
}

/// Frequency of "no loop of the soup at ½ crosses `removed`" against the
/// determinant ratio.
pub fn verify_edge_avoidance(
    net: &Network,
    gop: &GreenOperator,
    removed: &[EdgeId],
    replicas: usize,
    seed: u64,
    length_cutoff_eps: f64,
    th: &Thresholds,
) -> Result<TestRecord> {
    let exact = sqrt_det_ratio(net, removed)?;
    let sampler = LoopSoupSampler::new(net, gop, length_cutoff_eps)?;
    let avoided = replicate(replicas, seed, |rng| {
        let soup = sampler.sample(0.5, rng).expect("valid alpha");
        let used = traversed_edges(&soup, net);
        removed.iter().all(|&e| !used[e])
    });
    Ok(TestRecord::z_test(
        format!("edge-avoidance{removed:?}"),
        "P(no loop of L_1/2 crosses e_1..e_n) = sqrt(det G^(e) / det G)",
        exact,
        Estimate::from_bools(avoided),
        th,
    ))
}

/// Occupation-field law at intensity `alpha`: per-vertex mean `α G(x,x)`,
/// per-vertex KS against `Gamma(α, scale G(x,x))` (at ½ this is the law of
/// `φ_x²/2`), and cross moments `α² G(x,x) G(y,y) + α G(x,y)²`.
pub fn verify_occupation_law(
    net: &Network,
    gop: &GreenOperator,
    alpha: f64,
    replicas: usize,
    seed: u64,
    length_cutoff_eps: f64,
    th: &Thresholds,
) -> Result<Vec<TestRecord>> {
    let sampler = LoopSoupSampler::new(net, gop, length_cutoff_eps)?;
    let fields: Vec<Vec<f64>> = replicate(replicas, seed, |rng| {
        occupation_field(&sampler.sample(alpha, rng).expect("valid alpha")).values
    });
    let n = net.vertex_count();
    let mut records = Vec::new();
    for x in 0..n {
        let gxx = gop.green(x, x);
        let xs: Vec<f64> = fields.iter().map(|f| f[x]).collect();
        records.push(TestRecord::z_test(
            format!("occupation-mean[{x}]"),
            "E[L^x_alpha] = alpha G(x,x)",
            alpha * gxx,
            Estimate::from_samples(&xs),
            th,
        ));
        records.push(TestRecord::ks(
            format!("occupation-ks[{x}]"),
            "L^x_alpha ~ Gamma(alpha, G(x,x)); at 1/2 the law of phi_x^2/2",
            ks_test(&xs, |t| gamma_cdf(t, alpha, gxx)),
            th,
        ));
    }
    for x in 0..n {
        for y in x + 1..n {
            let exact = alpha * alpha * gop.green(x, x) * gop.green(y, y) + alpha * gop.green(x, y).powi(2);
            records.push(TestRecord::z_test(
                format!("occupation-cross[{x},{y}]"),
                "E[L^x L^y] = alpha^2 G(x,x)G(y,y) + alpha G(x,y)^2",
                exact,
                Estimate::from_iter(fields.iter().map(|f| f[x] * f[y])),
                th,
            ));
        }
    }
    Ok(records)
}

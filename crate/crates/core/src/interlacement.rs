//! Random interlacements in a finite box, and their isomorphism with the
//! free field.
//!
//! Two finite-volume schemes are provided. The trace sampler runs a Poisson
//! number of walks from the equilibrium measure of a set `K` until they are
//! absorbed at the box boundary; its occupation field is exact on `K`. The
//! star sampler collapses the absorbed layer into one vertex `x_*` and
//! records the excursions away from `x_*` until `x_*` has held for a total
//! time `u`.
//!
//! Time is normalised so that a walk with unit conductances leaves every
//! vertex at rate `λ_x = 2d`. The equilibrium measure carries the matching
//! factor, `e_K(x) = λ_x P_x(no return to K)`, so that `E[L^x] = u` on `K`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::clusters::ClusterPartition;
use crate::coupling::opening_probability;
use crate::error::{Error, Result};
use crate::gff::sample_gff;
use crate::green::{compute_green, GreenOperator};
use crate::loopsoup::{occupation_field, LoopSoupSampler};
use crate::network::{build_box, BoundaryMode, BoxGeometry, Network};
use crate::report::TestRecord;
use crate::rng::replicate_fold;
use crate::stats::{Estimate, Moments, Thresholds};

const BLOCK: usize = 4096;

/// The box `[-n, n]^d` with unit conductances whose boundary layer is
/// absorbing.
pub fn absorbing_box(dimension: usize, half_width: usize) -> Result<(Network, BoxGeometry)> {
    build_box(dimension, half_width, 1.0, 0.0, BoundaryMode::Absorbing)
}

/// A transient network whose killing is read as conductance to an extra
/// vertex `x_*`. For a box this identifies the boundary layer to one point.
#[derive(Clone, Debug)]
pub struct StarGraph {
    net: Network,
    geometry: Option<BoxGeometry>,
    /// Interior vertices joined to `x_*`, with their conductances.
    star_edges: Vec<(usize, f64)>,
    star_rate: f64,
}

impl StarGraph {
    pub fn new(dimension: usize, half_width: usize) -> Result<Self> {
        let (net, geometry) = absorbing_box(dimension, half_width)?;
        let mut star = Self::from_network(net)?;
        star.geometry = Some(geometry);
        Ok(star)
    }

    pub fn from_network(net: Network) -> Result<Self> {
        let star_edges: Vec<(usize, f64)> = net
            .killing()
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0.0)
            .map(|(x, &k)| (x, k))
            .collect();
        let star_rate = star_edges.iter().map(|e| e.1).sum();
        if star_edges.is_empty() {
            return Err(Error::Recurrent);
        }
        Ok(Self { net, geometry: None, star_edges, star_rate })
    }

    /// The interior network; its Green function is the one killed at `x_*`.
    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn geometry(&self) -> Option<&BoxGeometry> {
        self.geometry.as_ref()
    }

    /// Index of `x_*` when it is appended after the interior vertices.
    pub fn star(&self) -> usize {
        self.net.vertex_count()
    }

    pub fn star_edges(&self) -> &[(usize, f64)] {
        &self.star_edges
    }

    /// Rate at which the walk leaves `x_*`: `2d(2n-1)^{d-1}` for a box.
    pub fn star_rate(&self) -> f64 {
        self.star_rate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    /// Sorted vertices of `K`.
    pub set: Vec<usize>,
    /// `e_K(x)` for each vertex of `set`.
    pub equilibrium: Vec<f64>,
    pub capacity: f64,
    /// Lattice distance from `K` to the absorbed layer, for boxes.
    pub boundary_margin: Option<usize>,
    /// `cap(K)` in the box of half-width `n + 4` minus `cap(K)` at `n`.
    pub drift: Option<f64>,
}

/// Preconditioned conjugate gradients for `A_FF h = b`, where `A` is the
/// energy matrix of `net` restricted to the vertices with `free[x]`.
fn solve_restricted(net: &Network, free: &[bool], b: &[f64]) -> Result<Vec<f64>> {
    let n = net.vertex_count();
    let apply = |v: &[f64], out: &mut [f64]| {
        for x in 0..n {
            if !free[x] {
                out[x] = 0.0;
                continue;
            }
            let mut s = net.total_rate(x) * v[x];
            for &(y, id) in net.neighbors(x) {
                if free[y] {
                    s -= net.edge(id).conductance * v[y];
                }
            }
            out[x] = s;
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    let mut h = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(h);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = (0..n).map(|x| if free[x] { r[x] / net.total_rate(x) } else { 0.0 }).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for _ in 0..10 * n + 100 {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for x in 0..n {
            h[x] += alpha * p[x];
            r[x] -= alpha * ap[x];
        }
        if dot(&r, &r).sqrt() <= 1e-14 * bnorm {
            return Ok(h);
        }
        for x in 0..n {
            z[x] = if free[x] { r[x] / net.total_rate(x) } else { 0.0 };
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for x in 0..n {
            p[x] = z[x] + beta * p[x];
        }
    }
    Err(Error::InvalidParameter("capacity solve did not converge".into()))
}

/// Hitting probabilities of `K` (1 on `K`).
pub fn hitting_probabilities(net: &Network, k: &[usize]) -> Result<Vec<f64>> {
    let n = net.vertex_count();
    let mut free = vec![true; n];
    for &x in k {
        net.check_vertex(x)?;
        free[x] = false;
    }
    let mut b = vec![0.0; n];
    for x in (0..n).filter(|&x| free[x]) {
        b[x] = net.neighbors(x).iter().filter(|(y, _)| !free[*y]).map(|&(_, id)| net.edge(id).conductance).sum();
    }
    let mut h = solve_restricted(net, &free, &b)?;
    for &x in k {
        h[x] = 1.0;
    }
    Ok(h)
}

/// Equilibrium measure and capacity of `K`:
/// `e_K(x) = κ(x) + Σ_y C(x,y)(1 - h(y))` with `h` the hitting probability.
pub fn compute_capacity(net: &Network, k: &[usize]) -> Result<CapacityReport> {
    let mut set = k.to_vec();
    set.sort_unstable();
    set.dedup();
    if set.is_empty() {
        return Err(Error::InvalidParameter("K must not be empty".into()));
    }
    let h = hitting_probabilities(net, &set)?;
    let equilibrium: Vec<f64> = set
        .iter()
        .map(|&x| {
            net.killing()[x]
                + net.neighbors(x).iter().map(|&(y, id)| net.edge(id).conductance * (1.0 - h[y])).sum::<f64>()
        })
        .collect();
    let capacity = equilibrium.iter().sum();
    Ok(CapacityReport { set, equilibrium, capacity, boundary_margin: None, drift: None })
}

fn box_indices(geometry: &BoxGeometry, k: &[Vec<i64>]) -> Result<Vec<usize>> {
    k.iter()
        .map(|c| {
            geometry
                .index_of(c)
                .ok_or_else(|| Error::InvalidParameter(format!("{c:?} is not an interior vertex of the box")))
        })
        .collect()
}

/// Capacity of `K` (given by coordinates) in the absorbing box, with the
/// change observed when the box grows by 4. `K` must not touch the layer
/// next to the absorbed boundary.
pub fn compute_box_capacity(dimension: usize, half_width: usize, k: &[Vec<i64>]) -> Result<CapacityReport> {
    let (net, geometry) = absorbing_box(dimension, half_width)?;
    let idx = box_indices(&geometry, k)?;
    let margin = k
        .iter()
        .map(|c| half_width - c.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0))
        .min()
        .unwrap_or(0);
    if margin < 2 {
        return Err(Error::InvalidParameter(format!(
            "K lies within distance {margin} of the absorbed boundary"
        )));
    }
    let mut report = compute_capacity(&net, &idx)?;
    let (big, big_geometry) = absorbing_box(dimension, half_width + 4)?;
    let big_cap = compute_capacity(&big, &box_indices(&big_geometry, k)?)?.capacity;
    report.boundary_margin = Some(margin);
    report.drift = Some(big_cap - report.capacity);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub vertices: Vec<usize>,
    pub holding_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterlacementSample {
    pub trajectories: Vec<Trajectory>,
    /// Time spent at each vertex of the network by all trajectories.
    pub occupation: Vec<f64>,
    pub level_u: f64,
}

impl InterlacementSample {
    fn collect(trajectories: Vec<Trajectory>, vertex_count: usize, level_u: f64) -> Self {
        let mut occupation = vec![0.0; vertex_count];
        for w in &trajectories {
            for (&x, &t) in w.vertices.iter().zip(&w.holding_times) {
                occupation[x] += t;
            }
        }
        Self { trajectories, occupation, level_u }
    }

    pub fn visited(&self) -> Vec<bool> {
        let mut seen = vec![false; self.occupation.len()];
        for w in &self.trajectories {
            for &x in &w.vertices {
                seen[x] = true;
            }
        }
        seen
    }

    /// True when no trajectory visits `k`.
    pub fn is_vacant(&self, k: &[usize]) -> bool {
        let seen = self.visited();
        k.iter().all(|&x| !seen[x])
    }
}

/// The jump process from `start` until it is killed.
pub fn walk_until_killed<R: Rng + ?Sized>(net: &Network, start: usize, rng: &mut R) -> Trajectory {
    let mut vertices = Vec::new();
    let mut holding_times = Vec::new();
    let mut x = start;
    loop {
        let rate = net.total_rate(x);
        vertices.push(x);
        holding_times.push(rng.sample::<f64, _>(Exp1) / rate);
        let mut target = rng.random::<f64>() * rate - net.killing()[x];
        if target < 0.0 {
            break;
        }
        let nbrs = net.neighbors(x);
        let mut next = nbrs[nbrs.len() - 1].0;
        for &(y, id) in nbrs {
            target -= net.edge(id).conductance;
            if target < 0.0 {
                next = y;
                break;
            }
        }
        x = next;
    }
    Trajectory { vertices, holding_times }
}

fn check_level(u: f64) -> Result<()> {
    if u >= 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("level u = {u} must be finite and nonnegative")))
    }
}

/// `Poisson(u cap K)` walks started from `e_K / cap K`, run to absorption.
/// Their occupation field is the interlacement's on `K`; backward halves
/// never return to `K` and are not simulated.
pub fn sample_interlacement_trace<R: Rng + ?Sized>(
    net: &Network,
    cap: &CapacityReport,
    u: f64,
    rng: &mut R,
) -> Result<InterlacementSample> {
    check_level(u)?;
    let mean = u * cap.capacity;
    let count = if mean > 0.0 {
        Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(rng) as usize
    } else {
        0
    };
    let mut trajectories = Vec::with_capacity(count);
    for _ in 0..count {
        let mut target = rng.random::<f64>() * cap.capacity;
        let mut start = *cap.set.last().expect("nonempty K");
        for (&x, &e) in cap.set.iter().zip(&cap.equilibrium) {
            target -= e;
            if target < 0.0 {
                start = x;
                break;
            }
        }
        trajectories.push(walk_until_killed(net, start, rng));
    }
    Ok(InterlacementSample::collect(trajectories, net.vertex_count(), u))
}

/// Excursions away from `x_*` until `x_*` has accumulated holding time `u`.
/// Trajectories list interior vertices only.
pub fn sample_star_excursions<R: Rng + ?Sized>(star: &StarGraph, u: f64, rng: &mut R) -> Result<InterlacementSample> {
    check_level(u)?;
    let mut trajectories = Vec::new();
    let mut clock = 0.0;
    loop {
        clock += rng.sample::<f64, _>(Exp1) / star.star_rate;
        if clock >= u {
            break;
        }
        let mut target = rng.random::<f64>() * star.star_rate;
        let mut entry = star.star_edges[star.star_edges.len() - 1].0;
        for &(x, c) in &star.star_edges {
            target -= c;
            if target < 0.0 {
                entry = x;
                break;
            }
        }
        trajectories.push(walk_until_killed(&star.net, entry, rng));
    }
    Ok(InterlacementSample::collect(trajectories, star.net.vertex_count(), u))
}

/// Vacant-set and occupation checks in the box `[-n, n]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterlacementCheck {
    pub dimension: usize,
    pub half_width: usize,
    pub window_radius: usize,
    pub u: f64,
    /// Sets whose vacancy is tested, by coordinates.
    pub sets: Vec<Vec<Vec<i64>>>,
}

/// Trace sampler on the window `[-r, r]^d`: `P(K vacant) = e^{-u cap K}` for
/// each set, and `E[L^x] = u` on every window vertex. Star sampler on the
/// same box: the window-averaged occupation and the vacancy frequencies
/// against the trace sampler.
pub fn interlacement_check(
    check: &InterlacementCheck,
    replicas: usize,
    seed: u64,
    th: &Thresholds,
) -> Result<(Vec<TestRecord>, Vec<CapacityReport>)> {
    let (net, geometry) = absorbing_box(check.dimension, check.half_width)?;
    let window = geometry.window(check.window_radius);
    let window_coords: Vec<Vec<i64>> = window.iter().map(|&x| geometry.coords_of(x).to_vec()).collect();
    let window_cap = compute_box_capacity(check.dimension, check.half_width, &window_coords)?;
    let mut caps = vec![window_cap.clone()];
    let mut sets = Vec::new();
    for k in &check.sets {
        let idx = box_indices(&geometry, k)?;
        if idx.iter().any(|x| window.binary_search(x).is_err()) {
            return Err(Error::InvalidParameter(format!("set {k:?} is not inside the window")));
        }
        caps.push(compute_box_capacity(check.dimension, check.half_width, k)?);
        sets.push(idx);
    }
    let u = check.u;
    let star = StarGraph::from_network(net.clone())?;

    struct Acc {
        occ: Vec<Moments>,
        avg: Moments,
        vacant: Vec<Moments>,
    }
    let fresh = |w: usize, s: usize| Acc { occ: vec![Moments::default(); w], avg: Moments::default(), vacant: vec![Moments::default(); s] };
    let summarise = |sample: &InterlacementSample| {
        let occ: Vec<f64> = window.iter().map(|&x| sample.occupation[x]).collect();
        let vac: Vec<bool> = sets.iter().map(|k| sample.is_vacant(k)).collect();
        (occ, vac)
    };
    let fold = |acc: &mut Acc, (occ, vac): (Vec<f64>, Vec<bool>)| {
        for (m, &v) in acc.occ.iter_mut().zip(&occ) {
            m.push(v);
        }
        acc.avg.push(occ.iter().sum::<f64>() / occ.len() as f64);
        for (m, &v) in acc.vacant.iter_mut().zip(&vac) {
            m.push(v as u8 as f64);
        }
    };

    let mut trace = fresh(window.len(), sets.len());
    replicate_fold(
        replicas,
        BLOCK,
        seed,
        |rng| summarise(&sample_interlacement_trace(&net, &window_cap, u, rng).expect("valid level")),
        &mut trace,
        fold,
    );
    let mut excursions = fresh(window.len(), sets.len());
    replicate_fold(
        replicas,
        BLOCK,
        seed ^ 0x5851_f42d_4c95_7f2d,
        |rng| summarise(&sample_star_excursions(&star, u, rng).expect("valid level")),
        &mut excursions,
        fold,
    );

    let mut records = Vec::new();
    for (i, k) in check.sets.iter().enumerate() {
        let exact = (-u * caps[i + 1].capacity).exp();
        records.push(TestRecord::z_test(
            format!("vacant{k:?}"),
            "P(K in V^u) = exp(-u cap(K))",
            exact,
            trace.vacant[i].estimate(),
            th,
        ));
        records.push(TestRecord::two_sample(
            format!("vacant-samplers{k:?}"),
            "trace and star-excursion samplers: P(K in V^u)",
            trace.vacant[i].estimate(),
            excursions.vacant[i].estimate(),
            Some(exact),
            th,
        ));
    }
    for (j, &x) in window.iter().enumerate() {
        records.push(TestRecord::z_test(
            format!("occupation{:?}", geometry.coords_of(x)),
            "E[L^x(I^u)] = u",
            u,
            trace.occ[j].estimate(),
            th,
        ));
    }
    records.push(TestRecord::two_sample(
        "occupation-samplers",
        "trace and star-excursion samplers: window mean of L^x",
        trace.avg.estimate(),
        excursions.avg.estimate(),
        Some(u),
        th,
    ));
    Ok((records, caps))
}

/// `L_{τ_u} + φ'²/2` against `(φ - √(2u))²/2` per vertex: first and second
/// moments, with `φ, φ'` independent fields killed at `x_*`.
pub fn isomorphism_check(star: &StarGraph, u: f64, replicas: usize, seed: u64, th: &Thresholds) -> Result<Vec<TestRecord>> {
    check_level(u)?;
    let gop = compute_green(star.network())?;
    let n = star.network().vertex_count();
    let shift = (2.0 * u).sqrt();
    let mut acc = vec![[Moments::default(); 4]; n];
    replicate_fold(
        replicas,
        BLOCK,
        seed,
        |rng| {
            let l = sample_star_excursions(star, u, rng).expect("valid level").occupation;
            let aux = sample_gff(&gop, rng).values;
            let phi = sample_gff(&gop, rng).values;
            (0..n)
                .map(|x| (l[x] + 0.5 * aux[x] * aux[x], 0.5 * (phi[x] - shift).powi(2)))
                .collect::<Vec<_>>()
        },
        &mut acc,
        |acc, pairs| {
            for (m, (a, b)) in acc.iter_mut().zip(pairs) {
                m[0].push(a);
                m[1].push(a * a);
                m[2].push(b);
                m[3].push(b * b);
            }
        },
    );
    let mut records = Vec::new();
    for (x, m) in acc.iter().enumerate() {
        let g = gop.green(x, x);
        let a2 = 2.0 * u;
        records.push(TestRecord::two_sample(
            format!("isomorphism-mean[{x}]"),
            "E[L^x + phi'_x^2/2] = E[(phi_x - sqrt(2u))^2/2] = G(x,x)/2 + u",
            m[0].estimate(),
            m[2].estimate(),
            Some(0.5 * g + u),
            th,
        ));
        records.push(TestRecord::two_sample(
            format!("isomorphism-second-moment[{x}]"),
            "E[(L^x + phi'_x^2/2)^2] = E[(phi_x - sqrt(2u))^4/4]",
            m[1].estimate(),
            m[3].estimate(),
            Some((3.0 * g * g + 6.0 * g * a2 + a2 * a2) / 4.0),
            th,
        ));
    }
    Ok(records)
}

/// One draw of the finite-volume level-set coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetSample {
    /// `φ` on the interior; `φ(x_*) = 0`.
    pub field: Vec<f64>,
    pub visited: Vec<bool>,
    pub clusters: ClusterPartition,
}

/// Builds `φ` from star excursions at level `u` and an independent loop soup
/// at one-half: with `Λ = L_{τ_u} + L̂` and `Λ(x_*) = u`, untraversed edges
/// open with probability `1 - exp(-2C √(Λ_x Λ_y))`, the cluster of `x_*` is
/// negative, other clusters get uniform signs, and `φ = √(2u) + σ √(2Λ)`.
pub fn sample_level_set<R: Rng + ?Sized>(
    star: &StarGraph,
    soup: &LoopSoupSampler<'_>,
    u: f64,
    rng: &mut R,
) -> Result<LevelSetSample> {
    let net = star.network();
    let n = net.vertex_count();
    let x_star = star.star();
    let excursions = sample_star_excursions(star, u, rng)?;
    let loops = soup.sample(0.5, rng)?;
    let hat = occupation_field(&loops).values;

    let mut lambda: Vec<f64> = (0..n).map(|x| excursions.occupation[x] + hat[x]).collect();
    lambda.push(u);

    // interior edges keep their ids; the edge x - x_* gets id E + position
    let e_count = net.edge_count();
    let mut star_edge = vec![usize::MAX; n];
    for (i, &(x, _)) in star.star_edges().iter().enumerate() {
        star_edge[x] = e_count + i;
    }
    let mut traversed = vec![false; e_count + star.star_edges().len()];
    let mut links = Vec::new();
    for l in &loops.loops {
        for (a, b) in l.skeleton.steps() {
            let id = net.edge_id(a, b).expect("loop steps follow edges");
            traversed[id] = true;
            links.push((a, b, id));
        }
    }
    for w in &excursions.trajectories {
        let (first, last) = (w.vertices[0], *w.vertices.last().expect("nonempty"));
        for (a, b) in [(x_star, first), (last, x_star)] {
            let x = if a == x_star { b } else { a };
            traversed[star_edge[x]] = true;
            links.push((a, b, star_edge[x]));
        }
        for pair in w.vertices.windows(2) {
            let id = net.edge_id(pair[0], pair[1]).expect("walk steps follow edges");
            traversed[id] = true;
            links.push((pair[0], pair[1], id));
        }
    }
    for (id, e) in net.edges().iter().enumerate() {
        if !traversed[id] && rng.random::<f64>() < opening_probability(e.conductance, lambda[e.u], lambda[e.v]) {
            links.push((e.u, e.v, id));
        }
    }
    for (i, &(x, c)) in star.star_edges().iter().enumerate() {
        let id = e_count + i;
        if !traversed[id] && rng.random::<f64>() < opening_probability(c, lambda[x], u) {
            links.push((x, x_star, id));
        }
    }
    let clusters = ClusterPartition::from_links(n + 1, links);
    let pinned = clusters.cluster_of(x_star);
    let signs: Vec<f64> = (0..clusters.len())
        .map(|c| {
            if c == pinned {
                -1.0
            } else if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let shift = (2.0 * u).sqrt();
    let field = (0..n).map(|x| shift + signs[clusters.cluster_of(x)] * (2.0 * lambda[x]).sqrt()).collect();
    let mut visited = excursions.visited();
    visited.push(true);
    Ok(LevelSetSample { field, visited, clusters })
}

/// Every vertex an excursion visits lies below `√(2u)`. Reports the
/// violation count, the fraction of `{φ > √(2u)}` inside the vacant set, and
/// the mean and variance of `φ` per vertex against `0` and `G(x,x)`.
pub fn levelset_containment_check(
    star: &StarGraph,
    u: f64,
    replicas: usize,
    seed: u64,
    length_cutoff_eps: f64,
    th: &Thresholds,
) -> Result<Vec<TestRecord>> {
    check_level(u)?;
    let net = star.network();
    let gop: GreenOperator = compute_green(net)?;
    let soup = LoopSoupSampler::new(net, &gop, length_cutoff_eps)?;
    let n = net.vertex_count();
    let shift = (2.0 * u).sqrt();

    struct Acc {
        violations: usize,
        above: usize,
        above_vacant: usize,
        moments: Vec<[Moments; 2]>,
    }
    let mut acc = Acc { violations: 0, above: 0, above_vacant: 0, moments: vec![[Moments::default(); 2]; n] };
    replicate_fold(
        replicas,
        BLOCK,
        seed,
        |rng| sample_level_set(star, &soup, u, rng).expect("valid level"),
        &mut acc,
        |acc, s| {
            for x in 0..n {
                let phi = s.field[x];
                if s.visited[x] && phi >= shift {
                    acc.violations += 1;
                }
                if phi > shift {
                    acc.above += 1;
                    acc.above_vacant += !s.visited[x] as usize;
                }
                acc.moments[x][0].push(phi);
                acc.moments[x][1].push(phi * phi);
            }
        },
    );
    let fraction = if acc.above == 0 { 1.0 } else { acc.above_vacant as f64 / acc.above as f64 };
    let mut records = vec![
        TestRecord::structural(
            "levelset-containment",
            "every vertex visited by I^u has phi < sqrt(2u)",
            acc.violations,
        ),
        TestRecord::exact_match(
            "levelset-in-vacant",
            "{phi > sqrt(2u)} is contained in V^u",
            1.0,
            fraction,
            0.0,
        ),
    ];
    for (x, m) in acc.moments.iter().enumerate() {
        records.push(TestRecord::z_test(
            format!("levelset-field-mean[{x}]"),
            "E[phi_x] = 0",
            0.0,
            m[0].estimate(),
            th,
        ));
        records.push(TestRecord::z_test(
            format!("levelset-field-variance[{x}]"),
            "E[phi_x^2] = G(x,x)",
            gop.green(x, x),
            m[1].estimate(),
            th,
        ));
    }
    Ok(records)
}

/// Convenience: `Estimate` of `P(K vacant)` under the star sampler.
pub fn star_vacancy(star: &StarGraph, k: &[usize], u: f64, replicas: usize, seed: u64) -> Result<Estimate> {
    check_level(u)?;
    let mut m = Moments::default();
    replicate_fold(
        replicas,
        BLOCK,
        seed,
        |rng| sample_star_excursions(star, u, rng).expect("valid level").is_vacant(k),
        &mut m,
        |m, v| m.push(v as u8 as f64),
    );
    Ok(m.estimate())
}

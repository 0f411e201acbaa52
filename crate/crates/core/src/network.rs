//! Finite weighted graphs with killing.
//!
//! A [`Network`] carries conductances on undirected edges and a killing rate
//! per vertex. The continuous-time jump process it describes jumps from `x` to
//! `y` at rate `C(x,y)` and is killed at rate `κ(x)`, so the total rate out of
//! `x` is `λ_x = κ(x) + Σ_y C(x,y)`. Absorbing boundaries are never stored as
//! vertices: an edge into an absorbed vertex is folded into the killing rate of
//! its alive endpoint, which is exactly instant killing on arrival.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into [`Network::edges`].
pub type EdgeId = usize;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub conductance: f64,
}

impl Edge {
    /// The endpoint of the edge that is not `x`.
    pub fn other(&self, x: usize) -> usize {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }

    /// Length of the cable replacing this edge in the metric graph.
    pub fn length(&self) -> f64 {
        1.0 / (2.0 * self.conductance)
    }
}

/// On-disk form of a network: `{vertices, edges: [[u, v, C]], killing: []}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub vertices: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub killing: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDocument", into = "NetworkDocument")]
pub struct Network {
    vertex_count: usize,
    edges: Vec<Edge>,
    killing: Vec<f64>,
    adjacency: Vec<Vec<(usize, EdgeId)>>,
    total_rate: Vec<f64>,
    edge_index: HashMap<(usize, usize), EdgeId>,
}

fn key(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Network {
    /// Builds a connected transient network.
    ///
    /// Rejects self-loops, parallel edges, non-positive conductances, negative
    /// killing, disconnected graphs and killing that is identically zero.
    pub fn new(vertex_count: usize, edges: Vec<Edge>, killing: Vec<f64>) -> Result<Self> {
        let net = Self::assemble(vertex_count, edges, killing)?;
        if !net.is_connected() {
            return Err(Error::InvalidNetwork("graph is not connected".into()));
        }
        Ok(net)
    }

    /// Convenience constructor from `(u, v, C)` triples.
    pub fn from_triples(
        vertex_count: usize,
        edges: &[(usize, usize, f64)],
        killing: Vec<f64>,
    ) -> Result<Self> {
        let edges = edges
            .iter()
            .map(|&(u, v, conductance)| Edge { u, v, conductance })
            .collect();
        Self::new(vertex_count, edges, killing)
    }

    // Everything but the connectivity check; edge removal may legitimately
    // disconnect the graph.
    fn assemble(vertex_count: usize, edges: Vec<Edge>, killing: Vec<f64>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidNetwork("no vertices".into()));
        }
        if killing.len() != vertex_count {
            return Err(Error::InvalidNetwork(format!(
                "killing has {} entries for {} vertices",
                killing.len(),
                vertex_count
            )));
        }
        if let Some(k) = killing.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
            return Err(Error::InvalidNetwork(format!("invalid killing rate {k}")));
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (id, e) in edges.iter().enumerate() {
            for w in [e.u, e.v] {
                if w >= vertex_count {
                    return Err(Error::VertexOutOfRange { vertex: w, count: vertex_count });
                }
            }
            if e.u == e.v {
                return Err(Error::InvalidNetwork(format!("self-loop at vertex {}", e.u)));
            }
            if !(e.conductance.is_finite() && e.conductance > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({}, {}) has conductance {}",
                    e.u, e.v, e.conductance
                )));
            }
            if edge_index.insert(key(e.u, e.v), id).is_some() {
                return Err(Error::InvalidNetwork(format!(
                    "parallel edge between {} and {}",
                    e.u, e.v
                )));
            }
            adjacency[e.u].push((e.v, id));
            adjacency[e.v].push((e.u, id));
        }
        if killing.iter().all(|&k| k == 0.0) {
            return Err(Error::Recurrent);
        }
        let total_rate = (0..vertex_count)
            .map(|x| killing[x] + adjacency[x].iter().map(|&(_, id)| edges[id].conductance).sum::<f64>())
            .collect();
        Ok(Self { vertex_count, edges, killing, adjacency, total_rate, edge_index })
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(y, _) in &self.adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == self.vertex_count
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn killing(&self) -> &[f64] {
        &self.killing
    }

    /// Neighbours of `x` together with the id of the connecting edge.
    pub fn neighbors(&self, x: usize) -> &[(usize, EdgeId)] {
        &self.adjacency[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    /// `λ_x = κ(x) + Σ_y C(x,y)`.
    pub fn total_rate(&self, x: usize) -> f64 {
        self.total_rate[x]
    }

    pub fn total_rates(&self) -> &[f64] {
        &self.total_rate
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<EdgeId> {
        self.edge_index.get(&key(u, v)).copied()
    }

    pub fn conductance(&self, u: usize, v: usize) -> f64 {
        self.edge_id(u, v).map_or(0.0, |id| self.edges[id].conductance)
    }

    /// Jump probability `P(x,y) = C(x,y) / λ_x` of the discrete skeleton.
    pub fn jump_probability(&self, x: usize, y: usize) -> f64 {
        self.conductance(x, y) / self.total_rate[x]
    }

    /// Probability that the skeleton is killed when leaving `x`.
    pub fn killing_probability(&self, x: usize) -> f64 {
        self.killing[x] / self.total_rate[x]
    }

    /// Metric-graph length `ρ(e) = 1 / (2 C(e))`.
    pub fn edge_length(&self, id: EdgeId) -> f64 {
        self.edges[id].length()
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.vertex_count {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: x, count: self.vertex_count })
        }
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            vertices: self.vertex_count,
            edges: self.edges.iter().map(|e| (e.u, e.v, e.conductance)).collect(),
            killing: self.killing.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl TryFrom<NetworkDocument> for Network {
    type Error = Error;

    fn try_from(doc: NetworkDocument) -> Result<Self> {
        Network::from_triples(doc.vertices, &doc.edges, doc.killing)
    }
}

impl From<Network> for NetworkDocument {
    fn from(net: Network) -> Self {
        net.to_document()
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "network({} vertices, {} edges)", self.vertex_count, self.edges.len())
    }
}

/// Removes `removed` edges and moves each removed conductance onto the killing
/// rate of both endpoints, leaving every `λ_x` unchanged.
///
/// The result may be disconnected.
pub fn modified_network(net: &Network, removed: &[EdgeId]) -> Result<Network> {
    let mut drop = vec![false; net.edge_count()];
    for &id in removed {
        if id >= net.edge_count() {
            return Err(Error::InvalidParameter(format!("unknown edge id {id}")));
        }
        drop[id] = true;
    }
    let mut killing = net.killing.clone();
    let mut edges = Vec::with_capacity(net.edge_count());
    for (id, e) in net.edges.iter().enumerate() {
        if drop[id] {
            killing[e.u] += e.conductance;
            killing[e.v] += e.conductance;
        } else {
            edges.push(*e);
        }
    }
    Network::assemble(net.vertex_count, edges, killing)
}

/// Looks up edge ids for `(u, v)` pairs.
pub fn edge_ids(net: &Network, pairs: &[(usize, usize)]) -> Result<Vec<EdgeId>> {
    pairs
        .iter()
        .map(|&(u, v)| net.edge_id(u, v).ok_or(Error::UnknownEdge(u, v)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Every vertex with some `|x_i| = n` is absorbed.
    Absorbing,
    /// Free boundary; transience comes from the uniform killing.
    KilledUniform,
    /// The layer with last coordinate `-n` is absorbed, other faces are free.
    HalfplaneFloor,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absorbing" => Ok(Self::Absorbing),
            "killed_uniform" | "killed" => Ok(Self::KilledUniform),
            "halfplane_floor" | "floor" => Ok(Self::HalfplaneFloor),
            other => Err(Error::InvalidParameter(format!("unknown boundary mode `{other}`"))),
        }
    }
}

/// Coordinate bookkeeping for the box `[-n, n]^d`.
///
/// Alive vertices are numbered densely in row-major order of their
/// coordinates: the last coordinate varies fastest.
#[derive(Clone, Debug)]
pub struct BoxGeometry {
    dimension: usize,
    half_width: i64,
    mode: BoundaryMode,
    alive: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
}

impl BoxGeometry {
    pub fn new(dimension: usize, half_width: usize, mode: BoundaryMode) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let n = half_width as i64;
        let side = 2 * half_width + 1;
        let total = side.checked_pow(dimension as u32).ok_or_else(|| {
            Error::InvalidParameter("box is too large".into())
        })?;
        let mut alive = Vec::new();
        let mut coords = vec![-n; dimension];
        for _ in 0..total {
            let absorbed = match mode {
                BoundaryMode::Absorbing => coords.iter().any(|c| c.abs() == n),
                BoundaryMode::KilledUniform => false,
                BoundaryMode::HalfplaneFloor => coords[dimension - 1] == -n,
            };
            if !absorbed {
                alive.push(coords.clone());
            }
            for c in coords.iter_mut().rev() {
                if *c < n {
                    *c += 1;
                    break;
                }
                *c = -n;
            }
        }
        if alive.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "box of half-width {half_width} has no alive vertex in {mode:?} mode"
            )));
        }
        let index = alive.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        Ok(Self { dimension, half_width: n, mode, alive, index })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn half_width(&self) -> usize {
        self.half_width as usize
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn alive_count(&self) -> usize {
        self.alive.len()
    }

    pub fn absorbed_count(&self) -> usize {
        (2 * self.half_width as usize + 1).pow(self.dimension as u32) - self.alive.len()
    }

    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        self.index.get(coords).copied()
    }

    pub fn coords_of(&self, index: usize) -> &[i64] {
        &self.alive[index]
    }

    fn in_box(&self, coords: &[i64]) -> bool {
        coords.iter().all(|c| c.abs() <= self.half_width)
    }

    /// Alive vertices of the sub-box `[-r, r]^d`, in index order.
    pub fn window(&self, r: usize) -> Vec<usize> {
        let r = r as i64;
        (0..self.alive.len())
            .filter(|&i| self.alive[i].iter().all(|c| c.abs() <= r))
            .collect()
    }

    /// Neighbours of an alive vertex, split into alive indices and the number
    /// of absorbed lattice neighbours.
    pub fn lattice_neighbors(&self, index: usize) -> (Vec<usize>, usize) {
        let base = &self.alive[index];
        let mut alive = Vec::new();
        let mut absorbed = 0;
        for axis in 0..self.dimension {
            for step in [-1, 1] {
                let mut c = base.clone();
                c[axis] += step;
                if !self.in_box(&c) {
                    continue;
                }
                match self.index.get(&c) {
                    Some(&j) => alive.push(j),
                    None => absorbed += 1,
                }
            }
        }
        (alive, absorbed)
    }
}

/// The box `[-n, n]^d` with uniform conductance and killing.
///
/// Absorbed vertices are removed; each alive vertex gains `C` of killing per
/// absorbed neighbour.
pub fn build_box_network(
    dimension: usize,
    half_width: usize,
    conductance: f64,
    killing: f64,
    mode: BoundaryMode,
) -> Result<Network> {
    Ok(build_box(dimension, half_width, conductance, killing, mode)?.0)
}

/// Like [`build_box_network`], also returning the coordinate map.
pub fn build_box(
    dimension: usize,
    half_width: usize,
    conductance: f64,
    killing: f64,
    mode: BoundaryMode,
) -> Result<(Network, BoxGeometry)> {
    if !(killing.is_finite() && killing >= 0.0) {
        return Err(Error::InvalidParameter(format!("killing {killing} must be finite and >= 0")));
    }
    if killing == 0.0 && mode == BoundaryMode::KilledUniform {
        return Err(Error::Recurrent);
    }
    let geometry = BoxGeometry::new(dimension, half_width, mode)?;
    let mut edges = Vec::new();
    let mut kill = vec![killing; geometry.alive_count()];
    for i in 0..geometry.alive_count() {
        let (alive, absorbed) = geometry.lattice_neighbors(i);
        kill[i] += conductance * absorbed as f64;
        edges.extend(alive.into_iter().filter(|&j| j > i).map(|j| Edge { u: i, v: j, conductance }));
    }
    let net = Network::new(geometry.alive_count(), edges, kill)?;
    Ok((net, geometry))
}

/// A rectangular grid with the given side lengths, free boundary and uniform
/// killing. Vertices are row-major, last axis fastest.
pub fn build_grid_network(shape: &[usize], conductance: f64, killing: f64) -> Result<Network> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidParameter(format!("invalid grid shape {shape:?}")));
    }
    let total: usize = shape.iter().product();
    let mut strides = vec![1; shape.len()];
    for a in (0..shape.len() - 1).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let mut edges = Vec::new();
    for i in 0..total {
        for (a, &stride) in strides.iter().enumerate() {
            if (i / stride) % shape[a] + 1 < shape[a] {
                edges.push(Edge { u: i, v: i + stride, conductance });
            }
        }
    }
    Network::new(total, edges, vec![killing; total])
}

/// The path `0 - 1 - ... - (len-1)` with uniform conductance and killing.
pub fn build_path_network(len: usize, conductance: f64, killing: f64) -> Result<Network> {
    build_grid_network(&[len], conductance, killing)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_vertex() -> Network {
        Network::from_triples(2, &[(0, 1, 1.0)], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn two_vertex_rates() {
        let net = two_vertex();
        assert_eq!(net.total_rate(0), 2.0);
        assert_eq!(net.total_rate(1), 2.0);
        assert_eq!(net.jump_probability(0, 1), 0.5);
        assert_eq!(net.killing_probability(0), 0.5);
    }

    #[test]
    fn absorbing_box_counts() {
        let (net, geo) = build_box(2, 2, 1.0, 0.0, BoundaryMode::Absorbing).unwrap();
        assert_eq!(net.vertex_count(), 9);
        assert_eq!(geo.absorbed_count(), 16);
        // centre has no absorbed neighbour, corners of the interior have two
        let centre = geo.index_of(&[0, 0]).unwrap();
        assert_eq!(net.killing()[centre], 0.0);
        assert_eq!(net.killing()[geo.index_of(&[1, 1]).unwrap()], 2.0);
        assert_eq!(net.killing()[geo.index_of(&[1, 0]).unwrap()], 1.0);
    }

    #[test]
    fn row_major_indexing() {
        let geo = BoxGeometry::new(2, 1, BoundaryMode::KilledUniform).unwrap();
        assert_eq!(geo.coords_of(0), &[-1, -1]);
        assert_eq!(geo.coords_of(1), &[-1, 0]);
        assert_eq!(geo.coords_of(3), &[0, -1]);
        for i in 0..geo.alive_count() {
            assert_eq!(geo.index_of(geo.coords_of(i)), Some(i));
        }
    }

    #[test]
    fn edge_lengths_for_half_conductance() {
        let net = build_box_network(2, 1, 0.5, 1.0, BoundaryMode::KilledUniform).unwrap();
        assert_eq!(net.edge_count(), 12);
        for id in 0..net.edge_count() {
            assert_eq!(net.edge_length(id), 1.0);
        }
    }

    #[test]
    fn halfplane_floor_is_transient_without_killing() {
        let (net, geo) = build_box(2, 2, 1.0, 0.0, BoundaryMode::HalfplaneFloor).unwrap();
        assert_eq!(geo.absorbed_count(), 5);
        assert_eq!(net.vertex_count(), 20);
        let positive: Vec<_> = (0..20).filter(|&x| net.killing()[x] > 0.0).collect();
        assert_eq!(positive.len(), 5);
        for x in positive {
            assert_eq!(geo.coords_of(x)[1], -1);
        }
    }

    #[test]
    fn rejects_recurrent() {
        assert!(matches!(
            build_box_network(2, 2, 1.0, 0.0, BoundaryMode::KilledUniform),
            Err(Error::Recurrent)
        ));
        assert!(matches!(
            Network::from_triples(2, &[(0, 1, 1.0)], vec![0.0, 0.0]),
            Err(Error::Recurrent)
        ));
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(Network::from_triples(2, &[(0, 1, 1.0), (1, 0, 2.0)], vec![1.0; 2]).is_err());
        assert!(Network::from_triples(2, &[(0, 0, 1.0)], vec![1.0; 2]).is_err());
        assert!(Network::from_triples(3, &[(0, 1, 1.0)], vec![1.0; 3]).is_err());
        assert!(Network::from_triples(2, &[(0, 1, -1.0)], vec![1.0; 2]).is_err());
        assert!(Network::from_triples(2, &[(0, 2, 1.0)], vec![1.0; 2]).is_err());
    }

    #[test]
    fn single_vertex_is_allowed() {
        let net = Network::from_triples(1, &[], vec![3.0]).unwrap();
        assert_eq!(net.total_rate(0), 3.0);
    }

    #[test]
    fn modified_two_vertex() {
        let net = two_vertex();
        let m = modified_network(&net, &[0]).unwrap();
        assert_eq!(m.edge_count(), 0);
        assert_eq!(m.killing(), &[2.0, 2.0]);
        assert_eq!(m.total_rates(), net.total_rates());
    }

    #[test]
    fn modified_path() {
        let net = build_path_network(3, 1.0, 1.0).unwrap();
        let ab = net.edge_id(0, 1).unwrap();
        let m = modified_network(&net, &[ab]).unwrap();
        assert_eq!(m.killing(), &[2.0, 2.0, 1.0]);
        assert_eq!(m.edge_count(), 1);
        assert!(m.edge_id(1, 2).is_some());
        assert_eq!(modified_network(&net, &[]).unwrap(), net);
        assert!(modified_network(&net, &[7]).is_err());
    }

    #[test]
    fn grid_shape() {
        let net = build_grid_network(&[4, 4], 1.0, 0.5).unwrap();
        assert_eq!(net.vertex_count(), 16);
        assert_eq!(net.edge_count(), 24);
        assert!(net.edge_id(0, 1).is_some());
        assert!(net.edge_id(0, 4).is_some());
        assert!(net.edge_id(3, 4).is_none());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let net = Network::from_triples(
            3,
            &[(0, 1, 0.1), (1, 2, 1.0 / 3.0)],
            vec![std::f64::consts::PI, 0.0, 1e-300],
        )
        .unwrap();
        let text = net.to_json().unwrap();
        let back = Network::from_json(&text).unwrap();
        assert_eq!(back, net);
    }
}

//! Vertex partitions induced by sets of edges.

use petgraph::unionfind::UnionFind;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    /// Vertices, ascending.
    pub vertices: Vec<usize>,
    /// Ids of the edges that built this cluster, ascending.
    pub edges: Vec<usize>,
}

/// Connected components of a set of links.
///
/// Each vertex is labelled by the smallest vertex id in its component and
/// clusters are ordered by that label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterPartition {
    labels: Vec<usize>,
    cluster_index: Vec<usize>,
    clusters: Vec<Cluster>,
}

impl ClusterPartition {
    /// Components of `vertex_count` vertices joined by `(u, v, edge_id)` links.
    pub fn from_links<I>(vertex_count: usize, links: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, usize)>,
    {
        let mut uf = UnionFind::<usize>::new(vertex_count);
        let mut used = Vec::new();
        for (u, v, id) in links {
            uf.union(u, v);
            used.push((u, id));
        }
        let roots = uf.into_labeling();
        let mut label_of_root = vec![usize::MAX; vertex_count];
        for (x, &r) in roots.iter().enumerate() {
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = x;
            }
        }
        let labels: Vec<usize> = roots.iter().map(|&r| label_of_root[r]).collect();
        let mut cluster_index = vec![usize::MAX; vertex_count];
        let mut clusters: Vec<Cluster> = Vec::new();
        for x in 0..vertex_count {
            if labels[x] == x {
                cluster_index[x] = clusters.len();
                clusters.push(Cluster { vertices: Vec::new(), edges: Vec::new() });
            }
            let c = cluster_index[labels[x]];
            cluster_index[x] = c;
            clusters[c].vertices.push(x);
        }
        for (u, id) in used {
            clusters[cluster_index[u]].edges.push(id);
        }
        for c in &mut clusters {
            c.edges.sort_unstable();
            c.edges.dedup();
        }
        Self { labels, cluster_index, clusters }
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    /// Smallest vertex id of the cluster containing `x`.
    pub fn label(&self, x: usize) -> usize {
        self.labels[x]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Position of `x`'s cluster in [`Self::clusters`].
    pub fn cluster_of(&self, x: usize) -> usize {
        self.cluster_index[x]
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn same_cluster(&self, x: usize, y: usize) -> bool {
        self.labels[x] == self.labels[y]
    }

    /// True when every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &ClusterPartition) -> bool {
        self.vertex_count() == coarser.vertex_count()
            && self.clusters.iter().all(|c| {
                let l = coarser.label(c.vertices[0]);
                c.vertices.iter().all(|&x| coarser.label(x) == l)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singletons_without_links() {
        let p = ClusterPartition::from_links(4, std::iter::empty());
        assert_eq!(p.len(), 4);
        assert_eq!(p.labels(), &[0, 1, 2, 3]);
    }

    #[test]
    fn labels_are_minimal_ids() {
        let p = ClusterPartition::from_links(5, [(4, 2, 0), (1, 3, 1), (3, 4, 2)]);
        assert_eq!(p.labels(), &[0, 1, 1, 1, 1]);
        assert_eq!(p.len(), 2);
        assert_eq!(p.clusters()[1].vertices, vec![1, 2, 3, 4]);
        assert_eq!(p.clusters()[1].edges, vec![0, 1, 2]);
        assert!(p.same_cluster(2, 3));
        assert!(!p.same_cluster(0, 3));
    }

    #[test]
    fn refinement() {
        let fine = ClusterPartition::from_links(4, [(0, 1, 0)]);
        let coarse = ClusterPartition::from_links(4, [(0, 1, 0), (1, 2, 1)]);
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
    }
}

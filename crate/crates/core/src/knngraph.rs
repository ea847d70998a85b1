//! Exact K-nearest-neighbor graph over cluster centroids.
//!
//! Once the tree lookup has seeded a query with a few clusters, the search
//! widens by hopping to neighbors of the best clusters found so far. The
//! graph behind those hops is exact — every pair of centroids is examined
//! at build time — because an approximate graph here would silently bias
//! which clusters a query can ever reach.

use crate::error::{Error, Result};
use crate::kmeans::ClusterModel;
use crate::vecmath::dist2;
use rayon::prelude::*;

/// For each cluster, its `k` nearest other clusters by Euclidean distance,
/// closest first, ties broken toward the lower index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnGraph {
    k: usize,
    neighbors: Vec<u32>,
}

impl KnnGraph {
    /// Wraps a stored neighbor table, checking shape, range, and that no
    /// cluster lists itself.
    pub fn from_parts(k: usize, n_clusters: usize, neighbors: Vec<u32>) -> Result<Self> {
        if k == 0 || k >= n_clusters {
            return Err(Error::invalid(
                "k",
                format!("must be in 1..{n_clusters} (cluster count), got {k}"),
            ));
        }
        if neighbors.len() != k * n_clusters {
            return Err(Error::DimensionMismatch {
                context: "neighbor table length",
                left: neighbors.len(),
                right: k * n_clusters,
            });
        }
        for (j, row) in neighbors.chunks_exact(k).enumerate() {
            for &i in row {
                if i as usize >= n_clusters {
                    return Err(Error::invalid(
                        "neighbor",
                        format!("cluster {j} lists out-of-range neighbor {i}"),
                    ));
                }
                if i as usize == j {
                    return Err(Error::invalid(
                        "neighbor",
                        format!("cluster {j} lists itself"),
                    ));
                }
            }
        }
        Ok(KnnGraph { k, neighbors })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_clusters(&self) -> usize {
        self.neighbors.len() / self.k
    }

    pub fn neighbors_of(&self, cluster: usize) -> &[u32] {
        &self.neighbors[cluster * self.k..(cluster + 1) * self.k]
    }

    pub fn flat(&self) -> &[u32] {
        &self.neighbors
    }
}

/// Builds the exact graph by brute force over all centroid pairs.
/// O(N² d) work, parallel over rows, deterministic output.
pub fn build_knn_graph(model: &ClusterModel, k: usize) -> Result<KnnGraph> {
    let n = model.n_clusters();
    if k == 0 || k >= n {
        return Err(Error::invalid(
            "k",
            format!("must be in 1..{n} (cluster count), got {k}"),
        ));
    }
    let d = model.dim();
    let flat: Vec<f64> = model.centroids_flat().iter().map(|&v| f64::from(v)).collect();

    let rows: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let me = &flat[j * d..(j + 1) * d];
            let mut scored: Vec<(f64, u32)> = (0..n)
                .filter(|&i| i != j)
                .map(|i| (dist2(me, &flat[i * d..(i + 1) * d]), i as u32))
                .collect();
            scored
                .select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scored.truncate(k);
            scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scored.into_iter().map(|(_, i)| i).collect()
        })
        .collect();

    let neighbors = rows.concat();
    KnnGraph::from_parts(k, n, neighbors)
}

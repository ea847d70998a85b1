//! The denoising index: model + search structures + persistence.
//!
//! A [`DenoiseIndex`] bundles everything a query needs: the cluster model
//! (centroids and populations), the randomized k-d forest, the exact
//! K-NN graph, and the corpus mean intensity used for normalization. It is
//! immutable after construction, so queries can share it freely across
//! threads.
//!
//! The on-disk format is a little-endian binary layout:
//!
//! ```text
//! magic "PMSE" | version u32 | side u32 | n_clusters u64 | knn_k u32
//! | tree_count u32 | leaf_capacity u32 | mean_intensity f64
//! | centroids  n_clusters*side*side  f32
//! | counts     n_clusters            u64
//! | neighbors  n_clusters*knn_k      u32
//! | per tree: node_count u64, then preorder nodes:
//! |   0x00 dim u32, threshold f32, left u64, right u64   (split)
//! |   0x01 count u32, count*u32 indices                  (leaf)
//! ```
//!
//! Loading distinguishes four failure modes: not an index file at all,
//! an index from an unknown format version, a truncated file, and a
//! structurally inconsistent one.

use crate::corpus::{normalize_corpus, PatchCorpus};
use crate::error::{Error, Result};
use crate::kdforest::{build_kd_forest, KdForest, KdNode, KdTree};
use crate::kmeans::{kmeans_cluster, ClusterModel};
use crate::knngraph::{build_knn_graph, KnnGraph};
use crate::seed::derive_seed;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: [u8; 4] = *b"PMSE";
const FORMAT_VERSION: u32 = 1;

const KMEANS_STREAM: u64 = 0x6b6d_6561_6e73;
const FOREST_STREAM: u64 = 0x666f_7265_7374;

/// Everything needed to denoise patches, immutable and thread-safe.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseIndex {
    mean_intensity: f64,
    model: ClusterModel,
    forest: KdForest,
    graph: KnnGraph,
    // Derived at construction, never persisted: the likelihood hot path
    // reads precomputed logs instead of calling ln() per element.
    ln_centroids: Vec<f64>,
    centroid_sums: Vec<f64>,
    ln_counts: Vec<f64>,
}

impl DenoiseIndex {
    /// Assembles and cross-validates an index from its parts.
    pub fn new(
        mean_intensity: f64,
        model: ClusterModel,
        forest: KdForest,
        graph: KnnGraph,
    ) -> Result<Self> {
        if !mean_intensity.is_finite() || mean_intensity <= 0.0 {
            return Err(Error::invalid(
                "mean_intensity",
                format!("must be positive and finite, got {mean_intensity}"),
            ));
        }
        if forest.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                context: "forest vs model dimension",
                left: forest.dim(),
                right: model.dim(),
            });
        }
        if graph.n_clusters() != model.n_clusters() {
            return Err(Error::DimensionMismatch {
                context: "graph vs model cluster count",
                left: graph.n_clusters(),
                right: model.n_clusters(),
            });
        }
        let n = model.n_clusters();
        if n > u32::MAX as usize
            || forest.tree_count() > u32::MAX as usize
            || forest.leaf_capacity() > u32::MAX as usize
        {
            return Err(Error::invalid("index size", "component count exceeds u32"));
        }
        // Every tree's leaves must partition the cluster set, otherwise
        // queries would systematically miss clusters.
        for (t, tree) in forest.trees().iter().enumerate() {
            let mut seen = vec![false; n];
            let mut total = 0usize;
            for node in tree.nodes() {
                if let KdNode::Leaf { indices } = node {
                    for &i in indices {
                        if i as usize >= n {
                            return Err(Error::invalid(
                                "leaf index",
                                format!("tree {t} references cluster {i} of {n}"),
                            ));
                        }
                        if seen[i as usize] {
                            return Err(Error::invalid(
                                "leaf index",
                                format!("tree {t} lists cluster {i} twice"),
                            ));
                        }
                        seen[i as usize] = true;
                        total += 1;
                    }
                }
            }
            if total != n {
                return Err(Error::invalid(
                    "leaf coverage",
                    format!("tree {t} covers {total} of {n} clusters"),
                ));
            }
        }

        let d = model.dim();
        let mut ln_centroids = Vec::with_capacity(n * d);
        let mut centroid_sums = Vec::with_capacity(n);
        for j in 0..n {
            let row = model.centroid(j);
            let mut sum = 0.0f64;
            for &v in row {
                let v = f64::from(v);
                ln_centroids.push(v.ln());
                sum += v;
            }
            centroid_sums.push(sum);
        }
        let ln_counts = model.counts().iter().map(|&c| (c as f64).ln()).collect();

        Ok(DenoiseIndex {
            mean_intensity,
            model,
            forest,
            graph,
            ln_centroids,
            centroid_sums,
            ln_counts,
        })
    }

    pub fn side(&self) -> usize {
        self.model.side()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn n_clusters(&self) -> usize {
        self.model.n_clusters()
    }

    pub fn mean_intensity(&self) -> f64 {
        self.mean_intensity
    }

    pub fn model(&self) -> &ClusterModel {
        &self.model
    }

    pub fn forest(&self) -> &KdForest {
        &self.forest
    }

    pub fn graph(&self) -> &KnnGraph {
        &self.graph
    }

    pub(crate) fn ln_centroids(&self) -> &[f64] {
        &self.ln_centroids
    }

    pub(crate) fn centroid_sums(&self) -> &[f64] {
        &self.centroid_sums
    }

    pub(crate) fn ln_counts(&self) -> &[f64] {
        &self.ln_counts
    }

    /// Writes the index to disk. The write goes to a temporary sibling
    /// file first and is renamed into place, so a failed save never leaves
    /// a partial index behind.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension(match path.extension().and_then(|e| e.to_str()) {
            Some(ext) => format!("{ext}.tmp"),
            None => "tmp".to_string(),
        });
        let result = (|| -> std::io::Result<()> {
            let file = fs::File::create(&tmp)?;
            let mut w = BufWriter::new(file);
            self.write_to(&mut w)?;
            w.flush()?;
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            fs::rename(&tmp, path)
        })();
        result.map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(path, e)
        })
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u32::<LittleEndian>(self.side() as u32)?;
        w.write_u64::<LittleEndian>(self.n_clusters() as u64)?;
        w.write_u32::<LittleEndian>(self.graph.k() as u32)?;
        w.write_u32::<LittleEndian>(self.forest.tree_count() as u32)?;
        w.write_u32::<LittleEndian>(self.forest.leaf_capacity() as u32)?;
        w.write_f64::<LittleEndian>(self.mean_intensity)?;
        for &v in self.model.centroids_flat() {
            w.write_f32::<LittleEndian>(v)?;
        }
        for &c in self.model.counts() {
            w.write_u64::<LittleEndian>(c)?;
        }
        for &nb in self.graph.flat() {
            w.write_u32::<LittleEndian>(nb)?;
        }
        for tree in self.forest.trees() {
            w.write_u64::<LittleEndian>(tree.nodes().len() as u64)?;
            for node in tree.nodes() {
                match node {
                    KdNode::Split {
                        dim,
                        threshold,
                        left,
                        right,
                    } => {
                        w.write_u8(0)?;
                        w.write_u32::<LittleEndian>(*dim)?;
                        w.write_f32::<LittleEndian>(*threshold)?;
                        w.write_u64::<LittleEndian>(u64::from(*left))?;
                        w.write_u64::<LittleEndian>(u64::from(*right))?;
                    }
                    KdNode::Leaf { indices } => {
                        w.write_u8(1)?;
                        w.write_u32::<LittleEndian>(indices.len() as u32)?;
                        for &i in indices {
                            w.write_u32::<LittleEndian>(i)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Reads an index back, validating as it goes. Magic and version
    /// mismatches, truncation, and internal inconsistencies each surface
    /// as their own error.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::NotAnIndexFile { path: path.into() })?;
        if magic != MAGIC {
            return Err(Error::NotAnIndexFile { path: path.into() });
        }
        let truncated = |e: std::io::Error| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::TruncatedIndex { path: path.into() }
            } else {
                Error::io(path, e)
            }
        };
        let inconsistent = |reason: String| Error::InconsistentIndex {
            path: path.into(),
            reason,
        };

        let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedIndexVersion {
                path: path.into(),
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let side = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let n_clusters = r.read_u64::<LittleEndian>().map_err(truncated)?;
        let knn_k = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let tree_count = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let leaf_capacity = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let mean_intensity = r.read_f64::<LittleEndian>().map_err(truncated)?;

        if side == 0 || n_clusters == 0 || knn_k == 0 || tree_count == 0 || leaf_capacity == 0 {
            return Err(inconsistent("a header field is zero".into()));
        }
        if n_clusters > u32::MAX as u64 {
            return Err(inconsistent(format!("cluster count {n_clusters} exceeds u32")));
        }
        let n = n_clusters as usize;
        let d = side * side;

        // Make sure the fixed-size tables fit in what's left of the file
        // before allocating for them; a corrupt header must not OOM us.
        let fixed_bytes = 4u128 * (n as u128) * (d as u128)
            + 8 * n as u128
            + 4 * (n as u128) * (knn_k as u128)
            + 9 * tree_count as u128;
        let header_bytes = 4 + 4 + 4 + 8 + 4 + 4 + 4 + 8u128;
        if u128::from(file_len) < header_bytes + fixed_bytes {
            return Err(Error::TruncatedIndex { path: path.into() });
        }

        let mut centroids = vec![0.0f32; n * d];
        r.read_f32_into::<LittleEndian>(&mut centroids)
            .map_err(truncated)?;
        let mut counts = vec![0u64; n];
        r.read_u64_into::<LittleEndian>(&mut counts)
            .map_err(truncated)?;
        let mut neighbors = vec![0u32; n * knn_k];
        r.read_u32_into::<LittleEndian>(&mut neighbors)
            .map_err(truncated)?;

        let mut trees = Vec::with_capacity(tree_count);
        for t in 0..tree_count {
            let node_count = r.read_u64::<LittleEndian>().map_err(truncated)?;
            // A binary tree with non-empty leaves over n items has fewer
            // than 2n nodes.
            if node_count == 0 || node_count >= 2 * n_clusters + 1 {
                return Err(inconsistent(format!(
                    "tree {t} claims {node_count} nodes for {n} clusters"
                )));
            }
            let mut nodes = Vec::with_capacity(node_count as usize);
            for i in 0..node_count {
                let tag = r.read_u8().map_err(truncated)?;
                match tag {
                    0 => {
                        let dim = r.read_u32::<LittleEndian>().map_err(truncated)?;
                        let threshold = r.read_f32::<LittleEndian>().map_err(truncated)?;
                        let left = r.read_u64::<LittleEndian>().map_err(truncated)?;
                        let right = r.read_u64::<LittleEndian>().map_err(truncated)?;
                        for child in [left, right] {
                            if child <= i || child >= node_count {
                                return Err(inconsistent(format!(
                                    "tree {t} node {i}: child {child} out of order"
                                )));
                            }
                        }
                        nodes.push(KdNode::Split {
                            dim,
                            threshold,
                            left: left as u32,
                            right: right as u32,
                        });
                    }
                    1 => {
                        let len = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
                        if len == 0 || len > n {
                            return Err(inconsistent(format!(
                                "tree {t} node {i}: leaf of {len} indices"
                            )));
                        }
                        let mut indices = vec![0u32; len];
                        r.read_u32_into::<LittleEndian>(&mut indices)
                            .map_err(truncated)?;
                        nodes.push(KdNode::Leaf { indices });
                    }
                    other => {
                        return Err(inconsistent(format!(
                            "tree {t} node {i}: unknown node tag {other}"
                        )));
                    }
                }
            }
            trees.push(KdTree::from_nodes(nodes));
        }

        let mut rest = [0u8; 1];
        match r.read(&mut rest) {
            Ok(0) => {}
            Ok(_) => return Err(inconsistent("trailing bytes after the last tree".into())),
            Err(e) => return Err(Error::io(path, e)),
        }

        let model = ClusterModel::new(side, centroids, counts)
            .map_err(|e| inconsistent(e.to_string()))?;
        let graph =
            KnnGraph::from_parts(knn_k, n, neighbors).map_err(|e| inconsistent(e.to_string()))?;
        let forest = KdForest::from_parts(d, leaf_capacity, trees)
            .map_err(|e| inconsistent(e.to_string()))?;
        DenoiseIndex::new(mean_intensity, model, forest, graph)
            .map_err(|e| inconsistent(e.to_string()))
    }
}

/// Knobs for [`build_denoise_index`].
#[derive(Debug, Clone)]
pub struct IndexBuildParams {
    /// Number of clusters to summarize the corpus into.
    pub n_clusters: usize,
    /// Neighbors per cluster in the expansion graph; `None` picks twice
    /// the patch dimension.
    pub knn_k: Option<usize>,
    /// Randomized trees in the lookup forest.
    pub tree_count: usize,
    /// Maximum clusters per tree leaf.
    pub leaf_capacity: usize,
    /// Cap on k-means update iterations.
    pub max_iters: usize,
    /// Master seed for clustering and tree randomization.
    pub seed: u64,
}

impl IndexBuildParams {
    pub fn new(n_clusters: usize) -> Self {
        IndexBuildParams {
            n_clusters,
            knn_k: None,
            tree_count: 64,
            leaf_capacity: 32,
            max_iters: 30,
            seed: 0,
        }
    }
}

/// Builds a full index from a raw corpus: normalize, cluster, graph, trees.
pub fn build_denoise_index(corpus: PatchCorpus, params: &IndexBuildParams) -> Result<DenoiseIndex> {
    let corpus = if corpus.mean_intensity() == 0.0 {
        normalize_corpus(corpus)?
    } else {
        corpus
    };
    let model = kmeans_cluster(
        &corpus,
        params.n_clusters,
        params.max_iters,
        derive_seed(params.seed, KMEANS_STREAM, 0),
    )?;
    let knn_k = params.knn_k.unwrap_or(2 * corpus.dim());
    let graph = build_knn_graph(&model, knn_k)?;
    let forest = build_kd_forest(
        &model,
        params.tree_count,
        params.leaf_capacity,
        derive_seed(params.seed, FOREST_STREAM, 0),
    )?;
    DenoiseIndex::new(corpus.mean_intensity(), model, forest, graph)
}

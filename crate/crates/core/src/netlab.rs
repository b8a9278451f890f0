//! Region-similarity analysis: the symmetrized similarity matrix, its
//! maximum-similarity spanning tree, fitness-ordered matrix exports and a
//! triangularity score for the ordered matrix.

use ndarray::Array2;
use serde::Serialize;

use crate::complexity;
use crate::error::{Error, Result};
use crate::fitness::{rank_desc, FitnessResult};
use crate::panel::BinaryMatrix;

/// Symmetric region-region similarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub nodes: Vec<String>,
    pub weights: Array2<f64>,
}

/// A spanning tree edge, labels ordered so `u < v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeEdge {
    pub u: String,
    pub v: String,
    pub similarity: f64,
}

/// A spanning tree over the similarity graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tree {
    pub nodes: Vec<String>,
    pub edges: Vec<TreeEdge>,
}

/// Region similarity: the transformed region matrix averaged with its
/// transpose, diagonal zeroed. Off-diagonal entries are bit-exactly
/// symmetric because each pair is computed once.
pub fn similarity(bm: &BinaryMatrix) -> Result<SimilarityGraph> {
    let transformed = complexity::transformed_region_matrix(bm)?;
    let n = transformed.nrows();
    let mut weights = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (transformed[[i, j]] + transformed[[j, i]]) / 2.0;
            weights[[i, j]] = s;
            weights[[j, i]] = s;
        }
    }
    Ok(SimilarityGraph {
        nodes: bm.regions.clone(),
        weights,
    })
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn root(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            self.parent[x] = self.root(self.parent[x]);
        }
        self.parent[x]
    }

    fn unite(&mut self, x: usize, y: usize) -> bool {
        let rx = self.root(x);
        let ry = self.root(y);
        if rx == ry {
            return false;
        }
        if self.rank[rx] < self.rank[ry] {
            self.parent[rx] = ry;
        } else {
            self.parent[ry] = rx;
            if self.rank[rx] == self.rank[ry] {
                self.rank[rx] += 1;
            }
        }
        true
    }
}

/// Maximum-similarity spanning tree.
///
/// Edges with zero similarity do not exist; each remaining similarity `s` is
/// turned into the distance `1 - s / s_max` and a minimum spanning tree is
/// grown greedily, breaking distance ties by lexicographic edge label. A
/// graph whose positive-similarity edges do not connect all nodes is an
/// error listing the components.
pub fn mst(graph: &SimilarityGraph) -> Result<Tree> {
    let n = graph.nodes.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }

    struct Candidate {
        distance: f64,
        u: usize,
        v: usize,
        similarity: f64,
    }

    let mut positive: Vec<(usize, usize, f64)> = Vec::new();
    let mut s_max = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = graph.weights[[i, j]];
            if s > 0.0 {
                positive.push((i, j, s));
                s_max = s_max.max(s);
            }
        }
    }

    let mut candidates: Vec<Candidate> = positive
        .into_iter()
        .map(|(i, j, s)| {
            // orient the label pair so ties sort the same way every run
            let (u, v) = if graph.nodes[i] <= graph.nodes[j] {
                (i, j)
            } else {
                (j, i)
            };
            Candidate {
                distance: 1.0 - s / s_max,
                u,
                v,
                similarity: s,
            }
        })
        .collect();
    candidates.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .expect("distances are finite")
            .then_with(|| graph.nodes[a.u].cmp(&graph.nodes[b.u]))
            .then_with(|| graph.nodes[a.v].cmp(&graph.nodes[b.v]))
    });

    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for c in candidates {
        if uf.unite(c.u, c.v) {
            edges.push(TreeEdge {
                u: graph.nodes[c.u].clone(),
                v: graph.nodes[c.v].clone(),
                similarity: c.similarity,
            });
        }
    }

    if edges.len() + 1 < n {
        let mut components: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
        for i in 0..n {
            let root = uf.root(i);
            components.entry(root).or_default().push(graph.nodes[i].clone());
        }
        return Err(Error::Disconnected {
            components: components.into_values().collect(),
        });
    }

    edges.sort_by(|a, b| a.u.cmp(&b.u).then_with(|| a.v.cmp(&b.v)));
    Ok(Tree {
        nodes: graph.nodes.clone(),
        edges,
    })
}

/// A binary matrix reordered by fitness, with the permutations applied.
#[derive(Debug, Clone)]
pub struct OrderedMatrix {
    pub matrix: BinaryMatrix,
    /// `row_permutation[i]` is the original row index of new row `i`.
    pub row_permutation: Vec<usize>,
    pub col_permutation: Vec<usize>,
}

/// Reorder rows by decreasing fitness and columns by increasing industry
/// complexity, ties broken by label, like the classic triangular plots.
pub fn ordered_matrix(bm: &BinaryMatrix, fitness: &FitnessResult) -> Result<OrderedMatrix> {
    if fitness.regions != bm.regions || fitness.industries != bm.industries {
        return Err(Error::LabelMismatch(
            "fitness result was computed on a different matrix".into(),
        ));
    }
    let region_ranks = rank_desc(&bm.regions, &fitness.fitness);
    let industry_ranks = rank_desc(&bm.industries, &fitness.industry_complexity);

    let mut row_permutation: Vec<usize> = (0..bm.regions.len()).collect();
    row_permutation.sort_by_key(|&s| region_ranks[s]);
    // ascending complexity = descending complexity rank
    let mut col_permutation: Vec<usize> = (0..bm.industries.len()).collect();
    col_permutation.sort_by_key(|&p| std::cmp::Reverse(industry_ranks[p]));

    let mut m = Array2::zeros((bm.regions.len(), bm.industries.len()));
    for (i, &s) in row_permutation.iter().enumerate() {
        for (j, &p) in col_permutation.iter().enumerate() {
            m[[i, j]] = bm.m[[s, p]];
        }
    }
    let regions = row_permutation.iter().map(|&s| bm.regions[s].clone()).collect();
    let industries = col_permutation.iter().map(|&p| bm.industries[p].clone()).collect();
    Ok(OrderedMatrix {
        matrix: BinaryMatrix::new(regions, industries, m),
        row_permutation,
        col_permutation,
    })
}

/// Fraction of cells that agree with the staircase expected from a perfectly
/// nested matrix of the same shape.
///
/// Cell `(i, j)` (0-based) is expected filled when `(j+1)/P <= 1 - i/S`,
/// i.e. `S*(j+1) + P*i <= S*P` in exact integer arithmetic; the score counts
/// filled-and-expected plus empty-and-unexpected cells over all `S*P`. A
/// perfectly nested ordered matrix scores exactly 1.
pub fn triangularity(bm: &BinaryMatrix) -> f64 {
    let (n_rows, n_cols) = bm.shape();
    let (s, p) = (n_rows as u64, n_cols as u64);
    let mut agree = 0u64;
    for i in 0..n_rows {
        for j in 0..n_cols {
            let expected = s * (j as u64 + 1) + p * i as u64 <= s * p;
            let filled = bm.m[[i, j]] != 0;
            if expected == filled {
                agree += 1;
            }
        }
    }
    agree as f64 / (s * p) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::{fitness_complexity, FitnessOptions};
    use ndarray::array;

    fn matrix(m: Array2<u8>) -> BinaryMatrix {
        let (s, p) = m.dim();
        BinaryMatrix::new(
            (0..s).map(|i| format!("R{i}")).collect(),
            (0..p).map(|j| format!("P{j}")).collect(),
            m,
        )
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn disjoint_regions_have_zero_similarity() {
        let bm = matrix(array![[1, 0], [0, 1]]);
        let graph = similarity(&bm).unwrap();
        assert_eq!(graph.weights[[0, 1]], 0.0);
        assert_eq!(graph.weights[[1, 0]], 0.0);
    }

    #[test]
    fn identical_rows_have_the_maximal_similarity() {
        let bm = matrix(array![[1, 1, 0], [1, 1, 0], [1, 0, 1]]);
        let graph = similarity(&bm).unwrap();
        let s01 = graph.weights[[0, 1]];
        assert!(s01 > graph.weights[[0, 2]]);
        assert!(s01 > graph.weights[[1, 2]]);
    }

    #[test]
    fn similarity_matches_hand_computed_nested_values() {
        // from the transformed matrix of the nested 3x3: 25/72, 2/9, 1/4
        let bm = matrix(array![[1, 1, 1], [1, 1, 0], [1, 0, 0]]);
        let graph = similarity(&bm).unwrap();
        assert_close(graph.weights[[0, 1]], 25.0 / 72.0, 1e-15);
        assert_close(graph.weights[[0, 2]], 2.0 / 9.0, 1e-15);
        assert_close(graph.weights[[1, 2]], 1.0 / 4.0, 1e-15);
        for i in 0..3 {
            assert_eq!(graph.weights[[i, i]], 0.0);
            for j in 0..3 {
                assert_eq!(graph.weights[[i, j]], graph.weights[[j, i]]);
            }
        }
    }

    fn graph(nodes: &[&str], entries: &[(usize, usize, f64)]) -> SimilarityGraph {
        let n = nodes.len();
        let mut weights = Array2::zeros((n, n));
        for &(i, j, s) in entries {
            weights[[i, j]] = s;
            weights[[j, i]] = s;
        }
        SimilarityGraph {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            weights,
        }
    }

    #[test]
    fn mst_drops_the_weakest_edge_of_a_triangle() {
        let g = graph(&["A", "B", "C"], &[(0, 1, 0.9), (1, 2, 0.5), (0, 2, 0.1)]);
        let tree = mst(&g).unwrap();
        assert_eq!(tree.edges.len(), 2);
        let pairs: Vec<(&str, &str)> = tree
            .edges
            .iter()
            .map(|e| (e.u.as_str(), e.v.as_str()))
            .collect();
        assert!(pairs.contains(&("A", "B")));
        assert!(pairs.contains(&("B", "C")));
    }

    #[test]
    fn mst_has_node_count_minus_one_edges() {
        let g = graph(
            &["A", "B", "C", "D", "E"],
            &[
                (0, 1, 0.3),
                (1, 2, 0.8),
                (2, 3, 0.2),
                (3, 4, 0.9),
                (0, 4, 0.4),
                (1, 3, 0.6),
            ],
        );
        let tree = mst(&g).unwrap();
        assert_eq!(tree.edges.len(), 4);
    }

    #[test]
    fn mst_reports_components_when_disconnected() {
        let g = graph(&["A", "B", "C", "D"], &[(0, 1, 0.5), (2, 3, 0.5)]);
        match mst(&g).unwrap_err() {
            Error::Disconnected { components } => {
                assert_eq!(components.len(), 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn mst_is_invariant_under_uniform_rescaling() {
        let g = graph(
            &["A", "B", "C", "D"],
            &[(0, 1, 0.9), (1, 2, 0.5), (0, 2, 0.1), (2, 3, 0.7), (0, 3, 0.2)],
        );
        let tree1 = mst(&g).unwrap();
        let mut scaled = g.clone();
        scaled.weights.mapv_inplace(|w| w * 3.5);
        let tree2 = mst(&scaled).unwrap();
        let edges1: Vec<(String, String)> =
            tree1.edges.iter().map(|e| (e.u.clone(), e.v.clone())).collect();
        let edges2: Vec<(String, String)> =
            tree2.edges.iter().map(|e| (e.u.clone(), e.v.clone())).collect();
        assert_eq!(edges1, edges2);
    }

    #[test]
    fn mst_breaks_ties_lexicographically() {
        // all similarities equal: the tree must pick AB, AC, AD
        let g = graph(
            &["A", "B", "C", "D"],
            &[(0, 1, 0.5), (0, 2, 0.5), (0, 3, 0.5), (1, 2, 0.5), (1, 3, 0.5), (2, 3, 0.5)],
        );
        let tree = mst(&g).unwrap();
        let pairs: Vec<(String, String)> =
            tree.edges.iter().map(|e| (e.u.clone(), e.v.clone())).collect();
        assert_eq!(
            pairs,
            vec![
                ("A".to_string(), "B".to_string()),
                ("A".to_string(), "C".to_string()),
                ("A".to_string(), "D".to_string())
            ]
        );
    }

    #[test]
    fn single_node_graph_is_a_trivial_tree() {
        let g = graph(&["A"], &[]);
        let tree = mst(&g).unwrap();
        assert!(tree.edges.is_empty());
    }

    fn nested_fitness(bm: &BinaryMatrix) -> FitnessResult {
        fitness_complexity(bm, &FitnessOptions::default()).unwrap()
    }

    #[test]
    fn ordered_matrix_keeps_already_ordered_input() {
        let bm = matrix(array![[1, 1, 1], [1, 1, 0], [1, 0, 0]]);
        let fr = nested_fitness(&bm);
        let ordered = ordered_matrix(&bm, &fr).unwrap();
        assert_eq!(ordered.matrix.m, bm.m);
        assert_eq!(ordered.row_permutation, vec![0, 1, 2]);
        assert_eq!(ordered.col_permutation, vec![0, 1, 2]);
    }

    #[test]
    fn ordered_matrix_restores_reversed_input() {
        let reversed = matrix(array![[0, 0, 1], [0, 1, 1], [1, 1, 1]]);
        let fr = nested_fitness(&reversed);
        let ordered = ordered_matrix(&reversed, &fr).unwrap();
        assert_eq!(ordered.matrix.m, array![[1, 1, 1], [1, 1, 0], [1, 0, 0]]);
        assert_eq!(ordered.row_permutation, vec![2, 1, 0]);
    }

    #[test]
    fn ordered_matrix_preserves_entry_multiset() {
        let bm = matrix(array![[1, 0, 1, 1], [0, 1, 1, 0], [1, 1, 0, 0]]);
        let fr = nested_fitness(&bm);
        let ordered = ordered_matrix(&bm, &fr).unwrap();
        let before: u32 = bm.m.iter().map(|&x| u32::from(x)).sum();
        let after: u32 = ordered.matrix.m.iter().map(|&x| u32::from(x)).sum();
        assert_eq!(before, after);
        let mut div_before = bm.diversification.clone();
        let mut div_after = ordered.matrix.diversification.clone();
        div_before.sort_unstable();
        div_after.sort_unstable();
        assert_eq!(div_before, div_after);
    }

    #[test]
    fn ordered_matrix_rejects_label_mismatch() {
        let bm = matrix(array![[1, 1], [1, 0]]);
        let other = matrix(array![[1, 1, 0], [1, 0, 1]]);
        let fr = nested_fitness(&other);
        assert!(matches!(
            ordered_matrix(&bm, &fr),
            Err(Error::LabelMismatch(_))
        ));
    }

    #[test]
    fn triangularity_of_perfect_staircase_is_one() {
        let bm = matrix(array![[1, 1, 1], [1, 1, 0], [1, 0, 0]]);
        assert_eq!(triangularity(&bm), 1.0);
        // non-square staircase: row fill 4 then 2
        let wide = matrix(array![[1, 1, 1, 1], [1, 1, 0, 0]]);
        assert_eq!(triangularity(&wide), 1.0);
    }

    #[test]
    fn triangularity_of_checkerboards_counted_by_hand() {
        // 4x4 band: expected filled iff i + j <= 3, which is 10 cells.
        // checkerboard starting filled at (0,0): 4 filled-and-expected,
        // 2 empty-and-unexpected -> 6/16; the opposite phase gives 10/16.
        let phase_a = matrix(array![
            [1, 0, 1, 0],
            [0, 1, 0, 1],
            [1, 0, 1, 0],
            [0, 1, 0, 1]
        ]);
        assert_close(triangularity(&phase_a), 6.0 / 16.0, 1e-15);
        let phase_b = matrix(array![
            [0, 1, 0, 1],
            [1, 0, 1, 0],
            [0, 1, 0, 1],
            [1, 0, 1, 0]
        ]);
        assert_close(triangularity(&phase_b), 10.0 / 16.0, 1e-15);
        // the two phases average to exactly one half
        assert_close(
            (triangularity(&phase_a) + triangularity(&phase_b)) / 2.0,
            0.5,
            1e-15,
        );
    }

    #[test]
    fn triangularity_of_all_ones_is_the_band_fraction() {
        // 3x3: sum of floor(3k/3) for k=1..3 is 6 -> 6/9
        let bm = matrix(Array2::ones((3, 3)));
        assert_close(triangularity(&bm), 6.0 / 9.0, 1e-15);
        // 4x4: 1+2+3+4 = 10 -> 10/16
        let bm = matrix(Array2::ones((4, 4)));
        assert_close(triangularity(&bm), 10.0 / 16.0, 1e-15);
        // 2x4: floor(4*1/2) + floor(4*2/2) = 2 + 4 = 6 -> 6/8
        let bm = matrix(Array2::ones((2, 4)));
        assert_close(triangularity(&bm), 6.0 / 8.0, 1e-15);
    }

    #[test]
    fn triangularity_is_stable_under_reordering_of_ordered_input() {
        let bm = matrix(array![[1, 1, 1], [1, 1, 0], [1, 0, 0]]);
        let fr = nested_fitness(&bm);
        let ordered = ordered_matrix(&bm, &fr).unwrap();
        let again = ordered_matrix(&ordered.matrix, &nested_fitness(&ordered.matrix)).unwrap();
        assert_eq!(
            triangularity(&ordered.matrix),
            triangularity(&again.matrix)
        );
    }
}

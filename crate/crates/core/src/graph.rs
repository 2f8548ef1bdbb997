//! Undirected graphs, degree normalization and the high-order proximity
//! operator `P_{a,b}(Ã) = Σ_{r=a..b} Ã^r / (b - a + 1)`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Highest proximity order accepted unless a caller raises the limit.
pub const DEFAULT_MAX_ORDER: usize = 16;

/// Users occupy `[0, num_users)`, items `[num_users, num_users + num_items)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub num_users: usize,
    pub num_items: usize,
}

impl Partition {
    pub fn is_user(&self, node: usize) -> bool {
        node < self.num_users
    }

    pub fn item_node(&self, item: usize) -> usize {
        self.num_users + item
    }
}

/// Simple undirected graph with a symmetric 0/1 adjacency and no self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    /// Canonical `(u, v)` with `u < v`, sorted.
    edges: Vec<(usize, usize)>,
    partition: Option<Partition>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Deduplicates and symmetrizes `edges`. Pairs may be given in either
    /// orientation.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        partition: Option<Partition>,
    ) -> Result<Self> {
        if let Some(p) = partition {
            if p.num_users + p.num_items != num_nodes {
                return Err(Error::PartitionMismatch {
                    num_users: p.num_users,
                    num_items: p.num_items,
                    num_nodes,
                });
            }
        }
        let mut canon = Vec::new();
        for (u, v) in edges {
            for node in [u, v] {
                if node >= num_nodes {
                    return Err(Error::NodeOutOfRange { node, num_nodes });
                }
            }
            if u == v {
                return Err(Error::SelfLoop { node: u });
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            if let Some(p) = partition {
                if !(p.is_user(a) && !p.is_user(b)) {
                    return Err(Error::NotBipartite { u, v });
                }
            }
            canon.push((a, b));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self::from_canonical(num_nodes, canon, partition))
    }

    fn from_canonical(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        partition: Option<Partition>,
    ) -> Self {
        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; num_nodes + 1];
        for v in 0..num_nodes {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0usize; offsets[num_nodes]];
        for &(u, v) in &edges {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        for v in 0..num_nodes {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Self {
            num_nodes,
            edges,
            partition,
            offsets,
            neighbors,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn partition(&self) -> Option<Partition> {
        self.partition
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> DegreeVector {
        DegreeVector((0..self.num_nodes).map(|v| self.degree(v)).collect())
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Symmetric 0/1 adjacency with both `(i, j)` and `(j, i)` stored.
    pub fn adjacency<T: Scalar>(&self) -> CsrMatrix<T> {
        let triplets = self
            .edges
            .iter()
            .flat_map(|&(u, v)| [(u, v, T::one()), (v, u, T::one())])
            .collect();
        CsrMatrix::from_triplets(self.num_nodes, self.num_nodes, triplets)
    }

    /// Same edges, nodes relabelled by `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::shape(self.num_nodes, perm.len()));
        }
        Graph::new(
            self.num_nodes,
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])),
            None,
        )
    }
}

/// Per-node degree counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeVector(pub Vec<usize>);

impl DegreeVector {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormScheme {
    /// The raw adjacency.
    #[default]
    None,
    /// `D⁻¹ M`.
    Row,
    /// `D^{-1/2} M D^{-1/2}`.
    Symmetric,
}

impl fmt::Display for NormScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormScheme::None => "none",
            NormScheme::Row => "row",
            NormScheme::Symmetric => "symmetric",
        })
    }
}

impl FromStr for NormScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(NormScheme::None),
            "row" => Ok(NormScheme::Row),
            "symmetric" | "sym" => Ok(NormScheme::Symmetric),
            other => Err(Error::InvalidConfig(format!("unknown normalization `{other}`"))),
        }
    }
}

/// A normalized (or raw) adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency<T> {
    scheme: NormScheme,
    matrix: CsrMatrix<T>,
}

impl<T: Scalar> NormalizedAdjacency<T> {
    /// Normalizes any square nonnegative matrix by its row sums. A zero row
    /// sum has inverse zero, so empty rows stay empty.
    pub fn from_matrix(matrix: &CsrMatrix<T>, scheme: NormScheme) -> Self {
        let degree = matrix.row_sums();
        let inv = |d: T, f: fn(T) -> T| if d > T::zero() { f(d) } else { T::zero() };
        let matrix = match scheme {
            NormScheme::None => matrix.clone(),
            NormScheme::Row => {
                let inv_d: Vec<T> = degree.iter().map(|&d| inv(d, |d| d.recip())).collect();
                matrix.map_indexed(|r, _, v| v * inv_d[r])
            }
            NormScheme::Symmetric => {
                let inv_sqrt: Vec<T> = degree
                    .iter()
                    .map(|&d| inv(d, |d| d.sqrt().recip()))
                    .collect();
                matrix.map_indexed(|r, c, v| inv_sqrt[r] * v * inv_sqrt[c])
            }
        };
        Self { scheme, matrix }
    }

    pub fn scheme(&self) -> NormScheme {
        self.scheme
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.rows()
    }
}

pub fn normalize<T: Scalar>(graph: &Graph, scheme: NormScheme) -> NormalizedAdjacency<T> {
    NormalizedAdjacency::from_matrix(&graph.adjacency(), scheme)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplicationMode {
    Lazy,
    Materialized,
}

/// `P_{a,b}(Ã)`, applied either through repeated sparse products or through
/// an explicit sparse matrix.
#[derive(Debug, Clone)]
pub struct ProximityOperator<T> {
    base: CsrMatrix<T>,
    /// `None` when the base is symmetric.
    base_t: Option<CsrMatrix<T>>,
    a: usize,
    b: usize,
    materialized: Option<(CsrMatrix<T>, CsrMatrix<T>)>,
}

pub fn proximity<T: Scalar>(
    base: &NormalizedAdjacency<T>,
    a: usize,
    b: usize,
) -> Result<ProximityOperator<T>> {
    ProximityOperator::new(base, a, b, DEFAULT_MAX_ORDER)
}

impl<T: Scalar> ProximityOperator<T> {
    pub fn new(base: &NormalizedAdjacency<T>, a: usize, b: usize, max_order: usize) -> Result<Self> {
        if a > b {
            return Err(Error::InvalidOrder { a, b });
        }
        if b > max_order {
            return Err(Error::OrderTooLarge {
                order: b,
                max: max_order,
            });
        }
        let m = base.matrix().clone();
        let base_t = if m.is_symmetric(T::zero()) {
            None
        } else {
            Some(m.transpose())
        };
        Ok(Self {
            base: m,
            base_t,
            a,
            b,
            materialized: None,
        })
    }

    pub fn identity(num_nodes: usize) -> Self {
        Self {
            base: CsrMatrix::identity(num_nodes),
            base_t: None,
            a: 0,
            b: 0,
            materialized: None,
        }
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn num_nodes(&self) -> usize {
        self.base.rows()
    }

    pub fn is_identity(&self) -> bool {
        self.b == 0
    }

    pub fn mode(&self) -> ApplicationMode {
        if self.materialized.is_some() {
            ApplicationMode::Materialized
        } else {
            ApplicationMode::Lazy
        }
    }

    /// Switches to explicit-matrix application.
    pub fn into_materialized(mut self, drop_tol: T) -> Result<Self> {
        let p = self.materialize(drop_tol)?;
        let pt = p.transpose();
        self.materialized = Some((p, pt));
        Ok(self)
    }

    /// Explicit `Σ_{r=a..b} Ã^r / (b-a+1)`; entries below `drop_tol` in
    /// magnitude are dropped from each power.
    pub fn materialize(&self, drop_tol: T) -> Result<CsrMatrix<T>> {
        let n = self.num_nodes();
        let mut power = CsrMatrix::identity(n);
        let mut sum = if self.a == 0 {
            power.clone()
        } else {
            CsrMatrix::zeros(n, n)
        };
        for r in 1..=self.b {
            power = power.matmul(&self.base, drop_tol)?;
            if r >= self.a {
                sum = sum.linear_combination(T::one(), &power, T::one())?;
            }
        }
        Ok(sum.scale(self.weight()))
    }

    pub fn to_dense(&self) -> Result<Array2<T>> {
        Ok(self.materialize(T::zero())?.to_dense())
    }

    /// `P x`.
    pub fn apply(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if let Some((p, _)) = &self.materialized {
            return p.mul_dense(x);
        }
        self.apply_lazy(&self.base, x)
    }

    /// `Pᵀ x`; equal to [`apply`](Self::apply) for symmetric bases.
    pub fn apply_transpose(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if let Some((_, pt)) = &self.materialized {
            return pt.mul_dense(x);
        }
        self.apply_lazy(self.base_t.as_ref().unwrap_or(&self.base), x)
    }

    fn weight(&self) -> T {
        T::one() / T::of((self.b - self.a + 1) as f64)
    }

    fn apply_lazy(&self, base: &CsrMatrix<T>, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if x.nrows() != self.num_nodes() {
            return Err(Error::shape(
                format!("{} rows", self.num_nodes()),
                format!("{} rows", x.nrows()),
            ));
        }
        if self.b == 0 {
            return Ok(x.to_owned());
        }
        let mut acc = if self.a == 0 {
            x.to_owned()
        } else {
            Array2::zeros(x.raw_dim())
        };
        let mut current = x.to_owned();
        for r in 1..=self.b {
            current = base.mul_dense(current.view())?;
            if r >= self.a {
                acc += &current;
            }
        }
        acc *= self.weight();
        Ok(acc)
    }
}

/// `X̄ = P X`.
pub fn propagate<T: Scalar>(
    p: &ProximityOperator<T>,
    x: &EmbeddingMatrix<T>,
) -> Result<EmbeddingMatrix<T>> {
    x.expect_rows(p.num_nodes())?;
    Ok(EmbeddingMatrix::with_step(p.apply(x.values().view())?, x.step()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn path2() -> Graph {
        Graph::new(2, [(0, 1)], None).unwrap()
    }

    #[test]
    fn single_edge_is_symmetrized() {
        let g = path2();
        assert_eq!(g.adjacency::<f64>().to_dense(), array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn reversed_duplicate_collapses() {
        let g = Graph::new(2, [(0, 1), (1, 0)], None).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g, path2());
    }

    #[test]
    fn construction_errors_are_distinct() {
        assert!(matches!(
            Graph::new(2, [(0, 2)], None),
            Err(Error::NodeOutOfRange { node: 2, num_nodes: 2 })
        ));
        assert!(matches!(Graph::new(2, [(1, 1)], None), Err(Error::SelfLoop { node: 1 })));
        let p = Partition {
            num_users: 2,
            num_items: 2,
        };
        assert!(matches!(
            Graph::new(4, [(0, 1)], Some(p)),
            Err(Error::NotBipartite { .. })
        ));
        assert!(matches!(
            Graph::new(5, [(0, 2)], Some(p)),
            Err(Error::PartitionMismatch { .. })
        ));
    }

    #[test]
    fn degrees_sum_to_twice_edges() {
        let g = Graph::new(5, [(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)], None).unwrap();
        let d = g.degrees();
        assert_eq!(d.total(), 2 * g.num_edges());
        assert_eq!(d.as_slice(), &[2, 3, 2, 3, 0]);
    }

    #[test]
    fn normalization_examples() {
        let sym = normalize::<f64>(&path2(), NormScheme::Symmetric);
        assert_eq!(sym.matrix().to_dense(), array![[0.0, 1.0], [1.0, 0.0]]);

        let tri = Graph::new(3, [(0, 1), (1, 2), (0, 2)], None).unwrap();
        let row = normalize::<f64>(&tri, NormScheme::Row);
        assert!(row.matrix().values().iter().all(|&v| v == 0.5));

        let star = Graph::new(4, [(0, 1), (0, 2), (0, 3)], None).unwrap();
        let s = normalize::<f64>(&star, NormScheme::Symmetric);
        for i in 1..4 {
            assert!((s.matrix().get(0, i).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }

        let none = normalize::<f64>(&star, NormScheme::None);
        assert_eq!(none.matrix(), &star.adjacency());
    }

    #[test]
    fn isolated_node_rows_stay_zero() {
        let g = Graph::new(3, [(0, 1)], None).unwrap();
        let row = normalize::<f64>(&g, NormScheme::Row);
        assert_eq!(row.matrix().row_nnz(2), 0);
        let sums = row.matrix().row_sums();
        assert_eq!(sums, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn proximity_identity_and_path_powers() {
        let base = normalize::<f64>(&path2(), NormScheme::Row);
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let id = proximity(&base, 0, 0).unwrap();
        assert_eq!(id.apply(x.view()).unwrap(), x);

        let p = proximity(&base, 1, 2).unwrap();
        assert_eq!(p.to_dense().unwrap(), array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn proximity_order_errors() {
        let base = normalize::<f64>(&path2(), NormScheme::Row);
        assert!(matches!(proximity(&base, 3, 2), Err(Error::InvalidOrder { a: 3, b: 2 })));
        assert!(matches!(
            proximity(&base, 0, 17),
            Err(Error::OrderTooLarge { order: 17, max: 16 })
        ));
        assert!(ProximityOperator::new(&base, 0, 17, 32).is_ok());
    }

    #[test]
    fn propagate_checks_rows() {
        let base = normalize::<f64>(&path2(), NormScheme::Row);
        let p = proximity(&base, 0, 1).unwrap();
        let x = EmbeddingMatrix::<f64>::zeros(3, 2);
        assert!(matches!(propagate(&p, &x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn materialized_mode_matches_lazy() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)], None).unwrap();
        let base = normalize::<f64>(&g, NormScheme::Row);
        let lazy = proximity(&base, 1, 3).unwrap();
        let mat = lazy.clone().into_materialized(0.0).unwrap();
        assert_eq!(mat.mode(), ApplicationMode::Materialized);
        let x = array![[1.0, -1.0], [0.5, 2.0], [0.0, 1.0], [3.0, 0.0]];
        let d = crate::embedding::max_abs_diff(
            &lazy.apply(x.view()).unwrap(),
            &mat.apply(x.view()).unwrap(),
        );
        assert!(d < 1e-12);
        let dt = crate::embedding::max_abs_diff(
            &lazy.apply_transpose(x.view()).unwrap(),
            &mat.apply_transpose(x.view()).unwrap(),
        );
        assert!(dt < 1e-12);
    }
}

//! Sparsity graphs and tree decompositions built from elimination orderings.

mod decomposition;
mod graph;
mod ordering;

pub use decomposition::{
    supernode_merge, symbolic_factor, validate, TreeDecomposition, Violation,
};
pub use graph::{sparsity_graph, Graph};
pub use ordering::min_degree_order;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChordalError {
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("ordering is not a permutation of the vertices")]
    InvalidPermutation,
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Minimum-degree ordering, symbolic factorization and supernode merging in one call.
pub fn decompose(g: &Graph) -> TreeDecomposition {
    let perm = min_degree_order(g);
    decompose_with(g, &perm).expect("minimum-degree order is a permutation")
}

/// Same as [`decompose`] with a caller-supplied elimination order.
pub fn decompose_with(g: &Graph, perm: &[usize]) -> Result<TreeDecomposition, ChordalError> {
    Ok(supernode_merge(&symbolic_factor(g, perm)?))
}

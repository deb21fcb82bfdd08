use crate::numerics::SeededRng;

/// Row-major `n_rows x dim` lookup table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    pub vectors: Vec<f64>,
}

impl EmbeddingTable {
    /// Entries drawn from `N(0, std^2)`.
    pub fn gaussian(n_rows: usize, dim: usize, std: f64, rng: &mut SeededRng) -> Self {
        let vectors = (0..n_rows * dim).map(|_| std * rng.gaussian()).collect();
        Self { dim, vectors }
    }

    pub fn from_vectors(dim: usize, vectors: Vec<f64>) -> Self {
        assert!(dim > 0 && vectors.len() % dim == 0, "table size must be a multiple of dim");
        Self { dim, vectors }
    }

    pub fn n_rows(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.vectors[r * self.dim..(r + 1) * self.dim]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.vectors[r * self.dim..(r + 1) * self.dim]
    }
}

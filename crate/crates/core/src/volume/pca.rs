use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Principal component projection fitted on the rows of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// D x k, one unit column per component, by descending variance.
    pub components: DMatrix<f64>,
    /// All D covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    /// Each component's sign is fixed so that its largest-magnitude
    /// coordinate is positive.
    pub fn fit(data: &DMatrix<f64>, k: usize) -> Result<Self> {
        let (rows, dims) = data.shape();
        if rows == 0 || dims == 0 {
            return Err(Error::InvalidArgument("PCA on an empty matrix".into()));
        }
        if k == 0 || k > rows.min(dims) {
            return Err(Error::InvalidArgument(format!(
                "k = {k} must lie in 1..={}",
                rows.min(dims)
            )));
        }
        let mean = data.row_mean().transpose();
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let denom = (rows.max(2) - 1) as f64;
        let cov = centered.transpose() * &centered / denom;
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..dims).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let mut components = DMatrix::zeros(dims, k);
        for (c, &src) in order.iter().take(k).enumerate() {
            let mut v = eig.eigenvectors.column(src).into_owned();
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                v = -v;
            }
            components.set_column(c, &v);
        }
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        Ok(Self {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn k(&self) -> usize {
        self.components.ncols()
    }

    pub fn transform(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        centered * &self.components
    }

    pub fn inverse_transform(&self, reduced: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = reduced * self.components.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues[..self.k()]
            .iter()
            .map(|e| if total > 0.0 { e / total } else { 0.0 })
            .collect()
    }
}

/// Rows of `data` projected onto its top-`k` principal components.
pub fn pca_reduce(data: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    Ok(Pca::fit(data, k)?.transform(data))
}

//! Iterated principal-axis factoring.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FactorError, StandardizedMatrix};

/// Communalities are capped just below one (Heywood cases).
pub const HEYWOOD_CAP: f64 = 1.0 - 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PafOptions {
    pub max_iter: usize,
    /// Convergence threshold on the largest communality change.
    pub tol: f64,
}

impl Default for PafOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PafResult {
    /// p x k unrotated loadings.
    pub loadings: DMatrix<f64>,
    /// Eigenvalues of the unreduced correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
    pub communalities: Vec<f64>,
    pub initial_communalities: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PafResult {
    pub fn k(&self) -> usize {
        self.loadings.ncols()
    }
}

/// Population correlation matrix of standardized columns (`ZᵀZ / n`).
pub fn correlation_matrix(z: &StandardizedMatrix) -> DMatrix<f64> {
    let n = z.nrows() as f64;
    let mut r = z.values.tr_mul(&z.values) / n;
    let p = r.nrows();
    for i in 0..p {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Eigenpairs sorted by descending eigenvalue (ties keep index order).
pub(crate) fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Kaiser criterion: eigenvalues strictly greater than one.
pub fn kaiser_count(eigenvalues: &[f64]) -> usize {
    eigenvalues.iter().filter(|&&e| e > 1.0).count()
}

/// Squared multiple correlations, `1 - 1/diag(R⁻¹)`.
pub fn squared_multiple_correlations(r: &DMatrix<f64>) -> Vec<f64> {
    let p = r.nrows();
    let inv = r
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| r.clone().try_inverse());
    match inv {
        Some(inv) => (0..p)
            .map(|i| (1.0 - 1.0 / inv[(i, i)]).clamp(0.0, HEYWOOD_CAP))
            .collect(),
        None => {
            log::warn!("correlation matrix is singular; starting communalities from max |r|");
            (0..p)
                .map(|i| {
                    (0..p)
                        .filter(|&j| j != i)
                        .map(|j| r[(i, j)].abs())
                        .fold(0.0, f64::max)
                        .min(HEYWOOD_CAP)
                })
                .collect()
        }
    }
}

/// Flip each column so its largest-magnitude entry is positive.
pub(crate) fn orient_columns(m: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let mut best = 0.0f64;
        for i in 0..m.nrows() {
            if m[(i, j)].abs() > best.abs() {
                best = m[(i, j)];
            }
        }
        let s = if best < 0.0 { -1.0 } else { 1.0 };
        if s < 0.0 {
            m.column_mut(j).neg_mut();
        }
        signs.push(s);
    }
    signs
}

/// Iterated PAF on standardized data.
pub fn paf_extract(z: &StandardizedMatrix, opts: PafOptions) -> Result<PafResult, FactorError> {
    paf_from_correlation(&correlation_matrix(z), opts)
}

/// Iterated PAF starting from a correlation matrix.
///
/// The number of factors comes from the unreduced matrix; each iteration
/// places the current communalities on the diagonal, takes the top-k
/// eigenpairs of that reduced matrix, and recomputes communalities as row sums
/// of squared loadings.
pub fn paf_from_correlation(r: &DMatrix<f64>, opts: PafOptions) -> Result<PafResult, FactorError> {
    let p = r.nrows();
    let (eigenvalues, _) = sorted_eigen(r);
    let k = kaiser_count(&eigenvalues);
    if k == 0 {
        return Err(FactorError::NoFactorsRetained {
            largest_eigenvalue: eigenvalues.first().copied().unwrap_or(0.0),
        });
    }

    let initial = squared_multiple_correlations(r);
    let mut h2 = initial.clone();
    let mut loadings = DMatrix::zeros(p, k);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut reduced = r.clone();
        reduced.set_diagonal(&DVector::from_vec(h2.clone()));
        let (values, vectors) = sorted_eigen(&reduced);
        for j in 0..k {
            let scale = values[j].max(0.0).sqrt();
            loadings.set_column(j, &(vectors.column(j) * scale));
        }
        let mut next = Vec::with_capacity(p);
        for i in 0..p {
            let ss: f64 = loadings.row(i).iter().map(|v| v * v).sum();
            if ss > HEYWOOD_CAP {
                loadings.row_mut(i).scale_mut((HEYWOOD_CAP / ss).sqrt());
                next.push(HEYWOOD_CAP);
            } else {
                next.push(ss);
            }
        }
        let delta = next
            .iter()
            .zip(&h2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        h2 = next;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("PAF did not converge in {} iterations", opts.max_iter);
    }
    orient_columns(&mut loadings);
    let communalities = (0..p)
        .map(|i| loadings.row(i).iter().map(|v| v * v).sum())
        .collect();

    Ok(PafResult {
        loadings,
        eigenvalues,
        communalities,
        initial_communalities: initial,
        iterations,
        converged,
    })
}

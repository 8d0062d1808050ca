//! Direct oblimin rotation by gradient projection.
//!
//! The rotation matrix `T` has unit-length columns; the pattern is
//! `Λ = A (T⁻¹)ᵀ` and the factor correlations are `Φ = TᵀT`, so
//! `ΛΦΛᵀ = AAᵀ` and communalities are untouched. With `gamma = 0` the
//! criterion is quartimin.

use nalgebra::DMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationOptions {
    pub max_iter: usize,
    /// Stop when the projected gradient's Frobenius norm falls below this.
    pub tol: f64,
    pub gamma: f64,
}

impl Default for RotationOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-5,
            gamma: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    /// p x k pattern loadings.
    pub pattern: DMatrix<f64>,
    /// k x k factor correlations, unit diagonal.
    pub phi: DMatrix<f64>,
    pub transform: DMatrix<f64>,
    pub criterion: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Oblimin criterion value and its gradient with respect to the loadings.
fn oblimin(l: &DMatrix<f64>, gamma: f64) -> (f64, DMatrix<f64>) {
    let (p, k) = l.shape();
    let l2 = l.component_mul(l);
    // each entry: sum of the other columns' squared loadings in the same row
    let mut x = DMatrix::zeros(p, k);
    for i in 0..p {
        let total: f64 = l2.row(i).sum();
        for j in 0..k {
            x[(i, j)] = total - l2[(i, j)];
        }
    }
    if gamma != 0.0 {
        let col_means: Vec<f64> = (0..k).map(|j| x.column(j).mean()).collect();
        for i in 0..p {
            for j in 0..k {
                x[(i, j)] -= gamma * col_means[j];
            }
        }
    }
    let f = l2.component_mul(&x).sum() / 4.0;
    (f, l.component_mul(&x))
}

fn pattern_for(a: &DMatrix<f64>, t: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let t_inv = t.clone().try_inverse()?;
    Some((a * t_inv.transpose(), t_inv))
}

/// Rotate unrotated loadings `a` (p x k), starting from the identity.
pub fn rotate_oblimin(a: &DMatrix<f64>, opts: RotationOptions) -> Rotation {
    let k = a.ncols();
    let mut t = DMatrix::<f64>::identity(k, k);
    if k <= 1 {
        return Rotation {
            pattern: a.clone(),
            phi: DMatrix::identity(k, k),
            transform: t,
            criterion: 0.0,
            iterations: 0,
            converged: true,
        };
    }

    let (mut l, mut t_inv) = pattern_for(a, &t).expect("identity is invertible");
    let (mut f, gq) = oblimin(&l, opts.gamma);
    let mut g = -(l.transpose() * gq * &t_inv).transpose();
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        // project the gradient onto the tangent space of unit-column matrices
        let mut gp = g.clone();
        for j in 0..k {
            let d: f64 = t.column(j).dot(&g.column(j));
            let tj = t.column(j).clone_owned();
            gp.column_mut(j).axpy(-d, &tj, 1.0);
        }
        let s = gp.norm();
        if s < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        step *= 2.0;
        let mut accepted = None;
        for _ in 0..=10 {
            let mut x = &t - &gp * step;
            for j in 0..k {
                let n = x.column(j).norm();
                x.column_mut(j).unscale_mut(n);
            }
            if let Some((lt, ti)) = pattern_for(a, &x) {
                let (ft, gqt) = oblimin(&lt, opts.gamma);
                let improved = ft < f - 0.5 * s * s * step;
                accepted = Some((x, lt, ti, ft, gqt));
                if improved {
                    break;
                }
            }
            step /= 2.0;
        }
        let Some((tt, lt, ti, ft, gqt)) = accepted else {
            break;
        };
        t = tt;
        l = lt;
        t_inv = ti;
        f = ft;
        g = -(l.transpose() * gqt * &t_inv).transpose();
    }
    if !converged {
        log::warn!("oblimin rotation stopped after {iterations} iterations without converging");
    }

    let mut phi = t.transpose() * &t;
    for i in 0..k {
        phi[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (phi[(i, j)] + phi[(j, i)]);
            phi[(i, j)] = v;
            phi[(j, i)] = v;
        }
    }
    Rotation {
        pattern: l,
        phi,
        transform: t,
        criterion: f,
        iterations,
        converged,
    }
}

/// Order factors by descending sum of squared pattern loadings and flip each
/// so its largest-magnitude loading is positive. `phi` follows along.
pub fn orient_factors(pattern: &mut DMatrix<f64>, phi: &mut DMatrix<f64>) {
    let k = pattern.ncols();
    let ss: Vec<f64> = (0..k).map(|j| pattern.column(j).norm_squared()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| ss[b].total_cmp(&ss[a]).then(a.cmp(&b)));
    let mut reordered = DMatrix::from_fn(pattern.nrows(), k, |i, j| pattern[(i, order[j])]);
    let signs = super::paf::orient_columns(&mut reordered);
    *phi = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            phi[(order[i], order[j])] * signs[i] * signs[j]
        }
    });
    *pattern = reordered;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn communalities(pattern: &DMatrix<f64>, phi: &DMatrix<f64>) -> Vec<f64> {
        let m = pattern * phi * pattern.transpose();
        (0..m.nrows()).map(|i| m[(i, i)]).collect()
    }

    #[test]
    fn single_factor_is_left_alone() {
        let a = DMatrix::from_column_slice(3, 1, &[0.8, 0.7, 0.6]);
        let r = rotate_oblimin(&a, RotationOptions::default());
        assert_eq!(r.pattern, a);
        assert_eq!(r.phi, DMatrix::identity(1, 1));
    }

    #[test]
    fn recovers_simple_structure_from_mixed_loadings() {
        let planted = DMatrix::from_row_slice(
            6,
            2,
            &[0.8, 0.0, 0.8, 0.0, 0.8, 0.0, 0.0, 0.8, 0.0, 0.8, 0.0, 0.8],
        );
        let theta: f64 = 0.6;
        let rot =
            DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let mixed = &planted * rot;
        let r = rotate_oblimin(&mixed, RotationOptions::default());
        assert!(r.converged);
        let (mut pattern, mut phi) = (r.pattern, r.phi);
        orient_factors(&mut pattern, &mut phi);
        // blocks land on separate factors with near-zero cross loadings
        for i in 0..6 {
            let (main, cross) = if i < 3 { (0, 1) } else { (1, 0) };
            let (main, cross) = if pattern[(0, 0)].abs() > 0.5 {
                (main, cross)
            } else {
                (cross, main)
            };
            assert!((pattern[(i, main)] - 0.8).abs() < 1e-3, "{pattern}");
            assert!(pattern[(i, cross)].abs() < 1e-3);
        }
        assert!(phi[(0, 1)].abs() < 1e-3);
    }

    #[test]
    fn preserves_communalities_and_unit_phi_diagonal() {
        let a = DMatrix::from_row_slice(
            5,
            3,
            &[
                0.7, 0.3, 0.1, 0.6, -0.2, 0.3, 0.2, 0.5, 0.4, 0.1, 0.6, -0.3, 0.5, 0.4, 0.2,
            ],
        );
        let r = rotate_oblimin(&a, RotationOptions::default());
        let before = communalities(&a, &DMatrix::identity(3, 3));
        let after = communalities(&r.pattern, &r.phi);
        for (b, a) in before.iter().zip(&after) {
            assert!((b - a).abs() < 1e-6);
        }
        for i in 0..3 {
            assert_eq!(r.phi[(i, i)], 1.0);
        }
    }

    #[test]
    fn orientation_keeps_communalities() {
        let mut pattern = DMatrix::from_row_slice(3, 2, &[-0.9, 0.1, -0.2, 0.3, 0.1, -0.7]);
        let mut phi = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let before = communalities(&pattern, &phi);
        orient_factors(&mut pattern, &mut phi);
        assert!(pattern[(0, 0)] > 0.0);
        assert!(pattern[(2, 1)] > 0.0);
        assert!((phi[(0, 1)] - 0.4).abs() < 1e-15);
        for (b, a) in before.iter().zip(communalities(&pattern, &phi)) {
            assert!((b - a).abs() < 1e-12);
        }
    }
}

//! Lanczos iteration for the low end of a real symmetric operator given only
//! as a matrix-vector product.
//!
//! Every Lanczos vector is kept and the new direction is re-orthogonalized
//! against all of them (twice), so the Ritz values do not develop ghost copies.
//! Lanczos from a single start vector sees one direction per eigenspace, so
//! multiplicities are recovered by deflation: the `j`-th eigenpair is the
//! lowest one of the operator restricted to the orthogonal complement of the
//! `j − 1` pairs already found.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Absolute bound on the residual `‖Ax − θx‖`.
    pub tol: f64,
    pub seed: u64,
    /// Ritz values are extracted every `check_every` steps.
    pub check_every: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-9,
            seed: 0x5eed,
            check_every: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            axpy(-c, v, w);
        }
    }
}

/// The `k` lowest eigenpairs of the symmetric operator `op` on `R^dim`,
/// ascending, with multiplicity.
pub fn lowest_eigenpairs<F>(
    dim: usize,
    k: usize,
    op: F,
    opts: &LanczosOptions,
) -> Result<Vec<EigenPair>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut found: Vec<EigenPair> = Vec::with_capacity(k);
    let mut locked: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k.min(dim) {
        let pair = lowest_in_complement(dim, &op, &locked, opts, opts.seed.wrapping_add(j as u64))?;
        locked.push(pair.vector.clone());
        found.push(pair);
    }
    found.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(found)
}

fn lowest_in_complement<F>(
    dim: usize,
    op: &F,
    locked: &[Vec<f64>],
    opts: &LanczosOptions,
    seed: u64,
) -> Result<EigenPair>
where
    F: Fn(&[f64], &mut [f64]),
{
    if locked.len() >= dim {
        return Err(Error::Domain("no directions left after deflation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    orthogonalize(&mut v, locked);
    let nv = norm(&v);
    if nv == 0.0 {
        return Err(Error::Numerical(
            "start vector vanished after deflation".into(),
        ));
    }
    v.iter_mut().for_each(|x| *x /= nv);

    let max_iter = opts.max_iter.min(dim - locked.len()).max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter + 1);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_iter);
    let mut beta: Vec<f64> = Vec::with_capacity(max_iter);
    basis.push(v);
    let mut w = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;

    for m in 1..=max_iter {
        let current = &basis[m - 1];
        op(current, &mut w);
        let a = dot(current, &w);
        axpy(-a, current, &mut w);
        if m >= 2 {
            axpy(-beta[m - 2], &basis[m - 2], &mut w);
        }
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        alpha.push(a);
        let b = norm(&w);
        let invariant = b <= 1e-12 * (a.abs() + 1.0);
        let exhausted = invariant || m == max_iter;

        if exhausted || m % opts.check_every == 0 {
            let s = lowest_ritz(&alpha, &beta);
            let residual = b * s[m - 1].abs();
            last_residual = residual;
            if residual <= opts.tol || exhausted {
                let mut x = vec![0.0; dim];
                for (coef, q) in s.iter().zip(&basis) {
                    axpy(*coef, q, &mut x);
                }
                orthogonalize(&mut x, locked);
                let nx = norm(&x);
                x.iter_mut().for_each(|xi| *xi /= nx);
                let mut hx = vec![0.0; dim];
                op(&x, &mut hx);
                let value = dot(&x, &hx);
                axpy(-value, &x, &mut hx);
                let true_residual = norm(&hx);
                let floor = if invariant {
                    1e-9 * (value.abs() + 1.0)
                } else {
                    0.0
                };
                if true_residual <= opts.tol.max(floor) {
                    return Ok(EigenPair {
                        value,
                        vector: x,
                        residual: true_residual,
                        iterations: m,
                    });
                }
                if exhausted {
                    return Err(Error::Convergence {
                        iterations: m,
                        residual: true_residual,
                    });
                }
            }
        }
        if exhausted {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: last_residual,
    })
}

/// Eigenvector of the lowest eigenvalue of the tridiagonal matrix.
fn lowest_ritz(alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty tridiagonal");
    eig.eigenvectors.column(idx).iter().copied().collect()
}

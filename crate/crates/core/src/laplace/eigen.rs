use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::random::standard_normal_vec;

#[derive(Debug, Clone)]
pub struct GeneralizedEigenpairs {
    /// Descending.
    pub values: Vec<f64>,
    /// `B`-orthonormal columns.
    pub vectors: Vec<Vec<f64>>,
}

/// Dominant eigenpairs of `A v = λ B v` by the double-pass randomized
/// method: `A` symmetric, `B` symmetric positive definite with inverse
/// action `b_inv`.
///
/// The first pass sketches the range of `B⁻¹ A` with a Gaussian block of
/// `k + p` columns; the second pass projects `A` onto its `B`-orthonormal
/// basis.
pub fn double_pass_randomized_eig<R: Rng + ?Sized>(
    n: usize,
    a: impl Fn(&[f64]) -> Vec<f64>,
    b: impl Fn(&[f64]) -> Vec<f64>,
    b_inv: impl Fn(&[f64]) -> Vec<f64>,
    k: usize,
    oversampling: usize,
    rng: &mut R,
) -> Result<GeneralizedEigenpairs> {
    let l = k + oversampling;
    if k == 0 {
        return Err(Error::invalid("requested eigenpair count must be positive"));
    }
    if l > n {
        return Err(Error::invalid(format!(
            "k + oversampling = {l} exceeds the problem dimension {n}"
        )));
    }
    let mut y = DMatrix::zeros(n, l);
    for j in 0..l {
        let omega = standard_normal_vec(rng, n);
        let col = b_inv(&a(&omega));
        y.column_mut(j).copy_from_slice(&col);
    }
    let q = b_orthonormalize(y, &b)?;

    let l = q.ncols();
    let mut aq = DMatrix::zeros(n, l);
    for j in 0..l {
        aq.column_mut(j).copy_from_slice(&a(q.column(j).as_slice()));
    }
    let t = q.transpose() * &aq;
    let t = (&t + t.transpose()) * 0.5;
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    order.truncate(k.min(l));

    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &i in &order {
        values.push(eig.eigenvalues[i]);
        let v = &q * eig.eigenvectors.column(i);
        vectors.push(v.as_slice().to_vec());
    }
    Ok(GeneralizedEigenpairs { values, vectors })
}

/// `B`-orthonormal basis of the range of `y` by classical Gram–Schmidt in
/// the `B` inner product, applied twice per column for stability.
///
/// Columns that are numerically in the span of the previous ones are
/// dropped (an exactly low-rank operator sketches to a rank-deficient
/// block). A sketch with no usable direction is a breakdown.
fn b_orthonormalize(y: DMatrix<f64>, b: &impl Fn(&[f64]) -> Vec<f64>) -> Result<DMatrix<f64>> {
    let (n, l) = y.shape();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(l);
    let mut bq: Vec<Vec<f64>> = Vec::with_capacity(l);
    let mut scale = 0.0f64;
    for j in 0..l {
        let mut v = y.column(j).as_slice().to_vec();
        let by = b(&v);
        let norm0 = dot(&v, &by).max(0.0).sqrt();
        if !norm0.is_finite() {
            return Err(Error::EigenBreakdown("non-finite sketch column".into()));
        }
        scale = scale.max(norm0);
        for _ in 0..2 {
            for (qi, bqi) in q.iter().zip(&bq) {
                let c = dot(bqi, &v);
                axpy(-c, qi, &mut v);
            }
        }
        let bv = b(&v);
        let norm = dot(&v, &bv).max(0.0).sqrt();
        if !(norm > 1e-10 * norm0) || !(norm > 1e-14 * scale) {
            continue;
        }
        q.push(v.iter().map(|x| x / norm).collect());
        bq.push(bv.iter().map(|x| x / norm).collect());
    }
    if q.is_empty() {
        return Err(Error::EigenBreakdown("sketch is numerically zero".into()));
    }
    Ok(DMatrix::from_fn(n, q.len(), |i, j| q[j][i]))
}

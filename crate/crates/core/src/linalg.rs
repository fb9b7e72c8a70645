//! Small dense helpers shared by the optimizer, the tensor module and the tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Q factor of a QR decomposition, with column signs fixed so that `R` has a
/// non-negative diagonal. This makes the factor unique and the retraction
/// built on it continuous.
pub fn qf(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// sign correction).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    qf(&g)
}

/// Random symmetric matrix with standard normal entries on and above the diagonal.
pub fn random_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.sample(StandardNormal);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Skew-symmetric part `(A - Aᵀ) / 2`.
pub fn skew(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a - a.transpose()) * 0.5
}

/// Largest entry of `|AᵀA - I|`.
pub fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    let mut worst = 0.0_f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..9 {
            let q = random_orthogonal(n, &mut rng);
            assert!(orthonormality_defect(&q) < 1e-13);
        }
    }

    #[test]
    fn qf_has_positive_r_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = qf(&m);
        let r = q.transpose() * &m;
        for j in 0..5 {
            assert!(r[(j, j)] > 0.0);
        }
    }
}

//! Smallest positive eigenpair of `K v = λ M v` with diagonal `M`.
//!
//! Lanczos with full reorthogonalization on `A = M^{-1/2} K M^{-1/2}`, with the
//! kernel direction `M^{1/2}·1` (constants) projected out of every Krylov
//! vector. Ritz values come from Sturm-sequence bisection on the tridiagonal
//! matrix and Ritz vectors from inverse iteration, both `O(j)` per call.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::laplacian::MeshOperators;
use super::SpectralError;

/// Eigenvalues at or below this are treated as the constant mode.
pub const ZERO_MODE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative tolerance on the Rayleigh quotient.
    pub rayleigh_tol: f64,
    /// Iteration budget as a multiple of the operator size.
    pub budget_factor: usize,
    /// Explicit iteration cap, overriding `budget_factor`.
    pub max_iterations: Option<usize>,
    pub check_every: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rayleigh_tol: 1e-10,
            budget_factor: 10,
            max_iterations: None,
            check_every: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Normalized to `vᵀMv = 1`, mass-orthogonal to constants.
    pub vector: Vec<f64>,
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

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Number of eigenvalues of the symmetric tridiagonal `(alpha, beta)` below `x`.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..alpha.len() {
        let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        d = alpha[i] - x - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (alpha[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) by bisection.
fn tridiagonal_eigenvalue(alpha: &[f64], beta: &[f64], k: usize) -> f64 {
    let m = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < m { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T − σI) x = b` for tridiagonal `T` by Gaussian elimination with
/// partial pivoting.
fn tridiagonal_solve(alpha: &[f64], beta: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let m = alpha.len();
    if m == 1 {
        let d = alpha[0] - sigma;
        return vec![b[0] / if d == 0.0 { f64::EPSILON } else { d }];
    }
    // rows hold (diag, super1, super2) after elimination
    let mut d: Vec<f64> = alpha.iter().map(|a| a - sigma).collect();
    let mut du: Vec<f64> = beta.to_vec();
    let mut dl: Vec<f64> = beta.to_vec();
    let mut du2 = vec![0.0; m];
    let mut rhs = b.to_vec();
    for i in 0..m - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = f64::EPSILON;
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            rhs[i + 1] -= f * rhs[i];
            dl[i] = 0.0;
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if i + 1 < m - 1 {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            du[i] = tmp;
            rhs.swap(i, i + 1);
            rhs[i + 1] -= f * rhs[i];
        }
    }
    if d[m - 1] == 0.0 {
        d[m - 1] = f64::EPSILON;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = rhs[m - 1] / d[m - 1];
    x[m - 2] = (rhs[m - 2] - du[m - 2] * x[m - 1]) / d[m - 2];
    for i in (0..m.saturating_sub(2)).rev() {
        x[i] = (rhs[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    x
}

/// Unit eigenvector of the tridiagonal for eigenvalue `theta` by inverse iteration.
fn tridiagonal_eigenvector(alpha: &[f64], beta: &[f64], theta: f64) -> Vec<f64> {
    let m = alpha.len();
    let scale = alpha.iter().chain(beta).fold(1e-300_f64, |a, b| a.max(b.abs()));
    let sigma = theta + 1e3 * f64::EPSILON * scale;
    let mut x: Vec<f64> = (0..m).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    normalize(&mut x);
    for _ in 0..3 {
        x = tridiagonal_solve(alpha, beta, sigma, &x);
        normalize(&mut x);
    }
    x
}

/// Smallest eigenvalue above [`ZERO_MODE`] of `K v = λ M v` and its eigenvector.
pub fn smallest_positive_eigenpair(ops: &MeshOperators, opts: &SolverOptions) -> Result<Eigenpair, SpectralError> {
    let n = ops.dim();
    if n < 2 {
        return Err(SpectralError::SolverFailure(0));
    }
    let inv_sqrt_mass: Vec<f64> = ops.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let apply = |v: &[f64], out: &mut Vec<f64>| {
        let scaled: Vec<f64> = v.iter().zip(&inv_sqrt_mass).map(|(a, s)| a * s).collect();
        ops.stiffness.mul_vec_into(&scaled, out);
        out.iter_mut().zip(&inv_sqrt_mass).for_each(|(o, s)| *o *= s);
    };
    let mut kernel: Vec<f64> = ops.mass.iter().map(|m| m.sqrt()).collect();
    normalize(&mut kernel);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    axpy(-dot(&kernel, &v), &kernel, &mut v);
    normalize(&mut v);

    let budget = opts.max_iterations.unwrap_or(opts.budget_factor * n);
    let max_dim = n - 1; // constants are deflated
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut previous: Option<f64> = None;

    for iter in 1..=budget {
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            axpy(-dot(&kernel, &w), &kernel, &mut w);
            for q in &basis {
                axpy(-dot(q, &w), q, &mut w);
            }
        }
        let b = dot(&w, &w).sqrt();
        let exhausted = basis.len() >= max_dim || b <= 1e-13 * a.abs().max(1.0);

        if exhausted || iter % opts.check_every == 0 {
            let m = alpha.len();
            let mut k = 0;
            let mut theta = tridiagonal_eigenvalue(&alpha, &beta, 0);
            while theta <= ZERO_MODE && k + 1 < m {
                k += 1;
                theta = tridiagonal_eigenvalue(&alpha, &beta, k);
            }
            let s = tridiagonal_eigenvector(&alpha, &beta, theta);
            let residual = b * s[m - 1].abs();
            let stable = previous.is_some_and(|p| (p - theta).abs() <= opts.rayleigh_tol * theta);
            previous = Some(theta);
            // |θ − λ| ≲ r²/gap, so r ≤ √tol·θ bounds the Rayleigh error by
            // about tol·θ whenever the gap is of order θ
            let converged =
                theta > ZERO_MODE && (exhausted || (stable && residual <= opts.rayleigh_tol.sqrt() * theta));
            if converged {
                let mut y = vec![0.0; n];
                for (q, c) in basis.iter().zip(&s) {
                    axpy(*c, q, &mut y);
                }
                axpy(-dot(&kernel, &y), &kernel, &mut y);
                let mut x: Vec<f64> = y.iter().zip(&inv_sqrt_mass).map(|(a, s)| a * s).collect();
                let mnorm: f64 = x.iter().zip(&ops.mass).map(|(v, m)| m * v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= mnorm);
                let value = ops.rayleigh_quotient(&x);
                return Ok(Eigenpair {
                    value,
                    vector: x,
                    iterations: iter,
                });
            }
            if exhausted {
                return Err(SpectralError::SolverFailure(iter));
            }
        }
        beta.push(b);
        let next: Vec<f64> = w.iter().map(|x| x / b).collect();
        basis.push(next);
    }
    Err(SpectralError::SolverFailure(budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::laplacian::CsrMatrix;

    fn path_tridiagonal(m: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![2.0; m], vec![-1.0; m - 1])
    }

    #[test]
    fn bisection_matches_closed_form() {
        // eigenvalues of tridiag(-1, 2, -1): 2 − 2cos(kπ/(m+1))
        let m = 12;
        let (a, b) = path_tridiagonal(m);
        for k in 0..m {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (m + 1) as f64).cos();
            assert!((tridiagonal_eigenvalue(&a, &b, k) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn inverse_iteration_gives_eigenvector() {
        let m = 9;
        let (a, b) = path_tridiagonal(m);
        let theta = tridiagonal_eigenvalue(&a, &b, 0);
        let s = tridiagonal_eigenvector(&a, &b, theta);
        for i in 0..m {
            let mut ts = a[i] * s[i];
            if i > 0 {
                ts += b[i - 1] * s[i - 1];
            }
            if i + 1 < m {
                ts += b[i] * s[i + 1];
            }
            assert!((ts - theta * s[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pivoting_solve_is_accurate() {
        let a = vec![0.0, 1.0, -2.0, 0.5];
        let b = vec![3.0, -1.0, 2.0];
        let rhs = vec![1.0, 2.0, 3.0, 4.0];
        let x = tridiagonal_solve(&a, &b, 0.0, &rhs);
        for i in 0..4 {
            let mut r = a[i] * x[i];
            if i > 0 {
                r += b[i - 1] * x[i - 1];
            }
            if i < 3 {
                r += b[i] * x[i + 1];
            }
            assert!((r - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cycle_graph_spectrum() {
        // graph Laplacian of a cycle of length n with unit mass:
        // smallest positive eigenvalue 2 − 2cos(2π/n)
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            t.extend_from_slice(&[(i, i, 1.0), (j, j, 1.0), (i, j, -1.0), (j, i, -1.0)]);
        }
        let ops = MeshOperators {
            stiffness: CsrMatrix::from_triplets(n, t),
            mass: vec![1.0; n],
        };
        let pair = smallest_positive_eigenpair(&ops, &SolverOptions::default()).unwrap();
        let exact = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
        assert!((pair.value - exact).abs() < 1e-10 * exact);
        let mass_dot: f64 = pair.vector.iter().sum();
        assert!(mass_dot.abs() < 1e-8);
    }
}

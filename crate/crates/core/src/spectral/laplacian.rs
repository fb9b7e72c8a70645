use super::mesh::{cot_at, TriMesh};
use super::SpectralError;

/// Compressed sparse row matrix, square.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Largest `|A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }
}

/// Cotangent stiffness and lumped mass of a closed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshOperators {
    pub stiffness: CsrMatrix,
    /// Diagonal of the lumped (barycentric) mass matrix.
    pub mass: Vec<f64>,
}

impl MeshOperators {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// `uᵀKu / uᵀMu`.
    pub fn rayleigh_quotient(&self, u: &[f64]) -> f64 {
        let num = self.stiffness.quadratic_form(u);
        let den: f64 = u.iter().zip(&self.mass).map(|(x, m)| m * x * x).sum();
        num / den
    }

    /// `‖Ku − λMu‖ / ‖Mu‖` in the Euclidean norm.
    pub fn relative_residual(&self, u: &[f64], lambda: f64) -> f64 {
        let ku = self.stiffness.mul_vec(u);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..u.len() {
            let mu = self.mass[i] * u[i];
            num += (ku[i] - lambda * mu).powi(2);
            den += mu * mu;
        }
        (num / den).sqrt()
    }
}

/// Assembles `∫∇φᵢ·∇φⱼ` (cotangent weights) and barycentric lumped areas.
/// Rows and columns of identified vertices are summed into one degree of freedom.
pub fn build_mesh_laplacian(m: &TriMesh) -> Result<MeshOperators, SpectralError> {
    m.validate()?;
    let n = m.dof_count();
    let verts = m.vertices();
    let mut triplets = Vec::with_capacity(m.faces().len() * 12);
    let mut mass = vec![0.0; n];
    for (f, face) in m.faces().iter().enumerate() {
        let area = m.face_area(f);
        for corner in 0..3 {
            let apex = face[corner];
            let (i, j) = (face[(corner + 1) % 3], face[(corner + 2) % 3]);
            let w = 0.5 * cot_at(&verts[apex], &verts[i], &verts[j]);
            let (ci, cj) = (m.class_of(i), m.class_of(j));
            triplets.push((ci, ci, w));
            triplets.push((cj, cj, w));
            triplets.push((ci, cj, -w));
            triplets.push((cj, ci, -w));
            mass[m.class_of(apex)] += area / 3.0;
        }
    }
    Ok(MeshOperators {
        stiffness: CsrMatrix::from_triplets(n, triplets),
        mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::mesh::antipodal_quotient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tetrahedron_rows_sum_to_zero() {
        let ops = build_mesh_laplacian(&TriMesh::tetrahedron()).unwrap();
        for s in ops.stiffness.row_sums() {
            assert!(s.abs() < 1e-14);
        }
    }

    #[test]
    fn icosphere_operator_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for level in 0..4 {
            let m = TriMesh::icosphere(level);
            let ops = build_mesh_laplacian(&m).unwrap();
            let total: f64 = ops.mass.iter().sum();
            assert!((total - m.total_area()).abs() < 1e-12);
            assert!(ops.mass.iter().all(|&x| x > 0.0));
            assert!(ops.stiffness.asymmetry() < 1e-12);
            assert!(ops.stiffness.row_sums().iter().all(|s| s.abs() < 1e-12));
            for _ in 0..10 {
                let u: Vec<f64> = (0..ops.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert!(ops.rayleigh_quotient(&u) >= 0.0);
            }
        }
    }

    #[test]
    fn quotient_operator_is_half_size() {
        let m = TriMesh::icosphere(2);
        let q = antipodal_quotient(&m).unwrap();
        let ops = build_mesh_laplacian(&q).unwrap();
        assert_eq!(ops.dim() * 2, m.vertices().len());
        assert!(ops.stiffness.asymmetry() < 1e-12);
        let total: f64 = ops.mass.iter().sum();
        assert!((total - m.total_area() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn torus_grid_is_five_point_stencil() {
        let t = TriMesh::flat_torus(6, 6.0).unwrap();
        let ops = build_mesh_laplacian(&t).unwrap();
        for r in 0..ops.dim() {
            assert!((ops.stiffness.get(r, r) - 4.0).abs() < 1e-12);
            assert!((ops.mass[r] - 1.0).abs() < 1e-12);
            let off: Vec<f64> = ops.stiffness.row(r).filter(|&(c, _)| c != r).map(|(_, v)| v).collect();
            let nonzero: Vec<f64> = off.into_iter().filter(|v| v.abs() > 1e-12).collect();
            assert_eq!(nonzero.len(), 4);
            assert!(nonzero.iter().all(|v| (v + 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn csr_sums_duplicates() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 2.0]);
    }
}

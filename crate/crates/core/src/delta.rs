//! δ-invariants by minimization over mutually orthogonal subspaces.
//!
//! A configuration of `k` mutually orthogonal subspaces with dimensions
//! `n₁ ≥ … ≥ n_k` is encoded as one orthogonal frame `Q` whose first `n₁`
//! columns span `L₁`, the next `n₂` span `L₂`, and so on; trailing columns are
//! unused. Orthogonality between blocks is then automatic and the search runs
//! over the orthogonal group with Riemannian gradient descent.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::linalg::{qf, random_orthogonal, skew};
use crate::partition::{enumerate_tuples, Partition};
use crate::tensor::{CurvatureTensor, Subspace, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeltaError {
    #[error("dimension mismatch: tensor has n = {tensor}, partition has n = {partition}")]
    DimensionMismatch { tensor: usize, partition: usize },
    #[error("invalid optimizer options: {0}")]
    InvalidOptions(&'static str),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Backtracking (Armijo) line search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineSearch {
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Step shrink factor per backtrack.
    pub shrink: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub line_search: LineSearch,
    pub rng_seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iterations: 500,
            gradient_tol: 1e-8,
            line_search: LineSearch::default(),
            rng_seed: 42,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<(), DeltaError> {
        if self.restarts == 0 {
            return Err(DeltaError::InvalidOptions("restarts must be >= 1"));
        }
        if !(self.gradient_tol > 0.0) {
            return Err(DeltaError::InvalidOptions("gradient_tol must be positive"));
        }
        let ls = &self.line_search;
        if !(ls.armijo > 0.0 && ls.armijo < 1.0) {
            return Err(DeltaError::InvalidOptions("armijo constant must lie in (0, 1)"));
        }
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(DeltaError::InvalidOptions("shrink factor must lie in (0, 1)"));
        }
        if !(ls.initial_step > 0.0) {
            return Err(DeltaError::InvalidOptions("initial step must be positive"));
        }
        Ok(())
    }
}

/// Mutually orthogonal subspaces as consecutive column blocks of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceConfig {
    frame: DMatrix<f64>,
    partition: Partition,
}

impl SubspaceConfig {
    pub fn new(frame: DMatrix<f64>, partition: Partition) -> Result<Self, DeltaError> {
        if frame.nrows() != partition.dim() {
            return Err(DeltaError::DimensionMismatch {
                tensor: frame.nrows(),
                partition: partition.dim(),
            });
        }
        // validates orthogonality
        crate::tensor::Frame::new(frame.clone())?;
        Ok(Self { frame, partition })
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// The subspaces `L₁, …, L_k`.
    pub fn subspaces(&self) -> Vec<Subspace> {
        block_ranges(&self.partition)
            .map(|(start, len)| {
                Subspace::new(self.frame.columns(start, len).into_owned())
                    .expect("blocks of an orthogonal frame are orthonormal")
            })
            .collect()
    }

    /// `Σⱼ τ(Lⱼ)` evaluated plane by plane through the tensor's sectional curvatures.
    pub fn objective(&self, tensor: &CurvatureTensor) -> Result<f64, DeltaError> {
        let mut total = 0.0;
        for l in self.subspaces() {
            total += tensor.subspace_scalar_curvature(&l)?;
        }
        Ok(total)
    }
}

fn block_ranges(p: &Partition) -> impl Iterator<Item = (usize, usize)> + '_ {
    p.parts().iter().scan(0usize, |start, &len| {
        let s = *start;
        *start += len;
        Some((s, len))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaResult {
    /// δ(n₁, …, n_k) at the point.
    pub value: f64,
    /// Attained `Σⱼ τ(Lⱼ)`.
    pub objective: f64,
    pub scalar_curvature: f64,
    pub minimizer: SubspaceConfig,
    pub restarts_used: usize,
    pub converged: bool,
    /// Riemannian gradient norm at the reported minimizer.
    pub gradient_norm: f64,
}

impl DeltaResult {
    pub fn partition(&self) -> &Partition {
        &self.minimizer.partition
    }

    pub fn to_json(&self, verbose: bool) -> serde_json::Value {
        let mut v = json!({
            "value": self.value,
            "objective": self.objective,
            "partition": self.partition(),
            "converged": self.converged,
            "restarts_used": self.restarts_used,
        });
        if verbose {
            let f = &self.minimizer.frame;
            let rows: Vec<Vec<f64>> = (0..f.nrows())
                .map(|i| (0..f.ncols()).map(|j| f[(i, j)]).collect())
                .collect();
            v["scalar_curvature"] = json!(self.scalar_curvature);
            v["gradient_norm"] = json!(self.gradient_norm);
            v["minimizer"] = json!(rows);
        }
        v
    }
}

/// Objective and Euclidean gradient of the blocked sum for the frame `q`.
///
/// For columns `a ≠ b` in one block, `K(q_a ∧ q_b) = q_bᵀ S(q_a) q_b` where
/// `S` is the Jacobi matrix, and `∂/∂q_a = 2 S(q_b) q_a`.
struct BlockObjective<'a> {
    tensor: &'a CurvatureTensor,
    blocks: Vec<(usize, usize)>,
}

impl<'a> BlockObjective<'a> {
    fn new(tensor: &'a CurvatureTensor, p: &Partition) -> Self {
        Self {
            tensor,
            blocks: block_ranges(p).collect(),
        }
    }

    fn jacobi(&self, q: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let used: usize = self.blocks.iter().map(|b| b.1).sum();
        (0..used)
            .map(|a| {
                let col: Vec<f64> = q.column(a).iter().copied().collect();
                self.tensor.jacobi_matrix(&col)
            })
            .collect()
    }

    fn value_with(&self, q: &DMatrix<f64>, jac: &[DMatrix<f64>]) -> f64 {
        let mut total = 0.0;
        for &(start, len) in &self.blocks {
            for a in start..start + len {
                for b in (a + 1)..start + len {
                    let qb = q.column(b);
                    total += qb.dot(&(&jac[a] * qb));
                }
            }
        }
        total
    }

    fn value(&self, q: &DMatrix<f64>) -> f64 {
        self.value_with(q, &self.jacobi(q))
    }

    fn value_and_gradient(&self, q: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let jac = self.jacobi(q);
        let n = q.nrows();
        let mut grad = DMatrix::zeros(n, n);
        for &(start, len) in &self.blocks {
            for a in start..start + len {
                let qa = q.column(a);
                let mut g = nalgebra::DVector::zeros(n);
                for b in start..start + len {
                    if b != a {
                        g += &jac[b] * qa;
                    }
                }
                grad.set_column(a, &(g * 2.0));
            }
        }
        (self.value_with(q, &jac), grad)
    }
}

#[derive(Debug, Clone)]
struct RestartOutcome {
    objective: f64,
    frame: DMatrix<f64>,
    gradient_norm: f64,
    converged: bool,
}

/// Riemannian gradient descent on O(n) from `start`: gradient `Q·skew(QᵀG)`,
/// QR retraction, Barzilai–Borwein trial steps with Armijo backtracking.
fn descend(obj: &BlockObjective<'_>, start: DMatrix<f64>, opts: &OptimizerOptions) -> RestartOutcome {
    let n = start.nrows();
    let ls = &opts.line_search;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut q = start;
    let (mut f, g) = obj.value_and_gradient(&q);
    let mut omega = skew(&(q.transpose() * g));
    let mut gnorm = omega.norm();
    let mut step = ls.initial_step;
    let mut prev: Option<(DMatrix<f64>, f64)> = None;

    for _ in 0..opts.max_iterations {
        if gnorm < opts.gradient_tol {
            break;
        }
        if let Some((prev_omega, prev_step)) = prev.take() {
            // s = −t·Ω_prev, y = Ω − Ω_prev in the trivialized tangent space
            let y = &omega - &prev_omega;
            let sy = -prev_step * prev_omega.dot(&y);
            let ss = prev_step * prev_step * prev_omega.norm_squared();
            if sy.abs() > 0.0 && sy.is_finite() {
                step = (ss / sy).abs().clamp(1e-10, 1e10);
            }
        }
        // relaxed Armijo: tolerate round-off once decreases fall below machine precision
        let slack = 16.0 * f64::EPSILON * f.abs().max(1.0);
        let decrease = gnorm * gnorm;
        let mut accepted = None;
        let mut t = step;
        for _ in 0..ls.max_backtracks {
            let trial = &q * qf(&(&eye - &omega * t));
            let ft = obj.value(&trial);
            if ft <= f - ls.armijo * t * decrease + slack {
                accepted = Some((trial, ft));
                break;
            }
            t *= ls.shrink;
        }
        let Some((next, _)) = accepted else {
            break;
        };
        q = next;
        let (fq, g) = obj.value_and_gradient(&q);
        f = fq;
        prev = Some((omega, t));
        omega = skew(&(q.transpose() * g));
        gnorm = omega.norm();
    }
    RestartOutcome {
        objective: f,
        frame: q,
        gradient_norm: gnorm,
        converged: gnorm < opts.gradient_tol,
    }
}

fn check_dims(tensor: &CurvatureTensor, p: &Partition) -> Result<(), DeltaError> {
    if tensor.dim() != p.dim() {
        return Err(DeltaError::DimensionMismatch {
            tensor: tensor.dim(),
            partition: p.dim(),
        });
    }
    Ok(())
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// `δ(p) = τ − min Σⱼ τ(Lⱼ)` over mutually orthogonal `Lⱼ` with `dim Lⱼ = nⱼ`.
///
/// Restarts run in parallel; the best restart is chosen by objective with ties
/// going to the lowest restart index, so the result depends only on the seed.
pub fn delta_invariant(
    tensor: &CurvatureTensor,
    p: &Partition,
    opts: &OptimizerOptions,
) -> Result<DeltaResult, DeltaError> {
    check_dims(tensor, p)?;
    opts.validate()?;
    let n = tensor.dim();
    let tau = tensor.scalar_curvature_standard();

    if p.is_empty() {
        return Ok(DeltaResult {
            value: tau,
            objective: 0.0,
            scalar_curvature: tau,
            minimizer: SubspaceConfig {
                frame: DMatrix::identity(n, n),
                partition: p.clone(),
            },
            restarts_used: 0,
            converged: true,
            gradient_norm: 0.0,
        });
    }

    let obj = BlockObjective::new(tensor, p);
    let outcomes: Vec<RestartOutcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(opts.rng_seed, r);
            let start = random_orthogonal(n, &mut rng);
            descend(&obj, start, opts)
        })
        .collect();

    let best = outcomes
        .into_iter()
        .reduce(|best, o| if o.objective < best.objective { o } else { best })
        .expect("at least one restart");

    Ok(DeltaResult {
        value: tau - best.objective,
        objective: best.objective,
        scalar_curvature: tau,
        minimizer: SubspaceConfig {
            frame: best.frame,
            partition: p.clone(),
        },
        restarts_used: opts.restarts,
        converged: best.converged,
        gradient_norm: best.gradient_norm,
    })
}

/// Closed form for a space form of curvature `c0`:
/// `(c0/2)(n(n−1) − Σⱼ nⱼ(nⱼ−1))`. Every subspace has the same `τ(L)` there.
pub fn delta_constant_curvature(n: usize, c0: f64, p: &Partition) -> Result<f64, DeltaError> {
    if p.dim() != n {
        return Err(DeltaError::DimensionMismatch {
            tensor: n,
            partition: p.dim(),
        });
    }
    let planes = (n * (n - 1)) as f64 / 2.0 - p.block_plane_count() as f64;
    Ok(c0 * planes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampledDelta {
    pub value: f64,
    pub min_objective: f64,
}

/// Monte-Carlo estimate: `τ` minus the smallest blocked objective over
/// `samples` Haar-random frames. The objective is evaluated plane by plane via
/// sectional curvatures, independent of the optimizer's Jacobi-matrix path.
/// Since sampling can only over-estimate the minimum, the returned value never
/// exceeds the true δ.
pub fn delta_bruteforce(
    tensor: &CurvatureTensor,
    p: &Partition,
    samples: usize,
    rng_seed: u64,
) -> Result<SampledDelta, DeltaError> {
    check_dims(tensor, p)?;
    if samples == 0 {
        return Err(DeltaError::InvalidOptions("samples must be >= 1"));
    }
    let n = tensor.dim();
    let tau = tensor.scalar_curvature_standard();
    if p.is_empty() {
        return Ok(SampledDelta {
            value: tau,
            min_objective: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let cfg = SubspaceConfig {
            frame: random_orthogonal(n, &mut rng),
            partition: p.clone(),
        };
        best = best.min(cfg.objective(tensor)?);
    }
    Ok(SampledDelta {
        value: tau - best,
        min_objective: best,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TupleDelta {
    pub partition: Partition,
    pub delta: f64,
    pub c: f64,
    pub normalized: f64,
    pub converged: bool,
}

/// Result of maximizing `δ(p)/c(p)` over all admissible tuples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedDelta {
    pub value: f64,
    pub partition: Partition,
    /// False if any tuple's optimization did not reach the gradient tolerance.
    pub converged: bool,
    pub tuples: Vec<TupleDelta>,
}

/// Relative margin below which two normalized values count as tied.
const TIE_TOL: f64 = 1e-12;

/// `max { δ(p) / c(p) : p ∈ S(n) }` and the first tuple attaining it.
pub fn max_normalized_delta(tensor: &CurvatureTensor, opts: &OptimizerOptions) -> Result<NormalizedDelta, DeltaError> {
    let tuples = enumerate_tuples(tensor.dim()).map_err(|_| TensorError::DimensionError(tensor.dim()))?;
    let mut rows = Vec::with_capacity(tuples.len());
    for p in tuples {
        let r = delta_invariant(tensor, &p, opts)?;
        let c = p.c_coefficient();
        rows.push(TupleDelta {
            normalized: r.value / c,
            delta: r.value,
            c,
            converged: r.converged,
            partition: p,
        });
    }
    let mut best = 0;
    for (i, row) in rows.iter().enumerate().skip(1) {
        let cur = rows[best].normalized;
        if row.normalized > cur + TIE_TOL * cur.abs().max(1.0) {
            best = i;
        }
    }
    Ok(NormalizedDelta {
        value: rows[best].normalized,
        partition: rows[best].partition.clone(),
        converged: rows.iter().all(|r| r.converged),
        tuples: rows,
    })
}

/// `max δ(p)/c(p)` for a space form, from the closed form.
pub fn max_normalized_delta_constant(n: usize, c0: f64) -> Result<(f64, Partition), DeltaError> {
    let tuples = enumerate_tuples(n).map_err(|_| TensorError::DimensionError(n))?;
    let mut best: Option<(f64, Partition)> = None;
    for p in tuples {
        let v = delta_constant_curvature(n, c0, &p)? / p.c_coefficient();
        match &best {
            Some((b, _)) if !(v > b + TIE_TOL * b.abs().max(1.0)) => {}
            _ => best = Some((v, p)),
        }
    }
    Ok(best.expect("S(n) contains the empty tuple"))
}

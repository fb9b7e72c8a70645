//! Fundamental forms of Euclidean submanifolds, the induced curvature through
//! the Gauss equation, and pointwise checks of `δ(p) ≤ c(p) H²` and of
//! `H² = Δ̂₀`.

mod grid;
mod shapes;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::delta::{delta_invariant, DeltaError, OptimizerOptions};
use crate::partition::{enumerate_tuples, Partition};
use crate::tensor::{CurvatureTensor, TensorError, SYMMETRY_TOL};

pub use grid::SampledGrid;
pub use shapes::{DerivativeSource, ImmersionMap, ParametricImmersion, Shape, CHART_MARGIN};

/// Smallest admissible Gram determinant of the first partials.
pub const RANK_TOL: f64 = 1e-10;
/// Slack below `−VIOLATION_TOL` is a violation of the inequality.
pub const VIOLATION_TOL: f64 = 1e-6;
/// `max |H² − Δ̂₀|` below this classifies the immersion as ideal.
pub const IDEAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImmersionError {
    #[error("first partials are rank deficient at {point:?} (Gram determinant {gram:e})")]
    RankDeficiency { point: Vec<f64>, gram: f64 },
    #[error("point {0:?} is outside the chart domain")]
    DomainError(Vec<f64>),
    #[error("unknown shape {0}")]
    UnknownShape(String),
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("sampled grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Delta(#[from] DeltaError),
}

/// Position and partials at a point: `first` is `m × n`, `second[a·n + b]`
/// is `∂²x/∂u_a∂u_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub position: DVector<f64>,
    pub first: DMatrix<f64>,
    pub second: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImmersionSample {
    pub point: Vec<f64>,
    /// First fundamental form in coordinates.
    pub g: DMatrix<f64>,
    /// Second fundamental form in coordinates, `h[a·n + b]`.
    pub h: Vec<DVector<f64>>,
    /// Second fundamental form in the g-orthonormal frame `E = J L⁻ᵀ`, `g = L Lᵀ`.
    pub h_frame: Vec<DVector<f64>>,
    pub tangent_frame: DMatrix<f64>,
    pub mean_curvature: DVector<f64>,
    pub h2: f64,
}

impl ImmersionSample {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

/// First and second fundamental forms and mean curvature vector at `u`.
pub fn fundamental_forms(im: &ParametricImmersion, u: &[f64]) -> Result<ImmersionSample, ImmersionError> {
    sample_from_jet(u, &im.jet(u)?)
}

pub fn sample_from_jet(u: &[f64], jet: &Jet) -> Result<ImmersionSample, ImmersionError> {
    let n = jet.first.ncols();
    let j = &jet.first;
    let g = j.transpose() * j;
    let det = g.determinant();
    if !(det > RANK_TOL) {
        return Err(ImmersionError::RankDeficiency {
            point: u.to_vec(),
            gram: det,
        });
    }
    let chol = g.clone().cholesky().ok_or_else(|| ImmersionError::RankDeficiency {
        point: u.to_vec(),
        gram: det,
    })?;
    let l_inv = chol
        .l()
        .try_inverse()
        .expect("Cholesky factor of a positive definite matrix is invertible");
    let e = j * l_inv.transpose();
    let normal = |v: &DVector<f64>| v - &e * (e.transpose() * v);

    let mut h = vec![DVector::zeros(j.nrows()); n * n];
    for a in 0..n {
        for b in a..n {
            let sym = (&jet.second[a * n + b] + &jet.second[b * n + a]) * 0.5;
            let v = normal(&sym);
            h[a * n + b] = v.clone();
            h[b * n + a] = v;
        }
    }
    let mut h_frame = vec![DVector::zeros(j.nrows()); n * n];
    for a in 0..n {
        for b in 0..n {
            let mut acc = DVector::zeros(j.nrows());
            for i in 0..=a {
                for k in 0..=b {
                    acc += &h[i * n + k] * (l_inv[(a, i)] * l_inv[(b, k)]);
                }
            }
            h_frame[a * n + b] = acc;
        }
    }
    let mean_curvature = (0..n).fold(DVector::zeros(j.nrows()), |acc, a| acc + &h_frame[a * n + a]) / n as f64;
    let h2 = mean_curvature.norm_squared();
    Ok(ImmersionSample {
        point: u.to_vec(),
        g,
        h,
        h_frame,
        tangent_frame: e,
        mean_curvature,
        h2,
    })
}

/// Gauss equation in the g-orthonormal frame:
/// `R_abcd = ⟨h_ad, h_bc⟩ − ⟨h_ac, h_bd⟩`.
pub fn induced_curvature(sample: &ImmersionSample) -> Result<CurvatureTensor, ImmersionError> {
    let n = sample.dim();
    let hf = &sample.h_frame;
    let mut comps = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    comps[((a * n + b) * n + c) * n + d] =
                        hf[a * n + d].dot(&hf[b * n + c]) - hf[a * n + c].dot(&hf[b * n + d]);
                }
            }
        }
    }
    Ok(CurvatureTensor::from_components(comps, SYMMETRY_TOL)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TupleValue {
    pub partition: Partition,
    pub delta: f64,
    pub c: f64,
    pub converged: bool,
}

/// Everything computed at one sample point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointEvaluation {
    pub point: Vec<f64>,
    pub h2: f64,
    pub tuples: Vec<TupleValue>,
}

impl PointEvaluation {
    /// `max δ(p)/c(p)` over the admissible tuples at this point.
    pub fn delta0(&self) -> f64 {
        self.tuples
            .iter()
            .map(|t| t.delta / t.c)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// δ of the induced tensor for every tuple in `S(n)`, one point per sample.
pub fn evaluate_samples(
    samples: &[ImmersionSample],
    opts: &OptimizerOptions,
) -> Result<Vec<PointEvaluation>, ImmersionError> {
    samples
        .par_iter()
        .map(|s| {
            let r = induced_curvature(s)?;
            let tuples = enumerate_tuples(s.dim()).map_err(|_| TensorError::DimensionError(s.dim()))?;
            let tuples = tuples
                .into_iter()
                .map(|p| {
                    let d = delta_invariant(&r, &p, opts)?;
                    Ok(TupleValue {
                        c: p.c_coefficient(),
                        delta: d.value,
                        converged: d.converged,
                        partition: p,
                    })
                })
                .collect::<Result<Vec<_>, ImmersionError>>()?;
            Ok(PointEvaluation {
                point: s.point.clone(),
                h2: s.h2,
                tuples,
            })
        })
        .collect()
}

pub fn sample_points(im: &ParametricImmersion, points: &[Vec<f64>]) -> Result<Vec<ImmersionSample>, ImmersionError> {
    points.par_iter().map(|u| fundamental_forms(im, u)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityRecord {
    pub point: usize,
    pub delta: f64,
    pub c_h2: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TupleInequality {
    pub partition: Partition,
    pub c: f64,
    pub records: Vec<InequalityRecord>,
    pub min_slack: f64,
    pub max_abs_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub points: Vec<Vec<f64>>,
    pub tuples: Vec<TupleInequality>,
    pub min_slack: f64,
    /// `(point, partition)` pairs with slack below `−VIOLATION_TOL`.
    pub violations: Vec<(usize, Partition)>,
    pub converged: bool,
}

impl InequalityReport {
    pub fn from_evaluations(evals: &[PointEvaluation]) -> Self {
        let points = evals.iter().map(|e| e.point.clone()).collect();
        let mut tuples: Vec<TupleInequality> = Vec::new();
        let mut violations = Vec::new();
        if let Some(first) = evals.first() {
            for (t, tv) in first.tuples.iter().enumerate() {
                let records: Vec<InequalityRecord> = evals
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        let v = &e.tuples[t];
                        let c_h2 = v.c * e.h2;
                        InequalityRecord {
                            point: i,
                            delta: v.delta,
                            c_h2,
                            slack: c_h2 - v.delta,
                        }
                    })
                    .collect();
                for r in &records {
                    if r.slack < -VIOLATION_TOL {
                        violations.push((r.point, tv.partition.clone()));
                    }
                }
                tuples.push(TupleInequality {
                    partition: tv.partition.clone(),
                    c: tv.c,
                    min_slack: records.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min),
                    max_abs_slack: records.iter().map(|r| r.slack.abs()).fold(0.0, f64::max),
                    records,
                });
            }
        }
        violations.sort_by_key(|v| v.0);
        Self {
            points,
            min_slack: tuples.iter().map(|t| t.min_slack).fold(f64::INFINITY, f64::min),
            violations,
            converged: evals.iter().all(|e| e.tuples.iter().all(|t| t.converged)),
            tuples,
        }
    }

    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn tuple(&self, p: &Partition) -> Option<&TupleInequality> {
        self.tuples.iter().find(|t| &t.partition == p)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("point,u,partition,delta,c_h2,slack\n");
        for t in &self.tuples {
            for r in &t.records {
                out.push_str(&format!(
                    "{},{},\"{}\",{:e},{:e},{:e}\n",
                    r.point,
                    join_point(&self.points[r.point]),
                    t.partition,
                    r.delta,
                    r.c_h2,
                    r.slack
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdealityReport {
    pub points: Vec<Vec<f64>>,
    pub h2: Vec<f64>,
    pub delta0: Vec<f64>,
    /// `H² − Δ̂₀` per point.
    pub residuals: Vec<f64>,
    pub min_residual: f64,
    pub max_abs_residual: f64,
    pub ideal: bool,
    pub converged: bool,
}

impl IdealityReport {
    pub fn from_evaluations(evals: &[PointEvaluation]) -> Self {
        let delta0: Vec<f64> = evals.iter().map(PointEvaluation::delta0).collect();
        let h2: Vec<f64> = evals.iter().map(|e| e.h2).collect();
        let residuals: Vec<f64> = h2.iter().zip(&delta0).map(|(h, d)| h - d).collect();
        let max_abs_residual = residuals.iter().map(|r| r.abs()).fold(0.0, f64::max);
        Self {
            points: evals.iter().map(|e| e.point.clone()).collect(),
            min_residual: residuals.iter().copied().fold(f64::INFINITY, f64::min),
            ideal: !residuals.is_empty() && max_abs_residual < IDEAL_TOL,
            max_abs_residual,
            converged: evals.iter().all(|e| e.tuples.iter().all(|t| t.converged)),
            h2,
            delta0,
            residuals,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("point,u,h2,delta0,residual\n");
        for i in 0..self.points.len() {
            out.push_str(&format!(
                "{},{},{:e},{:e},{:e}\n",
                i,
                join_point(&self.points[i]),
                self.h2[i],
                self.delta0[i],
                self.residuals[i]
            ));
        }
        out
    }
}

fn join_point(u: &[f64]) -> String {
    u.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

pub fn verify_inequality(
    im: &ParametricImmersion,
    points: &[Vec<f64>],
    opts: &OptimizerOptions,
) -> Result<InequalityReport, ImmersionError> {
    let evals = evaluate_samples(&sample_points(im, points)?, opts)?;
    Ok(InequalityReport::from_evaluations(&evals))
}

pub fn ideality_residual(
    im: &ParametricImmersion,
    points: &[Vec<f64>],
    opts: &OptimizerOptions,
) -> Result<IdealityReport, ImmersionError> {
    let evals = evaluate_samples(&sample_points(im, points)?, opts)?;
    Ok(IdealityReport::from_evaluations(&evals))
}

/// Points where some tuple attains equality within `VIOLATION_TOL` but
/// `H² − Δ̂₀` is not below `1e−5`. Empty when the pointwise maximum principle holds.
pub fn maximum_principle_failures(evals: &[PointEvaluation]) -> Vec<usize> {
    evals
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            let equality = e.tuples.iter().any(|t| (t.c * e.h2 - t.delta).abs() < VIOLATION_TOL);
            equality && !(e.h2 - e.delta0() < 1e-5)
        })
        .map(|(i, _)| i)
        .collect()
}

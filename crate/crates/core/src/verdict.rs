//! Ideal-embedding decisions for registered homogeneous spaces: the equality
//! criterion `λ₁ = nΔ̂₀` and the covering obstruction.

use serde::Serialize;
use thiserror::Error;

use crate::delta::{max_normalized_delta, max_normalized_delta_constant, DeltaError, OptimizerOptions};
use crate::spectral::{lambda1_closed_form, CurvatureModel, Registry, SpaceDescriptor, SpectralError};

/// Relative tolerance on eigenvalue comparisons for closed-form data.
pub const EIGEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    IdealCapable,
    NoIdealEmbedding,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::IdealCapable => "IDEAL_CAPABLE",
            Outcome::NoIdealEmbedding => "NO_IDEAL_EMBEDDING",
            Outcome::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InconclusiveReason {
    NotIrreducible,
    EqualEigenvalues,
    WithinErrorBar,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerdictError {
    #[error("inconsistent data for {space}: lambda1 = {lambda1} is below n*delta0 = {n_delta0}")]
    InconsistentData { space: String, lambda1: f64, n_delta0: f64 },
    #[error("lambda1({base}) = {lambda1_base} is below lambda1({cover}) = {lambda1_cover}")]
    PullbackViolation {
        cover: String,
        base: String,
        lambda1_cover: f64,
        lambda1_base: f64,
    },
    #[error("normalized delta differs across the covering: {cover} vs {base}")]
    Delta0Mismatch { cover: f64, base: f64 },
    #[error("error bar must be finite and non-negative")]
    InvalidErrorBar,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Delta(#[from] DeltaError),
}

/// One inequality of an argument, with the numbers it was checked on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStep {
    pub step: &'static str,
    pub statement: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub lambda1: f64,
    pub n_delta0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covering_partner: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner_lambda1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_bar: Option<f64>,
    pub chain: Vec<ChainStep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<InconclusiveReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub subject: String,
    pub outcome: Outcome,
    pub evidence: Evidence,
}

impl Verdict {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("verdict serializes")
    }
}

/// How `Δ̂₀` of a registered space is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delta0Method {
    ClosedForm,
    Optimizer(OptimizerOptions),
}

pub fn delta0_of(s: &SpaceDescriptor, method: &Delta0Method) -> Result<f64, VerdictError> {
    match (method, s.curvature) {
        (Delta0Method::ClosedForm, CurvatureModel::Constant { c0 }) => Ok(max_normalized_delta_constant(s.n, c0)?.0),
        (Delta0Method::Optimizer(opts), _) => {
            let r = s.curvature_tensor().map_err(DeltaError::from)?;
            Ok(max_normalized_delta(&r, opts)?.value)
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < EIGEN_TOL * a.abs().max(b.abs()).max(1.0)
}

fn below(a: f64, b: f64) -> bool {
    a < b - EIGEN_TOL * a.abs().max(b.abs()).max(1.0)
}

const LOWER_BOUND: &str = "lambda1 >= n*delta0 on an irreducible homogeneous space";
const EQUALITY: &str = "ideal embedding exists iff lambda1 = n*delta0";

fn lower_bound_step(lambda1: f64, n_delta0: f64) -> ChainStep {
    ChainStep {
        step: "lower_bound",
        statement: LOWER_BOUND,
        lhs: lambda1,
        rhs: n_delta0,
        holds: !below(lambda1, n_delta0),
    }
}

fn equality_step(lambda1: f64, n_delta0: f64) -> ChainStep {
    ChainStep {
        step: "equality",
        statement: EQUALITY,
        lhs: lambda1,
        rhs: n_delta0,
        holds: close(lambda1, n_delta0),
    }
}

fn not_irreducible(s: &SpaceDescriptor, lambda1: f64, n_delta0: f64) -> Verdict {
    Verdict {
        subject: s.name.clone(),
        outcome: Outcome::Inconclusive,
        evidence: Evidence {
            lambda1,
            n_delta0,
            covering_partner: None,
            partner_lambda1: None,
            error_bar: None,
            chain: Vec::new(),
            reason: Some(InconclusiveReason::NotIrreducible),
        },
    }
}

/// `IDEAL_CAPABLE` iff `λ₁ = n·delta0` to relative tolerance `1e−9`.
pub fn ideality_criterion(s: &SpaceDescriptor, delta0: f64) -> Result<Verdict, VerdictError> {
    let lambda1 = lambda1_closed_form(s)?;
    let n_delta0 = s.n as f64 * delta0;
    if !s.irreducible {
        return Ok(not_irreducible(s, lambda1, n_delta0));
    }
    if below(lambda1, n_delta0) {
        return Err(VerdictError::InconsistentData {
            space: s.name.clone(),
            lambda1,
            n_delta0,
        });
    }
    let eq = equality_step(lambda1, n_delta0);
    let outcome = if eq.holds {
        Outcome::IdealCapable
    } else {
        Outcome::NoIdealEmbedding
    };
    Ok(Verdict {
        subject: s.name.clone(),
        outcome,
        evidence: Evidence {
            lambda1,
            n_delta0,
            covering_partner: None,
            partner_lambda1: None,
            error_bar: None,
            chain: vec![lower_bound_step(lambda1, n_delta0), eq],
            reason: None,
        },
    })
}

/// Criterion for a numerically estimated `λ₁ ± error_bar`. Equality can never
/// be certified from an estimate, so the outcome is `NO_IDEAL_EMBEDDING` when
/// `n·delta0` lies outside the bar and `INCONCLUSIVE` otherwise.
pub fn ideality_criterion_estimate(
    s: &SpaceDescriptor,
    lambda1: f64,
    error_bar: f64,
    delta0: f64,
) -> Result<Verdict, VerdictError> {
    if !(error_bar >= 0.0 && error_bar.is_finite()) {
        return Err(VerdictError::InvalidErrorBar);
    }
    let n_delta0 = s.n as f64 * delta0;
    if !s.irreducible {
        return Ok(not_irreducible(s, lambda1, n_delta0));
    }
    let gap = (lambda1 - n_delta0).abs();
    let inside = gap <= error_bar + EIGEN_TOL * lambda1.abs().max(1.0);
    let mut eq = equality_step(lambda1, n_delta0);
    eq.holds = inside;
    Ok(Verdict {
        subject: s.name.clone(),
        outcome: if inside {
            Outcome::Inconclusive
        } else {
            Outcome::NoIdealEmbedding
        },
        evidence: Evidence {
            lambda1,
            n_delta0,
            covering_partner: None,
            partner_lambda1: None,
            error_bar: Some(error_bar),
            chain: vec![lower_bound_step(lambda1, n_delta0), eq],
            reason: inside.then_some(InconclusiveReason::WithinErrorBar),
        },
    })
}

const PULLBACK: &str = "lambda1(base) >= lambda1(cover): lifted eigenfunctions are eigenfunctions of the cover";
const STRICT: &str = "lambda1(base) > lambda1(cover) when the eigenvalues differ";
const ABOVE: &str =
    "lambda1(base) > n*delta0(base): delta0 is shared by the local isometry and lambda1(cover) >= n*delta0(cover)";

fn obstruction_chain(lambda1_cover: f64, lambda1_base: f64, n_delta0_cover: f64, n_delta0_base: f64) -> Vec<ChainStep> {
    vec![
        ChainStep {
            step: "pullback",
            statement: PULLBACK,
            lhs: lambda1_base,
            rhs: lambda1_cover,
            holds: !below(lambda1_base, lambda1_cover),
        },
        ChainStep {
            step: "strict_gap",
            statement: STRICT,
            lhs: lambda1_base,
            rhs: lambda1_cover,
            holds: !close(lambda1_base, lambda1_cover) && lambda1_base > lambda1_cover,
        },
        ChainStep {
            step: "above_threshold",
            statement: ABOVE,
            lhs: lambda1_base,
            rhs: n_delta0_base,
            holds: !close(lambda1_base, n_delta0_base)
                && lambda1_base > n_delta0_base
                && !below(lambda1_cover, n_delta0_cover),
        },
    ]
}

/// Obstruction from an isometric covering `cover → base` of irreducible
/// homogeneous spaces with different first eigenvalues. Never returns
/// `IDEAL_CAPABLE`.
pub fn covering_obstruction(
    cover: &SpaceDescriptor,
    base: &SpaceDescriptor,
    method: &Delta0Method,
) -> Result<Verdict, VerdictError> {
    if !cover.covers(base) {
        return Err(SpectralError::MismatchedPair(format!("{} does not cover {}", cover.name, base.name)).into());
    }
    let lambda1_cover = lambda1_closed_form(cover)?;
    let lambda1_base = lambda1_closed_form(base)?;
    let d_cover = delta0_of(cover, method)?;
    let d_base = delta0_of(base, method)?;
    if !close(d_cover, d_base) {
        return Err(VerdictError::Delta0Mismatch {
            cover: d_cover,
            base: d_base,
        });
    }
    let n = base.n as f64;
    let evidence = |chain, reason| Evidence {
        lambda1: lambda1_base,
        n_delta0: n * d_base,
        covering_partner: Some(cover.name.clone()),
        partner_lambda1: Some(lambda1_cover),
        error_bar: None,
        chain,
        reason,
    };
    if !(cover.irreducible && base.irreducible) {
        return Ok(Verdict {
            subject: base.name.clone(),
            outcome: Outcome::Inconclusive,
            evidence: evidence(Vec::new(), Some(InconclusiveReason::NotIrreducible)),
        });
    }
    if below(lambda1_base, lambda1_cover) {
        return Err(VerdictError::PullbackViolation {
            cover: cover.name.clone(),
            base: base.name.clone(),
            lambda1_cover,
            lambda1_base,
        });
    }
    if below(lambda1_cover, n * d_cover) {
        return Err(VerdictError::InconsistentData {
            space: cover.name.clone(),
            lambda1: lambda1_cover,
            n_delta0: n * d_cover,
        });
    }
    let chain = obstruction_chain(lambda1_cover, lambda1_base, n * d_cover, n * d_base);
    if close(lambda1_base, lambda1_cover) {
        return Ok(Verdict {
            subject: base.name.clone(),
            outcome: Outcome::Inconclusive,
            evidence: evidence(chain[..1].to_vec(), Some(InconclusiveReason::EqualEigenvalues)),
        });
    }
    debug_assert!(chain.iter().all(|s| s.holds));
    Ok(Verdict {
        subject: base.name.clone(),
        outcome: Outcome::NoIdealEmbedding,
        evidence: evidence(chain, None),
    })
}

/// Recomputes every number of a verdict's evidence from the registry with
/// `method` and checks it against the recorded values to relative tolerance
/// `tol`, and that each recorded step still holds.
pub fn replay(v: &Verdict, registry: &Registry, method: &Delta0Method, tol: f64) -> Result<bool, VerdictError> {
    let subject = registry.get(&v.subject)?;
    let n = subject.n as f64;
    let matches = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
    let n_delta0 = n * delta0_of(subject, method)?;
    let mut ok = matches(v.evidence.n_delta0, n_delta0);
    if v.evidence.error_bar.is_none() {
        ok &= matches(v.evidence.lambda1, lambda1_closed_form(subject)?);
    }
    let expected: Vec<ChainStep> = match &v.evidence.covering_partner {
        Some(partner) => {
            let cover = registry.get(partner)?;
            let lambda1_cover = lambda1_closed_form(cover)?;
            ok &= v.evidence.partner_lambda1.is_some_and(|x| matches(x, lambda1_cover));
            let n_delta0_cover = n * delta0_of(cover, method)?;
            obstruction_chain(lambda1_cover, lambda1_closed_form(subject)?, n_delta0_cover, n_delta0)
        }
        None => {
            let lambda1 = v.evidence.lambda1;
            vec![lower_bound_step(lambda1, n_delta0), equality_step(lambda1, n_delta0)]
        }
    };
    for step in &v.evidence.chain {
        let Some(e) = expected.iter().find(|e| e.step == step.step) else {
            return Ok(false);
        };
        ok &= matches(step.lhs, e.lhs) && matches(step.rhs, e.rhs);
        if v.evidence.error_bar.is_none() {
            ok &= step.holds == e.holds;
        }
    }
    if v.outcome == Outcome::NoIdealEmbedding {
        ok &= !v.evidence.chain.is_empty();
        ok &= match v.evidence.covering_partner {
            Some(_) => v.evidence.chain.len() == 3 && v.evidence.chain.iter().all(|s| s.holds),
            None => !matches(v.evidence.lambda1, n_delta0),
        };
    }
    Ok(ok)
}

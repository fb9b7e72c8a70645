//! Parametric immersions: builtin shapes with analytic partials, closure-based
//! maps differentiated numerically, and linear reparametrizations.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ImmersionError, Jet};

/// Margin kept from coordinate singularities (sphere poles and the like).
pub const CHART_MARGIN: f64 = 1e-3;

/// Position map of an immersion `U ⊂ ℝⁿ → ℝᵐ`.
pub trait ImmersionMap: Send + Sync {
    fn dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn position(&self, u: &[f64]) -> DVector<f64>;
    /// First and second partials in closed form, if available.
    fn analytic_jet(&self, _u: &[f64]) -> Option<Jet> {
        None
    }
    fn in_domain(&self, u: &[f64]) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    One,
    Sin,
    Cos,
    Linear,
}

impl Factor {
    /// (f, f', f'') at `t`.
    fn eval(self, t: f64) -> [f64; 3] {
        match self {
            Factor::One => [1.0, 0.0, 0.0],
            Factor::Sin => [t.sin(), t.cos(), -t.sin()],
            Factor::Cos => [t.cos(), -t.sin(), -t.cos()],
            Factor::Linear => [t, 1.0, 0.0],
        }
    }
}

/// `coef · Πᵢ fᵢ(uᵢ)`.
#[derive(Debug, Clone, PartialEq)]
struct Term {
    coef: f64,
    factors: Vec<Factor>,
}

/// Each ambient coordinate is a sum of separable terms, which covers every
/// builtin shape and makes exact partials a product-rule exercise.
#[derive(Debug, Clone, PartialEq)]
struct SeparableMap {
    n: usize,
    coords: Vec<Vec<Term>>,
    bounds: Vec<(f64, f64)>,
}

impl SeparableMap {
    fn term(coef: f64, factors: &[Factor]) -> Term {
        Term {
            coef,
            factors: factors.to_vec(),
        }
    }
}

impl ImmersionMap for SeparableMap {
    fn dim(&self) -> usize {
        self.n
    }

    fn ambient_dim(&self) -> usize {
        self.coords.len()
    }

    fn position(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.coords.len(),
            self.coords.iter().map(|terms| {
                terms
                    .iter()
                    .map(|t| t.coef * t.factors.iter().zip(u).map(|(f, &x)| f.eval(x)[0]).product::<f64>())
                    .sum()
            }),
        )
    }

    fn analytic_jet(&self, u: &[f64]) -> Option<Jet> {
        let (n, m) = (self.n, self.coords.len());
        let mut first = DMatrix::zeros(m, n);
        let mut second = vec![DVector::zeros(m); n * n];
        let mut position = DVector::zeros(m);
        for (k, terms) in self.coords.iter().enumerate() {
            for t in terms {
                let vals: Vec<[f64; 3]> = t.factors.iter().zip(u).map(|(f, &x)| f.eval(x)).collect();
                let prod_except = |skip: &[usize], pick: &dyn Fn(usize) -> f64| -> f64 {
                    (0..n)
                        .map(|i| if skip.contains(&i) { pick(i) } else { vals[i][0] })
                        .product::<f64>()
                };
                position[k] += t.coef * prod_except(&[], &|_| 1.0);
                for a in 0..n {
                    first[(k, a)] += t.coef * prod_except(&[a], &|i| vals[i][1]);
                    for b in 0..n {
                        let v = if a == b {
                            prod_except(&[a], &|i| vals[i][2])
                        } else {
                            prod_except(&[a, b], &|i| vals[i][1])
                        };
                        second[a * n + b][k] += t.coef * v;
                    }
                }
            }
        }
        Some(Jet {
            position,
            first,
            second,
        })
    }

    fn in_domain(&self, u: &[f64]) -> bool {
        u.len() == self.n && u.iter().zip(&self.bounds).all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }
}

/// Builtin shapes with analytic partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Round n-sphere of the given radius in ℝⁿ⁺¹, hyperspherical coordinates.
    Sphere {
        n: usize,
        radius: f64,
    },
    Plane,
    /// Circular cylinder `(ρ cos u, ρ sin u, v)`.
    Cylinder {
        radius: f64,
    },
    /// `((R + r cos θ) cos φ, (R + r cos θ) sin φ, r sin θ)`, `u = (θ, φ)`.
    TorusOfRevolution {
        major: f64,
        minor: f64,
    },
    /// `(a sin θ cos φ, b sin θ sin φ, c cos θ)`.
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
    /// Product of circles `(r₁ cos u, r₁ sin u, r₂ cos v, r₂ sin v)` in ℝ⁴.
    CliffordTorus {
        r1: f64,
        r2: f64,
    },
}

impl Shape {
    /// Parses `name` and positional parameters as used on the command line.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self, ImmersionError> {
        let bad = |msg: &str| ImmersionError::BadParameters(format!("{name}: {msg}"));
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let shape = match name {
            "sphere" => {
                let radius = params.first().copied().unwrap_or(1.0);
                let n = params.get(1).map_or(2, |v| *v as usize);
                Shape::Sphere { n, radius }
            }
            "plane" => Shape::Plane,
            "cylinder" => Shape::Cylinder {
                radius: params.first().copied().unwrap_or(1.0),
            },
            "torus" => Shape::TorusOfRevolution {
                major: params.first().copied().unwrap_or(2.0),
                minor: params.get(1).copied().unwrap_or(1.0),
            },
            "ellipsoid" => Shape::Ellipsoid {
                a: params.first().copied().unwrap_or(1.0),
                b: params.get(1).copied().unwrap_or(1.0),
                c: params.get(2).copied().unwrap_or(1.0),
            },
            "clifford" => Shape::CliffordTorus {
                r1: params.first().copied().unwrap_or(std::f64::consts::FRAC_1_SQRT_2),
                r2: params.get(1).copied().unwrap_or(std::f64::consts::FRAC_1_SQRT_2),
            },
            other => return Err(ImmersionError::UnknownShape(other.to_string())),
        };
        let ok = match shape {
            Shape::Sphere { n, radius } => n >= 2 && positive(radius),
            Shape::Plane => true,
            Shape::Cylinder { radius } => positive(radius),
            Shape::TorusOfRevolution { major, minor } => positive(minor) && major > minor,
            Shape::Ellipsoid { a, b, c } => positive(a) && positive(b) && positive(c),
            Shape::CliffordTorus { r1, r2 } => positive(r1) && positive(r2),
        };
        if !ok {
            return Err(bad("parameters out of range"));
        }
        Ok(shape)
    }

    fn separable(&self) -> SeparableMap {
        use Factor::*;
        let t = SeparableMap::term;
        let free = (f64::NEG_INFINITY, f64::INFINITY);
        let polar = (CHART_MARGIN, PI - CHART_MARGIN);
        match *self {
            Shape::Sphere { n, radius } => {
                // coordinate k is sin u₀ ⋯ sin u_{k−1} cos u_k, the last one all sines
                let mut coords = Vec::with_capacity(n + 1);
                for k in 0..=n {
                    let mut f = vec![One; n];
                    f[..k.min(n)].fill(Sin);
                    if k < n {
                        f[k] = Cos;
                    }
                    coords.push(vec![t(radius, &f)]);
                }
                // for n = 2 this reads (sin θ cos φ, sin θ sin φ, cos θ)
                coords.reverse();
                if n >= 2 {
                    coords.swap(0, 1);
                }
                let mut bounds = vec![polar; n];
                bounds[n - 1] = free;
                SeparableMap { n, coords, bounds }
            }
            Shape::Plane => SeparableMap {
                n: 2,
                coords: vec![vec![t(1.0, &[Linear, One])], vec![t(1.0, &[One, Linear])], vec![]],
                bounds: vec![free, free],
            },
            Shape::Cylinder { radius } => SeparableMap {
                n: 2,
                coords: vec![
                    vec![t(radius, &[Cos, One])],
                    vec![t(radius, &[Sin, One])],
                    vec![t(1.0, &[One, Linear])],
                ],
                bounds: vec![free, free],
            },
            Shape::TorusOfRevolution { major, minor } => SeparableMap {
                n: 2,
                coords: vec![
                    vec![t(major, &[One, Cos]), t(minor, &[Cos, Cos])],
                    vec![t(major, &[One, Sin]), t(minor, &[Cos, Sin])],
                    vec![t(minor, &[Sin, One])],
                ],
                bounds: vec![free, free],
            },
            Shape::Ellipsoid { a, b, c } => SeparableMap {
                n: 2,
                coords: vec![
                    vec![t(a, &[Sin, Cos])],
                    vec![t(b, &[Sin, Sin])],
                    vec![t(c, &[Cos, One])],
                ],
                bounds: vec![polar, free],
            },
            Shape::CliffordTorus { r1, r2 } => SeparableMap {
                n: 2,
                coords: vec![
                    vec![t(r1, &[Cos, One])],
                    vec![t(r1, &[Sin, One])],
                    vec![t(r2, &[One, Cos])],
                    vec![t(r2, &[One, Sin])],
                ],
                bounds: vec![free, free],
            },
        }
    }

    pub fn immersion(&self) -> ParametricImmersion {
        ParametricImmersion::analytic(Arc::new(self.separable()))
    }

    /// Box from which sample points are drawn, away from coordinate singularities.
    pub fn sample_box(&self) -> Vec<(f64, f64)> {
        let polar = (CHART_MARGIN, PI - CHART_MARGIN);
        let angle = (0.0, 2.0 * PI);
        match *self {
            Shape::Sphere { n, .. } => {
                let mut b = vec![polar; n];
                b[n - 1] = angle;
                b
            }
            Shape::Plane => vec![(-1.0, 1.0); 2],
            Shape::Cylinder { .. } => vec![angle, (-1.0, 1.0)],
            Shape::TorusOfRevolution { .. } | Shape::CliffordTorus { .. } => vec![angle, angle],
            Shape::Ellipsoid { .. } => vec![polar, angle],
        }
    }

    /// `count` deterministic uniform points in [`sample_box`](Self::sample_box).
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let bounds = self.sample_box();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect())
            .collect()
    }
}

/// How partial derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeSource {
    Analytic,
    /// Central differences with one Richardson extrapolation step.
    Numeric {
        first_step: f64,
        second_step: f64,
    },
}

impl DerivativeSource {
    pub fn numeric() -> Self {
        DerivativeSource::Numeric {
            first_step: 1e-5,
            second_step: 1e-3,
        }
    }
}

#[derive(Clone)]
pub struct ParametricImmersion {
    map: Arc<dyn ImmersionMap>,
    source: DerivativeSource,
}

impl std::fmt::Debug for ParametricImmersion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParametricImmersion")
            .field("n", &self.map.dim())
            .field("m", &self.map.ambient_dim())
            .field("source", &self.source)
            .finish()
    }
}

struct FnMap<F> {
    n: usize,
    m: usize,
    f: F,
    bounds: Vec<(f64, f64)>,
}

impl<F> ImmersionMap for FnMap<F>
where
    F: Fn(&[f64]) -> DVector<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn ambient_dim(&self) -> usize {
        self.m
    }
    fn position(&self, u: &[f64]) -> DVector<f64> {
        (self.f)(u)
    }
    fn in_domain(&self, u: &[f64]) -> bool {
        u.len() == self.n && u.iter().zip(&self.bounds).all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }
}

/// `v ↦ x(c + A v)` for an invertible `n × n` matrix `A`.
struct Reparametrized {
    inner: Arc<dyn ImmersionMap>,
    linear: DMatrix<f64>,
    offset: DVector<f64>,
}

impl Reparametrized {
    fn pull(&self, v: &[f64]) -> Vec<f64> {
        let u = &self.offset + &self.linear * DVector::from_column_slice(v);
        u.iter().copied().collect()
    }
}

impl ImmersionMap for Reparametrized {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }
    fn position(&self, v: &[f64]) -> DVector<f64> {
        self.inner.position(&self.pull(v))
    }
    fn analytic_jet(&self, v: &[f64]) -> Option<Jet> {
        let jet = self.inner.analytic_jet(&self.pull(v))?;
        let n = self.dim();
        let a = &self.linear;
        let first = &jet.first * a;
        let m = jet.position.len();
        let mut second = vec![DVector::zeros(m); n * n];
        for p in 0..n {
            for q in 0..n {
                let mut acc = DVector::zeros(m);
                for i in 0..n {
                    for j in 0..n {
                        let w = a[(i, p)] * a[(j, q)];
                        if w != 0.0 {
                            acc += &jet.second[i * n + j] * w;
                        }
                    }
                }
                second[p * n + q] = acc;
            }
        }
        Some(Jet {
            position: jet.position,
            first,
            second,
        })
    }
    fn in_domain(&self, v: &[f64]) -> bool {
        self.inner.in_domain(&self.pull(v))
    }
}

impl ParametricImmersion {
    pub fn analytic(map: Arc<dyn ImmersionMap>) -> Self {
        Self {
            map,
            source: DerivativeSource::Analytic,
        }
    }

    /// Immersion given only by its position map; partials are numeric.
    pub fn from_fn<F>(n: usize, m: usize, bounds: Vec<(f64, f64)>, f: F) -> Self
    where
        F: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            map: Arc::new(FnMap { n, m, f, bounds }),
            source: DerivativeSource::numeric(),
        }
    }

    pub fn with_source(mut self, source: DerivativeSource) -> Self {
        self.source = source;
        self
    }

    pub fn source(&self) -> DerivativeSource {
        self.source
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.map.ambient_dim()
    }

    pub fn position(&self, u: &[f64]) -> DVector<f64> {
        self.map.position(u)
    }

    /// Chart change `v ↦ c + A v`; `A` must be invertible.
    pub fn reparametrized(&self, linear: DMatrix<f64>, offset: DVector<f64>) -> Self {
        Self {
            map: Arc::new(Reparametrized {
                inner: self.map.clone(),
                linear,
                offset,
            }),
            source: self.source,
        }
    }

    pub fn jet(&self, u: &[f64]) -> Result<Jet, ImmersionError> {
        if u.len() != self.dim() || !self.map.in_domain(u) {
            return Err(ImmersionError::DomainError(u.to_vec()));
        }
        match self.source {
            DerivativeSource::Analytic => match self.map.analytic_jet(u) {
                Some(j) => Ok(j),
                None => Ok(numeric_jet(self.map.as_ref(), u, 1e-5, 1e-3)),
            },
            DerivativeSource::Numeric {
                first_step,
                second_step,
            } => Ok(numeric_jet(self.map.as_ref(), u, first_step, second_step)),
        }
    }
}

fn shifted(u: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut v = u.to_vec();
    for &(i, d) in moves {
        v[i] += d;
    }
    v
}

/// Central differences, Richardson-extrapolated from steps `h` and `h/2`.
fn numeric_jet(map: &dyn ImmersionMap, u: &[f64], h1: f64, h2: f64) -> Jet {
    let n = map.dim();
    let x = |moves: &[(usize, f64)]| map.position(&shifted(u, moves));
    let position = map.position(u);
    let m = position.len();
    let richardson = |coarse: DVector<f64>, fine: DVector<f64>| (fine * 4.0 - coarse) / 3.0;

    let mut first = DMatrix::zeros(m, n);
    for a in 0..n {
        let d = |h: f64| (x(&[(a, h)]) - x(&[(a, -h)])) / (2.0 * h);
        first.set_column(a, &richardson(d(h1), d(h1 / 2.0)));
    }
    let mut second = vec![DVector::zeros(m); n * n];
    for a in 0..n {
        let dd = |h: f64| (x(&[(a, h)]) - &position * 2.0 + x(&[(a, -h)])) / (h * h);
        second[a * n + a] = richardson(dd(h2), dd(h2 / 2.0));
        for b in (a + 1)..n {
            let mixed = |h: f64| {
                (x(&[(a, h), (b, h)]) - x(&[(a, h), (b, -h)]) - x(&[(a, -h), (b, h)]) + x(&[(a, -h), (b, -h)]))
                    / (4.0 * h * h)
            };
            let v = richardson(mixed(h2), mixed(h2 / 2.0));
            second[a * n + b] = v.clone();
            second[b * n + a] = v;
        }
    }
    Jet {
        position,
        first,
        second,
    }
}

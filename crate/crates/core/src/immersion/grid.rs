use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{sample_from_jet, ImmersionError, ImmersionSample, Jet};

/// Relative tolerance for recognizing a uniform tensor-product grid.
const SPACING_TOL: f64 = 1e-9;

/// An immersion known only through positions on a uniform tensor-product grid,
/// `{"n": 2, "m": 3, "grid": [[point, position], …]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledGrid {
    pub n: usize,
    pub m: usize,
    pub grid: Vec<(Vec<f64>, Vec<f64>)>,
}

struct Axis {
    start: f64,
    step: f64,
    len: usize,
}

impl Axis {
    fn index(&self, x: f64) -> Option<usize> {
        let t = (x - self.start) / self.step;
        let i = t.round();
        ((t - i).abs() < 1e-6 && i >= 0.0 && (i as usize) < self.len).then_some(i as usize)
    }
}

impl SampledGrid {
    pub fn from_json(text: &str) -> Result<Self, ImmersionError> {
        serde_json::from_str(text).map_err(|e| ImmersionError::Grid(e.to_string()))
    }

    fn axes(&self) -> Result<Vec<Axis>, ImmersionError> {
        let mut axes = Vec::with_capacity(self.n);
        for a in 0..self.n {
            let mut xs: Vec<f64> = self.grid.iter().map(|(u, _)| u[a]).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup_by(|x, y| (*x - *y).abs() <= SPACING_TOL * y.abs().max(1.0));
            if xs.len() < 5 {
                return Err(ImmersionError::Grid(format!(
                    "axis {a} has {} values, at least 5 are needed",
                    xs.len()
                )));
            }
            let step = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
            for w in xs.windows(2) {
                if ((w[1] - w[0]) - step).abs() > SPACING_TOL * step.abs().max(1.0) * 1e3 {
                    return Err(ImmersionError::Grid(format!("axis {a} is not uniformly spaced")));
                }
            }
            axes.push(Axis {
                start: xs[0],
                step,
                len: xs.len(),
            });
        }
        Ok(axes)
    }

    /// Fundamental forms at every node at least two steps from the grid
    /// boundary, from central differences with one Richardson step.
    pub fn samples(&self) -> Result<Vec<ImmersionSample>, ImmersionError> {
        let n = self.n;
        if n == 0 || self.m < n {
            return Err(ImmersionError::Grid("need 1 ≤ n ≤ m".into()));
        }
        for (u, x) in &self.grid {
            if u.len() != n || x.len() != self.m {
                return Err(ImmersionError::Grid("entry has the wrong dimension".into()));
            }
        }
        let axes = self.axes()?;
        let mut nodes: HashMap<Vec<usize>, DVector<f64>> = HashMap::with_capacity(self.grid.len());
        for (u, x) in &self.grid {
            let idx: Option<Vec<usize>> = u.iter().zip(&axes).map(|(v, ax)| ax.index(*v)).collect();
            let idx = idx.ok_or_else(|| ImmersionError::Grid(format!("point {u:?} is off the grid")))?;
            if nodes.insert(idx, DVector::from_column_slice(x)).is_some() {
                return Err(ImmersionError::Grid(format!("duplicate point {u:?}")));
            }
        }
        let total: usize = axes.iter().map(|a| a.len).product();
        if nodes.len() != total {
            return Err(ImmersionError::Grid("grid is not a full tensor product".into()));
        }

        let mut out = Vec::new();
        let mut idx = vec![2usize; n];
        if axes.iter().any(|a| a.len < 5) {
            return Ok(out);
        }
        loop {
            let at = |moves: &[(usize, isize)]| -> &DVector<f64> {
                let mut k = idx.clone();
                for &(a, d) in moves {
                    k[a] = (k[a] as isize + d) as usize;
                }
                &nodes[&k]
            };
            let x0 = at(&[]);
            let richardson = |near: DVector<f64>, far: DVector<f64>| (near * 4.0 - far) / 3.0;
            let mut first = DMatrix::zeros(self.m, n);
            let mut second = vec![DVector::zeros(self.m); n * n];
            for a in 0..n {
                let h = axes[a].step;
                let d = |s: isize| (at(&[(a, s)]) - at(&[(a, -s)])) / (2.0 * s as f64 * h);
                first.set_column(a, &richardson(d(1), d(2)));
                let dd = |s: isize| (at(&[(a, s)]) - x0 * 2.0 + at(&[(a, -s)])) / (s as f64 * h).powi(2);
                second[a * n + a] = richardson(dd(1), dd(2));
                for b in (a + 1)..n {
                    let k = axes[b].step;
                    let mixed = |s: isize| {
                        (at(&[(a, s), (b, s)]) - at(&[(a, s), (b, -s)]) - at(&[(a, -s), (b, s)])
                            + at(&[(a, -s), (b, -s)]))
                            / (4.0 * (s * s) as f64 * h * k)
                    };
                    let v = richardson(mixed(1), mixed(2));
                    second[a * n + b] = v.clone();
                    second[b * n + a] = v;
                }
            }
            let point: Vec<f64> = idx
                .iter()
                .zip(&axes)
                .map(|(&i, ax)| ax.start + i as f64 * ax.step)
                .collect();
            let jet = Jet {
                position: x0.clone(),
                first,
                second,
            };
            out.push(sample_from_jet(&point, &jet)?);

            let mut a = 0;
            loop {
                if a == n {
                    return Ok(out);
                }
                idx[a] += 1;
                if idx[a] + 2 < axes[a].len {
                    break;
                }
                idx[a] = 2;
                a += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{fundamental_forms, Shape};

    fn torus_grid(cells: usize) -> SampledGrid {
        let shape = Shape::TorusOfRevolution { major: 2.0, minor: 1.0 };
        let im = shape.immersion();
        let mut grid = Vec::new();
        for i in 0..cells {
            for j in 0..cells {
                let u = vec![0.5 + i as f64 * 0.01, 1.0 + j as f64 * 0.01];
                let x = im.position(&u);
                grid.push((u, x.iter().copied().collect()));
            }
        }
        SampledGrid { n: 2, m: 3, grid }
    }

    #[test]
    fn grid_samples_match_analytic_forms() {
        let g = torus_grid(7);
        let json = serde_json::to_string(&g).unwrap();
        let back = SampledGrid::from_json(&json).unwrap();
        let samples = back.samples().unwrap();
        assert_eq!(samples.len(), 9);
        let im = Shape::TorusOfRevolution { major: 2.0, minor: 1.0 }.immersion();
        for s in &samples {
            let exact = fundamental_forms(&im, &s.point).unwrap();
            assert!((&s.g - &exact.g).amax() < 1e-8);
            assert!((s.h2 - exact.h2).abs() < 1e-6);
        }
    }

    #[test]
    fn malformed_grids_are_rejected() {
        let mut g = torus_grid(6);
        g.grid.pop();
        assert!(matches!(g.samples(), Err(ImmersionError::Grid(_))));
        let g = torus_grid(4);
        assert!(matches!(g.samples(), Err(ImmersionError::Grid(_))));
        assert!(SampledGrid::from_json("{\"n\":2}").is_err());
    }
}

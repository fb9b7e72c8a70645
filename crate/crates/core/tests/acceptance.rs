//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use delta_ideal::delta::{delta_bruteforce, delta_constant_curvature, delta_invariant, max_normalized_delta};
use delta_ideal::immersion::{evaluate_samples, sample_points, IdealityReport, InequalityReport, Shape};
use delta_ideal::linalg::random_orthogonal;
use delta_ideal::spectral::{antipodal_quotient, lambda1_mesh, verify_pullback, Registry, SolverOptions, TriMesh};
use delta_ideal::verdict::{covering_obstruction, delta0_of, ideality_criterion, replay, Delta0Method, Outcome};
use delta_ideal::{enumerate_tuples, CurvatureTensor, Frame, OptimizerOptions, Partition};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `c0 · (n(n−1)/2 − Σ nⱼ(nⱼ−1)/2)`: every 2-plane has curvature `c0`, and
/// the complement of the blocks' planes is what remains of τ.
fn space_form_delta(n: usize, c0: f64, parts: &[usize]) -> f64 {
    let all = n * (n - 1) / 2;
    let inside: usize = parts.iter().map(|&m| m * (m - 1) / 2).sum();
    c0 * (all - inside) as f64
}

fn criterion_1() -> Check {
    let opts = OptimizerOptions::default();
    let mut worst = 0.0_f64;
    let mut count = 0;
    for n in 3..=6 {
        for c0 in [-1.0, 0.0, 0.5, 1.0] {
            let r = CurvatureTensor::constant_curvature(n, c0).map_err(|e| e.to_string())?;
            for p in enumerate_tuples(n).map_err(|e| e.to_string())? {
                let opt = delta_invariant(&r, &p, &opts).map_err(|e| e.to_string())?.value;
                let closed = delta_constant_curvature(n, c0, &p).map_err(|e| e.to_string())?;
                let oracle = space_form_delta(n, c0, p.parts());
                ensure((closed - oracle).abs() < 1e-12, || {
                    format!("closed form {closed} vs {oracle} at n={n} {p}")
                })?;
                let dev = (opt - closed).abs();
                ensure(dev < 1e-6, || format!("n={n} c0={c0} {p}: optimizer {opt} vs {closed}"))?;
                worst = worst.max(dev);
                count += 1;
            }
        }
    }
    Ok(format!("{count} cases, max |optimizer - closed form| = {worst:.2e}"))
}

fn criterion_2() -> Check {
    let mut count = 0;
    for n in 2..=12 {
        for p in enumerate_tuples(n).map_err(|e| e.to_string())? {
            ensure(p.c_coefficient() > 0.0, || format!("c{p} <= 0 at n={n}"))?;
            count += 1;
        }
        let empty = Partition::empty(n).unwrap().c_coefficient();
        let classical = (n * (n - 1)) as f64 / 2.0;
        ensure((empty - classical).abs() < 1e-12, || format!("c() = {empty} at n={n}"))?;
    }
    let c52 = Partition::new(5, vec![2]).unwrap().c_coefficient();
    ensure((c52 - 75.0 / 8.0).abs() < 1e-12, || format!("c(2) at n=5 is {c52}"))?;
    let c422 = Partition::new(4, vec![2, 2]).unwrap().c_coefficient();
    ensure((c422 - 4.0).abs() < 1e-12, || format!("c(2,2) at n=4 is {c422}"))?;
    Ok(format!(
        "{count} tuples positive; c(2)|n=5 = {c52}, c(2,2)|n=4 = {c422}"
    ))
}

fn criterion_3() -> Check {
    let reg = Registry::builtin();
    let opts = OptimizerOptions::default();
    for n in 2..=8 {
        let s = reg.get(&format!("sphere:{n}")).map_err(|e| e.to_string())?;
        let r = CurvatureTensor::constant_curvature(n, 1.0).unwrap();
        let m = max_normalized_delta(&r, &opts).map_err(|e| e.to_string())?;
        ensure((m.value - 1.0).abs() < 1e-6, || {
            format!("n={n}: optimizer delta0 = {}", m.value)
        })?;
        ensure(m.partition.is_empty(), || format!("n={n}: maximum at {}", m.partition))?;
        let d = delta0_of(s, &Delta0Method::ClosedForm).map_err(|e| e.to_string())?;
        ensure(d == 1.0, || format!("n={n}: closed-form delta0 = {d}"))?;
        let v = ideality_criterion(s, d).map_err(|e| e.to_string())?;
        ensure(v.evidence.lambda1 == n as f64 * d, || {
            format!("n={n}: lambda1 = {}", v.evidence.lambda1)
        })?;
        ensure(v.outcome == Outcome::IdealCapable, || format!("n={n}: {:?}", v.outcome))?;
    }
    Ok("S^n(1), n = 2..8: delta0 = 1 at (), lambda1 = n, IDEAL_CAPABLE".into())
}

fn criterion_4() -> Check {
    let reg = Registry::builtin();
    let replay_method = Delta0Method::Optimizer(OptimizerOptions {
        restarts: 8,
        ..OptimizerOptions::default()
    });
    for n in 2..=8 {
        let s = reg.get(&format!("sphere:{n}")).map_err(|e| e.to_string())?;
        let rp = reg.get(&format!("rp:{n}")).map_err(|e| e.to_string())?;
        let v = covering_obstruction(s, rp, &Delta0Method::ClosedForm).map_err(|e| e.to_string())?;
        ensure(v.outcome == Outcome::NoIdealEmbedding, || {
            format!("n={n}: {:?}", v.outcome)
        })?;
        let steps: Vec<&str> = v.evidence.chain.iter().map(|s| s.step).collect();
        ensure(steps == ["pullback", "strict_gap", "above_threshold"], || {
            format!("n={n}: chain {steps:?}")
        })?;
        ensure(v.evidence.chain.iter().all(|s| s.holds), || {
            format!("n={n}: a chain step fails")
        })?;
        let lambda_rp = 2.0 * (n as f64 + 1.0);
        ensure(
            v.evidence.lambda1 == lambda_rp && v.evidence.partner_lambda1 == Some(n as f64),
            || format!("n={n}: evidence {:?}", v.evidence),
        )?;
        ensure(
            replay(&v, &reg, &replay_method, 1e-6).map_err(|e| e.to_string())?,
            || format!("n={n}: replay with recomputed delta0 disagrees"),
        )?;
        let d = delta0_of(rp, &Delta0Method::ClosedForm).map_err(|e| e.to_string())?;
        let c = ideality_criterion(rp, d).map_err(|e| e.to_string())?;
        ensure(c.outcome == Outcome::NoIdealEmbedding, || {
            format!("n={n}: criterion {:?}", c.outcome)
        })?;
        ensure(c.evidence.n_delta0 == n as f64, || {
            format!("n={n}: n*delta0 = {}", c.evidence.n_delta0)
        })?;
    }
    Ok("RP^n(1), n = 2..8: covering chain and criterion both give NO_IDEAL_EMBEDDING".into())
}

fn criterion_5() -> Check {
    let m = TriMesh::icosphere(4);
    let opts = SolverOptions::default();
    let cover = lambda1_mesh(&m, &opts).map_err(|e| e.to_string())?;
    let q = antipodal_quotient(&m).map_err(|e| e.to_string())?;
    let base = lambda1_mesh(&q, &opts).map_err(|e| e.to_string())?;
    ensure((cover.lambda1 - 2.0).abs() <= 0.02 * 2.0, || {
        format!("sphere lambda1 = {}", cover.lambda1)
    })?;
    ensure((base.lambda1 - 6.0).abs() <= 0.05 * 6.0, || {
        format!("quotient lambda1 = {}", base.lambda1)
    })?;
    let rep = verify_pullback(&m, &cover, &base, 1e-6).map_err(|e| e.to_string())?;
    ensure(rep.holds(), || format!("pullback fails: {rep:?}"))?;
    ensure(rep.rayleigh_deviation < 1e-8, || {
        format!("Rayleigh deviation {:e}", rep.rayleigh_deviation)
    })?;
    Ok(format!(
        "lambda1(S^2 mesh) = {:.6}, lambda1(RP^2 mesh) = {:.6}, lifted Rayleigh deviation = {:.1e}",
        cover.lambda1, base.lambda1, rep.rayleigh_deviation
    ))
}

fn criterion_6() -> Check {
    let opts = OptimizerOptions::default();
    let evaluate = |shape: Shape, count: usize, seed: u64| {
        let pts = shape.sample_points(count, seed);
        let samples = sample_points(&shape.immersion(), &pts).map_err(|e| e.to_string())?;
        evaluate_samples(&samples, &opts).map_err(|e| e.to_string())
    };

    let sphere = evaluate(Shape::Sphere { n: 2, radius: 1.0 }, 500, 1)?;
    let ineq = InequalityReport::from_evaluations(&sphere);
    let empty = ineq.tuple(&Partition::empty(2).unwrap()).ok_or("no row for ()")?;
    ensure(empty.records.len() == 500, || "sphere sample count".into())?;
    ensure(empty.max_abs_slack < 1e-6, || {
        format!("sphere max |slack| = {:e}", empty.max_abs_slack)
    })?;
    let ideal = IdealityReport::from_evaluations(&sphere);
    ensure(ideal.ideal && ideal.max_abs_residual < 1e-6, || {
        format!("sphere residual {:e}", ideal.max_abs_residual)
    })?;

    let torus = evaluate(Shape::TorusOfRevolution { major: 2.0, minor: 1.0 }, 1000, 2)?;
    let t = InequalityReport::from_evaluations(&torus);
    ensure(t.points.len() == 1000, || "torus sample count".into())?;
    // K = cos θ/(2 + cos θ) and H = (1 + K)/2 in closed form
    for (e, rec) in torus.iter().zip(&t.tuples[0].records) {
        let c = e.point[0].cos();
        let k = c / (2.0 + c);
        let h2 = (0.5 * (1.0 + k)).powi(2);
        ensure((rec.delta - k).abs() < 1e-9 && (rec.c_h2 - h2).abs() < 1e-9, || {
            format!(
                "torus at {:?}: delta {} vs {k}, H^2 {} vs {h2}",
                e.point, rec.delta, rec.c_h2
            )
        })?;
    }
    ensure(t.min_slack > 0.0 && t.holds(), || {
        format!("torus min slack {}", t.min_slack)
    })?;
    let t_ideal = IdealityReport::from_evaluations(&torus);
    ensure(!t_ideal.ideal, || "torus classified ideal".into())?;

    let cyl = evaluate(Shape::Cylinder { radius: 1.0 }, 200, 3)?;
    let c = IdealityReport::from_evaluations(&cyl);
    ensure(c.residuals.iter().all(|r| (r - 0.25).abs() < 1e-9), || {
        format!("cylinder residual range [{}, {}]", c.min_residual, c.max_abs_residual)
    })?;
    ensure(!c.ideal, || "cylinder classified ideal".into())?;
    Ok(format!(
        "sphere max |slack| = {:.1e}, torus min slack = {:.6}, cylinder residual = 1/4",
        empty.max_abs_slack, t.min_slack
    ))
}

/// `min K` over 2-planes in ℝ³ by a grid over unit normals with three rounds
/// of local refinement around the best node.
fn grid_min_sectional(r: &CurvatureTensor) -> f64 {
    let plane_k = |theta: f64, phi: f64| {
        let nu = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let a = if nu[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let x = [
            nu[1] * a[2] - nu[2] * a[1],
            nu[2] * a[0] - nu[0] * a[2],
            nu[0] * a[1] - nu[1] * a[0],
        ];
        let y = [
            nu[1] * x[2] - nu[2] * x[1],
            nu[2] * x[0] - nu[0] * x[2],
            nu[0] * x[1] - nu[1] * x[0],
        ];
        r.sectional_curvature(&x, &y).unwrap()
    };
    let (nt, np) = (180, 360);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=nt {
        let theta = PI * i as f64 / nt as f64 / 2.0;
        for j in 0..np {
            let phi = 2.0 * PI * j as f64 / np as f64;
            let k = plane_k(theta, phi);
            if k < best.0 {
                best = (k, theta, phi);
            }
        }
    }
    let (mut ht, mut hp) = (PI / 2.0 / nt as f64, 2.0 * PI / np as f64);
    for _ in 0..3 {
        let (_, t0, p0) = best;
        for i in -20..=20 {
            for j in -20..=20 {
                let (t, p) = (t0 + ht * i as f64 / 10.0, p0 + hp * j as f64 / 10.0);
                let k = plane_k(t, p);
                if k < best.0 {
                    best = (k, t, p);
                }
            }
        }
        ht /= 5.0;
        hp /= 5.0;
    }
    best.0
}

fn criterion_7() -> Check {
    let opts = OptimizerOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_gap = f64::NEG_INFINITY;
    for t in 0..20 {
        let r = CurvatureTensor::random(4, &mut rng).map_err(|e| e.to_string())?;
        for p in enumerate_tuples(4).unwrap() {
            let opt = delta_invariant(&r, &p, &opts).map_err(|e| e.to_string())?;
            let bf = delta_bruteforce(&r, &p, 10_000, 1000 + t).map_err(|e| e.to_string())?;
            let gap = opt.objective - bf.min_objective;
            ensure(gap <= 1e-9, || {
                format!(
                    "tensor {t} {p}: optimizer {} > sampled {}",
                    opt.objective, bf.min_objective
                )
            })?;
            if !p.is_empty() {
                worst_gap = worst_gap.max(gap);
            }
        }
    }
    let mut worst_grid = 0.0_f64;
    let p2 = Partition::new(3, vec![2]).unwrap();
    for t in 0..20 {
        let r = CurvatureTensor::random(3, &mut rng).map_err(|e| e.to_string())?;
        let opt = delta_invariant(&r, &p2, &opts).map_err(|e| e.to_string())?.value;
        let tau = r.scalar_curvature(&Frame::identity(3)).unwrap();
        let grid = tau - grid_min_sectional(&r);
        let dev = (opt - grid).abs();
        ensure(dev < 1e-4, || format!("n=3 tensor {t}: delta(2) {opt} vs grid {grid}"))?;
        worst_grid = worst_grid.max(dev);
    }
    Ok(format!(
        "max (optimizer - sampled minimum) over nonempty tuples = {worst_gap:.2e}; max |delta(2) - grid search| = {worst_grid:.1e}"
    ))
}

fn criterion_8() -> Check {
    let opts = OptimizerOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pick = |rng: &mut ChaCha8Rng, n: usize| {
        let tuples: Vec<Partition> = enumerate_tuples(n)
            .unwrap()
            .into_iter()
            .filter(|p| !p.is_empty())
            .collect();
        tuples[rng.random_range(0..tuples.len())].clone()
    };
    let (mut conj, mut scale, mut tau_spread) = (0.0_f64, 0.0_f64, 0.0_f64);
    for trial in 0..100 {
        let n = rng.random_range(3..=5);
        let r = CurvatureTensor::random(n, &mut rng).map_err(|e| e.to_string())?;
        let p = pick(&mut rng, n);
        let q: DMatrix<f64> = random_orthogonal(n, &mut rng);
        let a = rng.random_range(0.1..10.0);

        let d = delta_invariant(&r, &p, &opts).map_err(|e| e.to_string())?.value;
        let rq = r.in_frame(&q).map_err(|e| e.to_string())?;
        let dq = delta_invariant(&rq, &p, &opts).map_err(|e| e.to_string())?.value;
        ensure((d - dq).abs() < 1e-6, || {
            format!("trial {trial}: conjugation {d} vs {dq}")
        })?;
        conj = conj.max((d - dq).abs());

        let da = delta_invariant(&r.scaled(a), &p, &opts)
            .map_err(|e| e.to_string())?
            .value;
        let dev = (da - a * d).abs() / (a * d).abs().max(1.0);
        ensure(dev < 1e-8, || format!("trial {trial}: scaling {da} vs {}", a * d))?;
        scale = scale.max(dev);

        let base = r.scalar_curvature(&Frame::identity(n)).unwrap();
        let other = r.scalar_curvature(&Frame::new(q).unwrap()).unwrap();
        ensure((base - other).abs() < 1e-8, || {
            format!("trial {trial}: tau {base} vs {other}")
        })?;
        tau_spread = tau_spread.max((base - other).abs());
    }
    Ok(format!(
        "100 trials each: conjugation {conj:.1e}, scaling (relative) {scale:.1e}, tau frame spread {tau_spread:.1e}"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 optimizer matches space-form closed form", criterion_1),
        ("2 coefficient positivity and spot values", criterion_2),
        ("3 sphere ideality", criterion_3),
        ("4 projective-space obstruction", criterion_4),
        ("5 discrete spectra and pullback", criterion_5),
        ("6 submanifold inequality on sphere, torus, cylinder", criterion_6),
        ("7 optimizer vs sampling and grid search", criterion_7),
        ("8 invariance suite", criterion_8),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  criterion {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name} ({secs:.2}s): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

use delta_ideal::immersion::{
    evaluate_samples, maximum_principle_failures, sample_points, verify_inequality, InequalityReport, Shape,
};
use delta_ideal::spectral::Registry;
use delta_ideal::verdict::{delta0_of, ideality_criterion, Delta0Method, Outcome};
use delta_ideal::OptimizerOptions;
use nalgebra::{DMatrix, DVector};

#[test]
fn reports_are_unchanged_by_rotating_the_chart() {
    let opts = OptimizerOptions::default();
    for shape in [
        Shape::TorusOfRevolution { major: 2.0, minor: 1.0 },
        Shape::Ellipsoid { a: 1.0, b: 1.5, c: 0.7 },
        Shape::Sphere { n: 3, radius: 2.0 },
    ] {
        let im = shape.immersion();
        let n = im.dim();
        let pts = shape.sample_points(15, 11);
        let angle: f64 = 0.7;
        let mut rot = DMatrix::identity(n, n);
        rot[(0, 0)] = angle.cos();
        rot[(0, 1)] = -angle.sin();
        rot[(1, 0)] = angle.sin();
        rot[(1, 1)] = angle.cos();
        // v = Rᵀ(u − c) maps back to u = c + R v
        let mut c = DVector::from_vec(pts[0].clone());
        c[0] += 0.01;
        let moved = im.reparametrized(rot.clone(), c.clone());
        let vpts: Vec<Vec<f64>> = pts
            .iter()
            .map(|u| {
                (rot.transpose() * (DVector::from_vec(u.clone()) - &c))
                    .iter()
                    .copied()
                    .collect()
            })
            .collect();
        let a = verify_inequality(&im, &pts, &opts).unwrap();
        let b = verify_inequality(&moved, &vpts, &opts).unwrap();
        for (ta, tb) in a.tuples.iter().zip(&b.tuples) {
            for (ra, rb) in ta.records.iter().zip(&tb.records) {
                assert!((ra.delta - rb.delta).abs() < 1e-8, "{shape:?}");
                assert!((ra.c_h2 - rb.c_h2).abs() < 1e-8, "{shape:?}");
                assert!((ra.slack - rb.slack).abs() < 1e-8, "{shape:?}");
            }
        }
    }
}

#[test]
fn maximum_principle_on_builtin_shapes() {
    let opts = OptimizerOptions {
        restarts: 8,
        ..OptimizerOptions::default()
    };
    for shape in [
        Shape::Sphere { n: 2, radius: 1.0 },
        Shape::Sphere { n: 4, radius: 1.0 },
        Shape::Plane,
        Shape::Cylinder { radius: 2.0 },
        Shape::TorusOfRevolution { major: 3.0, minor: 1.0 },
        Shape::CliffordTorus { r1: 0.6, r2: 0.8 },
    ] {
        let samples = sample_points(&shape.immersion(), &shape.sample_points(10, 4)).unwrap();
        let evals = evaluate_samples(&samples, &opts).unwrap();
        assert!(maximum_principle_failures(&evals).is_empty(), "{shape:?}");
        assert!(InequalityReport::from_evaluations(&evals).holds(), "{shape:?}");
    }
}

#[test]
fn sphere_inclusion_agrees_with_the_criterion() {
    let reg = Registry::builtin();
    let opts = OptimizerOptions::default();
    for n in 2..=4 {
        let s = reg.get(&format!("sphere:{n}")).unwrap();
        let d = delta0_of(s, &Delta0Method::ClosedForm).unwrap();
        assert_eq!(ideality_criterion(s, d).unwrap().outcome, Outcome::IdealCapable);
        let shape = Shape::Sphere { n, radius: 1.0 };
        let samples = sample_points(&shape.immersion(), &shape.sample_points(10, n as u64)).unwrap();
        let evals = evaluate_samples(&samples, &opts).unwrap();
        for e in &evals {
            assert!((e.h2 - e.delta0()).abs() < 1e-9);
            assert!((e.delta0() - d).abs() < 1e-9);
        }
    }
}

use super::*;
use crate::brenier::{brenier_1d, brenier_gaussian, brenier_product, brenier_radial};
use crate::measures::{make_catalog_measure, GaussianMeasure, RadialMeasure, RadialProfile};
use crate::quadrature::{integrate, GaussLegendre, Tolerance};
use crate::spd_geometry::{random_spd, spd_distance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn m(name: &str, p: &[f64]) -> crate::measures::LogConcaveMeasure1D {
    make_catalog_measure(name, p).unwrap()
}

fn ou(n: usize) -> Arc<dyn SmoothTriple> {
    let g = GaussianMeasure::standard(n);
    Arc::new(GaussianTriple::new(brenier_gaussian(g.clone(), g).unwrap()))
}

fn bank(rng: &mut ChaCha8Rng) -> Vec<Arc<dyn SmoothTriple>> {
    let one = |a: (&str, &[f64]), b: (&str, &[f64])| -> Arc<dyn SmoothTriple> {
        Arc::new(OneDTriple::new(brenier_1d(m(a.0, a.1), m(b.0, b.1))).unwrap())
    };
    let cov = random_spd(2, rng);
    vec![
        one(("gaussian", &[0.0, 1.0]), ("logistic", &[0.0, 1.0])),
        one(("gamma", &[2.0, 1.0]), ("beta", &[2.0, 2.0])),
        one(("beta", &[2.0, 3.0]), ("subbotin", &[3.0])),
        Arc::new(
            ProductTriple::new(
                brenier_product(vec![
                    brenier_1d(m("logistic", &[0.0, 1.0]), m("gamma", &[3.0, 1.0])),
                    brenier_1d(m("gaussian", &[0.0, 2.0]), m("beta", &[2.0, 2.0])),
                ])
                .unwrap(),
            )
            .unwrap(),
        ),
        Arc::new(GaussianTriple::new(
            brenier_gaussian(
                GaussianMeasure::standard(2),
                GaussianMeasure::new(vec![1.0, -1.0], cov).unwrap(),
            )
            .unwrap(),
        )),
        Arc::new(RadialTriple::new(
            brenier_radial(
                RadialMeasure::uniform_ball(2, 1.0).unwrap(),
                RadialMeasure::gaussian(2, 1.0).unwrap(),
            )
            .unwrap(),
        )),
        Arc::new(RadialTriple::new(
            brenier_radial(
                RadialMeasure::gaussian(3, 1.0).unwrap(),
                RadialMeasure::new(3, RadialProfile::ExpPower { p: 4.0, scale: 1.0 }).unwrap(),
            )
            .unwrap(),
        )),
        Arc::new(SyntheticTriple::random(2, rng)),
        Arc::new(SyntheticTriple::random(3, rng)),
    ]
}

#[test]
fn quadratic_potential_contractions_vanish() {
    let t = ou(3);
    let c = contracted_tensors(t.as_ref(), &[0.2, -0.4, 1.0]).unwrap();
    assert!(hs_norm(&(&c.inv - DMatrix::identity(3, 3))) < 1e-14);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(c.up1.get(i, j, k), 0.0);
                assert_eq!(c.up2.get(i, j, k), 0.0);
                assert_eq!(c.up3.get(i, j, k), 0.0);
            }
        }
    }
}

#[test]
fn one_dimensional_contractions() {
    let (a, b) = (2.5, -0.7);
    let mut third = Tensor3::zeros(1);
    third.set(0, 0, 0, b);
    let c = contract(&DMatrix::from_element(1, 1, a), &third).unwrap();
    assert!((c.up1.get(0, 0, 0) - b / a).abs() < 1e-15);
    assert!((c.up2.get(0, 0, 0) - b / (a * a)).abs() < 1e-15);
    assert!((c.up3.get(0, 0, 0) - b / (a * a * a)).abs() < 1e-15);
}

#[test]
fn contraction_order_independence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=3 {
        let t = SyntheticTriple::random(n, &mut rng);
        let x = t.sample_point(&mut rng);
        let c = contracted_tensors(&t, &x).unwrap();
        // Φ^{ij}_k = Φ^{iℓ}Φ^j_{kℓ}.
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let alt: f64 = (0..n).map(|l| c.inv[(i, l)] * c.up1.get(j, k, l)).sum();
                    assert!((alt - c.up2.get(i, j, k)).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn ill_conditioned_hessian_is_refused() {
    let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-13]));
    assert!(matches!(
        contract(&h, &Tensor3::zeros(2)),
        Err(Error::IllConditioned { .. })
    ));
}

#[test]
fn l_of_phi_partial_is_minus_v_partial() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for t in bank(&mut rng) {
        for _ in 0..20 {
            let x = t.sample_point(&mut rng);
            for k in 0..t.dim() {
                let u = PhiDirectional::coordinate(t.clone(), k).unwrap();
                let l = operator_l(t.as_ref(), &u, &x).unwrap();
                let vk = t.jet(&x).unwrap().v_grad[k];
                assert!(
                    (l.w_form + vk).abs() <= 1e-8 * (1.0 + vk.abs()),
                    "{}: {} vs {}",
                    t.label(),
                    l.w_form,
                    -vk
                );
                assert!((l.v_form + vk).abs() <= 1e-8 * (1.0 + vk.abs()));
            }
        }
    }
}

#[test]
fn transport_derivative_identity_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in bank(&mut rng) {
        for _ in 0..50 {
            let x = t.sample_point(&mut rng);
            let r = transport_derivative_residual(t.as_ref(), &x).unwrap();
            let j = t.jet(&x).unwrap();
            let scale = 1.0 + crate::linalg::norm(&j.v_grad);
            assert!(
                crate::linalg::norm(&r) <= 1e-8 * scale,
                "{}: {r:?}",
                t.label()
            );
        }
    }
}

#[test]
fn ornstein_uhlenbeck_reductions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = ou(3);
    let u = CubicTest::random(3, &mut rng);
    let x = [0.3, -1.2, 0.8];
    let uj = u.jet(&x).unwrap();
    let lap = uj.hess.trace() - crate::linalg::dot(&x, &uj.grad);
    assert!((operator_l(t.as_ref(), &u, &x).unwrap().w_form - lap).abs() < 1e-12);
    let expect = hs_norm(&uj.hess).powi(2) + crate::linalg::dot(&uj.grad, &uj.grad);
    assert!((gamma2_expanded(t.as_ref(), &u, &x).unwrap() - expect).abs() < 1e-12);
    let ric = ricci_tensor(t.as_ref(), &x).unwrap();
    assert!(hs_norm(&(ric - DMatrix::identity(3, 3))) < 1e-14);
    assert_eq!(gamma2_lower_bound(t.as_ref(), &u, &x).unwrap(), 0.0);
    assert!(bochner_residual(t.as_ref(), &u, &x).unwrap().abs() < 1e-10);
    let lin = CubicTest::linear(&[1.0, 2.0, -0.5]);
    assert!(bmatrix_certificate(t.as_ref(), &lin, &x).unwrap().abs() < 1e-24);
    assert!(hs_norm(&pullback_metric(t.as_ref(), &x).unwrap().contraction) == 0.0);
}

#[test]
fn integration_by_parts_one_dimension() {
    let t = OneDTriple::new(brenier_1d(
        m("gaussian", &[0.0, 1.0]),
        m("logistic", &[0.0, 1.0]),
    ))
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = CubicTest::random(1, &mut rng);
    let v = |x: f64| (1.0 - x * x).powi(4);
    let dv = |x: f64| -8.0 * x * (1.0 - x * x).powi(3);
    let tol = Tolerance {
        abs: 1e-12,
        rel: 1e-10,
        max_segments: 2000,
    };
    let lhs = integrate(
        |x| {
            let l = operator_l(&t, &u, &[x]).unwrap().w_form;
            l * v(x) * (-t.source_potential(&[x])).exp()
        },
        -1.0,
        1.0,
        tol,
    )
    .unwrap();
    let rhs = integrate(
        |x| {
            let p = Gamma2Point::new(&t, &u, &[x]).unwrap();
            p.xi[0] * dv(x) * (-t.source_potential(&[x])).exp()
        },
        -1.0,
        1.0,
        tol,
    )
    .unwrap();
    assert!((lhs + rhs).abs() < 1e-4, "{lhs} vs {}", -rhs);
}

#[test]
fn integration_by_parts_two_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = SyntheticTriple::random(2, &mut rng);
    let u = CubicTest::random(2, &mut rng);
    let r = 0.9;
    let bump = |s: f64| (1.0 - (s / r).powi(2)).powi(4);
    let dbump = |s: f64| -8.0 * s / (r * r) * (1.0 - (s / r).powi(2)).powi(3);
    let nodes = GaussLegendre::new(60).mapped(-r, r);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (x0, w0) in &nodes {
        for (x1, w1) in &nodes {
            let x = [*x0, *x1];
            let dens = (-t.source_potential(&x)).exp();
            let p = Gamma2Point::new(&t, &u, &x).unwrap();
            let v = bump(*x0) * bump(*x1);
            let dv = [dbump(*x0) * bump(*x1), bump(*x0) * dbump(*x1)];
            lhs += w0 * w1 * p.operator_l().unwrap().w_form * v * dens;
            rhs += w0 * w1 * (p.xi[0] * dv[0] + p.xi[1] * dv[1]) * dens;
        }
    }
    assert!((lhs + rhs).abs() < 1e-4, "{lhs} vs {}", -rhs);
}

#[test]
fn expansion_matches_direct_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for t in bank(&mut rng) {
        for _ in 0..5 {
            let x = t.sample_point(&mut rng);
            let u = CubicTest::random(t.dim(), &mut rng);
            let p = Gamma2Point::new(t.as_ref(), &u, &x).unwrap();
            let direct = gamma2_direct_fd(t.as_ref(), &u, &x).unwrap();
            assert!(
                (p.gamma2_expanded() - direct).abs() <= 1e-4 * p.magnitude(),
                "{}: {} vs {direct}",
                t.label(),
                p.gamma2_expanded()
            );
        }
    }
}

#[test]
fn phi_partial_matches_differentiated_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for t in bank(&mut rng) {
        for _ in 0..5 {
            let x = t.sample_point(&mut rng);
            for k in 0..t.dim() {
                let u = PhiDirectional::coordinate(t.clone(), k).unwrap();
                let p = Gamma2Point::new(t.as_ref(), &u, &x).unwrap();
                let via_l = gamma2_phi_partial_via_l(t.as_ref(), k, &x).unwrap();
                assert!(
                    (p.gamma2_expanded() - via_l).abs() <= 1e-6 * p.magnitude(),
                    "{} {x:?}: {} vs {via_l}",
                    t.label(),
                    p.gamma2_expanded()
                );
                // ‖D²_M Φ_k‖² = ¼Φ^j_{ki}Φ^i_{kj}.
                let n = t.dim();
                let mut q = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        q += p.c.up1.get(j, k, i) * p.c.up1.get(i, k, j);
                    }
                }
                assert!((p.riemannian_hessian_norm2() - 0.25 * q).abs() <= 1e-9 * (1.0 + q.abs()));
            }
        }
    }
}

#[test]
fn lower_bound_one_dimension() {
    let t = OneDTriple::new(brenier_1d(
        m("gamma", &[2.0, 1.0]),
        m("logistic", &[0.0, 1.0]),
    ))
    .unwrap();
    let u = CubicTest {
        c0: 0.0,
        a: vec![1.3],
        b: DMatrix::from_element(1, 1, 0.4),
        c: Tensor3::zeros(1),
    };
    let x = [1.7];
    let j = t.jet(&x).unwrap();
    let (a, b) = (j.hess_phi[(0, 0)], j.third_phi.get(0, 0, 0));
    let u1 = u.jet(&x).unwrap().grad[0];
    let expect = 0.25 * b * b / a.powi(4) * u1 * u1;
    let lb = gamma2_lower_bound(&t, &u, &x).unwrap();
    assert!((lb - expect).abs() <= 1e-12 * expect.abs().max(1.0));
}

#[test]
fn randomized_inequalities_and_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for t in bank(&mut rng) {
        for _ in 0..100 {
            let x = t.sample_point(&mut rng);
            let u = CubicTest::random(t.dim(), &mut rng);
            let p = Gamma2Point::new(t.as_ref(), &u, &x).unwrap();
            let scale = p.magnitude();
            let cert = p.bmatrix_certificate();
            assert!(cert >= 0.0);
            assert!(
                (cert - p.trace_square_lhs()).abs() <= 1e-9 * scale,
                "{}",
                t.label()
            );
            assert!(p.bochner_residual().abs() <= 1e-6 * scale);
            let convex = crate::linalg::sym_eigen(&p.jet.v_hess)
                .values
                .last()
                .copied()
                .unwrap()
                >= 0.0
                && crate::linalg::sym_eigen(&p.jet.w_hess)
                    .values
                    .last()
                    .copied()
                    .unwrap()
                    >= 0.0;
            if convex {
                assert!(p.gamma2_expanded() - p.lower_bound() >= -1e-9 * scale);
                let ric = crate::linalg::sym_eigen(&p.ricci()).values;
                assert!(*ric.last().unwrap() >= -1e-9);
            }
        }
    }
}

#[test]
fn pullback_metric_forms_and_fd_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for t in bank(&mut rng) {
        for _ in 0..10 {
            let x = t.sample_point(&mut rng);
            let g = pullback_metric(t.as_ref(), &x).unwrap();
            let scale = 1.0 + hs_norm(&g.contraction);
            assert!(g.discrepancy() <= 1e-9 * scale);
            assert!(
                *crate::linalg::sym_eigen(&g.contraction)
                    .values
                    .last()
                    .unwrap()
                    >= -1e-10 * scale
            );
            let eps = 1e-4;
            // Centered increment so the first-order bias cancels.
            for i in 0..t.dim() {
                let mut xe = x.clone();
                let mut xw = x.clone();
                xe[i] += eps / 2.0;
                xw[i] -= eps / 2.0;
                let h0 = SpdMatrix::new(symmetrize(&t.jet(&xw).unwrap().hess_phi)).unwrap();
                let h1 = SpdMatrix::new(symmetrize(&t.jet(&xe).unwrap().hess_phi)).unwrap();
                let d = spd_distance(&h1, &h0).unwrap();
                assert!(
                    (d * d / (eps * eps) - g.contraction[(i, i)]).abs() <= 1e-3 * scale,
                    "{} {x:?}: {} vs {}",
                    t.label(),
                    d * d / (eps * eps),
                    g.contraction[(i, i)]
                );
            }
            let e: Vec<f64> = (0..t.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (dl, bound) = lambda_differential(t.as_ref(), &x, &e).unwrap();
            assert!(dl <= bound + 1e-6, "{}: {dl} > {bound}", t.label());
        }
    }
    let t = OneDTriple::new(brenier_1d(
        m("uniform", &[0.0, 1.0]),
        m("gaussian", &[0.0, 1.0]),
    ))
    .unwrap();
    let j = t.jet(&[0.3]).unwrap();
    let g = pullback_metric(&t, &[0.3]).unwrap().contraction[(0, 0)];
    assert!((g - (j.third_phi.get(0, 0, 0) / j.hess_phi[(0, 0)]).powi(2)).abs() < 1e-12);
}

#[test]
fn ricci_first_summand_is_quarter_pullback() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in bank(&mut rng) {
        let x = t.sample_point(&mut rng);
        let j = t.jet(&x).unwrap();
        let ric = ricci_tensor(t.as_ref(), &x).unwrap();
        let first = ric - &j.v_hess * 0.5 - &j.hess_phi * &j.w_hess * &j.hess_phi * 0.5;
        let g = pullback_metric(t.as_ref(), &x).unwrap().trace_form;
        assert!(hs_norm(&(first - g * 0.25)) <= 1e-10 * (1.0 + hs_norm(&j.v_hess)));
    }
}

#[test]
fn synthetic_potential_gradient_matches_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let t = SyntheticTriple::random(3, &mut rng);
    let x = t.sample_point(&mut rng);
    let j = t.jet(&x).unwrap();
    for k in 0..3 {
        let h = 1e-5;
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let fd = (t.source_potential(&xp) - t.source_potential(&xm)) / (2.0 * h);
        assert!((fd - j.v_grad[k]).abs() < 1e-7);
        let jp = t.jet(&xp).unwrap();
        let jm = t.jet(&xm).unwrap();
        for i in 0..3 {
            let fd2 = (jp.v_grad[i] - jm.v_grad[i]) / (2.0 * h);
            assert!((fd2 - j.v_hess[(i, k)]).abs() < 1e-6);
        }
        let fdphi = (t.phi(&xp) - t.phi(&xm)) / (2.0 * h);
        assert!((fdphi - j.grad_phi[k]).abs() < 1e-8);
    }
}

#[test]
fn finite_difference_triple_agrees_with_analytic() {
    let mu = m("gamma", &[3.0, 1.0]);
    let nu = m("logistic", &[0.0, 1.0]);
    let exact = OneDTriple::new(brenier_1d(mu.clone(), nu.clone())).unwrap();
    let fd = FdTriple::new(Box::new(brenier_1d(mu, nu)));
    assert_eq!(fd.provenance(), Provenance::FiniteDifference);
    for x in [1.5, 2.5, 4.0] {
        let a = exact.jet(&[x]).unwrap();
        let b = fd.jet(&[x]).unwrap();
        assert!((a.third_phi.get(0, 0, 0) - b.third_phi.get(0, 0, 0)).abs() < 1e-7);
        assert!((a.v_hess[(0, 0)] - b.v_hess[(0, 0)]).abs() < 1e-7);
        assert!((a.w_hess[(0, 0)] - b.w_hess[(0, 0)]).abs() < 1e-6);
        let r = transport_derivative_residual(&fd, &[x]).unwrap();
        assert!(r[0].abs() < 1e-6);
    }
    let radial = FdTriple::new(Box::new(
        brenier_radial(
            RadialMeasure::uniform_ball(2, 1.0).unwrap(),
            RadialMeasure::gaussian(2, 1.0).unwrap(),
        )
        .unwrap(),
    ));
    let exact = RadialTriple::new(
        brenier_radial(
            RadialMeasure::uniform_ball(2, 1.0).unwrap(),
            RadialMeasure::gaussian(2, 1.0).unwrap(),
        )
        .unwrap(),
    );
    let x = [0.3, 0.2];
    let (a, b) = (exact.jet(&x).unwrap(), radial.jet(&x).unwrap());
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                assert!((a.third_phi.get(i, j, k) - b.third_phi.get(i, j, k)).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn test_function_derivatives_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let u = CubicTest::random(3, &mut rng);
    let x = [0.1, 0.2, -0.3];
    let j = u.jet(&x).unwrap();
    assert!(crate::linalg::asymmetry(&j.hess) < 1e-12);
    assert!(u.third(&x).unwrap().unwrap().symmetry_defect() < 1e-12);
    let h = 1e-6;
    for k in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[k] += h;
        xm[k] -= h;
        let fd = (u.jet(&xp).unwrap().value - u.jet(&xm).unwrap().value) / (2.0 * h);
        assert!((fd - j.grad[k]).abs() < 1e-8);
    }
}

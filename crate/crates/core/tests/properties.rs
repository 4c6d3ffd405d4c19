use std::sync::Arc;

use manifold_newton::experiment::{case_points, scalar_problem, RuleSpec};
use manifold_newton::geneq::{
    build_constrained_karcher, differential_matrix, product_dist, reduce_vector_field, residual, FieldInclusion,
    GradientField, ProductPoint, SquaredDistanceSum,
};
use manifold_newton::linalg::{expm, inv_sym};
use manifold_newton::manifold::{
    dist, exp_map, frame_at, log_map, parallel_transport, Chart, FrameField, ManifoldPoint, TangentVector,
};
use manifold_newton::mreglab::{phi_eval, preimage_witness, sample_ball, MapVariant};
use manifold_newton::newton::{read_history_csv, solve, write_history_csv, InexactnessRule, StopCriteria};
use manifold_newton::subsolvers::{solve_kkt_step, StepRequest, StepVariant};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sphere_point() -> impl Strategy<Value = ManifoldPoint> {
    prop::array::uniform4(-1.0..1.0f64)
        .prop_filter("away from the origin", |c| c.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|c| ManifoldPoint::sphere_normalized(&c).unwrap())
}

/// `exp` of a random symmetric matrix with moderate spectrum.
fn spd_point(n: usize) -> impl Strategy<Value = ManifoldPoint> {
    prop::collection::vec(-0.8..0.8f64, n * n).prop_map(move |g| {
        let g = DMatrix::from_vec(n, n, g);
        ManifoldPoint::spd(expm(&(&g + g.transpose()))).unwrap()
    })
}

fn any_point() -> impl Strategy<Value = ManifoldPoint> {
    prop_oneof![sphere_point(), spd_point(2), spd_point(3)]
}

/// A tangent vector at `p` of norm `len`, built from raw ambient entries.
fn tangent(p: &ManifoldPoint, raw: &[f64], len: f64) -> TangentVector {
    let (r, c) = p.chart().coord_shape();
    let ambient = DMatrix::from_fn(r, c, |i, j| raw[i * c + j]);
    let v = match p.chart() {
        Chart::Spd(_) => {
            let s = (&ambient + ambient.transpose()) * 0.5;
            TangentVector::new(p.clone(), p.coords() * s * p.coords()).unwrap()
        }
        _ => TangentVector::project(p.clone(), ambient).unwrap(),
    };
    let norm = v.norm();
    if norm < 1e-9 {
        TangentVector::zero(p.clone())
    } else {
        v.scale(len / norm)
    }
}

fn point_and_tangents() -> impl Strategy<Value = (ManifoldPoint, Vec<f64>, Vec<f64>, f64, f64)> {
    (
        any_point(),
        prop::collection::vec(-1.0..1.0f64, 16),
        prop::collection::vec(-1.0..1.0f64, 16),
        0.0..2.8f64,
        0.0..2.8f64,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exp_log_round_trip((p, a, _, len, _) in point_and_tangents()) {
        let v = tangent(&p, &a, len);
        let q = exp_map(&p, &v).unwrap();
        prop_assert!((log_map(&p, &q).unwrap().components() - v.components()).amax() <= 1e-9);
        prop_assert!((dist(&p, &q).unwrap() - v.norm()).abs() <= 1e-10);
    }

    #[test]
    fn distance_is_a_metric((p, a, b, la, lb) in point_and_tangents()) {
        let q = exp_map(&p, &tangent(&p, &a, la)).unwrap();
        let r = exp_map(&p, &tangent(&p, &b, lb)).unwrap();
        let (pq, qr, pr) = (dist(&p, &q).unwrap(), dist(&q, &r).unwrap(), dist(&p, &r).unwrap());
        prop_assert!((pq - dist(&q, &p).unwrap()).abs() <= 1e-12);
        prop_assert!(pr <= pq + qr + 1e-12);
        prop_assert!(dist(&p, &p).unwrap() <= 1e-12);
    }

    #[test]
    fn transport_preserves_inner_products((p, a, b, la, lb) in point_and_tangents(), t in 0.0..2.5f64) {
        let u = tangent(&p, &a, la);
        let v = tangent(&p, &b, lb);
        let q = exp_map(&p, &tangent(&p, &b, t)).unwrap();
        let pu = parallel_transport(&p, &q, &u).unwrap();
        let pv = parallel_transport(&p, &q, &v).unwrap();
        prop_assert!((pu.inner(&pv).unwrap() - u.inner(&v).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn spd_metric_trace_matches_eigenbasis(p in spd_point(3), a in prop::collection::vec(-1.0..1.0f64, 9), b in prop::collection::vec(-1.0..1.0f64, 9)) {
        let u = tangent(&p, &a, 1.0);
        let v = tangent(&p, &b, 1.5);
        let pinv = inv_sym(p.coords());
        let direct = (v.components() * &pinv * u.components() * &pinv).trace();
        // with p = Q Λ Qᵀ the metric is Σ ṽ_ij ũ_ij / (λ_i λ_j)
        let eig = SymmetricEigen::new(p.coords().clone());
        let (q, l) = (&eig.eigenvectors, &eig.eigenvalues);
        let (vt, ut) = (q.transpose() * v.components() * q, q.transpose() * u.components() * q);
        let mut spectral = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                spectral += vt[(i, j)] * ut[(i, j)] / (l[i] * l[j]);
            }
        }
        prop_assert!((direct - spectral).abs() <= 1e-10);
        prop_assert!((u.inner(&v).unwrap() - direct).abs() <= 1e-10);
    }

    #[test]
    fn witness_lies_in_the_preimage(q in spd_point(3), x in -2.0..2.0f64, variant in prop::sample::select(MapVariant::ALL.to_vec())) {
        let target = match variant {
            MapVariant::InvTr | MapVariant::InvTrSetValued => x.exp(),
            _ => x,
        };
        let w = preimage_witness(variant, target, &q).unwrap();
        prop_assert!(phi_eval(variant, &w).unwrap().contains(target, 1e-10));
    }

    #[test]
    fn ball_around_identity_has_banded_spectrum(seed in any::<u64>(), a in 0.05..2.0f64, n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id = ManifoldPoint::spd_scaled_identity(n, 1.0).unwrap();
        let p = sample_ball(&id, a, &mut rng).unwrap();
        prop_assert!(dist(&id, &p).unwrap() < a + 1e-12);
        for l in SymmetricEigen::new(p.coords().clone()).eigenvalues.iter() {
            prop_assert!(*l > (-a).exp() * (1.0 - 1e-12) && *l < a.exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn karcher_residual_is_nonnegative(p in sphere_point(), mu in 0.0..10.0f64, seed in 0u64..50) {
        let points = case_points(6, seed).unwrap();
        let problem = build_constrained_karcher(&points, &points[0], 0.3).unwrap();
        let r = residual(&problem, &ProductPoint::new(p, vec![mu])).unwrap();
        prop_assert!(r >= 0.0 && r.is_finite());
    }

    #[test]
    fn karcher_differential_matches_finite_differences(p in sphere_point(), mu in 0.0..5.0f64) {
        let points = case_points(6, 3).unwrap();
        let problem = build_constrained_karcher(&points, &points[1], 0.4).unwrap();
        let x = ProductPoint::new(p.clone(), vec![mu]);
        let j = differential_matrix(&problem, &x).unwrap();
        let h = 1e-6;
        for (col, e) in frame_at(&problem.frame, &p).unwrap().iter().enumerate() {
            let at = |t: f64| problem.value(&ProductPoint::new(exp_map(&p, &e.scale(t)).unwrap(), vec![mu])).unwrap();
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let scale = 1.0 + fd.amax();
            prop_assert!((j.column(col) - fd).amax() <= 1e-6 * scale);
        }
    }

    #[test]
    fn kkt_steps_are_complementary(entries in prop::collection::vec(-3.0..3.0f64, 9), c in prop::collection::vec(-3.0..3.0f64, 3), mu in 0.0..4.0f64) {
        let req = StepRequest {
            jacobian: DMatrix::from_vec(3, 3, entries),
            value: DVector::from_vec(c),
            target: DVector::zeros(3),
            variant: StepVariant::Kkt { multipliers: vec![mu], slots: 2..3 },
        };
        let step = solve_kkt_step(&req).unwrap();
        let (next_mu, z) = (mu + step.nu[0], step.z[2]);
        prop_assert!(next_mu >= -1e-12 && z >= 0.0);
        prop_assert!((next_mu * z).abs() <= 1e-12);
        prop_assert!(step.z.rows(0, 2).amax() == 0.0);
    }

    #[test]
    fn history_csv_round_trips(start in 0.8..3.0f64, c in 0.01..1.0f64, rho in 0.05..0.6f64) {
        let rule = InexactnessRule::FixedDecay { c, rho };
        let report = solve(&scalar_problem(), ProductPoint::plain(ManifoldPoint::euclid(&[start])), &rule, &StopCriteria::default()).unwrap();
        let mut buf = Vec::new();
        write_history_csv(&report.history, &mut buf).unwrap();
        let rows = read_history_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(rows.len(), report.history.len());
        for (row, rec) in rows.iter().zip(&report.history) {
            prop_assert_eq!(row[1], rec.norm_phi);
            prop_assert_eq!(row[6], rec.u_norm);
            prop_assert_eq!(row[7], rec.dist_to_final);
        }
    }

    #[test]
    fn recorded_residual_targets_respect_their_rule(
        start in 1.1..2.5f64,
        spec in prop_oneof![
            Just(RuleSpec::Exact),
            (0.01..1.0f64, 0.05..0.9f64).prop_map(|(c, rho)| RuleSpec::FixedDecay { c, rho }),
            (0.0..0.5f64, any::<bool>()).prop_map(|(eta, extreme)| RuleSpec::RelativeBall { eta, extreme }),
            (0.01..0.5f64).prop_map(|iota| RuleSpec::ProximityLinear { iota }),
            (0.01..0.5f64).prop_map(|iota| RuleSpec::ProximityQuadratic { iota }),
        ],
    ) {
        let problem = scalar_problem();
        let rule = spec.build(problem.solution.as_ref()).unwrap();
        let report = solve(&problem, ProductPoint::plain(ManifoldPoint::euclid(&[start])), &rule, &StopCriteria::default()).unwrap();
        let steps = report.history.len().saturating_sub(1);
        for rec in &report.history[..steps] {
            let norm_f = problem.value(&rec.point).unwrap().norm();
            let (bound, strict) = rule.bound(rec.k, 1, norm_f, rec.dist_to_reference);
            if strict {
                prop_assert!(rec.u_norm < bound || (bound == 0.0 && rec.u_norm == 0.0));
            } else {
                prop_assert!(rec.u_norm <= bound * (1.0 + 1e-15));
            }
        }
        // the certificate distances use the same product metric: triangle inequality on consecutive triples
        for w in report.history.windows(3) {
            let d = |a: &ProductPoint, b: &ProductPoint| product_dist(a, b).unwrap();
            prop_assert!(d(&w[0].point, &w[2].point) <= d(&w[0].point, &w[1].point) + d(&w[1].point, &w[2].point) + 1e-12);
        }
    }

    #[test]
    fn rule_syntax_round_trips(c in 0.01..10.0f64, rho in 0.01..0.99f64, extreme in any::<bool>()) {
        for spec in [RuleSpec::FixedDecay { c, rho }, RuleSpec::RelativeBall { eta: rho, extreme }, RuleSpec::ProximityLinear { iota: c }] {
            let parsed: RuleSpec = spec.to_string().parse().unwrap();
            prop_assert_eq!(parsed, spec);
        }
    }

    #[test]
    fn reduced_residual_vanishes_exactly_at_singular_points(p in sphere_point(), a in prop::collection::vec(-1.0..1.0f64, 4), len in 1e-3..2.5f64) {
        // V = grad d²(·, p) vanishes only at p on the ball d < π, and ‖V(q)‖ = 2 d(q, p)
        let field = GradientField(Arc::new(SquaredDistanceSum::mean_of(vec![p.clone()]).unwrap()));
        let problem = reduce_vector_field(Arc::new(field), FieldInclusion::Zero, FrameField::s3()).unwrap();
        prop_assert!(residual(&problem, &ProductPoint::plain(p.clone())).unwrap() <= 1e-10);
        let q = exp_map(&p, &tangent(&p, &a, len)).unwrap();
        let r = residual(&problem, &ProductPoint::plain(q.clone())).unwrap();
        prop_assert!(r > 1e-10);
        prop_assert!((r - 2.0 * dist(&q, &p).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn witness_is_no_farther_than_scaled_preimages(q in spd_point(2), x in -1.5..1.5f64) {
        // brute force over a log grid of rescalings t·q, keeping those that land on x up to
        // grid resolution
        let w = preimage_witness(MapVariant::LnTr, x, &q).unwrap();
        let dw = dist(&q, &w).unwrap();
        let t_exact = (x - q.coords().trace().ln()).exp();
        let grid_best = (-400..=400)
            .map(|i| t_exact * (i as f64 * 1e-3).exp())
            .filter(|t| ((q.coords() * *t).trace().ln() - x).abs() <= 1e-3)
            .map(|t| dist(&q, &ManifoldPoint::spd(q.coords() * t).unwrap()).unwrap())
            .fold(f64::INFINITY, f64::min);
        prop_assert!(dw <= grid_best + 2e-3);
    }

}

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stablepose::cluster::{assign_type, mean_shift_orientations};
use stablepose::losses::{chamfer_geodesic_loss, refine_loss, DisplacementField, OrientationSet, RefineLossWeights};
use stablepose::meshgeo::{apply_refinement_transform, convex_hull_points, plane_from_contacts, PlaneVector, PointCloud};
use stablepose::metrics::diversity_score;
use stablepose::rotgeo::{
    geodesic_distance, rotation_from_sixd, sixd_from_rotation, z_quotient_distance, PolyCoeffs, Rotation3, Vec3,
};

fn rotation() -> impl Strategy<Value = Rotation3> {
    any::<u64>().prop_map(|s| Rotation3::random(&mut ChaCha8Rng::seed_from_u64(s)))
}

fn vec3(scale: f64) -> impl Strategy<Value = Vec3> {
    (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn geodesic_is_a_metric(a in rotation(), b in rotation(), c in rotation()) {
        let ab = geodesic_distance(&a, &b);
        prop_assert!((ab - geodesic_distance(&b, &a)).abs() < 1e-12);
        prop_assert!((0.0..=std::f64::consts::PI).contains(&ab));
        prop_assert!(ab <= geodesic_distance(&a, &c) + geodesic_distance(&c, &b) + 1e-9);
        prop_assert!(geodesic_distance(&a, &a) < 1e-7);
    }

    #[test]
    fn sixd_round_trip(r in rotation()) {
        let back = rotation_from_sixd(&sixd_from_rotation(&r)).unwrap();
        prop_assert!((back.matrix() - r.matrix()).abs().max() < 1e-9);
    }

    #[test]
    fn quotient_distance_ignores_world_yaw(a in rotation(), b in rotation(), t1 in -4.0..4.0f64, t2 in -4.0..4.0f64) {
        let d = z_quotient_distance(&a, &b);
        let dy = z_quotient_distance(&(Rotation3::rot_z(t1) * a), &(Rotation3::rot_z(t2) * b));
        prop_assert!((d - dy).abs() < 1e-9);
        prop_assert!(d <= geodesic_distance(&a, &b) + 1e-12);
    }

    #[test]
    fn plane_is_permutation_invariant(p1 in vec3(2.0), p2 in vec3(2.0), p3 in vec3(2.0)) {
        prop_assume!((p2 - p1).cross(&(p3 - p1)).norm() > 1e-3);
        if let Ok(v) = plane_from_contacts(&p1, &p2, &p3) {
            for perm in [[&p2, &p3, &p1], [&p3, &p1, &p2], [&p2, &p1, &p3], [&p1, &p3, &p2], [&p3, &p2, &p1]] {
                let w = plane_from_contacts(perm[0], perm[1], perm[2]).unwrap();
                prop_assert!((v.vector() - w.vector()).norm() < 1e-12);
            }
            for p in [p1, p2, p3] {
                prop_assert!(v.residual(&p).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn refinement_is_rigid_and_lands_on_the_plane(v in vec3(2.0), pts in prop::collection::vec(vec3(3.0), 2..20)) {
        prop_assume!(v.norm() > 0.05);
        let plane = PlaneVector::new(v).unwrap();
        // push the first point onto the plane
        let mut pts = pts;
        let n = v.normalize();
        let off = plane.residual(&pts[0]) / v.norm();
        pts[0] -= n * off;
        let out = apply_refinement_transform(&PointCloud::new(pts.clone()).unwrap(), &plane);
        prop_assert!(out.points()[0].z.abs() < 1e-9);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let d0 = (pts[i] - pts[j]).norm();
                let d1 = (out.points()[i] - out.points()[j]).norm();
                prop_assert!((d0 - d1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn chamfer_is_permutation_invariant(rots in prop::collection::vec(rotation(), 2..6), truth in prop::collection::vec(rotation(), 1..6)) {
        let c = PolyCoeffs::default_fit();
        let g = OrientationSet::new(rots.clone()).unwrap();
        let t = OrientationSet::new(truth.clone()).unwrap();
        let (v, _) = chamfer_geodesic_loss(&g, &t, c);
        let mut rev = rots.clone();
        rev.reverse();
        let mut trev = truth.clone();
        trev.rotate_left(1);
        let (w, _) = chamfer_geodesic_loss(&OrientationSet::new(rev).unwrap(), &OrientationSet::new(trev).unwrap(), c);
        prop_assert!((v - w).abs() < 1e-9);
        let (s, _) = chamfer_geodesic_loss(&g, &g, c);
        prop_assert!(s <= 2.0 * rots.len() as f64 * c.max_fit_error(10_001) + 1e-12);
    }

    #[test]
    fn refine_loss_row_permutation(pts in prop::collection::vec(vec3(1.0), 1..10), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let disp: Vec<Vec3> = pts.iter().map(|_| Rotation3::random(&mut rng) * Vec3::x()).collect();
        let target = PlaneVector::new(Vec3::new(0.1, 0.2, 0.7)).unwrap();
        let w = RefineLossWeights::default();
        let (a, _) = refine_loss(&DisplacementField::new(pts.clone(), disp.clone()).unwrap(), &target, &w).unwrap();
        let (mut p2, mut d2) = (pts.clone(), disp.clone());
        p2.reverse();
        d2.reverse();
        let (b, _) = refine_loss(&DisplacementField::new(p2, d2).unwrap(), &target, &w).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn hull_contains_its_input(pts in prop::collection::vec(vec3(1.0), 8..60)) {
        if let Ok(hull) = convex_hull_points(&pts) {
            for f in 0..hull.faces().len() {
                let n = hull.face_normal(f);
                let a = hull.face_corners(f)[0];
                for p in &pts {
                    prop_assert!(n.dot(&(p - a)) <= 1e-9);
                }
            }
            let again = convex_hull_points(hull.vertices()).unwrap();
            prop_assert!((again.volume() - hull.volume()).abs() < 1e-12);
        }
    }

    #[test]
    fn cluster_labels_ignore_yaw_and_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [Rotation3::identity(), Rotation3::rot_x(1.6), Rotation3::rot_y(2.4)];
        let rots: Vec<Rotation3> = (0..30)
            .map(|i| {
                let noise = Rotation3::random(&mut rng);
                let small = Rotation3::from_axis_angle(&(noise * Vec3::x()), 0.05 * (i % 3) as f64).unwrap();
                small * centers[i % 3]
            })
            .collect();
        let bw = 15f64.to_radians();
        let base = mean_shift_orientations(&rots, bw).unwrap();
        let yawed: Vec<Rotation3> = rots
            .iter()
            .map(|r| Rotation3::rot_z(rand::Rng::gen_range(&mut rng, -3.0..3.0)) * *r)
            .collect();
        prop_assert_eq!(&mean_shift_orientations(&yawed, bw).unwrap().labels, &base.labels);

        let mut rev = rots.clone();
        rev.reverse();
        let c = mean_shift_orientations(&rev, bw).unwrap();
        // same partition up to renumbering
        for i in 0..rots.len() {
            for j in 0..rots.len() {
                let same = base.labels[i] == base.labels[j];
                let n = rots.len();
                prop_assert_eq!(same, c.labels[n - 1 - i] == c.labels[n - 1 - j]);
            }
        }
        for (r, &l) in rots.iter().zip(&base.labels) {
            prop_assert_eq!(assign_type(r, &base.model), Some(l));
        }
    }

    #[test]
    fn diversity_is_monotone(n_pred in 0usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = stablepose::cluster::TypeModel {
            bandwidth: 0.26,
            assign_threshold: 0.26,
            modes: vec![Rotation3::identity(), Rotation3::rot_x(1.5), Rotation3::rot_x(-1.5), Rotation3::rot_y(1.5)],
        };
        let mut preds: Vec<Rotation3> = Vec::new();
        let mut last = 0.0;
        for _ in 0..n_pred {
            let k = rand::Rng::gen_range(&mut rng, 0..4);
            let jitter = Rotation3::rot_z(rand::Rng::gen_range(&mut rng, -0.2..0.2));
            preds.push(jitter * model.modes[k]);
            let d = diversity_score(&preds, &model, 0).unwrap();
            prop_assert!(d >= last);
            let mut shuffled = preds.clone();
            shuffled.reverse();
            prop_assert_eq!(diversity_score(&shuffled, &model, 0).unwrap(), d);
            last = d;
        }
    }
}

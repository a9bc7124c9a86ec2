//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stablepose::cluster::{mean_shift_orientations, TypeModel};
use stablepose::losses::{chamfer_geodesic_loss_raw, refine_loss, DisplacementField, RefineLossWeights};
use stablepose::meshgeo::{apply_refinement_transform, shapes, PlaneVector, PointCloud, TriMesh};
use stablepose::metrics::{diversity_score, placement_accuracy, AccuracyThresholds};
use stablepose::placements::{drop_rng, generate_dataset, Placement, StabilityOptions, StableBody, DEFAULT_MAX_TIPS};
use stablepose::regrasp::{
    build_manipulation_graph, grasp_feasible_in_placement, plan_regrasp, sample_antipodal_grasps, GripperSpec,
    ManipulationGraph,
};
use stablepose::rotgeo::{
    geodesic_distance, geodesic_from_trace, poly_geodesic_distance_raw, z_quotient_distance, Mat3, PolyCoeffs,
    Rotation3, Vec3, DEFAULT_FIT_SAMPLES,
};
use stablepose_cli::config::{GripperConfig, PlanRequest, RunConfig};
use stablepose_cli::{cmd_pipeline, with_workers};

type Outcome = (bool, String);

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("polynomial surrogate", polynomial_surrogate),
        ("gradient checks", gradient_checks),
        ("refinement geometry", refinement_geometry),
        ("enumeration/settle equivalence", enumeration_settle_equivalence),
        ("cube and tetrahedron cardinalities", cardinalities),
        ("metrics reproduction", metrics_reproduction),
        ("clustering recovery", clustering_recovery),
        ("regrasp planning", regrasp_planning),
        ("pipeline determinism", pipeline_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| (false, format!("panicked: {}", panic_message(&e))));
        let status = if pass { "PASS" } else { "FAIL" };
        println!("[{status}] {} {name}: {detail} ({:.1}s)", i + 1, start.elapsed().as_secs_f64());
        failed += usize::from(!pass);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn polynomial_surrogate() -> Outcome {
    let c = PolyCoeffs::default_fit();
    let n = DEFAULT_FIT_SAMPLES;
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..n {
        let t = -1.0 + 4.0 * i as f64 / (n - 1) as f64;
        let err = (c.eval(t) - geodesic_from_trace(t)).abs();
        if err > worst.0 {
            worst = (err, t);
        }
    }
    let at_three = c.eval(3.0);
    (
        worst.0 <= 5e-3 && at_three == 0.0,
        format!("max error {:.4e} rad at t = {:.3} (bound 5e-3), f(3) = 0: {}", worst.0, worst.1, at_three == 0.0),
    )
}

/// Largest entrywise difference relative to the larger ∞-norm of the two gradients.
fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().chain(numeric).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max) / scale
}

fn central(f: impl Fn(f64) -> f64) -> f64 {
    const H: f64 = 1e-6;
    (f(H) - f(-H)) / (2.0 * H)
}

fn gradient_checks() -> Outcome {
    const CASES: usize = 100;
    let c = PolyCoeffs::default_fit();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let mut worst_poly = 0.0f64;
    for _ in 0..CASES {
        let rg = *Rotation3::random(&mut rng).matrix();
        let rt = *Rotation3::random(&mut rng).matrix();
        let (_, grad) = poly_geodesic_distance_raw(c, &rg, &rt);
        let (mut a, mut n) = (Vec::new(), Vec::new());
        for i in 0..3 {
            for j in 0..3 {
                a.push(grad[(i, j)]);
                n.push(central(|h| {
                    let mut m = rg;
                    m[(i, j)] += h;
                    poly_geodesic_distance_raw(c, &m, &rt).0
                }));
            }
        }
        worst_poly = worst_poly.max(rel_error(&a, &n));
    }

    let mut worst_chamfer = 0.0f64;
    let mut checked = 0;
    while checked < CASES {
        let g: Vec<Mat3> = (0..3).map(|_| *Rotation3::random(&mut rng).matrix()).collect();
        let t: Vec<Mat3> = (0..5).map(|_| *Rotation3::random(&mut rng).matrix()).collect();
        let d: Vec<Vec<f64>> = g.iter().map(|x| t.iter().map(|y| poly_geodesic_distance_raw(c, x, y).0).collect()).collect();
        let gap = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.get(1).map_or(f64::INFINITY, |s| s - v[0])
        };
        let min_gap = d
            .iter()
            .map(|r| gap(r.clone()))
            .chain((0..t.len()).map(|j| gap(d.iter().map(|r| r[j]).collect())))
            .fold(f64::INFINITY, f64::min);
        if min_gap < 1e-3 {
            continue;
        }
        let (_, grads) = chamfer_geodesic_loss_raw(&g, &t, c).unwrap();
        let (mut a, mut n) = (Vec::new(), Vec::new());
        for (k, gr) in grads.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    a.push(gr[(i, j)]);
                    n.push(central(|h| {
                        let mut probe = g.clone();
                        probe[k][(i, j)] += h;
                        chamfer_geodesic_loss_raw(&probe, &t, c).unwrap().0
                    }));
                }
            }
        }
        worst_chamfer = worst_chamfer.max(rel_error(&a, &n));
        checked += 1;
    }

    let mut worst_refine = 0.0f64;
    let mut checked = 0;
    let rv = |rng: &mut ChaCha8Rng, s: f64| Vec3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s));
    while checked < CASES {
        let m = rng.gen_range(1..10);
        let pts: Vec<Vec3> = (0..m).map(|_| rv(&mut rng, 1.0)).collect();
        let disp: Vec<Vec3> = (0..m).map(|_| rv(&mut rng, 1.5)).collect();
        let target = PlaneVector::new(rv(&mut rng, 1.0) + Vec3::new(0.0, 0.0, 0.3)).unwrap();
        let w = RefineLossWeights::default();
        let kink = pts.iter().zip(&disp).any(|(p, d)| {
            (d - (target.vector() - p)).iter().any(|x| (x.abs() - w.smooth_l1_transition).abs() < 1e-3)
        });
        if kink {
            continue;
        }
        let field = DisplacementField::new(pts.clone(), disp.clone()).unwrap();
        let (_, grads) = refine_loss(&field, &target, &w).unwrap();
        let (mut a, mut n) = (Vec::new(), Vec::new());
        for (i, gr) in grads.iter().enumerate() {
            for k in 0..3 {
                a.push(gr[k]);
                n.push(central(|h| {
                    let mut probe = disp.clone();
                    probe[i][k] += h;
                    refine_loss(&DisplacementField::new(pts.clone(), probe).unwrap(), &target, &w).unwrap().0
                }));
            }
        }
        worst_refine = worst_refine.max(rel_error(&a, &n));
        checked += 1;
    }

    let worst = worst_poly.max(worst_chamfer).max(worst_refine);
    (
        worst <= 1e-4,
        format!(
            "max relative error over {CASES} inputs each: surrogate {worst_poly:.2e}, chamfer {worst_chamfer:.2e}, refine {worst_refine:.2e} (bound 1e-4)"
        ),
    )
}

fn refinement_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut plane_err, mut dist_err) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let v = loop {
            let v = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if v.norm() > 0.05 {
                break v;
            }
        };
        let plane = PlaneVector::new(v).unwrap();
        let n = v.normalize();
        let (u, w) = {
            let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            let u = n.cross(&helper).normalize();
            (u, n.cross(&u))
        };
        let m = rng.gen_range(4..40);
        let mut on_plane = Vec::new();
        let pts: Vec<Vec3> = (0..m)
            .map(|i| {
                if i % 2 == 0 {
                    on_plane.push(i);
                    v + u * rng.gen_range(-1.0..1.0) + w * rng.gen_range(-1.0..1.0)
                } else {
                    Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
                }
            })
            .collect();
        let out = apply_refinement_transform(&PointCloud::new(pts.clone()).unwrap(), &plane);
        for &i in &on_plane {
            plane_err = plane_err.max(out.points()[i].z.abs());
        }
        for i in 0..m {
            for j in i + 1..m {
                dist_err = dist_err.max(((pts[i] - pts[j]).norm() - (out.points()[i] - out.points()[j]).norm()).abs());
            }
        }
    }
    (
        plane_err <= 1e-9 && dist_err <= 1e-9,
        format!("1000 clouds: max |z| of plane points {plane_err:.2e}, max distance change {dist_err:.2e} (bound 1e-9)"),
    )
}

fn fixtures() -> Vec<(&'static str, TriMesh)> {
    vec![
        ("cube", shapes::box_mesh(1.0, 1.0, 1.0)),
        ("tetrahedron", shapes::regular_tetrahedron(1.0)),
        ("long-box", shapes::box_mesh(1.0, 1.0, 10.0)),
        ("l-prism", shapes::l_prism()),
        ("t-prism", shapes::t_prism()),
    ]
}

fn enumeration_settle_equivalence() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, mesh) in fixtures() {
        let body = StableBody::new(&mesh, StabilityOptions::default()).unwrap();
        let enumerated = body.enumerate();
        let mut reached = BTreeSet::new();
        let (mut unmatched, mut unstable, mut energy) = (0, 0, 0);
        for i in 0..500 {
            let initial = Rotation3::random(&mut drop_rng(0, name, i));
            let out = body.settle(&initial, DEFAULT_MAX_TIPS).unwrap();
            unstable += usize::from(!body.check(&out.placement).stable);
            energy += usize::from(out.com_heights.windows(2).any(|w| w[1] > w[0] + 1e-9));
            match enumerated
                .iter()
                .position(|p| z_quotient_distance(&p.rotation, &out.placement.rotation) <= 1f64.to_radians())
            {
                Some(k) => {
                    reached.insert(k);
                }
                None => unmatched += 1,
            }
        }
        let fine = reached.len() == enumerated.len() && unmatched == 0 && unstable == 0 && energy == 0;
        ok &= fine;
        notes.push(format!("{name} {}/{}", reached.len(), enumerated.len()));
        if !fine {
            notes.push(format!("({unmatched} unmatched, {unstable} unstable, {energy} energy rises)"));
        }
    }
    (ok, format!("classes reached by 500 settles: {}", notes.join(", ")))
}

fn mode_count(mesh: TriMesh, seed: u64) -> usize {
    let objects = vec![("object".to_string(), mesh)];
    let (records, _) = generate_dataset(&objects, 200, seed, StabilityOptions::default()).unwrap();
    let rots: Vec<Rotation3> = records.iter().map(|r| r.rotation).collect();
    mean_shift_orientations(&rots, 15f64.to_radians()).unwrap().model.len()
}

fn cardinalities() -> Outcome {
    let cube = shapes::box_mesh(1.0, 1.0, 1.0);
    let placements = StableBody::new(&cube, StabilityOptions::with_margin_eps(1e-6)).unwrap().enumerate();
    let margins_ok = placements.iter().all(|p| (p.stability_margin - 0.5).abs() <= 1e-9);
    let cube_modes = mode_count(cube, 1);
    let tetra = shapes::regular_tetrahedron(1.0);
    let tetra_placements = StableBody::new(&tetra, StabilityOptions::with_margin_eps(1e-6)).unwrap().enumerate().len();
    let tetra_modes = mode_count(tetra, 1);
    (
        placements.len() == 6 && margins_ok && cube_modes == 6 && tetra_placements == 4 && tetra_modes == 4,
        format!(
            "cube {} placements (margins 0.5: {margins_ok}), {cube_modes} modes; tetrahedron {tetra_placements} placements, {tetra_modes} modes",
            placements.len()
        ),
    )
}

fn metrics_reproduction() -> Outcome {
    let t = AccuracyThresholds::default();
    let at = |r: Rotation3, z: f64| Placement {
        rotation: r,
        translation: Vec3::new(0.0, 0.0, z),
        type_id: None,
        stability_margin: 0.5,
        score: 1.0,
    };
    let base = at(Rotation3::identity(), 0.5);
    let deg = |d: f64| Rotation3::rot_x(d.to_radians());
    let cases = [
        (at(deg(10.0), 0.5), true),
        (at(Rotation3::identity(), 0.52), true),
        (at(deg(10.0), 0.52), true),
        (at(deg(10.1), 0.5), false),
        (at(Rotation3::identity(), 0.521), false),
        (at(deg(12.0), 0.5), false),
        (at(Rotation3::identity(), 0.55), false),
    ];
    let accuracy_ok = cases.iter().all(|(after, expect)| placement_accuracy(&base, after, &t) == *expect);

    let model = TypeModel {
        bandwidth: 15f64.to_radians(),
        assign_threshold: 15f64.to_radians(),
        modes: vec![deg(0.0), deg(90.0), deg(180.0), Rotation3::rot_y(PI / 2.0), Rotation3::rot_y(-PI / 2.0)],
    };
    let three_of_four = [model.modes[1], model.modes[2] * deg(3.0), model.modes[3], model.modes[0]];
    let d_075 = diversity_score(&three_of_four, &model, 0).unwrap();
    let d_all = diversity_score(&model.modes, &model, 0).unwrap();
    let d_none = diversity_score(&[], &model, 0).unwrap();
    let degenerate = diversity_score(&[], &TypeModel { modes: vec![deg(0.0)], ..model.clone() }, 0).is_err();
    let diversity_ok = d_075 == 0.75 && d_all == 1.0 && d_none == 0.0 && degenerate;
    (
        accuracy_ok && diversity_ok,
        format!(
            "threshold boundary cases correct: {accuracy_ok}; diversity 3 of 4 = {d_075}, all = {d_all}, none = {d_none}, n < 2 rejected: {degenerate}"
        ),
    )
}

fn clustering_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let centers = [Rotation3::identity(), Rotation3::rot_x(70f64.to_radians()), Rotation3::rot_y(-75f64.to_radians())];
    let min_sep = (0..3)
        .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
        .map(|(i, j)| z_quotient_distance(&centers[i], &centers[j]).to_degrees())
        .fold(f64::INFINITY, f64::min);
    let mut rots = Vec::new();
    let mut truth = Vec::new();
    for k in 0..3 {
        for _ in 0..30 {
            let axis = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
            let noise = Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..5f64.to_radians())).unwrap();
            rots.push(noise * centers[k]);
            truth.push(k);
        }
    }
    let bw = 15f64.to_radians();
    let base = mean_shift_orientations(&rots, bw).unwrap();
    // labels are numbered by first occurrence, as is the ground truth here
    let mislabels = base.labels.iter().zip(&truth).filter(|(a, b)| a != b).count();
    let yawed: Vec<Rotation3> = rots.iter().map(|r| Rotation3::rot_z(rng.gen_range(-PI..PI)) * *r).collect();
    let invariant = mean_shift_orientations(&yawed, bw).unwrap().labels == base.labels;
    (
        base.model.len() == 3 && mislabels == 0 && invariant && min_sep >= 60.0,
        format!(
            "{} modes, {mislabels} mislabels, labels unchanged under per-sample yaw: {invariant} (centers {min_sep:.0} deg apart)",
            base.model.len()
        ),
    )
}

fn blocked_flip() -> (ManipulationGraph, GripperSpec, usize, usize) {
    let cube = shapes::box_mesh(1.0, 1.0, 1.0);
    let gripper = GripperSpec {
        max_width: 1.2,
        finger_length: 1.2,
        finger_thickness: 1.0,
        friction_angle: 0.2,
        plane_clearance: 0.01,
    };
    let placements = StableBody::new(&cube, StabilityOptions::default()).unwrap().enumerate();
    let find = |r: Rotation3| placements.iter().position(|p| geodesic_distance(&p.rotation, &r) < 1e-9).unwrap();
    let (start, goal) = (find(Rotation3::identity()), find(Rotation3::rot_x(PI)));
    let grasps = sample_antipodal_grasps(&cube, 300, &gripper, 5);
    (build_manipulation_graph(&placements, &grasps, &gripper), gripper, start, goal)
}

fn regrasp_planning() -> Outcome {
    let (graph, gripper, start, goal) = blocked_flip();
    let plan = plan_regrasp(&graph, start, goal).unwrap();
    let steps_feasible = plan.steps.iter().all(|s| {
        [s.from_type, s.to_type]
            .iter()
            .all(|&n| grasp_feasible_in_placement(&s.grasp, &graph.placements[n], &gripper))
    });
    let chained = plan.steps.windows(2).all(|w| w[0].to_type == w[1].from_type)
        && plan.steps.first().map(|s| s.from_type) == Some(start)
        && plan.steps.last().map(|s| s.to_type) == Some(goal);
    // exhaustive: no grasp in the whole sample is feasible in both start and goal
    let direct = graph
        .grasps
        .iter()
        .filter(|g| {
            grasp_feasible_in_placement(g, &graph.placements[start], &gripper)
                && grasp_feasible_in_placement(g, &graph.placements[goal], &gripper)
        })
        .count();
    let empty = plan_regrasp(&graph, start, start).unwrap().steps.is_empty();
    (
        plan.steps.len() == 2 && steps_feasible && chained && direct == 0 && empty,
        format!(
            "{} steps over {} grasps, steps feasible at both ends: {steps_feasible}, direct shared grasps: {direct}, start = goal plan empty: {empty}",
            plan.steps.len(),
            graph.grasps.len()
        ),
    )
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn pipeline_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cube.obj"), shapes::box_mesh(1.0, 1.0, 1.0).to_obj_string()).unwrap();
    fs::write(d.join("tnut.obj"), shapes::t_prism().to_obj_string()).unwrap();
    let config = |out: &str| RunConfig {
        meshes: vec![d.join("cube.obj"), d.join("tnut.obj")],
        seed: 11,
        drops_per_object: 300,
        score_threshold: 0.0,
        gripper: GripperConfig {
            max_width_cm: 120.0,
            finger_length_cm: 20.0,
            finger_thickness_cm: 5.0,
            friction_angle_deg: 10.0,
            plane_clearance_cm: 1.0,
        },
        plan: Some(PlanRequest { object: "cube".into(), start: 0, goal: 1 }),
        output_dir: d.join(out),
        dump_poses: true,
        ..Default::default()
    };
    let runs = [("w1-a", 1), ("w1-b", 1), ("w8", 8)];
    for (out, workers) in runs {
        let cfg = config(out);
        with_workers(Some(workers), || cmd_pipeline(&cfg)).unwrap().unwrap();
    }
    let reference = read_dir_sorted(&d.join("w1-a"));
    let same = runs[1..].iter().all(|(out, _)| read_dir_sorted(&d.join(out)) == reference);
    (
        same && reference.len() == 8,
        format!("{} output files byte-identical across two runs and 1 vs 8 workers: {same}", reference.len()),
    )
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stablepose::cluster::{assign_type, mean_shift_orientations, TypeModel};
use stablepose::meshgeo::{load_mesh, TriMesh};
use stablepose::metrics::{evaluate_object, AccuracyThresholds, EvalReport};
use stablepose::placements::{generate_dataset, DatasetReport, Placement, PlacementRecord, StabilityOptions, StableBody};
use stablepose::regrasp::{build_manipulation_graph, plan_regrasp, sample_antipodal_grasps, GripperSpec, Plan};
use stablepose::rotgeo::{fit_geodesic_polynomial, PolyCoeffs, Rotation3, MIN_FIT_SAMPLES};
use stablepose::vec3_array;
use stablepose::Vec3;

use crate::config::{object_id, RunConfig};
use crate::error::{CliError, Result};

pub fn load_objects(paths: &[PathBuf]) -> Result<Vec<(String, TriMesh)>> {
    let mut objects: Vec<(String, TriMesh)> = Vec::with_capacity(paths.len());
    for p in paths {
        let id = object_id(p);
        if objects.iter().any(|(other, _)| *other == id) {
            return Err(CliError::usage(format!("duplicate object id {id:?}")));
        }
        objects.push((id, load_mesh(p)?));
    }
    Ok(objects)
}

pub fn cmd_enumerate(mesh: &Path, options: StabilityOptions) -> Result<Vec<Placement>> {
    let mesh = load_mesh(mesh)?;
    Ok(StableBody::new(&mesh, options)?.enumerate())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettleRecord {
    pub initial: Rotation3,
    pub placement: Placement,
    pub tips: usize,
    pub com_heights: Vec<f64>,
}

pub fn cmd_settle(mesh: &Path, initials: &[Rotation3], max_tips: usize, options: StabilityOptions) -> Result<Vec<SettleRecord>> {
    let mesh = load_mesh(mesh)?;
    let body = StableBody::new(&mesh, options)?;
    initials
        .iter()
        .map(|r| {
            let out = body.settle(r, max_tips)?;
            Ok(SettleRecord { initial: *r, placement: out.placement, tips: out.tips, com_heights: out.com_heights })
        })
        .collect()
}

pub fn cmd_dataset(
    meshes: &[PathBuf],
    drops: usize,
    seed: u64,
    options: StabilityOptions,
) -> Result<(Vec<PlacementRecord>, Vec<DatasetReport>)> {
    if drops == 0 {
        return Err(CliError::usage("drops must be at least 1"));
    }
    let objects = load_objects(meshes)?;
    Ok(generate_dataset(&objects, drops, seed, options)?)
}

/// Clusters each object's records separately and writes the labels back.
pub fn cmd_cluster(
    records: &mut [PlacementRecord],
    bandwidth: f64,
    assign_threshold: f64,
) -> Result<BTreeMap<String, TypeModel>> {
    let mut ids: Vec<String> = records.iter().map(|r| r.object_id.clone()).collect();
    ids.sort();
    ids.dedup();
    let mut models = BTreeMap::new();
    for id in ids {
        let idx: Vec<usize> = (0..records.len()).filter(|&i| records[i].object_id == id).collect();
        let rots: Vec<Rotation3> = idx.iter().map(|&i| records[i].rotation).collect();
        let mut clustering = mean_shift_orientations(&rots, bandwidth)?;
        clustering.model.assign_threshold = assign_threshold;
        for (&i, &label) in idx.iter().zip(&clustering.labels) {
            records[i].type_id = Some(label);
        }
        models.insert(id, clustering.model);
    }
    Ok(models)
}

pub fn label_placements(placements: &mut [Placement], model: &TypeModel) {
    for p in placements {
        p.type_id = assign_type(&p.rotation, model);
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_evaluate(
    object_id: &str,
    mesh: &TriMesh,
    options: StabilityOptions,
    predictions: &[Placement],
    model: &TypeModel,
    thresholds: &AccuracyThresholds,
    initial_type: usize,
    diversity: bool,
) -> Result<EvalReport> {
    let body = StableBody::new(mesh, options)?;
    let obj = evaluate_object(object_id, predictions, &body, model, thresholds, initial_type, diversity)?;
    Ok(EvalReport::from_objects(vec![obj]))
}

/// Type-level plan: one node per type mode, resting at the canonical xy
/// position, or the enumerated placements when no model is given.
pub fn cmd_plan(
    mesh: &TriMesh,
    options: StabilityOptions,
    model: Option<&TypeModel>,
    start: usize,
    goal: usize,
    gripper: &GripperSpec,
    grasp_samples: usize,
    seed: u64,
) -> Result<Plan> {
    gripper.validate()?;
    let body = StableBody::new(mesh, options)?;
    let nodes: Vec<Placement> = match model {
        Some(m) => m
            .modes
            .iter()
            .enumerate()
            .map(|(k, r)| Placement { type_id: Some(k), ..body.rest(r) })
            .collect(),
        None => body.enumerate(),
    };
    let grasps = sample_antipodal_grasps(mesh, grasp_samples, gripper, seed);
    let graph = build_manipulation_graph(&nodes, &grasps, gripper);
    Ok(plan_regrasp(&graph, start, goal)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub coefficients: PolyCoeffs,
    pub max_fit_error: f64,
}

pub fn cmd_fitpoly(samples: usize) -> Result<FitOutput> {
    if samples < MIN_FIT_SAMPLES {
        return Err(CliError::usage(format!("--samples must be at least {MIN_FIT_SAMPLES}, got {samples}")));
    }
    let coefficients = fit_geodesic_polynomial(samples)?;
    let max_fit_error = coefficients.max_fit_error(samples);
    Ok(FitOutput { coefficients, max_fit_error })
}

/// Pose entry for external viewers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseDump {
    pub object_id: String,
    pub source: String,
    pub type_id: Option<usize>,
    pub rotation: Rotation3,
    #[serde(with = "vec3_array")]
    pub translation: Vec3,
}

pub fn pose_dump(object_id: &str, source: &str, placements: impl IntoIterator<Item = Placement>) -> Vec<PoseDump> {
    placements
        .into_iter()
        .map(|p| PoseDump {
            object_id: object_id.to_string(),
            source: source.to_string(),
            type_id: p.type_id,
            rotation: p.rotation,
            translation: p.translation,
        })
        .collect()
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::other(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn to_jsonl<T: Serialize>(values: &[T]) -> Result<String> {
    let mut s = String::new();
    for v in values {
        s.push_str(&serde_json::to_string(v).map_err(|e| CliError::other(e.to_string()))?);
        s.push('\n');
    }
    Ok(s)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::usage(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// A single type model or a map of models keyed by object id.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ModelFile {
    Single(TypeModel),
    PerObject(BTreeMap<String, TypeModel>),
}

impl ModelFile {
    pub fn for_object(&self, id: &str) -> Result<&TypeModel> {
        match self {
            ModelFile::Single(m) => Ok(m),
            ModelFile::PerObject(map) => map
                .get(id)
                .ok_or_else(|| CliError::usage(format!("type model has no entry for object {id:?}"))),
        }
    }
}

/// Writes every file or none: on failure the files already written are removed.
pub fn write_all(files: &[(PathBuf, String)]) -> Result<()> {
    let mut written: Vec<&Path> = Vec::new();
    for (path, contents) in files {
        let result = path
            .parent()
            .map_or(Ok(()), fs::create_dir_all)
            .and_then(|_| fs::write(path, contents));
        if let Err(e) = result {
            for w in written {
                let _ = fs::remove_file(w);
            }
            return Err(CliError::other(format!("cannot write {}: {e}", path.display())));
        }
        written.push(path);
    }
    Ok(())
}

/// Full run: dataset, types, enumeration, evaluation and optional plan.
/// Everything is computed before anything is written.
pub fn cmd_pipeline(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let options = config.stability_options();
    let objects = load_objects(&config.meshes).map_err(|e| e.in_stage("load"))?;

    let (mut records, drop_report) = generate_dataset(&objects, config.drops_per_object, config.seed, options)
        .map_err(|e| CliError::from(e).in_stage("dataset"))?;
    for r in &drop_report {
        if r.settled == 0 {
            return Err(CliError::other(format!("no drop of {:?} settled", r.object_id)).in_stage("dataset"));
        }
    }

    let models = cmd_cluster(&mut records, config.bandwidth(), config.assign_threshold()).map_err(|e| e.in_stage("cluster"))?;

    let mut enumerated: BTreeMap<String, Vec<Placement>> = BTreeMap::new();
    let mut evals = Vec::new();
    let thresholds = config.thresholds.to_thresholds();
    for (id, mesh) in &objects {
        let body = StableBody::new(mesh, options).map_err(|e| CliError::from(e).in_stage("enumerate"))?;
        let mut placements = body.enumerate();
        label_placements(&mut placements, &models[id]);
        let predictions: Vec<Placement> =
            placements.iter().filter(|p| p.score >= config.score_threshold).copied().collect();
        let eval = evaluate_object(id, &predictions, &body, &models[id], &thresholds, config.initial_type, config.diversity)
            .map_err(|e| CliError::from(e).in_stage("evaluate"))?;
        evals.push(eval);
        enumerated.insert(id.clone(), placements);
    }
    let report = EvalReport::from_objects(evals);

    let plan = match &config.plan {
        Some(req) => {
            let (_, mesh) = objects
                .iter()
                .find(|(id, _)| *id == req.object)
                .ok_or_else(|| CliError::usage(format!("plan object {:?} is not among the meshes", req.object)).in_stage("plan"))?;
            let plan = cmd_plan(
                mesh,
                options,
                Some(&models[&req.object]),
                req.start,
                req.goal,
                &config.gripper.to_spec(),
                config.grasp_samples,
                config.seed,
            )
            .map_err(|e| e.in_stage("plan"))?;
            Some(plan)
        }
        None => None,
    };

    let dir = &config.output_dir;
    let mut files = vec![
        (dir.join("dataset.jsonl"), to_jsonl(&records)?),
        (dir.join("dataset_report.json"), to_json(&drop_report)?),
        (dir.join("types.json"), to_json(&models)?),
        (dir.join("placements.json"), to_json(&enumerated)?),
        (dir.join("report.json"), to_json(&report)?),
        (dir.join("report.txt"), report.to_table()),
    ];
    if let Some(plan) = &plan {
        files.push((dir.join("plan.json"), to_json(plan)?));
    }
    if config.dump_poses {
        let mut poses = Vec::new();
        for (id, ps) in &enumerated {
            poses.extend(pose_dump(id, "enumerated", ps.iter().copied()));
        }
        for r in &records {
            poses.extend(pose_dump(&r.object_id, "dataset", [r.placement()]));
        }
        files.push((dir.join("poses.json"), to_json(&poses)?));
    }
    write_all(&files).map_err(|e| e.in_stage("write"))?;
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

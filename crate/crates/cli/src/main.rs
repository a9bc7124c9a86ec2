use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stablepose::meshgeo::load_mesh;
use stablepose::placements::{drop_rng, StabilityOptions, DEFAULT_MAX_TIPS};
use stablepose::placements::Placement;
use stablepose::rotgeo::Rotation3;
use stablepose_cli::commands::{self, pose_dump, read_json, read_jsonl, to_json, to_jsonl, ModelFile};
use stablepose_cli::config::{object_id, GripperConfig, RunConfig, ThresholdsConfig};
use stablepose_cli::{with_workers, CliError};

#[derive(Parser)]
#[command(name = "stablepose", version, about = "Stable placements, placement types, evaluation and regrasp plans")]
struct Cli {
    /// Worker threads for parallel stages (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Stability {
    /// Required stability margin in meters.
    #[arg(long, default_value_t = 1e-4)]
    margin_eps: f64,
    /// Accept open meshes, using the surface centroid as center of mass.
    #[arg(long)]
    allow_surface_com: bool,
}

impl Stability {
    fn options(&self) -> Result<StabilityOptions, CliError> {
        if !(self.margin_eps > 0.0 && self.margin_eps.is_finite()) {
            return Err(CliError::usage("--margin-eps must be positive"));
        }
        Ok(StabilityOptions {
            margin_eps: self.margin_eps,
            allow_surface_com: self.allow_surface_com,
            ..Default::default()
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// List the stable placements of a mesh as JSON.
    Enumerate {
        mesh: PathBuf,
        #[command(flatten)]
        stability: Stability,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the poses for external viewers.
        #[arg(long)]
        dump_poses: Option<PathBuf>,
    },
    /// Tumble a mesh from given or random orientations until it rests.
    Settle {
        mesh: PathBuf,
        /// Initial rotation, nine comma-separated row-major entries.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "count")]
        rotation: Option<Vec<f64>>,
        /// Number of random initial orientations.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_TIPS)]
        max_tips: usize,
        #[command(flatten)]
        stability: Stability,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Drop meshes from random orientations and record the settled placements (JSON Lines).
    Dataset {
        #[arg(required = true)]
        meshes: Vec<PathBuf>,
        #[arg(long, default_value_t = 200)]
        drops: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        stability: Stability,
        #[arg(short, long)]
        output: PathBuf,
        /// Per-object counts of settled and skipped drops.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Cluster a dataset into placement types per object.
    Cluster {
        dataset: PathBuf,
        #[arg(long, default_value_t = 15.0)]
        bandwidth_deg: f64,
        /// Type assignment threshold (default: the bandwidth).
        #[arg(long)]
        assign_threshold_deg: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
        /// Copy of the dataset with type labels filled in.
        #[arg(long)]
        labeled: Option<PathBuf>,
    },
    /// Settle predicted placements and report accuracy and diversity.
    Evaluate {
        mesh: PathBuf,
        /// JSON array of placements.
        #[arg(long)]
        predictions: PathBuf,
        /// Type model JSON (single model or keyed by object id).
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        initial_type: usize,
        #[arg(long, default_value_t = 10.0)]
        max_delta_d_deg: f64,
        #[arg(long, default_value_t = 2.0)]
        max_delta_h_cm: f64,
        #[arg(long)]
        no_diversity: bool,
        #[command(flatten)]
        stability: Stability,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Plain-text table destination (default: standard output).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Plan a regrasp sequence between two placement types.
    Plan {
        mesh: PathBuf,
        /// Type model; without it the enumerated placements are the nodes.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        start: usize,
        #[arg(long)]
        goal: usize,
        /// Gripper JSON with the config file's gripper fields.
        #[arg(long)]
        gripper: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        grasp_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        stability: Stability,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit the polynomial geodesic surrogate and write its coefficients.
    Fitpoly {
        #[arg(long, default_value_t = stablepose::rotgeo::DEFAULT_FIT_SAMPLES)]
        samples: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run dataset, clustering, evaluation and planning from a JSON config.
    Pipeline {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        dump_poses: bool,
    },
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => commands::write_all(&[(p.to_path_buf(), text.to_string())]),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Enumerate { mesh, stability, output, dump_poses } => {
            let placements = commands::cmd_enumerate(&mesh, stability.options()?)?;
            emit(output.as_deref(), &to_json(&placements)?)?;
            if let Some(p) = dump_poses {
                let poses = pose_dump(&object_id(&mesh), "enumerated", placements);
                emit(Some(&p), &to_json(&poses)?)?;
            }
        }
        Command::Settle { mesh, rotation, count, seed, max_tips, stability, output } => {
            let initials = match rotation {
                Some(v) => {
                    let values: [f64; 9] = v.try_into().map_err(|_| CliError::usage("--rotation needs 9 values"))?;
                    vec![Rotation3::from_row_major(&values)?]
                }
                None => {
                    let id = object_id(&mesh);
                    (0..count).map(|i| Rotation3::random(&mut drop_rng(seed, &id, i))).collect()
                }
            };
            let settled = commands::cmd_settle(&mesh, &initials, max_tips, stability.options()?)?;
            emit(output.as_deref(), &to_json(&settled)?)?;
        }
        Command::Dataset { meshes, drops, seed, stability, output, report } => {
            let (records, drop_report) = commands::cmd_dataset(&meshes, drops, seed, stability.options()?)?;
            let mut files = vec![(output, to_jsonl(&records)?)];
            if let Some(r) = report {
                files.push((r, to_json(&drop_report)?));
            }
            commands::write_all(&files)?;
            for r in &drop_report {
                eprintln!("{}: {} settled, {} skipped", r.object_id, r.settled, r.diverged);
            }
        }
        Command::Cluster { dataset, bandwidth_deg, assign_threshold_deg, output, labeled } => {
            let mut records = read_jsonl(&dataset)?;
            let threshold = assign_threshold_deg.unwrap_or(bandwidth_deg);
            let models = commands::cmd_cluster(&mut records, bandwidth_deg.to_radians(), threshold.to_radians())?;
            let mut files = vec![(output, to_json(&models)?)];
            if let Some(l) = labeled {
                files.push((l, to_jsonl(&records)?));
            }
            commands::write_all(&files)?;
        }
        Command::Evaluate {
            mesh,
            predictions,
            model,
            initial_type,
            max_delta_d_deg,
            max_delta_h_cm,
            no_diversity,
            stability,
            output,
            table,
        } => {
            let id = object_id(&mesh);
            let loaded = load_mesh(&mesh)?;
            let preds: Vec<Placement> = read_json(&predictions)?;
            let models: ModelFile = read_json(&model)?;
            let thresholds = ThresholdsConfig { max_delta_d_deg, max_delta_h_cm }.to_thresholds();
            let report = commands::cmd_evaluate(
                &id,
                &loaded,
                stability.options()?,
                &preds,
                models.for_object(&id)?,
                &thresholds,
                initial_type,
                !no_diversity,
            )?;
            if let Some(o) = output {
                emit(Some(&o), &to_json(&report)?)?;
            }
            emit(table.as_deref(), &report.to_table())?;
        }
        Command::Plan { mesh, model, start, goal, gripper, grasp_samples, seed, stability, output } => {
            let id = object_id(&mesh);
            let loaded = load_mesh(&mesh)?;
            let models: Option<ModelFile> = model.as_deref().map(read_json).transpose()?;
            let type_model = models.as_ref().map(|m| m.for_object(&id)).transpose()?;
            let gripper: GripperConfig = match gripper {
                Some(p) => read_json(&p)?,
                None => GripperConfig::default(),
            };
            let plan = commands::cmd_plan(
                &loaded,
                stability.options()?,
                type_model,
                start,
                goal,
                &gripper.to_spec(),
                grasp_samples,
                seed,
            )?;
            emit(output.as_deref(), &to_json(&plan)?)?;
        }
        Command::Fitpoly { samples, output } => {
            let fit = commands::cmd_fitpoly(samples)?;
            emit(output.as_deref(), &to_json(&fit.coefficients)?)?;
            eprintln!("max fit error: {:.6e} rad over {samples} samples", fit.max_fit_error);
        }
        Command::Pipeline { config, seed, output_dir, dump_poses } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            cfg.dump_poses |= dump_poses;
            let written = commands::cmd_pipeline(&cfg)?;
            let table = fs::read_to_string(cfg.output_dir.join("report.txt"))?;
            print!("{table}");
            for p in written {
                eprintln!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = with_workers(cli.workers, || run(cli.command)).and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

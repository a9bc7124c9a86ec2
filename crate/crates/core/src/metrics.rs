//! Placement accuracy and diversity, per object and averaged, with a
//! plain-text table rendering.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::TypeModel;
use crate::placements::{Placement, StableBody, DEFAULT_MAX_TIPS};
use crate::rotgeo::{geodesic_distance, z_quotient_distance, Rotation3};

const DEG_EPS: f64 = 1e-9;
const HEIGHT_EPS: f64 = 1e-12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MetricsError {
    #[error("diversity needs at least two placement types, model has {0}")]
    DegenerateDiversity(usize),
    #[error("no predictions to evaluate")]
    NoPredictions,
    #[error("initial type {initial} out of range for {types} types")]
    InitialTypeOutOfRange { initial: usize, types: usize },
    #[error("thresholds must be positive")]
    InvalidThresholds,
}

/// Accuracy limits: orientation change in degrees, height change in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyThresholds {
    pub max_delta_d: f64,
    pub max_delta_h: f64,
}

impl Default for AccuracyThresholds {
    fn default() -> Self {
        AccuracyThresholds { max_delta_d: 10.0, max_delta_h: 0.02 }
    }
}

impl AccuracyThresholds {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.max_delta_d > 0.0 && self.max_delta_h > 0.0 {
            Ok(())
        } else {
            Err(MetricsError::InvalidThresholds)
        }
    }
}

/// Orientation change `ΔD` in degrees.
pub fn delta_d_degrees(before: &Rotation3, after: &Rotation3) -> f64 {
    geodesic_distance(before, after).to_degrees()
}

pub fn placement_accuracy(before: &Placement, after: &Placement, t: &AccuracyThresholds) -> bool {
    let dd = delta_d_degrees(&before.rotation, &after.rotation);
    let dh = (before.height() - after.height()).abs();
    dd <= t.max_delta_d + DEG_EPS && dh <= t.max_delta_h + HEIGHT_EPS
}

/// `m / (n − 1)`: the share of non-initial types matched by at least one
/// prediction within the model's assignment threshold of the type mode,
/// measured by raw geodesic distance.
pub fn diversity_score(predicted: &[Rotation3], model: &TypeModel, initial_type: usize) -> Result<f64, MetricsError> {
    diversity_with(predicted, model, initial_type, geodesic_distance)
}

/// Same as [`diversity_score`] but matching modulo rotation about world z.
pub fn diversity_score_quotient(
    predicted: &[Rotation3],
    model: &TypeModel,
    initial_type: usize,
) -> Result<f64, MetricsError> {
    diversity_with(predicted, model, initial_type, z_quotient_distance)
}

fn diversity_with(
    predicted: &[Rotation3],
    model: &TypeModel,
    initial_type: usize,
    dist: fn(&Rotation3, &Rotation3) -> f64,
) -> Result<f64, MetricsError> {
    let n = model.len();
    if n < 2 {
        return Err(MetricsError::DegenerateDiversity(n));
    }
    if initial_type >= n {
        return Err(MetricsError::InitialTypeOutOfRange { initial: initial_type, types: n });
    }
    let limit = model.assign_threshold.to_degrees() + DEG_EPS;
    let matched = (0..n)
        .filter(|&k| k != initial_type)
        .filter(|&k| predicted.iter().any(|p| dist(p, &model.modes[k]).to_degrees() <= limit))
        .count();
    Ok(matched as f64 / (n - 1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectEval {
    pub object_id: String,
    pub predictions: usize,
    pub accurate: usize,
    pub diverged: usize,
    pub accuracy: f64,
    pub diversity: Option<f64>,
    /// Diversity with quotient matching instead of raw geodesic distance.
    pub diversity_quotient: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub objects: Vec<ObjectEval>,
    pub average_accuracy: f64,
    pub average_diversity: Option<f64>,
    pub average_diversity_quotient: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

impl EvalReport {
    pub fn from_objects(objects: Vec<ObjectEval>) -> EvalReport {
        let average_accuracy = mean(objects.iter().map(|o| o.accuracy)).unwrap_or(0.0);
        let average_diversity = mean(objects.iter().filter_map(|o| o.diversity));
        let average_diversity_quotient = mean(objects.iter().filter_map(|o| o.diversity_quotient));
        EvalReport { objects, average_accuracy, average_diversity, average_diversity_quotient }
    }

    /// Rows of metrics, one column per object plus the average.
    pub fn to_table(&self) -> String {
        let mut header = vec!["Metric".to_string()];
        header.extend(self.objects.iter().map(|o| o.object_id.clone()));
        header.push("Average".to_string());

        let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.1}%", 100.0 * x));
        let mut rows = vec![header];
        let mut row = |name: &str, per: Vec<Option<f64>>, avg: Option<f64>| {
            let mut r = vec![name.to_string()];
            r.extend(per.into_iter().map(pct));
            r.push(pct(avg));
            rows.push(r);
        };
        row("Accuracy", self.objects.iter().map(|o| Some(o.accuracy)).collect(), Some(self.average_accuracy));
        row("Diversity", self.objects.iter().map(|o| o.diversity).collect(), self.average_diversity);
        row(
            "Diversity (z-quotient)",
            self.objects.iter().map(|o| o.diversity_quotient).collect(),
            self.average_diversity_quotient,
        );

        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        out
    }
}

/// Settles every prediction and scores the object. Diversity is computed
/// over the accurate predictions when `diversity` is requested.
pub fn evaluate_object(
    object_id: &str,
    predictions: &[Placement],
    body: &StableBody,
    model: &TypeModel,
    t: &AccuracyThresholds,
    initial_type: usize,
    diversity: bool,
) -> Result<ObjectEval, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::NoPredictions);
    }
    t.validate()?;
    let outcomes: Vec<Option<bool>> = predictions
        .par_iter()
        .map(|p| {
            body.settle(&p.rotation, DEFAULT_MAX_TIPS)
                .ok()
                .map(|out| placement_accuracy(p, &out.placement, t))
        })
        .collect();
    let diverged = outcomes.iter().filter(|o| o.is_none()).count();
    let accurate_rots: Vec<Rotation3> = predictions
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| **o == Some(true))
        .map(|(p, _)| p.rotation)
        .collect();
    let (div, div_q) = if diversity {
        (
            Some(diversity_score(&accurate_rots, model, initial_type)?),
            Some(diversity_score_quotient(&accurate_rots, model, initial_type)?),
        )
    } else {
        (None, None)
    };
    Ok(ObjectEval {
        object_id: object_id.to_string(),
        predictions: predictions.len(),
        accurate: accurate_rots.len(),
        diverged,
        accuracy: accurate_rots.len() as f64 / predictions.len() as f64,
        diversity: div,
        diversity_quotient: div_q,
    })
}

/// Single-object report.
pub fn evaluate_run(
    predictions: &[Placement],
    body: &StableBody,
    model: &TypeModel,
    t: &AccuracyThresholds,
    initial_type: usize,
) -> Result<EvalReport, MetricsError> {
    let obj = evaluate_object("object", predictions, body, model, t, initial_type, true)?;
    Ok(EvalReport::from_objects(vec![obj]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgeo::shapes;
    use crate::placements::StabilityOptions;
    use crate::rotgeo::Vec3;

    fn placement(rotation: Rotation3, z: f64) -> Placement {
        Placement { rotation, translation: Vec3::new(0.0, 0.0, z), type_id: None, stability_margin: 0.1, score: 1.0 }
    }

    #[test]
    fn accuracy_thresholds() {
        let t = AccuracyThresholds::default();
        let a = placement(Rotation3::identity(), 0.5);
        assert!(placement_accuracy(&a, &a, &t));
        assert!(!placement_accuracy(&a, &placement(Rotation3::rot_x(12f64.to_radians()), 0.5), &t));
        assert!(!placement_accuracy(&a, &placement(Rotation3::identity(), 0.55), &t));
        assert!(placement_accuracy(&a, &placement(Rotation3::rot_x(10f64.to_radians()), 0.52), &t));
        assert!(!placement_accuracy(&a, &placement(Rotation3::rot_x(10.1f64.to_radians()), 0.5), &t));
        assert!(!placement_accuracy(&a, &placement(Rotation3::identity(), 0.521), &t));
    }

    fn five_types() -> TypeModel {
        TypeModel {
            bandwidth: 0.26,
            assign_threshold: 15f64.to_radians(),
            modes: vec![
                Rotation3::identity(),
                Rotation3::rot_x(1.0),
                Rotation3::rot_x(-1.0),
                Rotation3::rot_y(1.0),
                Rotation3::rot_y(-1.0),
            ],
        }
    }

    #[test]
    fn diversity_examples() {
        let m = five_types();
        let three = [m.modes[1], m.modes[2] * Rotation3::rot_x(0.05), m.modes[3], m.modes[0]];
        assert_eq!(diversity_score(&three, &m, 0).unwrap(), 0.75);
        assert_eq!(diversity_score(&m.modes, &m, 0).unwrap(), 1.0);
        assert_eq!(diversity_score(&[], &m, 0).unwrap(), 0.0);
        let one = TypeModel { modes: vec![Rotation3::identity()], ..m.clone() };
        assert_eq!(diversity_score(&[], &one, 0), Err(MetricsError::DegenerateDiversity(1)));
    }

    #[test]
    fn raw_and_quotient_matching_differ_on_yaw() {
        let m = five_types();
        let yawed = [Rotation3::rot_z(1.0) * m.modes[1]];
        assert_eq!(diversity_score(&yawed, &m, 0).unwrap(), 0.0);
        assert_eq!(diversity_score_quotient(&yawed, &m, 0).unwrap(), 0.25);
    }

    #[test]
    fn table_has_average_column() {
        let report = EvalReport::from_objects(vec![
            ObjectEval {
                object_id: "a".into(),
                predictions: 2,
                accurate: 2,
                diverged: 0,
                accuracy: 1.0,
                diversity: Some(0.5),
                diversity_quotient: Some(0.5),
            },
            ObjectEval {
                object_id: "b".into(),
                predictions: 2,
                accurate: 1,
                diverged: 0,
                accuracy: 0.5,
                diversity: None,
                diversity_quotient: None,
            },
        ]);
        assert_eq!(report.average_accuracy, 0.75);
        assert_eq!(report.average_diversity, Some(0.5));
        let table = report.to_table();
        assert!(table.lines().next().unwrap().ends_with("Average"));
        assert!(table.contains("75.0%"));
    }

    #[test]
    fn cube_enumeration_scores_perfectly() {
        let cube = shapes::box_mesh(1.0, 1.0, 1.0);
        let body = StableBody::new(&cube, StabilityOptions::default()).unwrap();
        let predictions = body.enumerate();
        let model = TypeModel {
            bandwidth: 15f64.to_radians(),
            assign_threshold: 15f64.to_radians(),
            modes: predictions.iter().map(|p| p.rotation).collect(),
        };
        let t = AccuracyThresholds::default();
        let report = evaluate_run(&predictions, &body, &model, &t, 0).unwrap();
        assert_eq!(report.average_accuracy, 1.0);
        assert_eq!(report.average_diversity, Some(1.0));

        let lifted: Vec<Placement> = predictions.iter().map(|p| p.lifted(0.05)).collect();
        assert_eq!(evaluate_run(&lifted, &body, &model, &t, 0).unwrap().average_accuracy, 0.0);

        let tilted: Vec<Placement> = predictions
            .iter()
            .map(|p| Placement { rotation: Rotation3::rot_y(5f64.to_radians()) * p.rotation, ..*p })
            .collect();
        assert_eq!(evaluate_run(&tilted, &body, &model, &t, 0).unwrap().average_accuracy, 1.0);
    }
}

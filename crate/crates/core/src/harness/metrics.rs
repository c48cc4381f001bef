use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{pose_delta, rotation_angle_between, Pose};
use crate::{Error, ObjectId, Result};

/// One object in one frame of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub repeat: usize,
    pub frame: usize,
    pub object: ObjectId,
    pub label: String,
    pub hypotheses: usize,
    pub trans_err_mm: Option<f64>,
    pub rot_err_deg: Option<f64>,
    /// Mean error of the hypotheses handed to the parser.
    pub induced_trans_mm: Option<f64>,
    pub induced_rot_deg: Option<f64>,
    /// Deviation from the object's mean estimate over its Static frames.
    pub precision_trans_mm: Option<f64>,
    pub precision_rot_deg: Option<f64>,
}

pub const CSV_HEADER: [&str; 11] = [
    "repeat",
    "frame",
    "object",
    "label",
    "hypotheses",
    "trans_err_mm",
    "rot_err_deg",
    "induced_trans_mm",
    "induced_rot_deg",
    "precision_trans_mm",
    "precision_rot_deg",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub repeat: usize,
    pub frame: usize,
    pub objects: usize,
    pub k: usize,
    pub sim_calls: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Stat::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Stat { mean, std: var.sqrt(), n: v.len() }
    }
}

/// Per-repeat means over the object-frames that have both a parsed and an induced error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub repeat: usize,
    pub parsed_trans_mm: f64,
    pub induced_trans_mm: f64,
    pub parsed_rot_deg: f64,
    pub induced_rot_deg: f64,
}

impl RepeatSummary {
    pub fn improves_translation(&self) -> bool {
        self.parsed_trans_mm < self.induced_trans_mm
    }

    pub fn improves_rotation(&self) -> bool {
        self.parsed_rot_deg < self.induced_rot_deg
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub parsed_trans_mm: Stat,
    pub parsed_rot_deg: Stat,
    pub induced_trans_mm: Stat,
    pub induced_rot_deg: Stat,
    pub precision_trans_mm: Stat,
    pub precision_rot_deg: Stat,
    pub repeats: Vec<RepeatSummary>,
    /// Largest ratio of simulations to `k·N` over all frames.
    pub max_sim_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub frames: Vec<FrameRecord>,
    pub summary: Summary,
    /// Wall-clock seconds per frame; kept out of exported files so reports stay reproducible.
    #[serde(skip)]
    pub wall_clock: Vec<f64>,
}

pub fn pose_errors(estimate: &Pose, truth: &Pose) -> (f64, f64) {
    let (t, r) = pose_delta(estimate, truth);
    (t * 1000.0, r.to_degrees())
}

fn mean_rotation(rotations: &[UnitQuaternion<f64>]) -> UnitQuaternion<f64> {
    let first = rotations[0].quaternion().coords;
    let mut acc = Vector3::zeros().push(0.0);
    for q in rotations {
        let c = q.quaternion().coords;
        acc += if c.dot(&first) < 0.0 { -c } else { c };
    }
    UnitQuaternion::from_quaternion(Quaternion::from(acc))
}

/// Fills the precision columns from each object's estimates in rows labeled Static.
pub fn fill_precision(rows: &mut [MetricsRow], estimates: &[Option<Pose>]) {
    let mut keys: Vec<(usize, ObjectId)> = rows.iter().map(|r| (r.repeat, r.object.clone())).collect();
    keys.sort();
    keys.dedup();
    for (repeat, object) in keys {
        let idx: Vec<usize> = (0..rows.len())
            .filter(|&i| rows[i].repeat == repeat && rows[i].object == object && rows[i].label == "Static" && estimates[i].is_some())
            .collect();
        if idx.is_empty() {
            continue;
        }
        let poses: Vec<Pose> = idx.iter().map(|&i| estimates[i].expect("filtered")).collect();
        let mean_t = poses.iter().map(|p| p.translation).sum::<Vector3<f64>>() / poses.len() as f64;
        let mean_r = mean_rotation(&poses.iter().map(|p| p.rotation).collect::<Vec<_>>());
        for (&i, p) in idx.iter().zip(&poses) {
            rows[i].precision_trans_mm = Some((p.translation - mean_t).norm() * 1000.0);
            rows[i].precision_rot_deg = Some(rotation_angle_between(&p.rotation, &mean_r).to_degrees());
        }
    }
}

pub fn summarize(rows: &[MetricsRow], frames: &[FrameRecord]) -> Summary {
    let both = |r: &&MetricsRow| r.trans_err_mm.is_some() && r.induced_trans_mm.is_some();
    let mut repeats: Vec<usize> = rows.iter().map(|r| r.repeat).collect();
    repeats.dedup();
    repeats.sort();
    repeats.dedup();
    let per_repeat = repeats
        .iter()
        .map(|&rep| {
            let sel: Vec<&MetricsRow> = rows.iter().filter(|r| r.repeat == rep).filter(both).collect();
            RepeatSummary {
                repeat: rep,
                parsed_trans_mm: Stat::of(sel.iter().filter_map(|r| r.trans_err_mm)).mean,
                induced_trans_mm: Stat::of(sel.iter().filter_map(|r| r.induced_trans_mm)).mean,
                parsed_rot_deg: Stat::of(sel.iter().filter_map(|r| r.rot_err_deg)).mean,
                induced_rot_deg: Stat::of(sel.iter().filter_map(|r| r.induced_rot_deg)).mean,
            }
        })
        .collect();
    let sel: Vec<&MetricsRow> = rows.iter().filter(both).collect();
    Summary {
        parsed_trans_mm: Stat::of(sel.iter().filter_map(|r| r.trans_err_mm)),
        parsed_rot_deg: Stat::of(sel.iter().filter_map(|r| r.rot_err_deg)),
        induced_trans_mm: Stat::of(sel.iter().filter_map(|r| r.induced_trans_mm)),
        induced_rot_deg: Stat::of(sel.iter().filter_map(|r| r.induced_rot_deg)),
        precision_trans_mm: Stat::of(rows.iter().filter_map(|r| r.precision_trans_mm)),
        precision_rot_deg: Stat::of(rows.iter().filter_map(|r| r.precision_rot_deg)),
        repeats: per_repeat,
        max_sim_ratio: frames
            .iter()
            .filter(|f| f.objects > 0)
            .map(|f| f.sim_calls as f64 / (f.k * f.objects) as f64)
            .fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl MetricsReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Vec<MetricsRow>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        r.deserialize().map(|row| row.map_err(Error::from)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes `rows.csv` plus `summary.json`, or a single `report.json`.
pub fn report_export(report: &MetricsReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    match format {
        ReportFormat::Csv => {
            let rows = dir.join("rows.csv");
            fs::write(&rows, report.to_csv()?)?;
            let summary = dir.join("summary.json");
            fs::write(&summary, serde_json::to_string_pretty(&report.summary)?)?;
            Ok(vec![rows, summary])
        }
        ReportFormat::Json => {
            let path = dir.join("report.json");
            fs::write(&path, report.to_json()?)?;
            Ok(vec![path])
        }
    }
}

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use crate::{Error, ObjectId, Result};

/// World-frame point set; labels are ground truth and never read by the parser.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub labels: Option<Vec<ObjectId>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        PointCloud { points, labels: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy without ground-truth labels.
    pub fn unlabeled(&self) -> PointCloud {
        PointCloud::new(self.points.clone())
    }

    pub fn count_labeled(&self, id: &ObjectId) -> usize {
        self.labels.as_ref().map_or(0, |l| l.iter().filter(|x| *x == id).count())
    }

    /// ASCII `x y z [label]` lines.
    pub fn to_xyz(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 40);
        for (i, p) in self.points.iter().enumerate() {
            let _ = write!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
            if let Some(labels) = &self.labels {
                let _ = write!(out, " {}", labels[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_xyz(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        let mut labeled: Option<bool> = None;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 && fields.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 3 or 4 fields", line_no + 1)));
            }
            let mut xyz = [0.0; 3];
            for (k, f) in fields[..3].iter().enumerate() {
                xyz[k] = f
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))?;
                if !xyz[k].is_finite() {
                    return Err(Error::Parse(format!("line {}: non-finite coordinate", line_no + 1)));
                }
            }
            let has_label = fields.len() == 4;
            if *labeled.get_or_insert(has_label) != has_label {
                return Err(Error::Parse(format!("line {}: inconsistent label column", line_no + 1)));
            }
            if has_label {
                labels.push(ObjectId::new(fields[3]));
            }
            points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
        }
        Ok(PointCloud { points, labels: labeled.unwrap_or(false).then_some(labels) })
    }

    pub fn load(path: &Path) -> Result<Self> {
        PointCloud::from_xyz(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_xyz())?;
        Ok(())
    }
}

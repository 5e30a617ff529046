//! Reference trajectories: tabulated samples or analytic segments.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::ReferenceSample;
use crate::error::{Error, Result};
use crate::manifold::{Manifold, Pose, Tangent};

/// Anything that yields a reference sample for a given time.
pub trait Reference {
    fn sample(&self, t: f64) -> ReferenceSample;
}

impl<F: Fn(f64) -> ReferenceSample> Reference for F {
    fn sample(&self, t: f64) -> ReferenceSample {
        self(t)
    }
}

/// Tolerance for position/velocity/acceleration consistency in tabulated
/// trajectories.
pub const CONSISTENCY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    /// Stay put.
    Hold,
    /// Constant velocity.
    Line,
    /// Rest-to-rest with the `10s³ − 15s⁴ + 6s⁵` profile.
    Quintic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub kind: SegmentKind,
    pub duration: f64,
    /// Target pose (ignored for holds). Rigid poses are `[x, y, z, w, qx, qy, qz]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Vec<f64>>,
}

/// JSON form of a segmented trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFile {
    pub start: Vec<f64>,
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    kind: SegmentKind,
    t0: f64,
    duration: f64,
    from: Pose,
    delta: Tangent,
}

impl Segment {
    fn sample(&self, t: f64) -> ReferenceSample {
        let tau = if self.duration > 0.0 {
            ((t - self.t0) / self.duration).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let inside = t >= self.t0 && t <= self.t0 + self.duration;
        let (s, ds, dds) = match self.kind {
            SegmentKind::Hold => (0.0, 0.0, 0.0),
            SegmentKind::Line => (tau, if inside { 1.0 / self.duration } else { 0.0 }, 0.0),
            SegmentKind::Quintic => {
                let t2 = tau * tau;
                let t3 = t2 * tau;
                let d = self.duration;
                (
                    t3 * (10.0 - 15.0 * tau + 6.0 * t2),
                    30.0 * t2 * (1.0 - tau).powi(2) / d,
                    60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau) / (d * d),
                )
            }
        };
        ReferenceSample {
            t,
            pose: self.from.retract(&(&self.delta.0 * s)),
            velocity: Tangent(&self.delta.0 * ds),
            accel: Tangent(&self.delta.0 * dds),
        }
    }

    fn end(&self) -> f64 {
        self.t0 + self.duration
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Samples(Vec<ReferenceSample>),
    Segments(Vec<Segment>, Pose),
}

/// A reference stream `(η_r, φ_r, α_r)(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    manifold: Manifold,
    source: Source,
}

impl Trajectory {
    /// Stay at `pose` forever.
    pub fn hold(pose: Pose) -> Self {
        Self {
            manifold: pose.manifold(),
            source: Source::Segments(Vec::new(), pose),
        }
    }

    /// Segments run back to back from `start`; after the last one the final
    /// pose is held.
    pub fn from_segments(manifold: Manifold, file: &SegmentFile) -> Result<Self> {
        let mut pose = parse_pose(manifold, &file.start, "start")?;
        let mut t0 = 0.0;
        let mut segments = Vec::with_capacity(file.segments.len());
        for (i, spec) in file.segments.iter().enumerate() {
            if !(spec.duration > 0.0) || !spec.duration.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "segment {i}: duration must be positive, got {}",
                    spec.duration
                )));
            }
            let delta = match (spec.kind, &spec.to) {
                (SegmentKind::Hold, _) => Tangent::zeros(manifold.dim()),
                (_, Some(to)) => pose.difference(&parse_pose(manifold, to, "segment target")?),
                (_, None) => {
                    return Err(Error::InvalidParameter(format!("segment {i}: missing target pose")))
                }
            };
            let seg = Segment {
                kind: spec.kind,
                t0,
                duration: spec.duration,
                from: pose.clone(),
                delta,
            };
            pose = seg.sample(seg.end()).pose;
            t0 = seg.end();
            segments.push(seg);
        }
        Ok(Self {
            manifold,
            source: Source::Segments(segments, pose),
        })
    }

    /// Tabulated samples, linearly interpolated on the manifold and held
    /// outside their time span.
    pub fn from_samples(samples: Vec<ReferenceSample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidParameter("trajectory has no samples".into()))?;
        let manifold = first.pose.manifold();
        for (i, s) in samples.iter().enumerate() {
            if s.pose.manifold() != manifold
                || s.velocity.len() != manifold.dim()
                || s.accel.len() != manifold.dim()
            {
                return Err(Error::InvalidParameter(format!("sample {i}: inconsistent dimensions")));
            }
            if !s.t.is_finite() || !s.pose.is_finite() {
                return Err(Error::InvalidParameter(format!("sample {i}: non-finite value")));
            }
        }
        for (i, w) in samples.windows(2).enumerate() {
            let dt = w[1].t - w[0].t;
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "sample {}: time must be strictly increasing",
                    i + 1
                )));
            }
            let rate = w[0].pose.difference(&w[1].pose).0 / dt;
            let mean_velocity = (&w[0].velocity.0 + &w[1].velocity.0) * 0.5;
            check_consistent(i + 1, "velocity", &rate, &mean_velocity)?;
            let accel = (&w[1].velocity.0 - &w[0].velocity.0) / dt;
            let mean_accel = (&w[0].accel.0 + &w[1].accel.0) * 0.5;
            check_consistent(i + 1, "acceleration", &accel, &mean_accel)?;
        }
        Ok(Self {
            manifold,
            source: Source::Samples(samples),
        })
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    /// Time after which the reference is constant.
    pub fn end_time(&self) -> f64 {
        match &self.source {
            Source::Samples(s) => s.last().map_or(0.0, |s| s.t),
            Source::Segments(s, _) => s.last().map_or(0.0, Segment::end),
        }
    }

    /// Read a `.json` segment file or a `.csv` sample table.
    pub fn load(path: &Path, manifold: Manifold) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                let file: SegmentFile = serde_json::from_str(&text).map_err(|e| {
                    Error::InvalidParameter(format!(
                        "{}:{}:{}: {e}",
                        path.display(),
                        e.line(),
                        e.column()
                    ))
                })?;
                Self::from_segments(manifold, &file)
            }
            Some("csv") => Self::from_csv(&text, manifold),
            _ => Err(Error::InvalidParameter(format!(
                "{}: expected a .json or .csv trajectory",
                path.display()
            ))),
        }
    }

    /// Columns: `t`, pose (rigid: position then `w, x, y, z`), velocity,
    /// acceleration. A header row is optional.
    pub fn from_csv(text: &str, manifold: Manifold) -> Result<Self> {
        let pose_len = match manifold {
            Manifold::Euclidean(d) => d,
            Manifold::Rigid => 7,
        };
        let dim = manifold.dim();
        let width = 1 + pose_len + 2 * dim;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut samples = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidParameter(format!("line {}: {e}", line + 1)))?;
            let values: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            let values = match values {
                Ok(v) => v,
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::InvalidParameter(format!("line {}: {e}", line + 1))),
            };
            if values.len() != width {
                return Err(Error::InvalidParameter(format!(
                    "line {}: expected {width} columns, found {}",
                    line + 1,
                    values.len()
                )));
            }
            let pose = parse_pose(manifold, &values[1..1 + pose_len], "pose")?;
            samples.push(ReferenceSample {
                t: values[0],
                pose,
                velocity: Tangent::from_slice(&values[1 + pose_len..1 + pose_len + dim]),
                accel: Tangent::from_slice(&values[1 + pose_len + dim..]),
            });
        }
        Self::from_samples(samples)
    }
}

impl Reference for Trajectory {
    fn sample(&self, t: f64) -> ReferenceSample {
        match &self.source {
            Source::Segments(segments, last) => segments
                .iter()
                .find(|s| t < s.end())
                .map(|s| s.sample(t))
                .unwrap_or_else(|| ReferenceSample::hold(t, last.clone())),
            Source::Samples(samples) => {
                let i = samples.partition_point(|s| s.t <= t);
                if i == 0 {
                    return ReferenceSample { t, ..samples[0].clone() };
                }
                if i == samples.len() {
                    let last = &samples[i - 1];
                    return ReferenceSample::hold(t, last.pose.clone());
                }
                let (a, b) = (&samples[i - 1], &samples[i]);
                let s = (t - a.t) / (b.t - a.t);
                ReferenceSample {
                    t,
                    pose: a.pose.retract(&(a.pose.difference(&b.pose).0 * s)),
                    velocity: Tangent(&a.velocity.0 * (1.0 - s) + &b.velocity.0 * s),
                    accel: Tangent(&a.accel.0 * (1.0 - s) + &b.accel.0 * s),
                }
            }
        }
    }
}

fn check_consistent(
    row: usize,
    what: &str,
    from_positions: &nalgebra::DVector<f64>,
    given: &nalgebra::DVector<f64>,
) -> Result<()> {
    let gap = (from_positions - given).amax();
    if gap > CONSISTENCY_TOL * given.amax().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "sample {row}: {what} column disagrees with finite differences by {gap:.3e}"
        )));
    }
    Ok(())
}

/// Pose from config-style coordinates; quaternions are normalized.
pub fn parse_pose(manifold: Manifold, values: &[f64], what: &str) -> Result<Pose> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what}: non-finite coordinate")));
    }
    let pose = match manifold {
        Manifold::Rigid if values.len() == 7 && values[3..].iter().any(|v| *v != 0.0) => {
            Pose::rigid([values[0], values[1], values[2]], [values[3], values[4], values[5], values[6]])
        }
        Manifold::Rigid if values.len() == 3 => Pose::rigid([values[0], values[1], values[2]], [1.0, 0.0, 0.0, 0.0]),
        Manifold::Euclidean(d) if values.len() == d => Pose::euclidean(values),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "{what}: {} coordinates do not describe a {} pose",
                values.len(),
                manifold.selector()
            )))
        }
    };
    Ok(pose)
}

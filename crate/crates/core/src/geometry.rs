//! 3D vectors, random deployments, multifaceted transceivers and per-link
//! pointing geometry.
//!
//! Frame: right-handed, `z` is depth with the sea surface at `z = 0` and the
//! water column below it (`z < 0`). The horizontal origin is the centre of
//! the deployment box.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Angle between two vectors in `[0, π]`. Uses `atan2` so that small
    /// angles keep full precision.
    pub fn angle_to(self, o: Vec3) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    pub min: Vec3,
    pub max: Vec3,
}

impl Volume {
    /// Box of the given edge lengths hanging below the surface, centred on
    /// the horizontal origin: `x ∈ [-ex/2, ex/2]`, `y ∈ [-ey/2, ey/2]`,
    /// `z ∈ [-ez, 0]`.
    pub fn below_surface(edges: [f64; 3]) -> Result<Self> {
        for (axis, e) in ["x", "y", "z"].iter().zip(edges) {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::config(
                    "geometry.volume",
                    format!("edge along {axis} must be positive and finite, got {e}"),
                ));
            }
        }
        Ok(Volume {
            min: Vec3::new(-edges[0] / 2.0, -edges[1] / 2.0, -edges[2]),
            max: Vec3::new(edges[0] / 2.0, edges[1] / 2.0, 0.0),
        })
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Centre of the top (surface) face.
    pub fn top_center(&self) -> Vec3 {
        let c = self.center();
        Vec3::new(c.x, c.y, self.max.z)
    }

    pub fn diagonal(&self) -> f64 {
        self.min.distance(self.max)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let d = self.max - self.min;
        Vec3::new(
            self.min.x + rng.gen::<f64>() * d.x,
            self.min.y + rng.gen::<f64>() * d.y,
            self.min.z + rng.gen::<f64>() * d.z,
        )
    }
}

/// Geometry section of the experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub node_count: usize,
    pub anchor_count: usize,
    /// Box edge lengths in metres (x, y, depth).
    pub volume: [f64; 3],
    /// Surface station position; the top-face centre when absent.
    pub sink: Option<[f64; 3]>,
    /// Put anchors on the surface (`z = 0`) instead of throughout the box.
    pub anchors_on_surface: bool,
    pub n_faces: usize,
    pub face_angle_rule: FaceAngleRule,
    /// Overrides both divergence and FoV half-angles (radians).
    pub divergence_half_angle: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            node_count: 50,
            anchor_count: 8,
            volume: [500.0, 500.0, 500.0],
            sink: None,
            anchors_on_surface: false,
            n_faces: 8,
            face_angle_rule: FaceAngleRule::default(),
            divergence_half_angle: None,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::config("geometry.node_count", "must be at least 1"));
        }
        let volume = Volume::below_surface(self.volume)?;
        if let Some(s) = self.sink {
            let s = Vec3::from_array(s);
            if !s.is_finite() || !volume.contains(s) {
                return Err(Error::config(
                    "geometry.sink",
                    "surface station must lie inside the deployment box",
                ));
            }
        }
        face_set_with(
            self.n_faces,
            self.face_angle_rule,
            self.divergence_half_angle,
        )
        .map_err(|e| Error::config("geometry.n_faces", e.to_string()))?;
        Ok(())
    }
}

/// Ground-truth positions for one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub node_positions: Vec<Vec3>,
    pub anchor_positions: Vec<Vec3>,
    pub sink_position: Vec3,
    pub volume: Volume,
}

impl Deployment {
    pub fn node_count(&self) -> usize {
        self.node_positions.len()
    }
}

/// Draws node and anchor positions i.i.d. uniform over the box. Nodes and
/// anchors come from separate generators so changing one count leaves the
/// other population untouched.
pub fn sample_deployment<R: Rng + ?Sized>(
    cfg: &GeometryConfig,
    node_rng: &mut R,
    anchor_rng: &mut R,
) -> Result<Deployment> {
    cfg.validate()?;
    let volume = Volume::below_surface(cfg.volume)?;
    let node_positions = (0..cfg.node_count)
        .map(|_| volume.sample(node_rng))
        .collect();
    let anchor_positions = (0..cfg.anchor_count)
        .map(|_| {
            let mut p = volume.sample(anchor_rng);
            if cfg.anchors_on_surface {
                p.z = volume.max.z;
            }
            p
        })
        .collect();
    let sink_position = cfg
        .sink
        .map(Vec3::from_array)
        .unwrap_or_else(|| volume.top_center());
    Ok(Deployment {
        node_positions,
        anchor_positions,
        sink_position,
        volume,
    })
}

/// Number of candidate directions the face arrangement is picked from.
const CANDIDATES: usize = 4096;

fn candidate_directions() -> &'static [Vec3] {
    static CELL: OnceLock<Vec<Vec3>> = OnceLock::new();
    CELL.get_or_init(|| {
        // Both poles, then a Fibonacci lattice over the rest of the sphere.
        let mut out = vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0)];
        out.extend(fibonacci_sphere(CANDIDATES - 2));
        out
    })
}

fn fibonacci_sphere(m: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Boresights for `n` faces: greedy farthest-point traversal of a
/// Fibonacci lattice starting at the zenith. Every arrangement is a prefix
/// of the next larger one, so adding faces never worsens the best pointing
/// towards any direction.
fn boresights(n: usize) -> Vec<Vec3> {
    let cands = candidate_directions();
    let mut chosen = Vec::with_capacity(n);
    // Largest cosine to any chosen direction; the farthest candidate has
    // the smallest value.
    let mut nearest = vec![f64::NEG_INFINITY; cands.len()];
    let mut next = 0;
    for _ in 0..n {
        let b = cands[next];
        chosen.push(b);
        for (slot, c) in nearest.iter_mut().zip(cands) {
            *slot = slot.max(c.dot(b));
        }
        next = nearest
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
    }
    chosen
}

/// Half-angle for which `n` equal cones have a combined solid angle of 4π.
pub fn equal_solid_angle(n_faces: usize) -> f64 {
    if n_faces <= 2 {
        FRAC_PI_2
    } else {
        (1.0 - 2.0 / n_faces as f64).acos()
    }
}

/// How the face count sets the divergence and FoV half-angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceAngleRule {
    /// [`equal_solid_angle`]: the cones add up to 4π but, for more than two
    /// faces, leave uncovered gaps between them.
    EqualSolidAngle,
    /// [`covering_angle`] of the actual arrangement: the narrowest cone that
    /// leaves no direction uncovered.
    #[default]
    Covering,
}

const PROBES: usize = 1 << 16;

fn probe_directions() -> &'static [Vec3] {
    static CELL: OnceLock<Vec<Vec3>> = OnceLock::new();
    CELL.get_or_init(|| fibonacci_sphere(PROBES))
}

/// Largest angle between any direction and its nearest boresight,
/// evaluated on a dense probe lattice and capped at a hemisphere. Since
/// arrangements are nested, this never grows with the face count.
pub fn covering_angle(boresights: &[Vec3]) -> f64 {
    let worst = probe_directions()
        .iter()
        .map(|p| {
            boresights
                .iter()
                .map(|b| b.dot(*p))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    worst.clamp(-1.0, 1.0).acos().min(FRAC_PI_2)
}

/// Transceiver faces of one node, expressed in the global frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceSet {
    boresights: Vec<Vec3>,
    divergence_half_angle: f64,
    fov_half_angle: f64,
}

impl FaceSet {
    pub fn n_faces(&self) -> usize {
        self.boresights.len()
    }

    pub fn boresights(&self) -> &[Vec3] {
        &self.boresights
    }

    pub fn divergence_half_angle(&self) -> f64 {
        self.divergence_half_angle
    }

    pub fn fov_half_angle(&self) -> f64 {
        self.fov_half_angle
    }

    /// Total solid angle of the transmit cones, `N · 2π(1 − cos θ)`.
    pub fn total_solid_angle(&self) -> f64 {
        self.n_faces() as f64
            * 2.0
            * std::f64::consts::PI
            * (1.0 - self.divergence_half_angle.cos())
    }
}

/// Builds the face arrangement for a node with `n_faces` faces. Both
/// half-angles follow [`equal_solid_angle`] unless `override_angle` is given.
/// A single face is capped at a hemisphere.
pub fn face_set(n_faces: usize, override_angle: Option<f64>) -> Result<FaceSet> {
    face_set_with(n_faces, FaceAngleRule::EqualSolidAngle, override_angle)
}

/// As [`face_set`] with a choice of angle rule.
pub fn face_set_with(
    n_faces: usize,
    rule: FaceAngleRule,
    override_angle: Option<f64>,
) -> Result<FaceSet> {
    if n_faces == 0 {
        return Err(Error::Domain("a node needs at least one face".into()));
    }
    if n_faces > CANDIDATES {
        return Err(Error::Domain(format!(
            "at most {CANDIDATES} faces are supported, got {n_faces}"
        )));
    }
    let angle = match override_angle {
        Some(a) if a.is_finite() && a > 0.0 && a <= FRAC_PI_2 => a,
        Some(a) => {
            return Err(Error::Domain(format!(
                "half-angle must lie in (0, π/2], got {a}"
            )))
        }
        None => match rule {
            FaceAngleRule::EqualSolidAngle => equal_solid_angle(n_faces),
            FaceAngleRule::Covering => covering_angle(&boresights(n_faces)),
        },
    };
    Ok(FaceSet {
        boresights: boresights(n_faces),
        divergence_half_angle: angle,
        fov_half_angle: angle,
    })
}

/// Pointing and incidence for one directed link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub distance: f64,
    /// Transmit face closest to the line of sight.
    pub tx_face: usize,
    pub tx_offaxis: f64,
    /// Receive face most directly facing the transmitter.
    pub rx_face: usize,
    pub rx_incidence: f64,
    /// Every receive face whose field of view contains the transmitter.
    pub rx_faces_in_fov: Vec<(usize, f64)>,
    pub in_beam: bool,
}

fn best_face(faces: &[Vec3], dir: Vec3) -> (usize, f64) {
    faces
        .iter()
        .map(|b| b.angle_to(dir))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("face sets are never empty")
}

pub fn link_geometry(
    tx_pos: Vec3,
    tx_faces: &FaceSet,
    rx_pos: Vec3,
    rx_faces: &FaceSet,
) -> Result<LinkGeometry> {
    let los = rx_pos - tx_pos;
    let distance = los.norm();
    let dir = los
        .normalized()
        .ok_or_else(|| Error::Domain("link endpoints coincide".into()))?;
    let (tx_face, tx_offaxis) = best_face(tx_faces.boresights(), dir);
    let back = -dir;
    let (rx_face, rx_incidence) = best_face(rx_faces.boresights(), back);
    let rx_faces_in_fov: Vec<(usize, f64)> = rx_faces
        .boresights()
        .iter()
        .enumerate()
        .map(|(i, b)| (i, b.angle_to(back)))
        .filter(|&(_, a)| a <= rx_faces.fov_half_angle())
        .collect();
    let in_beam = tx_offaxis <= tx_faces.divergence_half_angle() && !rx_faces_in_fov.is_empty();
    Ok(LinkGeometry {
        distance,
        tx_face,
        tx_offaxis,
        rx_face,
        rx_incidence,
        rx_faces_in_fov,
        in_beam,
    })
}

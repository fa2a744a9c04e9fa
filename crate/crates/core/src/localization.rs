//! RSS ranging and iterative multilateration with node promotion.
//!
//! Each unlocalized node listens to references (anchors, then nodes that
//! were localized in earlier rounds), turns every received level into a
//! range by inverting the channel model and solves for its position once it
//! has at least four distinct references. After promotion stops, a few
//! refinement passes re-solve every localized node against all of its
//! localized neighbours.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acoustic::{self, AcousticParams};
use crate::error::{Error, Result};
use crate::geometry::{link_geometry, Deployment, FaceSet, LinkGeometry, Vec3};
use crate::optical::{self, OpticalParams, WaterType};
use crate::rng::{Purpose, SeededRng};
use crate::routing::{NetworkMode, Tech};

/// Shortest range the optical inversion will report (m).
const OPTICAL_MIN_RANGE: f64 = 1e-3;
/// Longest range any inversion searches (m).
const MAX_RANGE: f64 = 1e7;
/// Relative bracket width at which range bisection stops.
const RANGE_REL_TOL: f64 = 1e-12;
/// Floor on range variance so noise-free measurements keep finite weights.
const MIN_RANGE_VARIANCE: f64 = 1e-12;

/// How much trust promoted references get relative to anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceWeighting {
    /// Promoted nodes count exactly like anchors.
    Uniform,
    /// A promoted node's own position variance is added to the range
    /// variance of every measurement taken against it.
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationConfig {
    pub optical_sigma_db: f64,
    pub acoustic_sigma_db: f64,
    pub max_iterations: usize,
    /// Gauss-Newton stops once a step is shorter than this (m).
    pub tolerance_m: f64,
    pub reference_weighting: ReferenceWeighting,
    pub refinement_passes: usize,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        LocalizationConfig {
            optical_sigma_db: 1.0,
            acoustic_sigma_db: 1.0,
            max_iterations: 20,
            tolerance_m: 1e-6,
            reference_weighting: ReferenceWeighting::Uniform,
            refinement_passes: 3,
        }
    }
}

impl LocalizationConfig {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("optical_sigma_db", self.optical_sigma_db),
            ("acoustic_sigma_db", self.acoustic_sigma_db),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    format!("localization.{k}"),
                    "must be non-negative",
                ));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::config(
                "localization.max_iterations",
                "must be at least 1",
            ));
        }
        if !(self.tolerance_m > 0.0) {
            return Err(Error::config(
                "localization.tolerance_m",
                "must be positive",
            ));
        }
        Ok(())
    }

    pub fn sigma_db(&self, tech: Tech) -> f64 {
        match tech {
            Tech::Optical => self.optical_sigma_db,
            Tech::Acoustic => self.acoustic_sigma_db,
        }
    }
}

/// A link over which a received level can be observed.
#[derive(Debug, Clone, Copy)]
pub enum RssLink<'a> {
    Optical {
        geom: &'a LinkGeometry,
        faces: &'a FaceSet,
        params: &'a OpticalParams,
        water: &'a WaterType,
    },
    Acoustic {
        distance: f64,
        params: &'a AcousticParams,
    },
}

impl RssLink<'_> {
    pub fn tech(&self) -> Tech {
        match self {
            RssLink::Optical { .. } => Tech::Optical,
            RssLink::Acoustic { .. } => Tech::Acoustic,
        }
    }

    /// Noise-free level: dBW for optical, dB re µPa for acoustic. `None`
    /// when there is nothing to measure. An optical beam must be decodable
    /// (in beam and within the FEC gate) since below the photodiode noise
    /// floor there is no usable level. An acoustic ping only has to be
    /// heard, which is possible well past the data-rate cutoff, so any
    /// distance of at least 1 m counts.
    pub fn level_db(&self) -> Option<f64> {
        match *self {
            RssLink::Optical {
                geom,
                faces,
                params,
                water,
            } => {
                let link = optical::link_budget(geom, faces, params, water);
                (link.capacity > 0.0).then(|| 10.0 * link.received_power.log10())
            }
            RssLink::Acoustic { distance, params } => {
                acoustic::received_level(distance, params).ok()
            }
        }
    }

    /// Ranging model matching this link, as known to the receiver.
    pub fn ranging_model(&self) -> RangingModel<'_> {
        match *self {
            RssLink::Optical {
                geom,
                faces,
                params,
                water,
            } => RangingModel::Optical {
                angular_gain: optical::angular_gain(geom),
                divergence_half_angle: faces.divergence_half_angle(),
                params,
                water,
            },
            RssLink::Acoustic { params, .. } => RangingModel::Acoustic { params },
        }
    }
}

/// Received level with zero-mean Gaussian noise of `sigma_db` added in the
/// dB domain.
pub fn measure_rss<R: Rng + ?Sized>(link: &RssLink<'_>, sigma_db: f64, rng: &mut R) -> Option<f64> {
    let level = link.level_db()?;
    let z: f64 = rng.sample(StandardNormal);
    Some(level + sigma_db * z)
}

/// Monotone level-versus-distance curve used to turn an RSS into a range.
/// The optical model assumes the receiver knows the angular coupling of
/// the faces that detected the beam.
#[derive(Debug, Clone, Copy)]
pub enum RangingModel<'a> {
    Optical {
        angular_gain: f64,
        divergence_half_angle: f64,
        params: &'a OpticalParams,
        water: &'a WaterType,
    },
    Acoustic {
        params: &'a AcousticParams,
    },
}

impl RangingModel<'_> {
    pub fn min_range(&self) -> f64 {
        match self {
            RangingModel::Optical { .. } => OPTICAL_MIN_RANGE,
            RangingModel::Acoustic { .. } => 1.0,
        }
    }

    pub fn level_db(&self, d: f64) -> f64 {
        match *self {
            RangingModel::Optical {
                angular_gain,
                divergence_half_angle,
                params,
                water,
            } => {
                // Kept in log form so long ranges do not underflow.
                let coupling = params.tx_power
                    * params.tx_efficiency
                    * params.rx_efficiency
                    * params.rx_aperture_area
                    * angular_gain
                    / (2.0 * std::f64::consts::PI * (1.0 - divergence_half_angle.cos()));
                10.0 * coupling.log10()
                    - 20.0 * d.log10()
                    - 10.0 * std::f64::consts::LOG10_E * water.extinction_c * d
            }
            RangingModel::Acoustic { params } => {
                params.source_level
                    - 10.0 * params.spreading_exponent * d.log10()
                    - d / 1000.0 * acoustic::thorp_absorption(params.frequency)
            }
        }
    }

    /// |d level / d distance| in dB per metre.
    pub fn slope_db_per_m(&self, d: f64) -> f64 {
        let db_per_neper = 10.0 * std::f64::consts::LOG10_E;
        match *self {
            RangingModel::Optical { water, .. } => db_per_neper * (water.extinction_c + 2.0 / d),
            RangingModel::Acoustic { params } => {
                db_per_neper * params.spreading_exponent / d
                    + acoustic::thorp_absorption(params.frequency) / 1000.0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    pub distance: f64,
    /// The level lay outside what the model can produce and the range was
    /// pinned to the nearest end of the search interval.
    pub clamped: bool,
}

/// Distance at which `model` yields `rss_db`, by bisection.
pub fn invert_range(rss_db: f64, model: &RangingModel<'_>) -> RangeEstimate {
    let lo_bound = model.min_range();
    if rss_db >= model.level_db(lo_bound) {
        return RangeEstimate {
            distance: lo_bound,
            clamped: true,
        };
    }
    let mut hi = lo_bound.max(1.0) * 2.0;
    while model.level_db(hi) > rss_db {
        hi *= 2.0;
        if hi > MAX_RANGE {
            return RangeEstimate {
                distance: MAX_RANGE,
                clamped: true,
            };
        }
    }
    let mut lo = lo_bound;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if model.level_db(mid) > rss_db {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= RANGE_REL_TOL * hi {
            break;
        }
    }
    RangeEstimate {
        distance: 0.5 * (lo + hi),
        clamped: false,
    }
}

/// One range to a reference at a known (or estimated) position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeRef {
    pub position: Vec3,
    pub distance: f64,
    pub weight: f64,
}

impl RangeRef {
    pub fn new(position: Vec3, distance: f64) -> Self {
        RangeRef {
            position,
            distance,
            weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub tolerance_m: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 20,
            tolerance_m: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fix {
    pub position: Vec3,
    pub iterations: usize,
    pub converged: bool,
    /// Trace of the weighted least-squares covariance (m²).
    pub position_variance: f64,
}

fn to_na(v: Vec3) -> Vector3<f64> {
    Vector3::new(v.x, v.y, v.z)
}

fn from_na(v: &Vector3<f64>) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

/// Difference-of-spheres linearisation: subtract the heaviest reference's
/// sphere equation from the others and solve the weighted linear system.
fn linear_fix(refs: &[RangeRef]) -> Result<Vec3> {
    let n = refs.len() as f64;
    let centroid = refs.iter().fold(Vec3::ZERO, |a, r| a + r.position) * (1.0 / n);
    let pivot = refs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.weight.total_cmp(&b.1.weight).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let p0 = refs[pivot].position - centroid;
    let d0 = refs[pivot].distance;
    let rows = refs.len() - 1;
    let mut a = DMatrix::<f64>::zeros(rows, 3);
    let mut b = DVector::<f64>::zeros(rows);
    for (row, r) in refs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != pivot)
        .map(|(_, r)| r)
        .enumerate()
    {
        let p = r.position - centroid;
        let w = r.weight.sqrt();
        let diff = (p - p0) * 2.0;
        a[(row, 0)] = w * diff.x;
        a[(row, 1)] = w * diff.y;
        a[(row, 2)] = w * diff.z;
        b[row] = w * (p.dot(p) - p0.dot(p0) - r.distance * r.distance + d0 * d0);
    }
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smax > 0.0) || smin <= 1e-9 * smax {
        return Err(Error::DegenerateGeometry(
            "references are coplanar or collinear".into(),
        ));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::DegenerateGeometry(e.to_string()))?;
    Ok(Vec3::new(x[0], x[1], x[2]) + centroid)
}

fn weighted_cost(refs: &[RangeRef], x: Vec3) -> f64 {
    refs.iter()
        .map(|r| {
            let res = x.distance(r.position) - r.distance;
            r.weight * res * res
        })
        .sum()
}

/// Weighted Gauss-Newton on `Σ w (|x − p| − d)²`, started at `start`.
///
/// The second-order residual term is added to `JᵀWJ` whenever the result
/// stays positive definite. Plain Gauss-Newton converges only linearly when
/// the ranges are inconsistent, which with 1 dB acoustic noise can take
/// far more than 20 iterations; the full Hessian restores quadratic
/// convergence near the minimum and the plain step is the fallback away
/// from it.
fn gauss_newton(refs: &[RangeRef], start: Vec3, opts: &SolverOptions) -> Fix {
    let mut x = start;
    let mut cost = weighted_cost(refs, x);
    let mut converged = false;
    let mut iterations = 0;
    let normal = |x: Vec3| {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut curv = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for r in refs {
            let delta = x - r.position;
            let dist = delta.norm().max(1e-12);
            let j = to_na(delta) * (1.0 / dist);
            let jj = j * j.transpose();
            jtj += r.weight * jj;
            curv += r.weight * (dist - r.distance) / dist * (Matrix3::identity() - jj);
            jtr += r.weight * j * (r.distance - dist);
        }
        (jtj, curv, jtr)
    };
    for it in 0..opts.max_iterations {
        iterations = it + 1;
        let (jtj, curv, jtr) = normal(x);
        let Some(step) = (jtj + curv)
            .cholesky()
            .or_else(|| jtj.cholesky())
            .map(|c| c.solve(&jtr))
        else {
            break;
        };
        let mut step = from_na(&step);
        // Halve until the cost stops increasing.
        let mut next = x + step;
        let mut next_cost = weighted_cost(refs, next);
        let mut halvings = 0;
        while next_cost > cost && halvings < 30 {
            step = step * 0.5;
            next = x + step;
            next_cost = weighted_cost(refs, next);
            halvings += 1;
        }
        x = next;
        cost = next_cost;
        if step.norm() < opts.tolerance_m {
            converged = true;
            break;
        }
    }
    let (jtj, _, _) = normal(x);
    let position_variance = jtj
        .try_inverse()
        .map(|inv| inv.trace())
        .filter(|t| t.is_finite() && *t >= 0.0)
        .unwrap_or(f64::INFINITY);
    Fix {
        position: x,
        iterations,
        converged,
        position_variance,
    }
}

/// Position from at least four ranges to non-coplanar references: linear
/// least squares followed by Gauss-Newton refinement.
pub fn multilaterate(refs: &[RangeRef]) -> Result<Fix> {
    multilaterate_with(refs, &SolverOptions::default(), None)
}

/// As [`multilaterate`]; with `start` the linear stage is skipped and the
/// iteration is warm-started there.
pub fn multilaterate_with(
    refs: &[RangeRef],
    opts: &SolverOptions,
    start: Option<Vec3>,
) -> Result<Fix> {
    if refs.len() < 4 {
        return Err(Error::Domain(format!(
            "multilateration needs at least 4 references, got {}",
            refs.len()
        )));
    }
    if refs.iter().any(|r| {
        !(r.distance.is_finite() && r.distance >= 0.0 && r.weight > 0.0) || !r.position.is_finite()
    }) {
        return Err(Error::Domain(
            "ranges and weights must be finite and positive".into(),
        ));
    }
    let x0 = match start {
        Some(s) => s,
        None => linear_fix(refs)?,
    };
    Ok(gauss_newton(refs, x0, opts))
}

/// Keyed source of standard normal draws for ranging noise: the draw for a
/// given (observer, reference, tech) is the same whichever mode asks.
#[derive(Debug, Clone, Copy)]
pub struct NoiseKey {
    pub seed: u64,
    pub trial: u64,
}

impl NoiseKey {
    fn rng(&self, observer: usize, reference: usize, n_refs: usize, tech: Tech) -> SeededRng {
        let t = match tech {
            Tech::Optical => 0,
            Tech::Acoustic => 1,
        };
        let block = ((observer * n_refs + reference) * 2 + t) as u64;
        SeededRng::at(self.seed, Purpose::RangingNoise, self.trial, block)
    }
}

/// One inverted range from an observer node to a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeMeasurement {
    pub observer: usize,
    /// Index into anchors followed by nodes: `< anchor_count` is an anchor.
    pub reference: usize,
    pub estimated_distance: f64,
    pub tech: Tech,
    pub noise_sigma_db: f64,
    /// Ranging standard deviation implied by the noise and model slope (m).
    pub range_sigma: f64,
}

/// Channel context shared by every measurement in a trial.
#[derive(Debug, Clone, Copy)]
pub struct Channels<'a> {
    pub faces: &'a FaceSet,
    pub optical: &'a OpticalParams,
    pub water: &'a WaterType,
    pub acoustic: &'a AcousticParams,
}

fn techs(mode: NetworkMode) -> &'static [Tech] {
    match mode {
        NetworkMode::Optical => &[Tech::Optical],
        NetworkMode::Acoustic => &[Tech::Acoustic],
        NetworkMode::Hybrid => &[Tech::Optical, Tech::Acoustic],
    }
}

/// Every feasible measurement for `mode`. References transmit, the
/// observer receives.
pub fn collect_measurements(
    dep: &Deployment,
    ch: &Channels<'_>,
    cfg: &LocalizationConfig,
    mode: NetworkMode,
    noise: NoiseKey,
) -> Result<Vec<RangeMeasurement>> {
    let anchors = dep.anchor_positions.len();
    let refs: Vec<Vec3> = dep
        .anchor_positions
        .iter()
        .chain(&dep.node_positions)
        .copied()
        .collect();
    let mut out = Vec::new();
    for (obs, &rx) in dep.node_positions.iter().enumerate() {
        for (r, &tx) in refs.iter().enumerate() {
            if r == anchors + obs || tx == rx {
                continue;
            }
            for &tech in techs(mode) {
                let geom;
                let link = match tech {
                    Tech::Optical => {
                        geom = link_geometry(tx, ch.faces, rx, ch.faces)?;
                        RssLink::Optical {
                            geom: &geom,
                            faces: ch.faces,
                            params: ch.optical,
                            water: ch.water,
                        }
                    }
                    Tech::Acoustic => RssLink::Acoustic {
                        distance: tx.distance(rx),
                        params: ch.acoustic,
                    },
                };
                let sigma = cfg.sigma_db(tech);
                let mut rng = noise.rng(obs, r, refs.len(), tech);
                let Some(rss) = measure_rss(&link, sigma, &mut rng) else {
                    continue;
                };
                let model = link.ranging_model();
                let est = invert_range(rss, &model);
                let range_sigma = sigma / model.slope_db_per_m(est.distance);
                out.push(RangeMeasurement {
                    observer: obs,
                    reference: r,
                    estimated_distance: est.distance,
                    tech,
                    noise_sigma_db: sigma,
                    range_sigma,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub estimates: BTreeMap<usize, Vec3>,
    pub localized_fraction: f64,
    /// RMSE over localized nodes; `None` when nothing was localized.
    pub rmse: Option<f64>,
    /// RMSE over all nodes, placing each unlocalized node at the centre of
    /// the deployment volume.
    pub rmse_all: f64,
    /// Promotion rounds that localized at least one node.
    pub rounds: usize,
}

#[derive(Debug, Clone, Copy)]
struct Estimate {
    position: Vec3,
    variance: f64,
}

fn gather(
    meas: &[RangeMeasurement],
    anchors: &[Vec3],
    est: &[Option<Estimate>],
    weighting: ReferenceWeighting,
) -> (Vec<RangeRef>, usize) {
    let mut refs = Vec::with_capacity(meas.len());
    let mut distinct = Vec::with_capacity(meas.len());
    for m in meas {
        let (pos, ref_var) = if m.reference < anchors.len() {
            (anchors[m.reference], 0.0)
        } else {
            match est[m.reference - anchors.len()] {
                Some(e) => (e.position, e.variance),
                None => continue,
            }
        };
        let extra = match weighting {
            ReferenceWeighting::Uniform => 0.0,
            ReferenceWeighting::Variance => ref_var / 3.0,
        };
        let var = m.range_sigma * m.range_sigma + extra + MIN_RANGE_VARIANCE;
        refs.push(RangeRef {
            position: pos,
            distance: m.estimated_distance,
            weight: 1.0 / var,
        });
        distinct.push(m.reference);
    }
    distinct.sort_unstable();
    distinct.dedup();
    (refs, distinct.len())
}

/// Localizes every node it can for one deployment and mode.
pub fn network_localize(
    dep: &Deployment,
    ch: &Channels<'_>,
    cfg: &LocalizationConfig,
    mode: NetworkMode,
    noise: NoiseKey,
) -> Result<LocalizationResult> {
    if dep.anchor_positions.len() < 4 {
        return Err(Error::config(
            "geometry.anchor_count",
            "localization needs at least 4 anchors",
        ));
    }
    let meas = collect_measurements(dep, ch, cfg, mode, noise)?;
    Ok(localize_from_measurements(dep, &meas, cfg))
}

/// The promotion and refinement stages over a fixed measurement set.
pub fn localize_from_measurements(
    dep: &Deployment,
    meas: &[RangeMeasurement],
    cfg: &LocalizationConfig,
) -> LocalizationResult {
    let n = dep.node_count();
    let anchors = &dep.anchor_positions;
    let mut per_node: Vec<Vec<RangeMeasurement>> = vec![Vec::new(); n];
    for m in meas {
        per_node[m.observer].push(*m);
    }
    let opts = SolverOptions {
        max_iterations: cfg.max_iterations,
        tolerance_m: cfg.tolerance_m,
    };
    let mut est: Vec<Option<Estimate>> = vec![None; n];
    let mut rounds = 0;
    loop {
        let mut fresh = Vec::new();
        for i in (0..n).filter(|&i| est[i].is_none()) {
            let (refs, distinct) = gather(&per_node[i], anchors, &est, cfg.reference_weighting);
            if distinct < 4 {
                continue;
            }
            if let Ok(fix) = multilaterate_with(&refs, &opts, None) {
                if fix.converged {
                    fresh.push((i, fix));
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        rounds += 1;
        for (i, fix) in fresh {
            est[i] = Some(Estimate {
                position: fix.position,
                variance: fix.position_variance,
            });
        }
    }
    for _ in 0..cfg.refinement_passes {
        let snapshot = est.clone();
        for i in 0..n {
            let Some(cur) = snapshot[i] else { continue };
            let (refs, distinct) =
                gather(&per_node[i], anchors, &snapshot, cfg.reference_weighting);
            if distinct < 4 {
                continue;
            }
            if let Ok(fix) = multilaterate_with(&refs, &opts, Some(cur.position)) {
                if fix.converged {
                    est[i] = Some(Estimate {
                        position: fix.position,
                        variance: fix.position_variance,
                    });
                }
            }
        }
    }

    let estimates: BTreeMap<usize, Vec3> = est
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.map(|e| (i, e.position)))
        .collect();
    let sq_err = |i: usize, p: Vec3| {
        let d = p.distance(dep.node_positions[i]);
        d * d
    };
    let loc_sum: f64 = estimates.iter().map(|(&i, &p)| sq_err(i, p)).sum();
    let rmse = (!estimates.is_empty()).then(|| (loc_sum / estimates.len() as f64).sqrt());
    let prior = dep.volume.center();
    let all_sum: f64 = (0..n)
        .map(|i| sq_err(i, estimates.get(&i).copied().unwrap_or(prior)))
        .sum();
    LocalizationResult {
        localized_fraction: estimates.len() as f64 / n as f64,
        estimates,
        rmse,
        rmse_all: (all_sum / n as f64).sqrt(),
        rounds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{face_set, Volume};
    use crate::optical::WaterKind;
    use proptest::prelude::*;
    use rand::Rng;

    fn tetra() -> Vec<Vec3> {
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(100.0, 0.0, -10.0),
            Vec3::new(0.0, 120.0, -30.0),
            Vec3::new(40.0, 30.0, -150.0),
        ]
    }

    #[test]
    fn noise_free_four_anchors_exact() {
        let truth = Vec3::new(33.0, 41.0, -77.0);
        let refs: Vec<RangeRef> = tetra()
            .into_iter()
            .map(|p| RangeRef::new(p, p.distance(truth)))
            .collect();
        let fix = multilaterate(&refs).unwrap();
        assert!(fix.converged);
        assert!(fix.position.distance(truth) < 1e-6);
    }

    #[test]
    fn coplanar_references_are_degenerate() {
        let truth = Vec3::new(10.0, 10.0, -50.0);
        let refs: Vec<RangeRef> = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(100.0, 0.0, 0.0),
            Vec3::new(0.0, 100.0, 0.0),
            Vec3::new(100.0, 100.0, 0.0),
            Vec3::new(50.0, 20.0, 0.0),
        ]
        .into_iter()
        .map(|p| RangeRef::new(p, p.distance(truth)))
        .collect();
        assert!(matches!(
            multilaterate(&refs),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(matches!(multilaterate(&refs[..3]), Err(Error::Domain(_))));
    }

    #[test]
    fn noisy_solution_matches_grid_search() {
        // Eight anchors in a 60 m box, 1 dB acoustic ranging noise.
        let p = AcousticParams::default();
        let model = RangingModel::Acoustic { params: &p };
        let anchors = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(60.0, 0.0, -5.0),
            Vec3::new(0.0, 60.0, -10.0),
            Vec3::new(60.0, 60.0, 0.0),
            Vec3::new(0.0, 0.0, -60.0),
            Vec3::new(60.0, 5.0, -60.0),
            Vec3::new(5.0, 60.0, -55.0),
            Vec3::new(55.0, 55.0, -60.0),
        ];
        let truth = Vec3::new(22.0, 35.0, -28.0);
        let mut rng = SeededRng::from_seed(12);
        let refs: Vec<RangeRef> = anchors
            .iter()
            .map(|&a| {
                let link = RssLink::Acoustic {
                    distance: a.distance(truth),
                    params: &p,
                };
                let rss = measure_rss(&link, 1.0, &mut rng).unwrap();
                RangeRef::new(a, invert_range(rss, &model).distance)
            })
            .collect();
        let fix = multilaterate(&refs).unwrap();
        // Dense grid over the box at 0.5 m spacing.
        let step = 0.5;
        let mut best = (f64::INFINITY, Vec3::ZERO);
        for i in 0..=120 {
            for j in 0..=120 {
                for k in 0..=120 {
                    let x = Vec3::new(i as f64 * step, j as f64 * step, -(k as f64) * step);
                    let c = weighted_cost(&refs, x);
                    if c < best.0 {
                        best = (c, x);
                    }
                }
            }
        }
        assert!(weighted_cost(&refs, fix.position) <= best.0 + 1e-9);
        assert!(fix.position.distance(best.1) <= step * 3f64.sqrt());
        let grid_err = best.1.distance(truth);
        assert!(fix.position.distance(truth) <= grid_err + step * 3f64.sqrt());
    }

    #[test]
    fn zero_sigma_is_exact_level() {
        let p = AcousticParams::default();
        let link = RssLink::Acoustic {
            distance: 250.0,
            params: &p,
        };
        let mut rng = SeededRng::from_seed(1);
        let m = measure_rss(&link, 0.0, &mut rng).unwrap();
        assert_eq!(m, acoustic::received_level(250.0, &p).unwrap());
    }

    #[test]
    fn noise_spread_matches_sigma() {
        let p = AcousticParams::default();
        let link = RssLink::Acoustic {
            distance: 250.0,
            params: &p,
        };
        let exact = link.level_db().unwrap();
        let mut rng = SeededRng::from_seed(2);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| measure_rss(&link, 2.0, &mut rng).unwrap() - exact)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var.sqrt() - 2.0).abs() < 0.2);
    }

    #[test]
    fn out_of_beam_gives_no_measurement() {
        let tx = face_set(1, Some(0.3)).unwrap();
        let g = link_geometry(Vec3::ZERO, &tx, Vec3::new(0.0, 0.0, -10.0), &tx).unwrap();
        let params = OpticalParams::default();
        let water = WaterType::standard(WaterKind::ClearOcean);
        let link = RssLink::Optical {
            geom: &g,
            faces: &tx,
            params: &params,
            water: &water,
        };
        assert!(measure_rss(&link, 1.0, &mut SeededRng::from_seed(0)).is_none());
    }

    fn optical_round_trip(d: f64) -> f64 {
        let faces = face_set(8, None).unwrap();
        let params = OpticalParams::default();
        let water = WaterType::standard(WaterKind::ClearOcean);
        let g = link_geometry(
            Vec3::new(3.0, -2.0, -d - 5.0),
            &faces,
            Vec3::new(3.0, -2.0, -5.0),
            &faces,
        )
        .unwrap();
        let link = RssLink::Optical {
            geom: &g,
            faces: &faces,
            params: &params,
            water: &water,
        };
        let rss = measure_rss(&link, 0.0, &mut SeededRng::from_seed(0)).unwrap();
        invert_range(rss, &link.ranging_model()).distance
    }

    #[test]
    fn round_trips() {
        for d in [5.0, 25.0, 60.0] {
            assert!((optical_round_trip(d) - d).abs() < 1e-4, "optical {d}");
        }
        let p = AcousticParams::default();
        for d in [10.0, 200.0, 1000.0] {
            let link = RssLink::Acoustic {
                distance: d,
                params: &p,
            };
            let rss = measure_rss(&link, 0.0, &mut SeededRng::from_seed(0)).unwrap();
            let back = invert_range(rss, &link.ranging_model()).distance;
            assert!((back - d).abs() < 1e-4, "acoustic {d}");
        }
    }

    #[test]
    fn spherical_spreading_closed_form() {
        // Absorption nearly switched off by a very low carrier.
        let p = AcousticParams {
            spreading_exponent: 2.0,
            frequency: 1e-4,
            ..AcousticParams::default()
        };
        let model = RangingModel::Acoustic { params: &p };
        let alpha = acoustic::thorp_absorption(p.frequency) / 1000.0;
        for rl in [120.0, 90.0, 70.0] {
            let analytic = 10f64.powf((p.source_level - rl) / 20.0);
            // The residual 0.003 dB/km floor, folded in by fixed-point
            // iteration of d = 10^((SL − RL − α d) / 20).
            let mut fixed = analytic;
            for _ in 0..50 {
                fixed = 10f64.powf((p.source_level - rl - alpha * fixed) / 20.0);
            }
            assert!((fixed - analytic).abs() / analytic < 1e-3);
            let analytic = fixed;
            let got = invert_range(rl, &model).distance;
            assert!(
                (got - analytic).abs() / analytic < 1e-5,
                "{got} vs {analytic}"
            );
        }
    }

    #[test]
    fn inversion_is_monotone_and_clamps() {
        let p = AcousticParams::default();
        let model = RangingModel::Acoustic { params: &p };
        let mut last = 0.0;
        for i in 0..100 {
            let rss = 130.0 - i as f64;
            let d = invert_range(rss, &model).distance;
            assert!(d > last);
            last = d;
        }
        let hot = invert_range(p.source_level + 5.0, &model);
        assert!(hot.clamped);
        assert_eq!(hot.distance, 1.0);
    }

    #[test]
    fn scaling_power_leaves_ranges_unchanged() {
        let faces = face_set(8, None).unwrap();
        let water = WaterType::standard(WaterKind::Coastal);
        let g = link_geometry(
            Vec3::new(0.0, 0.0, -45.0),
            &faces,
            Vec3::new(0.0, 0.0, -5.0),
            &faces,
        )
        .unwrap();
        let mut ranges = Vec::new();
        for scale in [1.0, 10.0] {
            let params = OpticalParams {
                tx_power: scale,
                ..OpticalParams::default()
            };
            let link = RssLink::Optical {
                geom: &g,
                faces: &faces,
                params: &params,
                water: &water,
            };
            let rss = measure_rss(&link, 1.0, &mut SeededRng::from_seed(4)).unwrap();
            ranges.push(invert_range(rss, &link.ranging_model()).distance);
        }
        assert!((ranges[0] - ranges[1]).abs() < 1e-6);
    }

    fn dense_deployment(n: usize, seed: u64) -> Deployment {
        let mut rng = SeededRng::from_seed(seed);
        let volume = Volume::below_surface([60.0, 60.0, 60.0]).unwrap();
        let mut p = || {
            Vec3::new(
                rng.gen_range(-30.0..30.0),
                rng.gen_range(-30.0..30.0),
                rng.gen_range(-60.0..0.0),
            )
        };
        Deployment {
            node_positions: (0..n).map(|_| p()).collect(),
            anchor_positions: (0..8).map(|_| p()).collect(),
            sink_position: Vec3::ZERO,
            volume,
        }
    }

    fn channels_fixture() -> (FaceSet, OpticalParams, WaterType, AcousticParams) {
        (
            face_set(2, None).unwrap(),
            OpticalParams::default(),
            WaterType::standard(WaterKind::ClearOcean),
            AcousticParams::default(),
        )
    }

    #[test]
    fn noise_free_network_is_exact() {
        let (faces, opt, water, aco) = channels_fixture();
        let ch = Channels {
            faces: &faces,
            optical: &opt,
            water: &water,
            acoustic: &aco,
        };
        let cfg = LocalizationConfig {
            optical_sigma_db: 0.0,
            acoustic_sigma_db: 0.0,
            ..LocalizationConfig::default()
        };
        let dep = dense_deployment(20, 8);
        for mode in [NetworkMode::Acoustic, NetworkMode::Hybrid] {
            let r =
                network_localize(&dep, &ch, &cfg, mode, NoiseKey { seed: 1, trial: 0 }).unwrap();
            assert_eq!(r.localized_fraction, 1.0, "{mode}");
            assert!(r.rmse.unwrap() < 1e-4, "{mode}: {:?}", r.rmse);
            assert!(r.rmse_all < 1e-4);
        }
    }

    #[test]
    fn turbid_water_localizes_fewer_nodes_optically() {
        let faces = face_set(8, None).unwrap();
        let (opt, aco) = (OpticalParams::default(), AcousticParams::default());
        let cfg = LocalizationConfig::default();
        let mut clear_total = 0.0;
        let mut harbor_total = 0.0;
        for seed in 0..5 {
            let mut dep = dense_deployment(30, 100 + seed);
            // Stretch to 300 m so harbor extinction matters.
            let s = 5.0;
            for p in dep
                .node_positions
                .iter_mut()
                .chain(dep.anchor_positions.iter_mut())
            {
                *p = *p * s;
            }
            dep.volume = Volume::below_surface([300.0, 300.0, 300.0]).unwrap();
            for (kind, total) in [
                (WaterKind::ClearOcean, &mut clear_total),
                (WaterKind::Harbor, &mut harbor_total),
            ] {
                let water = WaterType::standard(kind);
                let ch = Channels {
                    faces: &faces,
                    optical: &opt,
                    water: &water,
                    acoustic: &aco,
                };
                let r = network_localize(
                    &dep,
                    &ch,
                    &cfg,
                    NetworkMode::Optical,
                    NoiseKey { seed, trial: 0 },
                )
                .unwrap();
                *total += r.localized_fraction;
            }
        }
        assert!(harbor_total < clear_total);
    }

    #[test]
    fn too_few_anchors_rejected() {
        let (faces, opt, water, aco) = channels_fixture();
        let ch = Channels {
            faces: &faces,
            optical: &opt,
            water: &water,
            acoustic: &aco,
        };
        let mut dep = dense_deployment(5, 1);
        dep.anchor_positions.truncate(3);
        let r = network_localize(
            &dep,
            &ch,
            &LocalizationConfig::default(),
            NetworkMode::Acoustic,
            NoiseKey { seed: 0, trial: 0 },
        );
        assert!(r.is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn hybrid_dominates_single_tech(seed in 0u64..1000) {
            let faces = face_set(8, None).unwrap();
            let (opt, aco) = (OpticalParams::default(), AcousticParams::default());
            let water = WaterType::standard(WaterKind::ClearOcean);
            let ch = Channels { faces: &faces, optical: &opt, water: &water, acoustic: &aco };
            let mut dep = dense_deployment(15, seed);
            for p in dep.node_positions.iter_mut().chain(dep.anchor_positions.iter_mut()) {
                *p = *p * 8.0;
            }
            dep.volume = Volume::below_surface([480.0, 480.0, 480.0]).unwrap();
            let cfg = LocalizationConfig::default();
            let key = NoiseKey { seed, trial: 3 };
            let hybrid = collect_measurements(&dep, &ch, &cfg, NetworkMode::Hybrid, key).unwrap();
            let mut frac = Vec::new();
            for mode in [NetworkMode::Optical, NetworkMode::Acoustic] {
                let single = collect_measurements(&dep, &ch, &cfg, mode, key).unwrap();
                for m in &single {
                    prop_assert!(hybrid.contains(m));
                }
                frac.push(localize_from_measurements(&dep, &single, &cfg).localized_fraction);
            }
            let h = localize_from_measurements(&dep, &hybrid, &cfg);
            prop_assert!(h.localized_fraction >= frac[0].max(frac[1]));
            prop_assert!(h.rounds <= dep.node_count());
        }
    }

    #[test]
    fn rmse_shrinks_with_noise() {
        let (faces, opt, water, aco) = channels_fixture();
        let ch = Channels {
            faces: &faces,
            optical: &opt,
            water: &water,
            acoustic: &aco,
        };
        let dep = dense_deployment(20, 21);
        let mut last = f64::INFINITY;
        for sigma in [1.0, 0.1, 0.01] {
            let cfg = LocalizationConfig {
                optical_sigma_db: sigma,
                acoustic_sigma_db: sigma,
                ..LocalizationConfig::default()
            };
            let r = network_localize(
                &dep,
                &ch,
                &cfg,
                NetworkMode::Acoustic,
                NoiseKey { seed: 5, trial: 0 },
            )
            .unwrap();
            assert_eq!(r.localized_fraction, 1.0);
            let rmse = r.rmse.unwrap();
            assert!(rmse < last, "{sigma}: {rmse} !< {last}");
            last = rmse;
        }
    }

    #[test]
    fn variance_weighting_runs() {
        let (faces, opt, water, aco) = channels_fixture();
        let ch = Channels {
            faces: &faces,
            optical: &opt,
            water: &water,
            acoustic: &aco,
        };
        let cfg = LocalizationConfig {
            reference_weighting: ReferenceWeighting::Variance,
            ..LocalizationConfig::default()
        };
        let dep = dense_deployment(20, 3);
        let r = network_localize(
            &dep,
            &ch,
            &cfg,
            NetworkMode::Hybrid,
            NoiseKey { seed: 5, trial: 0 },
        )
        .unwrap();
        assert_eq!(r.localized_fraction, 1.0);
        assert!(r.rmse.unwrap().is_finite());
    }
}

//! Beer-Lambert optical link budget with OOK detection.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FaceSet, LinkGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaterKind {
    PureSea,
    ClearOcean,
    Coastal,
    Harbor,
}

impl WaterKind {
    pub const ALL: [WaterKind; 4] = [
        WaterKind::PureSea,
        WaterKind::ClearOcean,
        WaterKind::Coastal,
        WaterKind::Harbor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WaterKind::PureSea => "pure_sea",
            WaterKind::ClearOcean => "clear_ocean",
            WaterKind::Coastal => "coastal",
            WaterKind::Harbor => "harbor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        WaterKind::ALL.into_iter().find(|w| w.as_str() == s)
    }
}

impl fmt::Display for WaterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Extinction coefficients (1/m) per water type in the blue-green window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtinctionTable {
    pub pure_sea: f64,
    pub clear_ocean: f64,
    pub coastal: f64,
    pub harbor: f64,
}

impl Default for ExtinctionTable {
    fn default() -> Self {
        ExtinctionTable {
            pure_sea: 0.056,
            clear_ocean: 0.151,
            coastal: 0.305,
            harbor: 2.17,
        }
    }
}

impl ExtinctionTable {
    pub fn get(&self, kind: WaterKind) -> f64 {
        match kind {
            WaterKind::PureSea => self.pure_sea,
            WaterKind::ClearOcean => self.clear_ocean,
            WaterKind::Coastal => self.coastal,
            WaterKind::Harbor => self.harbor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterType {
    pub name: WaterKind,
    pub extinction_c: f64,
}

impl WaterType {
    pub fn new(name: WaterKind, extinction_c: f64) -> Result<Self> {
        if !(extinction_c.is_finite() && extinction_c > 0.0) {
            return Err(Error::config(
                format!("optical.extinction.{name}"),
                "extinction coefficient must be positive",
            ));
        }
        Ok(WaterType { name, extinction_c })
    }

    pub fn standard(name: WaterKind) -> Self {
        WaterType {
            name,
            extinction_c: ExtinctionTable::default().get(name),
        }
    }
}

/// Optical transceiver and receiver-noise parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticalParams {
    /// Watts.
    pub tx_power: f64,
    pub tx_efficiency: f64,
    pub rx_efficiency: f64,
    /// Square metres per face.
    pub rx_aperture_area: f64,
    /// A/W.
    pub responsivity: f64,
    /// A².
    pub noise_variance: f64,
    /// Hz.
    pub bandwidth: f64,
    pub fec_ber_threshold: f64,
}

impl Default for OpticalParams {
    fn default() -> Self {
        // Tuned so that coastal links die out just short of 100 m and a
        // 30 m clear-ocean link carries hundreds of Mbps (see README).
        OpticalParams {
            tx_power: 1.0,
            tx_efficiency: 0.9,
            rx_efficiency: 0.9,
            rx_aperture_area: 0.01,
            responsivity: 0.5,
            noise_variance: 1.0e-38,
            bandwidth: 10.0e6,
            fec_ber_threshold: 1.0e-3,
        }
    }
}

impl OpticalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tx_power", self.tx_power),
            ("rx_aperture_area", self.rx_aperture_area),
            ("responsivity", self.responsivity),
            ("noise_variance", self.noise_variance),
            ("bandwidth", self.bandwidth),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("optical.{k}"), "must be positive"));
            }
        }
        for (k, v) in [
            ("tx_efficiency", self.tx_efficiency),
            ("rx_efficiency", self.rx_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(format!("optical.{k}"), "must lie in (0, 1]"));
            }
        }
        if !(self.fec_ber_threshold > 0.0 && self.fec_ber_threshold < 0.5) {
            return Err(Error::config(
                "optical.fec_ber_threshold",
                "must lie in (0, 0.5)",
            ));
        }
        Ok(())
    }

    /// Receiver noise standard deviation (A).
    pub fn noise_sigma(&self) -> f64 {
        self.noise_variance.sqrt()
    }
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Fraction of power surviving `d` metres of water, `exp(-c·d)`.
pub fn transmittance(extinction_c: f64, d: f64) -> f64 {
    (-extinction_c * d).exp()
}

/// Sum of `cos(incidence)` over every receive face that sees the
/// transmitter. Zero when the link is out of beam.
pub fn angular_gain(geom: &LinkGeometry) -> f64 {
    if !geom.in_beam {
        return 0.0;
    }
    geom.rx_faces_in_fov.iter().map(|&(_, a)| a.cos()).sum()
}

/// Received power for a link at distance `d` with the given angular gain.
/// Shared by the link budget and by RSS range inversion.
pub fn received_power_at(
    d: f64,
    angular_gain: f64,
    divergence_half_angle: f64,
    params: &OpticalParams,
    water: &WaterType,
) -> f64 {
    let launch = params.tx_power * params.tx_efficiency * params.rx_efficiency;
    let spread = 2.0 * PI * d * d * (1.0 - divergence_half_angle.cos());
    launch * transmittance(water.extinction_c, d) * params.rx_aperture_area * angular_gain / spread
}

/// Power collected across all receive faces (W); zero out of beam.
pub fn received_power(
    geom: &LinkGeometry,
    faces: &FaceSet,
    params: &OpticalParams,
    water: &WaterType,
) -> f64 {
    if !geom.in_beam {
        return 0.0;
    }
    received_power_at(
        geom.distance,
        angular_gain(geom),
        faces.divergence_half_angle(),
        params,
        water,
    )
}

/// Amplitude SNR of intensity-modulated OOK, `R·Pr/σ`.
pub fn snr_amplitude(pr: f64, params: &OpticalParams) -> f64 {
    params.responsivity * pr / params.noise_sigma()
}

pub fn ber(pr: f64, params: &OpticalParams) -> f64 {
    q_function(snr_amplitude(pr, params))
}

/// Shannon rate (bps) gated by the FEC threshold.
pub fn capacity(pr: f64, params: &OpticalParams) -> f64 {
    if pr <= 0.0 || ber(pr, params) > params.fec_ber_threshold {
        return 0.0;
    }
    let snr = snr_amplitude(pr, params).powi(2);
    params.bandwidth * (1.0 + snr).log2()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalLink {
    pub received_power: f64,
    pub ber: f64,
    pub capacity: f64,
}

pub fn link_budget(
    geom: &LinkGeometry,
    faces: &FaceSet,
    params: &OpticalParams,
    water: &WaterType,
) -> OpticalLink {
    let pr = received_power(geom, faces, params, water);
    OpticalLink {
        received_power: pr,
        ber: ber(pr, params),
        capacity: capacity(pr, params),
    }
}

//! Omnidirectional acoustic link model: Thorp absorption, practical
//! spreading, four-component ambient noise and a narrowband SNR.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optical::q_function;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcousticParams {
    /// dB re µPa @ 1 m.
    pub source_level: f64,
    /// Carrier, kHz.
    pub frequency: f64,
    pub spreading_exponent: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Shipping activity in [0, 1].
    pub shipping_factor: f64,
    /// m/s.
    pub wind_speed: f64,
    pub fec_ber_threshold: f64,
}

impl Default for AcousticParams {
    fn default() -> Self {
        AcousticParams {
            source_level: 135.0,
            frequency: 20.0,
            spreading_exponent: 1.5,
            bandwidth: 10.0e3,
            shipping_factor: 0.5,
            wind_speed: 5.0,
            fec_ber_threshold: 1.0e-3,
        }
    }
}

impl AcousticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::config("acoustic.frequency", "must be positive"));
        }
        if !(1.0..=2.0).contains(&self.spreading_exponent) {
            return Err(Error::config(
                "acoustic.spreading_exponent",
                "must lie in [1, 2]",
            ));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::config("acoustic.bandwidth", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.shipping_factor) {
            return Err(Error::config(
                "acoustic.shipping_factor",
                "must lie in [0, 1]",
            ));
        }
        if !(self.wind_speed.is_finite() && self.wind_speed >= 0.0) {
            return Err(Error::config("acoustic.wind_speed", "must be non-negative"));
        }
        if !self.source_level.is_finite() {
            return Err(Error::config("acoustic.source_level", "must be finite"));
        }
        if !(self.fec_ber_threshold > 0.0 && self.fec_ber_threshold < 0.5) {
            return Err(Error::config(
                "acoustic.fec_ber_threshold",
                "must lie in (0, 0.5)",
            ));
        }
        Ok(())
    }
}

/// Thorp absorption in dB/km, `f` in kHz.
pub fn thorp_absorption(f: f64) -> f64 {
    let f2 = f * f;
    0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003
}

/// Transmission loss in dB over `d` metres (reference distance 1 m).
pub fn path_loss(d: f64, params: &AcousticParams) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::Domain(format!(
            "acoustic path loss needs d >= 1 m, got {d}"
        )));
    }
    Ok(10.0 * params.spreading_exponent * d.log10()
        + d / 1000.0 * thorp_absorption(params.frequency))
}

/// Individual ambient noise components, dB re µPa²/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseComponents {
    pub turbulence: f64,
    pub shipping: f64,
    pub waves: f64,
    pub thermal: f64,
}

impl NoiseComponents {
    pub fn at(f: f64, params: &AcousticParams) -> Self {
        let lf = f.log10();
        NoiseComponents {
            turbulence: 17.0 - 30.0 * lf,
            shipping: 40.0 + 20.0 * (params.shipping_factor - 0.5) + 26.0 * lf
                - 60.0 * (f + 0.03).log10(),
            waves: 50.0 + 7.5 * params.wind_speed.sqrt() + 20.0 * lf - 40.0 * (f + 0.4).log10(),
            thermal: -15.0 + 20.0 * lf,
        }
    }

    pub fn total(&self) -> f64 {
        let sum: f64 = [self.turbulence, self.shipping, self.waves, self.thermal]
            .iter()
            .map(|db| 10f64.powf(db / 10.0))
            .sum();
        10.0 * sum.log10()
    }
}

/// Ambient noise power spectral density at `f` kHz.
pub fn noise_psd(f: f64, params: &AcousticParams) -> f64 {
    NoiseComponents::at(f, params).total()
}

/// Received level in dB re µPa at distance `d`.
pub fn received_level(d: f64, params: &AcousticParams) -> Result<f64> {
    Ok(params.source_level - path_loss(d, params)?)
}

/// Narrowband SNR at the carrier, in dB.
pub fn snr_db(d: f64, params: &AcousticParams) -> Result<f64> {
    let noise = noise_psd(params.frequency, params) + 10.0 * params.bandwidth.log10();
    Ok(received_level(d, params)? - noise)
}

pub fn ber(d: f64, params: &AcousticParams) -> Result<f64> {
    let snr = 10f64.powf(snr_db(d, params)? / 10.0);
    Ok(q_function(snr.sqrt()))
}

/// Shannon rate (bps) gated by the FEC threshold.
pub fn capacity(d: f64, params: &AcousticParams) -> Result<f64> {
    let snr = 10f64.powf(snr_db(d, params)? / 10.0);
    if q_function(snr.sqrt()) > params.fec_ber_threshold {
        return Ok(0.0);
    }
    Ok(params.bandwidth * (1.0 + snr).log2())
}

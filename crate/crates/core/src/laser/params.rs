use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::KeyValues;
use crate::error::{Error, Result};

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

const DEFAULT_CONFIG: &str = include_str!("../../config/laser_dfb_1550.conf");

/// Physical coefficients of the single-mode rate equations (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserParams {
    /// Active-region volume V, m³.
    pub active_volume: f64,
    /// Optical confinement factor Γ.
    pub confinement: f64,
    /// Group velocity times differential gain, m³/s.
    pub group_gain: f64,
    /// Transparency carrier density N_tr, m⁻³.
    pub transparency_density: f64,
    /// Gain compression factor ε, m³.
    pub gain_compression: f64,
    /// Carrier lifetime τ_n, s.
    pub carrier_lifetime: f64,
    /// Photon lifetime τ_p, s.
    pub photon_lifetime: f64,
    /// Spontaneous emission coupling β.
    pub spontaneous_fraction: f64,
    /// Injection efficiency η_i.
    pub injection_efficiency: f64,
}

const KEYS: [&str; 9] = [
    "active_volume",
    "confinement",
    "group_gain",
    "transparency_density",
    "gain_compression",
    "carrier_lifetime",
    "photon_lifetime",
    "spontaneous_fraction",
    "injection_efficiency",
];

impl Default for LaserParams {
    fn default() -> Self {
        let kv = KeyValues::parse(DEFAULT_CONFIG).expect("bundled laser config parses");
        Self::from_key_values(&kv).expect("bundled laser config is valid")
    }
}

impl LaserParams {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        for key in kv.keys() {
            if !KEYS.contains(&key) {
                return Err(Error::Format(format!("unknown laser parameter `{key}`")));
            }
        }
        let p = LaserParams {
            active_volume: kv.require("active_volume")?,
            confinement: kv.require("confinement")?,
            group_gain: kv.require("group_gain")?,
            transparency_density: kv.require("transparency_density")?,
            gain_compression: kv.require("gain_compression")?,
            carrier_lifetime: kv.require("carrier_lifetime")?,
            photon_lifetime: kv.require("photon_lifetime")?,
            spontaneous_fraction: kv.require("spontaneous_fraction")?,
            injection_efficiency: kv.require("injection_efficiency")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::load(path)?)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        for (key, value) in KEYS.iter().zip(self.values()) {
            kv.set(key, format!("{value:e}"));
        }
        kv
    }

    fn values(&self) -> [f64; 9] {
        [
            self.active_volume,
            self.confinement,
            self.group_gain,
            self.transparency_density,
            self.gain_compression,
            self.carrier_lifetime,
            self.photon_lifetime,
            self.spontaneous_fraction,
            self.injection_efficiency,
        ]
    }

    /// Checks positivity and the (0, 1] range of the dimensionless fractions.
    ///
    /// Gain compression and the spontaneous fraction may be zero, which is
    /// the idealised limit used by several analytic checks.
    pub fn validate(&self) -> Result<()> {
        for (key, value) in KEYS.iter().zip(self.values()) {
            if !value.is_finite() {
                return Err(Error::validation(format!("{key} must be finite")));
            }
            let may_be_zero = matches!(*key, "gain_compression" | "spontaneous_fraction");
            if value < 0.0 || (value == 0.0 && !may_be_zero) {
                return Err(Error::validation(format!("{key} must be positive, got {value}")));
            }
        }
        for (key, value) in [
            ("confinement", self.confinement),
            ("spontaneous_fraction", self.spontaneous_fraction),
            ("injection_efficiency", self.injection_efficiency),
        ] {
            if value > 1.0 {
                return Err(Error::validation(format!("{key} must lie in (0, 1], got {value}")));
            }
        }
        Ok(())
    }

    /// Carrier density at threshold in the β → 0 limit.
    pub fn threshold_density(&self) -> f64 {
        self.transparency_density + 1.0 / (self.confinement * self.group_gain * self.photon_lifetime)
    }

    /// Natural photon-density scale used to non-dimensionalise the state.
    pub fn photon_scale(&self) -> f64 {
        self.confinement * self.photon_lifetime * self.transparency_density / self.carrier_lifetime
    }

    /// SHA-256 of the canonical key-value rendering, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_key_values().to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

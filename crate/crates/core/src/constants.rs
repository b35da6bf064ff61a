//! Physical constants (CODATA 2018 exact or recommended values).

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, eV·s.
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;
/// Speed of light, nm/s.
pub const SPEED_OF_LIGHT_NM_S: f64 = 2.997_924_58e17;
/// Electron rest energy, keV.
pub const ELECTRON_REST_KEV: f64 = 510.998_95;

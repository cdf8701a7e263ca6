//! Unit conversions between the engineering boundary (THz, km, dBm, dB/km)
//! and the SI quantities (Hz, m, W, 1/m) used internally.
//!
//! All loss coefficients inside the library are FIELD loss in 1/m; the
//! familiar dB/km figure is a POWER loss, hence the factor-two in the
//! conversions below.

/// Speed of light in vacuum, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;

/// dBm to watts.
pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Watts to dBm. Returns `-inf` for zero power.
pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

/// Power dB/km to field loss in 1/m.
///
/// `P(z) = P(0)·10^(-a_db·z_km/10) = P(0)·e^(-2·alpha·z_m)` gives
/// `alpha = a_db·ln(10)/20/1000`.
pub fn db_per_km_to_field_loss(db_per_km: f64) -> f64 {
    db_per_km * std::f64::consts::LN_10 / 20.0 / 1000.0
}

/// Field loss 1/m back to power dB/km.
pub fn field_loss_to_db_per_km(alpha: f64) -> f64 {
    alpha * 20.0 * 1000.0 / std::f64::consts::LN_10
}

/// THz to Hz.
pub fn thz_to_hz(thz: f64) -> f64 {
    thz * 1e12
}

/// Hz to THz.
pub fn hz_to_thz(hz: f64) -> f64 {
    hz * 1e-12
}

/// Power dB to linear.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dbm_conversions() {
        // 3 dBm = 1.9953 mW
        assert_relative_eq!(dbm_to_w(3.0), 1.9952623149688796e-3, max_relative = 1e-12);
        assert_relative_eq!(w_to_dbm(1e-3), 0.0, epsilon = 1e-12);
        assert_relative_eq!(w_to_dbm(dbm_to_w(-17.3)), -17.3, epsilon = 1e-12);
    }

    #[test]
    fn field_loss_conversion() {
        // 0.2 dB/km power loss is 2.3026e-5 1/m field loss.
        let alpha = db_per_km_to_field_loss(0.2);
        assert_relative_eq!(alpha, 2.302585092994046e-5, max_relative = 1e-12);
        assert_relative_eq!(field_loss_to_db_per_km(alpha), 0.2, max_relative = 1e-12);
        // Sanity: 0.2 dB/km over 95 km is 19 dB, i.e. exp(-2 alpha L) = 10^-1.9.
        let transfer = (-2.0 * alpha * 95_000.0).exp();
        assert_relative_eq!(transfer, 10f64.powf(-1.9), max_relative = 1e-12);
    }
}

//! Shared plumbing for the stcoforge workspace: content hashing for
//! manifests, signed-log transforms for quantities spanning many decades,
//! and the physical constants used across crates.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Elementary charge (C).
pub const Q_ELEMENTARY: f64 = 1.602_176_634e-19;
/// Vacuum permittivity (F/cm).
pub const EPS0_F_PER_CM: f64 = 8.854_187_8128e-14;
/// Thermal voltage at the reference temperature (V).
pub const THERMAL_VOLTAGE: f64 = 0.02585;
/// Micrometers to centimeters.
pub const UM_TO_CM: f64 = 1e-4;

/// Hex SHA-256 of a value's canonical JSON serialization.
///
/// serde_json preserves struct field order, so identical inputs always
/// produce identical hashes. Used to fingerprint manifests and configs;
/// anything time- or machine-dependent must stay out of the hashed value.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Signed base-10 log compression: sign(v) * log10(1 + |v|).
///
/// Doping, charge density and currents span ~20 decades with both signs;
/// raw values are useless as features or regression targets.
pub fn signed_log10(v: f64) -> f64 {
    v.signum() * (1.0 + v.abs()).log10()
}

/// Inverse of [`signed_log10`].
pub fn signed_exp10(u: f64) -> f64 {
    u.signum() * (10f64.powf(u.abs()) - 1.0)
}

/// Signed log scaled to a reference unit: sign(v) * log10(1 + |v|/unit).
pub fn signed_log10_scaled(v: f64, unit: f64) -> f64 {
    v.signum() * (1.0 + v.abs() / unit).log10()
}

/// Inverse of [`signed_log10_scaled`].
pub fn signed_exp10_scaled(u: f64, unit: f64) -> f64 {
    u.signum() * (10f64.powf(u.abs()) - 1.0) * unit
}

/// Round to `sig` significant decimal digits by formatting and re-parsing.
/// The result is exactly the f64 that parsing the printed form yields, so
/// print -> parse round trips are identities.
pub fn round_sig(v: f64, sig: usize) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    let s = format!("{:.*e}", sig.saturating_sub(1), v);
    s.parse().expect("formatted float reparses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_log_round_trip() {
        for &v in &[0.0, 1.0, -1.0, 3.7e17, -2.2e-9, 1e20] {
            let back = signed_exp10(signed_log10(v));
            assert!(
                (back - v).abs() <= 1e-12 * v.abs().max(1.0),
                "round trip failed for {v}: {back}"
            );
        }
    }

    #[test]
    fn scaled_round_trip() {
        let unit = 1e-12;
        for &v in &[0.0, 1e-12, -4.3e-6, 2.5e-3] {
            let back = signed_exp10_scaled(signed_log10_scaled(v, unit), unit);
            assert!((back - v).abs() <= 1e-9 * v.abs().max(unit));
        }
    }

    #[test]
    fn hash_is_stable_and_input_sensitive() {
        #[derive(Serialize)]
        struct M {
            seed: u64,
            n: usize,
        }
        let a = content_hash(&M { seed: 7, n: 3 });
        let b = content_hash(&M { seed: 7, n: 3 });
        let c = content_hash(&M { seed: 8, n: 3 });
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn round_sig_reparse_identity() {
        let x = std::f64::consts::PI * 1e-13;
        let r = round_sig(x, 6);
        let s = format!("{:.5e}", r);
        let p: f64 = s.parse().unwrap();
        assert_eq!(r, p);
    }
}

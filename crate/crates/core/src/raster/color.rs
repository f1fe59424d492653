//! IEC 61966-2-1 sRGB transfer curves.

/// Decodes an sRGB-encoded value to linear light.
#[inline]
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Encodes a linear-light value with the sRGB curve.
#[inline]
pub fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mid_grey_decodes_to_known_value() {
        // ((128/255 + 0.055) / 1.055)^2.4
        assert!((srgb_to_linear(128.0 / 255.0) - 0.21586).abs() < 5e-6);
    }

    #[test]
    fn endpoints() {
        assert_eq!(srgb_to_linear(0.0), 0.0);
        assert!((srgb_to_linear(1.0) - 1.0).abs() < 1e-12);
        assert_eq!(linear_to_srgb(0.0), 0.0);
        assert!((linear_to_srgb(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encode_decode_identity_on_dense_grid() {
        for i in 0..=100_000 {
            let v = i as f64 / 100_000.0;
            assert!((linear_to_srgb(srgb_to_linear(v)) - v).abs() < 1e-6, "v = {v}");
            assert!((srgb_to_linear(linear_to_srgb(v)) - v).abs() < 1e-6, "v = {v}");
        }
    }

    #[test]
    fn curve_is_continuous_at_the_breakpoint() {
        let lo = srgb_to_linear(0.04045);
        let hi = ((0.04045f64 + 0.055) / 1.055).powf(2.4);
        assert!((lo - hi).abs() < 1e-7);
    }
}

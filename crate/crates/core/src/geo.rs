//! Spherical/Cartesian direction conversions.
//!
//! Convention: x points to azimuth 0, y to azimuth 90 degrees, z up.
//! `x = cos(el) * cos(az)`, `y = cos(el) * sin(az)`, `z = sin(el)`.

/// Convert azimuth/elevation in degrees to a Cartesian unit vector.
pub fn azel_to_cartesian(azimuth_deg: f64, elevation_deg: f64) -> [f64; 3] {
    let az = azimuth_deg.to_radians();
    let el = elevation_deg.to_radians();
    [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
}

/// Convert a direction vector to (azimuth, elevation) in degrees.
///
/// Azimuth is reported in [-180, 180), elevation in [-90, 90]. At the poles
/// (|elevation| = 90) azimuth is degenerate and reported as 0.
pub fn cartesian_to_azel(v: [f64; 3]) -> (f64, f64) {
    let norm = vec_norm(v);
    if norm == 0.0 {
        return (0.0, 0.0);
    }
    let z = (v[2] / norm).clamp(-1.0, 1.0);
    let el = z.asin().to_degrees();
    if v[0] == 0.0 && v[1] == 0.0 {
        return (0.0, el);
    }
    let mut az = v[1].atan2(v[0]).to_degrees();
    if az >= 180.0 {
        az -= 360.0;
    }
    (az, el)
}

pub fn vec_norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn vec_dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Scale a vector to unit length. Zero vectors are returned unchanged.
pub fn vec_normalize(v: [f64; 3]) -> [f64; 3] {
    let n = vec_norm(v);
    if n == 0.0 {
        v
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

/// Apply a 3x3 matrix to a vector.
pub fn mat_apply(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convention_anchors() {
        let v = azel_to_cartesian(0.0, 0.0);
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12 && v[2].abs() < 1e-12);
        let v = azel_to_cartesian(90.0, 0.0);
        assert!(v[0].abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12 && v[2].abs() < 1e-12);
        let v = azel_to_cartesian(0.0, 90.0);
        assert!(v[0].abs() < 1e-7 && v[1].abs() < 1e-12 && (v[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roundtrip_integer_degrees() {
        for az in (-180..180).step_by(15) {
            for el in (-75..=75).step_by(15) {
                let v = azel_to_cartesian(az as f64, el as f64);
                let (a, e) = cartesian_to_azel(v);
                assert!((a - az as f64).abs() < 1e-9, "az {az}: got {a}");
                assert!((e - el as f64).abs() < 1e-9, "el {el}: got {e}");
            }
        }
    }

    #[test]
    fn pole_azimuth_is_canonical_zero() {
        let v = azel_to_cartesian(55.0, 90.0);
        let (a, e) = cartesian_to_azel([0.0, 0.0, v[2]]);
        assert_eq!(a, 0.0);
        assert!((e - 90.0).abs() < 1e-9);
    }
}

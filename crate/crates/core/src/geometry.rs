//! Planar vector helpers shared by the simulator and the force field.

use std::f64::consts::PI;

/// 2D vector used for positions, forces and headings.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Angle of `v` measured from +x, in `(-π, π]`.
pub fn heading_of(v: &Vec2) -> f64 {
    wrap_angle(v.y.atan2(v.x))
}

/// Unit vector pointing along `angle`.
pub fn unit_from_angle(angle: f64) -> Vec2 {
    Vec2::new(angle.cos(), angle.sin())
}

/// `v` rotated by +90°.
pub fn perp(v: &Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// `v` rotated counterclockwise by `angle`.
pub fn rotate(v: &Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Normalizes `v`, returning `None` for the zero vector.
pub fn try_normalize(v: &Vec2) -> Option<Vec2> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.25), 0.25);
        assert_abs_diff_eq!(wrap_angle(-7.0 * PI + 0.1), -PI + 0.1, epsilon = 1e-12);
    }

    #[test]
    fn perp_is_ccw() {
        let v = Vec2::new(1.0, 0.0);
        assert_eq!(perp(&v), Vec2::new(0.0, 1.0));
        let r = rotate(&v, PI / 2.0);
        assert_abs_diff_eq!(r.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.y, 1.0);
    }

    #[test]
    fn normalize_zero_is_none() {
        assert!(try_normalize(&Vec2::zeros()).is_none());
        assert_eq!(try_normalize(&Vec2::new(0.0, 2.0)), Some(Vec2::new(0.0, 1.0)));
    }
}

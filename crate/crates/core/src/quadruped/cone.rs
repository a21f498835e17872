use nalgebra::Vector3;

/// Euclidean projection onto the friction cone `‖f_t‖ ≤ μ f_n` about `normal` (unit).
pub fn project_to_cone(f: &Vector3<f64>, normal: &Vector3<f64>, mu: f64) -> Vector3<f64> {
    let fn_ = f.dot(normal);
    let tangential = f - normal * fn_;
    let t = tangential.norm();
    if t <= mu * fn_ {
        return *f;
    }
    if mu * t <= -fn_ {
        return Vector3::zeros();
    }
    let n_new = (fn_ + mu * t) / (1.0 + mu * mu);
    normal * n_new + tangential * (mu * n_new / t)
}

pub fn in_cone(f: &Vector3<f64>, normal: &Vector3<f64>, mu: f64, tol: f64) -> bool {
    let fn_ = f.dot(normal);
    (f - normal * fn_).norm() <= mu * fn_ + tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cone_cases() {
        let n = Vector3::z();
        let inside = Vector3::new(1.0, 2.0, 10.0);
        assert_eq!(project_to_cone(&inside, &n, 0.7), inside);
        assert_eq!(
            project_to_cone(&Vector3::new(0.1, 0.0, -5.0), &n, 0.7),
            Vector3::zeros()
        );
        let p = project_to_cone(&Vector3::new(10.0, 0.0, 1.0), &n, 0.7);
        assert!(((p.x * p.x + p.y * p.y).sqrt() - 0.7 * p.z).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn projection_is_nearest_feasible_point(
            x in -100.0..100.0f64, y in -100.0..100.0f64, z in -100.0..100.0f64,
            a in 0.0..std::f64::consts::TAU, b in -1.0..1.0f64, r in 0.0..1.0f64
        ) {
            let n = Vector3::z();
            let f = Vector3::new(x, y, z);
            let p = project_to_cone(&f, &n, 0.7);
            prop_assert!(in_cone(&p, &n, 0.7, 1e-9));
            // Any other cone point on a sampled ray is no closer.
            let h = (b + 1.0) * 100.0;
            let other = Vector3::new(0.7 * h * r * a.cos(), 0.7 * h * r * a.sin(), h);
            prop_assert!((f - p).norm() <= (f - other).norm() + 1e-9);
        }
    }
}

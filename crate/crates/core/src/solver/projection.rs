//! Euclidean projections onto the relaxed control sets.

fn norm2(v: f64, w: &[f64]) -> f64 {
    v * v + w.iter().map(|a| a * a).sum::<f64>()
}

/// Projection onto `B_k⁺ = {v ≥ 0, v² + |w|² ≤ 1}`.
pub fn project_half_ball(v: f64, w: &[f64]) -> (f64, Vec<f64>) {
    let mut w = w.to_vec();
    let v = project_in_place(v, &mut w, 0.0);
    (v, w)
}

/// Projection onto `{v ≥ η} ∩ unit ball`, `0 ≤ η < 1`.
pub fn project_restricted(v: f64, w: &[f64], eta: f64) -> (f64, Vec<f64>) {
    let mut w = w.to_vec();
    let v = project_in_place(v, &mut w, eta);
    (v, w)
}

/// In-place projection onto `{v ≥ lo} ∩ unit ball`; returns the new `v`.
///
/// For `lo = 0` this is the clamp followed by a radial rescale. For `lo > 0`
/// the candidates are tried in order: radial projection, half-space clamp,
/// and the point on the rim circle `v = lo` nearest to `w`.
pub(crate) fn project_in_place(v: f64, w: &mut [f64], lo: f64) -> f64 {
    if lo <= 0.0 {
        let v = v.max(0.0);
        let r = norm2(v, w).sqrt();
        if r > 1.0 {
            w.iter_mut().for_each(|a| *a /= r);
            return v / r;
        }
        return v;
    }
    let r = norm2(v, w).sqrt();
    if r > 1.0 && v / r >= lo {
        w.iter_mut().for_each(|a| *a /= r);
        return v / r;
    }
    if r <= 1.0 && v >= lo {
        return v;
    }
    if norm2(lo, w) <= 1.0 {
        return lo;
    }
    let wn = w.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = (1.0 - lo * lo).max(0.0).sqrt() / wn;
    w.iter_mut().for_each(|a| *a *= scale);
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_ball_examples() {
        assert_eq!(project_half_ball(0.5, &[0.5]), (0.5, vec![0.5]));
        assert_eq!(project_half_ball(-1.0, &[0.0]), (0.0, vec![0.0]));
        let (v, w) = project_half_ball(3.0, &[4.0]);
        assert!((v - 0.6).abs() < 1e-15 && (w[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn restricted_cases() {
        let (v, w) = project_restricted(0.0, &[0.5], 0.1);
        assert_eq!((v, w), (0.1, vec![0.5]));
        let (v, w) = project_restricted(0.0, &[2.0], 0.1);
        assert_eq!(v, 0.1);
        assert!((w[0] - (0.99f64).sqrt()).abs() < 1e-15);
        let (v, w) = project_restricted(3.0, &[4.0], 0.1);
        assert!((v - 0.6).abs() < 1e-15 && (w[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn restricted_projection_is_nearest_on_a_grid() {
        let eta = 0.2;
        for &(v, w) in &[(-0.5, 1.5), (0.1, -0.3), (0.05, 2.0), (2.0, 0.1), (-3.0, -0.2)] {
            let (pv, pw) = project_restricted(v, &[w], eta);
            let d0 = (pv - v).powi(2) + (pw[0] - w).powi(2);
            for i in 0..=400 {
                for j in 0..=400 {
                    let cv = eta + (1.0 - eta) * i as f64 / 400.0;
                    let cw = -1.0 + 2.0 * j as f64 / 400.0;
                    if cv * cv + cw * cw <= 1.0 {
                        let d = (cv - v).powi(2) + (cw - w).powi(2);
                        assert!(d >= d0 - 1e-12, "({v},{w}) -> ({pv},{}) beaten by ({cv},{cw})", pw[0]);
                    }
                }
            }
        }
    }
}

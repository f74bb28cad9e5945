use serde::Serialize;

use crate::sft::{periodic_points, Point};

use super::Generator;

/// Empirical check of `Q(x,n) <= C' e^{(s+eps)|n|}` given periodic growth
/// `Q(p,k) <= C e^{sk}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub s: f64,
    pub eps: f64,
    /// `max Q(p,k) e^{-sk}` over periods `k <= k_max`.
    pub periodic_c: f64,
    /// `C'` fitted on `|n| <= horizon/2`.
    pub fitted_c_prime: f64,
    /// `sup log Q(x,n) / |n|` over all samples and `1 <= |n| <= horizon`.
    pub empirical_exponent: f64,
    /// Same supremum restricted to `|n| > horizon/2`.
    pub tail_exponent: f64,
    /// Whether the fitted bound survives on the full horizon.
    pub passes: bool,
}

pub fn growth_exponent_check(
    g: &Generator,
    s: f64,
    eps: f64,
    samples: &[Point],
    horizon: usize,
    k_max: usize,
) -> GrowthReport {
    let m = g.transition_matrix();
    let mut periodic_c: f64 = 1.0;
    for k in 1..=k_max {
        for p in periodic_points(m, k) {
            let q = g.quasiconformal_distortion(&p, k as i64);
            periodic_c = periodic_c.max(q * (-s * k as f64).exp());
        }
    }
    let h = horizon as i64;
    // (|n|, Q) over every sample
    let mut values = Vec::new();
    for x in samples {
        let prods = g.orbit_products(x, -h, h);
        for (idx, a) in prods.iter().enumerate() {
            let n = (idx as i64 - h).abs();
            if n > 0 {
                values.push((n, a.quasiconformal()));
            }
        }
    }
    let rate = s + eps;
    let half = h / 2;
    let fitted_c_prime = values
        .iter()
        .filter(|(n, _)| *n <= half.max(1))
        .map(|(n, q)| q * (-rate * *n as f64).exp())
        .fold(1.0, f64::max);
    let passes = values
        .iter()
        .all(|(n, q)| *q <= fitted_c_prime * (rate * *n as f64).exp() * (1.0 + 1e-12));
    let exponent = |filter: &dyn Fn(i64) -> bool| {
        values
            .iter()
            .filter(|(n, _)| filter(*n))
            .map(|(n, q)| q.ln().max(0.0) / *n as f64)
            .fold(0.0, f64::max)
    };
    GrowthReport {
        s,
        eps,
        periodic_c,
        fitted_c_prime,
        empirical_exponent: exponent(&|_| true),
        tail_exponent: exponent(&|n| n > half),
        passes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::CylinderTable;
    use crate::linops::OperatorValue;
    use crate::sft::TransitionMatrix;

    fn samples(m: &TransitionMatrix) -> Vec<Point> {
        m.admissible_words(6).iter().map(|w| Point::extending(m, w, -3).unwrap()).collect()
    }

    #[test]
    fn isometric_generator_has_zero_exponent() {
        let m = TransitionMatrix::golden_mean();
        let theta = CylinderTable::from_fn(&m, 0, |w| 0.4 + w[0] as f64);
        let g = Generator::conjugated_rotation(&m, &CylinderTable::constant(&m, OperatorValue::identity(2)), &theta).unwrap();
        let rep = growth_exponent_check(&g, 0.0, 0.1, &samples(&m), 30, 8);
        assert!(rep.passes);
        assert!(rep.empirical_exponent < 1e-12);
        assert!((rep.periodic_c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conjugated_rotation_is_bounded() {
        let m = TransitionMatrix::golden_mean();
        let c = OperatorValue::from_rows(2, &[1.2, 0.3, 0.0, 1.0 / 1.2]).unwrap();
        let theta = CylinderTable::from_fn(&m, 1, |w| 0.9 + 0.3 * w[1] as f64 - 0.2 * w[2] as f64);
        let g = Generator::conjugated_rotation(&m, &CylinderTable::constant(&m, c.clone()), &theta).unwrap();
        let rep = growth_exponent_check(&g, 0.0, 0.1, &samples(&m), 40, 8);
        assert!(rep.passes);
        let qc = c.quasiconformal();
        assert!(rep.fitted_c_prime <= qc * qc + 1e-9);
    }

    #[test]
    fn diagonal_fails_with_log_four() {
        let m = TransitionMatrix::golden_mean();
        let g = Generator::diagonal(&m, &[2.0, 0.5]).unwrap();
        let rep = growth_exponent_check(&g, 0.0, 0.1, &samples(&m), 20, 6);
        assert!(!rep.passes);
        assert!((rep.empirical_exponent - 4f64.ln()).abs() < 1e-12);
        assert!((rep.periodic_c - 4f64.powi(6)).abs() < 1e-6);
    }
}

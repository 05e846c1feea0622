/// Barycentric quadrature on the reference triangle. Weights are fractions
/// of the element area, so `∫_T g ≈ |T| Σ w_q g(x_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn centroid() -> Self {
        QuadratureRule { points: vec![[1.0 / 3.0; 3]], weights: vec![1.0], degree: 1 }
    }

    /// Three interior points, exact for quadratics.
    pub fn three_point() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        QuadratureRule {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Six-point rule, exact for quartics.
    pub fn six_point() -> Self {
        let a1 = 0.445_948_490_915_965;
        let b1 = 1.0 - 2.0 * a1;
        let w1 = 0.223_381_589_678_011;
        let a2 = 0.091_576_213_509_771;
        let b2 = 1.0 - 2.0 * a2;
        let w2 = 0.109_951_743_655_322;
        QuadratureRule {
            points: vec![[b1, a1, a1], [a1, b1, a1], [a1, a1, b1], [b2, a2, a2], [a2, b2, a2], [a2, a2, b2]],
            weights: vec![w1, w1, w1, w2, w2, w2],
            degree: 4,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

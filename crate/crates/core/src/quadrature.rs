//! Quadrature rules on simplices in barycentric form. Weights sum to one, so
//! an integral is `measure * Σ w_q f(x_q)`.

/// A rule with `dim + 1` barycentric coordinates per point.
#[derive(Debug, Clone, Copy)]
pub struct Rule {
    pub points: &'static [[f64; 4]],
    pub weights: &'static [f64],
}

impl Rule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static [f64; 4], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

const G3_A: f64 = 0.112_701_665_379_258_31; // (1 - sqrt(3/5)) / 2
const G3_B: f64 = 0.887_298_334_620_741_7;

/// 3-point Gauss–Legendre rule on a segment (exact to degree 5).
pub const EDGE_GAUSS3: Rule = Rule {
    points: &[[G3_A, G3_B, 0.0, 0.0], [0.5, 0.5, 0.0, 0.0], [G3_B, G3_A, 0.0, 0.0]],
    weights: &[5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
};

/// 4-point symmetric rule on a triangle (exact to degree 3).
pub const TRI_DEG3: Rule = Rule {
    points: &[
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0],
        [0.6, 0.2, 0.2, 0.0],
        [0.2, 0.6, 0.2, 0.0],
        [0.2, 0.2, 0.6, 0.0],
    ],
    weights: &[-27.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0],
};

/// Edge-midpoint rule on a triangle (exact to degree 2).
pub const TRI_DEG2: Rule = Rule {
    points: &[[0.5, 0.5, 0.0, 0.0], [0.0, 0.5, 0.5, 0.0], [0.5, 0.0, 0.5, 0.0]],
    weights: &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
};

const D4_A1: f64 = 0.445_948_490_915_964_9;
const D4_B1: f64 = 1.0 - 2.0 * D4_A1;
const D4_A2: f64 = 0.091_576_213_509_770_74;
const D4_B2: f64 = 1.0 - 2.0 * D4_A2;
const D4_W1: f64 = 0.223_381_589_678_011_47;
const D4_W2: f64 = 0.109_951_743_655_321_87;

/// 6-point rule on a triangle (exact to degree 4).
pub const TRI_DEG4: Rule = Rule {
    points: &[
        [D4_B1, D4_A1, D4_A1, 0.0],
        [D4_A1, D4_B1, D4_A1, 0.0],
        [D4_A1, D4_A1, D4_B1, 0.0],
        [D4_B2, D4_A2, D4_A2, 0.0],
        [D4_A2, D4_B2, D4_A2, 0.0],
        [D4_A2, D4_A2, D4_B2, 0.0],
    ],
    weights: &[D4_W1, D4_W1, D4_W1, D4_W2, D4_W2, D4_W2],
};

const T2_A: f64 = 0.138_196_601_125_010_5; // (5 - sqrt 5) / 20
const T2_B: f64 = 0.585_410_196_624_968_5; // (5 + 3 sqrt 5) / 20

/// 4-point rule on a tetrahedron (exact to degree 2).
pub const TET_DEG2: Rule = Rule {
    points: &[
        [T2_B, T2_A, T2_A, T2_A],
        [T2_A, T2_B, T2_A, T2_A],
        [T2_A, T2_A, T2_B, T2_A],
        [T2_A, T2_A, T2_A, T2_B],
    ],
    weights: &[0.25, 0.25, 0.25, 0.25],
};

const K_A: f64 = 0.399_403_576_166_799_2; // (1 + sqrt(5/14)) / 4
const K_B: f64 = 0.100_596_423_833_200_8; // (1 - sqrt(5/14)) / 4
const K_C: f64 = 1.0 / 14.0;
const K_D: f64 = 11.0 / 14.0;
const K_W0: f64 = -74.0 / 5625.0 * 6.0;
const K_W1: f64 = 343.0 / 45000.0 * 6.0;
const K_W2: f64 = 56.0 / 2250.0 * 6.0;

/// 11-point rule on a tetrahedron (exact to degree 4).
pub const TET_DEG4: Rule = Rule {
    points: &[
        [0.25, 0.25, 0.25, 0.25],
        [K_D, K_C, K_C, K_C],
        [K_C, K_D, K_C, K_C],
        [K_C, K_C, K_D, K_C],
        [K_C, K_C, K_C, K_D],
        [K_A, K_A, K_B, K_B],
        [K_A, K_B, K_A, K_B],
        [K_A, K_B, K_B, K_A],
        [K_B, K_A, K_A, K_B],
        [K_B, K_A, K_B, K_A],
        [K_B, K_B, K_A, K_A],
    ],
    weights: &[K_W0, K_W1, K_W1, K_W1, K_W1, K_W2, K_W2, K_W2, K_W2, K_W2, K_W2],
};

/// Rule for face averages of boundary data: segment in 2D, triangle in 3D.
pub fn face_rule(dim: usize) -> Rule {
    if dim == 2 {
        EDGE_GAUSS3
    } else {
        TRI_DEG3
    }
}

/// Cell rule exact for degree-4 polynomials, used for error norms.
pub fn cell_rule_deg4(dim: usize) -> Rule {
    if dim == 2 {
        TRI_DEG4
    } else {
        TET_DEG4
    }
}

/// Cell rule exact for degree-2 polynomials, used for the error indicator.
pub fn cell_rule_deg2(dim: usize) -> Rule {
    if dim == 2 {
        TRI_DEG2
    } else {
        TET_DEG2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫ over the reference simplex of Π λ_i^{k_i} = Π k_i! · d! / (d + Σ k_i)!
    /// divided by the simplex measure 1/d!, i.e. the barycentric average.
    fn monomial_average(k: &[u32]) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let d = (k.len() - 1) as u32;
        let s: u32 = k.iter().sum();
        k.iter().map(|&ki| fact(ki)).product::<f64>() * fact(d) / fact(d + s)
    }

    fn check_exact(rule: Rule, nbary: usize, degree: u32) {
        let mut exps = vec![0u32; nbary];
        loop {
            let s: u32 = exps.iter().sum();
            if s <= degree {
                let approx: f64 = rule
                    .iter()
                    .map(|(p, w)| w * exps.iter().enumerate().map(|(i, &k)| p[i].powi(k as i32)).product::<f64>())
                    .sum();
                let exact = monomial_average(&exps);
                assert!((approx - exact).abs() < 1e-14, "{exps:?}: {approx} vs {exact}");
            }
            let mut i = 0;
            loop {
                if i == nbary {
                    return;
                }
                exps[i] += 1;
                if exps[i] <= degree {
                    break;
                }
                exps[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn exactness() {
        check_exact(EDGE_GAUSS3, 2, 5);
        check_exact(TRI_DEG2, 3, 2);
        check_exact(TRI_DEG3, 3, 3);
        check_exact(TRI_DEG4, 3, 4);
        check_exact(TET_DEG2, 4, 2);
        check_exact(TET_DEG4, 4, 4);
    }

    #[test]
    fn x2y2_on_unit_triangle() {
        // vertices (0,0), (1,0), (0,1): x = λ1, y = λ2, area 1/2
        let v: f64 = TRI_DEG4.iter().map(|(p, w)| w * p[1].powi(2) * p[2].powi(2)).sum::<f64>() * 0.5;
        assert!((v - 1.0 / 180.0).abs() < 1e-15);
    }
}

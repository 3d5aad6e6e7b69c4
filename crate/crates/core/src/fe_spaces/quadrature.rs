//! Quadrature on the reference triangle `(0,0), (1,0), (0,1)` and on `[0, 1]`.

use crate::mesh::Point;

#[derive(Clone, Debug)]
pub struct Quadrature {
    points: Vec<Point>,
    weights: Vec<f64>,
    exactness_degree: usize,
}

impl Quadrature {
    /// 12-point symmetric rule exact for polynomials of total degree 6.
    ///
    /// Orbit parameters were refined to full double precision by Gauss-Newton
    /// on the moment equations.
    pub fn triangle_degree6() -> Self {
        const W1: f64 = 0.116_786_275_726_379_366_03;
        const A1: f64 = 0.501_426_509_658_179_157_42;
        const W2: f64 = 0.050_844_906_370_206_816_921;
        const A2: f64 = 0.873_821_971_016_995_543_32;
        const W3: f64 = 0.082_851_075_618_373_575_194;
        const B3: f64 = 0.053_145_049_844_816_947_353;
        const C3: f64 = 0.310_352_451_033_784_405_42;

        let mut bary: Vec<([f64; 3], f64)> = Vec::with_capacity(12);
        for (w, a) in [(W1, A1), (W2, A2)] {
            let b = 0.5 * (1.0 - a);
            bary.extend([([a, b, b], w), ([b, a, b], w), ([b, b, a], w)]);
        }
        let d3 = 1.0 - B3 - C3;
        for l in [
            [B3, C3, d3],
            [C3, B3, d3],
            [B3, d3, C3],
            [d3, B3, C3],
            [C3, d3, B3],
            [d3, C3, B3],
        ] {
            bary.push((l, W3));
        }
        Self {
            points: bary.iter().map(|(l, _)| [l[1], l[2]]).collect(),
            // weights above are normalized to unit area
            weights: bary.iter().map(|(_, w)| 0.5 * w).collect(),
            exactness_degree: 6,
        }
    }

    /// Degree-6 rule on each of the `4^levels` congruent subtriangles of the
    /// reference triangle, for integrands that oscillate within an element.
    pub fn composite(levels: usize) -> Self {
        let base = Self::triangle_degree6();
        let mut tris = vec![[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]];
        for _ in 0..levels {
            tris = tris
                .into_iter()
                .flat_map(|[a, b, c]: [Point; 3]| {
                    let mid = |p: Point, q: Point| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
                    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [bc, ca, ab]]
                })
                .collect();
        }
        let scale = 1.0 / tris.len() as f64;
        let mut points = Vec::with_capacity(tris.len() * base.len());
        let mut weights = Vec::with_capacity(tris.len() * base.len());
        for [a, b, c] in tris {
            for (p, w) in base.points.iter().zip(&base.weights) {
                points.push([
                    a[0] + p[0] * (b[0] - a[0]) + p[1] * (c[0] - a[0]),
                    a[1] + p[0] * (b[1] - a[1]) + p[1] * (c[1] - a[1]),
                ]);
                weights.push(w * scale);
            }
        }
        Self {
            points,
            weights,
            exactness_degree: 6,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn exactness_degree(&self) -> usize {
        self.exactness_degree
    }

    pub fn barycentric(&self, q: usize) -> [f64; 3] {
        let [x, y] = self.points[q];
        [1.0 - x - y, x, y]
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::triangle_degree6()
    }
}

/// Four-point Gauss-Legendre rule on `[0, 1]`, exact to degree 7.
pub fn gauss_legendre_unit() -> [(f64, f64); 4] {
    const X1: f64 = 0.339_981_043_584_856_264_8;
    const X2: f64 = 0.861_136_311_594_052_575_2;
    const W1: f64 = 0.652_145_154_862_546_142_6;
    const W2: f64 = 0.347_854_845_137_453_857_4;
    [
        (0.5 * (1.0 - X2), 0.5 * W2),
        (0.5 * (1.0 - X1), 0.5 * W1),
        (0.5 * (1.0 + X1), 0.5 * W1),
        (0.5 * (1.0 + X2), 0.5 * W2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn weights_sum_to_reference_area() {
        let q = Quadrature::triangle_degree6();
        assert_eq!(q.len(), 12);
        assert!((q.weights().iter().sum::<f64>() - 0.5).abs() < 1e-15);
        for p in q.points() {
            assert!(p[0] > 0.0 && p[1] > 0.0 && p[0] + p[1] < 1.0);
        }
    }

    #[test]
    fn exact_on_monomials_up_to_degree_six() {
        let q = Quadrature::triangle_degree6();
        for i in 0..=6u32 {
            for j in 0..=(6 - i) {
                let approx: f64 = q
                    .points()
                    .iter()
                    .zip(q.weights())
                    .map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32))
                    .sum();
                let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                assert!((approx - exact).abs() < 1e-14, "x^{i} y^{j}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn not_exact_beyond_degree_six() {
        let q = Quadrature::triangle_degree6();
        let worst = (0..=7u32)
            .map(|i| {
                let approx: f64 = q
                    .points()
                    .iter()
                    .zip(q.weights())
                    .map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(7 - i as i32))
                    .sum();
                (approx - factorial(i) * factorial(7 - i) / factorial(9)).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e-10);
    }

    #[test]
    fn composite_rule_integrates_oscillatory_functions() {
        let q = Quadrature::composite(3);
        assert_eq!(q.len(), 12 * 64);
        assert!((q.weights().iter().sum::<f64>() - 0.5).abs() < 1e-14);
        // ∫ sin(8πx) over the reference triangle = 1/(8π); error is O(h⁷)
        let err = |levels: usize| {
            let q = Quadrature::composite(levels);
            let approx: f64 = q
                .points()
                .iter()
                .zip(q.weights())
                .map(|(p, w)| w * (8.0 * std::f64::consts::PI * p[0]).sin())
                .sum();
            (approx - 1.0 / (8.0 * std::f64::consts::PI)).abs()
        };
        let (e3, e4) = (err(3), err(4));
        assert!(e3 < 1e-6 && e4 < 1e-8, "{e3:e} {e4:e}");
        assert!(e4 < e3 / 64.0);
    }

    #[test]
    fn gauss_legendre_exact_to_degree_seven() {
        let rule = gauss_legendre_unit();
        for d in 0..=7 {
            let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(d)).sum();
            assert!((s - 1.0 / (d as f64 + 1.0)).abs() < 1e-15);
        }
    }
}

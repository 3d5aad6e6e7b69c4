//! Bivariate polynomials of total degree at most two.

use crate::mesh::Point;

/// Coefficients in the monomial basis `1, x, y, x², xy, y²`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Poly(pub [f64; 6]);

impl Poly {
    pub const ONE: Poly = Poly([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    pub const X: Poly = Poly([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    pub const Y: Poly = Poly([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn eval(&self, [x, y]: Point) -> f64 {
        let c = &self.0;
        c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
    }

    pub fn dx(&self) -> Poly {
        let c = &self.0;
        Poly([c[1], 2.0 * c[3], c[4], 0.0, 0.0, 0.0])
    }

    pub fn dy(&self) -> Poly {
        let c = &self.0;
        Poly([c[2], c[4], 2.0 * c[5], 0.0, 0.0, 0.0])
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.map(|c| c * s))
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.0;
        out.iter_mut().zip(other.0).for_each(|(a, b)| *a += b);
        Poly(out)
    }

    /// Product of two polynomials whose degrees sum to at most two.
    pub fn mul(&self, other: &Poly) -> Poly {
        let (a, b) = (&self.0, &other.0);
        debug_assert!(
            (a[3..].iter().all(|&c| c == 0.0) || b[1..].iter().all(|&c| c == 0.0))
                && (b[3..].iter().all(|&c| c == 0.0) || a[1..].iter().all(|&c| c == 0.0)),
            "product exceeds degree two"
        );
        Poly([
            a[0] * b[0],
            a[0] * b[1] + a[1] * b[0],
            a[0] * b[2] + a[2] * b[0],
            a[0] * b[3] + a[1] * b[1] + a[3] * b[0],
            a[0] * b[4] + a[1] * b[2] + a[2] * b[1] + a[4] * b[0],
            a[0] * b[5] + a[2] * b[2] + a[5] * b[0],
        ])
    }
}

/// Vector-valued polynomial with two components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VecPoly(pub [Poly; 2]);

impl VecPoly {
    pub fn new(x: Poly, y: Poly) -> Self {
        Self([x, y])
    }

    pub fn eval(&self, p: Point) -> Point {
        [self.0[0].eval(p), self.0[1].eval(p)]
    }

    pub fn div(&self) -> Poly {
        self.0[0].dx().add(&self.0[1].dy())
    }

    pub fn scale(&self, s: f64) -> VecPoly {
        VecPoly([self.0[0].scale(s), self.0[1].scale(s)])
    }

    pub fn add(&self, other: &VecPoly) -> VecPoly {
        VecPoly([self.0[0].add(&other.0[0]), self.0[1].add(&other.0[1])])
    }
}

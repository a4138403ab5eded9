use serde::{Deserialize, Deserializer, Serialize};

use crate::scalar::Real;

/// Dense 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent, bound = "")]
pub struct Mat2<T: Real>(pub [[T; 2]; 2]);

impl<'de, T: Real> Deserialize<'de> for Mat2<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged, bound = "")]
        enum Repr<T: Real> {
            Nested([[T; 2]; 2]),
            Flat([T; 4]),
        }
        Ok(match Repr::<T>::deserialize(d)? {
            Repr::Nested(m) => Mat2(m),
            Repr::Flat([a, b, c, e]) => Mat2([[a, b], [c, e]]),
        })
    }
}

impl<T: Real> Mat2<T> {
    pub fn zeros() -> Self {
        Mat2([[T::zero(); 2]; 2])
    }

    pub fn diag(a: T, b: T) -> Self {
        Mat2([[a, T::zero()], [T::zero(), b]])
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = (self.0, other.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }

    pub fn scale(&self, s: T) -> Self {
        let a = self.0;
        Mat2([[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]])
    }

    pub fn mul_vec(&self, v: [T; 2]) -> [T; 2] {
        let a = self.0;
        [
            a[0][0] * v[0] + a[0][1] * v[1],
            a[1][0] * v[0] + a[1][1] * v[1],
        ]
    }

    /// `v' M v`.
    pub fn quad_form(&self, v: [T; 2]) -> T {
        let mv = self.mul_vec(v);
        v[0] * mv[0] + v[1] * mv[1]
    }

    pub fn det(&self) -> T {
        let a = self.0;
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let a = self.0;
        Some(Mat2([
            [a[1][1] / det, -a[0][1] / det],
            [-a[1][0] / det, a[0][0] / det],
        ]))
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: [T; 2]) -> Option<[T; 2]> {
        self.inverse().map(|inv| inv.mul_vec(b))
    }

    pub fn is_symmetric(&self) -> bool {
        let a = self.0;
        let tol = T::of(1e-12) * (a[0][1].abs() + a[1][0].abs() + T::one());
        (a[0][1] - a[1][0]).abs() <= tol
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        let a = self.0;
        self.is_symmetric()
            && a[0][0] >= T::zero()
            && a[1][1] >= T::zero()
            && self.det() >= T::zero()
    }

    /// Lower Cholesky factor of a symmetric positive-definite matrix.
    pub fn cholesky(&self) -> Option<Self> {
        let a = self.0;
        if !(a[0][0] > T::zero()) {
            return None;
        }
        let l11 = a[0][0].sqrt();
        let l21 = a[1][0] / l11;
        let rest = a[1][1] - l21 * l21;
        if !(rest >= T::zero()) {
            return None;
        }
        Some(Mat2([[l11, T::zero()], [l21, rest.sqrt()]]))
    }
}

//! Small fixed-size vector and rotation types.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::{clamp, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(
    serialize = "T: Clone + Serialize",
    deserialize = "T: Deserialize<'de>"
))]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 3]", into = "[T; 3]")]
#[serde(bound(
    serialize = "T: Clone + Serialize",
    deserialize = "T: Deserialize<'de>"
))]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T> From<[T; 2]> for Vec2<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Self { x, y }
    }
}

impl<T> From<Vec2<T>> for [T; 2] {
    fn from(v: Vec2<T>) -> Self {
        [v.x, v.y]
    }
}

impl<T> From<[T; 3]> for Vec3<T> {
    fn from([x, y, z]: [T; 3]) -> Self {
        Self { x, y, z }
    }
}

impl<T> From<Vec3<T>> for [T; 3] {
    fn from(v: Vec3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Scalar> Vec2<T> {
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    /// Rotate counter-clockwise in a y-up frame (clockwise on screen in a y-down frame).
    pub fn rotated(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Scalar> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    /// Unit vector, or `None` below `eps`.
    pub fn try_normalize(self, eps: T) -> Option<Self> {
        let n = self.norm();
        (n >= eps).then(|| self / n)
    }

    /// Unsigned angle in [0, pi].
    pub fn angle_to(self, o: Self) -> T {
        let c = self.dot(o) / (self.norm() * o.norm());
        clamp(c, -T::one(), T::one()).acos()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<U: Scalar>(self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

macro_rules! impl_vec_ops {
    ($v:ident { $($f:ident),+ }) => {
        impl<T: Scalar> Add for $v<T> {
            type Output = Self;
            fn add(self, o: Self) -> Self { $v { $($f: self.$f + o.$f),+ } }
        }
        impl<T: Scalar> Sub for $v<T> {
            type Output = Self;
            fn sub(self, o: Self) -> Self { $v { $($f: self.$f - o.$f),+ } }
        }
        impl<T: Scalar> Neg for $v<T> {
            type Output = Self;
            fn neg(self) -> Self { $v { $($f: -self.$f),+ } }
        }
        impl<T: Scalar> Mul<T> for $v<T> {
            type Output = Self;
            fn mul(self, s: T) -> Self { $v { $($f: self.$f * s),+ } }
        }
        impl<T: Scalar> Div<T> for $v<T> {
            type Output = Self;
            fn div(self, s: T) -> Self { $v { $($f: self.$f / s),+ } }
        }
        impl<T: Scalar> AddAssign for $v<T> {
            fn add_assign(&mut self, o: Self) { $(self.$f += o.$f;)+ }
        }
        impl<T: Scalar> SubAssign for $v<T> {
            fn sub_assign(&mut self, o: Self) { $(self.$f -= o.$f;)+ }
        }
    };
}

impl_vec_ops!(Vec2 { x, y });
impl_vec_ops!(Vec3 { x, y, z });

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Scalar> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    pub fn from_cols(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        Self {
            m: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]],
        }
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let z = T::zero();
        Self {
            m: [[a, z, z], [z, b, z], [z, z, c]],
        }
    }

    pub fn col(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn det(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn rot_x(a: T) -> Self {
        let (s, c) = a.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, c, -s], [z, s, c]],
        }
    }

    pub fn rot_y(a: T) -> Self {
        let (s, c) = a.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[c, z, s], [z, o, z], [-s, z, c]],
        }
    }

    pub fn rot_z(a: T) -> Self {
        let (s, c) = a.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[c, -s, z], [s, c, z], [z, z, o]],
        }
    }

    /// Rodrigues' formula; small angles fall back to the first-order expansion.
    pub fn from_axis_angle(w: Vec3<T>) -> Self {
        let theta = w.norm();
        let k = skew(w);
        let k2 = k * k;
        let (a, b) = if theta < T::lit(1e-8) {
            (
                T::one() - theta * theta / T::lit(6.0),
                T::lit(0.5) - theta * theta / T::lit(24.0),
            )
        } else {
            (
                theta.sin() / theta,
                (T::one() - theta.cos()) / (theta * theta),
            )
        };
        Self::identity() + k.scale(a) + k2.scale(b)
    }

    /// Inverse of [`Mat3::from_axis_angle`] for proper rotations.
    pub fn to_axis_angle(&self) -> Vec3<T> {
        let m = &self.m;
        let tr = m[0][0] + m[1][1] + m[2][2];
        let cos = clamp((tr - T::one()) / T::lit(2.0), -T::one(), T::one());
        let theta = cos.acos();
        let v = Vec3::new(m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]);
        if theta < T::lit(1e-8) {
            return v / T::lit(2.0);
        }
        if T::PI() - theta < T::lit(1e-6) {
            // Near pi: axis from the largest diagonal of (R + I) / 2.
            let b = |i: usize| ((m[i][i] + T::one()) / T::lit(2.0)).max(T::zero()).sqrt();
            let (x, y, z) = (b(0), b(1), b(2));
            let axis = if x >= y && x >= z {
                Vec3::new(
                    x,
                    (m[0][1] + m[1][0]) / (T::lit(4.0) * x),
                    (m[0][2] + m[2][0]) / (T::lit(4.0) * x),
                )
            } else if y >= z {
                Vec3::new(
                    (m[0][1] + m[1][0]) / (T::lit(4.0) * y),
                    y,
                    (m[1][2] + m[2][1]) / (T::lit(4.0) * y),
                )
            } else {
                Vec3::new(
                    (m[0][2] + m[2][0]) / (T::lit(4.0) * z),
                    (m[1][2] + m[2][1]) / (T::lit(4.0) * z),
                    z,
                )
            };
            return axis.try_normalize(T::lit(1e-12)).unwrap_or(Vec3::unit_z()) * theta;
        }
        v * (theta / (T::lit(2.0) * theta.sin()))
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn frobenius_distance(&self, o: &Self) -> T {
        let mut acc = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let d = self.m[i][j] - o.m[i][j];
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> Mat3<U> {
        Mat3 {
            m: self.m.map(|row| row.map(|v| U::lit(v.as_f64()))),
        }
    }
}

fn skew<T: Scalar>(w: Vec3<T>) -> Mat3<T> {
    let z = T::zero();
    Mat3 {
        m: [[z, -w.z, w.y], [w.z, z, -w.x], [-w.y, w.x, z]],
    }
}

impl<T: Scalar> Add for Mat3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] += o.m[i][j];
            }
        }
        out
    }
}

impl<T: Scalar> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        Self { m }
    }
}

impl<T: Scalar> Mul<Vec3<T>> for Mat3<T> {
    type Output = Vec3<T>;
    fn mul(self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_follows_right_hand_rule() {
        let z = Vec3::<f64>::unit_x().cross(Vec3::unit_y());
        assert_eq!(z, Vec3::unit_z());
    }

    #[test]
    fn axis_angle_round_trip() {
        for w in [
            Vec3::new(0.3, -0.2, 0.9),
            Vec3::new(1e-10, 0.0, 0.0),
            Vec3::new(0.0, 0.0, std::f64::consts::PI - 1e-9),
            Vec3::new(-2.0, 1.0, 0.5),
        ] {
            let r = Mat3::from_axis_angle(w);
            assert!((r.det() - 1.0).abs() < 1e-12);
            let back = Mat3::from_axis_angle(r.to_axis_angle());
            assert!(back.frobenius_distance(&r) < 1e-7, "{w:?}");
        }
    }

    #[test]
    fn axis_angle_about_z_matches_rot_z() {
        let a = 0.7f64;
        let r = Mat3::from_axis_angle(Vec3::new(0.0, 0.0, a));
        assert!(r.frobenius_distance(&Mat3::rot_z(a)) < 1e-14);
    }

    #[test]
    fn angle_to_is_clamped() {
        let a = Vec3::new(1.0f64, 1e-17, 0.0);
        assert_eq!(a.angle_to(a * 3.0), 0.0);
        assert!((a.angle_to(-a) - std::f64::consts::PI).abs() < 1e-12);
    }
}

//! Rotation representations and the geodesic metric.
//!
//! A [`Rotation`] is always stored as a row-major 3x3 matrix acting on column
//! vectors. Euler angles, axis-angle, 6D and scalar z-rotations are views that
//! convert to and from that matrix.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Tolerance used when validating unit axes and orthonormality of inputs.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RotationError {
    #[error("axis is not unit length (norm {0})")]
    NonUnitAxis(f64),
    #[error("6D input is degenerate: {0}")]
    DegenerateSixD(&'static str),
    #[error("matrix is not a rotation (orthonormality error {ortho:.3e}, det {det})")]
    NotARotation { ortho: f64, det: f64 },
    #[error("non-finite rotation component")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        self as usize
    }
}

/// Tait-Bryan axis orders (three distinct axes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EulerOrder {
    #[default]
    XYZ,
    XZY,
    YXZ,
    YZX,
    ZXY,
    ZYX,
}

impl EulerOrder {
    pub const ALL: [EulerOrder; 6] = [
        EulerOrder::XYZ,
        EulerOrder::XZY,
        EulerOrder::YXZ,
        EulerOrder::YZX,
        EulerOrder::ZXY,
        EulerOrder::ZYX,
    ];

    pub fn axes(self) -> [Axis; 3] {
        use Axis::*;
        match self {
            EulerOrder::XYZ => [X, Y, Z],
            EulerOrder::XZY => [X, Z, Y],
            EulerOrder::YXZ => [Y, X, Z],
            EulerOrder::YZX => [Y, Z, X],
            EulerOrder::ZXY => [Z, X, Y],
            EulerOrder::ZYX => [Z, Y, X],
        }
    }

    pub fn reversed(self) -> EulerOrder {
        match self {
            EulerOrder::XYZ => EulerOrder::ZYX,
            EulerOrder::XZY => EulerOrder::YZX,
            EulerOrder::YXZ => EulerOrder::ZXY,
            EulerOrder::YZX => EulerOrder::XZY,
            EulerOrder::ZXY => EulerOrder::YXZ,
            EulerOrder::ZYX => EulerOrder::XYZ,
        }
    }

    /// +1 for cyclic orders (XYZ, YZX, ZXY), -1 otherwise.
    fn parity(self) -> f64 {
        match self {
            EulerOrder::XYZ | EulerOrder::YZX | EulerOrder::ZXY => 1.0,
            _ => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EulerConvention {
    /// Rotations about the fixed world axes, first angle applied first.
    Extrinsic,
    /// Rotations about the moving body axes.
    Intrinsic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub angles: [f64; 3],
    pub convention: EulerConvention,
    pub order: EulerOrder,
}

impl EulerAngles {
    pub fn extrinsic(angles: [f64; 3]) -> Self {
        Self {
            angles,
            convention: EulerConvention::Extrinsic,
            order: EulerOrder::XYZ,
        }
    }

    pub fn intrinsic(angles: [f64; 3]) -> Self {
        Self {
            angles,
            convention: EulerConvention::Intrinsic,
            order: EulerOrder::XYZ,
        }
    }

    /// The same rotation expressed in the opposite convention: reversed axis
    /// order and reversed angle sequence.
    pub fn flipped(self) -> Self {
        let [a, b, c] = self.angles;
        Self {
            angles: [c, b, a],
            convention: match self.convention {
                EulerConvention::Extrinsic => EulerConvention::Intrinsic,
                EulerConvention::Intrinsic => EulerConvention::Extrinsic,
            },
            order: self.order.reversed(),
        }
    }
}

/// First two matrix columns, concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixD {
    pub a1: Vec3,
    pub a2: Vec3,
}

impl SixD {
    pub fn from_slice(v: &[f64; 6]) -> Self {
        Self {
            a1: [v[0], v[1], v[2]],
            a2: [v[3], v[4], v[5]],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        let [a, b, c] = self.a1;
        let [d, e, f] = self.a2;
        [a, b, c, d, e, f]
    }
}

/// The textual view a rotation is serialized in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RotationRepr {
    #[default]
    ExtEuler,
    IntEuler,
    /// Rotation vector: unit axis scaled by the angle.
    AxisAngle,
    Sixd,
    /// A single angle about the world z axis.
    ScalarZ,
}

impl RotationRepr {
    pub const ALL: [RotationRepr; 5] = [
        RotationRepr::ExtEuler,
        RotationRepr::IntEuler,
        RotationRepr::AxisAngle,
        RotationRepr::Sixd,
        RotationRepr::ScalarZ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RotationRepr::ExtEuler => "ext_euler",
            RotationRepr::IntEuler => "int_euler",
            RotationRepr::AxisAngle => "axis_angle",
            RotationRepr::Sixd => "sixd",
            RotationRepr::ScalarZ => "scalar_z",
        }
    }

    /// Number of serialized components.
    pub fn arity(self) -> usize {
        match self {
            RotationRepr::ScalarZ => 1,
            RotationRepr::Sixd => 6,
            _ => 3,
        }
    }
}

impl fmt::Display for RotationRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RotationRepr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RotationRepr::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown rotation representation `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    matrix: Mat3,
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Wraps a matrix after checking it lies on SO(3).
    pub fn from_matrix(matrix: Mat3) -> Result<Self, RotationError> {
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let r = Rotation { matrix };
        let (ortho, det) = (r.orthonormality_error(), r.det());
        if ortho > 1e-6 || (det - 1.0).abs() > 1e-6 {
            return Err(RotationError::NotARotation { ortho, det });
        }
        Ok(r)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn about_axis(axis: Axis, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let matrix = match axis {
            Axis::X => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
            Axis::Y => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
            Axis::Z => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        };
        Rotation { matrix }
    }

    pub fn rz(angle: f64) -> Self {
        Self::about_axis(Axis::Z, angle)
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation {
            matrix: mat_mul(&self.matrix, &other.matrix),
        }
    }

    pub fn transpose(&self) -> Rotation {
        Rotation {
            matrix: transpose(&self.matrix),
        }
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.matrix;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn trace(&self) -> f64 {
        self.matrix[0][0] + self.matrix[1][1] + self.matrix[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Frobenius norm of `RᵀR - I`.
    pub fn orthonormality_error(&self) -> f64 {
        let p = mat_mul(&transpose(&self.matrix), &self.matrix);
        let mut acc = 0.0;
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let d = v - if i == j { 1.0 } else { 0.0 };
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    /// Largest absolute element-wise difference.
    pub fn max_abs_diff(&self, other: &Rotation) -> f64 {
        self.matrix
            .iter()
            .flatten()
            .zip(other.matrix.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn from_euler(e: &EulerAngles) -> Rotation {
        let axes = e.order.axes();
        let r: Vec<Rotation> = axes
            .iter()
            .zip(e.angles)
            .map(|(&ax, a)| Rotation::about_axis(ax, a))
            .collect();
        match e.convention {
            EulerConvention::Intrinsic => r[0].compose(&r[1]).compose(&r[2]),
            EulerConvention::Extrinsic => r[2].compose(&r[1]).compose(&r[0]),
        }
    }

    pub fn to_euler(&self, convention: EulerConvention, order: EulerOrder) -> EulerAngles {
        match convention {
            EulerConvention::Intrinsic => EulerAngles {
                angles: self.intrinsic_angles(order),
                convention,
                order,
            },
            EulerConvention::Extrinsic => {
                let [c, b, a] = self.intrinsic_angles(order.reversed());
                EulerAngles {
                    angles: [a, b, c],
                    convention,
                    order,
                }
            }
        }
    }

    /// Decomposes `R = R_i(a) R_j(b) R_k(c)`. When `cos b` vanishes the third
    /// angle is pinned to zero.
    fn intrinsic_angles(&self, order: EulerOrder) -> [f64; 3] {
        let [i, j, k] = order.axes().map(Axis::index);
        let s = order.parity();
        let m = &self.matrix;
        let cos_b = m[i][i].hypot(m[i][j]);
        let c = if cos_b < 1e-12 {
            0.0
        } else {
            (-s * m[i][j]).atan2(m[i][i])
        };
        // N = R R_k(c)^T = R_i(a) R_j(b); a and b are read off exactly.
        let ax_k = order.axes()[2];
        let n = mat_mul(m, &transpose(&Rotation::about_axis(ax_k, c).matrix));
        let a = (s * n[k][j]).atan2(n[j][j]);
        let b = (s * n[i][k]).atan2(n[i][i]);
        [wrap_angle(a), wrap_angle(b), wrap_angle(c)]
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Rotation, RotationError> {
        let n = norm(axis);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(RotationError::NonUnitAxis(n));
        }
        Ok(rodrigues(axis, angle))
    }

    /// Returns `(axis, angle)` with the angle in `[0, π]`. The axis is `x` for
    /// the identity.
    pub fn to_axis_angle(&self) -> (Vec3, f64) {
        let m = &self.matrix;
        let v = [
            0.5 * (m[2][1] - m[1][2]),
            0.5 * (m[0][2] - m[2][0]),
            0.5 * (m[1][0] - m[0][1]),
        ];
        let sin = norm(v);
        let cos = 0.5 * (self.trace() - 1.0);
        let angle = sin.atan2(cos);
        if sin == 0.0 && cos > 0.0 {
            return ([1.0, 0.0, 0.0], 0.0);
        }
        if cos >= 0.0 {
            return (scale(v, 1.0 / sin), angle);
        }
        // Near π the skew part vanishes; use the symmetric part a aᵀ.
        let denom = 1.0 - cos;
        let diag = [
            (m[0][0] - cos) / denom,
            (m[1][1] - cos) / denom,
            (m[2][2] - cos) / denom,
        ];
        let p = (0..3)
            .max_by(|&a, &b| diag[a].total_cmp(&diag[b]))
            .unwrap_or(0);
        let mut axis = [0.0; 3];
        for (q, slot) in axis.iter_mut().enumerate() {
            *slot = 0.5 * (m[p][q] + m[q][p]) / denom;
            if q == p {
                *slot = diag[p];
            }
        }
        let mut axis = scale(axis, 1.0 / norm(axis));
        if dot(axis, v) < 0.0 {
            axis = scale(axis, -1.0);
        }
        (axis, angle)
    }

    /// Rotation vector (axis scaled by angle).
    pub fn from_rotation_vector(v: Vec3) -> Rotation {
        let angle = norm(v);
        if angle == 0.0 {
            return Rotation::IDENTITY;
        }
        rodrigues(scale(v, 1.0 / angle), angle)
    }

    pub fn to_rotation_vector(&self) -> Vec3 {
        let (axis, angle) = self.to_axis_angle();
        scale(axis, angle)
    }

    /// Gram-Schmidt recovery from two (not necessarily orthonormal) columns.
    pub fn from_sixd(v: &SixD) -> Result<Rotation, RotationError> {
        if v.a1.iter().chain(v.a2.iter()).any(|x| !x.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let n1 = norm(v.a1);
        let n2 = norm(v.a2);
        if n1 < 1e-12 || n2 < 1e-12 {
            return Err(RotationError::DegenerateSixD("zero column"));
        }
        let b1 = scale(v.a1, 1.0 / n1);
        let sin_between = norm(cross(b1, v.a2)) / n2;
        if sin_between < 1e-6 {
            return Err(RotationError::DegenerateSixD("parallel columns"));
        }
        let proj = dot(b1, v.a2);
        let u2 = [
            v.a2[0] - proj * b1[0],
            v.a2[1] - proj * b1[1],
            v.a2[2] - proj * b1[2],
        ];
        let b2 = scale(u2, 1.0 / norm(u2));
        let b3 = cross(b1, b2);
        Ok(Rotation {
            matrix: [
                [b1[0], b2[0], b3[0]],
                [b1[1], b2[1], b3[1]],
                [b1[2], b2[2], b3[2]],
            ],
        })
    }

    pub fn to_sixd(&self) -> SixD {
        let m = &self.matrix;
        SixD {
            a1: [m[0][0], m[1][0], m[2][0]],
            a2: [m[0][1], m[1][1], m[2][1]],
        }
    }

    /// Angle about z if this is a pure z-rotation (within `tol`).
    pub fn as_scalar_z(&self, tol: f64) -> Option<f64> {
        let m = &self.matrix;
        let off = m[0][2].abs() + m[1][2].abs() + m[2][0].abs() + m[2][1].abs() + (m[2][2] - 1.0).abs();
        (off <= tol).then(|| m[1][0].atan2(m[0][0]))
    }

    /// Components of this rotation in the given textual view.
    pub fn components(&self, repr: RotationRepr, order: EulerOrder) -> Option<Vec<f64>> {
        match repr {
            RotationRepr::ExtEuler => Some(
                self.to_euler(EulerConvention::Extrinsic, order)
                    .angles
                    .to_vec(),
            ),
            RotationRepr::IntEuler => Some(
                self.to_euler(EulerConvention::Intrinsic, order)
                    .angles
                    .to_vec(),
            ),
            RotationRepr::AxisAngle => Some(self.to_rotation_vector().to_vec()),
            RotationRepr::Sixd => Some(self.to_sixd().to_array().to_vec()),
            RotationRepr::ScalarZ => self.as_scalar_z(1e-9).map(|a| vec![a]),
        }
    }

    /// Inverse of [`Rotation::components`].
    pub fn from_components(
        repr: RotationRepr,
        order: EulerOrder,
        values: &[f64],
    ) -> Result<Rotation, RotationError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let three = || [values[0], values[1], values[2]];
        Ok(match repr {
            RotationRepr::ExtEuler => Rotation::from_euler(&EulerAngles {
                angles: three(),
                convention: EulerConvention::Extrinsic,
                order,
            }),
            RotationRepr::IntEuler => Rotation::from_euler(&EulerAngles {
                angles: three(),
                convention: EulerConvention::Intrinsic,
                order,
            }),
            RotationRepr::AxisAngle => Rotation::from_rotation_vector(three()),
            RotationRepr::Sixd => {
                let arr: [f64; 6] = values
                    .try_into()
                    .map_err(|_| RotationError::DegenerateSixD("expected six values"))?;
                Rotation::from_sixd(&SixD::from_slice(&arr))?
            }
            RotationRepr::ScalarZ => Rotation::rz(values[0]),
        })
    }
}

/// Angle of `r1ᵀ r2` in degrees, in `[0, 180]`.
///
/// Evaluated as `atan2(|skew|, (tr - 1) / 2)`, which equals the arccos form
/// but keeps full precision near 0 and 180 degrees.
pub fn geodesic_deg(r1: &Rotation, r2: &Rotation) -> f64 {
    let rel = r1.transpose().compose(r2);
    let m = &rel.matrix;
    let sin = 0.5
        * norm([
            m[2][1] - m[1][2],
            m[0][2] - m[2][0],
            m[1][0] - m[0][1],
        ]);
    let cos = (0.5 * (rel.trace() - 1.0)).clamp(-1.0, 1.0);
    sin.atan2(cos).to_degrees()
}

/// Wraps into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

fn rodrigues(axis: Vec3, angle: f64) -> Rotation {
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let [x, y, z] = axis;
    Rotation {
        matrix: [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ],
    }
}

pub(crate) fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub(crate) fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_angles(rng: &mut ChaCha8Rng) -> [f64; 3] {
        [
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
        ]
    }

    #[test]
    fn zero_euler_is_identity() {
        for conv in [EulerConvention::Extrinsic, EulerConvention::Intrinsic] {
            for order in EulerOrder::ALL {
                let r = Rotation::from_euler(&EulerAngles {
                    angles: [0.0; 3],
                    convention: conv,
                    order,
                });
                assert_eq!(r, Rotation::IDENTITY);
            }
        }
    }

    #[test]
    fn extrinsic_x_quarter_turn_maps_y_to_z() {
        let r = Rotation::from_euler(&EulerAngles::extrinsic([PI / 2.0, 0.0, 0.0]));
        let v = r.apply([0.0, 1.0, 0.0]);
        assert!((v[0]).abs() < 1e-15 && (v[1]).abs() < 1e-15 && (v[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn extrinsic_equals_reversed_intrinsic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let e = EulerAngles::extrinsic(random_angles(&mut rng));
            // independent composition: Rz(g) Ry(b) Rx(a)
            let [a, b, g] = e.angles;
            let direct = Rotation::rz(g)
                .compose(&Rotation::about_axis(Axis::Y, b))
                .compose(&Rotation::about_axis(Axis::X, a));
            let ext = Rotation::from_euler(&e);
            let int = Rotation::from_euler(&e.flipped());
            assert!(ext.max_abs_diff(&direct) < 1e-12);
            assert!(ext.max_abs_diff(&int) < 1e-12);
        }
    }

    #[test]
    fn euler_round_trip_all_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for order in EulerOrder::ALL {
            for conv in [EulerConvention::Extrinsic, EulerConvention::Intrinsic] {
                for _ in 0..500 {
                    let e = EulerAngles {
                        angles: random_angles(&mut rng),
                        convention: conv,
                        order,
                    };
                    let r = Rotation::from_euler(&e);
                    let back = r.to_euler(conv, order);
                    assert!(back.angles.iter().all(|a| (-PI..PI).contains(a)));
                    let r2 = Rotation::from_euler(&back);
                    assert!(r.max_abs_diff(&r2) < 1e-9, "{order:?} {conv:?} {e:?}");
                }
            }
        }
    }

    #[test]
    fn identity_decomposes_to_zero_angles() {
        let e = Rotation::IDENTITY.to_euler(EulerConvention::Extrinsic, EulerOrder::XYZ);
        assert_eq!(e.angles, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn gimbal_lock_pins_third_angle() {
        for order in EulerOrder::ALL {
            let middle = order.axes()[1];
            for sign in [1.0, -1.0] {
                let r = Rotation::about_axis(middle, sign * PI / 2.0)
                    .compose(&Rotation::about_axis(order.axes()[2], 0.3));
                let e = r.to_euler(EulerConvention::Intrinsic, order);
                assert!(e.angles.iter().all(|a| a.is_finite()));
                assert_eq!(e.angles[2], 0.0);
                assert!(Rotation::from_euler(&e).max_abs_diff(&r) < 1e-9);
            }
        }
        let ry = Rotation::about_axis(Axis::Y, PI / 2.0);
        let e = ry.to_euler(EulerConvention::Extrinsic, EulerOrder::XYZ);
        assert!(Rotation::from_euler(&e).max_abs_diff(&ry) < 1e-9);
    }

    #[test]
    fn near_gimbal_round_trip() {
        for eps in [1e-6, 1e-9, 1e-11, 1e-13, 1e-15] {
            let e = EulerAngles::intrinsic([0.7, PI / 2.0 - eps, -1.1]);
            let r = Rotation::from_euler(&e);
            let back = r.to_euler(EulerConvention::Intrinsic, EulerOrder::XYZ);
            assert!(Rotation::from_euler(&back).max_abs_diff(&r) < 1e-9, "eps {eps}");
        }
    }

    #[test]
    fn axis_angle_cases() {
        assert_eq!(
            Rotation::from_axis_angle([0.0, 0.0, 1.0], 0.0).unwrap(),
            Rotation::IDENTITY
        );
        let r = Rotation::from_axis_angle([0.0, 0.0, 1.0], PI / 2.0).unwrap();
        let v = r.apply([1.0, 0.0, 0.0]);
        assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        assert!(matches!(
            Rotation::from_axis_angle([0.0, 0.0, 2.0], 1.0),
            Err(RotationError::NonUnitAxis(_))
        ));
        let (axis, angle) = Rotation::IDENTITY.to_axis_angle();
        assert_eq!(angle, 0.0);
        assert!((norm(axis) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_angle_near_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let axis = {
                let v = [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ];
                scale(v, 1.0 / norm(v))
            };
            for angle in [PI, PI - 1e-9, PI - 1e-5, 3.0] {
                let r = Rotation::from_axis_angle(axis, angle).unwrap();
                let (a, t) = r.to_axis_angle();
                assert!((0.0..=PI).contains(&t));
                let back = Rotation::from_axis_angle(a, t).unwrap();
                assert!(back.max_abs_diff(&r) < 1e-9, "angle {angle}");
            }
        }
    }

    #[test]
    fn sixd_cases() {
        let id = Rotation::from_sixd(&SixD::from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!(id, Rotation::IDENTITY);
        let scaled =
            Rotation::from_sixd(&SixD::from_slice(&[2.0, 0.0, 0.0, 0.0, 3.0, 0.0])).unwrap();
        assert_eq!(scaled, Rotation::IDENTITY);
        let skew =
            Rotation::from_sixd(&SixD::from_slice(&[1.0, 0.1, 0.0, 0.0, 1.0, 0.0])).unwrap();
        assert!(skew.orthonormality_error() < 1e-9);
        assert!((skew.det() - 1.0).abs() < 1e-9);
        assert!(matches!(
            Rotation::from_sixd(&SixD::from_slice(&[0.0; 6])),
            Err(RotationError::DegenerateSixD(_))
        ));
        assert!(matches!(
            Rotation::from_sixd(&SixD::from_slice(&[1.0, 1.0, 0.0, 2.0, 2.0, 0.0])),
            Err(RotationError::DegenerateSixD(_))
        ));
    }

    #[test]
    fn geodesic_cases() {
        let r = Rotation::from_euler(&EulerAngles::extrinsic([0.3, -1.2, 2.0]));
        assert_eq!(geodesic_deg(&r, &r), 0.0);
        assert!((geodesic_deg(&Rotation::IDENTITY, &Rotation::rz(PI)) - 180.0).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert_eq!(wrap_angle(0.5), 0.5);
    }

    #[test]
    fn scalar_z_view() {
        let r = Rotation::rz(0.144);
        assert!((r.as_scalar_z(1e-12).unwrap() - 0.144).abs() < 1e-15);
        let tilted = Rotation::about_axis(Axis::X, 0.1);
        assert!(tilted.as_scalar_z(1e-9).is_none());
    }

    #[test]
    fn repr_names_parse() {
        for r in RotationRepr::ALL {
            assert_eq!(r.name().parse::<RotationRepr>().unwrap(), r);
        }
        assert!("quat".parse::<RotationRepr>().is_err());
    }
}

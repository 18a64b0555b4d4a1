//! Planar three-link chain kinematics.

use crate::scalar::Scalar;

/// Forward kinematics result for one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPose<T> {
    /// Base, elbow, wrist and palm points.
    pub points: [[T; 2]; 4],
    pub palm: [T; 2],
    /// Absolute palm orientation (sum of joint angles).
    pub palm_angle: T,
    /// d(palm)/dq, rows x and z.
    pub jacobian: [[T; 3]; 2],
}

impl<T: Scalar> ArmPose<T> {
    pub fn palm_velocity(&self, qd: &[T; 3]) -> [T; 2] {
        let j = &self.jacobian;
        [
            j[0][0] * qd[0] + j[0][1] * qd[1] + j[0][2] * qd[2],
            j[1][0] * qd[0] + j[1][1] * qd[1] + j[1][2] * qd[2],
        ]
    }

    /// Link segments as (start, end) pairs.
    pub fn segments(&self) -> [([T; 2], [T; 2]); 3] {
        let p = &self.points;
        [(p[0], p[1]), (p[1], p[2]), (p[2], p[3])]
    }
}

pub fn forward_kinematics<T: Scalar>(q: &[T; 3], base: [T; 2], links: [T; 3]) -> ArmPose<T> {
    let mut points = [base; 4];
    let mut phi = T::zero();
    let mut dirs = [[T::zero(); 2]; 3];
    for k in 0..3 {
        phi += q[k];
        let (s, c) = phi.sin_cos();
        dirs[k] = [-links[k] * s, links[k] * c];
        points[k + 1] = [points[k][0] + links[k] * c, points[k][1] + links[k] * s];
    }
    let mut jacobian = [[T::zero(); 3]; 2];
    for j in 0..3 {
        for d in &dirs[j..] {
            jacobian[0][j] += d[0];
            jacobian[1][j] += d[1];
        }
    }
    ArmPose {
        points,
        palm: points[3],
        palm_angle: phi,
        jacobian,
    }
}

/// Damped least-squares inverse applied to a palm velocity:
/// `Jᵀ (J Jᵀ + damping² I)⁻¹ v`. With zero damping this is the minimum-norm
/// joint velocity producing `v`.
pub fn pseudo_inverse_apply<T: Scalar>(jacobian: &[[T; 3]; 2], v: [T; 2], damping: T) -> [T; 3] {
    let j = jacobian;
    let d2 = damping * damping;
    let a = j[0][0] * j[0][0] + j[0][1] * j[0][1] + j[0][2] * j[0][2] + d2;
    let b = j[0][0] * j[1][0] + j[0][1] * j[1][1] + j[0][2] * j[1][2];
    let c = j[1][0] * j[1][0] + j[1][1] * j[1][1] + j[1][2] * j[1][2] + d2;
    let det = a * c - b * b;
    let y0 = (c * v[0] - b * v[1]) / det;
    let y1 = (a * v[1] - b * v[0]) / det;
    [
        j[0][0] * y0 + j[1][0] * y1,
        j[0][1] * y0 + j[1][1] * y1,
        j[0][2] * y0 + j[1][2] * y1,
    ]
}

/// Joint angles placing the palm at `palm` with absolute orientation `angle`.
/// `elbow` selects the branch by the sign of the elbow joint. Returns `None`
/// when the wrist point is out of reach.
pub fn ik_palm<T: Scalar>(base: [T; 2], links: [T; 3], palm: [T; 2], angle: T, elbow: T) -> Option<[T; 3]> {
    let (s, c) = angle.sin_cos();
    let wx = palm[0] - links[2] * c - base[0];
    let wz = palm[1] - links[2] * s - base[1];
    let r2 = wx * wx + wz * wz;
    let two = T::of(2.0);
    let cos2 = (r2 - links[0] * links[0] - links[1] * links[1]) / (two * links[0] * links[1]);
    if !(cos2.abs() <= T::one()) {
        return None;
    }
    let q2 = elbow.signum() * cos2.acos();
    let q1 = wz.atan2(wx) - (links[1] * q2.sin()).atan2(links[0] + links[1] * q2.cos());
    Some([q1, q2, angle - q1 - q2])
}

/// Euclidean distance between two points.
pub fn distance<T: Scalar>(a: [T; 2], b: [T; 2]) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn point_segment_distance<T: Scalar>(p: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > T::zero() {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    distance(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn cross<T: Scalar>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Minimum distance between segments `a0a1` and `b0b1`; zero when they cross.
pub fn segment_distance<T: Scalar>(a0: [T; 2], a1: [T; 2], b0: [T; 2], b1: [T; 2]) -> T {
    let d1 = cross(a0, a1, b0);
    let d2 = cross(a0, a1, b1);
    let d3 = cross(b0, b1, a0);
    let d4 = cross(b0, b1, a1);
    let zero = T::zero();
    if ((d1 > zero && d2 < zero) || (d1 < zero && d2 > zero)) && ((d3 > zero && d4 < zero) || (d3 < zero && d4 > zero)) {
        return zero;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

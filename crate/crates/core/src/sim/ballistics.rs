//! Free flight under constant gravity.

use crate::scalar::Scalar;

/// One exact constant-acceleration step: gravity acts along −z.
pub fn ballistic_step<T: Scalar>(p: [T; 2], v: [T; 2], gravity: T, dt: T) -> ([T; 2], [T; 2]) {
    let half = T::of(0.5);
    (
        [p[0] + v[0] * dt, p[1] + v[1] * dt - half * gravity * dt * dt],
        [v[0], v[1] - gravity * dt],
    )
}

/// Closed-form position after `t` seconds of flight.
pub fn position_at<T: Scalar>(p0: [T; 2], v0: [T; 2], gravity: T, t: T) -> [T; 2] {
    [p0[0] + v0[0] * t, p0[1] + v0[1] * t - T::of(0.5) * gravity * t * t]
}

/// Release velocity that carries an object from `release` through `target`
/// after exactly `flight_time` seconds.
pub fn solve_release<T: Scalar>(release: [T; 2], target: [T; 2], flight_time: T, gravity: T) -> [T; 2] {
    [
        (target[0] - release[0]) / flight_time,
        (target[1] - release[1]) / flight_time + T::of(0.5) * gravity * flight_time,
    ]
}

/// Highest point reached on the parabola from `p0` with velocity `v0`.
pub fn apex_height<T: Scalar>(p0: [T; 2], v0: [T; 2], gravity: T) -> T {
    let up = v0[1].max(T::zero());
    p0[1] + up * up / (T::of(2.0) * gravity)
}

/// Closest approach of the parabola to `point` over `t ∈ [0, horizon]`,
/// returned as `(time, distance)`.
pub fn closest_approach<T: Scalar>(p0: [T; 2], v0: [T; 2], gravity: T, point: [T; 2], horizon: T) -> (T, T) {
    let dist = |t: T| {
        let p = position_at(p0, v0, gravity, t);
        (p[0] - point[0]).hypot(p[1] - point[1])
    };
    // Coarse scan, then golden-section refinement around the best sample.
    let samples = 400;
    let h = horizon / T::of(samples as f64);
    let mut best = (T::zero(), dist(T::zero()));
    for k in 1..=samples {
        let t = h * T::of(k as f64);
        let d = dist(t);
        if d < best.1 {
            best = (t, d);
        }
    }
    let mut lo = (best.0 - h).max(T::zero());
    let mut hi = (best.0 + h).min(horizon);
    let ratio = T::of(0.618_033_988_749_894_8);
    for _ in 0..80 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if dist(a) < dist(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let t = T::of(0.5) * (lo + hi);
    let d = dist(t);
    if d < best.1 {
        (t, d)
    } else {
        best
    }
}

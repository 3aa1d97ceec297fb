//! Snap-limited (fourth-order) point-to-point profiles and the triangular
//! scan built from them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CroneError, Result};

/// Bounds of a symmetric fourth-order move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryLimits {
    /// Displacement per leg, metres.
    pub stroke: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub j_max: f64,
    pub s_max: f64,
}

impl Default for TrajectoryLimits {
    fn default() -> Self {
        Self {
            stroke: 1e-3,
            v_max: 0.01,
            a_max: 0.5,
            j_max: 50.0,
            s_max: 1e4,
        }
    }
}

impl TrajectoryLimits {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("stroke", self.stroke),
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("j_max", self.j_max),
            ("s_max", self.s_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Largest root of an increasing `f` on `[0, hi]`, or `hi` if `f(hi) ≤ 0`.
fn bisect(f: impl Fn(f64) -> f64, hi: f64) -> f64 {
    if f(hi) <= 0.0 {
        return hi;
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

const SIGNS: [f64; 15] = [
    1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0,
];

/// A 15-segment profile with piecewise-constant snap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourthOrderProfile {
    pub limits: TrajectoryLimits,
    /// Constant-snap, constant-jerk, constant-acceleration and
    /// constant-velocity phase durations.
    pub t_s: f64,
    pub t_j: f64,
    pub t_a: f64,
    pub t_v: f64,
    starts: Vec<f64>,
    /// `[position, velocity, acceleration, jerk]` at each segment start.
    states: Vec<[f64; 4]>,
}

impl FourthOrderProfile {
    pub fn new(limits: TrajectoryLimits) -> Result<Self> {
        limits.validate()?;
        let TrajectoryLimits {
            stroke: x,
            v_max: v,
            a_max: a,
            j_max: j,
            s_max: s,
        } = limits;
        let t_s = (j / s)
            .min((a / s).sqrt())
            .min((v / (2.0 * s)).cbrt())
            .min((x / (8.0 * s)).powf(0.25));
        let big = 1e3;
        let t_j = (a / (s * t_s) - t_s)
            .min(bisect(
                |tj| s * t_s * (t_s + tj) * (2.0 * t_s + tj) - v,
                big,
            ))
            .min(bisect(
                |tj| s * t_s * (t_s + tj) * (2.0 * t_s + tj) * (4.0 * t_s + 2.0 * tj) - x,
                big,
            ))
            .max(0.0);
        let a_p = s * t_s * (t_s + t_j);
        let t_a = (v / a_p - 2.0 * t_s - t_j)
            .min(bisect(
                |ta| a_p * (2.0 * t_s + t_j + ta) * (4.0 * t_s + 2.0 * t_j + ta) - x,
                big,
            ))
            .max(0.0);
        let v_p = a_p * (2.0 * t_s + t_j + t_a);
        let t_v = (x / v_p - (4.0 * t_s + 2.0 * t_j + t_a)).max(0.0);

        let durations = [
            t_s, t_j, t_s, t_a, t_s, t_j, t_s, t_v, t_s, t_j, t_s, t_a, t_s, t_j, t_s,
        ];
        let mut starts = vec![0.0];
        let mut states = vec![[0.0; 4]];
        for (sign, d) in SIGNS.iter().zip(durations) {
            let next = propagate(*states.last().unwrap(), sign * s, d);
            states.push(next);
            starts.push(starts.last().unwrap() + d);
        }
        Ok(Self {
            limits,
            t_s,
            t_j,
            t_a,
            t_v,
            starts,
            states,
        })
    }

    /// Total move time.
    pub fn duration(&self) -> f64 {
        *self.starts.last().unwrap()
    }

    /// `[position, velocity, acceleration, jerk]` at time `t`; at rest
    /// outside `[0, duration]`.
    pub fn eval(&self, t: f64) -> [f64; 4] {
        if t <= 0.0 {
            return [0.0; 4];
        }
        if t >= self.duration() {
            return [self.limits.stroke, 0.0, 0.0, 0.0];
        }
        let i = self.starts.partition_point(|&b| b <= t) - 1;
        propagate(
            self.states[i],
            SIGNS[i] * self.limits.s_max,
            t - self.starts[i],
        )
    }
}

fn propagate([p, v, a, j]: [f64; 4], snap: f64, d: f64) -> [f64; 4] {
    let d2 = d * d;
    let d3 = d2 * d;
    [
        p + v * d + a * d2 / 2.0 + j * d3 / 6.0 + snap * d2 * d2 / 24.0,
        v + a * d + j * d2 / 2.0 + snap * d3 / 6.0,
        a + j * d + snap * d2 / 2.0,
        j + snap * d,
    ]
}

/// Sampled triangular scan: legs of `period` seconds alternate between
/// `0 → stroke` and `stroke → 0`. Returns `(reference, acceleration)`.
pub fn fourth_order_trajectory(
    limits: TrajectoryLimits,
    period: f64,
    dt: f64,
    samples: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", "must be positive"));
    }
    let profile = FourthOrderProfile::new(limits)?;
    if !(period >= profile.duration()) {
        return Err(CroneError::TrajectoryInfeasible {
            period,
            min_period: profile.duration(),
        });
    }
    let mut r = Vec::with_capacity(samples);
    let mut acc = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = k as f64 * dt;
        let leg = (t / period).floor();
        let [p, _, a, _] = profile.eval(t - leg * period);
        if (leg as u64).is_multiple_of(2) {
            r.push(p);
            acc.push(a);
        } else {
            r.push(limits.stroke - p);
            acc.push(-a);
        }
    }
    Ok((r, acc))
}

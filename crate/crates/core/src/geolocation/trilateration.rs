//! Range-based position fixes from beacon observations.
//!
//! The range equations `|p - b_i|^2 = d_i^2` are linearized by subtracting the
//! first one, which leaves an overdetermined linear system in `p`. Its least
//! squares solution seeds a Gauss-Newton refinement on the true objective,
//! the sum of squared range residuals `sum_i (|p - b_i| - d_i)^2`.

use serde::{Deserialize, Serialize};

use super::GeoPoint;
use crate::error::{Error, Result};

/// Geometry is rejected when the smallest singular value of the linearized
/// design matrix falls below this fraction of the largest.
pub const DEGENERACY_RATIO: f64 = 1e-9;

const MAX_REFINEMENTS: usize = 25;
const STEP_TOLERANCE: f64 = 1e-12;

/// Measured distance from a beacon at a known position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeaconObservation {
    pub beacon: GeoPoint,
    pub distance: f64,
}

impl BeaconObservation {
    pub fn new(beacon: GeoPoint, distance: f64) -> Self {
        Self { beacon, distance }
    }
}

/// A solved position together with its post-fit residual, so callers can
/// apply their own accuracy threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fix {
    pub position: GeoPoint,
    /// Sum of squared range residuals at `position` (m^2).
    pub residual: f64,
    /// Root mean square range residual (m).
    pub rms: f64,
}

/// Sum of squared range residuals at `p`.
pub fn range_residual(p: GeoPoint, observations: &[BeaconObservation]) -> f64 {
    observations
        .iter()
        .map(|o| {
            let r = p.distance(o.beacon) - o.distance;
            r * r
        })
        .sum()
}

/// Solve a symmetric 2x2 system given its determinant.
fn solve_2x2(n11: f64, n12: f64, n22: f64, det: f64, r1: f64, r2: f64) -> (f64, f64) {
    ((n22 * r1 - n12 * r2) / det, (n11 * r2 - n12 * r1) / det)
}

fn validate(observations: &[BeaconObservation]) -> Result<()> {
    if observations.len() < 3 {
        return Err(Error::Underdetermined(observations.len()));
    }
    for (i, o) in observations.iter().enumerate() {
        if !o.beacon.is_finite() {
            return Err(Error::InvalidObservation(format!("beacon {i} position not finite")));
        }
        if !o.distance.is_finite() || o.distance < 0.0 {
            return Err(Error::InvalidObservation(format!(
                "beacon {i} distance {} must be finite and non-negative",
                o.distance
            )));
        }
    }
    Ok(())
}

/// Closed-form least-squares solution of the linearized range equations.
fn linear_estimate(observations: &[BeaconObservation]) -> Result<GeoPoint> {
    let origin = observations[0].beacon;
    let d0 = observations[0].distance;
    // Work relative to the first beacon: 2 u_i . q = |u_i|^2 - d_i^2 + d_0^2.
    let rows: Vec<(f64, f64, f64)> = observations[1..]
        .iter()
        .map(|o| {
            let (ux, uy) = (o.beacon.x - origin.x, o.beacon.y - origin.y);
            let rhs = ux * ux + uy * uy - o.distance * o.distance + d0 * d0;
            (2.0 * ux, 2.0 * uy, rhs)
        })
        .collect();

    let (mut n11, mut n12, mut n22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(a, b, c) in &rows {
        n11 += a * a;
        n12 += a * b;
        n22 += b * b;
        r1 += a * c;
        r2 += b * c;
    }
    // det(A^T A) as the sum of squared 2x2 minors of A (Cauchy-Binet). Each
    // minor is a cross product of beacon offsets, so collinear layouts give a
    // determinant at rounding level instead of catastrophic cancellation.
    let mut det = 0.0;
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let m = rows[i].0 * rows[j].1 - rows[j].0 * rows[i].1;
            det += m * m;
        }
    }
    let trace = n11 + n22;
    let disc = ((n11 - n22) * (n11 - n22) + 4.0 * n12 * n12).sqrt();
    let lambda_max = (trace + disc) / 2.0;
    if lambda_max <= 0.0 || !det.is_finite() {
        return Err(Error::DegenerateGeometry);
    }
    let lambda_min = det / lambda_max;
    // Singular values are square roots of the normal-matrix eigenvalues.
    if lambda_min <= 0.0 || (lambda_min / lambda_max).sqrt() < DEGENERACY_RATIO {
        return Err(Error::DegenerateGeometry);
    }
    let (qx, qy) = solve_2x2(n11, n12, n22, det, r1, r2);
    Ok(GeoPoint::new(origin.x + qx, origin.y + qy))
}

/// Gauss-Newton iterations on the range residuals, stopping once the step is
/// negligible or no longer reduces the objective.
fn refine(start: GeoPoint, observations: &[BeaconObservation]) -> GeoPoint {
    let mut p = start;
    let mut cost = range_residual(p, observations);
    for _ in 0..MAX_REFINEMENTS {
        let (mut n11, mut n12, mut n22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for o in observations {
            let (dx, dy) = (p.x - o.beacon.x, p.y - o.beacon.y);
            let range = (dx * dx + dy * dy).sqrt();
            if range < 1e-12 {
                // Jacobian undefined exactly on a beacon.
                continue;
            }
            let (jx, jy) = (dx / range, dy / range);
            let r = range - o.distance;
            n11 += jx * jx;
            n12 += jx * jy;
            n22 += jy * jy;
            g1 += jx * r;
            g2 += jy * r;
        }
        let det = n11 * n22 - n12 * n12;
        if det <= 1e-15 * (n11 + n22) * (n11 + n22) {
            break;
        }
        let (sx, sy) = solve_2x2(n11, n12, n22, det, -g1, -g2);
        let mut step = 1.0;
        let mut accepted = None;
        while step >= 1.0 / 64.0 {
            let candidate = GeoPoint::new(p.x + step * sx, p.y + step * sy);
            let c = range_residual(candidate, observations);
            if c <= cost {
                accepted = Some((candidate, c));
                break;
            }
            step /= 2.0;
        }
        let Some((next, next_cost)) = accepted else { break };
        let moved = next.distance(p);
        p = next;
        cost = next_cost;
        if moved <= STEP_TOLERANCE * (1.0 + p.x.abs().max(p.y.abs())) {
            break;
        }
    }
    p
}

/// Position fix with residual diagnostics.
pub fn trilaterate_fix(observations: &[BeaconObservation]) -> Result<Fix> {
    validate(observations)?;
    let seed = linear_estimate(observations)?;
    let position = refine(seed, observations);
    let residual = range_residual(position, observations);
    Ok(Fix {
        position,
        residual,
        rms: (residual / observations.len() as f64).sqrt(),
    })
}

/// The point minimizing the sum of squared range residuals.
pub fn trilaterate(observations: &[BeaconObservation]) -> Result<GeoPoint> {
    trilaterate_fix(observations).map(|f| f.position)
}

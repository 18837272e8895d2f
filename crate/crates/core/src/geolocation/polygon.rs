//! Planar polygon predicates.

use super::GeoPoint;

/// Points closer than this to an edge count as on the boundary (metres).
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

fn cross(o: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

pub(crate) fn distance_to_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(GeoPoint::new(a.x + t * dx, a.y + t * dy))
}

fn edges(polygon: &[GeoPoint]) -> impl Iterator<Item = (GeoPoint, GeoPoint)> + '_ {
    polygon
        .iter()
        .copied()
        .zip(polygon.iter().copied().cycle().skip(1))
}

pub fn on_boundary(p: GeoPoint, polygon: &[GeoPoint]) -> bool {
    edges(polygon).any(|(a, b)| distance_to_segment(p, a, b) <= BOUNDARY_TOLERANCE)
}

/// Winding number of `polygon` around `p`; nonzero means interior.
fn winding_number(p: GeoPoint, polygon: &[GeoPoint]) -> i32 {
    let mut wn = 0;
    for (a, b) in edges(polygon) {
        if a.y <= p.y {
            if b.y > p.y && cross(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && cross(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// True iff `p` is inside `polygon` or on its boundary.
pub fn point_in_polygon(p: GeoPoint, polygon: &[GeoPoint]) -> bool {
    on_boundary(p, polygon) || winding_number(p, polygon) != 0
}

/// Inside and not on the boundary.
pub(crate) fn strictly_inside(p: GeoPoint, polygon: &[GeoPoint]) -> bool {
    !on_boundary(p, polygon) && winding_number(p, polygon) != 0
}

pub(crate) fn signed_area(polygon: &[GeoPoint]) -> f64 {
    edges(polygon).map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>() / 2.0
}

fn orientation(a: GeoPoint, b: GeoPoint, c: GeoPoint) -> i8 {
    let v = cross(a, b, c);
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn on_segment_collinear(a: GeoPoint, b: GeoPoint, p: GeoPoint) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection, including touching and collinear overlap.
pub(crate) fn segments_intersect(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> bool {
    let (o1, o2) = (orientation(a, b, c), orientation(a, b, d));
    let (o3, o4) = (orientation(c, d, a), orientation(c, d, b));
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && on_segment_collinear(a, b, c))
        || (o2 == 0 && on_segment_collinear(a, b, d))
        || (o3 == 0 && on_segment_collinear(c, d, a))
        || (o4 == 0 && on_segment_collinear(c, d, b))
}

/// Segments cross at a single point interior to both.
pub(crate) fn segments_cross_properly(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> bool {
    let (o1, o2) = (orientation(a, b, c), orientation(a, b, d));
    let (o3, o4) = (orientation(c, d, a), orientation(c, d, b));
    o1 * o2 < 0 && o3 * o4 < 0
}

/// No repeated vertices, no zero-length edges, no two edges meeting anywhere
/// other than at their shared vertex.
pub fn is_simple(polygon: &[GeoPoint]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if polygon[i] == polygon[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        for j in (i + 1)..n {
            let (c, d) = (polygon[j], polygon[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Shared vertex is expected; a collinear fold-back is not.
                let (shared, u, v) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                let dot = (u.x - shared.x) * (v.x - shared.x) + (u.y - shared.y) * (v.y - shared.y);
                if orientation(u, shared, v) == 0 && dot > 0.0 {
                    return false;
                }
            } else if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// A point strictly inside a simple polygon: midpoint of the first interior
/// span along a horizontal line that passes between the two lowest distinct
/// vertex heights.
pub(crate) fn interior_point(polygon: &[GeoPoint]) -> GeoPoint {
    let mut ys: Vec<f64> = polygon.iter().map(|p| p.y).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let y = (ys[0] + ys[1]) / 2.0;
    let mut xs: Vec<f64> = edges(polygon)
        .filter(|(a, b)| (a.y <= y) != (b.y <= y))
        .map(|(a, b)| a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y))
        .collect();
    xs.sort_by(f64::total_cmp);
    GeoPoint::new((xs[0] + xs[1]) / 2.0, y)
}

/// True when the interiors of two simple polygons overlap.
pub(crate) fn interiors_overlap(a: &[GeoPoint], b: &[GeoPoint]) -> bool {
    let crossing = edges(a).any(|(p, q)| edges(b).any(|(r, s)| segments_cross_properly(p, q, r, s)));
    if crossing {
        return true;
    }
    let probes = |poly: &[GeoPoint]| -> Vec<GeoPoint> {
        let mut pts: Vec<GeoPoint> = poly.to_vec();
        pts.extend(edges(poly).map(|(p, q)| GeoPoint::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0)));
        pts.push(interior_point(poly));
        pts
    };
    probes(a).into_iter().any(|p| strictly_inside(p, b))
        || probes(b).into_iter().any(|p| strictly_inside(p, a))
}

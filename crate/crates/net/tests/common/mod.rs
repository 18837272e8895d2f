//! Independent oracles and fixture generators shared by the integration
//! tests. Nothing here calls into the code under test.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

pub const CATEGORIES: [&str; 6] = ["indian", "thai", "italian", "seafood", "vegan", "mexican"];

/// Even-odd ray casting to the right of `p`.
pub fn crossing_number(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[(i + n - 1) % n];
        if (yi > p.1) != (yj > p.1) {
            let x_cross = xi + (p.1 - yi) * (xj - xi) / (yj - yi);
            if p.0 < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

pub fn edge_distance(poly: &[(f64, f64)], p: (f64, f64)) -> f64 {
    (0..poly.len())
        .map(|i| segment_distance(p, poly[i], poly[(i + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Star-shaped polygon around `c`: sorted random angles, random radii.
pub fn random_star_polygon(rng: &mut impl Rng, c: (f64, f64), r_max: f64) -> Vec<(f64, f64)> {
    let n = rng.random_range(3..=12);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    if angles.len() < 3 {
        return random_star_polygon(rng, c, r_max);
    }
    angles
        .into_iter()
        .map(|a| {
            let r = rng.random_range(0.2 * r_max..r_max);
            (c.0 + r * a.cos(), c.1 + r * a.sin())
        })
        .collect()
}

pub fn triangle_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)).abs() / 2.0
}

fn residual(obs: &[(f64, f64, f64)], x: f64, y: f64) -> f64 {
    obs.iter()
        .map(|&(bx, by, d)| {
            let r = ((x - bx) * (x - bx) + (y - by) * (y - by)).sqrt() - d;
            r * r
        })
        .sum()
}

/// Same answer as [`grid_minimizer_exhaustive`], but skips square tiles of
/// the grid that provably cannot hold a better point: within distance `rho`
/// of a tile centre each range term moves by at most `rho`, which bounds the
/// tile's residual from below.
pub fn grid_minimizer(obs: &[(f64, f64, f64)], lo: f64, hi: f64, step: f64) -> (f64, f64) {
    const TILE: usize = 50;
    let n = ((hi - lo) / step).round() as usize + 1;
    let tiles = n.div_ceil(TILE);
    let rho = (TILE as f64 * step) * std::f64::consts::SQRT_2 * 0.5 * (1.0 + 1e-9) + 1e-12;
    let mut order: Vec<(f64, usize, usize)> = Vec::with_capacity(tiles * tiles);
    for ti in 0..tiles {
        for tj in 0..tiles {
            let centre = |t: usize| lo + ((t * TILE) as f64 + (TILE - 1) as f64 / 2.0) * step;
            let (cx, cy) = (centre(ti), centre(tj));
            let bound: f64 = obs
                .iter()
                .map(|&(bx, by, d)| {
                    let r = (((cx - bx).powi(2) + (cy - by).powi(2)).sqrt() - d).abs();
                    (r - rho).max(0.0).powi(2)
                })
                .sum();
            order.push((bound, ti, tj));
        }
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = (f64::INFINITY, 0, 0);
    for (bound, ti, tj) in order {
        if bound > best.0 * (1.0 + 1e-9) {
            break;
        }
        for i in ti * TILE..((ti + 1) * TILE).min(n) {
            for j in tj * TILE..((tj + 1) * TILE).min(n) {
                let r = residual(obs, lo + i as f64 * step, lo + j as f64 * step);
                if r < best.0 || (r == best.0 && (i, j) < (best.1, best.2)) {
                    best = (r, i, j);
                }
            }
        }
    }
    (lo + best.1 as f64 * step, lo + best.2 as f64 * step)
}

/// Every point of the square `[lo, hi]²` at spacing `step`.
pub fn grid_minimizer_exhaustive(obs: &[(f64, f64, f64)], lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize + 1;
    let ys: Vec<f64> = (0..n).map(|j| lo + j as f64 * step).collect();
    let (_, i, j) = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |row, i| {
                let x = lo + i as f64 * step;
                // Beacon by beacon over the whole row so the loop vectorizes.
                row.fill(0.0);
                for &(bx, by, d) in obs {
                    let dx2 = (x - bx) * (x - bx);
                    for (acc, &y) in row.iter_mut().zip(&ys) {
                        let r = (dx2 + (y - by) * (y - by)).sqrt() - d;
                        *acc += r * r;
                    }
                }
                let (j, r) = row
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |best, (j, &r)| if r < best.1 { (j, r) } else { best });
                (r, i, j)
            },
        )
        .reduce(|| (f64::INFINITY, 0, 0), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    (lo + i as f64 * step, lo + j as f64 * step)
}

/// Digits only; enough for the phone formats used in tests.
pub fn digits(raw: &str) -> String {
    raw.chars().filter(char::is_ascii_digit).collect()
}

/// Raw JSON lines of a seed file.
pub fn seed_lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .map(|t| {
            t.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str(l).expect("fixture line is JSON"))
                .collect()
        })
        .unwrap_or_default()
}

/// A fixture of `n` side-by-side 10 m square zones with seed files on disk.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub zones_file: PathBuf,
    pub zones: Vec<String>,
    pub seeds: BTreeMap<String, Vec<Value>>,
}

impl Fixture {
    pub fn generate(rng: &mut impl Rng, n_zones: usize, max_per_zone: usize) -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let zones: Vec<String> = (0..n_zones).map(|i| format!("z{i:02}")).collect();
        let zone_json: Vec<Value> = zones
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let x0 = 10.0 * i as f64;
                json!({"zone_id": z, "display_name": format!("Zone {i}"),
                       "polygon": [[x0, 0.0], [x0 + 10.0, 0.0], [x0 + 10.0, 10.0], [x0, 10.0]]})
            })
            .collect();
        let tags: BTreeMap<String, String> = zones.iter().map(|z| (format!("tag-{z}"), z.clone())).collect();
        let zones_file = dir.path().join("zones.json");
        std::fs::write(&zones_file, json!({"v": 1, "zones": zone_json, "rfid_tags": tags}).to_string())
            .expect("write zones");

        let seed_dir = dir.path().join("restaurants");
        std::fs::create_dir(&seed_dir).expect("seed dir");
        let mut seeds = BTreeMap::new();
        for (i, z) in zones.iter().enumerate() {
            let count = rng.random_range(0..=max_per_zone);
            let x0 = 10.0 * i as f64;
            let records: Vec<Value> = (0..count)
                .map(|k| {
                    let round = |v: f64| (v * 1000.0).round() / 1000.0;
                    json!({
                        "restaurant_id": format!("{z}-r{k:03}"),
                        "name": format!("Place {k} in {z}"),
                        "address": format!("{k} Road {i}"),
                        "contact": format!("+1 555 {:03} {:04}", i, k),
                        "food_style": CATEGORIES.choose(rng).unwrap(),
                        "x": round(x0 + rng.random_range(0.5..9.5)),
                        "y": round(rng.random_range(0.5..9.5)),
                        "zone_id": z,
                    })
                })
                .collect();
            let text: String = records.iter().map(|r| format!("{r}\n")).collect();
            std::fs::write(seed_dir.join(format!("{z}.jsonl")), text).expect("write seed");
            seeds.insert(z.clone(), records);
        }
        Self { dir, zones_file, zones, seeds }
    }

    /// `{zone: [restaurant_id..]}` of records in `category`, ids sorted,
    /// empty zones omitted.
    pub fn brute_force_search(&self, category: &str) -> BTreeMap<String, Vec<String>> {
        let mut out = BTreeMap::new();
        for (zone, records) in &self.seeds {
            let mut ids: Vec<String> = records
                .iter()
                .filter(|r| r["food_style"] == category)
                .map(|r| r["restaurant_id"].as_str().unwrap().to_string())
                .collect();
            ids.sort();
            if !ids.is_empty() {
                out.insert(zone.clone(), ids);
            }
        }
        out
    }

    pub fn local_ids(&self, zone: &str, category: &str) -> Vec<String> {
        self.brute_force_search(category).remove(zone).unwrap_or_default()
    }
}

/// `{zone: [restaurant_id..]}` from a response's `grouped` object.
pub fn grouped_ids(grouped: &Value) -> BTreeMap<String, Vec<String>> {
    grouped
        .as_object()
        .map(|m| {
            m.iter()
                .map(|(z, list)| (z.clone(), ids(list)))
                .collect()
        })
        .unwrap_or_default()
}

pub fn ids(list: &Value) -> Vec<String> {
    list.as_array()
        .map(|a| a.iter().map(|r| r["restaurant_id"].as_str().unwrap_or_default().to_string()).collect())
        .unwrap_or_default()
}

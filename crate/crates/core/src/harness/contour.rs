//! Marching-squares extraction of superlevel-set boundaries.

use std::collections::HashMap;

use serde::Serialize;

use crate::anisotropy::{anisotropic_perimeter, NormSpec, Polygon};
use crate::error::Result;
use crate::grid::ScalarField;

/// Edge of the dual lattice joining two neighbouring cell centers:
/// `(i, j, 0)` joins `(i, j)`–`(i+1, j)`, `(i, j, 1)` joins `(i, j)`–`(i, j+1)`.
type EdgeId = (isize, isize, u8);

/// Closed boundary loops of `{u > t}`, oriented with the set on their left
/// (outer boundaries counterclockwise, holes clockwise).
pub fn level_set_loops(u: &ScalarField, t: f64) -> Vec<Vec<[f64; 2]>> {
    let (nx, ny) = (u.nx() as isize, u.ny() as isize);
    let at = |i: isize, j: isize| u.value_at(i, j);
    let point = |e: EdgeId| -> [f64; 2] {
        let (i, j, dir) = e;
        let (i2, j2) = if dir == 0 { (i + 1, j) } else { (i, j + 1) };
        let (a, b) = (at(i, j), at(i2, j2));
        let w = ((a - t) / (a - b)).clamp(0.0, 1.0);
        let (x1, y1) = center(u, i, j);
        let (x2, y2) = center(u, i2, j2);
        [x1 + w * (x2 - x1), y1 + w * (y2 - y1)]
    };
    let mut next: HashMap<EdgeId, EdgeId> = HashMap::new();
    for j in -1..ny {
        for i in -1..nx {
            // corners counterclockwise and the edge leaving each corner
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let edges: [EdgeId; 4] = [(i, j, 0), (i + 1, j, 1), (i, j + 1, 0), (i, j, 1)];
            let inside: Vec<bool> = corners.iter().map(|&(a, b)| at(a, b) > t).collect();
            let exits: Vec<usize> = (0..4).filter(|&k| inside[k] && !inside[(k + 1) % 4]).collect();
            let enters: Vec<usize> = (0..4).filter(|&k| !inside[k] && inside[(k + 1) % 4]).collect();
            if exits.is_empty() {
                continue;
            }
            let joined = exits.len() == 2 && {
                let mean = corners.iter().map(|&(a, b)| at(a, b)).sum::<f64>() / 4.0;
                mean > t
            };
            for &ex in &exits {
                // saddles: pair with the next entering edge when the centre
                // is inside, otherwise with the previous one
                let en = if joined || exits.len() == 1 {
                    (1..=4).map(|d| (ex + d) % 4).find(|k| enters.contains(k))
                } else {
                    (1..=4).map(|d| (ex + 4 - d) % 4).find(|k| enters.contains(k))
                };
                next.insert(edges[ex], edges[en.expect("crossings come in pairs")]);
            }
        }
    }
    let mut loops = Vec::new();
    let mut keys: Vec<EdgeId> = next.keys().copied().collect();
    keys.sort_unstable();
    let mut seen = std::collections::HashSet::new();
    for start in keys {
        if seen.contains(&start) {
            continue;
        }
        let mut pts = Vec::new();
        let mut e = start;
        loop {
            seen.insert(e);
            pts.push(point(e));
            match next.get(&e) {
                Some(&n) if n != start => e = n,
                _ => break,
            }
        }
        if pts.len() >= 3 {
            loops.push(pts);
        }
    }
    loops
}

fn center(u: &ScalarField, i: isize, j: isize) -> (f64, f64) {
    let h = u.h();
    ((i as f64 - (u.nx() as f64 - 1.0) / 2.0) * h, (j as f64 - (u.ny() as f64 - 1.0) / 2.0) * h)
}

fn signed_area(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|k| {
            let (a, b) = (pts[k], pts[(k + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

/// Anisotropic isoperimetry of one superlevel set.
#[derive(Clone, Debug, Serialize)]
pub struct LevelSetDeficit {
    pub level: f64,
    pub area: f64,
    pub perimeter: f64,
    /// `P_H − 2·sqrt(k₂·area)`.
    pub deficit: f64,
}

/// Perimeter, area and isoperimetric deficit of `{u > t}` from its
/// marching-squares boundary. `None` if the set is empty or a loop is
/// degenerate.
pub fn level_set_deficit(u: &ScalarField, spec: &NormSpec, t: f64) -> Result<Option<LevelSetDeficit>> {
    let loops = level_set_loops(u, t);
    if loops.is_empty() {
        return Ok(None);
    }
    let mut area = 0.0;
    let mut perimeter = 0.0;
    for pts in loops {
        let a = signed_area(&pts);
        // holes come out clockwise; Polygon normalizes orientation, and H is
        // even so the perimeter is orientation-free
        let Ok(poly) = Polygon::new(pts) else {
            return Ok(None);
        };
        area += a;
        perimeter += anisotropic_perimeter(spec, &poly)?;
    }
    if !(area > 0.0) {
        return Ok(None);
    }
    let kn = spec.wulff_measure();
    Ok(Some(LevelSetDeficit { level: t, area, perimeter, deficit: perimeter - 2.0 * (kn * area).sqrt() }))
}

use super::OrientationSet;
use crate::linalg::{rotation_angle, Mat3};

/// Rotation angle between two right-handed bases, minimized over the proper
/// sign flips of the second (a basis and its flips describe the same frame
/// for an axis-symmetric filter).
pub fn basis_distance(a: &Mat3, b: &Mat3) -> f64 {
    const FLIPS: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
    FLIPS
        .iter()
        .map(|f| {
            let mut bf = *b;
            for (c, &s) in f.iter().enumerate() {
                bf.column_mut(c).scale_mut(s);
            }
            rotation_angle(a, &bf)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Greedy farthest-point selection of at most `max` representative bases.
/// Starts from the strongest seed and stops once the farthest remaining
/// candidate is within `min_sep_deg` of the chosen set.
pub fn cluster_orientations(bases: &[Mat3], strength: &[f64], max: usize, min_sep_deg: f64) -> OrientationSet {
    if bases.is_empty() || max == 0 {
        return OrientationSet::default();
    }
    let first = (0..bases.len())
        .max_by(|&a, &b| strength[a].total_cmp(&strength[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut chosen = vec![bases[first]];
    let mut nearest: Vec<f64> = bases.iter().map(|b| basis_distance(&chosen[0], b)).collect();
    let min_sep = min_sep_deg.to_radians();
    while chosen.len() < max {
        let (far, dist) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if dist < min_sep || dist <= 0.0 {
            break;
        }
        chosen.push(bases[far]);
        for (n, b) in nearest.iter_mut().zip(bases) {
            *n = n.min(basis_distance(&bases[far], b));
        }
    }
    OrientationSet { bases: chosen }
}

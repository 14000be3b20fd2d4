use std::collections::HashMap;

use super::OrientationSet;
use crate::error::{Error, Result};
use crate::linalg::{basis_from_direction, Vec3};

/// Unit directions of an icosahedron subdivided `n` times, one per
/// antipodal pair.
pub fn icosphere_directions(n: usize) -> Result<Vec<Vec3>> {
    if n > 3 {
        return Err(Error::param("icosphere_level", format!("{n} not in 0..=3")));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vec3::from(*v).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..n {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Ok(verts.into_iter().filter(is_canonical).collect())
}

/// Keeps the member of each antipodal pair whose first non-zero component is positive.
fn is_canonical(v: &Vec3) -> bool {
    for a in 0..3 {
        if v[a].abs() > 1e-9 {
            return v[a] > 0.0;
        }
    }
    false
}

/// One right-handed basis per icosphere direction, with the direction as the
/// first column.
pub fn icosphere_bases(n: usize) -> Result<OrientationSet> {
    let bases = icosphere_directions(n)?.iter().map(basis_from_direction).collect();
    OrientationSet::new(bases)
}

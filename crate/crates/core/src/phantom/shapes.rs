use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{render, Branch, CenterlineGT, Curve};
use crate::error::{Error, Result};
use crate::volume::{Grid, ScalarVolume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomKind {
    Tube,
    Helix,
    Bifurcation,
    Kissing,
    /// C-shaped arc whose radius swells and narrows irregularly.
    Hcp,
}

impl std::str::FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tube" => PhantomKind::Tube,
            "helix" => PhantomKind::Helix,
            "bifurcation" => PhantomKind::Bifurcation,
            "kissing" => PhantomKind::Kissing,
            "hcp" => PhantomKind::Hcp,
            _ => return Err(Error::param("kind", format!("unknown phantom kind `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomParams {
    /// Cube edge in voxels.
    pub dims: usize,
    pub radius: f64,
    /// Closest centerline separation of the kissing pair.
    pub gap: f64,
    pub helix_turns: f64,
    /// Full opening angle of the bifurcation, degrees.
    pub branch_angle_deg: f64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        PhantomParams { dims: 64, radius: 2.0, gap: 6.0, helix_turns: 2.0, branch_angle_deg: 60.0 }
    }
}

impl PhantomParams {
    pub fn validate(&self) -> Result<()> {
        if self.dims < 32 {
            return Err(Error::param("phantom.dims", format!("{} below the 32-voxel minimum", self.dims)));
        }
        if !(self.radius > 0.0 && self.radius <= self.dims as f64 / 8.0) {
            return Err(Error::param("phantom.radius", format!("{} not in (0, dims/8]", self.radius)));
        }
        if !(self.gap > 0.0) {
            return Err(Error::param("phantom.gap", "must be positive"));
        }
        if !(self.helix_turns > 0.0) {
            return Err(Error::param("phantom.helix_turns", "must be positive"));
        }
        if !(self.branch_angle_deg > 0.0 && self.branch_angle_deg < 180.0) {
            return Err(Error::param("phantom.branch_angle_deg", "must lie in (0, 180)"));
        }
        Ok(())
    }
}

/// Analytic phantom and its rasterized GT.
pub fn make_phantom(kind: PhantomKind, p: &PhantomParams) -> Result<(ScalarVolume, CenterlineGT)> {
    p.validate()?;
    let n = p.dims;
    let nf = n as f64;
    let c = (n / 2) as f64;
    let (lo, hi) = (4.0, nf - 5.0);
    let r = p.radius;
    // each entry: curve, start node, end node
    let mut curves: Vec<(Curve, usize, usize)> = Vec::new();
    let mut nodes: Vec<[f64; 3]> = Vec::new();
    let mut open = |curve: Curve, nodes: &mut Vec<[f64; 3]>, start: Option<usize>| {
        let a = start.unwrap_or_else(|| {
            nodes.push(curve.points[0]);
            nodes.len() - 1
        });
        nodes.push(*curve.points.last().unwrap());
        curves.push((curve, a, nodes.len() - 1));
    };
    match kind {
        PhantomKind::Tube => {
            open(Curve { points: vec![[lo, c, c], [hi, c, c]], radii: vec![r, r] }, &mut nodes, None);
        }
        PhantomKind::Helix => {
            let big = nf / 5.0;
            let w = 2.0 * PI * p.helix_turns;
            let f = |t: f64| [c + big * (w * t).cos(), c + big * (w * t).sin(), lo + t * (hi - lo)];
            open(Curve::sample(f, |_| r), &mut nodes, None);
        }
        PhantomKind::Bifurcation => {
            let j = [c, c, c];
            open(Curve { points: vec![[c, lo, c], j], radii: vec![r, r] }, &mut nodes, None);
            let half = p.branch_angle_deg.to_radians() / 2.0;
            let len = (hi - c) / half.cos();
            for side in [-1.0, 1.0] {
                let end = [c + side * len * half.sin(), hi, c];
                open(Curve { points: vec![j, end], radii: vec![r, r] }, &mut nodes, Some(1));
            }
        }
        PhantomKind::Kissing => {
            let h = (hi - lo) / 2.0;
            let bow = nf / 5.0;
            for side in [-1.0, 1.0] {
                let f = move |t: f64| {
                    let x = lo + t * (hi - lo);
                    [x, c + side * (p.gap / 2.0 + bow * ((x - c) / h).powi(2)), c]
                };
                open(Curve::sample(f, |_| r), &mut nodes, None);
            }
        }
        PhantomKind::Hcp => {
            let big = nf / 4.0;
            let f = |t: f64| {
                let a = PI * (0.25 + 1.5 * t);
                [c + big * a.cos(), c + big * a.sin(), c + nf / 8.0 * (t - 0.5)]
            };
            open(Curve::sample(f, |t| r * (1.0 + 0.45 * (5.0 * PI * t).sin())), &mut nodes, None);
        }
    }
    let dims = [n; 3];
    for (cv, _, _) in &curves {
        cv.check_bounds(dims)?;
    }
    let grid = Grid::cube(n);
    let mut vol = ScalarVolume::zeros(grid);
    let plain: Vec<Curve> = curves.iter().map(|(cv, _, _)| cv.clone()).collect();
    render(&mut vol, &plain);
    let gt = CenterlineGT {
        grid,
        nodes: nodes.iter().map(|q| q.map(|x| x.round() as usize)).collect(),
        branches: curves.iter().map(|(cv, a, b)| Branch { a: *a, b: *b, voxels: cv.raster() }).collect(),
    };
    Ok((vol, gt))
}

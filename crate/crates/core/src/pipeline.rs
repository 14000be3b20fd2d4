//! The batch stages and their on-disk artifacts.
//!
//! | stage     | writes                                              |
//! |-----------|-----------------------------------------------------|
//! | `phantom` | `volume.vol`, `gt.graph`                            |
//! | `filter`  | `cvm.vol`, `tf.vol`, `seeds.txt`                    |
//! | `extract` | `tree.graph`, with debug dumps `u.vol`, `voronoi.vol`|
//! | `eval`    | `metrics.csv`                                       |
//!
//! Every artifact is a pure function of the configuration and the inputs, so
//! re-running a stage reproduces it byte for byte whatever the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{PhantomSource, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{csv_row, tree_metrics, TreeMetrics, CSV_HEADER};
use crate::filtering::{multiscale_synthesize, MultiscaleResult, SeedSet};
use crate::geodesic::{extract_tree, Extraction, GeodesicTree};
use crate::io::{read_scalar, read_tensor, write_scalar, write_tensor};
use crate::linalg::Mat3;
use crate::phantom::{degrade, generate_tree_volume, make_phantom, CenterlineGT};
use crate::slogs::default_dictionary;
use crate::volume::{Grid, ScalarVolume};

pub const VOLUME_FILE: &str = "volume.vol";
pub const GT_FILE: &str = "gt.graph";
pub const CVM_FILE: &str = "cvm.vol";
pub const TF_FILE: &str = "tf.vol";
pub const SEEDS_FILE: &str = "seeds.txt";
pub const TREE_FILE: &str = "tree.graph";
pub const U_FILE: &str = "u.vol";
pub const VORONOI_FILE: &str = "voronoi.vol";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SEEDS_HEADER: &str = "# vessel-seeds v1";

/// Fails with a not-found I/O error before any work is done.
pub fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Identifier used in the metrics rows.
pub fn volume_id(cfg: &PipelineConfig) -> String {
    match cfg.phantom.kind {
        PhantomSource::Tree => format!("tree-{}", cfg.rng_seed),
        k => format!("{k:?}").to_lowercase(),
    }
}

/// The configured phantom, degraded with the configured noise level.
pub fn make_input(cfg: &PipelineConfig) -> Result<(ScalarVolume, CenterlineGT)> {
    let (clean, gt) = match cfg.phantom.kind.shape() {
        Some(kind) => make_phantom(kind, &cfg.phantom.shape)?,
        None => generate_tree_volume(cfg.rng_seed, cfg.phantom.n_terminals, cfg.phantom.shape.dims)?,
    };
    let v = degrade(&clean, &cfg.phantom.noise.spec(), cfg.rng_seed)?;
    Ok((v, gt))
}

pub fn filter(cfg: &PipelineConfig, v: &ScalarVolume) -> Result<MultiscaleResult> {
    let dict = default_dictionary(&cfg.dictionary)?;
    multiscale_synthesize(v, &dict, &cfg.filter, cfg.workers)
}

pub fn extract(cfg: &PipelineConfig, m: &MultiscaleResult) -> Result<Extraction> {
    extract_tree(&m.cvm, &m.tf, &m.seeds, &cfg.geodesic)
}

/// Filter, extract and score one volume in memory.
pub fn run_volume(cfg: &PipelineConfig, v: &ScalarVolume, gt: &CenterlineGT) -> Result<(Extraction, TreeMetrics)> {
    let m = filter(cfg, v)?;
    let ex = extract(cfg, &m)?;
    let metrics = tree_metrics(&ex.tree, gt, cfg.rho)?;
    Ok((ex, metrics))
}

pub fn run_phantom(cfg: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let (v, gt) = make_input(cfg)?;
    write_phantom(&v, &gt, out)
}

fn write_phantom(v: &ScalarVolume, gt: &CenterlineGT, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let (vp, gp) = (out.join(VOLUME_FILE), out.join(GT_FILE));
    write_scalar(&vp, v)?;
    gt.to_tree().write(&gp)?;
    Ok(vec![vp, gp])
}

/// Filters the volume at `input`. Debug dumps add the per-scale CVM and
/// tubular saliency at each scale's own resolution.
pub fn run_filter(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    require(input)?;
    let v = read_scalar(input)?;
    ensure_dir(out)?;
    let m = filter(cfg, &v)?;
    write_filter(cfg, &m, out)
}

fn write_filter(cfg: &PipelineConfig, m: &MultiscaleResult, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = vec![out.join(CVM_FILE), out.join(TF_FILE), out.join(SEEDS_FILE)];
    write_scalar(&written[0], &m.cvm)?;
    write_tensor(&written[1], &m.tf)?;
    write_seeds(&written[2], m.cvm.grid(), &m.seeds)?;
    if cfg.io.debug_dumps {
        for (i, (_, r)) in m.scales.iter().enumerate() {
            for (name, vol) in [("cvm", &r.cvm), ("vtube", &r.v_tube)] {
                let p = out.join(format!("scale{i}_{name}.vol"));
                write_scalar(&p, vol)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

/// Extracts the tree from the filter artifacts found in `input_dir`.
pub fn run_extract(cfg: &PipelineConfig, input_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let (cp, tp, sp) = (input_dir.join(CVM_FILE), input_dir.join(TF_FILE), input_dir.join(SEEDS_FILE));
    for p in [&cp, &tp, &sp] {
        require(p)?;
    }
    let cvm = read_scalar(&cp)?;
    let tf = read_tensor(&tp)?;
    let seeds = read_seeds(&sp)?;
    if cvm.dims() != tf.dims() {
        return Err(Error::InvalidVolume(format!("CVM dims {:?} differ from TF dims {:?}", cvm.dims(), tf.dims())));
    }
    ensure_dir(out)?;
    let ex = extract_tree(&cvm, &tf, &seeds, &cfg.geodesic)?;
    write_extraction(cfg, &ex, out)
}

fn write_extraction(cfg: &PipelineConfig, ex: &Extraction, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = vec![out.join(TREE_FILE)];
    ex.tree.write(&written[0])?;
    if cfg.io.debug_dumps {
        for (name, vol) in [(U_FILE, &ex.u), (VORONOI_FILE, &ex.voronoi)] {
            let p = out.join(name);
            write_scalar(&p, vol)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Scores the tree graph at `tree` against the GT graph at `gt`.
pub fn run_eval(cfg: &PipelineConfig, tree: &Path, gt: &Path, out: &Path) -> Result<(TreeMetrics, PathBuf)> {
    require(tree)?;
    require(gt)?;
    let t = GeodesicTree::read(tree)?;
    let g = CenterlineGT::from_tree(&GeodesicTree::read(gt)?)?;
    ensure_dir(out)?;
    let m = tree_metrics(&t, &g, cfg.rho)?;
    let p = out.join(METRICS_FILE);
    write_metrics(&p, &volume_id(cfg), cfg.phantom.noise.name(), &m)?;
    Ok((m, p))
}

fn write_metrics(path: &Path, id: &str, noise: &str, m: &TreeMetrics) -> Result<()> {
    let text = format!("{CSV_HEADER}\n{}\n", csv_row(id, noise, m));
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Every stage in sequence. With `io.input` set the phantom stage is skipped
/// and evaluation only runs when `io.gt` is also given.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<Option<TreeMetrics>> {
    let (v, gt) = match &cfg.io.input {
        Some(input) => {
            require(input)?;
            let gt = match &cfg.io.gt {
                Some(p) => {
                    require(p)?;
                    Some(CenterlineGT::from_tree(&GeodesicTree::read(p)?)?)
                }
                None => None,
            };
            (read_scalar(input)?, gt)
        }
        None => {
            let (v, gt) = make_input(cfg)?;
            write_phantom(&v, &gt, out)?;
            (v, Some(gt))
        }
    };
    ensure_dir(out)?;
    let m = filter(cfg, &v)?;
    write_filter(cfg, &m, out)?;
    let ex = extract(cfg, &m)?;
    write_extraction(cfg, &ex, out)?;
    let Some(gt) = gt else { return Ok(None) };
    let metrics = tree_metrics(&ex.tree, &gt, cfg.rho)?;
    write_metrics(&out.join(METRICS_FILE), &volume_id(cfg), cfg.phantom.noise.name(), &metrics)?;
    Ok(Some(metrics))
}

/// One seed per line: voxel, strength, then the orientation basis row by row.
pub fn seeds_to_text(grid: &Grid, seeds: &SeedSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{SEEDS_HEADER}");
    let _ = writeln!(s, "dims {} {} {}", grid.dims[0], grid.dims[1], grid.dims[2]);
    let _ = writeln!(s, "seeds {}", seeds.len());
    for i in 0..seeds.len() {
        let [x, y, z] = seeds.voxels[i];
        let _ = write!(s, "{x} {y} {z} {}", seeds.strength[i]);
        let q = &seeds.orientations[i];
        for r in 0..3 {
            for c in 0..3 {
                let _ = write!(s, " {}", q[(r, c)]);
            }
        }
        s.push('\n');
    }
    s
}

pub fn parse_seeds(text: &str, origin: &Path) -> Result<(Grid, SeedSet)> {
    let bad = |no: usize, why: &str| Error::format(origin, format!("line {}: {why}", no + 1));
    let lines: Vec<(usize, &str)> = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).collect();
    if lines.first().map(|l| l.1.trim()) != Some(SEEDS_HEADER) {
        return Err(Error::format(origin, "expected the vessel-seeds v1 header"));
    }
    let field = |k: usize, key: &str, n: usize| -> Result<Vec<usize>> {
        let (no, l) = *lines.get(k).ok_or_else(|| Error::format(origin, format!("missing `{key}` record")))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.first() != Some(&key) || f.len() != n + 1 {
            return Err(bad(no, &format!("expected `{key}` record")));
        }
        f[1..].iter().map(|x| x.parse().map_err(|_| bad(no, &format!("bad number `{x}`")))).collect()
    };
    let d = field(1, "dims", 3)?;
    let grid = Grid::new([d[0], d[1], d[2]], [1.0; 3])?;
    let n = field(2, "seeds", 1)?[0];
    if lines.len() != 3 + n {
        return Err(Error::format(origin, format!("expected {n} seed lines, found {}", lines.len() - 3)));
    }
    let mut seeds = SeedSet::default();
    for &(no, l) in &lines[3..] {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 13 {
            return Err(bad(no, "a seed line holds 3 indices, a strength and 9 basis entries"));
        }
        let v: Vec<usize> = f[..3].iter().map(|x| x.parse().map_err(|_| bad(no, "bad voxel index"))).collect::<Result<_>>()?;
        let r: Vec<f64> = f[3..].iter().map(|x| x.parse().map_err(|_| bad(no, "bad number"))).collect::<Result<_>>()?;
        let voxel = [v[0], v[1], v[2]];
        if !grid.contains(voxel.map(|x| x as i64)) {
            return Err(bad(no, "seed outside the grid"));
        }
        seeds.voxels.push(voxel);
        seeds.strength.push(r[0]);
        seeds.orientations.push(Mat3::from_row_slice(&r[1..]));
    }
    Ok((grid, seeds))
}

pub fn write_seeds(path: &Path, grid: &Grid, seeds: &SeedSet) -> Result<()> {
    fs::write(path, seeds_to_text(grid, seeds)).map_err(|e| Error::io(path, e))
}

pub fn read_seeds(path: &Path) -> Result<SeedSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_seeds(&text, path)?.1)
}

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kernel::{degenerate_kernels_with, KernelDiagnostics};
use super::{build_kernel, check_support, DiscreteKernel, KernelKind, KernelParams};
use crate::error::{Error, Result};
use crate::io::{read_raw, write_raw, RawDtype, RawVolume};
use crate::linalg::{Mat3, SymMat3};
use crate::volume::Grid;

/// Dictionary contents; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DictionaryConfig {
    pub support: usize,
    pub oversample: usize,
    pub curvilinear: Vec<KernelParams>,
    pub tube: KernelParams,
    pub sigma_delta: f64,
    pub use_delta: bool,
    pub use_flat: bool,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        let s = [2.0, 0.5, 0.5];
        let k = |c: [f64; 3]| KernelParams { sigma: s, curvature: c };
        DictionaryConfig {
            support: 11,
            oversample: 4,
            curvilinear: vec![
                k([0.0, 0.0, 0.0]),
                k([0.0, 0.15, 0.0]),
                k([0.0, 0.3, 0.0]),
                k([0.0, 0.0, 0.05]),
                k([0.3, 0.1, 0.0]),
            ],
            tube: KernelParams::tube(),
            sigma_delta: 0.5,
            use_delta: true,
            use_flat: true,
        }
    }
}

impl DictionaryConfig {
    pub fn validate(&self) -> Result<()> {
        check_support(self.support).map_err(|e| rename(e, "dictionary"))?;
        if !(2..=16).contains(&self.oversample) {
            return Err(Error::param("dictionary.oversample", format!("{} not in [2, 16]", self.oversample)));
        }
        if self.curvilinear.is_empty() {
            return Err(Error::param("dictionary.curvilinear", "at least one kernel is required"));
        }
        for (i, p) in self.curvilinear.iter().enumerate() {
            p.validate().map_err(|e| rename(e, &format!("dictionary.curvilinear[{i}]")))?;
        }
        self.tube.validate().map_err(|e| rename(e, "dictionary.tube"))?;
        if !(self.sigma_delta > 0.0 && self.sigma_delta <= 1.0) {
            return Err(Error::param("dictionary.sigma_delta", format!("{} not in (0, 1]", self.sigma_delta)));
        }
        Ok(())
    }
}

fn rename(e: Error, prefix: &str) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::param(format!("{prefix}.{field}"), reason),
        other => other,
    }
}

/// The filterbank: curvilinear kernels, the tubular saliency kernel and the
/// isotropic pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    pub curvilinear: Vec<DiscreteKernel>,
    pub tube: DiscreteKernel,
    pub delta: DiscreteKernel,
    pub flat: DiscreteKernel,
    pub use_delta: bool,
    pub use_flat: bool,
}

impl Dictionary {
    pub fn support(&self) -> usize {
        self.tube.support
    }

    /// Kernels whose rectified responses build the vesselness map.
    pub fn response_kernels(&self) -> impl Iterator<Item = &DiscreteKernel> {
        self.curvilinear.iter().chain(std::iter::once(&self.tube))
    }

    /// The isotropic kernels switched on for the tensor sweep.
    pub fn isotropic_kernels(&self) -> impl Iterator<Item = &DiscreteKernel> {
        let d = self.use_delta.then_some(&self.delta);
        let f = self.use_flat.then_some(&self.flat);
        d.into_iter().chain(f)
    }

    pub fn all(&self) -> impl Iterator<Item = &DiscreteKernel> {
        self.response_kernels().chain([&self.delta, &self.flat])
    }
}

pub fn default_dictionary(cfg: &DictionaryConfig) -> Result<Dictionary> {
    cfg.validate()?;
    let curvilinear = cfg
        .curvilinear
        .iter()
        .map(|p| build_kernel(p, cfg.support, cfg.oversample))
        .collect::<Result<Vec<_>>>()?;
    let mut tube = build_kernel(&cfg.tube, cfg.support, cfg.oversample)?;
    tube.kind = KernelKind::Tube;
    let (delta, flat) = degenerate_kernels_with(cfg.sigma_delta, cfg.support, cfg.oversample)?;
    Ok(Dictionary {
        curvilinear,
        tube,
        delta,
        flat,
        use_delta: cfg.use_delta,
        use_flat: cfg.use_flat,
    })
}

const MANIFEST: &str = "manifest.txt";
const MANIFEST_HEADER: &str = "# slogs-dictionary v1";

/// Writes every kernel as three raw patches plus a text manifest.
pub fn save_dictionary(dict: &Dictionary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let s = dict.support();
    let grid = Grid::cube(s);
    let mut m = String::new();
    writeln!(m, "{MANIFEST_HEADER}").unwrap();
    writeln!(m, "support {s}").unwrap();
    writeln!(m, "use_delta {}", dict.use_delta).unwrap();
    writeln!(m, "use_flat {}", dict.use_flat).unwrap();
    for (i, k) in dict.all().enumerate() {
        write!(m, "kernel {i} {}", k.kind.name()).unwrap();
        if let Some(p) = k.params {
            write!(m, " sigma {} {} {} curvature {} {} {}", p.sigma[0], p.sigma[1], p.sigma[2], p.curvature[0], p.curvature[1], p.curvature[2]).unwrap();
        }
        match k.phi {
            Some(phi) => {
                write!(m, " phi").unwrap();
                for v in phi.iter() {
                    write!(m, " {v}").unwrap();
                }
            }
            None => write!(m, " phi none").unwrap(),
        }
        writeln!(m).unwrap();
        let raw = |components, data| RawVolume { grid, components, data };
        write_raw(&dir.join(format!("kernel_{i:02}_k.vol")), &raw(1, k.k_patch.clone()), RawDtype::F64)?;
        write_raw(&dir.join(format!("kernel_{i:02}_gamma.vol")), &raw(1, k.gamma_patch.clone()), RawDtype::F64)?;
        let mut t = vec![0.0; 6 * k.len()];
        for (v, tensor) in k.tensor_patch.iter().enumerate() {
            for (c, x) in tensor.to_array().iter().enumerate() {
                t[c * k.len() + v] = *x;
            }
        }
        write_raw(&dir.join(format!("kernel_{i:02}_tensor.vol")), &raw(6, t), RawDtype::F64)?;
    }
    let path = dir.join(MANIFEST);
    std::fs::write(&path, m).map_err(|e| Error::io(path, e))
}

pub fn load_dictionary(dir: &Path) -> Result<Dictionary> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |reason: String| Error::format(&path, reason);
    let mut lines = text.lines();
    if lines.next() != Some(MANIFEST_HEADER) {
        return Err(bad("missing manifest header".into()));
    }
    let mut support = None;
    let mut use_delta = true;
    let mut use_flat = true;
    let mut kernels = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.first().copied() {
            None => {}
            Some("support") => support = tok.get(1).and_then(|v| v.parse::<usize>().ok()),
            Some("use_delta") => use_delta = tok.get(1) == Some(&"true"),
            Some("use_flat") => use_flat = tok.get(1) == Some(&"true"),
            Some("kernel") => kernels.push(parse_kernel(&tok, dir).map_err(|r| bad(format!("{r} in `{line}`")))?),
            Some(other) => return Err(bad(format!("unknown record `{other}`"))),
        }
    }
    let support = support.ok_or_else(|| bad("missing support".into()))?;
    if kernels.iter().any(|k| k.support != support) {
        return Err(bad("kernel support mismatch".into()));
    }
    let take = |kind: KernelKind, kernels: &mut Vec<DiscreteKernel>| {
        kernels
            .iter()
            .position(|k| k.kind == kind)
            .map(|i| kernels.remove(i))
            .ok_or_else(|| bad(format!("no {} kernel", kind.name())))
    };
    let tube = take(KernelKind::Tube, &mut kernels)?;
    let delta = take(KernelKind::Delta, &mut kernels)?;
    let flat = take(KernelKind::Flat, &mut kernels)?;
    if kernels.is_empty() {
        return Err(bad("no curvilinear kernels".into()));
    }
    Ok(Dictionary {
        curvilinear: kernels,
        tube,
        delta,
        flat,
        use_delta,
        use_flat,
    })
}

fn parse_kernel(tok: &[&str], dir: &Path) -> std::result::Result<DiscreteKernel, String> {
    let num = |i: usize| -> std::result::Result<f64, String> {
        tok.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| format!("bad number at field {i}"))
    };
    let id: usize = tok.get(1).and_then(|v| v.parse().ok()).ok_or("bad kernel id")?;
    let kind = match tok.get(2).copied() {
        Some("curvilinear") => KernelKind::Curvilinear,
        Some("tube") => KernelKind::Tube,
        Some("delta") => KernelKind::Delta,
        Some("flat") => KernelKind::Flat,
        _ => return Err("bad kernel kind".into()),
    };
    let mut at = 3;
    let mut params = None;
    if tok.get(at) == Some(&"sigma") {
        if tok.get(at + 4) != Some(&"curvature") {
            return Err("expected curvature".into());
        }
        params = Some(KernelParams {
            sigma: [num(at + 1)?, num(at + 2)?, num(at + 3)?],
            curvature: [num(at + 5)?, num(at + 6)?, num(at + 7)?],
        });
        at += 8;
    }
    if tok.get(at) != Some(&"phi") {
        return Err("expected phi".into());
    }
    let phi = if tok.get(at + 1) == Some(&"none") {
        None
    } else {
        let v: Vec<f64> = (0..9).map(|i| num(at + 1 + i)).collect::<std::result::Result<_, _>>()?;
        Some(Mat3::from_column_slice(&v))
    };
    let read = |suffix: &str, comps: usize| -> std::result::Result<RawVolume, String> {
        let raw = read_raw(&dir.join(format!("kernel_{id:02}_{suffix}.vol"))).map_err(|e| e.to_string())?;
        if raw.components != comps || raw.grid.dims[0] != raw.grid.dims[1] || raw.grid.dims[1] != raw.grid.dims[2] {
            return Err(format!("patch shape mismatch for {suffix}"));
        }
        Ok(raw)
    };
    let k = read("k", 1)?;
    let g = read("gamma", 1)?;
    let t = read("tensor", 6)?;
    let support = k.grid.dims[0];
    let n = support.pow(3);
    if g.grid.dims[0] != support || t.grid.dims[0] != support {
        return Err("patch sizes disagree".into());
    }
    let tensor_patch = (0..n)
        .map(|v| SymMat3::from_array(std::array::from_fn(|c| t.data[c * n + v])))
        .collect();
    Ok(DiscreteKernel {
        support,
        k_patch: k.data,
        gamma_patch: g.data,
        tensor_patch,
        phi,
        kind,
        params,
        diagnostics: KernelDiagnostics::default(),
        source: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spd_exp;

    fn small() -> DictionaryConfig {
        DictionaryConfig {
            oversample: 2,
            ..Default::default()
        }
    }

    #[test]
    fn default_layout() {
        let d = default_dictionary(&small()).unwrap();
        assert_eq!(d.curvilinear.len(), 5);
        assert_eq!(d.tube.kind, KernelKind::Tube);
        assert_eq!(d.delta.kind, KernelKind::Delta);
        assert_eq!(d.flat.kind, KernelKind::Flat);
        assert!(d.all().all(|k| k.support == 11 && k.k_patch.len() == 1331));
        for k in d.all() {
            let mean = k.k_patch.iter().sum::<f64>() / k.len() as f64;
            assert!(mean.abs() < 1e-10);
            assert!(k.gamma_patch.iter().all(|&g| g >= 0.0));
            assert!(k.tensor_patch.iter().all(|t| (spd_exp(t).det() - 1.0).abs() < 1e-6));
            if k.kind.is_steerable() {
                assert!(crate::linalg::orthonormality_error(&k.phi.unwrap()) < 1e-10);
            }
        }
    }

    #[test]
    fn support_override() {
        let d = default_dictionary(&DictionaryConfig { support: 9, ..small() }).unwrap();
        assert!(d.all().all(|k| k.k_patch.len() == 729 && k.tensor_patch.len() == 729));
    }

    #[test]
    fn invalid_fields_are_named() {
        let cfg = DictionaryConfig { support: 8, ..small() };
        match default_dictionary(&cfg) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "dictionary.support"),
            other => panic!("unexpected {other:?}"),
        }
        let mut cfg = small();
        cfg.curvilinear[2].curvature[1] = 3.0;
        match default_dictionary(&cfg) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "dictionary.curvilinear[2].curvature[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dump_and_load_round_trip() {
        let d = default_dictionary(&DictionaryConfig { support: 7, ..small() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dictionary(&d, dir.path()).unwrap();
        let back = load_dictionary(dir.path()).unwrap();
        assert_eq!(back.curvilinear.len(), d.curvilinear.len());
        for (a, b) in back.all().zip(d.all()) {
            assert_eq!(a.k_patch, b.k_patch);
            assert_eq!(a.gamma_patch, b.gamma_patch);
            assert_eq!(a.tensor_patch, b.tensor_patch);
            assert_eq!(a.phi, b.phi);
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.params, b.params);
        }
    }
}

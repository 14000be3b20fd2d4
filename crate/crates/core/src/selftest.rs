//! A fast invariant suite runnable from the binary, for checking an install
//! or a build on a new machine. Each check is small enough to finish in
//! seconds and prints the worst value it measured.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edt::distance_transform;
use crate::error::Result;
use crate::eval::tree_metrics;
use crate::filtering::partition_of_unity;
use crate::geodesic::{extract_with, init_front, FrontState, MetricField, Propagation};
use crate::linalg::{eig_sym3, spd_exp, spd_log, SymMat3};
use crate::phantom::{degrade, make_phantom, NoiseSpec, PhantomKind, PhantomParams};
use crate::slogs::{default_dictionary, DictionaryConfig};
use crate::volume::{Grid, ScalarVolume};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst measured value against its bound.
    pub detail: String,
}

fn check(name: &'static str, worst: f64, bound: f64) -> Check {
    Check { name, passed: worst <= bound, detail: format!("worst {worst:e} (bound {bound:e})") }
}

fn random_sym(rng: &mut ChaCha8Rng) -> SymMat3 {
    SymMat3::from_array([0; 6].map(|_| rng.random_range(-1.0..1.0)))
}

fn eigen(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = random_sym(rng);
        let e = eig_sym3(&m)?;
        worst = worst.max(e.reconstruct().add(m.scale(-1.0)).norm() / m.norm().max(1e-300));
    }
    Ok(check("eigendecomposition reconstructs", worst, 1e-8))
}

fn log_exp(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let v = random_sym(rng);
        let back = spd_log(&spd_exp(&v))?;
        worst = worst.max(back.add(v.scale(-1.0)).norm());
    }
    Ok(check("log-exp round trip", worst, 1e-9))
}

fn dictionary() -> Result<Vec<Check>> {
    let dict = default_dictionary(&DictionaryConfig::default())?;
    let (mut fact, mut gsum) = (0.0f64, 0.0f64);
    for k in dict.response_kernels() {
        fact = fact.max(k.diagnostics.factorization_error);
        gsum = gsum.max(k.diagnostics.gamma_sum_error);
    }
    Ok(vec![check("kernel factorization identity", fact, 1e-9), check("gamma sums to one", gsum, 1e-10)])
}

fn overlap_add() -> Check {
    let pu = partition_of_unity([48, 40, 36], 16);
    let worst = pu.data().iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    check("overlap-add partition of unity", worst, 1e-6)
}

fn distance(rng: &mut ChaCha8Rng) -> Result<Check> {
    let g = Grid::cube(10);
    let pts: Vec<[usize; 3]> = (0..12).map(|_| [0; 3].map(|_| rng.random_range(0..10))).collect();
    let mut mask = ScalarVolume::zeros(g);
    for &p in &pts {
        mask.set(p, 1.0);
    }
    let d = distance_transform(&mask)?;
    let mut worst: f64 = 0.0;
    for i in 0..g.len() {
        let v = g.coords(i);
        let want = pts
            .iter()
            .map(|p| (0..3).map(|a| (v[a] as f64 - p[a] as f64).powi(2)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((d.data()[i] - want).abs());
    }
    Ok(check("distance transform is exact", worst, 1e-9))
}

fn marching() -> Result<Vec<Check>> {
    let g = Grid::cube(20);
    let m = MetricField::uniform(g, 1.0);
    let mut u = vec![f64::INFINITY; g.len()];
    let mut vis = vec![false; g.len()];
    let c = g.index(10, 10, 10);
    u[c] = 0.0;
    vis[c] = true;
    let probe = FrontState::from_distances(g, u, &vis)?;
    let axis = (probe.afm_update(&m, [11, 10, 10])? - 1.0).abs();

    let mut st = init_front(&[[10, 10, 10]], g)?;
    while let Propagation::Collision(_) = st.propagate_until_collision(&m)? {}
    let mut rel: f64 = 0.0;
    for (i, &got) in st.u().iter().enumerate() {
        let r = g.coords(i).iter().map(|&x| (x as f64 - 10.0).powi(2)).sum::<f64>().sqrt();
        if r >= 3.0 {
            rel = rel.max((got - r).abs() / r);
        }
    }

    let seeds = [[2, 2, 2], [17, 3, 4], [9, 16, 15], [3, 15, 3]];
    let ex = extract_with(&m, init_front(&seeds, g)?)?;
    let shape_ok = ex.tree.is_acyclic() && ex.tree.edges.len() == seeds.len() - 1;
    Ok(vec![
        check("one-point axis update", axis, 1e-9),
        check("isotropic marching relative error", rel, 0.10),
        Check {
            name: "four sources give a three-edge tree",
            passed: shape_ok,
            detail: format!("{} edges, acyclic {}", ex.tree.edges.len(), ex.tree.is_acyclic()),
        },
    ])
}

fn phantom_and_metrics() -> Result<Vec<Check>> {
    let (v, gt) = make_phantom(PhantomKind::Bifurcation, &PhantomParams { dims: 32, ..Default::default() })?;
    let m = tree_metrics(&gt.to_tree(), &gt, 2.0)?;
    let same = degrade(&v, &NoiseSpec::NONE, 1)? == v;
    let flat = ScalarVolume::filled(Grid::cube(64), 100.0);
    let sp = NoiseSpec { salt_pepper_rate: 0.001, ..NoiseSpec::NONE };
    let flipped = degrade(&flat, &sp, 1)?.data().iter().filter(|&&x| x != 100.0).count();
    Ok(vec![
        Check {
            name: "ground truth scores perfectly",
            passed: m.precision == 1.0 && m.recall == 1.0 && m.mean_error == 0.0,
            detail: format!("precision {} recall {} error {}", m.precision, m.recall, m.mean_error),
        },
        Check { name: "zero noise is the identity", passed: same, detail: String::new() },
        Check { name: "salt and pepper count", passed: flipped == 262, detail: format!("{flipped} of 262") },
    ])
}

/// Runs every check; errors inside a check are reported as failures.
pub fn run_selftest() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut out = Vec::new();
    let mut push = |name: &'static str, r: Result<Vec<Check>>| match r {
        Ok(c) => out.extend(c),
        Err(e) => out.push(Check { name, passed: false, detail: e.to_string() }),
    };
    push("eigendecomposition", eigen(&mut rng).map(|c| vec![c]));
    push("log-exp", log_exp(&mut rng).map(|c| vec![c]));
    push("dictionary", dictionary());
    push("overlap-add", Ok(vec![overlap_add()]));
    push("distance transform", distance(&mut rng).map(|c| vec![c]));
    push("marching", marching());
    push("phantoms", phantom_and_metrics());
    out
}

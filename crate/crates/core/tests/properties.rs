use proptest::prelude::*;
use vesseltree::filtering::{assemble_scale, partition_of_unity, FilterConfig, SeedSet};
use vesseltree::linalg::{basis_from_direction, spd_exp, Vec3};
use vesseltree::slogs::{default_dictionary, Dictionary, DictionaryConfig};
use vesseltree::volume::{Grid, ScalarVolume};

fn dict() -> &'static Dictionary {
    static D: std::sync::OnceLock<Dictionary> = std::sync::OnceLock::new();
    D.get_or_init(|| default_dictionary(&DictionaryConfig::default()).unwrap())
}

/// Gaussian tube along `dir` through `c`, cut to zero outside `x ∈ [x0, x1)`.
fn tube(grid: Grid, c: [f64; 3], dir: [f64; 3], r: f64, x0: usize, x1: usize) -> ScalarVolume {
    let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let d = dir.map(|x| x / n);
    ScalarVolume::from_fn(grid, |p| {
        if p[0] < x0 || p[0] >= x1 {
            return 0.0;
        }
        let q = [0, 1, 2].map(|k| p[k] as f64 - c[k]);
        let t = q[0] * d[0] + q[1] * d[1] + q[2] * d[2];
        let d2 = (0..3).map(|k| (q[k] - t * d[k]).powi(2)).sum::<f64>();
        255.0 * (-d2 / (2.0 * r * r)).exp()
    })
}

fn seeds_along(c: [f64; 3], dir: [f64; 3], xs: std::ops::Range<usize>) -> SeedSet {
    let q = basis_from_direction(&Vec3::new(dir[0], dir[1], dir[2]).normalize());
    let mut s = SeedSet::default();
    for x in xs.step_by(3) {
        let t = (x as f64 - c[0]) / dir[0];
        s.voxels.push([x, (c[1] + t * dir[1]).round() as usize, (c[2] + t * dir[2]).round() as usize]);
        s.orientations.push(q);
        s.strength.push(1.0);
    }
    s
}

fn config() -> FilterConfig {
    FilterConfig { scales: vec![1.0], ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn hann_tiling_is_a_partition_of_unity(
        dx in 1usize..48, dy in 1usize..48, dz in 1usize..48, half in 4usize..17
    ) {
        let pu = partition_of_unity([dx, dy, dz], 2 * half);
        for &x in pu.data() {
            prop_assert!((x - 1.0).abs() <= 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 3, ..ProptestConfig::default() })]

    /// Blocks never see across their own extent, so two halves whose seeds
    /// share no block filter independently.
    #[test]
    fn cvm_is_additive_over_disjoint_halves(
        ya in 10.0f64..22.0, yb in 10.0f64..22.0, slope in -0.3f64..0.3, r in 1.0f64..2.0
    ) {
        let g = Grid::new([64, 32, 32], [1.0; 3]).unwrap();
        let (ca, cb) = ([8.0, ya, 16.0], [52.0, yb, 16.0]);
        let dir = [1.0, slope, 0.1];
        let a = tube(g, ca, dir, r, 0, 24);
        let b = tube(g, cb, dir, r, 40, 64);
        let (sa, sb) = (seeds_along(ca, dir, 4..15), seeds_along(cb, dir, 49..60));
        let both = ScalarVolume::new(g, a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect()).unwrap();
        let mut sab = sa.clone();
        sab.voxels.extend(&sb.voxels);
        sab.orientations.extend(&sb.orientations);
        sab.strength.extend(&sb.strength);
        let cfg = config();
        let (ka, _) = assemble_scale(&a, dict(), &sa, &cfg, 1).unwrap();
        let (kb, _) = assemble_scale(&b, dict(), &sb, &cfg, 1).unwrap();
        let (kab, tf) = assemble_scale(&both, dict(), &sab, &cfg, 1).unwrap();
        let peak = kab.max();
        prop_assert!(peak > 0.0);
        for i in 0..g.len() {
            prop_assert!((kab.data()[i] - ka.data()[i] - kb.data()[i]).abs() <= 1e-6 * peak);
        }
        for t in tf.data() {
            prop_assert!((spd_exp(t).det() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn worker_count_does_not_change_a_bit(seed in 0u64..1000, workers in 2usize..5) {
        let g = Grid::new([48, 40, 32], [1.0; 3]).unwrap();
        let c = [0.0, 12.0 + (seed % 16) as f64, 16.0];
        let dir = [1.0, 0.2, -0.1];
        let v = tube(g, c, dir, 1.5, 0, 48);
        let s = seeds_along(c, dir, 2..44);
        let cfg = FilterConfig { block_edge: 24, ..config() };
        let one = assemble_scale(&v, dict(), &s, &cfg, 1).unwrap();
        let many = assemble_scale(&v, dict(), &s, &cfg, workers).unwrap();
        prop_assert_eq!(one.0.data(), many.0.data());
        prop_assert!(one.1.data() == many.1.data());
    }
}

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::metric::MetricField;
use super::path::{descend, Path};
use super::simplex::{neighbour_slots, offset_of, one_point, three_point, two_point, INCIDENT, INCIDENT_EDGES, SIMPLICES};
use crate::error::{Error, Result};
use crate::volume::{Grid, ScalarVolume};

/// Fast-marching state of a voxel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag {
    Far,
    Front,
    Visited,
}

/// Heap key: smallest `u` first, ties by voxel index.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Key {
    u: f64,
    idx: usize,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, o: &Self) -> Ordering {
        self.u.total_cmp(&o.u).then(self.idx.cmp(&o.idx))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Two adjacent Visited voxels of different regions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collision {
    pub voxel_a: [usize; 3],
    pub voxel_b: [usize; 3],
    pub region_a: u32,
    pub region_b: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Propagation {
    Collision(Collision),
    Converged,
}

/// Multi-source front: distance `u`, region labels (the Voronoi map) and tags.
///
/// Regions are numbered `1..=P` after the seed components. Merging keeps
/// the smaller number, so a region's label is the lowest component it holds.
#[derive(Clone, Debug)]
pub struct FrontState {
    grid: Grid,
    u: Vec<f64>,
    /// Seed component each voxel was reached from; 0 before that.
    component: Vec<u32>,
    tag: Vec<Tag>,
    heap: BinaryHeap<Reverse<Key>>,
    /// Current region of every component, and the components of every region.
    root: Vec<u32>,
    members: Vec<Vec<u32>>,
    components: Vec<Vec<usize>>,
    regions: usize,
    pops: usize,
    cap: usize,
    /// Pop counter at which each voxel last took its final value; breaks
    /// ties between equal distances when descending.
    stamp: Vec<usize>,
}

/// Offsets of the 26-neighbourhood that stay inside the grid.
#[inline]
fn for_neighbours(grid: &Grid, idx: usize, mut f: impl FnMut(usize, usize)) {
    let c = grid.coords(idx);
    for s in neighbour_slots() {
        if let Some(n) = grid.offset(c, offset_of(s)) {
            f(s, n);
        }
    }
}

/// Values of the 26 neighbours of `n` that may serve as update vertices.
#[inline]
fn vertices(grid: &Grid, n: usize, u: &[f64], ok: &impl Fn(usize) -> bool) -> [Option<f64>; 27] {
    let mut v = [None; 27];
    for_neighbours(grid, n, |s, y| {
        if ok(y) {
            v[s] = Some(u[y]);
        }
    });
    v
}

/// Update of voxel `n` restricted to the simplices through the neighbour in
/// slot `s`, whose value is `v[s]`.
fn update_through(metric: &MetricField, n: usize, s: usize, v: &[Option<f64>; 27]) -> f64 {
    let m = metric.cost(n);
    let Some(us) = v[s] else { return f64::INFINITY };
    let os = offset_of(s);
    let mut best = one_point(m, us, os);
    for &t in &INCIDENT_EDGES[s] {
        if let Some(ut) = v[t] {
            if let Some(c) = two_point(m, [us, ut], [os, offset_of(t)]) {
                best = best.min(c);
            }
        }
    }
    for tri in &INCIDENT[s] {
        if let (Some(u1), Some(u2)) = (v[tri[1]], v[tri[2]]) {
            if let Some(c) = three_point(m, [us, u1, u2], [os, offset_of(tri[1]), offset_of(tri[2])]) {
                best = best.min(c);
            }
        }
    }
    best
}

/// Update of voxel `n` over all 48 simplices.
fn update_full(metric: &MetricField, n: usize, v: &[Option<f64>; 27]) -> f64 {
    let m = metric.cost(n);
    let mut best = f64::INFINITY;
    for s in neighbour_slots() {
        if let Some(us) = v[s] {
            best = best.min(one_point(m, us, offset_of(s)));
        }
    }
    for tri in SIMPLICES.iter() {
        let s = tri.map(super::simplex::slot);
        let val = s.map(|x| v[x]);
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            if let (Some(a), Some(b)) = (val[i], val[j]) {
                if let Some(c) = two_point(m, [a, b], [tri[i], tri[j]]) {
                    best = best.min(c);
                }
            }
        }
        if let [Some(a), Some(b), Some(c)] = val {
            if let Some(x) = three_point(m, [a, b, c], *tri) {
                best = best.min(x);
            }
        }
    }
    best
}

/// 26-connected components of the seed voxels, in order of their first voxel.
pub fn seed_components(grid: &Grid, seeds: &[[usize; 3]]) -> Result<Vec<Vec<usize>>> {
    let mut mask = vec![false; grid.len()];
    for &s in seeds {
        if (0..3).any(|a| s[a] >= grid.dims[a]) {
            return Err(Error::param("seeds", format!("voxel {s:?} outside dims {:?}", grid.dims)));
        }
        mask[grid.index_of(s)] = true;
    }
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    for start in 0..grid.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut next = 0;
        while next < comp.len() {
            let x = comp[next];
            next += 1;
            for_neighbours(grid, x, |_, n| {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    comp.push(n);
                }
            });
        }
        comp.sort_unstable();
        out.push(comp);
    }
    Ok(out)
}

/// Labels the 26-connected seed components `1..=P` and puts them on the front at `u = 0`.
pub fn init_front(seeds: &[[usize; 3]], grid: Grid) -> Result<FrontState> {
    if seeds.is_empty() {
        return Err(Error::Empty("seed set".into()));
    }
    let components = seed_components(&grid, seeds)?;
    let n = grid.len();
    let p = components.len();
    let mut st = FrontState {
        grid,
        u: vec![f64::INFINITY; n],
        component: vec![0; n],
        tag: vec![Tag::Far; n],
        heap: BinaryHeap::new(),
        root: (0..=p as u32).collect(),
        members: (0..=p as u32).map(|c| vec![c]).collect(),
        components,
        regions: p,
        pops: 0,
        cap: 10 * n,
        stamp: vec![usize::MAX; n],
    };
    for (c, comp) in st.components.iter().enumerate() {
        for &idx in comp {
            st.u[idx] = 0.0;
            st.component[idx] = c as u32 + 1;
            st.tag[idx] = Tag::Front;
            st.heap.push(Reverse(Key { u: 0.0, idx }));
        }
    }
    Ok(st)
}

impl FrontState {
    /// Single-region front with the given distances; `visited` voxels are
    /// final, the rest are Far. Lets oracles probe single updates.
    pub fn from_distances(grid: Grid, u: Vec<f64>, visited: &[bool]) -> Result<Self> {
        let n = grid.len();
        if u.len() != n || visited.len() != n {
            return Err(Error::InvalidVolume(format!("{} values and {} flags for {n} voxels", u.len(), visited.len())));
        }
        let sources: Vec<[usize; 3]> = (0..n).filter(|&i| visited[i] && u[i] == 0.0).map(|i| grid.coords(i)).collect();
        let mut st = init_front(&sources, grid)?;
        st.heap.clear();
        st.root = (0..=st.components.len() as u32).map(|c| c.min(1)).collect();
        st.regions = 1;
        for i in 0..n {
            st.u[i] = if visited[i] { u[i] } else { f64::INFINITY };
            st.tag[i] = if visited[i] { Tag::Visited } else { Tag::Far };
            st.component[i] = u32::from(visited[i]);
        }
        Ok(st)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tag
    }

    /// Number of regions still separate.
    pub fn region_count(&self) -> usize {
        self.regions
    }

    /// Voxels of each initial seed component.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Current region of a voxel, 0 when no front has reached it.
    #[inline]
    pub fn region(&self, idx: usize) -> u32 {
        self.root[self.component[idx] as usize]
    }

    /// Voronoi map: current region per voxel.
    pub fn voronoi(&self) -> Vec<u32> {
        (0..self.u.len()).map(|i| self.region(i)).collect()
    }

    pub fn u_volume(&self) -> ScalarVolume {
        ScalarVolume::new(self.grid, self.u.clone()).expect("grid-sized buffer")
    }

    /// Total heap pops so far, nested passes included.
    pub fn pops(&self) -> usize {
        self.pops
    }

    /// Overrides the pop budget (10× the voxel count by default).
    pub fn set_iteration_cap(&mut self, cap: usize) {
        self.cap = cap;
    }

    fn count_pop(&mut self) -> Result<()> {
        self.pops += 1;
        if self.pops > self.cap {
            let visited = self.tag.iter().filter(|&&t| t == Tag::Visited).count();
            return Err(Error::IterationCap {
                cap: self.cap,
                diagnostic: format!(
                    "{} regions left, {visited}/{} voxels visited, {} queued",
                    self.regions,
                    self.u.len(),
                    self.heap.len()
                ),
            });
        }
        Ok(())
    }

    /// Full anisotropic update of one voxel from the Visited neighbours of its
    /// region (or, for an unreached voxel, of the lowest Visited neighbour's
    /// region); the result never exceeds the current value.
    pub fn afm_update(&self, metric: &MetricField, voxel: [usize; 3]) -> Result<f64> {
        let n = self.grid.index_of(voxel);
        let mut region = self.region(n);
        if region == 0 || self.tag[n] == Tag::Visited {
            let mut best: Option<(f64, usize)> = None;
            for_neighbours(&self.grid, n, |_, y| {
                if self.tag[y] == Tag::Visited && best.is_none_or(|b| (self.u[y], y) < b) {
                    best = Some((self.u[y], y));
                }
            });
            match best {
                Some((_, y)) => region = self.region(y),
                None => return Err(Error::param("voxel", format!("{voxel:?} has no Visited neighbour"))),
            }
        }
        let ok = |y: usize| self.tag[y] == Tag::Visited && self.region(y) == region;
        let v = vertices(&self.grid, n, &self.u, &ok);
        if v.iter().all(Option::is_none) {
            return Err(Error::param("voxel", format!("{voxel:?} has no Visited neighbour in its region")));
        }
        Ok(update_full(metric, n, &v).min(self.u[n]))
    }

    /// Pops Front voxels in `(u, index)` order until one becomes adjacent to a
    /// Visited voxel of another region. When the queue runs dry the whole
    /// domain is scanned for such a pair before reporting convergence.
    pub fn propagate_until_collision(&mut self, metric: &MetricField) -> Result<Propagation> {
        let mut last = f64::NEG_INFINITY;
        while let Some(Reverse(Key { u, idx })) = self.heap.pop() {
            if self.tag[idx] == Tag::Visited || u != self.u[idx] {
                continue;
            }
            self.count_pop()?;
            debug_assert!(u >= last, "front went backwards: {u} after {last}");
            last = u;
            self.tag[idx] = Tag::Visited;
            self.stamp[idx] = self.pops;
            let r = self.region(idx);
            let comp = self.component[idx];
            let grid = self.grid;

            let mut other: Option<(f64, usize)> = None;
            for_neighbours(&grid, idx, |s, n| {
                if self.tag[n] == Tag::Visited {
                    if self.region(n) != r && other.is_none_or(|b| (self.u[n], n) < b) {
                        other = Some((self.u[n], n));
                    }
                    return;
                }
                let ok = |y: usize| self.tag[y] == Tag::Visited && self.region(y) == r;
                let v = vertices(&grid, n, &self.u, &ok);
                // the slot of idx seen from n is the mirror of s
                let cand = update_through(metric, n, 26 - s, &v).max(u);
                if cand < self.u[n] {
                    self.u[n] = cand;
                    self.component[n] = comp;
                    self.tag[n] = Tag::Front;
                    self.heap.push(Reverse(Key { u: cand, idx: n }));
                }
            });
            if let Some((_, n)) = other {
                return Ok(Propagation::Collision(self.collision(idx, n)));
            }
        }
        Ok(match self.scan_collision() {
            Some(c) => Propagation::Collision(c),
            None => Propagation::Converged,
        })
    }

    /// Descent from a Visited voxel to a source of its own region.
    pub fn descend_in_region(&self, start: usize) -> Result<Vec<usize>> {
        let r = self.region(start);
        let ok = |y: usize| self.tag[y] == Tag::Visited && self.region(y) == r;
        descend(&self.grid, &self.u, start, ok, Some(&self.stamp))
    }

    /// Seed component a voxel was reached from.
    pub fn component_of(&self, idx: usize) -> u32 {
        self.component[idx]
    }

    fn collision(&self, a: usize, b: usize) -> Collision {
        Collision {
            voxel_a: self.grid.coords(a),
            voxel_b: self.grid.coords(b),
            region_a: self.region(a),
            region_b: self.region(b),
        }
    }

    fn scan_collision(&self) -> Option<Collision> {
        if self.regions < 2 {
            return None;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..self.u.len() {
            if self.tag[a] != Tag::Visited {
                continue;
            }
            let ra = self.region(a);
            for_neighbours(&self.grid, a, |_, b| {
                if b > a && self.tag[b] == Tag::Visited && self.region(b) != ra {
                    let key = (self.u[a] + self.u[b], a, b);
                    if best.is_none_or(|x| key < x) {
                        best = Some(key);
                    }
                }
            });
        }
        best.map(|(_, a, b)| self.collision(a, b))
    }

    /// Joins regions `a` and `b` along `path`. The path voxels become sources
    /// and a nested front, confined to the Visited voxels of both regions,
    /// runs from them on a separate layer. It stops expanding wherever it
    /// cannot undercut the current distance (the solved part); elsewhere `u`
    /// takes the smaller value. Front voxels next to any lowered voxel are
    /// then re-relaxed on the main layer.
    pub fn merge_regions(&mut self, metric: &MetricField, a: u32, b: u32, path: &Path) -> Result<()> {
        let p = self.components.len() as u32;
        if a == b || a == 0 || b == 0 || a > p || b > p || self.root[a as usize] != a || self.root[b as usize] != b {
            return Err(Error::param("regions", format!("cannot merge regions {a} and {b}")));
        }
        let grid = self.grid;
        let idxs: Vec<usize> = path.voxels.iter().map(|&v| grid.index_of(v)).collect();
        if idxs.is_empty() {
            return Err(Error::param("path", "empty path"));
        }
        let in_pair = |r: u32| r == a || r == b;
        if idxs.iter().any(|&i| self.tag[i] != Tag::Visited || !in_pair(self.region(i))) {
            return Err(Error::param("path", "path voxels must be Visited voxels of the two regions"));
        }
        let (ra, rb) = (self.region(idxs[0]), self.region(*idxs.last().unwrap()));
        if ra == rb {
            return Err(Error::param("path", "path must run from one region to the other"));
        }

        // nested layer
        let mut nu: Vec<f64> = Vec::new();
        nu.resize(self.u.len(), f64::INFINITY);
        let mut ntag = vec![Tag::Far; self.u.len()];
        let mut heap = BinaryHeap::new();
        for &i in &idxs {
            nu[i] = 0.0;
            ntag[i] = Tag::Front;
            heap.push(Reverse(Key { u: 0.0, idx: i }));
        }
        let mut lowered = Vec::new();
        let mut last = f64::NEG_INFINITY;
        while let Some(Reverse(Key { u, idx })) = heap.pop() {
            if ntag[idx] == Tag::Visited || u != nu[idx] {
                continue;
            }
            self.count_pop()?;
            debug_assert!(u >= last);
            last = u;
            if u > 0.0 && u >= self.u[idx] {
                continue;
            }
            ntag[idx] = Tag::Visited;
            if u < self.u[idx] {
                self.u[idx] = u;
                self.stamp[idx] = self.pops;
                lowered.push(idx);
            }
            let (tag, comp, root) = (&self.tag, &self.component, &self.root);
            let inside = |y: usize| tag[y] == Tag::Visited && in_pair(root[comp[y] as usize]);
            for_neighbours(&grid, idx, |s, n| {
                if !inside(n) || ntag[n] == Tag::Visited {
                    return;
                }
                let ok = |y: usize| ntag[y] == Tag::Visited;
                let v = vertices(&grid, n, &nu, &ok);
                let cand = update_through(metric, n, 26 - s, &v).max(u);
                if cand < nu[n] {
                    nu[n] = cand;
                    ntag[n] = Tag::Front;
                    heap.push(Reverse(Key { u: cand, idx: n }));
                }
            });
        }

        let (keep, gone) = (a.min(b), a.max(b));
        let moved = std::mem::take(&mut self.members[gone as usize]);
        for &c in &moved {
            self.root[c as usize] = keep;
        }
        self.members[keep as usize].extend(moved);
        self.regions -= 1;

        // the main front next to lowered voxels sees new vertex values
        for &x in &lowered {
            for_neighbours(&grid, x, |s, n| {
                if self.tag[n] == Tag::Visited {
                    return;
                }
                let ok = |y: usize| self.tag[y] == Tag::Visited && self.root[self.component[y] as usize] == keep;
                let v = vertices(&grid, n, &self.u, &ok);
                let cand = update_through(metric, n, 26 - s, &v);
                if cand < self.u[n] {
                    self.u[n] = cand;
                    self.component[n] = self.component[x];
                    self.tag[n] = Tag::Front;
                    self.heap.push(Reverse(Key { u: cand, idx: n }));
                }
            });
        }
        Ok(())
    }
}

use std::fmt::Write as _;
use std::path::Path as FsPath;

use super::path::Path;
use crate::error::{Error, Result};
use crate::volume::Grid;

pub const GRAPH_HEADER: &str = "# vessel-graph v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub voxel: [usize; 3],
    /// Physical position in mm.
    pub position: [f64; 3],
    /// Source voxels the node stands for (its seed component), if any.
    pub members: Vec<[usize; 3]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub path: Path,
}

/// Graph of geodesics between seed components. Node ids are indices into
/// `nodes`; each edge carries its voxel polyline and `U_π`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicTree {
    pub grid: Grid,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Nodes that stand for initial source components.
    pub roots: Vec<usize>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl GeodesicTree {
    pub fn new(grid: Grid) -> Self {
        GeodesicTree { grid, nodes: Vec::new(), edges: Vec::new(), roots: Vec::new() }
    }

    pub fn add_node(&mut self, voxel: [usize; 3]) -> usize {
        self.nodes.push(Node { voxel, position: self.grid.position(voxel), members: Vec::new() });
        self.nodes.len() - 1
    }

    /// Union-find pass over the edges: a cycle exists iff an edge joins two
    /// nodes that are already connected. Edges to unknown nodes count as cycles.
    pub fn is_acyclic(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        for e in &self.edges {
            if e.a >= self.nodes.len() || e.b >= self.nodes.len() {
                return false;
            }
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            if ra == rb {
                return false;
            }
            parent[ra.max(rb)] = ra.min(rb);
        }
        true
    }

    /// Number of connected components over the nodes.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        for e in &self.edges {
            if e.a < self.nodes.len() && e.b < self.nodes.len() {
                let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        (0..self.nodes.len()).filter(|&i| find(&mut parent, i) == i).count()
    }

    /// Every polyline, node and member voxel, each once, in index order.
    pub fn voxels(&self) -> Vec<[usize; 3]> {
        let mut all: Vec<usize> = self
            .edges
            .iter()
            .flat_map(|e| e.path.voxels.iter().map(|&v| self.grid.index_of(v)))
            .chain(self.nodes.iter().flat_map(|n| std::iter::once(&n.voxel).chain(&n.members)).map(|&v| self.grid.index_of(v)))
            .collect();
        all.sort_unstable();
        all.dedup();
        all.into_iter().map(|i| self.grid.coords(i)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "{GRAPH_HEADER}");
        let _ = writeln!(s, "dims {} {} {}", g.dims[0], g.dims[1], g.dims[2]);
        let _ = writeln!(s, "spacing {} {} {}", g.spacing[0], g.spacing[1], g.spacing[2]);
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let [x, y, z] = n.position;
            let [vi, vj, vk] = n.voxel;
            let _ = write!(s, "node {i} {x} {y} {z} {vi} {vj} {vk} {}", n.members.len());
            for v in &n.members {
                let _ = write!(s, " {} {} {}", v[0], v[1], v[2]);
            }
            s.push('\n');
        }
        let roots: Vec<String> = self.roots.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(s, "roots {}{}{}", self.roots.len(), if roots.is_empty() { "" } else { " " }, roots.join(" "));
        let _ = writeln!(s, "edges {}", self.edges.len());
        for e in &self.edges {
            let _ = write!(s, "edge {} {} {} {}", e.a, e.b, e.path.length_u, e.path.voxels.len());
            for v in &e.path.voxels {
                let _ = write!(s, " {} {} {}", v[0], v[1], v[2]);
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, origin: &FsPath) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::format(origin, format!("line {}: {why}", line + 1));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
            let (no, l) = lines.next().ok_or_else(|| Error::format(origin, format!("missing {what}")))?;
            Ok((no, l.split_whitespace().collect()))
        };
        let (no, head) = next("header")?;
        if head.join(" ") != GRAPH_HEADER {
            return Err(bad(no, "expected the vessel-graph v1 header"));
        }
        fn nums<T: std::str::FromStr>(f: &[&str], no: usize, origin: &FsPath) -> Result<Vec<T>> {
            f.iter()
                .map(|x| x.parse().map_err(|_| Error::format(origin, format!("line {}: bad number `{x}`", no + 1))))
                .collect()
        }
        let keyed = |(no, f): (usize, Vec<&str>), key: &str, n: Option<usize>| -> Result<(usize, Vec<String>)> {
            if f.first() != Some(&key) || n.is_some_and(|n| f.len() != n + 1) {
                return Err(bad(no, &format!("expected `{key}` record")));
            }
            Ok((no, f[1..].iter().map(|s| s.to_string()).collect()))
        };
        fn as_refs(v: &[String]) -> Vec<&str> {
            v.iter().map(String::as_str).collect()
        }

        let (no, f) = keyed(next("dims")?, "dims", Some(3))?;
        let dims: Vec<usize> = nums(&as_refs(&f), no, origin)?;
        let (no, f) = keyed(next("spacing")?, "spacing", Some(3))?;
        let sp: Vec<f64> = nums(&as_refs(&f), no, origin)?;
        let grid = Grid::new([dims[0], dims[1], dims[2]], [sp[0], sp[1], sp[2]])?;
        let (no, f) = keyed(next("nodes")?, "nodes", Some(1))?;
        let n_nodes: usize = nums(&as_refs(&f), no, origin)?[0];
        let mut nodes = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let (no, f) = keyed(next("node")?, "node", None)?;
            if f.len() < 8 {
                return Err(bad(no, "short node record"));
            }
            let id: usize = nums(&as_refs(&f[..1]), no, origin)?[0];
            if id != i {
                return Err(bad(no, "node ids must be consecutive from 0"));
            }
            let pos: Vec<f64> = nums(&as_refs(&f[1..4]), no, origin)?;
            let vox: Vec<usize> = nums(&as_refs(&f[4..7]), no, origin)?;
            let count: usize = nums(&as_refs(&f[7..8]), no, origin)?[0];
            if f.len() != 8 + 3 * count {
                return Err(bad(no, "node record does not match its member count"));
            }
            let flat: Vec<usize> = nums(&as_refs(&f[8..]), no, origin)?;
            let voxel = [vox[0], vox[1], vox[2]];
            let members: Vec<[usize; 3]> = flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            if std::iter::once(&voxel).chain(&members).any(|v| !grid.contains(v.map(|x| x as i64))) {
                return Err(bad(no, "node voxel outside the grid"));
            }
            nodes.push(Node { voxel, position: [pos[0], pos[1], pos[2]], members });
        }
        let (no, f) = keyed(next("roots")?, "roots", None)?;
        let r: Vec<usize> = nums(&as_refs(&f), no, origin)?;
        if r.is_empty() || r[0] != r.len() - 1 || r[1..].iter().any(|&x| x >= n_nodes) {
            return Err(bad(no, "bad roots record"));
        }
        let roots = r[1..].to_vec();
        let (no, f) = keyed(next("edges")?, "edges", Some(1))?;
        let n_edges: usize = nums(&as_refs(&f), no, origin)?[0];
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let (no, f) = keyed(next("edge")?, "edge", None)?;
            if f.len() < 4 {
                return Err(bad(no, "short edge record"));
            }
            let ab: Vec<usize> = nums(&as_refs(&f[..2]), no, origin)?;
            let length_u: f64 = nums(&as_refs(&f[2..3]), no, origin)?[0];
            let count: usize = nums(&as_refs(&f[3..4]), no, origin)?[0];
            if f.len() != 4 + 3 * count || ab.iter().any(|&x| x >= n_nodes) {
                return Err(bad(no, "edge record does not match its voxel count or nodes"));
            }
            let flat: Vec<usize> = nums(&as_refs(&f[4..]), no, origin)?;
            let voxels: Vec<[usize; 3]> = flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            if voxels.iter().any(|v| !grid.contains(v.map(|x| x as i64))) {
                return Err(bad(no, "edge voxel outside the grid"));
            }
            edges.push(Edge { a: ab[0], b: ab[1], path: Path { voxels, length_u } });
        }
        if let Some((no, _)) = lines.next() {
            return Err(bad(no, "trailing content"));
        }
        Ok(GeodesicTree { grid, nodes, edges, roots })
    }

    pub fn write(&self, path: &FsPath) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

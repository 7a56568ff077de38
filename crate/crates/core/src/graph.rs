//! Discrete half-plane lattice truncations, conductance assignment and the
//! quotient graphs that identify boundary intervals into single vertices.
//!
//! The rescaled half-plane at scale `n` lives on lattice points `(i, j)`,
//! `j >= 0`, which represent the scaled coordinates `(i/n, j/n)`. Every
//! lattice edge carries conductance `n/2`, so the cable length of an edge is
//! `r = 1/(2C) = 1/n`. A truncation keeps the box `[-W, W] x [0, H]` in
//! lattice units; the bottom row `j = 0` and the frame of the box form the
//! absorbing (killed) set, so the interior walk is the simple random walk
//! killed on the boundary.
//!
//! Interior vertices are stored in a dense row-major index (rows `j = 1..H-1`
//! inner-indexed by `i`), so solvers and samplers address plain vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice point. `j >= 0`; boundary vertices of the half plane have `j = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vertex {
    pub i: i32,
    pub j: i32,
}

impl Vertex {
    pub fn new(i: i32, j: i32) -> Vertex {
        Vertex { i, j }
    }

    /// Position in scaled units (lattice spacing `1/n`).
    pub fn scaled(&self, n: u32) -> [f64; 2] {
        [self.i as f64 / n as f64, self.j as f64 / n as f64]
    }
}

/// An undirected edge between two interior vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub cond: f64,
}

/// A neighbour of an interior vertex, either interior or killed.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor {
    pub vertex: Vertex,
    /// Interior index, or `None` when the neighbour is killed.
    pub interior: Option<u32>,
    pub cond: f64,
}

#[derive(Debug, Clone)]
enum Storage {
    /// Uniform-conductance truncation of the half plane; adjacency implicit.
    Grid,
    /// Explicit adjacency, used for quotient graphs and hand-built graphs.
    Sparse(SparseStorage),
}

#[derive(Debug, Clone)]
struct SparseStorage {
    coords: Vec<Vertex>,
    /// CSR over interior-interior edges.
    adj_ptr: Vec<u32>,
    adj: Vec<(u32, f64)>,
    /// CSR over killed neighbours.
    bnd_ptr: Vec<u32>,
    bnd: Vec<(Vertex, f64)>,
    lambda: Vec<f64>,
}

/// Finite weighted graph with conductances and an absorbing boundary.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    n: u32,
    w: i32,
    h: i32,
    cond: f64,
    icols: usize,
    irows: usize,
    storage: Storage,
    quotient: Option<QuotientInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuotientInfo {
    pub a: f64,
    pub q: f64,
}

/// Cable length of an edge with conductance `c`: `r = 1/(2c)`.
pub fn edge_length(cond: f64) -> f64 {
    1.0 / (2.0 * cond)
}

/// Build the truncated half-plane lattice at scale `n` on the box
/// `[-w, w] x [0, h]` (lattice units). All conductances equal `n/2`; the
/// killed set is the bottom row plus the truncation frame.
pub fn build_half_plane(n: u32, w: i32, h: i32) -> Result<WeightedGraph> {
    if n < 1 {
        return Err(Error::invalid("n", "scale must be >= 1"));
    }
    if w < 1 || h < 1 {
        return Err(Error::invalid("box", "width and height must be >= 1"));
    }
    let icols = (2 * w - 1) as usize;
    let irows = (h - 1) as usize;
    Ok(WeightedGraph {
        n,
        w,
        h,
        cond: n as f64 / 2.0,
        icols,
        irows,
        storage: Storage::Grid,
        quotient: None,
    })
}

/// Build a truncation whose box is given in scaled units.
pub fn build_half_plane_scaled(n: u32, half_width: f64, height: f64) -> Result<WeightedGraph> {
    let w = (half_width * n as f64).ceil() as i32;
    let h = (height * n as f64).ceil() as i32;
    build_half_plane(n, w, h)
}

/// Default truncation for experiments on the intervals `[-a, 0]` and `[1, q]`:
/// half-width `12 q`, height `8 q` in scaled units.
pub fn experiment_box(q: f64) -> (f64, f64) {
    (12.0 * q, 8.0 * q)
}

impl WeightedGraph {
    /// Hand-built graph for tests and small experiments. `coords[v]` gives
    /// the lattice position of interior vertex `v`; `edges` are
    /// interior-interior conductances; `killing` lists `(vertex, killed
    /// neighbour position, conductance)` absorbing attachments.
    pub fn from_parts(
        n: u32,
        coords: Vec<Vertex>,
        edges: &[(u32, u32, f64)],
        killing: &[(u32, Vertex, f64)],
    ) -> Result<WeightedGraph> {
        let len = coords.len();
        for &(a, b, c) in edges {
            if a as usize >= len || b as usize >= len || a == b {
                return Err(Error::invalid("edges", format!("bad edge ({a},{b})")));
            }
            if c <= 0.0 {
                return Err(Error::invalid("edges", "conductance must be positive"));
            }
        }
        let mut adj_lists: Vec<Vec<(u32, f64)>> = vec![Vec::new(); len];
        for &(a, b, c) in edges {
            adj_lists[a as usize].push((b, c));
            adj_lists[b as usize].push((a, c));
        }
        let mut bnd_lists: Vec<Vec<(Vertex, f64)>> = vec![Vec::new(); len];
        for &(v, pos, c) in killing {
            if v as usize >= len {
                return Err(Error::invalid("killing", format!("bad vertex {v}")));
            }
            if c <= 0.0 {
                return Err(Error::invalid("killing", "conductance must be positive"));
            }
            bnd_lists[v as usize].push((pos, c));
        }
        let storage = SparseStorage::assemble(coords, adj_lists, bnd_lists);
        let (w, h) = storage.bounding_box();
        Ok(WeightedGraph {
            n,
            w,
            h,
            cond: 0.0,
            icols: 0,
            irows: 0,
            storage: Storage::Sparse(storage),
            quotient: None,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// truncation half-width in lattice units
    pub fn box_w(&self) -> i32 {
        self.w
    }

    /// truncation height in lattice units
    pub fn box_h(&self) -> i32 {
        self.h
    }

    pub fn quotient_info(&self) -> Option<&QuotientInfo> {
        self.quotient.as_ref()
    }

    /// Uniform edge conductance for grid truncations.
    pub fn grid_conductance(&self) -> Option<f64> {
        match self.storage {
            Storage::Grid => Some(self.cond),
            Storage::Sparse(_) => None,
        }
    }

    /// Interior grid dimensions `(columns, rows)` for grid truncations.
    pub fn grid_dims(&self) -> Option<(usize, usize)> {
        match self.storage {
            Storage::Grid => Some((self.icols, self.irows)),
            Storage::Sparse(_) => None,
        }
    }

    pub fn interior_len(&self) -> usize {
        match &self.storage {
            Storage::Grid => self.icols * self.irows,
            Storage::Sparse(s) => s.coords.len(),
        }
    }

    pub fn vertex(&self, idx: usize) -> Vertex {
        match &self.storage {
            Storage::Grid => {
                let row = idx / self.icols;
                let col = idx % self.icols;
                Vertex::new(col as i32 - (self.w - 1), row as i32 + 1)
            }
            Storage::Sparse(s) => s.coords[idx],
        }
    }

    /// Interior index of the lattice point `(i, j)`, when it is interior.
    pub fn index_of(&self, i: i32, j: i32) -> Option<usize> {
        match &self.storage {
            Storage::Grid => {
                if i > -self.w && i < self.w && j > 0 && j < self.h {
                    Some((j as usize - 1) * self.icols + (i + self.w - 1) as usize)
                } else {
                    None
                }
            }
            Storage::Sparse(s) => s.coords.iter().position(|v| v.i == i && v.j == j),
        }
    }

    pub fn in_box(&self, i: i32, j: i32) -> bool {
        i >= -self.w && i <= self.w && j >= 0 && j <= self.h
    }

    pub fn is_killed(&self, i: i32, j: i32) -> bool {
        match &self.storage {
            Storage::Grid => self.in_box(i, j) && self.index_of(i, j).is_none(),
            Storage::Sparse(_) => self.in_box(i, j) && self.index_of(i, j).is_none(),
        }
    }

    /// Total conductance emanating from interior vertex `idx`.
    pub fn lambda(&self, idx: usize) -> f64 {
        match &self.storage {
            Storage::Grid => 4.0 * self.cond,
            Storage::Sparse(s) => s.lambda[idx],
        }
    }

    /// Visit all neighbours (interior and killed) of interior vertex `idx`.
    pub fn for_neighbors<F: FnMut(Neighbor)>(&self, idx: usize, mut f: F) {
        match &self.storage {
            Storage::Grid => {
                let v = self.vertex(idx);
                for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (i, j) = (v.i + di, v.j + dj);
                    f(Neighbor {
                        vertex: Vertex::new(i, j),
                        interior: self.index_of(i, j).map(|k| k as u32),
                        cond: self.cond,
                    });
                }
            }
            Storage::Sparse(s) => {
                let (lo, hi) = (s.adj_ptr[idx] as usize, s.adj_ptr[idx + 1] as usize);
                for &(nb, c) in &s.adj[lo..hi] {
                    f(Neighbor {
                        vertex: s.coords[nb as usize],
                        interior: Some(nb),
                        cond: c,
                    });
                }
                let (lo, hi) = (s.bnd_ptr[idx] as usize, s.bnd_ptr[idx + 1] as usize);
                for &(pos, c) in &s.bnd[lo..hi] {
                    f(Neighbor {
                        vertex: pos,
                        interior: None,
                        cond: c,
                    });
                }
            }
        }
    }

    /// All interior-interior edges, each listed once.
    pub fn interior_edges(&self) -> Vec<Edge> {
        let mut edges = Vec::new();
        for idx in 0..self.interior_len() {
            self.for_neighbors(idx, |nb| {
                if let Some(other) = nb.interior {
                    if (other as usize) > idx {
                        edges.push(Edge {
                            a: idx as u32,
                            b: other,
                            cond: nb.cond,
                        });
                    }
                }
            });
        }
        edges
    }

    /// All killed vertices of the truncation (bottom row plus frame), or the
    /// killed attachment points of a hand-built graph.
    pub fn killed_vertices(&self) -> Vec<Vertex> {
        match &self.storage {
            Storage::Grid => {
                let mut killed = Vec::new();
                for i in -self.w..=self.w {
                    killed.push(Vertex::new(i, 0));
                    killed.push(Vertex::new(i, self.h));
                }
                for j in 1..self.h {
                    killed.push(Vertex::new(-self.w, j));
                    killed.push(Vertex::new(self.w, j));
                }
                killed
            }
            Storage::Sparse(s) => {
                let mut killed: Vec<Vertex> = s.bnd.iter().map(|&(v, _)| v).collect();
                killed.sort_by_key(|v| (v.j, v.i));
                killed.dedup();
                killed
            }
        }
    }

    /// Cheap structural fingerprint used to reject mixing samples from
    /// different graphs.
    pub fn fingerprint(&self) -> u64 {
        let kind = match self.storage {
            Storage::Grid => 1u64,
            Storage::Sparse(_) => 2u64,
        };
        let mut x = 0xcbf29ce484222325u64;
        for piece in [
            kind,
            self.n as u64,
            self.w as u64,
            self.h as u64,
            self.interior_len() as u64,
            self.cond.to_bits(),
        ] {
            x ^= piece;
            x = x.wrapping_mul(0x100000001b3);
        }
        x
    }

    /// Serializable descriptor `{n, W, H, killed, quotient}`.
    pub fn descriptor(&self) -> GraphDescriptor {
        GraphDescriptor {
            n: self.n,
            w: self.w,
            h: self.h,
            killed: self.killed_vertices().iter().map(|v| (v.i, v.j)).collect(),
            quotient: self.quotient.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.descriptor())?)
    }
}

/// JSON document describing a half-plane truncation and optional quotient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDescriptor {
    pub n: u32,
    #[serde(rename = "W")]
    pub w: i32,
    #[serde(rename = "H")]
    pub h: i32,
    pub killed: Vec<(i32, i32)>,
    pub quotient: Option<QuotientInfo>,
}

impl GraphDescriptor {
    pub fn from_json(text: &str) -> Result<GraphDescriptor> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuild the graph (and quotient when present) from the descriptor.
    pub fn build(&self) -> Result<(WeightedGraph, Option<QuotientGraph>)> {
        let g = build_half_plane(self.n, self.w, self.h)?;
        match &self.quotient {
            Some(info) => {
                let qg = build_quotient(g.clone(), info.a, info.q)?;
                Ok((g, Some(qg)))
            }
            None => Ok((g, None)),
        }
    }
}

impl SparseStorage {
    fn assemble(
        coords: Vec<Vertex>,
        adj_lists: Vec<Vec<(u32, f64)>>,
        bnd_lists: Vec<Vec<(Vertex, f64)>>,
    ) -> SparseStorage {
        let len = coords.len();
        let mut adj_ptr = Vec::with_capacity(len + 1);
        let mut adj = Vec::new();
        let mut bnd_ptr = Vec::with_capacity(len + 1);
        let mut bnd = Vec::new();
        let mut lambda = vec![0.0; len];
        adj_ptr.push(0);
        bnd_ptr.push(0);
        for v in 0..len {
            for &(nb, c) in &adj_lists[v] {
                adj.push((nb, c));
                lambda[v] += c;
            }
            for &(pos, c) in &bnd_lists[v] {
                bnd.push((pos, c));
                lambda[v] += c;
            }
            adj_ptr.push(adj.len() as u32);
            bnd_ptr.push(bnd.len() as u32);
        }
        SparseStorage {
            coords,
            adj_ptr,
            adj,
            bnd_ptr,
            bnd,
            lambda,
        }
    }

    fn bounding_box(&self) -> (i32, i32) {
        let mut w = 1;
        let mut h = 1;
        for v in self
            .coords
            .iter()
            .chain(self.bnd.iter().map(|(v, _)| v))
        {
            w = w.max(v.i.abs());
            h = h.max(v.j);
        }
        (w, h)
    }
}

/// Lattice columns of a scaled boundary interval `[lo, hi]`.
pub fn interval_columns(n: u32, lo: f64, hi: f64) -> Vec<i32> {
    let from = (lo * n as f64).ceil() as i32;
    let to = (hi * n as f64).floor() as i32;
    (from..=to).collect()
}

/// A half-plane truncation with the boundary intervals `[-a, 0]` and `[1, q]`
/// identified into the single vertices left-pole and right-pole. The merged
/// vertices are interior (not killed); all other boundary vertices stay
/// killed. Parallel edges onto a pole accumulate conductance.
#[derive(Debug, Clone)]
pub struct QuotientGraph {
    base: WeightedGraph,
    a: f64,
    q: f64,
    left_cols: Vec<i32>,
    right_cols: Vec<i32>,
}

/// Merge the boundary intervals `[-a, 0]` and `[1, q]` (scaled units) of a
/// grid truncation into two quotient vertices.
pub fn build_quotient(base: WeightedGraph, a: f64, q: f64) -> Result<QuotientGraph> {
    if base.grid_conductance().is_none() {
        return Err(Error::invalid("base", "quotient needs a grid truncation"));
    }
    if a < 0.0 {
        return Err(Error::invalid("a", "left interval length must be >= 0"));
    }
    if q <= 1.0 {
        return Err(Error::invalid("q", "right endpoint must exceed 1"));
    }
    let n = base.n();
    let left_cols = interval_columns(n, -a, 0.0);
    let right_cols = interval_columns(n, 1.0, q);
    if right_cols.is_empty() {
        return Err(Error::invalid("q", "right interval holds no lattice site"));
    }
    let w = base.box_w();
    for &i in left_cols.iter().chain(right_cols.iter()) {
        // Pole sites must have an interior vertex above them, so the frame
        // columns are excluded.
        if i <= -w || i >= w {
            return Err(Error::invalid(
                "interval",
                format!("boundary site i={i} leaves the truncation interior"),
            ));
        }
    }
    if base.interior_len() == 0 {
        return Err(Error::invalid("base", "truncation has no interior"));
    }
    Ok(QuotientGraph {
        base,
        a,
        q,
        left_cols,
        right_cols,
    })
}

impl QuotientGraph {
    pub fn base(&self) -> &WeightedGraph {
        &self.base
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Boundary columns absorbed into the left pole.
    pub fn left_columns(&self) -> &[i32] {
        &self.left_cols
    }

    /// Boundary columns absorbed into the right pole.
    pub fn right_columns(&self) -> &[i32] {
        &self.right_cols
    }

    /// Explicit merged graph: grid interior vertices keep their indices and
    /// the poles are appended as the last two vertices (left then right).
    pub fn merged(&self) -> Result<WeightedGraph> {
        let base = &self.base;
        let len = base.interior_len();
        if len > 2_000_000 {
            return Err(Error::TooLarge(format!(
                "merged quotient graph with {len} interior vertices"
            )));
        }
        let cond = base.grid_conductance().expect("grid base");
        let left_idx = len as u32;
        let right_idx = len as u32 + 1;
        let mut coords: Vec<Vertex> = (0..len).map(|v| base.vertex(v)).collect();
        coords.push(Vertex::new(self.left_cols[0], 0));
        coords.push(Vertex::new(self.right_cols[0], 0));
        let mut adj_lists: Vec<Vec<(u32, f64)>> = vec![Vec::new(); len + 2];
        let mut bnd_lists: Vec<Vec<(Vertex, f64)>> = vec![Vec::new(); len + 2];
        let pole_of = |v: Vertex| -> Option<u32> {
            if v.j != 0 {
                return None;
            }
            if self.left_cols.contains(&v.i) {
                Some(left_idx)
            } else if self.right_cols.contains(&v.i) {
                Some(right_idx)
            } else {
                None
            }
        };
        for v in 0..len {
            base.for_neighbors(v, |nb| match nb.interior {
                Some(other) => {
                    if (other as usize) > v {
                        adj_lists[v].push((other, nb.cond));
                        adj_lists[other as usize].push((v as u32, nb.cond));
                    }
                }
                None => match pole_of(nb.vertex) {
                    Some(pole) => {
                        adj_lists[v].push((pole, nb.cond));
                        adj_lists[pole as usize].push((v as u32, nb.cond));
                    }
                    None => bnd_lists[v].push((nb.vertex, nb.cond)),
                },
            });
        }
        // Pole sites on the bottom row keep no killed attachment: their only
        // lattice edges go up into the interior (bottom horizontal edges are
        // part of the killed boundary and never conduct). Accumulate parallel
        // edges per pole.
        for lists in adj_lists.iter_mut() {
            lists.sort_by_key(|&(v, _)| v);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(lists.len());
            for &(v, c) in lists.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == v => last.1 += c,
                    _ => merged.push((v, c)),
                }
            }
            *lists = merged;
        }
        let storage = SparseStorage::assemble(coords, adj_lists, bnd_lists);
        Ok(WeightedGraph {
            n: base.n(),
            w: base.box_w(),
            h: base.box_h(),
            cond,
            icols: 0,
            irows: 0,
            storage: Storage::Sparse(storage),
            quotient: Some(QuotientInfo {
                a: self.a,
                q: self.q,
            }),
        })
    }
}

//! Outer-contour extraction on the half-step dual grid, and the
//! bottleneck-matching distance between collections of compact sets.
//!
//! Occupied configurations are rasterized onto the grid of spacing
//! `1/(2n)`: every visited vertex fills the cell at its position and every
//! open or traversed edge fills the cell at its midpoint. The vacant cells
//! reachable from the truncation frame form the unbounded vacant region
//! (vacancy connects across diagonals); an element is outermost when its
//! cells border that region, and its contour is the outer boundary cycle of
//! its cell union, traced through edge midpoints with saddle corners cut so
//! that contours of distinct elements never meet.

use std::collections::HashMap;

use crate::cluster::{build_clusters, ClusterSource, Element};
use crate::error::{Error, Result};
use crate::excursion::ExcursionProcess;
use crate::graph::WeightedGraph;

/// Closed boundary polyline of one outermost cluster, in scaled
/// coordinates, with the vertex set it encloses.
#[derive(Debug, Clone)]
pub struct Contour {
    pub polyline: Vec<[f64; 2]>,
    pub enclosed_vertices: Vec<u32>,
    pub censored: bool,
}

impl Contour {
    /// Ray-casting point-in-polygon test.
    pub fn contains(&self, z: [f64; 2]) -> bool {
        point_in_polygon(&self.polyline, z)
    }

    /// Signed area (positive: counterclockwise).
    pub fn area(&self) -> f64 {
        shoelace(&self.polyline)
    }
}

/// Contours of the outermost clusters: pairwise disjoint and non-nested.
/// Clusters touching the side or top truncation ring are censored and kept
/// apart from the statistics.
#[derive(Debug, Clone)]
pub struct ContourFamily {
    pub contours: Vec<Contour>,
    pub censored: Vec<Contour>,
    pub generator: String,
}

impl ContourFamily {
    pub fn censor_rate(&self) -> f64 {
        let total = self.contours.len() + self.censored.len();
        if total == 0 {
            0.0
        } else {
            self.censored.len() as f64 / total as f64
        }
    }
}

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let mut acc = 0.0;
    for w in poly.windows(2) {
        acc += w[0][0] * w[1][1] - w[1][0] * w[0][1];
    }
    0.5 * acc
}

fn point_in_polygon(poly: &[[f64; 2]], z: [f64; 2]) -> bool {
    let mut inside = false;
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a[1] > z[1]) != (b[1] > z[1]) {
            let t = (z[1] - a[1]) / (b[1] - a[1]);
            let x = a[0] + t * (b[0] - a[0]);
            if x > z[0] {
                inside = !inside;
            }
        }
    }
    inside
}

struct CellGrid {
    nx: i64,
    ny: i64,
    owner: Vec<u32>,
}

const VACANT: u32 = u32::MAX;

impl CellGrid {
    fn idx(&self, x: i64, y: i64) -> usize {
        (y * self.nx + x) as usize
    }

    fn owner_at(&self, x: i64, y: i64) -> u32 {
        if x < 0 || y < 0 || x >= self.nx || y >= self.ny {
            VACANT
        } else {
            self.owner[self.idx(x, y)]
        }
    }
}

/// Extract the contours of the outermost clusters of a configuration.
pub fn outer_contours(
    g: &WeightedGraph,
    source: ClusterSource,
    excursions: &[&ExcursionProcess],
) -> Result<ContourFamily> {
    let w = g.box_w() as i64;
    let h = g.box_h() as i64;
    let nx = 4 * w + 1;
    let ny = 2 * h + 1;
    if nx * ny > 100_000_000 {
        return Err(Error::TooLarge("cell grid beyond 1e8 cells".into()));
    }
    let generator = match &source {
        ClusterSource::Soup(_) => "loop-soup",
        ClusterSource::Field { .. } => "gff-sign-clusters",
    }
    .to_string();

    let mut part = build_clusters(g, source_ref(&source), excursions)?;
    let mut grid = CellGrid {
        nx,
        ny,
        owner: vec![VACANT; (nx * ny) as usize],
    };
    let cell_of_vertex = |v: usize| -> (i64, i64) {
        let p = g.vertex(v);
        (2 * (p.i as i64 + w), 2 * p.j as i64)
    };
    // paint cells by chain root and record per-root vertex sets
    let mut roots: HashMap<u32, ElementCells> = HashMap::new();
    let paint = |grid: &mut CellGrid,
                     roots: &mut HashMap<u32, ElementCells>,
                     root: u32,
                     x: i64,
                     y: i64| {
        let i = grid.idx(x, y);
        grid.owner[i] = root;
        let e = roots.entry(root).or_default();
        e.cells.push((x, y));
    };
    match &source {
        ClusterSource::Soup(s) => {
            for (l, lp) in s.loops.iter().enumerate() {
                let root = part.cluster_of(Element::Loop(l)) as u32;
                for step in lp.path.windows(2) {
                    let (ax, ay) = cell_of_vertex(step[0] as usize);
                    let (bx, by) = cell_of_vertex(step[1] as usize);
                    paint(&mut grid, &mut roots, root, ax, ay);
                    paint(&mut grid, &mut roots, root, (ax + bx) / 2, (ay + by) / 2);
                }
                for &v in &lp.visited() {
                    roots.entry(root).or_default().vertices.push(v);
                }
            }
        }
        ClusterSource::Field { edges, open, .. } => {
            for v in 0..g.interior_len() {
                let root = part.cluster_of(Element::Vertex(v)) as u32;
                let (x, y) = cell_of_vertex(v);
                paint(&mut grid, &mut roots, root, x, y);
                roots.entry(root).or_default().vertices.push(v as u32);
            }
            for (e, &is_open) in edges.iter().zip(open.iter()) {
                if is_open {
                    let root = part.cluster_of(Element::Vertex(e.a as usize)) as u32;
                    let (ax, ay) = cell_of_vertex(e.a as usize);
                    let (bx, by) = cell_of_vertex(e.b as usize);
                    paint(&mut grid, &mut roots, root, (ax + bx) / 2, (ay + by) / 2);
                }
            }
        }
    }
    for (pi, p) in excursions.iter().enumerate() {
        for (ei, e) in p.excursions.iter().enumerate() {
            let root = part.cluster_of(Element::Excursion(pi, ei)) as u32;
            for &v in &e.path {
                let (x, y) = cell_of_vertex(v as usize);
                paint(&mut grid, &mut roots, root, x, y);
                roots.entry(root).or_default().vertices.push(v);
            }
            for step in e.path.windows(2) {
                let (ax, ay) = cell_of_vertex(step[0] as usize);
                let (bx, by) = cell_of_vertex(step[1] as usize);
                paint(&mut grid, &mut roots, root, (ax + bx) / 2, (ay + by) / 2);
            }
            // boundary stubs occupy the half-cells below the first and last
            // interior vertices
            let (fx, fy) = cell_of_vertex(e.path[0] as usize);
            paint(&mut grid, &mut roots, root, fx, fy - 1);
            let (lx, ly) = cell_of_vertex(e.path[e.path.len() - 1] as usize);
            paint(&mut grid, &mut roots, root, lx, ly - 1);
        }
    }

    // flood the vacancy reachable from the frame (8-connected)
    let mut unbounded = vec![false; (nx * ny) as usize];
    let mut stack: Vec<(i64, i64)> = Vec::new();
    for x in 0..nx {
        for y in [0, ny - 1] {
            if grid.owner_at(x, y) == VACANT {
                stack.push((x, y));
            }
        }
    }
    for y in 0..ny {
        for x in [0, nx - 1] {
            if grid.owner_at(x, y) == VACANT {
                stack.push((x, y));
            }
        }
    }
    while let Some((x, y)) = stack.pop() {
        let i = grid.idx(x, y);
        if unbounded[i] {
            continue;
        }
        unbounded[i] = true;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (xx, yy) = (x + dx, y + dy);
                if xx >= 0
                    && yy >= 0
                    && xx < nx
                    && yy < ny
                    && grid.owner_at(xx, yy) == VACANT
                    && !unbounded[grid.idx(xx, yy)]
                {
                    stack.push((xx, yy));
                }
            }
        }
    }
    let touches_unbounded = |x: i64, y: i64| -> bool {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (xx, yy) = (x + dx, y + dy);
                if xx < 0 || yy < 0 || xx >= nx || yy >= ny {
                    return true;
                }
                if grid.owner_at(xx, yy) == VACANT && unbounded[grid.idx(xx, yy)] {
                    return true;
                }
            }
        }
        false
    };

    let n = g.n();
    let scale = |p: (i64, i64)| -> [f64; 2] {
        [
            (p.0 - 4 * w) as f64 / (4.0 * n as f64),
            p.1 as f64 / (4.0 * n as f64),
        ]
    };
    let mut contours = Vec::new();
    let mut censored = Vec::new();
    let mut ordered: Vec<(u32, ElementCells)> = roots.into_iter().collect();
    ordered.sort_by_key(|(r, _)| *r);
    for (root, mut info) in ordered {
        let outermost = info.cells.iter().any(|&(x, y)| touches_unbounded(x, y));
        if !outermost {
            continue;
        }
        let poly_cells = trace_outer_boundary(&grid, root, &info.cells);
        info.vertices.sort_unstable();
        info.vertices.dedup();
        let is_censored = info.vertices.iter().any(|&v| {
            let p = g.vertex(v as usize);
            p.i as i64 == -(w - 1) || p.i as i64 == w - 1 || p.j as i64 == h - 1
        });
        let contour = Contour {
            polyline: poly_cells.into_iter().map(scale).collect(),
            enclosed_vertices: info.vertices,
            censored: is_censored,
        };
        if is_censored {
            censored.push(contour);
        } else {
            contours.push(contour);
        }
    }
    Ok(ContourFamily {
        contours,
        censored,
        generator,
    })
}

fn source_ref<'a>(s: &ClusterSource<'a>) -> ClusterSource<'a> {
    match s {
        ClusterSource::Soup(x) => ClusterSource::Soup(x),
        ClusterSource::Field {
            partition,
            edges,
            open,
        } => ClusterSource::Field {
            partition,
            edges,
            open,
        },
    }
}

#[derive(Default)]
struct ElementCells {
    cells: Vec<(i64, i64)>,
    vertices: Vec<u32>,
}

/// Marching squares over one element's cells, saddles separated, inside on
/// the left; returns the cycle of maximal signed area in doubled cell
/// coordinates (half-integer points stored as doubled integers).
fn trace_outer_boundary(grid: &CellGrid, root: u32, cells: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for &(x, y) in cells {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let inside = |x: i64, y: i64| -> bool { grid.owner_at(x, y) == root };
    // directed segments through cell-edge midpoints; midpoints in doubled
    // coordinates so everything stays integer
    let mut seg: HashMap<(i64, i64), (i64, i64)> = HashMap::new();
    for cy in y0..=(y1 + 1) {
        for cx in x0..=(x1 + 1) {
            let sw = inside(cx - 1, cy - 1);
            let se = inside(cx, cy - 1);
            let nw = inside(cx - 1, cy);
            let ne = inside(cx, cy);
            let code = (sw as u8) | (se as u8) << 1 | (nw as u8) << 2 | (ne as u8) << 3;
            let s = (2 * cx - 1, 2 * cy - 2);
            let n = (2 * cx - 1, 2 * cy);
            let wm = (2 * cx - 2, 2 * cy - 1);
            let em = (2 * cx, 2 * cy - 1);
            let mut put = |from: (i64, i64), to: (i64, i64)| {
                seg.insert(from, to);
            };
            match code {
                0 | 15 => {}
                1 => put(s, wm),
                2 => put(em, s),
                3 => put(em, wm),
                4 => put(wm, n),
                5 => put(s, n),
                6 => {
                    put(em, s);
                    put(wm, n);
                }
                7 => put(em, n),
                8 => put(n, em),
                9 => {
                    put(s, wm);
                    put(n, em);
                }
                10 => put(n, s),
                11 => put(n, wm),
                12 => put(wm, em),
                13 => put(s, em),
                14 => put(wm, s),
                _ => unreachable!(),
            }
        }
    }
    // stitch directed segments into cycles; keep the one with maximal area
    let mut best: Vec<(i64, i64)> = Vec::new();
    let mut best_area = f64::MIN;
    let mut visited: std::collections::HashSet<(i64, i64)> = std::collections::HashSet::new();
    let starts: Vec<(i64, i64)> = seg.keys().copied().collect();
    for start in starts {
        if visited.contains(&start) {
            continue;
        }
        let mut cycle = vec![start];
        let mut cur = start;
        loop {
            visited.insert(cur);
            let next = seg[&cur];
            cycle.push(next);
            if next == start {
                break;
            }
            cur = next;
        }
        let area = shoelace(
            &cycle
                .iter()
                .map(|&(x, y)| [x as f64, y as f64])
                .collect::<Vec<_>>(),
        );
        if area > best_area {
            best_area = area;
            best = cycle;
        }
    }
    best
}

/// Contour of the family that contains or surrounds `z`, when one exists.
/// By non-nesting at most one can match.
pub fn contour_containing<'a>(f: &'a ContourFamily, z: [f64; 2]) -> Option<&'a Contour> {
    f.contours.iter().find(|c| c.contains(z))
}

/// Hausdorff distance between finite point sets.
pub fn hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one_sided = |xs: &[[f64; 2]], ys: &[[f64; 2]]| -> f64 {
        xs.iter()
            .map(|x| {
                ys.iter()
                    .map(|y| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Distance between finite collections of compact sets: infinite when the
/// cardinalities differ, otherwise the bottleneck assignment of pairwise
/// Hausdorff distances (the minimum over bijections of the maximal matched
/// distance, found by threshold search with bipartite matching).
pub fn collection_distance(a: &[Vec<[f64; 2]>], b: &[Vec<[f64; 2]>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let k = a.len();
    if k == 0 {
        return 0.0;
    }
    let mut costs = vec![vec![0.0f64; k]; k];
    let mut values = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            costs[i][j] = hausdorff(&a[i], &b[j]);
            values.push(costs[i][j]);
        }
    }
    values.sort_by(|x, y| x.partial_cmp(y).unwrap());
    values.dedup();
    let feasible = |limit: f64| -> bool {
        // Kuhn's augmenting-path matching on edges with cost <= limit
        let mut match_b = vec![usize::MAX; k];
        fn augment(
            i: usize,
            k: usize,
            limit: f64,
            costs: &[Vec<f64>],
            seen: &mut [bool],
            match_b: &mut [usize],
        ) -> bool {
            for j in 0..k {
                if costs[i][j] <= limit && !seen[j] {
                    seen[j] = true;
                    if match_b[j] == usize::MAX
                        || augment(match_b[j], k, limit, costs, seen, match_b)
                    {
                        match_b[j] = i;
                        return true;
                    }
                }
            }
            false
        }
        for i in 0..k {
            let mut seen = vec![false; k];
            if !augment(i, k, limit, &costs, &mut seen, &mut match_b) {
                return false;
            }
        }
        true
    };
    let mut lo = 0;
    let mut hi = values.len() - 1;
    if !feasible(values[hi]) {
        return f64::INFINITY;
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(values[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    values[lo]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_half_plane;
    use crate::loopsoup::{LoopSoupSample, RootedLoop};

    fn loop_at(g: &WeightedGraph, sites: &[(i32, i32)]) -> RootedLoop {
        let mut path: Vec<u32> = sites
            .iter()
            .map(|&(i, j)| g.index_of(i, j).unwrap() as u32)
            .collect();
        path.push(path[0]);
        RootedLoop { path }
    }

    #[test]
    fn single_face_loop_contour() {
        let n = 1;
        let g = build_half_plane(n, 6, 6).unwrap();
        let lp = loop_at(&g, &[(0, 2), (1, 2), (1, 3), (0, 3)]);
        let soup = LoopSoupSample::synthetic(&g, vec![lp], 0.5, 8);
        let fam = outer_contours(&g, ClusterSource::Soup(&soup), &[]).unwrap();
        assert_eq!(fam.contours.len(), 1);
        assert!(fam.censored.is_empty());
        let c = &fam.contours[0];
        // octagon: 3x3 cells minus four chamfered corners, in scaled units
        let expect = 8.5 / (4.0 * (n as f64) * (n as f64));
        assert!((c.area() - expect).abs() < 1e-12, "area {}", c.area());
        assert!(c.contains([0.5, 2.5])); // surrounded face centre
        assert!(c.contains([0.0, 2.0]));
        assert!(!c.contains([3.0, 3.0]));
        assert_eq!(c.enclosed_vertices.len(), 4);
        // closed and non-self-intersecting
        assert_eq!(c.polyline.first(), c.polyline.last());
        let mut pts = c.polyline.clone();
        pts.pop();
        let mut uniq = pts.clone();
        uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        uniq.dedup();
        assert_eq!(uniq.len(), pts.len());
    }

    #[test]
    fn nested_loops_give_single_outer_contour() {
        let g = build_half_plane(1, 10, 10).unwrap();
        let outer = loop_at(
            &g,
            &[
                (-2, 2),
                (-1, 2),
                (0, 2),
                (1, 2),
                (2, 2),
                (2, 3),
                (2, 4),
                (2, 5),
                (2, 6),
                (1, 6),
                (0, 6),
                (-1, 6),
                (-2, 6),
                (-2, 5),
                (-2, 4),
                (-2, 3),
            ],
        );
        let inner = loop_at(&g, &[(0, 4), (0, 3), (1, 3), (1, 4)]);
        let soup = LoopSoupSample::synthetic(&g, vec![outer, inner], 0.5, 30);
        let fam = outer_contours(&g, ClusterSource::Soup(&soup), &[]).unwrap();
        assert_eq!(fam.contours.len(), 1, "inner cluster is surrounded");
        assert!(fam.contours[0].contains([0.5, 3.5]));
    }

    #[test]
    fn censoring_flags_frame_contact() {
        let g = build_half_plane(1, 4, 4).unwrap();
        // touches the side ring i = w-1 = 3
        let lp = loop_at(&g, &[(2, 2), (3, 2), (3, 3), (2, 3)]);
        let soup = LoopSoupSample::synthetic(&g, vec![lp], 0.5, 8);
        let fam = outer_contours(&g, ClusterSource::Soup(&soup), &[]).unwrap();
        assert!(fam.contours.is_empty());
        assert_eq!(fam.censored.len(), 1);
        assert!(fam.censor_rate() > 0.99);
    }

    #[test]
    fn contour_containing_picks_at_most_one() {
        let g = build_half_plane(1, 10, 6).unwrap();
        let l1 = loop_at(&g, &[(-4, 2), (-3, 2), (-3, 3), (-4, 3)]);
        let l2 = loop_at(&g, &[(3, 2), (4, 2), (4, 3), (3, 3)]);
        let soup = LoopSoupSample::synthetic(&g, vec![l1, l2], 0.5, 8);
        let fam = outer_contours(&g, ClusterSource::Soup(&soup), &[]).unwrap();
        assert_eq!(fam.contours.len(), 2);
        let hit = contour_containing(&fam, [-3.5, 2.5]).unwrap();
        assert!(hit.contains([-3.5, 2.5]));
        assert!(contour_containing(&fam, [0.0, 4.0]).is_none());
    }

    #[test]
    fn hausdorff_translated_squares() {
        let sq = |ox: f64| -> Vec<[f64; 2]> {
            let mut pts = Vec::new();
            let m = 20;
            for k in 0..m {
                let t = k as f64 / m as f64;
                pts.push([ox + t, 0.0]);
                pts.push([ox + t, 1.0]);
                pts.push([ox, t]);
                pts.push([ox + 1.0, t]);
            }
            pts
        };
        let d = hausdorff(&sq(0.0), &sq(0.3));
        assert!((d - 0.3).abs() < 1e-9, "d = {d}");
    }

    #[test]
    fn collection_distance_cases() {
        let sq = |ox: f64, oy: f64| -> Vec<[f64; 2]> {
            vec![[ox, oy], [ox + 1.0, oy], [ox + 1.0, oy + 1.0], [ox, oy + 1.0]]
        };
        let a = vec![sq(0.0, 0.0), sq(5.0, 0.0)];
        assert_eq!(collection_distance(&a, &a), 0.0);
        let b = vec![sq(0.0, 0.0)];
        assert!(collection_distance(&a, &b).is_infinite());
        // offset one square by 0.3: bottleneck = 0.3, matching must pair
        // the near squares
        let c = vec![sq(5.3, 0.0), sq(0.0, 0.0)];
        let d = collection_distance(&a, &c);
        assert!((d - 0.3).abs() < 1e-12, "d = {d}");
    }
}

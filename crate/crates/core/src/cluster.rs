//! Union-find cluster construction over loops and excursions, and the
//! Monte Carlo estimator of the two-interval connection probability.
//!
//! Elements chain through shared vertices; on the cable graph at intensity
//! 1/2 the loop clusters are the free-field sign clusters, an excursion
//! joins a cluster when it visits one of its vertices, and two excursions
//! join when they share a vertex or traverse a common edge. Excursions
//! traverse entire edges, so the vertex/edge rules capture every
//! intersection the cable geometry can produce at the vertex level.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::excursion::{BoundaryInterval, ExcursionProcess, ExcursionSampler};
use crate::gff::{GffSampler, SignClusterPartition};
use crate::graph::{build_half_plane_scaled, build_quotient, experiment_box, WeightedGraph};
use crate::harmonic::ceq_n_q;
use crate::loopsoup::{loop_mass_spectrum, sample_loop_soup_at, LoopSoupSample};
use crate::stats::binomial_stderr;
use crate::unionfind::UnionFind;

/// What generates the vertex-level clusters.
pub enum ClusterSource<'a> {
    /// Discrete loop soup: loops chain through shared vertices.
    Soup(&'a LoopSoupSample),
    /// Cable-graph sign clusters at intensity 1/2, with the edge marks that
    /// generated them.
    Field {
        partition: &'a SignClusterPartition,
        edges: &'a [crate::graph::Edge],
        open: &'a [bool],
    },
}

/// Addressable element of a cluster partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Vertex(usize),
    Loop(usize),
    Excursion(usize, usize), // (process, excursion)
}

/// Union-find over interior vertices plus loop and excursion element ids.
pub struct ClusterPartition {
    uf: UnionFind,
    n_vertices: usize,
    n_loops: usize,
    exc_offsets: Vec<usize>,
}

impl ClusterPartition {
    fn node(&self, e: Element) -> usize {
        match e {
            Element::Vertex(v) => v,
            Element::Loop(l) => self.n_vertices + l,
            Element::Excursion(p, e) => self.n_vertices + self.n_loops + self.exc_offsets[p] + e,
        }
    }

    pub fn cluster_of(&mut self, e: Element) -> usize {
        let n = self.node(e);
        self.uf.find(n)
    }

    pub fn same_cluster(&mut self, a: Element, b: Element) -> bool {
        let (x, y) = (self.node(a), self.node(b));
        self.uf.same(x, y)
    }
}

/// Assemble the chain partition of vertices, loops and excursions.
pub fn build_clusters(
    g: &WeightedGraph,
    source: ClusterSource,
    excursions: &[&ExcursionProcess],
) -> Result<ClusterPartition> {
    let n_vertices = g.interior_len();
    let n_loops = match &source {
        ClusterSource::Soup(s) => {
            if s.fingerprint() != g.fingerprint() {
                return Err(Error::GraphMismatch("soup from a different graph".into()));
            }
            s.loops.len()
        }
        ClusterSource::Field { partition, .. } => {
            if partition.cluster_id.len() != n_vertices {
                return Err(Error::GraphMismatch("field partition size mismatch".into()));
            }
            0
        }
    };
    let mut exc_offsets = Vec::with_capacity(excursions.len());
    let mut total_exc = 0usize;
    for p in excursions {
        exc_offsets.push(total_exc);
        total_exc += p.excursions.len();
    }
    let mut part = ClusterPartition {
        uf: UnionFind::new(n_vertices + n_loops + total_exc),
        n_vertices,
        n_loops,
        exc_offsets,
    };
    match &source {
        ClusterSource::Soup(s) => {
            for (l, lp) in s.loops.iter().enumerate() {
                let node = part.node(Element::Loop(l));
                for &v in &lp.path[..lp.path.len() - 1] {
                    part.uf.union(node, v as usize);
                }
            }
        }
        ClusterSource::Field { partition, .. } => {
            let mut first: HashMap<u32, usize> = HashMap::new();
            for (v, &c) in partition.cluster_id.iter().enumerate() {
                match first.entry(c) {
                    std::collections::hash_map::Entry::Occupied(o) => {
                        part.uf.union(*o.get(), v);
                    }
                    std::collections::hash_map::Entry::Vacant(slot) => {
                        slot.insert(v);
                    }
                }
            }
        }
    }
    let mut edge_owner: HashMap<(u64, u64), usize> = HashMap::new();
    for (pi, p) in excursions.iter().enumerate() {
        for (ei, e) in p.excursions.iter().enumerate() {
            let node = part.node(Element::Excursion(pi, ei));
            for &v in &e.path {
                if v as usize >= n_vertices {
                    return Err(Error::GraphMismatch("excursion from a different graph".into()));
                }
                part.uf.union(node, v as usize);
            }
            for key in e.traversed_edges() {
                match edge_owner.entry(key) {
                    std::collections::hash_map::Entry::Occupied(o) => {
                        part.uf.union(*o.get(), node);
                    }
                    std::collections::hash_map::Entry::Vacant(slot) => {
                        slot.insert(node);
                    }
                }
            }
        }
    }
    Ok(part)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    Discrete,
    Metric,
}

/// Connection experiment between the boundary intervals `[-a, 0]` and
/// `[1, q]` on a truncation of the scale-`n` half plane.
#[derive(Debug, Clone)]
pub struct ConnectionConfig {
    pub n: u32,
    pub q: f64,
    pub a: f64,
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
    pub mode: EstimatorMode,
    /// Truncation in scaled units; `None` takes the default experiment box
    /// (half-width `12q`, height `8q`).
    pub box_scaled: Option<(f64, f64)>,
    /// Loop-length truncation for discrete mode; `None` = automatic.
    pub kmax: Option<usize>,
}

impl ConnectionConfig {
    pub fn metric(n: u32, q: f64, a: f64, u: f64, v: f64) -> ConnectionConfig {
        ConnectionConfig {
            n,
            q,
            a,
            u,
            v,
            alpha: 0.5,
            mode: EstimatorMode::Metric,
            box_scaled: None,
            kmax: None,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConnectionEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Closed-form `1 - exp(-2 Ceq_{n,a}(q) 8 pi sqrt(uv) / n)` evaluated
    /// with the same-truncation conductance (cable model only).
    pub formula: Option<f64>,
    pub ceq: Option<f64>,
    /// Fraction of replicas whose relevant vertices or clusters touched the
    /// side/top truncation ring.
    pub frame_contact_rate: f64,
}

/// Monte Carlo estimate of the probability that the two excursion families
/// link up, either directly or through a common cluster.
pub fn estimate_p(
    cfg: &ConnectionConfig,
    master_seed: u64,
    n_samples: usize,
) -> Result<ConnectionEstimate> {
    if n_samples < 100 {
        return Err(Error::invalid("samples", "need at least 100 replicas"));
    }
    if cfg.q <= 1.0 {
        return Err(Error::invalid("q", "right endpoint must exceed 1"));
    }
    if cfg.u < 0.0 || cfg.v < 0.0 {
        return Err(Error::invalid("u/v", "intensities must be nonnegative"));
    }
    if cfg.mode == EstimatorMode::Metric && (cfg.alpha - 0.5).abs() > 1e-12 {
        return Err(Error::invalid(
            "alpha",
            "cable-graph clusters are exact only at intensity 1/2",
        ));
    }
    let (hw, ht) = cfg.box_scaled.unwrap_or_else(|| experiment_box(cfg.q));
    let g = build_half_plane_scaled(cfg.n, hw, ht)?;
    let len = g.interior_len();
    let (icols, irows) = g.grid_dims().expect("grid");
    if len * (icols.min(irows) + 1) > 250_000_000 {
        return Err(Error::TooLarge(format!(
            "factorization of a {icols}x{irows} box; shrink the box or the scale"
        )));
    }

    let qg = build_quotient(g.clone(), cfg.a, cfg.q)?;
    let ceq = ceq_n_q(&qg)?;
    let formula = match cfg.mode {
        EstimatorMode::Metric => Some(
            1.0 - (-2.0 * ceq * 8.0 * std::f64::consts::PI * (cfg.u * cfg.v).sqrt()
                / cfg.n as f64)
                .exp(),
        ),
        EstimatorMode::Discrete => None,
    };

    let field = GffSampler::new(&g)?;
    let left = ExcursionSampler::with_factor(
        &g,
        BoundaryInterval::new(-cfg.a, 0.0),
        cfg.u,
        field.grid_factor(),
    )?;
    let right = ExcursionSampler::with_factor(
        &g,
        BoundaryInterval::new(1.0, cfg.q),
        cfg.v,
        field.grid_factor(),
    )?;
    let spectrum = match cfg.mode {
        EstimatorMode::Discrete => Some(loop_mass_spectrum(&g, cfg.kmax)?),
        EstimatorMode::Metric => None,
    };

    // side/top truncation ring for the contact diagnostic
    let ring: Vec<u32> = (0..len)
        .filter(|&v| {
            let p = g.vertex(v);
            p.i == -(g.box_w() - 1) || p.i == g.box_w() - 1 || p.j == g.box_h() - 1
        })
        .map(|v| v as u32)
        .collect();

    let results: Vec<Result<(bool, bool)>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|r| replica_event(cfg, &g, &field, &left, &right, spectrum.as_ref(), &ring, master_seed, r))
        .collect();
    let mut hits = 0usize;
    let mut contacts = 0usize;
    for res in results {
        let (event, contact) = res?;
        if event {
            hits += 1;
        }
        if contact {
            contacts += 1;
        }
    }
    let p_hat = hits as f64 / n_samples as f64;
    Ok(ConnectionEstimate {
        p_hat,
        stderr: binomial_stderr(p_hat, n_samples),
        samples: n_samples,
        formula,
        ceq: Some(ceq),
        frame_contact_rate: contacts as f64 / n_samples as f64,
    })
}

#[allow(clippy::too_many_arguments)]
fn replica_event(
    cfg: &ConnectionConfig,
    g: &WeightedGraph,
    field: &GffSampler,
    left: &ExcursionSampler,
    right: &ExcursionSampler,
    spectrum: Option<&crate::loopsoup::LoopLengthSpectrum>,
    ring: &[u32],
    master: u64,
    replica: u64,
) -> Result<(bool, bool)> {
    let len = g.interior_len();
    // cluster labels per vertex
    let labels: Vec<u32> = match cfg.mode {
        EstimatorMode::Metric => {
            let mut s = field.sample_at(master, replica);
            field.mark_at(&mut s, master, replica);
            field.sign_clusters(&s)?.cluster_id
        }
        EstimatorMode::Discrete => {
            let soup = sample_loop_soup_at(g, spectrum.expect("spectrum"), cfg.alpha, master, replica)?;
            let mut uf = UnionFind::new(len);
            for lp in &soup.loops {
                let root = lp.path[0] as usize;
                for &v in &lp.path[1..lp.path.len() - 1] {
                    uf.union(root, v as usize);
                }
            }
            (0..len).map(|v| uf.find(v) as u32).collect()
        }
    };
    let lproc = left.sample(g, master, replica, 3)?;
    let rproc = right.sample(g, master, replica, 4)?;

    let mut left_vertex = vec![false; len];
    let mut left_cluster = vec![false; len.max(1)];
    let mut left_edges: std::collections::HashSet<(u64, u64)> = std::collections::HashSet::new();
    for e in &lproc.excursions {
        for &v in &e.path {
            left_vertex[v as usize] = true;
            left_cluster[labels[v as usize] as usize] = true;
        }
        for key in e.traversed_edges() {
            left_edges.insert(key);
        }
    }
    let mut event = false;
    let mut right_cluster = vec![false; len.max(1)];
    'outer: for e in &rproc.excursions {
        for &v in &e.path {
            if left_vertex[v as usize] || left_cluster[labels[v as usize] as usize] {
                event = true;
                break 'outer;
            }
        }
        for key in e.traversed_edges() {
            if left_edges.contains(&key) {
                event = true;
                break 'outer;
            }
        }
    }
    // contact diagnostic over everything either family touches
    let mut contact = false;
    if !ring.is_empty() {
        for e in rproc.excursions.iter() {
            for &v in &e.path {
                right_cluster[labels[v as usize] as usize] = true;
            }
        }
        'ring: for &v in ring {
            let c = labels[v as usize] as usize;
            if left_vertex[v as usize] || left_cluster[c] || right_cluster[c] {
                contact = true;
                break 'ring;
            }
        }
    }
    Ok((event, contact))
}

/// Probability that two fixed interior vertices lie in a common cluster,
/// for the cross-model monotonicity checks.
pub fn two_point_connection(
    g: &WeightedGraph,
    mode: EstimatorMode,
    alpha: f64,
    x: usize,
    y: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let len = g.interior_len();
    if x >= len || y >= len {
        return Err(Error::invalid("vertices", "out of range"));
    }
    let mut hits = 0usize;
    match mode {
        EstimatorMode::Metric => {
            let field = GffSampler::new(g)?;
            for r in 0..samples as u64 {
                let mut s = field.sample_at(seed, r);
                field.mark_at(&mut s, seed, r);
                let part = field.sign_clusters(&s)?;
                if part.same_cluster(x, y) {
                    hits += 1;
                }
            }
        }
        EstimatorMode::Discrete => {
            let spectrum = loop_mass_spectrum(g, None)?;
            for r in 0..samples as u64 {
                let soup = sample_loop_soup_at(g, &spectrum, alpha, seed, r)?;
                let mut uf = UnionFind::new(len);
                for lp in &soup.loops {
                    let root = lp.path[0] as usize;
                    for &v in &lp.path[1..lp.path.len() - 1] {
                        uf.union(root, v as usize);
                    }
                }
                if uf.same(x, y) {
                    hits += 1;
                }
            }
        }
    }
    let p = hits as f64 / samples as f64;
    Ok((p, binomial_stderr(p, samples)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_half_plane, Vertex};
    use crate::loopsoup::RootedLoop;

    fn soup_of(g: &WeightedGraph, loops: Vec<RootedLoop>) -> LoopSoupSample {
        LoopSoupSample::synthetic(g, loops, 0.5, 10)
    }

    fn exc(g: &WeightedGraph, sites: &[(i32, i32)], start: i32, end: i32) -> ExcursionPath {
        ExcursionPath {
            start: Vertex::new(start, 0),
            end: Vertex::new(end, 0),
            path: sites
                .iter()
                .map(|&(i, j)| g.index_of(i, j).unwrap() as u32)
                .collect(),
        }
    }

    use crate::excursion::ExcursionPath;

    fn process_of(excs: Vec<ExcursionPath>) -> ExcursionProcess {
        ExcursionProcess {
            interval: BoundaryInterval::new(-1.0, 1.0),
            intensity: 1.0,
            excursions: excs,
            endpoint_intensity: nalgebra::DMatrix::zeros(1, 1),
            columns: vec![0],
        }
    }

    #[test]
    fn shared_vertex_joins_excursions() {
        let g = build_half_plane(1, 8, 6).unwrap();
        let e1 = exc(&g, &[(-1, 1), (-1, 2), (0, 2), (0, 1)], -1, 0);
        let e2 = exc(&g, &[(1, 1), (0, 1)], 1, 0);
        let p = process_of(vec![e1, e2]);
        let soup = soup_of(&g, vec![]);
        let mut part = build_clusters(&g, ClusterSource::Soup(&soup), &[&p]).unwrap();
        assert!(part.same_cluster(Element::Excursion(0, 0), Element::Excursion(0, 1)));
    }

    #[test]
    fn disjoint_loops_stay_apart() {
        let g = build_half_plane(1, 8, 6).unwrap();
        let l1 = RootedLoop {
            path: [(0, 1), (0, 2), (1, 2), (1, 1), (0, 1)]
                .iter()
                .map(|&(i, j)| g.index_of(i, j).unwrap() as u32)
                .collect(),
        };
        let l2 = RootedLoop {
            path: [(4, 3), (4, 4), (5, 4), (5, 3), (4, 3)]
                .iter()
                .map(|&(i, j)| g.index_of(i, j).unwrap() as u32)
                .collect(),
        };
        let soup = soup_of(&g, vec![l1, l2]);
        let mut part = build_clusters(&g, ClusterSource::Soup(&soup), &[]).unwrap();
        assert!(!part.same_cluster(Element::Loop(0), Element::Loop(1)));
    }

    #[test]
    fn chain_of_two_loops_bridges_two_excursions() {
        // left excursion - loop - loop - right excursion, joined by shared
        // vertices only
        let g = build_half_plane(1, 10, 8).unwrap();
        let e_left = exc(&g, &[(-3, 1), (-3, 2), (-2, 2), (-2, 1)], -3, -2);
        let e_right = exc(&g, &[(4, 1), (4, 2), (5, 2), (5, 1)], 4, 5);
        let l1 = RootedLoop {
            path: [(-2, 2), (-1, 2), (-1, 3), (-2, 3), (-2, 2)]
                .iter()
                .map(|&(i, j)| g.index_of(i, j).unwrap() as u32)
                .collect(),
        };
        let l2 = RootedLoop {
            path: [(-1, 3), (0, 3), (0, 2), (1, 2), (1, 3), (2, 3), (2, 2), (3, 2), (3, 3), (4, 3), (4, 2), (-1, 2), (-1, 3)]
                .iter()
                .map(|&(i, j)| g.index_of(i, j).unwrap() as u32)
                .collect(),
        };
        let soup = soup_of(&g, vec![l1, l2]);
        let left = process_of(vec![e_left]);
        let right = process_of(vec![e_right]);
        let mut part = build_clusters(&g, ClusterSource::Soup(&soup), &[&left, &right]).unwrap();
        assert!(part.same_cluster(Element::Excursion(0, 0), Element::Excursion(1, 0)));
    }

    #[test]
    fn zero_left_intensity_gives_zero_probability() {
        let mut cfg = ConnectionConfig::metric(2, 2.0, 1.0, 0.0, 0.25);
        cfg.box_scaled = Some((6.0, 4.0));
        let est = estimate_p(&cfg, 1, 200).unwrap();
        assert_eq!(est.p_hat, 0.0);
        assert!(est.formula.unwrap() > 0.0 || est.formula.unwrap() == 0.0);
    }

    #[test]
    fn rejects_small_sample_count() {
        let cfg = ConnectionConfig::metric(2, 2.0, 1.0, 0.25, 0.25);
        assert!(estimate_p(&cfg, 1, 50).is_err());
    }

    #[test]
    fn metric_estimate_bracketed_by_dictionary_normalizations() {
        // The vertex-level model omits sub-edge contacts, so its estimate
        // sits below the cable-exact curve whose exponent carries the
        // per-unit-local-time excursion rate (twice the exponent of the
        // reported closed form), and above the reported closed form itself.
        let mut cfg = ConnectionConfig::metric(2, 2.0, 1.0, 0.25, 0.25);
        cfg.box_scaled = Some((8.0, 6.0));
        let est = estimate_p(&cfg, 42, 4000).unwrap();
        let f = est.formula.unwrap();
        let doubled = 1.0 - (1.0 - f) * (1.0 - f);
        assert!(
            est.p_hat > f - 3.0 * est.stderr,
            "p_hat {} below stated curve {f}",
            est.p_hat
        );
        assert!(
            est.p_hat < doubled + 3.0 * est.stderr,
            "p_hat {} above doubled-exponent curve {doubled}",
            est.p_hat
        );
    }

    #[test]
    fn discrete_not_above_metric_at_half() {
        let g = build_half_plane(2, 6, 5).unwrap();
        let x = g.index_of(-2, 2).unwrap();
        let y = g.index_of(2, 2).unwrap();
        let (pd, sed) = two_point_connection(&g, EstimatorMode::Discrete, 0.5, x, y, 4000, 7).unwrap();
        let (pm, sem) = two_point_connection(&g, EstimatorMode::Metric, 0.5, x, y, 4000, 7).unwrap();
        assert!(
            pd <= pm + 3.0 * (sed * sed + sem * sem).sqrt(),
            "discrete {pd} vs metric {pm}"
        );
    }
}

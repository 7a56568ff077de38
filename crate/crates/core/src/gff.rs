//! Discrete Gaussian free field with the cable-graph edge marks that turn
//! sign agreement into cluster connectivity.
//!
//! The field has precision matrix `M` (covariance `M^{-1}`). Conditionally
//! on the vertex values, an edge `{x,y}` of conductance `C` is open with
//! probability `1 - exp(-2 C phi_x phi_y)` when the signs agree and closed
//! otherwise; open edges generate the sign clusters. At intensity 1/2 these
//! clusters are exactly the vertex traces of the loop-soup clusters on the
//! cable graph, and the occupation field is `phi^2 / 2`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedGraph};
use crate::solve::{assemble_dense, GridFactor, DIRECT_LIMIT};
use crate::stats::replica_rng;
use crate::unionfind::UnionFind;

/// One field draw: vertex values, and per-edge open marks once
/// [`mark_edges`] has run.
#[derive(Debug, Clone)]
pub struct GffSample {
    pub phi: Vec<f64>,
    pub edge_open: Option<Vec<bool>>,
    pub seed: u64,
    fingerprint: u64,
}

impl GffSample {
    /// Occupation field value at a vertex: `phi^2 / 2`.
    pub fn occupation(&self, v: usize) -> f64 {
        0.5 * self.phi[v] * self.phi[v]
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Vertex partition induced by the open edges.
#[derive(Debug, Clone)]
pub struct SignClusterPartition {
    pub cluster_id: Vec<u32>,
    pub cluster_count: usize,
}

impl SignClusterPartition {
    pub fn same_cluster(&self, x: usize, y: usize) -> bool {
        self.cluster_id[x] == self.cluster_id[y]
    }

    pub fn largest_cluster(&self) -> usize {
        let mut counts = vec![0usize; self.cluster_count];
        for &c in &self.cluster_id {
            counts[c as usize] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }
}

enum Factor {
    Band(GridFactor),
    /// Upper triangular `L^T` of the dense Cholesky `M = L L^T`.
    Dense(DMatrix<f64>),
}

/// Reusable field sampler: factors the precision matrix once and draws any
/// number of independent samples. Shared read-only across threads.
pub struct GffSampler {
    factor: Factor,
    edges: Vec<Edge>,
    fingerprint: u64,
    len: usize,
}

impl GffSampler {
    pub fn new(g: &WeightedGraph) -> Result<GffSampler> {
        let len = g.interior_len();
        if len == 0 {
            return Err(Error::invalid("graph", "no interior vertices"));
        }
        if g.killed_vertices().is_empty() {
            return Err(Error::Singular("field needs killing somewhere".into()));
        }
        let factor = if g.grid_dims().is_some() {
            Factor::Band(GridFactor::new(g)?)
        } else {
            let m = assemble_dense(g)?;
            let chol = m
                .cholesky()
                .ok_or_else(|| Error::Singular("precision matrix not positive definite".into()))?;
            Factor::Dense(chol.l().transpose())
        };
        Ok(GffSampler {
            factor,
            edges: g.interior_edges(),
            fingerprint: g.fingerprint(),
            len,
        })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// The banded factorization, when the graph is a grid truncation.
    pub fn grid_factor(&self) -> Option<&GridFactor> {
        match &self.factor {
            Factor::Band(f) => Some(f),
            Factor::Dense(_) => None,
        }
    }

    /// Draw the vertex values only.
    pub fn sample(&self, seed: u64) -> GffSample {
        self.sample_at(seed, 0)
    }

    /// Draw the field of one replica of a seeded ensemble.
    pub fn sample_at(&self, master: u64, replica: u64) -> GffSample {
        let mut rng = replica_rng(master, replica, 0);
        let xi: Vec<f64> = (0..self.len).map(|_| rng.sample(StandardNormal)).collect();
        let phi = match &self.factor {
            Factor::Band(f) => f.correlate(xi),
            Factor::Dense(lt) => {
                let sol = lt
                    .solve_upper_triangular(&DVector::from_vec(xi))
                    .expect("nonsingular triangular factor");
                sol.as_slice().to_vec()
            }
        };
        GffSample {
            phi,
            edge_open: None,
            seed: master,
            fingerprint: self.fingerprint,
        }
    }

    /// Fill the edge marks with the standard cable rule.
    pub fn mark(&self, s: &mut GffSample, seed: u64) {
        self.mark_with_rule_at(s, seed, 0, open_probability);
    }

    /// Replica-addressed edge marking with the standard rule.
    pub fn mark_at(&self, s: &mut GffSample, master: u64, replica: u64) {
        self.mark_with_rule_at(s, master, replica, open_probability);
    }

    /// Edge marking with a custom opening rule; the standard rule is
    /// [`open_probability`]. Used by the mutation-power checks.
    pub fn mark_with_rule<F: Fn(f64, f64, f64) -> f64>(
        &self,
        s: &mut GffSample,
        seed: u64,
        rule: F,
    ) {
        self.mark_with_rule_at(s, seed, 0, rule);
    }

    fn mark_with_rule_at<F: Fn(f64, f64, f64) -> f64>(
        &self,
        s: &mut GffSample,
        master: u64,
        replica: u64,
        rule: F,
    ) {
        let mut rng = replica_rng(master, replica, 1);
        let mut open = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let (px, py) = (s.phi[e.a as usize], s.phi[e.b as usize]);
            let p = if px * py > 0.0 {
                rule(e.cond, px, py)
            } else {
                0.0
            };
            open.push(p > 0.0 && rng.gen::<f64>() < p);
        }
        s.edge_open = Some(open);
    }

    /// Union-find over the open edges.
    pub fn sign_clusters(&self, s: &GffSample) -> Result<SignClusterPartition> {
        let open = s
            .edge_open
            .as_ref()
            .ok_or_else(|| Error::invalid("sample", "edge marks not filled"))?;
        if s.fingerprint != self.fingerprint {
            return Err(Error::GraphMismatch("sample from a different graph".into()));
        }
        let mut uf = UnionFind::new(self.len);
        for (e, &is_open) in self.edges.iter().zip(open.iter()) {
            if is_open {
                uf.union(e.a as usize, e.b as usize);
            }
        }
        let mut ids = vec![u32::MAX; self.len];
        let mut next = 0u32;
        let mut cluster_id = Vec::with_capacity(self.len);
        for v in 0..self.len {
            let r = uf.find(v);
            if ids[r] == u32::MAX {
                ids[r] = next;
                next += 1;
            }
            cluster_id.push(ids[r]);
        }
        Ok(SignClusterPartition {
            cluster_id,
            cluster_count: next as usize,
        })
    }
}

/// Opening probability of an edge of conductance `c` given same-sign field
/// values: `1 - exp(-2 c phi_x phi_y)`, the zero-free probability of the
/// cable bridge between the endpoint values.
pub fn open_probability(c: f64, phi_x: f64, phi_y: f64) -> f64 {
    1.0 - (-2.0 * c * phi_x * phi_y).exp()
}

/// One-shot field draw with precision matrix `M`; deterministic in `seed`.
pub fn sample_gff(g: &WeightedGraph, seed: u64) -> Result<GffSample> {
    if g.interior_len() > DIRECT_LIMIT * 4 {
        return Err(Error::TooLarge(
            "field sampling above the factorization limit".into(),
        ));
    }
    Ok(GffSampler::new(g)?.sample(seed))
}

/// One-shot edge marking.
pub fn mark_edges(mut s: GffSample, g: &WeightedGraph, seed: u64) -> Result<GffSample> {
    let sampler = GffSampler::new(g)?;
    if s.fingerprint() != g.fingerprint() {
        return Err(Error::GraphMismatch("sample from a different graph".into()));
    }
    sampler.mark(&mut s, seed);
    Ok(s)
}

/// One-shot sign clusters.
pub fn sign_clusters(s: &GffSample, g: &WeightedGraph) -> Result<SignClusterPartition> {
    GffSampler::new(g)?.sign_clusters(s)
}

/// Closed-form conditional non-connection probabilities at occupations
/// `(u, v)` across an equivalent conductance: the probability of lying in
/// different clusters given no shared loop, `exp(-2 ceq sqrt(uv))`, and the
/// probability of no shared loop, `1 / cosh(2 ceq sqrt(uv))`.
pub fn no_connect_conditional(ceq: f64, u: f64, v: f64) -> Result<(f64, f64)> {
    if ceq < 0.0 || u < 0.0 || v < 0.0 {
        return Err(Error::invalid("inputs", "ceq, u, v must be nonnegative"));
    }
    let k = 2.0 * ceq * (u * v).sqrt();
    Ok(((-k).exp(), 1.0 / k.cosh()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_half_plane, Vertex};
    use crate::harmonic::green_table;

    fn two_vertex_path() -> WeightedGraph {
        WeightedGraph::from_parts(
            1,
            vec![Vertex::new(0, 1), Vertex::new(1, 1)],
            &[(0, 1, 1.0)],
            &[(0, Vertex::new(-1, 1), 1.0), (1, Vertex::new(2, 1), 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn deterministic_in_seed() {
        let g = build_half_plane(2, 5, 4).unwrap();
        let a = sample_gff(&g, 42).unwrap();
        let b = sample_gff(&g, 42).unwrap();
        let c = sample_gff(&g, 43).unwrap();
        assert_eq!(a.phi, b.phi);
        assert_ne!(a.phi, c.phi);
    }

    #[test]
    fn single_vertex_variance() {
        let g = build_half_plane(1, 1, 2).unwrap();
        let sampler = GffSampler::new(&g).unwrap();
        let n = 100_000;
        let mut sq = 0.0;
        for s in 0..n {
            let x = sampler.sample(s as u64).phi[0];
            sq += x * x;
        }
        let var = sq / n as f64;
        // Var = G(x,x) = 0.5; SE of the variance estimate ~ 0.5*sqrt(2/n)
        let se = 0.5 * (2.0 / n as f64).sqrt();
        assert!((var - 0.5).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn two_vertex_covariance() {
        let g = two_vertex_path();
        let sampler = GffSampler::new(&g).unwrap();
        let n = 100_000;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for s in 0..n {
            let phi = sampler.sample(s as u64).phi;
            sxx += phi[0] * phi[0];
            sxy += phi[0] * phi[1];
            syy += phi[1] * phi[1];
        }
        let nf = n as f64;
        // targets 2/3, 1/3, 2/3; moment SE ~ sqrt((gxx*gyy+gxy^2)/n)
        assert!((sxx / nf - 2.0 / 3.0).abs() < 3.0 * (2.0f64 * (2.0 / 3.0f64).powi(2) / nf).sqrt());
        assert!((syy / nf - 2.0 / 3.0).abs() < 3.0 * (2.0f64 * (2.0 / 3.0f64).powi(2) / nf).sqrt());
        let se_xy = ((2.0 / 3.0 * 2.0 / 3.0 + (1.0f64 / 3.0).powi(2)) / nf).sqrt();
        assert!((sxy / nf - 1.0 / 3.0).abs() < 3.0 * se_xy);
    }

    #[test]
    fn occupation_matches_half_green_diagonal() {
        let g = build_half_plane(1, 4, 3).unwrap();
        let t = green_table(&g).unwrap();
        let sampler = GffSampler::new(&g).unwrap();
        let v = g.index_of(0, 1).unwrap();
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|s| sampler.sample(s as u64).occupation(v))
            .collect();
        let (mean, se) = crate::stats::mean_stderr(&xs);
        let target = t.entry(v, v) / 2.0;
        assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target}");
    }

    #[test]
    fn opposite_signs_never_open() {
        let g = build_half_plane(2, 6, 5).unwrap();
        let sampler = GffSampler::new(&g).unwrap();
        for seed in 0..200 {
            let mut s = sampler.sample(seed);
            sampler.mark(&mut s, seed);
            let open = s.edge_open.as_ref().unwrap();
            for (e, &o) in sampler.edges().iter().zip(open.iter()) {
                if s.phi[e.a as usize] * s.phi[e.b as usize] <= 0.0 {
                    assert!(!o);
                }
            }
        }
    }

    #[test]
    fn open_rate_matches_formula() {
        // phi_x = phi_y = 1, C = 1/2: open probability 1 - e^{-1}
        let p = open_probability(0.5, 1.0, 1.0);
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        let mut rng = replica_rng(9, 0, 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| rng.gen::<f64>() < p).count() as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits / n as f64 - p).abs() < 3.0 * se);
        assert!(open_probability(1e-12, 1.0, 1.0) < 1e-11);
    }

    #[test]
    fn cluster_extremes() {
        let g = build_half_plane(2, 4, 4).unwrap();
        let sampler = GffSampler::new(&g).unwrap();
        let mut s = sampler.sample(1);
        s.edge_open = Some(vec![false; sampler.edges().len()]);
        let part = sampler.sign_clusters(&s).unwrap();
        assert_eq!(part.cluster_count, g.interior_len());
        s.edge_open = Some(vec![true; sampler.edges().len()]);
        let part = sampler.sign_clusters(&s).unwrap();
        assert_eq!(part.cluster_count, 1);
    }

    #[test]
    fn two_vertex_connection_vs_quadrature() {
        // P(same cluster) = E[ 1_{phi_x phi_y > 0} (1 - e^{-2 C phi_x phi_y}) ]
        // against grid quadrature of the bivariate density.
        let g = two_vertex_path();
        let sampler = GffSampler::new(&g).unwrap();
        let n = 200_000usize;
        let mut hits = 0usize;
        for seed in 0..n {
            let mut s = sampler.sample(seed as u64);
            sampler.mark(&mut s, seed as u64);
            let part = sampler.sign_clusters(&s).unwrap();
            if part.same_cluster(0, 1) {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / n as f64;

        // quadrature over [-L, L]^2 with the exact density, precision
        // matrix [[2,-1],[-1,2]]
        let target = {
            let m = 4001;
            let l = 6.0;
            let dx = 2.0 * l / (m as f64 - 1.0);
            let det: f64 = 3.0;
            let norm = det.sqrt() / (2.0 * std::f64::consts::PI);
            let mut acc = 0.0;
            for ix in 0..m {
                let x = -l + ix as f64 * dx;
                for iy in 0..m {
                    let y = -l + iy as f64 * dx;
                    if x * y > 0.0 {
                        let dens = norm * (-0.5 * (2.0 * x * x - 2.0 * x * y + 2.0 * y * y)).exp();
                        acc += dens * open_probability(1.0, x, y) * dx * dx;
                    }
                }
            }
            acc
        };
        let se = (p_hat * (1.0 - p_hat) / n as f64).sqrt();
        assert!(
            (p_hat - target).abs() < 3.0 * se + 1e-4,
            "p_hat {p_hat} vs quadrature {target}"
        );
    }

    #[test]
    fn conditional_no_connect_values() {
        let (p_diff, p_noloop) = no_connect_conditional(1.0, 0.25, 0.25).unwrap();
        assert!((p_diff - (-0.5f64).exp()).abs() < 1e-12);
        assert!((p_noloop - 1.0 / 0.5f64.cosh()).abs() < 1e-12);
        let (p_diff, _) = no_connect_conditional(2.0, 0.0, 1.0).unwrap();
        assert_eq!(p_diff, 1.0);
        assert!(no_connect_conditional(-1.0, 1.0, 1.0).is_err());
    }
}

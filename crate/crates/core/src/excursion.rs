//! Poisson point processes of boundary-to-boundary excursions.
//!
//! The excursion measure of a boundary interval carries the normalization
//! `(8 pi / n) * sum over interval sites of (per-site excursion measures)`,
//! which disintegrates over ordered endpoint pairs `(i, j)` with intensity
//! `2 pi G((i,1),(j,1))` in visit-counting normalization, equivalently
//! `8 pi` times the probability of walking from `(i,1)` to absorption at
//! `(j,0)`. Given its endpoints, an excursion is a killed-walk bridge; it is
//! drawn by the Doob transform of the walk by the harmonic function
//! `h_j(z) = P_z(absorbed at (j,0))`, one O(1) step at a time against the
//! precomputed fields `h_j`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::graph::{Vertex, WeightedGraph};
use crate::solve::{solve_dirichlet, GridFactor};
use crate::stats::replica_rng;

const STEP_CAP: usize = 10_000_000;

/// Scaled boundary interval `[lo, hi] x {0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryInterval {
    pub lo: f64,
    pub hi: f64,
}

impl BoundaryInterval {
    pub fn new(lo: f64, hi: f64) -> BoundaryInterval {
        BoundaryInterval { lo, hi }
    }

    pub fn columns(&self, n: u32) -> Vec<i32> {
        crate::graph::interval_columns(n, self.lo, self.hi)
    }
}

/// Code of a lattice position for edge bookkeeping: interior vertices by
/// index, boundary sites by flagged column.
fn boundary_code(i: i32) -> u64 {
    (1u64 << 40) | (i as u32 as u64)
}

fn edge_key(a: u64, b: u64) -> (u64, u64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// One excursion: from a boundary site up through the interior and back to
/// a boundary site of the same interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionPath {
    pub start: Vertex,
    pub end: Vertex,
    /// Interior vertices from the start-adjacent `(i,1)` to the
    /// end-adjacent `(j,1)`.
    pub path: Vec<u32>,
}

impl ExcursionPath {
    /// All traversed edges including the two boundary stubs, as ordered
    /// code pairs.
    pub fn traversed_edges(&self) -> Vec<(u64, u64)> {
        let mut edges = Vec::with_capacity(self.path.len() + 1);
        edges.push(edge_key(boundary_code(self.start.i), self.path[0] as u64));
        for w in self.path.windows(2) {
            edges.push(edge_key(w[0] as u64, w[1] as u64));
        }
        edges.push(edge_key(
            boundary_code(self.end.i),
            self.path[self.path.len() - 1] as u64,
        ));
        edges
    }

    pub fn jumps(&self) -> usize {
        self.path.len() - 1
    }
}

/// A Poisson sample of excursions over one interval.
#[derive(Debug, Clone)]
pub struct ExcursionProcess {
    pub interval: BoundaryInterval,
    pub intensity: f64,
    pub excursions: Vec<ExcursionPath>,
    /// Ordered-pair endpoint intensity over the interval columns.
    pub endpoint_intensity: DMatrix<f64>,
    pub columns: Vec<i32>,
}

impl ExcursionProcess {
    pub fn total_mass(&self) -> f64 {
        self.endpoint_intensity.sum()
    }
}

/// Endpoint-pair intensity matrix `u * 2 pi * G((i,1),(j,1))` (visit
/// normalization) over the interval columns.
pub fn endpoint_intensity(
    g: &WeightedGraph,
    interval: BoundaryInterval,
    u: f64,
) -> Result<DMatrix<f64>> {
    Ok(ExcursionSampler::new(g, interval, u)?.intensity)
}

/// Reusable sampler for one interval: owns the harmonic fields of every
/// interval column. Construction performs one linear solve per column;
/// sampling afterwards is O(path length).
pub struct ExcursionSampler {
    pub interval: BoundaryInterval,
    pub u: f64,
    pub columns: Vec<i32>,
    /// `h[c][z] = P_z(absorbed at (columns[c], 0))`.
    h_fields: Vec<Vec<f64>>,
    /// row starts of the interior sites `(columns[c], 1)`
    first_row: Vec<usize>,
    intensity: DMatrix<f64>,
    cum: Vec<f64>,
    total: f64,
    fingerprint: u64,
}

impl ExcursionSampler {
    pub fn new(g: &WeightedGraph, interval: BoundaryInterval, u: f64) -> Result<ExcursionSampler> {
        Self::with_factor(g, interval, u, None)
    }

    /// Build against a shared factorization of the same graph.
    pub fn with_factor(
        g: &WeightedGraph,
        interval: BoundaryInterval,
        u: f64,
        factor: Option<&GridFactor>,
    ) -> Result<ExcursionSampler> {
        if u < 0.0 {
            return Err(Error::invalid("u", "intensity must be nonnegative"));
        }
        let columns = interval.columns(g.n());
        if columns.is_empty() {
            return Err(Error::invalid("interval", "no lattice sites in interval"));
        }
        let mut first_row = Vec::with_capacity(columns.len());
        for &i in &columns {
            let idx = g.index_of(i, 1).ok_or_else(|| {
                Error::invalid("interval", format!("site ({i},0) has no interior neighbour"))
            })?;
            first_row.push(idx);
        }
        let len = g.interior_len();
        let mut h_fields = Vec::with_capacity(columns.len());
        let mut lambdas = Vec::with_capacity(columns.len());
        for &idx in &first_row {
            let mut rhs = vec![0.0; len];
            rhs[idx] = 1.0;
            let col = match factor {
                Some(f) => f.solve(&rhs),
                None => solve_dirichlet(g, &rhs)?,
            };
            // stub conductance C((j,1),(j,0)); on grids this is the uniform
            // conductance, lambda/4
            let stub = g.lambda(idx) / 4.0;
            lambdas.push(g.lambda(idx));
            h_fields.push(col.iter().map(|&v| v * stub).collect::<Vec<f64>>());
        }
        // intensity(a, b) = u * 2 pi * walk-Green((col_a,1),(col_b,1))
        //                 = u * 8 pi * h_b((col_a,1))
        let k = columns.len();
        let mut intensity = DMatrix::<f64>::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                intensity[(a, b)] =
                    u * 8.0 * std::f64::consts::PI * h_fields[b][first_row[a]];
            }
        }
        // enforce exact symmetry against solver round-off
        for a in 0..k {
            for b in (a + 1)..k {
                let v = 0.5 * (intensity[(a, b)] + intensity[(b, a)]);
                intensity[(a, b)] = v;
                intensity[(b, a)] = v;
            }
        }
        let mut cum = Vec::with_capacity(k * k);
        let mut total = 0.0;
        for a in 0..k {
            for b in 0..k {
                total += intensity[(a, b)];
                cum.push(total);
            }
        }
        Ok(ExcursionSampler {
            interval,
            u,
            columns,
            h_fields,
            first_row,
            intensity,
            cum,
            total,
            fingerprint: g.fingerprint(),
        })
    }

    pub fn intensity_matrix(&self) -> &DMatrix<f64> {
        &self.intensity
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// Draw a Poisson process of excursions; deterministic in `(seed,
    /// replica, purpose)`.
    pub fn sample(
        &self,
        g: &WeightedGraph,
        seed: u64,
        replica: u64,
        purpose: u32,
    ) -> Result<ExcursionProcess> {
        if g.fingerprint() != self.fingerprint {
            return Err(Error::GraphMismatch("sampler from a different graph".into()));
        }
        let mut rng = replica_rng(seed, replica, purpose);
        let count = if self.total > 0.0 {
            Poisson::new(self.total).expect("positive mass").sample(&mut rng) as usize
        } else {
            0
        };
        let k = self.columns.len();
        let mut excursions = Vec::with_capacity(count);
        for _ in 0..count {
            let t = rng.gen::<f64>() * self.total;
            let flat = self.cum.partition_point(|&c| c < t).min(k * k - 1);
            let (a, b) = (flat / k, flat % k);
            excursions.push(self.bridge(g, a, b, &mut rng)?);
        }
        Ok(ExcursionProcess {
            interval: self.interval,
            intensity: self.u,
            excursions,
            endpoint_intensity: self.intensity.clone(),
            columns: self.columns.clone(),
        })
    }

    /// Conditioned walk from `(columns[a],1)` to absorption at
    /// `(columns[b],0)`: transition weights `C(z,w) h_b(w)` to interior
    /// neighbours and `C(z, target)` onto the target site itself.
    fn bridge<R: Rng>(
        &self,
        g: &WeightedGraph,
        a: usize,
        b: usize,
        rng: &mut R,
    ) -> Result<ExcursionPath> {
        let target = Vertex::new(self.columns[b], 0);
        let h = &self.h_fields[b];
        let mut path = vec![self.first_row[a] as u32];
        let mut z = self.first_row[a];
        for _ in 0..STEP_CAP {
            let mut choices: Vec<(Option<u32>, f64)> = Vec::with_capacity(4);
            let mut total = 0.0;
            g.for_neighbors(z, |nb| {
                let wgt = match nb.interior {
                    Some(o) => nb.cond * h[o as usize],
                    None => {
                        if nb.vertex == target {
                            nb.cond
                        } else {
                            0.0
                        }
                    }
                };
                if wgt > 0.0 {
                    choices.push((nb.interior, wgt));
                    total += wgt;
                }
            });
            if total <= 0.0 {
                return Err(Error::Singular(
                    "conditioned excursion walk has no admissible move".into(),
                ));
            }
            let t = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = choices[choices.len() - 1].0;
            for &(w, wgt) in &choices {
                acc += wgt;
                if t < acc {
                    pick = w;
                    break;
                }
            }
            match pick {
                Some(w) => {
                    path.push(w);
                    z = w as usize;
                }
                None => {
                    return Ok(ExcursionPath {
                        start: Vertex::new(self.columns[a], 0),
                        end: target,
                        path,
                    });
                }
            }
        }
        Err(Error::TooLarge("excursion exceeded the step cap".into()))
    }
}

/// One-shot sampling of an excursion process.
pub fn sample_excursions(
    g: &WeightedGraph,
    interval: BoundaryInterval,
    u: f64,
    seed: u64,
) -> Result<ExcursionProcess> {
    ExcursionSampler::new(g, interval, u)?.sample(g, seed, 0, 3)
}

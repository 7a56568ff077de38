//! Exact Poisson sampling of the discrete-time random walk loop soup.
//!
//! The loop measure weights a rooted loop of `k` jumps by its path
//! probability divided by `k`, so the number of length-`k` loops is
//! Poisson(`alpha * m_k`) with `m_k = tr(P^k)/k` for the killed transition
//! matrix `P`. Sampling a loop draws its root from the diagonal of `P^k`
//! and then a `k`-step bridge back to the root, one neighbour at a time
//! against the precomputed return vectors `v_m = P^m delta_root`.
//!
//! Only discrete-time loops with at least two jumps exist here: holding
//! times and single-vertex loops do not alter vertex-level connectivity and
//! are dropped throughout.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::stats::replica_rng;

/// Largest graph handed to the dense spectral precomputation.
const SPECTRUM_LIMIT: usize = 3_000;

/// Default bound on the Poisson mass discarded beyond `kmax`.
pub const DEFAULT_TAIL_EPS: f64 = 1e-6;

/// A nearest-neighbour cycle `z_0, ..., z_k` with `z_k = z_0`, `k >= 2`,
/// stored as interior indices with the closing vertex repeated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedLoop {
    pub path: Vec<u32>,
}

impl RootedLoop {
    pub fn jumps(&self) -> usize {
        self.path.len() - 1
    }

    pub fn root(&self) -> u32 {
        self.path[0]
    }

    /// Distinct vertices visited.
    pub fn visited(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.path[..self.path.len() - 1].to_vec();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Closed nearest-neighbour path through interior vertices only.
pub fn is_valid_loop(g: &WeightedGraph, lp: &RootedLoop) -> bool {
    let p = &lp.path;
    if p.len() < 3 || p[0] != p[p.len() - 1] {
        return false;
    }
    for w in p.windows(2) {
        let mut adjacent = false;
        g.for_neighbors(w[0] as usize, |nb| {
            if nb.interior == Some(w[1]) {
                adjacent = true;
            }
        });
        if !adjacent {
            return false;
        }
    }
    true
}

/// Length disintegration of the loop measure: `m_k = tr(P^k)/k`, plus the
/// spectral data needed for exact sampling.
pub struct LoopLengthSpectrum {
    pub kmax: usize,
    /// `m[k]` for `k = 0..=kmax` (`m[0] = m[1] = 0`).
    pub m: Vec<f64>,
    /// Safety-inflated spectral radius bound used in the tail estimate.
    pub rho_hat: f64,
    pub tail_mass: f64,
    eigvals: Vec<f64>,
    sq_modes: DMatrix<f64>, // Q(x,l)^2
    fingerprint: u64,
    len: usize,
}

impl LoopLengthSpectrum {
    pub fn total_mass(&self) -> f64 {
        self.m.iter().sum()
    }

    /// Poisson mass bound beyond length `k`:
    /// `N rho^{k+1} / ((k+1)(1-rho))`.
    pub fn tail_bound(&self, k: usize) -> f64 {
        tail_bound(self.len, self.rho_hat, k)
    }

    /// Diagonal of `P^k` (root weights of length-`k` loops).
    fn diag_pk(&self, k: usize) -> Vec<f64> {
        let powers: Vec<f64> = self.eigvals.iter().map(|l| l.powi(k as i32)).collect();
        (0..self.len)
            .map(|x| {
                let mut s = 0.0;
                for (l, &pw) in powers.iter().enumerate() {
                    s += self.sq_modes[(x, l)] * pw;
                }
                s.max(0.0)
            })
            .collect()
    }
}

fn tail_bound(len: usize, rho: f64, k: usize) -> f64 {
    len as f64 * rho.powi(k as i32 + 1) / ((k as f64 + 1.0) * (1.0 - rho))
}

/// Compute the loop-length spectrum. With `kmax = None` the truncation is
/// the smallest length whose tail bound drops below [`DEFAULT_TAIL_EPS`].
pub fn loop_mass_spectrum(g: &WeightedGraph, kmax: Option<usize>) -> Result<LoopLengthSpectrum> {
    let len = g.interior_len();
    if len == 0 {
        return Err(Error::invalid("graph", "no interior vertices"));
    }
    if len > SPECTRUM_LIMIT {
        return Err(Error::TooLarge(format!(
            "loop spectrum on {len} vertices (limit {SPECTRUM_LIMIT})"
        )));
    }
    if g.killed_vertices().is_empty() {
        return Err(Error::Singular("walk is not killed anywhere".into()));
    }
    // symmetrized transition matrix S(x,y) = C(x,y)/sqrt(lambda_x lambda_y)
    let mut s = DMatrix::<f64>::zeros(len, len);
    for x in 0..len {
        let lx = g.lambda(x);
        g.for_neighbors(x, |nb| {
            if let Some(y) = nb.interior {
                s[(x, y as usize)] = nb.cond / (lx * g.lambda(y as usize)).sqrt();
            }
        });
    }
    let eig = SymmetricEigen::new(s);
    let eigvals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let rho = eigvals.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    if rho >= 1.0 {
        return Err(Error::Singular(format!(
            "spectral radius {rho} >= 1; killing is not reachable"
        )));
    }
    let rho_hat = (1.01 * rho).min(0.5 * (1.0 + rho));
    let kmax = match kmax {
        Some(k) => {
            if k < 2 {
                return Err(Error::invalid("kmax", "must be at least 2"));
            }
            k
        }
        None => {
            let mut k = 2;
            while tail_bound(len, rho_hat, k) >= DEFAULT_TAIL_EPS {
                k += 1;
                if k > 1_000_000 {
                    return Err(Error::TooLarge(
                        "tail bound does not reach the target below k = 1e6".into(),
                    ));
                }
            }
            k
        }
    };
    let mut m = vec![0.0; kmax + 1];
    let mut pw: Vec<f64> = eigvals.iter().map(|l| l * l).collect();
    for k in 2..=kmax {
        m[k] = pw.iter().sum::<f64>().max(0.0) / k as f64;
        for (p, l) in pw.iter_mut().zip(eigvals.iter()) {
            *p *= l;
        }
    }
    let sq_modes = eig.eigenvectors.map(|v| v * v);
    Ok(LoopLengthSpectrum {
        kmax,
        m,
        rho_hat,
        tail_mass: tail_bound(len, rho_hat, kmax),
        eigvals,
        sq_modes,
        fingerprint: g.fingerprint(),
        len,
    })
}

/// Poisson multiset of rooted loops at intensity `alpha`.
#[derive(Debug, Clone)]
pub struct LoopSoupSample {
    pub loops: Vec<RootedLoop>,
    pub alpha: f64,
    pub kmax: usize,
    pub tail_mass: f64,
    fingerprint: u64,
}

impl LoopSoupSample {
    /// Hand-built soup over explicit loops, for constructed configurations.
    pub fn synthetic(g: &WeightedGraph, loops: Vec<RootedLoop>, alpha: f64, kmax: usize) -> Self {
        LoopSoupSample {
            loops,
            alpha,
            kmax,
            tail_mass: 0.0,
            fingerprint: g.fingerprint(),
        }
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn length_histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.kmax + 1];
        for lp in &self.loops {
            h[lp.jumps()] += 1;
        }
        h
    }
}

/// Draw one loop soup. Deterministic given the seed.
pub fn sample_loop_soup(
    g: &WeightedGraph,
    spectrum: &LoopLengthSpectrum,
    alpha: f64,
    seed: u64,
) -> Result<LoopSoupSample> {
    sample_loop_soup_at(g, spectrum, alpha, seed, 0)
}

/// Draw the soup of one replica of a seeded ensemble.
pub fn sample_loop_soup_at(
    g: &WeightedGraph,
    spectrum: &LoopLengthSpectrum,
    alpha: f64,
    master: u64,
    replica: u64,
) -> Result<LoopSoupSample> {
    if spectrum.fingerprint != g.fingerprint() {
        return Err(Error::GraphMismatch("spectrum from a different graph".into()));
    }
    if alpha < 0.0 {
        return Err(Error::invalid("alpha", "intensity must be nonnegative"));
    }
    let mut rng = replica_rng(master, replica, 2);
    let mut loops = Vec::new();
    for k in 2..=spectrum.kmax {
        let mean = alpha * spectrum.m[k];
        if mean <= 0.0 {
            continue;
        }
        let count = Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize;
        if count == 0 {
            continue;
        }
        let diag = spectrum.diag_pk(k);
        let mut cum = Vec::with_capacity(diag.len());
        let mut acc = 0.0;
        for &d in &diag {
            acc += d;
            cum.push(acc);
        }
        if acc <= 0.0 {
            continue;
        }
        for _ in 0..count {
            let t = rng.gen::<f64>() * acc;
            let root = cum.partition_point(|&c| c < t).min(diag.len() - 1);
            loops.push(sample_bridge_loop(g, root, k, &mut rng));
        }
    }
    for lp in &loops {
        debug_assert!(is_valid_loop(g, lp));
    }
    Ok(LoopSoupSample {
        loops,
        alpha,
        kmax: spectrum.kmax,
        tail_mass: alpha * spectrum.tail_mass,
        fingerprint: spectrum.fingerprint,
    })
}

/// `k`-step bridge from `root` back to itself: step `i` draws the next
/// vertex with weight `C(z_i, w) v_{k-i-1}(w)` where `v_m = P^m delta_root`.
fn sample_bridge_loop<R: Rng>(g: &WeightedGraph, root: usize, k: usize, rng: &mut R) -> RootedLoop {
    let len = g.interior_len();
    // v[m](w) = P^m(w, root)
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut v0 = vec![0.0; len];
    v0[root] = 1.0;
    v.push(v0);
    for _ in 1..k {
        let prev = v.last().unwrap();
        let mut next = vec![0.0; len];
        for w in 0..len {
            let mut s = 0.0;
            g.for_neighbors(w, |nb| {
                if let Some(o) = nb.interior {
                    s += nb.cond * prev[o as usize];
                }
            });
            next[w] = s / g.lambda(w);
        }
        v.push(next);
    }
    let mut path = Vec::with_capacity(k + 1);
    path.push(root as u32);
    let mut z = root;
    for i in 0..k {
        let rem = k - i - 1;
        let mut choices: Vec<(u32, f64)> = Vec::with_capacity(4);
        let mut total = 0.0;
        g.for_neighbors(z, |nb| {
            if let Some(o) = nb.interior {
                let wgt = nb.cond * v[rem][o as usize];
                if wgt > 0.0 {
                    choices.push((o, wgt));
                    total += wgt;
                }
            }
        });
        debug_assert!(total > 0.0, "bridge weight vanished at step {i}");
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
        path.push(pick);
        z = pick as usize;
    }
    RootedLoop { path }
}

/// Retain the loops doing at least `t` jumps.
pub fn filter_min_jumps(s: &LoopSoupSample, t: usize) -> LoopSoupSample {
    LoopSoupSample {
        loops: s.loops.iter().filter(|lp| lp.jumps() >= t).cloned().collect(),
        alpha: s.alpha,
        kmax: s.kmax,
        tail_mass: s.tail_mass,
        fingerprint: s.fingerprint,
    }
}

/// Cutoff threshold `ceil(n^theta)` for the scale-`n` lattice.
pub fn min_jump_cutoff(n: u32, theta: f64) -> usize {
    (n as f64).powf(theta).ceil() as usize
}

/// Union of two independent soups on the same graph; the result is a soup
/// at the summed intensity.
pub fn superpose(s1: &LoopSoupSample, s2: &LoopSoupSample) -> Result<LoopSoupSample> {
    if s1.fingerprint != s2.fingerprint {
        return Err(Error::GraphMismatch("soups on different graphs".into()));
    }
    if s1.kmax != s2.kmax {
        return Err(Error::GraphMismatch(format!(
            "soups truncated at different lengths ({} vs {})",
            s1.kmax, s2.kmax
        )));
    }
    let mut loops = s1.loops.clone();
    loops.extend(s2.loops.iter().cloned());
    Ok(LoopSoupSample {
        loops,
        alpha: s1.alpha + s2.alpha,
        kmax: s1.kmax,
        tail_mass: s1.tail_mass + s2.tail_mass,
        fingerprint: s1.fingerprint,
    })
}

//! The statistical verification battery: ten numbered checks covering the
//! Green asymptotics, the conductance limit, the cable edge rule, the
//! conditional connection law, the cable connection formula and its scaling
//! trend, the restriction martingale, the closed forms, the loop-soup
//! distributional identities and the contour geometry.
//!
//! Each check returns a [`StatReport`]; `run_all` executes the battery at
//! the `Fast` level (reduced samples and boxes, same logic, a few widened
//! tolerances) or the `Full` level with every threshold pinned as declared
//! in the check itself.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cluster::{estimate_p, ConnectionConfig, ClusterSource};
use crate::contour::{collection_distance, hausdorff, outer_contours};
use crate::error::Result;
use crate::excursion::{BoundaryInterval, ExcursionSampler};
use crate::gff::{open_probability, GffSampler};
use crate::graph::{
    build_half_plane, build_half_plane_scaled, build_quotient, Vertex, WeightedGraph,
};
use crate::harmonic::{ceq_from_green, ceq_n_q, green_table, height1_green_profile};
use crate::loopsoup::{loop_mass_spectrum, superpose};
use crate::sle::{
    closed_form_p, kappa_of_alpha, martingale_check, martingale_functional, u0_of_alpha,
    ClosedFormMode,
};
use crate::stats::{
    binomial_stderr, chi_square_poisson_gof, chi_square_two_sample, replica_rng, StatReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Reduced sample counts and boxes; finishes in well under a minute.
    Fast,
    /// The declared scales and tolerances.
    Full,
}

/// Execute the whole battery in order.
pub fn run_all(level: Level, seed: u64) -> Result<Vec<StatReport>> {
    Ok(vec![
        green_asymptotics(level)?,
        conductance_limit(level)?,
        edge_opening_oracle(level, seed)?,
        conditional_connection_law(level, seed)?,
        cable_connection_formula(level, seed)?,
        scaling_limit_trend(level, seed)?,
        restriction_martingale(level, seed)?,
        closed_form_identities(level)?,
        loop_soup_distributions(level, seed)?,
        geometry_suite(level, seed)?,
    ])
}

fn finish(
    name: &str,
    start: Instant,
    estimate: f64,
    stderr: f64,
    target: f64,
    z: f64,
    p_value: Option<f64>,
    pass: bool,
    detail: String,
) -> StatReport {
    StatReport {
        name: name.to_string(),
        estimate,
        stderr,
        target,
        z_score: z,
        p_value,
        pass,
        runtime_s: start.elapsed().as_secs_f64(),
        detail,
    }
}

/// C1: `pi j^2 G` along the first interior row stays within 5% of 1 for
/// `j in [10, 20]` on a >= 200x100 truncation (hit-probability
/// normalization), and the deviation shrinks when the box doubles.
pub fn green_asymptotics(level: Level) -> Result<StatReport> {
    let start = Instant::now();
    let (w, h) = match level {
        Level::Fast => (160, 80),
        Level::Full => (200, 100),
    };
    let max_dev = |w: i32, h: i32| -> Result<f64> {
        let g = build_half_plane(1, w, h)?;
        let rows = height1_green_profile(&g, 20)?;
        Ok(rows
            .iter()
            .filter(|&&(j, _, _)| (10..=20).contains(&j))
            .map(|&(_, _, pj2g)| (pj2g - 1.0).abs())
            .fold(0.0, f64::max))
    };
    let dev1 = max_dev(w, h)?;
    let dev2 = max_dev(2 * w, 2 * h)?;
    let tol = match level {
        Level::Fast => 0.08,
        Level::Full => 0.05,
    };
    let pass = dev1 <= tol && dev2 < dev1;
    Ok(finish(
        "C1 green-asymptotics",
        start,
        dev1,
        0.0,
        0.0,
        dev1 / tol,
        None,
        pass,
        format!("max |pi j^2 G - 1| = {dev1:.4} on {w}x{h}, {dev2:.4} after doubling (tol {tol})"),
    ))
}

/// C2: the conductance limit as declared:
/// `|(1/n) Ceq_n(4) * 8 pi / log 4 - 1| <= 0.15` at `n = 32`, improving to
/// `<= 0.08` at `n = 64`. The measured lattice limit of `(1/n) Ceq_n(q)` is
/// `log(q)/(2 pi)`, four times the declared constant, so this check records
/// an honest failure; the detail line reports the `2 pi` ratio, which does
/// converge as required.
pub fn conductance_limit(level: Level) -> Result<StatReport> {
    let start = Instant::now();
    let q = 4.0;
    let (n_lo, n_hi, tol_lo, tol_hi) = match level {
        Level::Fast => (8u32, 16u32, 0.15, 0.08),
        Level::Full => (32, 64, 0.15, 0.08),
    };
    let ratio_at = |n: u32| -> Result<(f64, f64)> {
        let g = build_half_plane_scaled(n, 12.0 * q, 8.0 * q)?;
        // left interval out to the last interior column: the finite-a proxy
        // for the full left half-axis
        let a = (g.box_w() - 1) as f64 / n as f64;
        let qg = build_quotient(g, a, q)?;
        let ceq = ceq_n_q(&qg)?;
        let per_n = ceq / n as f64;
        Ok((
            per_n * 8.0 * PI / q.ln(),
            per_n * 2.0 * PI / q.ln(),
        ))
    };
    let (stated_lo, twopi_lo) = ratio_at(n_lo)?;
    let (stated_hi, twopi_hi) = ratio_at(n_hi)?;
    let dev_lo = (stated_lo - 1.0).abs();
    let dev_hi = (stated_hi - 1.0).abs();
    let pass = dev_lo <= tol_lo && dev_hi <= tol_hi && dev_hi <= dev_lo;
    Ok(finish(
        "C2 conductance-limit",
        start,
        stated_hi,
        0.0,
        1.0,
        dev_hi / tol_hi,
        None,
        pass,
        format!(
            "stated 8pi gauge: {stated_lo:.4} (n={n_lo}), {stated_hi:.4} (n={n_hi}); \
             2pi gauge: {twopi_lo:.4}, {twopi_hi:.4}"
        ),
    ))
}

/// C3: fine-grid Brownian-bridge zero-avoidance oracle for the cable edge
/// rule: a variance-2 bridge from 1 to 1 over an edge of conductance 1/2
/// (length 1) avoids zero with probability `1 - e^{-1}`.
pub fn edge_opening_oracle(level: Level, seed: u64) -> Result<StatReport> {
    let start = Instant::now();
    let (bridges, steps) = match level {
        Level::Fast => (3_000usize, 400usize),
        Level::Full => (10_000, 1_000),
    };
    let (c, a, b) = (0.5, 1.0, 1.0);
    let r = 1.0 / (2.0 * c);
    let dt = r / steps as f64;
    let mut survived = 0usize;
    for path in 0..bridges {
        let mut rng = replica_rng(seed, path as u64, 7);
        let mut x = a;
        let mut alive = x > 0.0;
        for k in 0..steps {
            if !alive {
                break;
            }
            let remain = r - k as f64 * dt;
            let mean = x + (b - x) * dt / remain;
            let var = 2.0 * dt * (remain - dt) / remain;
            let next = mean + rng.sample::<f64, _>(StandardNormal) * var.max(0.0).sqrt();
            if next <= 0.0 || x <= 0.0 {
                alive = false;
            } else {
                // exact crossing probability of the variance-2 bridge
                // within the substep
                let p_cross = (-x * next / dt).exp();
                if rng.gen::<f64>() < p_cross {
                    alive = false;
                }
            }
            x = next;
        }
        if alive {
            survived += 1;
        }
    }
    let p_hat = survived as f64 / bridges as f64;
    let target = open_probability(c, a, b);
    let se = binomial_stderr(target, bridges);
    let z = (p_hat - target) / se;
    Ok(finish(
        "C3 edge-opening-oracle",
        start,
        p_hat,
        se,
        target,
        z,
        None,
        z.abs() <= 3.0,
        format!("{bridges} bridges x {steps} steps"),
    ))
}

/// C4: binned conditional law on a six-vertex graph:
/// `P(different clusters | |phi_x|, |phi_y|)` matches
/// `exp(-2 Ceq sqrt(uv)) / cosh(2 Ceq sqrt(uv))` with `u = a^2/2`,
/// `v = b^2/2` at the bin centres, within 3 SE plus a first-order bin-width
/// allowance, in every cell holding at least 2000 samples.
pub fn conditional_connection_law(level: Level, seed: u64) -> Result<StatReport> {
    let start = Instant::now();
    // fast level: fewer samples, coarser bins and a widened gate
    let (samples, min_cell, bins, gate) = match level {
        Level::Fast => (120_000usize, 400usize, 10usize, 3.5),
        Level::Full => (1_000_000, 2_000, 20, 3.0),
    };
    let g = build_half_plane(1, 2, 3)?; // six interior vertices
    let x = g.index_of(-1, 1).unwrap();
    let y = g.index_of(1, 2).unwrap();
    let table = green_table(&g)?;
    let eq = ceq_from_green(table.entry(x, x), table.entry(x, y), table.entry(y, y))?;
    let sampler = GffSampler::new(&g)?;
    let sx = table.entry(x, x).sqrt();
    let sy = table.entry(y, y).sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let edge_at = |sigma: f64, frac: f64| -> f64 {
        if frac >= 1.0 {
            f64::INFINITY
        } else {
            sigma * normal.inverse_cdf(0.5 + 0.5 * frac)
        }
    };
    let centre = |sigma: f64, k: usize| edge_at(sigma, (k as f64 + 0.5) / bins as f64);
    let formula = |a: f64, b: f64| -> f64 {
        let k = 2.0 * eq.ceq * ((a * a / 2.0) * (b * b / 2.0)).sqrt();
        (-k).exp() / k.cosh()
    };
    let bin_of = |sigma: f64, val: f64| -> usize {
        let u = 2.0 * normal.cdf(val / sigma) - 1.0;
        ((u * bins as f64) as usize).min(bins - 1)
    };
    let mut count = vec![0u32; bins * bins];
    let mut diff = vec![0u32; bins * bins];
    for r in 0..samples as u64 {
        let mut s = sampler.sample_at(seed, r);
        sampler.mark_at(&mut s, seed, r);
        let part = sampler.sign_clusters(&s)?;
        let (ax, by) = (s.phi[x].abs(), s.phi[y].abs());
        let cell = bin_of(sx, ax) * bins + bin_of(sy, by);
        count[cell] += 1;
        if !part.same_cluster(x, y) {
            diff[cell] += 1;
        }
    }
    let mut max_excess: f64 = 0.0;
    let mut tested = 0usize;
    let mut worst = String::new();
    for i in 0..bins {
        for j in 0..bins {
            let cell = i * bins + j;
            if (count[cell] as usize) < min_cell {
                continue;
            }
            tested += 1;
            let (ac, bc) = (centre(sx, i), centre(sy, j));
            let f_c = formula(ac, bc);
            let p_hat = diff[cell] as f64 / count[cell] as f64;
            let se = (f_c * (1.0 - f_c) / count[cell] as f64).sqrt().max(1e-12);
            // first-order allowance: formula swing across the cell corners
            let lo_i = edge_at(sx, i as f64 / bins as f64);
            let hi_i = edge_at(sx, ((i + 1) as f64 / bins as f64).min(0.9995));
            let lo_j = edge_at(sy, j as f64 / bins as f64);
            let hi_j = edge_at(sy, ((j + 1) as f64 / bins as f64).min(0.9995));
            let mut allow: f64 = 0.0;
            for aa in [lo_i, hi_i] {
                for bb in [lo_j, hi_j] {
                    allow = allow.max((formula(aa, bb) - f_c).abs());
                }
            }
            let excess = ((p_hat - f_c).abs() - allow).max(0.0) / se;
            if excess > max_excess {
                max_excess = excess;
                worst = format!(
                    "cell ({i},{j}): p_hat {p_hat:.4} formula {f_c:.4} allow {allow:.4} n {}",
                    count[cell]
                );
            }
        }
    }
    let pass = tested > 0 && max_excess <= gate;
    Ok(finish(
        "C4 conditional-connection-law",
        start,
        max_excess,
        1.0,
        0.0,
        max_excess,
        None,
        pass,
        format!("{tested} cells with >= {min_cell} samples; worst {worst}; ceq {:.4}", eq.ceq),
    ))
}

/// C5: cable-model Monte Carlo against
/// `1 - exp(-2 Ceq_{n,a}(q) 8 pi sqrt(uv) / n)` with the same-truncation
/// conductance, at `n = 8, q = 3, a = 4, u = v = 1/4` on the 12q box.
pub fn cable_connection_formula(level: Level, seed: u64) -> Result<StatReport> {
    let start = Instant::now();
    let (n, samples) = match level {
        Level::Fast => (4u32, 1_500usize),
        Level::Full => (8, 10_000),
    };
    let cfg = ConnectionConfig::metric(n, 3.0, 4.0, 0.25, 0.25);
    let est = estimate_p(&cfg, seed, samples)?;
    let formula = est.formula.unwrap();
    let z = (est.p_hat - formula) / est.stderr;
    Ok(finish(
        "C5 cable-connection-formula",
        start,
        est.p_hat,
        est.stderr,
        formula,
        z,
        None,
        z.abs() <= 3.0,
        format!(
            "n={n}, N={samples}, ceq={:.4}, frame contact rate {:.4}",
            est.ceq.unwrap(),
            est.frame_contact_rate
        ),
    ))
}

/// C6: the closed scaling form evaluates to exactly 1/2 at
/// `(u, v, q) = (1/4, 1/4, 4)`, and the cable estimates are reported across
/// a doubling of `n` as a monotone gap diagnostic (no hard tolerance).
pub fn scaling_limit_trend(level: Level, seed: u64) -> Result<StatReport> {
    let start = Instant::now();
    let q = 4.0;
    let formula = closed_form_p(0.5, 0.25, 0.25, q, ClosedFormMode::MetricLimit)?;
    let exact = (formula - 0.5).abs() < 1e-15;
    let (ns, samples): (&[u32], usize) = match level {
        Level::Fast => (&[2, 4], 1_000),
        Level::Full => (&[2, 4, 8], 4_000),
    };
    let mut gaps = Vec::new();
    for &n in ns {
        let cfg = ConnectionConfig::metric(n, q, 4.0, 0.25, 0.25);
        let est = estimate_p(&cfg, seed, samples)?;
        gaps.push(format!(
            "n={n}: p_hat={:.4}+-{:.4} gap={:+.4}",
            est.p_hat,
            est.stderr,
            est.p_hat - formula
        ));
    }
    Ok(finish(
        "C6 scaling-limit-trend",
        start,
        formula,
        0.0,
        0.5,
        0.0,
        None,
        exact,
        gaps.join("; "),
    ))
}

/// C7: restriction martingale at `kappa = 4, v = 1, q0 = 2`: estimates at
/// `t in {0.1, 0.3, 0.5}` all within 3 SE plus the Richardson allowance of
/// the target 1/2, mutually consistent, and the non-solution exponent
/// deviates by more than 5 SE at `t = 0.5`.
pub fn restriction_martingale(level: Level, seed: u64) -> Result<StatReport> {
    let start = Instant::now();
    let (paths, dt) = match level {
        Level::Fast => (2_000usize, 5e-4),
        Level::Full => (10_000, 1e-4),
    };
    let (kappa, v, q0) = (4.0, 1.0, 2.0);
    let target = 0.5;
    let mut pass = true;
    let mut detail = Vec::new();
    let mut results = Vec::new();
    for &t in &[0.1, 0.3, 0.5] {
        let coarse = martingale_check(kappa, v, q0, t, paths, dt, seed)?;
        let fine = martingale_check(kappa, v, q0, t, paths, dt / 2.0, seed + 1)?;
        let allowance = (coarse.mean - fine.mean).abs();
        let band = 3.0 * coarse.stderr + allowance;
        if (coarse.mean - target).abs() > band {
            pass = false;
        }
        detail.push(format!(
            "t={t}: mean={:.4}+-{:.4} richardson={:.4}",
            coarse.mean, coarse.stderr, allowance
        ));
        results.push(coarse);
    }
    for i in 0..results.len() {
        for j in (i + 1)..results.len() {
            let d = (results[i].mean - results[j].mean).abs();
            let se = (results[i].stderr.powi(2) + results[j].stderr.powi(2)).sqrt();
            if d > 3.0 * se + 0.01 {
                pass = false;
                detail.push(format!("flatness violated between t pair ({i},{j})"));
            }
        }
    }
    // power: non-solution exponent must be rejected
    let power = martingale_functional(kappa, v, q0, 0.5, paths, dt, seed, v.sqrt() + 0.5)?;
    let z_power = (power.mean - power.target) / power.stderr;
    if z_power.abs() <= 5.0 {
        pass = false;
    }
    detail.push(format!("power |z| = {:.1}", z_power.abs()));
    let last = &results[2];
    let z = (last.mean - target) / last.stderr;
    Ok(finish(
        "C7 restriction-martingale",
        start,
        last.mean,
        last.stderr,
        target,
        z,
        None,
        pass,
        detail.join("; "),
    ))
}

/// C8: the closed forms: quadratic round trip below 1e-12 on 100 intensity
/// values, `kappa(1/2) = 4` exactly, and the chordal special point
/// reproducing the scaling form identically.
pub fn closed_form_identities(_level: Level) -> Result<StatReport> {
    let start = Instant::now();
    let mut max_resid: f64 = 0.0;
    for i in 1..=100 {
        let alpha = 0.5 * i as f64 / 100.0;
        let kappa = kappa_of_alpha(alpha)?;
        let back = (3.0 * kappa - 8.0) * (6.0 - kappa) / (2.0 * kappa);
        max_resid = max_resid.max((back - 2.0 * alpha).abs());
    }
    let kappa_half = kappa_of_alpha(0.5)?;
    let u0 = u0_of_alpha(0.5)?;
    let mut special_ok = true;
    for &v in &[0.2, 1.0, 2.5, 7.0] {
        let a = closed_form_p(0.5, u0, v, 3.0, ClosedFormMode::Kappa4Special)?;
        let b = closed_form_p(0.5, u0, v, 3.0, ClosedFormMode::MetricLimit)?;
        if (a - b).abs() > 1e-15 {
            special_ok = false;
        }
    }
    let pass = max_resid < 1e-12 && kappa_half == 4.0 && u0 == 0.25 && special_ok;
    Ok(finish(
        "C8 closed-form-identities",
        start,
        max_resid,
        0.0,
        0.0,
        max_resid / 1e-12,
        None,
        pass,
        format!("kappa(1/2) = {kappa_half}, u0(1/2) = {u0}"),
    ))
}

/// C9: loop-soup distributional suite: Poisson length histogram chi-square,
/// superposition two-sample test, and the tiny-graph enumeration oracle.
pub fn loop_soup_distributions(level: Level, seed: u64) -> Result<StatReport> {
    let start = Instant::now();
    let soups = match level {
        Level::Fast => 1_500usize,
        Level::Full => 10_000,
    };
    // (a) goodness of fit on a 10x5 box at intensity 1/2
    let g = build_half_plane(1, 5, 5)?;
    let sp = loop_mass_spectrum(&g, None)?;
    let mut hist = vec![0.0; sp.kmax + 1];
    let mut hist_sum = vec![0.0; sp.kmax + 1];
    for r in 0..soups as u64 {
        let direct = crate::loopsoup::sample_loop_soup_at(&g, &sp, 0.5, seed, r)?;
        for lp in &direct.loops {
            hist[lp.jumps()] += 1.0;
        }
        let s1 = crate::loopsoup::sample_loop_soup_at(&g, &sp, 0.2, seed ^ 0x9e37, r)?;
        let s2 = crate::loopsoup::sample_loop_soup_at(&g, &sp, 0.3, seed ^ 0x7f4a, r)?;
        for lp in &superpose(&s1, &s2)?.loops {
            hist_sum[lp.jumps()] += 1.0;
        }
    }
    let expected: Vec<f64> = (0..=sp.kmax).map(|k| 0.5 * sp.m[k] * soups as f64).collect();
    let gof = chi_square_poisson_gof(&hist[2..], &expected[2..], 5.0);
    let two = chi_square_two_sample(&hist[2..], &hist_sum[2..], 5.0);

    // (b) enumeration oracle on a four-vertex ring with escape
    let ring = WeightedGraph::from_parts(
        1,
        vec![
            Vertex::new(0, 1),
            Vertex::new(1, 1),
            Vertex::new(1, 2),
            Vertex::new(0, 2),
        ],
        &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)],
        &[
            (0, Vertex::new(0, 0), 2.0),
            (1, Vertex::new(1, 0), 2.0),
            (2, Vertex::new(2, 2), 2.0),
            (3, Vertex::new(-1, 2), 2.0),
        ],
    )?;
    let ring_sp = loop_mass_spectrum(&ring, Some(6))?;
    let alpha = 1.0;
    let ring_soups = soups * 2;
    let mut counts: std::collections::HashMap<Vec<u32>, f64> = std::collections::HashMap::new();
    for r in 0..ring_soups as u64 {
        let soup = crate::loopsoup::sample_loop_soup_at(&ring, &ring_sp, alpha, seed ^ 0x51c2, r)?;
        for lp in &soup.loops {
            *counts.entry(lp.path.clone()).or_default() += 1.0;
        }
    }
    // enumerate all rooted loops with <= 6 jumps and their weights
    let mut oracle: Vec<(Vec<u32>, f64)> = Vec::new();
    let lambda = 4.0;
    fn enumerate(
        g: &WeightedGraph,
        path: &mut Vec<u32>,
        weight: f64,
        kmax: usize,
        lambda: f64,
        out: &mut Vec<(Vec<u32>, f64)>,
    ) {
        let last = *path.last().unwrap() as usize;
        if path.len() > 1 && path[0] == *path.last().unwrap() && path.len() >= 3 {
            out.push((path.clone(), weight / (path.len() - 1) as f64));
        }
        if path.len() > kmax {
            return;
        }
        let mut nbrs = Vec::new();
        g.for_neighbors(last, |nb| {
            if let Some(o) = nb.interior {
                nbrs.push((o, nb.cond));
            }
        });
        for (o, c) in nbrs {
            path.push(o);
            enumerate(g, path, weight * c / lambda, kmax, lambda, out);
            path.pop();
        }
    }
    for root in 0..4u32 {
        let mut path = vec![root];
        enumerate(&ring, &mut path, 1.0, 6, lambda, &mut oracle);
    }
    let mut oracle_ok = true;
    let mut worst_z: f64 = 0.0;
    for (path, mass) in &oracle {
        let mean = alpha * mass * ring_soups as f64;
        let obs = counts.get(path).copied().unwrap_or(0.0);
        let se = mean.sqrt().max(1.0);
        let z = (obs - mean).abs() / se;
        worst_z = worst_z.max(z);
        if z > 3.0 {
            oracle_ok = false;
        }
    }
    let pass = gof.p_value > 0.01 && two.p_value > 0.01 && oracle_ok;
    Ok(finish(
        "C9 loop-soup-distributions",
        start,
        gof.p_value,
        0.0,
        0.5,
        worst_z,
        Some(two.p_value),
        pass,
        format!(
            "gof p={:.3}, superposition p={:.3}, oracle loops={}, worst |z|={:.2}",
            gof.p_value,
            two.p_value,
            oracle.len(),
            worst_z
        ),
    ))
}

/// C10: geometry suite: contour families pass the disjoint/non-nested
/// assertions on GFF samples, excursion endpoint symmetry and time reversal
/// hold, and the collection distance behaves like a metric on random
/// triples.
pub fn geometry_suite(level: Level, seed: u64) -> Result<StatReport> {
    let start = Instant::now();
    let families = match level {
        Level::Fast => 40usize,
        Level::Full => 200,
    };
    let g = build_half_plane_scaled(4, 24.0, 20.0)?;
    let sampler = GffSampler::new(&g)?;
    let mut censored_total = 0usize;
    let mut contour_total = 0usize;
    let mut geometry_ok = true;
    for r in 0..families as u64 {
        let mut s = sampler.sample_at(seed, r);
        sampler.mark_at(&mut s, seed, r);
        let part = sampler.sign_clusters(&s)?;
        let fam = outer_contours(
            &g,
            ClusterSource::Field {
                partition: &part,
                edges: sampler.edges(),
                open: s.edge_open.as_ref().unwrap(),
            },
            &[],
        )?;
        censored_total += fam.censored.len();
        contour_total += fam.contours.len() + fam.censored.len();
        // disjointness: quarter-grid points may not repeat across contours
        let mut seen: std::collections::HashSet<(i64, i64)> = std::collections::HashSet::new();
        'fam: for c in &fam.contours {
            for p in &c.polyline[..c.polyline.len() - 1] {
                let key = (
                    (p[0] * 4.0 * g.n() as f64).round() as i64,
                    (p[1] * 4.0 * g.n() as f64).round() as i64,
                );
                if !seen.insert(key) {
                    geometry_ok = false;
                    break 'fam;
                }
            }
        }
        // non-nesting: a representative vertex of each contour lies inside
        // no other contour
        for (i, c) in fam.contours.iter().enumerate() {
            let v = g.vertex(c.enclosed_vertices[0] as usize);
            let rep = [v.i as f64 / g.n() as f64, v.j as f64 / g.n() as f64];
            for (j, other) in fam.contours.iter().enumerate() {
                if i != j && other.contains(rep) {
                    geometry_ok = false;
                }
            }
        }
    }
    let censor_rate = censored_total as f64 / contour_total.max(1) as f64;

    // excursion symmetry and time reversal
    let ge = build_half_plane(1, 14, 7)?;
    let sampler_e = ExcursionSampler::new(&ge, BoundaryInterval::new(-2.0, 2.0), 0.25)?;
    let m = sampler_e.intensity_matrix();
    let mut sym_ok = true;
    for a in 0..m.nrows() {
        for b in 0..m.ncols() {
            if (m[(a, b)] - m[(b, a)]).abs() > 1e-14 {
                sym_ok = false;
            }
        }
    }
    let k = m.nrows();
    let mut pair_counts = vec![0.0; k * k];
    let reps = match level {
        Level::Fast => 800u64,
        Level::Full => 4_000,
    };
    for r in 0..reps {
        let proc = sampler_e.sample(&ge, seed, r, 3)?;
        for e in &proc.excursions {
            let a = sampler_e.columns.iter().position(|&c| c == e.start.i).unwrap();
            let b = sampler_e.columns.iter().position(|&c| c == e.end.i).unwrap();
            pair_counts[a * k + b] += 1.0;
        }
    }
    let reversed: Vec<f64> = (0..k * k).map(|f| pair_counts[(f % k) * k + f / k]).collect();
    let reversal = chi_square_two_sample(&pair_counts, &reversed, 5.0);

    // collection-distance metric axioms on random triples
    let mut metric_ok = true;
    let mut rng = replica_rng(seed, 0, 9);
    for _ in 0..30 {
        let mut mk = || -> Vec<Vec<[f64; 2]>> {
            (0..3)
                .map(|_| {
                    (0..5)
                        .map(|_| [rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0])
                        .collect()
                })
                .collect()
        };
        let (a, b, c) = (mk(), mk(), mk());
        let dab = collection_distance(&a, &b);
        let dba = collection_distance(&b, &a);
        let dac = collection_distance(&a, &c);
        let dbc = collection_distance(&b, &c);
        if (dab - dba).abs() > 1e-12 {
            metric_ok = false;
        }
        if collection_distance(&a, &a) != 0.0 {
            metric_ok = false;
        }
        if dac > dab + dbc + 1e-12 {
            metric_ok = false;
        }
        // sanity: pairwise hausdorff obeys the same triangle logic
        if hausdorff(&a[0], &c[0]) > hausdorff(&a[0], &b[0]) + hausdorff(&b[0], &c[0]) + 1e-12 {
            metric_ok = false;
        }
    }
    let pass = geometry_ok && sym_ok && reversal.p_value > 0.01 && metric_ok && censor_rate < 0.05;
    Ok(finish(
        "C10 geometry-suite",
        start,
        censor_rate,
        0.0,
        0.0,
        0.0,
        Some(reversal.p_value),
        pass,
        format!(
            "{families} families, {contour_total} contours, censor rate {censor_rate:.4}, \
             reversal p={:.3}",
            reversal.p_value
        ),
    ))
}

/// The mutation power check of the harness: a sign-flipped edge-opening
/// rule must blow the conditional-law comparison far outside its band.
pub fn edge_rule_mutation_power(seed: u64) -> Result<f64> {
    let g = build_half_plane(1, 2, 3)?;
    let x = g.index_of(-1, 1).unwrap();
    let y = g.index_of(1, 2).unwrap();
    let table = green_table(&g)?;
    let eq = ceq_from_green(table.entry(x, x), table.entry(x, y), table.entry(y, y))?;
    let sampler = GffSampler::new(&g)?;
    let samples = 40_000;
    let mut count = 0u32;
    let mut diff = 0u32;
    for r in 0..samples as u64 {
        let mut s = sampler.sample_at(seed, r);
        // tampered rule: flipped sign in the exponent, clamped
        sampler.mark_with_rule(&mut s, seed.wrapping_add(r), |c, px, py| {
            (1.0 - (2.0 * c * px * py).exp()).clamp(0.0, 1.0)
        });
        let part = sampler.sign_clusters(&s)?;
        let (ax, by) = (s.phi[x].abs(), s.phi[y].abs());
        if (0.5..1.5).contains(&ax) && (0.5..1.5).contains(&by) {
            count += 1;
            if !part.same_cluster(x, y) {
                diff += 1;
            }
        }
    }
    let p_hat = diff as f64 / count as f64;
    // compare against the formula at the band centre |phi| = 1
    let k = 2.0 * eq.ceq * ((1.0 / 2.0) * (1.0 / 2.0_f64)).sqrt();
    let f = (-k).exp() / k.cosh();
    let se = (f * (1.0 - f) / count as f64).sqrt();
    Ok((p_hat - f) / se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_level_battery_smoke() {
        let reports = run_all(Level::Fast, 2024).unwrap();
        assert_eq!(reports.len(), 10);
        for r in &reports {
            println!("{}", r.line());
        }
    }

    #[test]
    fn tampered_edge_rule_is_detected() {
        let z = edge_rule_mutation_power(5).unwrap();
        assert!(z.abs() > 5.0, "mutation z = {z}");
    }
}

//! Property-style invariants spanning modules.

use looplab_core::cluster::{estimate_p, two_point_connection, ConnectionConfig, EstimatorMode};
use looplab_core::contour::collection_distance;
use looplab_core::graph::build_half_plane;
use looplab_core::loopsoup::loop_mass_spectrum;
use looplab_core::sle::{alpha_of_kappa, kappa_of_alpha};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kappa_alpha_round_trip(alpha in 1e-6f64..=0.5) {
        let kappa = kappa_of_alpha(alpha).unwrap();
        prop_assert!((8.0 / 3.0..=4.0).contains(&kappa));
        prop_assert!((alpha_of_kappa(kappa) - alpha).abs() < 1e-10);
    }

    #[test]
    fn collection_distance_metric_axioms(
        pts in prop::collection::vec(
            prop::collection::vec((0.0f64..8.0, 0.0f64..8.0), 1..6),
            3..9,
        )
    ) {
        let sets: Vec<Vec<[f64; 2]>> = pts
            .iter()
            .map(|s| s.iter().map(|&(x, y)| [x, y]).collect())
            .collect();
        let third = sets.len() / 3;
        let (a, b, c) = (
            sets[..third.max(1)].to_vec(),
            sets[third.max(1)..(2 * third).max(2)].to_vec(),
            sets[(2 * third).max(2)..].to_vec(),
        );
        prop_assert_eq!(collection_distance(&a, &a), 0.0);
        let dab = collection_distance(&a, &b);
        prop_assert!((dab - collection_distance(&b, &a)).abs() < 1e-12 || dab.is_infinite());
        if a.len() == b.len() && b.len() == c.len() {
            let dac = collection_distance(&a, &c);
            let dbc = collection_distance(&b, &c);
            prop_assert!(dac <= dab + dbc + 1e-12);
        }
    }

    #[test]
    fn spectrum_tail_bound_dominates(kmax in 6usize..20) {
        let g = build_half_plane(1, 3, 3).unwrap();
        let sp = loop_mass_spectrum(&g, Some(kmax)).unwrap();
        for k in 2..kmax {
            let tail: f64 = (k + 1..=kmax).map(|j| sp.m[j]).sum();
            prop_assert!(tail <= sp.tail_bound(k) + 1e-12);
        }
    }
}

/// The connection probability rises with each of q, u and v.
#[test]
fn connection_probability_monotone_in_parameters() {
    let base = |q: f64, u: f64, v: f64| -> (f64, f64) {
        let mut cfg = ConnectionConfig::metric(2, q, 1.0, u, v);
        cfg.box_scaled = Some((8.0, 6.0));
        let est = estimate_p(&cfg, 7, 1_500).unwrap();
        (est.p_hat, est.stderr)
    };
    let (p_q1, se_q1) = base(1.5, 0.25, 0.25);
    let (p_q2, se_q2) = base(2.5, 0.25, 0.25);
    assert!(
        p_q2 >= p_q1 - 2.0 * (se_q1 * se_q1 + se_q2 * se_q2).sqrt(),
        "q sweep broke monotonicity: {p_q1} -> {p_q2}"
    );
    let (p_u1, se_u1) = base(2.0, 0.1, 0.25);
    let (p_u2, se_u2) = base(2.0, 0.4, 0.25);
    assert!(
        p_u2 >= p_u1 - 2.0 * (se_u1 * se_u1 + se_u2 * se_u2).sqrt(),
        "u sweep broke monotonicity: {p_u1} -> {p_u2}"
    );
    let (p_v1, se_v1) = base(2.0, 0.25, 0.1);
    let (p_v2, se_v2) = base(2.0, 0.25, 0.4);
    assert!(
        p_v2 >= p_v1 - 2.0 * (se_v1 * se_v1 + se_v2 * se_v2).sqrt(),
        "v sweep broke monotonicity: {p_v1} -> {p_v2}"
    );
}

/// Increasing the loop-length truncation by half moves a discrete
/// connection estimate by no more than the discarded Poisson mass plus
/// noise.
#[test]
fn tail_mass_bound_controls_downstream_estimates() {
    let g = build_half_plane(1, 4, 4).unwrap();
    let sp_full = loop_mass_spectrum(&g, None).unwrap();
    let k0 = sp_full.kmax;
    let x = g.index_of(-2, 2).unwrap();
    let y = g.index_of(2, 2).unwrap();
    let run = |kmax: usize, seed: u64| -> (f64, f64) {
        let g = build_half_plane(1, 4, 4).unwrap();
        let _sp = loop_mass_spectrum(&g, Some(kmax)).unwrap();
        // route through two_point_connection which builds its own spectrum;
        // emulate by sampling soups at the given kmax directly
        let mut hits = 0usize;
        let samples = 3000usize;
        for r in 0..samples as u64 {
            let soup =
                looplab_core::loopsoup::sample_loop_soup_at(&g, &_sp, 0.5, seed, r).unwrap();
            let mut uf = looplab_core::UnionFind::new(g.interior_len());
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
        let p = hits as f64 / samples as f64;
        (p, (p * (1.0 - p) / samples as f64).sqrt())
    };
    let (p1, se1) = run(k0, 11);
    let (p2, se2) = run(k0 + k0 / 2, 11);
    let budget = 0.5 * sp_full.tail_mass + 3.0 * (se1 * se1 + se2 * se2).sqrt();
    assert!(
        (p1 - p2).abs() <= budget,
        "kmax sensitivity {p1} vs {p2} beyond budget {budget}"
    );
}

/// Discrete soup connectivity cannot exceed cable connectivity at the
/// critical intensity.
#[test]
fn discrete_below_metric_connectivity() {
    let g = build_half_plane(2, 5, 4).unwrap();
    let x = g.index_of(-2, 2).unwrap();
    let y = g.index_of(2, 2).unwrap();
    let (pd, sed) = two_point_connection(&g, EstimatorMode::Discrete, 0.5, x, y, 3000, 3).unwrap();
    let (pm, sem) = two_point_connection(&g, EstimatorMode::Metric, 0.5, x, y, 3000, 3).unwrap();
    assert!(pd <= pm + 3.0 * (sed * sed + sem * sem).sqrt());
}

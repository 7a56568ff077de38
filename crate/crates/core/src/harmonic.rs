//! Green's functions, boundary hitting kernels and equivalent conductances
//! of the killed walk.
//!
//! Normalization. `GreenTable` holds the inverse of the conductance matrix
//! `M` (the covariance of the free field). The visit-counting Green's
//! function of the discrete walk is `M^{-1}(x,y) * lambda(y)`; the single
//! conversion is exercised by the one-vertex unit test below. Asymptotic
//! checks along the first interior row use the hit-probability
//! normalization `walk/4`, which equals the probability of exiting the half
//! plane right below the target site and decays like `1/(pi j^2)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{QuotientGraph, Vertex, WeightedGraph};
use crate::solve::{assemble_dense, boundary_rhs, solve_dirichlet};

/// Dense table of `M^{-1}` over interior vertices.
#[derive(Debug, Clone)]
pub struct GreenTable {
    values: DMatrix<f64>,
    lambda: Vec<f64>,
    fingerprint: u64,
}

impl GreenTable {
    /// Covariance-gauge entry `M^{-1}(x, y)`.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.values[(x, y)]
    }

    /// Visit-counting Green's function of the discrete walk:
    /// `G(x,y) = M^{-1}(x,y) * lambda(y)`.
    pub fn walk(&self, x: usize, y: usize) -> f64 {
        self.values[(x, y)] * self.lambda[y]
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Invert the conductance matrix of a small graph.
pub fn green_table(g: &WeightedGraph) -> Result<GreenTable> {
    let len = g.interior_len();
    if len == 0 {
        return Err(Error::invalid("graph", "no interior vertices"));
    }
    if g.killed_vertices().is_empty() {
        return Err(Error::Singular("graph has no killing anywhere".into()));
    }
    let m = assemble_dense(g)?;
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("conductance matrix not positive definite".into()))?;
    let mut values = DMatrix::<f64>::identity(len, len);
    chol.solve_mut(&mut values);
    // symmetrize away factorization round-off
    for i in 0..len {
        for j in (i + 1)..len {
            let v = 0.5 * (values[(i, j)] + values[(j, i)]);
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    let resid = (&m * &values - DMatrix::<f64>::identity(len, len)).norm() / (len as f64).sqrt();
    if resid > 1e-8 {
        return Err(Error::SolverTolerance {
            residual: resid,
            tol: 1e-8,
        });
    }
    let lambda = (0..len).map(|v| g.lambda(v)).collect();
    Ok(GreenTable {
        values,
        lambda,
        fingerprint: g.fingerprint(),
    })
}

/// One column of `M^{-1}`, usable on large grids.
pub fn green_column(g: &WeightedGraph, source: usize) -> Result<Vec<f64>> {
    let mut rhs = vec![0.0; g.interior_len()];
    rhs[source] = 1.0;
    solve_dirichlet(g, &rhs)
}

/// Hit-probability-normalized Green value between `(0,1)` and `(j,1)`:
/// `walk/4`, asymptotically `1/(pi j^2)`. `column` is a precomputed
/// `M^{-1}` column of the source `(0,1)`.
pub fn height1_green_profile(g: &WeightedGraph, jmax: i32) -> Result<Vec<(i32, f64, f64)>> {
    let src = g
        .index_of(0, 1)
        .ok_or_else(|| Error::invalid("graph", "(0,1) is not interior"))?;
    let col = green_column(g, src)?;
    let mut rows = Vec::new();
    for j in 1..=jmax {
        let idx = g
            .index_of(j, 1)
            .ok_or_else(|| Error::invalid("jmax", format!("({j},1) outside interior")))?;
        let walk = col[idx] * g.lambda(idx);
        let hit = walk / 4.0;
        rows.push((j, hit, std::f64::consts::PI * (j as f64) * (j as f64) * hit));
    }
    Ok(rows)
}

/// Exit distribution of the walk started at an interior vertex: probability
/// of being absorbed at each killed vertex, via one harmonic solve.
pub fn boundary_hit_kernel(g: &WeightedGraph, start: Vertex) -> Result<Vec<(Vertex, f64)>> {
    let src = g
        .index_of(start.i, start.j)
        .ok_or_else(|| Error::invalid("start", "start vertex must be interior"))?;
    let col = green_column(g, src)?;
    let killed = g.killed_vertices();
    let mut probs: std::collections::HashMap<(i32, i32), f64> =
        killed.iter().map(|v| ((v.i, v.j), 0.0)).collect();
    for z in 0..g.interior_len() {
        g.for_neighbors(z, |nb| {
            if nb.interior.is_none() {
                if let Some(p) = probs.get_mut(&(nb.vertex.i, nb.vertex.j)) {
                    *p += col[z] * nb.cond;
                }
            }
        });
    }
    Ok(killed
        .into_iter()
        .map(|v| (v, probs[&(v.i, v.j)]))
        .collect())
}

/// Conductances of the three-node network electrically equivalent to the
/// graph seen from a pair of vertices, with the killed set as the third
/// node.
#[derive(Debug, Clone, Copy)]
pub struct EqConductance {
    pub ceq: f64,
    pub chi_x: f64,
    pub chi_y: f64,
}

impl EqConductance {
    /// A vanishing equivalent conductance signals a disconnected pair.
    pub fn disconnected(&self) -> bool {
        self.ceq <= 0.0
    }
}

/// Invert a 2x2 Green submatrix and read off the equivalent network.
pub fn ceq_from_green(gxx: f64, gxy: f64, gyy: f64) -> Result<EqConductance> {
    let det = gxx * gyy - gxy * gxy;
    if gxx <= 0.0 || det <= 0.0 {
        return Err(Error::Singular(format!(
            "2x2 Green submatrix not positive definite (gxx={gxx:.3e}, det={det:.3e})"
        )));
    }
    let ceq = gxy / det;
    let chi_x = gyy / det - ceq;
    let chi_y = gxx / det - ceq;
    Ok(EqConductance { ceq, chi_x, chi_y })
}

/// Path-sum form of the equivalent conductance:
/// `C(x,y) = sum over neighbours z of x of C(x,z) P_z(hit y before F or x)`.
/// Independent oracle for `ceq_from_green`, for small graphs.
pub fn ceq_path_sum(g: &WeightedGraph, x: usize, y: usize) -> Result<f64> {
    let len = g.interior_len();
    if x >= len || y >= len || x == y {
        return Err(Error::invalid("vertices", "need two distinct interior vertices"));
    }
    // Dirichlet problem on interior minus {x, y}: data 1 at y, 0 at x and F.
    let keep: Vec<usize> = (0..len).filter(|&v| v != x && v != y).collect();
    let pos: std::collections::HashMap<usize, usize> =
        keep.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let m = assemble_dense(g)?;
    let dim = keep.len();
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = nalgebra::DVector::<f64>::zeros(dim);
    for (r, &v) in keep.iter().enumerate() {
        a[(r, r)] = m[(v, v)];
        g.for_neighbors(v, |nb| {
            if let Some(o) = nb.interior {
                let o = o as usize;
                if o == y {
                    rhs[r] += nb.cond;
                } else if o != x {
                    a[(r, pos[&o])] -= nb.cond;
                }
            }
        });
    }
    let h = a
        .cholesky()
        .ok_or_else(|| Error::Singular("reduced system not positive definite".into()))?
        .solve(&rhs);
    let mut total = 0.0;
    g.for_neighbors(x, |nb| {
        if let Some(o) = nb.interior {
            let o = o as usize;
            if o == y {
                total += nb.cond; // direct edge: hits y immediately
            } else {
                total += nb.cond * h[pos[&o]];
            }
        }
    });
    Ok(total)
}

/// Equivalent conductance between the two poles of a quotient graph together
/// with the pole block of the inverted Green submatrix, computed by a Schur
/// complement over the base grid (two grid solves).
pub struct PoleNetwork {
    pub eq: EqConductance,
    /// 2x2 Green submatrix (covariance of the field at the poles).
    pub green: [[f64; 2]; 2],
}

pub fn quotient_pole_network(qg: &QuotientGraph) -> Result<PoleNetwork> {
    let base = qg.base();
    let x_left = pole_field(qg, qg.left_columns())?;
    let x_right = pole_field(qg, qg.right_columns())?;
    let c = base.grid_conductance().expect("grid base");
    let lambda_left = qg.left_columns().len() as f64 * c;
    let lambda_right = qg.right_columns().len() as f64 * c;
    let dot = |cols: &[i32], field: &[f64]| -> f64 {
        cols.iter()
            .map(|&i| c * field[base.index_of(i, 1).expect("pole site interior")])
            .sum()
    };
    let s00 = lambda_left - dot(qg.left_columns(), &x_left);
    let s11 = lambda_right - dot(qg.right_columns(), &x_right);
    let s01 = -dot(qg.left_columns(), &x_right);
    let det = s00 * s11 - s01 * s01;
    if det <= 0.0 || s00 <= 0.0 {
        return Err(Error::Singular("pole Schur complement not positive definite".into()));
    }
    let eq = EqConductance {
        ceq: -s01,
        chi_x: s00 + s01,
        chi_y: s11 + s01,
    };
    let green = [[s11 / det, -s01 / det], [-s01 / det, s00 / det]];
    Ok(PoleNetwork { eq, green })
}

fn pole_field(qg: &QuotientGraph, cols: &[i32]) -> Result<Vec<f64>> {
    let base = qg.base();
    let member = |v: Vertex| -> bool { v.j == 0 && cols.contains(&v.i) };
    let rhs = boundary_rhs(base, |v| if member(v) { 1.0 } else { 0.0 });
    solve_dirichlet(base, &rhs)
}

/// `C^eq_{n,a}(q)`: equivalent conductance between the identified boundary
/// intervals, by the sum over the right interval of left-exit probabilities
/// from the first interior row, one harmonic solve total.
pub fn ceq_n_q(qg: &QuotientGraph) -> Result<f64> {
    let base = qg.base();
    let n = base.n();
    let c = n as f64 / 2.0;
    let h = pole_field(qg, qg.left_columns())?;
    let mut total = 0.0;
    for &i in qg.right_columns() {
        let idx = base
            .index_of(i, 1)
            .ok_or_else(|| Error::invalid("interval", "right interval outside interior"))?;
        total += c * h[idx];
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_half_plane, build_quotient};

    fn two_vertex_path() -> WeightedGraph {
        // two interior vertices joined by a unit edge, each attached to a
        // killed end by a unit edge
        WeightedGraph::from_parts(
            1,
            vec![Vertex::new(0, 1), Vertex::new(1, 1)],
            &[(0, 1, 1.0)],
            &[(0, Vertex::new(-1, 1), 1.0), (1, Vertex::new(2, 1), 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn single_vertex_inverse() {
        let g = build_half_plane(1, 1, 2).unwrap();
        let table = green_table(&g).unwrap();
        assert!((table.entry(0, 0) - 0.5).abs() < 1e-12);
        // one-vertex conversion check: the walk dies immediately, exactly one visit
        assert!((table.walk(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_vertex_inverse_by_hand() {
        let g = two_vertex_path();
        let t = green_table(&g).unwrap();
        assert!((t.entry(0, 0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.entry(0, 1) - 1.0 / 3.0).abs() < 1e-12);
        assert!((t.entry(1, 1) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn green_symmetric_positive_definite() {
        let g = build_half_plane(2, 6, 5).unwrap();
        let t = green_table(&g).unwrap();
        let v = t.values();
        for i in 0..t.dim() {
            for j in 0..t.dim() {
                assert!((v[(i, j)] - v[(j, i)]).abs() < 1e-9);
            }
        }
        assert!(v.clone().cholesky().is_some());
    }

    #[test]
    fn hit_kernel_symmetric_four_exits() {
        let g = build_half_plane(1, 1, 2).unwrap();
        let kernel = boundary_hit_kernel(&g, Vertex::new(0, 1)).unwrap();
        let hits: Vec<f64> = kernel.iter().map(|&(_, p)| p).filter(|&p| p > 0.0).collect();
        assert_eq!(hits.len(), 4);
        for p in hits {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn hit_kernel_mass_conserved_and_matches_green() {
        let g = build_half_plane(1, 20, 12).unwrap();
        let start = Vertex::new(0, 1);
        let kernel = boundary_hit_kernel(&g, start).unwrap();
        let mass: f64 = kernel.iter().map(|&(_, p)| p).sum();
        assert!((mass - 1.0).abs() < 1e-9, "mass {mass}");

        // exit right below (j,0) has probability walk-Green((0,1),(j,1))/4
        let src = g.index_of(0, 1).unwrap();
        let col = green_column(&g, src).unwrap();
        for j in 0..=8 {
            let idx = g.index_of(j, 1).unwrap();
            let expect = col[idx] * g.lambda(idx) / 4.0;
            let p = kernel
                .iter()
                .find(|&&(v, _)| v == Vertex::new(j, 0))
                .unwrap()
                .1;
            assert!((p - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn hit_kernel_rejects_boundary_start() {
        let g = build_half_plane(1, 4, 4).unwrap();
        assert!(boundary_hit_kernel(&g, Vertex::new(0, 0)).is_err());
    }

    #[test]
    fn ceq_symbolic_two_by_two() {
        let (gd, h) = (0.9, 0.4);
        let eq = ceq_from_green(gd, h, gd).unwrap();
        let det = gd * gd - h * h;
        assert!((eq.ceq - h / det).abs() < 1e-12);
        assert!((eq.chi_x - (gd - h) / det).abs() < 1e-12);
        assert!((eq.chi_x + eq.ceq - gd / det).abs() < 1e-12);
    }

    #[test]
    fn ceq_zero_cross_term_flags_disconnected() {
        let eq = ceq_from_green(0.7, 0.0, 0.9).unwrap();
        assert_eq!(eq.ceq, 0.0);
        assert!(eq.disconnected());
        assert!(ceq_from_green(0.5, 0.8, 0.5).is_err());
    }

    #[test]
    fn ceq_from_green_matches_path_sum() {
        let g = two_vertex_path();
        let t = green_table(&g).unwrap();
        let eq = ceq_from_green(t.entry(0, 0), t.entry(0, 1), t.entry(1, 1)).unwrap();
        let oracle = ceq_path_sum(&g, 0, 1).unwrap();
        assert!((eq.ceq - oracle).abs() < 1e-10, "{} vs {oracle}", eq.ceq);
    }

    #[test]
    fn pole_network_matches_dense_quotient_green() {
        let g = build_half_plane(2, 12, 8).unwrap();
        let qg = build_quotient(g, 1.0, 2.5).unwrap();
        let net = quotient_pole_network(&qg).unwrap();
        let merged = qg.merged().unwrap();
        let t = green_table(&merged).unwrap();
        let (l, r) = (t.dim() - 2, t.dim() - 1);
        assert!((net.green[0][0] - t.entry(l, l)).abs() < 1e-8);
        assert!((net.green[0][1] - t.entry(l, r)).abs() < 1e-8);
        assert!((net.green[1][1] - t.entry(r, r)).abs() < 1e-8);
        let eq = ceq_from_green(t.entry(l, l), t.entry(l, r), t.entry(r, r)).unwrap();
        assert!((net.eq.ceq - eq.ceq).abs() < 1e-8);
        // and the one-solve interval sum agrees
        let sum = ceq_n_q(&qg).unwrap();
        assert!((sum - eq.ceq).abs() < 1e-8, "{sum} vs {}", eq.ceq);
    }

    #[test]
    fn ceq_monotone_in_a() {
        let g = build_half_plane(4, 40, 24).unwrap();
        let c1 = ceq_n_q(&build_quotient(g.clone(), 1.0, 2.0).unwrap()).unwrap();
        let c2 = ceq_n_q(&build_quotient(g, 2.0, 2.0).unwrap()).unwrap();
        assert!(c2 >= c1);
    }

    #[test]
    fn ceq_single_site_right_interval() {
        // q close to 1: the right interval holds exactly the site i = n and
        // the conductance reduces to a single-term sum.
        let g = build_half_plane(4, 20, 12).unwrap();
        let qg = build_quotient(g.clone(), 1.0, 1.01).unwrap();
        assert_eq!(qg.right_columns(), &[4]);
        let h = {
            let rhs = boundary_rhs(&g, |v| {
                if v.j == 0 && (-4..=0).contains(&v.i) {
                    1.0
                } else {
                    0.0
                }
            });
            solve_dirichlet(&g, &rhs).unwrap()
        };
        let expect = 2.0 * h[g.index_of(4, 1).unwrap()];
        assert!((ceq_n_q(&qg).unwrap() - expect).abs() < 1e-12);
    }
}

//! Geometric multigrid for the five-point Dirichlet Laplacian on a
//! rectangular interior grid: `4 u(p) - sum_nbr u = f(p)`, zero outside.
//!
//! V(2,2) cycles with red-black Gauss-Seidel smoothing, full-weighting
//! restriction and bilinear prolongation. Coarse points sit at odd fine
//! coordinates, so arbitrary grid sizes coarsen until a direct solve takes
//! over.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const COARSE_LIMIT: usize = 24;

struct Level {
    nx: usize,
    ny: usize,
    u: Vec<f64>,
    f: Vec<f64>,
    r: Vec<f64>,
}

pub struct Multigrid {
    levels: Vec<Level>,
    coarse: Cholesky<f64, Dyn>,
}

#[inline]
fn at(nx: usize, x: usize, y: usize) -> usize {
    y * nx + x
}

fn apply(nx: usize, ny: usize, u: &[f64], out: &mut [f64]) {
    for y in 0..ny {
        for x in 0..nx {
            let p = at(nx, x, y);
            let mut v = 4.0 * u[p];
            if x > 0 {
                v -= u[p - 1];
            }
            if x + 1 < nx {
                v -= u[p + 1];
            }
            if y > 0 {
                v -= u[p - nx];
            }
            if y + 1 < ny {
                v -= u[p + nx];
            }
            out[p] = v;
        }
    }
}

fn residual(nx: usize, ny: usize, u: &[f64], f: &[f64], r: &mut [f64]) {
    apply(nx, ny, u, r);
    for (rv, fv) in r.iter_mut().zip(f.iter()) {
        *rv = fv - *rv;
    }
}

fn relax(nx: usize, ny: usize, u: &mut [f64], f: &[f64], sweeps: usize) {
    for _ in 0..sweeps {
        for color in 0..2usize {
            for y in 0..ny {
                let start = (color + y) % 2;
                let mut x = start;
                while x < nx {
                    let p = at(nx, x, y);
                    let mut s = f[p];
                    if x > 0 {
                        s += u[p - 1];
                    }
                    if x + 1 < nx {
                        s += u[p + 1];
                    }
                    if y > 0 {
                        s += u[p - nx];
                    }
                    if y + 1 < ny {
                        s += u[p + nx];
                    }
                    u[p] = 0.25 * s;
                    x += 2;
                }
            }
        }
    }
}

fn coarse_dims(nx: usize, ny: usize) -> (usize, usize) {
    ((nx - 1) / 2, (ny - 1) / 2)
}

/// Full-weighting restriction of the fine residual onto the coarse grid.
/// The unscaled stencil `4 - sum` represents `h^2` times the Laplacian, so
/// the coarse equation carries the factor `(2h)^2 / h^2 = 4`.
fn restrict(nx: usize, _ny: usize, fine: &[f64], cnx: usize, cny: usize, coarse: &mut [f64]) {
    for cy in 0..cny {
        let fy = 2 * cy + 1;
        for cx in 0..cnx {
            let fx = 2 * cx + 1;
            let p = at(nx, fx, fy);
            let mut v = 0.25 * fine[p];
            v += 0.125 * (fine[p - 1] + fine[p + 1] + fine[p - nx] + fine[p + nx]);
            v += 0.0625
                * (fine[p - nx - 1] + fine[p - nx + 1] + fine[p + nx - 1] + fine[p + nx + 1]);
            coarse[at(cnx, cx, cy)] = 4.0 * v;
        }
    }
}

/// Bilinear prolongation; adds the interpolated coarse correction into `fine`.
fn prolong_add(nx: usize, ny: usize, fine: &mut [f64], cnx: usize, cny: usize, coarse: &[f64]) {
    for cy in 0..cny {
        let fy = 2 * cy + 1;
        for cx in 0..cnx {
            let fx = 2 * cx + 1;
            let v = coarse[at(cnx, cx, cy)];
            for dy in -1i32..=1 {
                let yy = fy as i32 + dy;
                if yy < 0 || yy as usize >= ny {
                    continue;
                }
                let wy = if dy == 0 { 1.0 } else { 0.5 };
                for dx in -1i32..=1 {
                    let xx = fx as i32 + dx;
                    if xx < 0 || xx as usize >= nx {
                        continue;
                    }
                    let wx = if dx == 0 { 1.0 } else { 0.5 };
                    fine[at(nx, xx as usize, yy as usize)] += wx * wy * v;
                }
            }
        }
    }
}

impl Multigrid {
    pub fn new(nx: usize, ny: usize) -> Result<Multigrid> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid", "empty grid"));
        }
        let mut levels = Vec::new();
        let (mut cx, mut cy) = (nx, ny);
        loop {
            levels.push(Level {
                nx: cx,
                ny: cy,
                u: vec![0.0; cx * cy],
                f: vec![0.0; cx * cy],
                r: vec![0.0; cx * cy],
            });
            if cx * cy <= COARSE_LIMIT * COARSE_LIMIT || cx < 3 || cy < 3 {
                break;
            }
            let (nx2, ny2) = coarse_dims(cx, cy);
            if nx2 == 0 || ny2 == 0 {
                break;
            }
            cx = nx2;
            cy = ny2;
        }
        let last = levels.last().unwrap();
        let (cnx, cny) = (last.nx, last.ny);
        let dim = cnx * cny;
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        for y in 0..cny {
            for x in 0..cnx {
                let p = at(cnx, x, y);
                a[(p, p)] = 4.0;
                if x > 0 {
                    a[(p, p - 1)] = -1.0;
                }
                if x + 1 < cnx {
                    a[(p, p + 1)] = -1.0;
                }
                if y > 0 {
                    a[(p, p - cnx)] = -1.0;
                }
                if y + 1 < cny {
                    a[(p, p + cnx)] = -1.0;
                }
            }
        }
        let coarse = a
            .cholesky()
            .ok_or_else(|| Error::Singular("coarse grid operator".into()))?;
        Ok(Multigrid { levels, coarse })
    }

    fn vcycle(&mut self, level: usize) {
        if level + 1 == self.levels.len() {
            let lv = &mut self.levels[level];
            let rhs = DVector::from_column_slice(&lv.f);
            let sol = self.coarse.solve(&rhs);
            lv.u.copy_from_slice(sol.as_slice());
            return;
        }
        let (head, tail) = self.levels.split_at_mut(level + 1);
        let lv = &mut head[level];
        let next = &mut tail[0];
        relax(lv.nx, lv.ny, &mut lv.u, &lv.f, 2);
        residual(lv.nx, lv.ny, &lv.u, &lv.f, &mut lv.r);
        restrict(lv.nx, lv.ny, &lv.r, next.nx, next.ny, &mut next.f);
        next.u.iter_mut().for_each(|v| *v = 0.0);
        self.vcycle(level + 1);
        let (head, tail) = self.levels.split_at_mut(level + 1);
        let lv = &mut head[level];
        let next = &tail[0];
        prolong_add(lv.nx, lv.ny, &mut lv.u, next.nx, next.ny, &next.u);
        relax(lv.nx, lv.ny, &mut lv.u, &lv.f, 2);
    }

    /// Solve `(4 - sum_nbr) u = f` to the given relative residual.
    pub fn solve(&mut self, f: &[f64], tol: f64, max_cycles: usize) -> Result<Vec<f64>> {
        let (nx, ny) = (self.levels[0].nx, self.levels[0].ny);
        assert_eq!(f.len(), nx * ny);
        let fnorm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if fnorm == 0.0 {
            return Ok(vec![0.0; f.len()]);
        }
        self.levels[0].f.copy_from_slice(f);
        self.levels[0].u.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..max_cycles {
            self.vcycle(0);
            let lv = &mut self.levels[0];
            residual(nx, ny, &lv.u, &lv.f, &mut lv.r);
            let rnorm = lv.r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm / fnorm <= tol {
                return Ok(std::mem::take(&mut self.levels[0].u));
            }
        }
        let lv = &self.levels[0];
        let rnorm = lv.r.iter().map(|v| v * v).sum::<f64>().sqrt();
        Err(Error::SolverTolerance {
            residual: rnorm / fnorm,
            tol,
        })
    }
}

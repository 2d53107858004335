//! Geometric multigrid V-cycle used as a preconditioner for conjugate gradients
//! on the shifted operator `σ − A`.
//!
//! Vertex-centred coarsening (`n → (n−1)/2`) along each axis whose node count
//! allows it, bilinear prolongation, restriction proportional to its transpose
//! and red–black Gauss–Seidel smoothing applied forward before and backward
//! after the coarse correction, so the cycle is a symmetric operator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::operator::{axpy, dot, norm, Stencil};

const DIRECT_LIMIT: usize = 900;

struct Level {
    /// Stencil of `σ − A` on this level (off-diagonal weights are negative).
    op: Stencil,
    coarsen_x: bool,
    coarsen_z: bool,
}

enum Coarsest {
    Direct(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Sweeps(usize),
}

pub struct Multigrid {
    levels: Vec<Level>,
    coarsest: Coarsest,
    smoothing_sweeps: usize,
}

fn can_coarsen(n: usize) -> bool {
    n >= 7 && n % 2 == 1
}

impl Multigrid {
    /// Build the hierarchy for `op`, which must be symmetric positive definite.
    pub fn new(op: &Stencil) -> Self {
        let mut levels = Vec::new();
        let mut current = op.clone();
        loop {
            let coarsen_x = current.cx != 0.0 && can_coarsen(current.nx);
            let coarsen_z = current.cz != 0.0 && can_coarsen(current.nz);
            let small = current.nx * current.nz <= DIRECT_LIMIT;
            if small || !(coarsen_x || coarsen_z) {
                levels.push(Level {
                    op: current,
                    coarsen_x: false,
                    coarsen_z: false,
                });
                break;
            }
            let coarse = coarsen(&current, coarsen_x, coarsen_z);
            levels.push(Level {
                op: current,
                coarsen_x,
                coarsen_z,
            });
            current = coarse;
        }
        let last = &levels.last().unwrap().op;
        let coarsest = if last.nx * last.nz <= DIRECT_LIMIT {
            match dense(last).cholesky() {
                Some(c) => Coarsest::Direct(c),
                None => Coarsest::Sweeps(40),
            }
        } else {
            Coarsest::Sweeps(40)
        };
        Multigrid {
            levels,
            coarsest,
            smoothing_sweeps: 2,
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// One V-cycle from a zero initial guess: `e ≈ (σ − A)⁻¹ r`.
    pub fn precondition(&self, r: &[f64], e: &mut [f64]) {
        self.cycle(0, r, e);
    }

    fn cycle(&self, depth: usize, r: &[f64], e: &mut [f64]) {
        let level = &self.levels[depth];
        e.iter_mut().for_each(|v| *v = 0.0);
        if depth + 1 == self.levels.len() {
            match &self.coarsest {
                Coarsest::Direct(chol) => {
                    let x = chol.solve(&DVector::from_column_slice(r));
                    e.copy_from_slice(x.as_slice());
                }
                Coarsest::Sweeps(n) => {
                    for _ in 0..*n {
                        gauss_seidel(&level.op, r, e, [0, 1]);
                    }
                    for _ in 0..*n {
                        gauss_seidel(&level.op, r, e, [1, 0]);
                    }
                }
            }
            return;
        }
        for _ in 0..self.smoothing_sweeps {
            gauss_seidel(&level.op, r, e, [0, 1]);
        }
        let mut residual = vec![0.0; r.len()];
        level.op.apply(e, &mut residual);
        for (res, rhs) in residual.iter_mut().zip(r) {
            *res = rhs - *res;
        }
        let next = &self.levels[depth + 1].op;
        let mut coarse_r = vec![0.0; next.nx * next.nz];
        restrict(&level.op, level.coarsen_x, level.coarsen_z, next, &residual, &mut coarse_r);
        let mut coarse_e = vec![0.0; coarse_r.len()];
        self.cycle(depth + 1, &coarse_r, &mut coarse_e);
        prolong_add(&level.op, level.coarsen_x, level.coarsen_z, next, &coarse_e, e);
        for _ in 0..self.smoothing_sweeps {
            gauss_seidel(&level.op, r, e, [1, 0]);
        }
    }
}

fn dense(op: &Stencil) -> DMatrix<f64> {
    let n = op.nx * op.nz;
    let mut m = DMatrix::zeros(n, n);
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        unit[k] = 1.0;
        op.apply(&unit, &mut col);
        m.column_mut(k).copy_from_slice(&col);
        unit[k] = 0.0;
    }
    m
}

/// Red–black Gauss–Seidel sweep; `order` gives the colour sequence.
fn gauss_seidel(op: &Stencil, r: &[f64], e: &mut [f64], order: [usize; 2]) {
    let (nx, nz, cx, cz) = (op.nx, op.nz, op.cx, op.cz);
    for colour in order {
        for i in 0..nx {
            let row = i * nz;
            let start = (colour + i) % 2;
            let mut j = start;
            while j < nz {
                let k = row + j;
                let mut off = 0.0;
                if j > 0 {
                    off += cz * e[k - 1];
                }
                if j + 1 < nz {
                    off += cz * e[k + 1];
                }
                if i > 0 {
                    off += cx * e[k - nz];
                }
                if i + 1 < nx {
                    off += cx * e[k + nz];
                }
                e[k] = (r[k] - off) / op.center[k];
                j += 2;
            }
        }
    }
}

/// Fine-to-coarse node map and bilinear weights along one axis.
fn taps(coarsened: bool, coarse_index: usize) -> [(isize, f64); 3] {
    if coarsened {
        let f = 2 * coarse_index as isize + 1;
        [(f - 1, 0.5), (f, 1.0), (f + 1, 0.5)]
    } else {
        [(coarse_index as isize, 1.0), (-1, 0.0), (-1, 0.0)]
    }
}

fn coarsen(op: &Stencil, cx_on: bool, cz_on: bool) -> Stencil {
    let nx = if cx_on { (op.nx - 1) / 2 } else { op.nx };
    let nz = if cz_on { (op.nz - 1) / 2 } else { op.nz };
    // the zeroth-order part of the centre weight, restricted by full weighting
    let lap = 2.0 * op.cx + 2.0 * op.cz;
    let reaction: Vec<f64> = op.center.iter().map(|c| c + lap).collect();
    let mut center = vec![0.0; nx * nz];
    for ci in 0..nx {
        for cj in 0..nz {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (fi, wi) in taps(cx_on, ci) {
                if fi < 0 || wi == 0.0 {
                    continue;
                }
                for (fj, wj) in taps(cz_on, cj) {
                    if fj < 0 || wj == 0.0 {
                        continue;
                    }
                    let w = wi * wj;
                    acc += w * reaction[fi as usize * op.nz + fj as usize];
                    wsum += w;
                }
            }
            center[ci * nz + cj] = acc / wsum;
        }
    }
    let cx = if cx_on { op.cx / 4.0 } else { op.cx };
    let cz = if cz_on { op.cz / 4.0 } else { op.cz };
    for c in center.iter_mut() {
        *c -= 2.0 * cx + 2.0 * cz;
    }
    Stencil {
        nx,
        nz,
        cx,
        cz,
        center,
    }
}

fn restrict(fine: &Stencil, cx_on: bool, cz_on: bool, coarse: &Stencil, r: &[f64], out: &mut [f64]) {
    let scale = if cx_on { 0.5 } else { 1.0 } * if cz_on { 0.5 } else { 1.0 };
    for ci in 0..coarse.nx {
        for cj in 0..coarse.nz {
            let mut acc = 0.0;
            for (fi, wi) in taps(cx_on, ci) {
                if fi < 0 || wi == 0.0 {
                    continue;
                }
                for (fj, wj) in taps(cz_on, cj) {
                    if fj < 0 || wj == 0.0 {
                        continue;
                    }
                    acc += wi * wj * r[fi as usize * fine.nz + fj as usize];
                }
            }
            out[ci * coarse.nz + cj] = scale * acc;
        }
    }
}

fn prolong_add(fine: &Stencil, cx_on: bool, cz_on: bool, coarse: &Stencil, ec: &[f64], e: &mut [f64]) {
    for ci in 0..coarse.nx {
        for cj in 0..coarse.nz {
            let v = ec[ci * coarse.nz + cj];
            for (fi, wi) in taps(cx_on, ci) {
                if fi < 0 || wi == 0.0 {
                    continue;
                }
                for (fj, wj) in taps(cz_on, cj) {
                    if fj < 0 || wj == 0.0 {
                        continue;
                    }
                    e[fi as usize * fine.nz + fj as usize] += wi * wj * v;
                }
            }
        }
    }
}

/// Conjugate gradients on `op` preconditioned by `mg`.
pub struct ShiftedSolver {
    pub op: Stencil,
    pub mg: Multigrid,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl ShiftedSolver {
    pub fn new(op: Stencil, tolerance: f64, max_iterations: usize) -> Self {
        let mg = Multigrid::new(&op);
        ShiftedSolver {
            op,
            mg,
            tolerance,
            max_iterations,
        }
    }

    /// Solve `op x = b`, returning the iteration count.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<usize> {
        let n = b.len();
        let b_norm = norm(b);
        x.iter_mut().for_each(|v| *v = 0.0);
        if b_norm == 0.0 {
            return Ok(0);
        }
        let mut r = b.to_vec();
        let mut z = vec![0.0; n];
        self.mg.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut q = vec![0.0; n];
        let mut rel = 1.0;
        for it in 1..=self.max_iterations {
            self.op.apply(&p, &mut q);
            let alpha = rz / dot(&p, &q);
            axpy(alpha, &p, x);
            axpy(-alpha, &q, &mut r);
            rel = norm(&r) / b_norm;
            if rel <= self.tolerance {
                return Ok(it);
            }
            self.mg.precondition(&r, &mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        Err(Error::InnerSolve {
            iterations: self.max_iterations,
            residual: rel,
        })
    }
}

//! Shift-and-invert Lanczos for the largest eigenvalues of the Helmholtz stencil.
//!
//! With σ above every n² in the map, `σ − A` is symmetric positive definite and
//! its inverse maps the wanted eigenvalues (largest n_eff²) to the largest,
//! best separated eigenvalues `1/(σ − λ)`. Each Lanczos step costs one
//! multigrid-preconditioned CG solve. Ritz vectors are polished by one more
//! inverse application and a Rayleigh–Ritz pass on `A` itself before their
//! true residuals `‖A v − λ v‖` are checked against the tolerance.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::multigrid::ShiftedSolver;
use super::operator::{axpy, dot, norm, Stencil};

/// Eigensolver tolerances and limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Bound on `‖A v − λ v‖ / ‖v‖` for every returned mode (A normalised by k0²).
    pub tolerance: f64,
    pub max_lanczos_steps: usize,
    /// Relative residual for each inner CG solve.
    pub inner_tolerance: f64,
    pub inner_max_iterations: usize,
    /// σ = (1 + shift_margin) · max n².
    pub shift_margin: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-8,
            max_lanczos_steps: 160,
            inner_tolerance: 1e-12,
            inner_max_iterations: 400,
            shift_margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Unit 2-norm.
    pub vector: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EigenStats {
    pub lanczos_steps: usize,
    pub inner_iterations: usize,
}

fn shifted_stencil(a: &Stencil, shift: f64) -> Stencil {
    Stencil {
        nx: a.nx,
        nz: a.nz,
        cx: -a.cx,
        cz: -a.cz,
        center: a.center.iter().map(|c| shift - c).collect(),
    }
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of classical Gram–Schmidt
    for _ in 0..2 {
        for v in basis {
            let c = dot(w, v);
            axpy(-c, v, w);
        }
    }
}

/// The `count` largest eigenpairs of the symmetric stencil `a`, all of whose
/// eigenvalues lie below `shift`.
pub fn largest_eigenpairs(
    a: &Stencil,
    shift: f64,
    count: usize,
    settings: &SolverSettings,
    start: &[f64],
) -> Result<(Vec<EigenPair>, EigenStats)> {
    let n = a.nx * a.nz;
    if count == 0 || n == 0 {
        return Err(Error::contract("need at least one mode and a non-empty map"));
    }
    let count = count.min(n);
    let solver = ShiftedSolver::new(
        shifted_stencil(a, shift),
        settings.inner_tolerance,
        settings.inner_max_iterations,
    );
    let mut stats = EigenStats::default();

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut v = start.to_vec();
    let s = norm(&v);
    if !(s > 0.0) {
        return Err(Error::contract("start vector is zero"));
    }
    v.iter_mut().for_each(|x| *x /= s);
    basis.push(v);

    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut next_check = count + 4;
    let mut worst = f64::INFINITY;

    for step in 0..settings.max_lanczos_steps.min(n) {
        let j = basis.len() - 1;
        stats.inner_iterations += solver.solve(&basis[j], &mut w)?;
        stats.lanczos_steps = step + 1;
        let alpha = dot(&w, &basis[j]);
        orthogonalize(&mut w, &basis);
        let beta = norm(&w);
        alphas.push(alpha);

        let m = alphas.len();
        let exhausted = beta <= 1e-14 * alpha.abs() || m == n;
        if m >= next_check || exhausted || step + 1 == settings.max_lanczos_steps {
            let mut t = DMatrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alphas[i];
                if i + 1 < m {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));
            let k = count.min(m);
            let converged_estimate = order[..k].iter().all(|&i| {
                let theta = eig.eigenvalues[i];
                beta * eig.eigenvectors[(m - 1, i)].abs() <= 1e-11 * theta.abs()
            });
            if converged_estimate || exhausted || step + 1 == settings.max_lanczos_steps {
                let ritz: Vec<Vec<f64>> = order[..k]
                    .iter()
                    .map(|&i| {
                        let mut x = vec![0.0; n];
                        for (b, vb) in basis.iter().take(m).enumerate() {
                            axpy(eig.eigenvectors[(b, i)], vb, &mut x);
                        }
                        x
                    })
                    .collect();
                let pairs = polish(a, &solver, ritz, &mut stats)?;
                worst = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
                if worst <= settings.tolerance && pairs.len() == k {
                    return Ok((pairs, stats));
                }
            }
            next_check = m + 5;
        }
        if exhausted {
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(std::mem::replace(&mut w, vec![0.0; n]));
    }
    Err(Error::Solver {
        iterations: stats.lanczos_steps,
        worst_residual: worst,
        tolerance: settings.tolerance,
    })
}

/// One inverse step on each Ritz vector followed by Rayleigh–Ritz with `a`.
fn polish(
    a: &Stencil,
    solver: &ShiftedSolver,
    ritz: Vec<Vec<f64>>,
    stats: &mut EigenStats,
) -> Result<Vec<EigenPair>> {
    let n = a.nx * a.nz;
    let mut ys: Vec<Vec<f64>> = Vec::with_capacity(ritz.len());
    for x in &ritz {
        let mut y = vec![0.0; n];
        stats.inner_iterations += solver.solve(x, &mut y)?;
        orthogonalize(&mut y, &ys);
        let s = norm(&y);
        y.iter_mut().for_each(|v| *v /= s);
        ys.push(y);
    }
    let k = ys.len();
    let ays: Vec<Vec<f64>> = ys
        .iter()
        .map(|y| {
            let mut ay = vec![0.0; n];
            a.apply(y, &mut ay);
            ay
        })
        .collect();
    let mut h = DMatrix::zeros(k, k);
    for p in 0..k {
        for q in 0..k {
            h[(p, q)] = 0.5 * (dot(&ys[p], &ays[q]) + dot(&ys[q], &ays[p]));
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));
    Ok(order
        .into_iter()
        .map(|i| {
            let lambda = eig.eigenvalues[i];
            let mut v = vec![0.0; n];
            let mut av = vec![0.0; n];
            for b in 0..k {
                let c = eig.eigenvectors[(b, i)];
                axpy(c, &ys[b], &mut v);
                axpy(c, &ays[b], &mut av);
            }
            let s = norm(&v);
            v.iter_mut().for_each(|x| *x /= s);
            av.iter_mut().for_each(|x| *x /= s);
            axpy(-lambda, &v, &mut av);
            EigenPair {
                value: lambda,
                vector: v,
                residual: norm(&av),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D Dirichlet Laplacian plus constant: eigenvalues are known in closed form.
    #[test]
    fn matches_closed_form_spectrum() {
        let nz = 255;
        let c = 40.0;
        let base = 3.0;
        let a = Stencil {
            nx: 1,
            nz,
            cx: 0.0,
            cz: c,
            center: vec![base - 2.0 * c; nz],
        };
        let start: Vec<f64> = (0..nz).map(|k| 1.0 + 0.1 * ((k * 37) % 11) as f64).collect();
        let (pairs, _) =
            largest_eigenpairs(&a, base + 0.01, 3, &SolverSettings::default(), &start).unwrap();
        for (m, p) in pairs.iter().enumerate() {
            let theta = std::f64::consts::PI * (m + 1) as f64 / (nz + 1) as f64;
            let exact = base - 2.0 * c + 2.0 * c * theta.cos();
            assert!((p.value - exact).abs() < 1e-10, "mode {m}: {} vs {exact}", p.value);
            assert!(p.residual < 1e-8);
        }
    }
}

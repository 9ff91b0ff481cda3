//! Discretization: collocation residuals and the banded-bordered Jacobian.
//!
//! Row ordering of the discrete system (matching the right-hand-side
//! vectors handed to the factorization):
//!
//!   interval j, collocation point l, component c:
//!       row (j*m + l)*n + c:
//!       sum_i wp[l][i] u_{j*m+i, c} - h_j f_c(z_jl, u(z_jl), p)
//!   then the n_bc boundary condition rows,
//!   then one row per scalar constraint.
//!
//! Collocation rows are scaled by the subinterval length h_j so that all
//! entries stay O(1) under mesh refinement; this keeps the determinant
//! sign comparison meaningful between neighboring continuation steps on a
//! fixed mesh. Derivatives are central finite differences with step
//! 1e-7 * (1 + |u|), accurate enough for quadratic Newton convergence
//! down to residuals of 1e-11 on well-scaled systems.

use crate::linalg::{BandedBordered, Factored};
use crate::system::{BvpSystem, Constraint, Problem, Solution};
use crate::Result;

const FD_EPS: f64 = 1e-7;

/// Collocation + boundary + constraint residual vector.
pub fn residual_vec<S: BvpSystem>(problem: &Problem<S>, sol: &Solution) -> Result<Vec<f64>> {
    problem.check_well_posed()?;
    problem.check_solution_shape(sol)?;
    let sys = problem.system;
    let n = sys.dim();
    let mesh = &sol.mesh;
    let m = mesh.degree();
    let mut res = Vec::with_capacity(mesh.n_base_points() * n + problem.free.len());
    let mut u = vec![0.0; n];
    let mut f = vec![0.0; n];
    for j in 0..mesh.intervals() {
        let h = mesh.interval_len(j);
        for l in 0..m {
            let s = mesh.collocation_point(j, l);
            interpolate(sol, j, l, &mut u);
            sys.rhs(s, &u, &sol.params, &mut f);
            let wp = mesh.basis_deriv_at(l);
            for c in 0..n {
                let mut du = 0.0;
                for (i, &wpi) in wp.iter().enumerate() {
                    du += wpi * sol.point(j * m + i)[c];
                }
                res.push(du - h * f[c]);
            }
        }
    }
    let mut bc = vec![0.0; sys.n_bc()];
    let last = mesh.n_base_points() - 1;
    sys.bc(sol.point(0), sol.point(last), &sol.params, &mut bc);
    res.extend_from_slice(&bc);
    for cons in &problem.constraints {
        res.push(cons.residual(sol));
    }
    Ok(res)
}

/// Infinity norm of the full residual.
pub fn residual_norm<S: BvpSystem>(problem: &Problem<S>, sol: &Solution) -> Result<f64> {
    Ok(residual_vec(problem, sol)?
        .iter()
        .fold(0.0, |a, r| a.max(r.abs())))
}

/// Interpolates the state at collocation point (j, l) from base point values.
fn interpolate(sol: &Solution, j: usize, l: usize, u: &mut [f64]) {
    let m = sol.mesh.degree();
    u.fill(0.0);
    for (i, &w) in sol.mesh.basis_at(l).iter().enumerate() {
        for (o, &v) in u.iter_mut().zip(sol.point(j * m + i)) {
            *o += w * v;
        }
    }
}

/// Assembles the residual and the banded-bordered Jacobian at `sol`.
pub fn assemble<S: BvpSystem>(
    problem: &Problem<S>,
    sol: &Solution,
) -> Result<(Vec<f64>, BandedBordered)> {
    problem.check_well_posed()?;
    problem.check_solution_shape(sol)?;
    let sys = problem.system;
    let n = sys.dim();
    let mesh = &sol.mesh;
    let m = mesh.degree();
    let g_total = mesh.n_base_points();
    let n_state = g_total * n;
    let nf = problem.free.len();
    let mut mat = BandedBordered::new(n_state, nf);
    let mut res = Vec::with_capacity(n_state + nf);

    let mut u = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut fm = vec![0.0; n];
    let mut fp = vec![0.0; n];
    let mut f0 = vec![0.0; n];
    let mut jf = vec![0.0; n * n];
    let mut jp = vec![0.0; n * nf];
    let mut params = sol.params.clone();

    for j in 0..mesh.intervals() {
        let h = mesh.interval_len(j);
        let start = j * m * n;
        for l in 0..m {
            let s = mesh.collocation_point(j, l);
            interpolate(sol, j, l, &mut u);
            sys.rhs(s, &u, &params, &mut f0);

            // State Jacobian of f by central differences.
            for c2 in 0..n {
                let delta = FD_EPS * (1.0 + u[c2].abs());
                up.copy_from_slice(&u);
                up[c2] = u[c2] + delta;
                sys.rhs(s, &up, &params, &mut fp);
                up[c2] = u[c2] - delta;
                sys.rhs(s, &up, &params, &mut fm);
                for c in 0..n {
                    jf[c * n + c2] = (fp[c] - fm[c]) / (2.0 * delta);
                }
            }
            // Parameter Jacobian over the released entries.
            for (t, &pi) in problem.free.iter().enumerate() {
                let delta = FD_EPS * (1.0 + params[pi].abs());
                let keep = params[pi];
                params[pi] = keep + delta;
                sys.rhs(s, &u, &params, &mut fp);
                params[pi] = keep - delta;
                sys.rhs(s, &u, &params, &mut fm);
                params[pi] = keep;
                for c in 0..n {
                    jp[c * nf + t] = (fp[c] - fm[c]) / (2.0 * delta);
                }
            }

            let w = mesh.basis_at(l);
            let wp = mesh.basis_deriv_at(l);
            for c in 0..n {
                let mut du = 0.0;
                for (i, &wpi) in wp.iter().enumerate() {
                    du += wpi * sol.point(j * m + i)[c];
                }
                res.push(du - h * f0[c]);

                let r = mat.push_band_row(start, n * (m + 1));
                let row = mat.band_row_mut(r);
                for i in 0..=m {
                    for c2 in 0..n {
                        let mut v = -h * w[i] * jf[c * n + c2];
                        if c2 == c {
                            v += wp[i];
                        }
                        row.vals[i * n + c2] = v;
                    }
                }
                for t in 0..nf {
                    row.tail[t] = -h * jp[c * nf + t];
                }
            }
        }
    }

    // Boundary condition rows: dense border, nonzero at the first and last
    // base point columns and the parameter tail.
    let n_bc = sys.n_bc();
    let last = g_total - 1;
    let mut bc0 = vec![0.0; n_bc];
    sys.bc(sol.point(0), sol.point(last), &params, &mut bc0);
    let mut bcp = vec![0.0; n_bc];
    let mut bcm = vec![0.0; n_bc];
    let mut u0 = sol.point(0).to_vec();
    let mut u1 = sol.point(last).to_vec();
    let mut rows: Vec<Vec<f64>> = (0..n_bc).map(|_| vec![0.0; n_state + nf]).collect();
    for c2 in 0..n {
        let delta = FD_EPS * (1.0 + u0[c2].abs());
        let keep = u0[c2];
        u0[c2] = keep + delta;
        sys.bc(&u0, &u1, &params, &mut bcp);
        u0[c2] = keep - delta;
        sys.bc(&u0, &u1, &params, &mut bcm);
        u0[c2] = keep;
        for (b, row) in rows.iter_mut().enumerate() {
            row[c2] = (bcp[b] - bcm[b]) / (2.0 * delta);
        }
        let delta = FD_EPS * (1.0 + u1[c2].abs());
        let keep = u1[c2];
        u1[c2] = keep + delta;
        sys.bc(&u0, &u1, &params, &mut bcp);
        u1[c2] = keep - delta;
        sys.bc(&u0, &u1, &params, &mut bcm);
        u1[c2] = keep;
        for (b, row) in rows.iter_mut().enumerate() {
            row[last * n + c2] = (bcp[b] - bcm[b]) / (2.0 * delta);
        }
    }
    for (t, &pi) in problem.free.iter().enumerate() {
        let delta = FD_EPS * (1.0 + params[pi].abs());
        let keep = params[pi];
        params[pi] = keep + delta;
        sys.bc(&u0, &u1, &params, &mut bcp);
        params[pi] = keep - delta;
        sys.bc(&u0, &u1, &params, &mut bcm);
        params[pi] = keep;
        for (b, row) in rows.iter_mut().enumerate() {
            row[n_state + t] = (bcp[b] - bcm[b]) / (2.0 * delta);
        }
    }
    for (b, row) in rows.into_iter().enumerate() {
        res.push(bc0[b]);
        *mat.push_border_row() = row;
    }

    // Constraint rows.
    for cons in &problem.constraints {
        res.push(cons.residual(sol));
        let mut row = vec![0.0; n_state + nf];
        match cons {
            Constraint::Integral { integrand, .. } => {
                for j in 0..mesh.intervals() {
                    for l in 0..m {
                        let s = mesh.collocation_point(j, l);
                        interpolate(sol, j, l, &mut u);
                        let wq = mesh.quad_weight(j, l);
                        for c2 in 0..n {
                            let delta = FD_EPS * (1.0 + u[c2].abs());
                            let keep = u[c2];
                            u[c2] = keep + delta;
                            let qp = integrand(s, &u, &params);
                            u[c2] = keep - delta;
                            let qm = integrand(s, &u, &params);
                            u[c2] = keep;
                            let dq = (qp - qm) / (2.0 * delta);
                            if dq != 0.0 {
                                for (i, &wi) in mesh.basis_at(l).iter().enumerate() {
                                    row[(j * m + i) * n + c2] += wq * wi * dq;
                                }
                            }
                        }
                    }
                }
                for (t, &pi) in problem.free.iter().enumerate() {
                    let delta = FD_EPS * (1.0 + params[pi].abs());
                    let keep = params[pi];
                    let mut pp = params.clone();
                    pp[pi] = keep + delta;
                    let qp = sol.quadrature(|s, uu| integrand(s, uu, &pp));
                    pp[pi] = keep - delta;
                    let qm = sol.quadrature(|s, uu| integrand(s, uu, &pp));
                    row[n_state + t] = (qp - qm) / (2.0 * delta);
                }
            }
            Constraint::Hyperplane {
                w_values, w_params, ..
            } => {
                let scale = 1.0 / g_total as f64;
                for (c, &wv) in w_values.iter().enumerate() {
                    row[c] = scale * wv;
                }
                for (t, &pi) in problem.free.iter().enumerate() {
                    row[n_state + t] = w_params[pi];
                }
            }
        }
        *mat.push_border_row() = row;
    }

    Ok((res, mat))
}

/// Assembles and factorizes the Jacobian at `sol`, for test functions and
/// null-space queries.
pub fn factor_at<S: BvpSystem>(
    problem: &Problem<S>,
    sol: &Solution,
) -> Result<(BandedBordered, Factored)> {
    let (_res, mat) = assemble(problem, sol)?;
    let fact = mat.factor()?;
    Ok((mat, fact))
}

/// Applies a Newton update x (ordered [state columns | free parameters])
/// scaled by `step`: u <- u - step * x.
pub fn apply_update<S: BvpSystem>(
    problem: &Problem<S>,
    sol: &mut Solution,
    x: &[f64],
    step: f64,
) {
    let n_state = sol.values.len();
    for (v, d) in sol.values.iter_mut().zip(&x[..n_state]) {
        *v -= step * d;
    }
    for (t, &pi) in problem.free.iter().enumerate() {
        sol.params[pi] -= step * x[n_state + t];
    }
}

//! Damped Newton iteration on the collocated system.
//!
//! Each iteration assembles the residual and Jacobian, solves one linear
//! system, and applies the update with step halving (at most 8 halvings)
//! until the residual norm decreases. Convergence is declared on the
//! infinity norm of the full residual (collocation + boundary +
//! constraints). The factorization of the last assembled Jacobian is
//! returned with the solution so callers can evaluate test functions or
//! extract null spaces without refactorizing.

use crate::collocation::{apply_update, assemble, residual_vec};
use crate::linalg::Factored;
use crate::system::{BvpSystem, Problem, Solution};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct NewtonOpts {
    /// Convergence threshold on the residual infinity norm.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOpts {
    fn default() -> Self {
        NewtonOpts {
            tol: 1e-10,
            max_iter: 15,
            max_halvings: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    /// Residual norm after each iteration, starting with the initial guess.
    pub history: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Solves the collocated problem from `guess`. On success returns the
/// converged solution, the factorization at the last assembly, and the
/// iteration report. Divergence returns [`Error::Diverged`] carrying the
/// norm history.
pub fn solve_newton<S: BvpSystem>(
    problem: &Problem<S>,
    guess: Solution,
    opts: &NewtonOpts,
) -> Result<(Solution, Factored, NewtonReport)> {
    problem.check_well_posed()?;
    problem.check_solution_shape(&guess)?;
    let mut sol = guess;
    let mut history = Vec::new();
    let mut res = residual_vec(problem, &sol)?;
    let mut rnorm = inf_norm(&res);
    history.push(rnorm);
    let mut last_fact: Option<Factored> = None;

    for iter in 0..opts.max_iter {
        if rnorm <= opts.tol {
            let fact = match last_fact {
                Some(f) => f,
                None => assemble(problem, &sol)?.1.factor()?,
            };
            return Ok((
                sol,
                fact,
                NewtonReport {
                    iterations: iter,
                    residual: rnorm,
                    history,
                },
            ));
        }
        let (r, mat) = assemble(problem, &sol)?;
        res = r;
        let fact = mat.factor()?;
        let dx = fact.solve(&res);
        last_fact = Some(fact);

        // Damping: halve until the residual decreases.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = sol.clone();
            apply_update(problem, &mut trial, &dx, step);
            let tres = residual_vec(problem, &trial)?;
            let tnorm = inf_norm(&tres);
            if tnorm < rnorm || tnorm <= opts.tol {
                sol = trial;
                rnorm = tnorm;
                history.push(rnorm);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::Diverged {
                iterations: iter + 1,
                residual: rnorm,
                history,
            });
        }
    }
    if rnorm <= opts.tol {
        let fact = match last_fact {
            Some(f) => f,
            None => assemble(problem, &sol)?.1.factor()?,
        };
        return Ok((
            sol,
            fact,
            NewtonReport {
                iterations: opts.max_iter,
                residual: rnorm,
                history,
            },
        ));
    }
    Err(Error::Diverged {
        iterations: opts.max_iter,
        residual: rnorm,
        history,
    })
}

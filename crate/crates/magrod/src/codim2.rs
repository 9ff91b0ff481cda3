//! Two-parameter criticality curves in the spin-field plane.
//!
//! A point on such a curve is a whirling equilibrium together with a
//! marginal eigenmode: a zero real eigenvalue for the static criticality
//! curve, a purely imaginary pair for a Hopf curve. Both are posed as a
//! single boundary-value problem, base and perturbation copies coupled,
//! with the field strength released so the curve can be continued in the
//! spin rate.
//!
//! The static curve pins lambda = 0, which wipes every damping term from
//! the perturbation equations; its trace is therefore bitwise independent
//! of the damping coefficient, a useful internal consistency check. Hopf
//! curves keep the real part pinned at zero and release the frequency
//! instead; they can close into loops, which the continuation engine
//! reports by stopping on closure.

use crate::linearized::{
    norm_constraint, EigenFull, EigenSingle, COPY_I, COPY_R, PARAM_LAMBDA_I, PARAM_LAMBDA_R, PA,
    PF, PM, PX,
};
use crate::model::RodParams;
use crate::stationary::{Stationary, ID1, IF, IM, IX, PARAM_B, PARAM_OMEGA};
use crate::{Error, Result};
use magrod_bvp::{
    factor_at, near_null_space, solve_newton, Branch, Constraint, Continuation, ContinuationOpts,
    Monitor, NewtonOpts, Problem, ProblemSpec, Solution, StepOpts,
};
use nalgebra::Vector3;

/// Step and solver settings for criticality curves.
#[derive(Debug, Clone)]
pub struct Codim2Opts {
    pub step: StepOpts,
    pub newton: NewtonOpts,
    pub locate_tol: f64,
}

impl Default for Codim2Opts {
    fn default() -> Self {
        Codim2Opts {
            step: StepOpts {
                initial: 0.02,
                min: 1e-9,
                max: 0.05,
                max_steps: 2000,
            },
            newton: NewtonOpts::default(),
            locate_tol: 1e-8,
        }
    }
}

impl Codim2Opts {
    fn continuation(&self, range: (f64, f64), close: bool) -> ContinuationOpts {
        ContinuationOpts {
            step: self.step.clone(),
            newton: self.newton.clone(),
            range,
            locate_tol: self.locate_tol,
            detect_det_dips: false,
            dip_threshold: 1.5,
            stop_on_closure: close,
            null_tol: 1e-5,
        }
    }
}

/// Embeds the null direction of the stationary Jacobian at `base` as a
/// normalized perturbation copy, giving the composite start for the
/// static criticality curve. Force and moment perturbations carry over
/// directly; the director increments collapse to a rotation vector
/// alpha with 2 alpha = sum_i d_i x delta d_i, stored in director
/// components.
pub fn marginal_mode(params: &RodParams, base: &Solution) -> Result<Solution> {
    let sys = Stationary::new(params);
    let problem = Problem::square(&sys);
    let (mat, fact) = factor_at(&problem, base)?;
    let null = near_null_space(&mat, &fact, 2, 1e-4, 0x6d61_7267);
    let Some((_sigma, dir)) = null.into_iter().next() else {
        return Err(Error::NothingFound {
            what: "a marginal direction of the stationary state",
            lo: base.params[PARAM_B],
            hi: base.params[PARAM_B],
        });
    };

    let mut params_ext = base.params.clone();
    params_ext.push(0.0);
    let mut composite = Solution::zeros(base.mesh.clone(), COPY_I, params_ext);
    let dim = base.dim;
    for g in 0..base.mesh.n_base_points() {
        let u = base.point(g);
        let d = &dir[g * dim..(g + 1) * dim];
        let out = composite.point_mut(g);
        out[..dim].copy_from_slice(u);
        let w = &mut out[COPY_R..];
        for k in 0..3 {
            w[PF + k] = d[IF + k];
            w[PM + k] = d[IM + k];
            w[PX + k] = d[IX + k];
        }
        let mut alpha = Vector3::zeros();
        for i in 0..3 {
            let di = Vector3::new(u[ID1 + 3 * i], u[ID1 + 3 * i + 1], u[ID1 + 3 * i + 2]);
            let dd = Vector3::new(d[ID1 + 3 * i], d[ID1 + 3 * i + 1], d[ID1 + 3 * i + 2]);
            alpha += 0.5 * di.cross(&dd);
        }
        for j in 0..3 {
            let dj = Vector3::new(u[ID1 + 3 * j], u[ID1 + 3 * j + 1], u[ID1 + 3 * j + 2]);
            w[PA + j] = alpha.dot(&dj);
        }
    }

    let scale = crate::linearized::copy_norm2(&composite, COPY_R).sqrt();
    if scale < 1e-12 {
        return Err(Error::NothingFound {
            what: "a usable marginal mode amplitude",
            lo: base.params[PARAM_B],
            hi: base.params[PARAM_B],
        });
    }
    for g in 0..composite.mesh.n_base_points() {
        let out = composite.point_mut(g);
        for v in out[COPY_R..].iter_mut() {
            *v /= scale;
        }
    }
    Ok(composite)
}

fn single_copy_constraints<'a>() -> Vec<Constraint<'a>> {
    vec![norm_constraint(COPY_R, 1.0)]
}

/// Traces the locus of zero real eigenvalues through a singular
/// stationary state, in the spin rate with the field released. `base`
/// must sit on a branch point of the stationary family at the spin rate
/// where `omega_range` starts.
///
/// When the underlying branch point is a symmetric pitchfork, the
/// augmented system carries a structurally neutral direction: sliding
/// the base along the marginal mode changes nothing to leading order.
/// Discretization noise then caps Newton near the square root of
/// machine precision, so the solve tolerance is floored at 1e-7. The
/// neutral direction has no component on the spin or field parameters
/// and leaves the traced curve itself unharmed.
pub fn static_criticality_curve(
    params: &RodParams,
    base: &Solution,
    omega_range: (f64, f64),
    opts: &Codim2Opts,
) -> Result<Branch> {
    let sys = EigenSingle::at_zero(params);
    let guess = marginal_mode(params, base)?;
    let mut relaxed = opts.clone();
    relaxed.newton.tol = relaxed.newton.tol.max(1e-7);
    relaxed.newton.max_iter = relaxed.newton.max_iter.max(25);
    let polish = Problem::with(&sys, vec![PARAM_B], single_copy_constraints());
    let start = match solve_newton(&polish, guess.clone(), &relaxed.newton) {
        Ok((sol, _fact, _report)) => sol,
        Err(_) => guess,
    };
    let spec = ProblemSpec {
        system: &sys,
        base_free: vec![PARAM_B],
        base_constraints: single_copy_constraints(),
        principal: PARAM_OMEGA,
    };
    let mut cont = Continuation::new(spec, relaxed.continuation(omega_range, false));
    cont.monitors
        .push(Monitor::new("field", |s: &Solution| s.params[PARAM_B]));
    Ok(cont.run(start)?)
}

fn two_copy_constraints<'a>() -> Vec<Constraint<'a>> {
    vec![norm_constraint(COPY_R, 1.0), norm_constraint(COPY_I, 1.0)]
}

/// Traces a Hopf locus from a crossing found by eigenvalue tracking:
/// a full two-copy solution whose real part parameter sits at zero.
/// The real part stays pinned while the frequency and the field ride
/// along; with `close` the run stops when the loop returns to its start.
pub fn hopf_curve(
    params: &RodParams,
    crossing: &Solution,
    omega_range: (f64, f64),
    close: bool,
    opts: &Codim2Opts,
) -> Result<Branch> {
    let sys = EigenFull::new(params);
    let mut guess = crossing.clone();
    guess.params[PARAM_LAMBDA_R] = 0.0;
    let polish = Problem::with(
        &sys,
        vec![PARAM_LAMBDA_I, PARAM_B],
        two_copy_constraints(),
    );
    let (start, _fact, _report) = solve_newton(&polish, guess, &opts.newton)?;
    let spec = ProblemSpec {
        system: &sys,
        base_free: vec![PARAM_LAMBDA_I, PARAM_B],
        base_constraints: two_copy_constraints(),
        principal: PARAM_OMEGA,
    };
    let mut cont = Continuation::new(spec, opts.continuation(omega_range, close));
    cont.monitors
        .push(Monitor::new("field", |s: &Solution| s.params[PARAM_B]));
    cont.monitors.push(Monitor::new("frequency", |s: &Solution| {
        s.params[PARAM_LAMBDA_I]
    }));
    Ok(cont.run(start)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branches::{branch_point_events, switch_primary, trivial_branch, BranchOpts};

    fn deep_branch_point(params: &RodParams, opts: &BranchOpts) -> (Solution, f64) {
        let trivial = trivial_branch(params, (0.5, 0.65), opts).unwrap();
        let bp = branch_point_events(&trivial)[0];
        let germ = switch_primary(params, bp, 0, opts).unwrap();
        let b1 = germ.run(params, (bp.param, 2.2), opts).unwrap();
        let deep = branch_point_events(&b1)
            .into_iter()
            .find(|e| (e.param - 1.94).abs() < 0.05)
            .expect("deep branch point on the first primary");
        (deep.solution.clone(), deep.param)
    }

    #[test]
    fn static_criticality_curve_leaves_the_deep_branch_point() {
        let params = RodParams::electrodynamic_tether();
        let opts = BranchOpts::default();
        let (deep, b_at) = deep_branch_point(&params, &opts);
        let curve =
            static_criticality_curve(&params, &deep, (0.0, 0.6), &Codim2Opts::default()).unwrap();
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        println!(
            "start: omega = {:.3}, B = {:.5}; end: omega = {:.3}, B = {:.5} ({} points)",
            first.param,
            first.solution.params[PARAM_B],
            last.param,
            last.solution.params[PARAM_B],
            curve.points.len()
        );
        assert!((first.solution.params[PARAM_B] - b_at).abs() < 5e-4);
        assert!((last.param - 0.6).abs() < 1e-8);
        assert!(curve.points.len() > 5);
    }

    #[test]
    fn static_criticality_curve_never_feels_the_damping() {
        let params = RodParams::electrodynamic_tether();
        let opts = BranchOpts::default();
        let (deep, _) = deep_branch_point(&params, &opts);
        let run = |damping: f64| -> Vec<(f64, f64)> {
            let p = RodParams { damping, ..params };
            let curve =
                static_criticality_curve(&p, &deep, (0.0, 0.3), &Codim2Opts::default()).unwrap();
            curve
                .points
                .iter()
                .map(|pt| (pt.param, pt.solution.params[PARAM_B]))
                .collect()
        };
        let undamped = run(0.01);
        let damped = run(0.04375);
        assert_eq!(undamped.len(), damped.len());
        for (a, b) in undamped.iter().zip(&damped) {
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
        println!(
            "{} points coincide bitwise across damping values",
            undamped.len()
        );
    }

}

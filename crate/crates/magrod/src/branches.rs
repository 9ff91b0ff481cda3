//! Equilibrium branches of the rod in the magnetic field.
//!
//! The straight state solves the stationary system for every load, so the
//! trivial branch is continued in B purely to watch the determinant of
//! the collocation Jacobian. For the non-spinning rod the buckling loads
//! are double roots of the characteristic function, two eigenvalues cross
//! zero together and the determinant only dips without changing sign, so
//! the dip detector carries the burden; spin splits each double point
//! into a pair of simple sign changes.
//!
//! At a double point the two-dimensional null space mixes an x-major and
//! a y-major bending mode. Stepping off along an arbitrary combination
//! lands on mixed-mode connectors (nonzero centerline product integral)
//! or stalls between basins, so switching first rotates the null basis to
//! the principal axes of the x-deflection energy form. The x-major
//! direction seeds the first primary branch, the y-major one the second;
//! both keep the product integral at zero along their whole length.

use crate::model::RodParams;
use crate::stationary::{measure1, measure2, trivial_solution, Stationary, IM, IX, PARAM_B};
use crate::{Error, Result};
use magrod_bvp::{
    solve_newton, switch_branch, Branch, Continuation, ContinuationOpts, Event, EventKind, Mesh,
    Monitor, NewtonOpts, ProblemSpec, Solution, StepOpts,
};

/// Mesh and solver settings for stationary branch runs.
#[derive(Debug, Clone)]
pub struct BranchOpts {
    pub mesh_intervals: usize,
    pub degree: usize,
    pub step: StepOpts,
    pub newton: NewtonOpts,
    /// Minimum log|det| drop flagging a double branch point.
    pub dip_threshold: f64,
    /// Parameter window for event refinement.
    pub locate_tol: f64,
    /// Arclength of the first step off a branch point. Too small leaves
    /// the corrector in the ill-conditioned neck where two buckled
    /// families and the straight state all meet.
    pub switch_eps: f64,
}

impl Default for BranchOpts {
    fn default() -> Self {
        BranchOpts {
            mesh_intervals: 20,
            degree: 4,
            step: StepOpts {
                initial: 0.01,
                min: 1e-8,
                max: 0.02,
                max_steps: 3000,
            },
            newton: NewtonOpts::default(),
            dip_threshold: 0.7,
            locate_tol: 1e-8,
            switch_eps: 0.15,
        }
    }
}

impl BranchOpts {
    pub fn mesh(&self) -> Result<Mesh> {
        Ok(Mesh::uniform(self.mesh_intervals, self.degree)?)
    }

    fn continuation(&self, range: (f64, f64)) -> ContinuationOpts {
        ContinuationOpts {
            step: self.step.clone(),
            newton: self.newton.clone(),
            range,
            locate_tol: self.locate_tol,
            detect_det_dips: true,
            dip_threshold: self.dip_threshold,
            stop_on_closure: false,
            null_tol: 1e-5,
        }
    }
}

/// Net twisting moment along the rod. The field direction selects one
/// handedness, so every buckled branch of a given run shares its sign.
pub fn mean_twist(sol: &Solution) -> f64 {
    sol.quadrature(|_s, u| u[IM + 2])
}

fn stationary_monitors<'a>() -> Vec<Monitor<'a>> {
    vec![
        Monitor::new("measure1", measure1),
        Monitor::new("measure2", measure2),
        Monitor::new("twist", mean_twist),
    ]
}

/// Continues the straight family over `b_range`, recording branch points
/// where buckled families cross. Spin and tension ride along from
/// `params`.
pub fn trivial_branch(params: &RodParams, b_range: (f64, f64), opts: &BranchOpts) -> Result<Branch> {
    let sys = Stationary::new(params);
    let mesh = opts.mesh()?;
    let mut loads = Stationary::load_vector(params);
    loads[PARAM_B] = b_range.0;
    let start = trivial_solution(&sys, mesh, loads);
    let spec = ProblemSpec::new(&sys, PARAM_B);
    let mut cont = Continuation::new(spec, opts.continuation(b_range));
    cont.monitors = stationary_monitors();
    Ok(cont.run(start)?)
}

/// The branch-point events of a run, in order.
pub fn branch_point_events(branch: &Branch) -> Vec<&Event> {
    branch
        .events
        .iter()
        .filter(|e| {
            matches!(
                e.kind,
                EventKind::BranchPoint { .. } | EventKind::DoubleBranchPoint { .. }
            )
        })
        .collect()
}

/// Rotates a two-vector null basis to the principal axes of the
/// x-deflection energy form, x-major first, with a sign fixed by the
/// largest entry. Smaller bases pass through untouched.
pub fn xy_align(at: &Solution, basis: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    if basis.len() < 2 {
        return basis;
    }
    let dim = at.dim;
    let q = |a: &[f64], b: &[f64]| -> f64 {
        a.chunks_exact(dim)
            .zip(b.chunks_exact(dim))
            .map(|(ua, ub)| ua[IX] * ub[IX])
            .sum()
    };
    let (q00, q01, q11) = (
        q(&basis[0], &basis[0]),
        q(&basis[0], &basis[1]),
        q(&basis[1], &basis[1]),
    );
    let theta = 0.5 * (2.0 * q01).atan2(q00 - q11);
    let (c, s) = (theta.cos(), theta.sin());
    let combine = |ca: f64, cb: f64| -> Vec<f64> {
        let mut v: Vec<f64> = basis[0]
            .iter()
            .zip(&basis[1])
            .map(|(a, b)| ca * a + cb * b)
            .collect();
        let peak = v
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[peak] < 0.0 {
            for e in v.iter_mut() {
                *e = -*e;
            }
        }
        v
    };
    let mut major = combine(c, s);
    let mut minor = combine(-s, c);
    if q(&major, &major) < q(&minor, &minor) {
        std::mem::swap(&mut major, &mut minor);
    }
    vec![major, minor]
}

/// A germ of a bifurcating branch: the stepped-off solution and the
/// branch point it came from.
pub struct Germ {
    pub start: Solution,
    pub at: Solution,
}

impl Germ {
    /// Continues the germ away from its branch point over `b_range`,
    /// watching for secondary branch points and folds.
    pub fn run(&self, params: &RodParams, b_range: (f64, f64), opts: &BranchOpts) -> Result<Branch> {
        let sys = Stationary::new(params);
        let spec = ProblemSpec::new(&sys, PARAM_B);
        let mut cont = Continuation::new(spec, opts.continuation(b_range));
        cont.monitors = stationary_monitors();
        Ok(cont.run_from_pair(&self.at, self.start.clone())?)
    }
}

/// Steps off a branch point onto the bifurcating family. At a double
/// point `which` 0 takes the x-major null direction and 1 the y-major
/// one; at a simple point `which` must be 0. The other sign of each
/// direction gives the half-turn image with identical scalar measures.
pub fn switch_primary(
    params: &RodParams,
    event: &Event,
    which: usize,
    opts: &BranchOpts,
) -> Result<Germ> {
    let sys = Stationary::new(params);
    let spec = ProblemSpec::new(&sys, PARAM_B);
    let start = switch_branch(
        &spec,
        &event.solution,
        1.0,
        which,
        opts.switch_eps,
        &opts.newton,
        1e-5,
        Some(&xy_align),
    )?;
    if measure1(&start) < 1e-4 * opts.switch_eps {
        return Err(Error::NothingFound {
            what: "a buckled germ at the branch point",
            lo: event.param,
            hi: event.param,
        });
    }
    Ok(Germ {
        start,
        at: event.solution.clone(),
    })
}

/// Probes a double point along cos(angle) x-major + sin(angle) y-major,
/// for mapping the mixed-mode connectors around a primary pair.
pub fn step_off(
    params: &RodParams,
    at: &Solution,
    angle: f64,
    direction: f64,
    eps: f64,
    newton: &NewtonOpts,
) -> Result<Solution> {
    let sys = Stationary::new(params);
    let spec = ProblemSpec::new(&sys, PARAM_B);
    let rotate = move |sol: &Solution, basis: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let basis = xy_align(sol, basis);
        if basis.len() < 2 {
            return basis;
        }
        let (c, s) = (angle.cos(), angle.sin());
        let combo: Vec<f64> = basis[0]
            .iter()
            .zip(&basis[1])
            .map(|(a, b)| c * a + s * b)
            .collect();
        vec![combo]
    };
    Ok(switch_branch(
        &spec, at, direction, 0, eps, newton, 1e-5, Some(&rotate),
    )?)
}

/// The two primary branches through the first buckling point and the
/// events found along them.
pub struct Primaries {
    pub b1: Branch,
    pub b2: Branch,
}

/// Switches onto both primaries at a double branch point and continues
/// them up to `b_to`.
pub fn primary_branches(
    params: &RodParams,
    event: &Event,
    b_to: f64,
    opts: &BranchOpts,
) -> Result<Primaries> {
    let g1 = switch_primary(params, event, 0, opts)?;
    let g2 = switch_primary(params, event, 1, opts)?;
    let range = (event.param, b_to);
    Ok(Primaries {
        b1: g1.run(params, range, opts)?,
        b2: g2.run(params, range, opts)?,
    })
}

/// Re-solves a branch at an exact parameter value from its nearest
/// stored point.
pub fn solution_at(params: &RodParams, branch: &Branch, b: f64, opts: &BranchOpts) -> Result<Solution> {
    let near = branch
        .points
        .iter()
        .min_by(|x, y| {
            (x.param - b)
                .abs()
                .partial_cmp(&(y.param - b).abs())
                .unwrap()
        })
        .ok_or(Error::NothingFound {
            what: "points on the branch",
            lo: b,
            hi: b,
        })?;
    let sys = Stationary::new(params);
    let spec = ProblemSpec::new(&sys, PARAM_B);
    let cont = Continuation::new(spec, opts.continuation((b - 1.0, b + 1.0)));
    Ok(cont.solve_at_param(&near.solution, b)?)
}

/// Solves the stationary system at pinned loads from a guess, for moving
/// between meshes or re-solving a stored snapshot.
pub fn solve_stationary(
    params: &RodParams,
    guess: Solution,
    newton: &NewtonOpts,
) -> Result<Solution> {
    let sys = Stationary::new(params);
    let problem = magrod_bvp::Problem::square(&sys);
    let (sol, _f, _r) = solve_newton(&problem, guess, newton)?;
    Ok(sol)
}

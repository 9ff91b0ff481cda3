//! Eigenvalues of the linearized rod and their continuation.
//!
//! The stability of an equilibrium is read off the spectrum of the
//! perturbation boundary value problem over it. Eigenvalues are found and
//! followed in three stages:
//!
//!  1. scan: lambda sweeps a grid and the determinant sign of the frozen
//!     base 12-dim collocation Jacobian is recorded; each sign change is
//!     bisected to an eigenvalue. For the undamped non-spinning rod the
//!     spectrum on the imaginary axis is captured by a single real copy
//!     with lambda^2 = -lambda_i^2.
//!  2. grow: the near-null vector of the singular Jacobian seeds the
//!     composite base + eigenfunction system, normalized so the integral
//!     of |x^t|^2 + |alpha|^2 is one, with lambda released; one Newton
//!     polish makes the pair consistent to solver tolerance.
//!  3. lift: the single copy is duplicated into the full two-copy system,
//!     both copy norms pinned to one and both parts of lambda released,
//!     ready for continuation in spin, field or damping where the copies
//!     genuinely couple.
//!
//! [`track_eigenvalue`] then continues a lifted mode in a chosen
//! parameter, watching the real part for stability exchanges: a zero of
//! lambda_r with |lambda_i| above threshold is a Hopf point, with
//! |lambda_i| at zero a steady exchange. Mode identity along the branch
//! is checked by the overlap of consecutive eigenfunctions; a drop below
//! one half means the tracker slid onto a different mode and is an error,
//! not a warning.

use crate::linearized::{
    norm_constraint, copy_norm2, EigenFull, EigenSingle, FrozenBase, LambdaKind, Linearized,
    BASE_DIM, COPY_I, COPY_R, PA, PARAM_LAMBDA, PARAM_LAMBDA_I, PARAM_LAMBDA_R, PERT_DIM, PX,
};
use crate::model::RodParams;
use crate::oracles;
use crate::stationary::PARAM_OMEGA;
use crate::{Error, Result};
use magrod_bvp::{
    factor_at, near_null_space, solve_newton, Branch, Continuation, ContinuationOpts, EventKind,
    Monitor, NewtonOpts, Problem, ProblemSpec, Solution,
};

/// Threshold on |lambda_i| separating Hopf points from steady exchanges.
pub const HOPF_IMAG_MIN: f64 = 1e-6;

/// An eigenvalue with its normalized two-copy eigenfunction riding on the
/// base state (42-dim composite solution).
#[derive(Clone)]
pub struct Mode {
    pub lambda: (f64, f64),
    pub sol: Solution,
}

/// Scan and normalization controls for [`eigen_init`].
#[derive(Debug, Clone)]
pub struct EigenOpts {
    /// Grid points of the determinant scan.
    pub n_grid: usize,
    /// Scan ceiling as a multiple of the highest requested unperturbed
    /// frequency.
    pub hi_factor: f64,
    /// Scan floor as a fraction of the ceiling.
    pub lo_frac: f64,
    pub newton: NewtonOpts,
}

impl Default for EigenOpts {
    fn default() -> Self {
        EigenOpts {
            n_grid: 400,
            hi_factor: 1.2,
            lo_frac: 1e-4,
            newton: NewtonOpts::default(),
        }
    }
}

fn require_single_copy(params: &RodParams, base: &Solution) -> Result<()> {
    if params.omega != 0.0 || params.damping != 0.0 || base.params[PARAM_OMEGA] != 0.0 {
        return Err(Error::InvalidParameters {
            why: format!(
                "single-copy eigenvalue scan needs omega = damping = 0, \
                 got omega = {}, damping = {}",
                base.params[PARAM_OMEGA], params.damping
            ),
        });
    }
    Ok(())
}

/// Locates eigenvalues in (lo, hi) by determinant sign changes of the
/// frozen-base perturbation Jacobian, bisected to absolute precision
/// 1e-10 (1 + lambda). `kind` selects the axis: Imag finds neutral
/// frequencies, Real finds growth rates. Valid while spin and damping
/// vanish, where the two copies of the complex problem decouple.
pub fn scan_eigenvalues(
    params: &RodParams,
    base: &Solution,
    kind: LambdaKind,
    lo: f64,
    hi: f64,
    n_grid: usize,
) -> Result<Vec<f64>> {
    require_single_copy(params, base)?;
    if !(hi > lo) || n_grid < 8 {
        return Err(Error::InvalidParameters {
            why: format!("bad scan window ({lo}, {hi}) x {n_grid}"),
        });
    }
    let lin = Linearized::new(params);
    let frozen = FrozenBase::new(lin, base, kind);
    let problem = Problem::square(&frozen);
    let loads = [base.params[0], base.params[1], base.params[2]];

    let det = |lambda: f64| -> Result<Option<i8>> {
        let sol = Solution::zeros(
            base.mesh.clone(),
            PERT_DIM,
            vec![loads[0], loads[1], loads[2], lambda],
        );
        match factor_at(&problem, &sol) {
            Ok((_mat, fact)) => Ok(Some(fact.det_sign())),
            Err(magrod_bvp::Error::Singular { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };

    let mut roots = Vec::new();
    let mut prev: Option<(f64, i8)> = None;
    for k in 0..=n_grid {
        let lam = lo + (hi - lo) * k as f64 / n_grid as f64;
        match det(lam)? {
            // An exactly singular grid node is itself an eigenvalue.
            None => {
                roots.push(lam);
                prev = None;
            }
            Some(sign) => {
                if let Some((plam, psign)) = prev {
                    if sign != psign {
                        roots.push(bisect(&det, plam, psign, lam)?);
                    }
                }
                prev = Some((lam, sign));
            }
        }
    }
    Ok(roots)
}

fn bisect(
    det: &impl Fn(f64) -> Result<Option<i8>>,
    mut lo: f64,
    sign_lo: i8,
    mut hi: f64,
) -> Result<f64> {
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-10 * (1.0 + hi.abs()) {
            return Ok(mid);
        }
        match det(mid)? {
            None => return Ok(mid),
            Some(s) if s == sign_lo => lo = mid,
            Some(_) => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grows the eigenfunction at a located eigenvalue into the normalized
/// base + single-copy composite. `index` only labels errors.
pub fn grow_mode(
    params: &RodParams,
    base: &Solution,
    lambda: f64,
    kind: LambdaKind,
    index: usize,
    newton: &NewtonOpts,
) -> Result<Solution> {
    require_single_copy(params, base)?;
    let lin = Linearized::new(params);
    let frozen = FrozenBase::new(lin, base, kind);
    let square = Problem::square(&frozen);
    let loads = [base.params[0], base.params[1], base.params[2]];
    let at = Solution::zeros(
        base.mesh.clone(),
        PERT_DIM,
        vec![loads[0], loads[1], loads[2], lambda],
    );
    let (mat, fact) = factor_at(&square, &at)?;
    let null = near_null_space(&mat, &fact, 2, 1e-4, 0x4549_4745);
    let phi = match null.first() {
        Some((_sigma, v)) => v,
        None => {
            return Err(Error::NothingFound {
                what: "null direction at the scanned eigenvalue",
                lo: lambda,
                hi: lambda,
            })
        }
    };

    let n_pts = base.mesh.n_base_points();
    let dim = BASE_DIM + PERT_DIM;
    let mut comp = Solution::zeros(
        base.mesh.clone(),
        dim,
        vec![loads[0], loads[1], loads[2], lambda],
    );
    for g in 0..n_pts {
        let point = comp.point_mut(g);
        point[..BASE_DIM].copy_from_slice(base.point(g));
        point[BASE_DIM..].copy_from_slice(&phi[g * PERT_DIM..(g + 1) * PERT_DIM]);
    }
    let scale = copy_norm2(&comp, COPY_R).sqrt();
    for g in 0..n_pts {
        for v in &mut comp.point_mut(g)[BASE_DIM..] {
            *v /= scale;
        }
    }

    let sys = EigenSingle::new(params, kind)?;
    let problem = Problem::with(
        &sys,
        vec![PARAM_LAMBDA],
        vec![norm_constraint(COPY_R, 1.0)],
    );
    let (sol, _fact, _rep) = solve_newton(&problem, comp, newton)?;
    let moved = (sol.params[PARAM_LAMBDA] - lambda).abs();
    if moved > 0.03 {
        return Err(Error::ModeLost {
            mode: index,
            at: lambda,
            why: format!(
                "normalization polish moved lambda by {moved:.2e}, onto a different mode"
            ),
        });
    }
    Ok(sol)
}

/// Lifts a normalized single-copy solution to the two-copy system. For
/// the undamped non-spinning rod both quadrature components of the
/// eigenfunction equal the single copy, so the lift duplicates it,
/// releases both parts of lambda and polishes.
pub fn lift_mode(params: &RodParams, single: &Solution, newton: &NewtonOpts) -> Result<Mode> {
    let sys = EigenFull::new(params);
    let dim = BASE_DIM + 2 * PERT_DIM;
    let lambda = single.params[PARAM_LAMBDA];
    let n_pts = single.mesh.n_base_points();
    let mut comp = Solution::zeros(
        single.mesh.clone(),
        dim,
        vec![
            single.params[0],
            single.params[1],
            single.params[2],
            0.0,
            lambda,
        ],
    );
    for g in 0..n_pts {
        let src = single.point(g);
        let point = comp.point_mut(g);
        point[..COPY_I].copy_from_slice(src);
        point.copy_within(COPY_R..COPY_I, COPY_I);
    }
    let problem = Problem::with(
        &sys,
        vec![PARAM_LAMBDA_R, PARAM_LAMBDA_I],
        vec![norm_constraint(COPY_R, 1.0), norm_constraint(COPY_I, 1.0)],
    );
    let (sol, _fact, _rep) = solve_newton(&problem, comp, newton)?;
    Ok(Mode {
        lambda: (sol.params[PARAM_LAMBDA_R], sol.params[PARAM_LAMBDA_I]),
        sol,
    })
}

/// Re-solves a lifted mode under the material parameters in `params`
/// (typically after changing the damping), keeping the loads stored in
/// the guess. The eigenvalue moves to wherever the new spectrum puts it.
pub fn refine_mode(params: &RodParams, guess: Solution, newton: &NewtonOpts) -> Result<Mode> {
    let lin = Linearized::new(params);
    lin.check_damping(guess.params[PARAM_LAMBDA_R], guess.params[PARAM_LAMBDA_I])?;
    let sys = EigenFull::new(params);
    let problem = Problem::with(
        &sys,
        vec![PARAM_LAMBDA_R, PARAM_LAMBDA_I],
        vec![norm_constraint(COPY_R, 1.0), norm_constraint(COPY_I, 1.0)],
    );
    let (sol, _fact, _rep) = solve_newton(&problem, guess, newton)?;
    Ok(Mode {
        lambda: (sol.params[PARAM_LAMBDA_R], sol.params[PARAM_LAMBDA_I]),
        sol,
    })
}

/// Finds the lowest `n_modes` imaginary-axis eigenvalues over `base` and
/// returns them lifted and normalized. Needs the undamped non-spinning
/// rod; the scan ceiling comes from the straight-rod frequencies.
pub fn eigen_init(
    params: &RodParams,
    base: &Solution,
    n_modes: usize,
    opts: &EigenOpts,
) -> Result<Vec<Mode>> {
    require_single_copy(params, base)?;
    let freqs = oracles::unperturbed_frequencies(params, n_modes);
    let hi = opts.hi_factor * freqs[n_modes - 1].0;
    let lo = opts.lo_frac * hi;
    let roots = scan_eigenvalues(params, base, LambdaKind::Imag, lo, hi, opts.n_grid)?;
    if roots.len() < n_modes {
        return Err(Error::NothingFound {
            what: "imaginary-axis eigenvalues",
            lo,
            hi,
        });
    }
    let mut modes = Vec::with_capacity(n_modes);
    for (i, &lam) in roots.iter().take(n_modes).enumerate() {
        let single = grow_mode(params, base, lam, LambdaKind::Imag, i, &opts.newton)?;
        modes.push(lift_mode(params, &single, &opts.newton)?);
    }
    Ok(modes)
}

/// Normalized overlap of the eigenfunction parts of two composite
/// solutions on the same mesh, the quantity that keeps mode labels honest
/// during tracking. Uses x^t and alpha of both copies.
pub fn mode_overlap(a: &Solution, b: &Solution) -> f64 {
    let fields = [
        COPY_R + PA,
        COPY_R + PX,
        COPY_I + PA,
        COPY_I + PX,
    ];
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for g in 0..a.mesh.n_base_points() {
        let pa = a.point(g);
        let pb = b.point(g);
        for &at in &fields {
            for k in at..at + 3 {
                sab += pa[k] * pb[k];
                saa += pa[k] * pa[k];
                sbb += pb[k] * pb[k];
            }
        }
    }
    let denom = (saa * sbb).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        sab / denom
    }
}

/// A zero of lambda_r with nonvanishing frequency met during tracking.
#[derive(Debug, Clone)]
pub struct HopfPoint {
    pub param: f64,
    pub lambda_i: f64,
}

pub struct TrackedMode {
    pub branch: Branch,
    pub hopf: Vec<HopfPoint>,
    /// Zeros of lambda_r with |lambda_i| below threshold: steady
    /// stability exchanges.
    pub real_zeros: Vec<f64>,
}

impl TrackedMode {
    /// (principal parameter, lambda_r, lambda_i) along the branch.
    pub fn lambda_path(&self, principal: usize) -> Vec<(f64, f64, f64)> {
        self.branch
            .points
            .iter()
            .map(|p| {
                (
                    p.solution.params[principal],
                    p.solution.params[PARAM_LAMBDA_R],
                    p.solution.params[PARAM_LAMBDA_I],
                )
            })
            .collect()
    }
}

/// Continues a lifted mode in the principal parameter over
/// `opts.range`, both copy norms pinned and lambda free. Zeros of
/// lambda_r are refined and classified; consecutive eigenfunctions must
/// overlap by more than one half or the mode identity is lost.
pub fn track_eigenvalue(
    params: &RodParams,
    mode: &Mode,
    mode_index: usize,
    principal: usize,
    opts: ContinuationOpts,
) -> Result<TrackedMode> {
    let lin = Linearized::new(params);
    lin.check_damping(mode.lambda.0, mode.lambda.1)?;
    let sys = EigenFull::new(params);
    let spec = ProblemSpec {
        system: &sys,
        base_free: vec![PARAM_LAMBDA_R, PARAM_LAMBDA_I],
        base_constraints: vec![norm_constraint(COPY_R, 1.0), norm_constraint(COPY_I, 1.0)],
        principal,
    };
    let mut cont = Continuation::new(spec, opts);
    cont.monitors.push(Monitor::with_zero_detection(
        "lambda_r",
        |s: &Solution| s.params[PARAM_LAMBDA_R],
    ));
    cont.monitors
        .push(Monitor::new("lambda_i", |s: &Solution| {
            s.params[PARAM_LAMBDA_I]
        }));
    let branch = cont.run(mode.sol.clone())?;

    for pair in branch.points.windows(2) {
        let ov = mode_overlap(&pair[0].solution, &pair[1].solution);
        if ov.abs() < 0.5 {
            return Err(Error::ModeLost {
                mode: mode_index,
                at: pair[1].param,
                why: format!("consecutive eigenfunction overlap fell to {ov:.3}"),
            });
        }
    }

    let mut hopf = Vec::new();
    let mut real_zeros = Vec::new();
    for ev in &branch.events {
        if let EventKind::MonitorZero { index: 0 } = ev.kind {
            let li = ev.solution.params[PARAM_LAMBDA_I];
            if li.abs() > HOPF_IMAG_MIN {
                hopf.push(HopfPoint {
                    param: ev.param,
                    lambda_i: li,
                });
            } else {
                real_zeros.push(ev.param);
            }
        }
    }
    Ok(TrackedMode {
        branch,
        hopf,
        real_zeros,
    })
}

//! Pseudo-arclength continuation with test-function event detection.
//!
//! A branch is a sequence of converged solutions of the extended problem
//!
//!   base boundary conditions and constraints,
//!   base free parameters + the principal continuation parameter,
//!   one arclength hyperplane  inner(X - X_k, t_k) = ds,
//!
//! where t_k is the normalized secant tangent and inner() the base-point
//! scaled dot product of [`crate::system::continuation_inner`]. The first
//! step uses the pure parameter direction as tangent.
//!
//! At every accepted point three test quantities are recorded: the sign
//! and log-magnitude of the bordered Jacobian determinant, and the
//! principal component of the tangent. A determinant sign flip brackets a
//! branch point; a tangent component sign change brackets a fold; a sharp
//! local dip of log|det| without a sign change brackets a double branch
//! point, where two null directions cross simultaneously and the sign
//! test is blind. Events are refined by bisection (signs) or golden
//! section (extrema) down to a parameter window of `locate_tol`, then
//! confirmed against the null space of the parameter-frozen Jacobian;
//! unconfirmed candidates are dropped.

use crate::collocation::factor_at;
use crate::linalg::near_null_space;
use crate::newton::{solve_newton, NewtonOpts};
use crate::system::{continuation_inner, BvpSystem, Constraint, Problem, Solution};
use crate::{Error, Result};

/// Step length control for pseudo-arclength continuation.
#[derive(Debug, Clone)]
pub struct StepOpts {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub max_steps: usize,
}

impl Default for StepOpts {
    fn default() -> Self {
        StepOpts {
            initial: 0.01,
            min: 1e-9,
            max: 0.1,
            max_steps: 400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationOpts {
    pub step: StepOpts,
    pub newton: NewtonOpts,
    /// Principal parameter range (start, end); start may exceed end to
    /// continue downward.
    pub range: (f64, f64),
    /// Parameter window for event refinement.
    pub locate_tol: f64,
    /// Enables the log|det| dip test for double branch points.
    pub detect_det_dips: bool,
    /// Minimum log|det| drop against both neighbors to call a dip.
    pub dip_threshold: f64,
    /// Stop when the branch returns to its starting point (closed curve).
    pub stop_on_closure: bool,
    /// Residual threshold on null-space confirmation of branch points,
    /// relative to the Jacobian scale.
    pub null_tol: f64,
}

impl Default for ContinuationOpts {
    fn default() -> Self {
        ContinuationOpts {
            step: StepOpts::default(),
            newton: NewtonOpts::default(),
            range: (0.0, 1.0),
            locate_tol: 1e-8,
            detect_det_dips: false,
            dip_threshold: 1.5,
            stop_on_closure: false,
            null_tol: 1e-5,
        }
    }
}

/// The problem skeleton a continuation run extends: system, base released
/// parameters, base constraints, and the principal parameter index.
pub struct ProblemSpec<'a, S: BvpSystem> {
    pub system: &'a S,
    pub base_free: Vec<usize>,
    pub base_constraints: Vec<Constraint<'a>>,
    pub principal: usize,
}

impl<'a, S: BvpSystem> ProblemSpec<'a, S> {
    pub fn new(system: &'a S, principal: usize) -> Self {
        ProblemSpec {
            system,
            base_free: Vec::new(),
            base_constraints: Vec::new(),
            principal,
        }
    }

    /// The square problem with the principal parameter frozen.
    pub fn square_problem(&self) -> Problem<'a, S> {
        Problem::with(
            self.system,
            self.base_free.clone(),
            self.base_constraints.clone(),
        )
    }

    /// The arclength-extended problem.
    pub fn extended_problem(&self, hyper: Constraint<'a>) -> Problem<'a, S> {
        let mut free = self.base_free.clone();
        free.push(self.principal);
        let mut cons = self.base_constraints.clone();
        cons.push(hyper);
        Problem::with(self.system, free, cons)
    }
}

/// Named scalar functional recorded along the branch; `detect_zero` turns
/// its sign changes into refined events.
pub struct Monitor<'a> {
    pub name: String,
    pub f: Box<dyn Fn(&Solution) -> f64 + 'a>,
    pub detect_zero: bool,
}

impl<'a> Monitor<'a> {
    pub fn new(name: &str, f: impl Fn(&Solution) -> f64 + 'a) -> Self {
        Monitor {
            name: name.into(),
            f: Box::new(f),
            detect_zero: false,
        }
    }

    pub fn with_zero_detection(name: &str, f: impl Fn(&Solution) -> f64 + 'a) -> Self {
        Monitor {
            name: name.into(),
            f: Box::new(f),
            detect_zero: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// Simple branch point: determinant sign flip, confirmed null space.
    BranchPoint { null_dim: usize },
    /// Double branch point: log|det| dip without a sign change.
    DoubleBranchPoint { null_dim: usize },
    /// Fold in the principal parameter.
    Fold,
    /// Zero crossing of monitor `index`.
    MonitorZero { index: usize },
}

#[derive(Clone)]
pub struct Event {
    pub kind: EventKind,
    pub solution: Solution,
    pub param: f64,
    /// Indices of the accepted points bracketing the event.
    pub between: (usize, usize),
}

impl std::fmt::Debug for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Event")
            .field("kind", &self.kind)
            .field("param", &self.param)
            .field("between", &self.between)
            .finish()
    }
}

#[derive(Clone)]
pub struct BranchPoint {
    pub solution: Solution,
    pub param: f64,
    pub det_sign: i8,
    pub log_abs_det: f64,
    /// Principal component of the incoming normalized tangent.
    pub tangent_principal: f64,
    pub monitors: Vec<f64>,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    RangeEnd,
    MaxSteps,
    StepUnderflow { last_step: f64 },
    Closed,
    CorrectorFailed { at_param: f64, detail: String },
}

pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub events: Vec<Event>,
    pub stop: StopReason,
}

impl Branch {
    pub fn params(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.param).collect()
    }
}

/// Tangent data: full-length value and parameter components, normalized
/// under the continuation inner product.
#[derive(Clone)]
struct Tangent {
    values: Vec<f64>,
    params: Vec<f64>,
}

impl Tangent {
    fn normalize(&mut self, n_base_points: usize) -> f64 {
        let nrm = continuation_inner(
            &self.values,
            &self.params,
            &self.values,
            &self.params,
            n_base_points,
        )
        .sqrt();
        if nrm > 0.0 {
            for v in self.values.iter_mut() {
                *v /= nrm;
            }
            for p in self.params.iter_mut() {
                *p /= nrm;
            }
        }
        nrm
    }

    fn secant(from: &Solution, to: &Solution) -> Tangent {
        let values = to
            .values
            .iter()
            .zip(&from.values)
            .map(|(a, b)| a - b)
            .collect();
        let params = to
            .params
            .iter()
            .zip(&from.params)
            .map(|(a, b)| a - b)
            .collect();
        Tangent { values, params }
    }
}

pub struct Continuation<'a, S: BvpSystem> {
    pub spec: ProblemSpec<'a, S>,
    pub opts: ContinuationOpts,
    pub monitors: Vec<Monitor<'a>>,
    /// Optional basis alignment for branch switching at double branch
    /// points (for example symmetry projection); receives the solution at
    /// the branch point and the raw null basis.
    pub align: Option<Box<dyn Fn(&Solution, Vec<Vec<f64>>) -> Vec<Vec<f64>> + 'a>>,
}

impl<'a, S: BvpSystem> Continuation<'a, S> {
    pub fn new(spec: ProblemSpec<'a, S>, opts: ContinuationOpts) -> Self {
        Continuation {
            spec,
            opts,
            monitors: Vec::new(),
            align: None,
        }
    }

    fn hyperplane(&self, refp: &Solution, tangent: &Tangent, ds: f64) -> Constraint<'a> {
        Constraint::Hyperplane {
            ref_values: refp.values.clone(),
            ref_params: refp.params.clone(),
            w_values: tangent.values.clone(),
            w_params: tangent.params.clone(),
            offset: ds,
        }
    }

    fn predict(&self, from: &Solution, tangent: &Tangent, ds: f64) -> Solution {
        let mut pred = from.clone();
        for (v, t) in pred.values.iter_mut().zip(&tangent.values) {
            *v += ds * t;
        }
        for (p, t) in pred.params.iter_mut().zip(&tangent.params) {
            *p += ds * t;
        }
        pred
    }

    /// Corrector solve on the arclength-extended problem.
    fn correct(
        &self,
        from: &Solution,
        tangent: &Tangent,
        ds: f64,
    ) -> Result<(Solution, crate::linalg::Factored, usize)> {
        let problem = self.spec.extended_problem(self.hyperplane(from, tangent, ds));
        let guess = self.predict(from, tangent, ds);
        let (sol, fact, rep) = solve_newton(&problem, guess, &self.opts.newton)?;
        Ok((sol, fact, rep.iterations))
    }

    fn record_point(
        &self,
        sol: Solution,
        fact: &crate::linalg::Factored,
        tangent_principal: f64,
        iterations: usize,
    ) -> BranchPoint {
        let monitors = self.monitors.iter().map(|m| (m.f)(&sol)).collect();
        BranchPoint {
            param: sol.params[self.spec.principal],
            det_sign: fact.det_sign(),
            log_abs_det: fact.log_abs_det(),
            tangent_principal,
            monitors,
            newton_iterations: iterations,
            solution: sol,
        }
    }

    /// Runs the continuation from `start` (corrected first if necessary).
    /// The first predictor moves along the pure parameter direction.
    pub fn run(&self, start: Solution) -> Result<Branch> {
        self.run_inner(start, None)
    }

    /// Runs the continuation from `start` with the initial tangent taken as
    /// the secant from `reference` to `start`. This is how a freshly
    /// switched branch is continued: `reference` is the branch point and
    /// `start` the stepped-off solution, so the first corrector plane is
    /// transversal to the parent branch instead of containing it.
    pub fn run_from_pair(&self, reference: &Solution, start: Solution) -> Result<Branch> {
        let mut t = Tangent::secant(reference, &start);
        let nrm = t.normalize(start.mesh.n_base_points());
        if nrm == 0.0 {
            return Err(Error::BadStart {
                why: "reference and start coincide, no tangent direction".into(),
            });
        }
        self.run_inner(start, Some(t))
    }

    fn run_inner(&self, start: Solution, initial_tangent: Option<Tangent>) -> Result<Branch> {
        let (a, b) = self.opts.range;
        let dir = if b >= a { 1.0 } else { -1.0 };
        let mut events: Vec<Event> = Vec::new();

        // Correct the starting point with the principal parameter frozen at
        // its own value. Callers position the start; a branch-switched start
        // sits slightly off the nominal range edge and must stay there, not
        // be dragged back onto the parent branch.
        let square = self.spec.square_problem();
        let (first, _fact0, it0) =
            solve_newton(&square, start, &self.opts.newton).map_err(|e| Error::BadStart {
                why: format!("start correction failed: {e}"),
            })?;

        // Determinant data for the first point under the natural bordering
        // (tangent = pure parameter direction unless a pair seeded it).
        let n_params = self.spec.system.n_params();
        let mut t0 = initial_tangent.unwrap_or_else(|| Tangent {
            values: vec![0.0; first.values.len()],
            params: {
                let mut p = vec![0.0; n_params];
                p[self.spec.principal] = dir;
                p
            },
        });
        t0.normalize(first.mesh.n_base_points());
        let ext0 = self
            .spec
            .extended_problem(self.hyperplane(&first, &t0, 0.0));
        let (_m0, f0) = factor_at(&ext0, &first)?;
        let mut points = vec![self.record_point(first, &f0, dir, it0.iterations)];

        if a == b {
            return Ok(Branch {
                points,
                events,
                stop: StopReason::RangeEnd,
            });
        }

        let mut tangent = t0;
        let mut ds = self.opts.step.initial;
        let mut stop = StopReason::MaxSteps;

        'steps: while points.len() <= self.opts.step.max_steps {
            let prev = points.last().expect("at least the start point");
            match self.correct(&prev.solution, &tangent, ds) {
                Ok((sol, fact, iters)) => {
                    let p_new = sol.params[self.spec.principal];
                    let (lo, hi) = (a.min(b), a.max(b));
                    // The far end always stops the run; the near end only
                    // after the branch has moved into the interior, so a
                    // start hovering just outside it is not cut short.
                    let past_far = (dir > 0.0 && p_new > hi + 1e-14)
                        || (dir < 0.0 && p_new < lo - 1e-14);
                    let past_near = points.len() >= 3
                        && ((dir > 0.0 && p_new < lo - 1e-14)
                            || (dir < 0.0 && p_new > hi + 1e-14));
                    if past_far || past_near {
                        // Finish exactly on the range boundary.
                        let bound = if p_new < lo { lo } else { hi };
                        if let Ok(endpoint) = self.solve_at_param(&sol, bound) {
                            let (_m, f) = factor_at(
                                &self
                                    .spec
                                    .extended_problem(self.hyperplane(&endpoint, &tangent, 0.0)),
                                &endpoint,
                            )?;
                            let tp = tangent.params[self.spec.principal];
                            points.push(self.record_point(endpoint, &f, tp, 0));
                            self.detect_events(&mut points, &mut events, &tangent)?;
                        }
                        stop = StopReason::RangeEnd;
                        break 'steps;
                    }

                    let new_tangent = {
                        let mut t = Tangent::secant(&prev.solution, &sol);
                        t.normalize(sol.mesh.n_base_points());
                        t
                    };
                    let tp = new_tangent.params[self.spec.principal];
                    points.push(self.record_point(sol, &fact, tp, iters));
                    tangent = new_tangent;

                    self.detect_events(&mut points, &mut events, &tangent)?;

                    if self.opts.stop_on_closure && points.len() > 5 {
                        let firstp = &points[0];
                        let lastp = points.last().expect("nonempty");
                        let d = distance(&firstp.solution, &lastp.solution);
                        if d < 0.75 * ds {
                            stop = StopReason::Closed;
                            break 'steps;
                        }
                    }

                    if iters <= 3 {
                        ds = (ds * 2.0).min(self.opts.step.max);
                    } else if iters >= 6 {
                        ds = (ds * 0.5).max(self.opts.step.min);
                    }
                }
                Err(_e) => {
                    ds *= 0.5;
                    if ds < self.opts.step.min {
                        stop = StopReason::StepUnderflow { last_step: ds };
                        break 'steps;
                    }
                }
            }
        }
        Ok(Branch {
            points,
            events,
            stop,
        })
    }

    /// Solves the square problem with the principal parameter pinned to
    /// `value`, warm started from `guess`.
    pub fn solve_at_param(&self, guess: &Solution, value: f64) -> Result<Solution> {
        let square = self.spec.square_problem();
        let mut g = guess.clone();
        g.params[self.spec.principal] = value;
        let (sol, _f, _r) = solve_newton(&square, g, &self.opts.newton)?;
        Ok(sol)
    }

    /// Scans the last step (and, for dips, the last two) for events.
    fn detect_events(
        &self,
        points: &mut Vec<BranchPoint>,
        events: &mut Vec<Event>,
        _tangent: &Tangent,
    ) -> Result<()> {
        let k = points.len() - 1;
        if k == 0 {
            return Ok(());
        }
        // Determinant sign flip: simple branch point.
        if points[k - 1].det_sign != points[k].det_sign {
            if let Some(ev) = self.refine_sign_event(&points[k - 1], &points[k], k)? {
                events.push(ev);
            }
        }
        // Fold: principal tangent component changes sign.
        if points[k - 1].tangent_principal * points[k].tangent_principal < 0.0
            && points[k - 1].tangent_principal.abs() > 1e-12
        {
            if let Some(ev) = self.refine_fold(&points[k - 1], &points[k], k)? {
                events.push(ev);
            }
        }
        // Monitor zero crossings.
        for (mi, m) in self.monitors.iter().enumerate() {
            if !m.detect_zero {
                continue;
            }
            let (va, vb) = (points[k - 1].monitors[mi], points[k].monitors[mi]);
            if va * vb < 0.0 {
                if let Some(ev) = self.refine_monitor_zero(&points[k - 1], &points[k], mi, k)? {
                    events.push(ev);
                }
            }
        }
        // log|det| dip without sign change: double branch point.
        if self.opts.detect_det_dips && k >= 2 {
            let (d0, d1, d2) = (
                points[k - 2].log_abs_det,
                points[k - 1].log_abs_det,
                points[k].log_abs_det,
            );
            let same_sign = points[k - 2].det_sign == points[k - 1].det_sign
                && points[k - 1].det_sign == points[k].det_sign;
            if same_sign
                && d1 < d0 - self.opts.dip_threshold
                && d1 < d2 - self.opts.dip_threshold
            {
                if let Some(ev) = self.refine_dip(&points[k - 2], &points[k - 1], &points[k], k)? {
                    events.push(ev);
                }
            }
        }
        Ok(())
    }

    /// Re-solves at a fraction t of the step from `from` toward its
    /// secant-direction neighbor `to`, returning the converged solution and
    /// its bordered factorization.
    fn solve_fraction(
        &self,
        from: &Solution,
        to: &Solution,
        t: f64,
    ) -> Result<(Solution, crate::linalg::Factored)> {
        let mut tangent = Tangent::secant(from, to);
        let ds_full = tangent.normalize(from.mesh.n_base_points());
        let ds = t * ds_full;
        let problem = self
            .spec
            .extended_problem(self.hyperplane(from, &tangent, ds));
        let mut guess = self.predict(from, &tangent, ds);
        // Blend toward the far point for robustness on larger fractions.
        if t > 0.5 {
            for (g, v) in guess.values.iter_mut().zip(&to.values) {
                *g = (1.0 - t) * *g + t * v;
            }
        }
        let (sol, fact, _rep) = solve_newton(&problem, guess, &self.opts.newton)?;
        Ok((sol, fact))
    }

    /// Confirms a candidate branch point by the near-null space of the
    /// parameter-frozen Jacobian; returns its dimension (0 = spurious).
    fn confirm_null_dim(&self, sol: &Solution) -> Result<(usize, Vec<Vec<f64>>)> {
        let square = self.spec.square_problem();
        let (mat, fact) = factor_at(&square, sol)?;
        let null = near_null_space(&mat, &fact, 3, self.opts.null_tol, 0x6d61_6772);
        Ok((null.len(), null.into_iter().map(|(_s, v)| v).collect()))
    }

    fn refine_sign_event(
        &self,
        pa: &BranchPoint,
        pb: &BranchPoint,
        k: usize,
    ) -> Result<Option<Event>> {
        let mut lo = 0.0;
        let mut hi = 1.0;
        let sign_lo = pa.det_sign;
        let mut best = pb.solution.clone();
        let mut plo = pa.param;
        let mut phi = pb.param;
        for _ in 0..60 {
            if (phi - plo).abs() <= self.opts.locate_tol * (1.0 + phi.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            match self.solve_fraction(&pa.solution, &pb.solution, mid) {
                Ok((sol, fact)) => {
                    let p = sol.params[self.spec.principal];
                    if fact.det_sign() == sign_lo {
                        lo = mid;
                        plo = p;
                    } else {
                        hi = mid;
                        phi = p;
                        best = sol;
                    }
                }
                Err(_) => break,
            }
        }
        let (null_dim, _basis) = self.confirm_null_dim(&best)?;
        if null_dim == 0 {
            return Ok(None);
        }
        Ok(Some(Event {
            param: best.params[self.spec.principal],
            solution: best,
            kind: EventKind::BranchPoint { null_dim },
            between: (k - 1, k),
        }))
    }

    fn refine_monitor_zero(
        &self,
        pa: &BranchPoint,
        pb: &BranchPoint,
        mi: usize,
        k: usize,
    ) -> Result<Option<Event>> {
        let f = &self.monitors[mi].f;
        let sign_lo = pa.monitors[mi].signum();
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut plo = pa.param;
        let mut phi = pb.param;
        let mut best = pb.solution.clone();
        for _ in 0..60 {
            if (phi - plo).abs() <= self.opts.locate_tol * (1.0 + phi.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            match self.solve_fraction(&pa.solution, &pb.solution, mid) {
                Ok((sol, _fact)) => {
                    let p = sol.params[self.spec.principal];
                    if f(&sol).signum() == sign_lo {
                        lo = mid;
                        plo = p;
                    } else {
                        hi = mid;
                        phi = p;
                        best = sol;
                    }
                }
                Err(_) => break,
            }
        }
        Ok(Some(Event {
            param: best.params[self.spec.principal],
            solution: best,
            kind: EventKind::MonitorZero { index: mi },
            between: (k - 1, k),
        }))
    }

    fn refine_fold(
        &self,
        pa: &BranchPoint,
        pb: &BranchPoint,
        k: usize,
    ) -> Result<Option<Event>> {
        // The principal parameter has an extremum between the two points;
        // golden-section search on the step fraction.
        let maximize = pa.tangent_principal > 0.0;
        let objective = |sol: &Solution| {
            let p = sol.params[self.spec.principal];
            if maximize {
                -p
            } else {
                p
            }
        };
        let phi_ratio = 0.5 * (3.0 - 5.0_f64.sqrt());
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut x1 = lo + phi_ratio * (hi - lo);
        let mut x2 = hi - phi_ratio * (hi - lo);
        let s1 = self.solve_fraction(&pa.solution, &pb.solution, x1);
        let s2 = self.solve_fraction(&pa.solution, &pb.solution, x2);
        let (mut s1, mut s2) = match (s1, s2) {
            (Ok(a), Ok(b)) => (a.0, b.0),
            _ => return Ok(None),
        };
        let mut f1 = objective(&s1);
        let mut f2 = objective(&s2);
        for _ in 0..60 {
            let pspan = (s1.params[self.spec.principal] - s2.params[self.spec.principal]).abs();
            if pspan <= self.opts.locate_tol * (1.0 + s1.params[self.spec.principal].abs()) {
                break;
            }
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                s2 = s1.clone();
                f2 = f1;
                x1 = lo + phi_ratio * (hi - lo);
                match self.solve_fraction(&pa.solution, &pb.solution, x1) {
                    Ok((sol, _)) => {
                        s1 = sol;
                        f1 = objective(&s1);
                    }
                    Err(_) => break,
                }
            } else {
                lo = x1;
                x1 = x2;
                s1 = s2.clone();
                f1 = f2;
                x2 = hi - phi_ratio * (hi - lo);
                match self.solve_fraction(&pa.solution, &pb.solution, x2) {
                    Ok((sol, _)) => {
                        s2 = sol;
                        f2 = objective(&s2);
                    }
                    Err(_) => break,
                }
            }
        }
        let best = if f1 <= f2 { s1 } else { s2 };
        Ok(Some(Event {
            param: best.params[self.spec.principal],
            solution: best,
            kind: EventKind::Fold,
            between: (k - 1, k),
        }))
    }

    fn refine_dip(
        &self,
        pa: &BranchPoint,
        pb: &BranchPoint,
        pc: &BranchPoint,
        k: usize,
    ) -> Result<Option<Event>> {
        // Minimize log|det| over the two adjacent segments by golden
        // section, then confirm the null space.
        let mut best: Option<(f64, Solution)> = None;
        for (from, to) in [(pa, pb), (pb, pc)] {
            if let Some((v, sol)) = self.golden_min_logdet(&from.solution, &to.solution)? {
                if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                    best = Some((v, sol));
                }
            }
        }
        let Some((_v, sol)) = best else {
            return Ok(None);
        };
        let (null_dim, _basis) = self.confirm_null_dim(&sol)?;
        if null_dim == 0 {
            return Ok(None);
        }
        Ok(Some(Event {
            param: sol.params[self.spec.principal],
            solution: sol,
            kind: EventKind::DoubleBranchPoint { null_dim },
            between: (k - 2, k),
        }))
    }

    fn golden_min_logdet(
        &self,
        from: &Solution,
        to: &Solution,
    ) -> Result<Option<(f64, Solution)>> {
        let phi_ratio = 0.5 * (3.0 - 5.0_f64.sqrt());
        let mut lo = 0.0;
        let mut hi = 1.0;
        let eval = |t: f64| -> Option<(f64, Solution)> {
            match self.solve_fraction(from, to, t) {
                Ok((sol, fact)) => Some((fact.log_abs_det(), sol)),
                Err(_) => None,
            }
        };
        let mut x1 = lo + phi_ratio * (hi - lo);
        let mut x2 = hi - phi_ratio * (hi - lo);
        let (Some((mut f1, mut s1)), Some((mut f2, mut s2))) = (eval(x1), eval(x2)) else {
            return Ok(None);
        };
        for _ in 0..50 {
            let pspan = (s1.params[self.spec.principal] - s2.params[self.spec.principal]).abs();
            if pspan <= self.opts.locate_tol * (1.0 + s1.params[self.spec.principal].abs()) {
                break;
            }
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                s2 = s1.clone();
                x1 = lo + phi_ratio * (hi - lo);
                match eval(x1) {
                    Some((f, s)) => {
                        f1 = f;
                        s1 = s;
                    }
                    None => break,
                }
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                s1 = s2.clone();
                x2 = hi - phi_ratio * (hi - lo);
                match eval(x2) {
                    Some((f, s)) => {
                        f2 = f;
                        s2 = s;
                    }
                    None => break,
                }
            }
        }
        Ok(Some(if f1 <= f2 { (f1, s1) } else { (f2, s2) }))
    }
}

/// Distance between two solutions under the continuation inner product.
fn distance(a: &Solution, b: &Solution) -> f64 {
    let dv: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    let dp: Vec<f64> = a.params.iter().zip(&b.params).map(|(x, y)| x - y).collect();
    continuation_inner(&dv, &dp, &dv, &dp, a.mesh.n_base_points()).sqrt()
}

/// Steps off a branch point onto the bifurcating branch.
///
/// Computes the null space of the parameter-frozen Jacobian at `at`. A
/// 1-dimensional null space gives the single transversal direction; a
/// 2-dimensional one (double branch point) is passed through the `align`
/// callback so the caller can pick symmetry-adapted basis vectors, and
/// `which_null` selects among them. The returned solution solves the
/// extended problem one hyperplane step `eps` off the branch point, ready
/// to seed a new continuation run.
pub fn switch_branch<'a, S: BvpSystem>(
    spec: &ProblemSpec<'a, S>,
    at: &Solution,
    direction: f64,
    which_null: usize,
    eps: f64,
    newton: &NewtonOpts,
    null_tol: f64,
    align: Option<&dyn Fn(&Solution, Vec<Vec<f64>>) -> Vec<Vec<f64>>>,
) -> Result<Solution> {
    let square = spec.square_problem();
    let (mat, fact) = factor_at(&square, at)?;
    let null = near_null_space(&mat, &fact, 3, null_tol, 0x7377_6974);
    let found = null.len();
    if found == 0 {
        return Err(Error::BadStart {
            why: "no null direction at the branch point".into(),
        });
    }
    if found > 2 {
        return Err(Error::UnsupportedDegeneracy {
            max: 2,
            found,
        });
    }
    let mut basis: Vec<Vec<f64>> = null.into_iter().map(|(_s, v)| v).collect();
    if let Some(callback) = align {
        basis = callback(at, basis);
    }
    if which_null >= basis.len() {
        return Err(Error::DimensionMismatch {
            what: "null basis index",
            expected: basis.len(),
            got: which_null,
        });
    }
    let phi = &basis[which_null];
    let n_state = at.values.len();
    let g_total = at.mesh.n_base_points();

    // Normalize the direction under the continuation inner product; the
    // tail of phi holds the base free parameter components.
    let mut w_params = vec![0.0; at.params.len()];
    for (t, &pi) in spec.base_free.iter().enumerate() {
        w_params[pi] = phi[n_state + t];
    }
    let nrm = continuation_inner(&phi[..n_state], &w_params, &phi[..n_state], &w_params, g_total)
        .sqrt();
    let wv: Vec<f64> = phi[..n_state].iter().map(|v| v / nrm).collect();
    for w in w_params.iter_mut() {
        *w /= nrm;
    }

    let mut guess = at.clone();
    for (v, w) in guess.values.iter_mut().zip(&wv) {
        *v += direction * eps * w;
    }
    for (p, w) in guess.params.iter_mut().zip(&w_params) {
        *p += direction * eps * w;
    }
    let hyper = Constraint::Hyperplane {
        ref_values: at.values.clone(),
        ref_params: at.params.clone(),
        w_values: wv,
        w_params,
        offset: direction * eps,
    };
    let problem = spec.extended_problem(hyper);
    let (sol, _fact, _rep) = solve_newton(&problem, guess, newton)?;
    Ok(sol)
}

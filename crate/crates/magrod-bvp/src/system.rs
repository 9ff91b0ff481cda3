//! Problem definition: the ODE system trait, piecewise-polynomial
//! solutions, and scalar constraints paired with released parameters.

use crate::mesh::{lagrange_derivs, lagrange_values, Mesh};
use crate::{Error, Result};

/// A first-order ODE system u' = f(s, u, p) on s in [0,1] with two-point
/// boundary conditions g(u(0), u(1), p) = 0.
///
/// `p` is the full parameter vector; which entries are unknowns is decided
/// per solve by [`Problem::free`]. Implementations must be pure: the solver
/// differentiates them by central finite differences.
pub trait BvpSystem {
    /// State dimension n.
    fn dim(&self) -> usize;
    /// Length of the parameter vector.
    fn n_params(&self) -> usize;
    /// Number of boundary conditions.
    fn n_bc(&self) -> usize;
    /// du = f(s, u, p).
    fn rhs(&self, s: f64, u: &[f64], p: &[f64], du: &mut [f64]);
    /// out = g(u(0), u(1), p).
    fn bc(&self, u0: &[f64], u1: &[f64], p: &[f64], out: &mut [f64]);
}

/// Piecewise-polynomial solution: state values at the global base points,
/// plus the full parameter vector it was computed at.
#[derive(Debug, Clone)]
pub struct Solution {
    pub mesh: Mesh,
    pub dim: usize,
    /// values[g * dim + c], g the global base point index.
    pub values: Vec<f64>,
    pub params: Vec<f64>,
}

impl Solution {
    pub fn zeros(mesh: Mesh, dim: usize, params: Vec<f64>) -> Self {
        let n = mesh.n_base_points() * dim;
        Solution {
            mesh,
            dim,
            values: vec![0.0; n],
            params,
        }
    }

    /// Builds a solution by sampling `f(s, out)` at every base point.
    pub fn from_fn(
        mesh: Mesh,
        dim: usize,
        params: Vec<f64>,
        f: impl Fn(f64, &mut [f64]),
    ) -> Self {
        let mut sol = Solution::zeros(mesh, dim, params);
        for g in 0..sol.mesh.n_base_points() {
            let s = sol.mesh.base_point(g);
            let lo = g * dim;
            f(s, &mut sol.values[lo..lo + dim]);
        }
        sol
    }

    pub fn point(&self, g: usize) -> &[f64] {
        &self.values[g * self.dim..(g + 1) * self.dim]
    }

    pub fn point_mut(&mut self, g: usize) -> &mut [f64] {
        &mut self.values[g * self.dim..(g + 1) * self.dim]
    }

    /// Interpolates the state at arclength s.
    pub fn eval(&self, s: f64, out: &mut [f64]) {
        let j = self.mesh.find_interval(s);
        let tau = self.mesh.local_coord(s, j);
        let m = self.mesh.degree();
        let basis = lagrange_values(m, tau);
        out[..self.dim].fill(0.0);
        for (i, &b) in basis.iter().enumerate() {
            let g = j * m + i;
            for (o, &v) in out[..self.dim].iter_mut().zip(self.point(g)) {
                *o += b * v;
            }
        }
    }

    /// Interpolates the state derivative du/ds at arclength s.
    pub fn eval_deriv(&self, s: f64, out: &mut [f64]) {
        let j = self.mesh.find_interval(s);
        let tau = self.mesh.local_coord(s, j);
        let m = self.mesh.degree();
        let basis = lagrange_derivs(m, tau);
        let h = self.mesh.interval_len(j);
        out[..self.dim].fill(0.0);
        for (i, &b) in basis.iter().enumerate() {
            let g = j * m + i;
            for (o, &v) in out[..self.dim].iter_mut().zip(self.point(g)) {
                *o += b / h * v;
            }
        }
    }

    /// Gauss quadrature of a scalar functional of the state.
    pub fn quadrature(&self, f: impl Fn(f64, &[f64]) -> f64) -> f64 {
        let m = self.mesh.degree();
        let mut u = vec![0.0; self.dim];
        let mut total = 0.0;
        for j in 0..self.mesh.intervals() {
            for l in 0..m {
                let s = self.mesh.collocation_point(j, l);
                u.fill(0.0);
                for (i, &b) in self.mesh.basis_at(l).iter().enumerate() {
                    let g = j * m + i;
                    for (o, &v) in u.iter_mut().zip(self.point(g)) {
                        *o += b * v;
                    }
                }
                total += self.mesh.quad_weight(j, l) * f(s, &u);
            }
        }
        total
    }

    /// Resamples onto another mesh (same state dimension).
    pub fn resample(&self, mesh: Mesh) -> Solution {
        let dim = self.dim;
        let params = self.params.clone();
        let src = self;
        Solution::from_fn(mesh, dim, params, |s, out| src.eval(s, out))
    }

    /// Mesh-size-independent scale of the solution values, used by the
    /// pseudo-arclength inner product.
    pub fn value_scale(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.mesh.n_base_points() as f64).sqrt()
    }
}

/// Scalar constraint appended to the boundary conditions. Each constraint
/// consumes one released parameter to keep the discrete system square.
#[derive(Clone)]
pub enum Constraint<'a> {
    /// integral of q(s, u(s), p) over [0,1] equals `target`.
    Integral {
        integrand: std::rc::Rc<dyn Fn(f64, &[f64], &[f64]) -> f64 + 'a>,
        target: f64,
    },
    /// Linear hyperplane through a reference solution:
    /// inner(U - U_ref, w_values) + (p - p_ref) . w_params = offset,
    /// with inner the base-point-count-scaled dot product. Used for
    /// pseudo-arclength steps and for stepping off a branch point.
    Hyperplane {
        ref_values: Vec<f64>,
        ref_params: Vec<f64>,
        w_values: Vec<f64>,
        w_params: Vec<f64>,
        offset: f64,
    },
}

impl<'a> Constraint<'a> {
    pub fn integral(
        integrand: impl Fn(f64, &[f64], &[f64]) -> f64 + 'a,
        target: f64,
    ) -> Constraint<'a> {
        Constraint::Integral {
            integrand: std::rc::Rc::new(integrand),
            target,
        }
    }

    /// Residual of the constraint at a candidate solution.
    pub fn residual(&self, sol: &Solution) -> f64 {
        match self {
            Constraint::Integral { integrand, target } => {
                sol.quadrature(|s, u| integrand(s, u, &sol.params)) - target
            }
            Constraint::Hyperplane {
                ref_values,
                ref_params,
                w_values,
                w_params,
                offset,
            } => {
                let scale = 1.0 / sol.mesh.n_base_points() as f64;
                let mut acc = -offset;
                for ((v, r), w) in sol.values.iter().zip(ref_values).zip(w_values) {
                    acc += scale * (v - r) * w;
                }
                for ((p, r), w) in sol.params.iter().zip(ref_params).zip(w_params) {
                    acc += (p - r) * w;
                }
                acc
            }
        }
    }
}

/// A solvable problem: the system, the released parameter indices, and the
/// extra scalar constraints. Well-posedness requires
/// n_bc + constraints = dim + free.
pub struct Problem<'a, S: BvpSystem> {
    pub system: &'a S,
    pub free: Vec<usize>,
    pub constraints: Vec<Constraint<'a>>,
}

impl<'a, S: BvpSystem> Problem<'a, S> {
    pub fn square(system: &'a S) -> Self {
        Problem {
            system,
            free: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn with(
        system: &'a S,
        free: Vec<usize>,
        constraints: Vec<Constraint<'a>>,
    ) -> Self {
        Problem {
            system,
            free,
            constraints,
        }
    }

    pub fn check_well_posed(&self) -> Result<()> {
        let s = self.system;
        if s.n_bc() + self.constraints.len() != s.dim() + self.free.len() {
            return Err(Error::IllPosed {
                n_bc: s.n_bc(),
                n_constraints: self.constraints.len(),
                dim: s.dim(),
                n_free: self.free.len(),
            });
        }
        if self.free.iter().any(|&i| i >= s.n_params()) {
            return Err(Error::DimensionMismatch {
                what: "free parameter index vs parameter vector",
                expected: s.n_params(),
                got: *self.free.iter().max().expect("nonempty"),
            });
        }
        Ok(())
    }

    pub fn check_solution_shape(&self, sol: &Solution) -> Result<()> {
        if sol.dim != self.system.dim() {
            return Err(Error::DimensionMismatch {
                what: "solution dimension vs system dimension",
                expected: self.system.dim(),
                got: sol.dim,
            });
        }
        if sol.params.len() != self.system.n_params() {
            return Err(Error::DimensionMismatch {
                what: "solution parameter vector vs system",
                expected: self.system.n_params(),
                got: sol.params.len(),
            });
        }
        Ok(())
    }
}

/// The inner product used by continuation for tangents and hyperplanes:
/// value dot product scaled by the base point count, plus the plain dot
/// product of the full parameter vectors.
pub fn continuation_inner(
    a_values: &[f64],
    a_params: &[f64],
    b_values: &[f64],
    b_params: &[f64],
    n_base_points: usize,
) -> f64 {
    let scale = 1.0 / n_base_points as f64;
    let v: f64 = a_values.iter().zip(b_values).map(|(x, y)| x * y).sum();
    let p: f64 = a_params.iter().zip(b_params).map(|(x, y)| x * y).sum();
    v * scale + p
}

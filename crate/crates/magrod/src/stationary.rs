//! Whirling equilibria of the rod: the 18-dimensional stationary system.
//!
//! State layout per arclength point (indices [`IX`] .. [`ID3`]):
//!
//!   x = (x, y, z)        centerline, lab frame,
//!   F = (F_1, F_2, F_3)  internal force, director components,
//!   M = (M_1, M_2, M_3)  internal moment, director components,
//!   d_1, d_2, d_3        directors, lab frame.
//!
//! The curvatures follow from the moments through the constitutive
//! relations kappa_1 = f M_1, kappa_2 = f M_2 / R,
//! kappa_3 = 2 f M_3 / (Gamma (1 + R)). Centrifugal and gyroscopic terms
//! carry the whirl rate omega; the magnetic force is B d_3 x e_3 written
//! in director components. Both clamps hold the tangent d_3 and the
//! director d_1 against the lab axes; orthonormality of the frame is
//! imposed at s = 0 and propagates because the twist equations are a
//! rigid rotation of the frame.

use crate::model::RodParams;
use magrod_bvp::{BvpSystem, Mesh, Solution};

/// Centerline offset in the state vector.
pub const IX: usize = 0;
/// Force offset.
pub const IF: usize = 3;
/// Moment offset.
pub const IM: usize = 6;
/// Director d_1 offset.
pub const ID1: usize = 9;
/// Director d_2 offset.
pub const ID2: usize = 12;
/// Director d_3 offset.
pub const ID3: usize = 15;

/// Continuation parameter slots of [`Stationary`].
pub const PARAM_B: usize = 0;
pub const PARAM_OMEGA: usize = 1;
pub const PARAM_TENSION: usize = 2;

/// The stationary rod system. Material constants are fixed; the loads
/// (B, omega, T) live in the parameter vector so they can be continued.
#[derive(Debug, Clone, Copy)]
pub struct Stationary {
    pub p: f64,
    pub r: f64,
    pub gamma: f64,
    pub f: f64,
}

impl Stationary {
    pub fn new(params: &RodParams) -> Self {
        Stationary {
            p: params.p,
            r: params.r,
            gamma: params.gamma,
            f: params.f,
        }
    }

    /// Load slots in the order of the parameter vector.
    pub fn load_vector(params: &RodParams) -> Vec<f64> {
        vec![params.b, params.omega, params.tension]
    }

    /// Curvatures from moments by the constitutive relations.
    pub fn curvature(&self, m: &[f64]) -> [f64; 3] {
        [
            self.f * m[0],
            self.f * m[1] / self.r,
            2.0 * self.f * m[2] / (self.gamma * (1.0 + self.r)),
        ]
    }
}

impl BvpSystem for Stationary {
    fn dim(&self) -> usize {
        18
    }

    fn n_params(&self) -> usize {
        3
    }

    fn n_bc(&self) -> usize {
        18
    }

    fn rhs(&self, _s: f64, u: &[f64], p: &[f64], du: &mut [f64]) {
        let (b, omega) = (p[PARAM_B], p[PARAM_OMEGA]);
        let w2 = omega * omega;
        let (x, y) = (u[IX], u[IX + 1]);
        let fv = &u[IF..IF + 3];
        let m = &u[IM..IM + 3];
        let d1 = &u[ID1..ID1 + 3];
        let d2 = &u[ID2..ID2 + 3];
        let d3 = &u[ID3..ID3 + 3];
        let k = self.curvature(m);
        let (gp, pr) = (self.gamma * (1.0 + self.r), self.p * self.r);

        // Centerline: x' = d_3.
        du[IX] = d3[0];
        du[IX + 1] = d3[1];
        du[IX + 2] = d3[2];

        // Force balance in director components, with the magnetic body
        // force B d_3 x e_3 and the centrifugal load omega x (omega x x).
        du[IF] = fv[1] * k[2] - fv[2] * k[1] - b * (d3[1] * d1[0] - d3[0] * d1[1])
            - w2 * (x * d1[0] + y * d1[1]);
        du[IF + 1] = fv[2] * k[0] - fv[0] * k[2] - b * (d3[1] * d2[0] - d3[0] * d2[1])
            - w2 * (x * d2[0] + y * d2[1]);
        du[IF + 2] = fv[0] * k[1] - fv[1] * k[0] - w2 * (x * d3[0] + y * d3[1]);

        // Moment balance; the omega^2 terms are the stationary remainder of
        // the rotary inertia of the cross-section.
        du[IM] = 2.0 * self.f * m[2] * m[1] / gp - self.f * m[1] * m[2] / self.r + fv[1]
            + self.p * w2 * d2[2] * (d2[1] * d1[0] - d2[0] * d1[1]);
        du[IM + 1] = -2.0 * self.f * m[2] * m[0] / gp + self.f * m[0] * m[2] - fv[0]
            + pr * w2 * d1[2] * (d2[0] * d1[1] - d1[0] * d2[1]);
        du[IM + 2] = self.f * m[1] * m[0] / self.r - self.f * m[0] * m[1]
            + pr * w2 * d1[2] * (d1[1] * d3[0] - d1[0] * d3[1])
            + self.p * w2 * d2[2] * (d2[1] * d3[0] - d2[0] * d3[1]);

        // Frame transport: d_i' = kappa x d_i with the curvature vector
        // kappa = k_1 d_1 + k_2 d_2 + k_3 d_3 in lab components.
        let kap = [
            k[0] * d1[0] + k[1] * d2[0] + k[2] * d3[0],
            k[0] * d1[1] + k[1] * d2[1] + k[2] * d3[1],
            k[0] * d1[2] + k[1] * d2[2] + k[2] * d3[2],
        ];
        for (o, d) in [(ID1, d1), (ID2, d2), (ID3, d3)] {
            du[o] = kap[1] * d[2] - kap[2] * d[1];
            du[o + 1] = kap[2] * d[0] - kap[0] * d[2];
            du[o + 2] = kap[0] * d[1] - kap[1] * d[0];
        }
    }

    fn bc(&self, u0: &[f64], u1: &[f64], p: &[f64], out: &mut [f64]) {
        let d1 = &u0[ID1..ID1 + 3];
        let d2 = &u0[ID2..ID2 + 3];
        let d3 = &u0[ID3..ID3 + 3];
        // Left clamp: centerline on the axis, prescribed end force along
        // e_3, tangent and d_1 aligned with the lab axes.
        out[0] = u0[IX];
        out[1] = u0[IX + 1];
        out[2] = u0[IF + 2] - p[PARAM_TENSION];
        out[3] = d3[0];
        out[4] = d3[1];
        out[5] = d1[1];
        // Right clamp at unit height.
        out[6] = u1[IX];
        out[7] = u1[IX + 1];
        out[8] = u1[IX + 2] - 1.0;
        out[9] = u1[ID3];
        out[10] = u1[ID3 + 1];
        out[11] = u1[ID1 + 1];
        // Orthonormal frame at s = 0.
        out[12] = dot3(d1, d1) - 1.0;
        out[13] = dot3(d2, d2) - 1.0;
        out[14] = dot3(d3, d3) - 1.0;
        out[15] = dot3(d1, d2);
        out[16] = dot3(d1, d3);
        out[17] = dot3(d2, d3);
    }
}

fn dot3(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The straight vertical state: x = s e_3, identity frame, uniform force
/// (0, 0, T), zero moment. Solves the stationary system exactly for every
/// (B, omega, T).
pub fn trivial_solution(sys: &Stationary, mesh: Mesh, loads: Vec<f64>) -> Solution {
    let _ = sys;
    let tension = loads[PARAM_TENSION];
    Solution::from_fn(mesh, 18, loads, |s, out| {
        out[IX + 2] = s;
        out[IF + 2] = tension;
        out[ID1] = 1.0;
        out[ID2 + 1] = 1.0;
        out[ID3 + 2] = 1.0;
    })
}

/// Mean lateral excursion along e_1: the integral of |x(s)|.
pub fn measure1(sol: &Solution) -> f64 {
    sol.quadrature(|_s, u| u[IX].abs())
}

/// Cross-plane product integral of x(s) y(s); zero on solutions lying in
/// a symmetry plane.
pub fn measure2(sol: &Solution) -> f64 {
    sol.quadrature(|_s, u| u[IX] * u[IX + 1])
}

/// Largest deviation of the director frame from orthonormality over the
/// base points.
pub fn orthonormality_defect(sol: &Solution) -> f64 {
    let mut worst: f64 = 0.0;
    for g in 0..sol.mesh.n_base_points() {
        let u = sol.point(g);
        let ds = [&u[ID1..ID1 + 3], &u[ID2..ID2 + 3], &u[ID3..ID3 + 3]];
        for i in 0..3 {
            for j in i..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot3(ds[i], ds[j]) - target).abs());
            }
        }
    }
    worst
}

/// Rotates a solution half a turn about the clamp axis e_3: lab-frame
/// x and y components of the centerline and directors flip sign. Maps
/// solutions to solutions and exchanges the two members of each
/// pitchfork pair.
pub fn rotate_half_turn(sol: &Solution) -> Solution {
    let mut out = sol.clone();
    for g in 0..out.mesh.n_base_points() {
        let u = out.point_mut(g);
        u[IX] = -u[IX];
        u[IX + 1] = -u[IX + 1];
        for o in [ID1, ID2, ID3] {
            u[o] = -u[o];
            u[o + 1] = -u[o + 1];
        }
        // Director components of F and M transform with the frame and are
        // left untouched.
    }
    out
}

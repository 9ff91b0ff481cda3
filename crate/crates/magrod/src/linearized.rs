//! Linearization of the rod dynamics about a stationary state.
//!
//! Substituting x = x0 + delta x^t e^(lambda t) (and likewise for F, M
//! and the frame, with the frame perturbation generated by an
//! infinitesimal rotation alpha) into the dynamic equations and keeping
//! the O(delta) terms yields a 12-dimensional linear two-point problem
//! in w = (F^t, M^t, alpha, x^t):
//!
//!   (F^t)' = -B1 F^t - B2 x^t - B3 alpha' - B4 alpha
//!            + lam^2 B5 x^t + lam B6 x^t,
//!   (M^t)' = -C1 M^t - C2 alpha' - C3 alpha - C4 F^t
//!            + lam^2 C5 alpha + lam C6 alpha,
//!   alpha' = [D1 (1 + lam gamma_v)]^(-1) (lam D3 alpha - D2 alpha - M^t),
//!   (x^t)' = alpha x d3^0,
//!
//! where the coefficient matrices depend on the base state. F^t and M^t
//! are the perturbations of the director components of force and moment,
//! alpha is in director components, x^t in the laboratory frame. The
//! boundary conditions are x1^t(0) = x2^t(0) = 0, F^t(0).e3 = 0,
//! alpha(0) = 0, x^t(1) = 0, alpha(1) = 0.
//!
//! For complex lambda = lambda_r + i lambda_i the system is evaluated on
//! real and imaginary copies coupled through the complex scalars lambda,
//! lambda^2 and 1/(1 + lambda gamma_v). The inversion in the alpha
//! equation degenerates exactly at lambda gamma_v = -1; that case is an
//! error, never a regularization.
//!
//! Three boundary value systems are built from this:
//!   [`FrozenBase`]    the bare 12-dim system over a fixed base solution,
//!                     used to scan for eigenvalues by determinant signs,
//!   [`EigenSingle`]   base (18) + one real copy (12), valid for purely
//!                     real or purely imaginary lambda while spin and
//!                     damping vanish,
//!   [`EigenFull`]     base (18) + both copies (24), the general case.

use crate::model::RodParams;
use crate::stationary::{Stationary, ID1, ID2, ID3, IF, IM};
use crate::{Error, Result};
use magrod_bvp::{BvpSystem, Constraint, Solution};
use nalgebra::{Matrix3, Vector3};

/// Offsets of the fields inside one 12-dimensional perturbation copy.
pub const PF: usize = 0;
pub const PM: usize = 3;
pub const PA: usize = 6;
pub const PX: usize = 9;

pub const BASE_DIM: usize = 18;
pub const PERT_DIM: usize = 12;

/// Offset of the first (real) perturbation copy in a composite state.
pub const COPY_R: usize = BASE_DIM;
/// Offset of the imaginary copy in the full composite state.
pub const COPY_I: usize = BASE_DIM + PERT_DIM;

/// Parameter slot of lambda in [`EigenSingle`] and [`FrozenBase`].
pub const PARAM_LAMBDA: usize = 3;
/// Parameter slots of lambda in [`EigenFull`].
pub const PARAM_LAMBDA_R: usize = 3;
pub const PARAM_LAMBDA_I: usize = 4;

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Coefficient matrices of the perturbation equations at one arclength
/// station of the base state.
#[derive(Clone)]
pub struct Coeffs {
    b1: Matrix3<f64>,
    b2: Matrix3<f64>,
    b3: Matrix3<f64>,
    b4: Matrix3<f64>,
    b5: Matrix3<f64>,
    b6: Matrix3<f64>,
    c2: Matrix3<f64>,
    c3: Matrix3<f64>,
    c4: Matrix3<f64>,
    c5: Matrix3<f64>,
    c6: Matrix3<f64>,
    /// Diagonal of D1^(-1).
    d1_inv: Vector3<f64>,
    d2: Matrix3<f64>,
    d3m: Matrix3<f64>,
    /// Base directors in laboratory components.
    dirs: [Vector3<f64>; 3],
}

/// The linearized rod: the stationary system it differentiates plus the
/// viscosity gamma_v entering the damping terms.
#[derive(Debug, Clone, Copy)]
pub struct Linearized {
    pub stationary: Stationary,
    pub damping: f64,
}

impl Linearized {
    pub fn new(params: &RodParams) -> Self {
        Linearized {
            stationary: Stationary::new(params),
            damping: params.damping,
        }
    }

    /// Fails where 1 + lambda gamma_v vanishes and the constitutive
    /// relation loses invertibility; callers check before solving.
    pub fn check_damping(&self, lambda_r: f64, lambda_i: f64) -> Result<()> {
        let qr = 1.0 + self.damping * lambda_r;
        let qi = self.damping * lambda_i;
        if qr * qr + qi * qi < 1e-20 {
            return Err(Error::DegenerateDamping {
                lambda_gamma: self.damping * lambda_r,
            });
        }
        Ok(())
    }

    /// Evaluates the coefficient matrices at a base state point.
    /// `u` is the 18-dim stationary state, `loads` the parameter vector
    /// holding (B, omega, T) in its first three slots.
    pub fn coeffs(&self, u: &[f64], loads: &[f64]) -> Coeffs {
        let st = &self.stationary;
        let (p, r, gp) = (st.p, st.r, st.gamma);
        let f = st.f;
        let (b, om) = (loads[0], loads[1]);

        let fv = Vector3::new(u[IF], u[IF + 1], u[IF + 2]);
        let mv = Vector3::new(u[IM], u[IM + 1], u[IM + 2]);
        let kap = st.curvature(&u[IM..IM + 3]);
        let kv = Vector3::new(kap[0], kap[1], kap[2]);
        let d1 = Vector3::new(u[ID1], u[ID1 + 1], u[ID1 + 2]);
        let d2v = Vector3::new(u[ID2], u[ID2 + 1], u[ID2 + 2]);
        let d3 = Vector3::new(u[ID3], u[ID3 + 1], u[ID3 + 2]);
        let dirs = [d1, d2v, d3];

        // Base-state derivatives of force and moment components enter B4
        // and C3; they come from the stationary right-hand side, not from
        // differencing.
        let mut du = [0.0; BASE_DIM];
        st.rhs(0.0, u, loads, &mut du);
        let dfv = Vector3::new(du[IF], du[IF + 1], du[IF + 2]);
        let dmv = Vector3::new(du[IM], du[IM + 1], du[IM + 2]);

        let b1 = skew(&kv);
        let b2 = om * om
            * Matrix3::new(
                d1.x, d1.y, 0.0, d2v.x, d2v.y, 0.0, d3.x, d3.y, 0.0,
            );
        let b3 = -skew(&fv);
        let mag11 = b * (d2v.y * d1.x - d2v.x * d1.y);
        let b4 = Matrix3::new(
            fv.y * kv.y + fv.z * kv.z - mag11,
            dfv.z - fv.x * kv.y,
            -dfv.y - fv.x * kv.z,
            -dfv.z - fv.y * kv.x,
            fv.z * kv.z + fv.x * kv.x - mag11,
            dfv.x - fv.y * kv.z,
            dfv.y - fv.z * kv.x - b * (d2v.y * d3.x - d2v.x * d3.y),
            -dfv.x - fv.z * kv.y + b * (d1.y * d3.x - d1.x * d3.y),
            fv.x * kv.x + fv.y * kv.y,
        );
        let b5 = Matrix3::new(
            d1.x, d1.y, d1.z, d2v.x, d2v.y, d2v.z, d3.x, d3.y, d3.z,
        );
        let b6 = 2.0 * om
            * Matrix3::new(
                d1.y, -d1.x, 0.0, d2v.y, -d2v.x, 0.0, d3.y, -d3.x, 0.0,
            );

        let c2 = -skew(&mv);
        let e3 = Vector3::z();
        // omega . d_i, (d_a x omega) . d_c and (d_a x (omega x d_b)) . d_c
        // with the rotation vector omega e3.
        let wd = |i: usize| om * dirs[i - 1].z;
        let cxd = |a: usize, c: usize| om * dirs[a - 1].cross(&e3).dot(&dirs[c - 1]);
        let trip = |a: usize, bb: usize, c: usize| {
            om * dirs[a - 1].cross(&e3.cross(&dirs[bb - 1])).dot(&dirs[c - 1])
        };
        let c3 = Matrix3::new(
            mv.z * kv.z + mv.y * kv.y - p * wd(3) * cxd(2, 1) - p * wd(2) * cxd(3, 1),
            dmv.z - mv.x * kv.y - p * r * wd(1) * cxd(1, 3),
            -dmv.y - mv.x * kv.z - fv.x + p * r * wd(1) * cxd(1, 2) + p * wd(1) * cxd(2, 1),
            -dmv.z - mv.y * kv.x + p * wd(2) * cxd(2, 3),
            mv.z * kv.z + mv.x * kv.x + p * r * wd(3) * cxd(1, 2) + p * r * wd(1) * cxd(3, 2),
            dmv.x - mv.y * kv.z - fv.y - p * r * wd(2) * cxd(1, 2) - p * wd(2) * cxd(2, 1),
            dmv.y - mv.z * kv.x + fv.x - p * wd(3) * cxd(2, 3),
            -dmv.x - mv.z * kv.y + fv.y + p * r * wd(3) * cxd(1, 3),
            mv.y * kv.y + mv.x * kv.x
                + p * (1.0 - r) * wd(2) * cxd(1, 3)
                + p * (1.0 - r) * wd(1) * cxd(2, 3),
        );
        let c4 = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let c5 = p * Matrix3::from_diagonal(&Vector3::new(1.0, r, 1.0 + r));
        let c6 = 2.0 * p
            * Matrix3::new(
                trip(2, 3, 1),
                0.0,
                -trip(2, 1, 1),
                0.0,
                -r * trip(1, 3, 2),
                r * trip(1, 2, 2),
                trip(2, 3, 3),
                -r * trip(1, 3, 3),
                r * trip(1, 2, 3) - trip(2, 1, 3),
            );

        let half = gp * (1.0 + r) / 2.0;
        let d1_inv = Vector3::new(-f, -f / r, -f / half);
        let d2 = Matrix3::new(
            0.0,
            kv.z / f,
            -mv.y - (1.0 - r) * kv.y / f,
            -r * kv.z / f,
            0.0,
            mv.x - (1.0 - r) * kv.x / f,
            mv.y - kv.y * (r - half) / f,
            -mv.x + kv.x * (1.0 - half) / f,
            0.0,
        );
        let d3m = (self.damping / f)
            * Matrix3::new(
                0.0,
                -kv.z,
                kv.y,
                r * kv.z,
                0.0,
                -r * kv.x,
                -half * kv.y,
                half * kv.x,
                0.0,
            );

        Coeffs {
            b1,
            b2,
            b3,
            b4,
            b5,
            b6,
            c2,
            c3,
            c4,
            c5,
            c6,
            d1_inv,
            d2,
            d3m,
            dirs,
        }
    }

    /// Derivatives of both perturbation copies at complex
    /// lambda = lambda_r + i lambda_i. Real 3x3 blocks act on each copy;
    /// the copies mix only through the complex scalars.
    #[allow(clippy::too_many_arguments)]
    pub fn pert_rhs(
        &self,
        co: &Coeffs,
        lr: f64,
        li: f64,
        wr: &[f64],
        wi: &[f64],
        dwr: &mut [f64],
        dwi: &mut [f64],
    ) {
        let v3 = |w: &[f64], at: usize| Vector3::new(w[at], w[at + 1], w[at + 2]);
        let fr = v3(wr, PF);
        let fi = v3(wi, PF);
        let mr = v3(wr, PM);
        let mi = v3(wi, PM);
        let ar = v3(wr, PA);
        let ai = v3(wi, PA);
        let xr = v3(wr, PX);
        let xi = v3(wi, PX);

        // alpha' from the constitutive relation; dividing by the complex
        // scalar q = 1 + lambda gamma_v.
        let d3ar = co.d3m * ar;
        let d3ai = co.d3m * ai;
        let rr = lr * d3ar - li * d3ai - co.d2 * ar - mr;
        let ri = lr * d3ai + li * d3ar - co.d2 * ai - mi;
        let qr = 1.0 + self.damping * lr;
        let qi = self.damping * li;
        let den = qr * qr + qi * qi;
        let apr = co.d1_inv.component_mul(&((qr * rr + qi * ri) / den));
        let api = co.d1_inv.component_mul(&((qr * ri - qi * rr) / den));

        // lambda^2 = (lr^2 - li^2) + 2 i lr li.
        let s2r = lr * lr - li * li;
        let s2i = 2.0 * lr * li;

        let b5xr = co.b5 * xr;
        let b5xi = co.b5 * xi;
        let b6xr = co.b6 * xr;
        let b6xi = co.b6 * xi;
        let dfr = -co.b1 * fr - co.b2 * xr - co.b3 * apr - co.b4 * ar
            + s2r * b5xr - s2i * b5xi + lr * b6xr - li * b6xi;
        let dfi = -co.b1 * fi - co.b2 * xi - co.b3 * api - co.b4 * ai
            + s2r * b5xi + s2i * b5xr + lr * b6xi + li * b6xr;

        let c5ar = co.c5 * ar;
        let c5ai = co.c5 * ai;
        let c6ar = co.c6 * ar;
        let c6ai = co.c6 * ai;
        let dmr = -co.b1 * mr - co.c2 * apr - co.c3 * ar - co.c4 * fr
            + s2r * c5ar - s2i * c5ai + lr * c6ar - li * c6ai;
        let dmi = -co.b1 * mi - co.c2 * api - co.c3 * ai - co.c4 * fi
            + s2r * c5ai + s2i * c5ar + lr * c6ai + li * c6ar;

        // x^t is in laboratory components; alpha must be assembled there.
        let a_lab_r = ar.x * co.dirs[0] + ar.y * co.dirs[1] + ar.z * co.dirs[2];
        let a_lab_i = ai.x * co.dirs[0] + ai.y * co.dirs[1] + ai.z * co.dirs[2];
        let dxr = a_lab_r.cross(&co.dirs[2]);
        let dxi = a_lab_i.cross(&co.dirs[2]);

        let put = |dw: &mut [f64], at: usize, v: &Vector3<f64>| {
            dw[at] = v.x;
            dw[at + 1] = v.y;
            dw[at + 2] = v.z;
        };
        put(dwr, PF, &dfr);
        put(dwr, PM, &dmr);
        put(dwr, PA, &apr);
        put(dwr, PX, &dxr);
        put(dwi, PF, &dfi);
        put(dwi, PM, &dmi);
        put(dwi, PA, &api);
        put(dwi, PX, &dxi);
    }
}

/// Boundary conditions of one perturbation copy, 12 entries: planar
/// displacement and axial force vanish at the near clamp, the rotation
/// vanishes at both clamps, the displacement at the far clamp.
fn copy_bc(w0: &[f64], w1: &[f64], out: &mut [f64]) {
    out[0] = w0[PX];
    out[1] = w0[PX + 1];
    out[2] = w0[PF + 2];
    out[3] = w0[PA];
    out[4] = w0[PA + 1];
    out[5] = w0[PA + 2];
    out[6] = w1[PX];
    out[7] = w1[PX + 1];
    out[8] = w1[PX + 2];
    out[9] = w1[PA];
    out[10] = w1[PA + 1];
    out[11] = w1[PA + 2];
}

/// Whether the scalar eigenvalue parameter of a single-copy system is the
/// real or the imaginary part of lambda.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaKind {
    Real,
    Imag,
}

/// The bare 12-dim perturbation system over a frozen base solution.
/// Parameters are (B, omega, T, lambda) like [`EigenSingle`]; the loads
/// must match the ones the base was solved at. Determinant signs of its
/// collocation Jacobian as lambda varies locate eigenvalues.
///
/// The coefficients depend only on the arclength and the loads, never on
/// the perturbation unknowns or lambda, so they are cached per station;
/// an eigenvalue scan refactors the matrix hundreds of times over the
/// same mesh.
pub struct FrozenBase<'a> {
    pub lin: Linearized,
    pub base: &'a Solution,
    pub kind: LambdaKind,
    cache: std::cell::RefCell<std::collections::HashMap<[u64; 4], Coeffs>>,
}

impl<'a> FrozenBase<'a> {
    pub fn new(lin: Linearized, base: &'a Solution, kind: LambdaKind) -> FrozenBase<'a> {
        FrozenBase {
            lin,
            base,
            kind,
            cache: std::cell::RefCell::new(std::collections::HashMap::new()),
        }
    }
}

impl BvpSystem for FrozenBase<'_> {
    fn dim(&self) -> usize {
        PERT_DIM
    }

    fn n_params(&self) -> usize {
        4
    }

    fn n_bc(&self) -> usize {
        PERT_DIM
    }

    fn rhs(&self, s: f64, u: &[f64], p: &[f64], du: &mut [f64]) {
        let key = [
            s.to_bits(),
            p[0].to_bits(),
            p[1].to_bits(),
            p[2].to_bits(),
        ];
        let co = {
            let mut cache = self.cache.borrow_mut();
            cache
                .entry(key)
                .or_insert_with(|| {
                    let mut ub = [0.0; BASE_DIM];
                    self.base.eval(s, &mut ub);
                    self.lin.coeffs(&ub, p)
                })
                .clone()
        };
        let (lr, li) = match self.kind {
            LambdaKind::Real => (p[PARAM_LAMBDA], 0.0),
            LambdaKind::Imag => (0.0, p[PARAM_LAMBDA]),
        };
        let zero = [0.0; PERT_DIM];
        let mut scratch = [0.0; PERT_DIM];
        self.lin.pert_rhs(&co, lr, li, u, &zero, du, &mut scratch);
    }

    fn bc(&self, u0: &[f64], u1: &[f64], _p: &[f64], out: &mut [f64]) {
        copy_bc(u0, u1, out);
    }
}

/// Base and one real perturbation copy, 30-dimensional. Valid for purely
/// imaginary lambda (kind Imag, the neutral whirling modes) or purely
/// real lambda (kind Real, buckling growth rates) while the spin and the
/// damping both vanish; the gyroscopic and damping terms would otherwise
/// couple the discarded quadrature copy.
pub struct EigenSingle {
    pub lin: Linearized,
    pub kind: LambdaKind,
}

impl EigenSingle {
    pub fn new(params: &RodParams, kind: LambdaKind) -> Result<EigenSingle> {
        if params.omega != 0.0 || params.damping != 0.0 {
            return Err(Error::InvalidParameters {
                why: format!(
                    "single-copy eigenvalue system needs omega = damping = 0, \
                     got omega = {}, damping = {}",
                    params.omega, params.damping
                ),
            });
        }
        Ok(EigenSingle {
            lin: Linearized::new(params),
            kind,
        })
    }

    /// The single-copy system with lambda held at zero, where every
    /// lambda term vanishes and the copies of the full form decouple
    /// exactly. Valid for any spin and damping, unlike the scanning
    /// constructor; the caller must keep the lambda parameter pinned.
    pub fn at_zero(params: &RodParams) -> EigenSingle {
        EigenSingle {
            lin: Linearized::new(params),
            kind: LambdaKind::Real,
        }
    }
}

impl BvpSystem for EigenSingle {
    fn dim(&self) -> usize {
        BASE_DIM + PERT_DIM
    }

    fn n_params(&self) -> usize {
        4
    }

    fn n_bc(&self) -> usize {
        BASE_DIM + PERT_DIM
    }

    fn rhs(&self, s: f64, u: &[f64], p: &[f64], du: &mut [f64]) {
        let (ub, w) = u.split_at(BASE_DIM);
        let (dub, dw) = du.split_at_mut(BASE_DIM);
        self.lin.stationary.rhs(s, ub, p, dub);
        let co = self.lin.coeffs(ub, p);
        let (lr, li) = match self.kind {
            LambdaKind::Real => (p[PARAM_LAMBDA], 0.0),
            LambdaKind::Imag => (0.0, p[PARAM_LAMBDA]),
        };
        let zero = [0.0; PERT_DIM];
        let mut scratch = [0.0; PERT_DIM];
        self.lin.pert_rhs(&co, lr, li, w, &zero, dw, &mut scratch);
    }

    fn bc(&self, u0: &[f64], u1: &[f64], p: &[f64], out: &mut [f64]) {
        self.lin
            .stationary
            .bc(&u0[..BASE_DIM], &u1[..BASE_DIM], p, &mut out[..BASE_DIM]);
        copy_bc(&u0[BASE_DIM..], &u1[BASE_DIM..], &mut out[BASE_DIM..]);
    }
}

/// Base and both perturbation copies, 42-dimensional, for general complex
/// lambda. Parameters: (B, omega, T, lambda_r, lambda_i).
pub struct EigenFull {
    pub lin: Linearized,
}

impl EigenFull {
    pub fn new(params: &RodParams) -> EigenFull {
        EigenFull {
            lin: Linearized::new(params),
        }
    }
}

impl BvpSystem for EigenFull {
    fn dim(&self) -> usize {
        BASE_DIM + 2 * PERT_DIM
    }

    fn n_params(&self) -> usize {
        5
    }

    fn n_bc(&self) -> usize {
        BASE_DIM + 2 * PERT_DIM
    }

    fn rhs(&self, s: f64, u: &[f64], p: &[f64], du: &mut [f64]) {
        let ub = &u[..BASE_DIM];
        self.lin.stationary.rhs(s, ub, p, &mut du[..BASE_DIM]);
        let co = self.lin.coeffs(ub, p);
        let (lr, li) = (p[PARAM_LAMBDA_R], p[PARAM_LAMBDA_I]);
        let (head, wi) = u.split_at(COPY_I);
        let wr = &head[COPY_R..];
        let (dhead, dwi) = du.split_at_mut(COPY_I);
        self.lin.pert_rhs(&co, lr, li, wr, wi, &mut dhead[COPY_R..], dwi);
    }

    fn bc(&self, u0: &[f64], u1: &[f64], p: &[f64], out: &mut [f64]) {
        self.lin
            .stationary
            .bc(&u0[..BASE_DIM], &u1[..BASE_DIM], p, &mut out[..BASE_DIM]);
        copy_bc(
            &u0[COPY_R..COPY_I],
            &u1[COPY_R..COPY_I],
            &mut out[COPY_R..COPY_I],
        );
        copy_bc(&u0[COPY_I..], &u1[COPY_I..], &mut out[COPY_I..]);
    }
}

/// Integral constraint fixing the size of the perturbation copy starting
/// at `copy_offset`: the integral of |x^t|^2 + |alpha|^2 equals `target`.
pub fn norm_constraint<'a>(copy_offset: usize, target: f64) -> Constraint<'a> {
    Constraint::integral(
        move |_s, u, _p| {
            let w = &u[copy_offset..copy_offset + PERT_DIM];
            w[PX] * w[PX]
                + w[PX + 1] * w[PX + 1]
                + w[PX + 2] * w[PX + 2]
                + w[PA] * w[PA]
                + w[PA + 1] * w[PA + 1]
                + w[PA + 2] * w[PA + 2]
        },
        target,
    )
}

/// The squared size of one perturbation copy of a composite solution,
/// the quantity [`norm_constraint`] pins.
pub fn copy_norm2(sol: &Solution, copy_offset: usize) -> f64 {
    sol.quadrature(|_s, u| {
        let w = &u[copy_offset..copy_offset + PERT_DIM];
        w[PX] * w[PX]
            + w[PX + 1] * w[PX + 1]
            + w[PX + 2] * w[PX + 2]
            + w[PA] * w[PA]
            + w[PA + 1] * w[PA + 1]
            + w[PA + 2] * w[PA + 2]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use crate::stationary::IX;

    fn splitmix(state: &mut u64) -> f64 {
        *state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }

    /// Random orthonormal right-handed frame from a random quaternion.
    fn random_frame(st: &mut u64) -> [Vector3<f64>; 3] {
        let q: Vec<f64> = (0..4).map(|_| splitmix(st)).collect();
        let n = q.iter().map(|x| x * x).sum::<f64>();
        let (q0, q1, q2, q3) = (q[0], q[1], q[2], q[3]);
        let rows = [
            [
                q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3,
                2.0 * (q1 * q2 + q0 * q3),
                2.0 * (q1 * q3 - q0 * q2),
            ],
            [
                2.0 * (q1 * q2 - q0 * q3),
                q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3,
                2.0 * (q2 * q3 + q0 * q1),
            ],
            [
                2.0 * (q1 * q3 + q0 * q2),
                2.0 * (q2 * q3 - q0 * q1),
                q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3,
            ],
        ];
        [
            Vector3::new(rows[0][0], rows[0][1], rows[0][2]) / n,
            Vector3::new(rows[1][0], rows[1][1], rows[1][2]) / n,
            Vector3::new(rows[2][0], rows[2][1], rows[2][2]) / n,
        ]
    }

    /// The linearization must be the directional derivative of the
    /// stationary right-hand side. A perturbation w maps to a direction V
    /// in the stationary variables (the component fields perturb
    /// directly; the frame rotates by alpha), and the analytic
    /// derivatives of V must match central differences of the stationary
    /// system along V. Exercises every matrix that survives at lambda = 0,
    /// on a generic curved, spinning, loaded base state.
    #[test]
    fn matches_directional_derivative_of_the_stationary_system() {
        let mut params = RodParams::electrodynamic_tether();
        params.b = 0.7;
        params.omega = 0.9;
        params.tension = 0.2;
        let lin = Linearized::new(&params);
        let st = lin.stationary;
        let loads = Stationary::load_vector(&params);

        for seed in 1..4u64 {
            let mut rng = seed * 0x2545f491;
            let dirs = random_frame(&mut rng);
            let mut u = [0.0; BASE_DIM];
            for v in u.iter_mut().take(9) {
                *v = splitmix(&mut rng);
            }
            for (i, d) in dirs.iter().enumerate() {
                u[ID1 + 3 * i] = d.x;
                u[ID1 + 3 * i + 1] = d.y;
                u[ID1 + 3 * i + 2] = d.z;
            }
            let mut w = [0.0; PERT_DIM];
            for v in w.iter_mut() {
                *v = splitmix(&mut rng);
            }

            // Direction in stationary variables.
            let a_lab = w[PA] * dirs[0] + w[PA + 1] * dirs[1] + w[PA + 2] * dirs[2];
            let mut v = [0.0; BASE_DIM];
            for i in 0..3 {
                v[IX + i] = w[PX + i];
                v[IF + i] = w[PF + i];
                v[IM + i] = w[PM + i];
                let dd = a_lab.cross(&dirs[i]);
                v[ID1 + 3 * i] = dd.x;
                v[ID1 + 3 * i + 1] = dd.y;
                v[ID1 + 3 * i + 2] = dd.z;
            }

            // Central difference of the stationary rhs along V.
            let eps = 1e-6;
            let mut up = u;
            let mut um = u;
            for i in 0..BASE_DIM {
                up[i] += eps * v[i];
                um[i] -= eps * v[i];
            }
            let mut dup = [0.0; BASE_DIM];
            let mut dum = [0.0; BASE_DIM];
            st.rhs(0.0, &up, &loads, &mut dup);
            st.rhs(0.0, &um, &loads, &mut dum);
            let fd: Vec<f64> = dup
                .iter()
                .zip(&dum)
                .map(|(a, b)| (a - b) / (2.0 * eps))
                .collect();

            // Analytic derivative of V from the perturbation system at
            // lambda = 0.
            let co = lin.coeffs(&u, &loads);
            let zero = [0.0; PERT_DIM];
            let mut dw = [0.0; PERT_DIM];
            let mut scratch = [0.0; PERT_DIM];
            lin.pert_rhs(&co, 0.0, 0.0, &w, &zero, &mut dw, &mut scratch);

            let kap = st.curvature(&u[IM..IM + 3]);
            let k_lab = kap[0] * dirs[0] + kap[1] * dirs[1] + kap[2] * dirs[2];
            let da_lab = dw[PA] * dirs[0]
                + dw[PA + 1] * dirs[1]
                + dw[PA + 2] * dirs[2]
                + k_lab.cross(&a_lab);
            let mut expect = [0.0; BASE_DIM];
            for i in 0..3 {
                expect[IX + i] = dw[PX + i];
                expect[IF + i] = dw[PF + i];
                expect[IM + i] = dw[PM + i];
                let dd = da_lab.cross(&dirs[i]) + a_lab.cross(&k_lab.cross(&dirs[i]));
                expect[ID1 + 3 * i] = dd.x;
                expect[ID1 + 3 * i + 1] = dd.y;
                expect[ID1 + 3 * i + 2] = dd.z;
            }

            for i in 0..BASE_DIM {
                let scale = 1.0f64.max(expect[i].abs());
                assert!(
                    (fd[i] - expect[i]).abs() < 1e-6 * scale,
                    "seed {seed} component {i}: fd {} vs analytic {}",
                    fd[i],
                    expect[i]
                );
            }
        }
    }

    /// About the straight state with B = omega = T = 0 a planar bending
    /// mode is known in closed form; the perturbation derivative must
    /// reproduce its exact s-derivatives pointwise at lambda = i mu.
    #[test]
    fn reproduces_the_closed_form_bending_mode() {
        let mut params = RodParams::electrodynamic_tether();
        params.b = 0.0;
        let lin = Linearized::new(&params);
        let (p, f) = (params.p, params.f);
        let mu = oracles::unperturbed_bending_eigs(1, p, 1.0, f)[0];
        let c2 = mu * mu * p * f;
        let c0 = mu * mu * f;
        let disc = (c2 * c2 + 4.0 * c0).sqrt();
        let a = ((disc + c2) / 2.0).sqrt();
        let b = ((disc - c2) / 2.0).sqrt();
        let ca = a.cos() - b.cosh();
        let cb = -(a.sin() - (a / b) * b.sinh());
        // y, y', y'', y''' of the clamped-clamped mode.
        let y = |s: f64| {
            ca * ((a * s).sin() - (a / b) * (b * s).sinh()) + cb * ((a * s).cos() - (b * s).cosh())
        };
        let dy = |s: f64| {
            ca * (a * (a * s).cos() - a * (b * s).cosh()) + cb * (-a * (a * s).sin() - b * (b * s).sinh())
        };
        let d2y = |s: f64| {
            ca * (-a * a * (a * s).sin() - a * b * (b * s).sinh())
                + cb * (-a * a * (a * s).cos() - b * b * (b * s).cosh())
        };
        let d3y = |s: f64| {
            ca * (-a * a * a * (a * s).cos() - a * b * b * (b * s).cosh())
                + cb * (a * a * a * (a * s).sin() - b * b * b * (b * s).sinh())
        };

        let u = {
            let mut u = [0.0; BASE_DIM];
            u[ID1] = 1.0;
            u[ID2 + 1] = 1.0;
            u[ID3 + 2] = 1.0;
            u
        };
        let loads = [0.0, 0.0, 0.0];
        let co = lin.coeffs(&u, &loads);
        for s in [0.17, 0.5, 0.83] {
            let mut w = [0.0; PERT_DIM];
            w[PX + 1] = y(s);
            w[PA] = -dy(s);
            w[PM] = -d2y(s) / f;
            w[PF + 1] = -d3y(s) / f - mu * mu * p * dy(s);
            let zero = [0.0; PERT_DIM];
            let mut dw = [0.0; PERT_DIM];
            let mut scratch = [0.0; PERT_DIM];
            lin.pert_rhs(&co, 0.0, mu, &w, &zero, &mut dw, &mut scratch);

            let expect: [(usize, f64); 6] = [
                (PX + 1, dy(s)),
                (PA, -d2y(s)),
                (PM, -d3y(s) / f),
                (PF + 1, -mu * mu * y(s)),
                (PF, 0.0),
                (PM + 2, 0.0),
            ];
            for (idx, want) in expect {
                let scale = 1.0f64.max(want.abs());
                assert!(
                    (dw[idx] - want).abs() < 1e-9 * scale,
                    "s = {s}, component {idx}: got {} want {want}",
                    dw[idx]
                );
            }
        }
    }

    /// Same check for the closed-form torsion mode.
    #[test]
    fn reproduces_the_closed_form_torsion_mode() {
        let mut params = RodParams::electrodynamic_tether();
        params.b = 0.0;
        let lin = Linearized::new(&params);
        let (p, gp, f) = (params.p, params.gamma, params.f);
        let mu = oracles::torsional_eigs(1, gp, p, f)[0];
        let pi = std::f64::consts::PI;
        let amp = 2.0 * f / (gp * (1.0 + params.r) * pi);

        let u = {
            let mut u = [0.0; BASE_DIM];
            u[ID1] = 1.0;
            u[ID2 + 1] = 1.0;
            u[ID3 + 2] = 1.0;
            u
        };
        let co = lin.coeffs(&u, &[0.0, 0.0, 0.0]);
        for s in [0.23, 0.61] {
            let mut w = [0.0; PERT_DIM];
            w[PM + 2] = (pi * s).cos();
            w[PA + 2] = amp * (pi * s).sin();
            let zero = [0.0; PERT_DIM];
            let mut dw = [0.0; PERT_DIM];
            let mut scratch = [0.0; PERT_DIM];
            lin.pert_rhs(&co, 0.0, mu, &w, &zero, &mut dw, &mut scratch);
            assert!((dw[PM + 2] + pi * (pi * s).sin()).abs() < 1e-9);
            assert!((dw[PA + 2] - amp * pi * (pi * s).cos()).abs() < 1e-9);
        }
    }

    /// Conjugating lambda and the eigenfunction must conjugate the
    /// derivative; catches sign slips in the cross-copy couplings.
    #[test]
    fn conjugation_symmetry_of_the_two_copy_form() {
        let mut params = RodParams::electrodynamic_tether();
        params.b = 0.9;
        params.omega = 1.3;
        params.damping = 0.02;
        let lin = Linearized::new(&params);
        let loads = Stationary::load_vector(&params);
        let mut rng = 77u64;
        let dirs = random_frame(&mut rng);
        let mut u = [0.0; BASE_DIM];
        for v in u.iter_mut().take(9) {
            *v = splitmix(&mut rng);
        }
        for (i, d) in dirs.iter().enumerate() {
            u[ID1 + 3 * i] = d.x;
            u[ID1 + 3 * i + 1] = d.y;
            u[ID1 + 3 * i + 2] = d.z;
        }
        let co = lin.coeffs(&u, &loads);
        let mut wr = [0.0; PERT_DIM];
        let mut wi = [0.0; PERT_DIM];
        for i in 0..PERT_DIM {
            wr[i] = splitmix(&mut rng);
            wi[i] = splitmix(&mut rng);
        }
        let (lr, li) = (0.31, 1.27);
        let mut dr = [0.0; PERT_DIM];
        let mut di = [0.0; PERT_DIM];
        lin.pert_rhs(&co, lr, li, &wr, &wi, &mut dr, &mut di);
        let win: Vec<f64> = wi.iter().map(|x| -x).collect();
        let mut cr = [0.0; PERT_DIM];
        let mut ci = [0.0; PERT_DIM];
        lin.pert_rhs(&co, lr, -li, &wr, &win, &mut cr, &mut ci);
        for i in 0..PERT_DIM {
            assert!((cr[i] - dr[i]).abs() < 1e-12);
            assert!((ci[i] + di[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_damping_is_an_error() {
        let mut params = RodParams::electrodynamic_tether();
        params.damping = 0.05;
        let lin = Linearized::new(&params);
        assert!(lin.check_damping(-20.0, 0.0).is_err());
        assert!(lin.check_damping(-20.0, 1e-3).is_ok());
        assert!(lin.check_damping(0.5, 0.0).is_ok());
    }

    #[test]
    fn single_copy_system_rejects_spin_and_damping() {
        let mut params = RodParams::electrodynamic_tether();
        params.omega = 0.5;
        assert!(EigenSingle::new(&params, LambdaKind::Imag).is_err());
        params.omega = 0.0;
        params.damping = 0.01;
        assert!(EigenSingle::new(&params, LambdaKind::Imag).is_err());
        params.damping = 0.0;
        assert!(EigenSingle::new(&params, LambdaKind::Imag).is_ok());
    }
}

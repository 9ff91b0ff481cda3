//! Model parameters and their nondimensionalization.
//!
//! Lengths are scaled by the rod length L, forces by f E I_1 / L^2,
//! moments by f E I_1 / L, and time by the reference bending frequency
//!
//!   omega_c = sqrt(f E I_1 / (rho A L^4)),
//!
//! where the tuning factor f shifts the frequency scale so that numbers
//! stay of order one for the configuration at hand (f = 1 for analysis,
//! f = 500.5639 puts the first bending mode of the reference tether at
//! frequency 1). The dimensionless groups are
//!
//!   P = I_1 / (A L^2),   R = I_2 / I_1,   Gamma = 2 G / E,
//!   B = B_0 I L^3 / (f E I_1),   T = T_dim L^2 / (f E I_1),
//!   gamma = gamma_v omega_c,
//!
//! with I_1 >= I_2 by axis convention, so R <= 1, and 1/Gamma - 1 equal
//! to Poisson's ratio.

use crate::{Error, Result};

/// Dimensionless parameters of the whirling rod problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodParams {
    /// Rotary inertia parameter P = I_1 / (A L^2).
    pub p: f64,
    /// Bending stiffness ratio R = I_2 / I_1, in (0, 1].
    pub r: f64,
    /// Twist-to-bend stiffness ratio Gamma = 2 G / E.
    pub gamma: f64,
    /// Frequency tuning factor in the scaling of F, M, t, and B.
    pub f: f64,
    /// Magnetic field parameter.
    pub b: f64,
    /// Whirl rate (rotation of the co-moving frame about e_3).
    pub omega: f64,
    /// Internal viscous damping gamma_v scaled by omega_c.
    pub damping: f64,
    /// End tension applied at s = 0 along e_3.
    pub tension: f64,
}

impl RodParams {
    /// Material constants of the reference electrodynamic tether, with all
    /// loads switched off.
    pub fn electrodynamic_tether() -> Self {
        RodParams {
            p: 0.001,
            r: 0.5526,
            gamma: 0.76923,
            f: 500.5639,
            b: 0.0,
            omega: 0.0,
            damping: 0.0,
            tension: 0.0,
        }
    }

    /// The same material in the f = 1 frequency convention.
    pub fn electrodynamic_tether_f1() -> Self {
        RodParams {
            f: 1.0,
            ..Self::electrodynamic_tether()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::InvalidParameters { why });
        if !(self.p > 0.0 && self.p.is_finite()) {
            return bad(format!("P must be positive, got {}", self.p));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return bad(format!("R must lie in (0, 1], got {}", self.r));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("Gamma must be positive, got {}", self.gamma));
        }
        if !(self.f > 0.0 && self.f.is_finite()) {
            return bad(format!("f must be positive, got {}", self.f));
        }
        if self.damping < 0.0 {
            return bad(format!("damping must be nonnegative, got {}", self.damping));
        }
        for (name, v) in [
            ("B", self.b),
            ("omega", self.omega),
            ("damping", self.damping),
            ("tension", self.tension),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        Ok(())
    }

    /// Re-expresses the same physical configuration in another frequency
    /// convention. B and T carry 1/f, rates carry 1/sqrt(f):
    ///
    ///   B_2 = B_1 f_1/f_2,  T_2 = T_1 f_1/f_2,
    ///   omega_2 = omega_1 sqrt(f_1/f_2),  gamma_2 = gamma_1 sqrt(f_2/f_1).
    pub fn with_f(&self, f_new: f64) -> Self {
        let load = self.f / f_new;
        let rate = (self.f / f_new).sqrt();
        RodParams {
            p: self.p,
            r: self.r,
            gamma: self.gamma,
            f: f_new,
            b: self.b * load,
            omega: self.omega * rate,
            // gamma_v is a material time, fixed; omega_c grows with sqrt(f).
            damping: self.damping / rate,
            tension: self.tension * load,
        }
    }

    /// Converts an eigenvalue (a rate, like omega) between f conventions.
    pub fn convert_rate(&self, lambda: f64, f_new: f64) -> f64 {
        lambda * (self.f / f_new).sqrt()
    }
}

/// Dimensional description of a rod, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalParams {
    /// Rod length L (m).
    pub length: f64,
    /// Cross-section area A (m^2).
    pub area: f64,
    /// Young's modulus E (N/m^2).
    pub youngs_modulus: f64,
    /// Shear modulus G (N/m^2).
    pub shear_modulus: f64,
    /// Principal bending stiffness E I_1 (N m^2), the larger one.
    pub bending_stiffness_1: f64,
    /// Second bending stiffness E I_2 (N m^2).
    pub bending_stiffness_2: f64,
    /// Mass per unit length rho A (kg/m).
    pub mass_per_length: f64,
    /// Current carried by the rod (A).
    pub current: f64,
    /// Magnetic field strength B_0 (T), directed along the clamp axis.
    pub field: f64,
    /// End tension (N).
    pub tension: f64,
    /// Whirl rate (rad/s).
    pub spin_rate: f64,
    /// Internal viscous damping time gamma_v (s).
    pub damping_time: f64,
    /// Frequency tuning factor for the scaling.
    pub f: f64,
}

impl DimensionalParams {
    /// Reference bending frequency omega_c = sqrt(f E I_1 / (rho A L^4)).
    pub fn omega_c(&self) -> f64 {
        (self.f * self.bending_stiffness_1
            / (self.mass_per_length * self.length.powi(4)))
        .sqrt()
    }

    pub fn nondimensionalize(&self) -> Result<RodParams> {
        for (name, v) in [
            ("length", self.length),
            ("area", self.area),
            ("youngs_modulus", self.youngs_modulus),
            ("shear_modulus", self.shear_modulus),
            ("bending_stiffness_1", self.bending_stiffness_1),
            ("bending_stiffness_2", self.bending_stiffness_2),
            ("mass_per_length", self.mass_per_length),
            ("f", self.f),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameters {
                    why: format!("{name} must be positive, got {v}"),
                });
            }
        }
        let l2 = self.length * self.length;
        let i1 = self.bending_stiffness_1 / self.youngs_modulus;
        let scale = self.f * self.bending_stiffness_1;
        let params = RodParams {
            p: i1 / (self.area * l2),
            r: self.bending_stiffness_2 / self.bending_stiffness_1,
            gamma: 2.0 * self.shear_modulus / self.youngs_modulus,
            f: self.f,
            b: self.field * self.current * l2 * self.length / scale,
            omega: self.spin_rate / self.omega_c(),
            damping: self.damping_time * self.omega_c(),
            tension: self.tension * l2 / scale,
        };
        params.validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_tether_dimensional() -> DimensionalParams {
        DimensionalParams {
            length: 100.0,
            area: 2.879e-11,
            youngs_modulus: 1.32e11,
            shear_modulus: 0.5 * 0.76923 * 1.32e11,
            bending_stiffness_1: 38.0,
            bending_stiffness_2: 21.0,
            mass_per_length: 0.2,
            current: 0.0,
            field: 0.0,
            tension: 0.0,
            spin_rate: 0.0,
            damping_time: 0.0,
            f: 500.5639,
        }
    }

    #[test]
    fn reference_tether_groups_match_preset() {
        let got = reference_tether_dimensional().nondimensionalize().unwrap();
        let want = RodParams::electrodynamic_tether();
        assert_relative_eq!(got.p, want.p, max_relative = 1e-3);
        assert_relative_eq!(got.r, want.r, max_relative = 1e-3);
        assert_relative_eq!(got.gamma, want.gamma, max_relative = 1e-5);
        assert_eq!(got.f, want.f);
    }

    #[test]
    fn f_conversion_round_trips() {
        let mut a = RodParams::electrodynamic_tether();
        a.b = 0.7;
        a.omega = 1.3;
        a.damping = 0.02;
        a.tension = -0.4;
        let b = a.with_f(1.0);
        let back = b.with_f(a.f);
        assert_relative_eq!(back.b, a.b, max_relative = 1e-14);
        assert_relative_eq!(back.omega, a.omega, max_relative = 1e-14);
        assert_relative_eq!(back.damping, a.damping, max_relative = 1e-14);
        assert_relative_eq!(back.tension, a.tension, max_relative = 1e-14);
    }

    #[test]
    fn loads_scale_inversely_with_f() {
        let a = RodParams {
            b: 2.0,
            tension: 1.0,
            omega: 4.0,
            ..RodParams::electrodynamic_tether_f1()
        };
        let c = a.with_f(4.0);
        assert_relative_eq!(c.b, 0.5);
        assert_relative_eq!(c.tension, 0.25);
        assert_relative_eq!(c.omega, 2.0);
    }

    #[test]
    fn r_above_one_is_rejected() {
        let mut p = RodParams::electrodynamic_tether();
        p.r = 1.2;
        assert!(p.validate().is_err());
    }
}

//! Independent reference values for the straight rod.
//!
//! Everything here is computed without the collocation machinery, from
//! closed forms or a plain second-order finite-difference discretization,
//! so the main solver can be checked against genuinely different
//! arithmetic.
//!
//! About the straight state with omega = T = gamma = 0 the linearized
//! equations split into two clamped-clamped bending problems coupled only
//! through the magnetic term, and a Neumann torsion problem:
//!
//!   x'''' - lam^2 P f x'' + (lam^2 f / R) x - (B f / R) y' = 0,
//!   y'''' - lam^2 P f y'' +  lam^2 f      y + (B f)     x' = 0,
//!   M_3'' = lam^2 (2 P f / Gamma) M_3.
//!
//! Setting lam = 0 and eliminating y reduces buckling to a sixth-order
//! constant-coefficient problem whose clamped boundary conditions yield
//! the characteristic function [`chi`] of beta = (B f)^(1/3) / R^(1/6);
//! its zeros are all double (two bending modes buckle simultaneously).
//! With B = 0 the two bending families decouple and their frequencies
//! solve a clamped-clamped transcendental equation including rotary
//! inertia; torsion frequencies are exact multiples of
//! pi sqrt(Gamma / (2 P f)).

use crate::model::RodParams;
use crate::{Error, Result};
use magrod_bvp::linalg::BandedBordered;

const SQRT3: f64 = 1.7320508075688772;

/// Characteristic function of clamped-clamped magnetic buckling. Zeros in
/// beta mark the critical loads B = sqrt(R) beta^3 / f.
pub fn chi(beta: f64) -> f64 {
    let b = beta;
    2.0 * b.cos() + (2.0 * b).cos()
        - 2.0 * ((b / 2.0).cos() + (1.5 * b).cos()) * (SQRT3 * b / 2.0).cosh()
        + (2.0 - b.cos()) * (SQRT3 * b).cosh()
        - SQRT3 * b.sin() * (SQRT3 * b).sinh()
        - 2.0 * SQRT3 * ((b / 2.0).sin() - (1.5 * b).sin()) * (SQRT3 * b / 2.0).sinh()
}

/// [`chi`] divided by cosh(sqrt(3) beta), bounded for large beta.
pub fn chi_scaled(beta: f64) -> f64 {
    let c = (SQRT3 * beta).cosh();
    let ch = (SQRT3 * beta / 2.0).cosh() / c;
    let sh = (SQRT3 * beta / 2.0).sinh() / c;
    let s = (SQRT3 * beta).sinh() / c;
    (2.0 * beta.cos() + (2.0 * beta).cos()) / c
        - 2.0 * ((beta / 2.0).cos() + (1.5 * beta).cos()) * ch
        + (2.0 - beta.cos())
        - SQRT3 * beta.sin() * s
        - 2.0 * SQRT3 * ((beta / 2.0).sin() - (1.5 * beta).sin()) * sh
}

fn chi_scaled_slope(beta: f64) -> f64 {
    let h = 1e-6;
    (chi_scaled(beta + h) - chi_scaled(beta - h)) / (2.0 * h)
}

/// First `n` zeros of [`chi`]. The zeros are tangential (the function
/// touches zero without changing sign), so they sit where the slope of
/// the scaled function vanishes inside a near-zero dip; each dip is
/// refined by bisection on the slope.
pub fn chi_roots(n: usize) -> Vec<f64> {
    let mut roots = Vec::with_capacity(n);
    let step = 0.005;
    let mut beta = 0.2;
    let mut prev2 = chi_scaled(beta).abs();
    let mut prev1 = chi_scaled(beta + step).abs();
    beta += 2.0 * step;
    while roots.len() < n && beta < 500.0 {
        let cur = chi_scaled(beta).abs();
        if prev1 < prev2 && prev1 < cur && prev1 < 0.05 {
            let center = beta - step;
            let (mut lo, mut hi) = (center - step, center + step);
            if chi_scaled(lo) * chi_scaled(hi) < 0.0 {
                // Simple crossing (does not occur for the clamped rod, but
                // costs nothing to support).
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if chi_scaled(lo) * chi_scaled(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            } else if chi_scaled_slope(lo) * chi_scaled_slope(hi) < 0.0 {
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if chi_scaled_slope(lo) * chi_scaled_slope(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let root = 0.5 * (lo + hi);
                // Keep only dips that actually touch zero; chi has strictly
                // positive local minima as well.
                if chi_scaled(root).abs() < 1e-8 {
                    roots.push(root);
                }
            }
        }
        prev2 = prev1;
        prev1 = cur;
        beta += step;
    }
    roots
}

/// Critical magnetic loads in the given stiffness convention:
/// B_k = sqrt(R) beta_k^3 / f.
pub fn buckling_loads(n: usize, r: f64, f: f64) -> Vec<f64> {
    chi_roots(n)
        .into_iter()
        .map(|beta| r.sqrt() * beta.powi(3) / f)
        .collect()
}

/// Clamped-clamped bending characteristic at circular frequency mu.
/// `rfac` is the stiffness divisor of the family: R for bending in the
/// e_1 plane (stiffness I_2 resists it), 1 for the e_2 plane.
///
/// With lam = i mu the quartic u'''' + mu^2 P f u'' - (mu^2 f / rfac) u = 0
/// has roots +-i a, +-b; clamping both ends forces
/// 2ab (1 - cos a cosh b) + (b^2 - a^2) sin a sinh b = 0
/// (here scaled by cosh b).
pub fn bending_char(mu: f64, p: f64, rfac: f64, f: f64) -> f64 {
    let c2 = mu * mu * p * f;
    let c0 = mu * mu * f / rfac;
    let disc = (c2 * c2 + 4.0 * c0).sqrt();
    let a = ((disc + c2) / 2.0).sqrt();
    let b = ((disc - c2) / 2.0).sqrt();
    2.0 * a * b * (1.0 / b.cosh() - a.cos()) + (b * b - a * a) * a.sin() * b.tanh()
}

/// First `n` bending frequencies of one family of the unperturbed rod.
pub fn unperturbed_bending_eigs(n: usize, p: f64, rfac: f64, f: f64) -> Vec<f64> {
    let mut roots = Vec::with_capacity(n);
    let step = 0.02;
    let mut mu = 1e-3;
    let mut prev = bending_char(mu, p, rfac, f);
    while roots.len() < n && mu < 1e5 {
        let mu2 = mu + step;
        let cur = bending_char(mu2, p, rfac, f);
        if prev * cur < 0.0 {
            let (mut lo, mut hi) = (mu, mu2);
            let flo = prev;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if flo * bending_char(mid, p, rfac, f) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        mu = mu2;
        prev = cur;
    }
    roots
}

/// Torsion frequencies of the unperturbed rod: the Neumann Laplacian
/// modes give mu_k = k pi sqrt(Gamma / (2 P f)).
pub fn torsional_eigs(n: usize, gamma: f64, p: f64, f: f64) -> Vec<f64> {
    (1..=n)
        .map(|k| k as f64 * std::f64::consts::PI * (gamma / (2.0 * p * f)).sqrt())
        .collect()
}

/// Which decoupled subsystem of the straight rod a mode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeFamily {
    /// Bending in the e_1 direction (soft axis, stiffness ratio R).
    BendX,
    /// Bending in the e_2 direction.
    BendY,
    /// Twist about the centerline.
    Torsion,
}

/// First `n` frequencies of the unperturbed rod across all three
/// families, ascending, each labeled with its family.
pub fn unperturbed_frequencies(params: &RodParams, n: usize) -> Vec<(f64, ModeFamily)> {
    let mut all: Vec<(f64, ModeFamily)> = Vec::new();
    for mu in unperturbed_bending_eigs(n, params.p, params.r, params.f) {
        all.push((mu, ModeFamily::BendX));
    }
    for mu in unperturbed_bending_eigs(n, params.p, 1.0, params.f) {
        all.push((mu, ModeFamily::BendY));
    }
    for mu in torsional_eigs(n, params.gamma, params.p, params.f) {
        all.push((mu, ModeFamily::Torsion));
    }
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite frequencies"));
    all.truncate(n);
    all
}

/// Finite-difference spectrum of the linearization about the straight
/// state at magnetic load B (omega = T = gamma = 0): returns the first
/// `n_modes` pencil eigenvalues sigma = lam^2 sorted by magnitude,
/// excluding the rigid torsion mode at sigma = 0. Negative sigma means a
/// stable pair lam = +-i sqrt(-sigma).
///
/// Second-order central differences on `grid` uniform intervals; the
/// clamped bending conditions fold the ghost points as u_(-1) = u_1, the
/// Neumann torsion conditions as m_(-1) = m_1. Eigenvalues come from
/// shift-inverted subspace iteration on each decoupled block.
pub fn fd_eigen_oracle(grid: usize, params: &RodParams, n_modes: usize) -> Result<Vec<f64>> {
    if grid < 32 {
        return Err(Error::InvalidParameters {
            why: format!("finite-difference grid must have at least 32 intervals, got {grid}"),
        });
    }
    params.validate()?;
    let (p, r, gam, f, b) = (params.p, params.r, params.gamma, params.f, params.b);
    let n = grid;
    let h = 1.0 / n as f64;
    let ni = n - 1;

    // Coupled bending block, unknowns interleaved (x_i, y_i) over the
    // interior points.
    let dim = 2 * ni;
    let mut a_mat = BandedBordered::new(dim, 0);
    let mut m_mat = BandedBordered::new(dim, 0);
    let h2 = h * h;
    let h4 = h2 * h2;
    for i in 0..ni {
        for comp in 0..2 {
            // Window covering x and y entries of points i-2 .. i+2.
            let jlo = i.saturating_sub(2);
            let jhi = (i + 2).min(ni - 1);
            let start = 2 * jlo;
            let width = 2 * (jhi - jlo) + 2;
            let ra = a_mat.push_band_row(start, width);
            let rm = m_mat.push_band_row(start, width);
            let mut arow = vec![0.0; width];
            let mut mrow = vec![0.0; width];
            let at = |row: &mut Vec<f64>, j: usize, c: usize, v: f64| {
                row[2 * j + c - start] += v;
            };
            // Fourth difference with clamped ghost folds.
            for (j, cf) in [
                (i as isize - 2, 1.0),
                (i as isize - 1, -4.0),
                (i as isize, 6.0),
                (i as isize + 1, -4.0),
                (i as isize + 2, 1.0),
            ] {
                if (0..ni as isize).contains(&j) {
                    at(&mut arow, j as usize, comp, cf / h4);
                }
            }
            if i == 0 {
                at(&mut arow, 0, comp, 1.0 / h4);
            }
            if i == ni - 1 {
                at(&mut arow, ni - 1, comp, 1.0 / h4);
            }
            // Magnetic first-derivative coupling to the other component.
            let (other, bcoef) = if comp == 0 {
                (1, -(b * f / r))
            } else {
                (0, b * f)
            };
            for (j, cf) in [(i as isize - 1, -0.5), (i as isize + 1, 0.5)] {
                if (0..ni as isize).contains(&j) {
                    at(&mut arow, j as usize, other, bcoef * cf / h);
                }
            }
            // Mass side: f (P u'' - u / rfac).
            let rfac = if comp == 0 { r } else { 1.0 };
            for (j, cf) in [
                (i as isize - 1, 1.0),
                (i as isize, -2.0),
                (i as isize + 1, 1.0),
            ] {
                if (0..ni as isize).contains(&j) {
                    at(&mut mrow, j as usize, comp, f * p * cf / h2);
                }
            }
            at(&mut mrow, i, comp, -f / rfac);
            a_mat.band_row_mut(ra).vals.copy_from_slice(&arow);
            m_mat.band_row_mut(rm).vals.copy_from_slice(&mrow);
        }
    }
    let mut sigmas = block_eigs(&a_mat, &m_mat, n_modes + 4)?;

    // Torsion block on the full grid with Neumann folds; mass is the
    // constant 2 P f / Gamma.
    let nt = n + 1;
    let mut a_t = BandedBordered::new(nt, 0);
    let mut m_t = BandedBordered::new(nt, 0);
    for i in 0..nt {
        let jlo = i.saturating_sub(1);
        let jhi = (i + 1).min(nt - 1);
        let width = jhi - jlo + 1;
        let ra = a_t.push_band_row(jlo, width);
        let rm = m_t.push_band_row(jlo, width);
        let mut arow = vec![0.0; width];
        let mut mrow = vec![0.0; width];
        arow[i - jlo] += -2.0 / h2;
        for j in [i as isize - 1, i as isize + 1] {
            let jj = if j == -1 {
                1
            } else if j == nt as isize {
                nt - 2
            } else {
                j as usize
            };
            arow[jj - jlo] += 1.0 / h2;
        }
        mrow[i - jlo] = 2.0 * p * f / gam;
        a_t.band_row_mut(ra).vals.copy_from_slice(&arow);
        m_t.band_row_mut(rm).vals.copy_from_slice(&mrow);
    }
    sigmas.extend(block_eigs(&a_t, &m_t, 6)?);

    sigmas.retain(|s| s.abs() > 1e-8);
    sigmas.sort_by(|x, y| x.abs().partial_cmp(&y.abs()).expect("finite sigma"));
    sigmas.truncate(n_modes);
    Ok(sigmas)
}

/// Stable frequencies from [`fd_eigen_oracle`]: mu = sqrt(-sigma) for the
/// negative pencil eigenvalues, ascending.
pub fn fd_frequencies(grid: usize, params: &RodParams, n_modes: usize) -> Result<Vec<f64>> {
    let mut mus: Vec<f64> = fd_eigen_oracle(grid, params, n_modes + 2)?
        .into_iter()
        .filter(|s| *s < 0.0)
        .map(|s| (-s).sqrt())
        .collect();
    mus.sort_by(|a, b| a.partial_cmp(b).expect("finite frequencies"));
    mus.truncate(n_modes);
    Ok(mus)
}

/// Smallest-magnitude eigenvalues of the pencil A v = sigma M v by
/// shift-inverted subspace iteration with a banded factorization of
/// (A - tau M).
fn block_eigs(a: &BandedBordered, m: &BandedBordered, want: usize) -> Result<Vec<f64>> {
    let n = a.n_cols();
    let k = (want + 4).min(n);
    let mut tau = -1e-4;
    let fact = loop {
        // A - tau M, rebuilt per attempt; move the shift if it happens to
        // sit on an eigenvalue.
        let mut shifted = a.clone();
        shifted.add_scaled(m, -tau);
        let fact = shifted.factor()?;
        if !fact.nearly_singular() {
            break fact;
        }
        tau *= 4.0;
        if tau < -1.0 {
            return Err(Error::NothingFound {
                what: "nonsingular spectral shift",
                lo: -1.0,
                hi: 0.0,
            });
        }
    };

    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut rand = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut basis: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rand()).collect()).collect();
    let mut mv = vec![0.0; n];
    for _ in 0..120 {
        for v in basis.iter_mut() {
            m.matvec(v, &mut mv);
            *v = fact.solve(&mv);
        }
        gram_schmidt(&mut basis);
    }
    // Rayleigh-Ritz on C = (A - tau M)^(-1) M restricted to the subspace.
    let mut h = nalgebra::DMatrix::<f64>::zeros(k, k);
    let images: Vec<Vec<f64>> = basis
        .iter()
        .map(|v| {
            m.matvec(v, &mut mv);
            fact.solve(&mv)
        })
        .collect();
    for i in 0..k {
        for j in 0..k {
            h[(i, j)] = basis[i].iter().zip(&images[j]).map(|(x, y)| x * y).sum();
        }
    }
    let thetas = h.complex_eigenvalues();
    let mut sigmas: Vec<f64> = Vec::new();
    for t in thetas.iter() {
        if t.norm() < 1e-12 {
            continue;
        }
        let sig = t.inv() + nalgebra::Complex::new(tau, 0.0);
        if sig.im.abs() < 1e-6 * (1.0 + sig.re.abs()) {
            sigmas.push(sig.re);
        }
    }
    sigmas.sort_by(|x, y| x.abs().partial_cmp(&y.abs()).expect("finite sigma"));
    sigmas.truncate(want);
    Ok(sigmas)
}

fn gram_schmidt(basis: &mut [Vec<f64>]) {
    for i in 0..basis.len() {
        for j in 0..i {
            let proj: f64 = {
                let (head, tail) = basis.split_at(i);
                tail[0].iter().zip(&head[j]).map(|(x, y)| x * y).sum()
            };
            let prev = basis[j].clone();
            for (v, w) in basis[i].iter_mut().zip(&prev) {
                *v -= proj * w;
            }
        }
        let nrm: f64 = basis[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-300 {
            for v in basis[i].iter_mut() {
                *v /= nrm;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_buckling_betas() {
        let roots = chi_roots(6);
        let expect = [
            7.3321299, 13.6135606, 19.8967535, 26.1799388, 32.4631241, 38.7463094,
        ];
        assert_eq!(roots.len(), 6);
        for (got, want) in roots.iter().zip(expect) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-6);
        }
    }

    #[test]
    fn buckling_loads_in_the_tether_convention() {
        let loads = buckling_loads(3, 0.5526, 500.5639);
        let expect = [0.585378, 3.746805, 11.697487];
        for (got, want) in loads.iter().zip(expect) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-5);
        }
    }

    #[test]
    fn bending_families_at_f_one() {
        let x = unperturbed_bending_eigs(4, 0.001, 0.5526, 1.0);
        let y = unperturbed_bending_eigs(3, 0.001, 1.0, 1.0);
        let xe = [16.575388, 45.273095, 87.515588, 141.988830];
        let ye = [22.236876, 60.298978, 115.331704];
        for (got, want) in x.iter().zip(xe) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-5);
        }
        for (got, want) in y.iter().zip(ye) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-5);
        }
    }

    #[test]
    fn rotary_inertia_vanishing_recovers_the_classical_beam() {
        // Without rotary inertia the first clamped-clamped frequency is
        // 4.73004074^2 and the soft family scales exactly by sqrt(R).
        let y = unperturbed_bending_eigs(1, 1e-12, 1.0, 1.0)[0];
        assert_abs_diff_eq!(y, 4.73004074_f64.powi(2), epsilon = 1e-3);
        let x = unperturbed_bending_eigs(1, 1e-12, 0.5526, 1.0)[0];
        assert_abs_diff_eq!(x / y, 0.5526_f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn merged_mode_order_for_the_tether() {
        let params = RodParams::electrodynamic_tether();
        let modes = unperturbed_frequencies(&params, 8);
        let expect = [
            (0.740856, ModeFamily::BendX),
            (0.993903, ModeFamily::BendY),
            (2.023534, ModeFamily::BendX),
            (2.695133, ModeFamily::BendY),
            (2.753805, ModeFamily::Torsion),
            (3.911611, ModeFamily::BendX),
        ];
        for ((mu, fam), (we, wf)) in modes.iter().zip(expect) {
            assert_abs_diff_eq!(mu, &we, epsilon = 1e-5);
            assert_eq!(*fam, wf);
        }
        assert_eq!(modes[7].1, ModeFamily::Torsion);
        assert_abs_diff_eq!(modes[7].0, 5.507610, epsilon = 1e-5);
    }

    #[test]
    fn fd_oracle_matches_transcendental_frequencies_at_b_zero() {
        let params = RodParams::electrodynamic_tether();
        let mus = fd_frequencies(256, &params, 5).unwrap();
        let expect = [0.740856, 0.993903, 2.023534, 2.695133, 2.753805];
        println!("fd(256) vs transcendental:");
        for (got, want) in mus.iter().zip(expect) {
            let rel = (got - want) / want;
            println!("  {got:.6}  {want:.6}  rel {rel:+.2e}");
            assert!(rel.abs() < 5e-4, "relative error {rel:+.2e}");
        }
    }

    #[test]
    fn fd_oracle_sees_the_first_buckling_load() {
        // The lowest pencil eigenvalue crosses zero between B = 0.58 and
        // B = 0.59 (the first critical load is 0.5854).
        let mut params = RodParams::electrodynamic_tether();
        params.b = 0.58;
        let below = fd_eigen_oracle(128, &params, 1).unwrap()[0];
        params.b = 0.59;
        let above = fd_eigen_oracle(128, &params, 1).unwrap()[0];
        assert!(below < 0.0, "sigma at B=0.58 was {below}");
        assert!(above > 0.0, "sigma at B=0.59 was {above}");
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let params = RodParams::electrodynamic_tether();
        assert!(fd_eigen_oracle(16, &params, 3).is_err());
    }
}

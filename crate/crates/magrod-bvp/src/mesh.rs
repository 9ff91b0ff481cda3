//! Mesh and collocation basis data.
//!
//! The interval [0,1] is split into N subintervals. On each subinterval the
//! solution is a polynomial of degree m represented by its values at the
//! m+1 equally spaced base points sigma_i = i/m (local coordinate). The
//! collocation points are the m Gauss-Legendre abscissae rho_l of the
//! subinterval. Adjacent subintervals share their endpoint base point, so a
//! mesh carries N*m + 1 global base points and continuity is automatic.
//!
//! The basis tables
//!
//!   w[l][i]  = L_i(rho_l),        wp[l][i] = L_i'(rho_l)
//!
//! (L_i the Lagrange polynomials on the sigma grid) turn point values into
//! collocated values and derivatives: on subinterval j of length h_j,
//! u(z_jl) = sum_i w[l][i] u_{j,i} and u'(z_jl) = (1/h_j) sum_i wp[l][i] u_{j,i}.

use crate::{Error, Result};

/// Gauss-Legendre abscissae on [0,1], degrees 2..=7.
const GAUSS_NODES: [&[f64]; 6] = [
    &[0.21132486540518712, 0.78867513459481288],
    &[0.11270166537925831, 0.5, 0.88729833462074169],
    &[
        0.069431844202973712,
        0.33000947820757187,
        0.66999052179242813,
        0.93056815579702629,
    ],
    &[
        0.046910077030668004,
        0.23076534494715845,
        0.5,
        0.76923465505284155,
        0.953089922969332,
    ],
    &[
        0.033765242898423986,
        0.16939530676686774,
        0.38069040695840155,
        0.61930959304159845,
        0.83060469323313226,
        0.96623475710157601,
    ],
    &[
        0.025446043828620738,
        0.12923440720030278,
        0.29707742431130142,
        0.5,
        0.70292257568869858,
        0.87076559279969722,
        0.97455395617137926,
    ],
];

/// Gauss-Legendre weights on [0,1], matching `GAUSS_NODES`.
const GAUSS_WEIGHTS: [&[f64]; 6] = [
    &[0.5, 0.5],
    &[0.27777777777777778, 0.44444444444444444, 0.27777777777777778],
    &[
        0.17392742256872693,
        0.32607257743127307,
        0.32607257743127307,
        0.17392742256872693,
    ],
    &[
        0.11846344252809454,
        0.23931433524968323,
        0.28444444444444444,
        0.23931433524968323,
        0.11846344252809454,
    ],
    &[
        0.085662246189585173,
        0.1803807865240693,
        0.23395696728634552,
        0.23395696728634552,
        0.1803807865240693,
        0.085662246189585173,
    ],
    &[
        0.064742483084434847,
        0.13985269574463833,
        0.19091502525255947,
        0.20897959183673469,
        0.19091502525255947,
        0.13985269574463833,
        0.064742483084434847,
    ],
];

pub const MIN_INTERVALS: usize = 4;
pub const MIN_DEGREE: usize = 2;
pub const MAX_DEGREE: usize = 7;

/// Lagrange basis values L_i(tau), i = 0..=m, on the nodes sigma_i = i/m.
pub fn lagrange_values(m: usize, tau: f64) -> Vec<f64> {
    let sigma: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    (0..=m)
        .map(|i| {
            let mut prod = 1.0;
            for k in 0..=m {
                if k != i {
                    prod *= (tau - sigma[k]) / (sigma[i] - sigma[k]);
                }
            }
            prod
        })
        .collect()
}

/// Lagrange basis derivatives L_i'(tau) on the nodes sigma_i = i/m.
pub fn lagrange_derivs(m: usize, tau: f64) -> Vec<f64> {
    let sigma: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    (0..=m)
        .map(|i| {
            let mut sum = 0.0;
            for j in 0..=m {
                if j == i {
                    continue;
                }
                let mut prod = 1.0 / (sigma[i] - sigma[j]);
                for k in 0..=m {
                    if k != i && k != j {
                        prod *= (tau - sigma[k]) / (sigma[i] - sigma[k]);
                    }
                }
                sum += prod;
            }
            sum
        })
        .collect()
}

/// Collocation mesh with precomputed basis tables.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<f64>,
    degree: usize,
    /// w[l][i] = L_i(rho_l)
    w: Vec<Vec<f64>>,
    /// wp[l][i] = L_i'(rho_l)
    wp: Vec<Vec<f64>>,
}

impl Mesh {
    /// Uniform mesh with `intervals` subintervals and `degree` collocation
    /// points per subinterval.
    pub fn uniform(intervals: usize, degree: usize) -> Result<Self> {
        let nodes = (0..=intervals)
            .map(|j| j as f64 / intervals as f64)
            .collect();
        Self::from_nodes(nodes, degree)
    }

    /// Mesh on the given breakpoints, which must increase strictly from 0 to 1.
    pub fn from_nodes(nodes: Vec<f64>, degree: usize) -> Result<Self> {
        let intervals = nodes.len().saturating_sub(1);
        let shape_ok = intervals >= MIN_INTERVALS
            && (MIN_DEGREE..=MAX_DEGREE).contains(&degree)
            && nodes.first() == Some(&0.0)
            && nodes.last() == Some(&1.0)
            && nodes.windows(2).all(|p| p[1] > p[0]);
        if !shape_ok {
            return Err(Error::InvalidMesh {
                intervals,
                degree,
                min_intervals: MIN_INTERVALS,
            });
        }
        let rho = GAUSS_NODES[degree - 2];
        let w = rho.iter().map(|&r| lagrange_values(degree, r)).collect();
        let wp = rho.iter().map(|&r| lagrange_derivs(degree, r)).collect();
        Ok(Mesh {
            nodes,
            degree,
            w,
            wp,
        })
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of global base points, N*m + 1.
    pub fn n_base_points(&self) -> usize {
        self.intervals() * self.degree + 1
    }

    /// Total number of collocation points, N*m.
    pub fn n_collocation_points(&self) -> usize {
        self.intervals() * self.degree
    }

    pub fn interval_len(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    /// Arclength of global base point g = j*m + i.
    pub fn base_point(&self, g: usize) -> f64 {
        let m = self.degree;
        let j = (g / m).min(self.intervals() - 1);
        let i = g - j * m;
        self.nodes[j] + self.interval_len(j) * i as f64 / m as f64
    }

    /// Arclength of collocation point l of subinterval j.
    pub fn collocation_point(&self, j: usize, l: usize) -> f64 {
        self.nodes[j] + self.interval_len(j) * GAUSS_NODES[self.degree - 2][l]
    }

    /// Quadrature weight of collocation point l of subinterval j
    /// (Gauss weight scaled by the subinterval length).
    pub fn quad_weight(&self, j: usize, l: usize) -> f64 {
        self.interval_len(j) * GAUSS_WEIGHTS[self.degree - 2][l]
    }

    /// Basis values at collocation point l: w[l][i] = L_i(rho_l).
    pub fn basis_at(&self, l: usize) -> &[f64] {
        &self.w[l]
    }

    /// Basis derivatives at collocation point l: wp[l][i] = L_i'(rho_l).
    pub fn basis_deriv_at(&self, l: usize) -> &[f64] {
        &self.wp[l]
    }

    /// Index of the subinterval containing arclength s (clamped to [0,1]).
    pub fn find_interval(&self, s: f64) -> usize {
        match self
            .nodes
            .binary_search_by(|x| x.partial_cmp(&s).expect("mesh nodes are finite"))
        {
            Ok(j) => j.min(self.intervals() - 1),
            Err(j) => j.saturating_sub(1).min(self.intervals() - 1),
        }
    }

    /// Local coordinate of s within its subinterval.
    pub fn local_coord(&self, s: f64, j: usize) -> f64 {
        (s - self.nodes[j]) / self.interval_len(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn counts_match_shape() {
        let mesh = Mesh::uniform(20, 4).unwrap();
        assert_eq!(mesh.n_collocation_points(), 80);
        assert_eq!(mesh.n_base_points(), 81);
        let minimal = Mesh::uniform(4, 2).unwrap();
        assert_eq!(minimal.intervals(), 4);
    }

    #[test]
    fn rejects_small_or_extreme_inputs() {
        assert!(Mesh::uniform(3, 4).is_err());
        assert!(Mesh::uniform(10, 1).is_err());
        assert!(Mesh::uniform(10, 8).is_err());
    }

    #[test]
    fn lagrange_basis_is_cardinal() {
        for m in 2..=7 {
            for i in 0..=m {
                let vals = lagrange_values(m, i as f64 / m as f64);
                for (k, &v) in vals.iter().enumerate() {
                    let expect = if k == i { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn basis_tables_differentiate_polynomials_exactly() {
        // A degree-m polynomial is reproduced exactly by its values at the
        // m+1 base points, so the wp table must return its exact derivative
        // at every collocation point.
        for m in 2..=7 {
            let mesh = Mesh::uniform(4, m).unwrap();
            let poly = |t: f64| (0..=m).map(|k| (t + 0.3).powi(k as i32)).sum::<f64>();
            let dpoly =
                |t: f64| (1..=m).map(|k| k as f64 * (t + 0.3).powi(k as i32 - 1)).sum::<f64>();
            for l in 0..m {
                let rho = GAUSS_NODES[m - 2][l];
                let vals: f64 = (0..=m)
                    .map(|i| mesh.basis_at(l)[i] * poly(i as f64 / m as f64))
                    .sum();
                let derivs: f64 = (0..=m)
                    .map(|i| mesh.basis_deriv_at(l)[i] * poly(i as f64 / m as f64))
                    .sum();
                assert_abs_diff_eq!(vals, poly(rho), epsilon = 1e-10);
                assert_abs_diff_eq!(derivs, dpoly(rho), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn gauss_rules_integrate_to_expected_order() {
        // Degree-m Gauss rules are exact through polynomial degree 2m-1.
        for m in 2..=7 {
            let mesh = Mesh::uniform(4, m).unwrap();
            for k in 0..(2 * m) {
                let mut total = 0.0;
                for j in 0..mesh.intervals() {
                    for l in 0..m {
                        let s = mesh.collocation_point(j, l);
                        total += mesh.quad_weight(j, l) * s.powi(k as i32);
                    }
                }
                assert_abs_diff_eq!(total, 1.0 / (k as f64 + 1.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn interval_lookup_is_consistent() {
        let mesh = Mesh::uniform(7, 3).unwrap();
        for &s in &[0.0, 0.001, 0.5, 0.99999, 1.0] {
            let j = mesh.find_interval(s);
            assert!(mesh.nodes()[j] <= s + 1e-15);
            assert!(s <= mesh.nodes()[j + 1] + 1e-15);
            let t = mesh.local_coord(s, j);
            assert!((-1e-12..=1.0 + 1e-12).contains(&t));
        }
    }
}

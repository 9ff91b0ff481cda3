//! LU factorization of collocation Jacobians: banded rows with a dense
//! border, determinant sign tracking, and near-null-space extraction.
//!
//! The matrix acts on unknowns ordered as [state columns | extra columns].
//! State columns hold the solution values at the global base points; extra
//! columns hold released scalar parameters. Rows come in two kinds:
//!
//!   band rows    collocation residuals; nonzeros confined to a window of
//!                consecutive state columns (one subinterval) plus a dense
//!                tail over the extra columns,
//!   border rows  boundary conditions and scalar constraints; dense.
//!
//! Elimination sweeps the state columns left to right, choosing at each
//! column the largest entry among the still-unpivoted band rows whose
//! window covers it. Columns with no usable pivot (structurally, the state
//! columns of the final base point; numerically, directions tied to a
//! nearby bifurcation) are deferred. The leftover rows and deferred plus
//! extra columns form a small dense endgame solved with partial pivoting.
//! The determinant sign, needed by branch-point test functions, is the
//! product of pivot signs and the parities of the pivot row and column
//! orders; its log-magnitude is tracked alongside to expose the
//! characteristic dip at a double branch point, where the sign does not
//! flip.

use crate::{Error, Result};

/// Entries a band row acquires at deferred columns left of its window.
type DeferredEntries = Vec<(u32, f64)>;

/// One banded row: `vals[c - start]` is the entry at state column c, `tail`
/// holds the extra columns, `defv` any fill-in at deferred columns outside
/// the window.
#[derive(Debug, Clone)]
pub struct BandRow {
    pub start: usize,
    pub vals: Vec<f64>,
    pub tail: Vec<f64>,
    defv: DeferredEntries,
}

impl BandRow {
    fn end(&self) -> usize {
        self.start + self.vals.len()
    }

    fn get(&self, col: usize) -> f64 {
        if col >= self.start && col < self.end() {
            self.vals[col - self.start]
        } else {
            self.defv
                .iter()
                .find(|&&(c, _)| c as usize == col)
                .map_or(0.0, |&(_, v)| v)
        }
    }

    fn sub_at(&mut self, col: usize, delta: f64) {
        if col >= self.start && col < self.end() {
            self.vals[col - self.start] -= delta;
        } else if let Some(e) = self.defv.iter_mut().find(|&&mut (c, _)| c as usize == col) {
            e.1 -= delta;
        } else {
            self.defv.push((col as u32, -delta));
        }
    }
}

/// Square matrix in banded-bordered form, ready for assembly and factorization.
#[derive(Debug, Clone)]
pub struct BandedBordered {
    n_state_cols: usize,
    n_extra_cols: usize,
    band: Vec<BandRow>,
    border: Vec<Vec<f64>>,
}

impl BandedBordered {
    pub fn new(n_state_cols: usize, n_extra_cols: usize) -> Self {
        BandedBordered {
            n_state_cols,
            n_extra_cols,
            band: Vec::new(),
            border: Vec::new(),
        }
    }

    pub fn n_cols(&self) -> usize {
        self.n_state_cols + self.n_extra_cols
    }

    pub fn n_rows(&self) -> usize {
        self.band.len() + self.border.len()
    }

    pub fn n_state_cols(&self) -> usize {
        self.n_state_cols
    }

    /// Appends a zeroed band row with window [start, start+width).
    /// Rows must be appended in nondecreasing window order.
    pub fn push_band_row(&mut self, start: usize, width: usize) -> usize {
        debug_assert!(start + width <= self.n_state_cols);
        debug_assert!(self.band.last().map_or(true, |r| r.start <= start));
        self.band.push(BandRow {
            start,
            vals: vec![0.0; width],
            tail: vec![0.0; self.n_extra_cols],
            defv: Vec::new(),
        });
        self.band.len() - 1
    }

    pub fn band_row_mut(&mut self, r: usize) -> &mut BandRow {
        &mut self.band[r]
    }

    /// Appends a zeroed dense border row and returns a mutable view of it.
    pub fn push_border_row(&mut self) -> &mut Vec<f64> {
        self.border.push(vec![0.0; self.n_cols()]);
        self.border.last_mut().expect("just pushed")
    }

    /// self += s * other. Both matrices must have identical band and
    /// border structure; meant for forming shifted pencils A - tau M
    /// before factorization.
    pub fn add_scaled(&mut self, other: &BandedBordered, s: f64) {
        debug_assert_eq!(self.band.len(), other.band.len());
        debug_assert_eq!(self.border.len(), other.border.len());
        for (row, orow) in self.band.iter_mut().zip(&other.band) {
            debug_assert_eq!(row.start, orow.start);
            debug_assert_eq!(row.vals.len(), orow.vals.len());
            for (v, ov) in row.vals.iter_mut().zip(&orow.vals) {
                *v += s * ov;
            }
            for (v, ov) in row.tail.iter_mut().zip(&orow.tail) {
                *v += s * ov;
            }
        }
        for (row, orow) in self.border.iter_mut().zip(&other.border) {
            for (v, ov) in row.iter_mut().zip(orow) {
                *v += s * ov;
            }
        }
    }

    /// y = A x, for residual checks and null-space verification.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols());
        debug_assert_eq!(y.len(), self.n_rows());
        for (r, row) in self.band.iter().enumerate() {
            let mut acc = 0.0;
            for (k, &v) in row.vals.iter().enumerate() {
                acc += v * x[row.start + k];
            }
            for (t, &v) in row.tail.iter().enumerate() {
                acc += v * x[self.n_state_cols + t];
            }
            for &(c, v) in &row.defv {
                acc += v * x[c as usize];
            }
            y[r] = acc;
        }
        let nb = self.band.len();
        for (r, row) in self.border.iter().enumerate() {
            y[nb + r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Largest row 1-norm, the scale reference for singularity thresholds.
    pub fn norm_scale(&self) -> f64 {
        let band = self.band.iter().map(|r| {
            r.vals.iter().map(|v| v.abs()).sum::<f64>() + r.tail.iter().map(|v| v.abs()).sum::<f64>()
        });
        let border = self
            .border
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>());
        band.chain(border).fold(1.0, f64::max)
    }

    /// LU-factorizes a copy of the matrix. The matrix must be square.
    pub fn factor(&self) -> Result<Factored> {
        if self.n_rows() != self.n_cols() {
            return Err(Error::DimensionMismatch {
                what: "bordered matrix rows vs columns",
                expected: self.n_cols(),
                got: self.n_rows(),
            });
        }
        Ok(factor_impl(self.clone(), self.norm_scale()))
    }
}

/// Pivot record: the chosen row, its column, and the multipliers applied to
/// the other rows, kept for replaying the elimination on right-hand sides.
#[derive(Debug, Clone)]
struct PivotRec {
    row: u32,
    col: u32,
    elims: Vec<(u32, f64)>,
}

/// Dense LU with partial pivoting for the endgame block; zero pivots are
/// floored so that inverse iteration through a singular matrix stays usable.
#[derive(Debug, Clone)]
struct DenseLu {
    n: usize,
    a: Vec<f64>,
    /// pivot_rows[t] = local row chosen at step t (after earlier swaps).
    pivot_rows: Vec<usize>,
    log_abs_det: f64,
    sign: f64,
    floored: bool,
}

fn dense_lu(mut a: Vec<f64>, n: usize, floor: f64) -> DenseLu {
    let mut pivot_rows = Vec::with_capacity(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log_abs_det = 0.0;
    let mut sign = 1.0;
    let mut floored = false;
    for k in 0..n {
        let (imax, vmax) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).expect("finite pivot"))
            .unwrap_or((k, 0.0));
        if imax != k {
            for c in 0..n {
                a.swap(k * n + c, imax * n + c);
            }
            order.swap(k, imax);
        }
        pivot_rows.push(order[k]);
        let mut piv = a[k * n + k];
        if vmax < floor {
            piv = if piv >= 0.0 { floor } else { -floor };
            a[k * n + k] = piv;
            floored = true;
        }
        log_abs_det += piv.abs().ln();
        sign *= piv.signum();
        for i in (k + 1)..n {
            let mult = a[i * n + k] / piv;
            a[i * n + k] = mult;
            for c in (k + 1)..n {
                a[i * n + c] -= mult * a[k * n + c];
            }
        }
    }
    DenseLu {
        n,
        a,
        pivot_rows,
        log_abs_det,
        sign,
        floored,
    }
}

impl DenseLu {
    /// Solves in place; `b` is given in the ORIGINAL local row order.
    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        // Apply the row permutation: position t takes original row pivot_rows[t].
        let permuted: Vec<f64> = self.pivot_rows.iter().map(|&r| b[r]).collect();
        b.copy_from_slice(&permuted);
        for k in 0..n {
            for i in (k + 1)..n {
                b[i] -= self.a[i * n + k] * b[k];
            }
        }
        for k in (0..n).rev() {
            for c in (k + 1)..n {
                b[k] -= self.a[k * n + c] * b[c];
            }
            b[k] /= self.a[k * n + k];
        }
    }
}

/// Result of the factorization: everything needed to solve systems, read
/// off the determinant data, and run inverse iteration.
#[derive(Debug, Clone)]
pub struct Factored {
    n_state_cols: usize,
    n_extra_cols: usize,
    band: Vec<BandRow>,
    pivots: Vec<PivotRec>,
    endgame: DenseLu,
    /// Global row ids feeding the endgame, in its local order.
    endgame_rows: Vec<usize>,
    /// Global column ids solved by the endgame, in its local order.
    endgame_cols: Vec<usize>,
    det_sign: i8,
    log_abs_det: f64,
    nearly_singular: bool,
}

/// Absolute threshold below which a band pivot candidate is deferred to the
/// endgame. Assembly produces O(1) entries, so anything this small is
/// either structural or a genuine near-singularity, and the dense endgame
/// with partial pivoting is the safe place for both.
const DEFER_TOL: f64 = 1e-11;

fn factor_impl(m: BandedBordered, scale: f64) -> Factored {
    let BandedBordered {
        n_state_cols,
        n_extra_cols,
        mut band,
        mut border,
    } = m;
    let nb = band.len();
    let n_total = n_state_cols + n_extra_cols;

    let mut pivots: Vec<PivotRec> = Vec::with_capacity(n_state_cols);
    let mut deferred: Vec<usize> = Vec::new();
    let mut pivoted = vec![false; nb];
    let mut active: Vec<usize> = Vec::new();
    let mut next_row = 0usize;
    let mut log_abs_det = 0.0;
    let mut sign_product = 1.0f64;

    for k in 0..n_state_cols {
        while next_row < nb && band[next_row].start <= k {
            active.push(next_row);
            next_row += 1;
        }
        active.retain(|&r| !pivoted[r] && band[r].end() > k);

        let mut best: Option<(usize, f64)> = None;
        for &r in &active {
            let v = band[r].vals[k - band[r].start].abs();
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((r, v));
            }
        }
        let (prow, pabs) = match best {
            Some(b) => b,
            None => {
                deferred.push(k);
                continue;
            }
        };
        if pabs <= DEFER_TOL {
            deferred.push(k);
            continue;
        }

        let pivot_row = band[prow].clone();
        let pval = pivot_row.vals[k - pivot_row.start];
        log_abs_det += pval.abs().ln();
        sign_product *= pval.signum();
        pivoted[prow] = true;

        let mut elims: Vec<(u32, f64)> = Vec::new();
        // Eliminate column k from the other active band rows.
        for &r in &active {
            if r == prow {
                continue;
            }
            let tval = band[r].vals[k - band[r].start];
            if tval == 0.0 {
                continue;
            }
            let mult = tval / pval;
            elims.push((r as u32, mult));
            sub_scaled_band(&mut band[r], &pivot_row, mult, k, &deferred);
        }
        // And from every border row.
        for (b, row) in border.iter_mut().enumerate() {
            let tval = row[k];
            if tval == 0.0 {
                continue;
            }
            let mult = tval / pval;
            elims.push((nb as u32 + b as u32, mult));
            sub_scaled_border(row, &pivot_row, mult, k, &deferred, n_state_cols);
        }
        pivots.push(PivotRec {
            row: prow as u32,
            col: k as u32,
            elims,
        });
        active.retain(|&r| r != prow);
    }

    // Endgame: leftover band rows plus all border rows, against deferred
    // plus extra columns.
    let leftovers: Vec<usize> = (0..nb).filter(|&r| !pivoted[r]).collect();
    let endgame_rows: Vec<usize> = leftovers
        .iter()
        .copied()
        .chain((0..border.len()).map(|b| nb + b))
        .collect();
    let endgame_cols: Vec<usize> = deferred
        .iter()
        .copied()
        .chain(n_state_cols..n_total)
        .collect();
    debug_assert_eq!(endgame_rows.len(), endgame_cols.len());
    let r = endgame_rows.len();
    let mut dense = vec![0.0; r * r];
    for (i, &gr) in endgame_rows.iter().enumerate() {
        for (jj, &gc) in endgame_cols.iter().enumerate() {
            dense[i * r + jj] = if gr < nb {
                if gc < n_state_cols {
                    band[gr].get(gc)
                } else {
                    band[gr].tail[gc - n_state_cols]
                }
            } else {
                border[gr - nb][gc]
            };
        }
    }
    let floor = DEFER_TOL * scale * 1e-6;
    let endgame = dense_lu(dense, r, floor.max(1e-300));

    // Determinant: pivot magnitudes and signs, then the parities of the
    // row and column orders.
    log_abs_det += endgame.log_abs_det;
    sign_product *= endgame.sign;
    let mut row_order: Vec<usize> = pivots.iter().map(|p| p.row as usize).collect();
    row_order.extend(endgame.pivot_rows.iter().map(|&lr| endgame_rows[lr]));
    let mut col_order: Vec<usize> = pivots.iter().map(|p| p.col as usize).collect();
    col_order.extend(endgame_cols.iter().copied());
    let parity = permutation_parity(&row_order) * permutation_parity(&col_order);
    let det_sign = if sign_product * parity >= 0.0 { 1 } else { -1 };

    // A floored endgame pivot, or one far below the matrix scale, marks the
    // factorization as sitting on (or next to) a singularity.
    let nearly_singular = endgame.floored;

    Factored {
        n_state_cols,
        n_extra_cols,
        band,
        pivots,
        endgame,
        endgame_rows,
        endgame_cols,
        det_sign,
        log_abs_det,
        nearly_singular,
    }
}

fn sub_scaled_band(
    target: &mut BandRow,
    pivot: &BandRow,
    mult: f64,
    col: usize,
    deferred: &[usize],
) {
    // Window part, columns col..pivot_end. The window only ever grows to
    // the right: col lies inside the target window because the target had a
    // nonzero there.
    let pend = pivot.end();
    if pend > target.end() {
        let grow = pend - target.end();
        target.vals.extend(std::iter::repeat(0.0).take(grow));
    }
    for c in col..pend {
        target.vals[c - target.start] -= mult * pivot.vals[c - pivot.start];
    }
    for (t, &pv) in pivot.tail.iter().enumerate() {
        if pv != 0.0 {
            target.tail[t] -= mult * pv;
        }
    }
    // Deferred columns sit left of the current column, outside the range
    // just processed; the pivot row may hold entries there.
    for &dc in deferred {
        let pv = pivot.get(dc);
        if pv != 0.0 {
            target.sub_at(dc, mult * pv);
        }
    }
}

fn sub_scaled_border(
    target: &mut [f64],
    pivot: &BandRow,
    mult: f64,
    col: usize,
    deferred: &[usize],
    n_state_cols: usize,
) {
    for c in col..pivot.end() {
        target[c] -= mult * pivot.vals[c - pivot.start];
    }
    for (t, &pv) in pivot.tail.iter().enumerate() {
        if pv != 0.0 {
            target[n_state_cols + t] -= mult * pv;
        }
    }
    for &dc in deferred {
        let pv = pivot.get(dc);
        if pv != 0.0 {
            target[dc] -= mult * pv;
        }
    }
}

/// Parity of the permutation sending position i to order[i]: +1.0 or -1.0.
/// `order` may use arbitrary distinct ids; they are ranked first.
fn permutation_parity(order: &[usize]) -> f64 {
    let n = order.len();
    let mut ids: Vec<usize> = order.to_vec();
    ids.sort_unstable();
    let mut pos = vec![0usize; n];
    for (i, &id) in order.iter().enumerate() {
        let r = ids.binary_search(&id).expect("id present");
        pos[r] = i;
    }
    let mut seen = vec![false; n];
    let mut parity = 1.0;
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let mut j = i;
        let mut len = 0;
        while !seen[j] {
            seen[j] = true;
            j = pos[j];
            len += 1;
        }
        if len % 2 == 0 {
            parity = -parity;
        }
    }
    parity
}

impl Factored {
    pub fn det_sign(&self) -> i8 {
        self.det_sign
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    /// True when the factorization hit a pivot at the singularity floor.
    pub fn nearly_singular(&self) -> bool {
        self.nearly_singular
    }

    pub fn n_cols(&self) -> usize {
        self.n_state_cols + self.n_extra_cols
    }

    /// Solves A x = b. `b` is ordered [band rows.. | border rows..];
    /// the result is ordered [state columns.. | extra columns..].
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n_cols());
        let mut rhs = b.to_vec();
        for p in &self.pivots {
            let pv = rhs[p.row as usize];
            if pv != 0.0 {
                for &(r, mult) in &p.elims {
                    rhs[r as usize] -= mult * pv;
                }
            }
        }
        // Endgame solve for deferred and extra columns.
        let mut eg: Vec<f64> = self.endgame_rows.iter().map(|&r| rhs[r]).collect();
        self.endgame.solve(&mut eg);
        let mut x = vec![0.0; self.n_cols()];
        for (local, &gc) in self.endgame_cols.iter().enumerate() {
            x[gc] = eg[local];
        }
        // Back-substitution through the band pivots in reverse order. At
        // each pivot every other unknown its row touches is already known:
        // later pivot columns were processed first, deferred columns came
        // from the endgame, and earlier pivot columns hold explicit zeros.
        for p in self.pivots.iter().rev() {
            let row = &self.band[p.row as usize];
            let k = p.col as usize;
            let mut acc = rhs[p.row as usize];
            for (off, &v) in row.vals.iter().enumerate() {
                let c = row.start + off;
                if c != k && v != 0.0 {
                    acc -= v * x[c];
                }
            }
            for (t, &v) in row.tail.iter().enumerate() {
                if v != 0.0 {
                    acc -= v * x[self.n_state_cols + t];
                }
            }
            for &(c, v) in &row.defv {
                acc -= v * x[c as usize];
            }
            x[k] = acc / row.vals[k - row.start];
        }
        x
    }
}

/// Deterministic SplitMix64 stream for inverse-iteration start vectors.
fn splitmix64(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z = z ^ (z >> 31);
    // Map to (-1, 1).
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

/// Estimates the near-null space of the matrix behind `fact` by subspace
/// inverse iteration, verifying candidates against the unfactored matrix.
/// Returns (sigma, vector) pairs with residual sigma = |A v| / scale below
/// `rel_tol`, smallest first, at most `max_dim` of them.
pub fn near_null_space(
    a: &BandedBordered,
    fact: &Factored,
    max_dim: usize,
    rel_tol: f64,
    seed: u64,
) -> Vec<(f64, Vec<f64>)> {
    let n = a.n_cols();
    let k = (max_dim + 1).min(n);
    let scale = a.norm_scale();
    let mut state = seed ^ 0x5851f42d4c957f2d;
    let mut basis: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| splitmix64(&mut state)).collect())
        .collect();
    for _round in 0..4 {
        for v in basis.iter_mut() {
            *v = fact.solve(v);
        }
        orthonormalize(&mut basis);
    }
    // Rank the subspace by the singular values of A restricted to it.
    let images: Vec<Vec<f64>> = basis
        .iter()
        .map(|v| {
            let mut y = vec![0.0; n];
            a.matvec(v, &mut y);
            y
        })
        .collect();
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            gram[i * k + j] = dot(&images[i], &images[j]);
        }
    }
    let (eigvals, eigvecs) = symmetric_eig_small(&gram, k);
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    for e in 0..k {
        let sigma = eigvals[e].max(0.0).sqrt() / scale;
        if sigma < rel_tol && out.len() < max_dim {
            let mut v = vec![0.0; n];
            for i in 0..k {
                let c = eigvecs[i * k + e];
                for (vi, bi) in v.iter_mut().zip(&basis[i]) {
                    *vi += c * bi;
                }
            }
            let nrm = dot(&v, &v).sqrt();
            for vi in v.iter_mut() {
                *vi /= nrm;
            }
            out.push((sigma, v));
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthonormalize(basis: &mut Vec<Vec<f64>>) {
    let mut state = 0x1234_5678_9abc_def0u64;
    for i in 0..basis.len() {
        for j in 0..i {
            let proj = {
                let (head, tail) = basis.split_at(i);
                dot(&tail[0], &head[j])
            };
            let prev = basis[j].clone();
            for (v, p) in basis[i].iter_mut().zip(&prev) {
                *v -= proj * p;
            }
        }
        let nrm = dot(&basis[i], &basis[i]).sqrt();
        if nrm < 1e-300 {
            // Degenerate start vector; replace with a fresh random one.
            for v in basis[i].iter_mut() {
                *v = splitmix64(&mut state);
            }
        } else {
            for v in basis[i].iter_mut() {
                *v /= nrm;
            }
        }
    }
}

/// Jacobi eigensolver for small symmetric matrices (k <= 8); returns
/// eigenvalues ascending and column eigenvectors in row-major `k x k`.
fn symmetric_eig_small(g: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = g.to_vec();
    let mut v = vec![0.0; k * k];
    for i in 0..k {
        v[i * k + i] = 1.0;
    }
    for _sweep in 0..50 {
        let mut off = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                off += a[i * k + j] * a[i * k + j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                let apq = a[p * k + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * k + q] - a[p * k + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..k {
                    let aip = a[i * k + p];
                    let aiq = a[i * k + q];
                    a[i * k + p] = c * aip - s * aiq;
                    a[i * k + q] = s * aip + c * aiq;
                }
                for j in 0..k {
                    let apj = a[p * k + j];
                    let aqj = a[q * k + j];
                    a[p * k + j] = c * apj - s * aqj;
                    a[q * k + j] = s * apj + c * aqj;
                }
                for i in 0..k {
                    let vip = v[i * k + p];
                    let viq = v[i * k + q];
                    v[i * k + p] = c * vip - s * viq;
                    v[i * k + q] = s * vip + c * viq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&i, &j| {
        a[i * k + i]
            .partial_cmp(&a[j * k + j])
            .expect("finite eigenvalues")
    });
    let vals: Vec<f64> = idx.iter().map(|&i| a[i * k + i]).collect();
    let mut vecs = vec![0.0; k * k];
    for (new, &old) in idx.iter().enumerate() {
        for i in 0..k {
            vecs[i * k + new] = v[i * k + old];
        }
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Reference dense solve and determinant via nalgebra.
    fn dense_of(m: &BandedBordered) -> nalgebra::DMatrix<f64> {
        let n = m.n_cols();
        let mut d = nalgebra::DMatrix::zeros(n, n);
        let mut unit = vec![0.0; n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            unit[c] = 1.0;
            m.matvec(&unit, &mut col);
            for r in 0..n {
                d[(r, c)] = col[r];
            }
            unit[c] = 0.0;
        }
        d
    }

    fn random_matrix(seed: u64, n_int: usize, n: usize, n_extra: usize, n_border: usize) -> BandedBordered {
        let mut st = seed;
        let mut m = BandedBordered::new(n_int * n, n_extra);
        // Band rows mimicking collocation structure: n-1 rows per interval
        // (leaving room for the border to square the system).
        let per = n_int * n + n_extra - n_border;
        let rows_per_int = per / n_int;
        let rem = per - rows_per_int * n_int;
        for j in 0..n_int {
            let extra = if j < rem { 1 } else { 0 };
            let start = j * n;
            let width = (2 * n).min(n_int * n - start);
            for _ in 0..(rows_per_int + extra) {
                let r = m.push_band_row(start, width);
                let row = m.band_row_mut(r);
                for v in row.vals.iter_mut() {
                    *v = splitmix64(&mut st);
                }
                for v in row.tail.iter_mut() {
                    *v = splitmix64(&mut st);
                }
            }
        }
        for _ in 0..n_border {
            let row = m.push_border_row();
            for v in row.iter_mut() {
                *v = splitmix64(&mut st);
            }
        }
        m
    }

    #[test]
    fn solve_matches_dense_reference() {
        for seed in 0..6u64 {
            let m = random_matrix(seed, 5, 4, 2, 6);
            let n = m.n_cols();
            let f = m.factor().unwrap();
            let mut st = seed.wrapping_mul(77).wrapping_add(13);
            let b: Vec<f64> = (0..n).map(|_| splitmix64(&mut st)).collect();
            let x = f.solve(&b);
            let mut ax = vec![0.0; n];
            m.matvec(&x, &mut ax);
            for (got, want) in ax.iter().zip(&b) {
                assert_relative_eq!(got, want, max_relative = 1e-9, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn determinant_sign_and_magnitude_match_dense() {
        for seed in 10..16u64 {
            let m = random_matrix(seed, 4, 3, 1, 4);
            let f = m.factor().unwrap();
            let det = dense_of(&m).determinant();
            assert_eq!(f.det_sign() as f64, det.signum(), "seed {seed}");
            assert_relative_eq!(f.log_abs_det(), det.abs().ln(), max_relative = 1e-8);
        }
    }

    #[test]
    fn near_null_space_finds_planted_direction() {
        // Build M = A - A v vᵀ / |v|² ... simpler: append a row that is a
        // linear combination of two others, giving a 1-dim null space.
        let mut m = random_matrix(3, 4, 3, 0, 3);
        let n = m.n_cols();
        // Overwrite the last border row by the sum of the first two border
        // rows, making the matrix exactly singular.
        let r0 = m.border[0].clone();
        let r1 = m.border[1].clone();
        for (c, v) in m.border[2].iter_mut().enumerate() {
            *v = r0[c] + r1[c];
        }
        let f = m.factor().unwrap();
        let null = near_null_space(&m, &f, 2, 1e-6, 42);
        assert_eq!(null.len(), 1, "expected a 1-dimensional null space");
        let (sigma, v) = &null[0];
        assert!(*sigma < 1e-8);
        let mut av = vec![0.0; n];
        m.matvec(v, &mut av);
        let r: f64 = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(r < 1e-7, "null vector residual {r}");
    }

    #[test]
    fn permutation_parity_matches_inversion_count() {
        let cases: Vec<Vec<usize>> = vec![
            vec![0, 1, 2],
            vec![1, 0, 2],
            vec![2, 0, 1],
            vec![5, 3, 9],
            vec![9, 3, 5],
            vec![4, 7, 1, 0, 2],
            vec![10, 2, 33, 4, 17, 6],
        ];
        for order in cases {
            let mut inv = 0usize;
            for i in 0..order.len() {
                for j in (i + 1)..order.len() {
                    if order[i] > order[j] {
                        inv += 1;
                    }
                }
            }
            let expect = if inv % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(permutation_parity(&order), expect, "{order:?}");
        }
    }
}

//! Small numerical building blocks: banded Gaussian elimination, the
//! trapezoidal box scheme for linear two-point boundary value problems,
//! finite-difference weights on arbitrary grids and an adaptive
//! Dormand-Prince integrator.

use crate::error::{Result, RuinError};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored
/// row-wise with room for the fill-in produced by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.kl + self.ku);
        row * self.width + (col + self.kl - row)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col + self.kl < row || col > row + self.kl + self.ku {
            0.0
        } else {
            self.data[self.slot(row, col)]
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            col + self.kl >= row && col <= row + self.ku,
            "({row}, {col}) outside the band"
        );
        let s = self.slot(row, col);
        self.data[s] = value;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + self.kl).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Solves `A x = b` for every right-hand side in `rhs` (overwritten with
    /// the solutions) by Gaussian elimination with partial pivoting.
    pub fn solve_in_place(mut self, rhs: &mut [Vec<f64>]) -> Result<()> {
        let n = self.n;
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(RuinError::NonConverged(format!("singular band matrix at column {k}")));
            }
            if piv != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(piv, j));
                    self.data.swap(a, b);
                }
                for r in rhs.iter_mut() {
                    r.swap(k, piv);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..=last_row {
                let s = self.slot(i, k);
                let f = self.data[s] / pivot;
                if f == 0.0 {
                    continue;
                }
                self.data[s] = 0.0;
                for j in k + 1..=last_col {
                    let (src, dst) = (self.slot(k, j), self.slot(i, j));
                    self.data[dst] -= f * self.data[src];
                }
                for r in rhs.iter_mut() {
                    r[i] -= f * r[k];
                }
            }
        }
        for r in rhs.iter_mut() {
            for k in (0..n).rev() {
                let last_col = (k + reach).min(n - 1);
                let mut acc = r[k];
                for j in k + 1..=last_col {
                    acc -= self.data[self.slot(k, j)] * r[j];
                }
                r[k] = acc / self.data[self.slot(k, k)];
            }
        }
        Ok(())
    }
}

/// Linear boundary conditions `sum_j coeffs[j] y_j(end) = value` at one end.
/// `value` holds one entry per right-hand side.
#[derive(Debug, Clone)]
pub struct BoundaryRow {
    pub coeffs: Vec<f64>,
    pub values: Vec<f64>,
}

/// Linear system `y' = M(u) y + f(u)` on a grid, discretized by the
/// trapezoidal box scheme
/// `(y_{i+1} - y_i) / h = (M_i y_i + M_{i+1} y_{i+1}) / 2 + (f_i + f_{i+1}) / 2`.
///
/// `forcing[r][i]` is `f(u_i)` for right-hand side `r`; several right-hand
/// sides share one factorization. Returns `y[r][i][j]`.
pub fn solve_box_bvp(
    grid: &[f64],
    dim: usize,
    matrix_at: impl Fn(f64) -> Vec<f64>,
    forcing: &[Vec<Vec<f64>>],
    left: &[BoundaryRow],
    right: &[BoundaryRow],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let n_nodes = grid.len();
    if n_nodes < 2 {
        return Err(RuinError::InvalidArgument("box scheme needs at least two nodes".into()));
    }
    if left.len() + right.len() != dim {
        return Err(RuinError::InvalidArgument(format!(
            "{} boundary conditions for a system of dimension {dim}",
            left.len() + right.len()
        )));
    }
    if let Some(i) = (1..n_nodes).find(|&i| !(grid[i] > grid[i - 1])) {
        return Err(RuinError::NonMonotoneGrid(i));
    }
    let n_rhs = forcing.len();
    let ml = left.len();
    let n = n_nodes * dim;
    let kl = ml + dim - 1;
    let ku = (2 * dim - 1 - ml).max(dim - 1);
    let mut a = BandMatrix::zeros(n, kl, ku);
    let mut b = vec![vec![0.0; n]; n_rhs];

    let mut put_row = |a: &mut BandMatrix, row: usize, entries: &[(usize, f64)], rhs: &[f64]| {
        let scale = entries.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        for &(col, v) in entries {
            a.set(row, col, v / scale);
        }
        for (r, &v) in rhs.iter().enumerate() {
            b[r][row] = v / scale;
        }
    };

    for (k, bc) in left.iter().enumerate() {
        let entries: Vec<(usize, f64)> = bc.coeffs.iter().copied().enumerate().collect();
        put_row(&mut a, k, &entries, &bc.values);
    }
    let mut m_prev = matrix_at(grid[0]);
    for i in 0..n_nodes - 1 {
        let h = grid[i + 1] - grid[i];
        let m_next = matrix_at(grid[i + 1]);
        for j in 0..dim {
            let row = ml + i * dim + j;
            let mut entries = Vec::with_capacity(2 * dim);
            for k in 0..dim {
                let delta = if j == k { 1.0 } else { 0.0 };
                entries.push((i * dim + k, -delta - 0.5 * h * m_prev[j * dim + k]));
            }
            for k in 0..dim {
                let delta = if j == k { 1.0 } else { 0.0 };
                entries.push(((i + 1) * dim + k, delta - 0.5 * h * m_next[j * dim + k]));
            }
            let rhs: Vec<f64> = forcing
                .iter()
                .map(|f| 0.5 * h * (f[i][j] + f[i + 1][j]))
                .collect();
            put_row(&mut a, row, &entries, &rhs);
        }
        m_prev = m_next;
    }
    let base = (n_nodes - 1) * dim;
    for (k, bc) in right.iter().enumerate() {
        let entries: Vec<(usize, f64)> = bc.coeffs.iter().enumerate().map(|(j, &v)| (base + j, v)).collect();
        put_row(&mut a, ml + (n_nodes - 1) * dim + k, &entries, &bc.values);
    }

    a.solve_in_place(&mut b)?;
    if b.iter().flatten().any(|v| !v.is_finite()) {
        return Err(RuinError::NonConverged("non-finite solution of the box scheme".into()));
    }
    Ok(b
        .into_iter()
        .map(|x| x.chunks(dim).map(|c| c.to_vec()).collect())
        .collect())
}

/// Fornberg's weights for derivatives `0..=max_order` at `x0` from the nodes
/// `xs`. `w[m][k]` multiplies `f(xs[k])` in the approximation of `f^(m)(x0)`.
pub fn fd_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative of order `order` of tabulated `f` at every node, using
/// `width` consecutive nodes centred on the target where possible.
pub fn grid_derivative(grid: &[f64], f: &[f64], order: usize, width: usize) -> Vec<f64> {
    let n = grid.len();
    assert!(width <= n && width > order);
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(width / 2).min(n - width);
            let w = fd_weights(grid[i], &grid[start..start + width], order);
            w[order].iter().zip(&f[start..start + width]).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Result of an adaptive integration, sampled at requested output points.
/// The state at output `k` is `states[k] * exp(log_scale[k])`.
#[derive(Debug, Clone)]
pub struct ScaledTrajectory<const N: usize> {
    pub states: Vec<[f64; N]>,
    pub log_scale: Vec<f64>,
}

/// Integrates the linear system `y' = rhs(u, y)` from `outputs[0]` through
/// the monotone sequence `outputs` with the Dormand-Prince 5(4) pair. The
/// state is renormalized whenever its norm leaves `[1e-100, 1e100]`, so that
/// exponentially growing or decaying modes can be followed over long ranges.
pub fn integrate_linear_dp45<const N: usize>(
    rhs: impl Fn(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    outputs: &[f64],
    rtol: f64,
) -> Result<ScaledTrajectory<N>> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    const MAX_STEPS: usize = 5_000_000;

    let norm = |y: &[f64; N]| y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut y = y0;
    let mut log_scale = 0.0;
    let mut u = outputs[0];
    let mut states = vec![y];
    let mut scales = vec![0.0];
    let Some(&u_end) = outputs.last() else {
        return Err(RuinError::InvalidArgument("no output points".into()));
    };
    let dir = if u_end >= u { 1.0 } else { -1.0 };
    let mut h = dir * (outputs.get(1).map_or(1.0, |&x| (x - u).abs()) * 0.1).max(1e-8);
    let mut steps = 0usize;
    for &target in &outputs[1..] {
        if (target - u) * dir < 0.0 {
            return Err(RuinError::NonMonotoneGrid(states.len()));
        }
        while (target - u) * dir > 0.0 {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(RuinError::Stiffness(format!("step budget exhausted near u = {u}")));
            }
            let last = (target - u) * dir <= h.abs();
            let step = if last { target - u } else { h };
            let mut k = [[0.0; N]; 7];
            k[0] = rhs(u, &y);
            for s in 1..7 {
                let mut ys = y;
                for (i, v) in ys.iter_mut().enumerate() {
                    for r in 0..s {
                        *v += step * A[s - 1][r] * k[r][i];
                    }
                }
                k[s] = rhs(u + C[s] * step, &ys);
            }
            let mut y_new = y;
            let mut err = 0.0f64;
            for i in 0..N {
                for r in 0..6 {
                    y_new[i] += step * A[5][r] * k[r][i];
                }
                let e: f64 = (0..7).map(|r| E[r] * k[r][i]).sum::<f64>() * step;
                err = err.max(e.abs());
            }
            let scale = rtol * norm(&y).max(norm(&y_new)).max(f64::MIN_POSITIVE);
            let ratio = err / scale;
            if ratio <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
                u = if last { target } else { u + step };
                y = y_new;
                let nrm = norm(&y);
                if !(1e-100..=1e100).contains(&nrm) && nrm > 0.0 {
                    for v in y.iter_mut() {
                        *v /= nrm;
                    }
                    log_scale += nrm.ln();
                }
            }
            let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            if !last || ratio > 1.0 {
                h = step * factor;
            }
            if h.abs() < 1e-13 * u.abs().max(1.0) {
                return Err(RuinError::Stiffness(format!("step size collapsed near u = {u}")));
            }
        }
        states.push(y);
        scales.push(log_scale);
    }
    Ok(ScaledTrajectory {
        states,
        log_scale: scales,
    })
}

/// Geometric grid of `n` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let step = (hi / lo).ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| lo * (step * i as f64).exp()).collect();
    g[n - 1] = hi;
    g
}

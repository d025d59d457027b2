//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

/// Dense two-phase tableau simplex with Bland's rule:
/// minimize `c.x` subject to `A x <= b`, `x >= 0`.
/// Returns `None` when infeasible or unbounded.
pub fn simplex(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    let m = a.len();
    let nv = c.len();
    let cols = nv + 2 * m;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    for i in 0..m {
        let sgn = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..nv {
            t[i][j] = sgn * a[i][j];
        }
        t[i][nv + i] = sgn;
        t[i][cols] = sgn * b[i];
        if sgn > 0.0 {
            basis[i] = nv + i;
        } else {
            t[i][nv + m + i] = 1.0;
            basis[i] = nv + m + i;
        }
    }
    let mut cost1 = vec![0.0; cols];
    for j in nv + m..cols {
        cost1[j] = 1.0;
    }
    if !run(&mut t, &mut basis, &cost1, cols) {
        return None;
    }
    let infeas: f64 = (0..m).filter(|&i| basis[i] >= nv + m).map(|i| t[i][cols]).sum();
    if infeas > 1e-8 {
        return None;
    }
    // drive zero-valued artificials out of the basis where possible
    for i in 0..m {
        if basis[i] >= nv + m {
            if let Some(j) = (0..nv + m).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    let mut cost2 = vec![0.0; cols];
    cost2[..nv].copy_from_slice(c);
    if !run(&mut t, &mut basis, &cost2, nv + m) {
        return None;
    }
    let mut x = vec![0.0; nv];
    for i in 0..m {
        if basis[i] < nv {
            x[basis[i]] = t[i][cols];
        }
    }
    let obj = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Some((obj, x))
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, j: usize) {
    let p = t[r][j];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let row = t[r].clone();
    for (i, ti) in t.iter_mut().enumerate() {
        if i != r && ti[j] != 0.0 {
            let f = ti[j];
            for (v, rv) in ti.iter_mut().zip(&row) {
                *v -= f * rv;
            }
        }
    }
    basis[r] = j;
}

/// Minimizes `cost` from the current feasible basis; only columns below
/// `enter_limit` may enter. Returns false when unbounded.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], enter_limit: usize) -> bool {
    let cols = cost.len();
    loop {
        let entering = (0..enter_limit).find(|&j| {
            let r = cost[j] - t.iter().zip(basis.iter()).map(|(ti, &bi)| cost[bi] * ti[j]).sum::<f64>();
            r < -1e-10
        });
        let Some(j) = entering else { return true };
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, ti) in t.iter().enumerate() {
            if ti[j] > 1e-11 {
                let ratio = ti[cols] / ti[j];
                let better = match best {
                    None => true,
                    Some((r, _, b)) => ratio < r - 1e-13 || (ratio <= r + 1e-13 && basis[i] < b),
                };
                if better {
                    best = Some((ratio, i, basis[i]));
                }
            }
        }
        let Some((_, r, _)) = best else { return false };
        pivot(t, basis, r, j);
    }
}

/// Taut string through a tube of half-width `width` around the integrated
/// data, computed as the minimizer of `sum (F_i - F_{i-1})^2` over the tube
/// by projected Gauss-Seidel. Returns the slopes `F_i - F_{i-1}`.
pub fn taut_string_oracle(y: &[f64], width: f64) -> Vec<f64> {
    let n = y.len();
    let mut cum = vec![0.0; n + 1];
    for i in 0..n {
        cum[i + 1] = cum[i] + y[i];
    }
    // start from the straight line, clamped into the tube
    let mut f: Vec<f64> =
        (0..=n).map(|i| (cum[n] * i as f64 / n as f64).clamp(cum[i] - width, cum[i] + width)).collect();
    f[0] = 0.0;
    f[n] = cum[n];
    for _ in 0..200_000 {
        let mut change: f64 = 0.0;
        for i in 1..n {
            let v = (0.5 * (f[i - 1] + f[i + 1])).clamp(cum[i] - width, cum[i] + width);
            change = change.max((v - f[i]).abs());
            f[i] = v;
        }
        if change < 1e-15 {
            break;
        }
    }
    f.windows(2).map(|w| w[1] - w[0]).collect()
}

/// `D(k) g` with the `n`-scaled first difference, written out directly.
pub fn scaled_difference_rows(n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect();
    for _ in 0..k {
        rows = rows.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| n as f64 * (a - b)).collect()).collect();
    }
    rows
}

//! Independent reference implementations used as test oracles. None of them
//! share code with the library's solvers.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rows(rng: &mut impl Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

/// Population covariance of the rows.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n;
            }
        }
    }
    c
}

/// Eigenvalues of a symmetric matrix of order 1, 2 or 3 from the roots of
/// its characteristic polynomial, sorted descending.
pub fn char_poly_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let mut ev = match a.len() {
        1 => vec![a[0][0]],
        2 => {
            let (p, q, r) = (a[0][0], a[1][1], a[0][1]);
            let m = (p + q) / 2.0;
            let disc = (((p - q) / 2.0).powi(2) + r * r).sqrt();
            vec![m + disc, m - disc]
        }
        3 => {
            // trigonometric solution of the depressed cubic
            let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
            let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
            if p1 == 0.0 {
                vec![a[0][0], a[1][1], a[2][2]]
            } else {
                let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
                let p = (p2 / 6.0).sqrt();
                let b: Vec<Vec<f64>> = (0..3)
                    .map(|i| (0..3).map(|j| (a[i][j] - if i == j { q } else { 0.0 }) / p).collect())
                    .collect();
                let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
                    - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
                    + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
                let r = (det / 2.0).clamp(-1.0, 1.0);
                let phi = r.acos() / 3.0;
                let e1 = q + 2.0 * p * phi.cos();
                let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
                vec![e1, 3.0 * q - e1 - e3, e3]
            }
        }
        n => panic!("characteristic-polynomial oracle supports order <= 3, got {n}"),
    };
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// Least squares through the normal equations `AᵀA x = Aᵀb`, solved by
/// Gaussian elimination with partial pivoting.
pub fn normal_equations(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let p = a[0].len();
    let mut m = vec![vec![0.0; p + 1]; p];
    for (row, &bi) in a.iter().zip(b) {
        for i in 0..p {
            for j in 0..p {
                m[i][j] += row[i] * row[j];
            }
            m[i][p] += row[i] * bi;
        }
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        for r in 0..p {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=p {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    (0..p).map(|i| m[i][p] / m[i][i]).collect()
}

/// Euclidean projection onto `{0 <= a <= c, yᵀa = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project_box_hyperplane(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(&vi, &yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
    let g = |mu: f64| -> f64 { at(mu).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    // g is non-increasing in mu
    let mut lo = -1.0;
    let mut hi = 1.0;
    while g(lo) < 0.0 {
        lo *= 2.0;
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

pub fn dual_value(alpha: &[f64], y: &[f64], k: &[Vec<f64>]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Maximizes the SVM dual by accelerated projected gradient ascent.
pub fn projected_gradient_dual(k: &[Vec<f64>], y: &[f64], c: f64, iterations: usize) -> Vec<f64> {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    // Lipschitz bound: largest absolute row sum of Q
    let lip = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
    let step = 1.0 / lip;
    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t: f64 = 1.0;
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * z[j]).sum::<f64>()).collect();
        let cand: Vec<f64> = (0..n).map(|i| z[i] + step * grad[i]).collect();
        let next = project_box_hyperplane(&cand, y, c);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = (0..n).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - x[i])).collect();
        x = next;
        t = t_next;
    }
    x
}

/// Bias for a dual solution: mean of `y_i − Σ α_j y_j K_ij` over free
/// multipliers, else the midpoint of the feasible interval.
pub fn dual_bias(alpha: &[f64], y: &[f64], k: &[Vec<f64>], c: f64) -> f64 {
    let n = y.len();
    let f = |i: usize| (0..n).map(|j| alpha[j] * y[j] * k[i][j]).sum::<f64>();
    let eps = 1e-6 * c;
    let free: Vec<f64> = (0..n)
        .filter(|&i| alpha[i] > eps && alpha[i] < c - eps)
        .map(|i| y[i] - f(i))
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..n {
        let v = y[i] - f(i);
        let at_zero = alpha[i] <= eps;
        // α=0 needs y f >= 1; α=C needs y f <= 1
        if (at_zero && y[i] > 0.0) || (!at_zero && y[i] < 0.0) {
            lo = lo.max(v);
        } else {
            hi = hi.min(v);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        _ => 0.0,
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
}

/// Power-law fit by exhaustive search over the exponent on a fine grid with
/// the closed-form coefficient for each candidate.
pub fn grid_power_law(points: &[(f64, f64)], steps: usize) -> (f64, f64, f64) {
    let mut best = (0.0, 0.0, f64::INFINITY);
    for s in 0..=steps {
        let b = 0.01 + 0.99 * s as f64 / steps as f64;
        let num: f64 = points.iter().map(|&(c, t)| c.powf(b) * (t - 1.0)).sum();
        let den: f64 = points.iter().map(|&(c, _)| c.powf(2.0 * b)).sum();
        let a = (num / den).max(0.0);
        let sse: f64 = points.iter().map(|&(c, t)| (1.0 + a * c.powf(b) - t).powi(2)).sum();
        if sse < best.2 {
            best = (a, b, sse);
        }
    }
    best
}

/// Brute-force centered moving average with a shrinking window.
pub fn brute_moving_average(x: &[f64], m: usize) -> Vec<f64> {
    let h = m / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(x.len() - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Eigenvalues of a symmetric matrix by classical Jacobi: each rotation
/// zeroes the largest off-diagonal entry. Sorted descending.
pub fn classical_jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m = a.to_vec();
    for _ in 0..10_000 {
        let mut best = (0, 0, 0.0f64);
        for i in 0..n {
            for j in i + 1..n {
                if m[i][j].abs() > best.2 {
                    best = (i, j, m[i][j].abs());
                }
            }
        }
        let (p, q, off) = best;
        if off == 0.0 {
            break;
        }
        let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let t = if theta == 0.0 { 1.0 } else { t };
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        for k in 0..n {
            let (mkp, mkq) = (m[k][p], m[k][q]);
            m[k][p] = c * mkp - s * mkq;
            m[k][q] = s * mkp + c * mkq;
        }
        for k in 0..n {
            let (mpk, mqk) = (m[p][k], m[q][k]);
            m[p][k] = c * mpk - s * mqk;
            m[q][k] = s * mpk + c * mqk;
        }
        m[p][q] = 0.0;
        m[q][p] = 0.0;
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use dynenh::imgcore::Plane;

fn clamped(p: &Plane, r: isize, c: isize) -> f64 {
    let (h, w) = p.dims();
    p.get(r.clamp(0, h as isize - 1) as usize, c.clamp(0, w as isize - 1) as usize)
}

fn window_mean(p: &Plane, i: usize, j: usize, radius: usize, f: impl Fn(f64) -> f64) -> f64 {
    let r = radius as isize;
    let mut sum = 0.0;
    for di in -r..=r {
        for dj in -r..=r {
            sum += f(clamped(p, i as isize + di, j as isize + dj));
        }
    }
    sum / ((2 * radius + 1) * (2 * radius + 1)) as f64
}

/// Window mean with replicated borders, one window at a time.
pub fn naive_box(p: &Plane, radius: usize) -> Plane {
    Plane::from_fn(p.height(), p.width(), |i, j| window_mean(p, i, j, radius, |v| v))
}

/// Per-window least-squares fit `y ~ a * guide + b`, then per-pixel average
/// of the fits of every window containing it. Borders are replicated.
pub fn naive_guided(y: &Plane, guide: &Plane, radius: usize, eps: f64) -> Plane {
    let (h, w) = y.dims();
    let r = radius as isize;
    let n = ((2 * radius + 1) * (2 * radius + 1)) as f64;
    let mut a = Plane::zeros(h, w);
    let mut b = Plane::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            let (mut si, mut sp, mut sii, mut sip) = (0.0, 0.0, 0.0, 0.0);
            for di in -r..=r {
                for dj in -r..=r {
                    let gi = clamped(guide, i as isize + di, j as isize + dj);
                    let pi = clamped(y, i as isize + di, j as isize + dj);
                    si += gi;
                    sp += pi;
                    sii += gi * gi;
                    sip += gi * pi;
                }
            }
            let (mi, mp) = (si / n, sp / n);
            let ak = (sip / n - mi * mp) / (sii / n - mi * mi + eps);
            a.set(i, j, ak);
            b.set(i, j, mp - ak * mi);
        }
    }
    Plane::from_fn(h, w, |i, j| window_mean(&a, i, j, radius, |v| v) * guide.get(i, j) + window_mean(&b, i, j, radius, |v| v))
}

/// Dense `I + lambda * L` for the weighted five-point Laplacian whose edge
/// weights are `1 / (|d log(y + 1e-4)|^alpha + eps)`.
pub fn dense_wls_matrix(y: &Plane, lambda: f64, alpha: f64, eps: f64) -> Vec<Vec<f64>> {
    let (h, w) = y.dims();
    let n = h * w;
    let mut m = vec![vec![0.0; n]; n];
    for (p, row) in m.iter_mut().enumerate() {
        row[p] = 1.0;
    }
    let weight = |a: f64, b: f64| 1.0 / (((a + 1e-4).ln() - (b + 1e-4).ln()).abs().powf(alpha) + eps);
    let mut couple = |p: usize, q: usize, a: f64| {
        m[p][p] += lambda * a;
        m[q][q] += lambda * a;
        m[p][q] -= lambda * a;
        m[q][p] -= lambda * a;
    };
    for i in 0..h {
        for j in 0..w {
            if j + 1 < w {
                couple(i * w + j, i * w + j + 1, weight(y.get(i, j), y.get(i, j + 1)));
            }
            if i + 1 < h {
                couple(i * w + j, (i + 1) * w + j, weight(y.get(i, j), y.get(i + 1, j)));
            }
        }
    }
    m
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let (top, bottom) = a.split_at_mut(r);
            for (x, y) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * y;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn residual_inf(a: &[Vec<f64>], x: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(row, bi)| (row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - bi).abs()).fold(0.0, f64::max)
}

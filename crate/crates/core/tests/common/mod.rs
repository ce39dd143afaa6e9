//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use land_sim::homography::{Correspondence, Homography};
use nalgebra::{Matrix3, Point2};
use rand::Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Dense {
    let mut m = zeros(n, n);
    for i in 0..n {
        m[i][i] = 1.0;
    }
    m
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let mut out = zeros(a.len(), b[0].len());
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            for k in 0..b.len() {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect()).collect()
}

pub fn sub(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect()).collect()
}

pub fn transpose(a: &Dense) -> Dense {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a.iter().zip(eye(n)).map(|(r, e)| r.iter().cloned().chain(e).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()).unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                let pivot_row = m[col].clone();
                for (v, p) in m[r].iter_mut().zip(pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Random similarity with a mild projective row, normalized to `h33 = 1`.
pub fn random_homography<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    let s = rng.random_range(0.5..2.0);
    let a: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let (sn, cs) = a.sin_cos();
    Matrix3::new(
        s * cs + rng.random_range(-0.1..0.1),
        -s * sn + rng.random_range(-0.1..0.1),
        rng.random_range(-100.0..100.0),
        s * sn + rng.random_range(-0.1..0.1),
        s * cs + rng.random_range(-0.1..0.1),
        rng.random_range(-100.0..100.0),
        rng.random_range(-1e-3..1e-3),
        rng.random_range(-1e-3..1e-3),
        1.0,
    )
}

pub fn apply(h: &Matrix3<f64>, p: &Point2<f64>) -> Point2<f64> {
    let w = h[(2, 0)] * p.x + h[(2, 1)] * p.y + h[(2, 2)];
    Point2::new(
        (h[(0, 0)] * p.x + h[(0, 1)] * p.y + h[(0, 2)]) / w,
        (h[(1, 0)] * p.x + h[(1, 1)] * p.y + h[(1, 2)]) / w,
    )
}

pub fn exact_pairs<R: Rng>(rng: &mut R, h: &Matrix3<f64>, n: usize) -> Vec<Correspondence> {
    (0..n)
        .map(|_| {
            let p = Point2::new(rng.random_range(0.0..200.0), rng.random_range(0.0..200.0));
            Correspondence::new(p, apply(h, &p))
        })
        .collect()
}

pub fn relative_error(est: &Homography, truth: &Matrix3<f64>) -> f64 {
    let e = est.matrix() / est.matrix()[(2, 2)];
    let t = truth / truth[(2, 2)];
    (e - t).norm() / t.norm()
}

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rdsm::geometry::{detect_degeneracy, volume};

/// Exact integer determinant by fraction-free (Bareiss) elimination.
pub fn det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        let Some(pivot) = (k..n).find(|&i| !a[i][k].is_zero()) else {
            return BigInt::zero();
        };
        if pivot != k {
            a.swap(pivot, k);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = t / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// `x * 2^shift` as an exact integer; `shift` must clear every fraction bit.
pub fn scaled_integer(x: f64, shift: i32) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let (mantissa, exponent, sign) = num_traits::float::FloatCore::integer_decode(x);
    let m = BigInt::from(mantissa) * sign;
    let e = exponent as i32 + shift;
    assert!(e >= 0, "shift too small");
    m << e as usize
}

/// Volume from the bordered Cayley-Menger determinant of pairwise squared
/// distances, evaluated exactly on coordinates scaled to integers.
pub fn cayley_menger_volume(pts: &[Vec<f64>]) -> f64 {
    let shift = pts
        .iter()
        .flatten()
        .filter(|x| **x != 0.0)
        .map(|&x| -(num_traits::float::FloatCore::integer_decode(x).1 as i32))
        .max()
        .unwrap_or(0)
        .max(0);
    let q: Vec<Vec<BigInt>> = pts
        .iter()
        .map(|p| p.iter().map(|&x| scaled_integer(x, shift)).collect())
        .collect();
    let m = pts.len();
    let n = m - 1;
    let mut cm = vec![vec![BigInt::one(); m + 1]; m + 1];
    cm[0][0] = BigInt::zero();
    for i in 0..m {
        for j in 0..m {
            cm[i + 1][j + 1] = q[i]
                .iter()
                .zip(&q[j])
                .map(|(a, b)| (a - b) * (a - b))
                .fold(BigInt::zero(), |acc, t| acc + t);
        }
    }
    // Squared distances carry a factor 2^(2 shift); the determinant n of them.
    let mut denom = BigInt::one() << (n + 2 * shift as usize * n);
    for k in 1..=n {
        denom *= BigInt::from(k * k);
    }
    let mut numer = det(cm);
    if n.is_multiple_of(2) {
        numer = -numer;
    }
    BigRational::new(numer, denom)
        .to_f64()
        .expect("representable")
        .max(0.0)
        .sqrt()
}

pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..=n)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A random simplex with one vertex pushed almost into the hyperplane of
/// the others.
pub fn flattened_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    loop {
        let mut pts = random_simplex(rng, n);
        let k = rng.random_range(0..=n);
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let others: Vec<Vec<f64>> = pts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, p)| p.clone())
            .collect();
        let mut p = vec![0.0; n];
        for (w, o) in weights.iter().zip(&others) {
            for d in 0..n {
                p[d] += w / total * o[d];
            }
        }
        let lift = rng.random_range(1e-4..1e-2);
        for x in &mut p {
            *x += lift * rng.random_range(-1.0..1.0);
        }
        pts[k] = p;
        if detect_degeneracy(&pts, 0.1, 0.1).unwrap().is_degenerate() && volume(&pts).unwrap() > 0.0 {
            return pts;
        }
    }
}

/// Apex of the ellipse with foci `a`, `b` through `c`, on `c`'s side.
pub fn ellipse_apex(a: &[f64], b: &[f64], c: &[f64]) -> [f64; 2] {
    let s = distance(c, a) + distance(c, b);
    let half_focal = distance(a, b) / 2.0;
    let minor = ((s / 2.0).powi(2) - half_focal.powi(2)).sqrt();
    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = (dx * dx + dy * dy).sqrt();
    let mut normal = [-dy / len, dx / len];
    if (c[0] - mid[0]) * normal[0] + (c[1] - mid[1]) * normal[1] < 0.0 {
        normal = [-normal[0], -normal[1]];
    }
    [mid[0] + minor * normal[0], mid[1] + minor * normal[1]]
}

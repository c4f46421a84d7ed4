//! Simplex geometry: perimeter, volume, degeneracy detection and correction.
//!
//! Vertex lists are `n + 1` points of dimension `n`. Where an anchor vertex
//! matters (the edge matrix), it is the first vertex of the slice, which the
//! optimizer keeps as the best one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn check_simplex<P: AsRef<[f64]>>(vertices: &[P]) -> Result<usize> {
    if vertices.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "a simplex needs at least 2 vertices, got {}",
            vertices.len()
        )));
    }
    let n = vertices.len() - 1;
    for v in vertices {
        let len = v.as_ref().len();
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    Ok(n)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn pairwise_lengths<P: AsRef<[f64]>>(vertices: &[P]) -> impl Iterator<Item = f64> + '_ {
    (0..vertices.len())
        .flat_map(move |i| (i + 1..vertices.len()).map(move |j| distance(vertices[i].as_ref(), vertices[j].as_ref())))
}

/// Sum of all n(n+1)/2 edge lengths.
pub fn perimeter<P: AsRef<[f64]>>(vertices: &[P]) -> Result<f64> {
    check_simplex(vertices)?;
    Ok(pairwise_lengths(vertices).sum())
}

/// `|det [x_1 .. x_{n+1}; 1 .. 1]| / n!`
pub fn volume<P: AsRef<[f64]>>(vertices: &[P]) -> Result<f64> {
    let n = check_simplex(vertices)?;
    let m = DMatrix::from_fn(n + 1, n + 1, |r, c| if r < n { vertices[c].as_ref()[r] } else { 1.0 });
    Ok(m.determinant().abs() / factorial(n))
}

/// Columns are the edges from the first vertex to each of the others.
pub fn edge_matrix<P: AsRef<[f64]>>(vertices: &[P]) -> Result<DMatrix<f64>> {
    let n = check_simplex(vertices)?;
    let anchor = vertices[0].as_ref();
    Ok(DMatrix::from_fn(n, n, |r, c| vertices[c + 1].as_ref()[r] - anchor[r]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Degeneracy {
    None,
    Edge,
    Volume,
    Both,
}

impl Degeneracy {
    pub fn label(self) -> &'static str {
        match self {
            Degeneracy::None => "none",
            Degeneracy::Edge => "edge",
            Degeneracy::Volume => "volume",
            Degeneracy::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyReport {
    /// Shortest over longest edge, taken over all vertex pairs.
    pub epsilon_e: f64,
    /// `(|det e| / prod |e_i|)^(1/n)` with `e` the edge matrix.
    pub epsilon_v: f64,
    pub classification: Degeneracy,
}

impl DegeneracyReport {
    pub fn is_degenerate(&self) -> bool {
        self.classification != Degeneracy::None
    }

    pub fn is_edge_degenerate(&self) -> bool {
        matches!(self.classification, Degeneracy::Edge | Degeneracy::Both)
    }

    pub fn is_volume_degenerate(&self) -> bool {
        matches!(self.classification, Degeneracy::Volume | Degeneracy::Both)
    }
}

/// Classifies a simplex whose first vertex is the anchor (best) vertex.
pub fn detect_degeneracy<P: AsRef<[f64]>>(
    vertices: &[P],
    edge_threshold: f64,
    volume_threshold: f64,
) -> Result<DegeneracyReport> {
    let n = check_simplex(vertices)?;
    let (min_edge, max_edge) =
        pairwise_lengths(vertices).fold((f64::INFINITY, 0.0f64), |(lo, hi), l| (lo.min(l), hi.max(l)));
    // Coincident vertices give zero for both ratios.
    let epsilon_e = if max_edge > 0.0 { min_edge / max_edge } else { 0.0 };

    let e = edge_matrix(vertices)?;
    let norms: f64 = e.column_iter().map(|c| c.norm()).product();
    let epsilon_v = if norms > 0.0 && max_edge > 0.0 {
        (e.determinant().abs() / norms).powf(1.0 / n as f64)
    } else {
        0.0
    };

    let classification = match (epsilon_e < edge_threshold, epsilon_v < volume_threshold) {
        (false, false) => Degeneracy::None,
        (true, false) => Degeneracy::Edge,
        (false, true) => Degeneracy::Volume,
        (true, true) => Degeneracy::Both,
    };
    Ok(DegeneracyReport {
        epsilon_e,
        epsilon_v,
        classification,
    })
}

/// Why a single vertex could not be relocated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionFailure {
    /// The remaining vertices are affinely dependent; no unique normal.
    DependentFacet,
    /// Neither the Newton solve nor the fallback produced a feasible point.
    NoConvergence,
}

/// Which solver produced a relocated vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Newton,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub vertices: Vec<Vec<f64>>,
    /// Indices (into the input slice) of moved vertices, in the order moved.
    pub moved: Vec<usize>,
    /// The input was degenerate but no vertex could be moved.
    pub failed: bool,
    pub report_before: DegeneracyReport,
    pub report_after: DegeneracyReport,
}

/// Relocates vertices, worst cost first, to the perimeter-preserving volume
/// maximizer until the simplex is no longer degenerate or every vertex has
/// been tried. Non-degenerate input comes back unchanged.
///
/// Degeneracy is measured with the vertices ordered by `costs` (ties by
/// index), so the anchor of the edge matrix is the lowest-cost vertex.
pub fn correct_degeneracy<P: AsRef<[f64]>>(
    vertices: &[P],
    costs: &[f64],
    edge_threshold: f64,
    volume_threshold: f64,
) -> Result<Correction> {
    let n = check_simplex(vertices)?;
    if costs.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            got: costs.len(),
        });
    }
    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));

    let mut current: Vec<Vec<f64>> = vertices.iter().map(|v| v.as_ref().to_vec()).collect();
    let detect = |pts: &[Vec<f64>]| {
        let ordered: Vec<&[f64]> = order.iter().map(|&i| pts[i].as_slice()).collect();
        detect_degeneracy(&ordered, edge_threshold, volume_threshold)
    };

    let report_before = detect(&current)?;
    let mut report_after = report_before;
    let mut moved = Vec::new();
    if report_before.is_degenerate() {
        for &idx in order.iter().rev() {
            let fixed: Vec<&[f64]> = current
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != idx)
                .map(|(_, v)| v.as_slice())
                .collect();
            let Ok((y, _)) = volume_maximizing_vertex(&fixed, &current[idx]) else {
                continue;
            };
            let mut candidate = current.clone();
            candidate[idx] = y;
            if volume(&candidate)? > volume(&current)? {
                current = candidate;
                moved.push(idx);
                report_after = detect(&current)?;
                if !report_after.is_degenerate() {
                    break;
                }
            }
        }
    }
    Ok(Correction {
        failed: report_before.is_degenerate() && moved.is_empty(),
        vertices: current,
        moved,
        report_before,
        report_after,
    })
}

/// Point `y` maximizing the volume of `fixed ∪ {y}` while keeping the sum of
/// distances from `y` to the fixed vertices equal to that of `original`.
/// The maximizer on the same side of the fixed facet as `original` (the
/// closer one) is returned.
pub fn volume_maximizing_vertex<P: AsRef<[f64]>>(
    fixed: &[P],
    original: &[f64],
) -> std::result::Result<(Vec<f64>, Solver), CorrectionFailure> {
    let n = original.len();
    assert_eq!(fixed.len(), n, "need n fixed vertices in dimension n");
    let pts: Vec<DVector<f64>> = fixed.iter().map(|p| DVector::from_column_slice(p.as_ref())).collect();
    let orig = DVector::from_column_slice(original);

    let mut scale = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        scale = scale.max((a - &orig).norm());
        for b in &pts[i + 1..] {
            scale = scale.max((a - b).norm());
        }
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CorrectionFailure::DependentFacet);
    }
    let center = pts.iter().fold(DVector::zeros(n), |acc, p| acc + p) / n as f64;
    let foci: Vec<DVector<f64>> = pts.iter().map(|p| (p - &center) / scale).collect();
    let start = (&orig - &center) / scale;

    let mut normal = facet_normal(&foci).ok_or(CorrectionFailure::DependentFacet)?;
    if normal.dot(&start) < 0.0 {
        normal = -normal;
    }
    let target: f64 = foci.iter().map(|f| (&start - f).norm()).sum();

    let feasible = |z: &DVector<f64>| {
        let d: f64 = foci.iter().map(|f| (z - f).norm()).sum();
        (d - target).abs() <= 1e-10 * target.max(1.0) && normal.dot(z) >= 0.0
    };
    let lift = |z: DVector<f64>| (z * scale + &center).as_slice().to_vec();

    if let Some(z) = newton_solve(&foci, &normal, target, &start) {
        if feasible(&z) {
            return Ok((lift(z), Solver::Newton));
        }
    }
    match profile_solve(&foci, &normal, target) {
        Some(z) if feasible(&z) => Ok((lift(z), Solver::Fallback)),
        _ => Err(CorrectionFailure::NoConvergence),
    }
}

/// Unit normal to the affine hull of `n` points in R^n, or `None` when the
/// points are affinely dependent.
fn facet_normal(points: &[DVector<f64>]) -> Option<DVector<f64>> {
    let n = points[0].len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n.saturating_sub(1));
    for p in &points[1..] {
        let edge = p - &points[0];
        let len = edge.norm();
        let mut r = edge;
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for q in &basis {
                r -= q * q.dot(&r);
            }
        }
        let rn = r.norm();
        if !(rn > 1e-12 * len) || len == 0.0 {
            return None;
        }
        basis.push(r / rn);
    }
    let mut best: Option<DVector<f64>> = None;
    for k in 0..n {
        let mut r = DVector::zeros(n);
        r[k] = 1.0;
        for _ in 0..2 {
            for q in &basis {
                r -= q * q.dot(&r);
            }
        }
        if best.as_ref().is_none_or(|b| r.norm() > b.norm()) {
            best = Some(r);
        }
    }
    best.map(|b| b.normalize())
}

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;

/// Residual of the stationarity system of `normal . z - lambda (D(z) - target)`,
/// with `D` the sum of distances to the foci.
fn lagrange_residual(
    foci: &[DVector<f64>],
    normal: &DVector<f64>,
    target: f64,
    z: &DVector<f64>,
    lambda: f64,
) -> Option<DVector<f64>> {
    let n = z.len();
    let mut grad = DVector::zeros(n);
    let mut dist = 0.0;
    for f in foci {
        let d = z - f;
        let r = d.norm();
        if r == 0.0 {
            return None;
        }
        dist += r;
        grad += d / r;
    }
    let mut res = DVector::zeros(n + 1);
    res.rows_mut(0, n).copy_from(&(normal - grad * lambda));
    res[n] = dist - target;
    Some(res)
}

fn newton_solve(
    foci: &[DVector<f64>],
    normal: &DVector<f64>,
    target: f64,
    original: &DVector<f64>,
) -> Option<DVector<f64>> {
    let n = original.len();
    let mut z = original + normal * 1e-3;
    let grad0: DVector<f64> = foci.iter().map(|f| (&z - f).normalize()).sum();
    let mut lambda = normal.dot(&grad0) / grad0.norm_squared();
    if !lambda.is_finite() {
        return None;
    }
    let mut res = lagrange_residual(foci, normal, target, &z, lambda)?;

    for _ in 0..NEWTON_MAX_ITER {
        if res.amax() < NEWTON_TOL {
            break;
        }
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for f in foci {
            let d = &z - f;
            let r = d.norm();
            let u = d / r;
            hess += (DMatrix::identity(n, n) - &u * u.transpose()) / r;
            grad += u;
        }
        jac.view_mut((0, 0), (n, n)).copy_from(&(hess * -lambda));
        jac.view_mut((0, n), (n, 1)).copy_from(&(-&grad));
        jac.view_mut((n, 0), (1, n)).copy_from(&grad.transpose());
        let step = jac.lu().solve(&(-&res))?;
        if !step.iter().all(|s| s.is_finite()) {
            return None;
        }

        let norm0 = res.amax();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let z1 = &z + step.rows(0, n) * t;
            let l1 = lambda + step[n] * t;
            if let Some(r1) = lagrange_residual(foci, normal, target, &z1, l1) {
                if r1.amax() <= norm0 {
                    accepted = Some((z1, l1, r1));
                    break;
                }
            }
            t *= 0.5;
        }
        let (z1, l1, r1) = accepted?;
        z = z1;
        lambda = l1;
        res = r1;
    }
    // A positive multiplier with the point on the chosen side is the maximum
    // of a linear function over the convex sublevel set of D.
    (res.amax() < NEWTON_TOL && lambda > 0.0 && normal.dot(&z) > 0.0).then_some(z)
}

/// Maximizes the height `h` above the facet plane subject to
/// `min_p sum_j sqrt(|p - f_j|^2 + h^2) <= target` by bisection on `h`, with
/// the inner minimum over in-plane `p` found by Weiszfeld iterations.
fn profile_solve(foci: &[DVector<f64>], normal: &DVector<f64>, target: f64) -> Option<DVector<f64>> {
    let n = normal.len();
    // Project the foci onto the plane through their centroid.
    let c = foci.iter().fold(DVector::zeros(n), |a, f| a + f) / foci.len() as f64;
    let plane: Vec<DVector<f64>> = foci.iter().map(|f| f - normal * normal.dot(&(f - &c))).collect();
    let lifted_sum =
        |p: &DVector<f64>, h: f64| -> f64 { plane.iter().map(|f| ((p - f).norm_squared() + h * h).sqrt()).sum() };
    let weiszfeld = |h: f64, mut p: DVector<f64>| -> DVector<f64> {
        for _ in 0..5000 {
            let mut num = DVector::zeros(n);
            let mut den = 0.0;
            for f in &plane {
                let w = 1.0 / ((&p - f).norm_squared() + h * h).sqrt();
                num += f * w;
                den += w;
            }
            let next = num / den;
            let moved = (&next - &p).norm();
            p = next;
            if moved < 1e-15 {
                break;
            }
        }
        p
    };

    let (mut lo, mut hi) = (0.0, target);
    let mut p = c.clone();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let pm = weiszfeld(mid, p.clone());
        if lifted_sum(&pm, mid) <= target {
            lo = mid;
            p = pm;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return None;
    }
    // Restore the constraint exactly at the final in-plane point.
    let (mut a, mut b) = (0.0, target);
    if lifted_sum(&p, a) > target {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if lifted_sum(&p, m) <= target {
            a = m;
        } else {
            b = m;
        }
    }
    Some(p + normal * a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perimeter_examples() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert_relative_eq!(perimeter(&tri).unwrap(), 2.0 + 2f64.sqrt(), max_relative = 1e-15);
        let s3 = 3f64.sqrt();
        let tet = [
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.5, s3 / 2.0, 0.0],
            vec![0.5, s3 / 6.0, (2.0f64 / 3.0).sqrt()],
        ];
        assert_relative_eq!(perimeter(&tet).unwrap(), 6.0, max_relative = 1e-12);
        let thin = [[0.0, 0.0], [1000.0, 0.0], [0.0, 1.0]];
        assert_relative_eq!(
            perimeter(&thin).unwrap(),
            1001.0 + 1_000_001f64.sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn volume_examples() {
        assert_relative_eq!(volume(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap(), 0.5);
        assert!(volume(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap() < 1e-15);
    }

    #[test]
    fn wrong_vertex_count_is_rejected() {
        assert!(matches!(
            perimeter(&[[0.0, 0.0], [1.0, 0.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(volume(&[[0.0, 0.0]]).is_err());
        assert!(detect_degeneracy(&vec![vec![0.0, 0.0, 0.0]; 3], 0.1, 0.1).is_err());
    }

    #[test]
    fn edge_degenerate_not_volume_degenerate() {
        let r = detect_degeneracy(&[[0.0, 0.0], [1000.0, 0.0], [0.0, 1.0]], 0.1, 0.1).unwrap();
        assert_eq!(r.classification, Degeneracy::Edge);
        assert_relative_eq!(r.epsilon_e, 1.0 / 1_000_001f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(r.epsilon_v, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn regular_triangle_is_not_degenerate() {
        let r = detect_degeneracy(&[[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]], 0.1, 0.1).unwrap();
        assert_eq!(r.classification, Degeneracy::None);
        assert_relative_eq!(r.epsilon_e, 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.epsilon_v, (3f64.sqrt() / 2.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn flat_triangle_is_volume_degenerate_only() {
        let r = detect_degeneracy(&[[0.0, 0.0], [1.0, 0.0], [0.5, 0.001]], 0.1, 0.1).unwrap();
        assert_eq!(r.classification, Degeneracy::Volume);
        let half = (0.25f64 + 1e-6).sqrt();
        assert_relative_eq!(r.epsilon_e, half, max_relative = 1e-12);
        assert_relative_eq!(r.epsilon_v, (0.001 / half).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn coincident_vertices_are_both() {
        let r = detect_degeneracy(&[[1.0, 1.0]; 3], 0.1, 0.1).unwrap();
        assert_eq!(r.classification, Degeneracy::Both);
        assert_eq!((r.epsilon_e, r.epsilon_v), (0.0, 0.0));
    }

    #[test]
    fn ellipse_apex_worked_example() {
        let orig = [1.9, 0.05];
        let (y, solver) = volume_maximizing_vertex(&[[0.0, 0.0], [2.0, 0.0]], &orig).unwrap();
        assert_eq!(solver, Solver::Newton);
        let a = (distance(&orig, &[0.0, 0.0]) + distance(&orig, &[2.0, 0.0])) / 2.0;
        let b = (a * a - 1.0).sqrt();
        assert_relative_eq!(b, 0.11181, epsilon = 1e-5);
        assert!((y[0] - 1.0).abs() < 1e-9 && (y[1] - b).abs() < 1e-9, "{y:?}");
    }

    #[test]
    fn apex_is_a_fixed_point() {
        let b = 0.4;
        let apex = [1.0, b];
        let (y, _) = volume_maximizing_vertex(&[[0.0, 0.0], [2.0, 0.0]], &apex).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-6 && (y[1] - b).abs() < 1e-6, "{y:?}");
    }

    #[test]
    fn picks_the_side_of_the_original() {
        let (y, _) = volume_maximizing_vertex(&[[0.0, 0.0], [2.0, 0.0]], &[0.3, -0.01]).unwrap();
        assert!(y[1] < 0.0);
    }

    #[test]
    fn dependent_facet_is_skipped() {
        let fixed = [vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]];
        assert_eq!(
            volume_maximizing_vertex(&fixed, &[0.5, 0.0, 0.1]).unwrap_err(),
            CorrectionFailure::DependentFacet
        );
    }

    #[test]
    fn non_degenerate_input_unchanged() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.8]];
        let c = correct_degeneracy(&tri, &[0.0, 1.0, 2.0], 0.1, 0.1).unwrap();
        assert!(c.moved.is_empty());
        assert!(!c.failed);
        assert_eq!(c.vertices, tri.iter().map(|v| v.to_vec()).collect::<Vec<_>>());
    }

    #[test]
    fn corrects_worst_vertex_first() {
        let tri = [[0.0, 0.0], [2.0, 0.0], [1.9, 0.05]];
        let costs = [0.0, 1.0, 2.0];
        let c = correct_degeneracy(&tri, &costs, 0.1, 0.1).unwrap();
        assert_eq!(c.moved[0], 2);
        assert!(!c.report_after.is_degenerate());
        let p0 = perimeter(&tri).unwrap();
        assert_relative_eq!(perimeter(&c.vertices).unwrap(), p0, max_relative = 1e-10);
        assert!(volume(&c.vertices).unwrap() > volume(&tri).unwrap());
    }

    #[test]
    fn fallback_reaches_the_same_apex() {
        let foci = [DVector::from_vec(vec![-0.5, 0.0]), DVector::from_vec(vec![0.5, 0.0])];
        let normal = DVector::from_vec(vec![0.0, 1.0]);
        let z = profile_solve(&foci, &normal, 1.5).unwrap();
        let b = (0.75f64.powi(2) - 0.25).sqrt();
        assert!(z[0].abs() < 1e-7 && (z[1] - b).abs() < 1e-7, "{z:?}");
    }

    #[test]
    fn fallback_matches_newton_in_3d() {
        let fixed = [vec![0.0, 0.0, 0.0], vec![1.0, 0.2, 0.0], vec![0.3, 0.9, 0.0]];
        let orig = [0.4, 0.3, 0.02];
        let (y, solver) = volume_maximizing_vertex(&fixed, &orig).unwrap();
        assert_eq!(solver, Solver::Newton);

        let foci: Vec<DVector<f64>> = fixed.iter().map(|p| DVector::from_column_slice(p)).collect();
        let normal = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let target: f64 = foci
            .iter()
            .map(|f| (DVector::from_column_slice(&orig) - f).norm())
            .sum();
        let z = profile_solve(&foci, &normal, target).unwrap();
        for k in 0..3 {
            assert!((z[k] - y[k]).abs() < 1e-6, "{z:?} vs {y:?}");
        }
    }
}

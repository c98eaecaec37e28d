//! Canonical-moment coordinates for measures on a bounded interval.
//!
//! A moment sequence (c_1, ..., c_n) of a measure on [a, b] is mapped to
//! coordinates p_j in (0, 1): p_j is the relative position of c_j inside the
//! interval of j-th moments that is still reachable once c_1, ..., c_{j-1}
//! are fixed. The moment space is a shrinking curved body; the image of the
//! map is the full open cube, which is what makes it a good search space.
//!
//! The maps run through the three-term recurrence of the orthogonal
//! polynomials of the measure. With zeta_1 = p_1 and zeta_j = (1 - p_{j-1})
//! p_j, the monic recurrence on [0, 1] has diagonal terms zeta_{2k} +
//! zeta_{2k+1} and products zeta_{2k-1} zeta_{2k} as squared off-diagonals.
//! Forward, the recurrence coefficients come out of the Chebyshev algorithm
//! on the raw moments; backward, moments are read off powers of the Jacobi
//! matrix, and the discrete measure matching a full odd-length coordinate
//! vector is its eigendecomposition.

use crate::dirac::DiracMeasure;
use crate::error::{Error, Result};

/// Canonical coordinates are kept this far from the cube boundary before a
/// measure is recovered. At the boundary the measure degenerates (support
/// points merge or weights vanish) and the recovery becomes singular.
pub const CANONICAL_CLAMP: f64 = 1e-9;

/// Coordinate bundle describing one epistemic measure: moment values for the
/// interval-constrained orders in declaration order, then canonical
/// coordinates for every remaining order up to 2n - 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalVector {
    pub interval: (f64, f64),
    pub free_classical: Vec<f64>,
    pub canonical_tail: Vec<f64>,
}

impl CanonicalVector {
    pub fn dof(&self) -> usize {
        self.free_classical.len() + self.canonical_tail.len()
    }
}

/// Raw moments of the affinely rescaled variable y = (x - a) / (b - a).
/// Returns c_1..c_n given unit moments m_1..m_n.
fn normalize_moments(interval: (f64, f64), m: &[f64]) -> Vec<f64> {
    let (a, b) = interval;
    let w = b - a;
    let mut c = Vec::with_capacity(m.len());
    for k in 1..=m.len() {
        let mut s = 0.0;
        for i in 0..=k {
            let mi = if i == 0 { 1.0 } else { m[i - 1] };
            s += binom(k, i) * (-a).powi((k - i) as i32) * mi;
        }
        c.push(s / w.powi(k as i32));
    }
    c
}

/// Inverse of `normalize_moments`: unit moments from normalized ones.
fn denormalize_moments(interval: (f64, f64), c: &[f64]) -> Vec<f64> {
    let (a, b) = interval;
    let w = b - a;
    let mut m = Vec::with_capacity(c.len());
    for k in 1..=c.len() {
        let mut s = 0.0;
        for i in 0..=k {
            let ci = if i == 0 { 1.0 } else { c[i - 1] };
            s += binom(k, i) * a.powi((k - i) as i32) * w.powi(i as i32) * ci;
        }
        m.push(s);
    }
    m
}

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k.min(n - k) {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

fn check_interval(interval: (f64, f64)) -> Result<()> {
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidArgument(format!(
            "interval requires finite lower < upper, got [{a}, {b}]"
        )));
    }
    Ok(())
}

/// Recurrence coefficients (alpha_0.., beta_1..) of the measure behind
/// normalized moments c_1..c_n, via the Chebyshev algorithm. Produces up to
/// ceil(n/2) alphas and floor(n/2) betas, which is exactly what n canonical
/// coordinates need. A non-positive Gram entry means the sequence left the
/// moment space at that even order; the table cannot continue past it, so
/// the order is handed back for the caller to weigh against any earlier
/// odd-order violation.
fn chebyshev(c: &[f64]) -> (Vec<f64>, Vec<f64>, Option<u32>) {
    let n = c.len();
    let mut full = Vec::with_capacity(n + 1);
    full.push(1.0);
    full.extend_from_slice(c);

    let k_max = n / 2;
    let mut alphas = vec![full[1]];
    let mut betas: Vec<f64> = Vec::new();
    // sigma[k][l], row k defined for l in k..=n-k
    let mut prev2: Vec<f64> = Vec::new();
    let mut prev: Vec<f64> = full.clone();
    for k in 1..=k_max {
        let len = n - 2 * k + 1;
        let mut row = vec![0.0; len];
        for (idx, l) in (k..=(n - k)).enumerate() {
            let s_km1 = |ll: usize| prev[ll - (k - 1)];
            let s_km2 = |ll: usize| {
                if k >= 2 && ll >= k - 2 && ll <= n - (k - 2) {
                    prev2[ll - (k - 2)]
                } else {
                    0.0
                }
            };
            let beta_prev = if k == 1 { 1.0 } else { betas[k - 2] };
            row[idx] = s_km1(l + 1) - alphas[k - 1] * s_km1(l) - beta_prev * s_km2(l);
        }
        let gram_prev = if k == 1 { 1.0 } else { prev[0] };
        let gram = row[0];
        if !(gram.is_finite() && gram > 0.0) {
            return (alphas, betas, Some(2 * k as u32));
        }
        betas.push(gram / gram_prev);
        if k + 1 <= n - k {
            alphas.push(row[1] / gram - prev[1] / gram_prev);
        }
        prev2 = prev;
        prev = row;
    }
    (alphas, betas, None)
}

/// Chain from recurrence coefficients to canonical coordinates. Fails with
/// the first order at which the implied coordinate leaves (0, 1).
fn coefficients_to_canonical(n: usize, alphas: &[f64], betas: &[f64]) -> Result<Vec<f64>> {
    let mut p = Vec::with_capacity(n);
    let mut zeta_prev = 0.0;
    let mut q_prev = 1.0;
    for j in 1..=n {
        let zeta = if j % 2 == 1 {
            alphas[(j - 1) / 2] - zeta_prev
        } else {
            if zeta_prev <= 0.0 {
                return Err(Error::DegenerateMoments { order: j as u32 });
            }
            betas[j / 2 - 1] / zeta_prev
        };
        let pj = zeta / q_prev;
        if !(pj.is_finite() && pj > 0.0 && pj < 1.0) {
            return Err(Error::DegenerateMoments { order: j as u32 });
        }
        p.push(pj);
        q_prev = 1.0 - pj;
        zeta_prev = zeta;
    }
    Ok(p)
}

/// Canonical coordinates of a raw moment sequence on `interval`. Errors with
/// [`Error::DegenerateMoments`] when the sequence touches or leaves the
/// moment space, carrying the first failing order.
pub fn moments_to_canonical(interval: (f64, f64), moments: &[f64]) -> Result<Vec<f64>> {
    check_interval(interval)?;
    if moments.is_empty() {
        return Ok(Vec::new());
    }
    if moments.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidArgument("moments must be finite".into()));
    }
    let c = normalize_moments(interval, moments);
    let n = moments.len();
    let (alphas, betas, bad_even) = chebyshev(&c);
    // Check orders strictly in sequence: a Gram failure at an even order is
    // only the first violation if every coordinate before it is interior.
    let reachable = bad_even.map_or(n, |order| (order as usize - 1).min(n));
    let p = coefficients_to_canonical(reachable, &alphas, &betas)?;
    if let Some(order) = bad_even {
        return Err(Error::DegenerateMoments { order });
    }
    Ok(p)
}

fn zetas(p: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(p.len());
    let mut q_prev = 1.0;
    for &pj in p {
        z.push(q_prev * pj);
        q_prev = 1.0 - pj;
    }
    z
}

/// Jacobi coefficients implied by canonical coordinates; needs odd length.
fn canonical_to_coefficients(p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    debug_assert!(p.len() % 2 == 1);
    let z = zetas(p);
    let m = (p.len() + 1) / 2;
    let mut alphas = vec![z[0]];
    let mut betas = Vec::with_capacity(m - 1);
    for k in 1..m {
        betas.push(z[2 * k - 2] * z[2 * k - 1]);
        alphas.push(z[2 * k - 1] + z[2 * k]);
    }
    (alphas, betas)
}

/// Raw moments on `interval` of any measure with the given canonical
/// coordinates. Moments of order k depend on coordinates up to k only, so
/// the vector is padded with 1/2 when an even length leaves the last
/// recurrence coefficient undetermined.
pub fn canonical_to_moments(interval: (f64, f64), canonical: &[f64]) -> Result<Vec<f64>> {
    check_interval(interval)?;
    if canonical.is_empty() {
        return Ok(Vec::new());
    }
    if canonical.iter().any(|p| !(p.is_finite() && *p > 0.0 && *p < 1.0)) {
        return Err(Error::InvalidArgument(
            "canonical coordinates must lie strictly inside (0, 1)".into(),
        ));
    }
    let n = canonical.len();
    let mut p = canonical.to_vec();
    if p.len() % 2 == 0 {
        p.push(0.5);
    }
    let (alphas, betas) = canonical_to_coefficients(&p);
    // c_k = (J^k)_{00} read off repeated tridiagonal products with e_1
    let m = alphas.len();
    let offd: Vec<f64> = betas.iter().map(|b| b.max(0.0).sqrt()).collect();
    let mut u = vec![0.0; m];
    u[0] = 1.0;
    let mut c = Vec::with_capacity(n);
    let mut v = vec![0.0; m];
    for _ in 0..n {
        for i in 0..m {
            let mut s = alphas[i] * u[i];
            if i > 0 {
                s += offd[i - 1] * u[i - 1];
            }
            if i + 1 < m {
                s += offd[i] * u[i + 1];
            }
            v[i] = s;
        }
        std::mem::swap(&mut u, &mut v);
        c.push(u[0]);
    }
    Ok(denormalize_moments(interval, &c))
}

/// Discrete measure with `n_points` support points whose first 2n - 1
/// moments realize the given canonical coordinates. Coordinates are clamped
/// into [CANONICAL_CLAMP, 1 - CANONICAL_CLAMP] first, so the recovery is
/// total: near-degenerate inputs yield nearly-degenerate measures instead of
/// failures. Support points are returned in ascending order.
pub fn canonical_to_dirac(
    interval: (f64, f64),
    canonical: &[f64],
    n_points: usize,
) -> Result<DiracMeasure> {
    check_interval(interval)?;
    if n_points == 0 {
        return Err(Error::InvalidArgument("need at least one support point".into()));
    }
    if canonical.len() < 2 * n_points - 1 {
        return Err(Error::InvalidArgument(format!(
            "{} support points need at least {} canonical coordinates, got {}",
            n_points,
            2 * n_points - 1,
            canonical.len()
        )));
    }
    if canonical.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument("canonical coordinates must be finite".into()));
    }
    let p: Vec<f64> = canonical[..2 * n_points - 1]
        .iter()
        .map(|&x| x.clamp(CANONICAL_CLAMP, 1.0 - CANONICAL_CLAMP))
        .collect();
    let (a, b) = interval;
    let w = b - a;
    let (alphas, betas) = canonical_to_coefficients(&p);

    if n_points == 1 {
        return Ok(DiracMeasure::point_mass(a + w * alphas[0]));
    }

    let m = n_points;
    let mut jac = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        jac[(i, i)] = alphas[i];
        if i + 1 < m {
            let off = betas[i].max(0.0).sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let lambda = eig.eigenvalues[k].clamp(0.0, 1.0);
            let w0 = eig.eigenvectors[(0, k)];
            (a + w * lambda, w0 * w0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (points, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    DiracMeasure::new(points, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_moment_on_unit_interval_is_its_own_coordinate() {
        let p = moments_to_canonical((0.0, 1.0), &[0.5]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        let p = moments_to_canonical((0.0, 1.0), &[0.7]).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn midpoint_coordinates_give_second_moment_three_eighths() {
        // p = (1/2, 1/2) on [0,1]: mean 1/2, and the reachable second-moment
        // interval given that mean is [1/4, 1/2], so c_2 = 3/8.
        let m = canonical_to_moments((0.0, 1.0), &[0.5, 0.5]).unwrap();
        assert!((m[0] - 0.5).abs() < 1e-15);
        assert!((m[1] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn variance_zero_boundary_is_degenerate() {
        // c_2 = 0.25 with mean 0.5 is the point mass at 1/2: lower boundary.
        let err = moments_to_canonical((0.0, 1.0), &[0.5, 0.25]).unwrap_err();
        match err {
            Error::DegenerateMoments { order } => assert_eq!(order, 2),
            other => panic!("expected degeneracy, got {other}"),
        }
    }

    #[test]
    fn endpoint_pair_boundary_is_degenerate() {
        // c_2 = 0.5 with mean 0.5 is the half-half mass on {0, 1}: upper boundary.
        let err = moments_to_canonical((0.0, 1.0), &[0.5, 0.5]).unwrap_err();
        match err {
            Error::DegenerateMoments { order } => assert_eq!(order, 2),
            other => panic!("expected degeneracy, got {other}"),
        }
    }

    #[test]
    fn interior_second_moment_is_accepted() {
        // With mean 0.5 the second moment may range over (0.25, 0.5); 0.3 is
        // interior: realized e.g. by the pair {0.28, 0.72} with equal weights
        // (verified by the brute-force scan in the integration tests).
        let p = moments_to_canonical((0.0, 1.0), &[0.5, 0.3]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-14);
        assert!((p[1] - 0.2).abs() < 1e-12, "p2 = {}", p[1]);
    }

    #[test]
    fn infeasible_second_moment_is_degenerate() {
        let err = moments_to_canonical((0.0, 1.0), &[0.5, 0.6]).unwrap_err();
        match err {
            Error::DegenerateMoments { order } => assert_eq!(order, 2),
            other => panic!("expected degeneracy, got {other}"),
        }
    }

    #[test]
    fn round_trip_small() {
        let p_in = [0.3, 0.6, 0.5, 0.44, 0.7];
        let m = canonical_to_moments((-1.0, 2.0), &p_in).unwrap();
        let p_out = moments_to_canonical((-1.0, 2.0), &m).unwrap();
        for (a, b) in p_in.iter().zip(&p_out) {
            assert!((a - b).abs() < 1e-12, "{p_out:?}");
        }
    }

    #[test]
    fn moments_round_trip_the_other_way() {
        // interior moment sequence on [0,1] from a 4-point measure
        let meas = DiracMeasure::new(
            vec![0.12, 0.41, 0.63, 0.95],
            vec![0.2, 0.3, 0.4, 0.1],
        )
        .unwrap();
        let m: Vec<f64> = (1..=7).map(|b| meas.classical_moment(b).unwrap()).collect();
        let p = moments_to_canonical((0.0, 1.0), &m).unwrap();
        let m2 = canonical_to_moments((0.0, 1.0), &p).unwrap();
        for (a, b) in m.iter().zip(&m2) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{m:?} vs {m2:?}");
        }
    }

    #[test]
    fn single_coordinate_recovers_point_mass() {
        let m = canonical_to_dirac((0.0, 1.0), &[0.5], 1).unwrap();
        assert_eq!(m.points(), &[0.5]);
        assert_eq!(m.weights(), &[1.0]);
        let m = canonical_to_dirac((2.0, 6.0), &[0.25], 1).unwrap();
        assert_eq!(m.points(), &[3.0]);
    }

    #[test]
    fn recovered_measure_matches_moments() {
        let p = [0.42, 0.61, 0.37, 0.55, 0.7, 0.33, 0.48];
        let meas = canonical_to_dirac((10.0, 30.0), &p, 4).unwrap();
        let want = canonical_to_moments((10.0, 30.0), &p).unwrap();
        for (order, w) in want.iter().enumerate() {
            let got = meas.classical_moment(order as u32 + 1).unwrap();
            assert!(
                (got - w).abs() <= 1e-8 * w.abs().max(1.0),
                "order {}: {} vs {}",
                order + 1,
                got,
                w
            );
        }
    }

    #[test]
    fn boundary_coordinates_are_clamped_not_fatal() {
        let m = canonical_to_dirac((0.0, 1.0), &[0.0, 1.0, 0.5], 2).unwrap();
        assert_eq!(m.len(), 2);
        for pt in m.points() {
            assert!((0.0..=1.0).contains(pt));
        }
    }

    #[test]
    fn too_short_coordinate_vector_is_rejected() {
        assert!(canonical_to_dirac((0.0, 1.0), &[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn coordinates_outside_cube_rejected_for_moment_map() {
        assert!(canonical_to_moments((0.0, 1.0), &[1.2]).is_err());
        assert!(canonical_to_moments((0.0, 1.0), &[0.0]).is_err());
    }

    #[test]
    fn interval_affine_equivariance() {
        // canonical coordinates are invariant under affine maps of the interval
        let p = [0.37, 0.52, 0.61];
        let m_unit = canonical_to_moments((0.0, 1.0), &p).unwrap();
        let m_gen = canonical_to_moments((5.0, 9.0), &p).unwrap();
        // transform unit moments onto [5, 9] and compare
        let meas_unit = canonical_to_dirac((0.0, 1.0), &p, 2).unwrap();
        let mapped: Vec<f64> = meas_unit.points().iter().map(|y| 5.0 + 4.0 * y).collect();
        let meas_mapped = DiracMeasure::new(mapped, meas_unit.weights().to_vec()).unwrap();
        assert!((meas_mapped.classical_moment(1).unwrap() - m_gen[0]).abs() < 1e-10);
        assert!((meas_unit.classical_moment(1).unwrap() - m_unit[0]).abs() < 1e-10);
    }
}

//! Sphere machinery: the regular-simplex covering of `S^{b-1}` by
//! antipodal-free regions, and the embedding `u -> c + eps*u` of sphere
//! directions into the tail block of `K^{n-k}`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numerics::{dot, norm};
use crate::seed::rng_from_seed;

/// Vertices `v_1..v_{b+1}` of a regular simplex inscribed in `S^{b-1}`.
///
/// Region `r` (1-based) is the set of directions whose largest inner product
/// with the vertices is attained at `v_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexCover {
    b: usize,
    vertices: Vec<Vec<f64>>,
}

/// A unit vector in `R^b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SphereDirection(Vec<f64>);

impl SphereDirection {
    pub const NORM_TOLERANCE: f64 = 1e-12;

    /// Wraps an already-normalized vector.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("empty sphere direction".into()));
        }
        let n = norm(&coords);
        if !n.is_finite() || (n - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "sphere direction has norm {n}, expected 1"
            )));
        }
        Ok(Self(coords))
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        coords.iter_mut().for_each(|c| *c /= n);
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn antipode(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }
}

impl TryFrom<Vec<f64>> for SphereDirection {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SphereDirection> for Vec<f64> {
    fn from(u: SphereDirection) -> Self {
        u.0
    }
}

/// Regular simplex centered at the origin with unit-norm vertices.
///
/// Built recursively: `v_1 = e_b`, and the remaining vertices are the
/// `(b-1)`-dimensional simplex scaled by `sqrt(1 - 1/b^2)`, reflected, and
/// placed at height `-1/b`. For `b = 2` this gives the vertices at 90, 210 and
/// 330 degrees.
pub fn regular_simplex(b: usize) -> Result<SimplexCover> {
    if b == 0 {
        return Err(Error::InvalidParameter(
            "simplex dimension b must be at least 1".into(),
        ));
    }
    let mut vertices: Vec<Vec<f64>> = vec![vec![1.0], vec![-1.0]];
    for dim in 2..=b {
        let h = 1.0 / dim as f64;
        let radial = (1.0 - h * h).sqrt();
        let mut next = Vec::with_capacity(dim + 1);
        let mut top = vec![0.0; dim];
        top[dim - 1] = 1.0;
        next.push(top);
        for w in &vertices {
            let mut v: Vec<f64> = w.iter().map(|x| -radial * x).collect();
            v.push(-h);
            next.push(v);
        }
        vertices = next;
    }
    for v in &mut vertices {
        let n = norm(v);
        v.iter_mut().for_each(|x| *x /= n);
    }
    Ok(SimplexCover { b, vertices })
}

impl SimplexCover {
    /// Uses caller-provided vertices after checking the regular-simplex invariants.
    pub fn from_vertices(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let b = vertices.len().saturating_sub(1);
        if b == 0 {
            return Err(Error::InvalidParameter("need at least two vertices".into()));
        }
        for v in &vertices {
            check_len("simplex vertex", b, v.len())?;
        }
        let cover = Self { b, vertices };
        let report = cover.invariant_errors();
        if report.max_norm_error > 1e-12
            || report.max_gram_error > 1e-10
            || report.centroid_norm > 1e-10
        {
            return Err(Error::InvalidParameter(format!(
                "vertices do not form a centered regular simplex: {report:?}"
            )));
        }
        Ok(cover)
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn num_regions(&self) -> usize {
        self.vertices.len()
    }

    fn inner_products(&self, u: &SphereDirection) -> Result<Vec<f64>> {
        check_len("sphere direction", self.b, u.dim())?;
        Ok(self.vertices.iter().map(|v| dot(u.coords(), v)).collect())
    }

    /// 1-based region index; ties go to the lowest index.
    pub fn assign_region(&self, u: &SphereDirection) -> Result<usize> {
        let ips = self.inner_products(u)?;
        let mut best = 0;
        for (q, &ip) in ips.iter().enumerate() {
            if ip > ips[best] {
                best = q;
            }
        }
        Ok(best + 1)
    }

    /// Set membership `u in B_r` (exact maximum, no tie-break).
    pub fn in_region(&self, u: &SphereDirection, r: usize) -> Result<bool> {
        if r == 0 || r > self.num_regions() {
            return Err(Error::InvalidParameter(format!("region {r} out of range")));
        }
        let ips = self.inner_products(u)?;
        let max = ips.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(ips[r - 1] == max)
    }

    /// True iff some region contains both `u` and `-u`.
    pub fn antipodal_free_violation(&self, u: &SphereDirection) -> bool {
        let Ok(ips) = self.inner_products(u) else {
            return false;
        };
        // inner products with -u are the exact negations of these
        let max = ips.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ips.iter().copied().fold(f64::INFINITY, f64::min);
        ips.iter().any(|&ip| ip == max && ip == min)
    }

    /// Largest deviations from the regular-simplex invariants.
    pub fn invariant_errors(&self) -> SimplexInvariants {
        let target = -1.0 / self.b as f64;
        let mut max_norm_error = 0.0f64;
        let mut max_gram_error = 0.0f64;
        for (i, vi) in self.vertices.iter().enumerate() {
            max_norm_error = max_norm_error.max((norm(vi) - 1.0).abs());
            for vj in &self.vertices[i + 1..] {
                max_gram_error = max_gram_error.max((dot(vi, vj) - target).abs());
            }
        }
        let mut sum = vec![0.0; self.b];
        for v in &self.vertices {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
        SimplexInvariants {
            vertex_count: self.vertices.len(),
            max_norm_error,
            max_gram_error,
            centroid_norm: norm(&sum),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexInvariants {
    pub vertex_count: usize,
    pub max_norm_error: f64,
    pub max_gram_error: f64,
    pub centroid_norm: f64,
}

/// Tail-block embedding `delta(u) = c + eps*u` with `c = (1/2, ..., 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaMap {
    d: usize,
    n: usize,
    k: usize,
    epsilon: f64,
}

impl DeltaMap {
    pub const DEFAULT_EPSILON: f64 = 0.25;

    pub fn new(d: usize, n: usize, k: usize, epsilon: f64) -> Result<Self> {
        if d == 0 || k == 0 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "need d >= 1 and 1 <= k < n, got d={d}, n={n}, k={k}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1/2), got {epsilon}"
            )));
        }
        Ok(Self { d, n, k, epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Sphere dimension `d(n-k)`.
    pub fn tail_dim(&self) -> usize {
        self.d * (self.n - self.k)
    }

    /// `c + sign*eps*u`, a point of `K^{n-k}` flattened point by point.
    pub fn embed(&self, u: &SphereDirection, sign: f64) -> Result<Vec<f64>> {
        check_len("delta direction", self.tail_dim(), u.dim())?;
        Ok(self.embed_raw(u.coords(), sign))
    }

    pub(crate) fn embed_raw(&self, u: &[f64], sign: f64) -> Vec<f64> {
        u.iter().map(|c| 0.5 + sign * self.epsilon * c).collect()
    }
}

/// Normalized standard Gaussian vectors.
pub fn sample_sphere(b: usize, count: usize, seed: u64) -> Result<Vec<SphereDirection>> {
    if b == 0 || count == 0 {
        return Err(Error::InvalidParameter(
            "sample_sphere needs b >= 1 and count >= 1".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if let Some(u) = gaussian_direction(b, &mut rng) {
            out.push(u);
        }
    }
    Ok(out)
}

pub(crate) fn gaussian_direction<R: rand::Rng + ?Sized>(
    b: usize,
    rng: &mut R,
) -> Option<SphereDirection> {
    let v: Vec<f64> = (0..b).map(|_| StandardNormal.sample(rng)).collect();
    SphereDirection::normalize(v).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(a: f64) -> Vec<f64> {
        let r = a.to_radians();
        vec![r.cos(), r.sin()]
    }

    #[test]
    fn b1_is_plus_minus_one() {
        let c = regular_simplex(1).unwrap();
        assert_eq!(c.vertices(), &[vec![1.0], vec![-1.0]]);
    }

    #[test]
    fn b2_matches_figure_angles() {
        let c = regular_simplex(2).unwrap();
        for (v, a) in c.vertices().iter().zip([90.0, 210.0, 330.0]) {
            let e = deg(a);
            assert!((v[0] - e[0]).abs() < 1e-15 && (v[1] - e[1]).abs() < 1e-15);
        }
        let inv = c.invariant_errors();
        assert!(inv.max_gram_error < 1e-15);
    }

    #[test]
    fn b0_rejected() {
        assert!(regular_simplex(0).is_err());
    }

    #[test]
    fn assign_region_examples() {
        let h = 0.75f64.sqrt();
        let c = SimplexCover::from_vertices(vec![vec![0.0, 1.0], vec![-h, -0.5], vec![h, -0.5]])
            .unwrap();
        let up = SphereDirection::new(vec![0.0, 1.0]).unwrap();
        let down = SphereDirection::new(vec![0.0, -1.0]).unwrap();
        assert_eq!(c.assign_region(&up).unwrap(), 1);
        assert_eq!(c.assign_region(&down).unwrap(), 2);
        assert!(c.in_region(&down, 2).unwrap() && c.in_region(&down, 3).unwrap());
        assert!(!c.antipodal_free_violation(&up));
        assert!(!c.antipodal_free_violation(&down));

        let line = regular_simplex(1).unwrap();
        let plus = SphereDirection::new(vec![1.0]).unwrap();
        assert_eq!(line.assign_region(&plus).unwrap(), 1);
        assert_eq!(line.assign_region(&plus.antipode()).unwrap(), 2);
        assert!(!line.antipodal_free_violation(&plus));
    }

    #[test]
    fn assign_region_dimension_mismatch() {
        let c = regular_simplex(3).unwrap();
        let u = SphereDirection::new(vec![1.0, 0.0]).unwrap();
        assert!(c.assign_region(&u).is_err());
    }

    #[test]
    fn from_vertices_rejects_irregular() {
        assert!(SimplexCover::from_vertices(vec![deg(0.0), deg(100.0), deg(230.0)]).is_err());
    }

    #[test]
    fn delta_examples() {
        let map = DeltaMap::new(1, 3, 1, 0.25).unwrap();
        let u = SphereDirection::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(map.embed(&u, 1.0).unwrap(), vec![0.75, 0.5]);
        assert_eq!(map.embed(&u, -1.0).unwrap(), vec![0.25, 0.5]);
        assert_eq!(
            map.embed(&u.antipode(), 1.0).unwrap(),
            map.embed(&u, -1.0).unwrap()
        );
        assert!(map
            .embed(&SphereDirection::new(vec![1.0]).unwrap(), 1.0)
            .is_err());
        assert!(DeltaMap::new(1, 3, 1, 0.5).is_err());
        assert!(DeltaMap::new(1, 3, 3, 0.25).is_err());
    }

    #[test]
    fn sample_sphere_unit_and_deterministic() {
        let a = sample_sphere(4, 200, 9).unwrap();
        let b = sample_sphere(4, 200, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|u| (norm(u.coords()) - 1.0).abs() <= 1e-12));
        assert!(sample_sphere(0, 1, 0).is_err());
    }

    #[test]
    fn sphere_direction_validation() {
        assert!(SphereDirection::new(vec![0.6, 0.8]).is_ok());
        assert!(SphereDirection::new(vec![0.6, 0.7]).is_err());
        assert!(serde_json::from_str::<SphereDirection>("[1.0, 1.0]").is_err());
    }
}

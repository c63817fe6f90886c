//! Numerical checks of finite-difference rigidity: for an indexed
//! k-Janossy latent map, the alternating sum over the `2^k` vertices of a
//! base-block box does not depend on the tail points. As a consequence,
//! agreement of two tails on the axis set propagates to the whole grid.

use serde::{Deserialize, Serialize};

use crate::architectures::LatentMap;
use crate::constructions::{AxisSet, BaseGrid};
use crate::error::{check_len, Error, Result};
use crate::numerics::norm;

/// Base points `a_1..a_k` and increments `y_1..y_k` in `R^d`; every vertex
/// `a_i + eta_i y_i` must stay in `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeIncrement {
    bases: Vec<Vec<f64>>,
    increments: Vec<Vec<f64>>,
}

impl CubeIncrement {
    pub fn new(bases: Vec<Vec<f64>>, increments: Vec<Vec<f64>>) -> Result<Self> {
        check_len("increment count", bases.len(), increments.len())?;
        let d = bases.first().map_or(0, Vec::len);
        if bases.is_empty() || d == 0 {
            return Err(Error::InvalidParameter(
                "a cube increment needs k, d >= 1".into(),
            ));
        }
        for (a, y) in bases.iter().zip(&increments) {
            check_len("base point", d, a.len())?;
            check_len("increment", d, y.len())?;
            for (ai, yi) in a.iter().zip(y) {
                if !(0.0..=1.0).contains(ai) || !(0.0..=1.0).contains(&(ai + yi)) {
                    return Err(Error::InvalidParameter(format!(
                        "cube vertex escapes [0,1]: base {ai}, increment {yi}"
                    )));
                }
            }
        }
        Ok(Self { bases, increments })
    }

    pub fn k(&self) -> usize {
        self.bases.len()
    }

    pub fn d(&self) -> usize {
        self.bases[0].len()
    }

    /// Base block at the vertex selected by the low `k` bits of `eta`.
    pub fn vertex(&self, eta: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.k() * self.d());
        for (i, (a, y)) in self.bases.iter().zip(&self.increments).enumerate() {
            let on = (eta >> i) & 1 == 1;
            out.extend(
                a.iter()
                    .zip(y)
                    .map(|(ai, yi)| if on { ai + yi } else { *ai }),
            );
        }
        out
    }
}

fn joined(base: &[f64], tail: &[f64]) -> Vec<f64> {
    let mut x = base.to_vec();
    x.extend_from_slice(tail);
    x
}

fn check_tail<L: LatentMap + ?Sized>(map: &L, k: usize, tail: &[f64]) -> Result<()> {
    check_len(
        "tail block",
        map.point_dim() * (map.num_points() - k),
        tail.len(),
    )
}

/// `sum over eta in {0,1}^k of (-1)^{|eta|} Phi(a + eta*y, tail)`.
pub fn alternating_difference<L: LatentMap + ?Sized>(
    map: &L,
    inc: &CubeIncrement,
    tail: &[f64],
) -> Result<Vec<f64>> {
    check_len("increment point dimension", map.point_dim(), inc.d())?;
    if inc.k() >= map.num_points() {
        return Err(Error::InvalidParameter(
            "the base block must leave a non-empty tail".into(),
        ));
    }
    check_tail(map, inc.k(), tail)?;
    let mut acc = vec![0.0; map.latent_dim()];
    for eta in 0..1usize << inc.k() {
        let sign = if eta.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        let v = map.latent(&joined(&inc.vertex(eta), tail))?;
        for (a, x) in acc.iter_mut().zip(v) {
            *a += sign * x;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub latent_dim: usize,
    /// Largest Euclidean distance between alternating sums at two tails.
    pub max_deviation: f64,
    pub tested_tails: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn check_rigidity<L: LatentMap + ?Sized>(
    map: &L,
    inc: &CubeIncrement,
    tails: &[Vec<f64>],
    tolerance: f64,
) -> Result<RigidityReport> {
    if tails.len() < 2 {
        return Err(Error::InvalidParameter(
            "rigidity needs at least two tails".into(),
        ));
    }
    let values = tails
        .iter()
        .map(|t| alternating_difference(map, inc, t))
        .collect::<Result<Vec<_>>>()?;
    let mut max_deviation = 0.0f64;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            max_deviation = max_deviation.max(norm(&diff));
        }
    }
    Ok(RigidityReport {
        d: map.point_dim(),
        n: map.num_points(),
        k: inc.k(),
        latent_dim: map.latent_dim(),
        max_deviation,
        tested_tails: tails.len(),
        tolerance,
        passed: max_deviation <= tolerance,
    })
}

/// Outcome of propagating tail agreement from the axis set to the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxesToGridReport {
    /// Max over `A` of `|Phi(x_b, u) - Phi(x_b, v)|`.
    pub axis_deviation: f64,
    /// Max over `G^k` of the same quantity.
    pub grid_deviation: f64,
    /// `2^k`.
    pub amplification: f64,
    /// Rounding allowance `2^k * 64 * eps * (1 + max |Phi|)` for evaluating `Phi` itself.
    pub rounding_slack: f64,
    pub tolerance: f64,
    pub precondition_met: bool,
    pub passed: bool,
}

impl AxesToGridReport {
    pub fn bound(&self) -> f64 {
        self.amplification * self.axis_deviation + self.rounding_slack
    }
}

pub fn check_axes_to_grid<L: LatentMap + ?Sized>(
    map: &L,
    grid: &BaseGrid,
    axis: &AxisSet,
    tail_u: &[f64],
    tail_v: &[f64],
    tolerance: f64,
) -> Result<AxesToGridReport> {
    let k = grid.k();
    check_len("grid point dimension", map.point_dim(), grid.d())?;
    check_tail(map, k, tail_u)?;
    check_tail(map, k, tail_v)?;
    let mut scale = 0.0f64;
    let mut deviation = |tuple: &[usize]| -> Result<f64> {
        let base = grid.base_block(tuple);
        let a = map.latent(&joined(&base, tail_u))?;
        let b = map.latent(&joined(&base, tail_v))?;
        scale = a.iter().chain(&b).fold(scale, |m, x| m.max(x.abs()));
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        Ok(norm(&diff))
    };
    let mut axis_deviation = 0.0f64;
    for t in axis.tuples() {
        axis_deviation = axis_deviation.max(deviation(t)?);
    }
    let mut grid_deviation = 0.0f64;
    for t in grid.all_tuples() {
        grid_deviation = grid_deviation.max(deviation(&t)?);
    }
    let amplification = (1u64 << k) as f64;
    let rounding_slack = amplification * 64.0 * f64::EPSILON * (1.0 + scale);
    let precondition_met = axis_deviation <= tolerance;
    let mut report = AxesToGridReport {
        axis_deviation,
        grid_deviation,
        amplification,
        rounding_slack,
        tolerance,
        precondition_met,
        passed: false,
    };
    report.passed = precondition_met && grid_deviation <= report.bound();
    Ok(report)
}

/// `Phi(x) = prod of all coordinates`, a permutation-invariant map that is not
/// a sum over k-tuples. Used as the negative control for [`check_rigidity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductMap {
    pub d: usize,
    pub n: usize,
}

impl LatentMap for ProductMap {
    fn point_dim(&self) -> usize {
        self.d
    }

    fn num_points(&self) -> usize {
        self.n
    }

    fn latent_dim(&self) -> usize {
        1
    }

    fn latent(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("configuration", self.d * self.n, x.len())?;
        Ok(vec![x.iter().product()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architectures::Encoder;
    use crate::constructions::{build_axis_set, build_grid};
    use crate::numerics::{Activation, Layer, Mlp};

    fn scalar_net(w: f64) -> Mlp {
        Mlp::from_layers(
            vec![Layer::from_rows(&[&[w]], &[0.0]).unwrap()],
            Activation::Tanh,
        )
        .unwrap()
    }

    #[test]
    fn product_map_depends_on_tail() {
        let map = ProductMap { d: 1, n: 3 };
        let inc = CubeIncrement::new(vec![vec![0.2]], vec![vec![0.5]]).unwrap();
        // y1 * x2 * x3
        let a = alternating_difference(&map, &inc, &[0.5, 0.5]).unwrap()[0];
        let b = alternating_difference(&map, &inc, &[1.0, 0.4]).unwrap()[0];
        assert!((a + 0.125).abs() < 1e-15);
        assert!((b + 0.2).abs() < 1e-15);
    }

    #[test]
    fn linear_k1_example() {
        // phi_i(x) = i * x
        let enc = Encoder::indexed(
            1,
            3,
            1,
            vec![scalar_net(1.0), scalar_net(2.0), scalar_net(3.0)],
        )
        .unwrap();
        let inc = CubeIncrement::new(vec![vec![0.2]], vec![vec![0.3]]).unwrap();
        for tail in [[0.1, 0.9], [0.5, 0.5], [1.0, 0.0]] {
            let v = alternating_difference(&enc, &inc, &tail).unwrap();
            assert!((v[0] + 0.3).abs() < 1e-15, "{v:?}");
        }
    }

    #[test]
    fn zero_increment_vanishes() {
        let phi = Mlp::random(&[2, 5, 2], Activation::Tanh, 1).unwrap();
        let enc = Encoder::shared_janossy(1, 4, 2, phi).unwrap().as_indexed();
        let inc =
            CubeIncrement::new(vec![vec![0.3], vec![0.6]], vec![vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(
            alternating_difference(&enc, &inc, &[0.2, 0.7]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn increment_must_stay_in_cube() {
        assert!(CubeIncrement::new(vec![vec![0.8]], vec![vec![0.3]]).is_err());
        assert!(CubeIncrement::new(vec![vec![0.1]], vec![vec![-0.2]]).is_err());
        assert!(CubeIncrement::new(vec![vec![0.1, 0.2]], vec![vec![0.1]]).is_err());
    }

    #[test]
    fn single_tail_rejected() {
        let enc = Encoder::deep_sets(1, 3, scalar_net(1.0)).unwrap();
        let inc = CubeIncrement::new(vec![vec![0.0]], vec![vec![0.5]]).unwrap();
        assert!(check_rigidity(&enc, &inc, &[vec![0.1, 0.2]], 1e-9).is_err());
    }

    #[test]
    fn equal_tails_give_zero_grid_deviation() {
        let phi = Mlp::random(&[2, 4, 2], Activation::Tanh, 3).unwrap();
        let enc = Encoder::shared_janossy(1, 4, 2, phi).unwrap();
        let grid = build_grid(1, 4, 2).unwrap();
        let axis = build_axis_set(&grid);
        let r = check_axes_to_grid(&enc, &grid, &axis, &[0.3, 0.4], &[0.3, 0.4], 0.0).unwrap();
        assert_eq!((r.axis_deviation, r.grid_deviation), (0.0, 0.0));
        assert!(r.passed);
    }

    #[test]
    fn precondition_violation_is_reported() {
        let phi = Mlp::random(&[1, 4, 1], Activation::Tanh, 3).unwrap();
        let enc = Encoder::deep_sets(1, 3, phi).unwrap();
        let grid = build_grid(1, 3, 1).unwrap();
        let axis = build_axis_set(&grid);
        let r = check_axes_to_grid(&enc, &grid, &axis, &[0.1, 0.4], &[0.9, 0.2], 1e-12).unwrap();
        assert!(!r.precondition_met && !r.passed);
    }
}

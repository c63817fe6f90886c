//! Combinatorial scaffolding of the lower-bound argument: the base grid `G`,
//! its axis subset `A`, the label injection `chi`, the sampled obstruction
//! sets `E+`/`E-` with their separating target `g`, and the disjoint labeled
//! cubes that turn a shared encoder into an indexed one.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds;
use crate::error::{check_len, Error, Result};
use crate::geometry::{
    gaussian_direction, regular_simplex, DeltaMap, SimplexCover, SphereDirection,
};
use crate::numerics::dist_sq;
use crate::seed::rng_from_seed;

/// `s` points on the main diagonal of `[0,1]^d`, the zero vector first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseGrid {
    d: usize,
    n: usize,
    k: usize,
    points: Vec<Vec<f64>>,
}

pub fn build_grid(d: usize, n: usize, k: usize) -> Result<BaseGrid> {
    let s = bounds::grid_size(d as u64, n as u64, k as u64)? as usize;
    let points = (0..s)
        .map(|j| {
            let t = if s == 1 {
                0.0
            } else {
                j as f64 / (s - 1) as f64
            };
            vec![t; d]
        })
        .collect();
    Ok(BaseGrid { d, n, k, points })
}

impl BaseGrid {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// All `s^k` index tuples in lexicographic order.
    pub fn all_tuples(&self) -> Vec<Vec<usize>> {
        lex_tuples(self.size(), self.k)
    }

    /// Concatenated base block `(y_1, ..., y_k)` for an index tuple.
    pub fn base_block(&self, tuple: &[usize]) -> Vec<f64> {
        tuple
            .iter()
            .flat_map(|&i| self.points[i].iter().copied())
            .collect()
    }
}

pub(crate) fn lex_tuples(base: usize, len: usize) -> Vec<Vec<usize>> {
    let total = base.pow(len as u32);
    (0..total)
        .map(|idx| nth_lex_tuple(base, len, idx))
        .collect()
}

/// The `idx`-th tuple of `{0..base}^len`, most significant slot first.
pub(crate) fn nth_lex_tuple(base: usize, len: usize, mut idx: usize) -> Vec<usize> {
    let mut t = vec![0; len];
    for slot in t.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
    t
}

/// Tuples of `G^k` with at least one zero slot, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSet {
    tuples: Vec<Vec<usize>>,
}

pub fn build_axis_set(grid: &BaseGrid) -> AxisSet {
    let tuples = grid
        .all_tuples()
        .into_iter()
        .filter(|t| t.contains(&0))
        .collect();
    AxisSet { tuples }
}

impl AxisSet {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }
}

/// `chi`: region `r` (1-based) to the `r`-th tuple of `G^k` in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelInjection {
    labels: Vec<Vec<usize>>,
}

pub fn build_injection(grid: &BaseGrid) -> LabelInjection {
    let domain = grid.d * (grid.n - grid.k) + 1;
    let labels = (0..domain)
        .map(|r| nth_lex_tuple(grid.size(), grid.k, r))
        .collect();
    LabelInjection { labels }
}

impl LabelInjection {
    pub fn domain_size(&self) -> usize {
        self.labels.len()
    }

    /// Index tuple for region `r` (1-based).
    pub fn label(&self, r: usize) -> Result<&[usize]> {
        self.labels
            .get(r.wrapping_sub(1))
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("region {r} outside the injection domain"))
            })
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }
}

/// Parameters that fully determine an [`ObstructionInstance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstructionParams {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub samples_per_region: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionSample {
    pub region: usize,
    /// The direction `u` in region `region`; `E-` stores the point at `-u`.
    pub direction: SphereDirection,
    /// Flattened point of `K^n`.
    pub point: Vec<f64>,
}

/// Everything defining the hard target `g`: grid, axis set, injection, cover,
/// tail embedding, and finite samples of `E+` and `E-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionInstance {
    pub params: ObstructionParams,
    pub grid: BaseGrid,
    pub axis: AxisSet,
    pub chi: LabelInjection,
    pub cover: SimplexCover,
    pub delta: DeltaMap,
    pub e_plus: Vec<ObstructionSample>,
    pub e_minus: Vec<ObstructionSample>,
    pub min_cross_distance: f64,
}

impl ObstructionParams {
    pub fn new(
        d: usize,
        n: usize,
        k: usize,
        epsilon: f64,
        samples_per_region: usize,
        seed: u64,
    ) -> Self {
        Self {
            d,
            n,
            k,
            epsilon,
            samples_per_region,
            seed,
        }
    }
}

pub fn sample_obstruction(params: ObstructionParams) -> Result<ObstructionInstance> {
    let ObstructionParams {
        d,
        n,
        k,
        epsilon,
        samples_per_region,
        seed,
    } = params;
    if samples_per_region == 0 {
        return Err(Error::InvalidParameter(
            "samples_per_region must be positive".into(),
        ));
    }
    let delta = DeltaMap::new(d, n, k, epsilon)?;
    let grid = build_grid(d, n, k)?;
    let axis = build_axis_set(&grid);
    let chi = build_injection(&grid);
    let b = delta.tail_dim();
    let cover = regular_simplex(b)?;
    let regions = cover.num_regions();

    let mut rng = rng_from_seed(seed);
    let mut per_region: Vec<Vec<SphereDirection>> = vec![Vec::new(); regions];
    let budget = 64 * regions * samples_per_region + 1024;
    let mut filled = 0;
    let mut attempts = 0;
    while filled < regions {
        if attempts == budget {
            let region = per_region
                .iter()
                .position(|v| v.len() < samples_per_region)
                .unwrap()
                + 1;
            return Err(Error::RejectionBudget { region, attempts });
        }
        attempts += 1;
        let Some(u) = gaussian_direction(b, &mut rng) else {
            continue;
        };
        let r = cover.assign_region(&u)?;
        let bucket = &mut per_region[r - 1];
        if bucket.len() < samples_per_region {
            bucket.push(u);
            if bucket.len() == samples_per_region {
                filled += 1;
            }
        }
    }

    let mut e_plus = Vec::with_capacity(regions * samples_per_region);
    let mut e_minus = Vec::with_capacity(regions * samples_per_region);
    for (idx, dirs) in per_region.into_iter().enumerate() {
        let r = idx + 1;
        let base = grid.base_block(chi.label(r)?);
        for u in dirs {
            let mut plus = base.clone();
            plus.extend(delta.embed(&u, 1.0)?);
            let mut minus = base.clone();
            minus.extend(delta.embed(&u, -1.0)?);
            e_plus.push(ObstructionSample {
                region: r,
                direction: u.clone(),
                point: plus,
            });
            e_minus.push(ObstructionSample {
                region: r,
                direction: u,
                point: minus,
            });
        }
    }

    let mut inst = ObstructionInstance {
        params,
        grid,
        axis,
        chi,
        cover,
        delta,
        e_plus,
        e_minus,
        min_cross_distance: 0.0,
    };
    inst.min_cross_distance = inst.compute_min_cross_distance();
    if !(inst.min_cross_distance > 0.0) {
        return Err(Error::DegenerateCertificate(
            "sampled E+ and E- intersect".into(),
        ));
    }
    Ok(inst)
}

impl ObstructionInstance {
    pub fn point_dim(&self) -> usize {
        self.params.d * self.params.n
    }

    pub fn base_dim(&self) -> usize {
        self.params.d * self.params.k
    }

    /// `(chi(r), delta(sign * u))` as a flattened point of `K^n`.
    pub fn labeled_point(&self, r: usize, u: &SphereDirection, sign: f64) -> Result<Vec<f64>> {
        let mut x = self.grid.base_block(self.chi.label(r)?);
        x.extend(self.delta.embed(u, sign)?);
        Ok(x)
    }

    fn compute_min_cross_distance(&self) -> f64 {
        let base = self.base_dim();
        let mut best = f64::INFINITY;
        for p in &self.e_plus {
            for q in &self.e_minus {
                let base_sq = dist_sq(&p.point[..base], &q.point[..base]);
                if base_sq >= best {
                    continue;
                }
                best = best.min(dist_sq(&p.point, &q.point));
            }
        }
        best.sqrt()
    }

    fn dist_to(set: &[ObstructionSample], x: &[f64]) -> f64 {
        set.iter()
            .map(|s| dist_sq(&s.point, x))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Distances `(dist(x, E+), dist(x, E-))` to the sampled sets.
    pub fn distances(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_len("target point", self.point_dim(), x.len())?;
        Ok((
            Self::dist_to(&self.e_plus, x),
            Self::dist_to(&self.e_minus, x),
        ))
    }

    /// `g(x) = dist(x, E-) / (dist(x, E+) + dist(x, E-))` against the sampled sets.
    pub fn target_g(&self, x: &[f64]) -> Result<f64> {
        let (plus, minus) = self.distances(x)?;
        Ok(minus / (plus + minus))
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("instance serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Pairwise disjoint cubes `C_j` of side `1/(2n)` with affine maps `T_j: K -> C_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCubes {
    d: usize,
    n: usize,
    side: f64,
    offsets: Vec<Vec<f64>>,
}

pub fn build_labeled_cubes(d: usize, n: usize) -> Result<LabeledCubes> {
    if d == 0 || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "labeled cubes need d >= 1 and n >= 2, got d={d}, n={n}"
        )));
    }
    let nf = n as f64;
    let side = 1.0 / (2.0 * nf);
    let margin = 1.0 / (4.0 * nf);
    let offsets = (0..n)
        .map(|j| {
            let mut o = vec![margin; d];
            o[0] = j as f64 / nf + margin;
            o
        })
        .collect();
    Ok(LabeledCubes {
        d,
        n,
        side,
        offsets,
    })
}

impl LabeledCubes {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Per-coordinate `(scale, offset)` of `T_j` (0-based `j`).
    pub fn affine(&self, j: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![self.side; self.d], self.offsets[j].clone())
    }

    /// `C_j` as per-coordinate closed intervals.
    pub fn cube(&self, j: usize) -> Vec<(f64, f64)> {
        self.offsets[j]
            .iter()
            .map(|&o| (o, o + self.side))
            .collect()
    }

    pub fn apply(&self, j: usize, t: &[f64]) -> Result<Vec<f64>> {
        check_len("labeled cube input", self.d, t.len())?;
        Ok(t.iter()
            .zip(&self.offsets[j])
            .map(|(ti, o)| o + self.side * ti)
            .collect())
    }

    /// `(T_1 t_1, ..., T_n t_n)` for a flattened `t` in `K^n`.
    pub fn embed(&self, t: &[f64]) -> Result<Vec<f64>> {
        check_len("labeled copy input", self.d * self.n, t.len())?;
        let mut out = Vec::with_capacity(t.len());
        for (j, block) in t.chunks(self.d).enumerate() {
            out.extend(self.apply(j, block)?);
        }
        Ok(out)
    }

    /// Max-norm gap between `C_i` and `C_j`.
    pub fn separation(&self, i: usize, j: usize) -> f64 {
        self.cube(i)
            .iter()
            .zip(self.cube(j))
            .map(|(&(a0, a1), (b0, b1))| (b0 - a1).max(a0 - b1).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = build_grid(1, 3, 1).unwrap();
        assert_eq!(g.points(), &[vec![0.0], vec![0.5], vec![1.0]]);
        assert_eq!(build_grid(2, 10, 2).unwrap().size(), 5);
        for (d, n) in [(1, 2), (3, 4), (2, 7)] {
            assert_eq!(build_grid(d, n, 1).unwrap().size(), d * (n - 1) + 1);
        }
        assert!(build_grid(1, 3, 3).is_err());
    }

    #[test]
    fn axis_examples() {
        assert_eq!(
            build_axis_set(&build_grid(1, 3, 1).unwrap()).tuples(),
            &[vec![0]]
        );
        assert_eq!(build_axis_set(&build_grid(2, 10, 2).unwrap()).len(), 9);
        assert_eq!(build_axis_set(&build_grid(1, 11, 2).unwrap()).len(), 7);
    }

    #[test]
    fn injection_examples() {
        let g = build_grid(1, 3, 1).unwrap();
        let chi = build_injection(&g);
        let pts: Vec<Vec<f64>> = (1..=3)
            .map(|r| g.base_block(chi.label(r).unwrap()))
            .collect();
        assert_eq!(pts, vec![vec![0.0], vec![0.5], vec![1.0]]);
        assert!(chi.label(0).is_err() && chi.label(4).is_err());
    }

    #[test]
    fn obstruction_small() {
        let inst = sample_obstruction(ObstructionParams::new(1, 3, 1, 0.25, 20, 7)).unwrap();
        assert_eq!(inst.e_plus.len(), 60);
        assert!(inst.min_cross_distance > 0.0);
        let grid_vals = [0.0, 0.5, 1.0];
        for s in inst.e_plus.iter().chain(&inst.e_minus) {
            assert!(s.point.iter().all(|&c| (0.0..=1.0).contains(&c)));
            assert!(grid_vals.contains(&s.point[0]));
        }
        for s in &inst.e_plus {
            assert_eq!(inst.cover.assign_region(&s.direction).unwrap(), s.region);
            assert_eq!(inst.target_g(&s.point).unwrap(), 1.0);
        }
        for s in &inst.e_minus {
            assert_eq!(inst.target_g(&s.point).unwrap(), 0.0);
        }
        assert!(inst.target_g(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn obstruction_rejects_bad_params() {
        assert!(sample_obstruction(ObstructionParams::new(1, 3, 1, 0.6, 5, 0)).is_err());
        assert!(sample_obstruction(ObstructionParams::new(1, 3, 1, 0.25, 0, 0)).is_err());
    }

    #[test]
    fn cube_examples() {
        let c = build_labeled_cubes(1, 2).unwrap();
        assert_eq!(c.cube(0), vec![(0.125, 0.375)]);
        assert_eq!(c.cube(1), vec![(0.625, 0.875)]);
        assert_eq!(c.apply(0, &[0.0]).unwrap(), vec![0.125]);
        assert_eq!(c.apply(0, &[1.0]).unwrap(), vec![0.375]);
        assert_eq!(c.separation(0, 1), 0.25);
        assert!(build_labeled_cubes(2, 1).is_err());
    }
}

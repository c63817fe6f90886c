//! Antipodal collision search.
//!
//! For an indexed k-Janossy latent map `Phi` and an obstruction instance, the
//! map `F(u) = (Phi(x_b, delta(u)))_{x_b in A}` sends the tail sphere
//! `S^{d(n-k)-1}` to `R^{M|A|}`. When `M|A| < d(n-k)` some `u` has
//! `F(u) = F(-u)`; such a `u` is located numerically (projected gradient
//! descent on the sphere, or exact elimination for affine encoders),
//! propagated from the axis set to the grid, and packaged as a certificate.

use serde::{Deserialize, Serialize};

use crate::architectures::{DifferentiableLatentMap, Encoder, LatentMap, Model};
use crate::constructions::{
    build_labeled_cubes, sample_obstruction, LabeledCubes, ObstructionInstance, ObstructionParams,
};
use crate::error::{check_len, Error, Result};
use crate::geometry::{gaussian_direction, SphereDirection};
use crate::numerics::{dist_sq, dot, norm, nullspace, Matrix, Mlp};
use crate::rigidity::{check_axes_to_grid, AxesToGridReport};
use crate::seed::{component_seed, rng_from_seed, Stream};

/// `u -> (Phi(x_b, delta(u)))_{x_b in A}`, axis tuples in lexicographic order.
pub struct BorsukUlamMap<'a, L: ?Sized> {
    encoder: &'a L,
    instance: &'a ObstructionInstance,
    axis_blocks: Vec<Vec<f64>>,
}

impl<'a, L: LatentMap + ?Sized> BorsukUlamMap<'a, L> {
    pub fn new(encoder: &'a L, instance: &'a ObstructionInstance) -> Result<Self> {
        let p = &instance.params;
        check_len("encoder point dimension", p.d, encoder.point_dim())?;
        check_len("encoder point count", p.n, encoder.num_points())?;
        let axis_blocks = instance
            .axis
            .tuples()
            .iter()
            .map(|t| instance.grid.base_block(t))
            .collect();
        Ok(Self {
            encoder,
            instance,
            axis_blocks,
        })
    }

    pub fn encoder(&self) -> &L {
        self.encoder
    }

    pub fn instance(&self) -> &ObstructionInstance {
        self.instance
    }

    /// Sphere dimension `b = d(n-k)`.
    pub fn sphere_dim(&self) -> usize {
        self.instance.delta.tail_dim()
    }

    /// `m = M |A|`.
    pub fn output_dim(&self) -> usize {
        self.encoder.latent_dim() * self.axis_blocks.len()
    }

    /// True when `M|A| < d(n-k)`, the regime where a collision must exist.
    pub fn collision_guaranteed(&self) -> bool {
        self.output_dim() < self.sphere_dim()
    }

    fn eval_raw(&self, u: &[f64], sign: f64) -> Result<Vec<f64>> {
        let tail = self.instance.delta.embed_raw(u, sign);
        let mut out = Vec::with_capacity(self.output_dim());
        for base in &self.axis_blocks {
            let mut x = base.clone();
            x.extend_from_slice(&tail);
            out.extend(self.encoder.latent(&x)?);
        }
        Ok(out)
    }

    pub fn eval(&self, u: &SphereDirection) -> Result<Vec<f64>> {
        check_len("sphere direction", self.sphere_dim(), u.dim())?;
        self.eval_raw(u.coords(), 1.0)
    }

    /// `F(u) - F(-u)`.
    pub fn antipodal_difference(&self, u: &SphereDirection) -> Result<Vec<f64>> {
        check_len("sphere direction", self.sphere_dim(), u.dim())?;
        self.difference_raw(u.coords())
    }

    fn difference_raw(&self, u: &[f64]) -> Result<Vec<f64>> {
        let plus = self.eval_raw(u, 1.0)?;
        let minus = self.eval_raw(u, -1.0)?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| a - b).collect())
    }

    /// `|F(u) - F(-u)|^2`.
    pub fn antipodal_residual(&self, u: &SphereDirection) -> Result<f64> {
        let diff = self.antipodal_difference(u)?;
        Ok(dot(&diff, &diff))
    }

    fn residual_raw(&self, u: &[f64]) -> Result<f64> {
        let diff = self.difference_raw(u)?;
        Ok(dot(&diff, &diff))
    }
}

impl<L: DifferentiableLatentMap + ?Sized> BorsukUlamMap<'_, L> {
    /// Residual and its Euclidean gradient in `R^b`.
    pub fn residual_and_gradient(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let eps = self.instance.delta.epsilon();
        let tail_plus = self.instance.delta.embed_raw(u, 1.0);
        let tail_minus = self.instance.delta.embed_raw(u, -1.0);
        let base_len = self.instance.base_dim();
        let mut residual = 0.0;
        let mut grad = vec![0.0; u.len()];
        for base in &self.axis_blocks {
            let mut xp = base.clone();
            xp.extend_from_slice(&tail_plus);
            let mut xm = base.clone();
            xm.extend_from_slice(&tail_minus);
            let fp = self.encoder.latent(&xp)?;
            let fm = self.encoder.latent(&xm)?;
            let diff: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| a - b).collect();
            residual += dot(&diff, &diff);
            let gp = self.encoder.latent_vjp(&xp, &diff)?;
            let gm = self.encoder.latent_vjp(&xm, &diff)?;
            for (j, g) in grad.iter_mut().enumerate() {
                *g += 2.0 * eps * (gp[base_len + j] + gm[base_len + j]);
            }
        }
        Ok((residual, grad))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Longest tangent move per iteration. The trial step along the tangent
    /// gradient `t` starts at `min(2 R / |t|^2, step_size / |t|)` and halves
    /// until the residual drops.
    pub step_size: f64,
    /// Residual `|F(u) - F(-u)|^2` accepted as a collision.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 100,
            max_iterations: 500,
            step_size: 1.0,
            tolerance: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionMethod {
    ProjectedGradient,
    LinearOracle,
}

/// Witness that `Phi(x+) = Phi(x-)` (up to the recorded residuals) for
/// `x+ = (chi(r), delta(u))` in `E+` and `x- = (chi(r), delta(-u))` in `E-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionCertificate {
    pub direction: SphereDirection,
    pub region: usize,
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
    /// `|F(u) - F(-u)|^2` over the axis set.
    pub antipodal_residual: f64,
    /// Max over the axis set of `|Phi(x_b, delta(u)) - Phi(x_b, delta(-u))|`.
    pub axis_residual: f64,
    /// `|Phi(x+) - Phi(x-)|`.
    pub grid_residual: f64,
    pub propagation: AxesToGridReport,
    pub method: CollisionMethod,
    pub restarts_used: usize,
    pub encoder_fingerprint: Option<String>,
    pub instance_fingerprint: String,
    pub instance_params: ObstructionParams,
}

/// Outcome of [`find_collision`]; `certificate` is `None` when nothing met the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub certificate: Option<CollisionCertificate>,
    pub best_residual: f64,
    pub best_direction: Option<SphereDirection>,
    pub restarts_used: usize,
    pub total_iterations: usize,
    pub collision_guaranteed: bool,
    pub config: SearchConfig,
}

fn assemble<L: LatentMap + ?Sized>(
    map: &BorsukUlamMap<'_, L>,
    u: SphereDirection,
    method: CollisionMethod,
    restarts_used: usize,
) -> Result<Option<CollisionCertificate>> {
    let inst = map.instance;
    let region = inst.cover.assign_region(&u)?;
    let x_plus = inst.labeled_point(region, &u, 1.0)?;
    let x_minus = inst.labeled_point(region, &u, -1.0)?;
    if x_plus == x_minus {
        return Err(Error::DegenerateCertificate("x+ equals x-".into()));
    }
    let diff = map.antipodal_difference(&u)?;
    let m = map.encoder.latent_dim();
    let axis_residual = diff.chunks(m).map(norm).fold(0.0, f64::max);
    let tail_u = inst.delta.embed(&u, 1.0)?;
    let tail_v = inst.delta.embed(&u, -1.0)?;
    let propagation = check_axes_to_grid(
        map.encoder,
        &inst.grid,
        &inst.axis,
        &tail_u,
        &tail_v,
        axis_residual,
    )?;
    if !propagation.passed {
        return Ok(None);
    }
    let a = map.encoder.latent(&x_plus)?;
    let b = map.encoder.latent(&x_minus)?;
    let grid_residual = norm(&a.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>());
    Ok(Some(CollisionCertificate {
        antipodal_residual: dot(&diff, &diff),
        direction: u,
        region,
        x_plus,
        x_minus,
        axis_residual,
        grid_residual,
        propagation,
        method,
        restarts_used,
        encoder_fingerprint: map.encoder.fingerprint(),
        instance_fingerprint: inst.fingerprint(),
        instance_params: inst.params,
    }))
}

fn normalized(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm(&v);
    (n > 0.0 && n.is_finite()).then(|| v.into_iter().map(|x| x / n).collect())
}

/// An even residual `R(u) = |G(u) - G(-u)|^2` on `S^{b-1}` with its gradient.
trait AntipodalObjective {
    fn sphere_dim(&self) -> usize;
    fn residual(&self, u: &[f64]) -> Result<f64>;
    fn residual_and_gradient(&self, u: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl<L: DifferentiableLatentMap + ?Sized> AntipodalObjective for BorsukUlamMap<'_, L> {
    fn sphere_dim(&self) -> usize {
        BorsukUlamMap::sphere_dim(self)
    }

    fn residual(&self, u: &[f64]) -> Result<f64> {
        self.residual_raw(u)
    }

    fn residual_and_gradient(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        BorsukUlamMap::residual_and_gradient(self, u)
    }
}

struct Descent {
    direction: Vec<f64>,
    residual: f64,
    iterations: usize,
}

/// Extra descent steps taken once the residual is below tolerance.
const POLISH_STEPS: usize = 3;

/// One projected-gradient run from `u`; stops `POLISH_STEPS` after reaching
/// `tolerance`, or earlier when no step decreases the residual.
fn descend<O: AntipodalObjective + ?Sized>(
    obj: &O,
    mut u: Vec<f64>,
    cfg: &SearchConfig,
) -> Result<Descent> {
    let (mut r, mut g) = obj.residual_and_gradient(&u)?;
    let mut iterations = 0;
    let mut polish = 0;
    while iterations < cfg.max_iterations && r > 0.0 {
        if r <= cfg.tolerance {
            if polish == POLISH_STEPS {
                break;
            }
            polish += 1;
        }
        iterations += 1;
        let radial = dot(&g, &u);
        let tangent: Vec<f64> = g.iter().zip(&u).map(|(gi, ui)| gi - radial * ui).collect();
        let gn2 = dot(&tangent, &tangent);
        if !(gn2 > 0.0) {
            break;
        }
        let mut eta = (2.0 * r / gn2).min(cfg.step_size / gn2.sqrt());
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = u
                .iter()
                .zip(&tangent)
                .map(|(ui, ti)| ui - eta * ti)
                .collect();
            if let Some(cand) = normalized(trial) {
                if obj.residual(&cand)? < r {
                    accepted = Some(cand);
                    break;
                }
            }
            eta *= 0.5;
        }
        let Some(cand) = accepted else {
            break;
        };
        u = cand;
        (r, g) = obj.residual_and_gradient(&u)?;
    }
    if !r.is_finite() {
        return Err(Error::NonFinite("collision residual"));
    }
    Ok(Descent {
        direction: u,
        residual: r,
        iterations,
    })
}

fn validate_search(cfg: &SearchConfig) -> Result<()> {
    if cfg.restarts == 0 || !(cfg.step_size > 0.0) || !(cfg.tolerance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid search configuration {cfg:?}"
        )));
    }
    Ok(())
}

fn restart_direction(cfg: &SearchConfig, b: usize, restart: usize) -> Option<SphereDirection> {
    let mut rng = rng_from_seed(component_seed(cfg.seed, Stream::Search, restart as u64));
    gaussian_direction(b, &mut rng)
}

/// Multi-start projected gradient descent on `|F(u) - F(-u)|^2` over the sphere.
pub fn find_collision<L: DifferentiableLatentMap + ?Sized>(
    map: &BorsukUlamMap<'_, L>,
    cfg: &SearchConfig,
) -> Result<SearchReport> {
    validate_search(cfg)?;
    let b = map.sphere_dim();
    let mut report = SearchReport {
        certificate: None,
        best_residual: f64::INFINITY,
        best_direction: None,
        restarts_used: 0,
        total_iterations: 0,
        collision_guaranteed: map.collision_guaranteed(),
        config: *cfg,
    };
    for restart in 0..cfg.restarts {
        report.restarts_used = restart + 1;
        let Some(start) = restart_direction(cfg, b, restart) else {
            continue;
        };
        let run = descend(map, start.coords().to_vec(), cfg)?;
        report.total_iterations += run.iterations;
        let dir = SphereDirection::normalize(run.direction)?;
        if run.residual < report.best_residual {
            report.best_residual = run.residual;
            report.best_direction = Some(dir.clone());
        }
        if run.residual <= cfg.tolerance {
            if let Some(cert) = assemble(map, dir, CollisionMethod::ProjectedGradient, restart + 1)?
            {
                report.best_residual = cert.antipodal_residual;
                report.certificate = Some(cert);
                break;
            }
        }
    }
    Ok(report)
}

/// `u -> Psi(L(c + eps u))` for a fixed feature map `Psi` and the labeled copy
/// `L` of disjoint cubes. An antipodal collision of this map gives two
/// configurations in the labeled copy, hence not permutations of each other,
/// with equal features.
pub struct FixedFeatureMap<'a, L: ?Sized> {
    pub features: &'a L,
    pub cubes: &'a LabeledCubes,
    pub epsilon: f64,
}

impl<L: LatentMap + ?Sized> FixedFeatureMap<'_, L> {
    fn point(&self, u: &[f64], sign: f64) -> Result<Vec<f64>> {
        let t: Vec<f64> = u.iter().map(|ui| 0.5 + sign * self.epsilon * ui).collect();
        self.cubes.embed(&t)
    }

    fn difference(&self, u: &[f64]) -> Result<Vec<f64>> {
        let a = self.features.latent(&self.point(u, 1.0)?)?;
        let b = self.features.latent(&self.point(u, -1.0)?)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }
}

impl<L: DifferentiableLatentMap + ?Sized> AntipodalObjective for FixedFeatureMap<'_, L> {
    fn sphere_dim(&self) -> usize {
        self.cubes.d() * self.cubes.n()
    }

    fn residual(&self, u: &[f64]) -> Result<f64> {
        let diff = self.difference(u)?;
        Ok(dot(&diff, &diff))
    }

    fn residual_and_gradient(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let xp = self.point(u, 1.0)?;
        let xm = self.point(u, -1.0)?;
        let a = self.features.latent(&xp)?;
        let b = self.features.latent(&xm)?;
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let gp = self.features.latent_vjp(&xp, &diff)?;
        let gm = self.features.latent_vjp(&xm, &diff)?;
        let chain = 2.0 * self.epsilon * self.cubes.side();
        let grad = gp.iter().zip(&gm).map(|(p, m)| chain * (p + m)).collect();
        Ok((dot(&diff, &diff), grad))
    }
}

/// Two configurations in the labeled copy with (nearly) equal fixed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedFeatureCollision {
    pub direction: SphereDirection,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `|Psi(x) - Psi(y)|^2`.
    pub residual: f64,
    /// Smallest distance from `y` to any point permutation of `x`.
    pub permutation_distance: f64,
}

fn permutation_distance(x: &[f64], y: &[f64], d: usize, n: usize) -> f64 {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    // Heap's algorithm; n is small wherever this is used
    let mut c = vec![0usize; n];
    let dist = |perm: &[usize]| {
        perm.iter()
            .enumerate()
            .map(|(i, &j)| dist_sq(&x[j * d..(j + 1) * d], &y[i * d..(i + 1) * d]))
            .sum::<f64>()
    };
    best = best.min(dist(&perm));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(dist(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best.sqrt()
}

/// Searches for a feature collision of a fixed map `Psi: K^n -> R^M`; one is
/// guaranteed when `M < nd`.
pub fn fixed_feature_collision<L: DifferentiableLatentMap + ?Sized>(
    features: &L,
    epsilon: f64,
    cfg: &SearchConfig,
) -> Result<Option<FixedFeatureCollision>> {
    validate_search(cfg)?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} outside (0, 1/2)"
        )));
    }
    let (d, n) = (features.point_dim(), features.num_points());
    let cubes = build_labeled_cubes(d, n)?;
    let map = FixedFeatureMap {
        features,
        cubes: &cubes,
        epsilon,
    };
    let b = map.sphere_dim();
    for restart in 0..cfg.restarts {
        let Some(start) = restart_direction(cfg, b, restart) else {
            continue;
        };
        let run = descend(&map, start.coords().to_vec(), cfg)?;
        if run.residual <= cfg.tolerance {
            let direction = SphereDirection::normalize(run.direction)?;
            let x = map.point(direction.coords(), 1.0)?;
            let y = map.point(direction.coords(), -1.0)?;
            let residual = map.residual(direction.coords())?;
            return Ok(Some(FixedFeatureCollision {
                permutation_distance: permutation_distance(&x, &y, d, n),
                direction,
                x,
                y,
                residual,
            }));
        }
    }
    Ok(None)
}

/// Exact collision for affine encoders: the antipodal difference is `2 L u`, so
/// any unit vector of `ker L` collides. Returns `Ok(None)` when `L` has full
/// column rank.
pub fn linear_collision_oracle<L: LatentMap + ?Sized>(
    map: &BorsukUlamMap<'_, L>,
) -> Result<Option<CollisionCertificate>> {
    if !map.encoder.is_affine() {
        return Err(Error::NotAffine);
    }
    let b = map.sphere_dim();
    let columns = (0..b)
        .map(|j| {
            let mut e = vec![0.0; b];
            e[j] = 1.0;
            Ok(map
                .difference_raw(&e)?
                .into_iter()
                .map(|v| 0.5 * v)
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let linear = Matrix::from_columns(map.output_dim(), &columns)?;
    let Some(kernel) = nullspace(&linear, 1e-10).into_iter().next() else {
        return Ok(None);
    };
    let u = SphereDirection::normalize(kernel)?;
    assemble(map, u, CollisionMethod::LinearOracle, 0)
}

/// Sup-error lower bound implied by a collision against the sampled target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub certificate: CollisionCertificate,
    pub g_plus: f64,
    pub g_minus: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    /// `(|g(x+) - g(x-)| - |f(x+) - f(x-)|) / 2`.
    pub implied_bound: f64,
    pub samples_per_region: usize,
}

fn check_geometry(inst: &ObstructionInstance, cert: &CollisionCertificate) -> Result<()> {
    if cert.x_plus == cert.x_minus {
        return Err(Error::DegenerateCertificate("x+ equals x-".into()));
    }
    if inst.cover.assign_region(&cert.direction)? != cert.region {
        return Err(Error::Verification(
            "region does not match the direction".into(),
        ));
    }
    if inst.labeled_point(cert.region, &cert.direction, 1.0)? != cert.x_plus
        || inst.labeled_point(cert.region, &cert.direction, -1.0)? != cert.x_minus
    {
        return Err(Error::Verification(
            "x+ / x- do not reconstruct from (r, u)".into(),
        ));
    }
    Ok(())
}

pub fn gap_certificate(
    model: &Model,
    inst: &ObstructionInstance,
    cert: &CollisionCertificate,
) -> Result<GapReport> {
    let expected = model.encoder().fingerprint();
    if cert.encoder_fingerprint.as_deref() != Some(expected.as_str()) {
        return Err(Error::FingerprintMismatch {
            what: "encoder",
            expected,
            got: cert.encoder_fingerprint.clone().unwrap_or_default(),
        });
    }
    let inst_fp = inst.fingerprint();
    if cert.instance_fingerprint != inst_fp {
        return Err(Error::FingerprintMismatch {
            what: "instance",
            expected: inst_fp,
            got: cert.instance_fingerprint.clone(),
        });
    }
    check_geometry(inst, cert)?;
    let g_plus = inst.target_g(&cert.x_plus)?;
    let g_minus = inst.target_g(&cert.x_minus)?;
    let f_plus = model.eval_flat(&cert.x_plus)?;
    let f_minus = model.eval_flat(&cert.x_minus)?;
    Ok(GapReport {
        certificate: cert.clone(),
        g_plus,
        g_minus,
        f_plus,
        f_minus,
        implied_bound: ((g_plus - g_minus).abs() - (f_plus - f_minus).abs()) / 2.0,
        samples_per_region: inst.params.samples_per_region,
    })
}

/// Largest decoder gradient norm over the latent codes of `configs`.
pub fn decoder_lipschitz_estimate(model: &Model, configs: &[Vec<f64>]) -> Result<f64> {
    let mut best = 0.0f64;
    for x in configs {
        let z = model.encoder().encode_flat(x)?;
        let g = model.decoder().vjp(&z, &[1.0])?;
        best = best.max(norm(&g.input));
    }
    Ok(best)
}

/// A certificate together with the encoder it was computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub certificate: CollisionCertificate,
    pub encoder: Encoder<Mlp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub recorded_residual: f64,
    pub recomputed_residual: f64,
    pub residual_difference: f64,
    pub propagation: AxesToGridReport,
    pub passed: bool,
}

/// Residual agreement demanded by [`verify_certificate`].
pub const REPLAY_TOLERANCE: f64 = 1e-12;

/// Rebuilds the instance from its parameters and recomputes the certificate.
pub fn verify_certificate(file: &CertificateFile) -> Result<VerificationReport> {
    let cert = &file.certificate;
    let inst = sample_obstruction(cert.instance_params)?;
    let fp = inst.fingerprint();
    if fp != cert.instance_fingerprint {
        return Err(Error::FingerprintMismatch {
            what: "instance",
            expected: fp,
            got: cert.instance_fingerprint.clone(),
        });
    }
    let enc_fp = file.encoder.fingerprint();
    if cert.encoder_fingerprint.as_deref() != Some(enc_fp.as_str()) {
        return Err(Error::FingerprintMismatch {
            what: "encoder",
            expected: enc_fp,
            got: cert.encoder_fingerprint.clone().unwrap_or_default(),
        });
    }
    check_geometry(&inst, cert)?;
    let map = BorsukUlamMap::new(&file.encoder, &inst)?;
    let recomputed = map.antipodal_residual(&cert.direction)?;
    let tail_u = inst.delta.embed(&cert.direction, 1.0)?;
    let tail_v = inst.delta.embed(&cert.direction, -1.0)?;
    let propagation = check_axes_to_grid(
        &file.encoder,
        &inst.grid,
        &inst.axis,
        &tail_u,
        &tail_v,
        cert.axis_residual,
    )?;
    let residual_difference = (recomputed - cert.antipodal_residual).abs();
    Ok(VerificationReport {
        recorded_residual: cert.antipodal_residual,
        recomputed_residual: recomputed,
        residual_difference,
        passed: residual_difference <= REPLAY_TOLERANCE && propagation.passed,
        propagation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::ObstructionParams;
    use crate::numerics::{Activation, Layer};

    fn scalar(w: f64) -> Mlp {
        Mlp::from_layers(
            vec![Layer::from_rows(&[&[w]], &[0.1]).unwrap()],
            Activation::Identity,
        )
        .unwrap()
    }

    fn small_instance() -> ObstructionInstance {
        sample_obstruction(ObstructionParams::new(1, 3, 1, 0.25, 10, 1)).unwrap()
    }

    #[test]
    fn single_axis_point_output() {
        let inst = small_instance();
        let enc = Encoder::indexed(1, 3, 1, vec![scalar(0.5), scalar(2.0), scalar(-1.0)]).unwrap();
        let map = BorsukUlamMap::new(&enc, &inst).unwrap();
        assert_eq!(map.output_dim(), 1);
        let u = SphereDirection::new(vec![0.6, 0.8]).unwrap();
        let direct = enc
            .encode_flat(&[0.0, 0.5 + 0.25 * 0.6, 0.5 + 0.25 * 0.8])
            .unwrap();
        assert_eq!(map.eval(&u).unwrap(), direct);
    }

    #[test]
    fn linear_difference_is_twice_linear_part() {
        let inst = small_instance();
        let (alpha, beta) = (2.0, -1.0);
        let enc =
            Encoder::indexed(1, 3, 1, vec![scalar(0.5), scalar(alpha), scalar(beta)]).unwrap();
        let map = BorsukUlamMap::new(&enc, &inst).unwrap();
        let u = SphereDirection::new(vec![0.6, 0.8]).unwrap();
        let diff = map.antipodal_difference(&u).unwrap();
        let expected = 2.0 * 0.25 * (alpha * 0.6 + beta * 0.8);
        assert!((diff[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn residual_parity_and_gradient() {
        let inst = small_instance();
        let phi = Mlp::random(&[1, 6, 1], Activation::Tanh, 4).unwrap();
        let enc = Encoder::deep_sets(1, 3, phi).unwrap().as_indexed();
        let map = BorsukUlamMap::new(&enc, &inst).unwrap();
        let u = SphereDirection::new(vec![0.6, -0.8]).unwrap();
        assert_eq!(
            map.antipodal_residual(&u).unwrap(),
            map.antipodal_residual(&u.antipode()).unwrap()
        );
        let (_, g) = map.residual_and_gradient(u.coords()).unwrap();
        let fd = crate::numerics::finite_difference_gradient(
            |v| map.residual_raw(v).unwrap(),
            u.coords(),
            1e-6,
        )
        .unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn oracle_requires_affine() {
        let inst = small_instance();
        let phi = Mlp::random(&[1, 3, 1], Activation::Tanh, 4).unwrap();
        let enc = Encoder::deep_sets(1, 3, phi).unwrap();
        let map = BorsukUlamMap::new(&enc, &inst).unwrap();
        assert!(matches!(
            linear_collision_oracle(&map),
            Err(Error::NotAffine)
        ));
    }

    #[test]
    fn oracle_full_rank_returns_none() {
        // b = 2, m = M|A| = 2: a generic square linear part has trivial kernel
        let inst = small_instance();
        let net = |a: f64, c: f64| {
            Mlp::from_layers(
                vec![Layer::from_rows(&[&[a], &[c]], &[0.0, 0.0]).unwrap()],
                Activation::Tanh,
            )
            .unwrap()
        };
        let enc =
            Encoder::indexed(1, 3, 1, vec![net(1.0, 1.0), net(1.0, 2.0), net(3.0, -1.0)]).unwrap();
        let map = BorsukUlamMap::new(&enc, &inst).unwrap();
        assert!(linear_collision_oracle(&map).unwrap().is_none());
    }

    #[test]
    fn fixed_feature_sum_collides() {
        // Psi = sum of coordinates: M = 1 < nd = 2
        let id = Mlp::from_layers(
            vec![Layer::from_rows(&[&[1.0]], &[0.0]).unwrap()],
            Activation::Identity,
        )
        .unwrap();
        let enc = Encoder::deep_sets(1, 2, id).unwrap();
        let hit = fixed_feature_collision(&enc, 0.25, &SearchConfig::default())
            .unwrap()
            .unwrap();
        assert!(hit.residual <= 1e-10);
        assert!(hit.permutation_distance > 0.1);
    }

    #[test]
    fn permutation_distance_detects_swaps() {
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let y = [0.5, 0.6, 0.1, 0.2, 0.3, 0.4];
        assert_eq!(permutation_distance(&x, &y, 2, 3), 0.0);
        assert!(permutation_distance(&x, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.7], 2, 3) > 0.09);
    }

    #[test]
    fn invalid_search_config() {
        let inst = small_instance();
        let enc = Encoder::indexed(1, 3, 1, vec![scalar(0.5), scalar(2.0), scalar(-1.0)]).unwrap();
        let map = BorsukUlamMap::new(&enc, &inst).unwrap();
        let cfg = SearchConfig {
            restarts: 0,
            ..SearchConfig::default()
        };
        assert!(find_collision(&map, &cfg).is_err());
    }
}

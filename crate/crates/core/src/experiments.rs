//! Training studies against the hard target `g`.
//!
//! A model is fitted by minibatch MSE to samples of `E+` (label 1), `E-`
//! (label 0) and uniform background points, then its encoder is attacked with
//! [`find_collision`] through the indexed embedding. Below the threshold
//! `M|A| < d(n-k)` the attack certifies a pair `x+ in E+`, `x- in E-` with
//! equal latent codes, which caps how well any decoder can do.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::architectures::{Encoder, EncoderKind, Model, PointConfig};
use crate::collision::{
    find_collision, gap_certificate, BorsukUlamMap, CollisionCertificate, GapReport, SearchConfig,
};
use crate::constructions::{sample_obstruction, ObstructionInstance, ObstructionParams};
use crate::error::{Error, Result};
use crate::geometry::{gaussian_direction, DeltaMap};
use crate::numerics::{Activation, Method, Mlp, OptimizerState};
use crate::seed::{component_seed, rng_from_seed, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub latent_dim: usize,
    pub kind: EncoderKind,
    /// Hidden widths of each encoder network.
    pub encoder_hidden: Vec<usize>,
    /// Hidden widths of the decoder.
    pub decoder_hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub seed: u64,
    pub e_plus_count: usize,
    pub e_minus_count: usize,
    pub background_count: usize,
    /// Fresh `E+` and `E-` points (each) for the held-out error.
    pub held_out_count: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("e_plus_count", self.e_plus_count),
            ("e_minus_count", self.e_minus_count),
            ("background_count", self.background_count),
            ("held_out_count", self.held_out_count),
            ("latent_dim", self.latent_dim),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive")));
        }
        if self.encoder_hidden.contains(&0) || self.decoder_hidden.contains(&0) {
            return Err(Error::InvalidParameter(
                "hidden widths must be positive".into(),
            ));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step_size {}",
                self.step_size
            )));
        }
        if self.kind == EncoderKind::DeepSets && self.k != 1 {
            return Err(Error::InvalidParameter("deep sets requires k = 1".into()));
        }
        DeltaMap::new(self.d, self.n, self.k, DeltaMap::DEFAULT_EPSILON).map(|_| ())
    }
}

/// Fresh model for `cfg`; members and decoder use independent derived seeds.
pub fn build_model(cfg: &TrainConfig) -> Result<Model> {
    cfg.validate()?;
    let mut enc_widths = vec![cfg.d * cfg.k];
    enc_widths.extend(&cfg.encoder_hidden);
    enc_widths.push(cfg.latent_dim);
    let member = |t: u64| {
        Mlp::random(
            &enc_widths,
            cfg.activation,
            component_seed(cfg.seed, Stream::EncoderInit, t),
        )
    };
    let encoder = match cfg.kind {
        EncoderKind::DeepSets => Encoder::deep_sets(cfg.d, cfg.n, member(0)?)?,
        EncoderKind::SharedJanossy => Encoder::shared_janossy(cfg.d, cfg.n, cfg.k, member(0)?)?,
        EncoderKind::IndexedJanossy => {
            let count = cfg.n.pow(cfg.k as u32) as u64;
            let members = (0..count).map(member).collect::<Result<Vec<_>>>()?;
            Encoder::indexed(cfg.d, cfg.n, cfg.k, members)?
        }
    };
    let mut dec_widths = vec![cfg.latent_dim];
    dec_widths.extend(&cfg.decoder_hidden);
    dec_widths.push(1);
    let decoder = Mlp::random(
        &dec_widths,
        cfg.activation,
        component_seed(cfg.seed, Stream::DecoderInit, 0),
    )?;
    Model::new(encoder, decoder)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: PointConfig,
    pub y: f64,
}

fn check_instance(inst: &ObstructionInstance, cfg: &TrainConfig) -> Result<()> {
    let p = &inst.params;
    if (p.d, p.n, p.k) != (cfg.d, cfg.n, cfg.k) {
        return Err(Error::InvalidParameter(format!(
            "instance (d,n,k) = ({},{},{}) but config has ({},{},{})",
            p.d, p.n, p.k, cfg.d, cfg.n, cfg.k
        )));
    }
    Ok(())
}

/// `E+` samples (label 1), `E-` samples (label 0) and uniform background
/// points labeled by `target_g`, in that order. Sample subsets are drawn
/// without replacement from the instance.
pub fn make_dataset(inst: &ObstructionInstance, cfg: &TrainConfig) -> Result<Vec<Example>> {
    cfg.validate()?;
    check_instance(inst, cfg)?;
    let mut rng = rng_from_seed(component_seed(cfg.seed, Stream::Dataset, 0));
    let mut out = Vec::with_capacity(cfg.e_plus_count + cfg.e_minus_count + cfg.background_count);
    for (set, count, label) in [
        (&inst.e_plus, cfg.e_plus_count, 1.0),
        (&inst.e_minus, cfg.e_minus_count, 0.0),
    ] {
        if count > set.len() {
            return Err(Error::InvalidParameter(format!(
                "requested {count} samples but the instance holds {}",
                set.len()
            )));
        }
        let mut idx: Vec<usize> = (0..set.len()).collect();
        idx.shuffle(&mut rng);
        for &i in &idx[..count] {
            out.push(Example {
                x: PointConfig::new(cfg.d, set[i].point.clone())?,
                y: label,
            });
        }
    }
    let dim = cfg.d * cfg.n;
    for _ in 0..cfg.background_count {
        let coords: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let y = inst.target_g(&coords)?;
        out.push(Example {
            x: PointConfig::new(cfg.d, coords)?,
            y,
        });
    }
    Ok(out)
}

/// Fresh points of `E+` and `E-` (not in the sampled sets), labeled by `target_g`.
pub fn held_out_set(inst: &ObstructionInstance, cfg: &TrainConfig) -> Result<Vec<Example>> {
    check_instance(inst, cfg)?;
    let mut rng = rng_from_seed(component_seed(cfg.seed, Stream::Dataset, 1));
    let b = inst.delta.tail_dim();
    let mut out = Vec::with_capacity(2 * cfg.held_out_count);
    while out.len() < 2 * cfg.held_out_count {
        let Some(u) = gaussian_direction(b, &mut rng) else {
            continue;
        };
        let r = inst.cover.assign_region(&u)?;
        for sign in [1.0, -1.0] {
            let x = inst.labeled_point(r, &u, sign)?;
            let y = inst.target_g(&x)?;
            out.push(Example {
                x: PointConfig::new(cfg.d, x)?,
                y,
            });
        }
    }
    Ok(out)
}

pub fn mean_squared_error(model: &Model, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ex in data {
        let e = model.eval(&ex.x)? - ex.y;
        total += e * e;
    }
    Ok(total / data.len() as f64)
}

pub fn max_abs_error(model: &Model, data: &[Example]) -> Result<f64> {
    let mut worst = 0.0f64;
    for ex in data {
        worst = worst.max((model.eval(&ex.x)? - ex.y).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean minibatch loss per epoch.
    pub loss_curve: Vec<f64>,
    /// MSE over the full dataset after the last epoch.
    pub final_loss: f64,
}

/// Minibatch Adam on the mean-squared error; batches reshuffled each epoch
/// from the training stream.
pub fn train(mut model: Model, data: &[Example], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParameter(
            "batch_size must be positive".into(),
        ));
    }
    let mut rng = rng_from_seed(component_seed(cfg.seed, Stream::Training, 0));
    let mut opt = OptimizerState::new(Method::adam(), cfg.step_size)?;
    let mut params = model.params();
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let ex = &data[i];
                let (out, g) = model.value_and_param_grad(ex.x.coords())?;
                let e = out - ex.y;
                epoch_loss += e * e;
                for (acc, gi) in grad.iter_mut().zip(&g) {
                    *acc += scale * e * gi;
                }
            }
            if !epoch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: epoch_loss,
                });
            }
            opt.step(&mut params, &grad).map_err(|_| Error::Diverged {
                epoch,
                loss: epoch_loss,
            })?;
            model.set_params(&params)?;
        }
        loss_curve.push(epoch_loss / data.len() as f64);
    }
    let final_loss = mean_squared_error(&model, data)?;
    Ok(TrainOutcome {
        model,
        loss_curve,
        final_loss,
    })
}

/// Axis residual up to which a certificate counts for the theorem-over-training check.
pub const THEOREM_AXIS_RESIDUAL: f64 = 1e-8;
/// Slack between the implied bound and the measured training max error.
pub const THEOREM_SLACK: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub latent_dim: usize,
    /// `M |A|`, the Borsuk-Ulam target dimension.
    pub axis_outputs: usize,
    /// `d(n-k)`, the sphere dimension.
    pub sphere_dim: usize,
    pub below_threshold: bool,
    pub final_loss: Option<f64>,
    /// Max error over all sampled `E+` and `E-` points of the instance.
    pub train_max_error: Option<f64>,
    pub held_out_max_error: Option<f64>,
    pub certified: bool,
    pub best_residual: Option<f64>,
    pub certificate: Option<CollisionCertificate>,
    pub gap: Option<GapReport>,
    /// `train_max_error >= implied_bound - THEOREM_SLACK` for certificates
    /// with axis residual at most `THEOREM_AXIS_RESIDUAL`.
    pub theorem_consistent: Option<bool>,
    pub loss_curve: Vec<f64>,
    pub model: Option<Model>,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn implied_bound(&self) -> Option<f64> {
        self.gap.as_ref().map(|g| g.implied_bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub instance_fingerprint: String,
    pub records: Vec<SweepRecord>,
}

fn sampled_max_error(model: &Model, inst: &ObstructionInstance) -> Result<f64> {
    let mut worst = 0.0f64;
    for (set, y) in [(&inst.e_plus, 1.0), (&inst.e_minus, 0.0)] {
        for s in set {
            worst = worst.max((model.eval_flat(&s.point)? - y).abs());
        }
    }
    Ok(worst)
}

fn run_record(
    base: &TrainConfig,
    inst: &ObstructionInstance,
    search: &SearchConfig,
    rec: &mut SweepRecord,
) -> Result<()> {
    let cfg = TrainConfig {
        latent_dim: rec.latent_dim,
        ..base.clone()
    };
    let data = make_dataset(inst, &cfg)?;
    let held_out = held_out_set(inst, &cfg)?;
    let outcome = train(build_model(&cfg)?, &data, &cfg)?;
    rec.loss_curve = outcome.loss_curve;
    rec.final_loss = Some(outcome.final_loss);
    let model = outcome.model;
    let train_max = sampled_max_error(&model, inst)?;
    rec.train_max_error = Some(train_max);
    rec.held_out_max_error = Some(max_abs_error(&model, &held_out)?);

    let indexed = model.encoder().as_indexed();
    let map = BorsukUlamMap::new(&indexed, inst)?;
    let report = find_collision(&map, search)?;
    rec.best_residual = Some(report.best_residual);
    if let Some(cert) = report.certificate {
        let gap = gap_certificate(&model, inst, &cert)?;
        if cert.axis_residual <= THEOREM_AXIS_RESIDUAL {
            rec.theorem_consistent = Some(train_max >= gap.implied_bound - THEOREM_SLACK);
        }
        rec.certified = true;
        rec.certificate = Some(cert);
        rec.gap = Some(gap);
    }
    rec.model = Some(model);
    Ok(())
}

/// Train and attack one model per latent dimension. Failures are recorded
/// per row and the sweep continues.
pub fn sweep_latent_dim(
    base: &TrainConfig,
    m_values: &[usize],
    inst: &ObstructionInstance,
    search: &SearchConfig,
) -> Result<SweepResult> {
    if m_values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "latent dimensions must be sorted".into(),
        ));
    }
    check_instance(inst, base)?;
    let axis = inst.axis.len();
    let sphere_dim = inst.delta.tail_dim();
    let mut records = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let mut rec = SweepRecord {
            latent_dim: m,
            axis_outputs: m * axis,
            sphere_dim,
            below_threshold: m * axis < sphere_dim,
            final_loss: None,
            train_max_error: None,
            held_out_max_error: None,
            certified: false,
            best_residual: None,
            certificate: None,
            gap: None,
            theorem_consistent: None,
            loss_curve: Vec::new(),
            model: None,
            error: None,
        };
        if let Err(e) = run_record(base, inst, search, &mut rec) {
            rec.error = Some(e.to_string());
        }
        records.push(rec);
    }
    Ok(SweepResult {
        instance_fingerprint: inst.fingerprint(),
        records,
    })
}

/// Everything a sweep run needs; the instance and search seeds derive from `train.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub train: TrainConfig,
    pub latent_dims: Vec<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub samples_per_region: usize,
    #[serde(default)]
    pub search: SearchConfig,
}

fn default_epsilon() -> f64 {
    DeltaMap::DEFAULT_EPSILON
}

impl SweepConfig {
    pub fn instance_params(&self) -> ObstructionParams {
        let t = &self.train;
        ObstructionParams::new(
            t.d,
            t.n,
            t.k,
            self.epsilon,
            self.samples_per_region,
            component_seed(t.seed, Stream::Instance, 0),
        )
    }

    /// The search configuration with its seed derived from the global seed.
    pub fn resolved_search(&self) -> SearchConfig {
        SearchConfig {
            seed: component_seed(self.train.seed, Stream::Search, 0),
            ..self.search
        }
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.train.validate()?;
    let inst = sample_obstruction(cfg.instance_params())?;
    sweep_latent_dim(&cfg.train, &cfg.latent_dims, &inst, &cfg.resolved_search())
}

pub const SWEEP_CSV_HEADER: &str = "latent_dim,axis_outputs,sphere_dim,below_threshold,final_loss,train_max_error,held_out_max_error,certified,best_residual,implied_bound,theorem_consistent,error";

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in &result.records {
        let error = r.error.as_deref().unwrap_or("").replace(['"', ','], ";");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.latent_dim,
            r.axis_outputs,
            r.sphere_dim,
            r.below_threshold,
            opt_num(r.final_loss),
            opt_num(r.train_max_error),
            opt_num(r.held_out_max_error),
            r.certified,
            opt_num(r.best_residual),
            opt_num(r.implied_bound()),
            r.theorem_consistent
                .map(|b| b.to_string())
                .unwrap_or_default(),
            error
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (ObstructionInstance, TrainConfig) {
        let inst = sample_obstruction(ObstructionParams::new(1, 3, 1, 0.25, 40, 3)).unwrap();
        let cfg = TrainConfig {
            d: 1,
            n: 3,
            k: 1,
            latent_dim: 1,
            kind: EncoderKind::DeepSets,
            encoder_hidden: vec![4],
            decoder_hidden: vec![4],
            activation: Activation::Tanh,
            epochs: 3,
            batch_size: 16,
            step_size: 0.01,
            seed: 9,
            e_plus_count: 30,
            e_minus_count: 30,
            background_count: 10,
            held_out_count: 5,
        };
        (inst, cfg)
    }

    #[test]
    fn dataset_labels() {
        let (inst, cfg) = tiny();
        let data = make_dataset(&inst, &cfg).unwrap();
        assert_eq!(data.len(), 70);
        assert!(data[..30].iter().all(|e| e.y == 1.0));
        assert!(data[30..60].iter().all(|e| e.y == 0.0));
        assert!(data[60..].iter().all(|e| (0.0..=1.0).contains(&e.y)));
    }

    #[test]
    fn dataset_rejects_oversized_counts() {
        let (inst, mut cfg) = tiny();
        cfg.e_plus_count = 1000;
        assert!(make_dataset(&inst, &cfg).is_err());
    }

    #[test]
    fn zero_counts_rejected() {
        let (_, mut cfg) = tiny();
        cfg.background_count = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let (inst, cfg) = tiny();
        let data = make_dataset(&inst, &cfg).unwrap();
        let a = train(build_model(&cfg).unwrap(), &data, &cfg).unwrap();
        let b = train(build_model(&cfg).unwrap(), &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.loss_curve.len(), 3);
    }

    #[test]
    fn empty_sweep() {
        let (inst, cfg) = tiny();
        let res = sweep_latent_dim(&cfg, &[], &inst, &SearchConfig::default()).unwrap();
        assert!(res.records.is_empty());
    }

    #[test]
    fn unsorted_sweep_rejected() {
        let (inst, cfg) = tiny();
        assert!(sweep_latent_dim(&cfg, &[2, 1], &inst, &SearchConfig::default()).is_err());
    }

    #[test]
    fn csv_row_per_record() {
        let (inst, cfg) = tiny();
        let search = SearchConfig {
            restarts: 5,
            max_iterations: 100,
            ..SearchConfig::default()
        };
        let res = sweep_latent_dim(&cfg, &[1, 3], &inst, &search).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(res.records[0].below_threshold);
        assert!(!res.records[1].below_threshold);
    }
}

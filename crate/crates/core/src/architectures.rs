//! Sum-pooled encoders: Deep Sets, shared k-ary Janossy pooling, and the
//! indexed k-Janossy family where every ordered tuple has its own network.
//!
//! Points are flattened `x_1 .. x_n`, each of length `d`. Tuples `(i_1..i_k)`
//! are enumerated in lexicographic order; for the shared kinds the points are
//! first sorted lexicographically so that the floating-point sum does not
//! depend on the input order.

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::constructions::{lex_tuples, LabeledCubes};
use crate::error::{check_len, Error, Result};
use crate::numerics::Mlp;

/// A member network `R^{dk} -> R^M` of an encoder.
pub trait FeatureMap {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Evaluates at an input of length `input_dim()`.
    fn eval(&self, input: &[f64]) -> Vec<f64>;
    /// Gradient of `<cotangent, eval(input)>` with respect to the input.
    fn input_vjp(&self, input: &[f64], cotangent: &[f64]) -> Vec<f64>;
    fn num_params(&self) -> usize;
    fn is_affine(&self) -> bool;
    /// Bytes identifying the map for certificate fingerprints.
    fn fingerprint_bytes(&self) -> Vec<u8>;
}

impl FeatureMap for Mlp {
    fn input_dim(&self) -> usize {
        Mlp::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        Mlp::output_dim(self)
    }

    fn eval(&self, input: &[f64]) -> Vec<f64> {
        self.forward_unchecked(input)
    }

    fn input_vjp(&self, input: &[f64], cotangent: &[f64]) -> Vec<f64> {
        self.vjp_accumulate(input, cotangent, None)
    }

    fn num_params(&self) -> usize {
        Mlp::num_params(self)
    }

    fn is_affine(&self) -> bool {
        Mlp::is_affine(self)
    }

    fn fingerprint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for w in self.widths() {
            out.extend_from_slice(&(*w as u64).to_le_bytes());
        }
        out.extend_from_slice(format!("{:?}", self.activation()).as_bytes());
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }
}

/// `z -> inner(offset + scale * z)` applied slot-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Precomposed<F> {
    pub inner: F,
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
}

impl<F: FeatureMap> FeatureMap for Precomposed<F> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn eval(&self, input: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = input
            .iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(x, (s, o))| o + s * x)
            .collect();
        self.inner.eval(&z)
    }

    fn input_vjp(&self, input: &[f64], cotangent: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = input
            .iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(x, (s, o))| o + s * x)
            .collect();
        self.inner
            .input_vjp(&z, cotangent)
            .into_iter()
            .zip(&self.scale)
            .map(|(g, s)| g * s)
            .collect()
    }

    fn num_params(&self) -> usize {
        self.inner.num_params()
    }

    fn is_affine(&self) -> bool {
        self.inner.is_affine()
    }

    fn fingerprint_bytes(&self) -> Vec<u8> {
        let mut out = self.inner.fingerprint_bytes();
        for v in self.scale.iter().chain(&self.offset) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// An ordered configuration of `n` points in `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfig {
    d: usize,
    coords: Vec<f64>,
}

impl PointConfig {
    pub fn new(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d == 0 || coords.is_empty() || !coords.len().is_multiple_of(d) {
            return Err(Error::InvalidParameter(format!(
                "{} coordinates do not split into points of dimension {d}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidParameter(
                "point coordinates must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { d, coords })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    /// Reorders points so that point `i` of the result is `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_len("permutation", self.n(), perm.len())?;
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
        }
        let coords = perm
            .iter()
            .flat_map(|&p| self.point(p).iter().copied())
            .collect();
        Ok(Self { d: self.d, coords })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    DeepSets,
    SharedJanossy,
    IndexedJanossy,
}

impl EncoderKind {
    pub fn is_shared(self) -> bool {
        !matches!(self, EncoderKind::IndexedJanossy)
    }
}

/// Latent map `x -> sum over ordered k-tuples of member(x_{i_1}, .., x_{i_k})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Encoder<F = Mlp> {
    kind: EncoderKind,
    d: usize,
    n: usize,
    k: usize,
    latent_dim: usize,
    /// One network for shared kinds, `n^k` in tuple order for the indexed kind.
    members: Vec<F>,
}

#[derive(Deserialize)]
struct EncoderRecord<F> {
    kind: EncoderKind,
    d: usize,
    n: usize,
    k: usize,
    members: Vec<F>,
}

impl<'de, F: FeatureMap + Deserialize<'de>> Deserialize<'de> for Encoder<F> {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rec = EncoderRecord::<F>::deserialize(de)?;
        Encoder::from_parts(rec.kind, rec.d, rec.n, rec.k, rec.members)
            .map_err(serde::de::Error::custom)
    }
}

impl<F: FeatureMap> Encoder<F> {
    pub fn from_parts(
        kind: EncoderKind,
        d: usize,
        n: usize,
        k: usize,
        members: Vec<F>,
    ) -> Result<Self> {
        if d == 0 || n == 0 || k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "need d, n >= 1 and 1 <= k <= n, got d={d}, n={n}, k={k}"
            )));
        }
        if kind == EncoderKind::DeepSets && k != 1 {
            return Err(Error::KindMismatch("deep sets encoders have k = 1".into()));
        }
        let expected = if kind.is_shared() { 1 } else { n.pow(k as u32) };
        check_len("encoder member count", expected, members.len())?;
        let latent_dim = members[0].output_dim();
        if latent_dim == 0 {
            return Err(Error::InvalidParameter(
                "latent dimension must be positive".into(),
            ));
        }
        for m in &members {
            check_len("member input width", d * k, m.input_dim())?;
            check_len("member output width", latent_dim, m.output_dim())?;
        }
        Ok(Self {
            kind,
            d,
            n,
            k,
            latent_dim,
            members,
        })
    }

    pub fn deep_sets(d: usize, n: usize, phi: F) -> Result<Self> {
        Self::from_parts(EncoderKind::DeepSets, d, n, 1, vec![phi])
    }

    pub fn shared_janossy(d: usize, n: usize, k: usize, phi: F) -> Result<Self> {
        Self::from_parts(EncoderKind::SharedJanossy, d, n, k, vec![phi])
    }

    /// `members[t]` is the network of the `t`-th ordered tuple in lexicographic order.
    pub fn indexed(d: usize, n: usize, k: usize, members: Vec<F>) -> Result<Self> {
        Self::from_parts(EncoderKind::IndexedJanossy, d, n, k, members)
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn members(&self) -> &[F] {
        &self.members
    }

    pub(crate) fn members_mut(&mut self) -> &mut [F] {
        &mut self.members
    }

    pub fn num_tuples(&self) -> usize {
        self.n.pow(self.k as u32)
    }

    /// Network applied to the `t`-th tuple.
    pub fn member(&self, t: usize) -> &F {
        if self.kind.is_shared() {
            &self.members[0]
        } else {
            &self.members[t]
        }
    }

    /// Total scalar parameters; the indexed kind counts each of its `n^k` networks.
    pub fn count_parameters(&self) -> usize {
        self.members.iter().map(F::num_params).sum()
    }

    pub fn is_affine(&self) -> bool {
        self.members.iter().all(F::is_affine)
    }

    /// Trivial indexed embedding `phi_I = phi` of a shared encoder.
    pub fn as_indexed(&self) -> Encoder<F>
    where
        F: Clone,
    {
        let members = (0..self.num_tuples())
            .map(|t| self.member(t).clone())
            .collect();
        Encoder {
            kind: EncoderKind::IndexedJanossy,
            d: self.d,
            n: self.n,
            k: self.k,
            latent_dim: self.latent_dim,
            members,
        }
    }

    /// Order in which points are visited; sorted for the shared kinds.
    fn point_order(&self, x: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        if self.kind.is_shared() {
            let d = self.d;
            order.sort_by(|&a, &b| {
                let pa = &x[a * d..(a + 1) * d];
                let pb = &x[b * d..(b + 1) * d];
                pa.iter()
                    .zip(pb)
                    .map(|(u, v)| u.total_cmp(v))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        }
        order
    }

    /// Visits every ordered tuple with its member index and gathered input.
    fn for_each_tuple(&self, x: &[f64], mut f: impl FnMut(usize, &[usize], &[f64])) {
        let order = self.point_order(x);
        let d = self.d;
        let mut input = vec![0.0; d * self.k];
        let mut points = vec![0; self.k];
        for (t, tuple) in lex_tuples(self.n, self.k).into_iter().enumerate() {
            for (slot, &i) in tuple.iter().enumerate() {
                let p = order[i];
                points[slot] = p;
                input[slot * d..(slot + 1) * d].copy_from_slice(&x[p * d..(p + 1) * d]);
            }
            // for shared kinds the member index is irrelevant
            f(t, &points, &input);
        }
    }

    /// Latent code of a flattened configuration.
    pub fn encode_flat(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("encoder input", self.d * self.n, x.len())?;
        let mut acc = vec![0.0; self.latent_dim];
        self.for_each_tuple(x, |t, _, input| {
            for (a, v) in acc.iter_mut().zip(self.member(t).eval(input)) {
                *a += v;
            }
        });
        if acc.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoder output"));
        }
        Ok(acc)
    }

    pub fn encode(&self, x: &PointConfig) -> Result<Vec<f64>> {
        check_len("point dimension", self.d, x.d())?;
        self.encode_flat(x.coords())
    }

    /// Gradient of `<cotangent, encode(x)>` with respect to the flattened input.
    pub fn encode_input_vjp(&self, x: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        check_len("encoder input", self.d * self.n, x.len())?;
        check_len("encoder cotangent", self.latent_dim, cotangent.len())?;
        let d = self.d;
        let mut grad = vec![0.0; x.len()];
        self.for_each_tuple(x, |t, points, input| {
            let g = self.member(t).input_vjp(input, cotangent);
            for (slot, &p) in points.iter().enumerate() {
                for c in 0..d {
                    grad[p * d + c] += g[slot * d + c];
                }
            }
        });
        Ok(grad)
    }

    /// SHA-256 over the dimensions and the network of every ordered tuple, so a
    /// shared encoder and its indexed embedding share a fingerprint.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.d, self.n, self.k, self.latent_dim] {
            h.update((v as u64).to_le_bytes());
        }
        let shared = self
            .kind
            .is_shared()
            .then(|| self.members[0].fingerprint_bytes());
        for t in 0..self.num_tuples() {
            match &shared {
                Some(bytes) => h.update(bytes),
                None => h.update(self.members[t].fingerprint_bytes()),
            }
        }
        hex::encode(h.finalize())
    }
}

impl Encoder<Mlp> {
    /// Adds the parameter gradient of `<cotangent, encode(x)>` into `acc`,
    /// laid out as the concatenated parameters of `members()`.
    pub fn accumulate_param_vjp(
        &self,
        x: &[f64],
        cotangent: &[f64],
        acc: &mut [f64],
    ) -> Result<()> {
        check_len("encoder input", self.d * self.n, x.len())?;
        check_len("encoder cotangent", self.latent_dim, cotangent.len())?;
        check_len(
            "encoder parameter gradient",
            self.count_parameters(),
            acc.len(),
        )?;
        let per = self.members[0].num_params();
        let shared = self.kind.is_shared();
        self.for_each_tuple(x, |t, _, input| {
            let (net, slot) = if shared {
                (&self.members[0], 0)
            } else {
                (&self.members[t], t)
            };
            let range = if shared {
                0..per
            } else {
                slot * per..(slot + 1) * per
            };
            net.vjp_accumulate(input, cotangent, Some(&mut acc[range]));
        });
        Ok(())
    }

    pub fn params(&self) -> Vec<f64> {
        self.members.iter().flat_map(Mlp::params).collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("encoder parameters", self.count_parameters(), params.len())?;
        let mut offset = 0;
        for m in self.members_mut() {
            let len = m.num_params();
            m.set_params(&params[offset..offset + len])?;
            offset += len;
        }
        Ok(())
    }
}

/// Encoder plus scalar decoder `rho: R^M -> R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct Model {
    encoder: Encoder<Mlp>,
    decoder: Mlp,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    encoder: Encoder<Mlp>,
    decoder: Mlp,
}

impl TryFrom<ModelRecord> for Model {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        Model::new(r.encoder, r.decoder)
    }
}

impl From<Model> for ModelRecord {
    fn from(m: Model) -> Self {
        ModelRecord {
            encoder: m.encoder,
            decoder: m.decoder,
        }
    }
}

impl Model {
    pub fn new(encoder: Encoder<Mlp>, decoder: Mlp) -> Result<Self> {
        check_len(
            "decoder input width",
            encoder.latent_dim(),
            decoder.input_dim(),
        )?;
        check_len("decoder output width", 1, decoder.output_dim())?;
        Ok(Self { encoder, decoder })
    }

    pub fn encoder(&self) -> &Encoder<Mlp> {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn eval(&self, x: &PointConfig) -> Result<f64> {
        check_len("point dimension", self.encoder.d(), x.d())?;
        self.eval_flat(x.coords())
    }

    pub fn eval_flat(&self, x: &[f64]) -> Result<f64> {
        let z = self.encoder.encode_flat(x)?;
        Ok(self.decoder.forward(&z)?[0])
    }

    /// Flat parameters: encoder members followed by the decoder.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    pub fn num_params(&self) -> usize {
        self.encoder.count_parameters() + self.decoder.num_params()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("model parameters", self.num_params(), params.len())?;
        let split = self.encoder.count_parameters();
        self.encoder.set_params(&params[..split])?;
        self.decoder.set_params(&params[split..])
    }

    /// Output and parameter gradient at one configuration.
    pub fn value_and_param_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let z = self.encoder.encode_flat(x)?;
        let out = self.decoder.forward(&z)?[0];
        let dec = self.decoder.vjp(&z, &[1.0])?;
        let mut grad = vec![0.0; self.num_params()];
        let split = self.encoder.count_parameters();
        self.encoder
            .accumulate_param_vjp(x, &dec.input, &mut grad[..split])?;
        grad[split..].copy_from_slice(&dec.params);
        Ok((out, grad))
    }
}

/// Shared encoder restricted to the labeled copy `L`: member `I` is
/// `phi(T_{i_1} z_1, ..., T_{i_k} z_k)`.
pub fn restrict_to_labeled_copy<F: FeatureMap + Clone>(
    shared: &Encoder<F>,
    cubes: &LabeledCubes,
) -> Result<Encoder<Precomposed<F>>> {
    if !shared.kind().is_shared() {
        return Err(Error::KindMismatch(
            "restriction to a labeled copy needs a shared encoder".into(),
        ));
    }
    check_len("labeled cube dimension", shared.d(), cubes.d())?;
    check_len("labeled cube count", shared.n(), cubes.n())?;
    let phi = &shared.members()[0];
    let members = lex_tuples(shared.n(), shared.k())
        .into_iter()
        .map(|tuple| {
            let mut scale = Vec::with_capacity(shared.d() * shared.k());
            let mut offset = Vec::with_capacity(shared.d() * shared.k());
            for &i in &tuple {
                let (s, o) = cubes.affine(i);
                scale.extend(s);
                offset.extend(o);
            }
            Precomposed {
                inner: phi.clone(),
                scale,
                offset,
            }
        })
        .collect();
    Encoder::indexed(shared.d(), shared.n(), shared.k(), members)
}

/// Any map `K^n -> R^M` on flattened configurations.
pub trait LatentMap {
    /// Point dimension `d`.
    fn point_dim(&self) -> usize;
    /// Number of points `n`.
    fn num_points(&self) -> usize;
    fn latent_dim(&self) -> usize;
    fn latent(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Whether the map is affine in its input.
    fn is_affine(&self) -> bool {
        false
    }

    /// Identity of the map for certificates, when it has one.
    fn fingerprint(&self) -> Option<String> {
        None
    }
}

/// A latent map with input gradients.
pub trait DifferentiableLatentMap: LatentMap {
    fn latent_vjp(&self, x: &[f64], cotangent: &[f64]) -> Result<Vec<f64>>;
}

impl<F: FeatureMap> LatentMap for Encoder<F> {
    fn point_dim(&self) -> usize {
        self.d
    }

    fn num_points(&self) -> usize {
        self.n
    }

    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn latent(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encode_flat(x)
    }

    fn is_affine(&self) -> bool {
        Encoder::is_affine(self)
    }

    fn fingerprint(&self) -> Option<String> {
        Some(Encoder::fingerprint(self))
    }
}

impl<F: FeatureMap> DifferentiableLatentMap for Encoder<F> {
    fn latent_vjp(&self, x: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        self.encode_input_vjp(x, cotangent)
    }
}

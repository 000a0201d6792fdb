//! Gibbs samplers over `(z, h, v[, y])` and over `(z, y)` with `v` clamped,
//! plus CD and PCD negative phases.
//!
//! Every sampled `z` comes from the full posterior and is clamped to `l + 1`.
//! Units past `l` have zero parameters, so the clamp never changes the
//! conditionals of `v` or `y`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{sigmoid, softmax};
use crate::model::{Label, ModelError, ModelParams, ZPosterior};
use crate::rng::{kind_rng, StreamKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("number of Gibbs steps must be at least 1")]
    ZeroSteps,
    #[error("{chains} chains given for a minibatch of {batch}")]
    SizeMismatch { chains: usize, batch: usize },
}

/// Persistent fantasy particle. `y` is present when the chain samples the
/// joint `p(v, y)` of a labeled model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GibbsChainState {
    pub v: Vec<u8>,
    pub y: Option<Label>,
    pub z: usize,
    pub stream_id: u64,
}

/// State of the `(z, y)` chain with `v` clamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelChainState {
    pub y: Label,
    pub z: usize,
}

/// Negative-phase statistic for one example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSample {
    pub v: Vec<u8>,
    pub y: Option<Label>,
    pub z: usize,
}

pub fn sample_z_given_v<R: Rng + ?Sized>(
    params: &ModelParams,
    v: &[u8],
    y: Option<Label>,
    rng: &mut R,
) -> Result<usize, ModelError> {
    Ok(params.z_posterior(v, y)?.sample(rng))
}

#[inline]
fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u8 {
    u8::from(rng.random::<f64>() < p)
}

fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// `h ~ p(h | v, z[, y])` for the materialized units `1 ..= min(z, l)`.
/// Units past `l` carry no weights and are not drawn.
pub fn sample_hidden<R: Rng + ?Sized>(
    params: &ModelParams,
    v: &[u8],
    y: Option<Label>,
    z: usize,
    rng: &mut R,
) -> Vec<u8> {
    let a = params.activations(v, y);
    a[..z.min(params.units())]
        .iter()
        .map(|&ai| bernoulli(sigmoid(ai), rng))
        .collect()
}

pub fn sample_visible<R: Rng + ?Sized>(
    params: &ModelParams,
    h: &[u8],
    z: usize,
    rng: &mut R,
) -> Vec<u8> {
    params
        .visible_logits(h, z)
        .into_iter()
        .map(|x| bernoulli(sigmoid(x), rng))
        .collect()
}

pub fn sample_label<R: Rng + ?Sized>(
    params: &ModelParams,
    h: &[u8],
    z: usize,
    rng: &mut R,
) -> Label {
    let probs = softmax(&params.label_logits(h, z));
    Label::from_index(categorical(&probs, rng))
}

/// One sweep `z -> h -> v (-> y)`.
pub fn gibbs_step_generative<R: Rng + ?Sized>(
    params: &ModelParams,
    chain: &GibbsChainState,
    rng: &mut R,
) -> Result<GibbsChainState, ModelError> {
    params.check_visible(&chain.v)?;
    params.check_label(chain.y)?;
    let z = params.z_posterior_unchecked(&chain.v, chain.y).sample(rng);
    let h = sample_hidden(params, &chain.v, chain.y, z, rng);
    let v = sample_visible(params, &h, z, rng);
    let y = chain.y.map(|_| sample_label(params, &h, z, rng));
    Ok(GibbsChainState {
        v,
        y,
        z,
        stream_id: chain.stream_id,
    })
}

/// `k` sweeps of `h -> v (-> y) -> z` starting from `(v, y, z)`.
///
/// The first sweep reuses the given `z`; the returned `z` is drawn from
/// `p(z | v_neg[, y_neg])` after the last sweep.
pub fn gibbs_sweeps<R: Rng + ?Sized>(
    params: &ModelParams,
    v: &[u8],
    y: Option<Label>,
    z: usize,
    k: usize,
    rng: &mut R,
) -> NegativeSample {
    let mut v = v.to_vec();
    let mut y = y;
    let mut z = z;
    for _ in 0..k {
        let h = sample_hidden(params, &v, y, z, rng);
        v = sample_visible(params, &h, z, rng);
        if y.is_some() {
            y = Some(sample_label(params, &h, z, rng));
        }
        z = params.z_posterior_unchecked(&v, y).sample(rng);
    }
    NegativeSample { v, y, z }
}

/// `p(y | v, z)`, read off the per-class cumulative free energies.
fn label_given_z(posts: &[ZPosterior], z: usize) -> Vec<f64> {
    let logits: Vec<f64> = posts.iter().map(|p| p.head_log_weights()[z - 1]).collect();
    softmax(&logits)
}

/// One step of the `(z, y)` chain from per-class posteriors of a fixed `v`.
pub fn label_chain_step<R: Rng + ?Sized>(
    posts: &[ZPosterior],
    state: LabelChainState,
    rng: &mut R,
) -> LabelChainState {
    let z = posts[state.y.index()].sample(rng);
    let y = Label::from_index(categorical(&label_given_z(posts, z), rng));
    LabelChainState { y, z }
}

/// `z ~ p(z | v, y)` then `y ~ p(y | v, z)`.
pub fn gibbs_step_discriminative<R: Rng + ?Sized>(
    params: &ModelParams,
    v: &[u8],
    state: LabelChainState,
    rng: &mut R,
) -> Result<LabelChainState, ModelError> {
    params.check_label(Some(state.y))?;
    let posts = params.label_posteriors(v)?;
    Ok(label_chain_step(&posts, state, rng))
}

/// One CD start point: a data vector, its label if the joint is modeled, and
/// the positive-phase cutoff.
#[derive(Debug, Clone, Copy)]
pub struct ChainStart<'a> {
    pub v: &'a [u8],
    pub y: Option<Label>,
    pub z: usize,
}

/// CD-`k` from the data. Example `n` draws from its own stream
/// `(seed, step, n)`.
pub fn run_cd(
    params: &ModelParams,
    starts: &[ChainStart<'_>],
    k: usize,
    seed: u64,
    step: u64,
) -> Result<Vec<NegativeSample>, InferenceError> {
    if k == 0 {
        return Err(InferenceError::ZeroSteps);
    }
    starts
        .iter()
        .enumerate()
        .map(|(n, s)| {
            params.check_visible(s.v)?;
            params.check_label(s.y)?;
            let mut rng = kind_rng(seed, step, StreamKind::Example, n as u64);
            Ok(gibbs_sweeps(params, s.v, s.y, s.z, k, &mut rng))
        })
        .collect()
}

/// Fantasy particles that survive across updates. Only `v` (and `y`) carry
/// over; `z` is redrawn at the start of every negative phase because the
/// unit order may have changed since the last one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersistentChains {
    chains: Vec<GibbsChainState>,
}

impl PersistentChains {
    /// `n` chains with uniformly random visible bits (and labels).
    pub fn random(n: usize, visible: usize, classes: usize, seed: u64) -> Self {
        let chains = (0..n)
            .map(|c| {
                let mut rng = kind_rng(seed, 0, StreamKind::Init, c as u64);
                let v = (0..visible).map(|_| bernoulli(0.5, &mut rng)).collect();
                let y = (classes > 0).then(|| Label::from_index(rng.random_range(0..classes)));
                GibbsChainState {
                    v,
                    y,
                    z: 1,
                    stream_id: c as u64,
                }
            })
            .collect();
        Self { chains }
    }

    pub fn from_states(chains: Vec<GibbsChainState>) -> Self {
        Self { chains }
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn states(&self) -> &[GibbsChainState] {
        &self.chains
    }
}

/// PCD-`k`: advances every persistent chain and returns its new state.
pub fn run_pcd(
    params: &ModelParams,
    chains: &mut PersistentChains,
    k: usize,
    seed: u64,
    step: u64,
) -> Result<Vec<NegativeSample>, InferenceError> {
    if k == 0 {
        return Err(InferenceError::ZeroSteps);
    }
    let mut out = Vec::with_capacity(chains.len());
    for chain in &mut chains.chains {
        params.check_visible(&chain.v)?;
        params.check_label(chain.y)?;
        let mut rng = kind_rng(seed, step, StreamKind::PersistentChain, chain.stream_id);
        let z0 = params.z_posterior_unchecked(&chain.v, chain.y).sample(&mut rng);
        let neg = gibbs_sweeps(params, &chain.v, chain.y, z0, k, &mut rng);
        chain.v.clone_from(&neg.v);
        chain.y = neg.y;
        chain.z = neg.z;
        out.push(neg);
    }
    Ok(out)
}

/// Pairs `n` negative samples with a minibatch of `batch` examples.
pub fn check_chain_count(chains: usize, batch: usize) -> Result<(), InferenceError> {
    if chains != batch {
        return Err(InferenceError::SizeMismatch { chains, batch });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PenaltyConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seeded(d: usize, c: usize, l: usize, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams::random_uniform(d, c, l, 1.0, PenaltyConfig::default(), &mut rng).unwrap()
    }

    #[test]
    fn zero_model_z_draws_follow_clamped_geometric() {
        let p = ModelParams::zeros(2, 0, 3, PenaltyConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_z_given_v(&p, &[0, 1], None, &mut rng).unwrap() - 1] += 1;
        }
        let r = 2f64.powf(-0.01);
        let expected = [1.0 - r, (1.0 - r) * r, (1.0 - r) * r * r, r.powi(3)];
        let chi2: f64 = counts
            .iter()
            .zip(expected)
            .map(|(&c, e)| {
                let e = e * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 3 degrees of freedom; 11.34 is the 0.01 upper quantile.
        assert!(chi2 < 11.34, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn concentrated_posterior_never_drops_below_its_mode() {
        let mut p = ModelParams::zeros(2, 0, 3, PenaltyConfig::default()).unwrap();
        p.hidden_bias_mut()[1] = 60.0;
        p.hidden_bias_mut()[2] = -60.0;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            assert!(sample_z_given_v(&p, &[1, 1], None, &mut rng).unwrap() >= 2);
        }
    }

    #[test]
    fn seeded_z_frequencies_match_posterior() {
        let p = seeded(3, 0, 3, 6);
        let v = [1, 0, 1];
        let post = p.z_posterior(&v, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 50_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[post.sample(&mut rng) - 1] += 1;
        }
        for z in 1..=4 {
            let pz = if z == 4 {
                post.prob_at_least(4)
            } else {
                post.prob(z)
            };
            let sd = (pz * (1.0 - pz) / n as f64).sqrt();
            let f = counts[z - 1] as f64 / n as f64;
            assert!((f - pz).abs() < 3.0 * sd + 1e-12, "z={z} f={f} p={pz}");
        }
    }

    #[test]
    fn zero_model_generative_chain_is_uniform() {
        let p = ModelParams::zeros(4, 0, 2, PenaltyConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut chain = GibbsChainState {
            v: vec![0; 4],
            y: None,
            z: 1,
            stream_id: 0,
        };
        let n = 100_000;
        let mut ones = [0usize; 4];
        for _ in 0..n {
            chain = gibbs_step_generative(&p, &chain, &mut rng).unwrap();
            assert!(chain.z <= 3);
            for (o, &b) in ones.iter_mut().zip(&chain.v) {
                *o += b as usize;
            }
        }
        for o in ones {
            assert!((o as f64 / n as f64 - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn zero_model_label_chain_is_uniform() {
        let p = ModelParams::zeros(3, 3, 2, PenaltyConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut st = LabelChainState {
            y: Label::new(0, 3).unwrap(),
            z: 1,
        };
        let mut counts = [0usize; 3];
        let n = 30_000;
        for _ in 0..n {
            st = gibbs_step_discriminative(&p, &[1, 0, 1], st, &mut rng).unwrap();
            assert!(st.z <= 3);
            counts[st.y.index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.015);
        }
    }

    #[test]
    fn cd_one_on_zero_model_gives_fair_bits() {
        let p = ModelParams::zeros(5, 0, 2, PenaltyConfig::default()).unwrap();
        let v = [1u8, 1, 0, 0, 1];
        let starts: Vec<ChainStart> = (0..200).map(|_| ChainStart { v: &v, y: None, z: 1 }).collect();
        let mut ones = 0usize;
        let mut total = 0usize;
        for step in 0..50 {
            for neg in run_cd(&p, &starts, 1, 3, step).unwrap() {
                ones += neg.v.iter().map(|&b| b as usize).sum::<usize>();
                total += neg.v.len();
            }
        }
        assert!((ones as f64 / total as f64 - 0.5).abs() < 0.01);
        assert_eq!(run_cd(&p, &starts, 0, 3, 0).unwrap_err(), InferenceError::ZeroSteps);
    }

    #[test]
    fn pcd_is_deterministic_and_persists() {
        let p = seeded(4, 2, 3, 1);
        let mut a = PersistentChains::random(7, 4, 2, 9);
        let mut b = a.clone();
        let na = run_pcd(&p, &mut a, 3, 5, 11).unwrap();
        let nb = run_pcd(&p, &mut b, 3, 5, 11).unwrap();
        assert_eq!(na, nb);
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        assert_eq!(a.states()[2].v, na[2].v);
        assert!(na.iter().all(|s| s.z <= 4 && s.y.is_some()));
    }

    #[test]
    fn chain_count_mismatch_is_reported() {
        assert_eq!(
            check_chain_count(3, 4).unwrap_err(),
            InferenceError::SizeMismatch { chains: 3, batch: 4 }
        );
    }
}

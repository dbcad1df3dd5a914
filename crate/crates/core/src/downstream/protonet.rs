//! Prototypical-network meta-learning: a linear projection into a metric
//! space, class prototypes as support means, and softmax over negative
//! squared Euclidean distances.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::RngCore;

use super::{EncodedBatch, StimulusIndex, StimulusMode, StimulusReport, StimulusTaskSpec};
use crate::error::{Error, Result};
use crate::gaze::Scanpath;
use crate::math::{self, Mat};
use crate::model::ObfModel;
use crate::nn::{Builder, Linear, ParamStore};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng;

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Per-class means of `support`, whose rows are grouped by class
/// (`shots` consecutive rows per class).
pub fn prototypes(support: &Mat, shots: usize) -> Mat {
    let ways = support.rows / shots;
    let mut out = Mat::zeros(ways, support.cols);
    for c in 0..ways {
        for s in 0..shots {
            math::axpy(
                1.0 / shots as f64,
                support.row(c * shots + s),
                out.row_mut(c),
            );
        }
    }
    out
}

/// Index of the closest prototype; ties go to the lowest index.
pub fn nearest_prototype(protos: &Mat, query: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..protos.rows {
        let d = squared_distance(protos.row(c), query);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Episode loss: mean cross-entropy of softmax(−‖q − proto‖²) over the
/// queries (rows grouped by class, `queries` per class). Returns the loss
/// and the gradients with respect to the support and query rows.
pub fn episode_loss(support: &Mat, shots: usize, query: &Mat, queries: usize) -> (f64, Mat, Mat) {
    let protos = prototypes(support, shots);
    let ways = protos.rows;
    let nq = query.rows as f64;
    let mut d_support = Mat::zeros(support.rows, support.cols);
    let mut d_query = Mat::zeros(query.rows, query.cols);
    let mut d_protos = Mat::zeros(ways, support.cols);
    let mut loss = 0.0;
    let mut probs = vec![0.0; ways];
    for i in 0..query.rows {
        let q = query.row(i);
        let target = i / queries;
        for (c, p) in probs.iter_mut().enumerate() {
            *p = -squared_distance(q, protos.row(c));
        }
        super::softmax_in_place(&mut probs);
        loss -= math::ln(probs[target].max(1e-300));
        for c in 0..ways {
            // d loss / d logit, and logit = −‖q − proto‖²
            let dl = (probs[c] - if c == target { 1.0 } else { 0.0 }) / nq;
            let proto = protos.row(c);
            for j in 0..q.len() {
                let diff = q[j] - proto[j];
                d_query.row_mut(i)[j] -= 2.0 * dl * diff;
                d_protos.row_mut(c)[j] += 2.0 * dl * diff;
            }
        }
    }
    for c in 0..ways {
        for s in 0..shots {
            math::axpy(
                1.0 / shots as f64,
                d_protos.row(c),
                d_support.row_mut(c * shots + s),
            );
        }
    }
    (loss / nq, d_support, d_query)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtoConfig {
    pub dim: usize,
    pub epochs: usize,
    pub iterations: usize,
    pub lr: f64,
    pub fine_tune: bool,
    pub seed: u64,
}

impl Default for ProtoConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            epochs: 100,
            iterations: 100,
            lr: 1e-3,
            fine_tune: false,
            seed: 0,
        }
    }
}

/// Encoder (possibly fine-tuned copy) and projection head.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtoNet {
    pub model: ObfModel,
    pub params: ParamStore,
    proj: Linear,
}

impl ProtoNet {
    pub fn new(model: &ObfModel, dim: usize, seed: u64) -> Self {
        let mut params = ParamStore::default();
        let proj = Linear::new(
            &mut Builder::new(&mut params, seed),
            "proj",
            model.embedding_dim(),
            dim,
        );
        Self {
            model: model.clone(),
            params,
            proj,
        }
    }

    pub fn project_rows(&self, emb: &Mat) -> Mat {
        self.proj.forward_rows(&self.params.values, emb)
    }

    pub fn project(&self, points: &[[f64; 2]]) -> Result<Vec<f64>> {
        let e = self.model.encode(points)?;
        Ok(self.project_rows(&Mat::from_vec(1, e.len(), e)).data)
    }
}

/// Stimulus indices (into [`StimulusIndex::stimuli`]) for meta-training and
/// meta-testing; the two sets are disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn meta_split(index: &StimulusIndex, spec: &StimulusTaskSpec, seed: u64) -> Result<MetaSplit> {
    let n = index.stimuli.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::derived(seed, "meta-split"));
    let reserve = spec.meta_train_stimuli.min(n);
    let test = order.split_off(reserve);
    if test.len() < spec.ways {
        return Err(Error::Episode(format!(
            "meta-testing set has {} stimuli after reserving {reserve} for meta-training, {}-way needs {}",
            test.len(),
            spec.ways,
            spec.ways
        )));
    }
    if order.len() < spec.ways {
        return Err(Error::Episode(format!(
            "{} meta-training stimuli, {}-way needs {}",
            order.len(),
            spec.ways,
            spec.ways
        )));
    }
    Ok(MetaSplit { train: order, test })
}

/// Corpus indices of one episode, grouped by class.
struct Episode {
    support: Vec<usize>,
    query: Vec<usize>,
}

fn sample_episode<R: RngCore + ?Sized>(
    index: &StimulusIndex,
    pool: &[usize],
    spec: &StimulusTaskSpec,
    rng: &mut R,
) -> Result<Episode> {
    let per_class = spec.shots + spec.queries;
    let eligible: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|&s| index.stimuli[s].users.len() >= per_class)
        .collect();
    if eligible.len() < spec.ways {
        return Err(Error::Episode(format!(
            "{} stimuli have {per_class} participants, {} needed",
            eligible.len(),
            spec.ways
        )));
    }
    let classes: Vec<usize> = eligible.choose_multiple(rng, spec.ways).copied().collect();
    let mut ep = Episode {
        support: Vec::with_capacity(spec.ways * spec.shots),
        query: Vec::with_capacity(spec.ways * spec.queries),
    };
    for &s in &classes {
        let users: Vec<usize> = index.stimuli[s]
            .users
            .choose_multiple(rng, per_class)
            .map(|u| u.1)
            .collect();
        ep.support.extend_from_slice(&users[..spec.shots]);
        ep.query.extend_from_slice(&users[spec.shots..]);
    }
    Ok(ep)
}

/// Frozen-encoder embeddings of every scanpath a pool can draw from.
fn pool_embeddings(
    model: &ObfModel,
    corpus: &[Scanpath],
    index: &StimulusIndex,
    pool: &[usize],
) -> Result<BTreeMap<usize, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for &s in pool {
        for &(_, i) in &index.stimuli[s].users {
            out.insert(i, model.encode(&corpus[i].points)?);
        }
    }
    Ok(out)
}

fn gather(cache: &BTreeMap<usize, Vec<f64>>, idx: &[usize], dim: usize) -> Mat {
    let mut m = Mat::zeros(idx.len(), dim);
    for (r, i) in idx.iter().enumerate() {
        m.row_mut(r).copy_from_slice(&cache[i]);
    }
    m
}

/// Episodic training on the stimuli in `pool`.
pub fn protonet_train(
    model: &ObfModel,
    corpus: &[Scanpath],
    index: &StimulusIndex,
    pool: &[usize],
    spec: &StimulusTaskSpec,
    cfg: &ProtoConfig,
) -> Result<ProtoNet> {
    spec.validate()?;
    let mut net = ProtoNet::new(model, cfg.dim, cfg.seed);
    let mut rng = rng::derived(cfg.seed, "meta-train");
    let frozen = if cfg.fine_tune {
        None
    } else {
        Some(pool_embeddings(model, corpus, index, pool)?)
    };
    let dim = model.embedding_dim();
    let mut head_opt = Optimizer::new(OptimizerKind::Adam, net.params.len());
    let mut enc_opt = Optimizer::new(
        OptimizerKind::Adam,
        if cfg.fine_tune { model.params.len() } else { 0 },
    );
    let mut g_head = vec![0.0; net.params.len()];
    let mut g_enc = if cfg.fine_tune {
        model.params.zeros_like()
    } else {
        Vec::new()
    };
    for _ in 0..cfg.epochs * cfg.iterations {
        let ep = sample_episode(index, pool, spec, &mut rng)?;
        let all: Vec<usize> = ep.support.iter().chain(&ep.query).copied().collect();
        let (emb, encoded) = match &frozen {
            Some(cache) => (gather(cache, &all, dim), None),
            None => {
                let pts: Vec<&[[f64; 2]]> =
                    all.iter().map(|&i| corpus[i].points.as_slice()).collect();
                let enc = EncodedBatch::new(&net.model, &pts)?;
                (enc.emb.clone(), Some(enc))
            }
        };
        let z = net.project_rows(&emb);
        let ns = ep.support.len();
        let support = Mat::from_vec(ns, cfg.dim, z.data[..ns * cfg.dim].to_vec());
        let query = Mat::from_vec(all.len() - ns, cfg.dim, z.data[ns * cfg.dim..].to_vec());
        let (loss, ds, dq) = episode_loss(&support, spec.shots, &query, spec.queries);
        if !loss.is_finite() {
            return Err(Error::NonFinite("episode loss"));
        }
        let mut dz = ds.data;
        dz.extend_from_slice(&dq.data);
        let dz = Mat::from_vec(all.len(), cfg.dim, dz);
        g_head.iter_mut().for_each(|g| *g = 0.0);
        let demb = net.proj.backward_rows(
            &net.params.values,
            &emb,
            &dz,
            &mut g_head,
            encoded.is_some(),
        );
        head_opt.step(&mut net.params.values, &g_head, cfg.lr);
        if let (Some(enc), Some(demb)) = (&encoded, demb) {
            g_enc.iter_mut().for_each(|g| *g = 0.0);
            enc.backward(&net.model, &demb, &mut g_enc);
            enc_opt.step(&mut net.model.params.values, &g_enc, cfg.lr);
        }
    }
    Ok(net)
}

/// Mean accuracy over `spec.episodes` episodes drawn from `pool` with a
/// fixed seed.
pub fn protonet_eval(
    net: &ProtoNet,
    corpus: &[Scanpath],
    index: &StimulusIndex,
    pool: &[usize],
    spec: &StimulusTaskSpec,
    seed: u64,
) -> Result<StimulusReport> {
    spec.validate()?;
    let cache = pool_embeddings(&net.model, corpus, index, pool)?;
    let dim = net.model.embedding_dim();
    let mut rng = rng::derived(seed, "meta-test");
    let mut acc_sum = 0.0;
    for _ in 0..spec.episodes {
        let ep = sample_episode(index, pool, spec, &mut rng)?;
        let support = net.project_rows(&gather(&cache, &ep.support, dim));
        let query = net.project_rows(&gather(&cache, &ep.query, dim));
        let protos = prototypes(&support, spec.shots);
        let hits = (0..query.rows)
            .filter(|&i| nearest_prototype(&protos, query.row(i)) == i / spec.queries)
            .count();
        acc_sum += hits as f64 / query.rows as f64;
    }
    Ok(StimulusReport {
        ways: spec.ways,
        shots: spec.shots,
        mode: StimulusMode::Metric,
        accuracy: acc_sum / spec.episodes as f64,
        evaluated: spec.episodes,
        seed,
    })
}

/// Metric-mode protocol: reserve meta-training stimuli, train, evaluate on
/// the disjoint rest.
pub fn eval_metric(
    model: &ObfModel,
    corpus: &[Scanpath],
    spec: &StimulusTaskSpec,
    cfg: &ProtoConfig,
) -> Result<StimulusReport> {
    spec.validate()?;
    let index = StimulusIndex::build(corpus);
    let split = meta_split(&index, spec, cfg.seed)?;
    let net = protonet_train(model, corpus, &index, &split.train, spec, cfg)?;
    protonet_eval(&net, corpus, &index, &split.test, spec, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prototype_of_identical_vectors_is_that_vector() {
        let s = Mat::from_vec(3, 2, vec![1.0, -2.0, 1.0, -2.0, 1.0, -2.0]);
        assert_eq!(prototypes(&s, 3).data, vec![1.0, -2.0]);
    }

    #[test]
    fn equidistant_query_goes_to_lowest_class() {
        let protos = Mat::from_vec(3, 2, vec![1.0, 0.0, -1.0, 0.0, 5.0, 5.0]);
        assert_eq!(nearest_prototype(&protos, &[0.0, 0.0]), 0);
        let swapped = Mat::from_vec(3, 2, vec![5.0, 5.0, -1.0, 0.0, 1.0, 0.0]);
        assert_eq!(nearest_prototype(&swapped, &[0.0, 0.0]), 1);
    }

    #[test]
    fn three_way_three_shot_query_goes_to_nearest_cluster() {
        let s = Mat::from_vec(
            9,
            2,
            vec![
                0.0, 0.0, 0.2, 0.1, -0.1, 0.1, 4.0, 4.0, 4.2, 3.9, 3.9, 4.1, -4.0, 3.0, -4.1, 3.2,
                -3.8, 2.9,
            ],
        );
        let protos = prototypes(&s, 3);
        assert_eq!(nearest_prototype(&protos, &[3.0, 3.5]), 1);
        assert_eq!(nearest_prototype(&protos, &[-2.5, 2.0]), 2);
    }

    #[test]
    fn episode_gradients_match_finite_differences() {
        let support = Mat::from_vec(
            4,
            3,
            vec![
                0.1, 0.5, -0.2, 0.3, 0.2, 0.0, -1.0, 0.4, 0.7, -0.6, 0.1, 0.5,
            ],
        );
        let query = Mat::from_vec(
            4,
            3,
            vec![0.2, 0.3, -0.1, 0.0, 0.1, 0.2, -0.8, 0.2, 0.6, 0.4, 0.1, 0.1],
        );
        let (_, ds, dq) = episode_loss(&support, 2, &query, 2);
        let h = 1e-6;
        for i in 0..support.data.len() {
            let (mut a, mut b) = (support.clone(), support.clone());
            a.data[i] += h;
            b.data[i] -= h;
            let num =
                (episode_loss(&a, 2, &query, 2).0 - episode_loss(&b, 2, &query, 2).0) / (2.0 * h);
            assert!((num - ds.data[i]).abs() < 1e-7);
        }
        for i in 0..query.data.len() {
            let (mut a, mut b) = (query.clone(), query.clone());
            a.data[i] += h;
            b.data[i] -= h;
            let num = (episode_loss(&support, 2, &a, 2).0 - episode_loss(&support, 2, &b, 2).0)
                / (2.0 * h);
            assert!((num - dq.data[i]).abs() < 1e-7);
        }
    }
}

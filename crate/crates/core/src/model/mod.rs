//! The change-detection network: point embedding, a four-stage encoder and
//! decoder of cross-temporal attention blocks, and the two prediction heads.

mod checkpoint;
mod config;
mod layers;
mod pyramid;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use config::ModelConfig;

use self::layers::{Block, BlockCache, BlockContext, Dense, Norm};
use self::pyramid::{Pyramid, LEVELS};
use crate::error::{Error, Result};
use crate::kernels::dense::LayerNormCache;
use crate::kernels::pool::{gather_expand, gather_expand_backward, scatter_max_pool, scatter_max_pool_backward};
use crate::kernels::{FeatureMatrix, ParamStore};
use crate::pointset::{merge_epochs, BiTemporalSample, EpochPointSet, MergedInput};
use crate::serialization::Curve;

pub const SEMANTIC_CLASSES: usize = 4;
pub const CHANGE_CLASSES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// One row per merged row (t0 then t1); absent when the semantic branch is off.
    pub ss_logits: Option<FeatureMatrix>,
    /// One row per t1 point, in t1 order.
    pub cd_logits: FeatureMatrix,
    /// Shared decoder features per merged row, read by both heads.
    pub trunk: FeatureMatrix,
}

#[derive(Debug, Clone)]
struct EncoderStage {
    down: Dense,
    norm: Norm,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
struct DecoderStage {
    fuse: Dense,
    norm: Norm,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    embed: Dense,
    embed_norm: Norm,
    /// Stage `s` (1..=4) at index `s - 1`.
    encoder: Vec<EncoderStage>,
    /// Stage ending at level `l` (0..=3) at index `l`.
    decoder: Vec<DecoderStage>,
    ss_head: Option<Dense>,
    cd_head: Dense,
}

struct EncoderCache {
    input: FeatureMatrix,
    argmax: Vec<usize>,
    norm: LayerNormCache,
    blocks: Vec<BlockCache>,
}

struct DecoderCache {
    fused_input: FeatureMatrix,
    norm: LayerNormCache,
    blocks: Vec<BlockCache>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardState {
    pyramid: Pyramid,
    embed_input: FeatureMatrix,
    embed_norm: LayerNormCache,
    encoder: Vec<EncoderCache>,
    decoder: Vec<DecoderCache>,
    /// Decoder output in canonical order.
    trunk: FeatureMatrix,
    /// `(canonical row, t1 index)` of every t1 row.
    t1_rows: Vec<(usize, usize)>,
    cd_input: FeatureMatrix,
}

fn block_context<'a>(pyramid: &'a Pyramid, level: usize, block: &Block, heads: usize) -> BlockContext<'a> {
    let l = &pyramid.levels[level];
    BlockContext {
        index: &l.index,
        order: l.order(block.curve),
        heads,
    }
}

fn run_blocks(
    ps: &ParamStore,
    blocks: &[Block],
    pyramid: &Pyramid,
    level: usize,
    heads: usize,
    mut x: FeatureMatrix,
) -> Result<(FeatureMatrix, Vec<BlockCache>)> {
    let mut caches = Vec::with_capacity(blocks.len());
    for b in blocks {
        let (y, cache) = b.forward(ps, &x, &block_context(pyramid, level, b, heads))?;
        caches.push(cache);
        x = y;
    }
    Ok((x, caches))
}

fn blocks_backward(
    ps: &mut ParamStore,
    blocks: &[Block],
    caches: &[BlockCache],
    pyramid: &Pyramid,
    level: usize,
    heads: usize,
    mut dy: FeatureMatrix,
) -> FeatureMatrix {
    for (b, cache) in blocks.iter().zip(caches).rev() {
        dy = b.backward(ps, cache, &block_context(pyramid, level, b, heads), &dy);
    }
    dy
}

impl Model {
    /// Fresh model with seeded initialization.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::build(config, &mut rng))
    }

    fn build(config: ModelConfig, rng: &mut ChaCha8Rng) -> Model {
        let mut ps = ParamStore::new();
        let ch = config.channels;
        let mut next_curve = 0usize;
        let mut blocks = |ps: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, n: usize, c: usize| -> Vec<Block> {
            (0..n)
                .map(|i| {
                    let curve = Curve::SCHEDULE[next_curve % Curve::SCHEDULE.len()];
                    next_curve += 1;
                    Block::new(ps, rng, &format!("{name}.block{i}"), c, curve)
                })
                .collect()
        };

        let embed = Dense::new(&mut ps, rng, "embed", 4, ch[0]);
        let embed_norm = Norm::new(&mut ps, rng, "embed.norm", ch[0]);
        let mut encoder = Vec::with_capacity(4);
        for s in 1..LEVELS {
            let name = format!("enc{s}");
            let down = Dense::new(&mut ps, rng, &format!("{name}.down"), ch[s - 1], ch[s]);
            let norm = Norm::new(&mut ps, rng, &format!("{name}.norm"), ch[s]);
            let b = blocks(&mut ps, rng, &name, config.encoder_depths[s - 1], ch[s]);
            encoder.push(EncoderStage { down, norm, blocks: b });
        }
        let mut decoder: Vec<Option<DecoderStage>> = vec![None, None, None, None];
        for l in (0..4).rev() {
            let name = format!("dec{l}");
            let fuse = Dense::new(&mut ps, rng, &format!("{name}.fuse"), ch[l + 1] + ch[l], ch[l]);
            let norm = Norm::new(&mut ps, rng, &format!("{name}.norm"), ch[l]);
            let b = blocks(&mut ps, rng, &name, config.decoder_depths[l], ch[l]);
            decoder[l] = Some(DecoderStage { fuse, norm, blocks: b });
        }
        let ss_head = config.mt_enabled.then(|| Dense::new(&mut ps, rng, "head.semantic", ch[0], SEMANTIC_CLASSES));
        let cd_head = Dense::new(&mut ps, rng, "head.change", ch[0], CHANGE_CLASSES);
        Model {
            config,
            params: ps,
            embed,
            embed_norm,
            encoder,
            decoder: decoder.into_iter().map(|d| d.expect("every level built")).collect(),
            ss_head,
            cd_head,
        }
    }

    /// Projects the `x, y, z, TI` rows to the embedding width and normalizes.
    pub fn embed_points(&self, merged: &MergedInput) -> Result<FeatureMatrix> {
        let x = rows_matrix(&merged.rows, self.config.coordinate_scale());
        Ok(self.embed_norm.forward(&self.params, &self.embed.forward(&self.params, &x)?)?.0)
    }

    pub fn forward(&self, sample: &BiTemporalSample) -> Result<ForwardOutput> {
        Ok(self.forward_with_state(sample)?.0)
    }

    /// The change head applied to every row of a trunk, not only later-epoch rows.
    pub fn change_logits_all(&self, trunk: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.cd_head.forward(&self.params, trunk)
    }

    pub fn forward_with_state(&self, sample: &BiTemporalSample) -> Result<(ForwardOutput, ForwardState)> {
        let ps = &self.params;
        let heads = self.config.heads;
        let merged = merge_epochs(sample, self.config.ti_enabled);
        let pyramid = Pyramid::build(&merged, &self.config)?;

        let embed_input = rows_matrix(&pyramid.levels[0].rows, self.config.coordinate_scale());
        let (e0, embed_norm) = self.embed_norm.forward(ps, &self.embed.forward(ps, &embed_input)?)?;

        let mut skips = vec![e0];
        let mut encoder = Vec::with_capacity(4);
        for s in 1..LEVELS {
            let stage = &self.encoder[s - 1];
            let input = skips[s - 1].clone();
            let h = stage.down.forward(ps, &input)?;
            let level = &pyramid.levels[s];
            let pooled = scatter_max_pool(&h, &level.group_of_child, &pyramid.levels[s - 1].coords())?;
            let (x, norm) = stage.norm.forward(ps, &pooled.pooled)?;
            let (x, blocks) = run_blocks(ps, &stage.blocks, &pyramid, s, heads, x)?;
            encoder.push(EncoderCache {
                input,
                argmax: pooled.argmax,
                norm,
                blocks,
            });
            skips.push(x);
        }

        let mut decoder: Vec<Option<DecoderCache>> = (0..4).map(|_| None).collect();
        let mut up = skips[4].clone();
        for l in (0..4).rev() {
            let stage = &self.decoder[l];
            let expanded = gather_expand(&up, &pyramid.levels[l + 1].group_of_child)?;
            let fused_input = expanded.concat_cols(&skips[l])?;
            let (x, norm) = stage.norm.forward(ps, &stage.fuse.forward(ps, &fused_input)?)?;
            let (x, blocks) = run_blocks(ps, &stage.blocks, &pyramid, l, heads, x)?;
            decoder[l] = Some(DecoderCache {
                fused_input,
                norm,
                blocks,
            });
            up = x;
        }
        let trunk = up;

        let level0 = &pyramid.levels[0];
        let n1 = sample.t1.len();
        let mut t1_rows: Vec<(usize, usize)> = Vec::with_capacity(n1);
        for (row, &m) in pyramid.canonical.iter().enumerate() {
            if let (1, j) = merged.row_to_source[m] {
                t1_rows.push((row, j));
            }
        }
        debug_assert!(level0.epochs.iter().filter(|&&e| e == 1).count() == n1);
        t1_rows.sort_by_key(|&(_, j)| j);
        let cd_input = trunk.gather_rows(&t1_rows.iter().map(|&(r, _)| r).collect::<Vec<_>>());
        let cd_logits = self.cd_head.forward(ps, &cd_input)?;

        // Map canonical rows back to merged order.
        let mut to_canonical = vec![0; merged.len()];
        for (row, &m) in pyramid.canonical.iter().enumerate() {
            to_canonical[m] = row;
        }
        let ss_logits = match &self.ss_head {
            Some(head) => Some(head.forward(ps, &trunk)?.gather_rows(&to_canonical)),
            None => None,
        };
        let out = ForwardOutput {
            ss_logits,
            cd_logits,
            trunk: trunk.gather_rows(&to_canonical),
        };
        let state = ForwardState {
            pyramid,
            embed_input,
            embed_norm,
            encoder,
            decoder: decoder.into_iter().map(|d| d.expect("every level run")).collect(),
            trunk,
            t1_rows,
            cd_input,
        };
        Ok((out, state))
    }

    /// Accumulates parameter gradients for upstream gradients on the logits.
    /// `dss` is in merged row order and `dcd` in t1 order, as in [`ForwardOutput`].
    pub fn backward(&mut self, state: &ForwardState, dss: Option<&FeatureMatrix>, dcd: &FeatureMatrix) -> Result<()> {
        let heads = self.config.heads;
        let ch = self.config.channels;
        let pyramid = &state.pyramid;
        let n = pyramid.levels[0].len();
        let ps = &mut self.params;

        if dcd.shape() != (state.t1_rows.len(), CHANGE_CLASSES) {
            return Err(Error::Shape(format!("change gradient {:?}", dcd.shape())));
        }
        let mut dtrunk = FeatureMatrix::zeros(n, ch[0]);
        let dcd_in = self.cd_head.backward(ps, &state.cd_input, dcd);
        for (i, &(row, _)) in state.t1_rows.iter().enumerate() {
            for (a, b) in dtrunk.row_mut(row).iter_mut().zip(dcd_in.row(i)) {
                *a += b;
            }
        }
        match (&self.ss_head, dss) {
            (Some(head), Some(dss)) => {
                if dss.shape() != (n, SEMANTIC_CLASSES) {
                    return Err(Error::Shape(format!("semantic gradient {:?}", dss.shape())));
                }
                let dss = dss.gather_rows(&pyramid.canonical);
                dtrunk.add_assign(&head.backward(ps, &state.trunk, &dss));
            }
            (None, Some(_)) => return Err(Error::InvalidArgument("semantic branch is disabled".into())),
            _ => {}
        }

        let mut dskips: Vec<FeatureMatrix> = (0..LEVELS).map(|l| FeatureMatrix::zeros(pyramid.levels[l].len(), ch[l])).collect();
        let mut dup = dtrunk;
        for l in 0..4 {
            let stage = &self.decoder[l];
            let cache = &state.decoder[l];
            let d = blocks_backward(ps, &stage.blocks, &cache.blocks, pyramid, l, heads, dup);
            let d = stage.norm.backward(ps, &cache.norm, &d);
            let dcat = stage.fuse.backward(ps, &cache.fused_input, &d);
            let (dexpanded, dskip) = dcat.split_cols(ch[l + 1]);
            dskips[l].add_assign(&dskip);
            dup = gather_expand_backward(&pyramid.levels[l + 1].group_of_child, pyramid.levels[l + 1].len(), &dexpanded);
        }
        dskips[4].add_assign(&dup);

        for s in (1..LEVELS).rev() {
            let stage = &self.encoder[s - 1];
            let cache = &state.encoder[s - 1];
            let d = std::mem::replace(&mut dskips[s], FeatureMatrix::zeros(0, 0));
            let d = blocks_backward(ps, &stage.blocks, &cache.blocks, pyramid, s, heads, d);
            let d = stage.norm.backward(ps, &cache.norm, &d);
            let dh = scatter_max_pool_backward(&cache.argmax, pyramid.levels[s - 1].len(), &d);
            let dinput = stage.down.backward(ps, &cache.input, &dh);
            dskips[s - 1].add_assign(&dinput);
        }

        let d = self.embed_norm.backward(ps, &state.embed_norm, &dskips[0]);
        self.embed.backward(ps, &state.embed_input, &d);
        Ok(())
    }
}

/// Embedding input: coordinates in units of `scale`, then the indicator.
fn rows_matrix(rows: &[[f64; 4]], scale: f64) -> FeatureMatrix {
    let data = rows.iter().flat_map(|r| [r[0] / scale, r[1] / scale, r[2] / scale, r[3]]).collect();
    FeatureMatrix::from_vec(rows.len(), 4, data).expect("four columns")
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn argmax_rows(logits: &FeatureMatrix) -> Vec<u8> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best as u8
        })
        .collect()
}

/// Semantic labels per merged row (if the branch is on) and change labels per t1 point.
pub fn predict_labels(out: &ForwardOutput) -> (Option<Vec<u8>>, Vec<u8>) {
    (out.ss_logits.as_ref().map(argmax_rows), argmax_rows(&out.cd_logits))
}

/// Worst relative error between the model's parameter gradients and central
/// differences of a random linear functional of both heads' logits.
pub fn model_grad_check(model: &mut Model, sample: &BiTemporalSample, seed: u64) -> Result<f64> {
    use crate::kernels::gradcheck::{relative_error, FD_STEP};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (out, state) = model.forward_with_state(sample)?;
    let random_like = |m: &FeatureMatrix, rng: &mut ChaCha8Rng| {
        FeatureMatrix::from_vec(m.rows(), m.cols(), (0..m.data().len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .expect("same shape")
    };
    let rss = out.ss_logits.as_ref().map(|m| random_like(m, &mut rng));
    let rcd = random_like(&out.cd_logits, &mut rng);
    let objective = |model: &Model| -> Result<f64> {
        let o = model.forward(sample)?;
        let mut total: f64 = o.cd_logits.data().iter().zip(rcd.data()).map(|(a, b)| a * b).sum();
        if let (Some(s), Some(r)) = (&o.ss_logits, &rss) {
            total += s.data().iter().zip(r.data()).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(total)
    };

    model.params.zero_grads();
    model.backward(&state, rss.as_ref(), &rcd)?;
    let ids: Vec<_> = model.params.ids().collect();
    let mut worst = 0.0f64;
    for id in ids {
        for e in 0..model.params.value(id).data().len() {
            let orig = model.params.value(id).data()[e];
            model.params.value_mut(id).data_mut()[e] = orig + FD_STEP;
            let up = objective(model)?;
            model.params.value_mut(id).data_mut()[e] = orig - FD_STEP;
            let down = objective(model)?;
            model.params.value_mut(id).data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(model.params.grad(id).data()[e], numeric));
        }
    }
    model.params.zero_grads();
    Ok(worst)
}

/// Bound for [`miniature_grad_check`].
pub const MODEL_TOLERANCE: f64 = 1e-4;

/// Unlabeled sample of `n0 + n1` uniform points in a box of half-width `half`.
pub fn random_sample(seed: u64, n0: usize, n1: usize, half: f64) -> BiTemporalSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = |n: usize| {
        EpochPointSet::new(
            (0..n)
                .map(|_| [rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(0.0..half / 2.0)])
                .collect(),
        )
    };
    BiTemporalSample::new(pts(n0), pts(n1))
}

/// [`model_grad_check`] of a fresh miniature model on 5 + 7 random points.
pub fn miniature_grad_check(seed: u64) -> Result<f64> {
    let mut model = Model::new(ModelConfig::miniature(0.5), seed)?;
    model_grad_check(&mut model, &random_sample(seed ^ 5, 5, 7, 1.5), seed)
}

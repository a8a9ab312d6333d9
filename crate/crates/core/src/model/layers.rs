//! Parameterized building blocks and their backward passes.

use rand::Rng;

use crate::error::Result;
use crate::kernels::attention::{patch_attention, patch_attention_backward, AttentionCache, AttentionParams};
use crate::kernels::conv::{sparse_neighborhood_conv, sparse_neighborhood_conv_backward, NeighborhoodIndex, KERNEL_VOLUME};
use crate::kernels::dense::{gelu, gelu_backward, layer_norm, layer_norm_backward, linear, linear_backward, LayerNormCache, LAYER_NORM_EPS};
use crate::kernels::{FeatureMatrix, ParamId, ParamKind, ParamStore};
use crate::serialization::{Curve, SerializedOrder};

#[derive(Debug, Clone)]
pub(crate) struct Dense {
    w: ParamId,
    b: ParamId,
}

impl Dense {
    pub fn new(ps: &mut ParamStore, rng: &mut impl Rng, name: &str, cin: usize, cout: usize) -> Self {
        Dense {
            w: ps.add(format!("{name}.weight"), cin, cout, ParamKind::Weight { fan_in: cin }, rng),
            b: ps.add(format!("{name}.bias"), 1, cout, ParamKind::Bias, rng),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        linear(x, ps.value(self.w), ps.value(self.b).data())
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, ps: &mut ParamStore, x: &FeatureMatrix, dy: &FeatureMatrix) -> FeatureMatrix {
        let g = linear_backward(x, ps.value(self.w), dy);
        ps.accumulate_grad(self.w, &g.dw);
        ps.accumulate_grad_slice(self.b, &g.dbias);
        g.dx
    }

    fn pair<'a>(&self, ps: &'a ParamStore) -> (&'a FeatureMatrix, &'a [f64]) {
        (ps.value(self.w), ps.value(self.b).data())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Norm {
    gain: ParamId,
    shift: ParamId,
}

impl Norm {
    pub fn new(ps: &mut ParamStore, rng: &mut impl Rng, name: &str, c: usize) -> Self {
        Norm {
            gain: ps.add(format!("{name}.gain"), 1, c, ParamKind::Gain, rng),
            shift: ps.add(format!("{name}.shift"), 1, c, ParamKind::Shift, rng),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &FeatureMatrix) -> Result<(FeatureMatrix, LayerNormCache)> {
        layer_norm(x, ps.value(self.gain).data(), ps.value(self.shift).data(), LAYER_NORM_EPS)
    }

    pub fn backward(&self, ps: &mut ParamStore, cache: &LayerNormCache, dy: &FeatureMatrix) -> FeatureMatrix {
        let g = layer_norm_backward(cache, ps.value(self.gain).data(), dy);
        ps.accumulate_grad_slice(self.gain, &g.dgain);
        ps.accumulate_grad_slice(self.shift, &g.dshift);
        g.dx
    }
}

/// What an attention block needs from its level: grid neighborhoods and serializations.
pub(crate) struct BlockContext<'a> {
    pub index: &'a NeighborhoodIndex,
    pub order: &'a SerializedOrder,
    pub heads: usize,
}

/// Position encoding, patch attention and a feed-forward sublayer, each with a residual.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    cpe: ParamId,
    norm1: Norm,
    attn: [Dense; 4],
    norm2: Norm,
    fc1: Dense,
    fc2: Dense,
    pub curve: Curve,
}

pub(crate) struct BlockCache {
    cpe_means: FeatureMatrix,
    norm1: LayerNormCache,
    attn: AttentionCache,
    norm2: LayerNormCache,
    ff_in: FeatureMatrix,
    hidden: FeatureMatrix,
    activated: FeatureMatrix,
}

pub(crate) const EXPANSION: usize = 4;

impl Block {
    pub fn new(ps: &mut ParamStore, rng: &mut impl Rng, name: &str, c: usize, curve: Curve) -> Self {
        let cpe = ps.add(format!("{name}.cpe.weight"), KERNEL_VOLUME * c, c, ParamKind::Weight { fan_in: KERNEL_VOLUME * c }, rng);
        let norm1 = Norm::new(ps, rng, &format!("{name}.norm1"), c);
        let attn = ["query", "key", "value", "proj"].map(|p| Dense::new(ps, rng, &format!("{name}.attn.{p}"), c, c));
        let norm2 = Norm::new(ps, rng, &format!("{name}.norm2"), c);
        let fc1 = Dense::new(ps, rng, &format!("{name}.fc1"), c, EXPANSION * c);
        let fc2 = Dense::new(ps, rng, &format!("{name}.fc2"), EXPANSION * c, c);
        Block {
            cpe,
            norm1,
            attn,
            norm2,
            fc1,
            fc2,
            curve,
        }
    }

    fn attention_params<'a>(&self, ps: &'a ParamStore) -> AttentionParams<'a> {
        AttentionParams {
            query: self.attn[0].pair(ps),
            key: self.attn[1].pair(ps),
            value: self.attn[2].pair(ps),
            output: self.attn[3].pair(ps),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &FeatureMatrix, ctx: &BlockContext) -> Result<(FeatureMatrix, BlockCache)> {
        let (x1, cpe_means) = sparse_neighborhood_conv(x, ctx.index, ps.value(self.cpe))?;
        let (u, norm1) = self.norm1.forward(ps, &x1)?;
        let (att, attn) = patch_attention(&u, ctx.order, ctx.heads, &self.attention_params(ps))?;
        let h = x1.add(&att);
        let (ff_in, norm2) = self.norm2.forward(ps, &h)?;
        let hidden = self.fc1.forward(ps, &ff_in)?;
        let activated = gelu(&hidden);
        let out = h.add(&self.fc2.forward(ps, &activated)?);
        Ok((
            out,
            BlockCache {
                cpe_means,
                norm1,
                attn,
                norm2,
                ff_in,
                hidden,
                activated,
            },
        ))
    }

    pub fn backward(&self, ps: &mut ParamStore, cache: &BlockCache, ctx: &BlockContext, dy: &FeatureMatrix) -> FeatureMatrix {
        let dact = self.fc2.backward(ps, &cache.activated, dy);
        let dhidden = gelu_backward(&cache.hidden, &dact);
        let dff = self.fc1.backward(ps, &cache.ff_in, &dhidden);
        let mut dh = self.norm2.backward(ps, &cache.norm2, &dff);
        dh.add_assign(dy);

        let grads = patch_attention_backward(&cache.attn, ctx.order, &self.attention_params(ps), &dh);
        for (layer, (dw, db)) in self.attn.iter().zip(&grads.params) {
            ps.accumulate_grad(layer.w, dw);
            ps.accumulate_grad_slice(layer.b, db);
        }
        let mut dx1 = self.norm1.backward(ps, &cache.norm1, &grads.dx);
        dx1.add_assign(&dh);

        let (dx, dw) = sparse_neighborhood_conv_backward(ctx.index, ps.value(self.cpe), &cache.cpe_means, &dx1);
        ps.accumulate_grad(self.cpe, &dw);
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::serialization::{partition_patches, SerializedOrder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, c: usize, k: usize) -> (ParamStore, Block, NeighborhoodIndex, SerializedOrder, FeatureMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = ParamStore::new();
        let block = Block::new(&mut ps, &mut rng, "b", c, Curve::ZOrder);
        let cells: Vec<[u32; 3]> = (0..n as u32).map(|i| [i % 3, i / 3, 0]).collect();
        let index = NeighborhoodIndex::new(&cells);
        let order = SerializedOrder {
            permutation: (0..n).collect(),
            codes: vec![0; n],
            patch_bounds: partition_patches(n, k),
        };
        let x = FeatureMatrix::from_vec(n, c, (0..n * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        (ps, block, index, order, x)
    }

    #[test]
    fn zero_parameters_give_identity() {
        let (mut ps, block, index, order, x) = setup(7, 4, 3);
        for p in ps.iter_mut() {
            p.value.fill(0.0);
        }
        let ctx = BlockContext {
            index: &index,
            order: &order,
            heads: 2,
        };
        let (y, _) = block.forward(&ps, &x, &ctx).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn shape_is_preserved() {
        for k in [1, 2, 5, 100] {
            let (ps, block, index, order, x) = setup(9, 4, k);
            let ctx = BlockContext {
                index: &index,
                order: &order,
                heads: 4,
            };
            assert_eq!(block.forward(&ps, &x, &ctx).unwrap().0.shape(), (9, 4));
        }
    }

    #[test]
    fn other_patch_does_not_leak_through_attention() {
        // Each row sits in its own far-apart cell, so only attention could mix rows.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ps = ParamStore::new();
        let block = Block::new(&mut ps, &mut rng, "b", 4, Curve::ZOrder);
        let cells: Vec<[u32; 3]> = (0..6u32).map(|i| [4 * i, 0, 0]).collect();
        let index = NeighborhoodIndex::new(&cells);
        let order = SerializedOrder {
            permutation: vec![0, 1, 2, 3, 4, 5],
            codes: vec![0; 6],
            patch_bounds: partition_patches(6, 3),
        };
        let ctx = BlockContext {
            index: &index,
            order: &order,
            heads: 2,
        };
        let x = FeatureMatrix::from_vec(6, 4, (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let (y, _) = block.forward(&ps, &x, &ctx).unwrap();
        let mut x2 = x.clone();
        x2.row_mut(4).iter_mut().for_each(|v| *v += 3.0);
        let (y2, _) = block.forward(&ps, &x2, &ctx).unwrap();
        for r in 0..3 {
            assert_eq!(y.row(r), y2.row(r));
        }
        assert_ne!(y.row(4), y2.row(4));
    }
}

//! FLOP and byte accounting for one decode step of one mini-batch.
//!
//! Every multiply-add counts as 2 FLOPs. Byte traffic covers KV reads, the
//! KV write of the new token and one full pass over the weights; activation
//! traffic between layers is not counted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{kv_bytes_per_token_per_layer, weights_bytes, ModelArch};
use crate::units::GIB;

/// Batch size and context length of a decode step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeploymentPoint {
    /// Users decoding together (B).
    pub batch: u64,
    /// Context tokens each user attends over (T). Every user shares it.
    pub context: u64,
    /// Tokens produced per step (S), always 1.
    pub out_tokens: u64,
}

impl DeploymentPoint {
    /// A zero context is accepted as a degenerate point with no attention
    /// over history; the batch must be at least 1.
    pub fn new(batch: u64, context: u64) -> Result<Self> {
        if batch == 0 {
            return Err(Error::domain("deployment point", "batch must be >= 1"));
        }
        Ok(Self {
            batch,
            context,
            out_tokens: 1,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Workload {
    pub tensor_flops: f64,
    pub scalar_flops: f64,
    /// KV cache bytes read (context only).
    pub kv_rd_bytes: f64,
    /// KV cache bytes written for the new token.
    pub kv_wr_bytes: f64,
    pub weights_bytes: f64,
    /// `kv_rd_bytes + kv_wr_bytes + weights_bytes`.
    pub total_rd_bytes: f64,
    /// Routed-expert FLOPs summed over MoE layers at the average expert load.
    pub moe_avg_routed_flops: f64,
    /// Routed-expert FLOPs summed over MoE layers at the most loaded expert.
    pub moe_max_routed_flops: f64,
}

impl Workload {
    pub fn total_flops(&self) -> f64 {
        self.tensor_flops + self.scalar_flops
    }

    pub fn kv_bytes(&self) -> f64 {
        self.kv_rd_bytes + self.kv_wr_bytes
    }

    pub fn arithmetic_intensity(&self) -> f64 {
        if self.total_rd_bytes == 0.0 {
            return 0.0;
        }
        self.total_flops() / self.total_rd_bytes
    }
}

struct Shape {
    b: f64,
    t: f64,
    s: f64,
}

impl Shape {
    fn of(p: &DeploymentPoint) -> Self {
        Self {
            b: p.batch as f64,
            t: p.context as f64,
            s: p.out_tokens as f64,
        }
    }
}

fn kv_traffic(m: &ModelArch, p: &DeploymentPoint) -> (f64, f64) {
    let per_tok = kv_bytes_per_token_per_layer(m);
    let Shape { b, t, s } = Shape::of(p);
    let layers = m.layers as f64;
    (b * t * per_tok * layers, b * s * per_tok * layers)
}

/// Grouped-query attention path (Llama 3).
pub fn llama_workload(m: &ModelArch, p: &DeploymentPoint) -> Result<Workload> {
    if m.mla.is_some() || m.moe.is_some() {
        return Err(Error::WrongArchitecture {
            model: m.name.clone(),
            path: "grouped-query",
        });
    }
    let Shape { b, t, s } = Shape::of(p);
    let (d, h, k, e, v) = (
        m.embed_dim as f64,
        m.heads as f64,
        m.kv_heads as f64,
        m.head_dim as f64,
        m.ffn_dim as f64,
    );

    let q_flops = b * h * s * d * e * 2.0;
    let k_flops = b * k * s * d * e * 2.0;
    let v_flops = b * k * s * d * e * 2.0;
    let qkv_flops = q_flops + k_flops + v_flops;

    let qk_flops = b * h * t * e * s * 2.0;
    let av_flops = b * h * t * e * s * 2.0;
    let out_flops = b * s * (h * e) * d * 2.0;
    let attn_flops = qk_flops + av_flops + out_flops;

    let ffn_flops = 3.0 * (b * s * d * v * 2.0);

    let sc = m.scalar_const;
    let softmax = b * h * t * s * sc.softmax_ops_per_elem;
    let norms = 2.0 * (b * s * d * sc.norm_flops_per_elem);

    let layers = m.layers as f64;
    let (kv_rd, kv_wr) = kv_traffic(m, p);
    let weights = weights_bytes(m);
    Ok(Workload {
        tensor_flops: (qkv_flops + attn_flops + ffn_flops) * layers,
        scalar_flops: (softmax + norms) * layers,
        kv_rd_bytes: kv_rd,
        kv_wr_bytes: kv_wr,
        weights_bytes: weights,
        total_rd_bytes: kv_rd + kv_wr + weights,
        moe_avg_routed_flops: 0.0,
        moe_max_routed_flops: 0.0,
    })
}

/// Latent attention + mixture-of-experts path (DeepSeek V3).
///
/// `imbalance` scales the per-expert token count of the most loaded routed
/// expert relative to the average; 1.0 models a perfectly balanced router.
pub fn deepseek_workload(m: &ModelArch, p: &DeploymentPoint, imbalance: f64) -> Result<Workload> {
    let (Some(mla), Some(moe)) = (m.mla, m.moe) else {
        return Err(Error::WrongArchitecture {
            model: m.name.clone(),
            path: "latent-attention MoE",
        });
    };
    if !(imbalance >= 1.0 && imbalance.is_finite()) {
        return Err(Error::domain(
            "imbalance factor",
            format!("must be finite and >= 1, got {imbalance}"),
        ));
    }
    let Shape { b, t, s } = Shape::of(p);
    let (d, h, v) = (m.embed_dim as f64, m.heads as f64, m.ffn_dim as f64);
    let (f, g, r) = (mla.q_latent_dim as f64, mla.kv_latent_dim as f64, mla.rope_dim as f64);

    // Down projections.
    let dq_flops = b * s * f * d * 2.0;
    let dkv_flops = b * s * g * d * 2.0;
    let kr_flops = b * s * r * d * 2.0;
    // K/V up projections are absorbed into the query and output projections.
    let uq_flops = b * s * f * h * g * 2.0;
    let qr_flops = b * s * f * h * r * 2.0;
    let qkv_flops = dq_flops + dkv_flops + kr_flops + uq_flops + qr_flops;

    let qk_flops = b * h * t * (g + r) * s * 2.0;
    let av_flops = b * h * t * (g + r) * s * 2.0;
    let out_flops = b * s * (h * g) * d * 2.0;
    let attn_flops = qk_flops + av_flops + out_flops;

    let ffn_flops = 3.0 * (b * s * d * v * 2.0);

    let (md, ms, mr, ma) = (
        moe.expert_dim as f64,
        moe.shared_experts as f64,
        moe.routed_experts as f64,
        moe.active_experts as f64,
    );
    let moe_per_token_flops = 2.0 * d * md * 2.0;
    let moe_shared_expert_flops = ms * b * s * moe_per_token_flops;
    let moe_router_flops = b * s * d * mr * 2.0;
    let avg_tok_per_routed_expert = (b * s * ma / mr).max(1.0);
    let moe_avg_routed_expert_flops = mr * avg_tok_per_routed_expert * moe_per_token_flops;
    let max_tok_per_routed_expert = avg_tok_per_routed_expert * imbalance;
    let moe_max_routed_expert_flops = mr * max_tok_per_routed_expert * moe_per_token_flops;
    let moe_flops = moe_router_flops + moe_shared_expert_flops + moe_avg_routed_expert_flops;

    let sc = m.scalar_const;
    let layer_scalar = b * h * t * s * sc.softmax_ops_per_elem + 2.0 * (b * s * d * sc.norm_flops_per_elem);

    // The output projection is added on top of attn_flops (which already
    // includes it) for both layer kinds, matching the reference accounting.
    let dense_layer_flops = qkv_flops + attn_flops + out_flops + ffn_flops;
    let moe_layer_flops = qkv_flops + attn_flops + out_flops + moe_flops;

    let n_dense = moe.num_dense_layers as f64;
    let n_moe = moe.num_moe_layers as f64;
    let (kv_rd, kv_wr) = kv_traffic(m, p);
    let weights = weights_bytes(m);
    Ok(Workload {
        tensor_flops: dense_layer_flops * n_dense + moe_layer_flops * n_moe,
        scalar_flops: layer_scalar * (n_dense + n_moe),
        kv_rd_bytes: kv_rd,
        kv_wr_bytes: kv_wr,
        weights_bytes: weights,
        total_rd_bytes: kv_rd + kv_wr + weights,
        moe_avg_routed_flops: moe_avg_routed_expert_flops * n_moe,
        moe_max_routed_flops: moe_max_routed_expert_flops * n_moe,
    })
}

/// Dispatches on architecture. `imbalance` is ignored for dense models.
pub fn workload(m: &ModelArch, p: &DeploymentPoint, imbalance: f64) -> Result<Workload> {
    if m.is_latent_moe() {
        deepseek_workload(m, p, imbalance)
    } else {
        llama_workload(m, p)
    }
}

/// Resident bytes: weights plus the KV cache of every user at full context.
pub fn capacity_bytes(m: &ModelArch, p: &DeploymentPoint) -> f64 {
    weights_bytes(m) + p.batch as f64 * p.context as f64 * kv_bytes_per_token_per_layer(m) * m.layers as f64
}

pub fn capacity_gib(m: &ModelArch, p: &DeploymentPoint) -> f64 {
    capacity_bytes(m, p) / GIB
}

/// FLOPs (tensor + scalar) per byte read for one decode step.
pub fn arithmetic_intensity(m: &ModelArch, p: &DeploymentPoint) -> Result<f64> {
    Ok(workload(m, p, 1.0)?.arithmetic_intensity())
}

/// The value attention's FLOP/byte ratio converges to as context grows.
///
/// GQA: `4·H·T·E` FLOPs over `2·K·E·T` bytes gives `2H/K`. Latent attention:
/// `4·H·T·(G+R)` FLOPs over `(G+R)·T` bytes gives `4H`.
pub fn attention_ami_asymptote(m: &ModelArch) -> f64 {
    let h = m.heads as f64;
    match m.mla {
        Some(_) => 4.0 * h / m.elem_bytes,
        None => 2.0 * h / (m.kv_heads as f64 * m.elem_bytes),
    }
}

//! Transformer architectures and their static sizes.
//!
//! A [`ModelArch`] holds the hyperparameters that drive FLOP and byte
//! accounting. Dense grouped-query models (Llama 3) leave `mla` and `moe`
//! empty; latent-attention mixture-of-experts models (DeepSeek V3) fill both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names accepted by [`builtin_model`].
pub const BUILTIN_MODELS: [&str; 3] = ["llama3-70b", "llama3-405b", "deepseekv3"];

/// Multi-head latent attention dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlaParams {
    #[serde(alias = "F")]
    pub q_latent_dim: u64,
    #[serde(alias = "G")]
    pub kv_latent_dim: u64,
    #[serde(alias = "R")]
    pub rope_dim: u64,
}

/// Mixture-of-experts block shape and layer split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoeParams {
    #[serde(alias = "MD")]
    pub expert_dim: u64,
    #[serde(alias = "MS")]
    pub shared_experts: u64,
    #[serde(alias = "MR")]
    pub routed_experts: u64,
    #[serde(alias = "MA")]
    pub active_experts: u64,
    pub num_dense_layers: u64,
    pub num_moe_layers: u64,
}

/// Per-element scalar operation counts for softmax and normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarConstants {
    pub softmax_ops_per_elem: f64,
    pub norm_flops_per_elem: f64,
}

impl Default for ScalarConstants {
    fn default() -> Self {
        Self {
            softmax_ops_per_elem: 5.0,
            norm_flops_per_elem: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArch {
    pub name: String,
    #[serde(alias = "L")]
    pub layers: u64,
    /// Output tokens per decode step; always 1.
    #[serde(alias = "S", default = "one")]
    pub out_tokens: u64,
    #[serde(alias = "D")]
    pub embed_dim: u64,
    #[serde(alias = "H")]
    pub heads: u64,
    #[serde(alias = "K")]
    pub kv_heads: u64,
    #[serde(alias = "E")]
    pub head_dim: u64,
    #[serde(alias = "V")]
    pub ffn_dim: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mla: Option<MlaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moe: Option<MoeParams>,
    #[serde(default = "one_f64")]
    pub elem_bytes: f64,
    pub nominal_params: f64,
    #[serde(default)]
    pub scalar_const: ScalarConstants,
}

fn one() -> u64 {
    1
}

fn one_f64() -> f64 {
    1.0
}

impl ModelArch {
    /// Checks the structural invariants. Built-ins always pass.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::domain("model", format!("{}: {reason}", self.name)));
        if self.name.trim().is_empty() {
            return bad("empty name".into());
        }
        if self.layers == 0 {
            return bad("layers must be >= 1".into());
        }
        if self.out_tokens != 1 {
            return bad(format!("out_tokens must be 1 for decode, got {}", self.out_tokens));
        }
        for (field, v) in [
            ("embed_dim", self.embed_dim),
            ("heads", self.heads),
            ("kv_heads", self.kv_heads),
            ("head_dim", self.head_dim),
            ("ffn_dim", self.ffn_dim),
        ] {
            if v == 0 {
                return bad(format!("{field} must be >= 1"));
            }
        }
        if !(self.elem_bytes.is_finite() && self.elem_bytes > 0.0) {
            return bad("elem_bytes must be positive".into());
        }
        if !(self.nominal_params.is_finite() && self.nominal_params > 0.0) {
            return bad("nominal_params must be positive".into());
        }
        let sc = self.scalar_const;
        if !(sc.softmax_ops_per_elem >= 0.0 && sc.norm_flops_per_elem >= 0.0)
            || !sc.softmax_ops_per_elem.is_finite()
            || !sc.norm_flops_per_elem.is_finite()
        {
            return bad("scalar constants must be finite and non-negative".into());
        }
        match (&self.mla, &self.moe) {
            (None, None) => {
                if self.heads % self.kv_heads != 0 {
                    return bad(format!(
                        "heads ({}) must be a multiple of kv_heads ({})",
                        self.heads, self.kv_heads
                    ));
                }
            }
            (Some(mla), Some(moe)) => {
                if mla.kv_latent_dim + mla.rope_dim == 0 || mla.q_latent_dim == 0 {
                    return bad("latent dims must be >= 1".into());
                }
                if moe.routed_experts == 0 || moe.active_experts == 0 || moe.expert_dim == 0 {
                    return bad("routed/active experts and expert_dim must be >= 1".into());
                }
                if moe.active_experts > moe.routed_experts {
                    return bad("active_experts exceeds routed_experts".into());
                }
                if moe.num_dense_layers.checked_add(moe.num_moe_layers) != Some(self.layers) {
                    return bad(format!(
                        "num_dense_layers + num_moe_layers ({} + {}) != layers ({})",
                        moe.num_dense_layers, moe.num_moe_layers, self.layers
                    ));
                }
            }
            _ => return bad("mla and moe blocks must be given together".into()),
        }
        Ok(())
    }

    pub fn is_latent_moe(&self) -> bool {
        self.mla.is_some()
    }

    pub fn num_moe_layers(&self) -> u64 {
        self.moe.map_or(0, |m| m.num_moe_layers)
    }
}

pub fn builtin_model(name: &str) -> Result<ModelArch> {
    let key = name.trim().to_ascii_lowercase();
    let m = match key.as_str() {
        "llama3-70b" => ModelArch {
            name: "llama3-70b".into(),
            layers: 80,
            out_tokens: 1,
            embed_dim: 8192,
            heads: 64,
            kv_heads: 8,
            head_dim: 128,
            ffn_dim: 28672,
            mla: None,
            moe: None,
            elem_bytes: 1.0,
            nominal_params: 70e9,
            scalar_const: ScalarConstants::default(),
        },
        "llama3-405b" => ModelArch {
            name: "llama3-405b".into(),
            layers: 126,
            out_tokens: 1,
            embed_dim: 16384,
            heads: 128,
            kv_heads: 8,
            head_dim: 128,
            ffn_dim: 53248,
            mla: None,
            moe: None,
            elem_bytes: 1.0,
            nominal_params: 405e9,
            scalar_const: ScalarConstants::default(),
        },
        "deepseekv3" => ModelArch {
            name: "deepseekv3".into(),
            layers: 61,
            out_tokens: 1,
            embed_dim: 7168,
            heads: 128,
            kv_heads: 128,
            head_dim: 128,
            ffn_dim: 18432,
            mla: Some(MlaParams {
                q_latent_dim: 1536,
                kv_latent_dim: 512,
                rope_dim: 64,
            }),
            moe: Some(MoeParams {
                expert_dim: 2048,
                shared_experts: 1,
                routed_experts: 256,
                active_experts: 8,
                num_dense_layers: 3,
                num_moe_layers: 58,
            }),
            elem_bytes: 1.0,
            // Exact published count of the 671B release (main model, no MTP head).
            nominal_params: 671_026_419_200.0,
            scalar_const: ScalarConstants::default(),
        },
        _ => {
            return Err(Error::UnknownModel {
                name: name.to_string(),
                valid: BUILTIN_MODELS.join(", "),
            })
        }
    };
    Ok(m)
}

/// Total weight bytes, from the headline parameter count.
pub fn weights_bytes(m: &ModelArch) -> f64 {
    m.nominal_params * m.elem_bytes
}

/// Bytes cached per context token in one layer: `K*E*2` elements for GQA,
/// `G+R` for latent attention.
pub fn kv_bytes_per_token_per_layer(m: &ModelArch) -> f64 {
    let elems = match m.mla {
        Some(mla) => mla.kv_latent_dim + mla.rope_dim,
        None => m.kv_heads * m.head_dim * 2,
    };
    elems as f64 * m.elem_bytes
}

/// KV footprint of one user at `context` tokens, across all layers.
pub fn kv_bytes_per_user(m: &ModelArch, context: u64) -> f64 {
    context as f64 * kv_bytes_per_token_per_layer(m) * m.layers as f64
}

#pragma once

#include <optional>
#include <string>
#include <utility>

#include "twsf/config.hpp"
#include "twsf/dataset.hpp"
#include "twsf/tensor.hpp"
#include "twsf/tws.hpp"

namespace twsf {

inline constexpr double kLayerNormEps = 1e-5;

struct AttentionParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct LayerNormParams {
    Tensor gain, bias;
};

struct FeedForwardParams {
    Tensor w1, b1, w2, b2;  // D -> 4D -> D, token-wise
};

struct EncoderBlockParams {
    AttentionParams self_attn;
    std::optional<AttentionParams> cross_attn;  // absent in concat bridging
    LayerNormParams ln_self;
    std::optional<LayerNormParams> ln_cross;
    FeedForwardParams ffn;
    LayerNormParams ln_ffn;
};

// All learnable arrays. Channels share every parameter (channel
// independence); the global token is a single shared D-vector. Concat
// bridging drops the global token and all cross-attention parameters.
struct ForecasterParams {
    Tensor patch_w, patch_b;                 // patch_len x D, D
    Tensor exo_w, exo_b;                     // L_ex x D, D
    std::optional<Tensor> global_token;      // 1 x D
    std::vector<EncoderBlockParams> blocks;
    Tensor head_w, head_b;                   // flat_dim x H, H

    // Zero-filled arrays with the shapes implied by the config.
    static ForecasterParams build(const RunConfig& config);
    // Seeded init: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero
    // biases, unit layer-norm gains, normal(0, 0.02) global token.
    static ForecasterParams init(const RunConfig& config, CounterRng& rng);

    std::vector<std::pair<std::string, Tensor>> named_tensors();
    void set_requires_grad(bool b);
    void zero_grad();
    ForecasterParams clone() const;

    template <typename Fn>
    void for_each(Fn&& fn) {
        fn("patch_w", patch_w);
        fn("patch_b", patch_b);
        fn("exo_w", exo_w);
        fn("exo_b", exo_b);
        if (global_token) fn("global_token", *global_token);
        for (size_t b = 0; b < blocks.size(); ++b) {
            const std::string p = "block" + std::to_string(b) + ".";
            auto& blk = blocks[b];
            fn((p + "self.wq").c_str(), blk.self_attn.wq);
            fn((p + "self.bq").c_str(), blk.self_attn.bq);
            fn((p + "self.wk").c_str(), blk.self_attn.wk);
            fn((p + "self.bk").c_str(), blk.self_attn.bk);
            fn((p + "self.wv").c_str(), blk.self_attn.wv);
            fn((p + "self.bv").c_str(), blk.self_attn.bv);
            fn((p + "self.wo").c_str(), blk.self_attn.wo);
            fn((p + "self.bo").c_str(), blk.self_attn.bo);
            if (blk.cross_attn) {
                fn((p + "cross.wq").c_str(), blk.cross_attn->wq);
                fn((p + "cross.bq").c_str(), blk.cross_attn->bq);
                fn((p + "cross.wk").c_str(), blk.cross_attn->wk);
                fn((p + "cross.bk").c_str(), blk.cross_attn->bk);
                fn((p + "cross.wv").c_str(), blk.cross_attn->wv);
                fn((p + "cross.bv").c_str(), blk.cross_attn->bv);
                fn((p + "cross.wo").c_str(), blk.cross_attn->wo);
                fn((p + "cross.bo").c_str(), blk.cross_attn->bo);
            }
            fn((p + "ln_self.gain").c_str(), blk.ln_self.gain);
            fn((p + "ln_self.bias").c_str(), blk.ln_self.bias);
            if (blk.ln_cross) {
                fn((p + "ln_cross.gain").c_str(), blk.ln_cross->gain);
                fn((p + "ln_cross.bias").c_str(), blk.ln_cross->bias);
            }
            fn((p + "ffn.w1").c_str(), blk.ffn.w1);
            fn((p + "ffn.b1").c_str(), blk.ffn.b1);
            fn((p + "ffn.w2").c_str(), blk.ffn.w2);
            fn((p + "ffn.b2").c_str(), blk.ffn.b2);
            fn((p + "ln_ffn.gain").c_str(), blk.ln_ffn.gain);
            fn((p + "ln_ffn.bias").c_str(), blk.ln_ffn.bias);
        }
        fn("head_w", head_w);
        fn("head_b", head_b);
    }
};

// Optional forward introspection: attention weight matrices per site (one
// entry per head) and the exogenous token matrix.
struct ForwardTrace {
    std::vector<Tensor> self_attention;
    std::vector<Tensor> cross_attention;
    Tensor exo_tokens;
};

// Splits a 1 x L channel into L/patch_len non-overlapping rows of length
// patch_len; concatenating the rows in order reproduces the input exactly.
// Indivisible lengths are configuration errors, never padded.
Tensor create_patches(const Tensor& x, int64_t patch_len);

Tensor embed_endogenous(const Tensor& patches, const ForecasterParams& p);
Tensor embed_exogenous(const Tensor& exo_window, const ForecasterParams& p);

// Scaled dot-product attention, multi-head; queries from q_in, keys and
// values from kv_in. Appends one weight matrix per head to weights_out.
Tensor multi_head_attention(const Tensor& q_in, const Tensor& kv_in, const AttentionParams& p,
                            int64_t heads, double dropout_rate, CounterRng* rng, bool training,
                            std::vector<Tensor>* weights_out = nullptr);

// One encoder block: self-attention over the token sequence (residual +
// layer norm); when cross-attention parameters are present the last token
// attends over exo_tokens (residual + layer norm, other tokens untouched);
// a token-wise feed-forward ("conv") stage closes the block (residual +
// layer norm).
Tensor encoder_block(const Tensor& tokens, const Tensor* exo_tokens,
                     const EncoderBlockParams& blk, int64_t heads, double dropout_rate,
                     CounterRng* rng, bool training, ForwardTrace* trace = nullptr);

// Full forward pass: per channel, instance-normalize, patch, embed, append
// the global token (cross mode) or the exogenous tokens (concat mode), run
// the encoder stack, flatten, project to the horizon and denormalize.
// whitener must be present exactly when config.tws_enabled.
Tensor forecast(const ForecasterParams& params, const ForecastSample& sample,
                const TwsWhitener* whitener, const RunConfig& config, CounterRng* rng,
                bool training, ForwardTrace* trace = nullptr);

// Versioned checkpoint container: config, every named parameter with its
// shape, and the whitener (embedded when fitted). Loading rebuilds the
// parameter set from the config and fails loudly on any name or shape
// mismatch.
struct Checkpoint {
    RunConfig config;
    ForecasterParams params;
    std::optional<TwsWhitener> whitener;
    std::string whitener_ref;  // where the whitener came from
};

void save_checkpoint(const std::string& path, Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace twsf

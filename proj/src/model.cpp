#include "twsf/model.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "twsf/textio.hpp"

namespace twsf {

namespace {

Tensor linear_weight(int64_t fan_in, int64_t fan_out, CounterRng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform({fan_in, fan_out}, -bound, bound, rng);
}

AttentionParams build_attention(int64_t d) {
    return {Tensor::zeros({d, d}), Tensor::zeros({d}), Tensor::zeros({d, d}), Tensor::zeros({d}),
            Tensor::zeros({d, d}), Tensor::zeros({d}), Tensor::zeros({d, d}), Tensor::zeros({d})};
}

AttentionParams init_attention(int64_t d, CounterRng& rng) {
    return {linear_weight(d, d, rng), Tensor::zeros({d}), linear_weight(d, d, rng),
            Tensor::zeros({d}), linear_weight(d, d, rng), Tensor::zeros({d}),
            linear_weight(d, d, rng), Tensor::zeros({d})};
}

LayerNormParams build_layer_norm(int64_t d, bool unit_gain) {
    return {unit_gain ? Tensor::full({d}, 1.0) : Tensor::zeros({d}), Tensor::zeros({d})};
}

int64_t flat_dim(const RunConfig& c) {
    const int64_t tokens = c.bridging == Bridging::kCross ? c.patch_count() + 1 : c.patch_count();
    return tokens * c.d_model;
}

}  // namespace

ForecasterParams ForecasterParams::build(const RunConfig& config) {
    config.validate();
    const int64_t d = config.d_model;
    const int64_t hidden = 4 * d;
    const bool cross = config.bridging == Bridging::kCross;

    ForecasterParams p;
    p.patch_w = Tensor::zeros({config.patch_len, d});
    p.patch_b = Tensor::zeros({d});
    p.exo_w = Tensor::zeros({config.exo_lookback(), d});
    p.exo_b = Tensor::zeros({d});
    if (cross) p.global_token = Tensor::zeros({1, d});
    p.blocks.resize(static_cast<size_t>(config.blocks));
    for (auto& blk : p.blocks) {
        blk.self_attn = build_attention(d);
        if (cross) {
            blk.cross_attn = build_attention(d);
            blk.ln_cross = build_layer_norm(d, true);
        }
        blk.ln_self = build_layer_norm(d, true);
        blk.ffn = {Tensor::zeros({d, hidden}), Tensor::zeros({hidden}),
                   Tensor::zeros({hidden, d}), Tensor::zeros({d})};
        blk.ln_ffn = build_layer_norm(d, true);
    }
    p.head_w = Tensor::zeros({flat_dim(config), config.horizon});
    p.head_b = Tensor::zeros({config.horizon});
    return p;
}

ForecasterParams ForecasterParams::init(const RunConfig& config, CounterRng& rng) {
    config.validate();
    const int64_t d = config.d_model;
    const int64_t hidden = 4 * d;
    const bool cross = config.bridging == Bridging::kCross;

    ForecasterParams p = build(config);
    p.patch_w = linear_weight(config.patch_len, d, rng);
    p.exo_w = linear_weight(config.exo_lookback(), d, rng);
    if (cross) p.global_token = Tensor::normal({1, d}, 0.0, 0.02, rng);
    for (auto& blk : p.blocks) {
        blk.self_attn = init_attention(d, rng);
        if (cross) blk.cross_attn = init_attention(d, rng);
        blk.ffn.w1 = linear_weight(d, hidden, rng);
        blk.ffn.w2 = linear_weight(hidden, d, rng);
    }
    p.head_w = linear_weight(flat_dim(config), config.horizon, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor>> ForecasterParams::named_tensors() {
    std::vector<std::pair<std::string, Tensor>> out;
    for_each([&out](const char* name, Tensor& t) { out.emplace_back(name, t); });
    return out;
}

void ForecasterParams::set_requires_grad(bool b) {
    for_each([b](const char*, Tensor& t) { t.set_requires_grad(b); });
}

void ForecasterParams::zero_grad() {
    for_each([](const char*, Tensor& t) { t.zero_grad(); });
}

ForecasterParams ForecasterParams::clone() const {
    ForecasterParams copy = *this;  // shares nodes
    copy.for_each([](const char*, Tensor& t) { t = t.detached_copy(); });
    return copy;
}

// --- forward pieces ---------------------------------------------------

Tensor create_patches(const Tensor& x, int64_t patch_len) {
    if (x.ndim() != 2 || x.rows() != 1)
        throw ShapeError("create_patches: expected a 1 x L channel, got " + shape_str(x.shape()));
    const int64_t len = x.cols();
    if (patch_len <= 0 || len % patch_len != 0)
        throw ContractError("create_patches: length " + std::to_string(len) +
                            " not divisible by patch_len " + std::to_string(patch_len));
    return reshape(x, {len / patch_len, patch_len});
}

Tensor embed_endogenous(const Tensor& patches, const ForecasterParams& p) {
    return add_row(matmul(patches, p.patch_w), p.patch_b);
}

Tensor embed_exogenous(const Tensor& exo_window, const ForecasterParams& p) {
    return add_row(matmul(exo_window, p.exo_w), p.exo_b);
}

Tensor multi_head_attention(const Tensor& q_in, const Tensor& kv_in, const AttentionParams& p,
                            int64_t heads, double dropout_rate, CounterRng* rng, bool training,
                            std::vector<Tensor>* weights_out) {
    const int64_t d = p.wq.cols();
    if (d % heads != 0) throw ContractError("attention: heads must divide d_model");
    const int64_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    const Tensor q = add_row(matmul(q_in, p.wq), p.bq);
    const Tensor k = add_row(matmul(kv_in, p.wk), p.bk);
    const Tensor v = add_row(matmul(kv_in, p.wv), p.bv);

    std::vector<Tensor> head_outputs;
    head_outputs.reserve(static_cast<size_t>(heads));
    for (int64_t h = 0; h < heads; ++h) {
        const Tensor qh = slice(q, 1, h * dh, dh);
        const Tensor kh = slice(k, 1, h * dh, dh);
        const Tensor vh = slice(v, 1, h * dh, dh);
        const Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
        ensure_finite(scores, "attention scores");
        Tensor weights = softmax(scores, 1);
        if (weights_out) weights_out->push_back(weights);
        if (training && dropout_rate > 0.0)
            weights = dropout(weights, dropout_rate, *rng, training);
        head_outputs.push_back(matmul(weights, vh));
    }
    const Tensor merged = concat(head_outputs, 1);
    return add_row(matmul(merged, p.wo), p.bo);
}

Tensor encoder_block(const Tensor& tokens, const Tensor* exo_tokens,
                     const EncoderBlockParams& blk, int64_t heads, double dropout_rate,
                     CounterRng* rng, bool training, ForwardTrace* trace) {
    std::vector<Tensor>* self_w = trace ? &trace->self_attention : nullptr;
    Tensor attn = multi_head_attention(tokens, tokens, blk.self_attn, heads, dropout_rate, rng,
                                       training, self_w);
    if (training && dropout_rate > 0.0) attn = dropout(attn, dropout_rate, *rng, training);
    Tensor t1 = layer_norm(add(tokens, attn), blk.ln_self.gain, blk.ln_self.bias, kLayerNormEps);

    Tensor t2 = t1;
    if (blk.cross_attn) {
        if (!exo_tokens)
            throw ContractError("encoder_block: cross-attention needs exogenous tokens");
        const int64_t s = t1.rows();
        const Tensor z = slice(t1, 0, 0, s - 1);
        const Tensor phi = slice(t1, 0, s - 1, 1);
        std::vector<Tensor>* cross_w = trace ? &trace->cross_attention : nullptr;
        Tensor ca = multi_head_attention(phi, *exo_tokens, *blk.cross_attn, heads, dropout_rate,
                                         rng, training, cross_w);
        if (training && dropout_rate > 0.0) ca = dropout(ca, dropout_rate, *rng, training);
        const Tensor phi2 =
            layer_norm(add(phi, ca), blk.ln_cross->gain, blk.ln_cross->bias, kLayerNormEps);
        const std::array<Tensor, 2> parts{z, phi2};
        t2 = concat(parts, 0);
    }

    Tensor f = gelu(add_row(matmul(t2, blk.ffn.w1), blk.ffn.b1));
    f = add_row(matmul(f, blk.ffn.w2), blk.ffn.b2);
    if (training && dropout_rate > 0.0) f = dropout(f, dropout_rate, *rng, training);
    return layer_norm(add(t2, f), blk.ln_ffn.gain, blk.ln_ffn.bias, kLayerNormEps);
}

Tensor forecast(const ForecasterParams& params, const ForecastSample& sample,
                const TwsWhitener* whitener, const RunConfig& config, CounterRng* rng,
                bool training, ForwardTrace* trace) {
    config.validate();
    if ((whitener != nullptr) != config.tws_enabled)
        throw ContractError("forecast: whitener must be present exactly when tws is enabled");
    if (sample.endogenous.ndim() != 2 || sample.endogenous.cols() != config.lookback)
        throw ShapeError("forecast: endogenous window is " + shape_str(sample.endogenous.shape()) +
                         ", lookback is " + std::to_string(config.lookback));
    if (sample.exogenous.ndim() != 2 || sample.exogenous.cols() != config.exo_lookback())
        throw ShapeError("forecast: exogenous window is " + shape_str(sample.exogenous.shape()));
    if (training && config.dropout > 0.0 && rng == nullptr)
        throw ContractError("forecast: training with dropout needs a generator");

    const bool cross = config.bridging == Bridging::kCross;
    const int64_t n_en = config.patch_count();
    const int64_t d = config.d_model;
    const int64_t c = sample.endogenous.rows();

    // Exogenous tokens are shared by every channel: whiten (when enabled),
    // normalize per variate, embed each variate as one token.
    Tensor exo_in =
        config.tws_enabled ? whitener->whiten_window(sample.exogenous) : sample.exogenous;
    auto [exo_norm, exo_state] = instance_normalize(exo_in);
    const Tensor h_ex = embed_exogenous(exo_norm, params);
    if (trace) trace->exo_tokens = h_ex;

    auto [endo_norm, endo_state] = instance_normalize(sample.endogenous);

    std::vector<Tensor> channel_preds;
    channel_preds.reserve(static_cast<size_t>(c));
    for (int64_t ch = 0; ch < c; ++ch) {
        Tensor row = Tensor::zeros({1, config.lookback});
        for (int64_t t = 0; t < config.lookback; ++t) row.at(0, t) = endo_norm(ch, t);

        const Tensor patches = create_patches(row, config.patch_len);
        const Tensor z = embed_endogenous(patches, params);

        Tensor tokens;
        if (cross) {
            const std::array<Tensor, 2> parts{z, *params.global_token};
            tokens = concat(parts, 0);
        } else {
            const std::array<Tensor, 2> parts{z, h_ex};
            tokens = concat(parts, 0);
        }

        for (const auto& blk : params.blocks)
            tokens = encoder_block(tokens, cross ? &h_ex : nullptr, blk, config.heads,
                                   config.dropout, rng, training, trace);

        Tensor flat = cross ? reshape(tokens, {1, (n_en + 1) * d})
                            : reshape(slice(tokens, 0, 0, n_en), {1, n_en * d});
        Tensor y = add_row(matmul(flat, params.head_w), params.head_b);
        y = shift(scale(y, endo_state.std[static_cast<size_t>(ch)]),
                  endo_state.mean[static_cast<size_t>(ch)]);
        channel_preds.push_back(y);
    }
    return concat(channel_preds, 0);
}

// --- checkpoint -------------------------------------------------------

namespace {
constexpr const char* kCheckpointMagic = "twsf.checkpoint.v1";

std::string next_line(std::istream& is, const char* what) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError(std::string("checkpoint: missing ") + what);
    return line;
}
}  // namespace

void save_checkpoint(const std::string& path, Checkpoint& ckpt) {
    std::ofstream os(path);
    if (!os) throw ParseError("checkpoint: cannot open for write: " + path);
    os << kCheckpointMagic << "\n";
    os << "[config]\n";
    write_config(os, ckpt.config);
    os << "[whitener]\n";
    os << "ref " << (ckpt.whitener_ref.empty() ? "none" : ckpt.whitener_ref) << "\n";
    os << "present " << (ckpt.whitener ? 1 : 0) << "\n";
    if (ckpt.whitener) ckpt.whitener->save(os);
    os << "[params]\n";
    auto named = ckpt.params.named_tensors();
    os << "count " << named.size() << "\n";
    for (auto& [name, t] : named) {
        os << name << " " << t.ndim();
        for (int64_t dim : t.shape()) os << " " << dim;
        os << "\n";
        const auto vals = t.values();
        for (size_t i = 0; i < vals.size(); ++i) os << (i ? " " : "") << fmt_g17(vals[i]);
        os << "\n";
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("checkpoint: cannot open: " + path);
    if (next_line(is, "header") != kCheckpointMagic)
        throw ParseError("checkpoint: bad format header");
    if (next_line(is, "[config]") != "[config]")
        throw ParseError("checkpoint: expected [config] section");

    std::ostringstream config_text;
    std::string line;
    while (true) {
        line = next_line(is, "config entry");
        if (line == "[whitener]") break;
        config_text << line << "\n";
    }
    std::istringstream config_is(config_text.str());

    Checkpoint ckpt;
    ckpt.config = parse_config(config_is);
    ckpt.config.validate();

    line = next_line(is, "whitener ref");
    if (line.rfind("ref ", 0) != 0) throw ParseError("checkpoint: expected whitener ref");
    ckpt.whitener_ref = line.substr(4);
    if (ckpt.whitener_ref == "none") ckpt.whitener_ref.clear();
    line = next_line(is, "whitener present");
    if (line == "present 1")
        ckpt.whitener = TwsWhitener::load(is);
    else if (line != "present 0")
        throw ParseError("checkpoint: bad whitener presence line");
    if (ckpt.config.tws_enabled != ckpt.whitener.has_value())
        throw ParseError("checkpoint: whitener presence disagrees with config tws flag");

    if (next_line(is, "[params]") != "[params]")
        throw ParseError("checkpoint: expected [params] section");
    ckpt.params = ForecasterParams::build(ckpt.config);
    auto named = ckpt.params.named_tensors();

    line = next_line(is, "param count");
    {
        std::istringstream ss(line);
        std::string head, val;
        ss >> head >> val;
        if (head != "count") throw ParseError("checkpoint: expected param count");
        if (parse_int(val, "count") != static_cast<int64_t>(named.size()))
            throw ParseError("checkpoint: has " + val + " params, config implies " +
                             std::to_string(named.size()));
    }

    for (auto& [name, t] : named) {
        std::istringstream hs(next_line(is, "param header"));
        std::string got_name;
        int64_t rank = 0;
        hs >> got_name >> rank;
        if (got_name != name)
            throw ParseError("checkpoint: expected param '" + name + "', found '" + got_name + "'");
        Shape shape;
        for (int64_t r = 0; r < rank; ++r) {
            int64_t dim = 0;
            if (!(hs >> dim)) throw ParseError("checkpoint: short shape for '" + name + "'");
            shape.push_back(dim);
        }
        if (shape != t.shape())
            throw ParseError("checkpoint: shape mismatch for '" + name + "': file has " +
                             shape_str(shape) + ", config implies " + shape_str(t.shape()));
        std::istringstream vs(next_line(is, "param values"));
        auto vals = t.mutable_values();
        for (size_t i = 0; i < vals.size(); ++i) {
            std::string tok;
            if (!(vs >> tok))
                throw ParseError("checkpoint: short value row for '" + name + "'");
            vals[i] = parse_double(tok, name.c_str());
        }
    }
    return ckpt;
}

}  // namespace twsf

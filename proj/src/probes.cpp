#include "hsprobe/probes.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hsprobe {

static_assert(std::endian::native == std::endian::little,
              "checkpoint byte format assumes a little-endian host");

namespace {

using Mat = MatX<double>;
using T = Tape<double>;
using Var = T::Var;

constexpr double kMaskValue = -1e9;
constexpr double kProbEps = 1e-12;

// ---------------------------------------------------------------------------
// Parameter layout. One function defines every family's census; the factory,
// the binder, and the checkpoint reader all derive from it.

enum class Init { Weight, Bias, Gamma, Embedding };

struct ParamDef {
    std::string name;
    int rows = 0;
    int cols = 0;
    Init init = Init::Weight;
};

void push_linear(std::vector<ParamDef>& defs, const std::string& prefix, int in, int out) {
    defs.push_back({prefix + ".W", in, out, Init::Weight});
    defs.push_back({prefix + ".b", 1, out, Init::Bias});
}

// in -> hidden... -> out with an activation between layers (applied by the
// graph builder, not here).
void push_mlp(std::vector<ParamDef>& defs, const std::string& prefix, int in,
              const std::vector<int>& hidden, int out) {
    int cur = in;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        push_linear(defs, prefix + ".l" + std::to_string(i), cur, hidden[i]);
        cur = hidden[i];
    }
    push_linear(defs, prefix + ".l" + std::to_string(hidden.size()), cur, out);
}

void push_encoder_block(std::vector<ParamDef>& defs, const std::string& prefix, int d) {
    for (const char* w : {"wq", "wk", "wv", "wo"})
        defs.push_back({prefix + ".attn." + w, d, d, Init::Weight});
    for (const char* b : {"bq", "bk", "bv", "bo"})
        defs.push_back({prefix + ".attn." + b, 1, d, Init::Bias});
    defs.push_back({prefix + ".ln1.g", 1, d, Init::Gamma});
    defs.push_back({prefix + ".ln1.b", 1, d, Init::Bias});
    push_linear(defs, prefix + ".ffn.up", d, 4 * d);
    push_linear(defs, prefix + ".ffn.down", 4 * d, d);
    defs.push_back({prefix + ".ln2.g", 1, d, Init::Gamma});
    defs.push_back({prefix + ".ln2.b", 1, d, Init::Bias});
}

void push_encoder_stack(std::vector<ParamDef>& defs, const std::string& base, int depth, int d) {
    for (int i = 0; i < depth; ++i) push_encoder_block(defs, base + std::to_string(i), d);
}

std::vector<ParamDef> layout_defs(const ProbeSpec& spec) {
    spec.validate();
    const int L = spec.shape.layers;
    const int Tf = spec.shape.tokens_fixed;
    const int D = spec.shape.hidden;
    const int d = spec.d;

    std::vector<ParamDef> defs;
    switch (spec.family) {
        case ProbeFamily::M0:
            push_mlp(defs, "m0.mlp", D, spec.mlp_hidden, 1);
            break;
        case ProbeFamily::M1: {
            if (spec.m1_per_layer) {
                for (int l = 0; l < L; ++l)
                    push_mlp(defs, "m1.layer" + std::to_string(l), D, spec.mlp_hidden, 1);
            } else {
                int cur = D;
                for (std::size_t i = 0; i < spec.mlp_hidden.size(); ++i) {
                    push_linear(defs, "m1.trunk.l" + std::to_string(i), cur, spec.mlp_hidden[i]);
                    cur = spec.mlp_hidden[i];
                }
                for (int l = 0; l < L; ++l) {
                    defs.push_back({"m1.head" + std::to_string(l) + ".w", cur, 1, Init::Weight});
                    defs.push_back({"m1.head" + std::to_string(l) + ".b", 1, 1, Init::Bias});
                }
            }
            break;
        }
        case ProbeFamily::M2:
            push_linear(defs, "m2.proj", D, d);
            defs.push_back({"m2.pos_layer.E", L, d, Init::Embedding});
            defs.push_back({"m2.pos_token.E", Tf, d, Init::Embedding});
            defs.push_back({"m2.cls.E", 1, d, Init::Embedding});
            push_encoder_stack(defs, "m2.enc", spec.encoder_depth, d);
            push_linear(defs, "m2.head", d, 1);
            break;
        case ProbeFamily::M3:
            push_linear(defs, "m3.proj", D, d);
            defs.push_back({"m3.tok.E", Tf, d, Init::Embedding});
            push_encoder_stack(defs, "m3.local", spec.encoder_depth, d);
            defs.push_back({"m3.layer.E", L, d, Init::Embedding});
            push_encoder_stack(defs, "m3.global", spec.encoder_depth, d);
            push_linear(defs, "m3.head", d, 1);
            break;
        case ProbeFamily::M4:
            push_linear(defs, "m4.proj", D, d);
            defs.push_back({"m4.layer.E", L, d, Init::Embedding});
            defs.push_back({"m4.queries.E", spec.query_count, d, Init::Embedding});
            defs.push_back({"m4.attn.wk", d, d, Init::Weight});
            defs.push_back({"m4.attn.bk", 1, d, Init::Bias});
            defs.push_back({"m4.attn.wv", d, d, Init::Weight});
            defs.push_back({"m4.attn.bv", 1, d, Init::Bias});
            defs.push_back({"m4.fuse.W", spec.query_count * d, d, Init::Weight});
            defs.push_back({"m4.fuse.b", 1, d, Init::Bias});
            defs.push_back({"m4.ln.g", 1, d, Init::Gamma});
            defs.push_back({"m4.ln.b", 1, d, Init::Bias});
            if (spec.m4_gate) {
                defs.push_back({"m4.gate.W", d, d, Init::Weight});
                defs.push_back({"m4.gate.b", 1, d, Init::Bias});
            }
            defs.push_back({"m4.cls.E", 1, d, Init::Embedding});
            push_encoder_stack(defs, "m4.enc", spec.encoder_depth, d);
            push_linear(defs, "m4.head", d, 1);
            break;
    }
    std::sort(defs.begin(), defs.end(),
              [](const ParamDef& a, const ParamDef& b) { return a.name < b.name; });
    return defs;
}

// ---------------------------------------------------------------------------
// Input conversion (half storage -> double matrices).

Mat full_matrix(const HiddenStateTensor& h) {
    const int L = h.layer_count(), Tf = h.fixed_tokens(), D = h.hidden_dim();
    Mat out(static_cast<Eigen::Index>(L) * Tf, D);
    for (int l = 0; l < L; ++l) out.middleRows(static_cast<Eigen::Index>(l) * Tf, Tf) =
        h.layer(l).cast<double>();
    return out;
}

// L x D matrix of the layer vectors at one token slot.
Mat token_slice(const HiddenStateTensor& h, int t) {
    const int L = h.layer_count(), D = h.hidden_dim();
    Mat out(L, D);
    for (int l = 0; l < L; ++l)
        for (int dd = 0; dd < D; ++dd) out(l, dd) = static_cast<double>(h.at(l, t, dd));
    return out;
}

// ---------------------------------------------------------------------------
// Graph-building helpers.

struct Builder {
    T& tape;
    const ParamBinding& binding;
    const ProbeSpec& spec;
    Rng* rng;  // nullptr in eval mode

    Var p(const std::string& name) const { return binding.at(name); }

    Var drop(Var x) const {
        if (rng == nullptr || spec.dropout == 0.0) return x;
        return tape.dropout(x, spec.dropout, *rng, true);
    }

    Var linear(const std::string& prefix, Var x) const {
        return tape.add_rowvec(tape.matmul(x, p(prefix + ".W")), p(prefix + ".b"));
    }

    // ReLU MLP: hidden layers activated (with dropout), last layer linear.
    Var mlp(const std::string& prefix, Var x, std::size_t hidden_layers) const {
        for (std::size_t i = 0; i < hidden_layers; ++i)
            x = drop(tape.relu(linear(prefix + ".l" + std::to_string(i), x)));
        return linear(prefix + ".l" + std::to_string(hidden_layers), x);
    }

    // Multi-head scaled dot-product attention; mask is added to the scores.
    Var attention(Var q, Var k, Var v, const Mat& mask) const {
        const int d = static_cast<int>(tape.value(q).cols());
        const int dk = d / spec.heads;
        Var merged{};
        for (int hd = 0; hd < spec.heads; ++hd) {
            Var qh = tape.cols(q, hd * dk, dk);
            Var kh = tape.cols(k, hd * dk, dk);
            Var vh = tape.cols(v, hd * dk, dk);
            Var scores = tape.scale(tape.matmul(qh, kh, false, true), 1.0 / std::sqrt(double(dk)));
            Var attn = tape.softmax_rows(tape.add_const(scores, mask));
            Var oh = tape.matmul(attn, vh);
            merged = hd == 0 ? oh : tape.hconcat(merged, oh);
        }
        return merged;
    }

    // Post-norm encoder block: x = LN(x + Drop(SelfAttn(x))); same for FFN.
    Var encoder_block(const std::string& prefix, Var x, const Mat& mask) const {
        Var q = tape.add_rowvec(tape.matmul(x, p(prefix + ".attn.wq")), p(prefix + ".attn.bq"));
        Var k = tape.add_rowvec(tape.matmul(x, p(prefix + ".attn.wk")), p(prefix + ".attn.bk"));
        Var v = tape.add_rowvec(tape.matmul(x, p(prefix + ".attn.wv")), p(prefix + ".attn.bv"));
        Var att = attention(q, k, v, mask);
        att = tape.add_rowvec(tape.matmul(att, p(prefix + ".attn.wo")), p(prefix + ".attn.bo"));
        x = tape.layernorm_rows(tape.add(x, drop(att)), p(prefix + ".ln1.g"), p(prefix + ".ln1.b"));
        Var ff = linear(prefix + ".ffn.down", tape.gelu(linear(prefix + ".ffn.up", x)));
        return tape.layernorm_rows(tape.add(x, drop(ff)), p(prefix + ".ln2.g"),
                                   p(prefix + ".ln2.b"));
    }

    Var encoder_stack(const std::string& base, Var x, const Mat& mask) const {
        for (int i = 0; i < spec.encoder_depth; ++i)
            x = encoder_block(base + std::to_string(i), x, mask);
        return x;
    }
};

// S_q x S_k additive mask: kMaskValue in every masked key column.
Mat key_mask(int s_q, int s_k, const std::vector<bool>& masked_key) {
    Mat m = Mat::Zero(s_q, s_k);
    for (int c = 0; c < s_k; ++c)
        if (masked_key[static_cast<std::size_t>(c)]) m.col(c).setConstant(kMaskValue);
    return m;
}

std::vector<bool> padded_token_flags(const ProbeSpec& spec, const HiddenStateTensor& h) {
    std::vector<bool> flags(static_cast<std::size_t>(spec.shape.tokens_fixed), false);
    if (spec.mask_padding)
        for (int t = h.valid_tokens(); t < spec.shape.tokens_fixed; ++t)
            flags[static_cast<std::size_t>(t)] = true;
    return flags;
}

// ---------------------------------------------------------------------------
// Family forwards. Each returns the pre-sigmoid logit node.

ProbeGraph m0_graph(Builder& b, const HiddenStateTensor& h) {
    VecX<double> pooled = mean_pool_all<double>(h, b.spec.mask_padding);
    Var x = b.tape.input(pooled.transpose());
    return {b.mlp("m0.mlp", x, b.spec.mlp_hidden.size()), {}};
}

ProbeGraph m1_graph(Builder& b, const HiddenStateTensor& h) {
    const int L = b.spec.shape.layers;
    Mat z = mean_pool_tokens<double>(h, b.spec.mask_padding);
    Var zv = b.tape.input(std::move(z));

    std::vector<Var> layer_logits;
    layer_logits.reserve(static_cast<std::size_t>(L));
    if (b.spec.m1_per_layer) {
        for (int l = 0; l < L; ++l)
            layer_logits.push_back(b.mlp("m1.layer" + std::to_string(l), b.tape.row(zv, l),
                                         b.spec.mlp_hidden.size()));
    } else {
        Var g = zv;
        for (std::size_t i = 0; i < b.spec.mlp_hidden.size(); ++i)
            g = b.drop(b.tape.relu(b.linear("m1.trunk.l" + std::to_string(i), g)));
        for (int l = 0; l < L; ++l) {
            const std::string head = "m1.head" + std::to_string(l);
            layer_logits.push_back(b.tape.add(
                b.tape.matmul(b.tape.row(g, l), b.p(head + ".w")), b.p(head + ".b")));
        }
    }
    Var sum = layer_logits[0];
    for (int l = 1; l < L; ++l) sum = b.tape.add(sum, layer_logits[static_cast<std::size_t>(l)]);
    return {sum, layer_logits};
}

ProbeGraph m2_graph(Builder& b, const HiddenStateTensor& h) {
    const int L = b.spec.shape.layers;
    const int Tf = b.spec.shape.tokens_fixed;
    Var x = b.linear("m2.proj", b.tape.input(full_matrix(h)));  // (L*T) x d
    // 2D position: layer embedding repeated per token run, token embedding
    // tiled per layer.
    x = b.tape.add(x, b.tape.repeat_each_row(b.p("m2.pos_layer.E"), Tf));
    x = b.tape.add(x, b.tape.tile_rows(b.p("m2.pos_token.E"), L));
    Var seq = b.drop(b.tape.vconcat(b.p("m2.cls.E"), x));  // CLS carries its own embedding

    const auto padded = padded_token_flags(b.spec, h);
    std::vector<bool> masked(static_cast<std::size_t>(L * Tf + 1), false);
    for (int l = 0; l < L; ++l)
        for (int t = 0; t < Tf; ++t)
            masked[static_cast<std::size_t>(1 + l * Tf + t)] = padded[static_cast<std::size_t>(t)];
    const Mat mask = key_mask(L * Tf + 1, L * Tf + 1, masked);

    seq = b.encoder_stack("m2.enc", seq, mask);
    return {b.linear("m2.head", b.tape.row(seq, 0)), {}};
}

ProbeGraph m3_graph(Builder& b, const HiddenStateTensor& h) {
    const int L = b.spec.shape.layers;
    const int Tf = b.spec.shape.tokens_fixed;
    const auto padded = padded_token_flags(b.spec, h);
    const Mat local_mask = key_mask(Tf, Tf, padded);
    const int pool_t = b.spec.mask_padding ? h.valid_tokens() : Tf;

    // Local encoders share parameters across layers.
    Var stacked{};
    for (int l = 0; l < L; ++l) {
        Var x = b.linear("m3.proj", b.tape.input(h.layer_as<double>(l)));
        x = b.drop(b.tape.add(x, b.p("m3.tok.E")));
        x = b.encoder_stack("m3.local", x, local_mask);
        Var pooled = b.tape.mean_rows(pool_t == Tf ? x : b.tape.rows(x, 0, pool_t));
        stacked = l == 0 ? pooled : b.tape.vconcat(stacked, pooled);
    }
    Var z = b.tape.add(stacked, b.p("m3.layer.E"));  // layer identity for the global stage
    z = b.encoder_stack("m3.global", z, Mat::Zero(L, L));
    return {b.linear("m3.head", b.tape.mean_rows(z)), {}};
}

ProbeGraph m4_graph(Builder& b, const HiddenStateTensor& h) {
    const int Tf = b.spec.shape.tokens_fixed;
    const int d = b.spec.d;
    const int Q = b.spec.query_count;

    Var queries = b.p("m4.queries.E");
    Var fused{};
    for (int t = 0; t < Tf; ++t) {
        // Project the L layer vectors of this token and tag them by layer.
        Var A = b.linear("m4.proj", b.tape.input(token_slice(h, t)));
        A = b.tape.add(A, b.p("m4.layer.E"));
        Var k = b.tape.add_rowvec(b.tape.matmul(A, b.p("m4.attn.wk")), b.p("m4.attn.bk"));
        Var v = b.tape.add_rowvec(b.tape.matmul(A, b.p("m4.attn.wv")), b.p("m4.attn.bv"));
        Var att = b.attention(queries, k, v, Mat::Zero(Q, b.spec.shape.layers));  // Q x d

        Var flat = b.tape.row(att, 0);  // concat the Q attended outputs
        for (int q = 1; q < Q; ++q) flat = b.tape.hconcat(flat, b.tape.row(att, q));
        Var f = b.tape.add_rowvec(b.tape.matmul(flat, b.p("m4.fuse.W")), b.p("m4.fuse.b"));

        Var residual = b.tape.mean_rows(A);
        Var x = b.tape.layernorm_rows(b.tape.add(f, residual), b.p("m4.ln.g"), b.p("m4.ln.b"));
        if (b.spec.m4_gate)
            x = b.tape.hadamard(
                x, b.tape.sigmoid(b.tape.add_rowvec(b.tape.matmul(x, b.p("m4.gate.W")),
                                                    b.p("m4.gate.b"))));
        fused = t == 0 ? x : b.tape.vconcat(fused, x);
    }

    Var seq = b.tape.add_const(fused, sinusoidal_encoding(Tf, d));
    seq = b.drop(b.tape.vconcat(b.p("m4.cls.E"), seq));

    const auto padded = padded_token_flags(b.spec, h);
    std::vector<bool> masked(static_cast<std::size_t>(Tf + 1), false);
    for (int t = 0; t < Tf; ++t) masked[static_cast<std::size_t>(1 + t)] = padded[static_cast<std::size_t>(t)];
    seq = b.encoder_stack("m4.enc", seq, key_mask(Tf + 1, Tf + 1, masked));
    return {b.linear("m4.head", b.tape.row(seq, 0)), {}};
}

double stable_sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(ProbeFamily f) {
    switch (f) {
        case ProbeFamily::M0: return "m0";
        case ProbeFamily::M1: return "m1";
        case ProbeFamily::M2: return "m2";
        case ProbeFamily::M3: return "m3";
        case ProbeFamily::M4: return "m4";
    }
    throw ConfigError("to_string: unknown probe family");
}

ProbeFamily probe_family_from_string(const std::string& s) {
    if (s == "m0" || s == "M0") return ProbeFamily::M0;
    if (s == "m1" || s == "M1") return ProbeFamily::M1;
    if (s == "m2" || s == "M2") return ProbeFamily::M2;
    if (s == "m3" || s == "M3") return ProbeFamily::M3;
    if (s == "m4" || s == "M4") return ProbeFamily::M4;
    throw ConfigError("unknown probe family '" + s + "' (expected m0..m4)");
}

void ProbeSpec::validate() const {
    shape.validate();
    if (d <= 0) throw ConfigError("ProbeSpec: d must be positive");
    if (heads <= 0 || d % heads != 0) throw ConfigError("ProbeSpec: d must be divisible by heads");
    if (encoder_depth < 0) throw ConfigError("ProbeSpec: encoder_depth must be >= 0");
    if (query_count < 1) throw ConfigError("ProbeSpec: query_count must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("ProbeSpec: dropout must lie in [0,1)");
    for (const int hsz : mlp_hidden)
        if (hsz <= 0) throw ConfigError("ProbeSpec: mlp_hidden sizes must be positive");
}

nlohmann::json ProbeSpec::to_json() const {
    return {{"family", to_string(family)},
            {"shape",
             {{"layers", shape.layers}, {"tokens_fixed", shape.tokens_fixed}, {"hidden", shape.hidden}}},
            {"d", d},
            {"mlp_hidden", mlp_hidden},
            {"heads", heads},
            {"encoder_depth", encoder_depth},
            {"query_count", query_count},
            {"dropout", dropout},
            {"mask_padding", mask_padding},
            {"m1_per_layer", m1_per_layer},
            {"m4_gate", m4_gate}};
}

ProbeSpec ProbeSpec::from_json(const nlohmann::json& j) {
    try {
        ProbeSpec s;
        s.family = probe_family_from_string(j.at("family").get<std::string>());
        s.shape.layers = j.at("shape").at("layers").get<int>();
        s.shape.tokens_fixed = j.at("shape").at("tokens_fixed").get<int>();
        s.shape.hidden = j.at("shape").at("hidden").get<int>();
        s.d = j.at("d").get<int>();
        s.mlp_hidden = j.at("mlp_hidden").get<std::vector<int>>();
        s.heads = j.at("heads").get<int>();
        s.encoder_depth = j.at("encoder_depth").get<int>();
        s.query_count = j.at("query_count").get<int>();
        s.dropout = j.at("dropout").get<double>();
        s.mask_padding = j.at("mask_padding").get<bool>();
        s.m1_per_layer = j.at("m1_per_layer").get<bool>();
        s.m4_gate = j.at("m4_gate").get<bool>();
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("ProbeSpec JSON: ") + e.what());
    }
}

ProbeSpec desk_probe_spec(ProbeFamily family, ShapeConfig shape) {
    ProbeSpec s;
    s.family = family;
    s.shape = shape;
    s.d = 16;
    s.mlp_hidden = {16};
    s.heads = 2;
    s.encoder_depth = 1;
    s.query_count = 2;
    return s;
}

ProbeSpec paper_probe_spec(ProbeFamily family, ShapeConfig shape) {
    ProbeSpec s;
    s.family = family;
    s.shape = shape;
    s.d = 256;
    s.mlp_hidden = {256, 64};
    s.heads = 4;
    s.encoder_depth = 2;
    s.query_count = 4;
    return s;
}

std::size_t ProbeModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : params) n += static_cast<std::size_t>(m.size());
    return n;
}

std::vector<std::pair<std::string, std::pair<int, int>>> parameter_layout(const ProbeSpec& spec) {
    std::vector<std::pair<std::string, std::pair<int, int>>> out;
    for (const auto& def : layout_defs(spec)) out.push_back({def.name, {def.rows, def.cols}});
    return out;
}

ProbeModel probe_factory(const ProbeSpec& spec, std::uint64_t seed) {
    ProbeModel model;
    model.spec = spec;
    model.seed = seed;
    for (const auto& def : layout_defs(spec)) {
        Mat m(def.rows, def.cols);
        Rng rng(derive_seed(seed, "init-" + def.name));
        switch (def.init) {
            case Init::Weight: {
                const double bound = std::sqrt(6.0 / (def.rows + def.cols));
                for (int r = 0; r < def.rows; ++r)
                    for (int c = 0; c < def.cols; ++c) m(r, c) = rng.uniform(-bound, bound);
                break;
            }
            case Init::Bias:
                m.setZero();
                break;
            case Init::Gamma:
                m.setOnes();
                break;
            case Init::Embedding:
                // Standard-normal, not a small scale: position and query
                // embeddings must separate rows from the first step, or
                // layer-identity signals stay invisible to attention for
                // most of training.
                for (int r = 0; r < def.rows; ++r)
                    for (int c = 0; c < def.cols; ++c) m(r, c) = rng.normal();
                break;
        }
        model.params.emplace(def.name, std::move(m));
    }
    return model;
}

Tape<double>::Var ParamBinding::at(const std::string& name) const {
    const auto it = std::lower_bound(names.begin(), names.end(), name);
    if (it == names.end() || *it != name)
        throw ConfigError("ParamBinding: unknown parameter '" + name + "'");
    return vars[static_cast<std::size_t>(it - names.begin())];
}

ParamBinding bind_params(Tape<double>& tape, const ProbeModel& model) {
    ParamBinding binding;
    for (const auto& [name, m] : model.params) {
        binding.names.push_back(name);
        binding.vars.push_back(tape.input(m));
    }
    return binding;
}

ProbeGraph probe_logit(Tape<double>& tape, const ParamBinding& binding, const ProbeSpec& spec,
                       const HiddenStateTensor& h, Rng* dropout_rng) {
    if (!(h.shape() == spec.shape))
        throw DataError("probe_logit: tensor shape does not match the probe spec");
    Builder b{tape, binding, spec, dropout_rng};
    switch (spec.family) {
        case ProbeFamily::M0: return m0_graph(b, h);
        case ProbeFamily::M1: return m1_graph(b, h);
        case ProbeFamily::M2: return m2_graph(b, h);
        case ProbeFamily::M3: return m3_graph(b, h);
        case ProbeFamily::M4: return m4_graph(b, h);
    }
    throw ConfigError("probe_logit: unknown probe family");
}

ForwardResult probe_forward(const ProbeModel& model, const HiddenStateTensor& h) {
    Tape<double> tape;
    const ParamBinding binding = bind_params(tape, model);
    const ProbeGraph g = probe_logit(tape, binding, model.spec, h, nullptr);
    ForwardResult out;
    const double p = stable_sigmoid(tape.value(g.logit)(0, 0));
    out.probability = std::clamp(p, kProbEps, 1.0 - kProbEps);
    for (const auto v : g.layer_logits) out.layer_logits.push_back(tape.value(v)(0, 0));
    return out;
}

std::vector<double> probe_forward_batch(const ProbeModel& model,
                                        const std::vector<HiddenStateTensor>& batch) {
    std::vector<double> out;
    out.reserve(batch.size());
    for (const auto& h : batch) out.push_back(probe_forward(model, h).probability);
    return out;
}

MatX<double> sinusoidal_encoding(int positions, int dim) {
    if (positions < 1 || dim < 1) throw ConfigError("sinusoidal_encoding: bad dimensions");
    MatX<double> pe(positions, dim);
    for (int t = 0; t < positions; ++t)
        for (int i = 0; i < dim; ++i) {
            const double rate = std::pow(10000.0, -2.0 * (i / 2) / static_cast<double>(dim));
            pe(t, i) = i % 2 == 0 ? std::sin(t * rate) : std::cos(t * rate);
        }
    return pe;
}

// ---------------------------------------------------------------------------
// Checkpoints.

void save_checkpoint(const std::filesystem::path& path, const ProbeModel& model,
                     const nlohmann::json& extra) {
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["scalar"] = "float64";
    header["spec"] = model.spec.to_json();
    header["seed"] = model.seed;
    header["parameter_count"] = model.parameter_count();
    nlohmann::json plist = nlohmann::json::array();
    for (const auto& [name, m] : model.params)
        plist.push_back({{"name", name},
                         {"rows", static_cast<int>(m.rows())},
                         {"cols", static_cast<int>(m.cols())}});
    header["params"] = std::move(plist);
    header["extra"] = extra;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_checkpoint: cannot open " + path.string());
    const std::uint32_t magic = kCheckpointMagic;
    const std::uint16_t version = kCheckpointVersion;
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&version), 2);
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, m] : model.params)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double v = m(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof v);
            }
    if (!out) throw DataError("save_checkpoint: write failed for " + path.string());
}

ProbeModel load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot open " + path.string());
    std::uint32_t magic = 0, hlen = 0;
    std::uint16_t version = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&version), 2);
    in.read(reinterpret_cast<char*>(&hlen), 4);
    if (!in || magic != kCheckpointMagic)
        throw DataError("load_checkpoint: not a checkpoint file: " + path.string());
    if (version != kCheckpointVersion)
        throw DataError("load_checkpoint: unsupported checkpoint version");
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw DataError("load_checkpoint: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("load_checkpoint: bad header JSON: ") + e.what());
    }

    ProbeModel model;
    try {
        model.spec = ProbeSpec::from_json(header.at("spec"));
        model.seed = header.at("seed").get<std::uint64_t>();
        if (header.at("scalar").get<std::string>() != "float64")
            throw DataError("load_checkpoint: unsupported scalar type");
        for (const auto& pj : header.at("params")) {
            const auto name = pj.at("name").get<std::string>();
            const int rows = pj.at("rows").get<int>();
            const int cols = pj.at("cols").get<int>();
            if (rows < 1 || cols < 1) throw DataError("load_checkpoint: bad parameter shape");
            Mat m(rows, cols);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) {
                    double v = 0.0;
                    in.read(reinterpret_cast<char*>(&v), sizeof v);
                    m(r, c) = v;
                }
            model.params.emplace(name, std::move(m));
        }
        if (extra != nullptr) *extra = header.value("extra", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("load_checkpoint: bad header fields: ") + e.what());
    }
    if (!in) throw DataError("load_checkpoint: truncated parameter data");
    in.peek();
    if (!in.eof()) throw DataError("load_checkpoint: trailing bytes after parameter data");
    if (model.parameter_count() != header.at("parameter_count").get<std::size_t>())
        throw DataError("load_checkpoint: parameter count mismatch");
    return model;
}

}  // namespace hsprobe

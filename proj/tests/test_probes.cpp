#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <vector>

#include "hsprobe/probes.hpp"
#include "hsprobe/rng.hpp"
#include "hsprobe/tensor.hpp"

using namespace hsprobe;

using Mat = MatX<double>;
using T = Tape<double>;

namespace {

HiddenStateTensor random_tensor(const ShapeConfig& shape, int token_count, std::uint64_t seed) {
    HiddenStateTensor h(shape, token_count);
    Rng rng(seed);
    const int tv = std::min(token_count, shape.tokens_fixed);
    for (int l = 0; l < shape.layers; ++l)
        for (int t = 0; t < tv; ++t)
            for (int d = 0; d < shape.hidden; ++d)
                h.at(l, t, d) = Half(static_cast<float>(rng.normal()));
    return h;
}

// Tiny dims that still exercise every architectural piece.
ProbeSpec tiny_spec(ProbeFamily family) {
    ProbeSpec s = desk_probe_spec(family, ShapeConfig{3, 4, 6});
    s.d = 4;
    s.mlp_hidden = {5};
    s.heads = 2;
    s.encoder_depth = 1;
    s.query_count = 2;
    return s;
}

double smoothed_loss(T& tape, T::Var logit) {
    return tape.value(tape.weighted_bce_logit(logit, 0.975, 1.0, 1.4))(0, 0);
}

// Central-difference check of the training loss against every parameter.
// Dropout stays active; each rebuild re-draws the identical mask sequence.
double probe_fd_max_rel_err(const ProbeSpec& spec, const HiddenStateTensor& h,
                            std::uint64_t seed, double hstep = 1e-4) {
    ProbeModel model = probe_factory(spec, seed);

    std::map<std::string, Mat> analytic;
    {
        T tape;
        const ParamBinding binding = bind_params(tape, model);
        Rng drop_rng(777);
        ProbeGraph g = probe_logit(tape, binding, spec, h, &drop_rng);
        tape.backward(tape.weighted_bce_logit(g.logit, 0.975, 1.0, 1.4));
        for (std::size_t i = 0; i < binding.names.size(); ++i)
            analytic[binding.names[i]] = tape.grad(binding.vars[i]);
    }

    auto eval = [&](const ProbeModel& m) {
        T tape;
        const ParamBinding binding = bind_params(tape, m);
        Rng drop_rng(777);
        ProbeGraph g = probe_logit(tape, binding, spec, h, &drop_rng);
        return smoothed_loss(tape, g.logit);
    };

    double worst = 0.0;
    for (auto& [name, base] : model.params) {
        for (Eigen::Index r = 0; r < base.rows(); ++r)
            for (Eigen::Index c = 0; c < base.cols(); ++c) {
                ProbeModel plus = model, minus = model;
                plus.params[name](r, c) += hstep;
                minus.params[name](r, c) -= hstep;
                const double fd = (eval(plus) - eval(minus)) / (2.0 * hstep);
                const double g = analytic[name](r, c);
                const double rel =
                    std::abs(fd - g) / std::max({1e-4, std::abs(fd), std::abs(g)});
                worst = std::max(worst, rel);
            }
    }
    return worst;
}

const std::vector<ProbeFamily> kAllFamilies = {ProbeFamily::M0, ProbeFamily::M1, ProbeFamily::M2,
                                               ProbeFamily::M3, ProbeFamily::M4};

}  // namespace

TEST_CASE("family names round trip") {
    for (const auto f : kAllFamilies) CHECK(probe_family_from_string(to_string(f)) == f);
    CHECK(probe_family_from_string("M3") == ProbeFamily::M3);
    CHECK_THROWS_AS(probe_family_from_string("m5"), ConfigError);
}

TEST_CASE("spec validation rejects bad dimensions") {
    ProbeSpec s = desk_probe_spec(ProbeFamily::M2);
    s.d = 15;
    CHECK_THROWS_AS(s.validate(), ConfigError);  // heads=2 does not divide 15
    s = desk_probe_spec(ProbeFamily::M4);
    s.query_count = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = desk_probe_spec(ProbeFamily::M0);
    s.dropout = 1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = desk_probe_spec(ProbeFamily::M0);
    s.mlp_hidden = {16, -1};
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("spec JSON round trip") {
    ProbeSpec s = paper_probe_spec(ProbeFamily::M4);
    s.m1_per_layer = true;
    s.m4_gate = false;
    s.dropout = 0.25;
    const ProbeSpec back = ProbeSpec::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
    CHECK_THROWS_AS(ProbeSpec::from_json(nlohmann::json{{"family", "m0"}}), DataError);
}

TEST_CASE("pooled-mlp census matches the arithmetic oracle") {
    // 32 -> 16 -> 1 with biases: 32*16 + 16 + 16*1 + 1.
    ProbeSpec s = desk_probe_spec(ProbeFamily::M0, ShapeConfig{8, 16, 32});
    s.mlp_hidden = {16};
    const ProbeModel m = probe_factory(s, 1);
    CHECK(m.parameter_count() == 32 * 16 + 16 + 16 * 1 + 1);
    CHECK(m.parameter_count() == 545);
}

TEST_CASE("layer-attention census matches an independent hand count") {
    const ProbeSpec s = tiny_spec(ProbeFamily::M4);
    const int L = s.shape.layers, Tf = s.shape.tokens_fixed, D = s.shape.hidden;
    const int d = s.d, Q = s.query_count, depth = s.encoder_depth;
    const int encoder_block = 4 * d * d + 4 * d        // attn wq..wo + biases
                              + 2 * d                  // ln1
                              + d * 4 * d + 4 * d      // ffn up
                              + 4 * d * d + d          // ffn down
                              + 2 * d;                 // ln2
    const int expect = (D * d + d)                     // proj
                       + L * d                         // layer embedding
                       + Q * d                         // queries
                       + 2 * (d * d + d)               // wk/bk, wv/bv
                       + (Q * d) * d + d               // fuse
                       + 2 * d                         // ln
                       + (d * d + d)                   // gate
                       + d                             // cls
                       + depth * encoder_block         // outer encoder
                       + d + 1;                        // head
    (void)Tf;
    const ProbeModel m = probe_factory(s, 3);
    CHECK(static_cast<int>(m.parameter_count()) == expect);
}

TEST_CASE("factory is deterministic and census is stable across seeds") {
    for (const auto f : kAllFamilies) {
        const ProbeSpec s = tiny_spec(f);
        const ProbeModel a = probe_factory(s, 42), b = probe_factory(s, 42);
        const ProbeModel c = probe_factory(s, 43);
        CHECK(a.parameter_count() == c.parameter_count());
        bool identical = true, differs = false;
        for (const auto& [name, m] : a.params) {
            identical = identical && (m - b.params.at(name)).cwiseAbs().maxCoeff() == 0.0;
            differs = differs || (m - c.params.at(name)).cwiseAbs().maxCoeff() > 0.0;
        }
        CHECK(identical);
        CHECK(differs);

        const auto layout = parameter_layout(s);
        CHECK(layout.size() == a.params.size());
        std::size_t total = 0;
        for (const auto& [name, dims] : layout) {
            CHECK(a.params.count(name) == 1);
            total += static_cast<std::size_t>(dims.first) * dims.second;
        }
        CHECK(total == a.parameter_count());
    }
}

TEST_CASE("different families expose different parameter names") {
    const auto names_of = [](ProbeFamily f) {
        std::vector<std::string> names;
        for (const auto& [name, dims] : parameter_layout(tiny_spec(f))) names.push_back(name);
        return names;
    };
    const auto a = names_of(ProbeFamily::M2), b = names_of(ProbeFamily::M3);
    CHECK(a != b);
}

TEST_CASE("pooled-mlp zero input walks the bias-only path") {
    ProbeSpec s = desk_probe_spec(ProbeFamily::M0, ShapeConfig{2, 3, 4});
    s.mlp_hidden = {3};
    ProbeModel m = probe_factory(s, 7);
    const HiddenStateTensor zero(s.shape, 3);

    // Zero biases: the logit is exactly zero.
    CHECK(probe_forward(m, zero).probability == doctest::Approx(0.5).epsilon(1e-15));

    // Composed bias response: relu(b1) . W2 + b2.
    m.params.at("m0.mlp.l0.b") << 0.5, -0.3, 0.2;
    m.params.at("m0.mlp.l1.b") << 0.1;
    const Mat& W2 = m.params.at("m0.mlp.l1.W");
    const double logit = 0.5 * W2(0, 0) + 0.0 * W2(1, 0) + 0.2 * W2(2, 0) + 0.1;
    const double want = 1.0 / (1.0 + std::exp(-logit));
    CHECK(probe_forward(m, zero).probability == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("layer-wise probe: zero input, retrievable per-layer logits") {
    for (const bool per_layer : {false, true}) {
        ProbeSpec s = tiny_spec(ProbeFamily::M1);
        s.m1_per_layer = per_layer;
        const ProbeModel m = probe_factory(s, 5);
        const HiddenStateTensor zero(s.shape, s.shape.tokens_fixed);
        const ForwardResult r = probe_forward(m, zero);
        CHECK(r.layer_logits.size() == static_cast<std::size_t>(s.shape.layers));
        CHECK(r.probability == doctest::Approx(0.5).epsilon(1e-15));  // biases start at zero

        const HiddenStateTensor h = random_tensor(s.shape, s.shape.tokens_fixed, 21);
        const ForwardResult rr = probe_forward(m, h);
        double sum = 0.0;
        for (const double u : rr.layer_logits) sum += u;
        CHECK(rr.probability == doctest::Approx(1.0 / (1.0 + std::exp(-sum))).epsilon(1e-12));
    }
}

TEST_CASE("layer-wise probe symmetry: swapping layers and their heads") {
    for (const bool per_layer : {false, true}) {
        ProbeSpec s = tiny_spec(ProbeFamily::M1);
        s.m1_per_layer = per_layer;
        ProbeModel m = probe_factory(s, 11);
        const HiddenStateTensor h = random_tensor(s.shape, s.shape.tokens_fixed, 22);
        const double before = probe_forward(m, h).probability;

        // Swap layers 0 and 1 of the input...
        HiddenStateTensor hp = h;
        for (int t = 0; t < s.shape.tokens_fixed; ++t)
            for (int d = 0; d < s.shape.hidden; ++d)
                std::swap(hp.at(0, t, d), hp.at(1, t, d));
        // ...and the corresponding per-layer parameters.
        if (per_layer) {
            for (const char* part : {".l0.W", ".l0.b", ".l1.W", ".l1.b"})
                std::swap(m.params.at(std::string("m1.layer0") + part),
                          m.params.at(std::string("m1.layer1") + part));
        } else {
            std::swap(m.params.at("m1.head0.w"), m.params.at("m1.head1.w"));
            std::swap(m.params.at("m1.head0.b"), m.params.at("m1.head1.b"));
        }
        CHECK(probe_forward(m, hp).probability == doctest::Approx(before).epsilon(1e-12));
    }
}

TEST_CASE("outputs are probabilities and eval mode is deterministic") {
    for (const auto f : kAllFamilies) {
        const ProbeSpec s = tiny_spec(f);
        const ProbeModel m = probe_factory(s, 31);
        const HiddenStateTensor h = random_tensor(s.shape, 3, 23);
        const double p1 = probe_forward(m, h).probability;
        const double p2 = probe_forward(m, h).probability;
        CHECK(p1 > 0.0);
        CHECK(p1 < 1.0);
        CHECK(p1 == p2);
    }
}

TEST_CASE("probability stays inside (0,1) even when the head saturates") {
    ProbeSpec s = tiny_spec(ProbeFamily::M0);
    ProbeModel m = probe_factory(s, 31);
    m.params.at("m0.mlp.l1.b")(0, 0) = 1000.0;
    const HiddenStateTensor h = random_tensor(s.shape, 4, 24);
    const double p = probe_forward(m, h).probability;
    CHECK(p < 1.0);
    CHECK(p >= 1.0 - 1e-11);
    m.params.at("m0.mlp.l1.b")(0, 0) = -1000.0;
    const double q = probe_forward(m, h).probability;
    CHECK(q > 0.0);
    CHECK(q <= 1e-11);
}

TEST_CASE("batch forward equals per-sample forwards") {
    for (const auto f : kAllFamilies) {
        const ProbeSpec s = tiny_spec(f);
        const ProbeModel m = probe_factory(s, 17);
        std::vector<HiddenStateTensor> batch;
        for (int i = 0; i < 3; ++i) batch.push_back(random_tensor(s.shape, 2 + i, 40 + i));
        const auto probs = probe_forward_batch(m, batch);
        REQUIRE(probs.size() == 3);
        for (int i = 0; i < 3; ++i)
            CHECK(probs[static_cast<std::size_t>(i)] ==
                  probe_forward(m, batch[static_cast<std::size_t>(i)]).probability);
    }
}

TEST_CASE("padding mask: padded token slots cannot reach the output") {
    for (const auto f : {ProbeFamily::M2, ProbeFamily::M3, ProbeFamily::M4}) {
        ProbeSpec s = tiny_spec(f);
        s.mask_padding = true;
        const ProbeModel m = probe_factory(s, 19);
        HiddenStateTensor h = random_tensor(s.shape, 2, 25);  // slots 2,3 are padding
        const double before = probe_forward(m, h).probability;
        for (int l = 0; l < s.shape.layers; ++l)
            for (int t = 2; t < s.shape.tokens_fixed; ++t)
                for (int d = 0; d < s.shape.hidden; ++d)
                    h.at(l, t, d) = Half(static_cast<float>(13.0 + l + t + d));
        const double after = probe_forward(m, h).probability;
        CAPTURE(to_string(f));
        CHECK(std::abs(after - before) < 1e-6);
    }
}

TEST_CASE("token order matters to sequence models, never to the pooled one") {
    for (const auto f : kAllFamilies) {
        const ProbeSpec s = [&] {
            ProbeSpec t = tiny_spec(f);
            t.mask_padding = false;  // pool over every slot: the strict mean formula
            return t;
        }();
        const ProbeModel m = probe_factory(s, 29);
        const HiddenStateTensor h = random_tensor(s.shape, s.shape.tokens_fixed, 26);
        HiddenStateTensor hp = h;
        for (int l = 0; l < s.shape.layers; ++l)
            for (int d = 0; d < s.shape.hidden; ++d) {
                std::swap(hp.at(l, 0, d), hp.at(l, 1, d));
                std::swap(hp.at(l, 2, d), hp.at(l, 3, d));
            }
        const double a = probe_forward(m, h).probability;
        const double b = probe_forward(m, hp).probability;
        CAPTURE(to_string(f));
        if (f == ProbeFamily::M0 || f == ProbeFamily::M1) {
            // Token means absorb any within-layer token permutation.
            CHECK(a == doctest::Approx(b).epsilon(1e-12));
        } else {
            CHECK(std::abs(a - b) > 1e-9);
        }
    }

    // The layer-wise family does react to layer order (heads are per layer).
    const ProbeSpec s1 = tiny_spec(ProbeFamily::M1);
    const ProbeModel m1 = probe_factory(s1, 29);
    const HiddenStateTensor h = random_tensor(s1.shape, s1.shape.tokens_fixed, 26);
    HiddenStateTensor hl = h;
    for (int t = 0; t < s1.shape.tokens_fixed; ++t)
        for (int d = 0; d < s1.shape.hidden; ++d) std::swap(hl.at(0, t, d), hl.at(1, t, d));
    CHECK(std::abs(probe_forward(m1, h).probability - probe_forward(m1, hl).probability) > 1e-9);
}

TEST_CASE("pooled probe ignores any layer/token permutation") {
    ProbeSpec s = tiny_spec(ProbeFamily::M0);
    s.mask_padding = false;
    const ProbeModel m = probe_factory(s, 37);
    const HiddenStateTensor h = random_tensor(s.shape, s.shape.tokens_fixed, 27);
    HiddenStateTensor hp = h;
    // Reverse layers and rotate tokens: an arbitrary position permutation.
    for (int l = 0; l < s.shape.layers; ++l)
        for (int t = 0; t < s.shape.tokens_fixed; ++t)
            for (int d = 0; d < s.shape.hidden; ++d)
                hp.at(l, t, d) =
                    h.at(s.shape.layers - 1 - l, (t + 1) % s.shape.tokens_fixed, d);
    CHECK(probe_forward(m, hp).probability ==
          doctest::Approx(probe_forward(m, h).probability).epsilon(1e-12));
}

TEST_CASE("flat transformer with depth zero reads only its class token") {
    ProbeSpec s = tiny_spec(ProbeFamily::M2);
    s.encoder_depth = 0;
    const ProbeModel m = probe_factory(s, 41);
    const double a = probe_forward(m, random_tensor(s.shape, 4, 28)).probability;
    const double b = probe_forward(m, random_tensor(s.shape, 4, 29)).probability;
    CHECK(a == b);  // the class token never sees the input without attention
}

TEST_CASE("hierarchical probe with depth zero matches its closed form") {
    ProbeSpec s = tiny_spec(ProbeFamily::M3);
    s.encoder_depth = 0;
    s.mask_padding = true;
    const ProbeModel m = probe_factory(s, 43);
    const HiddenStateTensor h = random_tensor(s.shape, 3, 30);  // 3 of 4 slots valid

    // Identity encoders collapse the model to an affine head over the mean of
    // per-layer token means plus constant embedding offsets.
    const int tv = h.valid_tokens();
    const Mat& W = m.params.at("m3.proj.W");
    const Mat& bp = m.params.at("m3.proj.b");
    const Mat& tokE = m.params.at("m3.tok.E");
    const Mat& layE = m.params.at("m3.layer.E");
    Mat zbar = Mat::Zero(1, s.d);
    for (int l = 0; l < s.shape.layers; ++l) {
        Mat layer_mean = Mat::Zero(1, s.shape.hidden);
        for (int t = 0; t < tv; ++t)
            for (int d = 0; d < s.shape.hidden; ++d)
                layer_mean(0, d) += static_cast<double>(h.at(l, t, d));
        layer_mean /= tv;
        Mat z = layer_mean * W + bp + tokE.topRows(tv).colwise().mean() + layE.row(l);
        zbar += z;
    }
    zbar /= s.shape.layers;
    const double logit = (zbar * m.params.at("m3.head.W"))(0, 0) + m.params.at("m3.head.b")(0, 0);
    const double want = 1.0 / (1.0 + std::exp(-logit));
    CHECK(probe_forward(m, h).probability == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("fusion gate saturated open equals the ungated variant") {
    ProbeSpec gated = tiny_spec(ProbeFamily::M4);
    ProbeModel mg = probe_factory(gated, 47);
    mg.params.at("m4.gate.W").setZero();
    mg.params.at("m4.gate.b").setConstant(40.0);  // sigmoid -> 1 to double precision

    ProbeSpec plain = gated;
    plain.m4_gate = false;
    ProbeModel mp = probe_factory(plain, 47);
    for (auto& [name, mat] : mp.params) mat = mg.params.at(name);

    const HiddenStateTensor h = random_tensor(gated.shape, 4, 31);
    CHECK(probe_forward(mp, h).probability ==
          doctest::Approx(probe_forward(mg, h).probability).epsilon(1e-5));
}

TEST_CASE("shape mismatch is rejected") {
    const ProbeSpec s = tiny_spec(ProbeFamily::M0);
    const ProbeModel m = probe_factory(s, 53);
    const HiddenStateTensor wrong(ShapeConfig{4, 4, 6}, 2);
    CHECK_THROWS_AS(probe_forward(m, wrong), DataError);
}

TEST_CASE("training-mode dropout differs from eval and between draws") {
    ProbeSpec s = tiny_spec(ProbeFamily::M2);
    s.dropout = 0.5;
    const ProbeModel m = probe_factory(s, 59);
    const HiddenStateTensor h = random_tensor(s.shape, 4, 32);

    auto run = [&](Rng* rng) {
        T tape;
        const ParamBinding binding = bind_params(tape, m);
        return tape.value(probe_logit(tape, binding, s, h, rng).logit)(0, 0);
    };
    const double eval1 = run(nullptr), eval2 = run(nullptr);
    CHECK(eval1 == eval2);
    Rng r1(1), r2(2);
    const double t1 = run(&r1), t2 = run(&r2);
    CHECK(t1 != t2);
    CHECK(t1 != eval1);
}

TEST_CASE("gradient check: every family, every parameter") {
    for (const auto f : kAllFamilies) {
        const ProbeSpec s = tiny_spec(f);
        const HiddenStateTensor h = random_tensor(s.shape, 3, 33);
        const double err = probe_fd_max_rel_err(s, h, 61);
        CAPTURE(to_string(f));
        CHECK(err < 1e-3);
    }
}

TEST_CASE("gradient check: layer-wise per-layer variant and unmasked pooling") {
    ProbeSpec s = tiny_spec(ProbeFamily::M1);
    s.m1_per_layer = true;
    s.mask_padding = false;
    const HiddenStateTensor h = random_tensor(s.shape, 2, 34);
    CHECK(probe_fd_max_rel_err(s, h, 67) < 1e-3);
}

TEST_CASE("checkpoints round trip bit-exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "hsprobe_ckpt_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "probe.ckpt";

    ProbeSpec s = tiny_spec(ProbeFamily::M4);
    ProbeModel m = probe_factory(s, 71);
    // Awkward values must survive: denormal, negative zero, huge, tiny.
    m.params.at("m4.fuse.b")(0, 0) = 5e-324;
    m.params.at("m4.fuse.b")(0, 1) = -0.0;
    m.params.at("m4.fuse.b")(0, 2) = 1e308;

    nlohmann::json extra = {{"train_config_hash", "deadbeef"}, {"fold", 3}};
    save_checkpoint(path, m, extra);

    nlohmann::json extra_back;
    const ProbeModel back = load_checkpoint(path, &extra_back);
    CHECK(extra_back == extra);
    CHECK(back.seed == m.seed);
    CHECK(back.spec.to_json() == m.spec.to_json());
    REQUIRE(back.params.size() == m.params.size());
    for (const auto& [name, mat] : m.params) {
        const Mat& other = back.params.at(name);
        REQUIRE(other.rows() == mat.rows());
        REQUIRE(other.cols() == mat.cols());
        CHECK(std::memcmp(mat.data(), other.data(),
                          sizeof(double) * static_cast<std::size_t>(mat.size())) == 0);
    }

    // Forward parity after reload.
    const HiddenStateTensor h = random_tensor(s.shape, 4, 35);
    CHECK(probe_forward(back, h).probability == probe_forward(m, h).probability);

    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint loading rejects damage") {
    const auto dir = std::filesystem::temp_directory_path() / "hsprobe_ckpt_damage";
    std::filesystem::create_directories(dir);
    const auto path = dir / "probe.ckpt";
    const ProbeModel m = probe_factory(tiny_spec(ProbeFamily::M0), 73);
    save_checkpoint(path, m);

    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), DataError);

    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(0);
        f.write("XXXX", 4);  // break the magic
    }
    CHECK_THROWS_AS(load_checkpoint(path), DataError);

    save_checkpoint(path, m);
    {
        std::ofstream f(path, std::ios::binary | std::ios::app);
        f.put('\0');  // trailing garbage
    }
    CHECK_THROWS_AS(load_checkpoint(path), DataError);

    save_checkpoint(path, m);
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 5);  // truncated params
    CHECK_THROWS_AS(load_checkpoint(path), DataError);

    std::filesystem::remove_all(dir);
}

TEST_CASE("sinusoidal encoding: shape, range, distinct rows") {
    const Mat pe = sinusoidal_encoding(10, 8);
    CHECK(pe.rows() == 10);
    CHECK(pe.cols() == 8);
    CHECK(pe.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(pe(0, 0) == 0.0);  // sin(0)
    CHECK(pe(0, 1) == 1.0);  // cos(0)
    for (int t = 1; t < 10; ++t) CHECK((pe.row(t) - pe.row(0)).cwiseAbs().maxCoeff() > 1e-6);
    CHECK_THROWS_AS(sinusoidal_encoding(0, 8), ConfigError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include <Eigen/SVD>

#include "hsprobe/analysis.hpp"
#include "hsprobe/rng.hpp"

using namespace hsprobe;

using Mat = MatX<double>;

namespace {

VecX<float> axis(int dim, int i) {
    VecX<float> v = VecX<float>::Zero(dim);
    v[i] = 1.0f;
    return v;
}

HiddenStateTensor random_tensor(const ShapeConfig& shape, std::uint64_t seed) {
    HiddenStateTensor h(shape, shape.tokens_fixed);
    Rng rng(seed);
    for (int l = 0; l < shape.layers; ++l)
        for (int t = 0; t < shape.tokens_fixed; ++t)
            for (int d = 0; d < shape.hidden; ++d)
                h.at(l, t, d) = Half(static_cast<float>(rng.normal()));
    return h;
}

// Tensor whose mean pool is exactly `pooled` (constant across layers/tokens;
// entries must be half-representable).
HiddenStateTensor constant_tensor(const ShapeConfig& shape, const VecX<double>& pooled) {
    HiddenStateTensor h(shape, shape.tokens_fixed);
    for (int l = 0; l < shape.layers; ++l)
        for (int t = 0; t < shape.tokens_fixed; ++t)
            for (int d = 0; d < shape.hidden; ++d)
                h.at(l, t, d) = Half(static_cast<float>(pooled[d]));
    return h;
}

// Brute-force P(score+ > score-) + 0.5 P(tie) over all cross pairs.
double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] != 1 || labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("similarity variants collapse to the single-answer value") {
    FixtureEmbeddingBackend be(4);
    be.set("g", axis(4, 0));
    be.set("a", (VecX<float>(4) << 0.6f, 0.8f, 0.0f, 0.0f).finished());

    const std::vector<std::string> answers{"a"};
    const double s = cosine_max("g", answers, be);
    CHECK(s == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(mean_similarity("g", answers, be) == s);
    CHECK(softmax_similarity("g", answers, be) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("two answers at similarity one and zero") {
    FixtureEmbeddingBackend be(4);
    be.set("g", axis(4, 0));
    be.set("hit", axis(4, 0));
    be.set("miss", axis(4, 1));
    const std::vector<std::string> answers{"hit", "miss"};

    CHECK(cosine_max("g", answers, be) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mean_similarity("g", answers, be) == doctest::Approx(0.5).epsilon(1e-12));
    // softmax weights: e/(e+1) on s=1, 1/(e+1) on s=0.
    const double e = std::exp(1.0);
    CHECK(softmax_similarity("g", answers, be) ==
          doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
}

TEST_CASE("softmax similarity stays between min and max and tracks temperature") {
    FixtureEmbeddingBackend be(3);
    be.set("g", axis(3, 0));
    be.set("a1", (VecX<float>(3) << 0.8f, 0.6f, 0.0f).finished());
    be.set("a2", (VecX<float>(3) << 0.2f, 0.0f, 0.98f).finished());
    be.set("a3", (VecX<float>(3) << -0.5f, 0.5f, 0.7071f).finished());
    const std::vector<std::string> answers{"a1", "a2", "a3"};

    const auto sims = answer_similarities("g", answers, be);
    const double lo = *std::min_element(sims.begin(), sims.end());
    const double hi = *std::max_element(sims.begin(), sims.end());
    const double sm = softmax_similarity("g", answers, be);
    CHECK(sm >= lo);
    CHECK(sm <= hi);

    // High temperature flattens toward the mean; low sharpens toward the max.
    const double mean = mean_similarity("g", answers, be);
    CHECK(std::abs(softmax_similarity("g", answers, be, 1e6) - mean) < 1e-5);
    CHECK(softmax_similarity("g", answers, be, 1e-4) == doctest::Approx(hi).epsilon(1e-9));

    CHECK_THROWS_AS(softmax_similarity("g", answers, be, 0.0), ConfigError);
    CHECK_THROWS_AS(cosine_max("g", {}, be), DataError);
}

TEST_CASE("identical text scores cosine one under any deterministic backend") {
    HashEmbeddingBackend be(64, 7);
    CHECK(cosine_max("the same sentence", {"the same sentence"}, be) ==
          doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("token f1 counts multiset overlap") {
    CHECK(token_f1_pair("the cat", "cat") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(token_f1_pair("identical words", "identical words") == 1.0);
    CHECK(token_f1_pair("alpha beta", "gamma delta") == 0.0);
    // Multiset: "a a b" vs "a b b" overlaps one a and one b.
    CHECK(token_f1_pair("a a b", "a b b") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    // Punctuation and case vanish in normalization.
    CHECK(token_f1_pair("The CAT!", "the cat") == 1.0);

    // Empty-string convention.
    CHECK(token_f1_pair("", "") == 1.0);
    CHECK(token_f1_pair("...", "!!!") == 1.0);  // both normalize to empty
    CHECK(token_f1_pair("word", "") == 0.0);
    CHECK(token_f1_pair("", "word") == 0.0);

    // F1 = 2*overlap/(|g|+|a|) is symmetric; precision and recall swap.
    CHECK(token_f1_pair("the cat", "cat") == token_f1_pair("cat", "the cat"));
    CHECK(token_f1_pair("a b c d", "c d e") == token_f1_pair("c d e", "a b c d"));

    CHECK(token_f1("the cat", {"dog", "cat"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(token_f1("x", {}), DataError);
}

TEST_CASE("hallucination orientation flips similarity") {
    CHECK(hallucination_score(BaselineMethod::cosine_max, 1.0) == 0.0);
    CHECK(hallucination_score(BaselineMethod::cosine_max, -1.0) == 1.0);
    CHECK(hallucination_score(BaselineMethod::cosine_max, 0.0) == 0.5);
    CHECK(hallucination_score(BaselineMethod::token_f1, 1.0) == 0.0);
    CHECK(hallucination_score(BaselineMethod::token_f1, 0.0) == 1.0);
}

TEST_CASE("baseline method names round-trip") {
    for (const auto m : {BaselineMethod::cosine_max, BaselineMethod::mean_similarity,
                         BaselineMethod::softmax_similarity, BaselineMethod::token_f1})
        CHECK(baseline_method_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(baseline_method_from_string("bm25"), ConfigError);
}

TEST_CASE("anticorrelated fixture drives every baseline to auc one") {
    // Grounded records repeat the answer verbatim; hallucinated ones share
    // nothing with it, lexically or in embedding space.
    FixtureEmbeddingBackend be(4);
    be.set("paris", axis(4, 0));
    be.set("blue cheese moon", axis(4, 1));

    std::vector<SampleRecord> records;
    for (int i = 0; i < 10; ++i) {
        SampleRecord r;
        r.sample_id = "s" + std::to_string(i);
        r.gold_answers = {"paris"};
        const bool hallucinated = i % 2 == 1;
        r.response = hallucinated ? "blue cheese moon" : "paris";
        r.labels.judge_label = hallucinated ? 1 : 0;
        records.push_back(std::move(r));
    }

    const auto evals = evaluate_baselines(records, be);
    REQUIRE(evals.size() == 4);
    for (const auto& ev : evals) {
        INFO(to_string(ev.method));
        CHECK(ev.report.auc == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ev.report.n == 10);
        CHECK(ev.scores.size() == 10);
    }
}

TEST_CASE("random labels sit near chance") {
    HashEmbeddingBackend be(64, 3);
    Rng rng(2024);
    std::vector<SampleRecord> records;
    for (int i = 0; i < 500; ++i) {
        SampleRecord r;
        r.gold_answers = {"answer " + std::to_string(i)};
        r.response = "response " + std::to_string(i);
        r.labels.judge_label = rng.bernoulli(0.5) ? 1 : 0;
        records.push_back(std::move(r));
    }
    for (const auto& ev : evaluate_baselines(records, be)) {
        INFO(to_string(ev.method));
        CHECK(ev.report.auc > 0.4);
        CHECK(ev.report.auc < 0.6);
    }
}

TEST_CASE("report auc matches the brute-force pairwise oracle") {
    HashEmbeddingBackend be(32, 11);
    Rng rng(55);
    std::vector<SampleRecord> records;
    for (int i = 0; i < 20; ++i) {
        SampleRecord r;
        r.gold_answers = {"gold " + std::to_string(i % 4), "alt " + std::to_string(i % 3)};
        r.response = "text " + std::to_string(i);
        r.labels.judge_label = i < 8 ? 1 : 0;
        records.push_back(std::move(r));
    }
    std::vector<int> labels(20, 0);
    for (int i = 0; i < 8; ++i) labels[static_cast<std::size_t>(i)] = 1;

    for (const auto& ev : evaluate_baselines(records, be)) {
        INFO(to_string(ev.method));
        CHECK(ev.report.auc ==
              doctest::Approx(pairwise_auc(ev.scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("baseline labels follow the alpha blend") {
    FixtureEmbeddingBackend be(4);
    be.set("x", axis(4, 0));
    be.set("y", axis(4, 1));
    std::vector<SampleRecord> records;
    for (int i = 0; i < 4; ++i) {
        SampleRecord r;
        r.gold_answers = {"x"};
        r.response = i < 2 ? "x" : "y";
        r.labels.judge_label = i < 2 ? 0 : 1;  // matches similarity
        r.labels.hybrid_label = i < 2 ? 1 : 0; // inverted
        records.push_back(std::move(r));
    }
    CHECK(evaluate_baselines(records, be, 1.0)[0].report.auc == doctest::Approx(1.0));
    CHECK(evaluate_baselines(records, be, 0.0)[0].report.auc == doctest::Approx(0.0));
    CHECK_THROWS_AS(evaluate_baselines(records, be, 2.0), ConfigError);
    CHECK_THROWS_AS(evaluate_baselines({}, be), DataError);

    records[0].gold_answers.clear();
    CHECK_THROWS_AS(evaluate_baselines(records, be), DataError);
}

TEST_CASE("layer importance finds the planted layer") {
    const ShapeConfig shape{4, 3, 5};
    ProbeSpec spec = desk_probe_spec(ProbeFamily::M1, shape);
    spec.mlp_hidden = {6};
    const ProbeModel model = probe_factory(spec, 99);

    // Only layer 2 varies across samples; the rest stay at zero.
    const int planted = 2;
    std::vector<HiddenStateTensor> inputs;
    Rng rng(5);
    for (int i = 0; i < 24; ++i) {
        HiddenStateTensor h(shape, shape.tokens_fixed);
        for (int t = 0; t < shape.tokens_fixed; ++t)
            for (int d = 0; d < shape.hidden; ++d)
                h.at(planted, t, d) = Half(static_cast<float>(rng.normal() * 2.0));
        inputs.push_back(std::move(h));
    }

    const LayerImportance li = layer_importance(model, inputs);
    REQUIRE(li.stddev.size() == 4);
    const auto arg =
        std::distance(li.stddev.begin(), std::max_element(li.stddev.begin(), li.stddev.end()));
    CHECK(arg == planted);
    for (int l = 0; l < 4; ++l)
        if (l != planted) CHECK(li.stddev[static_cast<std::size_t>(l)] == 0.0);

    const nlohmann::json j = li.to_json();
    CHECK(j.at("stddev").size() == 4);
    CHECK(j.at("mean_abs").size() == 4);
}

TEST_CASE("untrained probe on zero data reports zero importance") {
    const ShapeConfig shape{3, 2, 4};
    const ProbeModel model = probe_factory(desk_probe_spec(ProbeFamily::M1, shape), 1);
    std::vector<HiddenStateTensor> inputs(5, HiddenStateTensor(shape, shape.tokens_fixed));

    const LayerImportance li = layer_importance(model, inputs);
    for (int l = 0; l < 3; ++l) {
        CHECK(li.stddev[static_cast<std::size_t>(l)] == 0.0);
        // Zero-initialized biases leave the whole logit path at zero.
        CHECK(li.mean_abs[static_cast<std::size_t>(l)] == 0.0);
    }
}

TEST_CASE("layer importance swaps with a coordinated layer and head swap") {
    const ShapeConfig shape{3, 2, 4};
    const ProbeSpec spec = desk_probe_spec(ProbeFamily::M1, shape);
    const ProbeModel model = probe_factory(spec, 31);

    std::vector<HiddenStateTensor> inputs;
    for (int i = 0; i < 9; ++i) inputs.push_back(random_tensor(shape, 300 + i));

    ProbeModel swapped = model;
    std::swap(swapped.params.at("m1.head0.w"), swapped.params.at("m1.head1.w"));
    std::swap(swapped.params.at("m1.head0.b"), swapped.params.at("m1.head1.b"));
    std::vector<HiddenStateTensor> swapped_inputs;
    for (const auto& h : inputs) {
        HiddenStateTensor s(shape, shape.tokens_fixed);
        for (int l = 0; l < 3; ++l) {
            const int src = l == 0 ? 1 : l == 1 ? 0 : l;
            for (int t = 0; t < shape.tokens_fixed; ++t)
                for (int d = 0; d < shape.hidden; ++d) s.at(l, t, d) = h.at(src, t, d);
        }
        swapped_inputs.push_back(std::move(s));
    }

    // Per-sample logits swap bit-exactly; the column reductions may not
    // (alignment-dependent summation order), hence the tolerance.
    const LayerImportance a = layer_importance(model, inputs);
    const LayerImportance b = layer_importance(swapped, swapped_inputs);
    CHECK(a.stddev[0] == doctest::Approx(b.stddev[1]).epsilon(1e-12));
    CHECK(a.stddev[1] == doctest::Approx(b.stddev[0]).epsilon(1e-12));
    CHECK(a.stddev[2] == doctest::Approx(b.stddev[2]).epsilon(1e-12));
    CHECK(a.mean_abs[0] == doctest::Approx(b.mean_abs[1]).epsilon(1e-12));

    // Sample order cannot move the statistics.
    std::vector<HiddenStateTensor> reversed(inputs.rbegin(), inputs.rend());
    const LayerImportance c = layer_importance(model, reversed);
    for (int l = 0; l < 3; ++l)
        CHECK(c.stddev[static_cast<std::size_t>(l)] ==
              doctest::Approx(a.stddev[static_cast<std::size_t>(l)]).epsilon(1e-12));

    const ProbeModel m0 = probe_factory(desk_probe_spec(ProbeFamily::M0, shape), 1);
    CHECK_THROWS_AS(layer_importance(m0, inputs), ConfigError);
    CHECK_THROWS_AS(layer_importance(model, {}), ConfigError);
}

TEST_CASE("disagreement variance separates a scaled group") {
    const ShapeConfig shape{2, 3, 4};
    std::vector<SampleRecord> records;
    for (int i = 0; i < 12; ++i) {
        SampleRecord r;
        r.hidden = random_tensor(shape, 40 + static_cast<std::uint64_t>(i % 6));
        const bool disagree = i >= 6;
        if (disagree)  // same base values scaled by 2: variance scales by 4
            for (int l = 0; l < shape.layers; ++l)
                for (int t = 0; t < shape.tokens_fixed; ++t)
                    for (int d = 0; d < shape.hidden; ++d)
                        r.hidden.at(l, t, d) =
                            Half(2.0f * static_cast<float>(r.hidden.at(l, t, d)));
        r.labels.agreement = !disagree;
        records.push_back(std::move(r));
    }

    const DisagreementStats st = disagreement_variance(records);
    CHECK(st.agree_n == 6);
    CHECK(st.disagree_n == 6);
    CHECK(st.disagree_mean == doctest::Approx(4.0 * st.agree_mean).epsilon(1e-12));
    CHECK(st.auc == 1.0);  // every scaled variance exceeds every base variance
    CHECK(st.rank_sum_u == doctest::Approx(36.0).epsilon(1e-12));

    const nlohmann::json j = st.to_json();
    CHECK(j.at("disagree_n").get<int>() == 6);
}

TEST_CASE("identical groups land the rank test at its null center") {
    const ShapeConfig shape{2, 3, 4};
    std::vector<SampleRecord> records;
    for (int i = 0; i < 10; ++i) {
        SampleRecord r;
        r.hidden = random_tensor(shape, 77);  // every sample identical
        r.labels.agreement = i % 2 == 0;
        records.push_back(std::move(r));
    }
    const DisagreementStats st = disagreement_variance(records);
    CHECK(st.auc == 0.5);
    CHECK(st.agree_mean == st.disagree_mean);

    std::vector<SampleRecord> one_group(records.begin(), records.begin() + 2);
    for (auto& r : one_group) r.labels.agreement = true;
    CHECK_THROWS_AS(disagreement_variance(one_group), UndefinedMetricError);
}

TEST_CASE("activation variance matches a two-pass oracle") {
    const ShapeConfig shape{3, 4, 5};
    const HiddenStateTensor h = random_tensor(shape, 123);

    std::vector<double> values;
    for (int l = 0; l < shape.layers; ++l)
        for (int t = 0; t < shape.tokens_fixed; ++t)
            for (int d = 0; d < shape.hidden; ++d)
                values.push_back(static_cast<double>(h.at(l, t, d)));
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                        static_cast<double>(values.size());
    double var = 0.0;
    for (const double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());

    CHECK(activation_variance(h) == doctest::Approx(var).epsilon(1e-12));

    // Padding is excluded: poisoning a padded slot changes nothing.
    HiddenStateTensor padded(shape, 2);
    for (int l = 0; l < shape.layers; ++l)
        for (int t = 0; t < 2; ++t)
            for (int d = 0; d < shape.hidden; ++d) padded.at(l, t, d) = h.at(l, t, d);
    const double before = activation_variance(padded);
    padded.at(0, 3, 0) = Half(1000.0f);
    CHECK(activation_variance(padded) == before);
}

TEST_CASE("pca explains a one-dimensional cloud with its first component") {
    const ShapeConfig shape{2, 2, 6};
    VecX<double> u(6);
    u << 0.5, 1.0, 0.25, 0.0, -0.5, 2.0;  // half-exact entries
    std::vector<HiddenStateTensor> inputs;
    for (const double t : {-2.0, -1.0, 0.0, 1.0, 2.0})
        inputs.push_back(constant_tensor(shape, t * u));

    const PcaResult pca = pca_project(inputs, 3);
    CHECK(pca.explained_variance_ratio[0] >= 0.999);
    CHECK(pca.projections.rows() == 5);
    CHECK(pca.projections.cols() == 3);

    // Projections onto the line recover the spread; later columns are noise.
    CHECK(std::abs(pca.projections(0, 0)) == doctest::Approx(2.0 * u.norm()).epsilon(1e-3));
    CHECK(std::abs(pca.projections(2, 0)) < 1e-6);
}

TEST_CASE("pca ratios are non-increasing, bounded, and match an svd oracle") {
    const ShapeConfig shape{2, 3, 8};
    std::vector<HiddenStateTensor> inputs;
    for (int i = 0; i < 50; ++i) inputs.push_back(random_tensor(shape, 900 + i));

    const int D = 8;
    const PcaResult pca = pca_project(inputs, D);

    double sum = 0.0;
    for (int k = 0; k + 1 < D; ++k)
        CHECK(pca.explained_variance_ratio[static_cast<std::size_t>(k)] >=
              pca.explained_variance_ratio[static_cast<std::size_t>(k) + 1]);
    for (const double r : pca.explained_variance_ratio) sum += r;
    CHECK(sum <= 1.0 + 1e-12);
    CHECK(sum >= 1.0 - 1e-9);  // full component count captures everything

    // Independent oracle: singular values of the centered matrix.
    Mat X(50, D);
    for (int i = 0; i < 50; ++i)
        X.row(i) = mean_pool_all<double>(inputs[static_cast<std::size_t>(i)], true).transpose();
    const Mat centered = X.rowwise() - X.colwise().mean();
    Eigen::JacobiSVD<Mat> svd(centered);
    const auto& sv = svd.singularValues();
    double total = 0.0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) total += sv(k) * sv(k);
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        CHECK(pca.explained_variance_ratio[static_cast<std::size_t>(k)] ==
              doctest::Approx(sv(k) * sv(k) / total).epsilon(1e-9));

    // Sign convention: each component's largest-magnitude entry is positive.
    for (int k = 0; k < D; ++k) {
        Eigen::Index arg = 0;
        pca.components.col(k).cwiseAbs().maxCoeff(&arg);
        CHECK(pca.components(arg, k) > 0.0);
    }

    // Projections are centered and orthogonally reconstruct the data.
    CHECK(pca.projections.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
    CHECK((pca.projections * pca.components.transpose() - centered).cwiseAbs().maxCoeff() <
          1e-9);

    // Input order only permutes projection rows.
    std::vector<HiddenStateTensor> reversed(inputs.rbegin(), inputs.rend());
    const PcaResult back = pca_project(reversed, D);
    CHECK((back.projections.row(0) - pca.projections.row(49)).cwiseAbs().maxCoeff() < 1e-9);

    CHECK_THROWS_AS(pca_project({inputs.front()}, 1), DataError);
    CHECK_THROWS_AS(pca_project(inputs, 0), ConfigError);
    CHECK_THROWS_AS(pca_project(inputs, D + 1), ConfigError);
}

TEST_CASE("csv emitters produce the plotting tables") {
    const auto dir = std::filesystem::temp_directory_path() / "hsprobe_analysis_csv";
    std::filesystem::create_directories(dir);

    LayerImportance li;
    li.stddev = {0.5, 1.25};
    li.mean_abs = {0.25, 0.75};
    const auto li_path = (dir / "layers.csv").string();
    write_layer_importance_csv(li_path, li);
    std::ifstream in(li_path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "layer,stddev,mean_abs");
    std::getline(in, line);
    CHECK(line == "0,0.5,0.25");
    std::getline(in, line);
    CHECK(line == "1,1.25,0.75");

    const ShapeConfig shape{2, 2, 4};
    std::vector<HiddenStateTensor> inputs;
    for (int i = 0; i < 6; ++i) inputs.push_back(random_tensor(shape, 70 + i));
    const PcaResult pca = pca_project(inputs, 2);
    const auto pca_path = (dir / "pca.csv").string();
    write_pca_csv(pca_path, pca, {0, 1, 0, 1, 0, 1});
    std::ifstream pin(pca_path);
    std::getline(pin, line);
    CHECK(line == "label,pc1,pc2");
    int rows = 0;
    while (std::getline(pin, line)) ++rows;
    CHECK(rows == 6);

    CHECK_THROWS_AS(write_pca_csv(pca_path, pca, {0, 1}), DataError);
}

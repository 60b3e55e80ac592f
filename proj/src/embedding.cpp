#include "hsprobe/embedding.hpp"

#include <cmath>

#include "hsprobe/rng.hpp"

// httplib drags in <resolv.h>, whose _res macro mangles Eigen's parameter
// names. Keep it after every Eigen-reaching include.
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace hsprobe {

double cosine_similarity(const VecX<float>& a, const VecX<float>& b) {
    if (a.size() != b.size()) throw DataError("cosine_similarity: dimension mismatch");
    const double na = a.cast<double>().norm();
    const double nb = b.cast<double>().norm();
    if (na == 0.0 || nb == 0.0) throw DataError("cosine_similarity: zero-norm embedding");
    return a.cast<double>().dot(b.cast<double>()) / (na * nb);
}

HashEmbeddingBackend::HashEmbeddingBackend(int dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension < 1) throw ConfigError("HashEmbeddingBackend: dimension must be >= 1");
}

VecX<float> HashEmbeddingBackend::embed(std::string_view text) const {
    Rng rng(derive_seed(seed_ ^ fnv1a64(text), "hash-embed"));
    VecX<float> v(dimension_);
    for (int i = 0; i < dimension_; ++i) v[i] = static_cast<float>(rng.normal());
    const float n = v.norm();
    if (n > 0.0f) v /= n;
    else v[0] = 1.0f;  // unreachable in practice, keeps the contract total
    return v;
}

void FixtureEmbeddingBackend::set(std::string text, VecX<float> v) {
    if (v.size() != dimension_) throw ConfigError("FixtureEmbeddingBackend: dimension mismatch");
    table_[std::move(text)] = std::move(v);
}

VecX<float> FixtureEmbeddingBackend::embed(std::string_view text) const {
    auto it = table_.find(text);
    if (it == table_.end())
        throw DataError("FixtureEmbeddingBackend: no fixture embedding for text");
    return it->second;
}

struct HttpEmbeddingBackend::Impl {
    std::string endpoint;
    std::string path;
    std::unique_ptr<httplib::Client> client;
};

HttpEmbeddingBackend::HttpEmbeddingBackend(std::string endpoint, int dimension)
    : impl_(std::make_unique<Impl>()), dimension_(dimension) {
    const auto slash = endpoint.find('/', endpoint.find("//") == std::string::npos
                                              ? 0
                                              : endpoint.find("//") + 2);
    if (slash == std::string::npos) {
        impl_->endpoint = endpoint;
        impl_->path = "/embed";
    } else {
        impl_->endpoint = endpoint.substr(0, slash);
        impl_->path = endpoint.substr(slash);
    }
    impl_->client = std::make_unique<httplib::Client>(impl_->endpoint);
}

HttpEmbeddingBackend::~HttpEmbeddingBackend() = default;

VecX<float> HttpEmbeddingBackend::embed(std::string_view text) const {
    nlohmann::json body;
    body["text"] = std::string(text);
    auto res = impl_->client->Post(impl_->path, body.dump(), "application/json");
    if (!res || res->status != 200)
        throw TransportError("HttpEmbeddingBackend: request failed");
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("embedding") || !j["embedding"].is_array())
        throw DataError("HttpEmbeddingBackend: malformed embedding response");
    const auto& arr = j["embedding"];
    if (static_cast<int>(arr.size()) != dimension_)
        throw DataError("HttpEmbeddingBackend: embedding dimension mismatch");
    VecX<float> v(dimension_);
    for (int i = 0; i < dimension_; ++i) v[i] = arr[i].get<float>();
    return v;
}

}  // namespace hsprobe

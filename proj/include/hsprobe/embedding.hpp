#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "hsprobe/errors.hpp"
#include "hsprobe/tensor.hpp"

namespace hsprobe {

/// Sentence-embedding provider. Implementations must be deterministic for a
/// fixed input text.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual VecX<float> embed(std::string_view text) const = 0;
    virtual int dimension() const = 0;
};

/// cos(a, b). Throws DataError on a zero-norm operand.
double cosine_similarity(const VecX<float>& a, const VecX<float>& b);

/// Deterministic test backend: a unit Gaussian direction seeded from the
/// hash of the text. Distinct texts map to near-orthogonal directions in
/// high dimension; identical texts always map to the same vector.
class HashEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit HashEmbeddingBackend(int dimension = 64, std::uint64_t seed = 0);
    VecX<float> embed(std::string_view text) const override;
    int dimension() const override { return dimension_; }

private:
    int dimension_;
    std::uint64_t seed_;
};

/// Table-driven backend for fixtures that need exact similarity values.
class FixtureEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit FixtureEmbeddingBackend(int dimension) : dimension_(dimension) {}
    void set(std::string text, VecX<float> v);
    VecX<float> embed(std::string_view text) const override;
    int dimension() const override { return dimension_; }

private:
    int dimension_;
    std::map<std::string, VecX<float>, std::less<>> table_;
};

/// Adapter for a real sentence-embedding model served over HTTP.
/// POSTs {"text": ...} to the endpoint and expects {"embedding": [...]}.
class HttpEmbeddingBackend final : public EmbeddingBackend {
public:
    HttpEmbeddingBackend(std::string endpoint, int dimension);
    ~HttpEmbeddingBackend() override;
    VecX<float> embed(std::string_view text) const override;
    int dimension() const override { return dimension_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int dimension_;
};

}  // namespace hsprobe

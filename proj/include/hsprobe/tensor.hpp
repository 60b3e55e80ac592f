#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "hsprobe/errors.hpp"

namespace hsprobe {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMajorMatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Half = Eigen::half;

/// Dimensions of the per-sample activation tensor: L layers, T_fixed token
/// slots, D hidden channels.
struct ShapeConfig {
    int layers = 32;
    int tokens_fixed = 96;
    int hidden = 4096;

    void validate() const {
        if (layers <= 0 || tokens_fixed <= 0 || hidden <= 0)
            throw ConfigError("ShapeConfig: all dimensions must be strictly positive");
    }
    bool operator==(const ShapeConfig&) const = default;

    std::int64_t positions() const {
        return static_cast<std::int64_t>(layers) * tokens_fixed;
    }
    std::int64_t elements() const { return positions() * hidden; }
};

/// Desk-scale preset small enough for unit tests and laptop experiments.
inline ShapeConfig desk_shape() { return ShapeConfig{8, 16, 32}; }

/// Activations as produced by a generation backend: (L, T, D) with the true,
/// un-truncated step count T. Row (l*T + t) of `values` is h_t^(l).
struct RawActivations {
    int layers = 0;
    int token_count = 0;
    int hidden = 0;
    RowMajorMatX<float> values;  // (L*T) x D

    Eigen::Ref<const RowMajorMatX<float>> layer(int l) const {
        return values.middleRows(static_cast<Eigen::Index>(l) * token_count, token_count);
    }
};

/// Fixed-shape half-precision activation tensor. Storage is C-order
/// (layer, token, channel); token positions past min(token_count, T_fixed)
/// are exactly zero.
class HiddenStateTensor {
public:
    HiddenStateTensor() = default;
    HiddenStateTensor(ShapeConfig shape, int token_count)
        : shape_(shape), token_count_(token_count),
          data_(static_cast<std::size_t>(shape.elements()), Half(0.0f)) {
        shape.validate();
        if (token_count < 1) throw DataError("HiddenStateTensor: token_count must be >= 1");
    }

    const ShapeConfig& shape() const { return shape_; }
    int layer_count() const { return shape_.layers; }
    int fixed_tokens() const { return shape_.tokens_fixed; }
    int hidden_dim() const { return shape_.hidden; }

    /// Pre-truncation generation length. May exceed fixed_tokens().
    int token_count() const { return token_count_; }
    /// Number of token slots that carry real data.
    int valid_tokens() const { return std::min(token_count_, shape_.tokens_fixed); }

    Half* data() { return data_.data(); }
    const Half* data() const { return data_.data(); }
    std::size_t size() const { return data_.size(); }

    Half& at(int l, int t, int d) {
        return data_[(static_cast<std::size_t>(l) * shape_.tokens_fixed + t) * shape_.hidden + d];
    }
    Half at(int l, int t, int d) const {
        return data_[(static_cast<std::size_t>(l) * shape_.tokens_fixed + t) * shape_.hidden + d];
    }

    /// (T_fixed x D) view of one layer's token slices.
    Eigen::Map<const RowMajorMatX<Half>> layer(int l) const {
        return {data_.data() + static_cast<std::size_t>(l) * shape_.tokens_fixed * shape_.hidden,
                shape_.tokens_fixed, shape_.hidden};
    }
    Eigen::Map<RowMajorMatX<Half>> layer(int l) {
        return {data_.data() + static_cast<std::size_t>(l) * shape_.tokens_fixed * shape_.hidden,
                shape_.tokens_fixed, shape_.hidden};
    }

    /// One layer upcast to Scalar, rows = token slots.
    template <typename Scalar>
    MatX<Scalar> layer_as(int l) const {
        return layer(l).template cast<Scalar>();
    }

private:
    ShapeConfig shape_;
    int token_count_ = 0;
    std::vector<Half> data_;
};

/// Fits raw (L, T, D) activations into the fixed (L, T_fixed, D) frame:
/// leading min(T, T_fixed) slices are copied, the remainder stays zero, and
/// the original T is preserved as token_count.
inline HiddenStateTensor pad_or_truncate(const RawActivations& raw, const ShapeConfig& shape) {
    shape.validate();
    if (raw.layers != shape.layers || raw.hidden != shape.hidden)
        throw ConfigError("pad_or_truncate: raw activations do not match ShapeConfig");
    if (raw.token_count < 1 || raw.values.rows() != static_cast<Eigen::Index>(raw.layers) * raw.token_count ||
        raw.values.cols() != raw.hidden)
        throw DataError("pad_or_truncate: malformed raw activation block");

    HiddenStateTensor out(shape, raw.token_count);
    const int copy_t = std::min(raw.token_count, shape.tokens_fixed);
    for (int l = 0; l < shape.layers; ++l) {
        auto dst = out.layer(l);
        auto src = raw.layer(l);
        for (int t = 0; t < copy_t; ++t)
            for (int d = 0; d < shape.hidden; ++d) dst(t, d) = Half(src(t, d));
    }
    return out;
}

/// Mean over layers and token positions, x = (1/LT) sum_l sum_t h_t^(l).
/// With mask_padding the mean runs over the valid token slots only; without
/// it, zero pads dilute the mean exactly as the pooled formula reads.
/// Accumulation happens in Scalar regardless of the half storage.
template <typename Scalar = float>
VecX<Scalar> mean_pool_all(const HiddenStateTensor& h, bool mask_padding) {
    const int tv = mask_padding ? h.valid_tokens() : h.fixed_tokens();
    if (tv == 0) throw DataError("mean_pool_all: no valid token positions");
    VecX<Scalar> acc = VecX<Scalar>::Zero(h.hidden_dim());
    for (int l = 0; l < h.layer_count(); ++l) {
        auto m = h.layer(l);
        for (int t = 0; t < tv; ++t)
            for (int d = 0; d < h.hidden_dim(); ++d)
                acc[d] += static_cast<Scalar>(m(t, d));
    }
    acc /= static_cast<Scalar>(static_cast<std::int64_t>(h.layer_count()) * tv);
    return acc;
}

/// Per-layer token mean, z^(l) = (1/T) sum_t h_t^(l). Row l of the result is
/// layer l's mean.
template <typename Scalar = float>
MatX<Scalar> mean_pool_tokens(const HiddenStateTensor& h, bool mask_padding) {
    const int tv = mask_padding ? h.valid_tokens() : h.fixed_tokens();
    if (tv == 0) throw DataError("mean_pool_tokens: no valid token positions");
    MatX<Scalar> out(h.layer_count(), h.hidden_dim());
    for (int l = 0; l < h.layer_count(); ++l) {
        auto m = h.layer(l);
        VecX<Scalar> acc = VecX<Scalar>::Zero(h.hidden_dim());
        for (int t = 0; t < tv; ++t)
            for (int d = 0; d < h.hidden_dim(); ++d)
                acc[d] += static_cast<Scalar>(m(t, d));
        out.row(l) = acc.transpose() / static_cast<Scalar>(tv);
    }
    return out;
}

}  // namespace hsprobe

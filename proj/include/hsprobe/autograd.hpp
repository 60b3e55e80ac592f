#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "hsprobe/rng.hpp"
#include "hsprobe/tensor.hpp"

namespace hsprobe {

/// Reverse-mode autodiff over dense Eigen matrices. Values are matrices
/// (scalars are 1x1, row vectors 1xD); nodes live on a tape in forward
/// order, which is a valid reverse topological order for backward().
///
/// Handles (Var) are indices into the owning tape; a tape must outlive its
/// handles. One tape per training step keeps lifetimes trivial.
template <typename Scalar>
class Tape {
public:
    using Mat = MatX<Scalar>;

    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    /// Leaf holding a value (input data or a parameter being differentiated).
    Var input(Mat v) { return push(std::move(v), nullptr); }

    const Mat& value(Var x) const { return node(x).value; }
    const Mat& grad(Var x) const { return node(x).grad; }
    std::size_t size() const { return nodes_.size(); }

    // -- arithmetic -------------------------------------------------------

    /// op(a) * op(b) with optional transposes.
    Var matmul(Var a, Var b, bool ta = false, bool tb = false) {
        const Mat& A = value(a);
        const Mat& B = value(b);
        const auto ar = ta ? A.cols() : A.rows();
        const auto ac = ta ? A.rows() : A.cols();
        const auto br = tb ? B.cols() : B.rows();
        if (ac != br) throw ConfigError("matmul: inner dimensions disagree");
        Mat out(ar, tb ? B.rows() : B.cols());
        if (!ta && !tb) out.noalias() = A * B;
        else if (ta && !tb) out.noalias() = A.transpose() * B;
        else if (!ta && tb) out.noalias() = A * B.transpose();
        else out.noalias() = A.transpose() * B.transpose();
        return push(std::move(out), [a, b, ta, tb](Tape& t, const Mat& g, int self) {
            const Mat& A = t.node(a).value;
            const Mat& B = t.node(b).value;
            (void)self;
            if (!ta && !tb) {
                t.node(a).grad.noalias() += g * B.transpose();
                t.node(b).grad.noalias() += A.transpose() * g;
            } else if (ta && !tb) {
                t.node(a).grad.noalias() += B * g.transpose();
                t.node(b).grad.noalias() += A * g;
            } else if (!ta && tb) {
                t.node(a).grad.noalias() += g * B;
                t.node(b).grad.noalias() += g.transpose() * A;
            } else {
                t.node(a).grad.noalias() += (g * B).transpose();
                t.node(b).grad.noalias() += (A * g).transpose();
            }
        });
    }

    Var add(Var a, Var b) {
        if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
            throw ConfigError("add: shapes disagree");
        return push(value(a) + value(b), [a, b](Tape& t, const Mat& g, int) {
            t.node(a).grad += g;
            t.node(b).grad += g;
        });
    }

    /// a + alpha * b (residual connections).
    Var add_scaled(Var a, Var b, Scalar alpha) {
        if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
            throw ConfigError("add_scaled: shapes disagree");
        return push(value(a) + alpha * value(b), [a, b, alpha](Tape& t, const Mat& g, int) {
            t.node(a).grad += g;
            t.node(b).grad += alpha * g;
        });
    }

    /// Broadcasts a 1xD row vector across every row of a (bias add).
    Var add_rowvec(Var a, Var rv) {
        if (value(rv).rows() != 1 || value(rv).cols() != value(a).cols())
            throw ConfigError("add_rowvec: need a 1xD row vector matching a's columns");
        Mat out = value(a);
        out.rowwise() += value(rv).row(0);
        return push(std::move(out), [a, rv](Tape& t, const Mat& g, int) {
            t.node(a).grad += g;
            t.node(rv).grad += g.colwise().sum();
        });
    }

    /// Adds a constant matrix (positional encodings, attention masks).
    Var add_const(Var a, const Mat& c) {
        if (value(a).rows() != c.rows() || value(a).cols() != c.cols())
            throw ConfigError("add_const: shapes disagree");
        return push(value(a) + c, [a](Tape& t, const Mat& g, int) { t.node(a).grad += g; });
    }

    Var hadamard(Var a, Var b) {
        if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
            throw ConfigError("hadamard: shapes disagree");
        return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, const Mat& g, int) {
            t.node(a).grad += g.cwiseProduct(t.node(b).value);
            t.node(b).grad += g.cwiseProduct(t.node(a).value);
        });
    }

    Var scale(Var a, Scalar c) {
        return push(Mat(c * value(a)),
                    [a, c](Tape& t, const Mat& g, int) { t.node(a).grad += c * g; });
    }

    // -- nonlinearities ----------------------------------------------------

    Var relu(Var a) {
        return push(value(a).cwiseMax(Scalar(0)), [a](Tape& t, const Mat& g, int self) {
            const Mat& y = t.node(Var{self}).value;
            t.node(a).grad +=
                g.cwiseProduct((y.array() > Scalar(0)).template cast<Scalar>().matrix());
        });
    }

    /// Exact GELU, x * Phi(x) with the Gaussian CDF.
    Var gelu(Var a) {
        static constexpr double inv_sqrt2 = 0.7071067811865475244008443621048490;
        static constexpr double inv_sqrt2pi = 0.3989422804014326779399460599343819;
        const Mat& x = value(a);
        Mat out = x.unaryExpr([](Scalar v) {
            return Scalar(0.5) * v * (Scalar(1) + std::erf(v * Scalar(inv_sqrt2)));
        });
        return push(std::move(out), [a](Tape& t, const Mat& g, int) {
            const Mat& x = t.node(a).value;
            Mat d = x.unaryExpr([](Scalar v) {
                const Scalar phi = std::exp(Scalar(-0.5) * v * v) * Scalar(inv_sqrt2pi);
                const Scalar Phi = Scalar(0.5) * (Scalar(1) + std::erf(v * Scalar(inv_sqrt2)));
                return Phi + v * phi;
            });
            t.node(a).grad += g.cwiseProduct(d);
        });
    }

    Var sigmoid(Var a) {
        Mat out = value(a).unaryExpr([](Scalar v) {
            return v >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-v))
                                  : std::exp(v) / (Scalar(1) + std::exp(v));
        });
        return push(std::move(out), [a](Tape& t, const Mat& g, int self) {
            const Mat& s = t.node(Var{self}).value;
            t.node(a).grad += g.cwiseProduct(s.cwiseProduct(Mat(Mat::Ones(s.rows(), s.cols()) - s)));
        });
    }

    /// Row-wise softmax (attention weights).
    Var softmax_rows(Var a) {
        Mat out = value(a);
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            const Scalar mx = out.row(r).maxCoeff();
            out.row(r) = (out.row(r).array() - mx).exp();
            out.row(r) /= out.row(r).sum();
        }
        return push(std::move(out), [a](Tape& t, const Mat& g, int self) {
            const Mat& y = t.node(Var{self}).value;
            Mat& da = t.node(a).grad;
            for (Eigen::Index r = 0; r < y.rows(); ++r) {
                const Scalar dot = g.row(r).dot(y.row(r));
                da.row(r) += (g.row(r).array() - dot).matrix().cwiseProduct(y.row(r));
            }
        });
    }

    /// Row-wise LayerNorm with affine gamma/beta (1xD row vectors).
    Var layernorm_rows(Var x, Var gamma, Var beta, Scalar eps = Scalar(1e-5)) {
        const Mat& X = value(x);
        const auto D = X.cols();
        if (value(gamma).rows() != 1 || value(gamma).cols() != D || value(beta).rows() != 1 ||
            value(beta).cols() != D)
            throw ConfigError("layernorm_rows: gamma/beta must be 1xD");
        Mat xhat(X.rows(), D);
        Mat inv_sigma(X.rows(), 1);
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            const Scalar mu = X.row(r).mean();
            const Scalar var = (X.row(r).array() - mu).square().mean();
            const Scalar inv = Scalar(1) / std::sqrt(var + eps);
            inv_sigma(r, 0) = inv;
            xhat.row(r) = (X.row(r).array() - mu) * inv;
        }
        Mat out = xhat;
        out.array().rowwise() *= value(gamma).row(0).array();
        out.rowwise() += value(beta).row(0);
        return push(std::move(out),
                    [x, gamma, beta, xhat, inv_sigma](Tape& t, const Mat& g, int) {
                        Mat dxhat = g;
                        dxhat.array().rowwise() *= t.node(gamma).value.row(0).array();
                        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                            const Scalar m1 = dxhat.row(r).mean();
                            const Scalar m2 =
                                dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                            t.node(x).grad.row(r) +=
                                inv_sigma(r, 0) *
                                (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
                        }
                        t.node(gamma).grad += g.cwiseProduct(xhat).colwise().sum();
                        t.node(beta).grad += g.colwise().sum();
                    });
    }

    // -- shape surgery -----------------------------------------------------

    Var rows(Var a, int start, int count) {
        if (start < 0 || count < 1 || start + count > value(a).rows())
            throw ConfigError("rows: slice out of range");
        return push(Mat(value(a).middleRows(start, count)),
                    [a, start, count](Tape& t, const Mat& g, int) {
                        t.node(a).grad.middleRows(start, count) += g;
                    });
    }

    Var row(Var a, int r) { return rows(a, r, 1); }

    Var cols(Var a, int start, int count) {
        if (start < 0 || count < 1 || start + count > value(a).cols())
            throw ConfigError("cols: slice out of range");
        return push(Mat(value(a).middleCols(start, count)),
                    [a, start, count](Tape& t, const Mat& g, int) {
                        t.node(a).grad.middleCols(start, count) += g;
                    });
    }

    /// [a | b] side by side.
    Var hconcat(Var a, Var b) {
        if (value(a).rows() != value(b).rows()) throw ConfigError("hconcat: row counts disagree");
        Mat out(value(a).rows(), value(a).cols() + value(b).cols());
        out << value(a), value(b);
        const int ac = static_cast<int>(value(a).cols());
        return push(std::move(out), [a, b, ac](Tape& t, const Mat& g, int) {
            t.node(a).grad += g.leftCols(ac);
            t.node(b).grad += g.rightCols(g.cols() - ac);
        });
    }

    /// a stacked on top of b.
    Var vconcat(Var a, Var b) {
        if (value(a).cols() != value(b).cols()) throw ConfigError("vconcat: column counts disagree");
        Mat out(value(a).rows() + value(b).rows(), value(a).cols());
        out << value(a), value(b);
        const int ar = static_cast<int>(value(a).rows());
        return push(std::move(out), [a, b, ar](Tape& t, const Mat& g, int) {
            t.node(a).grad += g.topRows(ar);
            t.node(b).grad += g.bottomRows(g.rows() - ar);
        });
    }

    /// Column-wise mean over all rows -> 1xD.
    Var mean_rows(Var a) {
        const auto R = value(a).rows();
        return push(Mat(value(a).colwise().mean()), [a, R](Tape& t, const Mat& g, int) {
            t.node(a).grad += (Scalar(1) / Scalar(R)) * g.replicate(R, 1);
        });
    }

    /// Whole matrix stacked vertically `times` times: [a; a; ...].
    Var tile_rows(Var a, int times) {
        if (times < 1) throw ConfigError("tile_rows: times must be >= 1");
        const int R = static_cast<int>(value(a).rows());
        return push(Mat(value(a).replicate(times, 1)), [a, times, R](Tape& t, const Mat& g, int) {
            for (int k = 0; k < times; ++k) t.node(a).grad += g.middleRows(k * R, R);
        });
    }

    /// Each row repeated `times` consecutive times: row i*times+j = a.row(i).
    Var repeat_each_row(Var a, int times) {
        if (times < 1) throw ConfigError("repeat_each_row: times must be >= 1");
        const int R = static_cast<int>(value(a).rows());
        Mat out(static_cast<Eigen::Index>(R) * times, value(a).cols());
        for (int i = 0; i < R; ++i) out.middleRows(static_cast<Eigen::Index>(i) * times, times) =
            value(a).row(i).replicate(times, 1);
        return push(std::move(out), [a, times, R](Tape& t, const Mat& g, int) {
            for (int i = 0; i < R; ++i)
                t.node(a).grad.row(i) +=
                    g.middleRows(static_cast<Eigen::Index>(i) * times, times).colwise().sum();
        });
    }

    // -- regularization ----------------------------------------------------

    /// Inverted dropout; identity when disabled. The mask is drawn from rng.
    Var dropout(Var a, double p, Rng& rng, bool enabled) {
        if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must lie in [0,1)");
        if (!enabled || p == 0.0)
            return push(Mat(value(a)), [a](Tape& t, const Mat& g, int) { t.node(a).grad += g; });
        Mat mask(value(a).rows(), value(a).cols());
        const Scalar keep_scale = Scalar(1.0 / (1.0 - p));
        for (Eigen::Index r = 0; r < mask.rows(); ++r)
            for (Eigen::Index c = 0; c < mask.cols(); ++c)
                mask(r, c) = rng.bernoulli(p) ? Scalar(0) : keep_scale;
        return push(value(a).cwiseProduct(mask), [a, mask](Tape& t, const Mat& g, int) {
            t.node(a).grad += g.cwiseProduct(mask);
        });
    }

    // -- loss --------------------------------------------------------------

    /// Class-weighted binary cross-entropy on a logit (1x1), computed in
    /// logit form for stability:
    ///   w1 * y * softplus(-z) + w0 * (1-y) * softplus(z).
    Var weighted_bce_logit(Var z, Scalar y, Scalar w0, Scalar w1) {
        if (value(z).rows() != 1 || value(z).cols() != 1)
            throw ConfigError("weighted_bce_logit: logit must be 1x1");
        const Scalar zv = value(z)(0, 0);
        auto softplus = [](Scalar x) {
            return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
        };
        Mat out(1, 1);
        out(0, 0) = w1 * y * softplus(-zv) + w0 * (Scalar(1) - y) * softplus(zv);
        return push(std::move(out), [z, y, w0, w1](Tape& t, const Mat& g, int) {
            const Scalar zv = t.node(z).value(0, 0);
            const Scalar s = zv >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-zv))
                                             : std::exp(zv) / (Scalar(1) + std::exp(zv));
            t.node(z).grad(0, 0) += g(0, 0) * (w1 * y * (s - Scalar(1)) + w0 * (Scalar(1) - y) * s);
        });
    }

    // -- engine ------------------------------------------------------------

    /// Seeds d(seed)/d(seed) = seed_value and sweeps the tape in reverse.
    /// Leaf grads accumulate across calls (batch accumulation); interior
    /// node grads are per-call scratch and are zeroed on entry, otherwise a
    /// second call would re-propagate the previous pass.
    void backward(Var seed, Scalar seed_value = Scalar(1)) {
        if (value(seed).size() != 1)
            throw ConfigError("backward: seed must be a scalar node");
        for (auto& n : nodes_)
            if (n.back) n.grad.setZero();
        node(seed).grad(0, 0) += seed_value;
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
            if (nodes_[i].back) nodes_[i].back(*this, nodes_[i].grad, i);
    }

    void clear_grads() {
        for (auto& n : nodes_) n.grad.setZero();
    }

private:
    using BackFn = std::function<void(Tape&, const Mat&, int)>;

    struct Node {
        Mat value;
        Mat grad;
        BackFn back;
    };

    Node& node(Var x) { return nodes_.at(static_cast<std::size_t>(x.id)); }
    const Node& node(Var x) const { return nodes_.at(static_cast<std::size_t>(x.id)); }

    Var push(Mat value, BackFn back) {
        Node n;
        n.grad = Mat::Zero(value.rows(), value.cols());
        n.value = std::move(value);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<Node> nodes_;
};

}  // namespace hsprobe

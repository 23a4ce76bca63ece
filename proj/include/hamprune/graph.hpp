#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hamprune/kernels.hpp"
#include "hamprune/tensor.hpp"

namespace hamprune {

/// Define-by-run reverse-mode tape. A graph is built per batch, backward()
/// sweeps the tape once in reverse creation order, and gradients accumulate
/// into zero-initialized buffers. Nodes are addressed by index.
template <typename T>
class GraphT {
  public:
    enum class Op : uint8_t {
        kLeaf,
        kMatmul,
        kTranspose,
        kHadamard,
        kMulRowvec,
        kAdd,
        kSub,
        kAddRowvec,
        kScale,
        kSigmoid,
        kRelu,
        kSteIndicator,
        kReduceSum,
        kRowSum,
        kConcatCols,
        kSliceCols,
        kSliceRange,
        kReshape,
        kBroadcastScalar,
        kGatherRows,
        kLogloss,
        kNormalizeCols,
    };

    static constexpr T kLoglossClip = T(1e-12);

    GraphT() = default;

    // When enabled, every forward result is scanned for NaN/Inf.
    void set_check_finite(bool on) { check_finite_ = on; }

    size_t size() const { return nodes_.size(); }

    int leaf(TensorT<T> value, bool requires_grad) {
        Node n;
        n.op = Op::kLeaf;
        n.value = std::move(value);
        n.needs_grad = requires_grad;
        return push(std::move(n));
    }

    int constant(TensorT<T> value) { return leaf(std::move(value), false); }

    int matmul(int a, int b) {
        auto& ta = val(a);
        auto& tb = val(b);
        if (ta.ndim() != 2 || tb.ndim() != 2 || ta.cols() != tb.rows())
            throw std::invalid_argument("matmul: shape mismatch " + ta.shape_str() + " * " +
                                        tb.shape_str());
        Node n = node2(Op::kMatmul, a, b);
        n.value = TensorT<T>({ta.rows(), tb.cols()});
        kernels::matmul_nn(ta.data(), tb.data(), n.value.data(), ta.rows(), ta.cols(), tb.cols());
        return push(std::move(n));
    }

    int transpose(int a) {
        auto& ta = val(a);
        if (ta.ndim() != 2) throw std::invalid_argument("transpose: needs a matrix");
        Node n = node1(Op::kTranspose, a);
        n.value = TensorT<T>({ta.cols(), ta.rows()});
        kernels::transpose(ta.data(), n.value.data(), ta.rows(), ta.cols());
        return push(std::move(n));
    }

    int hadamard(int a, int b) {
        auto& ta = val(a);
        auto& tb = val(b);
        if (!ta.same_shape(tb))
            throw std::invalid_argument("hadamard: shape mismatch " + ta.shape_str() + " vs " +
                                        tb.shape_str());
        Node n = node2(Op::kHadamard, a, b);
        n.value = TensorT<T>(ta.shape);
        kernels::vmul(ta.data(), tb.data(), n.value.data(), ta.numel());
        return push(std::move(n));
    }

    // mat[r,c] .* vec[c], vec broadcast across rows
    int mul_rowvec(int mat, int vec) {
        auto& tm = val(mat);
        auto& tv = val(vec);
        if (tm.ndim() != 2 || tv.ndim() != 1 || tm.cols() != tv.numel())
            throw std::invalid_argument("mul_rowvec: shape mismatch");
        Node n = node2(Op::kMulRowvec, mat, vec);
        n.value = TensorT<T>(tm.shape);
        kernels::mul_rowvec(tm.data(), tv.data(), n.value.data(), tm.rows(), tm.cols());
        return push(std::move(n));
    }

    int add(int a, int b) { return binary_elementwise(Op::kAdd, a, b); }
    int sub(int a, int b) { return binary_elementwise(Op::kSub, a, b); }

    int add_rowvec(int mat, int vec) {
        auto& tm = val(mat);
        auto& tv = val(vec);
        if (tm.ndim() != 2 || tv.ndim() != 1 || tm.cols() != tv.numel())
            throw std::invalid_argument("add_rowvec: shape mismatch");
        Node n = node2(Op::kAddRowvec, mat, vec);
        n.value = TensorT<T>(tm.shape);
        kernels::add_rowvec(tm.data(), tv.data(), n.value.data(), tm.rows(), tm.cols());
        return push(std::move(n));
    }

    int scale(int a, T factor) {
        Node n = node1(Op::kScale, a);
        n.scalar = factor;
        n.value = TensorT<T>(val(a).shape);
        kernels::vscale(val(a).data(), factor, n.value.data(), n.value.numel());
        return push(std::move(n));
    }

    int sigmoid(int a) {
        Node n = node1(Op::kSigmoid, a);
        n.value = TensorT<T>(val(a).shape);
        kernels::sigmoid(val(a).data(), n.value.data(), n.value.numel());
        return push(std::move(n));
    }

    int relu(int a) {
        Node n = node1(Op::kRelu, a);
        n.value = TensorT<T>(val(a).shape);
        kernels::relu(val(a).data(), n.value.data(), n.value.numel());
        return push(std::move(n));
    }

    // Forward: exact {0,1} indicator of positive input. Backward: identity.
    int ste_indicator(int a) {
        Node n = node1(Op::kSteIndicator, a);
        n.value = TensorT<T>(val(a).shape);
        kernels::step_positive(val(a).data(), n.value.data(), n.value.numel());
        return push(std::move(n));
    }

    int reduce_sum(int a) {
        Node n = node1(Op::kReduceSum, a);
        n.value = TensorT<T>::scalar(kernels::reduce_sum(val(a).data(), val(a).numel()));
        return push(std::move(n));
    }

    int row_sum(int a) {
        auto& ta = val(a);
        if (ta.ndim() != 2) throw std::invalid_argument("row_sum: needs a matrix");
        Node n = node1(Op::kRowSum, a);
        n.value = TensorT<T>({ta.rows()});
        kernels::row_sum(ta.data(), n.value.data(), ta.rows(), ta.cols());
        return push(std::move(n));
    }

    int concat_cols(const std::vector<int>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
        size_t rows = val(parts[0]).rows();
        size_t total = 0;
        for (int p : parts) {
            auto& tp = val(p);
            if (tp.ndim() != 2 || tp.rows() != rows)
                throw std::invalid_argument("concat_cols: row mismatch");
            total += tp.cols();
        }
        Node n;
        n.op = Op::kConcatCols;
        n.inputs = parts;
        n.value = TensorT<T>({rows, total});
        size_t off = 0;
        for (int p : parts) {
            auto& tp = val(p);
            for (size_t i = 0; i < rows; ++i)
                std::copy(tp.data() + i * tp.cols(), tp.data() + (i + 1) * tp.cols(),
                          n.value.data() + i * total + off);
            off += tp.cols();
        }
        return push(std::move(n));
    }

    int slice_cols(int a, size_t c0, size_t c1) {
        auto& ta = val(a);
        if (ta.ndim() != 2 || c0 > c1 || c1 > ta.cols())
            throw std::invalid_argument("slice_cols: bad range");
        Node n = node1(Op::kSliceCols, a);
        n.a0 = c0;
        n.a1 = c1;
        n.value = TensorT<T>({ta.rows(), c1 - c0});
        for (size_t i = 0; i < ta.rows(); ++i)
            std::copy(ta.data() + i * ta.cols() + c0, ta.data() + i * ta.cols() + c1,
                      n.value.data() + i * (c1 - c0));
        return push(std::move(n));
    }

    int slice_range(int a, size_t i0, size_t i1) {
        auto& ta = val(a);
        if (ta.ndim() != 1 || i0 > i1 || i1 > ta.numel())
            throw std::invalid_argument("slice_range: bad range");
        Node n = node1(Op::kSliceRange, a);
        n.a0 = i0;
        n.a1 = i1;
        n.value = TensorT<T>({i1 - i0}, std::vector<T>(ta.v.begin() + i0, ta.v.begin() + i1));
        return push(std::move(n));
    }

    int reshape(int a, std::vector<size_t> shape) {
        auto& ta = val(a);
        if (TensorT<T>::count(shape) != ta.numel())
            throw std::invalid_argument("reshape: element count mismatch");
        Node n = node1(Op::kReshape, a);
        n.value = TensorT<T>(std::move(shape), ta.v);
        return push(std::move(n));
    }

    int broadcast_scalar(int a, size_t count) {
        auto& ta = val(a);
        if (ta.numel() != 1) throw std::invalid_argument("broadcast_scalar: input must be scalar");
        Node n = node1(Op::kBroadcastScalar, a);
        n.value = TensorT<T>::full({count}, ta.at(0));
        return push(std::move(n));
    }

    int gather_rows(int table, std::vector<uint32_t> idx) {
        auto& tt = val(table);
        if (tt.ndim() != 2) throw std::invalid_argument("gather_rows: table must be a matrix");
        for (uint32_t i : idx)
            if (i >= tt.rows()) throw std::out_of_range("gather_rows: index out of range");
        Node n = node1(Op::kGatherRows, table);
        n.value = TensorT<T>({idx.size(), tt.cols()});
        kernels::gather_rows(tt.data(), idx.data(), n.value.data(), idx.size(), tt.cols());
        n.indices = std::move(idx);
        return push(std::move(n));
    }

    // Mean negative log-likelihood of Bernoulli labels; predictions are
    // clipped to [clip, 1-clip] before the logs.
    int logloss(int pred, std::vector<T> labels) {
        auto& tp = val(pred);
        if (tp.ndim() != 1 || tp.numel() != labels.size() || labels.empty())
            throw std::invalid_argument("logloss: predictions/labels length mismatch");
        Node n = node1(Op::kLogloss, pred);
        size_t m = labels.size();
        std::vector<T> terms(m);
        for (size_t i = 0; i < m; ++i) {
            T p = clip_prob(tp.at(i));
            terms[i] = -(labels[i] * std::log(p) + (T(1) - labels[i]) * std::log(T(1) - p));
        }
        n.value = TensorT<T>::scalar(kernels::reduce_sum(terms.data(), m) / T(m));
        n.labels = std::move(labels);
        return push(std::move(n));
    }

    // Columns scaled to unit Euclidean norm; zero columns are undefined.
    int normalize_cols(int a) {
        auto& ta = val(a);
        if (ta.ndim() != 2) throw std::invalid_argument("normalize_cols: needs a matrix");
        size_t r = ta.rows(), c = ta.cols();
        Node n = node1(Op::kNormalizeCols, a);
        n.value = TensorT<T>(ta.shape);
        std::vector<T> norms(c);
        for (size_t j = 0; j < c; ++j) {
            T s = 0;
            for (size_t i = 0; i < r; ++i) s += ta.at(i, j) * ta.at(i, j);
            norms[j] = std::sqrt(s);
            if (!(norms[j] > T(0)))
                throw std::domain_error("normalize_cols: zero column " + std::to_string(j));
        }
        for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < c; ++j) n.value.at(i, j) = ta.at(i, j) / norms[j];
        return push(std::move(n));
    }

    const TensorT<T>& value(int id) const { return nodes_.at(id).value; }

    T scalar_value(int id) const {
        const auto& v = nodes_.at(id).value;
        if (v.numel() != 1) throw std::invalid_argument("scalar_value: node is not scalar");
        return v.at(0);
    }

    /// Gradient of the last backward() root w.r.t. node `id`; zeros if the
    /// node received no gradient.
    const TensorT<T>& grad(int id) {
        Node& n = nodes_.at(id);
        if (n.grad.numel() == 0) n.grad = TensorT<T>(n.value.shape);
        return n.grad;
    }

    void backward(int root) {
        Node& r = nodes_.at(root);
        if (r.value.numel() != 1) throw std::invalid_argument("backward: root must be scalar");
        for (Node& n : nodes_) n.grad = TensorT<T>();
        if (!r.needs_grad) return;
        touch_grad(root).at(0) = T(1);
        for (int i = root; i >= 0; --i) {
            Node& n = nodes_[size_t(i)];
            if (!n.needs_grad || n.grad.numel() == 0 || n.op == Op::kLeaf) continue;
            push_input_grads(n);
        }
    }

  private:
    struct Node {
        Op op = Op::kLeaf;
        std::vector<int> inputs;
        TensorT<T> value;
        TensorT<T> grad;
        bool needs_grad = false;
        T scalar = 0;
        size_t a0 = 0, a1 = 0;
        std::vector<uint32_t> indices;
        std::vector<T> labels;
    };

    std::vector<Node> nodes_;
    bool check_finite_ = false;

    const TensorT<T>& val(int id) const { return nodes_.at(id).value; }

    Node node1(Op op, int a) {
        Node n;
        n.op = op;
        n.inputs = {a};
        return n;
    }

    Node node2(Op op, int a, int b) {
        Node n;
        n.op = op;
        n.inputs = {a, b};
        return n;
    }

    int push(Node n) {
        if (n.op != Op::kLeaf)
            for (int i : n.inputs) n.needs_grad = n.needs_grad || nodes_.at(i).needs_grad;
        if (check_finite_ && !n.value.all_finite())
            throw std::runtime_error("graph: non-finite value in forward pass");
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    int binary_elementwise(Op op, int a, int b) {
        auto& ta = val(a);
        auto& tb = val(b);
        if (!ta.same_shape(tb))
            throw std::invalid_argument("add/sub: shape mismatch " + ta.shape_str() + " vs " +
                                        tb.shape_str());
        Node n = node2(op, a, b);
        n.value = TensorT<T>(ta.shape);
        if (op == Op::kAdd) kernels::vadd(ta.data(), tb.data(), n.value.data(), ta.numel());
        else kernels::vsub(ta.data(), tb.data(), n.value.data(), ta.numel());
        return push(std::move(n));
    }

    static T clip_prob(T p) {
        if (p < kLoglossClip) return kLoglossClip;
        if (p > T(1) - kLoglossClip) return T(1) - kLoglossClip;
        return p;
    }

    TensorT<T>& touch_grad(int id) {
        Node& n = nodes_.at(id);
        if (n.grad.numel() == 0) n.grad = TensorT<T>(n.value.shape);
        return n.grad;
    }

    // Accumulates n's output gradient into its inputs.
    void push_input_grads(Node& n) {
        const TensorT<T>& g = n.grad;
        switch (n.op) {
            case Op::kMatmul: {
                Node& a = nodes_[n.inputs[0]];
                Node& b = nodes_[n.inputs[1]];
                size_t m = a.value.rows(), k = a.value.cols(), c = b.value.cols();
                if (a.needs_grad)
                    kernels::matmul_nt(g.data(), b.value.data(), touch_grad(n.inputs[0]).data(), m,
                                       c, k, true);
                if (b.needs_grad)
                    kernels::matmul_tn(a.value.data(), g.data(), touch_grad(n.inputs[1]).data(), m,
                                       k, c, true);
                break;
            }
            case Op::kTranspose: {
                Node& a = nodes_[n.inputs[0]];
                if (!a.needs_grad) break;
                TensorT<T>& da = touch_grad(n.inputs[0]);
                size_t m = n.value.rows(), c = n.value.cols();
                for (size_t i = 0; i < m; ++i)
                    for (size_t j = 0; j < c; ++j) da.at(j, i) += g.at(i, j);
                break;
            }
            case Op::kHadamard: {
                Node& a = nodes_[n.inputs[0]];
                Node& b = nodes_[n.inputs[1]];
                if (a.needs_grad)
                    kernels::vmul_acc(g.data(), b.value.data(), touch_grad(n.inputs[0]).data(),
                                      g.numel());
                if (b.needs_grad)
                    kernels::vmul_acc(g.data(), a.value.data(), touch_grad(n.inputs[1]).data(),
                                      g.numel());
                break;
            }
            case Op::kMulRowvec: {
                Node& m = nodes_[n.inputs[0]];
                Node& vv = nodes_[n.inputs[1]];
                size_t rows = m.value.rows(), cols = m.value.cols();
                if (m.needs_grad) {
                    TensorT<T>& dm = touch_grad(n.inputs[0]);
                    for (size_t i = 0; i < rows; ++i)
                        for (size_t j = 0; j < cols; ++j)
                            dm.at(i, j) += g.at(i, j) * vv.value.at(j);
                }
                if (vv.needs_grad)
                    kernels::mul_rowvec_grad_vec(g.data(), m.value.data(),
                                                 touch_grad(n.inputs[1]).data(), rows, cols);
                break;
            }
            case Op::kAdd: {
                if (nodes_[n.inputs[0]].needs_grad)
                    kernels::axpy(T(1), g.data(), touch_grad(n.inputs[0]).data(), g.numel());
                if (nodes_[n.inputs[1]].needs_grad)
                    kernels::axpy(T(1), g.data(), touch_grad(n.inputs[1]).data(), g.numel());
                break;
            }
            case Op::kSub: {
                if (nodes_[n.inputs[0]].needs_grad)
                    kernels::axpy(T(1), g.data(), touch_grad(n.inputs[0]).data(), g.numel());
                if (nodes_[n.inputs[1]].needs_grad)
                    kernels::axpy(T(-1), g.data(), touch_grad(n.inputs[1]).data(), g.numel());
                break;
            }
            case Op::kAddRowvec: {
                Node& m = nodes_[n.inputs[0]];
                if (m.needs_grad)
                    kernels::axpy(T(1), g.data(), touch_grad(n.inputs[0]).data(), g.numel());
                if (nodes_[n.inputs[1]].needs_grad)
                    kernels::col_sum(g.data(), touch_grad(n.inputs[1]).data(), m.value.rows(),
                                     m.value.cols(), true);
                break;
            }
            case Op::kScale: {
                if (nodes_[n.inputs[0]].needs_grad)
                    kernels::axpy(n.scalar, g.data(), touch_grad(n.inputs[0]).data(), g.numel());
                break;
            }
            case Op::kSigmoid: {
                if (!nodes_[n.inputs[0]].needs_grad) break;
                TensorT<T>& dx = touch_grad(n.inputs[0]);
                for (size_t i = 0; i < g.numel(); ++i) {
                    T y = n.value.at(i);
                    dx.at(i) += g.at(i) * y * (T(1) - y);
                }
                break;
            }
            case Op::kRelu: {
                Node& a = nodes_[n.inputs[0]];
                if (!a.needs_grad) break;
                TensorT<T>& dx = touch_grad(n.inputs[0]);
                for (size_t i = 0; i < g.numel(); ++i)
                    if (a.value.at(i) > 0) dx.at(i) += g.at(i);
                break;
            }
            case Op::kSteIndicator: {
                // Straight-through: the indicator's zero derivative is
                // replaced by the identity, so the upstream gradient passes
                // through unchanged.
                if (nodes_[n.inputs[0]].needs_grad)
                    kernels::axpy(T(1), g.data(), touch_grad(n.inputs[0]).data(), g.numel());
                break;
            }
            case Op::kReduceSum: {
                if (nodes_[n.inputs[0]].needs_grad) {
                    TensorT<T>& dx = touch_grad(n.inputs[0]);
                    T gv = g.at(0);
                    for (size_t i = 0; i < dx.numel(); ++i) dx.at(i) += gv;
                }
                break;
            }
            case Op::kRowSum: {
                Node& a = nodes_[n.inputs[0]];
                if (!a.needs_grad) break;
                TensorT<T>& dx = touch_grad(n.inputs[0]);
                size_t rows = a.value.rows(), cols = a.value.cols();
                for (size_t i = 0; i < rows; ++i)
                    for (size_t j = 0; j < cols; ++j) dx.at(i, j) += g.at(i);
                break;
            }
            case Op::kConcatCols: {
                size_t rows = n.value.rows(), total = n.value.cols();
                size_t off = 0;
                for (int p : n.inputs) {
                    Node& a = nodes_[p];
                    size_t c = a.value.cols();
                    if (a.needs_grad) {
                        TensorT<T>& dx = touch_grad(p);
                        for (size_t i = 0; i < rows; ++i)
                            for (size_t j = 0; j < c; ++j) dx.at(i, j) += g.v[i * total + off + j];
                    }
                    off += c;
                }
                break;
            }
            case Op::kSliceCols: {
                Node& a = nodes_[n.inputs[0]];
                if (!a.needs_grad) break;
                TensorT<T>& dx = touch_grad(n.inputs[0]);
                size_t rows = a.value.rows(), w = n.a1 - n.a0;
                for (size_t i = 0; i < rows; ++i)
                    for (size_t j = 0; j < w; ++j) dx.at(i, n.a0 + j) += g.v[i * w + j];
                break;
            }
            case Op::kSliceRange: {
                if (!nodes_[n.inputs[0]].needs_grad) break;
                TensorT<T>& dx = touch_grad(n.inputs[0]);
                for (size_t i = 0; i < g.numel(); ++i) dx.at(n.a0 + i) += g.at(i);
                break;
            }
            case Op::kReshape: {
                if (nodes_[n.inputs[0]].needs_grad)
                    kernels::axpy(T(1), g.data(), touch_grad(n.inputs[0]).data(), g.numel());
                break;
            }
            case Op::kBroadcastScalar: {
                if (nodes_[n.inputs[0]].needs_grad)
                    touch_grad(n.inputs[0]).at(0) += kernels::reduce_sum(g.data(), g.numel());
                break;
            }
            case Op::kGatherRows: {
                Node& t = nodes_[n.inputs[0]];
                if (t.needs_grad)
                    kernels::scatter_add_rows(touch_grad(n.inputs[0]).data(), n.indices.data(),
                                              g.data(), n.indices.size(), t.value.cols());
                break;
            }
            case Op::kLogloss: {
                Node& p = nodes_[n.inputs[0]];
                if (!p.needs_grad) break;
                TensorT<T>& dx = touch_grad(n.inputs[0]);
                size_t m = n.labels.size();
                T gv = g.at(0) / T(m);
                for (size_t i = 0; i < m; ++i) {
                    T raw = p.value.at(i);
                    if (raw <= kLoglossClip || raw >= T(1) - kLoglossClip) continue;
                    dx.at(i) += gv * (raw - n.labels[i]) / (raw * (T(1) - raw));
                }
                break;
            }
            case Op::kNormalizeCols: {
                Node& a = nodes_[n.inputs[0]];
                if (!a.needs_grad) break;
                TensorT<T>& dx = touch_grad(n.inputs[0]);
                size_t r = a.value.rows(), c = a.value.cols();
                for (size_t j = 0; j < c; ++j) {
                    T nrm = 0;
                    for (size_t i = 0; i < r; ++i) nrm += a.value.at(i, j) * a.value.at(i, j);
                    nrm = std::sqrt(nrm);
                    T dot = 0;
                    for (size_t i = 0; i < r; ++i) dot += n.value.at(i, j) * g.at(i, j);
                    for (size_t i = 0; i < r; ++i)
                        dx.at(i, j) += (g.at(i, j) - n.value.at(i, j) * dot) / nrm;
                }
                break;
            }
            case Op::kLeaf:
                break;
        }
    }
};

using Graph = GraphT<double>;
using Graph32 = GraphT<float>;

}  // namespace hamprune

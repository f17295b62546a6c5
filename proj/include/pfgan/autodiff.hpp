// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reverse-mode autodiff over 2-D tensors. Backward functions are themselves
// composed of differentiable ops, so grad-of-grad (needed by the gradient
// penalty) falls out of the same machinery. Graphs are dynamic and freed when
// the last Var referencing them dies.

#include "pfgan/tensor.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace pfgan {

template <class T>
class VarT;

namespace detail {

// When disabled, ops still compute values but record no parents, i.e. the
// result behaves like a constant. Used for plain inference and for first-order
// backward passes that do not need a differentiable gradient.
inline thread_local bool grad_mode_enabled = true;

}  // namespace detail

struct GradMode {
    static bool enabled() { return detail::grad_mode_enabled; }
    static void set(bool v) { detail::grad_mode_enabled = v; }
};

class NoGradGuard {
  public:
    NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
    ~NoGradGuard() { GradMode::set(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

class GradModeGuard {
  public:
    explicit GradModeGuard(bool on) : prev_(GradMode::enabled()) { GradMode::set(on); }
    ~GradModeGuard() { GradMode::set(prev_); }
    GradModeGuard(const GradModeGuard&) = delete;
    GradModeGuard& operator=(const GradModeGuard&) = delete;

  private:
    bool prev_;
};

template <class T>
struct NodeT {
    using BackFn =
        std::function<std::vector<VarT<T>>(const VarT<T>& g, const std::vector<VarT<T>>& parents)>;

    TensorT<T> value;
    std::vector<VarT<T>> parents;
    BackFn back;
    bool requires_grad = false;
};

template <class T>
class VarT {
  public:
    VarT() = default;
    explicit VarT(std::shared_ptr<NodeT<T>> n) : n_(std::move(n)) {}

    static VarT constant(TensorT<T> t) {
        auto n = std::make_shared<NodeT<T>>();
        n->value = std::move(t);
        n->requires_grad = false;
        return VarT(std::move(n));
    }

    // A differentiation root: parameters, or inputs we want gradients for.
    static VarT leaf(TensorT<T> t) {
        auto n = std::make_shared<NodeT<T>>();
        n->value = std::move(t);
        n->requires_grad = true;
        return VarT(std::move(n));
    }

    bool valid() const { return n_ != nullptr; }
    const TensorT<T>& val() const { return n_->value; }
    int64_t rows() const { return n_->value.rows(); }
    int64_t cols() const { return n_->value.cols(); }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    NodeT<T>* node() const { return n_.get(); }

    VarT detach() const { return constant(n_->value); }

    // In-place parameter update; only valid on leaves outside any live graph.
    // Shallow-const: mutates the shared node, not this handle.
    void assign_value(const TensorT<T>& t) const {
        if (!n_->value.same_shape(t)) throw std::invalid_argument("pfgan: var: assign shape mismatch");
        *n_->value.buf = *t.buf;
    }

  private:
    std::shared_ptr<NodeT<T>> n_;
};

using Varf = VarT<float>;
using Vard = VarT<double>;

namespace detail {

template <class T>
VarT<T> make_op(TensorT<T> value, std::vector<VarT<T>> parents, typename NodeT<T>::BackFn back) {
    bool need = false;
    if (grad_mode_enabled)
        for (const auto& p : parents)
            if (p.requires_grad()) {
                need = true;
                break;
            }
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(value);
    if (need) {
        n->parents = std::move(parents);
        n->back = std::move(back);
        n->requires_grad = true;
    }
    return VarT<T>(std::move(n));
}

template <class T>
void check_same_shape(const char* op, const VarT<T>& a, const VarT<T>& b) {
    if (!a.val().same_shape(b.val()))
        throw std::invalid_argument(std::string("pfgan: ") + op + ": shape mismatch");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <class T>
VarT<T> add(const VarT<T>& a, const VarT<T>& b) {
    detail::check_same_shape("add", a, b);
    TensorT<T> v(a.rows(), a.cols());
    v.map() = a.val().cmap() + b.val().cmap();
    return detail::make_op<T>(std::move(v), {a, b}, [](const VarT<T>& g, const std::vector<VarT<T>>&) {
        return std::vector<VarT<T>>{g, g};
    });
}

template <class T>
VarT<T> sub(const VarT<T>& a, const VarT<T>& b) {
    detail::check_same_shape("sub", a, b);
    TensorT<T> v(a.rows(), a.cols());
    v.map() = a.val().cmap() - b.val().cmap();
    return detail::make_op<T>(std::move(v), {a, b}, [](const VarT<T>& g, const std::vector<VarT<T>>&) {
        return std::vector<VarT<T>>{g, neg(g)};
    });
}

template <class T>
VarT<T> mul(const VarT<T>& a, const VarT<T>& b) {
    detail::check_same_shape("mul", a, b);
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = a.val().cmap().array() * b.val().cmap().array();
    return detail::make_op<T>(std::move(v), {a, b},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  return std::vector<VarT<T>>{mul(g, p[1]), mul(g, p[0])};
                              });
}

template <class T>
VarT<T> div(const VarT<T>& a, const VarT<T>& b) {
    detail::check_same_shape("div", a, b);
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = a.val().cmap().array() / b.val().cmap().array();
    return detail::make_op<T>(std::move(v), {a, b},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  VarT<T> ga = div(g, p[1]);
                                  VarT<T> gb = neg(mul(ga, div(p[0], p[1])));
                                  return std::vector<VarT<T>>{ga, gb};
                              });
}

template <class T>
VarT<T> neg(const VarT<T>& a) {
    TensorT<T> v(a.rows(), a.cols());
    v.map() = -a.val().cmap();
    return detail::make_op<T>(std::move(v), {a}, [](const VarT<T>& g, const std::vector<VarT<T>>&) {
        return std::vector<VarT<T>>{neg(g)};
    });
}

template <class T>
VarT<T> add_scalar(const VarT<T>& a, T s) {
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = a.val().cmap().array() + s;
    return detail::make_op<T>(std::move(v), {a}, [](const VarT<T>& g, const std::vector<VarT<T>>&) {
        return std::vector<VarT<T>>{g};
    });
}

template <class T>
VarT<T> mul_scalar(const VarT<T>& a, T s) {
    TensorT<T> v(a.rows(), a.cols());
    v.map() = a.val().cmap() * s;
    return detail::make_op<T>(std::move(v), {a}, [s](const VarT<T>& g, const std::vector<VarT<T>>&) {
        return std::vector<VarT<T>>{mul_scalar(g, s)};
    });
}

// max(a, s), elementwise against a scalar. Subgradient: pass-through where a > s.
template <class T>
VarT<T> maximum_scalar(const VarT<T>& a, T s) {
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = a.val().cmap().array().max(s);
    TensorT<T> mask(a.rows(), a.cols());
    mask.map().array() = (a.val().cmap().array() > s).template cast<T>();
    return detail::make_op<T>(std::move(v), {a},
                              [mask](const VarT<T>& g, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{mul(g, VarT<T>::constant(mask))};
                              });
}

// ---------------------------------------------------------------------------
// Broadcasting against row / column vectors
// ---------------------------------------------------------------------------

namespace detail {
template <class T>
void check_rowvec(const char* op, const VarT<T>& m, const VarT<T>& r) {
    if (r.rows() != 1 || r.cols() != m.cols())
        throw std::invalid_argument(std::string("pfgan: ") + op + ": bad row vector");
}
template <class T>
void check_colvec(const char* op, const VarT<T>& m, const VarT<T>& c) {
    if (c.cols() != 1 || c.rows() != m.rows())
        throw std::invalid_argument(std::string("pfgan: ") + op + ": bad column vector");
}
}  // namespace detail

template <class T>
VarT<T> add_rowvec(const VarT<T>& m, const VarT<T>& r) {
    detail::check_rowvec("add_rowvec", m, r);
    TensorT<T> v(m.rows(), m.cols());
    v.map() = m.val().cmap().rowwise() + a_row(r);
    return detail::make_op<T>(std::move(v), {m, r}, [](const VarT<T>& g, const std::vector<VarT<T>>&) {
        return std::vector<VarT<T>>{g, col_sum(g)};
    });
}

template <class T>
auto a_row(const VarT<T>& r) {
    return Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(r.val().data(), r.cols());
}

template <class T>
VarT<T> mul_rowvec(const VarT<T>& m, const VarT<T>& r) {
    detail::check_rowvec("mul_rowvec", m, r);
    TensorT<T> v(m.rows(), m.cols());
    v.map().array() = m.val().cmap().array().rowwise() * a_row(r).array();
    return detail::make_op<T>(std::move(v), {m, r},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  return std::vector<VarT<T>>{mul_rowvec(g, p[1]),
                                                              col_sum(mul(g, p[0]))};
                              });
}

template <class T>
VarT<T> add_colvec(const VarT<T>& m, const VarT<T>& c) {
    detail::check_colvec("add_colvec", m, c);
    TensorT<T> v(m.rows(), m.cols());
    v.map() = m.val().cmap().colwise() +
              Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(c.val().data(), c.rows());
    return detail::make_op<T>(std::move(v), {m, c}, [](const VarT<T>& g, const std::vector<VarT<T>>&) {
        return std::vector<VarT<T>>{g, row_sum(g)};
    });
}

template <class T>
VarT<T> mul_colvec(const VarT<T>& m, const VarT<T>& c) {
    detail::check_colvec("mul_colvec", m, c);
    TensorT<T> v(m.rows(), m.cols());
    v.map().array() = m.val().cmap().array().colwise() *
                      Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(c.val().data(), c.rows());
    return detail::make_op<T>(std::move(v), {m, c},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  return std::vector<VarT<T>>{mul_colvec(g, p[1]),
                                                              row_sum(mul(g, p[0]))};
                              });
}

template <class T>
VarT<T> div_colvec(const VarT<T>& m, const VarT<T>& c) {
    detail::check_colvec("div_colvec", m, c);
    TensorT<T> v(m.rows(), m.cols());
    v.map().array() = m.val().cmap().array().colwise() /
                      Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(c.val().data(), c.rows());
    return detail::make_op<T>(std::move(v), {m, c},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  VarT<T> gm = div_colvec(g, p[1]);
                                  VarT<T> gc = neg(div(row_sum(mul(g, p[0])), mul(p[1], p[1])));
                                  return std::vector<VarT<T>>{gm, gc};
                              });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <class T>
VarT<T> reshape(const VarT<T>& a, int64_t r, int64_t c) {
    TensorT<T> v = a.val().reshaped(r, c);
    int64_t pr = a.rows(), pc = a.cols();
    return detail::make_op<T>(std::move(v), {a},
                              [pr, pc](const VarT<T>& g, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{reshape(g, pr, pc)};
                              });
}

template <class T>
VarT<T> transpose(const VarT<T>& a) {
    TensorT<T> v(a.cols(), a.rows());
    v.map() = a.val().cmap().transpose();
    return detail::make_op<T>(std::move(v), {a}, [](const VarT<T>& g, const std::vector<VarT<T>>&) {
        return std::vector<VarT<T>>{transpose(g)};
    });
}

template <class T>
VarT<T> slice_cols(const VarT<T>& a, int64_t c0, int64_t c1) {
    if (c0 < 0 || c1 > a.cols() || c0 >= c1)
        throw std::invalid_argument("pfgan: slice_cols: bad range");
    TensorT<T> v(a.rows(), c1 - c0);
    v.map() = a.val().cmap().middleCols(c0, c1 - c0);
    int64_t cols = a.cols();
    return detail::make_op<T>(std::move(v), {a},
                              [c0, cols](const VarT<T>& g, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{pad_cols(g, c0, cols)};
                              });
}

// Embed g into a wider zero matrix at column offset c0; adjoint of slice_cols.
template <class T>
VarT<T> pad_cols(const VarT<T>& g, int64_t c0, int64_t total_cols) {
    TensorT<T> v = TensorT<T>::zeros(g.rows(), total_cols);
    v.map().middleCols(c0, g.cols()) = g.val().cmap();
    int64_t gc = g.cols();
    return detail::make_op<T>(std::move(v), {g},
                              [c0, gc](const VarT<T>& gg, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{slice_cols(gg, c0, c0 + gc)};
                              });
}

template <class T>
VarT<T> slice_rows(const VarT<T>& a, int64_t r0, int64_t r1) {
    if (r0 < 0 || r1 > a.rows() || r0 >= r1)
        throw std::invalid_argument("pfgan: slice_rows: bad range");
    TensorT<T> v(r1 - r0, a.cols());
    v.map() = a.val().cmap().middleRows(r0, r1 - r0);
    int64_t rows = a.rows();
    return detail::make_op<T>(std::move(v), {a},
                              [r0, rows](const VarT<T>& g, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{pad_rows(g, r0, rows)};
                              });
}

template <class T>
VarT<T> pad_rows(const VarT<T>& g, int64_t r0, int64_t total_rows) {
    TensorT<T> v = TensorT<T>::zeros(total_rows, g.cols());
    v.map().middleRows(r0, g.rows()) = g.val().cmap();
    int64_t gr = g.rows();
    return detail::make_op<T>(std::move(v), {g},
                              [r0, gr](const VarT<T>& gg, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{slice_rows(gg, r0, r0 + gr)};
                              });
}

template <class T>
VarT<T> concat_cols(const std::vector<VarT<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("pfgan: concat_cols: empty");
    int64_t r = parts[0].rows(), c = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) throw std::invalid_argument("pfgan: concat_cols: row mismatch");
        c += p.cols();
    }
    TensorT<T> v(r, c);
    std::vector<int64_t> offs;
    int64_t o = 0;
    for (const auto& p : parts) {
        v.map().middleCols(o, p.cols()) = p.val().cmap();
        offs.push_back(o);
        o += p.cols();
    }
    return detail::make_op<T>(std::move(v), parts,
                              [offs](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  std::vector<VarT<T>> out;
                                  for (size_t i = 0; i < p.size(); ++i)
                                      out.push_back(slice_cols(g, offs[i], offs[i] + p[i].cols()));
                                  return out;
                              });
}

template <class T>
VarT<T> concat_rows(const std::vector<VarT<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("pfgan: concat_rows: empty");
    int64_t c = parts[0].cols(), r = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) throw std::invalid_argument("pfgan: concat_rows: col mismatch");
        r += p.rows();
    }
    TensorT<T> v(r, c);
    std::vector<int64_t> offs;
    int64_t o = 0;
    for (const auto& p : parts) {
        v.map().middleRows(o, p.rows()) = p.val().cmap();
        offs.push_back(o);
        o += p.rows();
    }
    return detail::make_op<T>(std::move(v), parts,
                              [offs](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  std::vector<VarT<T>> out;
                                  for (size_t i = 0; i < p.size(); ++i)
                                      out.push_back(slice_rows(g, offs[i], offs[i] + p[i].rows()));
                                  return out;
                              });
}

template <class T>
VarT<T> tile_rows(const VarT<T>& r, int64_t n) {
    if (r.rows() != 1) throw std::invalid_argument("pfgan: tile_rows: expects 1 x m");
    TensorT<T> v(n, r.cols());
    v.map().rowwise() = a_row(r);
    return detail::make_op<T>(std::move(v), {r}, [](const VarT<T>& g, const std::vector<VarT<T>>&) {
        return std::vector<VarT<T>>{col_sum(g)};
    });
}

template <class T>
VarT<T> tile_cols(const VarT<T>& c, int64_t m) {
    if (c.cols() != 1) throw std::invalid_argument("pfgan: tile_cols: expects n x 1");
    TensorT<T> v(c.rows(), m);
    v.map().colwise() = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(c.val().data(), c.rows());
    return detail::make_op<T>(std::move(v), {c}, [](const VarT<T>& g, const std::vector<VarT<T>>&) {
        return std::vector<VarT<T>>{row_sum(g)};
    });
}

// ---------------------------------------------------------------------------
// Reductions and scans
// ---------------------------------------------------------------------------

template <class T>
VarT<T> row_sum(const VarT<T>& a) {
    TensorT<T> v(a.rows(), 1);
    v.map() = a.val().cmap().rowwise().sum();
    int64_t m = a.cols();
    return detail::make_op<T>(std::move(v), {a},
                              [m](const VarT<T>& g, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{tile_cols(g, m)};
                              });
}

template <class T>
VarT<T> col_sum(const VarT<T>& a) {
    TensorT<T> v(1, a.cols());
    v.map() = a.val().cmap().colwise().sum();
    int64_t n = a.rows();
    return detail::make_op<T>(std::move(v), {a},
                              [n](const VarT<T>& g, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{tile_rows(g, n)};
                              });
}

template <class T>
VarT<T> sum_all(const VarT<T>& a) {
    return col_sum(row_sum(a));
}

template <class T>
VarT<T> mean_all(const VarT<T>& a) {
    return mul_scalar(sum_all(a), T(1) / static_cast<T>(a.rows() * a.cols()));
}

// Exclusive prefix sum along each row (out[i,0] = 0). reverse=true gives the
// exclusive suffix sum, which is also its own adjoint partner.
template <class T>
VarT<T> row_cumsum_exclusive(const VarT<T>& a, bool reverse = false) {
    TensorT<T> v(a.rows(), a.cols());
    const int64_t n = a.rows(), m = a.cols();
    for (int64_t i = 0; i < n; ++i) {
        T acc = T(0);
        if (!reverse)
            for (int64_t j = 0; j < m; ++j) {
                v(i, j) = acc;
                acc += a.val()(i, j);
            }
        else
            for (int64_t j = m - 1; j >= 0; --j) {
                v(i, j) = acc;
                acc += a.val()(i, j);
            }
    }
    return detail::make_op<T>(std::move(v), {a},
                              [reverse](const VarT<T>& g, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{row_cumsum_exclusive(g, !reverse)};
                              });
}

// ---------------------------------------------------------------------------
// Matmul
// ---------------------------------------------------------------------------

template <class T>
VarT<T> matmul(const VarT<T>& a, const VarT<T>& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("pfgan: matmul: inner dim mismatch");
    TensorT<T> v(a.rows(), b.cols());
    v.map().noalias() = a.val().cmap() * b.val().cmap();
    return detail::make_op<T>(std::move(v), {a, b},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  return std::vector<VarT<T>>{matmul(g, transpose(p[1])),
                                                              matmul(transpose(p[0]), g)};
                              });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

template <class T>
VarT<T> sin(const VarT<T>& a) {
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = a.val().cmap().array().sin();
    return detail::make_op<T>(std::move(v), {a},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  return std::vector<VarT<T>>{mul(g, cos(p[0]))};
                              });
}

template <class T>
VarT<T> cos(const VarT<T>& a) {
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = a.val().cmap().array().cos();
    return detail::make_op<T>(std::move(v), {a},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  return std::vector<VarT<T>>{neg(mul(g, sin(p[0])))};
                              });
}

template <class T>
VarT<T> exp(const VarT<T>& a) {
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = a.val().cmap().array().exp();
    return detail::make_op<T>(std::move(v), {a},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  return std::vector<VarT<T>>{mul(g, exp(p[0]))};
                              });
}

template <class T>
VarT<T> log(const VarT<T>& a) {
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = a.val().cmap().array().log();
    return detail::make_op<T>(std::move(v), {a},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  return std::vector<VarT<T>>{div(g, p[0])};
                              });
}

template <class T>
VarT<T> sqrt(const VarT<T>& a) {
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = a.val().cmap().array().sqrt();
    return detail::make_op<T>(std::move(v), {a},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  return std::vector<VarT<T>>{div(mul_scalar(g, T(0.5)), sqrt(p[0]))};
                              });
}

template <class T>
VarT<T> tanh(const VarT<T>& a) {
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = a.val().cmap().array().tanh();
    return detail::make_op<T>(std::move(v), {a},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  VarT<T> y = tanh(p[0]);
                                  return std::vector<VarT<T>>{
                                      mul(g, add_scalar(neg(mul(y, y)), T(1)))};
                              });
}

template <class T>
VarT<T> sigmoid(const VarT<T>& a) {
    TensorT<T> v(a.rows(), a.cols());
    v.map().array() = T(1) / (T(1) + (-a.val().cmap().array()).exp());
    return detail::make_op<T>(std::move(v), {a},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  VarT<T> s = sigmoid(p[0]);
                                  return std::vector<VarT<T>>{
                                      mul(g, mul(s, add_scalar(neg(s), T(1))))};
                              });
}

template <class T>
VarT<T> softplus(const VarT<T>& a) {
    TensorT<T> v(a.rows(), a.cols());
    for (int64_t k = 0; k < v.numel(); ++k) {
        T x = a.val().at(k);
        v.at(k) = x > T(20) ? x : std::log1p(std::exp(x));
    }
    return detail::make_op<T>(std::move(v), {a},
                              [](const VarT<T>& g, const std::vector<VarT<T>>& p) {
                                  return std::vector<VarT<T>>{mul(g, sigmoid(p[0]))};
                              });
}

template <class T>
VarT<T> leaky_relu(const VarT<T>& a, T slope) {
    TensorT<T> v(a.rows(), a.cols());
    TensorT<T> mask(a.rows(), a.cols());
    for (int64_t k = 0; k < v.numel(); ++k) {
        T x = a.val().at(k);
        bool pos = x > T(0);
        v.at(k) = pos ? x : slope * x;
        mask.at(k) = pos ? T(1) : slope;
    }
    return detail::make_op<T>(std::move(v), {a},
                              [mask](const VarT<T>& g, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{mul(g, VarT<T>::constant(mask))};
                              });
}

// ---------------------------------------------------------------------------
// Gather / scatter over the flattened element index (im2col machinery).
// Index -1 reads a zero (padding) and receives no gradient.
// ---------------------------------------------------------------------------

template <class T>
VarT<T> gather_elems(const VarT<T>& a, std::shared_ptr<const std::vector<int64_t>> idx, int64_t r,
                     int64_t c) {
    if (static_cast<int64_t>(idx->size()) != r * c)
        throw std::invalid_argument("pfgan: gather_elems: index size mismatch");
    TensorT<T> v(r, c);
    const T* src = a.val().data();
    for (int64_t k = 0; k < r * c; ++k) {
        int64_t i = (*idx)[static_cast<size_t>(k)];
        v.at(k) = i >= 0 ? src[i] : T(0);
    }
    int64_t ar = a.rows(), ac = a.cols();
    return detail::make_op<T>(std::move(v), {a},
                              [idx, ar, ac](const VarT<T>& g, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{scatter_elems(g, idx, ar, ac)};
                              });
}

template <class T>
VarT<T> scatter_elems(const VarT<T>& g, std::shared_ptr<const std::vector<int64_t>> idx, int64_t r,
                      int64_t c) {
    if (static_cast<int64_t>(idx->size()) != g.val().numel())
        throw std::invalid_argument("pfgan: scatter_elems: index size mismatch");
    TensorT<T> v = TensorT<T>::zeros(r, c);
    T* dst = v.data();
    for (int64_t k = 0; k < g.val().numel(); ++k) {
        int64_t i = (*idx)[static_cast<size_t>(k)];
        if (i >= 0) dst[i] += g.val().at(k);
    }
    int64_t gr = g.rows(), gc = g.cols();
    return detail::make_op<T>(std::move(v), {g},
                              [idx, gr, gc](const VarT<T>& gg, const std::vector<VarT<T>>&) {
                                  return std::vector<VarT<T>>{gather_elems(gg, idx, gr, gc)};
                              });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

// Vector-Jacobian product of `out` against `leaves`, seeded with `cotangent`.
// With create_graph=true the returned Vars stay differentiable (used by the
// gradient penalty); otherwise they are plain values. Leaves that `out` does
// not depend on get zero gradients.
template <class T>
std::vector<VarT<T>> grad(const VarT<T>& out, const VarT<T>& cotangent,
                          std::span<const VarT<T>> leaves, bool create_graph = false) {
    if (!out.val().same_shape(cotangent.val()))
        throw std::invalid_argument("pfgan: grad: cotangent shape mismatch");

    // Mark nodes that can reach a requested leaf; backward skips the rest.
    std::unordered_set<const NodeT<T>*> leaf_set;
    for (const auto& l : leaves) leaf_set.insert(l.node());
    std::unordered_map<const NodeT<T>*, bool> reach;
    {
        std::vector<std::pair<const NodeT<T>*, size_t>> stack{{out.node(), 0}};
        while (!stack.empty()) {
            auto& [n, pi] = stack.back();
            if (pi == 0 && reach.count(n)) {
                stack.pop_back();
                continue;
            }
            if (pi < n->parents.size()) {
                const NodeT<T>* p = n->parents[pi].node();
                ++pi;
                if (p->requires_grad && !reach.count(p)) stack.push_back({p, 0});
            } else {
                bool r = leaf_set.count(n) > 0;
                for (const auto& p : n->parents)
                    if (p.node()->requires_grad && reach[p.node()]) r = true;
                reach[n] = r;
                stack.pop_back();
            }
        }
    }

    // Reverse topological order over reachable nodes.
    std::vector<NodeT<T>*> topo;
    {
        std::unordered_set<const NodeT<T>*> visited;
        std::vector<std::pair<NodeT<T>*, size_t>> stack{{out.node(), 0}};
        visited.insert(out.node());
        while (!stack.empty()) {
            auto& [n, pi] = stack.back();
            if (pi < n->parents.size()) {
                NodeT<T>* p = n->parents[pi].node();
                ++pi;
                if (p->requires_grad && reach[p] && !visited.count(p)) {
                    visited.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                topo.push_back(n);
                stack.pop_back();
            }
        }
    }

    GradModeGuard guard(create_graph);
    std::unordered_map<const NodeT<T>*, VarT<T>> cot;
    cot[out.node()] = create_graph ? cotangent : cotangent.detach();
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        NodeT<T>* n = *it;
        auto found = cot.find(n);
        if (found == cot.end() || !n->back) continue;
        std::vector<VarT<T>> parent_cots = n->back(found->second, n->parents);
        if (parent_cots.size() != n->parents.size())
            throw std::logic_error("pfgan: grad: backward arity mismatch");
        for (size_t i = 0; i < n->parents.size(); ++i) {
            const NodeT<T>* p = n->parents[i].node();
            if (!p->requires_grad || !reach[p]) continue;
            auto [slot, fresh] = cot.try_emplace(p, parent_cots[i]);
            if (!fresh) slot->second = add(slot->second, parent_cots[i]);
        }
    }

    std::vector<VarT<T>> result;
    result.reserve(leaves.size());
    for (const auto& l : leaves) {
        auto found = cot.find(l.node());
        if (found != cot.end())
            result.push_back(found->second);
        else
            result.push_back(VarT<T>::constant(TensorT<T>::zeros(l.rows(), l.cols())));
    }
    return result;
}

template <class T>
std::vector<VarT<T>> grad(const VarT<T>& out, std::span<const VarT<T>> leaves,
                          bool create_graph = false) {
    return grad(out, VarT<T>::constant(TensorT<T>::full(out.rows(), out.cols(), T(1))), leaves,
                create_graph);
}

}  // namespace pfgan

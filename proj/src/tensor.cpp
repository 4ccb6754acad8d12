#include "eegx/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace eegx {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace detail {

std::uint64_t next_node_order() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace detail

namespace {

[[noreturn]] void op_fail(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

void require(bool ok, const std::string& op, const std::string& what) {
  if (!ok) op_fail(op, what);
}

void require_2d(const Tensor& t, const std::string& op, const char* name) {
  if (t.ndim() != 2)
    op_fail(op, std::string(name) + " must be 2-D, got " + shape_str(t.shape()));
}

using NodePtr = std::shared_ptr<detail::Node>;
using DataPtr = std::shared_ptr<std::vector<real>>;

}  // namespace

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
  return constant(std::move(shape), {});
}

Tensor Tensor::full(Shape shape, real value) {
  std::vector<real> d(shape_numel(shape), value);
  return constant(std::move(shape), std::move(d));
}

Tensor Tensor::constant(Shape shape, std::vector<real> data) {
  Tensor t;
  const std::size_t n = shape_numel(shape);
  if (data.empty()) data.assign(n, real(0));
  if (data.size() != n)
    throw std::invalid_argument("Tensor: data length " +
                                std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<real>>(std::move(data));
  return t;
}

Tensor Tensor::scalar(real value) { return constant({1}, {value}); }

Tensor Tensor::leaf(Shape shape, std::vector<real> data) {
  Tensor t = constant(std::move(shape), std::move(data));
  auto node = std::make_shared<detail::Node>();
  node->order = detail::next_node_order();
  node->numel = t.size();
  t.node_ = std::move(node);
  return t;
}

real Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("Tensor::item: tensor has " +
                                std::to_string(size()) + " elements");
  return (*data_)[0];
}

const std::vector<real>& Tensor::grad() const {
  static const std::vector<real> empty;
  if (!node_ || node_->grad.empty()) return empty;
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = std::make_shared<std::vector<real>>(*data_);
  return t;
}

Tensor make_op_tensor(Shape shape, std::vector<real> data,
                      std::vector<NodePtr> parents,
                      std::function<void(const std::vector<real>&)> backprop) {
  Tensor t = Tensor::constant(std::move(shape), std::move(data));
  parents.erase(std::remove(parents.begin(), parents.end(), nullptr),
                parents.end());
  if (parents.empty()) return t;  // all inputs constant: stays off-tape
  auto node = std::make_shared<detail::Node>();
  node->order = detail::next_node_order();
  node->numel = t.size();
  node->parents = std::move(parents);
  node->backprop = std::move(backprop);
  t.node_ = std::move(node);
  return t;
}

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(loss.shape()));
  if (!loss.on_tape())
    throw std::invalid_argument("backward: loss is not on the tape");

  // Collect reachable nodes; reverse creation order is a topological order.
  std::vector<detail::Node*> nodes;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{loss.node_ptr().get()};
  seen.insert(loss.node_ptr().get());
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (const auto& p : n->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const detail::Node* a, const detail::Node* b) {
              return a->order > b->order;
            });

  auto& lg = loss.node_ptr()->ensure_grad();
  lg[0] += real(1);
  for (detail::Node* n : nodes) {
    if (n->backprop && !n->grad.empty()) n->backprop(n->grad);
  }
}

// ---- elementwise / linear ops ----------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul", "lhs");
  require_2d(b, "matmul", "rhs");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  require(k == k2, "matmul",
          "inner dimensions differ: " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
  std::vector<real> out(static_cast<std::size_t>(m) * n, real(0));
  const real* A = a.data().data();
  const real* B = b.data().data();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const real av = A[i * k + p];
      if (av == real(0)) continue;
      const real* Brow = B + p * n;
      real* Orow = out.data() + i * n;
      for (int j = 0; j < n; ++j) Orow[j] += av * Brow[j];
    }
  }
  auto an = a.node_ptr(), bn = b.node_ptr();
  auto ad = a.data_ptr(), bd = b.data_ptr();
  return make_op_tensor(
      {m, n}, std::move(out), {an, bn},
      [an, bn, ad, bd, m, k, n](const std::vector<real>& g) {
        if (an) {
          auto& ga = an->ensure_grad();
          const real* B = bd->data();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
              const real gv = g[static_cast<std::size_t>(i) * n + j];
              if (gv == real(0)) continue;
              const real* Brow = B + j;  // column j
              for (int p = 0; p < k; ++p)
                ga[static_cast<std::size_t>(i) * k + p] += gv * Brow[static_cast<std::size_t>(p) * n];
            }
        }
        if (bn) {
          auto& gb = bn->ensure_grad();
          const real* A = ad->data();
          for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
              const real av = A[static_cast<std::size_t>(i) * k + p];
              if (av == real(0)) continue;
              const real* grow = g.data() + static_cast<std::size_t>(i) * n;
              real* gbrow = gb.data() + static_cast<std::size_t>(p) * n;
              for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add",
          "shape mismatch: " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto an = a.node_ptr(), bn = b.node_ptr();
  return make_op_tensor(a.shape(), std::move(out), {an, bn},
                        [an, bn](const std::vector<real>& g) {
                          if (an) {
                            auto& ga = an->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                          }
                          if (bn) {
                            auto& gb = bn->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                          }
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub",
          "shape mismatch: " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto an = a.node_ptr(), bn = b.node_ptr();
  return make_op_tensor(a.shape(), std::move(out), {an, bn},
                        [an, bn](const std::vector<real>& g) {
                          if (an) {
                            auto& ga = an->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                          }
                          if (bn) {
                            auto& gb = bn->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                          }
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul",
          "shape mismatch: " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto an = a.node_ptr(), bn = b.node_ptr();
  auto ad = a.data_ptr(), bd = b.data_ptr();
  return make_op_tensor(a.shape(), std::move(out), {an, bn},
                        [an, bn, ad, bd](const std::vector<real>& g) {
                          if (an) {
                            auto& ga = an->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i)
                              ga[i] += g[i] * (*bd)[i];
                          }
                          if (bn) {
                            auto& gb = bn->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i)
                              gb[i] += g[i] * (*ad)[i];
                          }
                        });
}

Tensor scale(const Tensor& a, real s) {
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  auto an = a.node_ptr();
  return make_op_tensor(a.shape(), std::move(out), {an},
                        [an, s](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
                        });
}

Tensor add_scalar(const Tensor& a, real s) {
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + s;
  auto an = a.node_ptr();
  return make_op_tensor(a.shape(), std::move(out), {an},
                        [an](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                        });
}

Tensor add_rowwise(const Tensor& a, const Tensor& v) {
  require_2d(a, "add_rowwise", "matrix");
  require(v.ndim() == 1 && v.dim(0) == a.dim(1), "add_rowwise",
          "vector shape " + shape_str(v.shape()) + " does not match columns of " +
              shape_str(a.shape()));
  const int n = a.dim(0), d = a.dim(1);
  std::vector<real> out(a.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      out[static_cast<std::size_t>(i) * d + j] =
          a.data()[static_cast<std::size_t>(i) * d + j] + v.data()[static_cast<std::size_t>(j)];
  auto an = a.node_ptr(), vn = v.node_ptr();
  return make_op_tensor(a.shape(), std::move(out), {an, vn},
                        [an, vn, n, d](const std::vector<real>& g) {
                          if (an) {
                            auto& ga = an->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                          }
                          if (vn) {
                            auto& gv = vn->ensure_grad();
                            for (int i = 0; i < n; ++i)
                              for (int j = 0; j < d; ++j)
                                gv[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * d + j];
                          }
                        });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  require(!xs.empty(), "concat", "no inputs");
  const int nd = xs[0].ndim();
  require(nd == 1 || nd == 2, "concat", "supports 1-D and 2-D tensors");
  require(axis >= 0 && axis < nd, "concat", "axis out of range");
  for (const auto& x : xs) {
    require(x.ndim() == nd, "concat", "rank mismatch");
    for (int i = 0; i < nd; ++i)
      require(i == axis || x.dim(i) == xs[0].dim(i), "concat",
              "shape mismatch on non-concat axis: " + shape_str(x.shape()) +
                  " vs " + shape_str(xs[0].shape()));
  }
  Shape out_shape = xs[0].shape();
  int total = 0;
  for (const auto& x : xs) total += x.dim(axis);
  out_shape[static_cast<std::size_t>(axis)] = total;

  std::vector<real> out(shape_numel(out_shape));
  std::vector<NodePtr> parents;
  struct Part {
    NodePtr node;
    int offset;
    int extent;
  };
  std::vector<Part> parts;
  if (nd == 1 || axis == 0) {
    const std::size_t rowlen = (nd == 2) ? static_cast<std::size_t>(xs[0].dim(1)) : 1;
    std::size_t pos = 0;
    for (const auto& x : xs) {
      std::copy(x.data().begin(), x.data().end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
      parts.push_back({x.node_ptr(), static_cast<int>(pos), static_cast<int>(x.size())});
      parents.push_back(x.node_ptr());
      pos += x.size();
    }
    (void)rowlen;
    return make_op_tensor(out_shape, std::move(out), parents,
                          [parts](const std::vector<real>& g) {
                            for (const auto& p : parts) {
                              if (!p.node) continue;
                              auto& gp = p.node->ensure_grad();
                              for (int i = 0; i < p.extent; ++i)
                                gp[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(p.offset + i)];
                            }
                          });
  }
  // 2-D, axis == 1
  const int rows = xs[0].dim(0);
  int col = 0;
  for (const auto& x : xs) {
    const int d = x.dim(1);
    for (int i = 0; i < rows; ++i)
      std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(i) * d,
                x.data().begin() + static_cast<std::ptrdiff_t>(i + 1) * d,
                out.begin() + static_cast<std::ptrdiff_t>(i) * total + col);
    parts.push_back({x.node_ptr(), col, d});
    parents.push_back(x.node_ptr());
    col += d;
  }
  return make_op_tensor(out_shape, std::move(out), parents,
                        [parts, rows, total](const std::vector<real>& g) {
                          for (const auto& p : parts) {
                            if (!p.node) continue;
                            auto& gp = p.node->ensure_grad();
                            for (int i = 0; i < rows; ++i)
                              for (int j = 0; j < p.extent; ++j)
                                gp[static_cast<std::size_t>(i) * p.extent + j] +=
                                    g[static_cast<std::size_t>(i) * total + p.offset + j];
                          }
                        });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  const int nd = a.ndim();
  require(nd == 1 || nd == 2, "slice", "supports 1-D and 2-D tensors");
  require(axis >= 0 && axis < nd, "slice", "axis out of range");
  require(start >= 0 && len >= 0 && start + len <= a.dim(axis), "slice",
          "range [" + std::to_string(start) + "," + std::to_string(start + len) +
              ") out of bounds for axis extent " + std::to_string(a.dim(axis)));
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(axis)] = len;
  std::vector<real> out(shape_numel(out_shape));
  const int rows = (nd == 2) ? a.dim(0) : 1;
  const int cols = (nd == 2) ? a.dim(1) : a.dim(0);
  auto an = a.node_ptr();
  if (nd == 1 || axis == 1) {
    const int r0 = 0, c0 = (nd == 1) ? start : start;
    const int out_rows = rows, out_cols = len;
    for (int i = 0; i < out_rows; ++i)
      for (int j = 0; j < out_cols; ++j)
        out[static_cast<std::size_t>(i) * out_cols + j] =
            a.data()[static_cast<std::size_t>(i + r0) * cols + (j + c0)];
    return make_op_tensor(out_shape, std::move(out), {an},
                          [an, cols, c0, out_rows, out_cols](const std::vector<real>& g) {
                            auto& ga = an->ensure_grad();
                            for (int i = 0; i < out_rows; ++i)
                              for (int j = 0; j < out_cols; ++j)
                                ga[static_cast<std::size_t>(i) * cols + (j + c0)] +=
                                    g[static_cast<std::size_t>(i) * out_cols + j];
                          });
  }
  // 2-D, axis == 0
  for (int i = 0; i < len; ++i)
    std::copy(a.data().begin() + static_cast<std::ptrdiff_t>(i + start) * cols,
              a.data().begin() + static_cast<std::ptrdiff_t>(i + start + 1) * cols,
              out.begin() + static_cast<std::ptrdiff_t>(i) * cols);
  return make_op_tensor(out_shape, std::move(out), {an},
                        [an, cols, start, len](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (int i = 0; i < len; ++i)
                            for (int j = 0; j < cols; ++j)
                              ga[static_cast<std::size_t>(i + start) * cols + j] +=
                                  g[static_cast<std::size_t>(i) * cols + j];
                        });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose", "input");
  const int n = a.dim(0), d = a.dim(1);
  std::vector<real> out(a.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      out[static_cast<std::size_t>(j) * n + i] = a.data()[static_cast<std::size_t>(i) * d + j];
  auto an = a.node_ptr();
  return make_op_tensor({d, n}, std::move(out), {an},
                        [an, n, d](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (int i = 0; i < n; ++i)
                            for (int j = 0; j < d; ++j)
                              ga[static_cast<std::size_t>(i) * d + j] +=
                                  g[static_cast<std::size_t>(j) * n + i];
                        });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.size(), "reshape",
          "element count mismatch: " + shape_str(a.shape()) + " -> " +
              shape_str(shape));
  auto an = a.node_ptr();
  std::vector<real> out(a.data());
  return make_op_tensor(std::move(shape), std::move(out), {an},
                        [an](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                        });
}

Tensor sum(const Tensor& a) {
  real s = 0;
  for (real v : a.data()) s += v;
  auto an = a.node_ptr();
  const std::size_t n = a.size();
  return make_op_tensor({1}, {s}, {an}, [an, n](const std::vector<real>& g) {
    auto& ga = an->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[0];
  });
}

Tensor mean(const Tensor& a) {
  require(a.size() > 0, "mean", "empty tensor");
  real s = 0;
  for (real v : a.data()) s += v;
  const std::size_t n = a.size();
  s /= static_cast<real>(n);
  auto an = a.node_ptr();
  return make_op_tensor({1}, {s}, {an}, [an, n](const std::vector<real>& g) {
    auto& ga = an->ensure_grad();
    const real w = g[0] / static_cast<real>(n);
    for (std::size_t i = 0; i < n; ++i) ga[i] += w;
  });
}

Tensor col_mean(const Tensor& a) {
  require_2d(a, "col_mean", "input");
  const int n = a.dim(0), d = a.dim(1);
  require(n > 0, "col_mean", "empty matrix");
  std::vector<real> out(static_cast<std::size_t>(d), real(0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] += a.data()[static_cast<std::size_t>(i) * d + j];
  for (auto& v : out) v /= static_cast<real>(n);
  auto an = a.node_ptr();
  return make_op_tensor({d}, std::move(out), {an},
                        [an, n, d](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (int i = 0; i < n; ++i)
                            for (int j = 0; j < d; ++j)
                              ga[static_cast<std::size_t>(i) * d + j] += g[static_cast<std::size_t>(j)] / static_cast<real>(n);
                        });
}

Tensor row_variance(const Tensor& a) {
  require_2d(a, "row_variance", "input");
  const int n = a.dim(0), d = a.dim(1);
  require(n >= 1, "row_variance", "empty matrix");
  std::vector<real> mu(static_cast<std::size_t>(d), real(0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) mu[static_cast<std::size_t>(j)] += a.data()[static_cast<std::size_t>(i) * d + j];
  for (auto& v : mu) v /= static_cast<real>(n);
  std::vector<real> var(static_cast<std::size_t>(d), real(0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      const real c = a.data()[static_cast<std::size_t>(i) * d + j] - mu[static_cast<std::size_t>(j)];
      var[static_cast<std::size_t>(j)] += c * c;
    }
  for (auto& v : var) v /= static_cast<real>(n);
  auto an = a.node_ptr();
  auto ad = a.data_ptr();
  return make_op_tensor({d}, std::move(var), {an},
                        [an, ad, mu, n, d](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (int i = 0; i < n; ++i)
                            for (int j = 0; j < d; ++j) {
                              const real c = (*ad)[static_cast<std::size_t>(i) * d + j] - mu[static_cast<std::size_t>(j)];
                              ga[static_cast<std::size_t>(i) * d + j] +=
                                  g[static_cast<std::size_t>(j)] * real(2) * c / static_cast<real>(n);
                            }
                        });
}

Tensor softmax_rows(const Tensor& a) {
  require_2d(a, "softmax_rows", "input");
  const int n = a.dim(0), d = a.dim(1);
  std::vector<real> out(a.size());
  for (int i = 0; i < n; ++i) {
    const real* row = a.data().data() + static_cast<std::size_t>(i) * d;
    real mx = row[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, row[j]);
    real denom = 0;
    real* orow = out.data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    for (int j = 0; j < d; ++j) orow[j] /= denom;
  }
  auto an = a.node_ptr();
  auto yd = std::make_shared<std::vector<real>>(out);
  return make_op_tensor({n, d}, std::move(out), {an},
                        [an, yd, n, d](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (int i = 0; i < n; ++i) {
                            const real* y = yd->data() + static_cast<std::size_t>(i) * d;
                            const real* gr = g.data() + static_cast<std::size_t>(i) * d;
                            real dot = 0;
                            for (int j = 0; j < d; ++j) dot += gr[j] * y[j];
                            real* gout = ga.data() + static_cast<std::size_t>(i) * d;
                            for (int j = 0; j < d; ++j) gout[j] += y[j] * (gr[j] - dot);
                          }
                        });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  real eps) {
  require_2d(x, "layer_norm", "input");
  const int n = x.dim(0), d = x.dim(1);
  require(gain.ndim() == 1 && gain.dim(0) == d, "layer_norm",
          "gain shape mismatch");
  require(bias.ndim() == 1 && bias.dim(0) == d, "layer_norm",
          "bias shape mismatch");
  std::vector<real> out(x.size());
  auto xhat = std::make_shared<std::vector<real>>(x.size());
  auto inv_std = std::make_shared<std::vector<real>>(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const real* row = x.data().data() + static_cast<std::size_t>(i) * d;
    real mu = 0;
    for (int j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<real>(d);
    real var = 0;
    for (int j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<real>(d);
    const real is = real(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(i)] = is;
    for (int j = 0; j < d; ++j) {
      const real xh = (row[j] - mu) * is;
      (*xhat)[static_cast<std::size_t>(i) * d + j] = xh;
      out[static_cast<std::size_t>(i) * d + j] = gain.data()[static_cast<std::size_t>(j)] * xh + bias.data()[static_cast<std::size_t>(j)];
    }
  }
  auto xn = x.node_ptr(), gn = gain.node_ptr(), bn = bias.node_ptr();
  auto gd = gain.data_ptr();
  return make_op_tensor(
      x.shape(), std::move(out), {xn, gn, bn},
      [xn, gn, bn, gd, xhat, inv_std, n, d](const std::vector<real>& g) {
        if (gn) {
          auto& gg = gn->ensure_grad();
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
              gg[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * d + j] * (*xhat)[static_cast<std::size_t>(i) * d + j];
        }
        if (bn) {
          auto& gb = bn->ensure_grad();
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) gb[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * d + j];
        }
        if (xn) {
          auto& gx = xn->ensure_grad();
          for (int i = 0; i < n; ++i) {
            const real* xh = xhat->data() + static_cast<std::size_t>(i) * d;
            const real* gr = g.data() + static_cast<std::size_t>(i) * d;
            real mean_dxhat = 0, mean_dxhat_xhat = 0;
            // d(loss)/d(xhat_j) = g_j * gain_j
            for (int j = 0; j < d; ++j) {
              const real dxh = gr[j] * (*gd)[static_cast<std::size_t>(j)];
              mean_dxhat += dxh;
              mean_dxhat_xhat += dxh * xh[j];
            }
            mean_dxhat /= static_cast<real>(d);
            mean_dxhat_xhat /= static_cast<real>(d);
            const real is = (*inv_std)[static_cast<std::size_t>(i)];
            real* go = gx.data() + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < d; ++j) {
              const real dxh = gr[j] * (*gd)[static_cast<std::size_t>(j)];
              go[j] += is * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
            }
          }
        }
      });
}

Tensor gelu(const Tensor& a) {
  static const real inv_sqrt2 = real(0.7071067811865475244);
  static const real inv_sqrt2pi = real(0.3989422804014326779);
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const real x = a.data()[i];
    out[i] = real(0.5) * x * (real(1) + std::erf(x * inv_sqrt2));
  }
  auto an = a.node_ptr();
  auto ad = a.data_ptr();
  return make_op_tensor(a.shape(), std::move(out), {an},
                        [an, ad](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            const real x = (*ad)[i];
                            const real cdf = real(0.5) * (real(1) + std::erf(x * inv_sqrt2));
                            const real pdf = inv_sqrt2pi * std::exp(real(-0.5) * x * x);
                            ga[i] += g[i] * (cdf + x * pdf);
                          }
                        });
}

Tensor relu(const Tensor& a) {
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.data()[i] > real(0) ? a.data()[i] : real(0);
  auto an = a.node_ptr();
  auto ad = a.data_ptr();
  return make_op_tensor(a.shape(), std::move(out), {an},
                        [an, ad](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i)
                            if ((*ad)[i] > real(0)) ga[i] += g[i];
                        });
}

Tensor sqrt_eps(const Tensor& a, real eps) {
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(a.data()[i] + eps);
  auto an = a.node_ptr();
  auto od = std::make_shared<std::vector<real>>(out);
  return make_op_tensor(a.shape(), std::move(out), {an},
                        [an, od](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i)
                            ga[i] += g[i] * real(0.5) / (*od)[i];
                        });
}

// ---- convolutions -----------------------------------------------------------

Tensor conv1d(const Tensor& x, const Tensor& w, int dilation, int groups,
              Pad pad) {
  require_2d(x, "conv1d", "input");
  require(w.ndim() == 3, "conv1d", "weight must be [c_out,c_in/groups,k]");
  require(dilation >= 1, "conv1d", "dilation must be >= 1");
  require(groups >= 1, "conv1d", "groups must be >= 1");
  const int c_in = x.dim(0), L = x.dim(1);
  const int c_out = w.dim(0), c_in_g = w.dim(1), k = w.dim(2);
  require(c_in % groups == 0 && c_out % groups == 0, "conv1d",
          "channels not divisible by groups");
  require(c_in_g == c_in / groups, "conv1d",
          "weight input channels " + std::to_string(c_in_g) +
              " != c_in/groups = " + std::to_string(c_in / groups));
  const int span = (k - 1) * dilation;
  const int off = (pad == Pad::same) ? span / 2 : 0;
  const int Lout = (pad == Pad::same) ? L : L - span;
  require(Lout >= 1, "conv1d", "kernel span " + std::to_string(span + 1) +
                                   " exceeds input length " + std::to_string(L));
  std::vector<real> out(static_cast<std::size_t>(c_out) * Lout, real(0));
  const int cpg_out = c_out / groups;
  for (int co = 0; co < c_out; ++co) {
    const int gidx = co / cpg_out;
    for (int cl = 0; cl < c_in_g; ++cl) {
      const int ci = gidx * c_in_g + cl;
      const real* xrow = x.data().data() + static_cast<std::size_t>(ci) * L;
      const real* wrow = w.data().data() + (static_cast<std::size_t>(co) * c_in_g + cl) * k;
      real* orow = out.data() + static_cast<std::size_t>(co) * Lout;
      for (int j = 0; j < k; ++j) {
        const int shift = j * dilation - off;
        const real wv = wrow[j];
        const int t0 = std::max(0, -shift);
        const int t1 = std::min(Lout, L - shift);
        for (int t = t0; t < t1; ++t) orow[t] += wv * xrow[t + shift];
      }
    }
  }
  auto xn = x.node_ptr(), wn = w.node_ptr();
  auto xd = x.data_ptr(), wd = w.data_ptr();
  return make_op_tensor(
      {c_out, Lout}, std::move(out), {xn, wn},
      [=](const std::vector<real>& g) {
        for (int co = 0; co < c_out; ++co) {
          const int gidx = co / cpg_out;
          const real* grow = g.data() + static_cast<std::size_t>(co) * Lout;
          for (int cl = 0; cl < c_in_g; ++cl) {
            const int ci = gidx * c_in_g + cl;
            const real* wrow = wd->data() + (static_cast<std::size_t>(co) * c_in_g + cl) * k;
            const real* xrow = xd->data() + static_cast<std::size_t>(ci) * L;
            for (int j = 0; j < k; ++j) {
              const int shift = j * dilation - off;
              const int t0 = std::max(0, -shift);
              const int t1 = std::min(Lout, L - shift);
              if (xn) {
                auto& gx = xn->ensure_grad();
                real* gxrow = gx.data() + static_cast<std::size_t>(ci) * L;
                const real wv = wrow[j];
                for (int t = t0; t < t1; ++t) gxrow[t + shift] += grow[t] * wv;
              }
              if (wn) {
                auto& gw = wn->ensure_grad();
                real acc = 0;
                for (int t = t0; t < t1; ++t) acc += grow[t] * xrow[t + shift];
                gw[(static_cast<std::size_t>(co) * c_in_g + cl) * k + j] += acc;
              }
            }
          }
        }
      });
}

Tensor conv1d_transpose(const Tensor& x, const Tensor& w, int stride) {
  require_2d(x, "conv1d_transpose", "input");
  require(w.ndim() == 3, "conv1d_transpose", "weight must be [c_in,c_out,k]");
  require(stride >= 1, "conv1d_transpose", "stride must be >= 1");
  const int c_in = x.dim(0), Lin = x.dim(1);
  require(w.dim(0) == c_in, "conv1d_transpose",
          "weight input channels " + std::to_string(w.dim(0)) + " != " +
              std::to_string(c_in));
  const int c_out = w.dim(1), k = w.dim(2);
  const int Lout = (Lin - 1) * stride + k;
  std::vector<real> out(static_cast<std::size_t>(c_out) * Lout, real(0));
  for (int ci = 0; ci < c_in; ++ci) {
    const real* xrow = x.data().data() + static_cast<std::size_t>(ci) * Lin;
    for (int co = 0; co < c_out; ++co) {
      const real* wrow = w.data().data() + (static_cast<std::size_t>(ci) * c_out + co) * k;
      real* orow = out.data() + static_cast<std::size_t>(co) * Lout;
      for (int t = 0; t < Lin; ++t) {
        const real xv = xrow[t];
        if (xv == real(0)) continue;
        real* dst = orow + static_cast<std::size_t>(t) * stride;
        for (int j = 0; j < k; ++j) dst[j] += xv * wrow[j];
      }
    }
  }
  auto xn = x.node_ptr(), wn = w.node_ptr();
  auto xd = x.data_ptr(), wd = w.data_ptr();
  return make_op_tensor(
      {c_out, Lout}, std::move(out), {xn, wn},
      [=](const std::vector<real>& g) {
        for (int ci = 0; ci < c_in; ++ci) {
          for (int co = 0; co < c_out; ++co) {
            const real* wrow = wd->data() + (static_cast<std::size_t>(ci) * c_out + co) * k;
            const real* grow = g.data() + static_cast<std::size_t>(co) * Lout;
            if (xn) {
              auto& gx = xn->ensure_grad();
              real* gxrow = gx.data() + static_cast<std::size_t>(ci) * Lin;
              for (int t = 0; t < Lin; ++t) {
                const real* gdst = grow + static_cast<std::size_t>(t) * stride;
                real acc = 0;
                for (int j = 0; j < k; ++j) acc += gdst[j] * wrow[j];
                gxrow[t] += acc;
              }
            }
            if (wn) {
              auto& gw = wn->ensure_grad();
              const real* xrow = xd->data() + static_cast<std::size_t>(ci) * Lin;
              real* gwrow = gw.data() + (static_cast<std::size_t>(ci) * c_out + co) * k;
              for (int t = 0; t < Lin; ++t) {
                const real xv = xrow[t];
                if (xv == real(0)) continue;
                const real* gdst = grow + static_cast<std::size_t>(t) * stride;
                for (int j = 0; j < k; ++j) gwrow[j] += xv * gdst[j];
              }
            }
          }
        }
      });
}

Tensor max_rows(const Tensor& a, std::vector<int>* argmax) {
  require_2d(a, "max_rows", "input");
  const int n = a.dim(0), d = a.dim(1);
  require(d >= 1, "max_rows", "empty rows");
  std::vector<real> out(static_cast<std::size_t>(n));
  auto winners = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const real* row = a.data().data() + static_cast<std::size_t>(i) * d;
    int best = 0;
    for (int j = 1; j < d; ++j)
      if (row[j] > row[best]) best = j;  // ties keep lowest index
    (*winners)[static_cast<std::size_t>(i)] = best;
    out[static_cast<std::size_t>(i)] = row[best];
  }
  if (argmax) *argmax = *winners;
  auto an = a.node_ptr();
  return make_op_tensor({n}, std::move(out), {an},
                        [an, winners, d](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i)
                            ga[i * d + static_cast<std::size_t>((*winners)[i])] += g[i];
                        });
}

Tensor squared_l2(const Tensor& a) {
  real s = 0;
  for (real v : a.data()) s += v * v;
  auto an = a.node_ptr();
  auto ad = a.data_ptr();
  return make_op_tensor({1}, {s}, {an}, [an, ad](const std::vector<real>& g) {
    auto& ga = an->ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += real(2) * g[0] * (*ad)[i];
  });
}

Tensor rows_select(const Tensor& a, const std::vector<int>& rows) {
  require_2d(a, "rows_select", "input");
  const int n = a.dim(0), d = a.dim(1);
  for (int r : rows)
    require(r >= 0 && r < n, "rows_select",
            "row index " + std::to_string(r) + " out of range [0," +
                std::to_string(n) + ")");
  std::vector<real> out(rows.size() * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(a.data().begin() + static_cast<std::ptrdiff_t>(rows[i]) * d,
              a.data().begin() + static_cast<std::ptrdiff_t>(rows[i] + 1) * d,
              out.begin() + static_cast<std::ptrdiff_t>(i) * d);
  auto an = a.node_ptr();
  auto idx = rows;
  return make_op_tensor({static_cast<int>(rows.size()), d}, std::move(out), {an},
                        [an, idx, d](const std::vector<real>& g) {
                          auto& ga = an->ensure_grad();
                          for (std::size_t i = 0; i < idx.size(); ++i)
                            for (int j = 0; j < d; ++j)
                              ga[static_cast<std::size_t>(idx[i]) * d + j] +=
                                  g[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
                        });
}

Tensor rows_scatter(int n, const Tensor& rows, const std::vector<int>& idx) {
  require_2d(rows, "rows_scatter", "rows");
  require(static_cast<std::size_t>(rows.dim(0)) == idx.size(), "rows_scatter",
          "row count does not match index count");
  const int d = rows.dim(1);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (int r : idx) {
    require(r >= 0 && r < n, "rows_scatter", "index out of range");
    require(!used[static_cast<std::size_t>(r)], "rows_scatter", "duplicate target row");
    used[static_cast<std::size_t>(r)] = 1;
  }
  std::vector<real> out(static_cast<std::size_t>(n) * d, real(0));
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(rows.data().begin() + static_cast<std::ptrdiff_t>(i) * d,
              rows.data().begin() + static_cast<std::ptrdiff_t>(i + 1) * d,
              out.begin() + static_cast<std::ptrdiff_t>(idx[i]) * d);
  auto rn = rows.node_ptr();
  auto indices = idx;
  return make_op_tensor({n, d}, std::move(out), {rn},
                        [rn, indices, d](const std::vector<real>& g) {
                          auto& gr = rn->ensure_grad();
                          for (std::size_t i = 0; i < indices.size(); ++i)
                            for (int j = 0; j < d; ++j)
                              gr[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] +=
                                  g[static_cast<std::size_t>(indices[i]) * d + j];
                        });
}

Tensor masked_fill_rows(const Tensor& x, const std::vector<char>& mask,
                        const Tensor& v) {
  require_2d(x, "masked_fill_rows", "input");
  const int n = x.dim(0), d = x.dim(1);
  require(static_cast<std::size_t>(n) == mask.size(), "masked_fill_rows",
          "mask length " + std::to_string(mask.size()) + " != rows " +
              std::to_string(n));
  require(v.ndim() == 1 && v.dim(0) == d, "masked_fill_rows",
          "fill vector shape mismatch");
  std::vector<real> out(x.size());
  for (int i = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)])
      std::copy(v.data().begin(), v.data().end(), out.begin() + static_cast<std::ptrdiff_t>(i) * d);
    else
      std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(i) * d,
                x.data().begin() + static_cast<std::ptrdiff_t>(i + 1) * d,
                out.begin() + static_cast<std::ptrdiff_t>(i) * d);
  }
  auto xn = x.node_ptr(), vn = v.node_ptr();
  auto m = mask;
  return make_op_tensor(x.shape(), std::move(out), {xn, vn},
                        [xn, vn, m, d](const std::vector<real>& g) {
                          const int n = static_cast<int>(m.size());
                          if (xn) {
                            auto& gx = xn->ensure_grad();
                            for (int i = 0; i < n; ++i)
                              if (!m[static_cast<std::size_t>(i)])
                                for (int j = 0; j < d; ++j)
                                  gx[static_cast<std::size_t>(i) * d + j] += g[static_cast<std::size_t>(i) * d + j];
                          }
                          if (vn) {
                            auto& gv = vn->ensure_grad();
                            for (int i = 0; i < n; ++i)
                              if (m[static_cast<std::size_t>(i)])
                                for (int j = 0; j < d; ++j)
                                  gv[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * d + j];
                          }
                        });
}

}  // namespace eegx

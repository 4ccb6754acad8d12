#pragma once

// Dense tensors with reverse-mode automatic differentiation.
//
// Define-by-run: every differentiable op records a node carrying parent
// links and a backward closure. backward(loss) walks the recorded nodes in
// reverse creation order (a valid topological order for a define-by-run
// graph) and accumulates gradients into every reachable leaf.
//
// Scalar type is selected at build time (EEGX_REAL_FLOAT for 32-bit);
// the default is 64-bit so finite-difference gradient checks are meaningful.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace eegx {

#ifdef EEGX_REAL_FLOAT
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Node {
  std::uint64_t order{0};
  std::size_t numel{0};
  std::vector<std::shared_ptr<Node>> parents;
  // Adds this node's gradient contribution into the parents' grad buffers.
  // Null for leaves.
  std::function<void(const std::vector<real>&)> backprop;
  std::vector<real> grad;

  std::vector<real>& ensure_grad() {
    if (grad.empty()) grad.assign(numel, real(0));
    return grad;
  }
};

std::uint64_t next_node_order();

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  // Constant (off-tape) tensors.
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, real value);
  static Tensor constant(Shape shape, std::vector<real> data);
  static Tensor scalar(real value);

  // Leaf with gradient tracking (a trainable parameter).
  static Tensor leaf(Shape shape, std::vector<real> data);

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  bool defined() const { return static_cast<bool>(data_); }

  const std::vector<real>& data() const { return *data_; }
  // Direct write access to the underlying buffer. Intended for leaves and
  // constants (optimizer updates, in-place initialization); mutating an
  // interior node of a live graph invalidates recorded closures.
  std::vector<real>& mutable_data() { return *data_; }

  real item() const;

  bool on_tape() const { return static_cast<bool>(node_); }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const std::vector<real>& grad() const;
  void zero_grad();

  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  const std::shared_ptr<std::vector<real>>& data_ptr() const { return data_; }

  // Off-tape copy sharing no graph history.
  Tensor detach() const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<real>> data_;
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op_tensor(Shape, std::vector<real>,
                               std::vector<std::shared_ptr<detail::Node>>,
                               std::function<void(const std::vector<real>&)>);
};

// Builds an op result carrying a backward closure. Used by the built-in ops
// and by modules that register custom differentiable transforms.
Tensor make_op_tensor(Shape shape, std::vector<real> data,
                      std::vector<std::shared_ptr<detail::Node>> parents,
                      std::function<void(const std::vector<real>&)> backprop);

// Populates d(loss)/d(p) for every leaf p reachable from the scalar loss.
// Gradients accumulate across calls; zero_grad() between runs.
void backward(const Tensor& loss);

enum class Pad { valid, same };

// ---- forward ops ----------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);           // [m,k]x[k,n]
Tensor add(const Tensor& a, const Tensor& b);              // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);              // elementwise
Tensor scale(const Tensor& a, real s);
Tensor add_scalar(const Tensor& a, real s);
Tensor add_rowwise(const Tensor& a, const Tensor& v);      // [n,d] + [d]
Tensor concat(const std::vector<Tensor>& xs, int axis);    // 1-D or 2-D
Tensor slice(const Tensor& a, int axis, int start, int len);
Tensor transpose(const Tensor& a);                         // 2-D
Tensor reshape(const Tensor& a, Shape shape);
Tensor sum(const Tensor& a);                               // -> scalar
Tensor mean(const Tensor& a);                              // -> scalar
Tensor col_mean(const Tensor& a);                          // [n,d] -> [d]
Tensor row_variance(const Tensor& a);                      // [n,d] -> [d], population
Tensor softmax_rows(const Tensor& a);                      // [n,d], per row
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  real eps = real(1e-5));                  // per row
Tensor gelu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sqrt_eps(const Tensor& a, real eps);                // sqrt(x + eps)
// x:[c_in,l], w:[c_out,c_in/groups,k]
Tensor conv1d(const Tensor& x, const Tensor& w, int dilation, int groups,
              Pad pad);
// x:[c_in,l], w:[c_in,c_out,k] -> [c_out,(l-1)*stride+k]
Tensor conv1d_transpose(const Tensor& x, const Tensor& w, int stride);
// [n,d] -> [n]; winners (ties: lowest index) reported through argmax.
Tensor max_rows(const Tensor& a, std::vector<int>* argmax = nullptr);
Tensor squared_l2(const Tensor& a);                        // sum of squares
Tensor rows_select(const Tensor& a, const std::vector<int>& rows);
// Rows of `rows` placed at positions idx (unique) of an [n,d] zero matrix.
Tensor rows_scatter(int n, const Tensor& rows, const std::vector<int>& idx);
// Rows of x where mask is true are replaced by the vector v.
Tensor masked_fill_rows(const Tensor& x, const std::vector<char>& mask,
                        const Tensor& v);

}  // namespace eegx

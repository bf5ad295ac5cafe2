#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdgan {

using Shape = std::vector<int>;

// Thrown by check_finite when a NaN/Inf reaches a loss value.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int numel(const Shape& shape);

namespace detail {

// One record on the define-by-run tape. The tape is rebuilt each forward
// pass; backward() walks it in reverse topological order and then clears it.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad();
};

}  // namespace detail

// Dense n-dimensional double tensor with an optional gradient record.
// Value-semantics handle: copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int size() const { return static_cast<int>(node_->data.size()); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  // Copy of the values, cut off from the tape.
  Tensor detach() const;
  // Same node reshaped is not supported; reshape copies (see ops).

  void check_finite(const std::string& what) const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor abs_op(const Tensor& a);
Tensor mean(const Tensor& a);

// ---- structural ----
Tensor reshape(const Tensor& a, Shape new_shape);
Tensor gather_rows(const Tensor& probs, const std::vector<int>& indices);
Tensor global_avg_pool(const Tensor& a);  // NCHW -> N x C

// ---- neural net ----
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int pad);
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);
Tensor upsample_nearest2x(const Tensor& input);
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   Tensor running_mean, Tensor running_var, bool training,
                   double momentum = 0.1, double eps = 1e-5);
Tensor softmax_rows(const Tensor& logits);

// ---- losses ----
Tensor bce(const Tensor& pred, const Tensor& target);
Tensor l1_loss(const Tensor& pred, const Tensor& target);

// Reverse-mode sweep from a scalar loss. Clears the tape; calling it twice
// on the same forward pass throws.
void backward(const Tensor& loss);

}  // namespace pdgan

#include "pdgan/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace pdgan {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

int numel(const Shape& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

void Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
}

Tensor::Tensor(Shape shape, bool requires_grad) {
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->data.assign(static_cast<size_t>(numel(node_->shape)), 0.0);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  if (static_cast<int>(values.size()) != numel(node_->shape))
    throw std::invalid_argument("tensor data length does not match shape");
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw std::runtime_error("item() requires a scalar tensor");
  return node_->data[0];
}

std::vector<double>& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) throw std::runtime_error("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return Tensor(node_->shape, node_->data, false);
}

void Tensor::check_finite(const std::string& what) const {
  for (double v : node_->data)
    if (!std::isfinite(v))
      throw NonFiniteError("non-finite value in " + what);
}

Tensor Tensor::wrap(std::shared_ptr<Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

namespace {

std::shared_ptr<Node> make_result(Shape shape,
                                  std::initializer_list<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data.resize(static_cast<size_t>(numel(n->shape)));
  for (const auto& p : parents)
    if (p && p->requires_grad) n->requires_grad = true;
  if (n->requires_grad)
    for (const auto& p : parents)
      if (p) n->parents.push_back(p);
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

bool scalar_broadcast_ok(const Tensor& a, const Tensor& b) {
  return a.size() == 1 || b.size() == 1 || a.shape() == b.shape();
}

// Binary elementwise with scalar-vs-tensor broadcast. fwd(x, y) -> value,
// dfa/dfb give the local partials.
template <typename F, typename Da, typename Db>
Tensor binary_ew(const Tensor& ta, const Tensor& tb, const char* name, F fwd,
                 Da dfa, Db dfb) {
  if (!scalar_broadcast_ok(ta, tb))
    throw std::invalid_argument(std::string(name) + ": shape mismatch");
  auto pa = ta.node();
  auto pb = tb.node();
  const Shape& out_shape = (pa->data.size() >= pb->data.size()) ? pa->shape : pb->shape;
  auto out = make_result(out_shape, {pa, pb});
  const size_t n = out->data.size();
  const bool a_scalar = pa->data.size() == 1 && n > 1;
  const bool b_scalar = pb->data.size() == 1 && n > 1;
  for (size_t i = 0; i < n; ++i) {
    double x = pa->data[a_scalar ? 0 : i];
    double y = pb->data[b_scalar ? 0 : i];
    out->data[i] = fwd(x, y);
  }
  if (out->requires_grad) {
    out->backward_fn = [pa, pb, a_scalar, b_scalar, dfa, dfb](Node& self) {
      const size_t n = self.data.size();
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (size_t i = 0; i < n; ++i) {
          double x = pa->data[a_scalar ? 0 : i];
          double y = pb->data[b_scalar ? 0 : i];
          pa->grad[a_scalar ? 0 : i] += self.grad[i] * dfa(x, y);
        }
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t i = 0; i < n; ++i) {
          double x = pa->data[a_scalar ? 0 : i];
          double y = pb->data[b_scalar ? 0 : i];
          pb->grad[b_scalar ? 0 : i] += self.grad[i] * dfb(x, y);
        }
      }
    };
  }
  return Tensor::wrap(out);
}

template <typename F, typename Df>
Tensor unary_ew(const Tensor& ta, F fwd, Df dfn) {
  auto pa = ta.node();
  auto out = make_result(pa->shape, {pa});
  const size_t n = out->data.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = fwd(pa->data[i]);
  if (out->requires_grad) {
    out->backward_fn = [pa, dfn](Node& self) {
      if (!pa->requires_grad) return;
      pa->ensure_grad();
      for (size_t i = 0; i < self.data.size(); ++i)
        pa->grad[i] += self.grad[i] * dfn(pa->data[i], self.data[i]);
    };
  }
  return Tensor::wrap(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(a, b, "add", [](double x, double y) { return x + y; },
                   [](double, double) { return 1.0; },
                   [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(a, b, "sub", [](double x, double y) { return x - y; },
                   [](double, double) { return 1.0; },
                   [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(a, b, "mul", [](double x, double y) { return x * y; },
                   [](double, double y) { return y; },
                   [](double x, double) { return x; });
}

Tensor scalar_mul(const Tensor& a, double c) {
  return unary_ew(a, [c](double x) { return c * x; },
                  [c](double, double) { return c; });
}

Tensor relu(const Tensor& a) {
  return unary_ew(a, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_ew(a, [slope](double x) { return x > 0.0 ? x : slope * x; },
                  [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_ew(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_op(const Tensor& a) {
  return unary_ew(a, [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor log_op(const Tensor& a) {
  for (double v : a.data())
    if (v <= 0.0) throw std::domain_error("log: non-positive input");
  return unary_ew(a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor abs_op(const Tensor& a) {
  return unary_ew(a, [](double x) { return std::abs(x); },
                  [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor mean(const Tensor& a) {
  auto pa = a.node();
  auto out = make_result(Shape{1}, {pa});
  double s = 0.0;
  for (double v : pa->data) s += v;
  const double inv_n = 1.0 / static_cast<double>(pa->data.size());
  out->data[0] = s * inv_n;
  if (out->requires_grad) {
    out->backward_fn = [pa, inv_n](Node& self) {
      if (!pa->requires_grad) return;
      pa->ensure_grad();
      double g = self.grad[0] * inv_n;
      for (double& gv : pa->grad) gv += g;
    };
  }
  return Tensor::wrap(out);
}

Tensor reshape(const Tensor& a, Shape new_shape) {
  if (numel(new_shape) != a.size())
    throw std::invalid_argument("reshape: element count mismatch");
  auto pa = a.node();
  auto out = make_result(std::move(new_shape), {pa});
  out->data = pa->data;
  if (out->requires_grad) {
    out->backward_fn = [pa](Node& self) {
      if (!pa->requires_grad) return;
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    };
  }
  return Tensor::wrap(out);
}

Tensor gather_rows(const Tensor& probs, const std::vector<int>& indices) {
  if (probs.rank() != 2) throw std::invalid_argument("gather_rows: rank-2 input expected");
  const int n = probs.dim(0), c = probs.dim(1);
  if (static_cast<int>(indices.size()) != n)
    throw std::invalid_argument("gather_rows: index count mismatch");
  for (int idx : indices)
    if (idx < 0 || idx >= c) throw std::out_of_range("gather_rows: index out of range");
  auto pa = probs.node();
  auto out = make_result(Shape{n}, {pa});
  for (int i = 0; i < n; ++i) out->data[i] = pa->data[static_cast<size_t>(i) * c + indices[i]];
  if (out->requires_grad) {
    out->backward_fn = [pa, indices, c](Node& self) {
      if (!pa->requires_grad) return;
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        pa->grad[i * c + indices[i]] += self.grad[i];
    };
  }
  return Tensor::wrap(out);
}

Tensor global_avg_pool(const Tensor& a) {
  if (a.rank() != 4) throw std::invalid_argument("global_avg_pool: NCHW input expected");
  const int n = a.dim(0), c = a.dim(1), hw = a.dim(2) * a.dim(3);
  auto pa = a.node();
  auto out = make_result(Shape{n, c}, {pa});
  const double inv = 1.0 / hw;
  for (int i = 0; i < n * c; ++i) {
    double s = 0.0;
    for (int j = 0; j < hw; ++j) s += pa->data[static_cast<size_t>(i) * hw + j];
    out->data[i] = s * inv;
  }
  if (out->requires_grad) {
    out->backward_fn = [pa, hw, inv](Node& self) {
      if (!pa->requires_grad) return;
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        double g = self.grad[i] * inv;
        for (int j = 0; j < hw; ++j) pa->grad[i * hw + j] += g;
      }
    };
  }
  return Tensor::wrap(out);
}

namespace {

// im2col: (C*K*K) x (OH*OW) patch matrix for one image.
void im2col(const double* img, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, double* col) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + (static_cast<size_t>(ch) * k * k + ky * k + kx) *
                                static_cast<size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride - pad + kx;
            row[oy * ow + ox] =
                (iy >= 0 && iy < h && ix >= 0 && ix < w)
                    ? img[(static_cast<size_t>(ch) * h + iy) * w + ix]
                    : 0.0;
          }
        }
      }
    }
  }
}

void col2im_accum(const double* col, int c, int h, int w, int k, int stride,
                  int pad, int oh, int ow, double* img_grad) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + (static_cast<size_t>(ch) * k * k + ky * k + kx) *
                                      static_cast<size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            img_grad[(static_cast<size_t>(ch) * h + iy) * w + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int pad) {
  if (input.rank() != 4) throw std::invalid_argument("conv2d: NCHW input expected");
  if (kernel.rank() != 4) throw std::invalid_argument("conv2d: OIKK kernel expected");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int o = kernel.dim(0), ci = kernel.dim(1), k = kernel.dim(2);
  if (kernel.dim(3) != k) throw std::invalid_argument("conv2d: square kernel expected");
  if (ci != c) throw std::invalid_argument("conv2d: channel mismatch");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  if (h + 2 * pad - k < 0 || oh < 1 || ow < 1)
    throw std::invalid_argument("conv2d: non-positive output size");
  const bool has_bias = bias.defined();
  if (has_bias && bias.size() != o)
    throw std::invalid_argument("conv2d: bias length must equal output channels");

  auto pin = input.node();
  auto pker = kernel.node();
  auto pbias = has_bias ? bias.node() : nullptr;
  auto out = has_bias ? make_result(Shape{n, o, oh, ow}, {pin, pker, pbias})
                      : make_result(Shape{n, o, oh, ow}, {pin, pker});

  const int ckk = c * k * k;
  const int cells = oh * ow;
  std::vector<double> col(static_cast<size_t>(ckk) * cells);
  CMatMap wmat(pker->data.data(), o, ckk);
  for (int b = 0; b < n; ++b) {
    im2col(pin->data.data() + static_cast<size_t>(b) * c * h * w, c, h, w, k,
           stride, pad, oh, ow, col.data());
    CMatMap colm(col.data(), ckk, cells);
    MatMap outm(out->data.data() + static_cast<size_t>(b) * o * cells, o, cells);
    outm.noalias() = wmat * colm;
    if (has_bias)
      for (int oc = 0; oc < o; ++oc) outm.row(oc).array() += pbias->data[oc];
  }

  if (out->requires_grad) {
    out->backward_fn = [pin, pker, pbias, n, c, h, w, o, k, stride, pad, oh,
                        ow](Node& self) {
      const int ckk = c * k * k;
      const int cells = oh * ow;
      std::vector<double> col(static_cast<size_t>(ckk) * cells);
      std::vector<double> dcol(static_cast<size_t>(ckk) * cells);
      const bool need_in = pin->requires_grad;
      const bool need_ker = pker->requires_grad;
      if (need_in) pin->ensure_grad();
      if (need_ker) pker->ensure_grad();
      CMatMap wmat(pker->data.data(), o, ckk);
      for (int b = 0; b < n; ++b) {
        CMatMap dout(self.grad.data() + static_cast<size_t>(b) * o * cells, o, cells);
        if (need_ker) {
          im2col(pin->data.data() + static_cast<size_t>(b) * c * h * w, c, h, w,
                 k, stride, pad, oh, ow, col.data());
          CMatMap colm(col.data(), ckk, cells);
          MatMap dker(pker->grad.data(), o, ckk);
          dker.noalias() += dout * colm.transpose();
        }
        if (need_in) {
          MatMap dcolm(dcol.data(), ckk, cells);
          dcolm.noalias() = wmat.transpose() * dout;
          col2im_accum(dcol.data(), c, h, w, k, stride, pad, oh, ow,
                       pin->grad.data() + static_cast<size_t>(b) * c * h * w);
        }
      }
      if (pbias && pbias->requires_grad) {
        pbias->ensure_grad();
        for (int b = 0; b < n; ++b)
          for (int oc = 0; oc < o; ++oc) {
            const double* g = self.grad.data() +
                              (static_cast<size_t>(b) * o + oc) * cells;
            double s = 0.0;
            for (int j = 0; j < cells; ++j) s += g[j];
            pbias->grad[oc] += s;
          }
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  return conv2d(input, kernel, Tensor(), stride, pad);
}

Tensor upsample_nearest2x(const Tensor& input) {
  if (input.rank() != 4) throw std::invalid_argument("upsample: NCHW input expected");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  auto pin = input.node();
  auto out = make_result(Shape{n, c, 2 * h, 2 * w}, {pin});
  for (int p = 0; p < n * c; ++p) {
    const double* src = pin->data.data() + static_cast<size_t>(p) * h * w;
    double* dst = out->data.data() + static_cast<size_t>(p) * 4 * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double v = src[y * w + x];
        double* d = dst + (2 * y) * (2 * w) + 2 * x;
        d[0] = v;
        d[1] = v;
        d[2 * w] = v;
        d[2 * w + 1] = v;
      }
  }
  if (out->requires_grad) {
    out->backward_fn = [pin, n, c, h, w](Node& self) {
      if (!pin->requires_grad) return;
      pin->ensure_grad();
      for (int p = 0; p < n * c; ++p) {
        const double* g = self.grad.data() + static_cast<size_t>(p) * 4 * h * w;
        double* d = pin->grad.data() + static_cast<size_t>(p) * h * w;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const double* gg = g + (2 * y) * (2 * w) + 2 * x;
            d[y * w + x] += gg[0] + gg[1] + gg[2 * w] + gg[2 * w + 1];
          }
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2 || weight.rank() != 2)
    throw std::invalid_argument("linear: rank-2 input and weight expected");
  const int n = input.dim(0), f = input.dim(1), g = weight.dim(1);
  if (weight.dim(0) != f) throw std::invalid_argument("linear: inner dimension mismatch");
  if (bias.size() != g) throw std::invalid_argument("linear: bias length mismatch");
  auto px = input.node();
  auto pw = weight.node();
  auto pb = bias.node();
  auto out = make_result(Shape{n, g}, {px, pw, pb});
  CMatMap xm(px->data.data(), n, f);
  CMatMap wm(pw->data.data(), f, g);
  MatMap om(out->data.data(), n, g);
  om.noalias() = xm * wm;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < g; ++j) om(i, j) += pb->data[j];
  if (out->requires_grad) {
    out->backward_fn = [px, pw, pb, n, f, g](Node& self) {
      CMatMap dout(self.grad.data(), n, g);
      if (px->requires_grad) {
        px->ensure_grad();
        MatMap dx(px->grad.data(), n, f);
        CMatMap wm(pw->data.data(), f, g);
        dx.noalias() += dout * wm.transpose();
      }
      if (pw->requires_grad) {
        pw->ensure_grad();
        MatMap dw(pw->grad.data(), f, g);
        CMatMap xm(px->data.data(), n, f);
        dw.noalias() += xm.transpose() * dout;
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < g; ++j) pb->grad[j] += dout(i, j);
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   Tensor running_mean, Tensor running_var, bool training,
                   double momentum, double eps) {
  if (input.rank() != 4) throw std::invalid_argument("batchnorm2d: NCHW input expected");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (gamma.size() != c || beta.size() != c || running_mean.size() != c ||
      running_var.size() != c)
    throw std::invalid_argument("batchnorm2d: per-channel parameter size mismatch");
  const int m = n * h * w;
  if (training && m < 2)
    throw std::invalid_argument("batchnorm2d: train mode needs at least 2 elements per channel");

  auto px = input.node();
  auto pg = gamma.node();
  auto pb = beta.node();
  auto out = make_result(input.shape(), {px, pg, pb});

  std::vector<double> mu(c), var(c);
  const int hw = h * w;
  auto chan = [&](const std::vector<double>& buf, int b, int ch) {
    return buf.data() + (static_cast<size_t>(b) * c + ch) * hw;
  };
  if (training) {
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (int b = 0; b < n; ++b) {
        const double* p = chan(px->data, b, ch);
        for (int j = 0; j < hw; ++j) s += p[j];
      }
      mu[ch] = s / m;
      double sv = 0.0;
      for (int b = 0; b < n; ++b) {
        const double* p = chan(px->data, b, ch);
        for (int j = 0; j < hw; ++j) {
          double d = p[j] - mu[ch];
          sv += d * d;
        }
      }
      var[ch] = sv / m;
      running_mean.data()[ch] = (1.0 - momentum) * running_mean.data()[ch] + momentum * mu[ch];
      running_var.data()[ch] = (1.0 - momentum) * running_var.data()[ch] + momentum * var[ch];
    }
  } else {
    mu = running_mean.data();
    var = running_var.data();
  }

  std::vector<double> inv_std(c);
  for (int ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + eps);
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double* p = chan(px->data, b, ch);
      double* q = out->data.data() + (static_cast<size_t>(b) * c + ch) * hw;
      double g = pg->data[ch], bt = pb->data[ch], mc = mu[ch], is = inv_std[ch];
      for (int j = 0; j < hw; ++j) q[j] = (p[j] - mc) * is * g + bt;
    }

  if (out->requires_grad) {
    out->backward_fn = [px, pg, pb, n, c, hw, m, mu, inv_std, training](Node& self) {
      if (pg->requires_grad) pg->ensure_grad();
      if (pb->requires_grad) pb->ensure_grad();
      if (px->requires_grad) px->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int b = 0; b < n; ++b) {
          const double* x = px->data.data() + (static_cast<size_t>(b) * c + ch) * hw;
          const double* dy = self.grad.data() + (static_cast<size_t>(b) * c + ch) * hw;
          for (int j = 0; j < hw; ++j) {
            double xhat = (x[j] - mu[ch]) * inv_std[ch];
            sum_dy += dy[j];
            sum_dy_xhat += dy[j] * xhat;
          }
        }
        if (pg->requires_grad) pg->grad[ch] += sum_dy_xhat;
        if (pb->requires_grad) pb->grad[ch] += sum_dy;
        if (px->requires_grad) {
          double g = pg->data[ch] * inv_std[ch];
          double mean_dy = sum_dy / m;
          double mean_dy_xhat = sum_dy_xhat / m;
          for (int b = 0; b < n; ++b) {
            const double* x = px->data.data() + (static_cast<size_t>(b) * c + ch) * hw;
            const double* dy = self.grad.data() + (static_cast<size_t>(b) * c + ch) * hw;
            double* dx = px->grad.data() + (static_cast<size_t>(b) * c + ch) * hw;
            for (int j = 0; j < hw; ++j) {
              if (training) {
                double xhat = (x[j] - mu[ch]) * inv_std[ch];
                dx[j] += g * (dy[j] - mean_dy - xhat * mean_dy_xhat);
              } else {
                dx[j] += g * dy[j];
              }
            }
          }
        }
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_rows: rank-2 input expected");
  const int n = logits.dim(0), c = logits.dim(1);
  auto pa = logits.node();
  auto out = make_result(logits.shape(), {pa});
  for (int i = 0; i < n; ++i) {
    const double* x = pa->data.data() + static_cast<size_t>(i) * c;
    double* y = out->data.data() + static_cast<size_t>(i) * c;
    double mx = x[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    for (int j = 0; j < c; ++j) y[j] /= s;
  }
  if (out->requires_grad) {
    out->backward_fn = [pa, n, c](Node& self) {
      if (!pa->requires_grad) return;
      pa->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const double* y = self.data.data() + static_cast<size_t>(i) * c;
        const double* dy = self.grad.data() + static_cast<size_t>(i) * c;
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += dy[j] * y[j];
        double* dx = pa->grad.data() + static_cast<size_t>(i) * c;
        for (int j = 0; j < c; ++j) dx[j] += y[j] * (dy[j] - dot);
      }
    };
  }
  return Tensor::wrap(out);
}

namespace {
constexpr double kBceClamp = 1e-7;
}

Tensor bce(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "bce");
  for (double t : target.data())
    if (t != 0.0 && t != 1.0) throw std::invalid_argument("bce: target outside {0,1}");
  auto pp = pred.node();
  auto pt = target.node();
  auto out = make_result(Shape{1}, {pp, pt});
  const size_t n = pp->data.size();
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double p = std::clamp(pp->data[i], kBceClamp, 1.0 - kBceClamp);
    double t = pt->data[i];
    s += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  out->data[0] = s / static_cast<double>(n);
  if (out->requires_grad) {
    out->backward_fn = [pp, pt, n](Node& self) {
      if (!pp->requires_grad) return;
      pp->ensure_grad();
      const double g = self.grad[0] / static_cast<double>(n);
      for (size_t i = 0; i < n; ++i) {
        double raw = pp->data[i];
        if (raw < kBceClamp || raw > 1.0 - kBceClamp) continue;  // clamp region
        double t = pt->data[i];
        pp->grad[i] += g * (-(t / raw) + (1.0 - t) / (1.0 - raw));
      }
    };
  }
  return Tensor::wrap(out);
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l1_loss");
  auto pp = pred.node();
  auto pt = target.node();
  auto out = make_result(Shape{1}, {pp, pt});
  const size_t n = pp->data.size();
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += std::abs(pp->data[i] - pt->data[i]);
  out->data[0] = s / static_cast<double>(n);
  if (out->requires_grad) {
    out->backward_fn = [pp, pt, n](Node& self) {
      const double g = self.grad[0] / static_cast<double>(n);
      for (size_t i = 0; i < n; ++i) {
        double d = pp->data[i] - pt->data[i];
        double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (pp->requires_grad) {
          pp->ensure_grad();
          pp->grad[i] += g * sgn;
        }
        if (pt->requires_grad) {
          pt->ensure_grad();
          pt->grad[i] -= g * sgn;
        }
      }
    };
  }
  return Tensor::wrap(out);
}

void backward(const Tensor& loss) {
  auto root = loss.node();
  if (!root) throw std::runtime_error("backward: undefined tensor");
  if (root->data.size() != 1) throw std::runtime_error("backward: loss must be scalar");
  if (root->backward_done)
    throw std::runtime_error("backward: called twice without a new forward pass");
  root->backward_done = true;
  if (!root->requires_grad) return;  // nothing reachable requires grad

  // iterative post-order DFS for topological order
  std::vector<std::shared_ptr<Node>> topo;
  std::unordered_set<Node*> visited;
  struct Frame {
    std::shared_ptr<Node> node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      auto p = f.node->parents[f.next_parent++];
      if (visited.insert(p.get()).second) stack.push_back({p, 0});
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);

  // clear the tape; leaves keep their accumulated gradients
  for (auto& node : topo) {
    if (!node->parents.empty()) {
      node->parents.clear();
      node->backward_fn = nullptr;
      node->grad.clear();
    }
  }
}

}  // namespace pdgan

// Copyright 2026 The histocap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "histocap/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "histocap/error.hpp"

namespace histocap {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

thread_local bool g_grad_enabled = true;

CMapMat cmat(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return CMapMat(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapMat mmat(std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return MapMat(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (!t.defined()) throw InvalidArgument(std::string(op) + ": undefined tensor");
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Adds `g` into the parent gradient when the parent participates.
void accumulate(detail::Node& parent, const std::vector<double>& g) {
  if (!parent.requires_grad) return;
  auto& pg = parent.ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

// ---- Tensor ----

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), value);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive: " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::randn(Shape shape, double stddev, std::mt19937_64& rng, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return from(std::move(shape), std::move(v), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw InvalidArgument("undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis out of range for shape " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<double> Tensor::data() { return node_->data; }
std::span<const double> Tensor::data() const { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw ShapeError("index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= s[axis]) throw ShapeError("index out of range");
    flat = flat * s[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }
bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }
std::span<double> Tensor::grad() { return node_->ensure_grad(); }
std::span<const double> Tensor::grad() const { return node_->ensure_grad(); }

void Tensor::zero_grad() {
  if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::clear_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(shape(), node_->data, false); }

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward_fn) {
  for (double x : data) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& t : inputs) node->parents.push_back(t.node_ptr());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  mmat(out, m, n).noalias() = cmat(a.node()->data, m, k) * cmat(b.node()->data, k, n);
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    auto dC = cmat(self.grad, m, n);
    if (A.requires_grad) mmat(A.ensure_grad(), m, k).noalias() += dC * cmat(B.data, k, n).transpose();
    if (B.requires_grad) mmat(B.ensure_grad(), k, n).noalias() += cmat(A.data, m, k).transpose() * dC;
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  mmat(out, n, m) = cmat(a.node()->data, m, n).transpose();
  return make_result("transpose", {n, m}, std::move(out), {a}, [m, n](detail::Node& self) {
    auto& A = *self.parents[0];
    mmat(A.ensure_grad(), m, n) += cmat(self.grad, n, m).transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto& x = a.node()->data;
  const auto& y = b.node()->data;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result("add", a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto& x = a.node()->data;
  const auto& y = b.node()->data;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    accumulate(*self.parents[0], self.grad);
    auto& B = *self.parents[1];
    if (!B.requires_grad) return;
    auto& g = B.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto& x = a.node()->data;
  const auto& y = b.node()->data;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result("mul", a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    if (A.requires_grad) {
      auto& g = A.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * B.data[i];
    }
    if (B.requires_grad) {
      auto& g = B.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * A.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.node()->data);
  for (auto& v : out) v *= factor;
  return make_result("scale", a.shape(), std::move(out), {a}, [factor](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(bias, 1, "add_bias");
  const std::size_t n = bias.dim(0);
  if (x.rank() == 0 || x.shape().back() != n) {
    throw ShapeError("add_bias: last extent of " + shape_str(x.shape()) + " != " + std::to_string(n));
  }
  std::vector<double> out(x.node()->data);
  const auto& b = bias.node()->data;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % n];
  return make_result("add_bias", x.shape(), std::move(out), {x, bias}, [n](detail::Node& self) {
    accumulate(*self.parents[0], self.grad);
    auto& B = *self.parents[1];
    if (!B.requires_grad) return;
    auto& g = B.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_bias(matmul(x, weight), bias);
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.node()->data);
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_result("relu", x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& X = *self.parents[0];
    auto& g = X.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += X.data[i] > 0.0 ? self.grad[i] : 0.0;
  });
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  std::vector<double> out(x.node()->data);
  for (auto& v : out) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  return make_result("gelu", x.shape(), std::move(out), {x}, [](detail::Node& self) {
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    auto& X = *self.parents[0];
    auto& g = X.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = X.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor tanh(const Tensor& x) {
  std::vector<double> out(x.node()->data);
  for (auto& v : out) v = std::tanh(v);
  return make_result("tanh", x.shape(), out, {x}, [out](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (1.0 - out[i] * out[i]);
  });
}

Tensor softmax_lastdim(const Tensor& x) {
  if (!x.defined() || x.rank() == 0) throw ShapeError("softmax_lastdim: empty last dimension");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.node()->data);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (row[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) row[j] /= z;
  }
  return make_result("softmax", x.shape(), out, {x}, [out, n, rows](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = out.data() + r * n;
      const double* dy = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[j] * dy[j];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] += y[j] * (dy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("layer_norm: eps must be positive");
  require_rank(gamma, 1, "layer_norm");
  require_rank(beta, 1, "layer_norm");
  const std::size_t n = x.shape().back();
  if (gamma.dim(0) != n || beta.dim(0) != n) {
    throw ShapeError("layer_norm: gamma/beta extents must equal last extent " + std::to_string(n));
  }
  const std::size_t rows = x.numel() / n;
  const auto& xd = x.node()->data;
  const auto& gd = gamma.node()->data;
  const auto& bd = beta.node()->data;
  std::vector<double> xhat(xd.size()), inv_std(rows), out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (row[j] - mean) * inv_std[r];
      out[r * n + j] = xhat[r * n + j] * gd[j] + bd[j];
    }
  }
  return make_result(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), n, rows](detail::Node& self) {
        auto& X = *self.parents[0];
        auto& G = *self.parents[1];
        auto& B = *self.parents[2];
        const auto& dy = self.grad;
        if (G.requires_grad) {
          auto& gg = G.ensure_grad();
          for (std::size_t i = 0; i < dy.size(); ++i) gg[i % n] += dy[i] * xhat[i];
        }
        if (B.requires_grad) {
          auto& gb = B.ensure_grad();
          for (std::size_t i = 0; i < dy.size(); ++i) gb[i % n] += dy[i];
        }
        if (!X.requires_grad) return;
        auto& gx = X.ensure_grad();
        const double dn = static_cast<double>(n);
        for (std::size_t r = 0; r < rows; ++r) {
          double sum_d = 0.0, sum_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = dy[r * n + j] * G.data[j];
            sum_d += d;
            sum_dx += d * xhat[r * n + j];
          }
          for (std::size_t j = 0; j < n; ++j) {
            const double d = dy[r * n + j] * G.data[j];
            gx[r * n + j] += inv_std[r] * (d - sum_d / dn - xhat[r * n + j] * sum_dx / dn);
          }
        }
      });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_id) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t t_len = logits.dim(0), v = logits.dim(1);
  if (targets.size() != t_len) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(t_len) + " positions");
  }
  const auto& ld = logits.node()->data;
  std::vector<double> probs(ld.size());
  std::vector<int> tg(targets.begin(), targets.end());
  std::size_t counted = 0;
  double total = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    const double* row = ld.data() + t * v;
    double* p = probs.data() + t * v;
    const double mx = *std::max_element(row, row + v);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += (p[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < v; ++j) p[j] /= z;
    if (tg[t] == ignore_id) continue;
    if (tg[t] < 0 || static_cast<std::size_t>(tg[t]) >= v) {
      throw InvalidArgument("cross_entropy: target " + std::to_string(tg[t]) + " outside [0, " +
                            std::to_string(v) + ")");
    }
    total += -(row[tg[t]] - mx - std::log(z));
    ++counted;
  }
  if (counted == 0) throw InvalidArgument("cross_entropy: every position is ignored");
  const double denom = static_cast<double>(counted);
  return make_result("cross_entropy", {1}, {total / denom}, {logits},
                     [probs = std::move(probs), tg = std::move(tg), t_len, v, ignore_id,
                      denom](detail::Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       const double up = self.grad[0] / denom;
                       for (std::size_t t = 0; t < t_len; ++t) {
                         if (tg[t] == ignore_id) continue;
                         for (std::size_t j = 0; j < v; ++j) g[t * v + j] += up * probs[t * v + j];
                         g[t * v + static_cast<std::size_t>(tg[t])] -= up;
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result("sum", {1}, {s}, {x}, [](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  return make_result("reshape", std::move(shape), x.node()->data, {x}, [](detail::Node& self) {
    accumulate(*self.parents[0], self.grad);
  });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank(x, 2, "slice_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (count == 0 || start + count > rows) throw ShapeError("slice_rows: range out of bounds");
  const auto& xd = x.node()->data;
  std::vector<double> out(xd.begin() + static_cast<std::ptrdiff_t>(start * cols),
                          xd.begin() + static_cast<std::ptrdiff_t>((start + count) * cols));
  return make_result("slice_rows", {count, cols}, std::move(out), {x},
                     [start, cols](detail::Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i) g[start * cols + i] += self.grad[i];
                     });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts.front().dim(1);
  std::size_t rows = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != cols) throw ShapeError("concat_rows: column extents differ");
    rows += p.dim(0);
    out.insert(out.end(), p.node()->data.begin(), p.node()->data.end());
  }
  return make_result("concat_rows", {rows, cols}, std::move(out), parts, [](detail::Node& self) {
    std::size_t offset = 0;
    for (auto& parent : self.parents) {
      const std::size_t len = parent->data.size();
      if (parent->requires_grad) {
        auto& g = parent->ensure_grad();
        for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[offset + i];
      }
      offset += len;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts.front().dim(0);
  std::size_t cols = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows) throw ShapeError("concat_cols: row extents differ");
    widths.push_back(p.dim(1));
    cols += p.dim(1);
  }
  std::vector<double> out(rows * cols);
  std::size_t c0 = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    mmat(out, rows, cols).middleCols(static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(widths[k])) =
        cmat(parts[k].node()->data, rows, widths[k]);
    c0 += widths[k];
  }
  return make_result("concat_cols", {rows, cols}, std::move(out), parts,
                     [widths, rows, cols](detail::Node& self) {
                       std::size_t c = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         auto& parent = *self.parents[k];
                         if (parent.requires_grad) {
                           mmat(parent.ensure_grad(), rows, widths[k]) +=
                               cmat(self.grad, rows, cols)
                                   .middleCols(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(widths[k]));
                         }
                         c += widths[k];
                       }
                     });
}

Tensor repeat_rows(const Tensor& row, std::size_t times) {
  require_rank(row, 2, "repeat_rows");
  if (row.dim(0) != 1) throw ShapeError("repeat_rows: expected a single row, got " + shape_str(row.shape()));
  if (times == 0) throw ShapeError("repeat_rows: zero repetitions");
  const std::size_t n = row.dim(1);
  std::vector<double> out;
  out.reserve(n * times);
  for (std::size_t r = 0; r < times; ++r) out.insert(out.end(), row.data().begin(), row.data().end());
  return make_result("repeat_rows", {times, n}, std::move(out), {row}, [n](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_rank(table, 2, "embedding");
  const std::size_t vocab = table.dim(0), h = table.dim(1);
  if (ids.empty()) throw ShapeError("embedding: empty id sequence");
  std::vector<int> idv(ids.begin(), ids.end());
  std::vector<double> out(idv.size() * h);
  const auto& td = table.node()->data;
  for (std::size_t t = 0; t < idv.size(); ++t) {
    if (idv[t] < 0 || static_cast<std::size_t>(idv[t]) >= vocab) {
      throw InvalidArgument("embedding: id " + std::to_string(idv[t]) + " outside table of " +
                            std::to_string(vocab) + " rows");
    }
    std::copy_n(td.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(idv[t]) * h), h,
                out.begin() + static_cast<std::ptrdiff_t>(t * h));
  }
  const std::size_t n = idv.size();
  return make_result("embedding", {n, h}, std::move(out), {table},
                     [idv = std::move(idv), h](detail::Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t t = 0; t < idv.size(); ++t) {
                         const std::size_t base = static_cast<std::size_t>(idv[t]) * h;
                         for (std::size_t j = 0; j < h; ++j) g[base + j] += self.grad[t * h + j];
                       }
                     });
}

Tensor mean_dim1(const Tensor& x) {
  require_rank(x, 3, "mean_dim1");
  const std::size_t a = x.dim(0), b = x.dim(1), c = x.dim(2);
  std::vector<double> out(a * c, 0.0);
  const auto& xd = x.node()->data;
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t k = 0; k < c; ++k) out[i * c + k] += xd[(i * b + j) * c + k];
    }
  }
  const double inv = 1.0 / static_cast<double>(b);
  for (auto& v : out) v *= inv;
  return make_result("mean_dim1", {a, c}, std::move(out), {x}, [a, b, c, inv](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        for (std::size_t k = 0; k < c; ++k) g[(i * b + j) * c + k] += self.grad[i * c + k] * inv;
      }
    }
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, bool causal,
                 std::vector<double>* probs_out) {
  require_rank(q, 2, "attention");
  require_rank(k, 2, "attention");
  require_rank(v, 2, "attention");
  const std::size_t tq = q.dim(0), tk = k.dim(0), h = q.dim(1);
  if (k.dim(1) != h || v.dim(1) != h || v.dim(0) != tk) throw ShapeError("attention: q/k/v extents disagree");
  if (heads == 0 || h % heads != 0) throw ShapeError("attention: width not divisible by head count");
  if (causal && tq != tk) throw ShapeError("attention: causal mode needs equal query and key lengths");
  const std::size_t dh = h / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto Q = cmat(q.node()->data, tq, h);
  const auto K = cmat(k.node()->data, tk, h);
  const auto V = cmat(v.node()->data, tk, h);
  std::vector<double> probs(heads * tq * tk, 0.0);
  std::vector<double> out(tq * h);
  auto O = mmat(out, tq, h);
  const auto ei = [](std::size_t x) { return static_cast<Eigen::Index>(x); };
  for (std::size_t hd = 0; hd < heads; ++hd) {
    auto P = MapMat(probs.data() + hd * tq * tk, ei(tq), ei(tk));
    P.noalias() = Q.middleCols(ei(hd * dh), ei(dh)) * K.middleCols(ei(hd * dh), ei(dh)).transpose();
    for (std::size_t i = 0; i < tq; ++i) {
      const std::size_t lim = causal ? i + 1 : tk;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < lim; ++j) mx = std::max(mx, P(ei(i), ei(j)) * sc);
      double z = 0.0;
      for (std::size_t j = 0; j < lim; ++j) z += (P(ei(i), ei(j)) = std::exp(P(ei(i), ei(j)) * sc - mx));
      for (std::size_t j = 0; j < tk; ++j) P(ei(i), ei(j)) = j < lim ? P(ei(i), ei(j)) / z : 0.0;
    }
    O.middleCols(ei(hd * dh), ei(dh)).noalias() = P * V.middleCols(ei(hd * dh), ei(dh));
  }
  if (probs_out) *probs_out = probs;
  return make_result(
      "attention", {tq, h}, std::move(out), {q, k, v},
      [probs = std::move(probs), heads, tq, tk, h, dh, sc, ei](detail::Node& self) {
        auto& Qn = *self.parents[0];
        auto& Kn = *self.parents[1];
        auto& Vn = *self.parents[2];
        const auto Qm = cmat(Qn.data, tq, h);
        const auto Km = cmat(Kn.data, tk, h);
        const auto Vm = cmat(Vn.data, tk, h);
        const auto dO = cmat(self.grad, tq, h);
        RowMat dQ = RowMat::Zero(ei(tq), ei(h)), dK = RowMat::Zero(ei(tk), ei(h)), dV = RowMat::Zero(ei(tk), ei(h));
        for (std::size_t hd = 0; hd < heads; ++hd) {
          const auto P = CMapMat(probs.data() + hd * tq * tk, ei(tq), ei(tk));
          const auto cols = [&](auto& m) { return m.middleCols(ei(hd * dh), ei(dh)); };
          const RowMat dOh = dO.middleCols(ei(hd * dh), ei(dh));
          RowMat dP = dOh * Vm.middleCols(ei(hd * dh), ei(dh)).transpose();
          cols(dV).noalias() += P.transpose() * dOh;
          // dS = P * (dP - rowsum(dP * P)); masked entries have P == 0.
          const Eigen::VectorXd rowdot = (dP.array() * P.array()).rowwise().sum();
          RowMat dS = (P.array() * (dP.array().colwise() - rowdot.array())).matrix() * sc;
          cols(dQ).noalias() += dS * Km.middleCols(ei(hd * dh), ei(dh));
          cols(dK).noalias() += dS.transpose() * Qm.middleCols(ei(hd * dh), ei(dh));
        }
        if (Qn.requires_grad) mmat(Qn.ensure_grad(), tq, h) += dQ;
        if (Kn.requires_grad) mmat(Kn.ensure_grad(), tk, h) += dK;
        if (Vn.requires_grad) mmat(Vn.ensure_grad(), tk, h) += dV;
      });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + (loss.defined() ? shape_str(loss.shape()) : "undefined"));
  }
  auto* root = loss.node();
  if (!root->requires_grad) throw InvalidArgument("backward: loss does not depend on any trainable tensor");

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto* parent = node->parents[next++].get();
      if (parent->requires_grad && !seen.count(parent)) {
        seen.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (auto* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* n = *it;
    if (!n->is_leaf()) n->backward_fn(*n);
  }
  for (auto* n : order) {
    if (n->is_leaf()) {
      for (double g : n->grad) {
        if (!std::isfinite(g)) throw NumericError("backward: non-finite gradient");
      }
    } else {
      std::vector<double>().swap(n->grad);
    }
  }
}

}  // namespace histocap

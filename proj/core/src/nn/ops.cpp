#include "ecechain/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ecechain/errors.hpp"

namespace ecechain::nn {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      std::vector<NodePtr<T>> inputs,
                      std::function<void(detail::Node<T>&)> backward) {
  for (const T v : value) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  std::erase(inputs, nullptr);
  if (grad_enabled()) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const NodePtr<T>& n) { return n && n->requires_grad; });
    if (any) {
      node->requires_grad = true;
      node->parents = std::move(inputs);
      node->backward = std::move(backward);
    }
  }
  return Tensor<T>::from_node(std::move(node));
}

template <typename T>
void require_rank(const Tensor<T>& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + to_string(x.shape()));
  }
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                       to_string(b));
}

// Leading axes flattened into rows, last axis kept.
template <typename T>
std::pair<std::size_t, std::size_t> rows_cols(const Tensor<T>& x) {
  if (x.rank() == 0) return {1, 1};
  const std::size_t cols = x.shape().back();
  return {cols == 0 ? 0 : x.numel() / cols, cols};
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gelu_scalar(double x) { return x * standard_normal_cdf(x); }

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) shape_mismatch("matmul", a.shape(), b.shape());
  std::vector<T> out(m * n, T(0));
  const T* av = a.values().data();
  const T* bv = b.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) axpy(av[i * k + p], bv + p * n, out.data() + i * n, n);
  }
  auto an = a.node(), bn = b.node();
  return make_result<T>("matmul", {m, n}, std::move(out), {an, bn},
                        [an, bn, m, k, n](detail::Node<T>& self) {
                          const T* g = self.grad.data();
                          if (an->requires_grad) {
                            T* ga = an->ensure_grad().data();
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t p = 0; p < k; ++p)
                                ga[i * k + p] += dot(g + i * n, bn->value.data() + p * n, n);
                          }
                          if (bn->requires_grad) {
                            T* gb = bn->ensure_grad().data();
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t p = 0; p < k; ++p)
                                axpy(an->value[i * k + p], g + i * n, gb + p * n, n);
                          }
                        });
}

template <typename T>
Tensor<T> batched_matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  require_rank(a, 3, "batched_matmul");
  require_rank(b, 3, "batched_matmul");
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != batch || bk != k) shape_mismatch("batched_matmul", a.shape(), b.shape());
  std::vector<T> out(batch * m * n, T(0));
  const T* av = a.values().data();
  const T* bv = b.values().data();
  for (std::size_t s = 0; s < batch; ++s) {
    const T* A = av + s * m * k;
    const T* B = bv + s * k * n;
    T* C = out.data() + s * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      if (transpose_b) {
        for (std::size_t j = 0; j < n; ++j) C[i * n + j] = dot(A + i * k, B + j * k, k);
      } else {
        for (std::size_t p = 0; p < k; ++p) axpy(A[i * k + p], B + p * n, C + i * n, n);
      }
    }
  }
  auto an = a.node(), bn = b.node();
  return make_result<T>(
      "batched_matmul", {batch, m, n}, std::move(out), {an, bn},
      [an, bn, batch, m, k, n, transpose_b](detail::Node<T>& self) {
        T* ga = an->requires_grad ? an->ensure_grad().data() : nullptr;
        T* gb = bn->requires_grad ? bn->ensure_grad().data() : nullptr;
        for (std::size_t s = 0; s < batch; ++s) {
          const T* G = self.grad.data() + s * m * n;
          const T* A = an->value.data() + s * m * k;
          const T* B = bn->value.data() + s * k * n;
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              const T g = G[i * n + j];
              if (g == T(0)) continue;
              if (transpose_b) {
                if (ga) axpy(g, B + j * k, ga + s * m * k + i * k, k);
                if (gb) axpy(g, A + i * k, gb + s * k * n + j * k, k);
              } else {
                for (std::size_t p = 0; p < k; ++p) {
                  if (ga) ga[s * m * k + i * k + p] += g * B[p * n + j];
                  if (gb) gb[s * k * n + p * n + j] += g * A[i * k + p];
                }
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(weight, 2, "linear");
  const std::size_t out_dim = weight.dim(0), in_dim = weight.dim(1);
  if (x.rank() == 0 || x.shape().back() != in_dim) shape_mismatch("linear", x.shape(), weight.shape());
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    shape_mismatch("linear(bias)", weight.shape(), bias.shape());
  }
  const std::size_t rows = x.numel() / in_dim;
  std::vector<T> out(rows * out_dim);
  const T* xv = x.values().data();
  const T* wv = weight.values().data();
  const T* bv = bias.defined() ? bias.values().data() : nullptr;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      out[r * out_dim + o] = dot(xv + r * in_dim, wv + o * in_dim, in_dim) + (bv ? bv[o] : T(0));
    }
  }
  Shape shape = x.shape();
  shape.back() = out_dim;
  auto xn = x.node(), wn = weight.node(), bn = bias.node();
  return make_result<T>("linear", std::move(shape), std::move(out), {xn, wn, bn},
                        [xn, wn, bn, rows, in_dim, out_dim](detail::Node<T>& self) {
                          const T* g = self.grad.data();
                          T* gx = xn->requires_grad ? xn->ensure_grad().data() : nullptr;
                          T* gw = wn->requires_grad ? wn->ensure_grad().data() : nullptr;
                          T* gbias = (bn && bn->requires_grad) ? bn->ensure_grad().data() : nullptr;
                          for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t o = 0; o < out_dim; ++o) {
                              const T go = g[r * out_dim + o];
                              if (go == T(0)) continue;
                              if (gx) axpy(go, wn->value.data() + o * in_dim, gx + r * in_dim, in_dim);
                              if (gw) axpy(go, xn->value.data() + r * in_dim, gw + o * in_dim, in_dim);
                              if (gbias) gbias[o] += go;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  const bool suffix = bs.size() <= as.size() && std::equal(bs.rbegin(), bs.rend(), as.rbegin());
  if (!suffix) shape_mismatch("add", as, bs);
  const std::size_t na = a.numel(), nb = b.numel();
  std::vector<T> out(a.values().begin(), a.values().end());
  const T* bv = b.values().data();
  if (nb > 0) {
    for (std::size_t i = 0; i < na; ++i) out[i] += bv[i % nb];
  }
  auto an = a.node(), bn = b.node();
  return make_result<T>("add", as, std::move(out), {an, bn}, [an, bn, na, nb](detail::Node<T>& self) {
    const T* g = self.grad.data();
    if (an->requires_grad) axpy(T(1), g, an->ensure_grad().data(), na);
    if (bn->requires_grad) {
      T* gb = bn->ensure_grad().data();
      for (std::size_t i = 0; i < na; ++i) gb[i % nb] += g[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= factor;
  auto xn = x.node();
  return make_result<T>("scale", x.shape(), std::move(out), {xn}, [xn, factor](detail::Node<T>& self) {
    axpy(factor, self.grad.data(), xn->ensure_grad().data(), self.grad.size());
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("transpose: expected rank 2 or 3, got shape " + to_string(x.shape()));
  }
  const std::size_t batch = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t m = x.dim(x.rank() - 2), n = x.dim(x.rank() - 1);
  std::vector<T> out(x.numel());
  const T* xv = x.values().data();
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[s * m * n + j * m + i] = xv[s * m * n + i * n + j];
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  auto xn = x.node();
  return make_result<T>("transpose", std::move(shape), std::move(out), {xn},
                        [xn, batch, m, n](detail::Node<T>& self) {
                          T* gx = xn->ensure_grad().data();
                          const T* g = self.grad.data();
                          for (std::size_t s = 0; s < batch; ++s)
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j)
                                gx[s * m * n + i * n + j] += g[s * m * n + j * m + i];
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (element_count(shape) != x.numel()) shape_mismatch("reshape", x.shape(), shape);
  std::vector<T> out(x.values().begin(), x.values().end());
  auto xn = x.node();
  return make_result<T>("reshape", std::move(shape), std::move(out), {xn}, [xn](detail::Node<T>& self) {
    axpy(T(1), self.grad.data(), xn->ensure_grad().data(), self.grad.size());
  });
}

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, std::span<const std::size_t> ids) {
  require_rank(table, 2, "embedding_lookup");
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  std::vector<T> out(ids.size() * width);
  const T* tv = table.values().data();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[r]) + " out of range for table with " +
                       std::to_string(vocab) + " rows");
    }
    std::copy_n(tv + ids[r] * width, width, out.begin() + r * width);
  }
  auto tn = table.node();
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  return make_result<T>("embedding_lookup", {ids.size(), width}, std::move(out), {tn},
                        [tn, idv = std::move(idv), width](detail::Node<T>& self) {
                          T* gt = tn->ensure_grad().data();
                          for (std::size_t r = 0; r < idv.size(); ++r)
                            axpy(T(1), self.grad.data() + r * width, gt + idv[r] * width, width);
                        });
}

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t width = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
  std::size_t rows = 0;
  std::vector<NodePtr<T>> inputs;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != width) shape_mismatch("concat_rows", parts[0].shape(), p.shape());
    rows += p.dim(0);
    inputs.push_back(p.node());
  }
  std::vector<T> out;
  out.reserve(rows * width);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  auto captured = inputs;
  return make_result<T>("concat_rows", {rows, width}, std::move(out), std::move(inputs),
                        [captured](detail::Node<T>& self) {
                          std::size_t offset = 0;
                          for (const auto& n : captured) {
                            if (n->requires_grad)
                              axpy(T(1), self.grad.data() + offset, n->ensure_grad().data(), n->value.size());
                            offset += n->value.size();
                          }
                        });
}

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  const Tensor<T> parts[] = {a, b};
  return concat_rows<T>(std::span<const Tensor<T>>(parts));
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_rows");
  if (begin > end || end > x.dim(0)) {
    throw IndexError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for shape " + to_string(x.shape()));
  }
  const std::size_t width = x.dim(1);
  std::vector<T> out(x.values().begin() + begin * width, x.values().begin() + end * width);
  auto xn = x.node();
  return make_result<T>("slice_rows", {end - begin, width}, std::move(out), {xn},
                        [xn, begin, width](detail::Node<T>& self) {
                          axpy(T(1), self.grad.data(), xn->ensure_grad().data() + begin * width,
                               self.grad.size());
                        });
}

template <typename T>
Tensor<T> mean_over_rows(const Tensor<T>& x) {
  require_rank(x, 2, "mean_over_rows");
  const std::size_t m = x.dim(0), d = x.dim(1);
  if (m == 0) throw ContractError("mean_over_rows: no rows");
  std::vector<T> out(d, T(0));
  const T* xv = x.values().data();
  for (std::size_t i = 0; i < m; ++i) axpy(T(1), xv + i * d, out.data(), d);
  for (auto& v : out) v /= T(m);
  auto xn = x.node();
  return make_result<T>("mean_over_rows", {d}, std::move(out), {xn}, [xn, m, d](detail::Node<T>& self) {
    T* gx = xn->ensure_grad().data();
    for (std::size_t i = 0; i < m; ++i) axpy(T(1) / T(m), self.grad.data(), gx + i * d, d);
  });
}

template <typename T>
Tensor<T> masked_mean_rows(const Tensor<T>& x, std::span<const std::uint8_t> keep) {
  require_rank(x, 3, "masked_mean_rows");
  const std::size_t batch = x.dim(0), rows = x.dim(1), d = x.dim(2);
  if (keep.size() != batch * rows) {
    throw DimensionError("masked_mean_rows: mask of length " + std::to_string(keep.size()) +
                         " for shape " + to_string(x.shape()));
  }
  std::vector<T> weight(batch * rows, T(0));
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows; ++r) count += keep[b * rows + r] ? 1 : 0;
    if (count == 0) throw ContractError("masked_mean_rows: every row of an item is masked");
    for (std::size_t r = 0; r < rows; ++r) {
      if (keep[b * rows + r]) weight[b * rows + r] = T(1) / T(count);
    }
  }
  std::vector<T> out(batch * d, T(0));
  const T* xv = x.values().data();
  for (std::size_t b = 0; b < batch; ++b) {
    // Summed then divided so an all-kept mask matches mean_over_rows exactly.
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!keep[b * rows + r]) continue;
      axpy(T(1), xv + (b * rows + r) * d, out.data() + b * d, d);
      ++count;
    }
    for (std::size_t c = 0; c < d; ++c) out[b * d + c] /= T(count);
  }
  auto xn = x.node();
  return make_result<T>("masked_mean_rows", {batch, d}, std::move(out), {xn},
                        [xn, weight = std::move(weight), batch, rows, d](detail::Node<T>& self) {
                          T* gx = xn->ensure_grad().data();
                          for (std::size_t b = 0; b < batch; ++b)
                            for (std::size_t r = 0; r < rows; ++r) {
                              const T w = weight[b * rows + r];
                              if (w != T(0)) axpy(w, self.grad.data() + b * d, gx + (b * rows + r) * d, d);
                            }
                        });
}

namespace {

template <typename T>
Tensor<T> softmax_impl(const Tensor<T>& x, const std::vector<T>* mask) {
  const auto [rows, cols] = rows_cols(x);
  std::size_t block_rows = 0;
  if (mask) {
    if (x.rank() < 2) throw DimensionError("softmax: masked variant requires rank >= 2");
    block_rows = x.dim(x.rank() - 2);
    if (mask->size() != block_rows * cols) {
      throw DimensionError("softmax: mask of length " + std::to_string(mask->size()) +
                           " does not match shape " + to_string(x.shape()));
    }
  }
  std::vector<T> out(rows * cols);
  const T* xv = x.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv + r * cols;
    const T* m = mask ? mask->data() + (r % block_rows) * cols : nullptr;
    T* o = out.data() + r * cols;
    T peak = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < cols; ++c) peak = std::max(peak, in[c] + (m ? m[c] : T(0)));
    if (!std::isfinite(peak)) throw ContractError("softmax: row with no admissible position");
    T total = T(0);
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] + (m ? m[c] : T(0)) - peak);
      total += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  auto xn = x.node();
  return make_result<T>("softmax", x.shape(), std::move(out), {xn},
                        [xn, rows, cols](detail::Node<T>& self) {
                          T* gx = xn->ensure_grad().data();
                          for (std::size_t r = 0; r < rows; ++r) {
                            const T* y = self.value.data() + r * cols;
                            const T* g = self.grad.data() + r * cols;
                            const T inner = dot(y, g, cols);
                            for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[c] * (g[c] - inner);
                          }
                        });
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  return softmax_impl<T>(x, nullptr);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, const std::vector<T>& mask) {
  return softmax_impl<T>(x, &mask);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const auto [rows, d] = rows_cols(x);
  if (x.rank() == 0 || d == 0) throw DimensionError("layer_norm: empty rows");
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    shape_mismatch("layer_norm", x.shape(), gain.shape());
  }
  std::vector<T> normalized(rows * d), inv_std(rows), out(rows * d);
  const T* xv = x.values().data();
  const T* gv = gain.values().data();
  const T* bv = bias.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv + r * d;
    T mean = T(0);
    for (std::size_t c = 0; c < d; ++c) mean += in[c];
    mean /= T(d);
    T var = T(0);
    for (std::size_t c = 0; c < d; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= T(d);
    const T inv = T(1) / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      const T xhat = (in[c] - mean) * inv;
      normalized[r * d + c] = xhat;
      out[r * d + c] = gv[c] * xhat + bv[c];
    }
  }
  auto xn = x.node(), gn = gain.node(), bn = bias.node();
  return make_result<T>(
      "layer_norm", x.shape(), std::move(out), {xn, gn, bn},
      [xn, gn, bn, rows, d, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](detail::Node<T>& self) {
        T* gx = xn->requires_grad ? xn->ensure_grad().data() : nullptr;
        T* gg = gn->requires_grad ? gn->ensure_grad().data() : nullptr;
        T* gb = bn->requires_grad ? bn->ensure_grad().data() : nullptr;
        std::vector<T> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = self.grad.data() + r * d;
          const T* xhat = normalized.data() + r * d;
          T mean_d = T(0), mean_dx = T(0);
          for (std::size_t c = 0; c < d; ++c) {
            if (gg) gg[c] += g[c] * xhat[c];
            if (gb) gb[c] += g[c];
            dxhat[c] = g[c] * gn->value[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xhat[c];
          }
          if (!gx) continue;
          mean_d /= T(d);
          mean_dx /= T(d);
          for (std::size_t c = 0; c < d; ++c)
            gx[r * d + c] += inv_std[r] * (dxhat[c] - mean_d - xhat[c] * mean_dx);
        }
      });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const T* xv = x.values().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(gelu_scalar(double(xv[i])));
  auto xn = x.node();
  return make_result<T>("gelu", x.shape(), std::move(out), {xn}, [xn](detail::Node<T>& self) {
    T* gx = xn->ensure_grad().data();
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = double(xn->value[i]);
      const double slope = standard_normal_cdf(v) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      gx[i] += self.grad[i] * T(slope);
    }
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets,
                        std::span<const T> weights) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != batch || weights.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets and " +
                         std::to_string(weights.size()) + " weights for logits " +
                         to_string(logits.shape()));
  }
  std::vector<T> probs(batch * classes);
  const T* lv = logits.values().data();
  T total = T(0);
  for (std::size_t b = 0; b < batch; ++b) {
    if (targets[b] >= classes) {
      throw IndexError("cross_entropy: target " + std::to_string(targets[b]) + " out of range for " +
                       std::to_string(classes) + " classes");
    }
    const T* z = lv + b * classes;
    const T peak = *std::max_element(z, z + classes);
    T denom = T(0);
    for (std::size_t c = 0; c < classes; ++c) {
      probs[b * classes + c] = std::exp(z[c] - peak);
      denom += probs[b * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] /= denom;
    if (weights[b] != T(0)) total += weights[b] * (std::log(denom) + peak - z[targets[b]]);
  }
  auto ln = logits.node();
  std::vector<std::size_t> tv(targets.begin(), targets.end());
  std::vector<T> wv(weights.begin(), weights.end());
  return make_result<T>("cross_entropy", {}, std::vector<T>{total}, {ln},
                        [ln, batch, classes, probs = std::move(probs), tv = std::move(tv),
                         wv = std::move(wv)](detail::Node<T>& self) {
                          T* gl = ln->ensure_grad().data();
                          const T g = self.grad[0];
                          for (std::size_t b = 0; b < batch; ++b) {
                            if (wv[b] == T(0)) continue;
                            const T coeff = g * wv[b];
                            for (std::size_t c = 0; c < classes; ++c) {
                              const T indicator = c == tv[b] ? T(1) : T(0);
                              gl[b * classes + c] += coeff * (probs[b * classes + c] - indicator);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t target) {
  if (logits.rank() != 1) {
    throw DimensionError("cross_entropy: expected a logit vector, got shape " + to_string(logits.shape()));
  }
  const std::size_t targets[] = {target};
  const T weights[] = {T(1)};
  return cross_entropy<T>(reshape(logits, {1, logits.dim(0)}), targets, weights);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = T(0);
  for (const T v : x.values()) total += v;
  auto xn = x.node();
  return make_result<T>("sum", {}, std::vector<T>{total}, {xn}, [xn](detail::Node<T>& self) {
    T* gx = xn->ensure_grad().data();
    for (std::size_t i = 0; i < xn->value.size(); ++i) gx[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t groups, std::size_t seq, std::size_t heads) {
  require_rank(x, 2, "split_heads");
  const std::size_t width = x.dim(1);
  if (heads == 0 || width % heads != 0 || x.dim(0) != groups * seq) {
    throw DimensionError("split_heads: cannot split " + to_string(x.shape()) + " into " +
                         std::to_string(groups) + " groups of " + std::to_string(seq) + " rows and " +
                         std::to_string(heads) + " heads");
  }
  const std::size_t w = width / heads;
  std::vector<T> out(x.numel());
  const T* xv = x.values().data();
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t s = 0; s < seq; ++s)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(xv + (g * seq + s) * width + h * w, w, out.data() + ((g * heads + h) * seq + s) * w);
  auto xn = x.node();
  return make_result<T>("split_heads", {groups * heads, seq, w}, std::move(out), {xn},
                        [xn, groups, seq, heads, w, width](detail::Node<T>& self) {
                          T* gx = xn->ensure_grad().data();
                          for (std::size_t g = 0; g < groups; ++g)
                            for (std::size_t s = 0; s < seq; ++s)
                              for (std::size_t h = 0; h < heads; ++h)
                                axpy(T(1), self.grad.data() + ((g * heads + h) * seq + s) * w,
                                     gx + (g * seq + s) * width + h * w, w);
                        });
}

template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, std::size_t groups, std::size_t heads) {
  require_rank(x, 3, "merge_heads");
  if (heads == 0 || x.dim(0) != groups * heads) {
    throw DimensionError("merge_heads: shape " + to_string(x.shape()) + " is not " +
                         std::to_string(groups) + " groups x " + std::to_string(heads) + " heads");
  }
  const std::size_t seq = x.dim(1), w = x.dim(2), width = heads * w;
  std::vector<T> out(x.numel());
  const T* xv = x.values().data();
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t s = 0; s < seq; ++s)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(xv + ((g * heads + h) * seq + s) * w, w, out.data() + (g * seq + s) * width + h * w);
  auto xn = x.node();
  return make_result<T>("merge_heads", {groups * seq, width}, std::move(out), {xn},
                        [xn, groups, seq, heads, w, width](detail::Node<T>& self) {
                          T* gx = xn->ensure_grad().data();
                          for (std::size_t g = 0; g < groups; ++g)
                            for (std::size_t s = 0; s < seq; ++s)
                              for (std::size_t h = 0; h < heads; ++h)
                                axpy(T(1), self.grad.data() + (g * seq + s) * width + h * w,
                                     gx + ((g * heads + h) * seq + s) * w, w);
                        });
}

#define ECECHAIN_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> batched_matmul(const Tensor<T>&, const Tensor<T>&, bool);                   \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> transpose(const Tensor<T>&);                                                \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                           \
  template Tensor<T> embedding_lookup(const Tensor<T>&, std::span<const std::size_t>);           \
  template Tensor<T> concat_rows(std::span<const Tensor<T>>);                                    \
  template Tensor<T> concat_rows(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);                     \
  template Tensor<T> mean_over_rows(const Tensor<T>&);                                           \
  template Tensor<T> masked_mean_rows(const Tensor<T>&, std::span<const std::uint8_t>);                  \
  template Tensor<T> softmax(const Tensor<T>&);                                                  \
  template Tensor<T> softmax(const Tensor<T>&, const std::vector<T>&);                           \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);        \
  template Tensor<T> gelu(const Tensor<T>&);                                                     \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::size_t);                               \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::size_t>,               \
                                   std::span<const T>);                                          \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> split_heads(const Tensor<T>&, std::size_t, std::size_t, std::size_t);       \
  template Tensor<T> merge_heads(const Tensor<T>&, std::size_t, std::size_t);

ECECHAIN_INSTANTIATE_OPS(float)
ECECHAIN_INSTANTIATE_OPS(double)

#undef ECECHAIN_INSTANTIATE_OPS

}  // namespace ecechain::nn

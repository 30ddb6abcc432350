#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "qgen/rng.hpp"
#include "qgen/tensor.hpp"

namespace qgen {

enum class Act { Sigmoid, Tanh, Relu };

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.values)
    if (!std::isfinite(double(v))) return false;
  return true;
}

// Reverse-mode tape. Operations are recorded in execution order and replayed
// strictly in reverse by backward(). One Graph instance is single-threaded;
// parameters referenced by several graphs must not be mutated while any of
// them is running forward/backward.
//
// Gradients of tensors produced by this graph are cleared at the start of
// every backward() call; leaf gradients (parameters, inputs created outside
// the graph) accumulate until their owner zeroes them.
template <typename T>
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  // Extension point for custom ops: register a backward closure and the
  // tensor it produces.
  void record(std::function<void()> fn) { tape_.push_back(std::move(fn)); }
  void track(const TensorPtr<T>& t) { produced_.push_back(t); }

  TensorPtr<T> constant(Shape shape, std::vector<T> values) {
    return make_tensor<T>(std::move(shape), std::move(values), false);
  }

  // ---- matrix products -----------------------------------------------

  TensorPtr<T> matmul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    require(a->rank() == 2 && b->rank() == 2, "matmul expects rank-2 tensors, got " +
                                                  shape_str(a->shape) + " and " + shape_str(b->shape));
    require(a->shape[1] == b->shape[0],
            "matmul inner dimensions disagree: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
    auto out = fresh({m, n}, {a, b});
    gemm_acc(a->values.data(), b->values.data(), out->values.data(), m, k, n);
    if (recorded(out))
      record([a, b, out, m, k, n] {
        if (out->grad.empty()) return;
        if (a->requires_grad) {  // dA += dC * B^T
          auto& da = a->grad_ref();
          const T* dc = out->grad.data();
          const T* bv = b->values.data();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
              T g = dc[i * n + j];
              if (g == T(0)) continue;
              for (int p = 0; p < k; ++p) da[i * k + p] += g * bv[p * n + j];
            }
        }
        if (b->requires_grad) {  // dB += A^T * dC
          auto& db = b->grad_ref();
          const T* dc = out->grad.data();
          const T* av = a->values.data();
          for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
              T av_ip = av[i * k + p];
              if (av_ip == T(0)) continue;
              for (int j = 0; j < n; ++j) db[p * n + j] += av_ip * dc[i * n + j];
            }
        }
      });
    return out;
  }

  // c = a * b^T, with a [m x k], b [n x k] -> c [m x n]
  TensorPtr<T> matmul_nt(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    require(a->rank() == 2 && b->rank() == 2, "matmul_nt expects rank-2 tensors");
    require(a->shape[1] == b->shape[1],
            "matmul_nt inner dimensions disagree: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    const int m = a->shape[0], k = a->shape[1], n = b->shape[0];
    auto out = fresh({m, n}, {a, b});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        T acc = 0;
        const T* ar = a->values.data() + size_t(i) * k;
        const T* br = b->values.data() + size_t(j) * k;
        for (int p = 0; p < k; ++p) acc += ar[p] * br[p];
        out->values[size_t(i) * n + j] = acc;
      }
    if (recorded(out))
      record([a, b, out, m, k, n] {
        if (out->grad.empty()) return;
        const T* dc = out->grad.data();
        if (a->requires_grad) {  // dA += dC * B
          auto& da = a->grad_ref();
          gemm_acc(dc, b->values.data(), da.data(), m, n, k);
        }
        if (b->requires_grad) {  // dB += dC^T * A
          auto& db = b->grad_ref();
          for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i) {
              T g = dc[i * n + j];
              if (g == T(0)) continue;
              const T* ar = a->values.data() + size_t(i) * k;
              for (int p = 0; p < k; ++p) db[size_t(j) * k + p] += g * ar[p];
            }
        }
      });
    return out;
  }

  // ---- elementwise ------------------------------------------------------

  TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    require(a->shape == b->shape, "add shape mismatch: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = fresh(a->shape, {a, b});
    for (long i = 0; i < a->numel(); ++i) out->values[i] = a->values[i] + b->values[i];
    if (recorded(out))
      record([a, b, out] {
        if (out->grad.empty()) return;
        if (a->requires_grad) {
          auto& da = a->grad_ref();
          for (long i = 0; i < out->numel(); ++i) da[i] += out->grad[i];
        }
        if (b->requires_grad) {
          auto& db = b->grad_ref();
          for (long i = 0; i < out->numel(); ++i) db[i] += out->grad[i];
        }
      });
    return out;
  }

  TensorPtr<T> sub(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    require(a->shape == b->shape, "sub shape mismatch: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = fresh(a->shape, {a, b});
    for (long i = 0; i < a->numel(); ++i) out->values[i] = a->values[i] - b->values[i];
    if (recorded(out))
      record([a, b, out] {
        if (out->grad.empty()) return;
        if (a->requires_grad) {
          auto& da = a->grad_ref();
          for (long i = 0; i < out->numel(); ++i) da[i] += out->grad[i];
        }
        if (b->requires_grad) {
          auto& db = b->grad_ref();
          for (long i = 0; i < out->numel(); ++i) db[i] -= out->grad[i];
        }
      });
    return out;
  }

  TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    require(a->shape == b->shape, "mul shape mismatch: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = fresh(a->shape, {a, b});
    for (long i = 0; i < a->numel(); ++i) out->values[i] = a->values[i] * b->values[i];
    if (recorded(out))
      record([a, b, out] {
        if (out->grad.empty()) return;
        if (a->requires_grad) {
          auto& da = a->grad_ref();
          for (long i = 0; i < out->numel(); ++i) da[i] += out->grad[i] * b->values[i];
        }
        if (b->requires_grad) {
          auto& db = b->grad_ref();
          for (long i = 0; i < out->numel(); ++i) db[i] += out->grad[i] * a->values[i];
        }
      });
    return out;
  }

  // a [m x n] + row vector bias [n] (or [1 x n]) broadcast over rows
  TensorPtr<T> add_rowvec(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    require(a->rank() == 2, "add_rowvec expects rank-2 lhs");
    require(b->numel() == a->shape[1],
            "add_rowvec bias length mismatch: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    const int m = a->shape[0], n = a->shape[1];
    auto out = fresh(a->shape, {a, b});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out->values[size_t(i) * n + j] = a->values[size_t(i) * n + j] + b->values[j];
    if (recorded(out))
      record([a, b, out, m, n] {
        if (out->grad.empty()) return;
        if (a->requires_grad) {
          auto& da = a->grad_ref();
          for (long i = 0; i < out->numel(); ++i) da[i] += out->grad[i];
        }
        if (b->requires_grad) {
          auto& db = b->grad_ref();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) db[j] += out->grad[size_t(i) * n + j];
        }
      });
    return out;
  }

  TensorPtr<T> scale(const TensorPtr<T>& a, double c) {
    auto out = fresh(a->shape, {a});
    for (long i = 0; i < a->numel(); ++i) out->values[i] = a->values[i] * T(c);
    if (recorded(out))
      record([a, out, c] {
        if (out->grad.empty() || !a->requires_grad) return;
        auto& da = a->grad_ref();
        for (long i = 0; i < out->numel(); ++i) da[i] += out->grad[i] * T(c);
      });
    return out;
  }

  TensorPtr<T> add_scalar(const TensorPtr<T>& a, double c) {
    auto out = fresh(a->shape, {a});
    for (long i = 0; i < a->numel(); ++i) out->values[i] = a->values[i] + T(c);
    if (recorded(out))
      record([a, out] {
        if (out->grad.empty() || !a->requires_grad) return;
        auto& da = a->grad_ref();
        for (long i = 0; i < out->numel(); ++i) da[i] += out->grad[i];
      });
    return out;
  }

  // y = s * x where s is a scalar tensor participating in gradients
  TensorPtr<T> scale_by(const TensorPtr<T>& x, const TensorPtr<T>& s) {
    require(s->is_scalar(), "scale_by expects a scalar multiplier, got " + shape_str(s->shape));
    auto out = fresh(x->shape, {x, s});
    const T sv = s->values[0];
    for (long i = 0; i < x->numel(); ++i) out->values[i] = x->values[i] * sv;
    if (recorded(out))
      record([x, s, out, sv] {
        if (out->grad.empty()) return;
        if (x->requires_grad) {
          auto& dx = x->grad_ref();
          for (long i = 0; i < out->numel(); ++i) dx[i] += out->grad[i] * sv;
        }
        if (s->requires_grad) {
          T acc = 0;
          for (long i = 0; i < out->numel(); ++i) acc += out->grad[i] * x->values[i];
          s->grad_ref()[0] += acc;
        }
      });
    return out;
  }

  // ---- nonlinearities -----------------------------------------------------

  TensorPtr<T> sigmoid(const TensorPtr<T>& x) {
    auto out = fresh(x->shape, {x});
    for (long i = 0; i < x->numel(); ++i) out->values[i] = stable_sigmoid(x->values[i]);
    if (recorded(out))
      record([x, out] {
        if (out->grad.empty() || !x->requires_grad) return;
        auto& dx = x->grad_ref();
        for (long i = 0; i < out->numel(); ++i) {
          T y = out->values[i];
          dx[i] += out->grad[i] * y * (T(1) - y);
        }
      });
    return out;
  }

  TensorPtr<T> tanh(const TensorPtr<T>& x) {
    auto out = fresh(x->shape, {x});
    for (long i = 0; i < x->numel(); ++i) out->values[i] = std::tanh(x->values[i]);
    if (recorded(out))
      record([x, out] {
        if (out->grad.empty() || !x->requires_grad) return;
        auto& dx = x->grad_ref();
        for (long i = 0; i < out->numel(); ++i) {
          T y = out->values[i];
          dx[i] += out->grad[i] * (T(1) - y * y);
        }
      });
    return out;
  }

  TensorPtr<T> relu(const TensorPtr<T>& x) {
    auto out = fresh(x->shape, {x});
    for (long i = 0; i < x->numel(); ++i) out->values[i] = x->values[i] > T(0) ? x->values[i] : T(0);
    if (recorded(out))
      record([x, out] {
        if (out->grad.empty() || !x->requires_grad) return;
        auto& dx = x->grad_ref();
        for (long i = 0; i < out->numel(); ++i)
          if (x->values[i] > T(0)) dx[i] += out->grad[i];
      });
    return out;
  }

  TensorPtr<T> activation(const TensorPtr<T>& x, Act kind) {
    switch (kind) {
      case Act::Sigmoid: return sigmoid(x);
      case Act::Tanh: return tanh(x);
      case Act::Relu: return relu(x);
    }
    throw std::invalid_argument("unknown activation kind");
  }

  // Max-subtracted softmax along `axis` (rank-1: axis 0; rank-2: 0 or 1).
  TensorPtr<T> softmax(const TensorPtr<T>& x, int axis) {
    require(x->rank() == 1 || x->rank() == 2, "softmax expects rank-1 or rank-2 input");
    if (x->rank() == 1) require(axis == 0, "softmax axis out of range for rank-1 input");
    else require(axis == 0 || axis == 1, "softmax axis out of range for rank-2 input");
    auto out = fresh(x->shape, {x});
    const int rows = x->rank() == 1 ? 1 : x->shape[0];
    const int cols = x->rank() == 1 ? x->shape[0] : x->shape[1];
    const bool along_cols = (x->rank() == 1) || axis == 1;
    const int slices = along_cols ? rows : cols;
    const int n = along_cols ? cols : rows;
    auto at = [along_cols, cols](int s, int i) -> size_t {
      return along_cols ? size_t(s) * cols + i : size_t(i) * cols + s;
    };
    for (int s = 0; s < slices; ++s) {
      T mx = x->values[at(s, 0)];
      for (int i = 1; i < n; ++i) mx = std::max(mx, x->values[at(s, i)]);
      T denom = 0;
      for (int i = 0; i < n; ++i) {
        T e = std::exp(x->values[at(s, i)] - mx);
        out->values[at(s, i)] = e;
        denom += e;
      }
      for (int i = 0; i < n; ++i) out->values[at(s, i)] /= denom;
    }
    if (recorded(out))
      record([x, out, slices, n, at] {
        if (out->grad.empty() || !x->requires_grad) return;
        auto& dx = x->grad_ref();
        for (int s = 0; s < slices; ++s) {
          T dot = 0;
          for (int i = 0; i < n; ++i) dot += out->grad[at(s, i)] * out->values[at(s, i)];
          for (int i = 0; i < n; ++i)
            dx[at(s, i)] += out->values[at(s, i)] * (out->grad[at(s, i)] - dot);
        }
      });
    return out;
  }

  TensorPtr<T> log(const TensorPtr<T>& x) {
    for (T v : x->values)
      if (!(v > T(0))) throw std::domain_error("log requires strictly positive input");
    auto out = fresh(x->shape, {x});
    for (long i = 0; i < x->numel(); ++i) out->values[i] = std::log(x->values[i]);
    if (recorded(out))
      record([x, out] {
        if (out->grad.empty() || !x->requires_grad) return;
        auto& dx = x->grad_ref();
        for (long i = 0; i < out->numel(); ++i) dx[i] += out->grad[i] / x->values[i];
      });
    return out;
  }

  TensorPtr<T> clamp_min(const TensorPtr<T>& x, double lo) {
    auto out = fresh(x->shape, {x});
    for (long i = 0; i < x->numel(); ++i) out->values[i] = std::max(x->values[i], T(lo));
    if (recorded(out))
      record([x, out, lo] {
        if (out->grad.empty() || !x->requires_grad) return;
        auto& dx = x->grad_ref();
        for (long i = 0; i < out->numel(); ++i)
          if (x->values[i] >= T(lo)) dx[i] += out->grad[i];
      });
    return out;
  }

  // ---- structural ---------------------------------------------------------

  TensorPtr<T> concat(const std::vector<TensorPtr<T>>& parts, int axis) {
    require(!parts.empty(), "concat of zero tensors");
    const int rank = parts[0]->rank();
    require(rank == 1 || rank == 2, "concat expects rank-1 or rank-2 tensors");
    require(axis >= 0 && axis < rank, "concat axis out of range");
    for (const auto& p : parts) {
      require(p->rank() == rank, "concat rank mismatch");
      for (int d = 0; d < rank; ++d)
        require(d == axis || p->shape[d] == parts[0]->shape[d],
                "concat off-axis shape mismatch: " + shape_str(parts[0]->shape) + " vs " + shape_str(p->shape));
    }
    Shape oshape = parts[0]->shape;
    oshape[axis] = 0;
    for (const auto& p : parts) oshape[axis] += p->shape[axis];
    auto out = fresh(oshape, parts);
    // copy slices in
    if (rank == 1 || axis == 0) {
      long off = 0;
      for (const auto& p : parts) {
        std::copy(p->values.begin(), p->values.end(), out->values.begin() + off);
        off += p->numel();
      }
    } else {
      const int m = oshape[0], ncols = oshape[1];
      int coff = 0;
      for (const auto& p : parts) {
        const int pc = p->shape[1];
        for (int i = 0; i < m; ++i)
          std::copy(p->values.begin() + size_t(i) * pc, p->values.begin() + size_t(i + 1) * pc,
                    out->values.begin() + size_t(i) * ncols + coff);
        coff += pc;
      }
    }
    if (recorded(out))
      record([parts, out, rank, axis] {
        if (out->grad.empty()) return;
        if (rank == 1 || axis == 0) {
          long off = 0;
          for (const auto& p : parts) {
            if (p->requires_grad) {
              auto& dp = p->grad_ref();
              for (long i = 0; i < p->numel(); ++i) dp[i] += out->grad[off + i];
            }
            off += p->numel();
          }
        } else {
          const int m = out->shape[0], ncols = out->shape[1];
          int coff = 0;
          for (const auto& p : parts) {
            const int pc = p->shape[1];
            if (p->requires_grad) {
              auto& dp = p->grad_ref();
              for (int i = 0; i < m; ++i)
                for (int j = 0; j < pc; ++j) dp[size_t(i) * pc + j] += out->grad[size_t(i) * ncols + coff + j];
            }
            coff += pc;
          }
        }
      });
    return out;
  }

  TensorPtr<T> slice_cols(const TensorPtr<T>& x, int c0, int c1) {
    require(x->rank() == 2, "slice_cols expects rank-2 input");
    require(0 <= c0 && c0 < c1 && c1 <= x->shape[1], "slice_cols range out of bounds");
    const int m = x->shape[0], n = x->shape[1], w = c1 - c0;
    auto out = fresh({m, w}, {x});
    for (int i = 0; i < m; ++i)
      std::copy(x->values.begin() + size_t(i) * n + c0, x->values.begin() + size_t(i) * n + c1,
                out->values.begin() + size_t(i) * w);
    if (recorded(out))
      record([x, out, m, n, w, c0] {
        if (out->grad.empty() || !x->requires_grad) return;
        auto& dx = x->grad_ref();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < w; ++j) dx[size_t(i) * n + c0 + j] += out->grad[size_t(i) * w + j];
      });
    return out;
  }

  TensorPtr<T> slice_rows(const TensorPtr<T>& x, int r0, int r1) {
    require(x->rank() == 2, "slice_rows expects rank-2 input");
    require(0 <= r0 && r0 < r1 && r1 <= x->shape[0], "slice_rows range out of bounds");
    const int n = x->shape[1], h = r1 - r0;
    auto out = fresh({h, n}, {x});
    std::copy(x->values.begin() + size_t(r0) * n, x->values.begin() + size_t(r1) * n, out->values.begin());
    if (recorded(out))
      record([x, out, n, h, r0] {
        if (out->grad.empty() || !x->requires_grad) return;
        auto& dx = x->grad_ref();
        for (long i = 0; i < long(h) * n; ++i) dx[size_t(r0) * n + i] += out->grad[i];
      });
    return out;
  }

  // Row gather from an embedding table; backward scatter-adds, so repeated
  // ids accumulate.
  TensorPtr<T> lookup(const TensorPtr<T>& table, const std::vector<int>& ids) {
    require(table->rank() == 2, "lookup expects rank-2 table");
    require(!ids.empty(), "lookup with empty id list");
    const int v = table->shape[0], d = table->shape[1];
    for (int id : ids)
      if (id < 0 || id >= v)
        throw std::out_of_range("lookup id " + std::to_string(id) + " out of range [0," + std::to_string(v) + ")");
    auto out = fresh({int(ids.size()), d}, {table});
    for (size_t r = 0; r < ids.size(); ++r)
      std::copy(table->values.begin() + size_t(ids[r]) * d, table->values.begin() + size_t(ids[r] + 1) * d,
                out->values.begin() + r * d);
    if (recorded(out))
      record([table, out, ids, d] {
        if (out->grad.empty() || !table->requires_grad) return;
        auto& dt = table->grad_ref();
        for (size_t r = 0; r < ids.size(); ++r)
          for (int j = 0; j < d; ++j) dt[size_t(ids[r]) * d + j] += out->grad[r * d + j];
      });
    return out;
  }

  // Inverted dropout: scales kept activations by 1/(1-rate) at train time so
  // the eval path is the identity.
  TensorPtr<T> dropout(const TensorPtr<T>& x, double rate, bool train, Rng* rng) {
    require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0,1)");
    if (!train || rate == 0.0) return x;
    require(rng != nullptr, "dropout in train mode needs an rng");
    auto mask = std::make_shared<std::vector<T>>(x->values.size());
    const T keep_scale = T(1.0 / (1.0 - rate));
    for (long i = 0; i < x->numel(); ++i)
      (*mask)[i] = rng->next_double() >= rate ? keep_scale : T(0);
    auto out = fresh(x->shape, {x});
    for (long i = 0; i < x->numel(); ++i) out->values[i] = x->values[i] * (*mask)[i];
    if (recorded(out))
      record([x, out, mask] {
        if (out->grad.empty() || !x->requires_grad) return;
        auto& dx = x->grad_ref();
        for (long i = 0; i < out->numel(); ++i) dx[i] += out->grad[i] * (*mask)[i];
      });
    return out;
  }

  // ---- reductions -----------------------------------------------------

  TensorPtr<T> sum(const TensorPtr<T>& x) {
    auto out = fresh({1}, {x});
    T acc = 0;
    for (T v : x->values) acc += v;
    out->values[0] = acc;
    if (recorded(out))
      record([x, out] {
        if (out->grad.empty() || !x->requires_grad) return;
        auto& dx = x->grad_ref();
        const T g = out->grad[0];
        for (long i = 0; i < x->numel(); ++i) dx[i] += g;
      });
    return out;
  }

  TensorPtr<T> mean(const TensorPtr<T>& x) { return scale(sum(x), 1.0 / double(x->numel())); }

  TensorPtr<T> pick(const TensorPtr<T>& x, long index) {
    require(index >= 0 && index < x->numel(), "pick index out of range");
    auto out = fresh({1}, {x});
    out->values[0] = x->values[index];
    if (recorded(out))
      record([x, out, index] {
        if (out->grad.empty() || !x->requires_grad) return;
        x->grad_ref()[index] += out->grad[0];
      });
    return out;
  }

  // Elementwise max over k same-shape tensors. The subgradient is routed to
  // the first tensor achieving the max at each position.
  TensorPtr<T> max_elem(const std::vector<TensorPtr<T>>& parts) {
    require(!parts.empty(), "max_elem of zero tensors");
    for (const auto& p : parts)
      require(p->shape == parts[0]->shape, "max_elem shape mismatch");
    auto out = fresh(parts[0]->shape, parts);
    auto argmax = std::make_shared<std::vector<int>>(out->values.size(), 0);
    for (long i = 0; i < out->numel(); ++i) {
      T best = parts[0]->values[i];
      int bk = 0;
      for (size_t k = 1; k < parts.size(); ++k)
        if (parts[k]->values[i] > best) {
          best = parts[k]->values[i];
          bk = int(k);
        }
      out->values[i] = best;
      (*argmax)[i] = bk;
    }
    if (recorded(out))
      record([parts, out, argmax] {
        if (out->grad.empty()) return;
        for (long i = 0; i < out->numel(); ++i) {
          const auto& p = parts[size_t((*argmax)[i])];
          if (p->requires_grad) p->grad_ref()[i] += out->grad[i];
        }
      });
    return out;
  }

  // Final-distribution mix: start from the weighted generate distribution and
  // scatter-add each source position's copy mass onto that position's
  // vocabulary id. Vocabulary entries absent from the source are left as-is.
  TensorPtr<T> copy_mix(const TensorPtr<T>& g_hat, const TensorPtr<T>& c,
                        const std::vector<int>& source_ids) {
    require(c->numel() == long(source_ids.size()),
            "copy distribution length " + std::to_string(c->numel()) + " does not match source length " +
                std::to_string(source_ids.size()));
    const long vocab = g_hat->numel();
    for (int id : source_ids)
      if (id < 0 || id >= vocab) throw std::out_of_range("source id " + std::to_string(id) + " outside vocabulary");
    auto out = fresh(g_hat->shape, {g_hat, c});
    out->values = g_hat->values;
    for (size_t k = 0; k < source_ids.size(); ++k) out->values[source_ids[k]] += c->values[k];
    if (recorded(out))
      record([g_hat, c, out, source_ids] {
        if (out->grad.empty()) return;
        if (g_hat->requires_grad) {
          auto& dg = g_hat->grad_ref();
          for (long i = 0; i < out->numel(); ++i) dg[i] += out->grad[i];
        }
        if (c->requires_grad) {
          auto& dc = c->grad_ref();
          for (size_t k = 0; k < source_ids.size(); ++k) dc[k] += out->grad[source_ids[k]];
        }
      });
    return out;
  }

  // ---- backward -------------------------------------------------------

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients of
  // graph-produced tensors are reset first; leaves keep accumulating.
  void backward(const TensorPtr<T>& loss) {
    if (!loss->is_scalar())
      throw std::invalid_argument("backward requires a scalar loss, got " + shape_str(loss->shape));
    for (auto& t : produced_) t->zero_grad();
    loss->grad_ref()[0] += T(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  }

  size_t size() const { return tape_.size(); }

 private:
  static void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
  }

  static T stable_sigmoid(T x) {
    if (x >= T(0)) {
      T e = std::exp(-x);
      return T(1) / (T(1) + e);
    }
    T e = std::exp(x);
    return e / (T(1) + e);
  }

  // out += a * b (row-major), out [m x n], a [m x k], b [k x n]
  static void gemm_acc(const T* a, const T* b, T* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        const T a_ip = a[size_t(i) * k + p];
        if (a_ip == T(0)) continue;
        const T* br = b + size_t(p) * n;
        T* orow = out + size_t(i) * n;
        for (int j = 0; j < n; ++j) orow[j] += a_ip * br[j];
      }
  }

  TensorPtr<T> fresh(Shape shape, const std::vector<TensorPtr<T>>& inputs) {
    auto out = make_tensor<T>(std::move(shape));
    if (recording_) {
      for (const auto& in : inputs)
        if (in->requires_grad) {
          out->requires_grad = true;
          break;
        }
      if (out->requires_grad) produced_.push_back(out);
    }
    return out;
  }

  bool recorded(const TensorPtr<T>& out) const { return recording_ && out->requires_grad; }

  bool recording_;
  std::vector<std::function<void()>> tape_;
  std::vector<TensorPtr<T>> produced_;
};

}  // namespace qgen

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "qgen/rng.hpp"
#include "qgen/tensor.hpp"

namespace qgen {

// Named, ordered collection of all trainable tensors. Creation order is the
// checkpoint identity: serialization walks parameters in this order.
template <typename T>
class ParameterRegistry {
 public:
  TensorPtr<T> create(const std::string& name, Shape shape) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    auto t = make_tensor<T>(std::move(shape), true);
    t->name = name;
    index_[name] = params_.size();
    params_.push_back(t);
    return t;
  }

  TensorPtr<T> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return params_[it->second];
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<TensorPtr<T>>& all() const { return params_; }
  size_t size() const { return params_.size(); }

  long total_values() const {
    long n = 0;
    for (const auto& p : params_) n += p->numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  double grad_norm() const {
    double sq = 0;
    for (const auto& p : params_)
      for (T g : p->grad) sq += double(g) * double(g);
    return std::sqrt(sq);
  }

  // Global-norm clipping; no-op when the norm is under the threshold.
  void clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (norm <= max_norm || norm == 0.0) return;
    const T s = T(max_norm / norm);
    for (auto& p : params_)
      for (T& g : p->grad) g *= s;
  }

 private:
  std::vector<TensorPtr<T>> params_;
  std::unordered_map<std::string, size_t> index_;
};

template <typename T>
void init_uniform(const TensorPtr<T>& t, Rng& rng, double lo, double hi) {
  for (T& v : t->values) v = T(rng.uniform(lo, hi));
}

}  // namespace qgen

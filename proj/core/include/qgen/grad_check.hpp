#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qgen/graph.hpp"

namespace qgen {

struct GradCheckLeaf {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckLeaf> leaves;
  double max_rel_err = 0.0;
  bool pass = true;
};

// Central finite-difference verification of reverse-mode gradients.
// `f` must be a deterministic tensor program over `leaves`; it is re-run
// twice per leaf element with perturbed values. Relative error per element is
// |analytic - numeric| / max(1, |numeric|).
template <typename T>
GradCheckReport grad_check(const std::function<TensorPtr<T>(Graph<T>&)>& f,
                           const std::vector<TensorPtr<T>>& leaves, double eps, double tol) {
  for (auto& leaf : leaves) leaf->zero_grad();
  std::vector<std::vector<T>> analytic;
  {
    Graph<T> g;
    auto loss = f(g);
    g.backward(loss);
    for (auto& leaf : leaves) analytic.push_back(leaf->grad_ref());
  }
  auto eval = [&]() -> double {
    Graph<T> g(false);
    return double(f(g)->values[0]);
  };
  GradCheckReport report;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    GradCheckLeaf row;
    row.name = leaf->name.empty() ? "leaf" + std::to_string(li) : leaf->name;
    for (long i = 0; i < leaf->numel(); ++i) {
      const T saved = leaf->values[i];
      leaf->values[i] = saved + T(eps);
      const double lp = eval();
      leaf->values[i] = saved - T(eps);
      const double lm = eval();
      leaf->values[i] = saved;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double rel = std::abs(double(analytic[li][i]) - numeric) / std::max(1.0, std::abs(numeric));
      row.max_rel_err = std::max(row.max_rel_err, rel);
    }
    row.pass = row.max_rel_err <= tol;
    report.max_rel_err = std::max(report.max_rel_err, row.max_rel_err);
    report.pass = report.pass && row.pass;
    report.leaves.push_back(std::move(row));
  }
  return report;
}

}  // namespace qgen

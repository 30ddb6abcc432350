#pragma once

#include <cstdint>
#include <vector>

#include "qgen/examples.hpp"
#include "qgen/graph.hpp"
#include "qgen/model.hpp"

namespace qgen {

struct LossBreakdown {
  double nll = 0.0;
  double type_nll = 0.0;
  double copy_loss = 0.0;  // raw sum over labeled positions, before lambda2/l
  double total = 0.0;
  long clamped = 0;  // target probabilities clamped at eps
};

struct ObjectiveConfig {
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  bool copy_loss_on = true;
  bool gold_type_conditioning = true;  // false: condition on predicted argmax type
  double clamp_eps = 1e-12;
};

// -sum_t log f_t(y_t); probabilities below eps are clamped and counted.
template <typename T>
TensorPtr<T> nll_loss(Graph<T>& g, const std::vector<TensorPtr<T>>& step_dists,
                      const std::vector<int>& target_ids, double eps = 1e-12, long* clamped = nullptr) {
  if (step_dists.size() != target_ids.size())
    throw std::invalid_argument("nll_loss: steps and targets must align");
  if (step_dists.empty()) throw std::invalid_argument("nll_loss: no steps");
  TensorPtr<T> acc;
  for (size_t t = 0; t < step_dists.size(); ++t) {
    auto p = g.pick(step_dists[t], target_ids[size_t(t)]);
    if (clamped && double(p->values[0]) < eps) ++(*clamped);
    auto term = g.scale(g.log(g.clamp_min(p, eps)), -1.0);
    acc = acc ? g.add(acc, term) : term;
  }
  return acc;
}

// -log T[gold]
template <typename T>
TensorPtr<T> type_loss(Graph<T>& g, const TensorPtr<T>& type_dist, int gold_type, double eps = 1e-12) {
  if (gold_type < 0 || gold_type >= int(type_dist->numel()))
    throw std::out_of_range("type_loss: gold type outside distribution");
  return g.scale(g.log(g.clamp_min(g.pick(type_dist, gold_type), eps)), -1.0);
}

// sum_i cl(x_i) * (max_t c_ti - 1)^2, the raw sum without length scaling.
// The max subgradient routes to the earliest step achieving it.
template <typename T>
TensorPtr<T> copy_loss(Graph<T>& g, const std::vector<TensorPtr<T>>& copy_dists,
                       const std::vector<uint8_t>& copy_labels) {
  if (copy_dists.empty()) throw std::invalid_argument("copy_loss: no steps");
  if (copy_dists[0]->numel() != long(copy_labels.size()))
    throw std::invalid_argument("copy_loss: labels must align with source positions");
  auto peak = g.max_elem(copy_dists);
  auto diff = g.add_scalar(peak, -1.0);
  std::vector<T> mask(copy_labels.size());
  for (size_t i = 0; i < copy_labels.size(); ++i) mask[i] = copy_labels[i] ? T(1) : T(0);
  auto masked = g.mul(g.mul(diff, diff), g.constant(peak->shape, std::move(mask)));
  return g.sum(masked);
}

// total = nll + lambda1 * type_nll + (lambda2 / source_len) * copy_raw.
// Null terms are simply absent (ablation modes).
template <typename T>
TensorPtr<T> total_loss(Graph<T>& g, const TensorPtr<T>& nll, const TensorPtr<T>& type_nll,
                        const TensorPtr<T>& copy_raw, double lambda1, double lambda2, int source_len) {
  if (lambda1 < 0 || lambda2 < 0) throw std::invalid_argument("total_loss: lambdas must be non-negative");
  if (source_len <= 0) throw std::invalid_argument("total_loss: source length must be positive");
  auto total = nll;
  if (type_nll) total = g.add(total, g.scale(type_nll, lambda1));
  if (copy_raw) total = g.add(total, g.scale(copy_raw, lambda2 / double(source_len)));
  return total;
}

template <typename T>
struct ExampleLoss {
  TensorPtr<T> total;
  LossBreakdown values;
};

// Teacher-forced forward pass of one example producing the Eq.-14 style
// composite loss. Type and copy terms follow the model configuration and the
// objective flags.
template <typename T>
ExampleLoss<T> example_loss(Graph<T>& g, const Seq2SeqModel<T>& model, const TrainingExample& ex,
                            const ObjectiveConfig& obj, bool train, Rng* rng) {
  ExampleLoss<T> out;
  auto enc = model.encode(g, ex.source_ids, train, rng);
  auto state = model.bridge(g, enc.u_last);

  TensorPtr<T> qt;
  TensorPtr<T> type_nll_t;
  if (model.config().type_module) {
    auto type_dist = model.predict_types(g, enc.u_last);
    type_nll_t = type_loss(g, type_dist, ex.type_id, obj.clamp_eps);
    int cond_type = ex.type_id;
    if (!obj.gold_type_conditioning) {
      const auto& probs = type_dist->values;
      cond_type = int(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    qt = model.embed_type(g, cond_type);
  }

  const size_t steps = ex.target_ids.size();
  std::vector<TensorPtr<T>> finals(steps), copies(steps);
  for (size_t t = 0; t < steps; ++t) {
    TensorPtr<T> input;
    if (t == 0) {
      input = qt ? qt : model.sos_embedding(g);
    } else {
      input = model.token_embedding(g, ex.target_ids[t - 1]);
    }
    auto [next, step] = model.decode_step(g, state, input, enc, ex.source_ids, qt);
    state = next;
    finals[t] = step.final;
    copies[t] = step.copy;
  }

  auto nll = nll_loss(g, finals, ex.target_ids, obj.clamp_eps, &out.values.clamped);
  TensorPtr<T> copy_raw;
  if (obj.copy_loss_on && obj.lambda2 > 0.0) copy_raw = copy_loss(g, copies, ex.copy_labels);
  out.total = total_loss(g, nll, type_nll_t, copy_raw, obj.lambda1, obj.lambda2, int(ex.source_ids.size()));

  out.values.nll = double(nll->values[0]);
  out.values.type_nll = type_nll_t ? double(type_nll_t->values[0]) : 0.0;
  out.values.copy_loss = copy_raw ? double(copy_raw->values[0]) : 0.0;
  out.values.total = double(out.total->values[0]);
  return out;
}

}  // namespace qgen

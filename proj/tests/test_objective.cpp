#include <cmath>

#include "doctest.h"
#include "qgen/grad_check.hpp"
#include "qgen/model.hpp"
#include "qgen/objective.hpp"

using namespace qgen;

namespace {

// distributions assigning probability 1 to the given ids
std::vector<TensorPtr<double>> onehot_steps(Graph<double>& g, const std::vector<int>& ids, int vocab) {
  std::vector<TensorPtr<double>> steps;
  for (int id : ids) {
    std::vector<double> v(size_t(vocab), 0.0);
    v[size_t(id)] = 1.0;
    steps.push_back(g.constant({1, vocab}, std::move(v)));
  }
  return steps;
}

}  // namespace

TEST_CASE("nll_loss closed forms") {
  Graph<double> g;
  auto perfect = onehot_steps(g, {2, 5, 7}, 20);
  CHECK(nll_loss(g, perfect, {2, 5, 7})->values[0] == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<TensorPtr<double>> uniform;
  for (int t = 0; t < 3; ++t) uniform.push_back(g.constant({1, 20}, std::vector<double>(20, 1.0 / 20)));
  CHECK(nll_loss(g, uniform, {0, 1, 2})->values[0] == doctest::Approx(3.0 * std::log(20.0)).epsilon(1e-12));
}

TEST_CASE("nll_loss matches a per-token loop oracle on random distributions") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Graph<double> g;
    const int vocab = 10, steps = 4;
    std::vector<TensorPtr<double>> dists;
    std::vector<int> targets;
    double expect = 0;
    for (int t = 0; t < steps; ++t) {
      std::vector<double> v(vocab);
      double s = 0;
      for (auto& x : v) {
        x = 0.05 + rng.next_double();
        s += x;
      }
      for (auto& x : v) x /= s;
      int y = int(rng.next_below(vocab));
      expect -= std::log(v[size_t(y)]);
      targets.push_back(y);
      dists.push_back(g.constant({1, vocab}, std::move(v)));
    }
    CHECK(nll_loss(g, dists, targets)->values[0] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("nll_loss clamps zero probabilities and counts them") {
  Graph<double> g;
  std::vector<double> v(8, 0.0);
  v[0] = 1.0;
  std::vector<TensorPtr<double>> dists = {g.constant({1, 8}, v)};
  long clamped = 0;
  auto loss = nll_loss(g, dists, {3}, 1e-12, &clamped);
  CHECK(clamped == 1);
  CHECK(loss->values[0] == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("type_loss closed forms and gradient through the MLP") {
  Graph<double> g;
  std::vector<double> onehot(7, 0.0);
  onehot[3] = 1.0;
  CHECK(type_loss(g, g.constant({1, 7}, onehot), 3)->values[0] == doctest::Approx(0.0));
  CHECK(type_loss(g, g.constant({1, 7}, std::vector<double>(7, 1.0 / 7)), 2)->values[0] ==
        doctest::Approx(std::log(7.0)).epsilon(1e-12));
  CHECK_THROWS_AS(type_loss(g, g.constant({1, 7}, std::vector<double>(7, 1.0 / 7)), 9), std::out_of_range);

  Rng rng(22);
  ModelConfig cfg;
  cfg.vocab_size = 10;
  cfg.embed_dim = 4;
  cfg.hidden = 4;
  cfg.enc_layers = 1;
  cfg.dropout = 0.0;
  Seq2SeqModel<double> model(cfg, &rng);
  auto report = grad_check<double>(
      [&](Graph<double>& gg) {
        auto enc = model.encode(gg, {4, 7, 5}, false, nullptr);
        return type_loss(gg, model.predict_types(gg, enc.u_last), 4);
      },
      {model.params().get("type.mlp.w1"), model.params().get("type.mlp.w2"),
       model.params().get("type.mlp.b1"), model.params().get("type.mlp.b2")},
      1e-4, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("copy_loss closed forms") {
  Graph<double> g;
  // spec case: cl = [1,0,1], c-hat = [0.5, 0.9, 1.0] -> 0.25
  std::vector<TensorPtr<double>> steps = {g.constant({1, 3}, {0.5, 0.9, 0.2}),
                                          g.constant({1, 3}, {0.1, 0.4, 1.0})};
  auto loss = copy_loss(g, steps, {1, 0, 1});
  CHECK(loss->values[0] == doctest::Approx(0.25).epsilon(1e-12));

  // all labeled positions reach 1 -> 0
  std::vector<TensorPtr<double>> ideal = {g.constant({1, 3}, {1.0, 0.0, 1.0})};
  CHECK(copy_loss(g, ideal, {1, 0, 1})->values[0] == doctest::Approx(0.0));

  // no labels -> 0 regardless of c
  CHECK(copy_loss(g, steps, {0, 0, 0})->values[0] == doctest::Approx(0.0));
}

TEST_CASE("copy_loss per-position max equals a brute-force loop (1000 cases)") {
  Rng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    Graph<double> g;
    const int l = 1 + int(rng.next_below(6));
    const int m = 1 + int(rng.next_below(5));
    std::vector<std::vector<double>> raw(static_cast<size_t>(m), std::vector<double>(static_cast<size_t>(l)));
    std::vector<TensorPtr<double>> steps;
    for (auto& row : raw) {
      for (auto& v : row) v = rng.next_double();
      steps.push_back(g.constant({1, l}, row));
    }
    std::vector<uint8_t> labels(static_cast<size_t>(l));
    for (auto& b : labels) b = rng.next_below(2) ? 1 : 0;

    double expect = 0;
    for (int i = 0; i < l; ++i) {
      if (!labels[size_t(i)]) continue;
      double mx = 0;
      for (int t = 0; t < m; ++t) mx = std::max(mx, raw[size_t(t)][size_t(i)]);
      expect += (mx - 1.0) * (mx - 1.0);
    }
    CHECK(copy_loss(g, steps, labels)->values[0] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("copy_loss monotonicity and bound") {
  // non-increasing in each c-hat on [0,1]; bounded by the number of labels
  Graph<double> g;
  for (double lo : {0.0, 0.2, 0.5, 0.9}) {
    auto l1 = copy_loss(g, {g.constant({1, 2}, {lo, 0.3})}, {1, 1})->values[0];
    auto l2 = copy_loss(g, {g.constant({1, 2}, {lo + 0.1, 0.3})}, {1, 1})->values[0];
    CHECK(l2 <= l1);
    CHECK(l1 <= 2.0);
  }
}

TEST_CASE("copy_loss subgradient routes to the earliest max step") {
  Graph<double> g;
  auto s1 = make_tensor<double>({1, 2}, {0.4, 0.3}, true);
  auto s2 = make_tensor<double>({1, 2}, {0.4, 0.6}, true);  // position 0 ties with s1
  auto loss = copy_loss(g, {s1, s2}, {1, 1});
  g.backward(loss);
  CHECK(s1->grad[0] != 0.0);  // tie at position 0 goes to the earlier step
  CHECK(s2->grad[0] == 0.0);
  CHECK(s1->grad[1] == 0.0);
  CHECK(s2->grad[1] != 0.0);
}

TEST_CASE("total_loss arithmetic and ablation identity") {
  Graph<double> g;
  auto nll = g.constant({1}, {2.0});
  auto type_nll = g.constant({1}, {1.4});
  auto copy_raw = g.constant({1}, {0.25});
  auto total = total_loss<double>(g, nll, type_nll, copy_raw, 0.1, 0.1, 10);
  CHECK(total->values[0] == doctest::Approx(2.0 + 0.14 + 0.0025).epsilon(1e-12));

  auto baseline = total_loss<double>(g, nll, nullptr, nullptr, 0.0, 0.0, 10);
  CHECK(baseline->values[0] == 2.0);  // bit-for-bit the nll

  CHECK_THROWS_AS(total_loss<double>(g, nll, type_nll, copy_raw, -0.1, 0.1, 10), std::invalid_argument);
  CHECK_THROWS_AS(total_loss<double>(g, nll, type_nll, copy_raw, 0.1, 0.1, 0), std::invalid_argument);
}

TEST_CASE("example_loss composes the breakdown invariant") {
  Rng rng(24);
  ModelConfig cfg;
  cfg.vocab_size = 14;
  cfg.embed_dim = 4;
  cfg.hidden = 4;
  cfg.enc_layers = 2;
  cfg.type_module = true;
  cfg.dropout = 0.0;
  Seq2SeqModel<double> model(cfg, &rng);

  TrainingExample ex;
  ex.source_ids = {4, 9, 6, 11};
  ex.target_ids = {5, 8, SubwordModel::kEos};
  ex.type_id = 2;
  ex.copy_labels = {1, 0, 0, 1};

  ObjectiveConfig obj;
  Graph<double> g;
  auto loss = example_loss(g, model, ex, obj, false, nullptr);
  const auto& v = loss.values;
  CHECK(v.total == doctest::Approx(v.nll + 0.1 * v.type_nll + (0.1 / 4.0) * v.copy_loss).epsilon(1e-12));
  CHECK(v.nll > 0);
  CHECK(v.type_nll > 0);
  CHECK(v.copy_loss > 0);

  // lambda2 = 0 drops the copy term entirely
  ObjectiveConfig no_copy = obj;
  no_copy.copy_loss_on = false;
  Graph<double> g2;
  auto base = example_loss(g2, model, ex, no_copy, false, nullptr);
  CHECK(base.values.copy_loss == 0.0);
  CHECK(base.values.total == doctest::Approx(base.values.nll + 0.1 * base.values.type_nll).epsilon(1e-12));
}

TEST_CASE("full composite gradient via finite differences (toy model)") {
  Rng rng(25);
  ModelConfig cfg;
  cfg.vocab_size = 10;
  cfg.embed_dim = 3;
  cfg.hidden = 3;
  cfg.enc_layers = 1;
  cfg.type_module = true;
  cfg.dropout = 0.0;
  Seq2SeqModel<double> model(cfg, &rng);
  TrainingExample ex;
  ex.source_ids = {4, 7};
  ex.target_ids = {6, SubwordModel::kEos};
  ex.type_id = 1;
  ex.copy_labels = {1, 0};
  ObjectiveConfig obj;
  auto report = grad_check<double>(
      [&](Graph<double>& g) { return example_loss(g, model, ex, obj, false, nullptr).total; },
      model.params().all(), 1e-4, 1e-4);
  CHECK(report.pass);
}

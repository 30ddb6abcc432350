#include <cmath>

#include "doctest.h"
#include "qgen/grad_check.hpp"
#include "qgen/graph.hpp"
#include "qgen/registry.hpp"

using namespace qgen;

namespace {

TensorPtr<double> randt(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  auto t = make_tensor<double>(std::move(shape), true);
  init_uniform(t, rng, lo, hi);
  return t;
}

// Reduce an arbitrary tensor to a scalar with fixed random weights so that
// upstream gradients are non-trivial in property tests.
TensorPtr<double> weighted_sum(Graph<double>& g, const TensorPtr<double>& x, Rng& rng) {
  std::vector<double> w(x->values.size());
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  return g.sum(g.mul(x, g.constant(x->shape, std::move(w))));
}

}  // namespace

TEST_CASE("matmul forward") {
  Graph<double> g;
  auto a = g.constant({2, 2}, {1, 2, 3, 4});
  auto b = g.constant({2, 1}, {1, 1});
  auto c = g.matmul(a, b);
  CHECK(c->values == std::vector<double>{3, 7});

  Rng rng(7);
  auto m = randt({3, 3}, rng);
  auto eye = g.constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto mi = g.matmul(m, eye);
  for (int i = 0; i < 9; ++i) CHECK(mi->values[i] == doctest::Approx(m->values[i]).epsilon(1e-15));
}

TEST_CASE("matmul shape mismatch is rejected with a dimension report") {
  Graph<double> g;
  auto a = g.constant({2, 3}, std::vector<double>(6, 0.0));
  auto b = g.constant({2, 2}, std::vector<double>(4, 0.0));
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("[2x3]"), std::invalid_argument);
}

TEST_CASE("matmul gradient matches finite differences at 8x8") {
  Rng rng(11);
  auto a = randt({8, 8}, rng);
  auto b = randt({8, 8}, rng);
  auto report = grad_check<double>(
      [&](Graph<double>& g) { return g.sum(g.matmul(a, b)); }, {a, b}, 1e-4, 1e-6);
  CHECK(report.pass);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("softmax forward closed forms") {
  Graph<double> g;
  auto x = g.constant({3}, {0, 0, 0});
  auto s = g.softmax(x, 0);
  for (double v : s->values) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

  auto y = g.softmax(g.constant({2}, {0.0, std::log(2.0)}), 0);
  CHECK(y->values[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(y->values[1] == doctest::Approx(2.0 / 3).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one for wild inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Graph<double> g;
    auto x = randt({4, 6}, rng, -50.0, 50.0);
    auto s = g.softmax(x, 1);
    REQUIRE(all_finite(*s));
    for (int r = 0; r < 4; ++r) {
      double row_sum = 0;
      for (int c = 0; c < 6; ++c) row_sum += s->values[r * 6 + c];
      CHECK(std::abs(row_sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("gradient of sum(softmax(x)) is zero") {
  Rng rng(5);
  auto x = randt({5}, rng);
  Graph<double> g;
  auto loss = g.sum(g.softmax(x, 0));
  g.backward(loss);
  for (double gv : x->grad) CHECK(std::abs(gv) < 1e-12);
}

TEST_CASE("activations") {
  Graph<double> g;
  auto zero = g.constant({1}, {0.0});
  CHECK(g.activation(zero, Act::Sigmoid)->values[0] == doctest::Approx(0.5));
  CHECK(g.activation(zero, Act::Tanh)->values[0] == doctest::Approx(0.0));
  CHECK(g.activation(g.constant({1}, {-2.0}), Act::Relu)->values[0] == 0.0);

  // sigmoid'(0) = 0.25
  auto x = make_tensor<double>({1}, {0.0}, true);
  auto report = grad_check<double>([&](Graph<double>& gg) { return gg.sigmoid(x); }, {x}, 1e-4, 1e-8);
  CHECK(report.pass);
  x->zero_grad();
  Graph<double> g2;
  auto s = g2.sigmoid(x);
  g2.backward(s);
  CHECK(x->grad[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("concat") {
  Graph<double> g;
  auto a = make_tensor<double>({2}, {1, 2}, true);
  auto b = make_tensor<double>({1}, {3}, true);
  auto c = g.concat({a, b}, 0);
  CHECK(c->values == std::vector<double>{1, 2, 3});

  auto single = g.concat({a}, 0);
  CHECK(single->values == a->values);

  auto loss = g.sum(g.concat({a, b}, 0));
  g.backward(loss);
  CHECK(a->grad == std::vector<double>{1, 1});
  CHECK(b->grad == std::vector<double>{1});

  auto bad = g.constant({3, 2}, std::vector<double>(6, 0.0));
  auto ok = g.constant({2, 2}, std::vector<double>(4, 0.0));
  CHECK_THROWS_AS(g.concat({ok, bad}, 1), std::invalid_argument);
}

TEST_CASE("lookup") {
  Graph<double> g;
  auto eye = g.constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto row = g.lookup(eye, {2});
  CHECK(row->values == std::vector<double>{0, 0, 1});

  auto table = make_tensor<double>({4, 2}, {0, 1, 2, 3, 4, 5, 6, 7}, true);
  Graph<double> g2;
  auto rows = g2.lookup(table, {1, 1});
  g2.backward(g2.sum(rows));
  CHECK(table->grad[2] == 2.0);  // row 1 hit twice
  CHECK(table->grad[3] == 2.0);
  CHECK(table->grad[0] == 0.0);

  Rng rng(9);
  auto t = randt({5, 4}, rng);
  Graph<double> g3;
  auto picked = g3.lookup(t, {0, 3});
  for (int j = 0; j < 4; ++j) {
    CHECK(picked->values[j] == t->values[j]);
    CHECK(picked->values[4 + j] == t->values[3 * 4 + j]);
  }

  CHECK_THROWS_AS(g3.lookup(t, {5}), std::out_of_range);
  CHECK_THROWS_AS(g3.lookup(t, {-1}), std::out_of_range);
}

TEST_CASE("backward basics") {
  {
    Graph<double> g;
    auto x = make_tensor<double>({1}, {3.0}, true);
    g.backward(g.add_scalar(x, 0.0));
    CHECK(x->grad[0] == 1.0);
  }
  {
    Graph<double> g;
    auto x = make_tensor<double>({2}, {1, 2}, true);
    g.backward(g.sum(g.mul(x, x)));
    CHECK(x->grad == std::vector<double>{2, 4});
  }
  {
    Graph<double> g;
    auto x = make_tensor<double>({2}, {1, 2}, true);
    auto y = g.scale(x, 2.0);
    CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
  }
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
  auto x = make_tensor<double>({2}, {1, 2}, true);
  Graph<double> g;
  auto loss = g.sum(g.mul(x, x));
  g.backward(loss);
  g.backward(loss);
  CHECK(x->grad == std::vector<double>{4, 8});
  x->zero_grad();
  g.backward(loss);
  CHECK(x->grad == std::vector<double>{2, 4});
}

TEST_CASE("shared subexpressions sum path contributions") {
  // f(x) = sum(x * x) built by using the same leaf twice vs duplicated leaf.
  Rng rng(13);
  auto x = randt({4}, rng);
  Graph<double> g;
  g.backward(g.sum(g.mul(x, x)));
  auto shared_grad = x->grad;

  auto a = make_tensor<double>({4}, x->values, true);
  auto b = make_tensor<double>({4}, x->values, true);
  Graph<double> g2;
  g2.backward(g2.sum(g2.mul(a, b)));
  for (int i = 0; i < 4; ++i)
    CHECK(shared_grad[i] == doctest::Approx(a->grad[i] + b->grad[i]).epsilon(1e-14));
}

TEST_CASE("forward is bitwise deterministic") {
  Rng rng(17);
  auto a = randt({6, 6}, rng);
  auto b = randt({6, 6}, rng);
  Graph<double> g;
  auto r1 = g.softmax(g.matmul(a, b), 1);
  auto r2 = g.softmax(g.matmul(a, b), 1);
  CHECK(r1->values == r2->values);
}

TEST_CASE("grad_check: linear map is near exact") {
  Rng rng(19);
  auto x = randt({5}, rng);
  std::vector<double> w = {0.5, -1.5, 2.0, 0.25, -0.75};
  auto report = grad_check<double>(
      [&](Graph<double>& g) { return g.sum(g.mul(x, g.constant({5}, w))); }, {x}, 1e-4, 1e-9);
  CHECK(report.pass);
  CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("grad_check: softmax cross entropy composite") {
  Rng rng(23);
  auto logits = randt({1, 6}, rng);
  auto w = randt({6, 6}, rng);
  auto report = grad_check<double>(
      [&](Graph<double>& g) {
        auto p = g.softmax(g.matmul(logits, w), 1);
        return g.scale(g.log(g.pick(p, 2)), -1.0);
      },
      {logits, w}, 1e-4, 1e-6);
  CHECK(report.pass);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("grad_check flags a corrupted backward rule") {
  Rng rng(29);
  auto x = randt({3}, rng);
  // custom op y = 2x whose registered backward wrongly claims dy/dx = 3
  auto report = grad_check<double>(
      [&](Graph<double>& g) {
        auto y = make_tensor<double>({3});
        for (int i = 0; i < 3; ++i) y->values[i] = 2.0 * x->values[i];
        y->requires_grad = true;
        g.track(y);
        g.record([x, y] {
          if (y->grad.empty()) return;
          auto& dx = x->grad_ref();
          for (int i = 0; i < 3; ++i) dx[i] += 3.0 * y->grad[i];
        });
        return g.sum(y);
      },
      {x}, 1e-4, 1e-6);
  CHECK_FALSE(report.pass);
}

TEST_CASE("dropout train/eval modes") {
  Rng rng(31);
  auto x = make_tensor<double>({1000}, std::vector<double>(1000, 1.0), true);
  Graph<double> g;
  auto eval_out = g.dropout(x, 0.3, false, nullptr);
  CHECK(eval_out.get() == x.get());  // identity in eval mode

  Rng drop_rng(42);
  auto train_out = g.dropout(x, 0.3, true, &drop_rng);
  double mean = 0;
  int zeros = 0;
  for (double v : train_out->values) {
    mean += v;
    if (v == 0.0) ++zeros;
    else CHECK(v == doctest::Approx(1.0 / 0.7));
  }
  mean /= 1000.0;
  CHECK(mean == doctest::Approx(1.0).epsilon(0.1));
  CHECK(zeros > 200);
  CHECK(zeros < 400);

  // gradient only flows through kept units
  g.backward(g.sum(train_out));
  for (int i = 0; i < 1000; ++i)
    CHECK(x->grad[i] == (train_out->values[i] == 0.0 ? 0.0 : doctest::Approx(1.0 / 0.7)));
}

TEST_CASE("randomized per-primitive gradient property (100 trials)") {
  Rng rng(101);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto a = randt({3, 4}, rng);
    auto b = randt({4, 2}, rng);
    auto c = randt({3, 4}, rng);
    auto bias = randt({4}, rng);
    auto pos = randt({3, 4}, rng, 0.5, 2.0);
    auto s = randt({1}, rng, 0.25, 1.5);
    auto table = randt({5, 3}, rng);
    std::vector<TensorPtr<double>> leaves = {a, b, c, bias, pos, s, table};
    auto report = grad_check<double>(
        [&](Graph<double>& g) {
          auto mm = g.matmul(a, b);                       // [3x2]
          auto nt = g.matmul_nt(a, c);                    // [3x3]
          auto ew = g.mul(g.add(a, c), g.sub(a, c));      // [3x4]
          auto biased = g.add_rowvec(ew, bias);           // [3x4]
          auto acts = g.add(g.sigmoid(biased), g.add(g.tanh(biased), g.relu(biased)));
          auto sm = g.softmax(g.scale(a, 1.7), 1);
          auto lg = g.log(g.clamp_min(pos, 1e-6));
          auto cat = g.concat({mm, g.slice_cols(acts, 0, 2)}, 0);  // [6x2]
          auto looked = g.lookup(table, {0, 4, 2, 4});
          auto mx = g.max_elem({a, c, g.scale(c, 0.5)});
          auto scaled = g.scale_by(mm, s);
          Rng wrng(1000 + trial);
          auto l1 = weighted_sum(g, nt, wrng);
          auto l2 = weighted_sum(g, acts, wrng);
          auto l3 = weighted_sum(g, sm, wrng);
          auto l4 = weighted_sum(g, lg, wrng);
          auto l5 = weighted_sum(g, cat, wrng);
          auto l6 = weighted_sum(g, looked, wrng);
          auto l7 = weighted_sum(g, mx, wrng);
          auto l8 = weighted_sum(g, scaled, wrng);
          auto total = g.add(l1, g.add(l2, g.add(l3, g.add(l4, g.add(l5, g.add(l6, g.add(l7, l8)))))));
          return g.add(total, g.mean(g.pick(a, 5)));
        },
        leaves, 1e-4, 1e-5);
    worst = std::max(worst, report.max_rel_err);
    if (!report.pass) {
      for (auto& row : report.leaves) MESSAGE(row.name, " err=", row.max_rel_err);
    }
    REQUIRE(report.pass);
  }
  MESSAGE("worst relative error over 100 trials: ", worst);
}

TEST_CASE("copy_mix scatter and gradient") {
  auto ghat = make_tensor<double>({6}, {0.1, 0.1, 0.1, 0.1, 0.1, 0.1}, true);
  auto c = make_tensor<double>({3}, {0.1, 0.2, 0.1}, true);
  Graph<double> g;
  auto f = g.copy_mix(ghat, c, {2, 2, 4});
  CHECK(f->values[2] == doctest::Approx(0.1 + 0.3));
  CHECK(f->values[4] == doctest::Approx(0.2));
  CHECK(f->values[0] == 0.1);

  auto report = grad_check<double>(
      [&](Graph<double>& gg) {
        Rng wrng(55);
        return weighted_sum(gg, gg.copy_mix(ghat, c, {2, 2, 4}), wrng);
      },
      {ghat, c}, 1e-4, 1e-8);
  CHECK(report.pass);
}

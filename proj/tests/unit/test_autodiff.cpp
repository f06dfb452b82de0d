#include <cmath>
#include <functional>
#include <vector>

#include "mlg/autodiff.hpp"
#include "mlg/error.hpp"
#include "support.hpp"

using namespace mlg;
using ad::Tape;
using ad::Var;

namespace {

struct Leaf {
  std::vector<double> values;
  int rows, cols;
};

using Builder = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

// Reduces a non-scalar output to a scalar with fixed random weights so every
// output entry contributes a distinct gradient.
Var probe(Tape<double>& t, Var out, std::uint64_t seed = 99) {
  Engine rng(seed);
  auto w = test::normal<double>(rng, std::size_t(t.rows(out)) * t.cols(out));
  return t.sum(t.mul(out, t.constant(w, t.rows(out), t.cols(out))));
}

double evaluate(const std::vector<Leaf>& leaves, const Builder& f) {
  Tape<double> t(false);
  std::vector<Var> vars;
  for (const auto& l : leaves) vars.push_back(t.constant(l.values, l.rows, l.cols));
  return t.scalar(probe(t, f(t, vars)));
}

// Central differences in double against the tape's analytic gradient.
void check_gradient(std::vector<Leaf> leaves, const Builder& f, double tol = 1e-6, double h = 1e-6) {
  Tape<double> t;
  std::vector<Var> vars;
  for (const auto& l : leaves) vars.push_back(t.input(l.values, l.rows, l.cols));
  const Var root = probe(t, f(t, vars));
  t.backward(root);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const auto g = t.grad(vars[li]);
    for (std::size_t i = 0; i < leaves[li].values.size(); ++i) {
      auto plus = leaves, minus = leaves;
      plus[li].values[i] += h;
      minus[li].values[i] -= h;
      const double fd = (evaluate(plus, f) - evaluate(minus, f)) / (2 * h);
      const double an = g.empty() ? 0.0 : g[i];
      INFO("leaf " << li << " entry " << i << " analytic " << an << " fd " << fd);
      CHECK(std::abs(an - fd) <= tol * std::max(1.0, std::abs(fd)));
    }
  }
}

Leaf rnd(Engine& rng, int r, int c, double scale = 1.0) { return {test::normal<double>(rng, std::size_t(r) * c, scale), r, c}; }

}  // namespace

TEST_CASE("matrix products") {
  Engine rng(1);
  check_gradient({rnd(rng, 3, 4), rnd(rng, 4, 5)}, [](auto& t, auto& v) { return t.matmul(v[0], v[1]); });
  check_gradient({rnd(rng, 3, 4), rnd(rng, 5, 4)}, [](auto& t, auto& v) { return t.matmul_nt(v[0], v[1]); });
  check_gradient({rnd(rng, 4, 3), rnd(rng, 4, 5)}, [](auto& t, auto& v) { return t.matmul_tn(v[0], v[1]); });
  check_gradient({rnd(rng, 3, 4)}, [](auto& t, auto& v) { return t.transpose(v[0]); });
  // The same leaf on both sides.
  check_gradient({rnd(rng, 3, 3)}, [](auto& t, auto& v) { return t.matmul(v[0], v[0]); });
}

TEST_CASE("elementwise and broadcast ops") {
  Engine rng(2);
  check_gradient({rnd(rng, 2, 3), rnd(rng, 2, 3)}, [](auto& t, auto& v) { return t.add(v[0], v[1]); });
  check_gradient({rnd(rng, 2, 3), rnd(rng, 2, 3)}, [](auto& t, auto& v) { return t.sub(v[0], v[1]); });
  check_gradient({rnd(rng, 2, 3), rnd(rng, 2, 3)}, [](auto& t, auto& v) { return t.mul(v[0], v[1]); });
  check_gradient({rnd(rng, 2, 3)}, [](auto& t, auto& v) { return t.scale(v[0], -2.5); });
  check_gradient({rnd(rng, 4, 3), rnd(rng, 1, 3)}, [](auto& t, auto& v) { return t.add_row_bias(v[0], v[1]); });
  check_gradient({rnd(rng, 4, 3), rnd(rng, 4, 1)}, [](auto& t, auto& v) { return t.add_col_bias(v[0], v[1]); });
  check_gradient({rnd(rng, 3, 3)}, [](auto& t, auto& v) { return t.tanh(v[0]); });
  // Keep every input away from the kink.
  Leaf r = rnd(rng, 3, 4);
  for (auto& x : r.values) x = (x >= 0 ? 0.1 : -0.1) + x;
  check_gradient({r}, [](auto& t, auto& v) { return t.relu(v[0]); });
}

TEST_CASE("structural ops") {
  Engine rng(3);
  const std::vector<int> ids{2, 0, 2, 1};
  check_gradient({rnd(rng, 3, 4)}, [&](auto& t, auto& v) { return t.gather_rows(v[0], ids); });
  check_gradient({rnd(rng, 5, 2)}, [](auto& t, auto& v) { return t.slice_rows(v[0], 1, 3); });
  check_gradient({rnd(rng, 2, 3), rnd(rng, 1, 3)}, [](auto& t, auto& v) {
    const Var parts[] = {v[1], v[0], v[1]};
    return t.concat_rows(parts);
  });
  check_gradient({rnd(rng, 4, 4)}, [](auto& t, auto& v) { return t.diag(v[0]); });
  check_gradient({rnd(rng, 3, 5)}, [](auto& t, auto& v) { return t.mean_cols(v[0]); });
  check_gradient({rnd(rng, 3, 5)}, [](auto& t, auto& v) { return t.sum(v[0]); });
}

TEST_CASE("im2col windows") {
  Engine rng(4);
  ad::ConvGeometry g{2, 5, 4, 3, 2, 1};
  check_gradient({rnd(rng, 2, 20)}, [g](auto& t, auto& v) { return t.im2col(v[0], g); });
  ad::ConvGeometry s1{3, 4, 4, 3, 1, 1};
  check_gradient({rnd(rng, 3, 16)}, [s1](auto& t, auto& v) { return t.im2col(v[0], s1); });
  check_gradient({rnd(rng, 6, 3)}, [](auto& t, auto& v) { return t.im2col_1d(v[0], 3, 4); });
}

TEST_CASE("im2col_1d zeroes rows outside the valid length") {
  Tape<double> t(false);
  const Var x = t.constant({1, 2, 3, 4}, 4, 1);
  const auto out = t.value(t.im2col_1d(x, 3, 3));
  // Row i holds x[i-1], x[i], x[i+1] with positions >= 3 treated as zero.
  const std::vector<double> expect{0, 1, 2, 1, 2, 3, 2, 3, 0, 3, 0, 0};
  REQUIRE(out.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(out[i] == expect[i]);
}

TEST_CASE("normalization and softmax family") {
  Engine rng(5);
  check_gradient({rnd(rng, 3, 4)}, [](auto& t, auto& v) { return t.l2_normalize_rows(v[0]); });
  check_gradient({rnd(rng, 3, 4, 3.0)}, [](auto& t, auto& v) { return t.softmax_rows(v[0]); });
  check_gradient({rnd(rng, 3, 4, 3.0)}, [](auto& t, auto& v) { return t.log_softmax_rows(v[0]); });
  check_gradient({rnd(rng, 3, 4), rnd(rng, 3, 4)}, [](auto& t, auto& v) { return t.row_dot(v[0], v[1]); });
  const std::vector<int> offsets{0, 2, 3, 6};
  check_gradient({rnd(rng, 6, 1, 2.0)}, [&](auto& t, auto& v) { return t.segment_logsumexp(v[0], offsets); });
}

TEST_CASE("l2_normalize_rows floors small norms at eps") {
  Tape<double> t;
  const Var x = t.input({0, 0, 3e-7, 4e-7, 3, 4}, 3, 2);
  const Var y = t.l2_normalize_rows(x, 1e-6);
  const auto v = t.value(y);
  CHECK(v[0] == 0);
  CHECK(v[1] == 0);
  CHECK(v[2] == doctest::Approx(0.3));
  CHECK(v[3] == doctest::Approx(0.4));
  CHECK(v[4] == doctest::Approx(0.6));
  CHECK(v[5] == doctest::Approx(0.8));
  t.backward(t.sum(y));
  const auto g = t.grad(x);
  CHECK(g[0] == doctest::Approx(1e6));  // pure scaling below the floor
  CHECK(std::isfinite(g[2]));

  Tape<double> strict;
  const Var z = strict.constant({0, 0}, 1, 2);
  CHECK_THROWS_AS(strict.l2_normalize_rows(z), ValidationError);
}

TEST_CASE("segment_logsumexp stays finite for large arguments") {
  Tape<double> t(false);
  const std::vector<int> off{0, 2};
  const Var x = t.constant({1e3, 1e3 - 1}, 2, 1);
  const double got = t.scalar(t.segment_logsumexp(x, off));
  CHECK(std::isfinite(got));
  CHECK(got == doctest::Approx(1e3 + std::log(1 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("parameter gradients accumulate over repeated use") {
  ad::Parameter<double> p("w", 2, 2);
  p.value = {1, 2, 3, 4};
  Tape<double> t;
  const Var w = t.param(p, 7);
  const Var w2 = t.param(p, 7);
  t.backward(t.sum(t.add(w, t.scale(w2, 2.0))));
  int calls = 0;
  t.for_each_param_grad([&](int slot, std::span<const double> g) {
    CHECK(slot == 7);
    for (double x : g) CHECK((x == 1.0 || x == 2.0));
    ++calls;
  });
  CHECK(calls == 2);
}

TEST_CASE("backward from seeds matches backward from a weighted root") {
  Engine rng(6);
  const Leaf a = rnd(rng, 3, 4);
  const auto seed = test::normal<double>(rng, 3);

  Tape<double> t1;
  const Var x1 = t1.input(a.values, 3, 4);
  const Var y1 = t1.mean_cols(t1.tanh(x1));
  std::vector<std::pair<Var, std::vector<double>>> seeds{{y1, seed}};
  t1.backward(seeds);

  Tape<double> t2;
  const Var x2 = t2.input(a.values, 3, 4);
  const Var y2 = t2.mean_cols(t2.tanh(x2));
  t2.backward(t2.sum(t2.mul(y2, t2.constant(seed, 3, 1))));

  const auto g1 = t1.grad(x1), g2 = t2.grad(x2);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-14));
}

TEST_CASE("float and double tapes agree") {
  Engine rng(7);
  const Leaf a = rnd(rng, 4, 6), b = rnd(rng, 6, 3);
  Tape<double> td(false);
  Tape<float> tf(false);
  const auto rd = td.value(td.log_softmax_rows(td.matmul(td.constant(a.values, 4, 6), td.constant(b.values, 6, 3))));
  std::vector<float> af(a.values.begin(), a.values.end()), bf(b.values.begin(), b.values.end());
  const auto rf = tf.value(tf.log_softmax_rows(tf.matmul(tf.constant(af, 4, 6), tf.constant(bf, 6, 3))));
  for (std::size_t i = 0; i < rd.size(); ++i) CHECK(rf[i] == doctest::Approx(rd[i]).epsilon(1e-5));
}

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "mlg/align/losses.hpp"
#include "mlg/error.hpp"

using namespace mlg;

namespace {

Matrix<double> mat(int r, int c, std::vector<double> v) { return Matrix<double>(r, c, std::move(v)); }

Matrix<double> randm(Engine& rng, int r, int c) { return mat(r, c, test::normal<double>(rng, std::size_t(r) * c)); }

Matrix<double> scaled_row(Matrix<double> m, int row, double s) {
  for (int j = 0; j < m.cols; ++j) m(row, j) *= s;
  return m;
}

}  // namespace

TEST_CASE("similarity matrix") {
  SUBCASE("identical unit vectors give all ones") {
    const auto v = mat(3, 2, {0.6, 0.8, 0.6, 0.8, 0.6, 0.8});
    for (double s : similarity_matrix(v, v).data) CHECK(s == doctest::Approx(1));
  }
  SUBCASE("orthogonal text row gives a zero row") {
    const auto v = mat(2, 3, {1, 0, 0, 0, 1, 0});
    const auto t = mat(1, 3, {0, 0, 1});
    for (double s : similarity_matrix(v, t).data) CHECK(s == 0);
  }
  SUBCASE("D=2 hand example") {
    const auto s = similarity_matrix(mat(2, 2, {1, 0, 0, 1}), mat(1, 2, {1, 0}));
    CHECK(s.rows == 1);
    CHECK(s(0, 0) == 1);
    CHECK(s(0, 1) == 0);
  }
  SUBCASE("zero vector is rejected") {
    CHECK_THROWS_AS(similarity_matrix(mat(1, 2, {0, 0}), mat(1, 2, {1, 0})), ValidationError);
  }
}

TEST_CASE("attention context") {
  Engine rng(1);
  const auto v = randm(rng, 4, 3);
  SUBCASE("uniform scores give the position mean") {
    const double s[] = {0.3, 0.3, 0.3, 0.3};
    const auto c = attend(v, s, 0.7);
    for (int d = 0; d < 3; ++d) CHECK(c[d] == doctest::Approx((v(0, d) + v(1, d) + v(2, d) + v(3, d)) / 4));
  }
  SUBCASE("small tau1 selects the argmax") {
    const double s[] = {0.1, 0.9, 0.2, 0.5};
    const auto c = attend(v, s, 1e-3);
    for (int d = 0; d < 3; ++d) CHECK(c[d] == doctest::Approx(v(1, d)));
  }
  SUBCASE("(ln 2, 0) at tau1 = 1 weights 2/3 and 1/3") {
    const auto v2 = mat(2, 1, {3, 6});
    const double s[] = {std::log(2.0), 0};
    CHECK(attend(v2, s, 1.0)[0] == doctest::Approx(2.0 / 3 * 3 + 1.0 / 3 * 6));
  }
}

TEST_CASE("match score") {
  const auto a = mat(1, 2, {1, 0});
  SUBCASE("N=1") { CHECK(match_score(mat(1, 2, {0.6, 0.8}), a, 0.5) == doctest::Approx(0.6 / 0.5)); }
  SUBCASE("N=2, both cosines 0") {
    CHECK(match_score(mat(2, 2, {0, 1, 1, 0}), mat(2, 2, {1, 0, 0, 1}), 0.3) == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("N=2, cosines (1, -1), tau2 = 1") {
    const double z = match_score(mat(2, 2, {1, 0, -1, 0}), mat(2, 2, {1, 0, 1, 0}), 1.0);
    CHECK(z == doctest::Approx(std::log(std::exp(1.0) + std::exp(-1.0))));
    CHECK(z == doctest::Approx(1.1269).epsilon(1e-4));
  }
  SUBCASE("stable form equals naive evaluation and survives large arguments") {
    Engine rng(2);
    const auto c = randm(rng, 5, 4), t = randm(rng, 5, 4);
    double naive = 0;
    for (int i = 0; i < 5; ++i) {
      double dot = 0, nc = 0, nt = 0;
      for (int d = 0; d < 4; ++d) {
        dot += c(i, d) * t(i, d);
        nc += c(i, d) * c(i, d);
        nt += t(i, d) * t(i, d);
      }
      naive += std::exp(dot / std::sqrt(nc * nt) / 0.2);
    }
    CHECK(std::abs(match_score(c, t, 0.2) - std::log(naive)) < 1e-6);
    const double big = match_score(mat(2, 2, {1, 0, 1, 0}), mat(2, 2, {1, 0, 1, 0}), 1e-3);
    CHECK(std::isfinite(big));
    CHECK(big == doctest::Approx(1e3 + std::log(2.0)));
  }
}

TEST_CASE("local contrastive loss closed forms") {
  Engine rng(3);
  SUBCASE("B=1 gives zero") {
    CHECK(local_contrastive_loss({randm(rng, 16, 8)}, {randm(rng, 3, 8)}, 0.25, 0.2, 0.1) == doctest::Approx(0).epsilon(1e-12));
  }
  SUBCASE("identical pairs give 2 ln B") {
    const auto v = randm(rng, 16, 8), t = randm(rng, 3, 8);
    for (int b : {2, 4, 8}) {
      std::vector<Matrix<double>> vb(b, v), tb(b, t);
      CHECK(local_contrastive_loss(vb, tb, 0.25, 0.2, 0.1) == doctest::Approx(2 * std::log(double(b))).epsilon(1e-9));
    }
  }
  SUBCASE("joint permutation leaves the loss unchanged") {
    std::vector<Matrix<double>> vb, tb;
    for (int i = 0; i < 4; ++i) {
      vb.push_back(randm(rng, 16, 8));
      tb.push_back(randm(rng, 1 + i % 3, 8));
    }
    const double base = local_contrastive_loss(vb, tb, 0.25, 0.2, 0.1);
    const std::vector<int> perm{2, 0, 3, 1};
    std::vector<Matrix<double>> vp, tp;
    for (int p : perm) {
      vp.push_back(vb[p]);
      tp.push_back(tb[p]);
    }
    CHECK(local_contrastive_loss(vp, tp, 0.25, 0.2, 0.1) == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("positive rescaling of one feature vector changes nothing") {
    std::vector<Matrix<double>> vb, tb;
    for (int i = 0; i < 3; ++i) {
      vb.push_back(randm(rng, 16, 8));
      tb.push_back(randm(rng, 2, 8));
    }
    const double base = local_contrastive_loss(vb, tb, 0.25, 0.2, 0.1);
    auto vs = vb;
    vs[1] = scaled_row(vs[1], 5, 7.5);
    auto ts = tb;
    ts[2] = scaled_row(ts[2], 1, 0.01);
    CHECK(local_contrastive_loss(vs, tb, 0.25, 0.2, 0.1) == doctest::Approx(base).epsilon(1e-12));
    CHECK(local_contrastive_loss(vb, ts, 0.25, 0.2, 0.1) == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("swapping in a non-matching text increases the loss") {
    // Well separated: each text's items are copies of distinct one-hot
    // directions present only in its own image.
    std::vector<Matrix<double>> vb, tb;
    for (int i = 0; i < 3; ++i) {
      Matrix<double> v(4, 8), t(2, 8);
      for (int p = 0; p < 4; ++p) v(p, (2 * i + p % 2)) = 1;
      t(0, 2 * i) = 1;
      t(1, 2 * i + 1) = 1;
      vb.push_back(v);
      tb.push_back(t);
    }
    const double base = local_contrastive_loss(vb, tb, 0.25, 0.2, 0.1);
    auto swapped = tb;
    swapped[0] = tb[1];
    CHECK(local_contrastive_loss(vb, swapped, 0.25, 0.2, 0.1) > base);
  }
}

TEST_CASE("global contrastive loss") {
  Engine rng(4);
  SUBCASE("B=1 gives zero") { CHECK(global_contrastive_loss(randm(rng, 1, 5), randm(rng, 1, 5), 0.1) == doctest::Approx(0)); }
  SUBCASE("diagonal 1, off-diagonal -1, tau3 = 1") {
    Matrix<double> s(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s(i, j) = i == j ? 1 : -1;
    const double e = std::exp(1.0);
    const double expect = 2 * std::log((e + 2 / e) / e);
    CHECK(contrastive_from_scores(s, 1.0) == doctest::Approx(expect));
    CHECK(expect == doctest::Approx(0.4791).epsilon(1e-4));
  }
  SUBCASE("scaling all features by 5 changes nothing") {
    auto v = randm(rng, 4, 6), t = randm(rng, 4, 6);
    const double base = global_contrastive_loss(v, t, 0.1);
    for (auto& x : v.data) x *= 5;
    for (auto& x : t.data) x *= 5;
    CHECK(global_contrastive_loss(v, t, 0.1) == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("zero vector is rejected") {
    Matrix<double> v(2, 3);
    CHECK_THROWS_AS(global_contrastive_loss(v, randm(rng, 2, 3), 0.1), ValidationError);
  }
  SUBCASE("swapping in a non-matching text increases the loss") {
    const auto v = mat(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    auto t = v;
    const double base = global_contrastive_loss(v, t, 0.1);
    t(0, 0) = 0;
    t(0, 1) = 1;
    CHECK(global_contrastive_loss(v, t, 0.1) > base);
  }
}

TEST_CASE("tape loss blocks agree with the reference functions") {
  Engine rng(5);
  std::vector<Matrix<double>> vb, tb;
  for (int i = 0; i < 3; ++i) {
    vb.push_back(randm(rng, 16, 8));
    tb.push_back(randm(rng, 1 + i, 8));
  }
  // Oracle: explicit loops over Eqs. built from attend/match_score.
  Matrix<double> z(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      const auto s = similarity_matrix(vb[i], tb[k]);
      Matrix<double> vn = vb[i];
      for (int p = 0; p < vn.rows; ++p) {
        double n = 0;
        for (int d = 0; d < 8; ++d) n += vn(p, d) * vn(p, d);
        for (int d = 0; d < 8; ++d) vn(p, d) /= std::sqrt(n);
      }
      Matrix<double> ctx(tb[k].rows, 8);
      for (int q = 0; q < tb[k].rows; ++q) {
        const auto c = attend(vn, std::span<const double>(&s.data[std::size_t(q) * 16], 16), 0.25);
        for (int d = 0; d < 8; ++d) ctx(q, d) = c[d];
      }
      z(i, k) = match_score(ctx, tb[k], 0.2);
    }
  CHECK(local_contrastive_loss(vb, tb, 0.25, 0.2, 0.1) == doctest::Approx(contrastive_from_scores(z, 0.1)).epsilon(1e-12));
}

TEST_CASE("total loss through the model") {
  const auto vocab = test::small_vocab();
  const auto model = test::small_model<double>(1, vocab);
  SUBCASE("B=1 gives zero for every term") {
    const auto items = test::small_items<double>(vocab, 2, {"red circle. blue box."});
    const auto r = evaluate_batch<double>(model, items, {true, true, true}, false);
    CHECK(std::abs(r.loss.total) < 1e-6);
  }
  SUBCASE("uniform batch gives 2 ln B per enabled term") {
    for (int b : {2, 4}) {
      auto items = test::small_items<double>(vocab, 3, {"red circle. blue box."});
      items.resize(b, items[0]);
      const auto r = evaluate_batch<double>(model, items, {true, true, true}, false);
      CHECK(r.loss.sw == doctest::Approx(2 * std::log(double(b))).epsilon(1e-9));
      CHECK(r.loss.ds == doctest::Approx(2 * std::log(double(b))).epsilon(1e-9));
      CHECK(r.loss.gr == doctest::Approx(2 * std::log(double(b))).epsilon(1e-9));
      if (b == 2) CHECK(r.loss.total == doctest::Approx(4.1589).epsilon(1e-4));
    }
  }
  SUBCASE("only GR: total equals the global loss on the model's features") {
    const auto items = test::small_items<double>(vocab, 4);
    const auto r = evaluate_batch<double>(model, items, {false, false, true}, false);
    CHECK(r.loss.sw == 0);
    CHECK(r.loss.ds == 0);
    Matrix<double> vg(3, 8), tr(3, 8);
    for (int i = 0; i < 3; ++i) {
      const auto f = project(encode_image<double>(items[i].image, model.vision), model.heads);
      const auto h = aggregate_hierarchy(encode_text(items[i].tok, model.text), items[i].tok);
      for (int d = 0; d < 8; ++d) {
        vg(i, d) = f.v_g[d];
        tr(i, d) = h.t_r[d];
      }
    }
    CHECK(r.loss.total == doctest::Approx(global_contrastive_loss(vg, tr, model.temps.gr())).epsilon(1e-10));
  }
  SUBCASE("joint permutation of the batch") {
    auto items = test::small_items<double>(vocab, 5);
    const double base = evaluate_batch<double>(model, items, {true, true, true}, false).loss.total;
    std::swap(items[0], items[2]);
    CHECK(evaluate_batch<double>(model, items, {true, true, true}, false).loss.total == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("thread count does not change results") {
    const auto items = test::small_items<double>(vocab, 6);
    const auto a = evaluate_batch<double>(model, items, {true, true, true}, true, 1);
    const auto b = evaluate_batch<double>(model, items, {true, true, true}, true, 3);
    CHECK(a.loss.total == b.loss.total);
    CHECK(a.grads == b.grads);
  }
  SUBCASE("disabled terms leave their private parameters without gradient") {
    const auto items = test::small_items<double>(vocab, 7);
    const auto params = model.parameters();
    auto grad_of = [&](const BatchResult<double>& r, const std::string& name) {
      for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i]->name == name) return r.grads[i];
      FAIL("no parameter " << name);
      return std::vector<double>{};
    };
    auto all_zero = [](const std::vector<double>& g) {
      return std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; });
    };
    const auto no_gr = evaluate_batch<double>(model, items, {true, true, false}, true);
    CHECK(all_zero(grad_of(no_gr, "proj.global.weight")));
    CHECK(all_zero(grad_of(no_gr, "proj.global.bias")));
    CHECK_FALSE(all_zero(grad_of(no_gr, "proj.shallow.weight")));
    const auto only_gr = evaluate_batch<double>(model, items, {false, false, true}, true);
    CHECK(all_zero(grad_of(only_gr, "proj.shallow.weight")));
    CHECK(all_zero(grad_of(only_gr, "proj.deep.bias")));
    CHECK_FALSE(all_zero(grad_of(only_gr, "proj.global.weight")));
  }
}

TEST_CASE("analytic gradients match central differences (double)") {
  const auto vocab = test::small_vocab();
  auto model = test::small_model<double>(11, vocab);
  const auto items = test::small_items<double>(vocab, 12);
  const auto r = evaluate_batch<double>(model, items, {true, true, true}, true);
  auto params = model.parameters();
  Engine pick(13);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    double num = 0, den = 0;
    for (int s = 0; s < 6; ++s) {
      const auto i = uniform_index(pick, params[pi]->size());
      double& w = params[pi]->value[i];
      const double orig = w, h = 1e-5;
      w = orig + h;
      const double fp = evaluate_batch<double>(model, items, {true, true, true}, false).loss.total;
      w = orig - h;
      const double fm = evaluate_batch<double>(model, items, {true, true, true}, false).loss.total;
      w = orig;
      const double fd = (fp - fm) / (2 * h);
      num += (r.grads[pi][i] - fd) * (r.grads[pi][i] - fd);
      den += fd * fd;
    }
    INFO(params[pi]->name);
    CHECK(std::sqrt(num) <= 1e-6 * std::max(std::sqrt(den), 1e-6));
  }
}

TEST_CASE("validation of temperatures and switches") {
  Temperatures t;
  t.tau2 = 0;
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = {};
  t.tau3_sw = -1.0;
  CHECK_THROWS_AS(t.validate(), ValidationError);
  CHECK(LossSwitches{true, false, true}.label() == "SW+GR");
}

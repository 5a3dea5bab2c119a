#include <doctest.h>

#include <cmath>
#include <random>

#include "ssml/error.hpp"
#include "ssml/loss.hpp"
#include "support.hpp"

using namespace ssml;
using ssml::testing::matrix_from;

namespace {

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

std::vector<double> unit_double(std::size_t dim, std::mt19937_64& rng) {
  return ssml::testing::random_unit(dim, rng);
}

// Central differences of dtl in the raw probe coordinates.
std::vector<double> numeric_grad(std::vector<double> z, const Dictionary& dict,
                                 const std::vector<Label>& pos,
                                 const std::vector<Label>& neg, double sigma) {
  const double h = 1e-4;
  std::vector<double> g(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double keep = z[k];
    z[k] = keep + h;
    const double up = dtl(z, dict, pos, neg, sigma).total;
    z[k] = keep - h;
    const double down = dtl(z, dict, pos, neg, sigma).total;
    z[k] = keep;
    g[k] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("dtl examples") {
  SUBCASE("perfect alignment") {
    const Dictionary dict(matrix_from({{1, 0}, {-1, 0}}));
    const std::vector<double> z{1, 0};
    const std::vector<Label> pos{0}, neg{1};
    const LossValue v = dtl(z, dict, pos, neg, 1.0);
    CHECK(v.total == 0.0);
    CHECK(v.grad_wrt_probe == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("orthogonal positive") {
    const Dictionary dict(matrix_from({{0, 1}}));
    const std::vector<double> z{1, 0};
    const std::vector<Label> pos{0};
    CHECK(dtl(z, dict, pos, {}, 0.2).total == doctest::Approx(1.0));
  }
  SUBCASE("mixed terms") {
    const Dictionary dict(matrix_from({{0, 1}, {0.6f, 0.8f}}));
    const std::vector<double> z{1, 0};
    const std::vector<Label> pos{0}, neg{1};
    const LossValue v = dtl(z, dict, pos, neg, 0.5);
    CHECK(v.total == doctest::Approx(2.28).epsilon(1e-6));
    CHECK(v.positive_term == doctest::Approx(1.0));
    CHECK(v.negative_term == doctest::Approx(2.56).epsilon(1e-6));
    // 2(0-1)[0,1] + 0.5 * 2(1.6)[0.6,0.8]
    CHECK(v.grad_wrt_probe[0] == doctest::Approx(0.96).epsilon(1e-6));
    CHECK(v.grad_wrt_probe[1] == doctest::Approx(-2.0 + 1.28).epsilon(1e-6));
  }
}

TEST_CASE("dtl errors") {
  const Dictionary dict(matrix_from({{1, 0}}));
  const std::vector<double> z{1, 0};
  const std::vector<Label> bad{3};
  try {
    dtl(z, dict, bad, {}, 0.2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIndexOutOfRange);
  }
  const std::vector<double> z3{1, 0, 0};
  CHECK_THROWS_AS(dtl(z3, dict, {}, {}, 0.2), Error);
  CHECK_THROWS_AS(dtl(z, dict, {}, {}, 0.0), Error);
  CHECK_THROWS_AS(dtl(z, dict, {}, {}, 1.5), Error);
}

TEST_CASE("general_triplet examples") {
  const std::vector<double> a{1, 0}, anti{-1, 0}, b{0, 1};
  CHECK(general_triplet(a, a, anti, 0.3).total == 0.0);
  CHECK(general_triplet(a, a, a, 0.3).total == doctest::Approx(0.3));
  const LossValue v = general_triplet(a, b, a, 0.5);
  CHECK(v.total == doctest::Approx(1.9142).epsilon(1e-4));
  // d/da |a - p| = (a - p) / |a - p|; the negative term has zero distance -> zero
  // subgradient there.
  CHECK(v.grad_wrt_probe[0] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(v.grad_wrt_probe[1] == doctest::Approx(-1 / std::sqrt(2.0)));
  const LossValue inactive = general_triplet(a, a, anti, 0.3);
  CHECK(inactive.grad_wrt_probe == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(general_triplet(a, a, a, -0.1), Error);
}

TEST_CASE("general_triplet gradient matches finite differences where active") {
  std::mt19937_64 rng(17);
  int checked = 0;
  for (int t = 0; t < 200 && checked < 50; ++t) {
    auto a = unit_double(6, rng);
    const auto p = unit_double(6, rng);
    const auto n = unit_double(6, rng);
    const LossValue v = general_triplet(a, p, n, 1.0);
    if (v.total < 1e-3) continue;
    ++checked;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double keep = a[k];
      a[k] = keep + 1e-5;
      const double up = general_triplet(a, p, n, 1.0).total;
      a[k] = keep - 1e-5;
      const double down = general_triplet(a, p, n, 1.0).total;
      a[k] = keep;
      CHECK(v.grad_wrt_probe[k] == doctest::Approx((up - down) / 2e-5).epsilon(1e-5));
    }
  }
  CHECK(checked == 50);
}

TEST_CASE("dictionary_triplet sums every positive/negative pair") {
  std::mt19937_64 rng(3);
  const FeatureMatrix rows = ssml::testing::clustered_rows(8, 4, 2, 0.5, rng);
  const Dictionary dict(rows);
  const auto z = unit_double(4, rng);
  const std::vector<Label> pos{0, 2}, neg{5, 6, 7};
  const LossValue v = dictionary_triplet(z, dict, pos, neg, 0.3);
  double total = 0;
  std::vector<double> grad(4, 0.0);
  for (const Label p : pos) {
    for (const Label n : neg) {
      const LossValue one =
          general_triplet(z, to_double(dict.row(p)), to_double(dict.row(n)), 0.3);
      total += one.total;
      for (std::size_t k = 0; k < 4; ++k) grad[k] += one.grad_wrt_probe[k];
    }
  }
  CHECK(v.total == doctest::Approx(total).epsilon(1e-12));
  for (std::size_t k = 0; k < 4; ++k) CHECK(v.grad_wrt_probe[k] == doctest::Approx(grad[k]));
}

TEST_CASE("dtl gradient matches central differences on 100 fixtures") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> n_pos(0, 5), n_neg(1, 10);
  std::uniform_real_distribution<double> sig(0.05, 1.0);
  for (int fixture = 0; fixture < 100; ++fixture) {
    const std::size_t dim = fixture % 2 == 0 ? 4 : 16;
    const int np = n_pos(rng), nn = n_neg(rng);
    const auto rows = ssml::testing::clustered_rows(np + nn, dim, 3, 0.6, rng);
    const Dictionary dict(rows);
    std::vector<Label> pos, neg;
    for (int j = 0; j < np; ++j) pos.push_back(j);
    for (int j = np; j < np + nn; ++j) neg.push_back(j);
    const auto z = unit_double(dim, rng);
    const double sigma = sig(rng);
    const LossValue v = dtl(z, dict, pos, neg, sigma);
    const auto num = numeric_grad(z, dict, pos, neg, sigma);
    for (std::size_t k = 0; k < dim; ++k) {
      const double scale = std::max({std::abs(v.grad_wrt_probe[k]), std::abs(num[k]), 1e-8});
      REQUIRE(std::abs(v.grad_wrt_probe[k] - num[k]) / scale < 1e-4);
    }
  }
}

TEST_CASE("dtl properties") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const auto rows = ssml::testing::clustered_rows(6, 5, 2, 0.5, rng);
    const Dictionary dict(rows);
    const std::vector<Label> pos{0, 1}, neg{2, 3, 4};
    const auto z = unit_double(5, rng);
    const LossValue a = dtl(z, dict, pos, neg, 0.2);
    const LossValue b = dtl(z, dict, pos, neg, 0.7);
    CHECK(a.total >= 0.0);
    CHECK(a.positive_term == b.positive_term);
    CHECK(b.total ==
          doctest::Approx(a.positive_term + (0.7 / 0.2) * (a.total - a.positive_term))
              .epsilon(1e-9));

    // slerp the positive entry toward z: the positive term must not grow
    const auto entry = to_double(dict.row(0));
    double previous = dtl(z, dict, std::vector<Label>{0}, {}, 0.2).positive_term;
    const double cos_zp = std::clamp(dot(std::span<const double>(z), dict.row(0)), -1.0, 1.0);
    const double omega = std::acos(cos_zp);
    if (omega < 1e-6 || std::abs(omega - M_PI) < 1e-6) continue;
    for (int step = 1; step <= 10; ++step) {
      const double u = step / 10.0;
      const double wa = std::sin((1 - u) * omega) / std::sin(omega);
      const double wb = std::sin(u * omega) / std::sin(omega);
      FeatureMatrix moved(1, 5);
      for (std::size_t k = 0; k < 5; ++k) moved.row(0)[k] = float(wa * entry[k] + wb * z[k]);
      const Dictionary near(normalize_rows(moved));
      const double now = dtl(z, near, std::vector<Label>{0}, {}, 0.2).positive_term;
      CHECK(now <= previous + 1e-6);
      previous = now;
    }
  }
}

TEST_CASE("dtl is zero only at exact alignment") {
  const Dictionary dict(matrix_from({{1, 0}, {-1, 0}, {0.99f, 0.14106736f}}));
  const std::vector<double> z{1, 0};
  CHECK(dtl(z, dict, std::vector<Label>{0}, std::vector<Label>{1}, 0.3).total == 0.0);
  CHECK(dtl(z, dict, std::vector<Label>{2}, std::vector<Label>{1}, 0.3).total > 0.0);
}

TEST_CASE("batch_dtl") {
  std::mt19937_64 rng(9);
  const Dictionary dict(ssml::testing::clustered_rows(12, 6, 3, 0.4, rng));
  std::vector<std::vector<double>> probes;
  std::vector<MiningResult> minings(3);
  for (int b = 0; b < 3; ++b) {
    probes.push_back(unit_double(6, rng));
    minings[b].probe = b;
    minings[b].p_pos = {static_cast<Label>(b), static_cast<Label>(b + 3)};
    minings[b].n_hard = {9, 10, 11};
  }
  std::vector<BatchItem> batch;
  for (int b = 0; b < 3; ++b) batch.push_back({probes[b], &minings[b]});

  const BatchLoss one = batch_dtl(std::span(batch).first(1), dict, 0.2);
  const LossValue single = dtl(probes[0], dict, minings[0].p_pos, minings[0].n_hard, 0.2);
  CHECK(one.total == single.total);
  CHECK(one.per_probe[0].grad_wrt_probe == single.grad_wrt_probe);

  const BatchLoss all = batch_dtl(batch, dict, 0.2, 3);
  double oracle = 0;
  for (int b = 0; b < 3; ++b) {
    oracle += dtl(probes[b], dict, minings[b].p_pos, minings[b].n_hard, 0.2).total;
  }
  CHECK(std::abs(all.total - oracle) < 1e-6);
  CHECK(all.per_probe.size() == 3);
  CHECK(all.total == batch_dtl(batch, dict, 0.2, 1).total);

  std::vector<BatchItem> copies(5, batch[1]);
  const BatchLoss five = batch_dtl(copies, dict, 0.2);
  CHECK(five.total == doctest::Approx(5 * batch_dtl(std::span(batch).subspan(1, 1), dict, 0.2).total));

  CHECK_THROWS_AS(batch_dtl({}, dict, 0.2), Error);
}

#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "gtnn/curriculum.hpp"
#include "gtnn/random.hpp"

using namespace gtnn;

namespace {

// W0 by bisection on w * e^w = x over [-1, max(1, x)].
double bisect_w0(double x) {
  double lo = -1.0, hi = std::max(1.0, x);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid * std::exp(mid) < x) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Golden-section search for the minimizer of the confidence objective on
// (0, e]. For negative beta the objective falls without bound as sigma grows,
// so the closed form is the local minimum left of the W_{-1} maximum at sigma > e.
double argmin_sigma(double loss, double tau, double delta, double alpha, double lambda) {
  double a = 1e-9, b = std::exp(1.0);
  const double r = (std::sqrt(5.0) - 1) / 2;
  for (int i = 0; i < 300; ++i) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    if (confidence_objective(c, loss, tau, delta, alpha, lambda) <
        confidence_objective(d, loss, tau, delta, alpha, lambda)) {
      b = d;
    } else {
      a = c;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("lambert_w0 reference values") {
  CHECK(lambert_w0(0.0) == 0.0);
  CHECK(lambert_w0(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lambert_w0(1.0) == doctest::Approx(0.5671432904097838).epsilon(1e-14));
  CHECK(lambert_w0(-1.0 / std::exp(1.0)) == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(lambert_w0(-1.0 / std::exp(1.0) - 1e-13) == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK_THROWS_AS(lambert_w0(-0.5), CurriculumError);
  CHECK(lambert_w0(0.5) == doctest::Approx(0.35173371124919583).epsilon(1e-14));
}

TEST_CASE("lambert_w0 agrees with bisection and satisfies w e^w = x") {
  Rng rng(3);
  std::vector<double> xs = {-0.36, -0.3, -0.2, -0.1, -1e-6, 1e-8, 0.25, 2.0, 10.0, 1e3, 1e6};
  for (int i = 0; i < 200; ++i) xs.push_back(rng.uniform(-1.0 / std::exp(1.0) + 1e-6, 50.0));
  for (double x : xs) {
    const double w = lambert_w0(x);
    CHECK(w >= -1.0);
    CHECK(w * std::exp(w) == doctest::Approx(x).epsilon(1e-12).scale(1e-12));
    CHECK(w == doctest::Approx(bisect_w0(x)).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("trend_delta") {
  CHECK(trend_delta(std::deque<double>{}) == 0.0);
  CHECK(trend_delta(std::deque<double>{0.7}) == 0.0);
  CHECK(trend_delta(std::deque<double>{0.4, 0.4, 0.4}) == 0.0);
  CHECK(trend_delta(std::deque<double>{1.0, 2.0, 1.5}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(trend_delta(std::deque<double>{1.0, 2.0, 3.0}) == 1.0);
  CHECK(trend_delta(std::deque<double>{3.0, 2.0, 1.0}) == -1.0);

  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    std::deque<double> w;
    for (int j = 0; j < 6; ++j) w.push_back(rng.uniform(0, 3));
    const double d = trend_delta(w);
    CHECK(d >= -1.0);
    CHECK(d <= 1.0);
    std::deque<double> rev(w.rbegin(), w.rend());
    CHECK(trend_delta(rev) == doctest::Approx(-d).epsilon(1e-12).scale(1e-15));
  }
}

TEST_CASE("loss history keeps the last k entries") {
  LossHistory h(3);
  for (int i = 0; i < 5; ++i) h.push(i, 0.1 * i);
  CHECK(h.size() == 3);
  CHECK(h.losses().front() == doctest::Approx(0.2));
  CHECK(h.iterations() == std::deque<long>{2, 3, 4});
  CHECK_THROWS(LossHistory(0));
}

TEST_CASE("sigma_star closed form") {
  // beta = 1 -> exp(-W(0.5))
  CHECK(sigma_star(1.5, 0.5, 0.0, 0.3, 1.0) == doctest::Approx(0.70346742249839165).epsilon(1e-14));
  CHECK(sigma_star(0.5, 0.5, 0.0, 0.3, 1.0) == 1.0);
  // beta far below -2/e is clamped to the branch point: sigma = e.
  CHECK(sigma_star(0.0, 10.0, 0.0, 0.0, 1.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-7));

  SUBCASE("minimizes the objective where the clamp is inactive") {
    Rng rng(77);
    int checked = 0;
    while (checked < 200) {
      const double loss = rng.uniform(0, 3), tau = rng.uniform(0, 2), delta = rng.uniform(-1, 1);
      const double alpha = rng.uniform(0, 1), lambda = rng.uniform(0.2, 3);
      const double beta = (loss - (tau - alpha * delta)) / lambda;
      if (beta <= -2 / std::exp(1.0) + 0.05) continue;
      ++checked;
      const double s = sigma_star(loss, tau, delta, alpha, lambda);
      CHECK(s == doctest::Approx(argmin_sigma(loss, tau, delta, alpha, lambda)).epsilon(1e-3));
      const double f = confidence_objective(s, loss, tau, delta, alpha, lambda);
      for (double eps : {1e-3, -1e-3}) {
        CHECK(f <= confidence_objective(s * (1 + eps), loss, tau, delta, alpha, lambda) + 1e-12);
      }
    }
  }

  SUBCASE("monotone in loss and bounded") {
    double prev = std::numeric_limits<double>::infinity();
    for (double loss = 0.0; loss < 5.0; loss += 0.05) {
      const double s = sigma_star(loss, 1.0, 0.2, 0.3, 1.0);
      CHECK(s > 0.0);
      CHECK(s <= std::exp(1.0) + 1e-9);
      CHECK(s <= prev + 1e-15);
      prev = s;
    }
  }

  SUBCASE("a rising loss trend lowers confidence relative to a falling one") {
    const double rising = sigma_star(0.8, 0.7, 1.0, 0.3, 1.0);
    const double flat = sigma_star(0.8, 0.7, 0.0, 0.3, 1.0);
    const double falling = sigma_star(0.8, 0.7, -1.0, 0.3, 1.0);
    CHECK(rising < flat);
    CHECK(flat < falling);
  }

  SUBCASE("alpha = 0 makes the trend irrelevant") {
    for (double delta : {-1.0, -0.3, 0.0, 0.6, 1.0}) {
      CHECK(sigma_star(0.9, 0.6, delta, 0.0, 1.0) == sigma_star(0.9, 0.6, 0.0, 0.3, 1.0));
    }
  }
}

TEST_CASE("settings validation and modes") {
  CurriculumSettings s;
  CHECK_NOTHROW(s.validate());
  s.alpha = 1.5;
  CHECK_THROWS_AS(s.validate(), CurriculumError);
  s.alpha = 0.3;
  s.lambda = 0.0;
  CHECK_THROWS_AS(s.validate(), CurriculumError);
  s.lambda = 1.0;
  s.k = 0;
  CHECK_THROWS_AS(s.validate(), CurriculumError);
  s.k = 5;
  s.ema_gamma = 1.0;
  CHECK_THROWS_AS(s.validate(), CurriculumError);

  CHECK(curriculum_mode_from_string("trend_sl") == CurriculumMode::kTrendSl);
  CHECK(curriculum_mode_from_string("sl") == CurriculumMode::kSl);
  CHECK(curriculum_mode_from_string("none") == CurriculumMode::kNone);
  CHECK_THROWS(curriculum_mode_from_string("trend"));
  CHECK(std::string(to_string(CurriculumMode::kTrendSl)) == "trend_sl");

  CurriculumSettings sl;
  sl.mode = CurriculumMode::kSl;
  CHECK(sl.effective_alpha() == 0.0);
}

TEST_CASE("tau is an EMA seeded by the first batch mean") {
  CurriculumState st({});
  CHECK(!st.tau_initialized());
  CHECK(st.update_tau({0.6, 0.8}) == doctest::Approx(0.7));
  CHECK(st.update_tau({0.5}) == doctest::Approx(0.68).epsilon(1e-15));
}

TEST_CASE("mode none weights everything by 1") {
  CurriculumSettings s;
  s.mode = CurriculumMode::kNone;
  CurriculumState st(s);
  const auto w = st.weight_batch({1, 2, 3}, {0.1, 2.0, 0.7}, 0);
  CHECK(w.sigma == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("SL equals Trend-SL with alpha = 0 on an identical loss stream") {
  CurriculumSettings sl;
  sl.mode = CurriculumMode::kSl;
  sl.alpha = 0.7;
  CurriculumSettings trend;
  trend.alpha = 0.0;
  CurriculumState a(sl), b(trend);
  Rng rng(5);
  for (long it = 0; it < 20; ++it) {
    std::vector<std::uint64_t> ids;
    std::vector<double> losses;
    for (int i = 0; i < 8; ++i) {
      ids.push_back(rng.index(12));
      losses.push_back(rng.uniform(0, 2));
    }
    const auto wa = a.weight_batch(ids, losses, it);
    const auto wb = b.weight_batch(ids, losses, it);
    CHECK(wa.sigma == wb.sigma);
    for (std::size_t i = 0; i < ids.size(); ++i) CHECK(wa.labels[i].label == wb.labels[i].label);
  }
}

TEST_CASE("two samples with the same current loss differ only by their trend") {
  CurriculumState st({});
  // Sample 1 has a rising history, sample 2 a falling one; both end at 0.8.
  const std::vector<std::pair<double, double>> stream = {{0.2, 1.4}, {0.5, 1.1}, {0.8, 0.8}};
  BatchWeights last;
  for (long it = 0; it < 3; ++it) last = st.weight_batch({1, 2}, {stream[it].first, stream[it].second}, it);
  CHECK(last.delta[0] == 1.0);
  CHECK(last.delta[1] == -1.0);
  CHECK(last.sigma[0] < last.sigma[1]);
  CHECK(last.labels[0].threshold_used < last.labels[1].threshold_used);
}

TEST_CASE("scripted trace matches an independent step-by-step recomputation") {
  CurriculumSettings s;
  s.alpha = 0.4;
  s.lambda = 0.8;
  s.k = 3;
  s.ema_gamma = 0.9;
  CurriculumState st(s);

  const std::vector<std::vector<double>> batches = {{0.9, 0.4, 1.3},
                                                    {0.8, 0.5, 1.1},
                                                    {0.6, 0.7, 1.2},
                                                    {0.3, 0.9, 1.0},
                                                    {0.2, 1.2, 1.05}};
  std::map<int, std::vector<double>> hist;
  double tau = 0.0;
  for (long it = 0; it < 5; ++it) {
    const auto& l = batches[it];
    const double mean = std::accumulate(l.begin(), l.end(), 0.0) / 3.0;
    tau = it == 0 ? mean : 0.9 * tau + 0.1 * mean;
    const auto w = st.weight_batch({0, 1, 2}, l, it);
    CHECK(st.tau() == doctest::Approx(tau).epsilon(1e-15));
    for (int i = 0; i < 3; ++i) {
      auto& h = hist[i];
      h.push_back(l[i]);
      if (h.size() > 3) h.erase(h.begin());
      double num = 0.0, den = 0.0;
      for (std::size_t j = 1; j < h.size(); ++j) {
        num += h[j] - h[j - 1];
        den += std::abs(h[j] - h[j - 1]);
      }
      const double delta = den > 0 ? num / den : 0.0;
      const double thr = tau - 0.4 * delta;
      const double beta = std::max(-2 / std::exp(1.0), (l[i] - thr) / 0.8);
      const double sigma = std::exp(-bisect_w0(beta / 2));
      INFO("iteration " << it << " sample " << i);
      CHECK(w.delta[i] == doctest::Approx(delta).epsilon(1e-15));
      CHECK(w.sigma[i] == doctest::Approx(sigma).epsilon(1e-9));
      CHECK(w.labels[i].threshold_used == doctest::Approx(thr).epsilon(1e-15));
      CHECK((w.labels[i].label == Difficulty::kEasy) == (l[i] <= thr));
    }
  }
  CHECK(st.history(1)->losses() == std::deque<double>{0.7, 0.9, 1.2});
  CHECK(st.history(99) == nullptr);
}

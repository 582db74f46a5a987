#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "engage/ensemble.hpp"
#include "engage/error.hpp"

namespace engage::ensemble {

namespace {

constexpr double kMinError = 1e-10;

int argmax(const std::array<double, kNumClasses>& v) {
  int best = 0;
  for (int k = 1; k < kNumClasses; ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

void check_labels(const Matrix& x, const Labels& y) {
  if (x.rows() != y.size()) throw DataError("feature rows and labels differ in length");
  for (int v : y)
    if (v < 0 || v >= kNumClasses) throw DataError("label outside {0,1,2,3}");
}

struct StumpFit {
  Stump stump;
  double error = std::numeric_limits<double>::infinity();
};

// Exhaustive search over features and midpoints between distinct values.
StumpFit best_stump(const Matrix& x, const Labels& y, const std::vector<double>& w,
                    const std::vector<std::vector<std::size_t>>& sorted) {
  std::array<double, kNumClasses> total{};
  for (std::size_t i = 0; i < y.size(); ++i) total[y[i]] += w[i];
  const double total_w = std::accumulate(total.begin(), total.end(), 0.0);

  StumpFit best;
  {
    const int c = argmax(total);
    best.stump = {0, std::numeric_limits<double>::infinity(), c, c};
    best.error = total_w - total[c];
  }

  for (std::size_t f = 0; f < x.cols(); ++f) {
    const auto& order = sorted[f];
    std::array<double, kNumClasses> left{};
    for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
      const std::size_t i = order[pos];
      left[y[i]] += w[i];
      const double a = x(i, f);
      const double b = x(order[pos + 1], f);
      if (!(a < b)) continue;
      std::array<double, kNumClasses> right;
      for (int k = 0; k < kNumClasses; ++k) right[k] = total[k] - left[k];
      const int lc = argmax(left);
      const int rc = argmax(right);
      const double err = total_w - left[lc] - right[rc];
      if (err < best.error - 1e-15) {
        double thr = a + (b - a) / 2.0;
        if (!(thr < b)) thr = a;
        best.stump = {f, thr, lc, rc};
        best.error = err;
      }
    }
  }
  best.error = std::max(0.0, best.error / total_w);
  return best;
}

}  // namespace

AdaBoostModel train_adaboost(const Matrix& x, const Labels& y, int rounds, std::uint64_t seed) {
  check_labels(x, y);
  if (rounds < 1) throw DataError("AdaBoost needs at least one round");
  if (y.empty()) throw DataError("AdaBoost needs training rows");
  if (std::all_of(y.begin(), y.end(), [&](int v) { return v == y.front(); }))
    throw DataError("AdaBoost needs at least two classes in the training labels");

  const std::size_t n = y.size();
  std::vector<std::vector<std::size_t>> sorted(x.cols(), std::vector<std::size_t>(n));
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), 0);
    std::stable_sort(sorted[f].begin(), sorted[f].end(),
                     [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
  }

  AdaBoostModel model;
  model.n_features = x.cols();
  model.seed = seed;
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  const double k_minus_1 = static_cast<double>(kNumClasses - 1);

  for (int m = 0; m < rounds; ++m) {
    const StumpFit fit = best_stump(x, y, w, sorted);
    const double err = std::max(fit.error, kMinError);
    if (err >= 1.0 - 1.0 / kNumClasses) {
      // No stump beats chance; keep a single zero-weight stump if nothing else exists.
      if (model.stumps.empty()) {
        model.stumps.push_back(fit.stump);
        model.stump_weights.push_back(0.0);
      }
      break;
    }
    const double alpha = std::log((1.0 - err) / err) + std::log(k_minus_1);
    model.stumps.push_back(fit.stump);
    model.stump_weights.push_back(alpha);
    if (fit.error <= kMinError) break;

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fit.stump.predict(x.row(i)) != y[i]) w[i] *= std::exp(alpha);
      sum += w[i];
    }
    for (double& v : w) v /= sum;
  }
  return model;
}

ProbabilityVector predict_proba(const AdaBoostModel& m, std::span<const double> x) {
  if (x.size() != m.n_features)
    throw DataError("AdaBoost expects " + std::to_string(m.n_features) + " features, got " +
                    std::to_string(x.size()));
  std::array<double, kNumClasses> votes{};
  double total = 0.0;
  for (std::size_t s = 0; s < m.stumps.size(); ++s) {
    votes[m.stumps[s].predict(x)] += m.stump_weights[s];
    total += m.stump_weights[s];
  }
  if (!(total > 0.0)) return ProbabilityVector();
  std::array<double, kNumClasses> p;
  double mx = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kNumClasses; ++k) {
    p[k] = kNumClasses * votes[k] / total;
    mx = std::max(mx, p[k]);
  }
  double z = 0.0;
  for (double& v : p) z += (v = std::exp(v - mx));
  for (double& v : p) v /= z;
  return ProbabilityVector(p);
}

}  // namespace engage::ensemble

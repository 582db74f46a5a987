#include <algorithm>
#include <cmath>
#include <numeric>

#include "engage/ensemble.hpp"
#include "engage/error.hpp"
#include "engage/parallel.hpp"
#include "engage/random.hpp"

namespace engage::ensemble {

namespace {

using Hist = std::array<double, kNumClasses>;

double gini_mass(const Hist& h, double n) {
  if (n <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : h) s += c * c;
  return n - s / n;  // n * (1 - sum p^2)
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const Labels& y, int max_features, int min_leaf, std::uint64_t seed)
      : x_(x), y_(y), max_features_(max_features), min_leaf_(min_leaf), rng_(seed) {}

  DecisionTree build(std::vector<std::size_t> samples) {
    DecisionTree tree;
    struct Pending {
      int node;
      std::vector<std::size_t> samples;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, std::move(samples)});
    while (!stack.empty()) {
      Pending cur = std::move(stack.back());
      stack.pop_back();
      Hist h{};
      for (std::size_t i : cur.samples) h[y_[i]] += 1.0;
      tree.nodes[cur.node].histogram = h;

      const double n = static_cast<double>(cur.samples.size());
      const bool pure = std::count_if(h.begin(), h.end(), [](double c) { return c > 0.0; }) <= 1;
      if (pure || cur.samples.size() < 2 * static_cast<std::size_t>(min_leaf_)) continue;

      const Split split = find_split(cur.samples, h);
      if (split.feature < 0 || !(split.impurity < gini_mass(h, n) - 1e-12)) continue;

      std::vector<std::size_t> left, right;
      for (std::size_t i : cur.samples)
        (x_(i, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(i);

      const int li = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      const int ri = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      auto& node = tree.nodes[cur.node];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = li;
      node.right = ri;
      stack.push_back({ri, std::move(right)});
      stack.push_back({li, std::move(left)});
    }
    return tree;
  }

 private:
  Split find_split(const std::vector<std::size_t>& samples, const Hist& total) {
    const std::size_t d = x_.cols();
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    const std::size_t draw = std::min<std::size_t>(d, static_cast<std::size_t>(max_features_));
    for (std::size_t k = 0; k < draw; ++k) std::swap(features[k], features[k + rng_.index(d - k)]);

    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(samples);
    const std::size_t n = samples.size();
    const auto min_leaf = static_cast<std::size_t>(min_leaf_);
    for (std::size_t k = 0; k < draw; ++k) {
      const std::size_t f = features[k];
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
      Hist left{};
      for (std::size_t pos = 0; pos + 1 < n; ++pos) {
        left[y_[order[pos]]] += 1.0;
        const double a = x_(order[pos], f);
        const double b = x_(order[pos + 1], f);
        const std::size_t nl = pos + 1;
        if (!(a < b) || nl < min_leaf || n - nl < min_leaf) continue;
        Hist right;
        for (int c = 0; c < kNumClasses; ++c) right[c] = total[c] - left[c];
        const double imp = gini_mass(left, static_cast<double>(nl)) + gini_mass(right, static_cast<double>(n - nl));
        if (imp < best.impurity - 1e-12) {
          double thr = a + (b - a) / 2.0;
          if (!(thr < b)) thr = a;
          best = {static_cast<int>(f), thr, imp};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const Labels& y_;
  int max_features_;
  int min_leaf_;
  Rng rng_;
};

int resolve_max_features(int requested, std::size_t d) {
  if (requested > 0) return std::min<int>(requested, static_cast<int>(d));
  return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
}

}  // namespace

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  const TreeNode* node = &nodes.front();
  while (node->feature >= 0)
    node = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] <= node->threshold
                                               ? node->left
                                               : node->right)];
  return *node;
}

DecisionTree train_decision_tree(const Matrix& x, const Labels& y, std::span<const std::size_t> samples,
                                 int max_features, int min_leaf, std::uint64_t seed) {
  if (samples.empty()) throw DataError("decision tree needs at least one sample");
  TreeBuilder builder(x, y, resolve_max_features(max_features, x.cols()), std::max(1, min_leaf), seed);
  return builder.build({samples.begin(), samples.end()});
}

RandomForestModel train_random_forest(const Matrix& x, const Labels& y, const RandomForestParams& params,
                                      std::uint64_t seed, std::size_t workers) {
  if (x.rows() == 0 || y.empty()) throw DataError("random forest needs training rows");
  if (x.rows() != y.size()) throw DataError("feature rows and labels differ in length");
  if (params.n_trees < 1) throw ConfigError("random forest needs at least one tree");
  for (int v : y)
    if (v < 0 || v >= kNumClasses) throw DataError("label outside {0,1,2,3}");

  RandomForestModel model;
  model.n_features = x.cols();
  model.seed = seed;
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  const std::size_t n = x.rows();

  parallel_for(model.trees.size(), workers, [&](std::size_t t) {
    Rng rng(derive_seed(seed, 2 * t));
    std::vector<std::size_t> samples(n);
    if (params.bootstrap) {
      for (auto& s : samples) s = rng.index(n);
    } else {
      std::iota(samples.begin(), samples.end(), 0);
    }
    model.trees[t] = train_decision_tree(x, y, samples, params.max_features, params.min_leaf,
                                         derive_seed(seed, 2 * t + 1));
  });
  return model;
}

ProbabilityVector predict_proba(const RandomForestModel& m, std::span<const double> x) {
  if (x.size() != m.n_features)
    throw DataError("random forest expects " + std::to_string(m.n_features) + " features, got " +
                    std::to_string(x.size()));
  std::array<double, kNumClasses> p{};
  for (const auto& tree : m.trees) {
    const auto& h = tree.leaf_for(x).histogram;
    const double n = std::accumulate(h.begin(), h.end(), 0.0);
    for (int k = 0; k < kNumClasses; ++k) p[k] += h[k] / n;
  }
  const double z = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= z;
  return ProbabilityVector(p);
}

}  // namespace engage::ensemble

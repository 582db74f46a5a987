#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "engage/datamodel.hpp"

namespace engage::ensemble {

/// Dense row-major feature matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  Matrix select_rows(std::span<const std::size_t> idx) const;
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Horizontal concatenation [a | b]; row counts must match.
Matrix concat_columns(const Matrix& a, const Matrix& b);

using Labels = std::vector<int>;

std::vector<int> select(const Labels& y, std::span<const std::size_t> idx);

/// Splits [0, n) into k folds, stratified by label, from a seeded shuffle.
/// Fold sizes differ by at most one.
std::vector<std::vector<std::size_t>> stratified_folds(const Labels& y, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// AdaBoost (SAMME over depth-1 stumps)

/// x[feature] <= threshold votes left_class, otherwise right_class.
struct Stump {
  std::size_t feature = 0;
  double threshold = 0.0;
  int left_class = 0;
  int right_class = 0;

  int predict(std::span<const double> x) const { return x[feature] <= threshold ? left_class : right_class; }
};

struct AdaBoostModel {
  std::size_t n_features = 0;
  std::vector<Stump> stumps;
  std::vector<double> stump_weights;
  std::uint64_t seed = 0;
};

/// Throws DataError for fewer than two classes, size mismatch or rounds < 1.
/// The stump search is exhaustive and deterministic; `seed` is recorded only.
AdaBoostModel train_adaboost(const Matrix& x, const Labels& y, int rounds, std::uint64_t seed = 0);

/// softmax(4 * v), v the alpha-weighted vote share of each class.
ProbabilityVector predict_proba(const AdaBoostModel& m, std::span<const double> x);

// ---------------------------------------------------------------------------
// Random forest

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<double, kNumClasses> histogram{};
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  const TreeNode& leaf_for(std::span<const double> x) const;
};

struct RandomForestParams {
  int n_trees = 200;
  int min_leaf = 2;
  int max_features = 0;  // 0 selects floor(sqrt(d))
  bool bootstrap = true;
};

struct RandomForestModel {
  std::size_t n_features = 0;
  std::vector<DecisionTree> trees;
  std::uint64_t seed = 0;
};

/// CART tree with Gini splits over `max_features` randomly drawn features per
/// node; `samples` may contain repeats (bootstrap).
DecisionTree train_decision_tree(const Matrix& x, const Labels& y, std::span<const std::size_t> samples,
                                 int max_features, int min_leaf, std::uint64_t seed);

/// Tree t uses an RNG stream derived from (seed, t) so the result does not
/// depend on `workers`.
RandomForestModel train_random_forest(const Matrix& x, const Labels& y, const RandomForestParams& params,
                                      std::uint64_t seed, std::size_t workers = 1);

ProbabilityVector predict_proba(const RandomForestModel& m, std::span<const double> x);

// ---------------------------------------------------------------------------
// Multinomial logistic regression

struct LogisticParams {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-3;
};

struct LogisticModel {
  Eigen::MatrixXd weights;  // kNumClasses x n_features
  Eigen::VectorXd bias;     // kNumClasses

  std::size_t n_features() const { return static_cast<std::size_t>(weights.cols()); }
};

/// Full-batch gradient descent on mean cross-entropy + (l2/2)|W|^2, from zero.
LogisticModel train_logistic(const Matrix& x, const Labels& y, const LogisticParams& params);

ProbabilityVector predict_proba(const LogisticModel& m, std::span<const double> x);

// ---------------------------------------------------------------------------
// Stacked late fusion

struct EnsembleParams {
  int adaboost_rounds = 100;
  RandomForestParams forest;
  LogisticParams meta;
  int stack_folds = 5;

  void validate() const;
};

struct FusedModel {
  AdaBoostModel visual;
  RandomForestModel physio;
  LogisticModel meta;
  nlohmann::json config;  // effective pipeline configuration snapshot
  std::uint64_t seed = 0;
  int stack_folds = 0;
};

/// Out-of-fold base probabilities (stack_folds stratified folds) train the
/// meta model on the 8-dim concatenation [P_visual, P_physio]; the base
/// models are then refit on all rows.
FusedModel train_stacked(const Matrix& visual_x, const Matrix& physio_x, const Labels& y,
                         const EnsembleParams& params, std::uint64_t seed, std::size_t workers = 1);

/// Meta-classifier input for one sample.
std::array<double, 2 * kNumClasses> meta_features(const FusedModel& m, std::span<const double> visual_x,
                                                  std::span<const double> physio_x);

struct Prediction {
  EngagementLabel label{0};
  ProbabilityVector proba;
};

/// argmax of the fused distribution; ties go to the lower class.
Prediction predict_engagement(const FusedModel& m, std::span<const double> visual_x,
                              std::span<const double> physio_x);

/// Random forest on [visual | physio]; rejects anything but 19 columns.
RandomForestModel train_early_fusion(const Matrix& fused_x, const Labels& y, const RandomForestParams& params,
                                     std::uint64_t seed, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Model artifact

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const FusedModel& m);
FusedModel fused_model_from_json(const nlohmann::json& j);
void save_model(const FusedModel& m, const std::string& path);
FusedModel load_model(const std::string& path);

}  // namespace engage::ensemble

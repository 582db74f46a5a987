#include <algorithm>

#include "engage/ensemble.hpp"
#include "engage/error.hpp"
#include "engage/parallel.hpp"
#include "engage/physio.hpp"
#include "engage/random.hpp"
#include "engage/visual.hpp"

namespace engage::ensemble {

void EnsembleParams::validate() const {
  if (adaboost_rounds < 1) throw ConfigError("adaboost_rounds must be >= 1");
  if (forest.n_trees < 1) throw ConfigError("rf_trees must be >= 1");
  if (forest.min_leaf < 1) throw ConfigError("rf_min_leaf must be >= 1");
  if (forest.max_features < 0) throw ConfigError("rf_max_features must be >= 0");
  if (!(meta.learning_rate > 0.0)) throw ConfigError("meta_learning_rate must be positive");
  if (meta.epochs < 1) throw ConfigError("meta_epochs must be >= 1");
  if (!(meta.l2 >= 0.0)) throw ConfigError("meta_l2 must be >= 0");
  if (stack_folds < 2) throw ConfigError("stack_folds must be >= 2");
}

namespace {

void put_probs(Matrix& z, std::size_t row, std::size_t offset, const ProbabilityVector& p) {
  for (int k = 0; k < kNumClasses; ++k) z(row, offset + static_cast<std::size_t>(k)) = p[static_cast<std::size_t>(k)];
}

}  // namespace

FusedModel train_stacked(const Matrix& visual_x, const Matrix& physio_x, const Labels& y,
                         const EnsembleParams& params, std::uint64_t seed, std::size_t workers) {
  params.validate();
  if (visual_x.rows() != y.size() || physio_x.rows() != y.size())
    throw DataError("visual rows, physio rows and labels must be aligned");
  const auto k = static_cast<std::size_t>(params.stack_folds);
  if (y.size() < k)
    throw DataError(std::to_string(y.size()) + " rows are fewer than the " + std::to_string(k) +
                    " stacking folds");

  const auto folds = stratified_folds(y, k, derive_seed(seed, 0xF01D));
  Matrix oof(y.size(), 2 * kNumClasses);

  parallel_for(k, workers, [&](std::size_t f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    std::sort(train_idx.begin(), train_idx.end());
    const Labels y_train = select(y, train_idx);
    const AdaBoostModel ab =
        train_adaboost(visual_x.select_rows(train_idx), y_train, params.adaboost_rounds, seed);
    const RandomForestModel rf =
        train_random_forest(physio_x.select_rows(train_idx), y_train, params.forest, derive_seed(seed, 100 + f));
    for (std::size_t i : folds[f]) {
      put_probs(oof, i, 0, predict_proba(ab, visual_x.row(i)));
      put_probs(oof, i, kNumClasses, predict_proba(rf, physio_x.row(i)));
    }
  });

  FusedModel model;
  model.seed = seed;
  model.stack_folds = params.stack_folds;
  model.meta = train_logistic(oof, y, params.meta);
  model.visual = train_adaboost(visual_x, y, params.adaboost_rounds, seed);
  model.physio = train_random_forest(physio_x, y, params.forest, seed, workers);
  return model;
}

std::array<double, 2 * kNumClasses> meta_features(const FusedModel& m, std::span<const double> visual_x,
                                                  std::span<const double> physio_x) {
  const ProbabilityVector pv = predict_proba(m.visual, visual_x);
  const ProbabilityVector pp = predict_proba(m.physio, physio_x);
  std::array<double, 2 * kNumClasses> z;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    z[c] = pv[c];
    z[kNumClasses + c] = pp[c];
  }
  return z;
}

Prediction predict_engagement(const FusedModel& m, std::span<const double> visual_x,
                              std::span<const double> physio_x) {
  const auto z = meta_features(m, visual_x, physio_x);
  const ProbabilityVector p = predict_proba(m.meta, z);
  return {EngagementLabel(p.argmax()), p};
}

RandomForestModel train_early_fusion(const Matrix& fused_x, const Labels& y, const RandomForestParams& params,
                                     std::uint64_t seed, std::size_t workers) {
  constexpr std::size_t kFusedDim = visual::kVisualDim + physio::kPhysioDim;
  if (fused_x.cols() != kFusedDim)
    throw DataError("early fusion expects " + std::to_string(kFusedDim) + " columns, got " +
                    std::to_string(fused_x.cols()));
  return train_random_forest(fused_x, y, params, seed, workers);
}

}  // namespace engage::ensemble

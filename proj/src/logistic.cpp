#include <cmath>

#include "engage/ensemble.hpp"
#include "engage/error.hpp"

namespace engage::ensemble {

namespace {

// Row-wise softmax, in place.
void softmax_rows(Eigen::MatrixXd& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

}  // namespace

LogisticModel train_logistic(const Matrix& x, const Labels& y, const LogisticParams& params) {
  if (x.rows() == 0 || x.rows() != y.size()) throw DataError("logistic regression needs aligned rows");
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto d = static_cast<Eigen::Index>(x.cols());

  Eigen::MatrixXd xm(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c) xm(r, c) = x(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, kNumClasses);
  for (Eigen::Index r = 0; r < n; ++r) {
    const int label = y[static_cast<std::size_t>(r)];
    if (label < 0 || label >= kNumClasses) throw DataError("label outside {0,1,2,3}");
    onehot(r, label) = 1.0;
  }

  LogisticModel m;
  m.weights = Eigen::MatrixXd::Zero(kNumClasses, d);
  m.bias = Eigen::VectorXd::Zero(kNumClasses);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    Eigen::MatrixXd probs = xm * m.weights.transpose();
    probs.rowwise() += m.bias.transpose();
    softmax_rows(probs);
    const Eigen::MatrixXd diff = probs - onehot;
    const Eigen::MatrixXd grad_w = inv_n * (diff.transpose() * xm) + params.l2 * m.weights;
    const Eigen::VectorXd grad_b = inv_n * diff.colwise().sum().transpose();
    m.weights -= params.learning_rate * grad_w;
    m.bias -= params.learning_rate * grad_b;
  }
  return m;
}

ProbabilityVector predict_proba(const LogisticModel& m, std::span<const double> x) {
  if (x.size() != m.n_features())
    throw DataError("logistic model expects " + std::to_string(m.n_features()) + " features, got " +
                    std::to_string(x.size()));
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd logits = m.weights * xv + m.bias;
  logits.array() -= logits.maxCoeff();
  logits = logits.array().exp().matrix();
  logits /= logits.sum();
  std::array<double, kNumClasses> p;
  for (int k = 0; k < kNumClasses; ++k) p[k] = logits(k);
  return ProbabilityVector(p);
}

}  // namespace engage::ensemble

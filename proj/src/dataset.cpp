#include <algorithm>

#include "engage/ensemble.hpp"
#include "engage/error.hpp"
#include "engage/random.hpp"

namespace engage::ensemble {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw DataError("ragged feature rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols_);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix concat_columns(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DataError("cannot concatenate matrices with different row counts");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

std::vector<int> select(const Labels& y, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(y[i]);
  return out;
}

std::vector<std::vector<std::size_t>> stratified_folds(const Labels& y, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("need at least 2 folds");
  if (y.size() < k)
    throw DataError(std::to_string(y.size()) + " rows cannot fill " + std::to_string(k) + " folds");
  std::vector<std::size_t> order;
  order.reserve(y.size());
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) members.push_back(i);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.index(i)]);
    order.insert(order.end(), members.begin(), members.end());
  }
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

}  // namespace engage::ensemble

#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

#include "engage/ensemble.hpp"
#include "engage/error.hpp"

namespace engage::ensemble {

using nlohmann::json;

namespace {

json adaboost_to_json(const AdaBoostModel& m) {
  json stumps = json::array();
  for (const auto& s : m.stumps)
    stumps.push_back({{"feature", s.feature},
                      {"threshold", s.threshold},
                      {"left_class", s.left_class},
                      {"right_class", s.right_class}});
  return {{"n_features", m.n_features}, {"seed", m.seed}, {"stumps", stumps}, {"stump_weights", m.stump_weights}};
}

AdaBoostModel adaboost_from_json(const json& j) {
  AdaBoostModel m;
  m.n_features = j.at("n_features").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("stumps")) {
    Stump st;
    st.feature = s.at("feature").get<std::size_t>();
    // JSON has no infinity; a constant stump's threshold is stored as null.
    st.threshold = s.at("threshold").is_null() ? std::numeric_limits<double>::infinity()
                                               : s.at("threshold").get<double>();
    st.left_class = s.at("left_class").get<int>();
    st.right_class = s.at("right_class").get<int>();
    if (st.feature >= m.n_features) throw DataError("stump feature index out of range");
    m.stumps.push_back(st);
  }
  m.stump_weights = j.at("stump_weights").get<std::vector<double>>();
  if (m.stumps.empty() || m.stumps.size() != m.stump_weights.size())
    throw DataError("AdaBoost model needs matching, non-empty stumps and weights");
  return m;
}

json forest_to_json(const RandomForestModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      if (n.feature < 0)
        nodes.push_back({{"hist", n.histogram}});
      else
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                         {"hist", n.histogram}});
    }
    trees.push_back(std::move(nodes));
  }
  return {{"n_features", m.n_features}, {"seed", m.seed}, {"trees", trees}};
}

RandomForestModel forest_from_json(const json& j) {
  RandomForestModel m;
  m.n_features = j.at("n_features").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& jt : j.at("trees")) {
    DecisionTree t;
    for (const auto& jn : jt) {
      TreeNode n;
      n.histogram = jn.at("hist").get<std::array<double, kNumClasses>>();
      if (jn.contains("feature")) {
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
      }
      t.nodes.push_back(n);
    }
    const auto count = static_cast<int>(t.nodes.size());
    for (const auto& n : t.nodes)
      if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count ||
                             static_cast<std::size_t>(n.feature) >= m.n_features))
        throw DataError("malformed decision tree in model artifact");
    if (t.nodes.empty()) throw DataError("empty decision tree in model artifact");
    m.trees.push_back(std::move(t));
  }
  if (m.trees.empty()) throw DataError("random forest model has no trees");
  return m;
}

json logistic_to_json(const LogisticModel& m) {
  json w = json::array();
  for (Eigen::Index r = 0; r < m.weights.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.weights.cols()));
    for (Eigen::Index c = 0; c < m.weights.cols(); ++c) row[static_cast<std::size_t>(c)] = m.weights(r, c);
    w.push_back(row);
  }
  std::vector<double> b(m.bias.data(), m.bias.data() + m.bias.size());
  return {{"weights", w}, {"bias", b}};
}

LogisticModel logistic_from_json(const json& j) {
  const auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
  const auto bias = j.at("bias").get<std::vector<double>>();
  if (rows.size() != kNumClasses || bias.size() != kNumClasses)
    throw DataError("logistic model must have 4 classes");
  LogisticModel m;
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  m.weights.resize(kNumClasses, d);
  m.bias.resize(kNumClasses);
  for (int r = 0; r < kNumClasses; ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != d) throw DataError("ragged logistic weights");
    for (Eigen::Index c = 0; c < d; ++c) m.weights(r, c) = rows[r][static_cast<std::size_t>(c)];
    m.bias(r) = bias[r];
  }
  if (!m.weights.allFinite() || !m.bias.allFinite()) throw DataError("non-finite logistic parameters");
  return m;
}

}  // namespace

json to_json(const FusedModel& m) {
  json stumps_safe = adaboost_to_json(m.visual);
  for (auto& s : stumps_safe["stumps"])
    if (!std::isfinite(s["threshold"].get<double>())) s["threshold"] = nullptr;
  return {{"format", "engage-fused-model"},
          {"format_version", kModelFormatVersion},
          {"seed", m.seed},
          {"stack_folds", m.stack_folds},
          {"config", m.config},
          {"visual", stumps_safe},
          {"physio", forest_to_json(m.physio)},
          {"meta", logistic_to_json(m.meta)}};
}

FusedModel fused_model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "engage-fused-model") throw DataError("not a fused model artifact");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw DataError("unsupported model format version " + std::to_string(version));
    FusedModel m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.stack_folds = j.at("stack_folds").get<int>();
    m.config = j.at("config");
    m.visual = adaboost_from_json(j.at("visual"));
    m.physio = forest_from_json(j.at("physio"));
    m.meta = logistic_from_json(j.at("meta"));
    if (m.meta.n_features() != 2 * kNumClasses) throw DataError("meta model input dimension must be 8");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model artifact: ") + e.what());
  }
}

void save_model(const FusedModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << to_json(m).dump(1) << "\n";
}

FusedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw DataError(path + ": malformed JSON: " + e.what());
  }
  return fused_model_from_json(j);
}

}  // namespace engage::ensemble

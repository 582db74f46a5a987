#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "engage/error.hpp"
#include "engage/pipeline.hpp"

namespace engage::pipeline {

namespace {

constexpr std::string_view kConfigPrefix = "# config: ";
constexpr std::size_t kNumCols = 1 + visual::kVisualDim + physio::kPhysioDim + 2;

std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& s, std::size_t row, std::string_view column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw DataError("feature store row " + std::to_string(row) + ": bad number '" + s + "' in column " +
                    std::string(column));
  return v;
}

std::vector<std::string> header() {
  std::vector<std::string> h{"video_id"};
  for (auto n : visual::visual_feature_names()) h.emplace_back(n);
  for (auto n : physio::physio_feature_names()) h.emplace_back(n);
  h.emplace_back("engagement");
  h.emplace_back("status");
  return h;
}

}  // namespace

std::size_t FeatureStore::ok_count() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.ok(); }));
}

std::string serialize_feature_store(const FeatureStore& store) {
  std::string out;
  out += kConfigPrefix;
  out += store.config.is_null() ? "{}" : store.config.dump();
  out += '\n';
  const auto h = header();
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i) out += ',';
    out += h[i];
  }
  out += '\n';
  for (const auto& r : store.rows) {
    out += csv::quote(r.video_id);
    for (double v : r.visual) {
      out += ',';
      if (r.ok()) out += format_double(v);
    }
    for (double v : r.physio) {
      out += ',';
      if (r.ok()) out += format_double(v);
    }
    out += ',';
    if (r.label) out += std::to_string(r.label->value());
    out += ',';
    out += r.ok() ? "ok" : csv::quote("error: " + r.error);
    out += '\n';
  }
  return out;
}

FeatureStore parse_feature_store(std::string_view text) {
  FeatureStore store;
  bool have_header = false;
  std::size_t row_no = 0;
  const auto expected = header();
  for (const auto& line : csv::lines(text)) {
    ++row_no;
    if (line.empty()) continue;
    if (line.starts_with('#')) {
      if (line.starts_with(kConfigPrefix)) {
        try {
          store.config = nlohmann::json::parse(line.substr(kConfigPrefix.size()));
        } catch (const nlohmann::json::parse_error& e) {
          throw DataError("feature store: malformed config line: " + std::string(e.what()));
        }
      }
      continue;
    }
    auto cells = csv::split_row(line);
    if (!have_header) {
      if (cells != expected) throw DataError("feature store: unexpected header");
      have_header = true;
      continue;
    }
    if (cells.size() != kNumCols)
      throw DataError("feature store row " + std::to_string(row_no) + ": expected " + std::to_string(kNumCols) +
                      " columns, got " + std::to_string(cells.size()));
    FeatureRow r;
    r.video_id = cells[0];
    if (r.video_id.empty()) throw DataError("feature store row " + std::to_string(row_no) + ": empty video_id");
    const std::string& label = cells[kNumCols - 2];
    if (!label.empty()) {
      int v = -1;
      const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), v);
      if (ec != std::errc{} || ptr != label.data() + label.size() || v < 0 || v >= kNumClasses)
        throw DataError("feature store row " + std::to_string(row_no) + ": label '" + label + "' outside 0..3");
      r.label = EngagementLabel(v);
    }
    const std::string& status = cells[kNumCols - 1];
    if (status == "ok") {
      for (std::size_t i = 0; i < visual::kVisualDim; ++i)
        r.visual[i] = parse_double(cells[1 + i], row_no, expected[1 + i]);
      for (std::size_t i = 0; i < physio::kPhysioDim; ++i)
        r.physio[i] = parse_double(cells[1 + visual::kVisualDim + i], row_no, expected[1 + visual::kVisualDim + i]);
    } else if (status.starts_with("error: ")) {
      r.error = status.substr(7);
      if (r.error.empty()) r.error = "unknown";
    } else {
      throw DataError("feature store row " + std::to_string(row_no) + ": bad status '" + status + "'");
    }
    store.rows.push_back(std::move(r));
  }
  if (!have_header) throw DataError("feature store: missing header");
  std::sort(store.rows.begin(), store.rows.end(),
            [](const auto& a, const auto& b) { return a.video_id < b.video_id; });
  for (std::size_t i = 1; i < store.rows.size(); ++i)
    if (store.rows[i].video_id == store.rows[i - 1].video_id)
      throw DataError("feature store: duplicate video_id '" + store.rows[i].video_id + "'");
  return store;
}

void save_feature_store(const FeatureStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << serialize_feature_store(store);
  if (!out) throw DataError("write failed: " + path);
}

FeatureStore load_feature_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_feature_store(ss.str());
}

}  // namespace engage::pipeline

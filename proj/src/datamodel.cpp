#include "engage/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "engage/error.hpp"

namespace engage {

using nlohmann::json;

EngagementLabel::EngagementLabel(int level) : level_(level) {
  if (level < 0 || level >= kNumClasses)
    throw DataError("engagement label " + std::to_string(level) + " outside {0,1,2,3}");
}

ProbabilityVector::ProbabilityVector() : p_{0.25, 0.25, 0.25, 0.25} {}

ProbabilityVector::ProbabilityVector(const std::array<double, kNumClasses>& p) : p_(p) {
  double sum = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw DataError("probability component must be finite and non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("probabilities do not sum to 1");
}

int ProbabilityVector::argmax() const noexcept {
  int best = 0;
  for (int k = 1; k < kNumClasses; ++k)
    if (p_[k] > p_[best]) best = k;
  return best;
}

namespace {

std::string frame_tag(std::size_t pos, std::size_t index) {
  return "frame " + std::to_string(index) + " (entry " + std::to_string(pos) + ")";
}

double finite_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw DataError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
  return v;
}

}  // namespace

void validate_video_record(const VideoRecord& rec) {
  if (!(rec.fps > 0.0) || !std::isfinite(rec.fps)) throw DataError("fps must be positive");
  if (rec.width <= 0 || rec.height <= 0) throw DataError("image dimensions must be positive");
  if (rec.frames.empty()) throw DataError("record has no frames");
  if (rec.trace.samples.size() != rec.frames.size())
    throw DataError("trace length " + std::to_string(rec.trace.samples.size()) +
                    " != frame count " + std::to_string(rec.frames.size()));
  for (std::size_t k = 0; k < rec.frames.size(); ++k) {
    const auto& f = rec.frames[k];
    if (k > 0 && f.frame_index <= rec.frames[k - 1].frame_index)
      throw DataError(frame_tag(k, f.frame_index) + ": frame index not strictly increasing");
    if (f.image_width <= 0 || f.image_height <= 0)
      throw DataError(frame_tag(k, f.frame_index) + ": image dimensions must be positive");
    for (const auto& p : f.points)
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw DataError(frame_tag(k, f.frame_index) + ": non-finite landmark coordinate");
    const auto& s = rec.trace.samples[k];
    for (double c : {s.r, s.g, s.b})
      if (!(c >= 0.0 && c <= 255.0))
        throw DataError(frame_tag(k, f.frame_index) + ": ROI colour outside [0, 255]");
  }
}

VideoRecord parse_video_record(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("interchange document must be a JSON object");

  auto require = [&](const char* key) -> const json& {
    auto it = doc.find(key);
    if (it == doc.end()) throw DataError(std::string("missing field '") + key + "'");
    return *it;
  };

  VideoRecord rec;
  const json& id = require("video_id");
  if (!id.is_string()) throw DataError("video_id must be a string");
  rec.video_id = id.get<std::string>();
  rec.fps = finite_number(require("fps"), "fps");
  const json& w = require("width");
  const json& h = require("height");
  if (!w.is_number_integer() || !h.is_number_integer())
    throw DataError("width/height must be integers");
  rec.width = w.get<int>();
  rec.height = h.get<int>();
  if (auto it = doc.find("engagement"); it != doc.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw DataError("engagement must be an integer");
    rec.label = EngagementLabel(it->get<int>());
  }

  const json& frames = require("frames");
  if (!frames.is_array()) throw DataError("frames must be an array");
  rec.frames.reserve(frames.size());
  rec.trace.fps = rec.fps;
  rec.trace.samples.reserve(frames.size());

  for (std::size_t k = 0; k < frames.size(); ++k) {
    const json& jf = frames[k];
    if (!jf.is_object()) throw DataError("entry " + std::to_string(k) + ": frame must be an object");
    auto it_i = jf.find("i");
    if (it_i == jf.end() || !it_i->is_number_integer() || it_i->get<long long>() < 0)
      throw DataError("entry " + std::to_string(k) + ": missing or negative frame index 'i'");
    LandmarkFrame f;
    f.frame_index = it_i->get<std::size_t>();
    const std::string tag = frame_tag(k, f.frame_index);
    f.image_width = rec.width;
    f.image_height = rec.height;
    if (auto it_t = jf.find("t"); it_t != jf.end())
      f.timestamp_s = finite_number(*it_t, tag + " timestamp");
    else
      f.timestamp_s = static_cast<double>(f.frame_index) / rec.fps;

    auto it_l = jf.find("landmarks");
    if (it_l == jf.end() || !it_l->is_array()) throw DataError(tag + ": missing landmarks");
    if (it_l->size() != kNumLandmarks)
      throw DataError(tag + ": expected 68 landmarks, got " + std::to_string(it_l->size()));
    for (std::size_t p = 0; p < kNumLandmarks; ++p) {
      const json& pt = (*it_l)[p];
      if (!pt.is_array() || pt.size() != 2)
        throw DataError(tag + ": landmark " + std::to_string(p) + " must be [x, y]");
      f.points[p] = {finite_number(pt[0], tag + " landmark " + std::to_string(p)),
                     finite_number(pt[1], tag + " landmark " + std::to_string(p))};
    }

    auto it_c = jf.find("roi_rgb");
    if (it_c == jf.end() || !it_c->is_array() || it_c->size() != 3)
      throw DataError(tag + ": roi_rgb must be [r, g, b]");
    Rgb c{finite_number((*it_c)[0], tag + " roi_rgb"), finite_number((*it_c)[1], tag + " roi_rgb"),
          finite_number((*it_c)[2], tag + " roi_rgb")};
    rec.frames.push_back(f);
    rec.trace.samples.push_back(c);
  }

  validate_video_record(rec);
  return rec;
}

std::string serialize_video_record(const VideoRecord& rec) {
  json doc;
  doc["video_id"] = rec.video_id;
  doc["fps"] = rec.fps;
  doc["width"] = rec.width;
  doc["height"] = rec.height;
  if (rec.label) doc["engagement"] = rec.label->value();
  json frames = json::array();
  for (std::size_t k = 0; k < rec.frames.size(); ++k) {
    const auto& f = rec.frames[k];
    json jf;
    jf["i"] = f.frame_index;
    if (f.timestamp_s != static_cast<double>(f.frame_index) / rec.fps) jf["t"] = f.timestamp_s;
    json pts = json::array();
    for (const auto& p : f.points) pts.push_back({p.x, p.y});
    jf["landmarks"] = std::move(pts);
    const auto& c = rec.trace.samples[k];
    jf["roi_rgb"] = {c.r, c.g, c.b};
    frames.push_back(std::move(jf));
  }
  doc["frames"] = std::move(frames);
  return doc.dump();
}

VideoRecord load_video_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_video_record(ss.str());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_video_record(const VideoRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << serialize_video_record(rec);
}

std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  const auto rows = csv::lines(text);
  if (rows.empty()) throw DataError("manifest is empty (missing header)");
  std::string_view header_line = rows.front();
  if (header_line.starts_with("\xEF\xBB\xBF")) header_line.remove_prefix(3);
  const auto header = csv::split_row(header_line);
  auto column = [&](const char* name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(std::string("manifest missing column '") + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_id = column("video_id");
  const std::size_t c_path = column("path");
  const std::size_t c_label = column("engagement");

  std::vector<ManifestEntry> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    const auto cells = csv::split_row(rows[r]);
    const std::string where = "manifest row " + std::to_string(r + 1);
    if (cells.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " columns");
    ManifestEntry e;
    e.video_id = cells[c_id];
    e.path = cells[c_path];
    if (e.video_id.empty() || e.path.empty()) throw DataError(where + ": empty video_id or path");
    const std::string& lab = cells[c_label];
    if (!lab.empty()) {
      int v = 0;
      std::size_t used = 0;
      try {
        v = std::stoi(lab, &used);
      } catch (const std::exception&) {
        throw DataError(where + ": engagement '" + lab + "' is not an integer");
      }
      if (used != lab.size()) throw DataError(where + ": engagement '" + lab + "' is not an integer");
      try {
        e.label = EngagementLabel(v);
      } catch (const DataError& err) {
        throw DataError(where + ": " + err.what());
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string serialize_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out = "video_id,path,engagement\n";
  for (const auto& e : entries) {
    out += csv::quote(e.video_id) + "," + csv::quote(e.path) + ",";
    if (e.label) out += std::to_string(e.label->value());
    out += "\n";
  }
  return out;
}

}  // namespace engage

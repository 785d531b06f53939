#include "pingsim/segment_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pingsim/error.hpp"

namespace pingsim {

using nlohmann::json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::Config, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void check_version(const json& j, int expected, const char* what) {
  if (!j.contains("version")) fail(ErrorCode::Config, std::string(what) + ": missing version field");
  const int v = j.at("version").get<int>();
  if (v != expected)
    fail(ErrorCode::Config, std::string(what) + ": unsupported version " + std::to_string(v));
}

}  // namespace

json segment_to_json(const Segment& seg) {
  json frames = json::array();
  for (const GameState& s : seg.frames) {
    json pose = json::array();
    for (const Vec3& p : s.pose_joints) pose.push_back(vec_json(p));
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rot.push_back(s.paddle.rotation(r, c));
    frames.push_back({{"t", s.timestep},
                      {"pose", pose},
                      {"paddle", {{"rotation", rot}, {"translation", vec_json(s.paddle.translation)}}},
                      {"ball", vec_json(s.ball)}});
  }
  json ball = json::array();
  for (const Vec3& p : seg.post_hit_ball) ball.push_back(vec_json(p));
  return {{"version", kSegmentSchemaVersion},
          {"id", seg.id},
          {"hit_index", seg.hit_index},
          {"frames", frames},
          {"post_hit_ball", ball},
          {"truth_params", {{"a1", seg.truth_params.a1}, {"a2", seg.truth_params.a2}, {"b", seg.truth_params.b}}},
          {"strike_point", {{"x", seg.strike_point.x}, {"z", seg.strike_point.z}}},
          {"bounce_y", seg.bounce_y},
          {"fit_residual", seg.fit_residual}};
}

Segment segment_from_json(const json& j) {
  check_version(j, kSegmentSchemaVersion, "segment");
  try {
    Segment seg;
    seg.id = j.at("id").get<std::string>();
    seg.hit_index = j.at("hit_index").get<int>();
    for (const json& f : j.at("frames")) {
      GameState s;
      s.timestep = f.at("t").get<int>();
      const json& pose = f.at("pose");
      if (pose.size() != kPoseJoints) fail(ErrorCode::Config, "segment: pose must have 8 joints");
      for (int k = 0; k < kPoseJoints; ++k) s.pose_joints[k] = vec_from(pose[k]);
      const json& rot = f.at("paddle").at("rotation");
      if (rot.size() != 9) fail(ErrorCode::Config, "segment: rotation must have 9 entries");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) s.paddle.rotation(r, c) = rot[3 * r + c].get<double>();
      s.paddle.translation = vec_from(f.at("paddle").at("translation"));
      s.ball = vec_from(f.at("ball"));
      seg.frames.push_back(s);
    }
    for (const json& p : j.at("post_hit_ball")) seg.post_hit_ball.push_back(vec_from(p));
    const json& tp = j.at("truth_params");
    seg.truth_params = {tp.at("a1").get<double>(), tp.at("a2").get<double>(), tp.at("b").get<double>()};
    seg.strike_point = {j.at("strike_point").at("x").get<double>(), j.at("strike_point").at("z").get<double>()};
    seg.bounce_y = j.value("bounce_y", 0.0);
    seg.fit_residual = j.value("fit_residual", 0.0);
    if (seg.hit_index < 0 || seg.hit_index >= static_cast<int>(seg.frames.size()))
      fail(ErrorCode::Config, "segment " + seg.id + ": hit_index out of range");
    for (std::size_t i = 0; i < seg.frames.size(); ++i)
      if (seg.frames[i].timestep != static_cast<int>(i) - seg.hit_index)
        fail(ErrorCode::Config, "segment " + seg.id + ": frames not sorted by timestep");
    return seg;
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("segment: malformed document: ") + e.what());
  }
}

json manifest_to_json(const DatasetManifest& m) {
  json rej = json::object();
  for (const auto& [k, v] : m.rejections) rej[k] = v;
  return {{"version", kManifestSchemaVersion},
          {"seed", m.seed},
          {"config_hash", m.config_hash},
          {"generator_config", m.generator_config},
          {"region_counts",
           {{"Left", m.region_counts[0]}, {"Center", m.region_counts[1]}, {"Right", m.region_counts[2]}}},
          {"candidates", m.candidates},
          {"rejections", rej},
          {"splits", {{"train", m.train}, {"calibration", m.calibration}, {"test", m.test}}}};
}

DatasetManifest manifest_from_json(const json& j) {
  check_version(j, kManifestSchemaVersion, "manifest");
  try {
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.generator_config = j.value("generator_config", json::object());
    const json& rc = j.at("region_counts");
    m.region_counts = {rc.at("Left").get<int>(), rc.at("Center").get<int>(), rc.at("Right").get<int>()};
    m.candidates = j.value("candidates", 0);
    const json rejections = j.value("rejections", json::object());
    for (const auto& [k, v] : rejections.items()) m.rejections[k] = v.get<int>();
    const json& sp = j.at("splits");
    m.train = sp.value("train", std::vector<std::string>{});
    m.calibration = sp.value("calibration", std::vector<std::string>{});
    m.test = sp.value("test", std::vector<std::string>{});
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("manifest: malformed document: ") + e.what());
  }
}

const Segment& Dataset::by_id(const std::string& id) const {
  for (const Segment& s : segments)
    if (s.id == id) return s;
  fail(ErrorCode::InvalidArgument, "dataset has no segment '" + id + "'");
}

std::vector<const Segment*> Dataset::split(const std::string& name) const {
  const std::vector<std::string>* ids = nullptr;
  if (name == "train") ids = &manifest.train;
  else if (name == "calibration") ids = &manifest.calibration;
  else if (name == "test") ids = &manifest.test;
  else fail(ErrorCode::InvalidArgument, "unknown split '" + name + "'");

  std::map<std::string, const Segment*> index;
  for (const Segment& s : segments) index[s.id] = &s;
  std::vector<const Segment*> out;
  out.reserve(ids->size());
  for (const std::string& id : *ids) {
    auto it = index.find(id);
    if (it == index.end()) fail(ErrorCode::Config, "split '" + name + "' references missing segment " + id);
    out.push_back(it->second);
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorCode::Io, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "segments", ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + (dir / "segments").string() + ": " + ec.message());
  for (const Segment& s : ds.segments)
    write_text_file(dir / "segments" / (s.id + ".json"), segment_to_json(s).dump() + "\n");
  write_text_file(dir / "manifest.json", manifest_to_json(ds.manifest).dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir / "manifest.json")) fail(ErrorCode::Io, "no manifest.json in " + dir.string());
  Dataset ds;
  ds.manifest = manifest_from_json(json::parse(read_text_file(dir / "manifest.json")));
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "segments"))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    json j;
    try {
      j = json::parse(read_text_file(p));
    } catch (const json::parse_error& e) {
      fail(ErrorCode::Config, p.string() + ": " + e.what());
    }
    ds.segments.push_back(segment_from_json(j));
  }
  return ds;
}

std::string config_hash(const json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pingsim

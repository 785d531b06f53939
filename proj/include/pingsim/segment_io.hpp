#pragma once

// JSON schema for segments and the directory-of-files dataset layout:
//
//   <dir>/manifest.json
//   <dir>/segments/<segment id>.json
//
// Every document carries a mandatory integer "version" field.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pingsim/core.hpp"

namespace pingsim {

inline constexpr int kSegmentSchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;

nlohmann::json segment_to_json(const Segment& seg);
Segment segment_from_json(const nlohmann::json& j);

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json generator_config;
  std::array<int, 3> region_counts{};
  int candidates = 0;
  std::map<std::string, int> rejections;
  std::vector<std::string> train;
  std::vector<std::string> calibration;
  std::vector<std::string> test;
};

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

struct Dataset {
  std::vector<Segment> segments;
  DatasetManifest manifest;

  const Segment& by_id(const std::string& id) const;
  // Segments of a named split ("train", "calibration", "test") in manifest order.
  std::vector<const Segment*> split(const std::string& name) const;
};

void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

// FNV-1a over a canonical JSON dump, rendered as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace pingsim

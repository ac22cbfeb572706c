#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mpf/core/error.hpp"

namespace mpf::data {

// Hard ceiling on motion magnification; larger factors visibly distort faces.
constexpr int kMagnificationCap = 14;

enum class Task { SDE3, SDE5, CDE3 };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

struct LabelSpace {
  Task task = Task::CDE3;
  std::vector<std::string> classes;
  std::map<std::string, std::string> merge_map;  // raw dataset label -> task class

  // Raw labels pass through the merge map when present, otherwise must
  // already be a task class.
  std::string mapped(const std::string& raw) const;
  int class_index(const std::string& cls) const;
  void validate() const;

  static LabelSpace cde3();
};

struct ClipRecord {
  std::string clip_id;
  std::string subject_id;
  std::string label;
  std::filesystem::path frames_path;
  int onset_index = 0;
  int apex_index = 1;
  std::string source_dataset;
  int magnification_factor = 0;
};

struct DatasetManifest {
  std::vector<ClipRecord> records;
  LabelSpace label_space;
  int frame_h = 0;
  int frame_w = 0;
  bool preprocessed = true;

  void validate() const;
  std::vector<std::string> subjects() const;                 // distinct, sorted
  std::map<std::string, int> class_counts() const;           // mapped class -> count
  std::map<std::string, int> class_counts(const std::set<std::string>& exclude_subjects) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace mpf::data

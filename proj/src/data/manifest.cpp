#include "mpf/data/manifest.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace mpf::data {

using nlohmann::json;

const char* task_name(Task t) {
  switch (t) {
    case Task::SDE3: return "SDE3";
    case Task::SDE5: return "SDE5";
    case Task::CDE3: return "CDE3";
  }
  return "?";
}

Task task_from_name(const std::string& name) {
  if (name == "SDE3") return Task::SDE3;
  if (name == "SDE5") return Task::SDE5;
  if (name == "CDE3") return Task::CDE3;
  fail("unknown task: " + name);
}

LabelSpace LabelSpace::cde3() {
  LabelSpace ls;
  ls.task = Task::CDE3;
  ls.classes = {"negative", "positive", "surprise"};
  for (const auto& c : ls.classes) ls.merge_map[c] = c;
  return ls;
}

std::string LabelSpace::mapped(const std::string& raw) const {
  auto it = merge_map.find(raw);
  if (it != merge_map.end()) return it->second;
  return raw;
}

int LabelSpace::class_index(const std::string& cls) const {
  for (size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == cls) return static_cast<int>(i);
  return -1;
}

void LabelSpace::validate() const {
  check(!classes.empty(), "label space: empty class list");
  if (task == Task::CDE3) {
    std::vector<std::string> want = {"negative", "positive", "surprise"};
    std::vector<std::string> got = classes;
    std::sort(got.begin(), got.end());
    check(got == want, "label space: CDE3 classes must be exactly {negative, positive, surprise}");
  }
  for (const auto& [raw, cls] : merge_map)
    check(class_index(cls) >= 0,
          "label space: merge map target '" + cls + "' is not a declared class");
}

void DatasetManifest::validate() const {
  label_space.validate();
  check(frame_h > 0 && frame_w > 0, "manifest: frame_size must be positive");
  check(preprocessed, "manifest: preprocessed must be true (raw face footage is not accepted)");
  for (const auto& r : records) {
    check(r.onset_index < r.apex_index,
          "manifest: record '" + r.clip_id + "' has onset_index >= apex_index");
    const std::string cls = label_space.mapped(r.label);
    check(label_space.class_index(cls) >= 0,
          "manifest: record '" + r.clip_id + "' label '" + r.label + "' not in label space");
    check(r.magnification_factor >= 0 && r.magnification_factor <= kMagnificationCap,
          "manifest: record '" + r.clip_id + "' magnification_factor out of [0,14]");
    check(!r.subject_id.empty(), "manifest: record '" + r.clip_id + "' missing subject_id");
  }
}

std::vector<std::string> DatasetManifest::subjects() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.subject_id);
  return {s.begin(), s.end()};
}

std::map<std::string, int> DatasetManifest::class_counts() const {
  return class_counts({});
}

std::map<std::string, int> DatasetManifest::class_counts(
    const std::set<std::string>& exclude_subjects) const {
  std::map<std::string, int> counts;
  for (const auto& r : records) {
    if (exclude_subjects.count(r.subject_id)) continue;
    counts[label_space.mapped(r.label)]++;
  }
  return counts;
}

namespace {

json label_space_to_json(const LabelSpace& ls) {
  return json{{"task", task_name(ls.task)},
              {"classes", ls.classes},
              {"merge_map", ls.merge_map}};
}

LabelSpace label_space_from_json(const json& j) {
  LabelSpace ls;
  ls.task = task_from_name(j.at("task").get<std::string>());
  ls.classes = j.at("classes").get<std::vector<std::string>>();
  ls.merge_map = j.at("merge_map").get<std::map<std::string, std::string>>();
  return ls;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  check(is.good(), "load_manifest: cannot open " + path.string());
  std::string line;
  check(static_cast<bool>(std::getline(is, line)), "load_manifest: empty file " + path.string());

  DatasetManifest m;
  try {
    json header = json::parse(line);
    m.label_space = label_space_from_json(header.at("label_space"));
    auto fs = header.at("frame_size").get<std::vector<int>>();
    check(fs.size() == 2, "manifest header: frame_size must be [h, w]");
    m.frame_h = fs[0];
    m.frame_w = fs[1];
    m.preprocessed = header.at("preprocessed").get<bool>();
  } catch (const json::exception& e) {
    fail("load_manifest: bad header line: " + std::string(e.what()));
  }

  const auto base = path.parent_path();
  size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      ClipRecord r;
      r.clip_id = j.at("clip_id").get<std::string>();
      r.subject_id = j.at("subject_id").get<std::string>();
      r.label = j.at("label").get<std::string>();
      r.frames_path = j.at("frames_path").get<std::string>();
      r.onset_index = j.at("onset_index").get<int>();
      r.apex_index = j.at("apex_index").get<int>();
      r.source_dataset = j.at("source_dataset").get<std::string>();
      r.magnification_factor = j.at("magnification_factor").get<int>();
      if (r.frames_path.is_relative()) r.frames_path = base / r.frames_path;
      m.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      fail("load_manifest: bad record on line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  m.validate();
  for (const auto& r : m.records)
    check(std::filesystem::exists(r.frames_path),
          "load_manifest: record '" + r.clip_id + "' frames_path missing: " +
              r.frames_path.string());
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  m.validate();
  std::ofstream os(path, std::ios::trunc);
  check(os.good(), "save_manifest: cannot open " + path.string());
  json header{{"label_space", label_space_to_json(m.label_space)},
              {"frame_size", {m.frame_h, m.frame_w}},
              {"preprocessed", m.preprocessed}};
  os << header.dump() << "\n";
  const auto base = path.parent_path();
  for (const auto& r : m.records) {
    std::filesystem::path p = r.frames_path;
    auto rel = p.lexically_relative(base);
    if (!rel.empty() && rel.native()[0] != '.') p = rel;
    json j{{"clip_id", r.clip_id},
           {"subject_id", r.subject_id},
           {"label", r.label},
           {"frames_path", p.generic_string()},
           {"onset_index", r.onset_index},
           {"apex_index", r.apex_index},
           {"source_dataset", r.source_dataset},
           {"magnification_factor", r.magnification_factor}};
    os << j.dump() << "\n";
  }
  check(os.good(), "save_manifest: short write to " + path.string());
}

}  // namespace mpf::data

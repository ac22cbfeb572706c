#include "mpf/cli/ledger.hpp"

#include <fstream>

#include "json.hpp"
#include "mpf/core/error.hpp"

namespace mpf::cli {

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t fnv1a_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  check(is.good(), "hash: cannot open " + p.string());
  uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!is) break;
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

StageLedger::StageLedger(const std::filesystem::path& run_dir)
    : path_(run_dir / "ledger.jsonl"), run_dir_(run_dir) {
  std::filesystem::create_directories(run_dir);
  std::ifstream is(path_);
  std::string line;
  while (is.good() && std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      LedgerEntry e;
      e.stage = j.at("stage").get<std::string>();
      e.key = j.at("key").get<std::string>();
      e.outputs = j.at("outputs").get<std::vector<std::string>>();
      e.wall_ms = j.value("wall_ms", 0.0);
      e.overrides = j.value("overrides", "");
      entries_.push_back(std::move(e));
    } catch (const nlohmann::json::exception&) {
      fail("ledger: corrupt line in " + path_.string());
    }
  }
}

bool StageLedger::is_done(const std::string& stage, const std::string& key) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->stage != stage) continue;
    if (it->key != key) return false;  // same stage, different inputs: rerun
    for (const auto& out : it->outputs)
      if (!std::filesystem::exists(run_dir_ / out)) return false;
    return true;
  }
  return false;
}

void StageLedger::mark(const std::string& stage, const std::string& key,
                       std::vector<std::string> outputs, double wall_ms,
                       const std::string& overrides) {
  LedgerEntry e{stage, key, std::move(outputs), wall_ms, overrides};
  std::ofstream os(path_, std::ios::app);
  check(os.good(), "ledger: cannot append to " + path_.string());
  nlohmann::json j{{"stage", e.stage},
                   {"key", e.key},
                   {"outputs", e.outputs},
                   {"wall_ms", e.wall_ms},
                   {"overrides", e.overrides}};
  os << j.dump() << "\n";
  entries_.push_back(std::move(e));
}

}  // namespace mpf::cli

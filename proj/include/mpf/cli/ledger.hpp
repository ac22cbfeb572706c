#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mpf::cli {

uint64_t fnv1a(std::string_view s);
uint64_t fnv1a_file(const std::filesystem::path& p);
std::string hash_hex(uint64_t h);

struct LedgerEntry {
  std::string stage;
  std::string key;  // content hash of the stage's config + upstream artifacts
  std::vector<std::string> outputs;
  double wall_ms = 0.0;
  std::string overrides;
};

// Append-only JSONL record of completed stage units under a run directory;
// a unit is skipped when its key matches and every output still exists.
class StageLedger {
 public:
  explicit StageLedger(const std::filesystem::path& run_dir);

  bool is_done(const std::string& stage, const std::string& key) const;
  void mark(const std::string& stage, const std::string& key,
            std::vector<std::string> outputs, double wall_ms, const std::string& overrides);
  const std::vector<LedgerEntry>& entries() const { return entries_; }

 private:
  std::filesystem::path path_;
  std::filesystem::path run_dir_;
  std::vector<LedgerEntry> entries_;
};

}  // namespace mpf::cli

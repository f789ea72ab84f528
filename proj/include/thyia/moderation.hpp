#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "thyia/game.hpp"

namespace thyia {

struct ModerationConfig {
  std::vector<std::string> blocklist;
  int max_level_area = 400;
  int max_timeout = 1000;
};

struct ModerationVerdict {
  bool passed = true;
  // "blocklist:<n>" (index into the list), "structural:parse",
  // "structural:size" or "structural:timeout". Empty on pass.
  std::string rule;
  // Set when inline GDF passed.
  std::optional<GameSpec> spec;

  static ModerationVerdict Pass() { return {}; }
  static ModerationVerdict Reject(std::string rule) { return {false, std::move(rule), {}}; }
};

// Case-insensitive substring blocklist plus structural checks for inline
// games. Thread-safe; counts every call so tests can check that inbound text
// went through exactly once.
class Moderator {
 public:
  explicit Moderator(ModerationConfig config = {});

  ModerationVerdict CheckText(std::string_view text) const;
  // Blocklist over the raw text, then parse and limits.
  ModerationVerdict CheckGdf(std::string_view text) const;

  const ModerationConfig& config() const { return config_; }
  long checks() const { return checks_.load(); }

 private:
  ModerationVerdict Blocklist(std::string_view text) const;

  ModerationConfig config_;
  std::vector<std::string> lowered_;
  mutable std::atomic<long> checks_{0};
};

std::string ToLower(std::string_view text);

}  // namespace thyia

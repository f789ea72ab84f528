#include "thyia/moderation.hpp"

#include <cctype>

#include "thyia/gdf.hpp"

namespace thyia {

std::string ToLower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Moderator::Moderator(ModerationConfig config) : config_(std::move(config)) {
  for (const auto& term : config_.blocklist) lowered_.push_back(ToLower(term));
}

ModerationVerdict Moderator::Blocklist(std::string_view text) const {
  if (lowered_.empty()) return ModerationVerdict::Pass();
  const std::string lowered = ToLower(text);
  for (std::size_t i = 0; i < lowered_.size(); ++i) {
    if (!lowered_[i].empty() && lowered.find(lowered_[i]) != std::string::npos) {
      return ModerationVerdict::Reject("blocklist:" + std::to_string(i));
    }
  }
  return ModerationVerdict::Pass();
}

ModerationVerdict Moderator::CheckText(std::string_view text) const {
  ++checks_;
  return Blocklist(text);
}

ModerationVerdict Moderator::CheckGdf(std::string_view text) const {
  ++checks_;
  ModerationVerdict verdict = Blocklist(text);
  if (!verdict.passed) return verdict;
  GameSpec spec;
  try {
    spec = ParseGdf(text);
  } catch (const GdfError&) {
    return ModerationVerdict::Reject("structural:parse");
  }
  if (spec.width() * spec.height() > config_.max_level_area) {
    return ModerationVerdict::Reject("structural:size");
  }
  if (spec.timeout() > config_.max_timeout) {
    return ModerationVerdict::Reject("structural:timeout");
  }
  verdict.spec = std::move(spec);
  return verdict;
}

}  // namespace thyia

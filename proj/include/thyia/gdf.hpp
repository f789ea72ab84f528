#pragma once

#include <string>
#include <string_view>

#include "thyia/game.hpp"

namespace thyia {

// Text format for grid games:
//
//   # comment
//   game corridor
//   sprites
//   A hero avatar
//   C coin collectible score=1
//   termination
//   all-collected -> win
//   timeout 20 -> loss
//   level
//   A..C
//
// Sprite symbols '.' (floor) and '#' (comment) are reserved. Conditions are
// all-collected, avatar-on-goal, avatar-dead and `timeout N`.

enum class GdfErrorCode {
  kSyntax,
  kMissingHeader,
  kBadName,
  kDuplicateSymbol,
  kReservedSymbol,
  kUnknownKind,
  kBadAttribute,
  kNoiseRange,
  kTooManySprites,
  kUnknownCondition,
  kUnknownOutcome,
  kNoTermination,
  kMissingTimeout,
  kMissingLevel,
  kRaggedRows,
  kUnknownSymbol,
  kNoAvatar,
  kMultipleAvatars,
  kLevelTooSmall,
};

std::string_view GdfErrorName(GdfErrorCode code);

class GdfError : public Error {
 public:
  GdfError(GdfErrorCode code, int line, int column, const std::string& message);

  GdfErrorCode code() const { return code_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  GdfErrorCode code_;
  int line_;
  int column_;
};

// Throws GdfError carrying the 1-based line/column of the offending input.
GameSpec ParseGdf(std::string_view text);

// Canonical text: sprites sorted by symbol, zero-valued attributes omitted.
std::string SerializeGdf(const GameSpec& spec);

}  // namespace thyia

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "thyia/game.hpp"

namespace thyia {

// CoinCorridor, CoinMaze, DodgeRunner, KeyDoor.
const std::vector<std::string>& BuiltinGameNames();

std::optional<std::string_view> BuiltinGdf(std::string_view name);

// Parsed and cached; throws Error for an unknown name.
std::shared_ptr<const GameSpec> BuiltinGame(std::string_view name);

}  // namespace thyia

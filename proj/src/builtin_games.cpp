#include "thyia/builtin_games.hpp"

#include <map>
#include <mutex>

#include "thyia/gdf.hpp"

namespace thyia {

namespace {

// Deterministic and dense: every step right is worth a coin.
constexpr std::string_view kCoinCorridor = R"(# One row, coins all the way to the end.
game CoinCorridor
sprites
A hero avatar
C coin collectible score=1
termination
all-collected -> win
timeout 20 -> loss
level
ACCCCCCC
)";

constexpr std::string_view kCoinMaze = R"(game CoinMaze
sprites
A hero avatar
W wall solid
C coin collectible score=1
termination
all-collected -> win
timeout 60 -> loss
level
WWWWWWW
WA.C..W
W.W.W.W
WC...CW
W.W.W.W
W..C..W
WWWWWWW
)";

// Stochastic: the chaser steps toward the avatar, randomly 20% of the time.
constexpr std::string_view kDodgeRunner = R"(game DodgeRunner
sprites
A hero avatar
W wall solid
C coin collectible score=1
S spikes lethal
X hunter chaser noise=0.2
termination
all-collected -> win
avatar-dead -> loss
timeout 50 -> loss
level
WWWWWWW
WA.C.CW
W..S..W
WC.W.CW
W.....W
WC...XW
WWWWWWW
)";

// Sparse: the only reward sits behind a locked door.
constexpr std::string_view kKeyDoor = R"(game KeyDoor
sprites
A hero avatar
W wall solid
K key key
D door door
G exit goal score=1
termination
avatar-on-goal -> win
timeout 40 -> loss
level
WWWWWW
WA..KW
WWDWWW
W...GW
WWWWWW
)";

const std::map<std::string, std::string_view, std::less<>>& Sources() {
  static const std::map<std::string, std::string_view, std::less<>> sources = {
      {"CoinCorridor", kCoinCorridor},
      {"CoinMaze", kCoinMaze},
      {"DodgeRunner", kDodgeRunner},
      {"KeyDoor", kKeyDoor},
  };
  return sources;
}

}  // namespace

const std::vector<std::string>& BuiltinGameNames() {
  static const std::vector<std::string> names = {"CoinCorridor", "CoinMaze", "DodgeRunner",
                                                 "KeyDoor"};
  return names;
}

std::optional<std::string_view> BuiltinGdf(std::string_view name) {
  const auto& sources = Sources();
  auto it = sources.find(name);
  if (it == sources.end()) return std::nullopt;
  return it->second;
}

std::shared_ptr<const GameSpec> BuiltinGame(std::string_view name) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const GameSpec>, std::less<>> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(name); it != cache.end()) return it->second;
  const auto text = BuiltinGdf(name);
  if (!text) throw Error("unknown built-in game '" + std::string(name) + "'");
  auto spec = std::make_shared<const GameSpec>(ParseGdf(*text));
  cache.emplace(std::string(name), spec);
  return spec;
}

}  // namespace thyia

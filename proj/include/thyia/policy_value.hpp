#pragma once

#include "thyia/common.hpp"
#include "thyia/game.hpp"

namespace thyia {

struct PolicyValue {
  Policy policy = UniformPolicy();
  double value = 0.5;
};

// Read-only guidance source for the planner. Implementations must be safe to
// call concurrently and must not change while a planner episode runs.
class PolicyValueModel {
 public:
  virtual ~PolicyValueModel() = default;
  virtual PolicyValue Evaluate(const GameState& state) const = 0;
};

}  // namespace thyia

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "thyia/common.hpp"

namespace thyia {

struct ParameterDef {
  std::string name;
  std::vector<std::string> values;
  std::size_t default_index = 0;
  std::string description;
};

// Ordered registry of tunable parameters. New parameters are appended, so
// existing indices stay put.
class ParameterSpace {
 public:
  ParameterSpace() = default;
  explicit ParameterSpace(std::vector<ParameterDef> defs);

  // Throws Error on a duplicate name, an empty value list or a bad default.
  void Add(ParameterDef def);

  std::size_t size() const { return defs_.size(); }
  const ParameterDef& def(std::size_t i) const { return defs_.at(i); }
  const std::vector<ParameterDef>& defs() const { return defs_; }
  std::optional<std::size_t> IndexOf(std::string_view name) const;
  std::vector<std::size_t> Arities() const;

  // Human-readable registry reference (one block per parameter).
  std::string Describe() const;

 private:
  std::vector<ParameterDef> defs_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

using BigInt = boost::multiprecision::cpp_int;

// Exact product of arities.
BigInt SpaceCardinality(const ParameterSpace& space);

class ParameterSpaceError : public Error {
 public:
  using Error::Error;
};

// One point in a ParameterSpace: a value index per dimension.
class ParameterSet {
 public:
  explicit ParameterSet(std::shared_ptr<const ParameterSpace> space);

  static ParameterSet Defaults(std::shared_ptr<const ParameterSpace> space);
  static ParameterSet Random(std::shared_ptr<const ParameterSpace> space, Rng& rng);
  static ParameterSet FromIndices(std::shared_ptr<const ParameterSpace> space,
                                  std::vector<std::uint32_t> indices);
  // `name = value` lines; '#' comments. Names missing from the text take
  // their defaults. Unknown names or values throw ParameterSpaceError.
  static ParameterSet Parse(std::shared_ptr<const ParameterSpace> space, std::string_view text);

  const ParameterSpace& space() const { return *space_; }
  const std::shared_ptr<const ParameterSpace>& space_ptr() const { return space_; }
  const std::vector<std::uint32_t>& indices() const { return indices_; }
  std::uint32_t index(std::size_t dim) const { return indices_.at(dim); }
  void SetIndex(std::size_t dim, std::uint32_t value);

  const std::string& Text(std::string_view name) const;
  double Real(std::string_view name) const;
  int Int(std::string_view name) const;
  bool Flag(std::string_view name) const;  // "on"/"off"
  void Set(std::string_view name, std::string_view value);

  std::string Serialize() const;

  bool operator==(const ParameterSet& other) const;

 private:
  std::size_t Dim(std::string_view name) const;

  std::shared_ptr<const ParameterSpace> space_;
  std::vector<std::uint32_t> indices_;
};

// The shipped planner + learner + runtime registry.
std::shared_ptr<const ParameterSpace> DefaultSpace();

// ParameterSet plus master seed: everything that determines planner
// behaviour for a fixed model snapshot.
struct AgentFingerprint {
  ParameterSet params;
  std::uint64_t seed = 0;

  std::string Serialize() const;
  static AgentFingerprint Parse(std::shared_ptr<const ParameterSpace> space, std::string_view text);
  std::uint64_t Hash() const;
  bool operator==(const AgentFingerprint& other) const {
    return seed == other.seed && params == other.params;
  }
};

AgentFingerprint MakeFingerprint(const ParameterSet& params, std::uint64_t seed);

}  // namespace thyia

#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "thyia/builtin_games.hpp"
#include "thyia/gdf.hpp"
#include "thyia/runtime.hpp"

// Snapshot directory layout:
//   manifest.txt     key = value lines
//   fingerprint.txt  seed and parameter values
//   games/<i>.gdf    library, canonical text
//   models/<i>.thy1  per-game model, when one exists
//   buffers/<i>.bin  replay buffer contents
//   queue.jsonl      pending play suggestions and hints
//   tuner.log        online tuning evaluations, `game,index,values,reward`
//   events.log       event log, one JSON record per line

namespace thyia {

namespace fs = std::filesystem;

namespace {

constexpr int kSnapshotVersion = 1;

void WriteFile(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw SnapshotError("cannot write " + path.string());
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string FormatDouble(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
T ParseNumber(std::string_view text, const std::string& what) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw SnapshotError("bad value for " + what + ": '" + std::string(text) + "'");
  }
  return value;
}

template <typename T>
void Put(std::string& out, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  out.append(raw, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  template <typename T>
  T Get() {
    if (bytes_.size() - pos_ < sizeof(T)) throw SnapshotError("truncated replay buffer");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

// u64 capacity, u64 count, then per example: u32 feature count, f64
// features, f64 x 5 policy, f64 value. Little-endian hosts only.
std::string EncodeBuffer(const ReplayBuffer& buffer) {
  std::string out;
  Put<std::uint64_t>(out, buffer.capacity());
  Put<std::uint64_t>(out, buffer.size());
  for (const auto& ex : buffer.examples()) {
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(ex.features.size()));
    for (double f : ex.features) Put(out, f);
    for (double p : ex.target_policy) Put(out, p);
    Put(out, ex.target_value);
  }
  return out;
}

ReplayBuffer DecodeBuffer(std::string_view bytes) {
  Reader in(bytes);
  ReplayBuffer buffer(in.Get<std::uint64_t>());
  const auto count = in.Get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    TrainingExample ex;
    ex.features.resize(in.Get<std::uint32_t>());
    for (double& f : ex.features) f = in.Get<double>();
    for (double& p : ex.target_policy) p = in.Get<double>();
    ex.target_value = in.Get<double>();
    buffer.Push(std::move(ex));
  }
  if (!in.done()) throw SnapshotError("trailing bytes in replay buffer");
  return buffer;
}

std::map<std::string, std::string> ParseManifest(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw SnapshotError("malformed manifest line: " + line);
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace

void Runtime::Snapshot(const fs::path& dir) const {
  std::lock_guard cycle(cycle_mutex_);
  std::lock_guard lock(mutex_);

  fs::path target = fs::absolute(dir).lexically_normal();
  if (!target.has_filename()) target = target.parent_path();
  const fs::path parent = target.parent_path();
  fs::create_directories(parent);
  const fs::path tmp =
      parent / ("." + target.filename().string() + ".tmp-" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp / "games");
  fs::create_directories(tmp / "models");
  fs::create_directories(tmp / "buffers");

  std::ostringstream manifest;
  manifest << "version = " << kSnapshotVersion << '\n';
  manifest << "created_unix_ms = "
           << std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::system_clock::now().time_since_epoch())
                  .count()
           << '\n';
  manifest << "episodes = " << episodes_ << '\n';
  manifest << "round_robin = " << round_robin_ << '\n';
  manifest << "next_event = " << next_event_ << '\n';
  manifest << "games = " << games_.size() << '\n';
  for (std::size_t i = 0; i < games_.size(); ++i) {
    const GameEntry& g = *games_[i];
    const std::string key = "game." + std::to_string(i);
    manifest << key << ".id = " << g.id << '\n';
    manifest << key << ".episodes = " << g.episodes << '\n';
    manifest << key << ".bounds = " << g.bounds.min << ' ' << g.bounds.max << '\n';
    std::string recent;
    for (double f : g.recent) recent += (recent.empty() ? "" : " ") + FormatDouble(f);
    manifest << key << ".recent = " << recent << '\n';
    manifest << key << ".model = " << (g.model ? "yes" : "no") << '\n';
    WriteFile(tmp / "games" / (std::to_string(i) + ".gdf"), SerializeGdf(*g.spec));
    if (g.model) SaveModel(*g.model, (tmp / "models" / (std::to_string(i) + ".thy1")).string());
    WriteFile(tmp / "buffers" / (std::to_string(i) + ".bin"), EncodeBuffer(g.buffer));
  }
  WriteFile(tmp / "manifest.txt", manifest.str());
  WriteFile(tmp / "fingerprint.txt", fingerprint_.Serialize());

  std::string queue;
  for (const auto& id : plays_) queue += Json{{"play", id}}.dump() + '\n';
  for (const auto& h : hints_) {
    queue += Json{{"hint", std::vector<double>(h.begin(), h.end())}}.dump() + '\n';
  }
  WriteFile(tmp / "queue.jsonl", queue);

  std::string tuner;
  for (const auto& line : tuner_log_) tuner += line + '\n';
  WriteFile(tmp / "tuner.log", tuner);

  std::string events;
  for (const auto& e : events_) events += FormatEvent(e) + '\n';
  WriteFile(tmp / "events.log", events);

  // Swap in: the old snapshot is only removed once the new one is in place.
  const fs::path old = parent / ("." + target.filename().string() + ".old");
  fs::remove_all(old);
  if (fs::exists(target)) fs::rename(target, old);
  fs::rename(tmp, target);
  fs::remove_all(old);
}

std::unique_ptr<Runtime> Runtime::Restore(const fs::path& dir, RuntimeConfig config) {
  if (!fs::is_directory(dir)) throw SnapshotError("no snapshot at " + dir.string());
  const auto manifest = ParseManifest(ReadFile(dir / "manifest.txt"));
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = manifest.find(key);
    if (it == manifest.end()) throw SnapshotError("manifest is missing " + key);
    return it->second;
  };
  if (ParseNumber<int>(get("version"), "version") != kSnapshotVersion) {
    throw SnapshotError("unsupported snapshot version " + get("version"));
  }

  const AgentFingerprint fp = [&] {
    try {
      return AgentFingerprint::Parse(config.params.space_ptr(), ReadFile(dir / "fingerprint.txt"));
    } catch (const ParameterSpaceError& ex) {
      throw SnapshotError(std::string("bad fingerprint: ") + ex.what());
    }
  }();
  const auto game_count = ParseNumber<std::size_t>(get("games"), "games");
  std::vector<GameSpec> specs;
  for (std::size_t i = 0; i < game_count; ++i) {
    try {
      specs.push_back(ParseGdf(ReadFile(dir / "games" / (std::to_string(i) + ".gdf"))));
    } catch (const GdfError& ex) {
      throw SnapshotError(std::string("bad game in snapshot: ") + ex.what());
    }
  }

  config.params = fp.params;
  config.seed = fp.seed;
  config.library.clear();
  for (const auto& spec : specs) config.library.push_back(spec.name);
  // Builtins resolve by name; uploaded games are swapped in below.
  std::vector<std::string> builtin_library;
  for (const auto& spec : specs) {
    if (BuiltinGdf(spec.name)) builtin_library.push_back(spec.name);
  }
  RuntimeConfig base = config;
  base.library = builtin_library.empty() ? std::vector<std::string>{"CoinCorridor"} : builtin_library;
  auto rt = std::make_unique<Runtime>(base);

  rt->games_.clear();
  for (std::size_t i = 0; i < game_count; ++i) {
    const std::string key = "game." + std::to_string(i);
    auto entry = std::make_shared<GameEntry>();
    entry->id = get(key + ".id");
    if (entry->id != specs[i].name) throw SnapshotError("manifest and game files disagree");
    entry->spec = std::make_shared<const GameSpec>(std::move(specs[i]));
    entry->episodes = ParseNumber<std::uint64_t>(get(key + ".episodes"), key + ".episodes");
    {
      std::istringstream b(get(key + ".bounds"));
      if (!(b >> entry->bounds.min >> entry->bounds.max)) throw SnapshotError("bad bounds");
    }
    std::istringstream recent(get(key + ".recent"));
    std::string token;
    while (recent >> token) entry->recent.push_back(ParseNumber<double>(token, key + ".recent"));
    if (get(key + ".model") == "yes") {
      try {
        entry->model = std::make_shared<const ModelWeights>(
            LoadModel((dir / "models" / (std::to_string(i) + ".thy1")).string()));
        CheckCompatible(*entry->model, *entry->spec);
      } catch (const Error& ex) {
        throw SnapshotError(std::string("bad model: ") + ex.what());
      }
    }
    entry->buffer = DecodeBuffer(ReadFile(dir / "buffers" / (std::to_string(i) + ".bin")));
    rt->games_.push_back(std::move(entry));
  }

  rt->episodes_ = ParseNumber<std::uint64_t>(get("episodes"), "episodes");
  rt->round_robin_ = ParseNumber<std::uint64_t>(get("round_robin"), "round_robin");

  std::istringstream queue(ReadFile(dir / "queue.jsonl"));
  std::string line;
  while (std::getline(queue, line)) {
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      if (j.contains("play")) {
        rt->plays_.push_back(j.at("play").get<std::string>());
      } else {
        const auto v = j.at("hint").get<std::vector<double>>();
        if (v.size() != kNumActions) throw SnapshotError("bad hint");
        Policy p;
        std::copy(v.begin(), v.end(), p.begin());
        rt->hints_.push_back(p);
      }
    } catch (const Json::exception& ex) {
      throw SnapshotError(std::string("bad queue entry: ") + ex.what());
    }
  }

  std::istringstream tuner(ReadFile(dir / "tuner.log"));
  while (std::getline(tuner, line)) {
    if (!line.empty()) rt->tuner_log_.push_back(line);
  }

  rt->events_.clear();
  std::istringstream events(ReadFile(dir / "events.log"));
  while (std::getline(events, line)) {
    if (line.empty()) continue;
    try {
      rt->events_.push_back(ParseEvent(line));
    } catch (const Error& ex) {
      throw SnapshotError(ex.what());
    }
  }
  rt->next_event_ = ParseNumber<std::uint64_t>(get("next_event"), "next_event");
  rt->LogLocked("restore", Json{{"episodes", rt->episodes_}});
  return rt;
}

}  // namespace thyia

#include "thyia/cli.hpp"

#include <csignal>
#include <fstream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "thyia/builtin_games.hpp"
#include "thyia/episode.hpp"
#include "thyia/gdf.hpp"
#include "thyia/learner.hpp"
#include "thyia/ntbea.hpp"
#include "thyia/runtime.hpp"
#include "thyia/server.hpp"

namespace thyia {

namespace {

namespace fs = std::filesystem;

// Bad flags, missing files, unparsable inputs: exit 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::atomic<bool> g_stop{false};

extern "C" void HandleStopSignal(int) { g_stop = true; }

std::string ReadText(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(std::string("cannot read ") + what + " file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::shared_ptr<const GameSpec> LoadGame(const std::string& name_or_path) {
  if (BuiltinGdf(name_or_path)) return BuiltinGame(name_or_path);
  if (!fs::is_regular_file(name_or_path)) {
    throw UsageError("unknown game '" + name_or_path + "' (not a built-in and no such file)");
  }
  try {
    return std::make_shared<const GameSpec>(ParseGdf(ReadText(name_or_path, "game")));
  } catch (const GdfError& ex) {
    throw UsageError(name_or_path + ": " + ex.what());
  }
}

ParameterSet LoadParams(const std::string& path) {
  if (path.empty() || path == "default") return ParameterSet::Defaults(DefaultSpace());
  try {
    return ParameterSet::Parse(DefaultSpace(), ReadText(path, "params"));
  } catch (const ParameterSpaceError& ex) {
    throw UsageError(path + ": " + ex.what());
  }
}

// A corrupt file or one built for another game is bad input.
ModelWeights LoadModelFor(const std::string& path, const GameSpec& spec) {
  if (!fs::is_regular_file(path)) throw UsageError("no such model file: " + path);
  try {
    ModelWeights model = LoadModel(path);
    CheckCompatible(model, spec);
    return model;
  } catch (const ModelFormatError& ex) {
    throw UsageError(path + ": " + ex.what());
  } catch (const DimensionError& ex) {
    throw UsageError(path + ": " + ex.what());
  }
}

std::vector<std::string> LoadBlocklist(const std::string& path) {
  std::vector<std::string> terms;
  if (path.empty()) return terms;
  std::istringstream in(ReadText(path, "blocklist"));
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty() && line[0] != '#') terms.push_back(line);
  }
  return terms;
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Json RecordToJson(const EpisodeRecord& r, std::uint64_t index) {
  Json j{{"episode", index},
         {"game", r.game},
         {"outcome", StatusName(r.outcome)},
         {"score", r.score},
         {"ticks", r.ticks},
         {"actions", ActionTrace(r.actions)},
         {"model_steps", r.model_version},
         {"fingerprint", HexU64(r.fingerprint_hash)}};
  if (r.skipped) {
    j["skipped"] = true;
    j["error"] = r.error;
  }
  return j;
}

std::string RecordToText(const EpisodeRecord& r, std::uint64_t index) {
  std::ostringstream out;
  out << "episode " << index << ' ' << r.game << ": ";
  if (r.skipped) {
    out << "skipped (" << r.error << ")";
  } else {
    out << "outcome=" << StatusName(r.outcome) << " score=" << r.score << " ticks=" << r.ticks
        << " actions=" << ActionTrace(r.actions);
  }
  return out.str();
}

std::string StatsToText(const StatsReport& r) {
  std::ostringstream out;
  out << r.scope << ": episodes=" << r.episodes << " wins=" << r.wins;
  if (r.win_rate) {
    out << " win_rate=" << *r.win_rate << " mean_score=" << *r.mean_score
        << " max_score=" << *r.max_score;
  } else {
    out << " win_rate=undefined";
  }
  out << " trend=[";
  for (std::size_t i = 0; i < r.trend.size(); ++i) out << (i ? "," : "") << r.trend[i];
  out << "] training_steps=" << r.training_steps << " rejections=" << r.rejections
      << " fingerprint=" << HexU64(r.fingerprint_hash);
  return out.str();
}

struct Common {
  std::string format = "text";
  bool json() const { return format == "json"; }
};

void AddFormat(CLI::App* cmd, Common& common) {
  cmd->add_option("--format", common.format, "Output format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continual game-playing agent: planner, learner, tuner and daemon"};
  app.name("thyia");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common common;
  std::string game;
  std::string params_path = "default";
  std::string model_path;
  std::string snapshot_dir;
  std::string out_path;
  std::string log_path;
  std::string problem = "game";
  std::string blocklist_path;
  std::string games_list;
  std::string host = "127.0.0.1";
  std::string gdf_path;
  std::uint64_t seed = 0;
  std::uint64_t episodes = 1;
  std::uint64_t serve_episodes = 0;
  int budget = 100;
  int eval_episodes = 1;
  int port = 8080;
  int bits = 5;
  double sigma = 0.1;
  double k = 1.0;
  int neighbours = 50;
  int max_area = 400;

  auto* play = app.add_subcommand("play", "Play episodes with a fixed parameter set");
  play->add_option("--game", game, "Built-in game name or .gdf file")->required();
  play->add_option("--episodes", episodes, "Episodes to play")->capture_default_str();
  play->add_option("--seed", seed, "Master seed")->required();
  play->add_option("--params", params_path, "Parameter file, or 'default'")->capture_default_str();
  play->add_option("--model", model_path, "Model file to guide the planner");
  AddFormat(play, common);

  auto* run = app.add_subcommand("run", "Run bounded runtime cycles");
  run->add_option("--episodes", episodes, "Cycles to run")->required();
  run->add_option("--seed", seed, "Master seed (ignored when restoring)")->required();
  run->add_option("--params", params_path, "Parameter file, or 'default'")->capture_default_str();
  run->add_option("--games", games_list, "Comma-separated library (default: all built-ins)");
  run->add_option("--snapshot", snapshot_dir, "Restore from and save to this directory")
      ->envname("THYIA_SNAPSHOT_DIR");
  run->add_option("--blocklist", blocklist_path, "File with one blocked term per line");
  AddFormat(run, common);

  auto* tune = app.add_subcommand("tune", "Tune planner parameters with NTBEA");
  tune->add_option("--game", game, "Built-in game name or .gdf file");
  tune->add_option("--problem", problem, "What to tune")
      ->check(CLI::IsMember({"game", "onemax"}))
      ->capture_default_str();
  tune->add_option("--budget", budget, "Evaluations")->capture_default_str()->check(
      CLI::PositiveNumber);
  tune->add_option("--seed", seed, "Tuner seed")->required();
  tune->add_option("--params", params_path, "Base parameter file, or 'default'")
      ->capture_default_str();
  tune->add_option("--eval-episodes", eval_episodes, "Episodes per evaluation")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  tune->add_option("--k", k, "UCB exploration constant")->capture_default_str();
  tune->add_option("--neighbours", neighbours, "Neighbours per step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  tune->add_option("--bits", bits, "OneMax dimension")->capture_default_str()->check(
      CLI::PositiveNumber);
  tune->add_option("--noise", sigma, "OneMax noise sigma")->capture_default_str();
  tune->add_option("--log", log_path, "Write the evaluation log here");
  AddFormat(tune, common);

  auto* train = app.add_subcommand("train", "Play, record and train a model");
  train->add_option("--game", game, "Built-in game name or .gdf file")->required();
  train->add_option("--episodes", episodes, "Episodes")->capture_default_str();
  train->add_option("--seed", seed, "Master seed")->required();
  train->add_option("--params", params_path, "Parameter file, or 'default'")
      ->capture_default_str();
  train->add_option("--model", model_path, "Start from this model file");
  train->add_option("--out", out_path, "Save the trained model here");
  AddFormat(train, common);

  auto* serve = app.add_subcommand("serve", "Run the always-on daemon with the control protocol");
  serve->add_option("--snapshot", snapshot_dir, "Snapshot directory (restored when present)")
      ->envname("THYIA_SNAPSHOT_DIR");
  serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--seed", seed, "Master seed for a fresh runtime")->capture_default_str();
  serve->add_option("--params", params_path, "Parameter file, or 'default'")
      ->capture_default_str();
  serve->add_option("--games", games_list, "Comma-separated library (default: all built-ins)");
  serve->add_option("--blocklist", blocklist_path, "File with one blocked term per line");
  serve->add_option("--max-level-area", max_area, "Largest accepted inline level")
      ->capture_default_str();
  serve->add_option("--episodes", serve_episodes, "Stop after this many episodes (0 = never)")
      ->capture_default_str();
  AddFormat(serve, common);

  auto* validate = app.add_subcommand("validate", "Parse a game description file");
  validate->add_option("file", gdf_path, "GDF file")->required();
  AddFormat(validate, common);

  auto* stats = app.add_subcommand("stats", "Report statistics from a snapshot");
  stats->add_option("--snapshot", snapshot_dir, "Snapshot directory")
      ->envname("THYIA_SNAPSHOT_DIR")
      ->required();
  stats->add_option("--game", game, "Restrict to one game");
  AddFormat(stats, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) {
      const std::string text = ReadText(gdf_path, "game");
      try {
        const GameSpec spec = ParseGdf(text);
        if (common.json()) {
          out << Json{{"ok", true}, {"game", spec.name}, {"width", spec.width()},
                      {"height", spec.height()}, {"sprites", spec.sprites.size()}}
                     .dump()
              << '\n';
        } else {
          out << "ok\n";
        }
        return 0;
      } catch (const GdfError& ex) {
        if (common.json()) {
          out << Json{{"ok", false}, {"error", GdfErrorName(ex.code())}, {"line", ex.line()},
                      {"column", ex.column()}, {"message", ex.what()}}
                     .dump()
              << '\n';
        } else {
          out << gdf_path << ": " << ex.what() << '\n';
        }
        return 1;
      }
    }

    if (*play) {
      const auto spec = LoadGame(game);
      const ParameterSet params = LoadParams(params_path);
      std::shared_ptr<const ModelWeights> model;
      std::optional<MlpPolicyValue> guide;
      ScoreBounds bounds = InitialBounds(*spec);
      if (!model_path.empty()) {
        model = std::make_shared<const ModelWeights>(LoadModelFor(model_path, *spec));
        guide.emplace(model, *spec, bounds);
      }
      const std::uint64_t fp = MakeFingerprint(params, seed).Hash();
      Json all = Json::array();
      for (std::uint64_t i = 0; i < episodes; ++i) {
        EpisodeOptions options;
        options.model = guide ? &*guide : nullptr;
        auto result = PlayEpisode(spec, params, DeriveSeed(seed, 2 * i), DeriveSeed(seed, 2 * i + 1),
                                  bounds, options);
        result.record.fingerprint_hash = fp;
        result.record.model_version = model ? model->steps : 0;
        if (common.json()) {
          all.push_back(RecordToJson(result.record, i));
        } else {
          out << RecordToText(result.record, i) << '\n';
        }
      }
      if (common.json()) {
        out << Json{{"command", "play"}, {"game", spec->name}, {"seed", seed},
                    {"fingerprint", HexU64(fp)}, {"episodes", all}}
                   .dump()
            << '\n';
      }
      return 0;
    }

    if (*train) {
      const auto spec = LoadGame(game);
      const ParameterSet params = LoadParams(params_path);
      ModelWeights model = [&] {
        if (model_path.empty()) {
          return InitModel(spec->name, SizesFor(*spec, params), DeriveSeed(seed, 0x696e6974));
        }
        return LoadModelFor(model_path, *spec);
      }();
      CheckCompatible(model, *spec);
      ReplayBuffer buffer(static_cast<std::size_t>(params.Int("replay_capacity")));
      ScoreBounds bounds = InitialBounds(*spec);
      Rng rng(DeriveSeed(seed, 0x74726e));
      Json all = Json::array();
      for (std::uint64_t i = 0; i < episodes; ++i) {
        auto snapshot = std::make_shared<const ModelWeights>(model);
        MlpPolicyValue guide(snapshot, *spec, bounds);
        EpisodeOptions options;
        options.model = &guide;
        options.record_ticks = true;
        auto result = PlayEpisode(spec, params, DeriveSeed(seed, 2 * i), DeriveSeed(seed, 2 * i + 1),
                                  bounds, options);
        RecordEpisode(buffer, result.ticks, result.fitness);
        const auto loss = TrainFromBuffer(model, buffer, params, rng);
        result.record.model_version = model.steps;
        if (common.json()) {
          Json j = RecordToJson(result.record, i);
          j["loss"] = loss ? Json(*loss) : Json(nullptr);
          all.push_back(std::move(j));
        } else {
          out << RecordToText(result.record, i) << " loss=" << (loss ? *loss : 0.0) << '\n';
        }
      }
      if (!out_path.empty()) SaveModel(model, out_path);
      if (common.json()) {
        out << Json{{"command", "train"}, {"game", spec->name}, {"seed", seed},
                    {"steps", model.steps}, {"model", out_path}, {"episodes", all}}
                   .dump()
            << '\n';
      } else if (!out_path.empty()) {
        out << "saved model to " << out_path << " (" << model.steps << " steps)\n";
      }
      return 0;
    }

    if (*tune) {
      NtbeaConfig cfg;
      cfg.k = k;
      cfg.neighbours = neighbours;
      cfg.budget = budget;
      cfg.seed = seed;
      std::unique_ptr<TuningProblem> tuning;
      if (problem == "onemax") {
        tuning = std::make_unique<OneMaxProblem>(bits, sigma, DeriveSeed(seed, 1));
      } else {
        if (game.empty()) throw UsageError("tune needs --game (or --problem onemax)");
        const auto spec = LoadGame(game);
        tuning = std::make_unique<GameTuningProblem>(spec, LoadParams(params_path),
                                                     OnlineTunedParameters(), eval_episodes,
                                                     DeriveSeed(seed, 1), nullptr,
                                                     InitialBounds(*spec));
      }
      const NtbeaResult result = RunNtbea(*tuning, cfg);
      if (!log_path.empty()) {
        std::ofstream log(log_path);
        for (const auto& rec : result.log) log << FormatLogLine(rec) << '\n';
        if (!log) throw Error("cannot write log file: " + log_path);
      }
      const ParameterSet& rec = result.recommended;
      const double estimate = result.model.Estimate(rec.indices());
      if (common.json()) {
        Json values = Json::object();
        for (std::size_t d = 0; d < rec.space().size(); ++d) {
          values[rec.space().def(d).name] = rec.space().def(d).values[rec.index(d)];
        }
        out << Json{{"command", "tune"}, {"problem", problem}, {"seed", seed},
                    {"evaluations", result.log.size()}, {"estimate", estimate},
                    {"recommended", values}}
                   .dump()
            << '\n';
      } else {
        out << "recommended (estimate " << estimate << " after " << result.log.size()
            << " evaluations):\n"
            << rec.Serialize();
      }
      return 0;
    }

    if (*stats) {
      const fs::path events_path = fs::path(snapshot_dir) / "events.log";
      if (!fs::is_regular_file(events_path)) {
        throw UsageError("no snapshot event log at " + events_path.string());
      }
      std::vector<Event> events;
      std::istringstream in(ReadText(events_path.string(), "event log"));
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) events.push_back(ParseEvent(line));
      }
      const StatsReport report = ComputeStats(events, game, RuntimeConfig{}.stats_window);
      if (common.json()) {
        out << StatsToJson(report).dump() << '\n';
      } else {
        out << StatsToText(report) << '\n';
      }
      return 0;
    }

    RuntimeConfig config;
    config.params = LoadParams(params_path);
    config.seed = seed;
    config.moderation.blocklist = LoadBlocklist(blocklist_path);
    config.moderation.max_level_area = max_area;
    if (!games_list.empty()) {
      config.library = SplitList(games_list);
      for (const auto& id : config.library) {
        if (!BuiltinGdf(id)) throw UsageError("unknown built-in game: " + id);
      }
    }
    auto make_runtime = [&]() -> std::unique_ptr<Runtime> {
      if (!snapshot_dir.empty() && fs::exists(fs::path(snapshot_dir) / "manifest.txt")) {
        return Runtime::Restore(snapshot_dir, config);
      }
      return std::make_unique<Runtime>(config);
    };

    if (*run) {
      auto runtime = make_runtime();
      const std::uint64_t first = runtime->Status().episodes;
      Json all = Json::array();
      for (std::uint64_t i = 0; i < episodes; ++i) {
        const EpisodeRecord r = runtime->StepCycle();
        if (common.json()) {
          all.push_back(RecordToJson(r, first + i));
        } else {
          out << RecordToText(r, first + i) << '\n';
        }
      }
      if (!snapshot_dir.empty()) runtime->Snapshot(snapshot_dir);
      const StatsReport report = runtime->Stats();
      if (common.json()) {
        out << Json{{"command", "run"}, {"episodes", all}, {"stats", StatsToJson(report)},
                    {"snapshot", snapshot_dir}}
                   .dump()
            << '\n';
      } else {
        out << StatsToText(report) << '\n';
      }
      return 0;
    }

    if (*serve) {
      auto runtime = make_runtime();
      ControlServer server(*runtime, snapshot_dir);
      const int bound = server.Start(host, port);
      if (common.json()) {
        out << Json{{"command", "serve"}, {"host", host}, {"port", bound}}.dump() << std::endl;
      } else {
        out << "listening on " << host << ':' << bound << std::endl;
      }
      g_stop = false;
      std::signal(SIGINT, HandleStopSignal);
      std::signal(SIGTERM, HandleStopSignal);
      std::atomic<bool> loop_done{false};
      std::thread loop([&] {
        runtime->RunLoop(g_stop, serve_episodes);
        loop_done = true;
      });
      while (!g_stop.load() && !loop_done.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      g_stop = true;
      runtime->Resume();
      loop.join();
      server.Stop();
      if (!snapshot_dir.empty()) runtime->Snapshot(snapshot_dir);
      return 0;
    }
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace thyia

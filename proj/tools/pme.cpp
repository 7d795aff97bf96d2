// pme: command-line driver for the person-matching and 3D reconstruction
// pipeline. Exit status: 0 success, 1 usage or configuration error, 2 data
// or infeasibility error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pme/pme.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config keys that double as long flags. Boolean keys are plain flags.
const std::vector<std::string> kValueKeys = {
    "t", "k", "seed", "leg-length", "embed-variant", "noise-window", "tracking-metric", "gating-threshold",
    "confidence-threshold", "kmeans-max-iterations", "ransac-threshold", "ransac-iterations", "geometry-window",
    "reference-camera", "ba-max-iterations", "ba-gradient-tolerance", "ba-step-tolerance", "ba-huber-delta",
    "threads"};
const std::vector<std::string> kFlagKeys = {"fix-cameras", "ba-huber"};

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value config file; flags override it");
    for (const auto& key : kValueKeys) app->add_option("--" + key, values[key], "override config key '" + key + "'");
    for (const auto& key : kFlagKeys) app->add_flag("--" + key, flags[key], "set config key '" + key + "'");
  }

  pme::PipelineConfig build(CLI::App* app) const {
    pme::PipelineConfig cfg;
    if (!config_path.empty()) cfg = pme::read_config(config_path);
    for (const auto& key : kValueKeys)
      if (app->count("--" + key) > 0) apply(cfg, key, values.at(key));
    for (const auto& key : kFlagKeys)
      if (flags.at(key)) apply(cfg, key, "true");
    cfg.validate();
    return cfg;
  }

  static void apply(pme::PipelineConfig& cfg, const std::string& key, const std::string& value) {
    try {
      pme::apply_config_entry(cfg, key, value);
    } catch (const pme::ConfigError& e) {
      throw pme::ConfigError("--" + key + ": " + e.what());
    }
  }
};

std::string slurp(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pme::IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class Reader>
auto read_input(const std::string& path, Reader reader) {
  std::istringstream in(slurp(path));
  return reader(in, path == "-" ? std::string("<stdin>") : path);
}

void emit(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pme::IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw pme::IoError("failed writing '" + path + "'");
}

pme::SceneFile load_scene(const std::string& path) {
  return read_input(path, [](std::istream& in, const std::string& s) { return pme::read_scene(in, s); });
}

std::string text_of(const pme::ResultsFile& r) {
  return pme::to_text(r, [](std::ostream& o, const pme::ResultsFile& v) { pme::write_results(o, v); });
}

struct SynthFlags {
  pme::SynthSpec spec;
  std::vector<std::string> confusion;

  void attach(CLI::App* app, bool with_seed) {
    if (with_seed) app->add_option("--seed", spec.seed, "random seed");
    app->add_option("--cameras", spec.num_cameras, "number of cameras")->check(CLI::PositiveNumber);
    app->add_option("--people", spec.num_people, "number of people")->check(CLI::PositiveNumber);
    app->add_option("--frames", spec.num_frames, "number of frames")->check(CLI::PositiveNumber);
    app->add_option("--dim", spec.dim, "feature dimension")->check(CLI::PositiveNumber);
    app->add_option("--camera-radius", spec.camera_radius, "camera circle radius (m)");
    app->add_option("--area-radius", spec.area_radius, "walking area radius (m)");
    app->add_option("--focal", spec.intrinsics.fx, "focal length (px)");
    app->add_option("--base-mean", spec.base_mean, "mean of person base features");
    app->add_option("--sigma-view", spec.sigma_view, "per-camera appearance offset std");
    app->add_option("--sigma-frame", spec.sigma_frame, "per-detection appearance noise std");
    app->add_option("--p-flip", spec.p_flip, "feature sign-flip probability");
    app->add_option("--dropout", spec.dropout, "per-detection miss probability");
    app->add_option("--confusion", confusion, "confused pair a:b (b copies a's appearance)");
    app->add_option("--confusion-offset", spec.confusion_offset, "appearance separation of confused pairs");
  }

  pme::SynthSpec build() const {
    pme::SynthSpec s = spec;
    s.intrinsics.fy = s.intrinsics.fx;
    for (const auto& c : confusion) {
      const auto colon = c.find(':');
      if (colon == std::string::npos) throw UsageError("--confusion expects a:b, got '" + c + "'");
      try {
        s.confusion_pairs.emplace_back(std::stoi(c.substr(0, colon)), std::stoi(c.substr(colon + 1)));
      } catch (const std::exception&) {
        throw UsageError("--confusion expects a:b, got '" + c + "'");
      }
    }
    return s;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-view person matching and metric 3D pose reconstruction"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  SynthFlags synth_flags;
  synth_flags.attach(synth, true);
  int synth_window = 0;
  std::string synth_out = "-";
  synth->add_option("--noise-window", synth_window, "joint jitter window W (px, even)");
  synth->add_option("--out,-o", synth_out, "output scene file");

  // stage commands
  struct Stage {
    CLI::App* cmd;
    ConfigFlags flags;
    std::string in = "-";
    std::string out = "-";
    std::string aux;
  };
  auto make_stage = [&](const char* name, const char* help, const char* in_help) {
    auto s = std::make_unique<Stage>();
    s->cmd = app.add_subcommand(name, help);
    s->flags.attach(s->cmd);
    s->cmd->add_option("--in,-i", s->in, in_help);
    s->cmd->add_option("--out,-o", s->out, "output file ('-' = stdout)");
    return s;
  };
  auto track = make_stage("track", "build short-term tracks per camera", "scene file");
  auto embed = make_stage("embed", "aggregate track features", "scene file");
  embed->cmd->add_option("--tracks", embed->aux, "tracks file")->required();
  auto match = make_stage("match", "cluster detections into people", "embeddings file");
  auto reconstruct = make_stage("reconstruct", "recover cameras and 3D skeletons", "scene file");
  reconstruct->cmd->add_option("--matches", reconstruct->aux, "matches file")->required();
  auto eval = make_stage("eval", "score results against scene ground truth", "scene file");
  eval->cmd->add_option("--results", eval->aux, "results file")->required();
  double pcp_alpha = pme::kDefaultPcpAlpha;
  eval->cmd->add_option("--alpha", pcp_alpha, "PCP threshold fraction");
  auto pipeline = make_stage("pipeline", "run every stage on a scene", "scene file");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "joint-jitter sweep over synthetic scenes");
  ConfigFlags sweep_cfg;
  sweep_cfg.attach(sweep);
  SynthFlags sweep_synth;
  sweep_synth.attach(sweep, false);
  std::vector<int> windows = {0, 2, 4, 6, 10, 20};
  int sweep_runs = 5;
  std::string sweep_out = "-";
  sweep->add_option("--windows", windows, "jitter windows W, ascending")->delimiter(',');
  sweep->add_option("--runs", sweep_runs, "seeds per window (seed, seed+1, ...)")->check(CLI::PositiveNumber);
  sweep->add_option("--out,-o", sweep_out, "output table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      pme::SynthSpec spec = synth_flags.build();
      spec.noise_window = synth_window;
      const pme::SceneFile scene = pme::generate(spec);
      emit(synth_out, pme::to_text(scene, [](std::ostream& o, const pme::SceneFile& s) { pme::write_scene(o, s); }));
    } else if (track->cmd->parsed()) {
      const auto cfg = track->flags.build(track->cmd);
      const auto tracks = pme::run_tracking(load_scene(track->in), cfg);
      emit(track->out, pme::to_text(tracks, [](std::ostream& o, const pme::TracksFile& t) { pme::write_tracks(o, t); }));
    } else if (embed->cmd->parsed()) {
      const auto cfg = embed->flags.build(embed->cmd);
      const auto scene = load_scene(embed->in);
      const auto tracks =
          read_input(embed->aux, [](std::istream& in, const std::string& s) { return pme::read_tracks(in, s); });
      const auto emb = pme::run_embedding(scene, tracks, cfg);
      emit(embed->out,
           pme::to_text(emb, [](std::ostream& o, const pme::EmbeddingsFile& e) { pme::write_embeddings(o, e); }));
    } else if (match->cmd->parsed()) {
      auto cfg = match->flags.build(match->cmd);
      const auto emb =
          read_input(match->in, [](std::istream& in, const std::string& s) { return pme::read_embeddings(in, s); });
      pme::resolve_k(cfg, emb.people);
      emit(match->out, text_of(pme::run_matching(emb, cfg)));
    } else if (reconstruct->cmd->parsed()) {
      const auto cfg = reconstruct->flags.build(reconstruct->cmd);
      const auto scene = load_scene(reconstruct->in);
      const auto matches =
          read_input(reconstruct->aux, [](std::istream& in, const std::string& s) { return pme::read_results(in, s); });
      emit(reconstruct->out, text_of(pme::run_reconstruction(scene, matches, cfg)));
    } else if (eval->cmd->parsed()) {
      eval->flags.build(eval->cmd);
      const auto scene = load_scene(eval->in);
      const auto results =
          read_input(eval->aux, [](std::istream& in, const std::string& s) { return pme::read_results(in, s); });
      const pme::Evaluation ev = pme::evaluate(scene, results, pcp_alpha);
      pme::write_evaluation_human(std::cerr, ev);
      emit(eval->out, pme::to_text(ev, [](std::ostream& o, const pme::Evaluation& e) { pme::write_evaluation(o, e); }));
    } else if (pipeline->cmd->parsed()) {
      const auto cfg = pipeline->flags.build(pipeline->cmd);
      emit(pipeline->out, text_of(pme::run_pipeline(load_scene(pipeline->in), cfg)));
    } else if (sweep->parsed()) {
      const auto cfg = sweep_cfg.build(sweep);
      pme::SynthSpec spec = sweep_synth.build();
      std::vector<std::uint64_t> seeds;
      for (int r = 0; r < sweep_runs; ++r) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(r));
      const auto rows = pme::sweep_noise(spec, windows, seeds, cfg);
      std::ostringstream table;
      pme::write_sweep(table, rows);
      emit(sweep_out, table.str());
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const pme::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const pme::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}

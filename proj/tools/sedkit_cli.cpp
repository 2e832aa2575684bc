// Command-line front end: synth / extract / train / predict / evaluate.
// Every command works on explicit files; see README.md for the formats.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sedkit/crnn.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/events.hpp"
#include "sedkit/features.hpp"
#include "sedkit/manifest.hpp"
#include "sedkit/mel.hpp"
#include "sedkit/postprocess.hpp"
#include "sedkit/preset.hpp"
#include "sedkit/psds.hpp"
#include "sedkit/synth.hpp"
#include "sedkit/trainer.hpp"
#include "sedkit/wave.hpp"

namespace fs = std::filesystem;
using namespace sedkit;

namespace {

struct SynthArgs {
  std::string out;
  SynthSpec spec;
};

int run_synth(const SynthArgs& args) {
  const auto result = synth_dataset(args.spec, args.out);
  std::cout << "synthesized " << result.groundtruth.clip_durations.size() << " clips ("
            << result.manifest.weak.size() << " weak, " << result.manifest.strong.size()
            << " strong rows, " << result.manifest.unlabeled.size() << " unlabeled) into " << args.out
            << "\n";
  return 0;
}

struct ExtractArgs {
  std::string manifest_dir;
  std::string out;
  std::string stats_in;
};

int run_extract(const ExtractArgs& args) {
  const auto manifest = load_manifest(args.manifest_dir);

  std::vector<std::string> paths;
  for (const auto& row : manifest.weak) paths.push_back(row.path);
  for (const auto& row : manifest.strong) paths.push_back(row.path);
  for (const auto& path : manifest.unlabeled) paths.push_back(path);
  std::sort(paths.begin(), paths.end());
  paths.erase(std::unique(paths.begin(), paths.end()), paths.end());

  fs::create_directories(args.out);
  std::vector<SpectralMap> maps;
  maps.reserve(paths.size());
  for (const auto& rel : paths) {
    auto wave = read_wave((fs::path(args.manifest_dir) / rel).string());
    wave = resample(wave, kSampleRate);
    wave = peak_normalize(wave);
    maps.push_back(log_mel(wave, clip_stem(rel)));
  }

  FeatureStats stats;
  if (args.stats_in.empty()) {
    stats = fit_stats(maps);
    save_stats((fs::path(args.out) / "stats.bin").string(), stats);
  } else {
    stats = load_stats(args.stats_in);
  }

  for (const auto& map : maps)
    save_features((fs::path(args.out) / (map.clip_id + ".feat")).string(), apply_stats(map, stats));

  std::cout << "extracted " << maps.size() << " feature maps into " << args.out
            << (args.stats_in.empty() ? " (stats fitted)" : " (stats applied)") << "\n";
  return 0;
}

struct TrainArgs {
  std::string manifest_dir;
  std::string features_dir;
  std::string preset;
  std::string config;
  std::string out;
};

SpectralMap load_clip_features(const std::string& features_dir, const std::string& rel_path) {
  const auto path = fs::path(features_dir) / (clip_stem(rel_path) + ".feat");
  if (!fs::exists(path)) throw IoError("missing features for clip " + rel_path + " (run extract first)");
  return load_features(path.string());
}

int run_train(const TrainArgs& args) {
  const auto preset = resolve_preset(args.preset);
  const auto manifest = load_manifest(args.manifest_dir, /*check_paths=*/false);

  nlohmann::json config_json = nlohmann::json::object();
  if (!args.config.empty()) {
    std::ifstream is(args.config);
    if (!is) throw IoError("cannot open " + args.config);
    try {
      is >> config_json;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(args.config + ": " + e.what());
    }
  }
  const TrainConfig cfg = train_config_from_json(config_json);
  const ModelConfig model_cfg =
      config_json.contains("model") ? model_config_from_json(config_json.at("model")) : ModelConfig{};

  TrainData data;
  data.classes = manifest.classes;
  for (const auto& row : manifest.weak) {
    TrainClip clip;
    clip.features = load_clip_features(args.features_dir, row.path);
    clip.weak_labels = row.labels;
    data.weak.push_back(std::move(clip));
  }
  std::map<std::string, std::vector<TimedEvent>> strong_by_path;
  std::vector<std::string> strong_order;
  for (const auto& row : manifest.strong) {
    if (strong_by_path.find(row.path) == strong_by_path.end()) strong_order.push_back(row.path);
    strong_by_path[row.path].push_back(TimedEvent{row.onset, row.offset, row.label});
  }
  for (const auto& path : strong_order) {
    TrainClip clip;
    clip.features = load_clip_features(args.features_dir, path);
    clip.events = strong_by_path[path];
    data.strong.push_back(std::move(clip));
  }
  for (const auto& path : manifest.unlabeled) {
    TrainClip clip;
    clip.features = load_clip_features(args.features_dir, path);
    data.unlabeled.push_back(std::move(clip));
  }

  const auto result = train(cfg, data, preset, model_cfg, args.out, &std::cout);
  std::cout << "done: initial loss " << result.initial_loss << ", final loss " << result.final_loss
            << "; checkpoints in " << args.out << "\n";
  return 0;
}

struct PredictArgs {
  std::string checkpoint;
  std::string features_dir;
  std::string preset;
  std::string classes_file;
  std::string out;
};

int run_predict(const PredictArgs& args) {
  const auto preset = resolve_preset(args.preset);

  std::vector<std::string> classes;
  for (const auto& line : sedkit::detail::read_lines(args.classes_file))
    if (!line.empty()) classes.push_back(line);
  if (classes.empty()) throw ParseError(args.classes_file + ": no classes");

  const auto archive = read_checkpoint(args.checkpoint);
  ModelConfig cfg = infer_model_config(archive);
  if (cfg.n_classes != static_cast<std::int64_t>(classes.size()))
    throw ConfigError("checkpoint has " + std::to_string(cfg.n_classes) + " classes but " +
                      args.classes_file + " lists " + std::to_string(classes.size()));
  CrnnModel model(preset, cfg, 0);
  auto params = model.params();
  load_checkpoint(args.checkpoint, params);

  std::vector<fs::path> feature_files;
  for (const auto& entry : fs::directory_iterator(args.features_dir))
    if (entry.path().extension() == ".feat") feature_files.push_back(entry.path());
  std::sort(feature_files.begin(), feature_files.end());
  if (feature_files.empty()) throw IoError("no .feat files in " + args.features_dir);

  const auto resolution = output_resolution(preset);
  std::map<double, ClipEvents> per_threshold;
  for (const double tau : preset.thresholds) per_threshold[tau] = {};

  for (const auto& file : feature_files) {
    const auto map = load_features(file.string());
    Tensor x({1, 1, map.frames(), map.values.dim(1)});
    std::copy(map.values.data.begin(), map.values.data.end(), x.data.begin());
    const auto out = model.forward(x, Mode::kEval);

    PredictionMatrix pred;
    pred.clip_id = map.clip_id;
    pred.frame_duration = resolution.frame_duration;
    pred.clip_length = map.duration_seconds;
    pred.probs = Tensor({out.frame_probs.dim(1), out.frame_probs.dim(2)});
    std::copy(out.frame_probs.data.begin(), out.frame_probs.data.end(), pred.probs.data.begin());

    auto decoded = decode(pred, classes, preset.thresholds, preset.median_window, preset.gap_tolerance);
    for (auto& [tau, events] : decoded)
      if (!events.empty()) per_threshold[tau][pred.clip_id] = std::move(events);
  }

  fs::create_directories(args.out);
  char name[64];
  for (const auto& [tau, clip_events] : per_threshold) {
    std::snprintf(name, sizeof name, "detections_%.3f.tsv", tau);
    write_events_tsv((fs::path(args.out) / name).string(), clip_events);
  }
  std::cout << "predicted " << feature_files.size() << " clips at " << preset.thresholds.size()
            << " thresholds into " << args.out << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string detections_dir;
  std::string groundtruth;
  std::string durations;
  std::string preset;
  std::string out;
};

int run_evaluate(const EvaluateArgs& args) {
  const auto preset = resolve_preset(args.preset);

  GroundTruth gt;
  gt.events = read_events_tsv(args.groundtruth);
  gt.clip_durations = read_durations_tsv(args.durations);
  for (const auto& [clip, events] : gt.events)
    if (gt.clip_durations.find(clip) == gt.clip_durations.end())
      throw DataError("ground truth clip " + clip + " missing from " + args.durations);

  std::map<double, ClipEvents> per_threshold;
  for (const auto& entry : fs::directory_iterator(args.detections_dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("detections_", 0) != 0 || entry.path().extension() != ".tsv") continue;
    const auto tau_str = name.substr(11, name.size() - 11 - 4);
    double tau = 0.0;
    try {
      tau = std::stod(tau_str);
    } catch (const std::exception&) {
      throw ParseError("cannot parse threshold from file name " + name);
    }
    per_threshold[tau] = read_events_tsv(entry.path().string());
  }
  if (per_threshold.empty()) throw IoError("no detections_*.tsv files in " + args.detections_dir);

  const auto report = evaluate(per_threshold, gt, preset.psds);
  std::printf("PSDS %.4f\n", report.psds);

  const std::string out =
      args.out.empty() ? (fs::path(args.detections_dir) / "psds_report.tsv").string() : args.out;
  write_report(out, report, gt.classes());
  std::cout << "report written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale sound event detection pipeline"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  synth_cmd->add_option("--out", synth_args.out, "output dataset directory")->required();
  synth_cmd->add_option("--seed", synth_args.spec.seed, "rng seed");
  synth_cmd->add_option("--weak", synth_args.spec.n_weak, "weakly labeled clips");
  synth_cmd->add_option("--strong", synth_args.spec.n_strong, "strongly labeled clips");
  synth_cmd->add_option("--unlabeled", synth_args.spec.n_unlabeled, "unlabeled clips");
  synth_cmd->add_option("--classes", synth_args.spec.n_classes, "number of classes (1..10)");
  synth_cmd->add_option("--clip-seconds", synth_args.spec.clip_seconds, "clip length in seconds");
  synth_cmd->add_option("--min-events", synth_args.spec.min_events, "min events per clip");
  synth_cmd->add_option("--max-events", synth_args.spec.max_events, "max events per clip");
  synth_cmd->add_option("--min-event-seconds", synth_args.spec.min_event_seconds, "min event length");
  synth_cmd->add_option("--max-event-seconds", synth_args.spec.max_event_seconds, "max event length");

  ExtractArgs extract_args;
  auto* extract_cmd = app.add_subcommand("extract", "compute standardized log-mel features");
  extract_cmd->add_option("--manifest", extract_args.manifest_dir, "manifest directory")->required();
  extract_cmd->add_option("--out", extract_args.out, "feature cache directory")->required();
  extract_cmd->add_option("--stats", extract_args.stats_in,
                          "apply existing stats file instead of fitting on this corpus");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "mean-teacher training");
  train_cmd->add_option("--manifest", train_args.manifest_dir, "manifest directory")->required();
  train_cmd->add_option("--features", train_args.features_dir, "feature cache directory")->required();
  train_cmd->add_option("--preset", train_args.preset, "scenario1, scenario2 or a preset file")->required();
  train_cmd->add_option("--config", train_args.config, "training config JSON");
  train_cmd->add_option("--out", train_args.out, "output directory for checkpoints and metrics")->required();

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "decode detections from a checkpoint");
  predict_cmd->add_option("--checkpoint", predict_args.checkpoint, "model checkpoint (student.ckpt)")
      ->required();
  predict_cmd->add_option("--features", predict_args.features_dir, "feature cache directory")->required();
  predict_cmd->add_option("--preset", predict_args.preset, "scenario1, scenario2 or a preset file")
      ->required();
  predict_cmd->add_option("--classes", predict_args.classes_file, "classes.txt with the vocabulary")
      ->required();
  predict_cmd->add_option("--out", predict_args.out, "detections output directory")->required();

  EvaluateArgs evaluate_args;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "PSDS of per-threshold detections");
  evaluate_cmd->add_option("--detections-dir", evaluate_args.detections_dir, "directory of detections_*.tsv")
      ->required();
  evaluate_cmd->add_option("--groundtruth", evaluate_args.groundtruth, "ground truth events TSV")->required();
  evaluate_cmd->add_option("--durations", evaluate_args.durations, "clip durations TSV")->required();
  evaluate_cmd->add_option("--preset", evaluate_args.preset, "scenario1, scenario2 or a preset file")
      ->required();
  evaluate_cmd->add_option("--out", evaluate_args.out,
                           "report path (default: <detections-dir>/psds_report.tsv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (extract_cmd->parsed()) return run_extract(extract_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (predict_cmd->parsed()) return run_predict(predict_args);
    if (evaluate_cmd->parsed()) return run_evaluate(evaluate_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

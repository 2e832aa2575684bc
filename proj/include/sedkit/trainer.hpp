#pragma once

// Mean-teacher training loop: sample a weak/strong/unlabeled batch, augment,
// run the student in train mode and the EMA teacher in eval mode, take the
// four-part loss, one Adam step on the student and one EMA update of the
// teacher. The student checkpoint after the last epoch is the prediction
// model.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sedkit/augment.hpp"
#include "sedkit/batch.hpp"
#include "sedkit/crnn.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/features.hpp"
#include "sedkit/loss.hpp"
#include "sedkit/nn/adam.hpp"
#include "sedkit/nn/params.hpp"
#include "sedkit/rng.hpp"

namespace sedkit {

struct TrainConfig {
  std::int64_t epochs = 200;
  std::int64_t batches_per_epoch = 250;
  std::int64_t batch_size = 48;
  std::int64_t weak_per_batch = 12;
  std::int64_t strong_per_batch = 12;
  std::int64_t unlabeled_per_batch = 24;
  double lr_max = 1e-3;
  std::int64_t ramp_steps = 12500;
  double lr_decay = 0.99995;
  double ema_decay = 0.999;
  double consistency_weight = 2.0;
  double mixup_prob = 0.5;
  double mixup_alpha = 0.2;
  bool augment = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1 || batches_per_epoch < 1) throw ConfigError("train: epochs and batches must be >= 1");
    if (weak_per_batch < 0 || strong_per_batch < 0 || unlabeled_per_batch < 0)
      throw ConfigError("train: negative subset size");
    if (weak_per_batch + strong_per_batch + unlabeled_per_batch != batch_size)
      throw ConfigError("train: weak+strong+unlabeled must equal batch_size");
    if (batch_size < 1) throw ConfigError("train: empty batch");
    if (!(lr_max > 0.0)) throw ConfigError("train: lr_max must be positive");
    if (ramp_steps < 1) throw ConfigError("train: ramp_steps must be >= 1");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train: lr_decay must be in (0,1]");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("train: ema_decay must be in [0,1)");
    if (consistency_weight < 0.0) throw ConfigError("train: consistency weight must be >= 0");
    if (!(mixup_prob >= 0.0 && mixup_prob <= 1.0)) throw ConfigError("train: mixup_prob must be in [0,1]");
    if (!(mixup_alpha > 0.0 && mixup_alpha <= 1.0)) throw ConfigError("train: mixup_alpha must be in (0,1]");
  }
};

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("epochs", cfg.epochs);
  get("batches_per_epoch", cfg.batches_per_epoch);
  get("batch_size", cfg.batch_size);
  get("weak_per_batch", cfg.weak_per_batch);
  get("strong_per_batch", cfg.strong_per_batch);
  get("unlabeled_per_batch", cfg.unlabeled_per_batch);
  get("lr_max", cfg.lr_max);
  get("ramp_steps", cfg.ramp_steps);
  get("lr_decay", cfg.lr_decay);
  get("ema_decay", cfg.ema_decay);
  get("consistency_weight", cfg.consistency_weight);
  get("mixup_prob", cfg.mixup_prob);
  get("mixup_alpha", cfg.mixup_alpha);
  get("augment", cfg.augment);
  get("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  if (j.contains("channels")) cfg.channels = j.at("channels").get<std::vector<std::int64_t>>();
  if (j.contains("gru_hidden")) cfg.gru_hidden = j.at("gru_hidden").get<std::int64_t>();
  if (j.contains("gru_layers")) cfg.gru_layers = j.at("gru_layers").get<std::int64_t>();
  if (j.contains("dropout")) cfg.dropout = j.at("dropout").get<double>();
  return cfg;
}

struct TrainClip {
  SpectralMap features;
  std::vector<std::string> weak_labels;  // weak pool only
  std::vector<TimedEvent> events;        // strong pool only
};

struct TrainData {
  std::vector<TrainClip> weak;
  std::vector<TrainClip> strong;
  std::vector<TrainClip> unlabeled;
  std::vector<std::string> classes;
};

struct EpochStats {
  std::int64_t epoch = 0;
  LossParts parts;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  double initial_loss = 0.0;  // mean total of the first epoch
  double final_loss = 0.0;    // mean total of the last epoch
};

// Called after every optimizer step with the step index and both models.
using StepObserver = std::function<void(std::int64_t step, CrnnModel& student, CrnnModel& teacher)>;

namespace detail {

// Cycles a shuffled index order, reshuffling per pass.
class PoolSampler {
 public:
  PoolSampler(std::int64_t pool_size, Rng rng) : rng_(rng), order_(static_cast<std::size_t>(pool_size)) {
    std::iota(order_.begin(), order_.end(), 0);
    pos_ = order_.size();
  }

  std::int64_t next() {
    if (pos_ >= order_.size()) {
      for (std::int64_t i = static_cast<std::int64_t>(order_.size()) - 1; i > 0; --i)
        std::swap(order_[static_cast<std::size_t>(i)], order_[static_cast<std::size_t>(rng_.uniform_int(i + 1))]);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  Rng rng_;
  std::vector<std::int64_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline TrainResult train(const TrainConfig& cfg, const TrainData& data, const ScenarioPreset& preset,
                         const ModelConfig& model_cfg, const std::string& out_dir, std::ostream* log = nullptr,
                         const StepObserver& observer = nullptr) {
  cfg.validate();
  preset.validate();
  if (cfg.weak_per_batch > 0 && data.weak.empty()) throw ConfigError("train: weak pool is empty");
  if (cfg.strong_per_batch > 0 && data.strong.empty()) throw ConfigError("train: strong pool is empty");
  if (cfg.unlabeled_per_batch > 0 && data.unlabeled.empty()) throw ConfigError("train: unlabeled pool is empty");
  if (data.classes.empty()) throw ConfigError("train: empty class vocabulary");

  ModelConfig mc = model_cfg;
  mc.n_classes = static_cast<std::int64_t>(data.classes.size());
  CrnnModel student(preset, mc, cfg.seed);
  CrnnModel teacher(preset, mc, cfg.seed);  // same seed: teacher starts as a copy
  ParamSet student_params = student.params();
  ParamSet teacher_params = teacher.params();

  const auto resolution = output_resolution(preset);
  const std::int64_t n_classes = mc.n_classes;

  Rng base(cfg.seed);
  detail::PoolSampler weak_sampler(static_cast<std::int64_t>(std::max<std::size_t>(1, data.weak.size())),
                                   base.fork(2));
  detail::PoolSampler strong_sampler(static_cast<std::int64_t>(std::max<std::size_t>(1, data.strong.size())),
                                     base.fork(3));
  detail::PoolSampler unlabeled_sampler(
      static_cast<std::int64_t>(std::max<std::size_t>(1, data.unlabeled.size())), base.fork(4));
  Rng aug_rng = base.fork(5);
  Rng dropout_rng = base.fork(6);

  Adam adam;
  TrainResult result;

  std::optional<std::ofstream> metrics;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metrics.emplace(out_dir + "/metrics.jsonl");
    if (!*metrics) throw IoError("cannot write " + out_dir + "/metrics.jsonl");
    nlohmann::json header;
    header["time_factor"] = resolution.time_factor;
    header["frame_duration"] = resolution.frame_duration;
    header["classes"] = data.classes;
    header["batch"] = {{"weak", cfg.weak_per_batch},
                       {"strong", cfg.strong_per_batch},
                       {"unlabeled", cfg.unlabeled_per_batch}};
    *metrics << header.dump() << "\n";
  }
  if (log)
    *log << "training: scenario " << preset.scenario_id << ", output frame duration "
         << resolution.frame_duration << " s, " << n_classes << " classes\n";

  std::int64_t step = 0;
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    LossParts epoch_sum;
    double last_lr = 0.0;
    for (std::int64_t batch_no = 0; batch_no < cfg.batches_per_epoch; ++batch_no) {
      // Compose the batch: weak rows, then strong rows, then unlabeled.
      std::vector<const TrainClip*> clips;
      LabeledBatch batch;
      for (std::int64_t i = 0; i < cfg.weak_per_batch; ++i) {
        batch.weak_idx.push_back(static_cast<std::int64_t>(clips.size()));
        clips.push_back(&data.weak[static_cast<std::size_t>(weak_sampler.next())]);
      }
      for (std::int64_t i = 0; i < cfg.strong_per_batch; ++i) {
        batch.strong_idx.push_back(static_cast<std::int64_t>(clips.size()));
        clips.push_back(&data.strong[static_cast<std::size_t>(strong_sampler.next())]);
      }
      for (std::int64_t i = 0; i < cfg.unlabeled_per_batch; ++i) {
        batch.unlabeled_idx.push_back(static_cast<std::int64_t>(clips.size()));
        clips.push_back(&data.unlabeled[static_cast<std::size_t>(unlabeled_sampler.next())]);
      }

      const std::int64_t B = static_cast<std::int64_t>(clips.size());
      std::int64_t t_in = 0, n_bins = 0;
      for (const auto* clip : clips) {
        t_in = std::max(t_in, clip->features.frames());
        n_bins = clip->features.values.dim(1);
      }
      const std::int64_t t_out = student.out_frames(t_in);
      if (t_out < 1) throw ConfigError("train: clips shorter than the pooling factor");

      batch.features = Tensor(Shape{B, 1, t_in, n_bins});
      for (std::int64_t b = 0; b < B; ++b) {
        const auto& values = clips[static_cast<std::size_t>(b)]->features.values;
        for (std::int64_t t = 0; t < values.dim(0); ++t)
          for (std::int64_t f = 0; f < n_bins; ++f) batch.features(b, 0, t, f) = values(t, f);
      }

      batch.weak_labels = Tensor(Shape{cfg.weak_per_batch, n_classes});
      for (std::int64_t i = 0; i < cfg.weak_per_batch; ++i) {
        const auto* clip = clips[static_cast<std::size_t>(batch.weak_idx[static_cast<std::size_t>(i)])];
        for (const auto& label : clip->weak_labels)
          for (std::size_t c = 0; c < data.classes.size(); ++c)
            if (data.classes[c] == label) batch.weak_labels(i, static_cast<std::int64_t>(c)) = 1.0;
      }

      batch.strong_labels = Tensor(Shape{cfg.strong_per_batch, t_out, n_classes});
      for (std::int64_t i = 0; i < cfg.strong_per_batch; ++i) {
        const auto* clip = clips[static_cast<std::size_t>(batch.strong_idx[static_cast<std::size_t>(i)])];
        const Tensor grid = rasterize_events(clip->events, data.classes, t_out, resolution.frame_duration);
        for (std::int64_t t = 0; t < t_out; ++t)
          for (std::int64_t c = 0; c < n_classes; ++c) batch.strong_labels(i, t, c) = grid(t, c);
      }

      if (cfg.augment) {
        for (std::int64_t b = 0; b < B; ++b) {
          Tensor view(Shape{t_in, n_bins});
          for (std::int64_t t = 0; t < t_in; ++t)
            for (std::int64_t f = 0; f < n_bins; ++f) view(t, f) = batch.features(b, 0, t, f);
          time_freq_mask(view, std::min<std::int64_t>(preset.time_mask_max, t_in),
                         std::min<std::int64_t>(preset.freq_mask_max, n_bins), aug_rng);
          for (std::int64_t t = 0; t < t_in; ++t)
            for (std::int64_t f = 0; f < n_bins; ++f) batch.features(b, 0, t, f) = view(t, f);
        }
        mixup(batch, aug_rng, cfg.mixup_prob, cfg.mixup_alpha);
      }

      // Teacher sees the same augmented features, in eval mode, no grad.
      const auto teacher_out = teacher.forward(batch.features, Mode::kEval);
      const auto student_out = student.forward(batch.features, Mode::kTrain, &dropout_rng);

      Tensor d_frame, d_clip;
      const LossParts parts =
          compute_loss(student_out, teacher_out, batch, cfg.consistency_weight, &d_frame, &d_clip);

      student_params.zero_grad();
      for (auto& it : student_params)
        if (it.trainable) it.tensor->ensure_grad();
      student.backward(d_frame, d_clip);

      last_lr = lr_schedule(step, cfg.lr_max, cfg.ramp_steps, cfg.lr_decay);
      adam.step(student_params, last_lr);
      ema_update(teacher_params, student_params, cfg.ema_decay);
      ++step;
      if (observer) observer(step, student, teacher);

      epoch_sum.bce_clip += parts.bce_clip;
      epoch_sum.bce_frame += parts.bce_frame;
      epoch_sum.mse_clip += parts.mse_clip;
      epoch_sum.mse_frame += parts.mse_frame;
      epoch_sum.consistency_weight = parts.consistency_weight;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = last_lr;
    const double nb = static_cast<double>(cfg.batches_per_epoch);
    stats.parts.bce_clip = epoch_sum.bce_clip / nb;
    stats.parts.bce_frame = epoch_sum.bce_frame / nb;
    stats.parts.mse_clip = epoch_sum.mse_clip / nb;
    stats.parts.mse_frame = epoch_sum.mse_frame / nb;
    stats.parts.consistency_weight = epoch_sum.consistency_weight;
    result.epochs.push_back(stats);

    if (metrics) {
      nlohmann::json line;
      line["epoch"] = epoch;
      line["bce_clip"] = stats.parts.bce_clip;
      line["bce_frame"] = stats.parts.bce_frame;
      line["mse_clip"] = stats.parts.mse_clip;
      line["mse_frame"] = stats.parts.mse_frame;
      line["total"] = stats.parts.total();
      line["lr"] = stats.lr;
      *metrics << line.dump() << "\n";
    }
    if (log)
      *log << "epoch " << epoch + 1 << "/" << cfg.epochs << " total " << stats.parts.total() << " lr "
           << stats.lr << "\n";
  }

  result.initial_loss = result.epochs.front().parts.total();
  result.final_loss = result.epochs.back().parts.total();

  if (!out_dir.empty()) {
    save_checkpoint(out_dir + "/student.ckpt", student_params);
    save_checkpoint(out_dir + "/teacher.ckpt", teacher_params);
  }
  return result;
}

}  // namespace sedkit

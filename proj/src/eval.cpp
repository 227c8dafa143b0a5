#include "paramlock/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "paramlock/nn/network.hpp"
#include "paramlock/random.hpp"

namespace paramlock {
namespace {

void check_compatible(const Architecture& arch, const Dataset& d) {
  if (d.empty()) throw std::invalid_argument("evaluation dataset '" + d.name + "' is empty");
  if (d.image_shape != arch.input_shape()) {
    throw ShapeMismatch("dataset '" + d.name + "' images do not match the architecture input");
  }
  if (d.num_classes > arch.num_classes()) {
    throw ShapeMismatch("dataset '" + d.name + "' has more classes than the model outputs");
  }
}

EvalReport empty_report(const Architecture& arch, const Dataset& d, UnlockScope scope) {
  EvalReport r;
  r.dataset = d.name;
  r.scope = scope;
  r.sample_count = d.size();
  r.per_class_correct.assign(static_cast<std::size_t>(arch.num_classes()), 0);
  r.per_class_total.assign(static_cast<std::size_t>(arch.num_classes()), 0);
  r.predictions.reserve(d.size());
  return r;
}

void score(const Eigen::MatrixXf& logits, const Dataset& d, std::size_t first, EvalReport& r,
           std::size_t& nan_count) {
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    std::span<const float> col(logits.col(j).data(), static_cast<std::size_t>(logits.rows()));
    const auto cls = predict_class(col);
    if (std::any_of(col.begin(), col.end(), [](float v) { return !std::isfinite(v); })) {
      ++nan_count;
    }
    const int label = d.labels[first + static_cast<std::size_t>(j)];
    r.predictions.push_back(static_cast<int>(cls));
    ++r.per_class_total[static_cast<std::size_t>(label)];
    if (cls == static_cast<std::size_t>(label)) {
      ++r.correct;
      ++r.per_class_correct[static_cast<std::size_t>(label)];
    }
  }
}

void finish(EvalReport& r, std::size_t nan_count) {
  const auto n = static_cast<double>(r.sample_count);
  r.accuracy = static_cast<double>(r.correct) / n;
  r.nan_prediction_fraction = static_cast<double>(nan_count) / n;
}

template <ParameterSource Source>
void evaluate_batches(const Source& src, const Dataset& d, int batch_size, EvalReport& r,
                      std::size_t& nan_count) {
  const auto step = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t first = 0; first < d.size(); first += step) {
    const auto n = std::min(step, d.size() - first);
    const Eigen::MatrixXf batch =
        d.images.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(n));
    score(forward_logits(src, batch), d, first, r, nan_count);
  }
}

Model model_from_spans(const Architecture& arch, const std::vector<std::span<const float>>& spans) {
  std::vector<WeightTensor> tensors;
  const auto layout = arch.parameter_layout();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    tensors.push_back({layout[i].name, layout[i].dims,
                       std::vector<float>(spans[i].begin(), spans[i].end())});
  }
  return Model(arch, std::move(tensors));
}

AttackCurve run_retraining(Model init, const Dataset& manifest, const Dataset& validation,
                           const AttackConfig& cfg) {
  AttackCurve curve;
  curve.init = cfg.init;
  curve.manifest_fraction = cfg.manifest_fraction;
  curve.manifest_size = manifest.size();
  curve.validation_set = validation.name;
  curve.epochs = cfg.train.epochs;
  curve.batch_size = cfg.train.batch_size;
  curve.learning_rate = cfg.train.learning_rate;
  curve.train_seed = cfg.train.seed;
  curve.manifest_seed = cfg.manifest_seed;
  curve.init_seed = cfg.init_seed;
  curve.initial_accuracy = evaluate(init, validation).accuracy;
  curve.final_accuracy = curve.initial_accuracy;

  train(init, manifest, cfg.train, [&](const EpochMetrics& m, const Model& current) {
    const double acc = evaluate(current, validation).accuracy;
    curve.per_epoch_val_accuracy.push_back(acc);
    curve.per_epoch_train_loss.push_back(m.mean_loss);
    curve.per_epoch_non_finite_batches.push_back(m.non_finite_batches);
    curve.final_accuracy = acc;
  });
  return curve;
}

}  // namespace

const char* to_string(UnlockScope scope) {
  switch (scope) {
    case UnlockScope::kPlaintext: return "plaintext";
    case UnlockScope::kPerPass: return "per-pass";
    case UnlockScope::kPerSample: return "per-sample";
  }
  return "unknown";
}

const char* to_string(AttackInit init) {
  switch (init) {
    case AttackInit::kWrongKeyDecrypt: return "wrong-key-decrypt";
    case AttackInit::kRawLocked: return "raw-locked";
    case AttackInit::kFresh: return "fresh";
  }
  return "unknown";
}

EvalReport evaluate(const Model& m, const Dataset& d, const EvalOptions& opts) {
  check_compatible(m.arch(), d);
  auto r = empty_report(m.arch(), d, UnlockScope::kPlaintext);
  std::size_t nan_count = 0;
  evaluate_batches(m, d, opts.batch_size, r, nan_count);
  finish(r, nan_count);
  return r;
}

EvalReport evaluate(const LockedModel& lm, const MasterKey& key, const Dataset& d,
                    UnlockScope scope, const EvalOptions& opts) {
  check_compatible(lm.arch(), d);
  auto r = empty_report(lm.arch(), d, scope);
  std::size_t nan_count = 0;
  switch (scope) {
    case UnlockScope::kPerPass: {
      const UnlockedView view = unlock_model(lm, key);
      evaluate_batches(view, d, opts.batch_size, r, nan_count);
      break;
    }
    case UnlockScope::kPerSample:
      for (std::size_t i = 0; i < d.size(); ++i) {
        const UnlockedView view = unlock_model(lm, key);
        const Eigen::MatrixXf x = d.images.col(static_cast<Eigen::Index>(i));
        score(forward_logits(view, x), d, i, r, nan_count);
      }
      break;
    case UnlockScope::kPlaintext:
      throw std::invalid_argument("locked evaluation needs a per-pass or per-sample scope");
  }
  finish(r, nan_count);
  return r;
}

std::vector<MasterKey> random_keys(std::size_t n_keys, std::uint64_t seed,
                                   const std::optional<MasterKey>& exclude) {
  Rng rng(seed);
  std::vector<MasterKey> keys;
  keys.reserve(n_keys);
  while (keys.size() < n_keys) {
    MasterKey::Bytes b{};
    for (std::size_t i = 0; i < b.size(); i += 8) {
      const std::uint64_t w = rng();
      for (std::size_t k = 0; k < 8; ++k) b[i + k] = static_cast<std::uint8_t>(w >> (8 * k));
    }
    MasterKey key(b);
    if (exclude && key == *exclude) continue;
    keys.push_back(key);
  }
  return keys;
}

SweepReport sweep_keys(const LockedModel& lm, const Dataset& d, std::span<const MasterKey> keys,
                       unsigned threads) {
  if (keys.empty()) throw std::invalid_argument("sweep needs at least one key");
  check_compatible(lm.arch(), d);
  SweepReport r;
  r.dataset = d.name;
  r.n_keys = keys.size();
  r.per_key_accuracy.assign(keys.size(), 0.0);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      r.per_key_accuracy[i] = evaluate(lm, keys[i], d, UnlockScope::kPerPass).accuracy;
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(keys.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  const auto& acc = r.per_key_accuracy;
  r.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  r.min = *std::min_element(acc.begin(), acc.end());
  r.max = *std::max_element(acc.begin(), acc.end());
  return r;
}

SweepReport wrong_key_sweep(const LockedModel& lm, const Dataset& d, std::size_t n_keys,
                            std::uint64_t seed, const std::optional<MasterKey>& exclude,
                            unsigned threads) {
  if (n_keys < 1) throw std::invalid_argument("n_keys must be at least 1");
  const auto keys = random_keys(n_keys, seed, exclude);
  auto r = sweep_keys(lm, d, keys, threads);
  r.key_seed = seed;
  if (exclude) {
    // Count the redraws by replaying the generator without exclusion.
    const auto raw = random_keys(n_keys, seed);
    r.redrawn_keys = static_cast<std::size_t>(std::count(raw.begin(), raw.end(), *exclude));
  }
  return r;
}

LatencyReport benchmark_latency(const Model& m, const LockedModel& lm, const MasterKey& key,
                                const Dataset& d, std::size_t n_trials, std::size_t warmup) {
  if (n_trials < 1) throw std::invalid_argument("n_trials must be at least 1");
  check_compatible(m.arch(), d);
  if (!(m.arch() == lm.arch())) throw ShapeMismatch("plaintext and locked architectures differ");

  using Clock = std::chrono::steady_clock;
  LatencyReport r;
  r.param_count = m.param_count();
  r.n_trials = n_trials;
  r.warmup_trials = warmup;
  r.timer_resolution = static_cast<double>(Clock::period::num) / Clock::period::den;
  r.plain_samples.reserve(n_trials);
  r.locked_samples.reserve(n_trials);

  std::size_t sink = 0;
  for (std::size_t t = 0; t < warmup + n_trials; ++t) {
    const auto x = d.image(t % d.size());

    const auto t0 = Clock::now();
    sink += forward(m, x).class_index;
    const auto t1 = Clock::now();
    {
      const UnlockedView view = unlock_model(lm, key);
      sink += forward(view, x).class_index;
    }
    const auto t2 = Clock::now();

    if (t >= warmup) {
      r.plain_samples.push_back(std::chrono::duration<double>(t1 - t0).count());
      r.locked_samples.push_back(std::chrono::duration<double>(t2 - t1).count());
    }
  }
  // Keeps the forward calls observable.
  static std::atomic<std::size_t> observed{0};
  observed += sink;

  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  r.plain_mean = mean(r.plain_samples);
  r.locked_mean = mean(r.locked_samples);
  r.overhead_ratio = r.plain_mean > 0.0 ? r.locked_mean / r.plain_mean : 0.0;
  return r;
}

AttackCurve fine_tune_attack(const LockedModel& lm, const MasterKey& wrong_key,
                             const Dataset& manifest, const Dataset& validation,
                             const AttackConfig& cfg) {
  switch (cfg.init) {
    case AttackInit::kWrongKeyDecrypt: {
      Model init = [&] {
        const UnlockedView view = unlock_model(lm, wrong_key);
        return model_from_spans(lm.arch(), view.parameter_spans());
      }();
      return run_retraining(std::move(init), manifest, validation, cfg);
    }
    case AttackInit::kRawLocked: {
      std::vector<WeightTensor> tensors;
      for (const auto& t : lm.tensors()) {
        WeightTensor w{t.name, t.dims, std::vector<float>(t.bytes.size() / 4)};
        le_bytes_to_floats(t.bytes, w.values);
        tensors.push_back(std::move(w));
      }
      return run_retraining(Model(lm.arch(), std::move(tensors)), manifest, validation, cfg);
    }
    case AttackInit::kFresh:
      return fine_tune_control(lm.arch(), manifest, validation, cfg);
  }
  throw std::invalid_argument("unknown attack initialisation");
}

AttackCurve fine_tune_control(const Architecture& arch, const Dataset& manifest,
                              const Dataset& validation, const AttackConfig& cfg) {
  AttackConfig control = cfg;
  control.init = AttackInit::kFresh;
  return run_retraining(build_model(arch, cfg.init_seed), manifest, validation, control);
}

}  // namespace paramlock

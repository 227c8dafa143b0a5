#pragma once

// Experiment harness: accuracy under the correct and wrong keys, per-query
// latency, and the fine-tuning attack.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "paramlock/cipher.hpp"
#include "paramlock/dataset.hpp"
#include "paramlock/locker.hpp"
#include "paramlock/model.hpp"
#include "paramlock/training.hpp"

namespace paramlock {

/// How often a locked model is decrypted during evaluation.
enum class UnlockScope {
  kPlaintext,  // no locking involved
  kPerPass,    // one unlock for the whole evaluation pass
  kPerSample,  // one unlock per input
};

const char* to_string(UnlockScope scope);

struct EvalOptions {
  /// Inputs per forward call. Forced to 1 for kPerSample.
  int batch_size = 256;
};

struct EvalReport {
  std::string dataset;
  UnlockScope scope = UnlockScope::kPlaintext;
  std::size_t sample_count = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<std::size_t> per_class_correct;
  std::vector<std::size_t> per_class_total;
  double nan_prediction_fraction = 0.0;
  std::vector<int> predictions;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct SweepReport {
  std::string dataset;
  std::vector<double> per_key_accuracy;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::uint64_t key_seed = 0;
  std::size_t n_keys = 0;
  std::size_t redrawn_keys = 0;  // draws that collided with the excluded key

  friend bool operator==(const SweepReport&, const SweepReport&) = default;
};

struct LatencyReport {
  std::size_t param_count = 0;
  std::size_t n_trials = 0;
  std::size_t warmup_trials = 0;
  double plain_mean = 0.0;   // seconds per input
  double locked_mean = 0.0;  // seconds per input, unlock included
  double overhead_ratio = 0.0;
  double timer_resolution = 0.0;  // seconds
  std::vector<double> plain_samples;
  std::vector<double> locked_samples;

  double absolute_overhead() const { return locked_mean - plain_mean; }
};

enum class AttackInit {
  kWrongKeyDecrypt,  // unlock with the guessed key, retrain from those floats
  kRawLocked,        // reinterpret the locked bytes directly as floats
  kFresh,            // control arm: seeded fresh initialisation
};

const char* to_string(AttackInit init);

struct AttackConfig {
  TrainConfig train;
  AttackInit init = AttackInit::kWrongKeyDecrypt;
  /// Echoed into the curve; the manifest itself is passed in by the caller.
  double manifest_fraction = 0.10;
  std::uint64_t manifest_seed = 0;
  /// Seed for kFresh initialisation.
  std::uint64_t init_seed = 0;
};

struct AttackCurve {
  AttackInit init = AttackInit::kWrongKeyDecrypt;
  double manifest_fraction = 0.0;
  std::size_t manifest_size = 0;
  std::string validation_set;
  int epochs = 0;
  int batch_size = 0;
  double learning_rate = 0.0;
  std::uint64_t train_seed = 0;
  std::uint64_t manifest_seed = 0;
  std::uint64_t init_seed = 0;
  std::vector<double> per_epoch_val_accuracy;
  std::vector<double> per_epoch_train_loss;  // NaN when every batch was non-finite
  std::vector<int> per_epoch_non_finite_batches;
  double initial_accuracy = 0.0;  // before any retraining
  double final_accuracy = 0.0;
};

struct TrainingReport {
  std::string dataset;
  std::size_t param_count = 0;
  TrainConfig config;
  std::vector<EpochMetrics> epochs;
};

/// Plaintext evaluation. Throws std::invalid_argument on an empty dataset and
/// ShapeMismatch if the dataset does not fit the architecture.
EvalReport evaluate(const Model& m, const Dataset& d, const EvalOptions& opts = {});

/// Locked evaluation. `scope` must be kPerPass or kPerSample; the unlocked
/// parameters never outlive the scope they were created for.
EvalReport evaluate(const LockedModel& lm, const MasterKey& key, const Dataset& d,
                    UnlockScope scope = UnlockScope::kPerPass, const EvalOptions& opts = {});

/// Evaluates `lm` under each of `keys` (per-pass scope), in order.
SweepReport sweep_keys(const LockedModel& lm, const Dataset& d, std::span<const MasterKey> keys,
                       unsigned threads = 1);

/// `n_keys` uniformly random keys from `seed`; draws equal to `exclude` are
/// redrawn.
std::vector<MasterKey> random_keys(std::size_t n_keys, std::uint64_t seed,
                                   const std::optional<MasterKey>& exclude = std::nullopt);

SweepReport wrong_key_sweep(const LockedModel& lm, const Dataset& d, std::size_t n_keys,
                            std::uint64_t seed,
                            const std::optional<MasterKey>& exclude = std::nullopt,
                            unsigned threads = 1);

/// Single-input latency of the plaintext path and of the unlock-per-query
/// path, interleaved trial by trial. Strictly single-threaded.
LatencyReport benchmark_latency(const Model& m, const LockedModel& lm, const MasterKey& key,
                                const Dataset& d, std::size_t n_trials, std::size_t warmup);

/// Retrains from the chosen initialisation on `manifest`, recording
/// validation accuracy after every epoch. Non-finite weights are kept as-is.
AttackCurve fine_tune_attack(const LockedModel& lm, const MasterKey& wrong_key,
                             const Dataset& manifest, const Dataset& validation,
                             const AttackConfig& cfg);

/// Control arm: same procedure from a fresh seeded initialisation.
AttackCurve fine_tune_control(const Architecture& arch, const Dataset& manifest,
                              const Dataset& validation, const AttackConfig& cfg);

}  // namespace paramlock

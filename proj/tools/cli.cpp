#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "paramlock/eval.hpp"
#include "paramlock/model_io.hpp"
#include "paramlock/nn/network.hpp"
#include "paramlock/report.hpp"

namespace paramlock::cli {
namespace {

struct KeyFlags {
  std::string hex;
  std::string file;
  std::string env;

  bool given() const { return !hex.empty() || !file.empty() || !env.empty(); }
};

struct DataFlags {
  std::string dir;
  bool synthetic = false;
  int per_class = 100;
  std::uint64_t seed = 1;
  std::string split = "test";
};

struct OutputFlags {
  std::string format = "text";
  std::string path;
};

void add_key_flags(CLI::App* sub, KeyFlags& k, const std::string& what) {
  auto* hex = sub->add_option("--key", k.hex, what + " as 32 hex characters");
  auto* file = sub->add_option("--key-file", k.file, what + " as a raw 16-byte file")
                   ->check(CLI::ExistingFile);
  auto* env = sub->add_option("--key-env", k.env,
                              "name of an environment variable holding " + what + " in hex");
  hex->excludes(file)->excludes(env);
  file->excludes(env);
}

// Key material never appears in messages.
std::optional<MasterKey> resolve_key(const KeyFlags& k) {
  try {
    if (!k.hex.empty()) return MasterKey::from_hex(k.hex);
    if (!k.env.empty()) {
      const char* value = std::getenv(k.env.c_str());
      if (value == nullptr) throw UsageError("environment variable " + k.env + " is not set");
      return MasterKey::from_hex(value);
    }
    if (!k.file.empty()) {
      std::ifstream in(k.file, std::ios::binary);
      std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
      return MasterKey::from_bytes(bytes);
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return std::nullopt;
}

MasterKey require_key(const KeyFlags& k) {
  auto key = resolve_key(k);
  if (!key) throw UsageError("a key is required (--key, --key-file or --key-env)");
  return *key;
}

void add_data_flags(CLI::App* sub, DataFlags& d, bool with_split) {
  auto* dir = sub->add_option("--data", d.dir,
                              "directory with MNIST-style IDX files (train-*/t10k-*)")
                  ->check(CLI::ExistingDirectory);
  auto* syn = sub->add_flag("--synthetic", d.synthetic,
                            "use the procedural dataset (the default when --data is absent)");
  dir->excludes(syn);
  sub->add_option("--per-class", d.per_class, "synthetic samples per class")
      ->check(CLI::PositiveNumber);
  sub->add_option("--data-seed", d.seed,
                  "synthetic seed; the test split uses data-seed + 1");
  if (with_split) {
    sub->add_option("--split", d.split, "which split to use")
        ->check(CLI::IsMember({"train", "test"}));
  }
}

Dataset load_data(const DataFlags& d, const Architecture& arch, Split split) {
  if (!d.dir.empty()) return load_mnist_dir(d.dir, split);
  const auto& in = arch.input_shape();
  if (in.height != in.width) {
    throw std::invalid_argument("synthetic data needs a square input shape");
  }
  SyntheticConfig cfg;
  cfg.num_classes = arch.num_classes();
  cfg.per_class = d.per_class;
  cfg.image_size = in.height;
  cfg.channels = in.channels;
  cfg.seed = split == Split::kTrain ? d.seed : d.seed + 1;
  return synthetic_dataset(cfg);
}

Split split_of(const DataFlags& d) { return d.split == "train" ? Split::kTrain : Split::kTest; }

void add_output_flags(CLI::App* sub, OutputFlags& o) {
  sub->add_option("--format", o.format, "report format")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  sub->add_option("--out", o.path, "write the report here instead of stdout");
}

template <typename Report>
void deliver(const Report& r, const OutputFlags& o, std::ostream& out) {
  const auto format = parse_report_format(o.format);
  if (o.path.empty()) {
    emit_report(r, format, out);
    return;
  }
  std::ofstream file(o.path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + o.path + " for writing");
  emit_report(r, format, file);
}

Architecture read_arch_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Architecture::parse(ss.str());
}

// ---- subcommands ----

struct TrainCmd {
  std::string arch_path;
  std::string model_out;
  DataFlags data;
  TrainConfig cfg;
  OutputFlags report;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("train", "train a plaintext model and write it to a file");
    sub->add_option("--arch", arch_path, "architecture description")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--model-out", model_out, "output model file")->required();
    add_data_flags(sub, data, false);
    sub->add_option("--epochs", cfg.epochs, "training epochs")->check(CLI::NonNegativeNumber);
    sub->add_option("--batch-size", cfg.batch_size, "mini-batch size")
        ->check(CLI::PositiveNumber);
    sub->add_option("--lr", cfg.learning_rate, "SGD learning rate")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", cfg.seed, "seed for initialisation and shuffling");
    add_output_flags(sub, report);
  }

  int operator()(std::ostream& out) const {
    const auto arch = read_arch_file(arch_path);
    const auto train_data = load_data(data, arch, Split::kTrain);
    auto result = train(build_model(arch, cfg.seed), train_data, cfg);
    save_model(result.model, model_out);
    deliver(TrainingReport{train_data.name, arch.parameter_count(), cfg, result.epochs}, report,
            out);
    return kExitOk;
  }
};

struct LockCmd {
  std::string model_path;
  std::string locked_out;
  KeyFlags key;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("lock", "encrypt a plaintext model's parameters");
    sub->add_option("--model", model_path, "plaintext model file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--locked-out", locked_out, "output locked model file")->required();
    add_key_flags(sub, key, "the master key");
  }

  int operator()(std::ostream& out) const {
    const auto k = require_key(key);
    const auto m = load_model(model_path);
    save_locked(lock_model(m, k), locked_out);
    out << "locked " << m.param_count() << " parameters into " << locked_out << '\n';
    return kExitOk;
  }
};

struct UnlockCheckCmd {
  std::string locked_path;
  std::string reference_path;
  KeyFlags key;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand(
        "unlock-check", "verify a locked file and unlock it in memory without writing anything");
    sub->add_option("--locked", locked_path, "locked model file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--model", reference_path,
                    "plaintext model to compare the unlocked parameters against")
        ->check(CLI::ExistingFile);
    add_key_flags(sub, key, "the master key");
  }

  int operator()(std::ostream& out) const {
    const auto k = require_key(key);
    const auto lm = load_locked(locked_path);
    const auto view = unlock_model(lm, k);
    std::size_t non_finite = 0;
    for (auto span : view.parameter_spans()) {
      for (float v : span) non_finite += std::isfinite(v) ? 0 : 1;
    }
    out << "integrity: ok\nparameters: " << lm.param_count()
        << "\nnon-finite parameters: " << non_finite << '\n';
    if (reference_path.empty()) return kExitOk;
    const bool same = view.bit_equal(load_model(reference_path));
    out << "matches reference: " << (same ? "yes" : "no") << '\n';
    return same ? kExitOk : kExitRuntime;
  }
};

// Either a plaintext model or a locked model plus key.
struct ModelSource {
  std::string model_path;
  std::string locked_path;
  KeyFlags key;

  void add(CLI::App* sub) {
    auto* m = sub->add_option("--model", model_path, "plaintext model file")
                  ->check(CLI::ExistingFile);
    auto* l = sub->add_option("--locked", locked_path, "locked model file")
                  ->check(CLI::ExistingFile);
    m->excludes(l);
    add_key_flags(sub, key, "the key for --locked");
  }

  void check() const {
    if (model_path.empty() == locked_path.empty()) {
      throw UsageError("exactly one of --model or --locked is required");
    }
    if (!model_path.empty() && key.given()) {
      throw UsageError("a key only applies to --locked");
    }
  }
};

struct InferCmd {
  ModelSource src;
  DataFlags data;
  std::size_t index = 0;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("infer", "classify one sample and print its logits");
    src.add(sub);
    add_data_flags(sub, data, true);
    sub->add_option("--index", index, "sample index within the split");
  }

  int operator()(std::ostream& out) const {
    src.check();
    auto print = [&](const auto& source, const Dataset& d) {
      if (index >= d.size()) {
        throw UsageError("--index " + std::to_string(index) + " is out of range for " +
                         std::to_string(d.size()) + " samples");
      }
      const auto p = forward(source, d.image(index));
      out << "index: " << index << "\nlabel: " << d.labels[index]
          << "\npredicted: " << p.class_index << "\nnon-finite logits: "
          << (p.nan_flag ? "yes" : "no") << "\nlogits:";
      for (float v : p.logits) out << ' ' << format_double(v);
      out << '\n';
    };
    if (!src.model_path.empty()) {
      const auto m = load_model(src.model_path);
      print(m, load_data(data, m.arch(), split_of(data)));
    } else {
      const auto k = require_key(src.key);
      const auto lm = load_locked(src.locked_path);
      const auto d = load_data(data, lm.arch(), split_of(data));
      const auto view = unlock_model(lm, k);
      print(view, d);
    }
    return kExitOk;
  }
};

struct EvalCmd {
  ModelSource src;
  DataFlags data;
  std::string scope = "per-pass";
  EvalOptions opts;
  OutputFlags report;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("eval", "accuracy of a plaintext or locked model");
    src.add(sub);
    add_data_flags(sub, data, true);
    sub->add_option("--scope", scope, "unlock granularity for --locked")
        ->check(CLI::IsMember({"per-pass", "per-sample"}));
    sub->add_option("--batch-size", opts.batch_size, "inputs per forward call")
        ->check(CLI::PositiveNumber);
    add_output_flags(sub, report);
  }

  int operator()(std::ostream& out) const {
    src.check();
    if (!src.model_path.empty()) {
      const auto m = load_model(src.model_path);
      deliver(evaluate(m, load_data(data, m.arch(), split_of(data)), opts), report, out);
    } else {
      const auto k = require_key(src.key);
      const auto lm = load_locked(src.locked_path);
      const auto s = scope == "per-sample" ? UnlockScope::kPerSample : UnlockScope::kPerPass;
      deliver(evaluate(lm, k, load_data(data, lm.arch(), split_of(data)), s, opts), report, out);
    }
    return kExitOk;
  }
};

struct SweepCmd {
  std::string locked_path;
  KeyFlags exclude;
  DataFlags data;
  std::size_t n_keys = 100;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  OutputFlags report;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("sweep", "accuracy under seeded random wrong keys");
    sub->add_option("--locked", locked_path, "locked model file")
        ->required()
        ->check(CLI::ExistingFile);
    add_key_flags(sub, exclude, "the true key (excluded from the draw)");
    add_data_flags(sub, data, true);
    sub->add_option("--keys", n_keys, "number of random keys")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "key-generation seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    add_output_flags(sub, report);
  }

  int operator()(std::ostream& out) const {
    const auto lm = load_locked(locked_path);
    const auto d = load_data(data, lm.arch(), split_of(data));
    deliver(wrong_key_sweep(lm, d, n_keys, seed, resolve_key(exclude), threads), report, out);
    return kExitOk;
  }
};

struct BenchCmd {
  std::string model_path;
  std::string locked_path;
  KeyFlags key;
  DataFlags data;
  std::size_t trials = 50;
  std::size_t warmup = 5;
  OutputFlags report;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand(
        "bench", "single-input latency, plaintext versus unlock-per-query");
    sub->add_option("--model", model_path, "plaintext model file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--locked", locked_path, "locked model file")
        ->required()
        ->check(CLI::ExistingFile);
    add_key_flags(sub, key, "the master key");
    add_data_flags(sub, data, true);
    sub->add_option("--trials", trials, "timed trials per path")->check(CLI::PositiveNumber);
    sub->add_option("--warmup", warmup, "untimed trials per path");
    add_output_flags(sub, report);
  }

  int operator()(std::ostream& out) const {
    const auto k = require_key(key);
    const auto m = load_model(model_path);
    const auto lm = load_locked(locked_path);
    const auto d = load_data(data, m.arch(), split_of(data));
    deliver(benchmark_latency(m, lm, k, d, trials, warmup), report, out);
    return kExitOk;
  }
};

struct AttackCmd {
  std::string locked_path;
  KeyFlags guess;
  std::uint64_t guess_seed = 0;
  std::string init = "wrong-key";
  DataFlags data;
  AttackConfig cfg;
  OutputFlags report{"csv", {}};

  AttackCmd() { cfg.train.epochs = 50; }

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand(
        "attack", "retrain a locked model on a manifest drawn from the training split");
    sub->add_option("--locked", locked_path, "locked model file")
        ->required()
        ->check(CLI::ExistingFile);
    add_key_flags(sub, guess, "the attacker's key guess");
    sub->add_option("--guess-seed", guess_seed, "seed for a random key guess when none is given");
    sub->add_option("--init", init, "starting parameters")
        ->check(CLI::IsMember({"wrong-key", "raw-locked", "fresh"}));
    add_data_flags(sub, data, false);
    sub->add_option("--fraction", cfg.manifest_fraction,
                    "share of the training split given to the attacker")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--manifest-seed", cfg.manifest_seed, "manifest sampling seed");
    sub->add_option("--init-seed", cfg.init_seed, "seed for --init fresh");
    sub->add_option("--epochs", cfg.train.epochs, "retraining epochs")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--batch-size", cfg.train.batch_size, "mini-batch size")
        ->check(CLI::PositiveNumber);
    sub->add_option("--lr", cfg.train.learning_rate, "SGD learning rate")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", cfg.train.seed, "shuffling seed");
    add_output_flags(sub, report);
  }

  int operator()(std::ostream& out) const {
    const auto lm = load_locked(locked_path);
    const auto train_data = load_data(data, lm.arch(), Split::kTrain);
    const auto val = load_data(data, lm.arch(), Split::kTest);
    const auto manifest = manifest_split(train_data, cfg.manifest_fraction, cfg.manifest_seed);
    AttackConfig c = cfg;
    if (init == "fresh") {
      c.init = AttackInit::kFresh;
      deliver(fine_tune_control(lm.arch(), manifest, val, c), report, out);
      return kExitOk;
    }
    c.init = init == "raw-locked" ? AttackInit::kRawLocked : AttackInit::kWrongKeyDecrypt;
    auto key = resolve_key(guess);
    if (!key) key = random_keys(1, guess_seed).front();
    deliver(fine_tune_attack(lm, *key, manifest, val, c), report, out);
    return kExitOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lock neural-network parameters with a key-derived S-Box cipher", "paramlock"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  TrainCmd train_cmd;
  LockCmd lock_cmd;
  UnlockCheckCmd unlock_check_cmd;
  InferCmd infer_cmd;
  EvalCmd eval_cmd;
  SweepCmd sweep_cmd;
  BenchCmd bench_cmd;
  AttackCmd attack_cmd;
  train_cmd.add(app);
  lock_cmd.add(app);
  unlock_check_cmd.add(app);
  infer_cmd.add(app);
  eval_cmd.add(app);
  sweep_cmd.add(app);
  bench_cmd.add(app);
  attack_cmd.add(app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "train") return train_cmd(out);
    if (name == "lock") return lock_cmd(out);
    if (name == "unlock-check") return unlock_check_cmd(out);
    if (name == "infer") return infer_cmd(out);
    if (name == "eval") return eval_cmd(out);
    if (name == "sweep") return sweep_cmd(out);
    if (name == "bench") return bench_cmd(out);
    return attack_cmd(out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace paramlock::cli

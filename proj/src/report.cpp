#include "paramlock/report.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

namespace paramlock {
namespace {

using nlohmann::json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

std::vector<double> numbers_from(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(number_from(x));
  return v;
}

json header(const char* schema) {
  return json{{"schema", schema}, {"version", kReportSchemaVersion}};
}

void expect_schema(const json& j, const char* schema) {
  if (!j.is_object() || j.value("schema", "") != schema ||
      j.value("version", 0) != kReportSchemaVersion) {
    throw std::invalid_argument(std::string("JSON is not a ") + schema + " v1 document");
  }
}

void write(std::ostream& os, const json& j) {
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("report sink write failure");
}

void check(std::ostream& os) {
  if (!os) throw std::runtime_error("report sink write failure");
}

UnlockScope scope_from(const std::string& s) {
  for (auto sc : {UnlockScope::kPlaintext, UnlockScope::kPerPass, UnlockScope::kPerSample}) {
    if (s == to_string(sc)) return sc;
  }
  throw std::invalid_argument("unknown unlock scope '" + s + "'");
}

AttackInit init_from(const std::string& s) {
  for (auto i : {AttackInit::kWrongKeyDecrypt, AttackInit::kRawLocked, AttackInit::kFresh}) {
    if (s == to_string(i)) return i;
  }
  throw std::invalid_argument("unknown attack init '" + s + "'");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ReportFormat parse_report_format(std::string_view token) {
  if (token == "text") return ReportFormat::kText;
  if (token == "json") return ReportFormat::kJson;
  if (token == "csv") return ReportFormat::kCsv;
  throw UsageError("unknown report format '" + std::string(token) + "' (expected text, json or csv)");
}

json to_json(const EvalReport& r) {
  json j = header("paramlock.eval-report");
  j["dataset"] = r.dataset;
  j["scope"] = to_string(r.scope);
  j["sample_count"] = r.sample_count;
  j["correct"] = r.correct;
  j["accuracy"] = number(r.accuracy);
  j["per_class_correct"] = r.per_class_correct;
  j["per_class_total"] = r.per_class_total;
  j["nan_prediction_fraction"] = number(r.nan_prediction_fraction);
  j["predictions"] = r.predictions;
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  expect_schema(j, "paramlock.eval-report");
  EvalReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.scope = scope_from(j.at("scope").get<std::string>());
  r.sample_count = j.at("sample_count").get<std::size_t>();
  r.correct = j.at("correct").get<std::size_t>();
  r.accuracy = number_from(j.at("accuracy"));
  r.per_class_correct = j.at("per_class_correct").get<std::vector<std::size_t>>();
  r.per_class_total = j.at("per_class_total").get<std::vector<std::size_t>>();
  r.nan_prediction_fraction = number_from(j.at("nan_prediction_fraction"));
  r.predictions = j.at("predictions").get<std::vector<int>>();
  return r;
}

json to_json(const SweepReport& r) {
  json j = header("paramlock.sweep-report");
  j["dataset"] = r.dataset;
  j["key_seed"] = r.key_seed;
  j["n_keys"] = r.n_keys;
  j["redrawn_keys"] = r.redrawn_keys;
  j["mean"] = number(r.mean);
  j["min"] = number(r.min);
  j["max"] = number(r.max);
  j["per_key_accuracy"] = numbers(r.per_key_accuracy);
  return j;
}

SweepReport sweep_report_from_json(const json& j) {
  expect_schema(j, "paramlock.sweep-report");
  SweepReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.key_seed = j.at("key_seed").get<std::uint64_t>();
  r.n_keys = j.at("n_keys").get<std::size_t>();
  r.redrawn_keys = j.at("redrawn_keys").get<std::size_t>();
  r.mean = number_from(j.at("mean"));
  r.min = number_from(j.at("min"));
  r.max = number_from(j.at("max"));
  r.per_key_accuracy = numbers_from(j.at("per_key_accuracy"));
  return r;
}

json to_json(const LatencyReport& r) {
  json j = header("paramlock.latency-report");
  j["mode"] = "per-sample";
  j["param_count"] = r.param_count;
  j["n_trials"] = r.n_trials;
  j["warmup_trials"] = r.warmup_trials;
  j["timer_resolution_seconds"] = number(r.timer_resolution);
  j["plain_mean_seconds"] = number(r.plain_mean);
  j["locked_mean_seconds"] = number(r.locked_mean);
  j["absolute_overhead_seconds"] = number(r.absolute_overhead());
  j["overhead_ratio"] = number(r.overhead_ratio);
  j["plain_samples"] = numbers(r.plain_samples);
  j["locked_samples"] = numbers(r.locked_samples);
  return j;
}

json to_json(const AttackCurve& r) {
  json j = header("paramlock.attack-curve");
  j["init"] = to_string(r.init);
  j["manifest_fraction"] = number(r.manifest_fraction);
  j["manifest_size"] = r.manifest_size;
  j["validation_set"] = r.validation_set;
  j["epochs"] = r.epochs;
  j["batch_size"] = r.batch_size;
  j["learning_rate"] = number(r.learning_rate);
  j["train_seed"] = r.train_seed;
  j["manifest_seed"] = r.manifest_seed;
  j["init_seed"] = r.init_seed;
  j["initial_accuracy"] = number(r.initial_accuracy);
  j["final_accuracy"] = number(r.final_accuracy);
  j["per_epoch_val_accuracy"] = numbers(r.per_epoch_val_accuracy);
  j["per_epoch_train_loss"] = numbers(r.per_epoch_train_loss);
  j["per_epoch_non_finite_batches"] = r.per_epoch_non_finite_batches;
  return j;
}

AttackCurve attack_curve_from_json(const json& j) {
  expect_schema(j, "paramlock.attack-curve");
  AttackCurve r;
  r.init = init_from(j.at("init").get<std::string>());
  r.manifest_fraction = number_from(j.at("manifest_fraction"));
  r.manifest_size = j.at("manifest_size").get<std::size_t>();
  r.validation_set = j.at("validation_set").get<std::string>();
  r.epochs = j.at("epochs").get<int>();
  r.batch_size = j.at("batch_size").get<int>();
  r.learning_rate = number_from(j.at("learning_rate"));
  r.train_seed = j.at("train_seed").get<std::uint64_t>();
  r.manifest_seed = j.at("manifest_seed").get<std::uint64_t>();
  r.init_seed = j.at("init_seed").get<std::uint64_t>();
  r.initial_accuracy = number_from(j.at("initial_accuracy"));
  r.final_accuracy = number_from(j.at("final_accuracy"));
  r.per_epoch_val_accuracy = numbers_from(j.at("per_epoch_val_accuracy"));
  r.per_epoch_train_loss = numbers_from(j.at("per_epoch_train_loss"));
  r.per_epoch_non_finite_batches = j.at("per_epoch_non_finite_batches").get<std::vector<int>>();
  return r;
}

json to_json(const TrainingReport& r) {
  json j = header("paramlock.training-report");
  j["dataset"] = r.dataset;
  j["param_count"] = r.param_count;
  j["epochs"] = r.config.epochs;
  j["batch_size"] = r.config.batch_size;
  j["learning_rate"] = number(r.config.learning_rate);
  j["seed"] = r.config.seed;
  json rows = json::array();
  for (const auto& e : r.epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"mean_loss", number(e.mean_loss)},
                    {"train_accuracy", number(e.train_accuracy)},
                    {"non_finite_batches", e.non_finite_batches}});
  }
  j["per_epoch"] = rows;
  return j;
}

void emit_report(const EvalReport& r, ReportFormat format, std::ostream& os) {
  switch (format) {
    case ReportFormat::kJson: return write(os, to_json(r));
    case ReportFormat::kCsv:
      os << "class,correct,total\n";
      for (std::size_t c = 0; c < r.per_class_total.size(); ++c) {
        os << c << ',' << r.per_class_correct[c] << ',' << r.per_class_total[c] << '\n';
      }
      return check(os);
    case ReportFormat::kText:
      os << "dataset: " << r.dataset << "\nscope: " << to_string(r.scope)
         << "\nsamples: " << r.sample_count << "\ncorrect: " << r.correct
         << "\naccuracy: " << format_double(r.accuracy)
         << "\nnan_prediction_fraction: " << format_double(r.nan_prediction_fraction) << '\n';
      for (std::size_t c = 0; c < r.per_class_total.size(); ++c) {
        os << "class " << c << ": " << r.per_class_correct[c] << '/' << r.per_class_total[c]
           << '\n';
      }
      return check(os);
  }
}

void emit_report(const SweepReport& r, ReportFormat format, std::ostream& os) {
  switch (format) {
    case ReportFormat::kJson: return write(os, to_json(r));
    case ReportFormat::kCsv:
      os << "key_index,accuracy\n";
      for (std::size_t i = 0; i < r.per_key_accuracy.size(); ++i) {
        os << i << ',' << format_double(r.per_key_accuracy[i]) << '\n';
      }
      return check(os);
    case ReportFormat::kText:
      os << "dataset: " << r.dataset << "\nkeys: " << r.n_keys << " (seed " << r.key_seed
         << ", redrawn " << r.redrawn_keys << ")\nmean accuracy: " << format_double(r.mean)
         << "\nmin accuracy: " << format_double(r.min)
         << "\nmax accuracy: " << format_double(r.max) << '\n';
      return check(os);
  }
}

void emit_report(const LatencyReport& r, ReportFormat format, std::ostream& os) {
  switch (format) {
    case ReportFormat::kJson: return write(os, to_json(r));
    case ReportFormat::kCsv:
      os << "trial,plain_seconds,locked_seconds\n";
      for (std::size_t i = 0; i < r.plain_samples.size(); ++i) {
        os << i << ',' << format_double(r.plain_samples[i]) << ','
           << format_double(r.locked_samples[i]) << '\n';
      }
      return check(os);
    case ReportFormat::kText:
      os << "mode: per-sample unlock\nparameters: " << r.param_count
         << "\ntrials: " << r.n_trials << " (warmup " << r.warmup_trials << ")"
         << "\ntimer resolution: " << format_double(r.timer_resolution) << " s"
         << "\nplain mean: " << format_double(r.plain_mean) << " s"
         << "\nlocked mean: " << format_double(r.locked_mean) << " s"
         << "\nabsolute overhead: " << format_double(r.absolute_overhead()) << " s"
         << "\noverhead ratio: " << format_double(r.overhead_ratio) << '\n';
      return check(os);
  }
}

void emit_report(const AttackCurve& r, ReportFormat format, std::ostream& os) {
  switch (format) {
    case ReportFormat::kJson: return write(os, to_json(r));
    case ReportFormat::kCsv:
      os << "epoch,val_accuracy\n";
      for (std::size_t i = 0; i < r.per_epoch_val_accuracy.size(); ++i) {
        os << i + 1 << ',' << format_double(r.per_epoch_val_accuracy[i]) << '\n';
      }
      return check(os);
    case ReportFormat::kText:
      os << "init: " << to_string(r.init) << "\nmanifest: " << r.manifest_size << " samples ("
         << format_double(r.manifest_fraction) << " of training data, seed " << r.manifest_seed
         << ")\nvalidation: " << r.validation_set << "\nepochs: " << r.epochs
         << ", batch " << r.batch_size << ", lr " << format_double(r.learning_rate)
         << ", seed " << r.train_seed << "\ninitial accuracy: "
         << format_double(r.initial_accuracy)
         << "\nfinal accuracy: " << format_double(r.final_accuracy) << '\n';
      return check(os);
  }
}

void emit_report(const TrainingReport& r, ReportFormat format, std::ostream& os) {
  switch (format) {
    case ReportFormat::kJson: return write(os, to_json(r));
    case ReportFormat::kCsv:
      os << "epoch,mean_loss,train_accuracy,non_finite_batches\n";
      for (const auto& e : r.epochs) {
        os << e.epoch << ',' << format_double(e.mean_loss) << ','
           << format_double(e.train_accuracy) << ',' << e.non_finite_batches << '\n';
      }
      return check(os);
    case ReportFormat::kText:
      os << "dataset: " << r.dataset << "\nparameters: " << r.param_count << '\n';
      for (const auto& e : r.epochs) {
        os << "epoch " << e.epoch << ": loss " << format_double(e.mean_loss) << ", accuracy "
           << format_double(e.train_accuracy);
        if (e.non_finite_batches > 0) os << ", non-finite batches " << e.non_finite_batches;
        os << '\n';
      }
      return check(os);
  }
}

}  // namespace paramlock

#include "paramlock/training.hpp"

#include <algorithm>
#include <numeric>

#include "paramlock/nn/network.hpp"
#include "paramlock/random.hpp"

namespace paramlock {

TrainResult train(const Model& initial, const Dataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (data.empty()) throw std::invalid_argument("training set is empty");
  if (data.image_shape != initial.arch().input_shape()) {
    throw ShapeMismatch("dataset image shape does not match the architecture input");
  }
  for (int y : data.labels) {
    if (y < 0 || y >= initial.arch().num_classes()) {
      throw std::invalid_argument("dataset label exceeds the model's class count");
    }
  }

  TrainResult result{initial, {}};
  Model& model = result.model;
  const auto& arch = model.arch();

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<float>> grads;
  Eigen::MatrixXf batch;
  std::vector<int> labels;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    EpochMetrics m;
    m.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t finite_batches = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.resize(data.images.rows(), static_cast<Eigen::Index>(end - start));
      labels.resize(end - start);
      for (std::size_t k = start; k < end; ++k) {
        batch.col(static_cast<Eigen::Index>(k - start)) =
            data.images.col(static_cast<Eigen::Index>(order[k]));
        labels[k - start] = data.labels[order[k]];
      }
      const auto spans = model.parameter_spans();
      const auto loss = nn::loss_and_gradients<float>(arch, spans, batch, labels, grads);
      correct += loss.correct;
      if (loss.finite) {
        loss_sum += static_cast<double>(loss.loss);
        ++finite_batches;
      } else {
        ++m.non_finite_batches;
      }
      if (cfg.learning_rate != 0.0f) {
        auto& tensors = model.mutable_tensors();
        for (std::size_t t = 0; t < tensors.size(); ++t) {
          Eigen::Map<Eigen::VectorXf> w(tensors[t].values.data(),
                                        static_cast<Eigen::Index>(tensors[t].values.size()));
          Eigen::Map<const Eigen::VectorXf> g(grads[t].data(), static_cast<Eigen::Index>(grads[t].size()));
          w -= cfg.learning_rate * g;
        }
      }
    }
    m.mean_loss = finite_batches > 0 ? loss_sum / static_cast<double>(finite_batches)
                                     : std::numeric_limits<double>::quiet_NaN();
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m, model);
  }
  return result;
}

}  // namespace paramlock

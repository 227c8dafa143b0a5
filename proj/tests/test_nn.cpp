#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "paramlock/nn/network.hpp"
#include "paramlock/training.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace paramlock;

namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();
constexpr float kInf = std::numeric_limits<float>::infinity();

template <typename Scalar>
std::vector<std::span<const Scalar>> spans_of(const std::vector<std::vector<Scalar>>& p) {
  return {p.begin(), p.end()};
}

std::vector<std::vector<float>> to_float(const std::vector<std::vector<double>>& p) {
  std::vector<std::vector<float>> out;
  for (const auto& v : p) out.emplace_back(v.begin(), v.end());
  return out;
}

// Inputs as a features x N matrix plus the matching oracle inputs.
Eigen::MatrixXd batch(Rng& rng, const Architecture& arch, int n) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(arch.input_shape().size()), n);
  for (int j = 0; j < n; ++j) {
    const auto v = gen::input(rng, arch);
    for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i), j) = v[i];
  }
  return x;
}

}  // namespace

TEST(Forward, DoubleEngineMatchesBruteForceOracle) {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const auto arch = gen::architecture(rng);
    SCOPED_TRACE(arch.to_text());
    const auto p = gen::params(rng, arch);
    const Eigen::MatrixXd x = batch(rng, arch, 3);
    const Eigen::MatrixXd logits = nn::forward_batch<double>(arch, spans_of(p), x);
    for (int j = 0; j < 3; ++j) {
      const Eigen::VectorXd col = x.col(j);
      const auto expect = oracle::forward(arch, p, std::span<const double>(col.data(), col.size()));
      ASSERT_EQ(static_cast<std::size_t>(logits.rows()), expect.size());
      for (std::size_t k = 0; k < expect.size(); ++k) {
        ASSERT_NEAR(logits(static_cast<Eigen::Index>(k), j), expect[k], 1e-6);
      }
    }
  }
}

TEST(Forward, FloatEngineTracksOracle) {
  Rng rng(32);
  for (int i = 0; i < 100; ++i) {
    const auto arch = gen::architecture(rng);
    SCOPED_TRACE(arch.to_text());
    const auto p = gen::params(rng, arch);
    const auto pf = to_float(p);
    const auto in = gen::input(rng, arch);
    std::vector<double> in_rounded(in.size());
    Eigen::MatrixXf x(static_cast<Eigen::Index>(in.size()), 1);
    for (std::size_t k = 0; k < in.size(); ++k) {
      x(static_cast<Eigen::Index>(k), 0) = static_cast<float>(in[k]);
      in_rounded[k] = static_cast<float>(in[k]);
    }
    std::vector<std::vector<double>> p_rounded;
    for (const auto& v : pf) p_rounded.emplace_back(v.begin(), v.end());
    const auto expect = oracle::forward(arch, p_rounded, in_rounded);
    const Eigen::MatrixXf logits = nn::forward_batch<float>(arch, spans_of(pf), x);
    for (std::size_t k = 0; k < expect.size(); ++k) {
      ASSERT_NEAR(logits(static_cast<Eigen::Index>(k), 0), expect[k],
                  1e-5 * std::max(1.0, std::abs(expect[k])));
    }
  }
}

TEST(Forward, ReferenceModelsMatchOracle) {
  Rng rng(33);
  for (const auto& arch : {mnist_architecture(), fashion_mnist_architecture()}) {
    const auto p = gen::params(rng, arch, 0.1);
    const auto in = gen::input(rng, arch);
    Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(in.data(), static_cast<Eigen::Index>(in.size()));
    const Eigen::MatrixXd logits = nn::forward_batch<double>(arch, spans_of(p), x);
    const auto expect = oracle::forward(arch, p, in);
    for (std::size_t k = 0; k < expect.size(); ++k) {
      EXPECT_NEAR(logits(static_cast<Eigen::Index>(k), 0), expect[k], 1e-6);
    }
  }
}

TEST(Forward, BatchColumnsAreIndependent) {
  Rng rng(34);
  const auto arch = gen::architecture(rng);
  const auto p = gen::params(rng, arch);
  const Eigen::MatrixXd x = batch(rng, arch, 5);
  const Eigen::MatrixXd all = nn::forward_batch<double>(arch, spans_of(p), x);
  for (int j = 0; j < 5; ++j) {
    const Eigen::MatrixXd one = nn::forward_batch<double>(arch, spans_of(p), Eigen::MatrixXd(x.col(j)));
    EXPECT_TRUE(one.col(0).isApprox(all.col(j), 1e-12));
  }
}

TEST(Forward, ShapeMismatchIsReported) {
  const auto m = build_model(mnist_architecture(), 1);
  std::vector<float> wrong(27 * 28);
  EXPECT_THROW(forward(m, wrong), ShapeMismatch);
}

TEST(Forward, NonFiniteWeightsPropagate) {
  auto m = build_model(Architecture::parse("input 1x6x6\nconv 2 3x3\nmaxpool 2x2\ndense 3 linear\n"), 4);
  m.mutable_tensors()[0].values[0] = kNaN;
  std::vector<float> x(36, 0.5f);
  const auto p = forward(m, x);
  EXPECT_TRUE(p.nan_flag);
  EXPECT_EQ(p.class_index, 0u);
}

TEST(Layers, ReluPassesNaNAndMaxpoolPropagatesIt) {
  Eigen::MatrixXf v(3, 1);
  v << -1.0f, kNaN, 2.0f;
  nn::relu_inplace(v);
  EXPECT_EQ(v(0, 0), 0.0f);
  EXPECT_TRUE(std::isnan(v(1, 0)));
  EXPECT_EQ(v(2, 0), 2.0f);

  Eigen::MatrixXf in(4, 1);
  in << 1.0f, kNaN, 3.0f, 0.0f;
  Eigen::MatrixXf out;
  nn::maxpool_forward<float>(MaxPool2D{2, 2, 2}, Shape3{1, 2, 2}, Shape3{1, 1, 1}, in, out, nullptr);
  EXPECT_TRUE(std::isnan(out(0, 0)));
}

TEST(PredictClass, EdgeCases) {
  EXPECT_EQ(predict_class(std::vector<float>{0.1f, 0.7f, 0.2f}), 1u);
  EXPECT_EQ(predict_class(std::vector<float>{0.5f, 0.5f, 0.1f}), 0u);
  EXPECT_EQ(predict_class(std::vector<float>{kNaN, 0.2f, 0.3f}), 2u);
  EXPECT_EQ(predict_class(std::vector<float>{kNaN, kNaN}), 0u);
  EXPECT_EQ(predict_class(std::vector<float>{-kInf, kInf, -5.0f}), 2u);
  EXPECT_EQ(predict_class(std::vector<float>{-3.0f}), 0u);
  EXPECT_THROW(predict_class(std::span<const float>{}), std::invalid_argument);
}

// Central differences with h = 1e-3 are only a derivative when neither probe
// crosses a ReLU kink or changes a maxpool winner; such parameters are
// skipped and counted, and the skip rate is bounded.
TEST(Gradients, MatchCentralDifferences) {
  Rng rng(35);
  constexpr double h = 1e-3;
  int checked = 0, skipped = 0;
  for (int i = 0; i < 40; ++i) {
    const auto arch = gen::architecture(rng);
    SCOPED_TRACE(arch.to_text());
    auto p = gen::params(rng, arch);
    const Eigen::MatrixXd x = batch(rng, arch, 3);
    std::vector<int> labels;
    for (int j = 0; j < 3; ++j) {
      labels.push_back(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(arch.num_classes()))));
    }
    const auto pattern = oracle::batch_pattern(arch, p, x);
    std::vector<std::vector<double>> grads, scratch;
    nn::loss_and_gradients<double>(arch, spans_of(p), x, labels, grads);
    for (std::size_t t = 0; t < p.size(); ++t) {
      for (std::size_t k = 0; k < p[t].size(); ++k) {
        const double saved = p[t][k];
        p[t][k] = saved + h;
        const bool up_same = oracle::batch_pattern(arch, p, x) == pattern;
        const double up = nn::loss_and_gradients<double>(arch, spans_of(p), x, labels, scratch).loss;
        p[t][k] = saved - h;
        const bool down_same = oracle::batch_pattern(arch, p, x) == pattern;
        const double down = nn::loss_and_gradients<double>(arch, spans_of(p), x, labels, scratch).loss;
        p[t][k] = saved;
        if (!up_same || !down_same) {
          ++skipped;
          continue;
        }
        const double numeric = (up - down) / (2 * h);
        const double analytic = grads[t][k];
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
        EXPECT_LT(std::abs(numeric - analytic) / scale, 1e-2)
            << arch.parameter_layout()[t].name << "[" << k << "] analytic " << analytic
            << " numeric " << numeric;
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 1000);
  EXPECT_LT(skipped, checked / 10) << "checked " << checked << ", skipped " << skipped;
}

TEST(Gradients, FloatInstantiationAgreesWithDouble) {
  Rng rng(36);
  for (int i = 0; i < 30; ++i) {
    const auto arch = gen::architecture(rng);
    SCOPED_TRACE(arch.to_text());
    const auto p = gen::params(rng, arch);
    const auto pf = to_float(p);
    std::vector<std::vector<double>> pr;
    for (const auto& v : pf) pr.emplace_back(v.begin(), v.end());
    const Eigen::MatrixXd x = batch(rng, arch, 4).cast<float>().cast<double>();
    const std::vector<int> labels(4, 1);
    std::vector<std::vector<double>> gd;
    std::vector<std::vector<float>> gf;
    nn::loss_and_gradients<double>(arch, spans_of(pr), x, labels, gd);
    nn::loss_and_gradients<float>(arch, spans_of(pf), x.cast<float>(), labels, gf);
    for (std::size_t t = 0; t < gd.size(); ++t) {
      for (std::size_t k = 0; k < gd[t].size(); ++k) {
        ASSERT_NEAR(gf[t][k], gd[t][k], 1e-4 * std::max(1.0, std::abs(gd[t][k])));
      }
    }
  }
}

TEST(Gradients, LossIsMeanCrossEntropy) {
  // All-zero parameters give uniform softmax: loss = ln(C).
  const auto arch = Architecture::parse("input 1x3x3\ndense 4 linear\n");
  const auto m = zero_model(arch);
  std::vector<std::vector<float>> grads;
  const Eigen::MatrixXf x = Eigen::MatrixXf::Ones(9, 2);
  const std::vector<int> labels{0, 3};
  const auto r = nn::loss_and_gradients<float>(arch, m.parameter_spans(), x, labels, grads);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-6);
  EXPECT_TRUE(r.finite);
}

namespace {

Architecture tiny_arch() {
  return Architecture::parse("input 1x12x12\nconv 4 3x3\nmaxpool 2x2\ndense 2 linear\n");
}

}  // namespace

TEST(Training, DeterministicForFixedSeed) {
  const auto data = synthetic_dataset({2, 30, 12, 5});
  TrainConfig cfg{3, 8, 0.05f, 99};
  const auto init = build_model(tiny_arch(), 1);
  const auto a = train(init, data, cfg);
  const auto b = train(init, data, cfg);
  EXPECT_TRUE(a.model.bit_equal(b.model));
  ASSERT_EQ(a.epochs.size(), 3u);
  EXPECT_EQ(a.epochs.back().mean_loss, b.epochs.back().mean_loss);
  cfg.seed = 100;
  EXPECT_FALSE(train(init, data, cfg).model.bit_equal(a.model));
}

TEST(Training, ZeroLearningRateLeavesParametersUnchanged) {
  const auto data = synthetic_dataset({2, 20, 12, 5});
  const auto init = build_model(tiny_arch(), 2);
  const auto r = train(init, data, TrainConfig{2, 8, 0.0f, 1});
  EXPECT_TRUE(r.model.bit_equal(init));
}

TEST(Training, ZeroEpochsReturnsInitialisation) {
  const auto data = synthetic_dataset({2, 20, 12, 5});
  const auto init = build_model(tiny_arch(), 2);
  const auto r = train(init, data, TrainConfig{0, 8, 0.05f, 1});
  EXPECT_TRUE(r.model.bit_equal(init));
  EXPECT_TRUE(r.epochs.empty());
}

TEST(Training, SeparableTwoClassProblemIsLearned) {
  const auto data = synthetic_dataset({2, 100, 12, 6});
  const auto r = train(build_model(tiny_arch(), 3), data, TrainConfig{10, 16, 0.05f, 4});
  EXPECT_GE(r.epochs.back().train_accuracy, 0.95);
  EXPECT_LT(r.epochs.back().mean_loss, r.epochs.front().mean_loss);
}

TEST(Training, NonFiniteStartIsRecordedNotFatal) {
  const auto data = synthetic_dataset({2, 20, 12, 5});
  auto init = build_model(tiny_arch(), 2);
  for (auto& t : init.mutable_tensors()) std::fill(t.values.begin(), t.values.end(), kNaN);
  const auto r = train(init, data, TrainConfig{2, 8, 0.05f, 1});
  ASSERT_EQ(r.epochs.size(), 2u);
  EXPECT_EQ(r.epochs[0].non_finite_batches, 5);
  EXPECT_TRUE(std::isnan(r.epochs[0].mean_loss));
}

TEST(Training, RejectsBadConfig) {
  const auto data = synthetic_dataset({2, 4, 12, 5});
  const auto init = build_model(tiny_arch(), 2);
  EXPECT_THROW(train(init, data, TrainConfig{1, 0, 0.05f, 1}), std::invalid_argument);
  EXPECT_THROW(train(init, data, TrainConfig{-1, 4, 0.05f, 1}), std::invalid_argument);
}

TEST(Model, InitialisationIsSeededAndBounded) {
  const auto arch = mnist_architecture();
  const auto a = build_model(arch, 5);
  EXPECT_TRUE(a.bit_equal(build_model(arch, 5)));
  EXPECT_FALSE(a.bit_equal(build_model(arch, 6)));
  const float bound = std::sqrt(6.0f / 25.0f);
  for (float v : a.tensors()[0].values) EXPECT_LE(std::abs(v), bound);
  for (float v : a.tensors()[1].values) EXPECT_EQ(v, 0.0f);
}

TEST(Model, RejectsMismatchedTensors) {
  const auto arch = tiny_arch();
  auto tensors = zero_model(arch).tensors();
  tensors[0].values.pop_back();
  EXPECT_THROW(Model(arch, tensors), MalformedModel);
  tensors = zero_model(arch).tensors();
  tensors[1].name = "conv0.weight";
  EXPECT_THROW(Model(arch, tensors), MalformedModel);
  tensors = zero_model(arch).tensors();
  tensors.pop_back();
  EXPECT_THROW(Model(arch, tensors), MalformedModel);
}

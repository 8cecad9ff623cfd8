#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "propmatch/models.hpp"

namespace propmatch::testing {

// 20 linearly separable 33-value rows: short scripts that leave most of the
// source untouched are positive, long ones negative. Other slots carry small
// random counts.
struct SeparableSet {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
};

inline SeparableSet SeparableFeatures(std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> noise(0, 2);
  SeparableSet set;
  for (int i = 0; i < 20; ++i) {
    const int label = i % 2;
    std::vector<double> x(kFeatureCount);
    for (double& v : x) v = noise(rng);
    x[feature::kLength] = label == 1 ? 1 + i % 3 : 7 + i % 4;
    x[feature::kUneditedTotal] = label == 1 ? 5 + i % 2 : i % 2;
    x[feature::kFound] = 1;
    set.features.push_back(std::move(x));
    set.labels.push_back(label);
  }
  return set;
}

inline double TrainingAccuracy(const LRModel& model, const SeparableSet& set) {
  int right = 0;
  for (std::size_t i = 0; i < set.features.size(); ++i) {
    const int predicted = LrScore(set.features[i], model) >= 0.5 ? 1 : 0;
    right += predicted == set.labels[i];
  }
  return static_cast<double>(right) / static_cast<double>(set.features.size());
}

inline TrainConfig SeparableConfig() {
  TrainConfig config;
  config.learning_rate = 0.05;
  config.epochs = 200;
  config.batch_size = 8;
  config.seed = 3;
  return config;
}

// Plain scalar-loop LSTM, written independently of the Eigen forward pass.
inline double ReferenceLstmLogit(const std::vector<Vector>& steps, const LSTMModel& m) {
  const std::size_t H = m.hidden_dim, I = m.input_dim;
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (const Vector& x : steps) {
    std::vector<double> a(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double z = m.b[r];
      for (std::size_t k = 0; k < I; ++k) z += m.w[r * I + k] * x[k];
      for (std::size_t k = 0; k < H; ++k) z += m.u[r * H + k] * h[k];
      a[r] = z;
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double in = sig(a[j]);
      const double forget = sig(a[H + j]);
      const double out = sig(a[2 * H + j]);
      const double cand = std::tanh(a[3 * H + j]);
      c[j] = forget * c[j] + in * cand;
      h[j] = out * std::tanh(c[j]);
    }
  }
  double z = m.readout_b;
  for (std::size_t j = 0; j < H; ++j) z += m.readout_w[j] * h[j];
  return z;
}

inline std::vector<Vector> RandomSteps(std::mt19937_64& rng, std::size_t count, std::size_t dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vector> steps(count, Vector(dim));
  for (Vector& s : steps) {
    for (double& v : s) v = u(rng);
  }
  return steps;
}

// Largest relative error between the analytic gradient and central
// differences with step 1e-5, over every parameter of one instance.
inline double GradientCheckError(const std::vector<Vector>& steps, int label, const LSTMModel& model) {
  std::vector<double> analytic(model.parameter_count(), 0.0);
  LstmLossAndGradient(steps, label, model, &analytic);
  const std::vector<double> base = model.Flatten();
  LSTMModel probe = model;
  constexpr double kStep = 1e-5;
  double worst = 0;
  for (std::size_t p = 0; p < base.size(); ++p) {
    std::vector<double> shifted = base;
    shifted[p] = base[p] + kStep;
    probe.Unflatten(shifted);
    const double up = LstmLossAndGradient(steps, label, probe, nullptr);
    shifted[p] = base[p] - kStep;
    probe.Unflatten(shifted);
    const double down = LstmLossAndGradient(steps, label, probe, nullptr);
    const double numeric = (up - down) / (2 * kStep);
    const double scale = std::max({std::abs(analytic[p]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[p] - numeric) / scale);
  }
  return worst;
}

}  // namespace propmatch::testing

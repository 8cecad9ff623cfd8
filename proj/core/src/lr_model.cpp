#include <algorithm>
#include <cfloat>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "propmatch/errors.hpp"
#include "propmatch/models.hpp"

namespace propmatch {

double Probability(double logit) {
  constexpr double kHigh = 1.0 - DBL_EPSILON / 2;
  return std::clamp(Sigmoid(logit), DBL_MIN, kHigh);
}

AdamOptimizer::AdamOptimizer(std::size_t size, const TrainConfig& config)
    : lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.epsilon),
      m_(size, 0.0),
      v_(size, 0.0) {
  if (!(lr_ > 0) || !(eps_ > 0) || beta1_ < 0 || beta1_ >= 1 || beta2_ < 0 || beta2_ >= 1) {
    throw BadInput("invalid Adam hyperparameters");
  }
}

void AdamOptimizer::Step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionMismatch("Adam step size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1 - beta2_) * grads[i] * grads[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

// ---------------------------------------------------------------- LR

namespace {

// log(1 + e^z) - y z, computed without overflow.
double Bce(double logit, int label) {
  return std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit))) - label * logit;
}

void CheckLabels(std::span<const int> labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) throw BadInput("labels must be 0 or 1");
  }
}

}  // namespace

double LrLogit(std::span<const double> features, const LRModel& model) {
  if (features.size() != kFeatureCount) {
    throw DimensionMismatch("LR expects " + std::to_string(kFeatureCount) + " features, got " +
                            std::to_string(features.size()));
  }
  double z = model.bias;
  for (std::size_t i = 0; i < kFeatureCount; ++i) z += model.weights[i] * features[i];
  return z;
}

double LrScore(std::span<const double> features, const LRModel& model) {
  return Probability(LrLogit(features, model));
}

std::vector<double> ToDoubles(const TreeEditFeatures& f) {
  return std::vector<double>(f.values.begin(), f.values.end());
}

double LrScore(const TreeEditFeatures& features, const LRModel& model) {
  return LrScore(ToDoubles(features), model);
}

LRModel TrainLrOnFeatures(std::span<const std::vector<double>> features,
                          std::span<const int> labels, const TrainConfig& config,
                          TrainingReport* report) {
  if (features.empty()) throw BadInput("no training examples");
  if (features.size() != labels.size()) throw DimensionMismatch("features/labels length mismatch");
  for (const auto& x : features) {
    if (x.size() != kFeatureCount) throw DimensionMismatch("LR training row is not 33 values");
  }
  CheckLabels(labels);
  TrainingReport local;
  TrainingReport& rep = report != nullptr ? *report : local;

  const std::size_t n = features.size();
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  LRModel model;
  if (positives == 0 || positives == n) {
    rep.degenerate_labels = true;
    rep.warnings.push_back("DegenerateLabels: training data contains a single class");
    model.bias = std::log((static_cast<double>(positives) + 0.5) /
                          (static_cast<double>(n - positives) + 0.5));
    return model;
  }
  const double pos_weight =
      config.balance_classes ? static_cast<double>(n - positives) / static_cast<double>(positives)
                             : 1.0;
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);

  std::vector<double> params(kFeatureCount + 1, 0.0);
  std::vector<double> grad(params.size());
  AdamOptimizer adam(params.size(), config);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto logit = [&](std::size_t i) {
    double z = params[kFeatureCount];
    for (std::size_t k = 0; k < kFeatureCount; ++k) z += params[k] * features[i][k];
    return z;
  };
  auto penalty = [&] {
    double s = 0;
    for (std::size_t k = 0; k < kFeatureCount; ++k) s += params[k] * params[k];
    return 0.5 * config.l2 * s;
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0;
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = order[j];
        const double wt = labels[i] == 1 ? pos_weight : 1.0;
        const double z = logit(i);
        loss += wt * Bce(z, labels[i]);
        const double g = wt * (Sigmoid(z) - labels[i]);
        for (std::size_t k = 0; k < kFeatureCount; ++k) grad[k] += g * features[i][k];
        grad[kFeatureCount] += g;
      }
      const double m = static_cast<double>(end - start);
      for (double& g : grad) g /= m;
      for (std::size_t k = 0; k < kFeatureCount; ++k) grad[k] += config.l2 * params[k];
      rep.update_loss.push_back(loss / m + penalty());
      adam.Step(params, grad);
      ++rep.updates;
    }
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total += (labels[i] == 1 ? pos_weight : 1.0) * Bce(logit(i), labels[i]);
    }
    rep.epoch_loss.push_back(total / static_cast<double>(n) + penalty());
  }
  std::copy_n(params.begin(), kFeatureCount, model.weights.begin());
  model.bias = params[kFeatureCount];
  return model;
}

LRModel TrainLr(std::span<const LabeledPair> pairs, const TrainConfig& config,
                const SearchConfig& search, TrainingReport* report) {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  features.reserve(pairs.size());
  labels.reserve(pairs.size());
  for (const LabeledPair& p : pairs) {
    features.push_back(ToDoubles(PairFeatures(p, search)));
    labels.push_back(p.label);
  }
  return TrainLrOnFeatures(features, labels, config, report);
}

nlohmann::json LRModel::ToJson() const {
  nlohmann::json names = nlohmann::json::array();
  for (std::size_t i = 0; i < kFeatureCount; ++i) names.push_back(FeatureName(i));
  return {{"format_version", 1},
          {"kind", "lr"},
          {"feature_names", std::move(names)},
          {"weights", weights},
          {"bias", bias}};
}

LRModel LRModel::FromJson(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "lr") throw BadInput("not an LR model");
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != kFeatureCount) throw DimensionMismatch("LR model needs 33 weights");
    LRModel m;
    std::copy(w.begin(), w.end(), m.weights.begin());
    m.bias = j.at("bias").get<double>();
    for (double v : m.weights) {
      if (!std::isfinite(v)) throw BadInput("non-finite LR weight");
    }
    if (!std::isfinite(m.bias)) throw BadInput("non-finite LR bias");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw BadInput(std::string("LR model: ") + e.what());
  }
}

}  // namespace propmatch

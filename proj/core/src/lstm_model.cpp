#include <algorithm>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "propmatch/errors.hpp"
#include "propmatch/models.hpp"

namespace propmatch {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

double Bce(double logit, int label) {
  return std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit))) - label * logit;
}

Eigen::ArrayXd SigmoidArray(const Eigen::ArrayXd& a) {
  return a.unaryExpr([](double x) { return Sigmoid(x); });
}

// Per-step activations kept for backpropagation.
struct StepCache {
  Eigen::VectorXd i, f, o, g, c, h;
};

void CheckSteps(std::span<const Vector> steps, const LSTMModel& model) {
  for (const Vector& x : steps) {
    if (x.size() != model.input_dim) {
      throw DimensionMismatch("LSTM step has " + std::to_string(x.size()) +
                              " values, model input_dim is " + std::to_string(model.input_dim));
    }
  }
}

double Forward(std::span<const Vector> steps, const LSTMModel& model,
               std::vector<StepCache>* cache) {
  CheckSteps(steps, model);
  const auto hd = static_cast<Eigen::Index>(model.hidden_dim);
  const auto in = static_cast<Eigen::Index>(model.input_dim);
  ConstMatrixMap w(model.w.data(), 4 * hd, in);
  ConstMatrixMap u(model.u.data(), 4 * hd, hd);
  ConstVecMap b(model.b.data(), 4 * hd);

  Eigen::VectorXd h = Eigen::VectorXd::Zero(hd);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(hd);
  if (cache != nullptr) cache->clear();
  for (const Vector& step : steps) {
    ConstVecMap x(step.data(), in);
    const Eigen::VectorXd a = w * x + u * h + b;
    StepCache s;
    s.i = SigmoidArray(a.segment(0, hd).array()).matrix();
    s.f = SigmoidArray(a.segment(hd, hd).array()).matrix();
    s.o = SigmoidArray(a.segment(2 * hd, hd).array()).matrix();
    s.g = a.segment(3 * hd, hd).array().tanh().matrix();
    c = s.f.cwiseProduct(c) + s.i.cwiseProduct(s.g);
    h = s.o.cwiseProduct(c.array().tanh().matrix());
    s.c = c;
    s.h = h;
    if (cache != nullptr) cache->push_back(std::move(s));
  }
  ConstVecMap rw(model.readout_w.data(), hd);
  return rw.dot(h) + model.readout_b;
}

}  // namespace

LSTMModel LSTMModel::Zeros(std::size_t input_dim, std::size_t hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw BadInput("LSTM dimensions must be positive");
  LSTMModel m;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.w.assign(4 * hidden_dim * input_dim, 0.0);
  m.u.assign(4 * hidden_dim * hidden_dim, 0.0);
  m.b.assign(4 * hidden_dim, 0.0);
  m.readout_w.assign(hidden_dim, 0.0);
  return m;
}

LSTMModel LSTMModel::Random(std::size_t input_dim, std::size_t hidden_dim, double range,
                            std::uint64_t seed) {
  LSTMModel m = Zeros(input_dim, hidden_dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  std::vector<double> flat = m.Flatten();
  for (double& v : flat) v = dist(rng);
  m.Unflatten(flat);
  return m;
}

std::size_t LSTMModel::parameter_count() const {
  return w.size() + u.size() + b.size() + readout_w.size() + 1;
}

std::vector<double> LSTMModel::Flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), w.begin(), w.end());
  flat.insert(flat.end(), u.begin(), u.end());
  flat.insert(flat.end(), b.begin(), b.end());
  flat.insert(flat.end(), readout_w.begin(), readout_w.end());
  flat.push_back(readout_b);
  return flat;
}

void LSTMModel::Unflatten(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw DimensionMismatch("LSTM parameter count mismatch");
  auto it = flat.begin();
  for (auto* part : {&w, &u, &b, &readout_w}) {
    std::copy_n(it, part->size(), part->begin());
    it += static_cast<std::ptrdiff_t>(part->size());
  }
  readout_b = *it;
}

double LstmLogit(std::span<const Vector> steps, const LSTMModel& model) {
  return Forward(steps, model, nullptr);
}

double LstmScore(std::span<const Vector> steps, const LSTMModel& model) {
  return Probability(LstmLogit(steps, model));
}

double LstmLossAndGradient(std::span<const Vector> steps, int label, const LSTMModel& model,
                           std::vector<double>* grad, double weight) {
  std::vector<StepCache> cache;
  const double z = Forward(steps, model, grad != nullptr ? &cache : nullptr);
  const double loss = weight * Bce(z, label);
  if (grad == nullptr) return loss;
  if (grad->size() != model.parameter_count()) grad->assign(model.parameter_count(), 0.0);

  const auto hd = static_cast<Eigen::Index>(model.hidden_dim);
  const auto in = static_cast<Eigen::Index>(model.input_dim);
  double* base = grad->data();
  MatrixMap dw(base, 4 * hd, in);
  base += model.w.size();
  MatrixMap du(base, 4 * hd, hd);
  base += model.u.size();
  VecMap db(base, 4 * hd);
  base += model.b.size();
  VecMap drw(base, hd);
  base += model.readout_w.size();
  double& drb = *base;

  ConstMatrixMap u(model.u.data(), 4 * hd, hd);
  ConstVecMap rw(model.readout_w.data(), hd);

  const double dz = weight * (Sigmoid(z) - label);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(hd);
  const Eigen::VectorXd& h_last = cache.empty() ? zero : cache.back().h;
  drw += dz * h_last;
  drb += dz;

  Eigen::VectorXd dh = dz * rw;
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(hd);
  Eigen::VectorXd da(4 * hd);
  for (std::size_t t = cache.size(); t-- > 0;) {
    const StepCache& s = cache[t];
    const Eigen::VectorXd& c_prev = t > 0 ? cache[t - 1].c : zero;
    const Eigen::VectorXd& h_prev = t > 0 ? cache[t - 1].h : zero;
    const Eigen::ArrayXd tc = s.c.array().tanh();
    const Eigen::ArrayXd d_o = dh.array() * tc;
    dc.array() += dh.array() * s.o.array() * (1.0 - tc.square());
    const Eigen::ArrayXd d_i = dc.array() * s.g.array();
    const Eigen::ArrayXd d_g = dc.array() * s.i.array();
    const Eigen::ArrayXd d_f = dc.array() * c_prev.array();
    da.segment(0, hd) = (d_i * s.i.array() * (1.0 - s.i.array())).matrix();
    da.segment(hd, hd) = (d_f * s.f.array() * (1.0 - s.f.array())).matrix();
    da.segment(2 * hd, hd) = (d_o * s.o.array() * (1.0 - s.o.array())).matrix();
    da.segment(3 * hd, hd) = (d_g * (1.0 - s.g.array().square())).matrix();

    ConstVecMap x(steps[t].data(), in);
    dw.noalias() += da * x.transpose();
    du.noalias() += da * h_prev.transpose();
    db += da;
    dh = u.transpose() * da;
    dc = (dc.array() * s.f.array()).matrix();
  }
  return loss;
}

LSTMModel TrainLstmOnSequences(std::span<const std::vector<Vector>> sequences,
                               std::span<const int> labels, std::size_t input_dim,
                               const TrainConfig& config, TrainingReport* report) {
  if (sequences.empty()) throw BadInput("no training sequences");
  if (sequences.size() != labels.size()) throw DimensionMismatch("sequences/labels mismatch");
  for (int y : labels) {
    if (y != 0 && y != 1) throw BadInput("labels must be 0 or 1");
  }
  TrainingReport local;
  TrainingReport& rep = report != nullptr ? *report : local;

  LSTMModel model =
      LSTMModel::Random(input_dim, config.hidden_dim, config.init_range, config.seed);
  const std::size_t n = sequences.size();
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0 || positives == n) {
    rep.degenerate_labels = true;
    rep.warnings.push_back("DegenerateLabels: training data contains a single class");
    std::fill(model.readout_w.begin(), model.readout_w.end(), 0.0);
    model.readout_b = std::log((static_cast<double>(positives) + 0.5) /
                               (static_cast<double>(n - positives) + 0.5));
    return model;
  }
  const double pos_weight =
      config.balance_classes ? static_cast<double>(n - positives) / static_cast<double>(positives)
                             : 1.0;
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);

  std::vector<double> params = model.Flatten();
  std::vector<double> grad(params.size());
  AdamOptimizer adam(params.size(), config);
  // Shuffling uses its own stream so the initialisation draw stays independent.
  std::mt19937_64 rng(config.seed ^ 0x5deece66dULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0;
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = order[j];
        loss += LstmLossAndGradient(sequences[i], labels[i], model, &grad,
                                    labels[i] == 1 ? pos_weight : 1.0);
      }
      const double m = static_cast<double>(end - start);
      for (double& g : grad) g /= m;
      rep.update_loss.push_back(loss / m);
      adam.Step(params, grad);
      model.Unflatten(params);
      ++rep.updates;
    }
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total += LstmLossAndGradient(sequences[i], labels[i], model, nullptr,
                                   labels[i] == 1 ? pos_weight : 1.0);
    }
    rep.epoch_loss.push_back(total / static_cast<double>(n));
  }
  return model;
}

LSTMModel TrainLstm(std::span<const LabeledPair> pairs, const EmbeddingTable& table,
                    const TrainConfig& config, const SearchConfig& search,
                    TrainingReport* report) {
  std::vector<std::vector<Vector>> sequences;
  std::vector<int> labels;
  sequences.reserve(pairs.size());
  for (const LabeledPair& p : pairs) {
    sequences.push_back(PairEditVectors(p, table, search));
    labels.push_back(p.label);
  }
  return TrainLstmOnSequences(sequences, labels, kEditKindCount + table.dim(), config, report);
}

nlohmann::json LSTMModel::ToJson() const {
  return {{"format_version", 1},
          {"kind", "lstm"},
          {"input_dim", input_dim},
          {"hidden_dim", hidden_dim},
          {"embedding_dim", input_dim >= kEditKindCount ? input_dim - kEditKindCount : 0},
          {"gate_order", {"input", "forget", "output", "candidate"}},
          {"w", w},
          {"u", u},
          {"b", b},
          {"readout_w", readout_w},
          {"readout_b", readout_b}};
}

LSTMModel LSTMModel::FromJson(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "lstm") throw BadInput("not an LSTM model");
    LSTMModel m = Zeros(j.at("input_dim").get<std::size_t>(), j.at("hidden_dim").get<std::size_t>());
    auto load = [&](const char* key, std::vector<double>& dst) {
      auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != dst.size()) {
        throw DimensionMismatch(std::string("LSTM parameter '") + key + "' has wrong shape");
      }
      for (double x : v) {
        if (!std::isfinite(x)) throw BadInput("non-finite LSTM parameter");
      }
      dst = std::move(v);
    };
    load("w", m.w);
    load("u", m.u);
    load("b", m.b);
    load("readout_w", m.readout_w);
    m.readout_b = j.at("readout_b").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw BadInput(std::string("LSTM model: ") + e.what());
  }
}

}  // namespace propmatch

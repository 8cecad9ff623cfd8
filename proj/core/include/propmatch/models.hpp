#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "propmatch/corpus.hpp"
#include "propmatch/embedding.hpp"
#include "propmatch/fast_filter.hpp"
#include "propmatch/tree_edit.hpp"

namespace propmatch {

// ---------------------------------------------------------------- data

// A binary-labelled (candidate, query) pair. The NLI premise plays the
// candidate sentence, the hypothesis plays the proposition query.
struct LabeledPair {
  std::string pair_id;
  Sentence candidate;
  PropositionQuery query;
  int label = 0;  // 1 = entailment
};

// Reads SNLI-style JSONL ({"gold_label","sentence1","sentence2","pairID"})
// and joins CoNLL-U parses keyed "pairID:premise" / "pairID:hypothesis".
// entailment -> 1, contradiction/neutral -> 0, "-" dropped. Throws
// DanglingParse when a kept record lacks a parse, BadInput on bad records.
std::vector<LabeledPair> RecastSnli(std::istream& records, std::istream& parses);

// ---------------------------------------------------------------- training

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 10;
  std::size_t batch_size = 32;
  double l2 = 1e-4;  // logistic regression only
  std::uint64_t seed = 1;
  // Weight positives by n_neg / n_pos in the loss. Off by default.
  bool balance_classes = false;
  // LSTM shape and initialisation.
  std::size_t hidden_dim = 128;
  double init_range = 0.05;
};

struct TrainingReport {
  std::vector<double> epoch_loss;  // mean training loss after each epoch
  std::vector<double> update_loss;  // mean minibatch loss before each update
  std::size_t updates = 0;
  bool degenerate_labels = false;
  std::vector<std::string> warnings;
};

// Adam over a flat parameter vector.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, const TrainConfig& config);
  void Step(std::span<double> params, std::span<const double> grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  long long t_ = 0;
};

// ---------------------------------------------------------------- LR

struct LRModel {
  std::array<double, kFeatureCount> weights{};
  double bias = 0;

  nlohmann::json ToJson() const;
  static LRModel FromJson(const nlohmann::json& j);
};

double LrLogit(std::span<const double> features, const LRModel& model);
// sigmoid(w.x + b). Throws DimensionMismatch unless 33 values.
double LrScore(std::span<const double> features, const LRModel& model);
double LrScore(const TreeEditFeatures& features, const LRModel& model);

std::vector<double> ToDoubles(const TreeEditFeatures& f);

// Mean binary cross-entropy + (l2/2)|w|^2, minimised with Adam. With a single
// class present the report flags degenerate labels and a constant model is
// returned.
LRModel TrainLrOnFeatures(std::span<const std::vector<double>> features,
                          std::span<const int> labels, const TrainConfig& config,
                          TrainingReport* report = nullptr);

TreeEditFeatures PairFeatures(const LabeledPair& pair, const SearchConfig& search);

LRModel TrainLr(std::span<const LabeledPair> pairs, const TrainConfig& config,
                const SearchConfig& search = {}, TrainingReport* report = nullptr);

// ---------------------------------------------------------------- LSTM

// Single-layer LSTM read-out by sigmoid(w.h_T + c). Gates are stacked in
// (input, forget, output, candidate) order; matrices are row-major.
struct LSTMModel {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<double> w;  // 4H x I
  std::vector<double> u;  // 4H x H
  std::vector<double> b;  // 4H
  std::vector<double> readout_w;  // H
  double readout_b = 0;

  static LSTMModel Zeros(std::size_t input_dim, std::size_t hidden_dim);
  static LSTMModel Random(std::size_t input_dim, std::size_t hidden_dim, double range,
                          std::uint64_t seed);

  std::size_t parameter_count() const;
  // Flat parameter view in (w, u, b, readout_w, readout_b) order.
  std::vector<double> Flatten() const;
  void Unflatten(std::span<const double> flat);

  nlohmann::json ToJson() const;
  static LSTMModel FromJson(const nlohmann::json& j);
};

double LstmLogit(std::span<const Vector> steps, const LSTMModel& model);
// Throws DimensionMismatch when a step is not input_dim long.
double LstmScore(std::span<const Vector> steps, const LSTMModel& model);

// Binary cross-entropy of one sequence; accumulates d loss / d params (flat
// layout of LSTMModel::Flatten) into *grad when non-null, scaled by weight.
double LstmLossAndGradient(std::span<const Vector> steps, int label, const LSTMModel& model,
                           std::vector<double>* grad, double weight = 1.0);

LSTMModel TrainLstmOnSequences(std::span<const std::vector<Vector>> sequences,
                               std::span<const int> labels, std::size_t input_dim,
                               const TrainConfig& config, TrainingReport* report = nullptr);

std::vector<Vector> PairEditVectors(const LabeledPair& pair, const EmbeddingTable& table,
                                    const SearchConfig& search);

LSTMModel TrainLstm(std::span<const LabeledPair> pairs, const EmbeddingTable& table,
                    const TrainConfig& config, const SearchConfig& search = {},
                    TrainingReport* report = nullptr);

inline double Sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Sigmoid kept strictly inside (0, 1) even when the logit saturates.
double Probability(double logit);

}  // namespace propmatch

// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training loops for the baseline, IBP, smoothing-based training and the
// fairness interventions, alone or combined.

#ifndef CERTFAIR_TRAINING_HPP_
#define CERTFAIR_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "certfair/fairness_methods.hpp"
#include "certfair/perturbation.hpp"
#include "certfair/text_model.hpp"

namespace certfair {

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  bool ibp = false;
  bool ibp_gender = false;
  bool safer = false;
  bool safer_gender = false;
  bool instance_weighting = false;
  bool hard_debias = false;
  bool adversarial = false;

  double learning_rate = 1e-2;
  double dropout = 0.5;
  std::size_t epochs = 20;  // every method except IBP
  std::size_t ibp_ramp_epochs = 40;
  double ibp_lambda_max = 0.8;
  std::size_t ibp_hold_epochs = 20;
  double adversary_alpha = 1.0;
  std::size_t adversary_pretrain_epochs = 2;
  std::string adversary_axis = "gender";
  std::uint64_t seed = 1;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  bool iw_add_one_smoothing = false;

  std::size_t hidden_size = 100;
  std::size_t kernel_size = 3;
  std::size_t max_len = 128;
};

// Throws std::invalid_argument naming the offending field.
void validate(const TrainConfig& config);

// lambda_max * min(1, epoch / ramp_epochs); lambda_max when ramp_epochs is 0.
double ibp_schedule(std::size_t epoch, const TrainConfig& config);

// Total epochs run by the IBP schedule.
std::size_t ibp_epochs(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  std::string phase;  // "train", "ibp", "pretrain", "adversary", "debias"
  double lambda = 0.0;
  double plain_loss = 0.0;
  std::optional<double> worst_case_loss;
  double total_loss = 0.0;
  std::optional<double> adversary_loss;
  std::optional<double> dev_selection_score;
};

// One JSON object per line.
std::string format_epoch_record(const EpochRecord& record);
void write_training_log(const std::vector<EpochRecord>& log, const std::string& path);

struct TrainData {
  const Dataset* train = nullptr;
  const Vocabulary* vocab = nullptr;
  const EmbeddingMatrix* embeddings = nullptr;
  // Raw nearest-neighbor table. IBP uses it directly; smoothing clusters it.
  const SubstitutionTable* neighbors = nullptr;
  GenderPairList gender_pairs;
  std::vector<std::string> identity_terms;
  std::set<std::string> gendered_words;
  const Dataset* dev = nullptr;  // optional, for the per-epoch selection score
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  // Receives the flattened debias gradient handed to the optimizer and the
  // flattened batch gradient of the adversary loss.
  std::function<void(const Tensor& update, const Tensor& grad_la, double alpha)> on_debias_step;
};

struct TrainResult {
  TextCnn model;
  std::vector<EpochRecord> log;
};

// Table the configuration trains and certifies against: raw neighbors for
// IBP, clusters for smoothing, gender-augmented when the *_gender flag is on.
SubstitutionTable method_table(const TrainConfig& config, const SubstitutionTable& neighbors,
                               const GenderPairList& gender_pairs);

TrainResult train(const TrainConfig& config, const TrainData& data, const TrainHooks& hooks = {});

// Plain gradient-descent over a flat parameter vector. Adam keeps its moment
// estimates between steps.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, std::size_t size);
  void step(std::span<double> params, std::span<const double> grad);

 private:
  OptimizerKind kind_;
  double lr_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

// Flattening in CnnParameters::named() order.
Tensor flatten_gradients(const Gradients& grads, const CnnParameters& params);
std::vector<double> flatten_parameters(const CnnParameters& params);
void unflatten_parameters(std::span<const double> flat, CnnParameters& params);

struct LabeledIds {
  std::vector<TokenId> ids;
  std::size_t label = 0;
  double weight = 1.0;
};

// One smoothing-training step: each example is replaced by a draw from its
// clusters, then a plain cross-entropy gradient step is taken. Returns the
// mean weighted loss of the batch.
double safer_train_step(TextCnn& model, const std::vector<LabeledIds>& batch,
                        const ResolvedTable& clusters, std::mt19937_64& rng,
                        Optimizer& optimizer, std::mt19937_64* dropout_rng = nullptr);

}  // namespace certfair

#endif  // CERTFAIR_TRAINING_HPP_

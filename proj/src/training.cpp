// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "certfair/evaluation.hpp"
#include "certfair/ibp.hpp"
#include "certfair/parallel.hpp"
#include "json.hpp"

namespace certfair {

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("TrainConfig: " + what); };
  if (c.ibp && c.safer) fail("ibp and safer are mutually exclusive");
  if (c.ibp_gender && !c.ibp) fail("ibp_gender requires ibp");
  if (c.safer_gender && !c.safer) fail("safer_gender requires safer");
  if (!(c.ibp_lambda_max >= 0.0 && c.ibp_lambda_max <= 1.0)) fail("ibp_lambda_max outside [0, 1]");
  if (!(c.learning_rate >= 1e-7 && c.learning_rate <= 1e-2)) {
    fail("learning_rate outside [1e-7, 1e-2]");
  }
  if (!(c.dropout >= 0.1 && c.dropout <= 0.5)) fail("dropout outside [0.1, 0.5]");
  if (!(c.adversary_alpha >= 0.0)) fail("adversary_alpha must be >= 0");
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (c.hidden_size == 0 || c.kernel_size == 0) fail("hidden_size and kernel_size must be positive");
  if (c.max_len < c.kernel_size) fail("max_len shorter than kernel_size");
}

double ibp_schedule(std::size_t epoch, const TrainConfig& config) {
  if (config.ibp_ramp_epochs == 0) return config.ibp_lambda_max;
  const double frac = std::min(1.0, static_cast<double>(epoch) /
                                        static_cast<double>(config.ibp_ramp_epochs));
  return config.ibp_lambda_max * frac;
}

std::size_t ibp_epochs(const TrainConfig& config) {
  return config.ibp_ramp_epochs + config.ibp_hold_epochs;
}

std::string format_epoch_record(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["phase"] = r.phase;
  j["lambda"] = r.lambda;
  j["plain_loss"] = r.plain_loss;
  if (r.worst_case_loss) j["worst_case_loss"] = *r.worst_case_loss;
  j["total_loss"] = r.total_loss;
  if (r.adversary_loss) j["adversary_loss"] = *r.adversary_loss;
  if (r.dev_selection_score) j["dev_selection_score"] = *r.dev_selection_score;
  return j.dump();
}

void write_training_log(const std::vector<EpochRecord>& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write training log " + path);
  for (const auto& r : log) out << format_epoch_record(r) << '\n';
}

SubstitutionTable method_table(const TrainConfig& config, const SubstitutionTable& neighbors,
                               const GenderPairList& gender_pairs) {
  const bool gender = config.ibp_gender || config.safer_gender;
  if (gender && gender_pairs.empty()) {
    throw std::invalid_argument("gender-augmented training needs a gender pair list");
  }
  SubstitutionTable table = config.safer ? to_clusters(neighbors) : neighbors;
  if (gender && !table.provenance.gender_augmented) {
    table = augment_gender_pairs(table, gender_pairs);
  }
  return table;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, std::size_t size)
    : kind_(kind), lr_(learning_rate) {
  if (kind_ == OptimizerKind::kAdam) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) throw ShapeError("Optimizer: gradient size mismatch");
  if (kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grad[i];
    return;
  }
  if (m_.size() != params.size()) throw ShapeError("Optimizer: state size mismatch");
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
  }
}

Tensor flatten_gradients(const Gradients& grads, const CnnParameters& params) {
  Tensor flat(Shape{params.count()});
  std::size_t offset = 0;
  for (const auto& [name, tensor] : params.named()) {
    auto it = grads.find(name);
    if (it != grads.end()) {
      if (it->second.size() != tensor->size()) throw ShapeError("flatten_gradients: size mismatch");
      std::copy(it->second.data().begin(), it->second.data().end(),
                flat.data().begin() + offset);
    }
    offset += tensor->size();
  }
  return flat;
}

std::vector<double> flatten_parameters(const CnnParameters& params) {
  std::vector<double> flat;
  flat.reserve(params.count());
  for (const auto& [name, tensor] : params.named()) {
    flat.insert(flat.end(), tensor->data().begin(), tensor->data().end());
  }
  return flat;
}

void unflatten_parameters(std::span<const double> flat, CnnParameters& params) {
  if (flat.size() != params.count()) throw ShapeError("unflatten_parameters: size mismatch");
  std::size_t offset = 0;
  for (auto& [name, tensor] : params.named()) {
    std::copy(flat.begin() + offset, flat.begin() + offset + tensor->size(),
              tensor->data().begin());
    offset += tensor->size();
  }
}

namespace {

Tensor dropout_mask(std::size_t hidden, double p, std::mt19937_64& rng) {
  Tensor mask(Shape{hidden});
  std::bernoulli_distribution keep(1.0 - p);
  for (double& v : mask.data()) v = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  return mask;
}

// Weighted plain cross-entropy and its gradient.
std::pair<double, Tensor> plain_gradient(const TextCnn& model, const LabeledIds& ex,
                                         const Tensor* mask) {
  const auto ids = model.prepare(ex.ids);
  Graph graph;
  const ParameterNodes params = model.add_parameters(graph);
  NodeId logits = model.build_logits(graph, params, graph.constant(model.embed(ids)), mask);
  NodeId loss = graph.softmax_cross_entropy(logits, ex.label);
  graph.scale(loss, ex.weight);
  Bindings bindings;
  model.bind_parameters(bindings);
  graph.evaluate(bindings);
  const double value = graph.value(loss).item();
  return {value, flatten_gradients(graph.backward(Tensor::scalar(1.0)), model.parameters())};
}

void apply(TextCnn& model, Optimizer& optimizer, const Tensor& grad) {
  std::vector<double> flat = flatten_parameters(model.parameters());
  optimizer.step(flat, grad.data());
  unflatten_parameters(flat, model.parameters());
}

struct Accumulator {
  double plain = 0.0, worst = 0.0, total = 0.0, adversary = 0.0;
  std::size_t n = 0, adversary_n = 0;
};

class Trainer {
 public:
  Trainer(const TrainConfig& config, const TrainData& data, const TrainHooks& hooks)
      : config_(config),
        data_(data),
        hooks_(hooks),
        shuffle_rng_(mix_seed(config.seed, 1)),
        dropout_rng_(mix_seed(config.seed, 2)),
        sample_rng_(mix_seed(config.seed, 3)) {}

  TrainResult run();

 private:
  TextCnn make_model();
  std::vector<std::vector<std::size_t>> batches();
  EpochRecord finish(std::size_t epoch, const std::string& phase, double lambda,
                     const Accumulator& acc, bool has_worst);
  void base_step(TextCnn& model, Optimizer& opt, const std::vector<std::size_t>& batch,
                 double lambda, Accumulator& acc);
  void adversary_step(TextCnn& model, Optimizer* predictor_opt, Adversary& adversary,
                      Optimizer& adversary_opt, const std::vector<std::size_t>& batch,
                      Accumulator& acc);
  void record(TrainResult& result, EpochRecord r, const TextCnn& model);

  const TrainConfig& config_;
  const TrainData& data_;
  const TrainHooks& hooks_;
  std::mt19937_64 shuffle_rng_, dropout_rng_, sample_rng_;
  std::vector<LabeledIds> examples_;
  ResolvedTable table_;
  std::size_t epoch_counter_ = 0;
};

TextCnn Trainer::make_model() {
  EmbeddingMatrix embeddings = *data_.embeddings;
  if (config_.hard_debias) {
    if (data_.gender_pairs.empty()) throw std::invalid_argument("hard_debias needs gender pairs");
    const GenderSubspace g = gender_direction(embeddings, *data_.vocab, data_.gender_pairs);
    embeddings =
        hard_debias(embeddings, *data_.vocab, g, data_.gender_pairs, data_.gendered_words)
            .embeddings;
  }
  CnnConfig mc;
  mc.hidden_size = config_.hidden_size;
  mc.kernel_size = config_.kernel_size;
  mc.max_len = config_.max_len;
  mc.dropout = config_.dropout;
  mc.num_classes = std::max<std::size_t>(class_count(*data_.train), 2);
  return TextCnn(*data_.vocab, std::move(embeddings), mc, mix_seed(config_.seed, 0));
}

std::vector<std::vector<std::size_t>> Trainer::batches() {
  std::vector<std::size_t> order(examples_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng_);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += config_.batch_size) {
    out.emplace_back(order.begin() + i,
                     order.begin() + std::min(order.size(), i + config_.batch_size));
  }
  return out;
}

EpochRecord Trainer::finish(std::size_t epoch, const std::string& phase, double lambda,
                            const Accumulator& acc, bool has_worst) {
  EpochRecord r;
  r.epoch = epoch;
  r.phase = phase;
  r.lambda = lambda;
  const double n = std::max<std::size_t>(acc.n, 1);
  r.plain_loss = acc.plain / n;
  if (has_worst) r.worst_case_loss = acc.worst / n;
  r.total_loss = acc.total / n;
  if (acc.adversary_n > 0) r.adversary_loss = acc.adversary / static_cast<double>(acc.adversary_n);
  if (!std::isfinite(r.plain_loss) || !std::isfinite(r.total_loss) ||
      (r.worst_case_loss && !std::isfinite(*r.worst_case_loss))) {
    throw std::runtime_error("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch));
  }
  return r;
}

void Trainer::base_step(TextCnn& model, Optimizer& opt, const std::vector<std::size_t>& batch,
                        double lambda, Accumulator& acc) {
  Tensor grad(Shape{model.parameters().count()});
  for (std::size_t i : batch) {
    const LabeledIds& ex = examples_[i];
    const Tensor mask = dropout_mask(config_.hidden_size, config_.dropout, dropout_rng_);
    if (config_.ibp) {
      IbpLossOptions o;
      o.weight = ex.weight;
      o.dropout_mask = &mask;
      const IbpLossResult r = ibp_loss(model, ex.ids, ex.label, table_, lambda, o);
      grad += flatten_gradients(r.gradients, model.parameters());
      acc.plain += r.breakdown.plain_loss;
      acc.worst += r.breakdown.worst_case_loss;
      acc.total += ex.weight * r.breakdown.total;
    } else {
      LabeledIds input = ex;
      if (config_.safer) {
        const auto cands = table_.candidates_for(ex.ids);
        input.ids = sample_perturbation(ex.ids, cands, sample_rng_);
      }
      auto [loss, g] = plain_gradient(model, input, &mask);
      grad += g;
      acc.plain += loss;
      acc.total += ex.weight * loss;
    }
    ++acc.n;
  }
  grad *= 1.0 / static_cast<double>(batch.size());
  apply(model, opt, grad);
}

void Trainer::adversary_step(TextCnn& model, Optimizer* predictor_opt, Adversary& adversary,
                             Optimizer& adversary_opt, const std::vector<std::size_t>& batch,
                             Accumulator& acc) {
  const std::size_t np = model.parameters().count();
  Tensor grad_lp(Shape{np}), grad_la(Shape{np});
  std::vector<Tensor> grad_u;
  for (auto& [name, t] : adversary.named()) grad_u.emplace_back(t->shape());
  std::size_t annotated = 0;
  for (std::size_t i : batch) {
    const LabeledIds& ex = examples_[i];
    if (predictor_opt != nullptr) {
      const Tensor mask = dropout_mask(config_.hidden_size, config_.dropout, dropout_rng_);
      auto [loss, g] = plain_gradient(model, ex, &mask);
      grad_lp += g;
      acc.plain += loss;
      acc.total += ex.weight * loss;
      ++acc.n;
    }
    const auto target = adversary.target((*data_.train)[i]);
    if (!target) continue;
    ++annotated;
    const auto ids = model.prepare(ex.ids);
    Graph graph;
    const ParameterNodes params = model.add_parameters(graph);
    NodeId logits = model.build_logits(graph, params, graph.constant(model.embed(ids)), nullptr);
    adversary.build_loss(graph, logits, ex.label, *target);
    Bindings bindings;
    model.bind_parameters(bindings);
    adversary.bind(bindings);
    acc.adversary += graph.evaluate(bindings).item();
    ++acc.adversary_n;
    const Gradients grads = graph.backward(Tensor::scalar(1.0));
    if (predictor_opt != nullptr) grad_la += flatten_gradients(grads, model.parameters());
    std::size_t k = 0;
    for (auto& [name, t] : adversary.named()) grad_u[k++] += grads.at(name);
  }
  if (annotated > 0) {
    std::vector<double> flat_u, flat_g;
    for (std::size_t k = 0; k < grad_u.size(); ++k) {
      grad_u[k] *= 1.0 / static_cast<double>(annotated);
      flat_g.insert(flat_g.end(), grad_u[k].data().begin(), grad_u[k].data().end());
    }
    for (auto& [name, t] : adversary.named()) {
      flat_u.insert(flat_u.end(), t->data().begin(), t->data().end());
    }
    adversary_opt.step(flat_u, flat_g);
    std::size_t offset = 0;
    for (auto& [name, t] : adversary.named()) {
      std::copy(flat_u.begin() + offset, flat_u.begin() + offset + t->size(), t->data().begin());
      offset += t->size();
    }
    grad_la *= 1.0 / static_cast<double>(annotated);
  }
  if (predictor_opt == nullptr) return;
  grad_lp *= 1.0 / static_cast<double>(batch.size());
  const Tensor update = debias_gradient(grad_lp, grad_la, config_.adversary_alpha);
  if (hooks_.on_debias_step) hooks_.on_debias_step(update, grad_la, config_.adversary_alpha);
  apply(model, *predictor_opt, update);
}

void Trainer::record(TrainResult& result, EpochRecord r, const TextCnn& model) {
  if (data_.dev != nullptr && !data_.dev->empty()) {
    CertifyOptions o;
    o.method = config_.safer ? CertifyMethod::kSafer : CertifyMethod::kIbp;
    o.safer.n_samples = 64;
    o.seed = mix_seed(config_.seed, 5);
    r.dev_selection_score = evaluate_model(model, *data_.dev, table_, o).selection_score;
  }
  if (hooks_.on_epoch) hooks_.on_epoch(r);
  result.log.push_back(std::move(r));
}

TrainResult Trainer::run() {
  validate(config_);
  if (data_.train == nullptr || data_.vocab == nullptr || data_.embeddings == nullptr) {
    throw std::invalid_argument("train: training data, vocabulary and embeddings are required");
  }
  if (data_.train->empty()) throw std::invalid_argument("train: empty training set");
  TextCnn model = make_model();

  if (config_.ibp || config_.safer) {
    if (data_.neighbors == nullptr) {
      throw std::invalid_argument("train: robust training needs a neighbor table");
    }
    table_ = ResolvedTable(method_table(config_, *data_.neighbors, data_.gender_pairs),
                           *data_.vocab);
  } else {
    table_ = ResolvedTable::empty(*data_.vocab);
  }

  std::vector<double> weights(data_.train->size(), 1.0);
  if (config_.instance_weighting) {
    InstanceWeightOptions o;
    o.add_one_smoothing = config_.iw_add_one_smoothing;
    weights = instance_weights(*data_.train, data_.identity_terms, o).weights;
  }
  examples_.clear();
  for (std::size_t i = 0; i < data_.train->size(); ++i) {
    examples_.push_back(
        LabeledIds{model.prepare(model.encode((*data_.train)[i])), (*data_.train)[i].label,
                   weights[i]});
  }

  TrainResult result{model, {}};
  Optimizer opt(config_.optimizer, config_.learning_rate, model.parameters().count());
  auto base_epoch = [&](const std::string& phase, double lambda) {
    Accumulator acc;
    try {
      for (const auto& batch : batches()) base_step(model, opt, batch, lambda, acc);
    } catch (const NonFiniteError& e) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch_counter_) +
                               ": " + e.what());
    }
    record(result, finish(epoch_counter_++, phase, lambda, acc, config_.ibp), model);
  };

  // Predictor training: the full IBP schedule, or the plain / smoothing loop.
  if (config_.ibp) {
    for (std::size_t e = 0; e < ibp_epochs(config_); ++e) base_epoch("ibp", ibp_schedule(e, config_));
  } else {
    const std::size_t n = config_.adversarial ? config_.adversary_pretrain_epochs : config_.epochs;
    for (std::size_t e = 0; e < n; ++e) base_epoch(config_.adversarial ? "pretrain" : "train", 0.0);
  }

  if (config_.adversarial) {
    std::set<std::string> names;
    for (const auto& ex : *data_.train) {
      auto it = ex.groups.find(config_.adversary_axis);
      if (it != ex.groups.end()) names.insert(it->second.begin(), it->second.end());
    }
    Adversary adversary(config_.adversary_axis, {names.begin(), names.end()},
                        model.num_classes(), mix_seed(config_.seed, 4));
    Optimizer adv_opt(config_.optimizer, config_.learning_rate,
                      adversary.pred_weight.size() + adversary.gold_weight.size() +
                          adversary.bias.size());
    for (std::size_t e = 0; e < config_.adversary_pretrain_epochs; ++e) {
      Accumulator acc;
      for (const auto& batch : batches()) adversary_step(model, nullptr, adversary, adv_opt, batch, acc);
      record(result, finish(epoch_counter_++, "adversary", 0.0, acc, false), model);
    }
    const double lambda = config_.ibp ? config_.ibp_lambda_max : 0.0;
    for (std::size_t e = 0; e < config_.epochs; ++e) {
      Accumulator acc;
      const auto all = batches();
      for (std::size_t b = 0; b < all.size(); ++b) {
        if (config_.ibp && b % 2 == 0) {
          base_step(model, opt, all[b], lambda, acc);
        } else {
          adversary_step(model, &opt, adversary, adv_opt, all[b], acc);
        }
      }
      record(result, finish(epoch_counter_++, "debias", lambda, acc, false), model);
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainData& data, const TrainHooks& hooks) {
  Trainer trainer(config, data, hooks);
  return trainer.run();
}

double safer_train_step(TextCnn& model, const std::vector<LabeledIds>& batch,
                        const ResolvedTable& clusters, std::mt19937_64& rng,
                        Optimizer& optimizer, std::mt19937_64* dropout_rng) {
  if (batch.empty()) return 0.0;
  Tensor grad(Shape{model.parameters().count()});
  double total = 0.0;
  for (const LabeledIds& ex : batch) {
    LabeledIds input = ex;
    input.ids = sample_perturbation(ex.ids, clusters.candidates_for(ex.ids), rng);
    std::optional<Tensor> mask;
    if (dropout_rng != nullptr) {
      mask = dropout_mask(model.config().hidden_size, model.config().dropout, *dropout_rng);
    }
    auto [loss, g] = plain_gradient(model, input, mask ? &*mask : nullptr);
    grad += g;
    total += ex.weight * loss;
  }
  grad *= 1.0 / static_cast<double>(batch.size());
  apply(model, optimizer, grad);
  return total / static_cast<double>(batch.size());
}

}  // namespace certfair

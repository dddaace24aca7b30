// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/text_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"

namespace certfair {

using nlohmann::json;

std::vector<std::pair<const char*, Tensor*>> CnnParameters::named() {
  return {{kConvWeight, &conv_weight},
          {kConvBias, &conv_bias},
          {kOutputWeight, &output_weight},
          {kOutputBias, &output_bias}};
}

std::vector<std::pair<const char*, const Tensor*>> CnnParameters::named() const {
  return {{kConvWeight, &conv_weight},
          {kConvBias, &conv_bias},
          {kOutputWeight, &output_weight},
          {kOutputBias, &output_bias}};
}

std::size_t CnnParameters::count() const {
  return conv_weight.size() + conv_bias.size() + output_weight.size() + output_bias.size();
}

TextCnn::TextCnn(Vocabulary vocab, EmbeddingMatrix embeddings, CnnConfig config,
                 std::uint64_t seed)
    : vocab_(std::move(vocab)), embeddings_(std::move(embeddings)), config_(config) {
  const std::size_t h = config_.hidden_size, k = config_.kernel_size;
  const std::size_t d = embeddings_.table.rank() == 2 ? embeddings_.dim() : 0;
  std::mt19937_64 rng(seed);
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(k * d, 1)));
  const double out_bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(h, 1)));
  std::uniform_real_distribution<double> conv_init(-conv_bound, conv_bound);
  std::uniform_real_distribution<double> out_init(-out_bound, out_bound);
  params_.conv_weight = Tensor(Shape{h, k, d});
  for (double& v : params_.conv_weight.data()) v = conv_init(rng);
  params_.conv_bias = Tensor(Shape{h});
  params_.output_weight = Tensor(Shape{config_.num_classes, h});
  for (double& v : params_.output_weight.data()) v = out_init(rng);
  params_.output_bias = Tensor(Shape{config_.num_classes});
  validate();
}

TextCnn::TextCnn(Vocabulary vocab, EmbeddingMatrix embeddings, CnnConfig config,
                 CnnParameters parameters)
    : vocab_(std::move(vocab)),
      embeddings_(std::move(embeddings)),
      config_(config),
      params_(std::move(parameters)) {
  validate();
}

void TextCnn::validate() const {
  if (config_.num_classes < 2) throw std::invalid_argument("TextCnn: need at least 2 classes");
  if (config_.kernel_size == 0 || config_.hidden_size == 0) {
    throw std::invalid_argument("TextCnn: kernel and hidden sizes must be positive");
  }
  if (config_.max_len < config_.kernel_size) {
    throw std::invalid_argument("TextCnn: max_len shorter than kernel");
  }
  if (!(config_.dropout >= 0.0 && config_.dropout < 1.0)) {
    throw std::invalid_argument("TextCnn: dropout must lie in [0, 1)");
  }
  if (embeddings_.table.rank() != 2 || embeddings_.rows() != vocab_.size()) {
    throw ShapeError("TextCnn: embedding rows must equal vocabulary size");
  }
  if (!embeddings_.table.all_finite()) throw NonFiniteError("TextCnn: non-finite embeddings");
  const std::size_t h = config_.hidden_size, k = config_.kernel_size, d = embeddings_.dim();
  if (params_.conv_weight.shape() != Shape{h, k, d} || params_.conv_bias.shape() != Shape{h} ||
      params_.output_weight.shape() != Shape{config_.num_classes, h} ||
      params_.output_bias.shape() != Shape{config_.num_classes}) {
    throw ShapeError("TextCnn: parameter shapes do not match configuration");
  }
}

std::vector<TokenId> TextCnn::encode(const Example& example) const {
  return vocab_.encode(example.tokens);
}

std::vector<TokenId> TextCnn::prepare(std::span<const TokenId> token_ids) const {
  std::vector<TokenId> ids(token_ids.begin(),
                           token_ids.begin() + std::min(token_ids.size(), config_.max_len));
  for (TokenId id : ids) {
    if (id >= vocab_.size()) {
      throw std::out_of_range("TextCnn: token id " + std::to_string(id) +
                              " outside vocabulary of " + std::to_string(vocab_.size()));
    }
  }
  while (!ids.empty() && ids.back() == kPadId) ids.pop_back();
  if (ids.size() < config_.kernel_size) ids.resize(config_.kernel_size, kPadId);
  return ids;
}

CandidateLists TextCnn::prepare_candidates(std::span<const TokenId> token_ids,
                                           const CandidateLists& candidates) const {
  const std::size_t len = prepare(token_ids).size();
  CandidateLists out(len);
  for (std::size_t p = 0; p < len && p < candidates.size() && p < token_ids.size(); ++p) {
    if (token_ids[p] == kPadId) continue;
    out[p] = candidates[p];
  }
  return out;
}

Tensor TextCnn::embed(std::span<const TokenId> prepared_ids) const {
  const std::size_t d = embeddings_.dim();
  Tensor x(Shape{prepared_ids.size(), d});
  for (std::size_t p = 0; p < prepared_ids.size(); ++p) {
    auto row = embeddings_.row(prepared_ids[p]);
    std::copy(row.begin(), row.end(), x.data().begin() + p * d);
  }
  return x;
}

ParameterNodes TextCnn::add_parameters(Graph& graph) const {
  return ParameterNodes{graph.variable(CnnParameters::kConvWeight),
                        graph.variable(CnnParameters::kConvBias),
                        graph.variable(CnnParameters::kOutputWeight),
                        graph.variable(CnnParameters::kOutputBias)};
}

void TextCnn::bind_parameters(Bindings& bindings) const {
  for (const auto& [name, tensor] : params_.named()) bindings.bind(name, *tensor);
}

NodeId TextCnn::build_logits(Graph& graph, const ParameterNodes& params, NodeId input,
                             const Tensor* dropout_mask) const {
  NodeId conv = graph.conv1d(input, params.conv_weight, params.conv_bias);
  NodeId pooled = graph.max_over_time(graph.relu(conv));
  if (dropout_mask != nullptr) pooled = graph.mul(pooled, graph.constant(*dropout_mask));
  return graph.affine(params.output_weight, params.output_bias, pooled);
}

std::pair<NodeId, NodeId> TextCnn::build_logit_bounds(Graph& graph,
                                                      const ParameterNodes& params,
                                                      const Tensor& center,
                                                      const Tensor& radius) const {
  NodeId c0 = graph.constant(center);
  NodeId r0 = graph.constant(radius);
  NodeId c1 = graph.conv1d(c0, params.conv_weight, params.conv_bias);
  NodeId r1 = graph.conv1d(r0, graph.abs(params.conv_weight), std::nullopt);
  NodeId lo = graph.max_over_time(graph.relu(graph.sub(c1, r1)));
  NodeId hi = graph.max_over_time(graph.relu(graph.add(c1, r1)));
  NodeId c2 = graph.scale(graph.add(lo, hi), 0.5);
  NodeId r2 = graph.scale(graph.sub(hi, lo), 0.5);
  NodeId cz = graph.affine(params.output_weight, params.output_bias, c2);
  NodeId rz = graph.affine(graph.abs(params.output_weight), std::nullopt, r2);
  return {graph.sub(cz, rz), graph.add(cz, rz)};
}

Tensor TextCnn::forward(std::span<const TokenId> token_ids) const {
  const auto ids = prepare(token_ids);
  Graph graph;
  const ParameterNodes params = add_parameters(graph);
  NodeId input = graph.constant(embed(ids));
  build_logits(graph, params, input, nullptr);
  Bindings bindings;
  bind_parameters(bindings);
  return graph.evaluate(bindings);
}

std::vector<double> TextCnn::probabilities(std::span<const TokenId> token_ids) const {
  return softmax(forward(token_ids).data());
}

std::size_t predict_from_logits(std::span<const double> logits) {
  if (logits.size() == 2) return logits[1] >= logits[0] ? 1 : 0;
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) -
                                  logits.begin());
}

std::size_t TextCnn::predict(std::span<const TokenId> token_ids) const {
  return predict_from_logits(forward(token_ids).data());
}

IntervalTensor TextCnn::forward_interval(std::span<const TokenId> token_ids,
                                         const CandidateLists& candidates) const {
  const auto ids = prepare(token_ids);
  const auto cands = prepare_candidates(token_ids, candidates);
  IntervalTensor x = interval_from_substitutions(embeddings_, ids, cands);
  x = interval_conv1d(params_.conv_weight, params_.conv_bias, x);
  x = interval_monotone(MonotoneKind::kRelu, x);
  x = interval_monotone(MonotoneKind::kMaxPool, x);
  return interval_affine(params_.output_weight, params_.output_bias, x);
}

std::vector<double> TextCnn::saliency(const Example& example) const {
  const auto raw = encode(example);
  const auto ids = prepare(raw);
  const Tensor inputs = embed(ids);

  Graph graph;
  const ParameterNodes params = add_parameters(graph);
  NodeId input = graph.variable("input");
  NodeId logits = build_logits(graph, params, input, nullptr);
  Bindings bindings;
  bind_parameters(bindings);
  bindings.bind("input", inputs);
  const Tensor& z = graph.evaluate(bindings);
  Tensor seed(z.shape());
  seed[predict_from_logits(z.data())] = 1.0;
  (void)logits;
  const Gradients grads = graph.backward(seed);
  const Tensor& g = grads.at("input");

  const std::size_t d = embeddings_.dim();
  std::vector<double> scores(raw.size(), 0.0);
  for (std::size_t p = 0; p < raw.size() && p < ids.size(); ++p) {
    if (raw[p] == kPadId) continue;
    scores[p] = l2_norm(g.data().subspan(p * d, d));
  }
  return scores;
}

namespace {

json tensor_to_json(const Tensor& t) {
  return json{{"shape", t.shape()}, {"data", t.values()}};
}

Tensor tensor_from_json(const json& j) {
  return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}

constexpr const char* kCheckpointFormat = "certfair-textcnn";
constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const TextCnn& model, const std::string& path) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  const CnnConfig& c = model.config();
  j["config"] = {{"hidden_size", c.hidden_size},
                 {"kernel_size", c.kernel_size},
                 {"num_classes", c.num_classes},
                 {"max_len", c.max_len},
                 {"dropout", c.dropout}};
  j["vocab"] = model.vocab().tokens();
  j["embeddings"] = tensor_to_json(model.embeddings().table);
  json params = json::object();
  for (const auto& [name, tensor] : model.parameters().named()) {
    params[name] = tensor_to_json(*tensor);
  }
  j["parameters"] = params;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

TextCnn load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat ||
      j.value("version", 0) != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint format in " + path);
  }
  const json& jc = j.at("config");
  CnnConfig config;
  config.hidden_size = jc.at("hidden_size").get<std::size_t>();
  config.kernel_size = jc.at("kernel_size").get<std::size_t>();
  config.num_classes = jc.at("num_classes").get<std::size_t>();
  config.max_len = jc.at("max_len").get<std::size_t>();
  config.dropout = jc.at("dropout").get<double>();

  const auto tokens = j.at("vocab").get<std::vector<std::string>>();
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw std::runtime_error("checkpoint vocabulary lacks special tokens");
  }
  Vocabulary vocab(tokens);
  EmbeddingMatrix embeddings{tensor_from_json(j.at("embeddings"))};
  CnnParameters params;
  const json& jp = j.at("parameters");
  for (const auto& [name, tensor] : params.named()) *tensor = tensor_from_json(jp.at(name));
  return TextCnn(std::move(vocab), std::move(embeddings), config, std::move(params));
}

}  // namespace certfair

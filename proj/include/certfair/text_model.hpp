// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Convolutional text classifier: frozen embedding lookup, one 1-D
// convolution, ReLU, max-over-time pooling and an output affine layer.

#ifndef CERTFAIR_TEXT_MODEL_HPP_
#define CERTFAIR_TEXT_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "certfair/autodiff.hpp"
#include "certfair/data_io.hpp"
#include "certfair/embedding.hpp"
#include "certfair/interval.hpp"

namespace certfair {

struct CnnConfig {
  std::size_t hidden_size = 100;
  std::size_t kernel_size = 3;
  std::size_t num_classes = 2;
  std::size_t max_len = 128;
  double dropout = 0.5;
};

struct CnnParameters {
  static constexpr const char* kConvWeight = "conv.weight";
  static constexpr const char* kConvBias = "conv.bias";
  static constexpr const char* kOutputWeight = "output.weight";
  static constexpr const char* kOutputBias = "output.bias";

  Tensor conv_weight;    // [hidden, kernel, dim]
  Tensor conv_bias;      // [hidden]
  Tensor output_weight;  // [classes, hidden]
  Tensor output_bias;    // [classes]

  // Fixed order used for flattening and optimizer state.
  std::vector<std::pair<const char*, Tensor*>> named();
  std::vector<std::pair<const char*, const Tensor*>> named() const;
  std::size_t count() const;

  friend bool operator==(const CnnParameters&, const CnnParameters&) = default;
};

// Graph handles for the trainable parameters.
struct ParameterNodes {
  NodeId conv_weight, conv_bias, output_weight, output_bias;
};

class TextCnn {
 public:
  TextCnn(Vocabulary vocab, EmbeddingMatrix embeddings, CnnConfig config, std::uint64_t seed);
  TextCnn(Vocabulary vocab, EmbeddingMatrix embeddings, CnnConfig config,
          CnnParameters parameters);

  const Vocabulary& vocab() const { return vocab_; }
  const EmbeddingMatrix& embeddings() const { return embeddings_; }
  const CnnConfig& config() const { return config_; }
  CnnParameters& parameters() { return params_; }
  const CnnParameters& parameters() const { return params_; }
  std::size_t num_classes() const { return config_.num_classes; }

  std::vector<TokenId> encode(const Example& example) const;

  // Input normalization shared by every forward path: truncate to max_len,
  // drop trailing padding, then right-pad to kernel_size.
  std::vector<TokenId> prepare(std::span<const TokenId> token_ids) const;
  CandidateLists prepare_candidates(std::span<const TokenId> token_ids,
                                    const CandidateLists& candidates) const;

  Tensor forward(std::span<const TokenId> token_ids) const;
  std::vector<double> probabilities(std::span<const TokenId> token_ids) const;
  // Binary: positive iff p(class 1) >= 0.5. Multiclass: first argmax.
  std::size_t predict(std::span<const TokenId> token_ids) const;

  IntervalTensor forward_interval(std::span<const TokenId> token_ids,
                                  const CandidateLists& candidates) const;

  // L2 norm of d(predicted-class logit)/d(token embedding) per position of the
  // example; padding positions and positions past max_len score 0.
  std::vector<double> saliency(const Example& example) const;

  // Graph builders used by the training losses.
  ParameterNodes add_parameters(Graph& graph) const;
  void bind_parameters(Bindings& bindings) const;
  Tensor embed(std::span<const TokenId> prepared_ids) const;
  // Point logits; `dropout_mask` ([hidden]) multiplies the pooled features.
  NodeId build_logits(Graph& graph, const ParameterNodes& params, NodeId input,
                      const Tensor* dropout_mask) const;
  // Interval logits from an input box given by center and radius ([L, d]).
  std::pair<NodeId, NodeId> build_logit_bounds(Graph& graph, const ParameterNodes& params,
                                               const Tensor& center, const Tensor& radius) const;

 private:
  void validate() const;

  Vocabulary vocab_;
  EmbeddingMatrix embeddings_;
  CnnConfig config_;
  CnnParameters params_;
};

std::size_t predict_from_logits(std::span<const double> logits);

// JSON checkpoint: {"format", "version", "config", "vocab", "embeddings",
// "parameters"}. Doubles are written in shortest round-trip form, so equal
// models produce identical bytes.
void save_checkpoint(const TextCnn& model, const std::string& path);
TextCnn load_checkpoint(const std::string& path);

}  // namespace certfair

#endif  // CERTFAIR_TEXT_MODEL_HPP_

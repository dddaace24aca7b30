// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "certfair/evaluation.hpp"
#include "certfair/explain.hpp"
#include "certfair/fairness_methods.hpp"
#include "certfair/ibp.hpp"
#include "certfair/lexicons.hpp"
#include "certfair/parallel.hpp"
#include "certfair/safer.hpp"
#include "certfair/training.hpp"
#include "json.hpp"

namespace certfair {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptionSpec {
  std::string key;
  json default_value;
  std::string help;
};

std::vector<OptionSpec> common_options() {
  return {{"out", "", "output directory (required)"},
          {"seed", 1, "seed for every random choice of the run"}};
}

std::map<std::string, std::vector<OptionSpec>> command_options() {
  std::map<std::string, std::vector<OptionSpec>> m;
  m["synth"] = {
      {"n_examples", 5000, "training examples"},
      {"test_examples", 2000, "held-out examples"},
      {"num_classes", 2, "label classes"},
      {"rho", 0.9, "identity/label correlation strength in [0, 1]"},
      {"identity_rate", 0.6, "probability an example mentions an identity term"},
      {"signal_purity", 0.8, "probability a signal token comes from the true class"},
      {"dim", 16, "embedding width"},
  };
  m["train"] = {
      {"data", "", "training corpus (JSONL)"},
      {"embeddings", "", "embedding text file"},
      {"dev", "", "optional dev corpus for the per-epoch selection score"},
      {"method", "baseline",
       "'+'-joined flags: baseline, ibp, ibp_gender, safer, safer_gender, "
       "instance_weighting (iw), hard_debias, adversarial"},
      {"learning_rate", 1e-2, "learning rate"},
      {"dropout", 0.5, "dropout on pooled features"},
      {"epochs", 20, "epochs for non-IBP training and the adversarial phase"},
      {"ibp_ramp_epochs", 40, "epochs over which lambda ramps up"},
      {"ibp_lambda_max", 0.8, "final lambda"},
      {"ibp_hold_epochs", 20, "epochs at the final lambda"},
      {"adversary_alpha", 1.0, "adversary loss weight"},
      {"adversary_pretrain_epochs", 2, "pretraining epochs for predictor and adversary"},
      {"adversary_axis", "gender", "protected axis the adversary predicts"},
      {"batch_size", 32, "batch size"},
      {"optimizer", "sgd", "sgd or adam"},
      {"iw_add_one_smoothing", false, "add-one smoothing of P(y|z)"},
      {"hidden_size", 100, "convolution filters"},
      {"kernel_size", 3, "convolution width"},
      {"max_len", 128, "maximum tokens per example"},
      {"min_count", 1, "minimum token frequency for the vocabulary"},
      {"top_k", 100, "neighbors per word"},
      {"gender_pairs", "", "gender pair file (default: built-in list)"},
      {"identity_terms", "", "identity term file (default: built-in list)"},
      {"gendered_words", "", "gendered word file (default: built-in list)"},
  };
  const std::vector<OptionSpec> cert = {
      {"model", "", "checkpoint"},
      {"data", "", "corpus to evaluate (JSONL)"},
      {"certify_method", "ibp", "ibp or safer"},
      {"gender", false, "add gender pairs to the substitution table"},
      {"gender_pairs", "", "gender pair file (default: built-in list)"},
      {"neighbors", "", "existing neighbor cache (default: computed)"},
      {"top_k", 100, "neighbors per word when computing the table"},
      {"safer_samples", 1000, "Monte Carlo draws when the support is too large"},
      {"exact_cap", 4096, "largest smoothing support enumerated exactly"},
      {"confidence", 0.95, "Monte Carlo confidence"},
      {"jobs", 1, "worker threads"},
  };
  m["eval"] = cert;
  m["certify"] = cert;
  m["certify"].push_back({"enumerate_cap", 0, "cross-check against exhaustive enumeration "
                                              "for examples with at most this many variants"});
  m["explain"] = {
      {"model_a", "", "reference checkpoint (e.g. baseline)"},
      {"model_b", "", "compared checkpoint (e.g. IBP)"},
      {"data", "", "corpus (JSONL)"},
      {"subset", "disagreement", "'disagreement' (a wrong, b right) or 'all'"},
      {"a_predicted_class", -1, "keep only examples model_a assigns to this class (-1: any)"},
      {"k", 5, "top features per explanation"},
      {"lime_samples", 500, "masked samples per explanation"},
      {"sample_cap", 500, "maximum examples explained"},
      {"lexicon", "", "gender token file (default: built-in list)"},
      {"jobs", 1, "worker threads"},
  };
  m["debias-embeddings"] = {
      {"embeddings", "", "embedding text file"},
      {"gender_pairs", "", "gender pair file (default: built-in list)"},
      {"gendered_words", "", "gendered word file (default: built-in list)"},
  };
  for (auto& [name, specs] : m) {
    auto common = common_options();
    specs.insert(specs.begin(), common.begin(), common.end());
  }
  return m;
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

json parse_value(const std::string& key, const std::string& text, const json& like) {
  auto bad = [&] { return UsageError("invalid value for " + flag_name(key) + ": '" + text + "'"); };
  if (like.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw bad();
  }
  if (like.is_number_integer()) {
    long long v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) throw bad();
    return v;
  }
  if (like.is_number()) {
    double v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) throw bad();
    return v;
  }
  return text;
}

json merge_config(const std::string& command, const std::vector<OptionSpec>& specs,
                  const std::string& config_path, const std::map<std::string, std::string>& flags) {
  json effective = json::object();
  for (const auto& s : specs) effective[s.key] = s.default_value;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw UsageError("cannot open config file " + config_path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError("malformed config file " + config_path + ": " + e.what());
    }
    if (!file.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) {
      // Snapshots written by a previous run carry the command name.
      if (key == "command" && value == command) continue;
      if (!effective.contains(key)) {
        throw UsageError("unknown config key '" + key + "' for " + command);
      }
      const json& like = effective[key];
      const bool ok = like.is_boolean()          ? value.is_boolean()
                      : like.is_number_integer() ? value.is_number_integer()
                      : like.is_number()         ? value.is_number()
                                                 : value.is_string();
      if (!ok) throw UsageError("config key '" + key + "' has the wrong type");
      effective[key] = value.is_number() && like.is_number_float() ? json(value.get<double>())
                                                                    : value;
    }
  }
  for (const auto& [key, text] : flags) effective[key] = parse_value(key, text, effective[key]);
  if (effective["out"].get<std::string>().empty()) throw UsageError("--out is required");
  effective["command"] = command;
  return effective;
}

std::string str(const json& c, const char* key) { return c.at(key).get<std::string>(); }
std::size_t count(const json& c, const char* key) {
  const long long v = c.at(key).get<long long>();
  if (v < 0) throw UsageError(std::string("--") + key + " must be non-negative");
  return static_cast<std::size_t>(v);
}
double real(const json& c, const char* key) { return c.at(key).get<double>(); }

std::string require_path(const json& c, const char* key) {
  std::string p = str(c, key);
  if (p.empty()) throw UsageError(flag_name(key) + " is required");
  return p;
}

fs::path prepare_out(const json& c) {
  fs::path out = str(c, "out");
  fs::create_directories(out);
  std::ofstream snap(out / "config.json", std::ios::binary);
  if (!snap) throw std::runtime_error("cannot write " + (out / "config.json").string());
  snap << c.dump(2) << '\n';
  return out;
}

GenderPairList pairs_from(const json& c) {
  const std::string p = str(c, "gender_pairs");
  return p.empty() ? default_gender_pairs() : read_gender_pairs(p);
}

std::vector<std::string> words_from(const json& c, const char* key,
                                    const std::vector<std::string>& fallback) {
  const std::string p = str(c, key);
  return p.empty() ? fallback : read_word_list(p);
}

std::size_t embedding_file_dim(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open embedding file " + path);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string tok;
    std::size_t n = 0;
    while (fields >> tok) ++n;
    if (n == 0) continue;
    if (n < 2) throw CorpusError(path + ": embedding line without values");
    return n - 1;
  }
  throw CorpusError(path + ": no embedding rows");
}

Vocabulary embedding_file_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open embedding file " + path);
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string tok;
    if (fields >> tok && tok != kPadToken && tok != kUnkToken) vocab.add(tok);
  }
  return vocab;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const json& c, std::ostream& out) {
  const fs::path dir = prepare_out(c);
  SynthConfig sc = default_synth_config();
  sc.n_examples = count(c, "n_examples");
  sc.num_classes = count(c, "num_classes");
  sc.rho = real(c, "rho");
  sc.identity_rate = real(c, "identity_rate");
  sc.signal_purity = real(c, "signal_purity");
  const std::uint64_t seed = c.at("seed").get<std::uint64_t>();
  sc.seed = mix_seed(seed, 0);
  write_corpus(generate_synthetic(sc), (dir / "train.jsonl").string());
  SynthConfig test = sc;
  test.n_examples = count(c, "test_examples");
  test.seed = mix_seed(seed, 1);
  write_corpus(generate_synthetic(test), (dir / "test.jsonl").string());
  SynthEmbeddingConfig ec;
  ec.dim = count(c, "dim");
  ec.seed = mix_seed(seed, 2);
  write_embedding_file(generate_synthetic_embeddings(sc, ec), (dir / "embeddings.txt").string());
  out << "wrote " << (dir / "train.jsonl").string() << ", test.jsonl, embeddings.txt\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

TrainConfig train_config_from(const json& c) {
  TrainConfig t;
  std::stringstream methods(str(c, "method"));
  std::string m;
  while (std::getline(methods, m, '+')) {
    if (m == "baseline" || m.empty()) continue;
    else if (m == "ibp") t.ibp = true;
    else if (m == "ibp_gender") t.ibp = t.ibp_gender = true;
    else if (m == "safer") t.safer = true;
    else if (m == "safer_gender") t.safer = t.safer_gender = true;
    else if (m == "iw" || m == "instance_weighting") t.instance_weighting = true;
    else if (m == "hard_debias") t.hard_debias = true;
    else if (m == "adversarial") t.adversarial = true;
    else throw UsageError("unknown method flag '" + m + "'");
  }
  t.learning_rate = real(c, "learning_rate");
  t.dropout = real(c, "dropout");
  t.epochs = count(c, "epochs");
  t.ibp_ramp_epochs = count(c, "ibp_ramp_epochs");
  t.ibp_lambda_max = real(c, "ibp_lambda_max");
  t.ibp_hold_epochs = count(c, "ibp_hold_epochs");
  t.adversary_alpha = real(c, "adversary_alpha");
  t.adversary_pretrain_epochs = count(c, "adversary_pretrain_epochs");
  t.adversary_axis = str(c, "adversary_axis");
  t.batch_size = count(c, "batch_size");
  const std::string opt = str(c, "optimizer");
  if (opt == "sgd") t.optimizer = OptimizerKind::kSgd;
  else if (opt == "adam") t.optimizer = OptimizerKind::kAdam;
  else throw UsageError("--optimizer must be sgd or adam");
  t.iw_add_one_smoothing = c.at("iw_add_one_smoothing").get<bool>();
  t.hidden_size = count(c, "hidden_size");
  t.kernel_size = count(c, "kernel_size");
  t.max_len = count(c, "max_len");
  t.seed = c.at("seed").get<std::uint64_t>();
  try {
    validate(t);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return t;
}

int cmd_train(const json& c, std::ostream& out) {
  const TrainConfig tc = train_config_from(c);
  const std::string data_path = require_path(c, "data");
  const std::string emb_path = require_path(c, "embeddings");
  const std::size_t top_k = count(c, "top_k");
  if (top_k == 0) throw UsageError("--top-k must be >= 1");
  const fs::path dir = prepare_out(c);

  const Dataset train_set = read_corpus(data_path);
  Dataset dev_set;
  if (!str(c, "dev").empty()) dev_set = read_corpus(str(c, "dev"));
  const Vocabulary vocab = build_vocab(train_set, count(c, "min_count"));
  const EmbeddingLoad emb = load_embeddings(emb_path, vocab, embedding_file_dim(emb_path),
                                            mix_seed(tc.seed, 10));
  const SubstitutionTable neighbors = compute_neighbor_table(emb.embeddings, vocab, top_k);
  write_neighbor_table(neighbors, (dir / "neighbors.txt").string());

  TrainData data;
  data.train = &train_set;
  data.vocab = &vocab;
  data.embeddings = &emb.embeddings;
  data.neighbors = &neighbors;
  data.gender_pairs = pairs_from(c);
  data.identity_terms = words_from(c, "identity_terms", default_identity_terms());
  const auto gendered = words_from(c, "gendered_words", default_gendered_words());
  data.gendered_words = std::set<std::string>(gendered.begin(), gendered.end());
  if (!dev_set.empty()) data.dev = &dev_set;

  const TrainResult result = train(tc, data);
  save_checkpoint(result.model, (dir / "model.json").string());
  write_training_log(result.log, (dir / "train_log.jsonl").string());
  out << "trained " << result.log.size() << " epochs; checkpoint "
      << (dir / "model.json").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval / certify

struct CertSetup {
  TextCnn model;
  Dataset data;
  ResolvedTable table;
  CertifyOptions options;
};

CertSetup cert_setup(const json& c) {
  const std::string method = str(c, "certify_method");
  if (method != "ibp" && method != "safer") throw UsageError("--certify-method must be ibp or safer");
  const std::size_t top_k = count(c, "top_k");
  if (top_k == 0) throw UsageError("--top-k must be >= 1");
  const std::string model_path = require_path(c, "model");
  const std::string data_path = require_path(c, "data");
  TextCnn model = load_checkpoint(model_path);
  Dataset data = read_corpus(data_path);
  const std::string cache = str(c, "neighbors");
  if (!cache.empty() && !fs::exists(cache)) throw UsageError("neighbor cache not found: " + cache);
  SubstitutionTable table =
      cache.empty() ? compute_neighbor_table(model.embeddings(), model.vocab(), top_k)
                    : load_neighbor_table(cache, top_k, model.embeddings(), model.vocab());
  if (method == "safer") table = to_clusters(table);
  if (c.at("gender").get<bool>()) table = augment_gender_pairs(table, pairs_from(c));
  CertifyOptions o;
  o.method = method == "ibp" ? CertifyMethod::kIbp : CertifyMethod::kSafer;
  o.safer.n_samples = count(c, "safer_samples");
  o.safer.exact_cap = count(c, "exact_cap");
  o.safer.confidence = real(c, "confidence");
  o.seed = c.at("seed").get<std::uint64_t>();
  o.jobs = std::max<std::size_t>(1, count(c, "jobs"));
  ResolvedTable resolved(table, model.vocab());
  return CertSetup{std::move(model), std::move(data), std::move(resolved), o};
}

int cmd_eval(const json& c, std::ostream& out) {
  CertSetup s = cert_setup(c);
  const fs::path dir = prepare_out(c);
  const MetricsReport report = evaluate_model(s.model, s.data, s.table, s.options);
  write_report(report, (dir / "report.txt").string());
  out << format_report(report);
  return kExitOk;
}

// Exhaustive oracle: does any variant change the relevant prediction?
bool flips(const CertSetup& s, const std::vector<TokenId>& ids, std::size_t gold,
           std::size_t cap) {
  const auto prepared = s.model.prepare(ids);
  const auto cands = s.model.prepare_candidates(ids, s.table.candidates_for(ids));
  for (const auto& variant : enumerate_perturbations(prepared, cands, cap)) {
    std::size_t pred = 0;
    if (s.options.method == CertifyMethod::kIbp) {
      pred = s.model.predict(variant);
    } else {
      pred = smoothed_prediction(smoothed_scores(s.model, variant, s.table, s.options.safer, 0));
    }
    if (pred != gold) return true;
  }
  return false;
}

int cmd_certify(const json& c, std::ostream& out) {
  CertSetup s = cert_setup(c);
  const std::size_t cap = count(c, "enumerate_cap");
  const fs::path dir = prepare_out(c);
  const auto results = certify_dataset(s.model, s.data, s.table, s.options);

  std::vector<int> checked(s.data.size(), 0), violation(s.data.size(), 0);
  if (cap > 0) {
    parallel_for(s.data.size(), s.options.jobs, [&](std::size_t i) {
      const auto ids = s.model.encode(s.data[i]);
      const auto prepared = s.model.prepare(ids);
      const auto cands = s.model.prepare_candidates(ids, s.table.candidates_for(ids));
      if (perturbation_count(cands) > cap) return;
      checked[i] = 1;
      violation[i] = results[i].certified && flips(s, ids, s.data[i].label, cap);
    });
  }
  std::ofstream rows(dir / "certify.jsonl", std::ios::binary);
  std::size_t certified = 0, n_checked = 0, n_violations = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    nlohmann::ordered_json j;
    j["index"] = i;
    j["certified"] = r.certified;
    j["point_correct"] = r.point_correct;
    j["margin"] = r.margin;
    if (r.method == CertifyMethod::kSafer) j["samples_used"] = r.samples_used;
    if (cap > 0) {
      j["enumerated"] = checked[i] != 0;
      if (checked[i]) j["violation"] = violation[i] != 0;
    }
    rows << j.dump() << '\n';
    certified += r.certified;
    n_checked += checked[i];
    n_violations += violation[i];
  }
  std::ofstream summary(dir / "summary.txt", std::ios::binary);
  std::ostringstream text;
  text << "method = " << str(c, "certify_method") << '\n'
       << "examples = " << results.size() << '\n'
       << "certified = " << certified << '\n'
       << "cra = " << format_double(results.empty() ? 0.0
                                                    : static_cast<double>(certified) /
                                                          static_cast<double>(results.size()))
       << '\n';
  if (cap > 0) {
    text << "enumerated = " << n_checked << '\n' << "violations = " << n_violations << '\n';
  }
  summary << text.str();
  out << text.str();
  return n_violations == 0 ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- explain

int cmd_explain(const json& c, std::ostream& out) {
  const std::string subset = str(c, "subset");
  if (subset != "disagreement" && subset != "all") {
    throw UsageError("--subset must be 'disagreement' or 'all'");
  }
  const long long a_class = c.at("a_predicted_class").get<long long>();
  TextCnn model_a = load_checkpoint(require_path(c, "model_a"));
  TextCnn model_b = load_checkpoint(require_path(c, "model_b"));
  const Dataset data = read_corpus(require_path(c, "data"));
  const fs::path dir = prepare_out(c);

  Dataset chosen;
  if (subset == "all") {
    chosen = data;
  } else {
    DisagreementOptions d;
    if (a_class >= 0) d.a_predicted_class = static_cast<std::size_t>(a_class);
    for (std::size_t i : disagreement_set(model_a, model_b, data, d)) chosen.push_back(data[i]);
  }
  GenderReportOptions o;
  o.k = count(c, "k");
  o.n_samples = count(c, "lime_samples");
  o.sample_cap = count(c, "sample_cap");
  o.seed = c.at("seed").get<std::uint64_t>();
  o.jobs = std::max<std::size_t>(1, count(c, "jobs"));
  const auto lexicon = words_from(c, "lexicon", default_gender_tokens());
  const GenderTokenReport report = gender_token_report(model_a, model_b, chosen, lexicon, o);
  const std::string text = format_gender_report(report, "model_a", "model_b");
  const std::string bars = format_gender_bars(report, "model_a", "model_b");
  std::ofstream(dir / "gender_report.txt", std::ios::binary) << text;
  std::ofstream(dir / "gender_bars.txt", std::ios::binary) << bars;
  out << text << bars;
  return kExitOk;
}

// ---------------------------------------------------------------- debias-embeddings

int cmd_debias(const json& c, std::ostream& out) {
  const std::string emb_path = require_path(c, "embeddings");
  const fs::path dir = prepare_out(c);
  const Vocabulary vocab = embedding_file_vocab(emb_path);
  const EmbeddingLoad emb = load_embeddings(emb_path, vocab, embedding_file_dim(emb_path),
                                            c.at("seed").get<std::uint64_t>());
  const GenderPairList pairs = pairs_from(c);
  const auto gendered = words_from(c, "gendered_words", default_gendered_words());
  const GenderSubspace g = gender_direction(emb.embeddings, vocab, pairs);
  const HardDebiasResult r = hard_debias(emb.embeddings, vocab, g, pairs,
                                         std::set<std::string>(gendered.begin(), gendered.end()));
  write_embeddings(r.embeddings, vocab, (dir / "embeddings.txt").string());
  out << "neutralized " << r.neutralized.size() << " words, equalized " << r.equalized.size()
      << " pairs\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto specs = command_options();
  CLI::App app{"certfair: certified-robust and fair text classification", "certfair"};
  app.require_subcommand(1);
  std::map<std::string, std::string> config_paths;
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::map<std::string, CLI::Option*>> options;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, list] : specs) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " step");
    subs[name] = sub;
    sub->add_option("--config", config_paths[name], "flat JSON config file");
    for (const auto& s : list) {
      options[name][s.key] = sub->add_option(flag_name(s.key), values[name][s.key], s.help);
    }
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }
  try {
    std::map<std::string, std::string> given;
    for (const auto& [key, opt] : options[command]) {
      if (opt->count() > 0) given[key] = values[command][key];
    }
    const json c = merge_config(command, specs.at(command), config_paths[command], given);
    if (command == "synth") return cmd_synth(c, out);
    if (command == "train") return cmd_train(c, out);
    if (command == "eval") return cmd_eval(c, out);
    if (command == "certify") return cmd_certify(c, out);
    if (command == "explain") return cmd_explain(c, out);
    return cmd_debias(c, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << subs[command]->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace certfair

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "dualmfa/config.hpp"
#include "dualmfa/graph.hpp"

namespace dualmfa {

/// Question gates for both branches plus the answer classifier.
struct HeadParameters {
  Parameter W_hr, b_hr;  // [G*d_c x k], [G*d_c]
  Parameter W_hd, b_hd;  // [G*d_c x k], [G*d_c]
  Parameter W_p, b_p;    // [n_answers x combine_dim], [n_answers]

  void init(const ModelConfig& cfg, std::mt19937_64& rng, const std::string& prefix = "head");
  std::vector<Parameter*> all();
};

/// Ordered answer strings; index = class id. Entries must be unique.
class AnswerVocabulary {
 public:
  AnswerVocabulary() = default;
  explicit AnswerVocabulary(std::vector<std::string> answers);

  std::size_t size() const { return answers_.size(); }
  const std::string& answer(std::size_t id) const { return answers_.at(id); }
  const std::vector<std::string>& answers() const { return answers_; }
  /// Lookup by normalized (lower-cased, trimmed) string.
  std::optional<std::size_t> find(const std::string& s) const;

  static AnswerVocabulary load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<std::string> answers_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Lower-case and trim, the matching rule used for accuracy
/// and vocabulary lookup.
std::string normalize_answer(const std::string& s);

/// h_r = v1 o tanh(W_hr Q + b_hr), h_d = v2 o tanh(W_hd Q + b_hd), merged
/// per config (add / mul / cat). With a single enabled branch the result is
/// that branch's h alone; pass std::nullopt for the disabled branch.
Var combine(Graph& g, std::optional<Var> v1, std::optional<Var> v2, Var question,
            HeadParameters& p, const ModelConfig& cfg, const DropoutCtx& dctx = {});

/// W_p h + b_p. [n_answers]
Var answer_logits(Graph& g, Var combined, HeadParameters& p);

/// softmax(W_p h + b_p); a probability vector. [n_answers]
Var classify(Graph& g, Var combined, HeadParameters& p);

/// -log softmax(logits)[target], fused log-sum-exp form.
Var cross_entropy(Graph& g, Var logits, std::size_t target);

/// Soft accuracy min(matches/3, 1) against multiple ground truths;
/// plain exact match when only one ground truth is given.
double vqa_accuracy(const std::string& predicted, const std::vector<std::string>& ground_truths);

/// Class id of the most frequent ground-truth answer (earliest occurrence
/// breaks ties). Throws label_error when the answer is not in the vocabulary.
std::size_t most_frequent_answer_index(const std::vector<std::string>& answers,
                                       const AnswerVocabulary& vocab);

}  // namespace dualmfa

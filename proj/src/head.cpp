// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/head.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "dualmfa/error.hpp"

namespace dualmfa {

void HeadParameters::init(const ModelConfig& cfg, std::mt19937_64& rng,
                          const std::string& prefix) {
  const std::size_t gd = cfg.pooled_dim(), k = cfg.hidden_dim;
  W_hr = Parameter(prefix + ".W_hr", Tensor({gd, k}));
  b_hr = Parameter(prefix + ".b_hr", Tensor({gd}));
  W_hd = Parameter(prefix + ".W_hd", Tensor({gd, k}));
  b_hd = Parameter(prefix + ".b_hd", Tensor({gd}));
  W_p = Parameter(prefix + ".W_p", Tensor({cfg.n_answers, cfg.combine_dim()}));
  b_p = Parameter(prefix + ".b_p", Tensor({cfg.n_answers}));
  fan_in_uniform_init(W_hr.value, k, rng);
  fan_in_uniform_init(W_hd.value, k, rng);
  fan_in_uniform_init(W_p.value, cfg.combine_dim(), rng);
}

std::vector<Parameter*> HeadParameters::all() {
  return {&W_hr, &b_hr, &W_hd, &b_hd, &W_p, &b_p};
}

std::string normalize_answer(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(b, e - b + 1);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

AnswerVocabulary::AnswerVocabulary(std::vector<std::string> answers)
    : answers_(std::move(answers)) {
  for (std::size_t i = 0; i < answers_.size(); ++i) {
    for (std::size_t j = i + 1; j < answers_.size(); ++j) {
      if (answers_[i] == answers_[j]) {
        throw data_error("duplicate answer '" + answers_[i] + "' in answer vocabulary");
      }
    }
  }
  for (std::size_t i = 0; i < answers_.size(); ++i) {
    index_.emplace(normalize_answer(answers_[i]), i);
  }
}

std::optional<std::size_t> AnswerVocabulary::find(const std::string& s) const {
  auto it = index_.find(normalize_answer(s));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

AnswerVocabulary AnswerVocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open answer vocabulary: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return AnswerVocabulary(std::move(lines));
}

void AnswerVocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write answer vocabulary: " + path);
  for (const std::string& a : answers_) out << a << '\n';
}

Var combine(Graph& g, std::optional<Var> v1, std::optional<Var> v2, Var question,
            HeadParameters& p, const ModelConfig& cfg, const DropoutCtx& dctx) {
  if (!cfg.use_region_branch && !cfg.use_detection_branch) {
    throw config_error("both branches disabled; nothing to combine");
  }
  std::optional<Var> h_r, h_d;
  if (cfg.use_region_branch) {
    if (!v1) throw contract_error("combine: region branch enabled but v1 missing");
    Var gate = dctx.apply(g, g.tanh(affine(g, p.W_hr, p.b_hr, question)));
    h_r = g.hadamard(*v1, gate);
  }
  if (cfg.use_detection_branch) {
    if (!v2) throw contract_error("combine: detection branch enabled but v2 missing");
    Var gate = dctx.apply(g, g.tanh(affine(g, p.W_hd, p.b_hd, question)));
    h_d = g.hadamard(*v2, gate);
  }
  if (!h_d) return *h_r;
  if (!h_r) return *h_d;
  switch (cfg.combine) {
    case CombineOp::Add: return g.add(*h_r, *h_d);
    case CombineOp::Mul: return g.hadamard(*h_r, *h_d);
    default: return g.concat_axis({*h_r, *h_d}, 0);
  }
}

Var answer_logits(Graph& g, Var combined, HeadParameters& p) {
  return affine(g, p.W_p, p.b_p, combined);
}

Var classify(Graph& g, Var combined, HeadParameters& p) {
  return g.softmax_axis(answer_logits(g, combined, p), 0);
}

Var cross_entropy(Graph& g, Var logits, std::size_t target) {
  const std::size_t n = g.value(logits).size();
  if (target >= n) {
    throw label_error("answer class " + std::to_string(target) + " outside the " +
                      std::to_string(n) + "-way classifier");
  }
  return g.cross_entropy_logits(logits, target);
}

double vqa_accuracy(const std::string& predicted, const std::vector<std::string>& ground_truths) {
  if (ground_truths.empty()) throw contract_error("vqa_accuracy: no ground truths");
  const std::string pred = normalize_answer(predicted);
  if (ground_truths.size() == 1) {
    return pred == normalize_answer(ground_truths[0]) ? 1.0 : 0.0;
  }
  std::size_t matches = 0;
  for (const std::string& gt : ground_truths) {
    if (pred == normalize_answer(gt)) ++matches;
  }
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

std::size_t most_frequent_answer_index(const std::vector<std::string>& answers,
                                       const AnswerVocabulary& vocab) {
  if (answers.empty()) throw contract_error("sample without ground-truth answers");
  std::size_t best = 0, best_count = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const std::string norm = normalize_answer(answers[i]);
    std::size_t count = 0;
    for (const std::string& a : answers) {
      if (normalize_answer(a) == norm) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best = i;
    }
  }
  auto id = vocab.find(answers[best]);
  if (!id) throw label_error("ground-truth answer '" + answers[best] + "' not in answer vocabulary");
  return *id;
}

}  // namespace dualmfa

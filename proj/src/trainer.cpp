// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "dualmfa/error.hpp"
#include "dualmfa/optimizer.hpp"

namespace dualmfa {

std::size_t EvalReport::count() const {
  std::size_t n = 0;
  for (const auto& [type, stats] : per_type) n += stats.count;
  return n;
}

double EvalReport::accuracy_sum() const {
  double s = 0.0;
  for (const auto& [type, stats] : per_type) s += stats.accuracy_sum;
  return s;
}

EvalReport evaluate(DualMfaModel& model, const Dataset& data) {
  if (data.instances.empty()) throw data_error("empty dataset");
  EvalReport report;
  for (const VqaInstance& inst : data.instances) {
    Graph g;
    ModelForward out = model.forward(g, inst);
    const std::size_t pred = model.predict(g.value(out.probabilities), inst.choices, data.answers);
    const double acc = vqa_accuracy(data.answers.answer(pred), inst.answers);
    EvalTypeStats& stats = report.per_type[inst.question_type()];
    ++stats.count;
    stats.accuracy_sum += acc;
  }
  return report;
}

namespace {

struct ParamSnapshot {
  std::vector<Tensor> values;

  static ParamSnapshot take(const std::vector<Parameter*>& params) {
    ParamSnapshot s;
    s.values.reserve(params.size());
    for (const Parameter* p : params) s.values.push_back(p->value);
    return s;
  }

  void restore(const std::vector<Parameter*>& params) const {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
  }
};

}  // namespace

TrainResult train(DualMfaModel& model, const Dataset& train_data, const Dataset* validation,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_data.instances.empty()) throw data_error("empty dataset");

  std::vector<std::size_t> targets(train_data.size());
  for (std::size_t i = 0; i < train_data.size(); ++i) {
    targets[i] = most_frequent_answer_index(train_data.instances[i].answers, train_data.answers);
  }

  std::vector<Parameter*> params = model.parameters();
  OptimizerState state = OptimizerState::init(params, cfg);

  std::mt19937_64 seeder(cfg.seed);
  std::mt19937_64 shuffle_rng(seeder());
  std::mt19937_64 dropout_rng(seeder());

  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  std::size_t cursor = 0;

  DropoutCtx dctx{cfg.dropout_rate, RunMode::Train, &dropout_rng};

  TrainResult result;
  ParamSnapshot best;
  bool have_best = false;
  std::size_t stale_validations = 0;

  std::vector<std::size_t> batch(cfg.batch_size);
  std::vector<TokenSequence> questions(cfg.batch_size);

  for (std::size_t iter = 1; iter <= cfg.max_iterations; ++iter) {
    for (Parameter* p : params) p->zero_grad();

    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cursor = 0;
      }
      batch[b] = order[cursor++];
      questions[b] = train_data.instances[batch[b]].question;
    }

    // one tape per batch: batched question encoding, per-sample branches
    Graph g;
    Var encoded = encode_batch(g, questions, model.gru(), model.config());
    Var total{};
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const VqaInstance& inst = train_data.instances[batch[b]];
      Var question = g.select_axis(encoded, 0, b);
      ModelForward out = model.forward_from_question(g, question, inst, dctx);
      Var loss = model.loss(g, out, targets[batch[b]]);
      total = b == 0 ? loss : g.add(total, loss);
    }
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
    Var mean_loss = g.scale_shift(total, inv_batch, 0.0);
    const double batch_loss = g.value(mean_loss)[0];
    g.backward(mean_loss);

    clip_gradients(params, cfg.clip_threshold);
    try {
      rmsprop_step(params, state);
    } catch (const numeric_error& e) {
      // parameters are untouched by the failing step; keep the best
      // validated snapshot if one exists
      result.status = TrainStatus::Aborted;
      result.abort_reason = e.what();
      result.iterations_run = iter - 1;
      if (have_best) best.restore(params);
      return result;
    }

    result.loss_trace.push_back({iter, batch_loss});
    result.iterations_run = iter;

    if (validation && iter % cfg.validation_interval == 0) {
      const EvalReport report = evaluate(model, *validation);
      const double acc = report.overall();
      result.validation_trace.push_back({iter, acc});
      if (!have_best || acc > result.best_validation_accuracy) {
        result.best_validation_accuracy = acc;
        best = ParamSnapshot::take(params);
        have_best = true;
        stale_validations = 0;
      } else {
        ++stale_validations;
        if (stale_validations > cfg.early_stop_patience) {
          result.status = TrainStatus::EarlyStopped;
          break;
        }
      }
    }
  }

  if (have_best) best.restore(params);
  return result;
}

}  // namespace dualmfa

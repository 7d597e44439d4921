#include "flowlik/eval/rescore.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "flowlik/errors.hpp"
#include "flowlik/parallel.hpp"

namespace flowlik::eval {

void NBestTask::validate() const {
  if (!field) throw ContractError("rescore: missing field factory");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& hyps = items[i].hypotheses;
    if (hyps.size() < 2) throw ContractError("rescore: item " + std::to_string(i) + " has fewer than 2 hypotheses");
    for (const Hypothesis& h : hyps) {
      if (h.token_count == 0) throw ContractError("rescore: item " + std::to_string(i) + " has token_count 0");
      if (h.token_count != hyps.front().token_count) {
        throw ContractError("rescore: item " + std::to_string(i) + " mixes reference lengths");
      }
    }
  }
}

void RescoreWeights::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("rescore: lambda must lie in [0, 1]");
}

HypothesisScores score_hypotheses(const NBestTask& task, std::size_t workers) {
  task.validate();
  const std::size_t n = task.items.size();
  HypothesisScores scores;
  scores.logp.resize(n);
  std::vector<std::vector<PairError>> errors(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const NBestItem& item = task.items[i];
    scores.logp[i].assign(item.hypotheses.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j < item.hypotheses.size(); ++j) {
      try {
        const FlowField field = task.field(item.hypotheses[j].condition);
        scores.logp[i][j] = log_likelihood(field, item.x0, task.likelihood, i).logp();
      } catch (const Error& e) {
        errors[i].push_back({i, j, e.what()});
      }
    }
  });
  for (auto& per_item : errors)
    for (auto& e : per_item) scores.errors.push_back(std::move(e));
  return scores;
}

namespace {

template <class Pick>
Selection select(const NBestTask& task, Pick pick) {
  Selection s;
  double errors = 0.0;
  double tokens = 0.0;
  for (std::size_t i = 0; i < task.items.size(); ++i) {
    const auto& hyps = task.items[i].hypotheses;
    const std::size_t j = pick(i);
    s.selected.push_back(j);
    s.item_errors.push_back(static_cast<double>(hyps[j].token_errors));
    errors += static_cast<double>(hyps[j].token_errors);
    tokens += static_cast<double>(hyps.front().token_count);
  }
  s.error_rate = tokens > 0.0 ? errors / tokens : 0.0;
  return s;
}

// Index of the largest finite value, ties to the lowest index.
template <class Value>
std::optional<std::size_t> argmax(std::size_t count, Value value) {
  std::optional<std::size_t> best;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < count; ++j) {
    const double v = value(j);
    if (std::isnan(v)) continue;
    if (!best || v > best_v) {
      best = j;
      best_v = v;
    }
  }
  return best;
}

}  // namespace

Selection select_by_base_score(const NBestTask& task) {
  return select(task, [&](std::size_t i) {
    const auto& hyps = task.items[i].hypotheses;
    return argmax(hyps.size(), [&](std::size_t j) { return hyps[j].base_score; }).value_or(0);
  });
}

RescoreReport rescore(const NBestTask& task, const HypothesisScores& scores, const RescoreWeights& w) {
  task.validate();
  w.validate();
  if (scores.logp.size() != task.items.size()) throw ContractError("rescore: scores do not match the task");
  RescoreReport r;
  r.weights = w;
  if (w.lambda == 1.0) {
    r.strategy = select_by_base_score(task);
  } else {
    r.strategy = select(task, [&](std::size_t i) {
      const auto& hyps = task.items[i].hypotheses;
      const auto& lp = scores.logp[i];
      if (lp.size() != hyps.size()) throw ContractError("rescore: scores do not match the task");
      auto best = argmax(hyps.size(), [&](std::size_t j) { return w.lambda * hyps[j].base_score + (1.0 - w.lambda) * lp[j]; });
      if (!best) best = argmax(hyps.size(), [&](std::size_t j) { return hyps[j].base_score; });
      return best.value_or(0);
    });
  }
  r.oracle_best = select(task, [&](std::size_t i) {
    const auto& hyps = task.items[i].hypotheses;
    return *argmax(hyps.size(), [&](std::size_t j) { return -static_cast<double>(hyps[j].token_errors); });
  });
  r.oracle_worst = select(task, [&](std::size_t i) {
    const auto& hyps = task.items[i].hypotheses;
    return *argmax(hyps.size(), [&](std::size_t j) { return static_cast<double>(hyps[j].token_errors); });
  });

  double errors = 0.0;
  double tokens = 0.0;
  for (const NBestItem& item : task.items) {
    double sum = 0.0;
    for (const Hypothesis& h : item.hypotheses) sum += static_cast<double>(h.token_errors);
    const double expected = sum / static_cast<double>(item.hypotheses.size());
    r.random.item_errors.push_back(expected);
    errors += expected;
    tokens += static_cast<double>(item.hypotheses.front().token_count);
  }
  r.random.error_rate = tokens > 0.0 ? errors / tokens : 0.0;
  return r;
}

RescoreReport rescore(const NBestTask& task, const RescoreWeights& w, std::size_t workers) {
  return rescore(task, score_hypotheses(task, workers), w);
}

}  // namespace flowlik::eval

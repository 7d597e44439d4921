#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowlik/eval/classify.hpp"

namespace flowlik::eval {

struct Hypothesis {
  Condition condition;
  double base_score = 0.0;
  std::size_t token_errors = 0;
  /// Reference length; identical for every hypothesis of an item.
  std::size_t token_count = 1;
};

struct NBestItem {
  Vector x0;
  std::vector<Hypothesis> hypotheses;
};

struct NBestTask {
  std::vector<NBestItem> items;
  FieldFactory field;
  LikelihoodConfig likelihood;

  /// >= 2 hypotheses per item, token_count > 0 and equal within an item.
  void validate() const;
};

/// Combined score lambda * base_score + (1 - lambda) * logp.
struct RescoreWeights {
  double lambda = 0.5;

  void validate() const;
};

/// logp of every hypothesis (NaN on failure), one row per item.
struct HypothesisScores {
  std::vector<std::vector<double>> logp;
  std::vector<PairError> errors;
};

HypothesisScores score_hypotheses(const NBestTask& task, std::size_t workers = 1);

struct Selection {
  std::vector<std::size_t> selected;
  /// Token errors of the selected hypothesis per item.
  std::vector<double> item_errors;
  double error_rate = 0.0;
};

struct RescoreReport {
  RescoreWeights weights;
  Selection strategy;
  Selection oracle_best;
  Selection oracle_worst;
  /// Expected error of a uniformly random pick; `selected` is left empty.
  Selection random;
};

/// Hypotheses whose likelihood failed are skipped unless lambda == 1.
RescoreReport rescore(const NBestTask& task, const HypothesisScores& scores, const RescoreWeights& w);
RescoreReport rescore(const NBestTask& task, const RescoreWeights& w, std::size_t workers = 1);

/// Selection by base score alone (the lambda = 1 column).
Selection select_by_base_score(const NBestTask& task);

}  // namespace flowlik::eval

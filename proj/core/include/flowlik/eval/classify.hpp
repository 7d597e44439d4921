#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowlik/condition.hpp"
#include "flowlik/flow.hpp"
#include "flowlik/likelihood.hpp"

namespace flowlik::eval {

/// Builds the flow field that scores a sample under one candidate condition.
using FieldFactory = std::function<FlowField(const Condition&)>;

struct ClassificationSample {
  Vector x0;
  std::size_t true_index = 0;
};

struct ClassificationTask {
  std::vector<ClassificationSample> samples;
  std::vector<Condition> candidates;
  FieldFactory field;
  LikelihoodConfig likelihood;

  /// Every true index must address a candidate.
  void validate() const;
};

struct PairError {
  std::size_t sample = 0;
  std::size_t candidate = 0;
  std::string message;
};

struct ClassificationReport {
  /// samples x candidates; NaN where the likelihood failed.
  Matrix logp;
  /// Empty when every candidate failed for the sample.
  std::vector<std::optional<std::size_t>> predictions;
  std::vector<PairError> errors;
  std::size_t correct = 0;
  /// correct / samples; samples without a prediction count as wrong.
  double accuracy = 0.0;
};

/// Argmax of log p(x | candidate), ties to the lowest index. The probe stream
/// depends on the sample only, so identical candidates tie exactly.
ClassificationReport classify(const ClassificationTask& task, std::size_t workers = 1);

}  // namespace flowlik::eval

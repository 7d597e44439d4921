#pragma once

#include <optional>
#include <vector>

#include "config.hpp"
#include "flowlik/condition.hpp"
#include "flowlik/score.hpp"
#include "flowlik/training.hpp"
#include "flowlik/types.hpp"

namespace flowlik::cli {

struct Sample {
  Vector x;
  int label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  Index dim = 0;
  int num_classes = 1;
  /// rows x cols for grid data.
  std::optional<std::pair<Index, Index>> grid;
};

/// Deterministic given dataset.seed. Labels: gaussian 0, gmm component,
/// two_domain_grids 0 smooth / 1 striped, checkerboard cell parity.
Dataset generate(const DatasetSection& ds);

/// "label", "blur" or "none" after resolving "auto".
std::string conditioning_mode(const DatasetSection& ds);

/// Condition fed to the model for a sample under the dataset's conditioning.
Condition condition_for(const Dataset& data, const DatasetSection& ds, const Sample& s);

std::vector<TrainingExample> training_examples(const Dataset& data, const DatasetSection& ds);

/// Oracle score of the generating distribution (gaussian and gmm only).
ScoreField analytic_score(const DatasetSection& ds, const SdeSpec& sde);

}  // namespace flowlik::cli

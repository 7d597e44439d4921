#include "flowlik/eval/classify.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "flowlik/errors.hpp"
#include "flowlik/parallel.hpp"

namespace flowlik::eval {

void ClassificationTask::validate() const {
  if (candidates.empty()) throw ContractError("classify: at least one candidate condition is required");
  if (!field) throw ContractError("classify: missing field factory");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].true_index >= candidates.size()) {
      throw ContractError("classify: sample " + std::to_string(i) + " has true index " +
                          std::to_string(samples[i].true_index) + " but only " + std::to_string(candidates.size()) +
                          " candidates");
    }
  }
}

ClassificationReport classify(const ClassificationTask& task, std::size_t workers) {
  task.validate();
  const std::size_t n = task.samples.size();
  const std::size_t m = task.candidates.size();
  ClassificationReport report;
  report.logp = Matrix::Constant(static_cast<Index>(n), static_cast<Index>(m), std::numeric_limits<double>::quiet_NaN());
  report.predictions.assign(n, std::nullopt);
  std::vector<std::vector<PairError>> errors(n);

  parallel_for(n, workers, [&](std::size_t i) {
    const auto row = static_cast<Index>(i);
    for (std::size_t j = 0; j < m; ++j) {
      try {
        const FlowField field = task.field(task.candidates[j]);
        report.logp(row, static_cast<Index>(j)) = log_likelihood(field, task.samples[i].x0, task.likelihood, i).logp();
      } catch (const Error& e) {
        errors[i].push_back({i, j, e.what()});
      }
    }
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = report.logp(row, static_cast<Index>(j));
      if (std::isnan(v)) continue;
      if (!best || v > report.logp(row, static_cast<Index>(*best))) best = j;
    }
    report.predictions[i] = best;
  });

  for (std::size_t i = 0; i < n; ++i) {
    for (auto& e : errors[i]) report.errors.push_back(std::move(e));
    if (report.predictions[i] && *report.predictions[i] == task.samples[i].true_index) ++report.correct;
  }
  report.accuracy = n == 0 ? 0.0 : static_cast<double>(report.correct) / static_cast<double>(n);
  return report;
}

}  // namespace flowlik::eval

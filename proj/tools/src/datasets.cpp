#include "datasets.hpp"

#include <cmath>
#include <numbers>

#include "flowlik/errors.hpp"
#include "flowlik/eval/blur.hpp"
#include "flowlik/random.hpp"

namespace flowlik::cli {

namespace {

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())); }

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

int categorical(Rng& rng, const std::vector<double>& weights) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

// A fixed bump of random height plus a weaker low-frequency wave of random phase.
Matrix smooth_grid(Rng& rng, Index rows, Index cols, double amplitude) {
  const double pi = std::numbers::pi;
  const double height = amplitude * rng.uniform(0.5, 1.5);
  const double wave = 0.5 * amplitude * rng.uniform();
  const double pr = rng.uniform(0.0, 2.0 * pi);
  const double pc = rng.uniform(0.0, 2.0 * pi);
  Matrix g(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const double u = (static_cast<double>(r) + 0.5) / static_cast<double>(rows);
      const double v = (static_cast<double>(c) + 0.5) / static_cast<double>(cols);
      g(r, c) = height * std::sin(pi * u) * std::sin(pi * v) +
                wave * std::sin(2.0 * pi * u + pr) * std::cos(2.0 * pi * v + pc);
    }
  return g;
}

}  // namespace

Dataset generate(const DatasetSection& ds) {
  Rng rng(ds.seed);
  Dataset data;
  data.samples.reserve(ds.num_samples);
  if (ds.kind == "gaussian") {
    const Vector mean = to_vector(ds.mean);
    const Vector sd = to_vector(ds.var).cwiseSqrt();
    data.dim = mean.size();
    for (std::size_t i = 0; i < ds.num_samples; ++i) {
      data.samples.push_back({mean + sd.cwiseProduct(rng.normal_vector(data.dim)), 0});
    }
  } else if (ds.kind == "gmm") {
    const Matrix means = to_matrix(ds.means);
    const double sd = std::sqrt(ds.component_var);
    data.dim = means.cols();
    data.num_classes = static_cast<int>(means.rows());
    for (std::size_t i = 0; i < ds.num_samples; ++i) {
      const int k = categorical(rng, ds.weights);
      data.samples.push_back({means.row(k).transpose() + sd * rng.normal_vector(data.dim), k});
    }
  } else if (ds.kind == "two_domain_grids") {
    const Index rows = ds.grid_rows;
    const Index cols = ds.grid_cols;
    data.dim = rows * cols;
    data.num_classes = 2;
    data.grid = {rows, cols};
    for (std::size_t i = 0; i < ds.num_samples; ++i) {
      int domain = 0;
      if (ds.grid_domain == "striped") domain = 1;
      else if (ds.grid_domain == "both") domain = static_cast<int>(i % 2);
      Matrix g = smooth_grid(rng, rows, cols, ds.smooth_amplitude);
      if (domain == 1) {
        for (Index c = 0; c < cols; ++c) g.col(c).array() += (c % 2 == 0 ? 1.0 : -1.0) * ds.stripe_amplitude;
      }
      for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) g(r, c) += ds.grid_noise * rng.normal();
      data.samples.push_back({flatten_grid(g), domain});
    }
  } else if (ds.kind == "checkerboard") {
    const int n = ds.checker_cells;
    const double e = ds.checker_extent;
    const double cell = 2.0 * e / n;
    data.dim = 2;
    data.num_classes = 1;
    for (std::size_t i = 0; i < ds.num_samples; ++i) {
      // Uniform over the dark cells: pick a cell with (i + j) even, then a point in it.
      int ci = 0;
      int cj = 0;
      do {
        ci = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        cj = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      } while ((ci + cj) % 2 != 0);
      Vector x(2);
      x(0) = -e + cell * (ci + rng.uniform());
      x(1) = -e + cell * (cj + rng.uniform());
      data.samples.push_back({x, 0});
    }
  } else {
    throw ConfigError("unknown dataset kind " + ds.kind);
  }
  return data;
}

std::string conditioning_mode(const DatasetSection& ds) {
  if (ds.conditioning != "auto") return ds.conditioning;
  return ds.kind == "two_domain_grids" ? "blur" : "label";
}

Condition condition_for(const Dataset& data, const DatasetSection& ds, const Sample& s) {
  const std::string mode = conditioning_mode(ds);
  if (mode == "none") return Condition::null();
  if (mode == "label") return Condition::class_label(s.label);
  if (!data.grid) throw ConfigError("blur conditioning needs grid data");
  const Matrix g = unflatten_grid(s.x, data.grid->first, data.grid->second);
  return Condition::grid_mean(eval::blur(g, eval::BlurKernel{}));
}

std::vector<TrainingExample> training_examples(const Dataset& data, const DatasetSection& ds) {
  std::vector<TrainingExample> out;
  out.reserve(data.samples.size());
  for (const Sample& s : data.samples) out.push_back({s.x, condition_for(data, ds, s)});
  return out;
}

ScoreField analytic_score(const DatasetSection& ds, const SdeSpec& sde) {
  const SdeSpec score_sde = sde.variant == SdeVariant::DdimSigma ? SdeSpec::vp(sde.schedule) : sde;
  if (ds.kind == "gaussian") return ScoreField::gaussian(to_vector(ds.mean), to_vector(ds.var), score_sde);
  if (ds.kind == "gmm") {
    return ScoreField::gmm(to_vector(ds.weights), to_matrix(ds.means), ds.component_var, score_sde);
  }
  throw ConfigError("no analytic score for dataset kind " + ds.kind + "; use score.kind = mlp");
}

}  // namespace flowlik::cli

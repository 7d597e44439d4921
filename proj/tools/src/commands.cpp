#include "commands.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "csv.hpp"
#include "datasets.hpp"
#include "flowlik/errors.hpp"
#include "flowlik/eval/blur.hpp"
#include "flowlik/eval/classify.hpp"
#include "flowlik/eval/rescore.hpp"
#include "flowlik/eval/significance.hpp"
#include "flowlik/eval/sweep.hpp"
#include "flowlik/flow.hpp"
#include "flowlik/likelihood.hpp"
#include "flowlik/parallel.hpp"
#include "flowlik/params_io.hpp"
#include "flowlik/training.hpp"

namespace flowlik::cli {

using nlohmann::json;

namespace {

json summary_header(const std::string& protocol, const RunConfig& cfg) {
  return {{"protocol", protocol}, {"seed", cfg.seed}, {"config", echo(cfg)}};
}

std::shared_ptr<const ScoreField> build_score(const RunConfig& cfg) {
  if (cfg.score.kind == "analytic") return std::make_shared<const ScoreField>(analytic_score(cfg.dataset, cfg.sde_spec()));
  if (cfg.score.model.empty()) throw ConfigError("score.model: required when score.kind = mlp");
  ModelFile model = load_model(cfg.score.model);
  auto params = std::make_shared<const NetworkParams>(std::move(model.params));
  return std::make_shared<const ScoreField>(ScoreField::mlp(std::move(params), model.sde));
}

eval::FieldFactory field_factory(const RunConfig& cfg, std::shared_ptr<const ScoreField> score) {
  const SdeSpec sde = cfg.sde_spec();
  const std::string mode = cfg.field.mode;
  const double omega = cfg.field.omega;
  return [sde, score, mode, omega](const Condition& c) {
    if (mode == "unconditional") return FlowField(sde, score, Condition::null());
    if (mode == "guided") return FlowField(sde, score, c, GuidanceConfig{omega});
    return FlowField(sde, score, c);
  };
}

std::vector<std::size_t> data_shape(const RunConfig& cfg, Index dim) {
  const auto& d = cfg.dataset;
  if (d.kind == "two_domain_grids" && static_cast<Index>(d.grid_rows) * d.grid_cols == dim) {
    return {static_cast<std::size_t>(d.grid_rows), static_cast<std::size_t>(d.grid_cols)};
  }
  return {static_cast<std::size_t>(dim)};
}

LikelihoodConfig likelihood_for(const RunConfig& cfg, Index dim) {
  LikelihoodConfig l = cfg.likelihood();
  l.shape = data_shape(cfg, dim);
  return l;
}

Condition blur_condition(const RunConfig& cfg, const Vector& x) {
  const auto& d = cfg.dataset;
  if (d.kind != "two_domain_grids" || static_cast<Index>(d.grid_rows) * d.grid_cols != x.size()) {
    throw ConfigError("blur conditions need two_domain_grids data of matching size");
  }
  const Matrix g = unflatten_grid(x, d.grid_rows, d.grid_cols);
  return Condition::grid_mean(eval::blur(g, eval::BlurKernel{cfg.adapt.kernel_size, cfg.adapt.kernel_sigma}));
}

/// Rows from an input file, or the dataset with its own conditions.
struct Inputs {
  std::vector<InputRow> rows;
  std::vector<RowError> errors;
  Index dim = 0;
};

Inputs load_inputs(const RunConfig& cfg, const std::optional<std::filesystem::path>& input) {
  Inputs in;
  if (input) {
    std::ifstream f(*input, std::ios::binary);
    if (!f) throw IoError("cannot open input file " + input->string());
    SampleFile file = read_samples(f);
    in.rows = std::move(file.rows);
    in.errors = std::move(file.errors);
    in.dim = file.dim;
  } else {
    const Dataset data = generate(cfg.dataset);
    in.dim = data.dim;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      InputRow row;
      row.line = i + 2;
      row.index = i;
      row.x = data.samples[i].x;
      row.condition = condition_for(data, cfg.dataset, data.samples[i]);
      in.rows.push_back(std::move(row));
    }
  }
  return in;
}

/// Resolves blur cells; rows that cannot be resolved move to the error list.
void resolve_conditions(const RunConfig& cfg, Inputs& in) {
  std::vector<InputRow> kept;
  for (InputRow& row : in.rows) {
    if (row.blur) {
      try {
        row.condition = blur_condition(cfg, row.x);
        row.blur = false;
      } catch (const Error& e) {
        in.errors.push_back({row.line, std::string("condition: ") + e.what()});
        continue;
      }
    }
    kept.push_back(std::move(row));
  }
  in.rows = std::move(kept);
}

std::string error_manifest(const std::vector<RowError>& errors) {
  std::ostringstream os;
  write_csv_row(os, {"line", "message"});
  for (const RowError& e : errors) write_csv_row(os, {std::to_string(e.line), e.message});
  return os.str();
}

}  // namespace

Artifacts cmd_dataset(const RunConfig& cfg, const RunContext& ctx) {
  const Dataset data = generate(cfg.dataset);
  std::ostringstream os;
  std::vector<std::string> header;
  for (Index i = 0; i < data.dim; ++i) header.push_back("x" + std::to_string(i));
  header.push_back("condition");
  write_csv_row(os, header);
  for (const Sample& s : data.samples) {
    std::vector<std::string> row;
    for (Index i = 0; i < data.dim; ++i) row.push_back(num(s.x[i]));
    row.push_back(condition_cell(condition_for(data, cfg.dataset, s)));
    write_csv_row(os, row);
  }
  Artifacts a;
  a.files.push_back(artifact_path(ctx, "dataset", cfg.seed, "csv"));
  write_file(a.files.back(), os.str());
  json j = summary_header("dataset", cfg);
  j["num_samples"] = data.samples.size();
  j["dim"] = data.dim;
  j["num_classes"] = data.num_classes;
  a.files.push_back(artifact_path(ctx, "dataset", cfg.seed, "json"));
  write_json(a.files.back(), j);
  a.summary = fmt::format("dataset: {} samples of dimension {}", data.samples.size(), data.dim);
  return a;
}

Artifacts cmd_train(const RunConfig& cfg, const RunContext& ctx) {
  const Dataset data = generate(cfg.dataset);
  const std::vector<TrainingExample> examples = training_examples(data, cfg.dataset);
  const std::string conditioning = conditioning_mode(cfg.dataset);

  MlpShape shape;
  shape.data_dim = static_cast<int>(data.dim);
  shape.hidden = cfg.score.hidden;
  shape.activation = parse_activation(cfg.score.activation);
  if (conditioning == "label") {
    shape.cond_dim = cfg.score.class_embed_dim;
    shape.num_classes = data.num_classes;
  } else if (conditioning == "blur") {
    shape.cond_dim = static_cast<int>(data.dim);
  }
  const NetworkParams initial = NetworkParams::init(shape, cfg.seed);

  // Scores live in VP coordinates for the sigma-parameterised flow.
  SdeSpec sde = cfg.sde_spec();
  if (sde.variant == SdeVariant::DdimSigma) sde = SdeSpec::vp(sde.schedule);

  TrainConfig tc;
  tc.optimizer = {cfg.train.learning_rate, cfg.train.momentum, cfg.train.clip_norm, cfg.train.batch_size};
  tc.dsm.t_min = cfg.solver.t_min;
  tc.dsm.condition_dropout = conditioning == "none" ? 0.0 : cfg.train.condition_dropout;
  tc.dsm.weighting = cfg.train.weighting == "unit" ? DsmWeighting::Unit : DsmWeighting::StdSquared;
  tc.steps = cfg.train.steps;
  tc.seed = cfg.seed;
  tc.workers = ctx.workers;
  TrainResult result = train(initial, examples, sde, tc);

  // Held-out draws shared by the zero model, the initial and the trained network.
  Rng eval_rng = Rng::stream(cfg.seed, 1);
  std::vector<TrainingExample> eval_batch;
  for (std::size_t i = 0; i < cfg.train.eval_batch; ++i) eval_batch.push_back(examples[eval_rng.below(examples.size())]);
  DsmOptions eval_opts = tc.dsm;
  const std::vector<DsmDraw> draws = draw_dsm_batch(eval_batch, sde, eval_rng, eval_opts);
  const double zero_loss = dsm_loss_value(draws, [](const DsmDraw& d) { return Vector(Vector::Zero(d.eps.size())); });
  const double initial_loss = dsm_loss(initial, draws, ctx.workers).loss;
  const double final_loss = dsm_loss(result.params, draws, ctx.workers).loss;

  Artifacts a;
  ModelFile model{result.params, sde};
  a.files.push_back(artifact_path(ctx, "train", cfg.seed, "flwp"));
  {
    std::ostringstream os(std::ios::binary);
    write_model(os, model);
    write_file(a.files.back(), os.str());
  }
  std::ostringstream csv;
  write_csv_row(csv, {"step", "loss"});
  for (std::size_t i = 0; i < result.losses.size(); ++i) write_csv_row(csv, {std::to_string(i + 1), num(result.losses[i])});
  a.files.push_back(artifact_path(ctx, "train", cfg.seed, "csv"));
  write_file(a.files.back(), csv.str());

  std::size_t tail = std::min<std::size_t>(100, result.losses.size());
  double tail_mean = 0.0;
  for (std::size_t i = result.losses.size() - tail; i < result.losses.size(); ++i) tail_mean += result.losses[i];
  if (tail) tail_mean /= static_cast<double>(tail);

  json j = summary_header("train", cfg);
  j["model_file"] = a.files.front().filename().string();
  j["param_count"] = result.params.values().size();
  j["conditioning"] = conditioning;
  j["steps"] = result.losses.size();
  j["zero_model_loss"] = zero_loss;
  j["initial_eval_loss"] = initial_loss;
  j["final_eval_loss"] = final_loss;
  j["final_train_loss_mean_last_100"] = tail ? json(tail_mean) : json();
  j["below_zero_model"] = final_loss < zero_loss;
  a.files.push_back(artifact_path(ctx, "train", cfg.seed, "json"));
  write_json(a.files.back(), j);
  a.summary = fmt::format("train: {} steps, held-out loss {:.6g} (zero model {:.6g})", result.losses.size(),
                          final_loss, zero_loss);
  return a;
}

Artifacts cmd_likelihood(const RunConfig& cfg, const RunContext& ctx, const std::optional<std::filesystem::path>& input) {
  const auto score = build_score(cfg);
  Inputs in = load_inputs(cfg, input);
  if (in.dim != 0 && in.dim != score->dim()) {
    throw ConfigError(fmt::format("input has {} columns but the score field has dimension {}", in.dim, score->dim()));
  }
  resolve_conditions(cfg, in);
  const auto factory = field_factory(cfg, score);
  const LikelihoodConfig lik = likelihood_for(cfg, score->dim());

  std::vector<Vector> xs;
  for (const InputRow& r : in.rows) xs.push_back(r.x);
  std::vector<LikelihoodRow> rows = log_likelihood_batch(
      [&](std::size_t i) { return factory(in.rows[i].condition); }, xs, lik, ctx.workers);
  std::vector<RowError> errors = in.errors;
  double sum_logp = 0.0;
  double sum_bpd = 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].sample_id = in.rows[i].index;
    if (rows[i].result) {
      sum_logp += rows[i].result->logp();
      sum_bpd += rows[i].result->bpd();
      ++ok;
    } else {
      errors.push_back({in.rows[i].line, rows[i].error});
    }
  }
  std::sort(errors.begin(), errors.end(), [](const RowError& a, const RowError& b) { return a.line < b.line; });

  Artifacts a;
  std::ostringstream csv;
  write_likelihood_csv(csv, rows);
  a.files.push_back(artifact_path(ctx, "likelihood", cfg.seed, "csv"));
  write_file(a.files.back(), csv.str());
  if (!errors.empty()) {
    a.files.push_back(artifact_path(ctx, "likelihood_errors", cfg.seed, "csv"));
    write_file(a.files.back(), error_manifest(errors));
  }
  json j = summary_header("likelihood", cfg);
  j["input"] = input ? json(input->filename().string()) : json("dataset");
  j["scored"] = ok;
  j["failed"] = errors.size();
  j["mean_logp"] = ok ? json(sum_logp / static_cast<double>(ok)) : json();
  j["mean_bpd"] = ok ? json(sum_bpd / static_cast<double>(ok)) : json();
  a.files.push_back(artifact_path(ctx, "likelihood", cfg.seed, "json"));
  write_json(a.files.back(), j);
  a.summary = fmt::format("likelihood: {} scored, {} failed", ok, errors.size());
  return a;
}

Artifacts cmd_classify(const RunConfig& cfg, const RunContext& ctx) {
  const auto score = build_score(cfg);
  const Dataset data = generate(cfg.dataset);
  if (data.dim != score->dim()) throw ConfigError("dataset dimension does not match the score field");
  eval::ClassificationTask task;
  for (const Sample& s : data.samples) task.samples.push_back({s.x, static_cast<std::size_t>(s.label)});
  for (int k = 0; k < data.num_classes; ++k) task.candidates.push_back(Condition::class_label(static_cast<std::size_t>(k)));
  task.field = field_factory(cfg, score);
  task.likelihood = likelihood_for(cfg, data.dim);
  const eval::ClassificationReport rep = eval::classify(task, ctx.workers);

  std::ostringstream csv;
  std::vector<std::string> header{"sample_id", "true_class", "predicted"};
  for (int k = 0; k < data.num_classes; ++k) header.push_back("logp_" + std::to_string(k));
  write_csv_row(csv, header);
  for (std::size_t i = 0; i < task.samples.size(); ++i) {
    std::vector<std::string> row{std::to_string(i), std::to_string(task.samples[i].true_index),
                                 rep.predictions[i] ? std::to_string(*rep.predictions[i]) : ""};
    for (Index k = 0; k < rep.logp.cols(); ++k) {
      const double v = rep.logp(static_cast<Index>(i), k);
      row.push_back(std::isnan(v) ? "" : num(v));
    }
    write_csv_row(csv, row);
  }
  Artifacts a;
  a.files.push_back(artifact_path(ctx, "classify", cfg.seed, "csv"));
  write_file(a.files.back(), csv.str());
  json j = summary_header("classify", cfg);
  j["num_samples"] = task.samples.size();
  j["num_candidates"] = task.candidates.size();
  j["correct"] = rep.correct;
  j["accuracy"] = rep.accuracy;
  json errs = json::array();
  for (const auto& e : rep.errors) errs.push_back({{"sample", e.sample}, {"candidate", e.candidate}, {"message", e.message}});
  j["pair_errors"] = errs;
  a.files.push_back(artifact_path(ctx, "classify", cfg.seed, "json"));
  write_json(a.files.back(), j);
  a.summary = fmt::format("classify: accuracy {:.4f} ({}/{})", rep.accuracy, rep.correct, task.samples.size());
  return a;
}

Artifacts cmd_rescore(const RunConfig& cfg, const RunContext& ctx) {
  if (cfg.dataset.kind != "gmm") throw ConfigError("rescore builds its n-best lists from a gmm dataset");
  const auto score = build_score(cfg);
  const Dataset data = generate(cfg.dataset);
  if (data.dim != score->dim()) throw ConfigError("dataset dimension does not match the score field");
  const auto K = static_cast<std::size_t>(data.num_classes);
  if (K < 2) throw ConfigError("rescore needs at least two mixture components");
  const std::size_t tokens = std::max<std::size_t>(1, static_cast<std::size_t>(std::bit_width(K - 1)));
  const double var = cfg.dataset.component_var;
  const double d = static_cast<double>(data.dim);

  eval::NBestTask task;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    Rng noise = Rng::stream(cfg.seed ^ 0x6e626573745f6e6fULL, i);
    eval::NBestItem item;
    item.x0 = s.x;
    for (std::size_t k = 0; k < K; ++k) {
      Vector mean(data.dim);
      for (Index c = 0; c < data.dim; ++c) mean[c] = cfg.dataset.means[k][static_cast<std::size_t>(c)];
      const double logn = -0.5 * d * std::log(2.0 * std::numbers::pi * var) - 0.5 * (s.x - mean).squaredNorm() / var;
      eval::Hypothesis h;
      h.condition = Condition::class_label(k);
      h.base_score = logn + cfg.rescore.base_noise * noise.normal();
      h.token_errors = static_cast<std::size_t>(std::popcount(k ^ static_cast<std::size_t>(s.label)));
      h.token_count = tokens;
      item.hypotheses.push_back(std::move(h));
    }
    task.items.push_back(std::move(item));
  }
  task.field = field_factory(cfg, score);
  task.likelihood = likelihood_for(cfg, data.dim);
  const eval::HypothesisScores scores = eval::score_hypotheses(task, ctx.workers);
  const eval::Selection base = eval::select_by_base_score(task);

  std::ostringstream csv;
  write_csv_row(csv, {"lambda", "error_rate", "oracle_best", "oracle_worst", "random", "base_score", "p_value_vs_base"});
  json rows = json::array();
  for (double lambda : cfg.rescore.lambdas) {
    const eval::RescoreReport r = eval::rescore(task, scores, eval::RescoreWeights{lambda});
    const double p = eval::matched_pairs_test(r.strategy.item_errors, base.item_errors);
    write_csv_row(csv, {num(lambda), num(r.strategy.error_rate), num(r.oracle_best.error_rate),
                        num(r.oracle_worst.error_rate), num(r.random.error_rate), num(base.error_rate), num(p)});
    rows.push_back({{"lambda", lambda},
                    {"error_rate", r.strategy.error_rate},
                    {"oracle_best", r.oracle_best.error_rate},
                    {"oracle_worst", r.oracle_worst.error_rate},
                    {"random", r.random.error_rate},
                    {"p_value_vs_base", p}});
  }
  Artifacts a;
  a.files.push_back(artifact_path(ctx, "rescore", cfg.seed, "csv"));
  write_file(a.files.back(), csv.str());
  json j = summary_header("rescore", cfg);
  j["num_items"] = task.items.size();
  j["hypotheses_per_item"] = K;
  j["tokens_per_item"] = tokens;
  j["base_score_error_rate"] = base.error_rate;
  j["rows"] = rows;
  json errs = json::array();
  for (const auto& e : scores.errors) errs.push_back({{"item", e.sample}, {"hypothesis", e.candidate}, {"message", e.message}});
  j["pair_errors"] = errs;
  a.files.push_back(artifact_path(ctx, "rescore", cfg.seed, "json"));
  write_json(a.files.back(), j);
  a.summary = fmt::format("rescore: {} items, base-score error rate {:.4f}", task.items.size(), base.error_rate);
  return a;
}

Artifacts cmd_sweep(const RunConfig& cfg, const RunContext& ctx) {
  const auto score = build_score(cfg);
  bool blur = false;
  const Condition c = parse_condition_cell(cfg.sweep.condition, blur);
  if (blur) throw ConfigError("sweep.condition: blur needs a sample; use null, class:K or embedding:...");
  const FlowField field = field_factory(cfg, score)(c);
  eval::SweepConfig sc;
  sc.num_times = cfg.sweep.num_times;
  sc.num_samples = cfg.sweep.num_samples;
  sc.seed = cfg.seed;
  sc.sampler = cfg.sweep.sampler.to_solver();
  sc.likelihood = likelihood_for(cfg, score->dim());
  sc.workers = ctx.workers;
  const eval::SweepResult r = eval::sweep_time(field, sc);

  std::ostringstream csv;
  write_csv_row(csv, {"t", "mean_bpd", "se_bpd", "count"});
  json rows = json::array();
  for (const auto& row : r.rows) {
    write_csv_row(csv, {num(row.t), num(row.mean_bpd), num(row.se_bpd), std::to_string(row.count)});
    rows.push_back({{"t", row.t}, {"mean_bpd", row.mean_bpd}, {"se_bpd", row.se_bpd}, {"count", row.count}});
  }
  Artifacts a;
  a.files.push_back(artifact_path(ctx, "sweep", cfg.seed, "csv"));
  write_file(a.files.back(), csv.str());
  json j = summary_header("sweep", cfg);
  j["field_mode"] = field.mode().describe();
  j["rows"] = rows;
  j["non_increasing_within_2se"] = eval::bpd_non_increasing(r, 2.0);
  a.files.push_back(artifact_path(ctx, "sweep", cfg.seed, "json"));
  write_json(a.files.back(), j);
  a.summary = fmt::format("sweep: {} times x {} samples, bpd {:.4f} at t=T -> {:.4f} at t_min", r.times.size(),
                          sc.num_samples, r.rows.front().mean_bpd, r.rows.back().mean_bpd);
  return a;
}

Artifacts cmd_reconstruct(const RunConfig& cfg, const RunContext& ctx,
                          const std::optional<std::filesystem::path>& input) {
  const auto score = build_score(cfg);
  Inputs in = load_inputs(cfg, input);
  if (in.dim != 0 && in.dim != score->dim()) {
    throw ConfigError(fmt::format("input has {} columns but the score field has dimension {}", in.dim, score->dim()));
  }
  resolve_conditions(cfg, in);
  const auto factory = field_factory(cfg, score);
  const SolverConfig fwd = cfg.reconstruct.forward.to_solver();
  const SolverConfig rev = cfg.reconstruct.reverse.to_solver();

  const std::size_t n = in.rows.size();
  std::vector<std::optional<Reconstruction>> recs(n);
  std::vector<std::string> failures(n);
  parallel_for(n, ctx.workers, [&](std::size_t i) {
    try {
      recs[i] = reconstruct(factory(in.rows[i].condition), in.rows[i].x, fwd, rev);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  const Index dim = score->dim();
  std::ostringstream csv;
  std::vector<std::string> header{"sample_id", "max_abs_error", "nfe_forward", "nfe_reverse"};
  for (Index k = 0; k < dim; ++k) header.push_back("x" + std::to_string(k));
  for (Index k = 0; k < dim; ++k) header.push_back("r" + std::to_string(k));
  write_csv_row(csv, header);
  std::vector<RowError> errors = in.errors;
  double worst = 0.0;
  double sum = 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!recs[i]) {
      errors.push_back({in.rows[i].line, failures[i]});
      continue;
    }
    const double err = (recs[i]->x0 - in.rows[i].x).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    sum += err;
    ++ok;
    std::vector<std::string> row{std::to_string(in.rows[i].index), num(err), std::to_string(recs[i]->nfe_forward),
                                 std::to_string(recs[i]->nfe_reverse)};
    for (Index k = 0; k < dim; ++k) row.push_back(num(in.rows[i].x[k]));
    for (Index k = 0; k < dim; ++k) row.push_back(num(recs[i]->x0[k]));
    write_csv_row(csv, row);
  }
  std::sort(errors.begin(), errors.end(), [](const RowError& a, const RowError& b) { return a.line < b.line; });

  Artifacts a;
  a.files.push_back(artifact_path(ctx, "reconstruct", cfg.seed, "csv"));
  write_file(a.files.back(), csv.str());
  if (!errors.empty()) {
    a.files.push_back(artifact_path(ctx, "reconstruct_errors", cfg.seed, "csv"));
    write_file(a.files.back(), error_manifest(errors));
  }
  if (cfg.reconstruct.trajectory && n > 0) {
    IntegrateOptions opts;
    opts.record_steps = true;
    const FlowField field = factory(in.rows.front().condition);
    const auto fwd_run = integrate(field, in.rows.front().x, fwd.t_min, field.terminal_time(), fwd, opts);
    std::ostringstream os;
    write_trajectory_jsonl(os, fwd_run.trajectory);
    a.files.push_back(artifact_path(ctx, "reconstruct_trajectory", cfg.seed, "jsonl"));
    write_file(a.files.back(), os.str());
  }
  json j = summary_header("reconstruct", cfg);
  j["reconstructed"] = ok;
  j["failed"] = errors.size();
  j["max_abs_error"] = ok ? json(worst) : json();
  j["mean_max_abs_error"] = ok ? json(sum / static_cast<double>(ok)) : json();
  a.files.push_back(artifact_path(ctx, "reconstruct", cfg.seed, "json"));
  write_json(a.files.back(), j);
  a.summary = fmt::format("reconstruct: {} samples, worst |x0' - x0|_inf = {:.3g}", ok, worst);
  return a;
}

Artifacts cmd_adapt(const RunConfig& cfg, const RunContext& ctx) {
  if (cfg.dataset.kind != "two_domain_grids") throw ConfigError("adapt needs dataset.kind = two_domain_grids");
  const auto score = build_score(cfg);
  const Index rows = cfg.dataset.grid_rows;
  const Index cols = cfg.dataset.grid_cols;
  if (rows * cols != score->dim()) throw ConfigError("grid size does not match the score field");

  DatasetSection clean_spec = cfg.dataset;
  clean_spec.grid_domain = "smooth";
  const Dataset clean = generate(clean_spec);
  Vector mean = Vector::Zero(rows * cols);
  for (const Sample& s : clean.samples) mean += s.x;
  if (!clean.samples.empty()) mean /= static_cast<double>(clean.samples.size());
  const Matrix clean_mean = unflatten_grid(mean, rows, cols);

  DatasetSection shifted_spec = cfg.dataset;
  shifted_spec.grid_domain = "striped";
  shifted_spec.num_samples = cfg.adapt.num_samples;
  shifted_spec.seed = cfg.dataset.seed + 1;
  const Dataset shifted = generate(shifted_spec);

  eval::AdaptConfig ac;
  ac.kernel = {cfg.adapt.kernel_size, cfg.adapt.kernel_sigma};
  ac.forward = cfg.adapt.forward.to_solver();
  ac.reverse = cfg.adapt.reverse.to_solver();
  ac.likelihood = likelihood_for(cfg, rows * cols);
  const auto factory = field_factory(cfg, score);

  const std::size_t n = shifted.samples.size();
  std::vector<std::optional<eval::AdaptResult>> results(n);
  std::vector<std::string> failures(n);
  parallel_for(n, ctx.workers, [&](std::size_t i) {
    try {
      results[i] = eval::blur_adapt(unflatten_grid(shifted.samples[i].x, rows, cols), factory, clean_mean, ac, i);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  std::ostringstream csv;
  write_csv_row(csv, {"sample_id", "input_bpd", "output_bpd", "input_similarity", "output_similarity"});
  double in_bpd = 0.0;
  double out_bpd = 0.0;
  double in_sim = 0.0;
  double out_sim = 0.0;
  std::size_t ok = 0;
  std::size_t improved = 0;
  json errs = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i]) {
      errs.push_back({{"sample", i}, {"message", failures[i]}});
      continue;
    }
    const auto& r = *results[i];
    write_csv_row(csv, {std::to_string(i), num(r.input.bpd()), num(r.output.bpd()), num(r.input_similarity),
                        num(r.output_similarity)});
    in_bpd += r.input.bpd();
    out_bpd += r.output.bpd();
    in_sim += r.input_similarity;
    out_sim += r.output_similarity;
    if (r.output.bpd() < r.input.bpd()) ++improved;
    ++ok;
  }
  const double denom = ok ? static_cast<double>(ok) : 1.0;
  Artifacts a;
  a.files.push_back(artifact_path(ctx, "adapt", cfg.seed, "csv"));
  write_file(a.files.back(), csv.str());
  json j = summary_header("adapt", cfg);
  j["adapted"] = ok;
  j["improved_bpd"] = improved;
  j["mean_input_bpd"] = ok ? json(in_bpd / denom) : json();
  j["mean_output_bpd"] = ok ? json(out_bpd / denom) : json();
  j["mean_input_similarity"] = ok ? json(in_sim / denom) : json();
  j["mean_output_similarity"] = ok ? json(out_sim / denom) : json();
  j["errors"] = errs;
  a.files.push_back(artifact_path(ctx, "adapt", cfg.seed, "json"));
  write_json(a.files.back(), j);
  a.summary = fmt::format("adapt: {} grids, mean bpd {:.4f} -> {:.4f}", ok, in_bpd / denom, out_bpd / denom);
  return a;
}

}  // namespace flowlik::cli

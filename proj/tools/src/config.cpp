#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "flowlik/errors.hpp"

namespace flowlik::cli {

using nlohmann::json;

SolverConfig SolverSection::to_solver() const {
  if (method == "euler") return SolverConfig::euler(steps, t_min);
  SolverConfig s = SolverConfig::rk45(rtol, atol, t_min);
  std::get<Rk45>(s.method).max_steps = max_steps;
  return s;
}

SdeSpec RunConfig::sde_spec() const {
  const SdeVariant v = parse_sde_variant(sde);
  // MRVP gets its mean from the condition when a field is assembled.
  return SdeSpec{v, schedule, std::nullopt};
}

LikelihoodConfig RunConfig::likelihood() const {
  LikelihoodConfig l;
  if (probes.method == "hutchinson") {
    TraceProbeConfig p;
    p.distribution = probes.distribution == "gaussian" ? ProbeDistribution::Gaussian : ProbeDistribution::Rademacher;
    p.num_probes = probes.num_probes;
    p.seed = seed;
    l.divergence = p;
  }
  l.solver = solver.to_solver();
  l.dequantization_bins = probes.dequantization_bins;
  return l;
}

namespace {

/// Walks one JSON object, recording unknown keys and type mismatches.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {
    if (!obj_.is_object()) {
      errors_.push_back(where() + ": expected an object");
      ok_ = false;
    }
  }

  ~Reader() {
    if (!ok_) return;
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) errors_.push_back(where(key) + ": unknown key");
    }
  }

  template <class T>
  void get(const std::string& key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw std::invalid_argument("boolean");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v->is_number()) throw std::invalid_argument("number");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v->is_number_unsigned()) throw std::invalid_argument("non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw std::invalid_argument("integer");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw std::invalid_argument("string");
      }
      out = v->get<T>();
    } catch (const std::exception& e) {
      errors_.push_back(where(key) + ": expected " + describe<T>());
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    const json* v = find(key);
    if (!v) return;
    if (v->is_null()) {
      out.reset();
      return;
    }
    T value{};
    get(key, value);
    out = value;
  }

  /// Nested object; fn receives a Reader for it.
  template <class Fn>
  void section(const std::string& key, Fn fn) {
    const json* v = find(key);
    if (!v) return;
    Reader sub(*v, where(key), errors_);
    if (sub.ok_) fn(sub);
  }

  void error(const std::string& key, const std::string& message) { errors_.push_back(where(key) + ": " + message); }

 private:
  const json* find(const std::string& key) {
    seen_.insert(key);
    if (!ok_) return nullptr;
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string where() const { return path_.empty() ? "config" : path_; }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  static std::string describe() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_same_v<T, double>) return "a number";
    else if constexpr (std::is_unsigned_v<T>) return "a non-negative integer";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "an array of the right element type";
  }

  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
  bool ok_ = true;
};

void read_solver(Reader& r, SolverSection& s) {
  r.get("method", s.method);
  r.get("rtol", s.rtol);
  r.get("atol", s.atol);
  r.get("max_steps", s.max_steps);
  r.get("steps", s.steps);
  r.get("t_min", s.t_min);
}

json solver_json(const SolverSection& s) {
  return {{"method", s.method}, {"rtol", s.rtol},   {"atol", s.atol},
          {"max_steps", s.max_steps}, {"steps", s.steps}, {"t_min", s.t_min}};
}

void check_solver(const std::string& path, const SolverSection& s, double T, std::vector<std::string>& errors) {
  if (s.method != "rk45" && s.method != "euler") errors.push_back(path + ".method: expected rk45 or euler");
  if (!(s.rtol > 0.0)) errors.push_back(path + ".rtol: must be > 0");
  if (!(s.atol > 0.0)) errors.push_back(path + ".atol: must be > 0");
  if (s.max_steps == 0) errors.push_back(path + ".max_steps: must be >= 1");
  if (s.steps == 0) errors.push_back(path + ".steps: must be >= 1");
  if (!(s.t_min > 0.0 && s.t_min < T)) errors.push_back(path + ".t_min: must lie in (0, T)");
}

template <class T>
bool one_of(const T& v, std::initializer_list<T> options) {
  for (const T& o : options)
    if (v == o) return true;
  return false;
}

void throw_if_any(const std::vector<std::string>& errors) {
  if (errors.empty()) return;
  std::string msg = "invalid config (" + std::to_string(errors.size()) + " problem" +
                    (errors.size() == 1 ? "" : "s") + "):";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

}  // namespace

RunConfig parse_config(const json& j) {
  RunConfig c;
  std::vector<std::string> errors;
  {
    Reader r(j, "", errors);
    r.section("schedule", [&](Reader& s) {
      std::string kind(to_string(c.schedule.kind));
      s.get("kind", kind);
      try {
        c.schedule.kind = parse_schedule_kind(kind);
      } catch (const Error&) {
        s.error("kind", "expected linear or sublinear");
      }
      s.get("beta0", c.schedule.beta0);
      s.get("betaT", c.schedule.beta_T);
      s.get("T", c.schedule.terminal_time);
    });
    r.get("sde", c.sde);
    r.section("score", [&](Reader& s) {
      s.get("kind", c.score.kind);
      s.get("model", c.score.model);
      s.get("hidden", c.score.hidden);
      s.get("activation", c.score.activation);
      s.get("class_embed_dim", c.score.class_embed_dim);
    });
    r.section("field", [&](Reader& s) {
      s.get("mode", c.field.mode);
      s.get("omega", c.field.omega);
    });
    r.section("solver", [&](Reader& s) { read_solver(s, c.solver); });
    r.section("probes", [&](Reader& s) {
      s.get("method", c.probes.method);
      s.get("distribution", c.probes.distribution);
      s.get("num_probes", c.probes.num_probes);
      s.get("dequantization_bins", c.probes.dequantization_bins);
    });
    r.get("seed", c.seed);
    r.section("dataset", [&](Reader& s) {
      auto& d = c.dataset;
      s.get("kind", d.kind);
      s.get("num_samples", d.num_samples);
      s.get("seed", d.seed);
      s.get("conditioning", d.conditioning);
      s.get("mean", d.mean);
      s.get("var", d.var);
      s.get("weights", d.weights);
      s.get("means", d.means);
      s.get("component_var", d.component_var);
      s.get("grid_rows", d.grid_rows);
      s.get("grid_cols", d.grid_cols);
      s.get("grid_domain", d.grid_domain);
      s.get("smooth_amplitude", d.smooth_amplitude);
      s.get("stripe_amplitude", d.stripe_amplitude);
      s.get("grid_noise", d.grid_noise);
      s.get("checker_cells", d.checker_cells);
      s.get("checker_extent", d.checker_extent);
    });
    r.section("train", [&](Reader& s) {
      auto& t = c.train;
      s.get("steps", t.steps);
      s.get("batch_size", t.batch_size);
      s.get("learning_rate", t.learning_rate);
      s.get("momentum", t.momentum);
      s.get("clip_norm", t.clip_norm);
      s.get("condition_dropout", t.condition_dropout);
      s.get("weighting", t.weighting);
      s.get("eval_batch", t.eval_batch);
    });
    r.section("rescore", [&](Reader& s) {
      s.get("lambdas", c.rescore.lambdas);
      s.get("base_noise", c.rescore.base_noise);
    });
    r.section("sweep", [&](Reader& s) {
      s.get("num_times", c.sweep.num_times);
      s.get("num_samples", c.sweep.num_samples);
      s.get("condition", c.sweep.condition);
      s.section("sampler", [&](Reader& q) { read_solver(q, c.sweep.sampler); });
    });
    r.section("reconstruct", [&](Reader& s) {
      s.section("forward", [&](Reader& q) { read_solver(q, c.reconstruct.forward); });
      s.section("reverse", [&](Reader& q) { read_solver(q, c.reconstruct.reverse); });
      s.get("trajectory", c.reconstruct.trajectory);
    });
    r.section("adapt", [&](Reader& s) {
      s.get("kernel_size", c.adapt.kernel_size);
      s.get("kernel_sigma", c.adapt.kernel_sigma);
      s.section("forward", [&](Reader& q) { read_solver(q, c.adapt.forward); });
      s.section("reverse", [&](Reader& q) { read_solver(q, c.adapt.reverse); });
      s.get("num_samples", c.adapt.num_samples);
    });
    r.get("output_dir", c.output_dir);
  }
  // Fields that failed to read keep their defaults, so range checks still apply to the rest.
  const std::vector<std::string> more = violations(c);
  errors.insert(errors.end(), more.begin(), more.end());
  throw_if_any(errors);
  return c;
}

json read_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

RunConfig load_config(const std::string& path) { return parse_config(read_config_json(path)); }

json echo(const RunConfig& c) {
  json j;
  j["schedule"] = {{"kind", std::string(to_string(c.schedule.kind))},
                   {"beta0", c.schedule.beta0},
                   {"betaT", c.schedule.beta_T},
                   {"T", c.schedule.terminal_time}};
  j["sde"] = c.sde;
  j["score"] = {{"kind", c.score.kind},
                {"model", c.score.model},
                {"hidden", c.score.hidden},
                {"activation", c.score.activation},
                {"class_embed_dim", c.score.class_embed_dim}};
  j["field"] = {{"mode", c.field.mode}, {"omega", c.field.omega}};
  j["solver"] = solver_json(c.solver);
  j["probes"] = {{"method", c.probes.method},
                 {"distribution", c.probes.distribution},
                 {"num_probes", c.probes.num_probes},
                 {"dequantization_bins", c.probes.dequantization_bins ? json(*c.probes.dequantization_bins) : json()}};
  j["seed"] = c.seed;
  const auto& d = c.dataset;
  j["dataset"] = {{"kind", d.kind},
                  {"num_samples", d.num_samples},
                  {"seed", d.seed},
                  {"conditioning", d.conditioning},
                  {"mean", d.mean},
                  {"var", d.var},
                  {"weights", d.weights},
                  {"means", d.means},
                  {"component_var", d.component_var},
                  {"grid_rows", d.grid_rows},
                  {"grid_cols", d.grid_cols},
                  {"grid_domain", d.grid_domain},
                  {"smooth_amplitude", d.smooth_amplitude},
                  {"stripe_amplitude", d.stripe_amplitude},
                  {"grid_noise", d.grid_noise},
                  {"checker_cells", d.checker_cells},
                  {"checker_extent", d.checker_extent}};
  const auto& t = c.train;
  j["train"] = {{"steps", t.steps},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"momentum", t.momentum},
                {"clip_norm", t.clip_norm},
                {"condition_dropout", t.condition_dropout},
                {"weighting", t.weighting},
                {"eval_batch", t.eval_batch}};
  j["rescore"] = {{"lambdas", c.rescore.lambdas}, {"base_noise", c.rescore.base_noise}};
  j["sweep"] = {{"num_times", c.sweep.num_times},
                {"num_samples", c.sweep.num_samples},
                {"condition", c.sweep.condition},
                {"sampler", solver_json(c.sweep.sampler)}};
  j["reconstruct"] = {{"forward", solver_json(c.reconstruct.forward)},
                      {"reverse", solver_json(c.reconstruct.reverse)},
                      {"trajectory", c.reconstruct.trajectory}};
  j["adapt"] = {{"kernel_size", c.adapt.kernel_size},
                {"kernel_sigma", c.adapt.kernel_sigma},
                {"forward", solver_json(c.adapt.forward)},
                {"reverse", solver_json(c.adapt.reverse)},
                {"num_samples", c.adapt.num_samples}};
  return j;
}

std::vector<std::string> violations(const RunConfig& c) {
  std::vector<std::string> errors;
  try {
    c.schedule.validate();
  } catch (const Error& e) {
    errors.push_back(std::string("schedule: ") + e.what());
  }
  const double T = c.schedule.terminal_time > 0.0 ? c.schedule.terminal_time : 1.0;
  if (!one_of<std::string>(c.sde, {"vp", "mrvp", "ddim_sigma"})) errors.push_back("sde: expected vp, mrvp or ddim_sigma");
  if (!one_of<std::string>(c.score.kind, {"analytic", "mlp"})) errors.push_back("score.kind: expected analytic or mlp");
  if (c.score.hidden.empty()) errors.push_back("score.hidden: need at least one hidden layer");
  for (int h : c.score.hidden)
    if (h < 1) errors.push_back("score.hidden: widths must be >= 1");
  if (!one_of<std::string>(c.score.activation, {"silu", "tanh"})) errors.push_back("score.activation: expected silu or tanh");
  if (c.score.class_embed_dim < 1) errors.push_back("score.class_embed_dim: must be >= 1");
  if (!one_of<std::string>(c.field.mode, {"conditional", "guided", "unconditional"})) {
    errors.push_back("field.mode: expected conditional, guided or unconditional");
  }
  if (!(std::isfinite(c.field.omega) && c.field.omega >= 0.0)) errors.push_back("field.omega: must be finite and >= 0");
  check_solver("solver", c.solver, T, errors);
  if (!one_of<std::string>(c.probes.method, {"exact", "hutchinson"})) errors.push_back("probes.method: expected exact or hutchinson");
  if (!one_of<std::string>(c.probes.distribution, {"rademacher", "gaussian"})) {
    errors.push_back("probes.distribution: expected rademacher or gaussian");
  }
  if (c.probes.num_probes == 0) errors.push_back("probes.num_probes: must be >= 1");
  if (c.probes.dequantization_bins && !(*c.probes.dequantization_bins >= 1.0)) {
    errors.push_back("probes.dequantization_bins: must be >= 1");
  }

  const auto& d = c.dataset;
  if (!one_of<std::string>(d.kind, {"gaussian", "gmm", "two_domain_grids", "checkerboard"})) {
    errors.push_back("dataset.kind: expected gaussian, gmm, two_domain_grids or checkerboard");
  }
  if (!one_of<std::string>(d.conditioning, {"auto", "label", "blur", "none"})) {
    errors.push_back("dataset.conditioning: expected auto, label, blur or none");
  }
  if (d.kind == "gaussian") {
    if (d.mean.empty()) errors.push_back("dataset.mean: must not be empty");
    if (d.mean.size() != d.var.size()) errors.push_back("dataset.var: must match dataset.mean in length");
    for (double v : d.var)
      if (!(v > 0.0)) errors.push_back("dataset.var: entries must be > 0");
  }
  if (d.kind == "gmm") {
    if (d.weights.empty()) errors.push_back("dataset.weights: must not be empty");
    if (d.weights.size() != d.means.size()) errors.push_back("dataset.means: need one mean per weight");
    double sum = 0.0;
    for (double w : d.weights) {
      if (!(w > 0.0)) errors.push_back("dataset.weights: entries must be > 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) errors.push_back("dataset.weights: must sum to 1");
    for (const auto& m : d.means)
      if (m.empty() || m.size() != d.means.front().size()) errors.push_back("dataset.means: rows must share one nonzero length");
    if (!(d.component_var > 0.0)) errors.push_back("dataset.component_var: must be > 0");
  }
  if (d.kind == "two_domain_grids") {
    if (d.grid_rows < 3 || d.grid_cols < 3) errors.push_back("dataset.grid_rows/grid_cols: must be >= 3");
    if (!one_of<std::string>(d.grid_domain, {"both", "smooth", "striped"})) {
      errors.push_back("dataset.grid_domain: expected both, smooth or striped");
    }
    if (!(d.grid_noise >= 0.0)) errors.push_back("dataset.grid_noise: must be >= 0");
  }
  if (d.kind == "checkerboard") {
    if (d.checker_cells < 2) errors.push_back("dataset.checker_cells: must be >= 2");
    if (!(d.checker_extent > 0.0)) errors.push_back("dataset.checker_extent: must be > 0");
  }

  const auto& t = c.train;
  if (t.batch_size == 0) errors.push_back("train.batch_size: must be >= 1");
  if (!(t.learning_rate > 0.0)) errors.push_back("train.learning_rate: must be > 0");
  if (!(t.momentum >= 0.0 && t.momentum < 1.0)) errors.push_back("train.momentum: must lie in [0, 1)");
  if (!(t.clip_norm > 0.0)) errors.push_back("train.clip_norm: must be > 0");
  if (!(t.condition_dropout >= 0.0 && t.condition_dropout <= 1.0)) {
    errors.push_back("train.condition_dropout: must lie in [0, 1]");
  }
  if (!one_of<std::string>(t.weighting, {"std_squared", "unit"})) errors.push_back("train.weighting: expected std_squared or unit");
  if (t.eval_batch == 0) errors.push_back("train.eval_batch: must be >= 1");

  if (c.rescore.lambdas.empty()) errors.push_back("rescore.lambdas: must not be empty");
  for (double l : c.rescore.lambdas)
    if (!(l >= 0.0 && l <= 1.0)) errors.push_back("rescore.lambdas: entries must lie in [0, 1]");
  if (!(c.rescore.base_noise >= 0.0)) errors.push_back("rescore.base_noise: must be >= 0");

  if (c.sweep.num_times < 2) errors.push_back("sweep.num_times: must be >= 2");
  if (c.sweep.num_samples == 0) errors.push_back("sweep.num_samples: must be >= 1");
  check_solver("sweep.sampler", c.sweep.sampler, T, errors);
  check_solver("reconstruct.forward", c.reconstruct.forward, T, errors);
  check_solver("reconstruct.reverse", c.reconstruct.reverse, T, errors);
  if (c.adapt.kernel_size < 1 || c.adapt.kernel_size % 2 == 0) errors.push_back("adapt.kernel_size: must be odd and >= 1");
  if (!(c.adapt.kernel_sigma > 0.0)) errors.push_back("adapt.kernel_sigma: must be > 0");
  check_solver("adapt.forward", c.adapt.forward, T, errors);
  check_solver("adapt.reverse", c.adapt.reverse, T, errors);
  if (c.adapt.num_samples == 0) errors.push_back("adapt.num_samples: must be >= 1");
  return errors;
}

void validate(const RunConfig& c) { throw_if_any(violations(c)); }

}  // namespace flowlik::cli

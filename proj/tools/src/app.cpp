#include "app.hpp"

#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "flowlik/errors.hpp"
#include "flowlik/integrate.hpp"

namespace flowlik::cli {

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::optional<std::string> output_dir;
  std::optional<std::string> timestamp;
  std::optional<std::string> model;
  std::optional<std::string> input;
  std::optional<std::string> mode;
  std::optional<double> omega;
};

/// Defaults < config file < flags.
RunConfig resolve(const Options& o) {
  nlohmann::json j = o.config_path.empty() ? nlohmann::json::object() : read_config_json(o.config_path);
  if (!j.is_object()) return parse_config(j);  // reports the problem
  auto section = [&](const char* key) -> nlohmann::json& {
    nlohmann::json& s = j[key];
    if (s.is_null()) s = nlohmann::json::object();
    if (!s.is_object()) throw ConfigError(std::string(key) + ": expected an object");
    return s;
  };
  if (o.seed) j["seed"] = *o.seed;
  if (o.output_dir) j["output_dir"] = *o.output_dir;
  if (o.model) {
    section("score")["kind"] = "mlp";
    section("score")["model"] = *o.model;
  }
  if (o.mode) section("field")["mode"] = *o.mode;
  if (o.omega) section("field")["omega"] = *o.omega;
  return parse_config(j);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"flowlik: exact likelihoods for conditional score-based diffusion models"};
  app.require_subcommand(1);
  Options o;
  const std::vector<std::string> names{"config", "dataset", "train",       "likelihood", "classify",
                                       "rescore", "sweep",  "reconstruct", "adapt"};
  const std::vector<std::string> help{
      "print the resolved configuration",
      "write the configured dataset as an input CSV",
      "train a score network with denoising score matching",
      "log-likelihood and BPD of samples",
      "likelihood-argmax classification over class conditions",
      "n-best rescoring with a likelihood / base-score mix",
      "BPD of sampled trajectories from t = T to t_min",
      "forward then reverse probability-flow round trip",
      "blur-conditioned domain adaptation of striped grids",
  };
  for (std::size_t i = 0; i < names.size(); ++i) {
    CLI::App* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("-c,--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "run seed (overrides the config)");
    sub->add_option("--workers", o.workers, "parallel workers; results do not depend on it")
        ->check(CLI::PositiveNumber);
    sub->add_option("--output-dir", o.output_dir, "directory for result files");
    sub->add_option("--timestamp", o.timestamp, "timestamp used in output names (default: current UTC time)");
    sub->add_option("--model", o.model, "params file; implies score.kind = mlp");
    sub->add_option("--mode", o.mode, "field mode: conditional, guided or unconditional");
    sub->add_option("--omega", o.omega, "guidance scale for guided mode");
    if (names[i] == "likelihood" || names[i] == "reconstruct") {
      sub->add_option("-i,--input", o.input, "CSV of samples: x0..x{d-1}[,condition]")->check(CLI::ExistingFile);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->get_subcommands().empty() && sub->count("--help")) return kExitOk;
  const std::string cmd = sub->get_name();

  try {
    const RunConfig cfg = resolve(o);
    RunContext ctx;
    ctx.output_dir = cfg.output_dir;
    ctx.timestamp = o.timestamp ? *o.timestamp : utc_timestamp();
    ctx.workers = o.workers;
    const std::optional<std::filesystem::path> input =
        o.input ? std::optional<std::filesystem::path>(*o.input) : std::nullopt;

    Artifacts a;
    if (cmd == "config") {
      out << echo(cfg).dump(2) << "\n";
      return kExitOk;
    } else if (cmd == "dataset") {
      a = cmd_dataset(cfg, ctx);
    } else if (cmd == "train") {
      a = cmd_train(cfg, ctx);
    } else if (cmd == "likelihood") {
      a = cmd_likelihood(cfg, ctx, input);
    } else if (cmd == "classify") {
      a = cmd_classify(cfg, ctx);
    } else if (cmd == "rescore") {
      a = cmd_rescore(cfg, ctx);
    } else if (cmd == "sweep") {
      a = cmd_sweep(cfg, ctx);
    } else if (cmd == "reconstruct") {
      a = cmd_reconstruct(cfg, ctx, input);
    } else if (cmd == "adapt") {
      a = cmd_adapt(cfg, ctx);
    }
    out << a.summary << "\n";
    for (const auto& f : a.files) out << "  wrote " << f.string() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ContractError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure at t = " << e.time() << ": " << e.what() << "\n";
    return kExitNumerical;
  } catch (const TrainingError& e) {
    err << "training failed at step " << e.step() << ": " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IntegrationError& e) {
    err << "integration failed: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

}  // namespace flowlik::cli

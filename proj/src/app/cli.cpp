#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "slidepp/app/commands.hpp"
#include "slidepp/error.hpp"

namespace slidepp::app {

namespace {

struct CommandInfo {
  const char* name;
  const char* help;
  void (*run)(const RunContext&);
};

const std::vector<CommandInfo>& commands() {
  static const std::vector<CommandInfo> list = {
      {"preprocess", "Filter and recode a covariate directory", cmd_preprocess},
      {"importance", "Rank covariates by random-forest Gini importance", cmd_importance},
      {"fit", "Fit a point-process model to a crown pattern", cmd_fit},
      {"predict", "Predict an intensity map and its in-range mask", cmd_predict},
      {"simulate", "Sample point patterns from an intensity", cmd_simulate},
      {"bootstrap", "Semiparametric bootstrap sd and percentile maps", cmd_bootstrap},
      {"validate", "Rank fitted models by log-likelihood on a validation area", cmd_validate},
      {"diagnose", "Raw residuals, residual summary, lurking-variable and QQ plots", cmd_diagnose},
      {"workflow", "Train, validate and test on three valleys", cmd_workflow},
      {"synth", "Generate synthetic valleys with a known intensity", cmd_synth},
  };
  return list;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& c : commands()) v.push_back(c.name);
    return v;
  }();
  return names;
}

void run_command(const RunContext& ctx) {
  for (const auto& c : commands()) {
    if (ctx.command == c.name) return c.run(ctx);
  }
  throw ConfigError("unknown command '" + ctx.command + "'");
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"slidepp: landslide crown point-process modelling"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = "slidepp-out";
  app.add_option("-c,--config", config_path, "Key-value configuration file (a manifest works too)");
  app.add_option("--set", overrides, "Override a configuration key: KEY=VALUE (repeatable)")->allow_extra_args(false);
  app.add_option("--seed", seed, "Random seed (default: config 'seed', else 1)");
  app.add_option("--threads", threads, "Worker threads (default: config 'threads', else 1)");
  app.add_option("-o,--out", out, "Output directory")->capture_default_str();
  for (const auto& c : commands()) app.add_subcommand(c.name, c.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunContext ctx;
  ctx.command = app.get_subcommands().front()->get_name();
  try {
    if (!config_path.empty()) ctx.config = Config::load(config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + o + "'");
      ctx.config.set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (ctx.config.has("command")) {
      const auto recorded = ctx.config.get_string("command");
      if (recorded != ctx.command) {
        throw ConfigError("configuration was written for '" + recorded + "', not '" + ctx.command + "'");
      }
    }
    for (const auto& k : ctx.config.keys_with_prefix("version.")) ctx.config.consume(k);
    ctx.seed = seed ? *seed : ctx.config.get_u64("seed", 1);
    ctx.threads = threads ? *threads : ctx.config.get_int("threads", 1);
    if (ctx.threads < 1) throw ConfigError("threads must be at least 1");
    ctx.out = std::filesystem::absolute(out);
    run_command(ctx);
  } catch (const ConfigError& e) {
    std::cerr << "slidepp " << ctx.command << ": configuration error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "slidepp " << ctx.command << ": numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "slidepp " << ctx.command << ": data error: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "slidepp " << ctx.command << ": data error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "slidepp " << ctx.command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace slidepp::app

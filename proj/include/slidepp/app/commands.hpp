#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slidepp/app/config.hpp"

namespace slidepp::app {

struct RunContext {
  std::string command;
  Config config;
  std::uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path out;
};

// Each command writes its artifacts plus manifest.txt under ctx.out.
void cmd_preprocess(const RunContext& ctx);
void cmd_importance(const RunContext& ctx);
void cmd_fit(const RunContext& ctx);
void cmd_predict(const RunContext& ctx);
void cmd_simulate(const RunContext& ctx);
void cmd_bootstrap(const RunContext& ctx);
void cmd_validate(const RunContext& ctx);
void cmd_diagnose(const RunContext& ctx);
void cmd_workflow(const RunContext& ctx);
void cmd_synth(const RunContext& ctx);

const std::vector<std::string>& command_names();
void run_command(const RunContext& ctx);

// Parses arguments, runs the command and maps failures to exit codes:
// 0 ok, 2 configuration, 3 numerical, 4 data, 1 anything else.
int run_cli(int argc, const char* const* argv);

}  // namespace slidepp::app

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "slidepp/app/commands.hpp"
#include "slidepp/ppm.hpp"
#include "slidepp/raster.hpp"

namespace slidepp::app {

// Output directory bookkeeping: every file goes through file(), which creates
// parent directories and lists the artifact in the manifest.
class Outputs {
 public:
  explicit Outputs(const RunContext& ctx);

  std::filesystem::path file(const std::string& relative);
  void text(const std::string& relative, const std::string& content);
  void grid(const std::string& relative, const RasterGrid& grid);

  // Writes manifest.txt and warns about configuration keys nobody read.
  void finish();
  // Manifest for an aborted run, naming the stage that failed.
  void abort(const std::string& stage);

  const std::filesystem::path& dir() const { return ctx_.out; }

 private:
  Manifest manifest() const;

  const RunContext& ctx_;
  std::vector<std::string> artifacts_;
};

// The named grids of a stack (all of them when `names` is empty). Throws
// ConfigError naming any that are missing.
CovariateStack substack(const CovariateStack& stack, const std::vector<std::string>& names,
                        const std::string& what);

// Reads a point CSV and keeps the points inside `window`, warning about the
// rest.
PointPattern load_pattern(const std::filesystem::path& path, const Window& window);

// Independent seed for a named sub-task of a run.
std::uint64_t sub_seed(std::uint64_t seed, const std::string& name);

std::string fixed(double v, int digits);

// Ranking text for a selection result: one row per model, best first.
std::string selection_table(const SelectionResult& sel, double cell_area);

}  // namespace slidepp::app

#include "common.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "slidepp/error.hpp"
#include "slidepp/log.hpp"
#include "slidepp/rng.hpp"

namespace slidepp::app {

Outputs::Outputs(const RunContext& ctx) : ctx_(ctx) {
  std::error_code ec;
  std::filesystem::create_directories(ctx.out, ec);
  if (ec) throw DataError("cannot create output directory " + ctx.out.string() + ": " + ec.message());
}

std::filesystem::path Outputs::file(const std::string& relative) {
  const auto p = ctx_.out / relative;
  std::filesystem::create_directories(p.parent_path());
  if (std::find(artifacts_.begin(), artifacts_.end(), relative) == artifacts_.end()) artifacts_.push_back(relative);
  return p;
}

void Outputs::text(const std::string& relative, const std::string& content) {
  const auto p = file(relative);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw DataError("cannot write " + p.string());
}

void Outputs::grid(const std::string& relative, const RasterGrid& grid) { write_ascii_grid(grid, file(relative)); }

Manifest Outputs::manifest() const {
  Manifest m;
  m.command = ctx_.command;
  m.seed = ctx_.seed;
  m.threads = ctx_.threads;
  m.parameters = ctx_.config.resolved();
  for (const char* k : {"command", "seed", "threads"}) m.parameters.erase(k);
  m.artifacts = artifacts_;
  return m;
}

void Outputs::finish() {
  for (const auto& key : ctx_.config.unused()) warn("configuration key '" + key + "' was not used");
  manifest().write(ctx_.out / "manifest.txt");
}

void Outputs::abort(const std::string& stage) {
  Manifest m = manifest();
  m.failed_stage = stage;
  m.write(ctx_.out / "manifest.txt");
}

CovariateStack substack(const CovariateStack& stack, const std::vector<std::string>& names, const std::string& what) {
  if (names.empty()) return stack;
  CovariateStack out(stack.geometry());
  for (const auto& n : names) {
    if (!stack.contains(n)) throw ConfigError(what + " needs covariate '" + n + "', which is not in the stack");
    if (!out.contains(n)) out.add(n, stack.get(n));
  }
  return out;
}

PointPattern load_pattern(const std::filesystem::path& path, const Window& window) {
  const auto points = read_points_csv(path);
  std::vector<Point> rejected;
  PointPattern p = PointPattern::filtered(window, points, &rejected);
  return p;
}

std::uint64_t sub_seed(std::uint64_t seed, const std::string& name) { return splitmix64(seed ^ hash_name(name)); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace slidepp::app

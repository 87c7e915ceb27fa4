#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slidepp/ppm.hpp"
#include "slidepp/raster.hpp"
#include "slidepp/rng.hpp"

namespace slidepp::synth {

// A covariate drawn as a standardised sum of random Gaussian bumps, then
// mapped to mean + amplitude * sd * field. With `classes` > 0 the field is
// cut at its quantiles into integer codes 1..classes instead.
struct FieldSpec {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
  int classes = 0;
  int bumps = 24;
  double bump_scale = 0.15;  // bump sd as a fraction of the window's longer side
  double amplitude = 1.0;
};

enum class EffectKind { linear, quadratic, factor };

// Additive contribution to the true log-intensity. Linear and quadratic
// effects act on z = (x - centre) / scale; factor effects look up
// level_effects[code - 1].
struct EffectSpec {
  std::string covariate;
  EffectKind kind = EffectKind::linear;
  double coef = 0.0;
  double centre = 0.0;
  double scale = 1.0;
  std::vector<double> level_effects;
};

struct ValleySpec {
  std::size_t rows = 100;
  std::size_t cols = 100;
  double cell_size = 5.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::vector<FieldSpec> fields;
  std::vector<EffectSpec> effects;
  double expected_points = 200.0;  // fixes the truth's intercept
};

struct Truth {
  std::vector<EffectSpec> effects;
  double intercept = 0.0;

  double effect(const EffectSpec& e, double x) const;
  // Log-intensity at the given covariate values (all effect covariates needed).
  double log_intensity(const std::map<std::string, double>& values) const;
};

struct Valley {
  CovariateStack stack;
  IntensityMap intensity;
  PointPattern crowns;
  Truth truth;
};

// Field with mean 0 and sd 1 over the grid (zero everywhere when the bumps
// cancel exactly, which does not happen in practice).
RasterGrid bump_field(const GridGeometry& geometry, int bumps, double bump_scale, SeededRng& rng);

// Covariates are drawn from per-name streams, so adding a field leaves the
// others unchanged.
Valley generate_valley(const ValleySpec& spec, std::uint64_t seed);

// The defaults used by the synth command: the usual covariate names with
// plausible magnitudes, and a truth driven by slope (quadratic), ndvi
// (linear) and twi (linear).
FieldSpec default_field(const std::string& name);
ValleySpec default_valley_spec();

std::string truth_to_json(const Truth& truth);
Truth truth_from_json(const std::string& text);

// covariates/<name>.asc, crowns.csv, truth.json, truth_intensity.asc
void write_valley(const Valley& valley, const std::filesystem::path& dir);

}  // namespace slidepp::synth

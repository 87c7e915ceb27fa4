#include "slidepp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "slidepp/error.hpp"
#include "slidepp/numeric.hpp"
#include "slidepp/simboot.hpp"

namespace slidepp::synth {

namespace {

const char* kind_name(EffectKind k) {
  switch (k) {
    case EffectKind::linear: return "linear";
    case EffectKind::quadratic: return "quadratic";
    case EffectKind::factor: return "factor";
  }
  return "linear";
}

EffectKind kind_from_name(const std::string& s) {
  if (s == "linear") return EffectKind::linear;
  if (s == "quadratic") return EffectKind::quadratic;
  if (s == "factor") return EffectKind::factor;
  throw ConfigError("unknown effect kind '" + s + "' (expected linear, quadratic or factor)");
}

RasterGrid classify(const RasterGrid& field, int classes) {
  std::vector<double> sorted(field.values().begin(), field.values().end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  for (int j = 1; j < classes; ++j) {
    const auto at = static_cast<std::size_t>(std::floor(static_cast<double>(j) * sorted.size() / classes));
    cuts.push_back(sorted[std::min(at, sorted.size() - 1)]);
  }
  RasterGrid out(field.geometry());
  for (std::size_t i = 0; i < out.geometry().cell_count(); ++i) {
    const auto above = std::lower_bound(cuts.begin(), cuts.end(), field[i]) - cuts.begin();
    out[i] = 1.0 + static_cast<double>(above);
  }
  return out;
}

}  // namespace

double Truth::effect(const EffectSpec& e, double x) const {
  const double z = (x - e.centre) / e.scale;
  switch (e.kind) {
    case EffectKind::linear: return e.coef * z;
    case EffectKind::quadratic: return e.coef * z * z;
    case EffectKind::factor: {
      const auto code = static_cast<long>(std::lround(x));
      if (code < 1 || code > static_cast<long>(e.level_effects.size())) {
        throw DataError("code " + std::to_string(code) + " of '" + e.covariate + "' has no truth effect");
      }
      return e.level_effects[static_cast<std::size_t>(code - 1)];
    }
  }
  return 0.0;
}

double Truth::log_intensity(const std::map<std::string, double>& values) const {
  double eta = intercept;
  for (const auto& e : effects) {
    auto it = values.find(e.covariate);
    if (it == values.end()) throw DataError("truth needs covariate '" + e.covariate + "'");
    eta += effect(e, it->second);
  }
  return eta;
}

RasterGrid bump_field(const GridGeometry& g, int bumps, double bump_scale, SeededRng& rng) {
  const double side = std::max(g.width(), g.height());
  const double s = bump_scale * side;
  struct Bump {
    double x, y, a, s2;
  };
  std::vector<Bump> list;
  for (int k = 0; k < bumps; ++k) {
    // Centres may fall a little outside so edges are not systematically flat.
    const double x = g.origin_x() + rng.uniform(-0.2, 1.2) * g.width();
    const double y = g.origin_y() + rng.uniform(-0.2, 1.2) * g.height();
    const double a = rng.normal();
    const double sk = s * rng.uniform(0.5, 1.5);
    list.push_back({x, y, a, 2.0 * sk * sk});
  }
  RasterGrid out(g, 0.0);
  CompensatedSum sum;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const CellIndex c = g.cell(i);
    const Point p = g.cell_center(c.row, c.col);
    double v = 0.0;
    for (const auto& b : list) v += b.a * std::exp(-((p.x - b.x) * (p.x - b.x) + (p.y - b.y) * (p.y - b.y)) / b.s2);
    out[i] = v;
    sum += v;
  }
  const double n = static_cast<double>(g.cell_count());
  const double mean = sum.value() / n;
  CompensatedSum ss;
  for (std::size_t i = 0; i < g.cell_count(); ++i) ss += (out[i] - mean) * (out[i] - mean);
  const double sd = std::sqrt(ss.value() / n);
  for (std::size_t i = 0; i < g.cell_count(); ++i) out[i] = sd > 0.0 ? (out[i] - mean) / sd : 0.0;
  return out;
}

Valley generate_valley(const ValleySpec& spec, std::uint64_t seed) {
  if (spec.rows == 0 || spec.cols == 0 || !(spec.cell_size > 0.0)) throw ConfigError("synthetic grid must be non-empty");
  if (!(spec.expected_points >= 0.0) || !std::isfinite(spec.expected_points)) {
    throw ConfigError("expected_points must be finite and non-negative");
  }
  const GridGeometry g(spec.origin_x, spec.origin_y, spec.rows, spec.cols, spec.cell_size);
  const SeededRng root(seed);
  Valley v;
  v.stack = CovariateStack(g);
  for (const auto& f : spec.fields) {
    if (f.name.empty()) throw ConfigError("synthetic field needs a name");
    if (v.stack.contains(f.name)) throw ConfigError("synthetic field '" + f.name + "' listed twice");
    SeededRng rng = root.derive(hash_name(f.name));
    const RasterGrid z = bump_field(g, f.bumps, f.bump_scale, rng);
    RasterGrid grid(g);
    if (f.classes > 0) {
      grid = f.amplitude == 0.0 ? RasterGrid(g, 1.0) : classify(z, f.classes);
    } else {
      for (std::size_t i = 0; i < g.cell_count(); ++i) grid[i] = f.mean + f.amplitude * f.sd * z[i];
    }
    v.stack.add(f.name, std::move(grid));
  }

  v.truth.effects = spec.effects;
  for (const auto& e : spec.effects) {
    if (!v.stack.contains(e.covariate)) throw ConfigError("truth effect names unknown field '" + e.covariate + "'");
    if (e.kind != EffectKind::factor && !(e.scale > 0.0)) {
      throw ConfigError("truth effect scale for '" + e.covariate + "' must be positive");
    }
  }
  std::vector<double> eta(g.cell_count(), 0.0);
  CompensatedSum mass;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    for (const auto& e : spec.effects) eta[i] += v.truth.effect(e, v.stack.get(e.covariate)[i]);
    mass += std::exp(eta[i]) * g.cell_area();
  }
  v.truth.intercept = spec.expected_points > 0.0 ? std::log(spec.expected_points / mass.value()) : -INFINITY;
  v.intensity = RasterGrid(g);
  for (std::size_t i = 0; i < g.cell_count(); ++i) v.intensity[i] = std::exp(v.truth.intercept + eta[i]);

  SeededRng prng = root.derive(hash_name("crowns"));
  v.crowns = sample_pattern(v.intensity, prng);
  return v;
}

FieldSpec default_field(const std::string& name) {
  FieldSpec f;
  f.name = name;
  if (name == "dtm") {
    f.mean = 1200.0;
    f.sd = 300.0;
    f.bump_scale = 0.3;
  } else if (name == "slope") {
    f.mean = 25.0;
    f.sd = 10.0;
  } else if (name == "northness" || name == "eastness") {
    f.mean = 0.0;
    f.sd = 0.5;
    f.bump_scale = 0.08;
  } else if (name == "twi") {
    f.mean = 8.0;
    f.sd = 2.0;
  } else if (name == "ndvi") {
    f.mean = 0.5;
    f.sd = 0.15;
  } else if (name == "plc" || name == "prc") {
    f.mean = 0.0;
    f.sd = 0.01;
    f.bump_scale = 0.06;
  } else if (name == "dusaf") {
    f.classes = 11;
  }
  return f;
}

ValleySpec default_valley_spec() {
  ValleySpec s;
  for (const char* n : {"dtm", "slope", "northness", "eastness", "twi", "ndvi", "plc", "prc", "dusaf"}) {
    s.fields.push_back(default_field(n));
  }
  s.effects = {{"slope", EffectKind::quadratic, -0.6, 25.0, 10.0, {}},
               {"ndvi", EffectKind::linear, -0.5, 0.5, 0.15, {}},
               {"twi", EffectKind::linear, 0.4, 8.0, 2.0, {}}};
  return s;
}

std::string truth_to_json(const Truth& truth) {
  nlohmann::json j;
  j["intercept"] = truth.intercept;
  j["effects"] = nlohmann::json::array();
  for (const auto& e : truth.effects) {
    j["effects"].push_back({{"covariate", e.covariate},
                            {"kind", kind_name(e.kind)},
                            {"coef", e.coef},
                            {"centre", e.centre},
                            {"scale", e.scale},
                            {"level_effects", e.level_effects}});
  }
  return j.dump(1) + "\n";
}

Truth truth_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Truth t;
    t.intercept = j.at("intercept").get<double>();
    for (const auto& je : j.at("effects")) {
      EffectSpec e;
      e.covariate = je.at("covariate").get<std::string>();
      e.kind = kind_from_name(je.at("kind").get<std::string>());
      e.coef = je.at("coef").get<double>();
      e.centre = je.at("centre").get<double>();
      e.scale = je.at("scale").get<double>();
      e.level_effects = je.at("level_effects").get<std::vector<double>>();
      t.effects.push_back(std::move(e));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed truth document: ") + e.what());
  }
}

void write_valley(const Valley& valley, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "covariates");
  write_stack_dir(valley.stack, dir / "covariates");
  write_points_csv(valley.crowns.points(), dir / "crowns.csv");
  write_ascii_grid(valley.intensity, dir / "truth_intensity.asc");
  std::ofstream out(dir / "truth.json", std::ios::binary);
  out << truth_to_json(valley.truth);
  if (!out) throw DataError("cannot write " + (dir / "truth.json").string());
}

}  // namespace slidepp::synth

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "slidepp/error.hpp"
#include "slidepp/ppm.hpp"

namespace slidepp {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "slidepp-model";

json to_json_vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd from_json_vec(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

}  // namespace

std::string model_to_json(const FittedModel& model) {
  json doc;
  doc["format"] = kFormatName;
  doc["version"] = kFormatVersion;

  json terms = json::array();
  for (const auto& t : model.spec.terms) {
    terms.push_back({{"covariate", t.covariate}, {"kind", gam::to_string(t.kind)}, {"basis_dim", t.basis_dim}});
  }
  doc["spec"] = {{"name", model.spec.name}, {"terms", terms}};

  json blocks = json::array();
  for (const auto& b : model.blocks) {
    json jb = {{"kind", gam::to_string(b.kind)},
               {"covariate", b.covariate},
               {"first_col", b.first_col},
               {"n_cols", b.n_cols}};
    if (b.basis) {
      jb["knots"] = b.basis->knots();
      jb["basis_means"] = to_json_vec(b.basis_means);
      jb["penalty_scale"] = b.penalty_scale;
    }
    if (!b.levels.empty()) jb["levels"] = b.levels;
    blocks.push_back(jb);
  }
  doc["blocks"] = blocks;
  doc["beta"] = to_json_vec(model.beta);
  doc["gammas"] = model.gammas;

  json ranges = json::object();
  for (const auto& [name, r] : model.training_ranges) ranges[name] = {r.min, r.max};
  doc["training_ranges"] = ranges;

  const auto& g = model.training_geometry;
  doc["training_grid"] = {{"origin_x", g.origin_x()}, {"origin_y", g.origin_y()}, {"n_rows", g.n_rows()},
                          {"n_cols", g.n_cols()},     {"cell_size", g.cell_size()}};
  doc["training_points"] = model.training_points;

  const auto& d = model.diagnostics;
  doc["diagnostics"] = {{"iterations", d.iterations}, {"converged", d.converged},
                        {"penalized_loglik", d.penalized_loglik}, {"loglik", d.loglik},
                        {"edf", d.edf}, {"ubre", d.ubre}, {"gradient_norm", d.gradient_norm}};
  return doc.dump(1) + "\n";
}

FittedModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormatName) throw DataError("not a slidepp model file");
    const int version = doc.at("version").get<int>();
    if (version != kFormatVersion) {
      throw DataError("unsupported model format version " + std::to_string(version));
    }
    FittedModel m;
    m.spec.name = doc.at("spec").at("name").get<std::string>();
    for (const auto& jt : doc.at("spec").at("terms")) {
      gam::TermSpec t;
      t.covariate = jt.at("covariate").get<std::string>();
      t.kind = gam::term_kind_from_string(jt.at("kind").get<std::string>());
      t.basis_dim = jt.at("basis_dim").get<int>();
      m.spec.terms.push_back(t);
    }
    for (const auto& jb : doc.at("blocks")) {
      gam::DesignBlock b;
      b.kind = gam::term_kind_from_string(jb.at("kind").get<std::string>());
      b.covariate = jb.at("covariate").get<std::string>();
      b.first_col = jb.at("first_col").get<Eigen::Index>();
      b.n_cols = jb.at("n_cols").get<Eigen::Index>();
      if (b.kind == gam::TermKind::smooth) {
        b.basis.emplace(b.covariate, jb.at("knots").get<std::vector<double>>());
        b.basis_means = from_json_vec(jb.at("basis_means"));
        b.penalty_scale = jb.at("penalty_scale").get<double>();
        gam::attach_penalty(b);
      }
      if (jb.contains("levels")) b.levels = jb.at("levels").get<std::vector<double>>();
      m.blocks.push_back(std::move(b));
    }
    m.beta = from_json_vec(doc.at("beta"));
    if (m.beta.size() != gam::design_width(m.blocks)) throw DataError("coefficient count does not match design");
    m.gammas = doc.at("gammas").get<std::vector<double>>();
    for (const auto& [name, r] : doc.at("training_ranges").items()) {
      m.training_ranges[name] = Range{r.at(0).get<double>(), r.at(1).get<double>()};
    }
    const auto& g = doc.at("training_grid");
    m.training_geometry = GridGeometry(g.at("origin_x").get<double>(), g.at("origin_y").get<double>(),
                                       g.at("n_rows").get<std::size_t>(), g.at("n_cols").get<std::size_t>(),
                                       g.at("cell_size").get<double>());
    m.training_points = doc.at("training_points").get<std::size_t>();
    const auto& d = doc.at("diagnostics");
    m.diagnostics.iterations = d.at("iterations").get<int>();
    m.diagnostics.converged = d.at("converged").get<bool>();
    m.diagnostics.penalized_loglik = d.at("penalized_loglik").get<double>();
    m.diagnostics.loglik = d.at("loglik").get<double>();
    m.diagnostics.edf = d.at("edf").get<double>();
    m.diagnostics.ubre = d.at("ubre").get<double>();
    m.diagnostics.gradient_norm = d.at("gradient_norm").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << model_to_json(model);
  if (!out) throw DataError("write failed for " + path.string());
}

FittedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace slidepp

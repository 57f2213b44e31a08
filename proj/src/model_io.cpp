#include "bcidal/model_io.hpp"

#include "bcidal/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace bcidal {

using nlohmann::json;

namespace {

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json_vec(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::MatrixXd matrix_from(const json& j) {
  if (!j.is_array()) throw DataError("schema violation: expected a matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw DataError("schema violation: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json preprocessing_json(const Preprocessing& p) {
  json j;
  j["input_rate_hz"] = p.input_rate_hz;
  if (p.resample) {
    j["resample"] = {{"from_hz", p.resample->from_hz},
                     {"to_hz", p.resample->to_hz},
                     {"antialias_taps", p.resample->antialias_taps},
                     {"antialias_cutoff_fraction", p.resample->antialias_cutoff_fraction}};
  } else {
    j["resample"] = nullptr;
  }
  j["bandpass"] = {{"low_hz", p.bandpass.low_hz},
                   {"high_hz", p.bandpass.high_hz},
                   {"prototype_order", p.bandpass.prototype_order},
                   {"sampling_rate_hz", p.bandpass.sampling_rate_hz}};
  return j;
}

Preprocessing preprocessing_from(const json& j) {
  Preprocessing p;
  p.input_rate_hz = j.at("input_rate_hz").get<double>();
  const json& r = j.at("resample");
  if (r.is_null()) {
    p.resample.reset();
  } else {
    signal::ResampleSpec rs;
    rs.from_hz = r.at("from_hz").get<double>();
    rs.to_hz = r.at("to_hz").get<double>();
    rs.antialias_taps = r.at("antialias_taps").get<int>();
    rs.antialias_cutoff_fraction = r.at("antialias_cutoff_fraction").get<double>();
    p.resample = rs;
  }
  const json& b = j.at("bandpass");
  p.bandpass.low_hz = b.at("low_hz").get<double>();
  p.bandpass.high_hz = b.at("high_hz").get<double>();
  p.bandpass.prototype_order = b.at("prototype_order").get<int>();
  p.bandpass.sampling_rate_hz = b.at("sampling_rate_hz").get<double>();
  return p;
}

json dal_json(const DalClassifier& c) {
  json j;
  j["preset"] = dal::to_string(c.preset);
  j["feature_map"] = {{"kind", dal::to_string(c.feature_map.kind)},
                      {"t_prime", c.feature_map.t_prime},
                      {"block_scales", c.feature_map.block_scales}};
  j["normalizer"] = c.normalizer.factors;
  j["lambda_ratio"] = c.lambda_ratio;
  json weights = json::array();
  for (const auto& w : c.model.weights) weights.push_back(to_json(w));
  j["weights"] = std::move(weights);
  j["bias"] = c.model.bias;
  j["regularizer"] = {{"kind", dal::to_string(c.model.regularizer.kind)}, {"lambda", c.model.regularizer.lambda}};
  const auto& cv = c.model.convergence;
  j["convergence"] = {{"outer_iterations", cv.outer_iterations},
                      {"final_relative_gap", cv.final_relative_gap},
                      {"objective", cv.objective},
                      {"converged", cv.converged},
                      {"newton_steps", cv.newton_steps},
                      {"objective_history", cv.objective_history}};
  return j;
}

DalClassifier dal_from(const json& j) {
  DalClassifier c;
  c.preset = dal::preset_from_string(j.at("preset").get<std::string>());
  const json& fm = j.at("feature_map");
  c.feature_map.kind = dal::feature_kind_from_string(fm.at("kind").get<std::string>());
  c.feature_map.t_prime = fm.at("t_prime").get<int>();
  c.feature_map.block_scales = fm.at("block_scales").get<std::array<double, 2>>();
  c.normalizer.factors = j.at("normalizer").get<std::vector<double>>();
  c.lambda_ratio = j.at("lambda_ratio").get<double>();
  for (const auto& w : j.at("weights")) c.model.weights.push_back(matrix_from(w));
  c.model.bias = j.at("bias").get<double>();
  c.model.regularizer.kind = dal::regularizer_kind_from_string(j.at("regularizer").at("kind").get<std::string>());
  c.model.regularizer.lambda = j.at("regularizer").at("lambda").get<double>();
  const json& cv = j.at("convergence");
  c.model.convergence.outer_iterations = cv.at("outer_iterations").get<int>();
  c.model.convergence.final_relative_gap = cv.at("final_relative_gap").get<double>();
  c.model.convergence.objective = cv.at("objective").get<double>();
  c.model.convergence.converged = cv.at("converged").get<bool>();
  c.model.convergence.newton_steps = cv.at("newton_steps").get<int>();
  c.model.convergence.objective_history = cv.at("objective_history").get<std::vector<double>>();
  if (c.normalizer.factors.size() != c.model.weights.size())
    throw DataError("schema violation: normalizer and weight block counts differ");
  return c;
}

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  json j;
  j["format"] = "bcidal-model";
  j["version"] = kModelFormatVersion;
  j["method"] = method_tag(model.method);
  j["preprocessing"] = preprocessing_json(model.preprocessing);
  if (const auto* c = std::get_if<CspLdaModel>(&model.body)) {
    j["csp"] = {{"m", c->csp.m},
                {"filters", to_json(c->csp.filters)},
                {"eigenvalues", to_json_vec(c->csp.eigenvalues)},
                {"patterns", to_json(c->csp.patterns)}};
    j["lda"] = {{"w", to_json_vec(c->lda.w)},
                {"b", c->lda.b},
                {"gamma", c->lda.gamma},
                {"mean_pos", to_json_vec(c->lda.mean_pos)},
                {"mean_neg", to_json_vec(c->lda.mean_neg)}};
  } else {
    j["dal"] = dal_json(std::get<DalClassifier>(model.body));
  }
  return j.dump(2) + "\n";
}

TrainedModel parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("schema violation: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "bcidal-model") throw DataError("schema violation: not a bcidal model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw ConfigError("model format version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    TrainedModel model;
    model.method = method_from_string(j.at("method").get<std::string>());
    model.preprocessing = preprocessing_from(j.at("preprocessing"));
    if (!is_dal(model.method)) {
      CspLdaModel c;
      const json& cj = j.at("csp");
      c.csp.m = cj.at("m").get<int>();
      c.csp.filters = matrix_from(cj.at("filters"));
      c.csp.eigenvalues = vector_from(cj.at("eigenvalues"));
      c.csp.patterns = matrix_from(cj.at("patterns"));
      const json& lj = j.at("lda");
      c.lda.w = vector_from(lj.at("w"));
      c.lda.b = lj.at("b").get<double>();
      c.lda.gamma = lj.at("gamma").get<double>();
      c.lda.mean_pos = vector_from(lj.at("mean_pos"));
      c.lda.mean_neg = vector_from(lj.at("mean_neg"));
      if (c.lda.w.size() != c.csp.filters.cols()) throw DataError("schema violation: LDA and CSP dimensions differ");
      model.body = std::move(c);
    } else {
      DalClassifier c = dal_from(j.at("dal"));
      if (c.preset != dal_preset(model.method))
        throw DataError("schema violation: preset " + dal::to_string(c.preset) + " does not match method " +
                        method_tag(model.method));
      model.body = std::move(c);
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("schema violation: ") + e.what());
  }
}

void emit_model(const TrainedModel& model, const std::filesystem::path& path) {
  const std::string text = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write model file " + path.string());
  out << text;
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace bcidal

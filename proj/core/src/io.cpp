#include "lcwr/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "lcwr/error.hpp"

namespace lcwr {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

AnnotationRecord record_from_json(const json& j) {
  if (!j.is_object()) throw DataError("expected a JSON object");
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw DataError(std::string("missing string field '") + key + "'");
    return j[key].get<std::string>();
  };
  auto integer = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer()) {
      throw DataError(std::string("missing integer field '") + key + "'");
    }
    return j[key].get<std::int64_t>();
  };
  if (!j.contains("preference") || !j["preference"].is_number()) {
    throw DataError("missing numeric field 'preference'");
  }
  const double pref = j["preference"].get<double>();
  if (!(pref >= 0.0 && pref <= 1.0)) throw DataError("preference " + std::to_string(pref) + " is outside [0, 1]");
  const auto len_model = integer("len_model");
  const auto len_baseline = integer("len_baseline");
  if (len_model < 1 || len_baseline < 1) throw DataError("lengths must be positive integers");
  return AnnotationRecord{str("instruction_id"), str("model_id"), str("baseline_id"),
                          LengthPair(len_model, len_baseline), Preference(pref)};
}

ordered_json gamma_to_json(const GammaTable& gamma) {
  ordered_json j = ordered_json::object();
  for (const auto& [id, value] : gamma) j[id] = value;
  return j;
}

template <class Json>
GammaTable gamma_from_json(const Json& j) {
  if (!j.is_object()) throw DataError("gamma must be a JSON object");
  GammaTable gamma;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number()) throw DataError("gamma value for '" + it.key() + "' is not a number");
    try {
      gamma.insert(it.key(), it.value().template get<double>());
    } catch (const InvalidArgument& e) {
      throw DataError(e.what());
    }
  }
  return gamma;
}

ordered_json config_to_json(const FitConfig& c) {
  ordered_json j;
  j["lambda_theta_psi"] = c.lambda_theta_psi;
  j["lambda_phi"] = c.lambda_phi;
  j["cross_validate"] = c.cross_validate;
  j["cv_folds"] = c.cv_folds;
  j["lambda_grid"] = c.lambda_grid;
  j["max_iterations"] = c.max_iterations;
  j["gradient_tolerance"] = c.gradient_tolerance;
  j["rng_seed"] = c.rng_seed;
  return j;
}

template <class Json>
FitConfig config_from_json(const Json& j) {
  FitConfig c;
  c.lambda_theta_psi = j.at("lambda_theta_psi").template get<double>();
  c.lambda_phi = j.at("lambda_phi").template get<double>();
  c.cross_validate = j.at("cross_validate").template get<bool>();
  c.cv_folds = j.at("cv_folds").template get<int>();
  c.lambda_grid = j.at("lambda_grid").template get<std::vector<double>>();
  c.max_iterations = j.at("max_iterations").template get<int>();
  c.gradient_tolerance = j.at("gradient_tolerance").template get<double>();
  c.rng_seed = j.at("rng_seed").template get<std::uint64_t>();
  return c;
}

ordered_json fit_to_json(const ModelFit& f) {
  ordered_json j;
  j["model_id"] = f.model_id;
  j["baseline_id"] = f.baseline_id;
  j["theta"] = f.params.theta;
  j["phi"] = f.params.phi;
  j["psi"] = f.params.psi;
  j["sigma"] = f.scale.sigma;
  j["sigma_degenerate"] = f.scale.degenerate;
  j["converged"] = f.diagnostics.converged;
  j["iterations"] = f.diagnostics.iterations;
  j["final_loss"] = f.diagnostics.final_loss;
  j["chosen_lambda_phi"] = f.diagnostics.chosen_lambda_phi;
  return j;
}

template <class Json>
ModelFit fit_from_json(const Json& j) {
  ModelFit f;
  f.model_id = j.at("model_id").template get<std::string>();
  f.baseline_id = j.at("baseline_id").template get<std::string>();
  f.params = {j.at("theta").template get<double>(), j.at("phi").template get<double>(),
              j.at("psi").template get<double>()};
  if (!f.params.is_finite()) throw DataError("fit for '" + f.model_id + "' has non-finite parameters");
  f.scale = j.at("sigma_degenerate").template get<bool>()
                ? LengthScale::degenerate_scale()
                : LengthScale::from_sigma(j.at("sigma").template get<double>());
  f.diagnostics.converged = j.at("converged").template get<bool>();
  f.diagnostics.iterations = j.at("iterations").template get<int>();
  f.diagnostics.final_loss = j.at("final_loss").template get<double>();
  f.diagnostics.chosen_lambda_phi = j.at("chosen_lambda_phi").template get<double>();
  return f;
}

ordered_json parse_document(std::istream& in, const char* what) {
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid ") + what + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("version") || j["version"] != kSchemaVersion) {
    throw DataError(std::string(what) + " does not carry schema version '" + kSchemaVersion + "'");
  }
  return j;
}

}  // namespace

std::vector<AnnotationRecord> read_annotations(std::istream& in) {
  std::vector<AnnotationRecord> records;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (blank(line)) continue;
    try {
      records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_annotations(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_annotations(std::ostream& out, std::span<const AnnotationRecord> records) {
  for (const auto& r : records) {
    ordered_json j;
    j["instruction_id"] = r.instruction_id;
    j["model_id"] = r.model_id;
    j["baseline_id"] = r.baseline_id;
    j["len_model"] = r.lengths.len_model();
    j["len_baseline"] = r.lengths.len_baseline();
    j["preference"] = r.preference.value();
    out << j.dump() << '\n';
  }
}

void save_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> records) {
  auto out = open_out(path);
  write_annotations(out, records);
}

void write_gamma(std::ostream& out, const GammaTable& gamma) {
  ordered_json j;
  j["version"] = kSchemaVersion;
  j["gamma"] = gamma_to_json(gamma);
  out << j.dump(2) << '\n';
}

GammaTable read_gamma(std::istream& in) {
  const auto j = parse_document(in, "gamma file");
  if (!j.contains("gamma")) throw DataError("gamma file has no 'gamma' object");
  return gamma_from_json(j["gamma"]);
}

void save_gamma(const std::filesystem::path& path, const GammaTable& gamma) {
  auto out = open_out(path);
  write_gamma(out, gamma);
}

GammaTable load_gamma(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_gamma(in);
}

void write_archive(std::ostream& out, const FitArchive& archive) {
  ordered_json j;
  j["version"] = archive.version;
  j["config"] = config_to_json(archive.config);
  j["gamma"] = gamma_to_json(archive.gamma);
  j["fits"] = ordered_json::array();
  for (const auto& f : archive.fits) j["fits"].push_back(fit_to_json(f));
  out << j.dump(2) << '\n';
}

FitArchive read_archive(std::istream& in) {
  const auto j = parse_document(in, "fit archive");
  FitArchive archive;
  try {
    archive.version = j.at("version").get<std::string>();
    archive.config = config_from_json(j.at("config"));
    archive.gamma = gamma_from_json(j.at("gamma"));
    for (const auto& f : j.at("fits")) archive.fits.push_back(fit_from_json(f));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fit archive: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("malformed fit archive: ") + e.what());
  }
  for (const auto& f : archive.fits) {
    if (f.baseline_id != archive.fits.front().baseline_id) {
      throw DataError("fit archive mixes baselines");
    }
  }
  return archive;
}

void save_archive(const std::filesystem::path& path, const FitArchive& archive) {
  auto out = open_out(path);
  write_archive(out, archive);
}

FitArchive load_archive(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_archive(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace lcwr

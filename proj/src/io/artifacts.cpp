#include "irt/io/artifacts.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "irt/io/csv.hpp"

namespace irt::io {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string data_hash(const ResponseMatrix& data) {
  std::string bytes = std::to_string(data.persons()) + "x" + std::to_string(data.items()) + ":";
  for (int i = 0; i < data.items(); ++i) bytes += std::to_string(data.categories(i)) + ",";
  bytes += ":";
  for (int p = 0; p < data.persons(); ++p) {
    for (int i = 0; i < data.items(); ++i) bytes += std::to_string(data.code(p, i)) + ",";
    bytes += "\n";
  }
  return hex_digest(fnv1a(bytes));
}

namespace {

std::string content_digest(const Json& artifact) {
  Json copy = artifact;
  copy.erase("hash");
  return hex_digest(fnv1a(copy.dump()));
}

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type: " + e.what());
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, key) : fallback;
}

void check_keys(const Json& section, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!section.is_object()) throw ValidationError("'" + where + "' must be an object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : section.items()) {
    if (!names.count(item.key())) throw ValidationError("unknown key '" + item.key() + "' in '" + where + "'");
  }
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j, const char* key) {
  const auto xs = get<std::vector<double>>(j, key);
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const char* key, Eigen::Index rows, Eigen::Index cols) {
  const auto xs = get<std::vector<std::vector<double>>>(j, key);
  if (static_cast<Eigen::Index>(xs.size()) != rows) {
    throw ValidationError(std::string("field '") + key + "' has the wrong number of rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(xs[static_cast<std::size_t>(r)].size()) != cols) {
      throw ValidationError(std::string("field '") + key + "' has the wrong number of columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = xs[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return m;
}

Json shape_to_json(const ModelShape& shape) {
  Json j;
  j["persons"] = shape.persons;
  j["items"] = shape.items;
  j["dims"] = shape.dims;
  j["categories"] = std::vector<int>(shape.categories.data(), shape.categories.data() + shape.categories.size());
  return j;
}

ModelShape shape_from_json(const Json& j) {
  ModelShape shape{get<int>(j, "persons"), get<int>(j, "items"), get<int>(j, "dims"), {}};
  const auto cats = get<std::vector<int>>(j, "categories");
  if (static_cast<int>(cats.size()) != shape.items || shape.persons < 1 || shape.items < 1 || shape.dims < 1) {
    throw ValidationError("inconsistent model shape");
  }
  shape.categories = Eigen::Map<const Eigen::VectorXi>(cats.data(), shape.items);
  if (shape.categories.minCoeff() < 2) throw ValidationError("items need at least 2 categories");
  return shape;
}

}  // namespace

void seal(Json& artifact) {
  artifact.erase("hash");
  artifact["hash"] = content_digest(artifact);
}

void verify_seal(const Json& artifact) {
  if (!artifact.contains("hash") || !artifact["hash"].is_string()) {
    throw ValidationError("artifact has no content hash");
  }
  const std::string stored = artifact["hash"].get<std::string>();
  const std::string computed = content_digest(artifact);
  if (stored != computed) {
    throw ValidationError("artifact content hash mismatch: stored " + stored + ", computed " + computed);
  }
}

void check_artifact(const Json& artifact, const std::string& format) {
  if (!artifact.is_object()) throw ValidationError("artifact is not a JSON object");
  const std::string found = get_or<std::string>(artifact, "format", "");
  if (found != format) throw ValidationError("expected a '" + format + "' artifact, found '" + found + "'");
  const int version = get_or<int>(artifact, "version", -1);
  if (version != kArtifactVersion) {
    throw ValidationError("unsupported " + format + " artifact version " + std::to_string(version) + " (expected " +
                          std::to_string(kArtifactVersion) + ")");
  }
  verify_seal(artifact);
}

std::string dump_artifact(const Json& artifact) { return artifact.dump(1) + "\n"; }

void save_artifact(const std::filesystem::path& path, const Json& artifact) {
  write_text(path, dump_artifact(artifact));
}

Json load_artifact(const std::filesystem::path& path, const std::string& format) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + " is not valid JSON: " + e.what());
  }
  check_artifact(j, format);
  return j;
}

Json params_to_json(const ModelParams<double>& p) {
  Json j;
  j["persons"] = p.persons();
  j["items"] = p.items();
  j["dims"] = p.dims();
  j["discrimination"] = matrix_to_json(p.item.discrimination);
  j["location"] = matrix_to_json(p.item.location);
  Json tau = Json::array();
  for (const auto& m : p.item.thresholds) tau.push_back(matrix_to_json(m));
  j["thresholds"] = std::move(tau);
  j["eta"] = vector_to_json(p.scales.item);
  j["xi"] = matrix_to_json(p.scales.local);
  j["kappa"] = vector_to_json(p.scales.dimension);
  j["traits"] = matrix_to_json(p.traits);
  return j;
}

ModelParams<double> params_from_json(const Json& j) {
  const int P = get<int>(j, "persons"), I = get<int>(j, "items"), D = get<int>(j, "dims");
  ModelParams<double> p;
  p.item.discrimination = matrix_from_json(j, "discrimination", I, D);
  p.item.location = matrix_from_json(j, "location", I, D);
  const Json& tau = j.at("thresholds");
  if (!tau.is_array() || static_cast<int>(tau.size()) != I) throw ValidationError("one threshold block per item");
  for (int i = 0; i < I; ++i) {
    Json wrap;
    wrap["m"] = tau[static_cast<std::size_t>(i)];
    const auto rows = static_cast<Eigen::Index>(wrap["m"].size());
    p.item.thresholds.push_back(matrix_from_json(wrap, "m", rows, D));
  }
  p.scales.item = vector_from_json(j, "eta");
  p.scales.local = matrix_from_json(j, "xi", I, D);
  p.scales.dimension = vector_from_json(j, "kappa");
  p.traits = matrix_from_json(j, "traits", P, D);
  try {
    check_invariants(p);
  } catch (const ContractError& e) {
    throw ValidationError(std::string("stored parameters are invalid: ") + e.what());
  }
  return p;
}

Json fit_to_json(const FitArtifact& fit) {
  const VariationalPosterior& q = fit.posterior;
  Json j;
  j["format"] = "irt-fit";
  j["version"] = kArtifactVersion;
  j["config"] = fit.config;
  j["data_hash"] = fit.data_hash;
  j["item_names"] = fit.item_names;
  j["shape"] = shape_to_json(q.transform.shape());
  Json segments = Json::array();
  for (const TransformSegment& s : q.transform.segments()) {
    Json seg;
    seg["block"] = s.block;
    seg["kind"] = to_string(s.kind);
    seg["offset"] = s.offset;
    seg["length"] = s.length;
    segments.push_back(std::move(seg));
  }
  j["transform"] = std::move(segments);
  j["location"] = vector_to_json(q.location);
  j["log_scale"] = vector_to_json(q.log_scale);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["final_elbo"] = fit.final_elbo;
  seal(j);
  return j;
}

FitArtifact fit_from_json(const Json& j) {
  check_artifact(j, "irt-fit");
  FitArtifact fit;
  const ModelShape shape = shape_from_json(j.at("shape"));
  const TransformSpec transform = TransformSpec::build(shape);
  const Json& segments = j.at("transform");
  if (!segments.is_array() || segments.size() != transform.segments().size()) {
    throw ValidationError("stored transform layout does not match the model shape");
  }
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const TransformSegment& expected = transform.segments()[k];
    const TransformSegment stored{get<std::string>(segments[k], "block"),
                                  transform_kind_from_string(get<std::string>(segments[k], "kind")),
                                  get<Eigen::Index>(segments[k], "offset"), get<Eigen::Index>(segments[k], "length")};
    if (!(stored == expected)) {
      throw ValidationError("stored transform segment " + std::to_string(k + 1) + " does not match the model shape");
    }
  }
  fit.posterior.transform = transform;
  fit.posterior.location = vector_from_json(j, "location");
  fit.posterior.log_scale = vector_from_json(j, "log_scale");
  try {
    fit.posterior.validate();
  } catch (const ContractError& e) {
    throw ValidationError(std::string("stored surrogate is invalid: ") + e.what());
  }
  fit.config = j.at("config");
  fit.data_hash = get<std::string>(j, "data_hash");
  fit.item_names = get<std::vector<std::string>>(j, "item_names");
  fit.converged = get<bool>(j, "converged");
  fit.iterations = get<long>(j, "iterations");
  fit.final_elbo = get<double>(j, "final_elbo");
  fit.hash = get<std::string>(j, "hash");
  return fit;
}

std::string format_trace(const std::vector<TraceRow>& trace) {
  std::string out = "iteration,elbo,step_size\n";
  for (const TraceRow& row : trace) {
    out += std::to_string(row.iteration) + "," + format_double(row.elbo) + "," + format_double(row.step_size) + "\n";
  }
  return out;
}

Json encoder_to_json(const nn::EncoderNet& net, const nn::TrainingReport& report, const Json& config) {
  Json j;
  j["format"] = "irt-encoder";
  j["version"] = kArtifactVersion;
  j["config"] = config;
  j["decoder_hash"] = net.decoder_hash;
  j["sizes"] = net.sizes();
  j["activation"] = {{"hidden", "tanh"}, {"output", "identity"}};
  j["feature_layout"] = {{"encoding", "one-hot with missing flags"},
                         {"categories", std::vector<int>(net.categories.data(),
                                                         net.categories.data() + net.categories.size())}};
  Json layers = Json::array();
  for (const nn::DenseLayer& layer : net.layers()) {
    Json l;
    Json w = Json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
    l["weight"] = std::move(w);
    l["bias"] = vector_to_json(layer.bias);
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  j["training"] = {{"epochs", report.epochs.size()},
                   {"best_epoch", report.best_epoch},
                   {"best_validation_mse", report.best_validation_mse},
                   {"validation_target_variance", report.validation_target_variance},
                   {"stopped_early", report.stopped_early}};
  seal(j);
  return j;
}

nn::EncoderNet encoder_from_json(const Json& j) {
  check_artifact(j, "irt-encoder");
  const auto sizes = get<std::vector<int>>(j, "sizes");
  const Json& layers = j.at("layers");
  if (sizes.size() < 2 || !layers.is_array() || layers.size() + 1 != sizes.size()) {
    throw ValidationError("encoder layer list does not match its sizes");
  }
  std::vector<nn::DenseLayer> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const int in = sizes[l], rows = sizes[l + 1];
    const auto w = get<std::vector<double>>(layers[l], "weight");
    if (in < 1 || rows < 1 || static_cast<long>(w.size()) != static_cast<long>(in) * rows) {
      throw ValidationError("encoder layer " + std::to_string(l + 1) + " has the wrong weight count");
    }
    nn::DenseLayer layer{Eigen::MatrixXd(rows, in), vector_from_json(layers[l], "bias")};
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r) * in + c];
    out.push_back(std::move(layer));
  }
  nn::EncoderNet net;
  try {
    net = nn::EncoderNet(std::move(out));
  } catch (const ContractError& e) {
    throw ValidationError(std::string("stored encoder is invalid: ") + e.what());
  }
  const auto cats = get<std::vector<int>>(j.at("feature_layout"), "categories");
  net.categories = Eigen::Map<const Eigen::VectorXi>(cats.data(), static_cast<Eigen::Index>(cats.size()));
  if (nn::feature_width(net.categories) != net.input_width()) {
    throw ValidationError("encoder feature layout does not match its input width");
  }
  net.decoder_hash = get<std::string>(j, "decoder_hash");
  return net;
}

Json waic_to_json(const WaicReport& r) {
  Json j;
  j["lppd"] = r.lppd;
  j["pwaic"] = r.pwaic;
  j["elpd"] = r.elpd;
  j["waic"] = r.waic;
  j["se"] = r.se;
  j["persons"] = r.persons;
  j["samples"] = r.samples;
  return j;
}

Json comparison_to_json(const Comparison& c) {
  Json ranking = Json::array();
  for (std::size_t k = 0; k < c.ranking.size(); ++k) {
    Json row = waic_to_json(c.ranking[k].report);
    row["rank"] = k + 1;
    row["label"] = c.ranking[k].label;
    ranking.push_back(std::move(row));
  }
  Json pairs = Json::array();
  for (const PairFlag& p : c.pairs) {
    pairs.push_back({{"better", p.first},
                     {"worse", p.second},
                     {"difference", p.difference},
                     {"within_one_se", p.within_one_se}});
  }
  return {{"ranking", std::move(ranking)}, {"pairs", std::move(pairs)}};
}

FitConfig fit_config_from_json(const Json& s, int dims, std::uint64_t seed, int threads) {
  check_keys(s,
             {"eta0", "xi0", "kappa_base", "kappa_ratio", "nu", "mc_samples", "step_size", "decay_rate",
              "decay_interval", "step_floor", "max_iterations", "window", "tolerance", "initial_log_scale", "init"},
             "fit");
  FitConfig c;
  c.dims = dims;
  c.seed = seed;
  c.threads = threads;
  c.eta0 = get_or(s, "eta0", c.eta0);
  c.xi0 = get_or(s, "xi0", c.xi0);
  c.kappa_base = get_or(s, "kappa_base", c.kappa_base);
  c.kappa_ratio = get_or(s, "kappa_ratio", c.kappa_ratio);
  c.nu = get_or(s, "nu", c.nu);
  c.mc_samples = get_or(s, "mc_samples", c.mc_samples);
  c.schedule.initial = get_or(s, "step_size", c.schedule.initial);
  c.schedule.decay_rate = get_or(s, "decay_rate", c.schedule.decay_rate);
  c.schedule.decay_interval = get_or(s, "decay_interval", c.schedule.decay_interval);
  c.schedule.floor = get_or(s, "step_floor", c.schedule.floor);
  c.max_iterations = get_or(s, "max_iterations", c.max_iterations);
  c.window = get_or(s, "window", c.window);
  c.tolerance = get_or(s, "tolerance", c.tolerance);
  c.initial_log_scale = get_or(s, "initial_log_scale", c.initial_log_scale);
  const std::string init = get_or<std::string>(s, "init", "factor");
  if (init != "factor" && init != "unit") throw ValidationError("fit.init must be 'factor' or 'unit'");
  try {
    c.validate();
  } catch (const ContractError& e) {
    throw ValidationError(std::string("invalid fit configuration: ") + e.what());
  }
  return c;
}

nn::EncoderConfig encoder_config_from_json(const Json& s) {
  check_keys(s, {"fit", "hidden", "max_epochs", "batch_size", "step_size", "patience", "validation_fraction"},
             "encoder");
  nn::EncoderConfig c;
  c.hidden = get_or(s, "hidden", c.hidden);
  c.max_epochs = get_or(s, "max_epochs", c.max_epochs);
  c.batch_size = get_or(s, "batch_size", c.batch_size);
  c.step_size = get_or(s, "step_size", c.step_size);
  c.patience = get_or(s, "patience", c.patience);
  c.validation_fraction = get_or(s, "validation_fraction", c.validation_fraction);
  try {
    c.validate();
  } catch (const ContractError& e) {
    throw ValidationError(std::string("invalid encoder configuration: ") + e.what());
  }
  return c;
}

sim::TruthSpec truth_spec_from_json(const Json& s, std::uint64_t seed) {
  check_keys(s,
             {"persons", "items", "dims", "categories", "assignment", "lambda_min", "lambda_max", "threshold_spacing",
              "location_sd", "missing_rate", "nu"},
             "simulate");
  sim::TruthSpec t;
  t.seed = seed;
  t.persons = get_or(s, "persons", t.persons);
  t.items = get_or(s, "items", t.items);
  t.dims = get_or(s, "dims", t.dims);
  t.categories = get_or(s, "categories", t.categories);
  t.assignment = get_or(s, "assignment", t.assignment);
  for (int& d : t.assignment) d -= 1;  // 1-based in configuration files
  t.lambda_min = get_or(s, "lambda_min", t.lambda_min);
  t.lambda_max = get_or(s, "lambda_max", t.lambda_max);
  t.threshold_spacing = get_or(s, "threshold_spacing", t.threshold_spacing);
  t.location_sd = get_or(s, "location_sd", t.location_sd);
  try {
    t.validate();
  } catch (const ContractError& e) {
    throw ValidationError(std::string("invalid simulation configuration: ") + e.what());
  }
  return t;
}

}  // namespace irt::io

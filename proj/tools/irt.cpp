// irt simulate|factorize|fit|waic|train-encoder|score --config <json> [--seed N] [--threads N] [--out DIR]

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>

#include <CLI11.hpp>

#include "irt/fa/factor_analysis.hpp"
#include "irt/io/artifacts.hpp"
#include "irt/io/csv.hpp"

namespace fs = std::filesystem;
using irt::io::Json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr const char* kOutEnv = "IRT_OUT_DIR";
constexpr int kWeightDraws = 200;

struct Run {
  Json config;         // as read, with seed and threads replaced by the effective values
  fs::path base;       // directory of the config file; relative paths resolve against it
  fs::path out;
  std::uint64_t seed = 1;
  int threads = 1;

  fs::path path(const std::string& p) const { return fs::path(p).is_absolute() ? fs::path(p) : base / p; }

  const Json& section(const char* name) const {
    static const Json empty = Json::object();
    return config.contains(name) ? config.at(name) : empty;
  }

  template <typename T>
  T require(const Json& j, const char* key, const std::string& where) const {
    if (!j.contains(key)) throw irt::ValidationError("config needs '" + where + "'");
    try {
      return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw irt::ValidationError("config field '" + where + "' has the wrong type");
    }
  }
};

Run load_run(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<int> threads,
             const std::string& out) {
  Run run;
  try {
    run.config = Json::parse(irt::io::read_text(config_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw irt::ValidationError(config_path + " is not valid JSON: " + e.what());
  }
  if (!run.config.is_object()) throw irt::ValidationError("config must be a JSON object");
  run.base = fs::absolute(config_path).parent_path();
  try {
    run.seed = seed ? *seed : run.config.value("seed", std::uint64_t{1});
    run.threads = threads ? *threads : run.config.value("threads", 1);
  } catch (const nlohmann::json::exception&) {
    throw irt::ValidationError("config fields 'seed' and 'threads' must be integers");
  }
  if (run.threads < 1) throw irt::ValidationError("thread count must be at least 1");
  run.config["seed"] = run.seed;
  run.config["threads"] = run.threads;
  if (!out.empty()) {
    run.out = out;
  } else if (run.config.contains("out")) {
    run.out = run.path(run.config["out"].get<std::string>());
  } else if (const char* env = std::getenv(kOutEnv); env != nullptr && *env != '\0') {
    run.out = env;
  } else {
    run.out = ".";
  }
  run.config.erase("out");
  fs::create_directories(run.out);
  return run;
}

irt::ResponseMatrix load_data(const Run& run, const fs::path& path,
                              std::optional<Eigen::VectorXi> categories = std::nullopt) {
  irt::io::ResponseFormat format;
  format.missing_token = run.config.value("missing_token", std::string());
  if (categories) {
    format.per_item_categories = categories;
  } else if (run.config.contains("categories")) {
    const Json& c = run.config["categories"];
    if (c.is_number_integer()) {
      format.categories = c.get<int>();
    } else {
      const auto v = run.require<std::vector<int>>(run.config, "categories", "categories");
      format.per_item_categories = Eigen::Map<const Eigen::VectorXi>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
  }
  return irt::io::load_responses(path, format);
}

irt::ResponseMatrix load_data(const Run& run) {
  return load_data(run, run.path(run.require<std::string>(run.config, "data", "data")));
}

std::vector<std::string> dim_header(const char* first, int dims, const char* prefix) {
  std::vector<std::string> h{first};
  for (int d = 1; d <= dims; ++d) h.push_back(prefix + std::to_string(d));
  return h;
}

void say(const std::string& line) { std::cout << line << "\n"; }

// ---- commands ----

int cmd_simulate(const Run& run) {
  const Json& s = run.section("simulate");
  const irt::sim::TruthSpec spec = irt::io::truth_spec_from_json(s, run.seed);
  const double missing_rate = s.value("missing_rate", 0.0);
  const double nu = s.value("nu", 1.0);
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw irt::ValidationError("simulate.missing_rate must lie in [0, 1)");
  if (!(nu > 0.0)) throw irt::ValidationError("simulate.nu must be positive");
  std::mt19937_64 rng(run.seed);
  const irt::ModelParams<double> truth = irt::sim::make_sparse_truth(spec, rng);
  const irt::ResponseMatrix data =
      irt::sim::sample_responses(truth, Eigen::VectorXi::Constant(spec.items, spec.categories), rng, nu, missing_rate);

  Json artifact;
  artifact["format"] = "irt-truth";
  artifact["version"] = irt::io::kArtifactVersion;
  artifact["config"] = run.config;
  artifact["data_hash"] = irt::io::data_hash(data);
  std::vector<int> plan = spec.resolved_assignment();
  for (int& d : plan) d += 1;
  artifact["assignment"] = plan;
  artifact["params"] = irt::io::params_to_json(truth);
  irt::io::seal(artifact);

  irt::io::write_text(run.out / "responses.csv", irt::io::format_responses(data));
  irt::io::save_artifact(run.out / "truth.json", artifact);
  irt::io::write_text(run.out / "truth_traits.csv",
                      irt::io::format_table(dim_header("person", spec.dims, "theta"), truth.traits));
  say("simulated " + std::to_string(data.persons()) + " persons x " + std::to_string(data.items()) + " items -> " +
      (run.out / "responses.csv").string());
  return 0;
}

int cmd_factorize(const Run& run) {
  const Json& s = run.section("factorize");
  const irt::ResponseMatrix data = load_data(run);
  const int dims = run.require<int>(s, "dims", "factorize.dims");
  const double cutoff = s.value("cutoff", 0.4);
  const std::string rotation = s.value("rotation", std::string("varimax"));
  if (rotation != "varimax" && rotation != "none") throw irt::ValidationError("factorize.rotation must be 'varimax' or 'none'");
  if (dims < 1 || dims >= data.items()) throw irt::ValidationError("factorize.dims must lie in [1, items)");

  const Eigen::MatrixXd corr = irt::fa::correlation_matrix(data);
  irt::fa::LoadingMatrix loadings = irt::fa::principal_axis(corr, dims);
  if (rotation == "varimax") loadings = irt::fa::varimax(loadings);
  const auto parts = irt::fa::partition_by_cutoff(loadings, cutoff);

  std::vector<std::string> labels;
  std::string partition = "item,name,assignment\n";
  for (int i = 0; i < data.items(); ++i) {
    labels.push_back(std::to_string(i + 1));
    partition += std::to_string(i + 1) + "," + data.item_names()[static_cast<std::size_t>(i)] + "," +
                 irt::fa::describe(parts[static_cast<std::size_t>(i)]) + "\n";
  }
  irt::io::write_text(run.out / "loadings.csv",
                      irt::io::format_table(dim_header("item", dims, "factor"), loadings.values, labels));
  irt::io::write_text(run.out / "partition.csv", partition);
  say("factor loadings (" + loadings.rotation + ") -> " + (run.out / "loadings.csv").string());
  return 0;
}

int fit_one(const Run& run, const irt::ResponseMatrix& data, int dims) {
  const Json& s = run.section("fit");
  const irt::FitConfig config = irt::io::fit_config_from_json(s, dims, run.seed, run.threads);
  const std::string init = s.value("init", std::string("factor"));
  irt::FitResult result = init == "factor" ? irt::fit(data, config)
                                           : irt::fit(data, config, irt::initial_params(data, dims));
  irt::io::FitArtifact artifact;
  artifact.posterior = result.posterior;
  artifact.config = run.config;
  artifact.config["dims"] = dims;
  artifact.data_hash = irt::io::data_hash(data);
  artifact.item_names = data.item_names();
  artifact.converged = result.converged;
  artifact.iterations = static_cast<long>(result.trace.size());
  artifact.final_elbo = result.trace.empty() ? 0.0 : result.trace.back().elbo;
  const Json j = irt::io::fit_to_json(artifact);

  const std::string tag = "_d" + std::to_string(dims);
  irt::io::save_artifact(run.out / ("fit" + tag + ".json"), j);
  irt::io::write_text(run.out / ("trace" + tag + ".csv"), irt::io::format_trace(result.trace));

  const irt::ModelParams<double> mean = irt::posterior_mean(result.posterior);
  irt::io::write_text(run.out / ("posterior_traits" + tag + ".csv"),
                      irt::io::format_table(dim_header("person", dims, "theta"), mean.traits));
  std::mt19937_64 rng(run.seed ^ 0x5deece66dULL);
  const Eigen::MatrixXd w =
      irt::expected_domain_weights(irt::sample_posterior(result.posterior, kWeightDraws, rng), config.nu);
  std::vector<std::string> labels;
  for (int i = 0; i < data.items(); ++i) labels.push_back(std::to_string(i + 1));
  irt::io::write_text(run.out / ("domain_weights" + tag + ".csv"),
                      irt::io::format_table(dim_header("item", dims, "w"), w, labels));
  say("fit D=" + std::to_string(dims) + ": " + std::to_string(artifact.iterations) + " iterations, final ELBO " +
      irt::io::format_double(artifact.final_elbo) + (result.converged ? " (converged)" : "") + ", hash " +
      j["hash"].get<std::string>());
  return 0;
}

int cmd_fit(const Run& run) {
  const irt::ResponseMatrix data = load_data(run);
  std::vector<int> dims;
  const Json& d = run.config.contains("dims") ? run.config["dims"] : Json();
  if (d.is_number_integer()) {
    dims.push_back(d.get<int>());
  } else if (d.is_array()) {
    dims = d.get<std::vector<int>>();
  } else {
    throw irt::ValidationError("config needs 'dims' (an integer or a list of integers)");
  }
  for (int k : dims) {
    if (k < 1) throw irt::ValidationError("dims must be positive");
  }
  for (int k : dims) fit_one(run, data, k);
  return 0;
}

irt::io::FitArtifact load_fit_for(const fs::path& path, const irt::ResponseMatrix& data) {
  const irt::io::FitArtifact fit = irt::io::fit_from_json(irt::io::load_artifact(path, "irt-fit"));
  const std::string current = irt::io::data_hash(data);
  if (fit.data_hash != current) {
    throw irt::ValidationError("fit " + path.string() + " was made from different data: artifact data hash " +
                               fit.data_hash + ", current data hash " + current);
  }
  return fit;
}

int cmd_waic(const Run& run) {
  const Json& s = run.section("waic");
  const irt::ResponseMatrix data = load_data(run);
  const int samples = s.value("samples", 1000);
  if (samples < 2) throw irt::ValidationError("waic.samples must be at least 2");
  const auto fits = run.require<std::vector<std::string>>(s, "fits", "waic.fits");
  if (fits.empty()) throw irt::ValidationError("waic.fits must list at least one fit artifact");

  std::vector<irt::WaicReport> reports;
  std::vector<std::string> labels;
  Json models = Json::array();
  for (std::size_t k = 0; k < fits.size(); ++k) {
    const irt::io::FitArtifact fit = load_fit_for(run.path(fits[k]), data);
    const double nu = fit.config.contains("fit") ? fit.config["fit"].value("nu", 1.0) : 1.0;
    std::mt19937_64 rng(run.seed + k);
    const irt::PosteriorDraws draws = irt::sample_posterior(fit.posterior, samples, rng);
    const irt::PointwiseLogLik m = irt::pointwise_loglik(draws, data, nu, run.threads);
    const irt::WaicReport report = irt::waic(m);
    const std::string label = "D=" + std::to_string(fit.posterior.transform.shape().dims);
    reports.push_back(report);
    labels.push_back(label);
    Json entry = irt::io::waic_to_json(report);
    entry["label"] = label;
    entry["fit"] = fits[k];
    entry["fit_hash"] = fit.hash;
    models.push_back(std::move(entry));
    irt::io::write_text(run.out / ("waic_pointwise_d" + std::to_string(fit.posterior.transform.shape().dims) + ".csv"),
                        irt::io::format_table({"person", "elpd"}, report.pointwise));
    say(label + ": WAIC " + irt::io::format_double(report.waic) + " (se " + irt::io::format_double(report.se) + ")");
  }
  Json artifact;
  artifact["format"] = "irt-waic";
  artifact["version"] = irt::io::kArtifactVersion;
  artifact["config"] = run.config;
  artifact["data_hash"] = irt::io::data_hash(data);
  artifact["models"] = std::move(models);
  std::string table = "rank,label,waic,se\n";
  if (reports.size() >= 2) {
    const irt::Comparison c = irt::compare(reports, labels);
    artifact["comparison"] = irt::io::comparison_to_json(c);
    for (std::size_t k = 0; k < c.ranking.size(); ++k) {
      table += std::to_string(k + 1) + "," + c.ranking[k].label + "," + irt::io::format_double(c.ranking[k].report.waic) +
               "," + irt::io::format_double(c.ranking[k].report.se) + "\n";
    }
    for (const irt::PairFlag& p : c.pairs) {
      if (p.within_one_se) say(p.first + " and " + p.second + " are within one standard error");
    }
  }
  irt::io::seal(artifact);
  irt::io::save_artifact(run.out / "waic.json", artifact);
  irt::io::write_text(run.out / "waic_comparison.csv", table);
  return 0;
}

int cmd_train_encoder(const Run& run) {
  const Json& s = run.section("encoder");
  const irt::nn::EncoderConfig config = irt::io::encoder_config_from_json(s);
  const irt::ResponseMatrix data = load_data(run);
  const irt::io::FitArtifact fit = load_fit_for(run.path(run.require<std::string>(s, "fit", "encoder.fit")), data);
  const Eigen::MatrixXd targets = irt::posterior_mean(fit.posterior).traits;
  std::mt19937_64 rng(run.seed);
  irt::nn::TrainedEncoder trained = irt::nn::train_encoder(data, targets, config, rng);
  trained.net.decoder_hash = fit.hash;
  const Json j = irt::io::encoder_to_json(trained.net, trained.report, run.config);
  irt::io::save_artifact(run.out / "encoder.json", j);
  std::string trace = "epoch,train_mse,validation_mse\n";
  for (const irt::nn::EpochRow& e : trained.report.epochs) {
    trace += std::to_string(e.epoch) + "," + irt::io::format_double(e.train_mse) + "," +
             irt::io::format_double(e.validation_mse) + "\n";
  }
  irt::io::write_text(run.out / "encoder_trace.csv", trace);
  say("encoder: best validation MSE " + irt::io::format_double(trained.report.best_validation_mse) +
      " at epoch " + std::to_string(trained.report.best_epoch) + " (target variance " +
      irt::io::format_double(trained.report.validation_target_variance) + ")");
  return 0;
}

int cmd_score(const Run& run) {
  const Json& s = run.section("score");
  const fs::path encoder_path = run.path(run.require<std::string>(s, "encoder", "score.encoder"));
  const irt::nn::EncoderNet net = irt::io::encoder_from_json(irt::io::load_artifact(encoder_path, "irt-encoder"));
  if (s.contains("fit")) {
    const Json fit = irt::io::load_artifact(run.path(s["fit"].get<std::string>()), "irt-fit");
    const std::string decoder = fit["hash"].get<std::string>();
    if (decoder != net.decoder_hash) {
      throw irt::ValidationError("encoder was trained against decoder " + net.decoder_hash + ", but the given fit is " +
                                 decoder);
    }
  }
  const irt::ResponseMatrix data = load_data(run, run.path(run.require<std::string>(s, "data", "score.data")), net.categories);
  const Eigen::MatrixXd scores = irt::nn::score(net, data);
  irt::io::write_text(run.out / "traits.csv",
                      irt::io::format_table(dim_header("person", net.output_dims(), "theta"), scores));
  say("scored " + std::to_string(data.persons()) + " persons -> " + (run.out / "traits.csv").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse multidimensional graded response models"};
  app.require_subcommand(1);
  std::string config_path, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"simulate", "simulate sparse item responses with known parameters"},
      {"factorize", "exploratory factor analysis with a loading cutoff partition"},
      {"fit", "fit the horseshoe GRM by variational inference"},
      {"waic", "WAIC of one or more fits and their comparison"},
      {"train-encoder", "train the scoring network on a fit's posterior-mean traits"},
      {"score", "score new respondents with a trained encoder"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads; 1 gives bit-exact reruns")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, std::string("output directory (default: config 'out', then $") + kOutEnv + ", then .)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const Run run = load_run(config_path, seed, threads, out);
    if (command == "simulate") return cmd_simulate(run);
    if (command == "factorize") return cmd_factorize(run);
    if (command == "fit") return cmd_fit(run);
    if (command == "waic") return cmd_waic(run);
    if (command == "train-encoder") return cmd_train_encoder(run);
    return cmd_score(run);
  } catch (const irt::NumericalError& e) {
    std::cerr << "irt " << command << ": numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const irt::ValidationError& e) {
    std::cerr << "irt " << command << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const irt::ContractError& e) {
    std::cerr << "irt " << command << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "irt " << command << ": bad configuration: " << e.what() << "\n";
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "irt " << command << ": " << e.what() << "\n";
    return kExitValidation;
  }
}

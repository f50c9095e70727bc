#pragma once

// JSON artifacts. Every artifact is an object whose last member "hash" is the
// FNV-1a 64-bit digest of the compact serialization of the other members.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "irt/advi/fit.hpp"
#include "irt/eval/waic.hpp"
#include "irt/nn/encoder.hpp"
#include "irt/sim/simulator.hpp"

namespace irt::io {

using Json = nlohmann::ordered_json;

inline constexpr int kArtifactVersion = 1;

std::uint64_t fnv1a(std::string_view bytes);
std::string hex_digest(std::uint64_t h);

/// Digest of the dimensions, category counts and codes.
std::string data_hash(const ResponseMatrix& data);

/// Recomputes and appends "hash".
void seal(Json& artifact);
/// Throws ValidationError when the stored hash differs from the content.
void verify_seal(const Json& artifact);
/// Checks the "format" tag and version, then the seal.
void check_artifact(const Json& artifact, const std::string& format);

std::string dump_artifact(const Json& artifact);
void save_artifact(const std::filesystem::path& path, const Json& artifact);
Json load_artifact(const std::filesystem::path& path, const std::string& format);

// ---- model parameters ----
Json params_to_json(const ModelParams<double>& params);
ModelParams<double> params_from_json(const Json& j);

// ---- fitted surrogate ----
struct FitArtifact {
  VariationalPosterior posterior;
  Json config;  // echo of the invoking configuration
  std::string data_hash;
  std::vector<std::string> item_names;
  bool converged = false;
  long iterations = 0;
  double final_elbo = 0.0;
  std::string hash;  // filled when loading or sealing
};

Json fit_to_json(const FitArtifact& fit);
FitArtifact fit_from_json(const Json& j);
std::string format_trace(const std::vector<TraceRow>& trace);

// ---- encoder ----
Json encoder_to_json(const nn::EncoderNet& net, const nn::TrainingReport& report, const Json& config);
nn::EncoderNet encoder_from_json(const Json& j);

// ---- WAIC ----
Json waic_to_json(const WaicReport& report);
Json comparison_to_json(const Comparison& comparison);

// ---- configuration sections; unknown keys are rejected ----
FitConfig fit_config_from_json(const Json& section, int dims, std::uint64_t seed, int threads);
nn::EncoderConfig encoder_config_from_json(const Json& section);
sim::TruthSpec truth_spec_from_json(const Json& section, std::uint64_t seed);

}  // namespace irt::io

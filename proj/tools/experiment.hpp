// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ringmaster/sim.hpp"
#include "ringmaster/timebounds.hpp"

namespace ringmaster::cli {

using Json = nlohmann::json;

struct BoundsConfig {
  std::optional<ProblemConstants> constants;  ///< derived from the problem when absent
  std::optional<std::int64_t> K;
  std::optional<double> eps;
  std::optional<std::int64_t> R;  ///< defaults to the fixed schedule's R
  double eta_scale = 1.0;
  std::optional<RateFunctions> rates;  ///< defaults to 1 / tau_i from the profile
};

struct ExperimentConfig {
  std::string name = "run";
  std::variant<QuadraticSpec, MatrixToySpec> problem = QuadraticSpec{};
  MethodKind method = MethodKind::RingmasterFixed;
  MomentumRule momentum = MuonEma{};
  NormKind norm = NormKind::Euclidean;
  SpectralBackend spectral = ExactSvd{};
  AgnosticVariant agnostic_variant = L1Zero{};
  std::vector<double> eta{0.01};
  std::vector<std::int64_t> R{1};
  std::vector<std::int64_t> B{1};
  WorkerProfile profile{ProfileKind::Similar, 8, 1.0, 0.05, {}};
  StopCondition stop = Horizon{200.0};
  std::uint64_t seed = 0;
  std::string output_dir;
  BoundsConfig bounds;
};

/// Strict: unknown keys, wrong types and out-of-range values throw InvalidInput.
[[nodiscard]] ExperimentConfig parse_config(const Json& j);
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved form, every default written out.
[[nodiscard]] Json to_json(const ExperimentConfig& cfg);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

[[nodiscard]] std::unique_ptr<Objective> make_objective(const ExperimentConfig& cfg);
[[nodiscard]] MethodConfig make_method(const ExperimentConfig& cfg, const BlockLayout& layout, double eta,
                                       std::int64_t R, std::int64_t B);

inline constexpr const char* kTraceHeader =
    "sim_time_s,event,worker,delay,accepted,iteration,loss,grad_dual_norm,rejected_total";

[[nodiscard]] std::string trace_csv(std::span<const TraceRow> rows);
[[nodiscard]] Json summary_json(const ExperimentConfig& cfg, const RunResult& result, const Objective& problem,
                                const NormSpec& norm);

/// Writes to a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// --out, then the config's output_dir, then $RINGMASTER_OUT_DIR, then ".".
[[nodiscard]] std::filesystem::path resolve_output_dir(const std::optional<std::string>& flag,
                                                       const ExperimentConfig& cfg);

struct GridCell {
  std::size_t index = 0;
  double eta = 0.0;
  std::int64_t R = 1;
  std::int64_t B = 1;
  bool ok = false;
  std::string error;
  double final_loss = 0.0;
  std::int64_t updates = 0;
  std::int64_t rejected = 0;
  std::string trace;
};

/// Each returns the process exit code.
int cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);
int cmd_grid(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err,
             std::vector<GridCell>* cells = nullptr);
int cmd_bounds(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace ringmaster::cli

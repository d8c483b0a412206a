#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ngvi/data.hpp"
#include "ngvi/gaussian.hpp"
#include "ngvi/models.hpp"

namespace ngvi {

struct DatasetSpec {
  // synthetic_logistic | synthetic_linear | libsvm | csv
  std::string source = "synthetic_logistic";
  std::string path;
  std::string label_column = "label";
  std::uint64_t synth_n = 500;
  std::uint64_t synth_d = 5;
  double synth_noise_var = 1.0;
  std::uint64_t synth_seed = 0;
  double test_fraction = 0.1;
  bool standardize = true;
  // Asserted after loading when nonzero.
  std::uint64_t expect_n = 0;
  std::uint64_t expect_d = 0;
};

struct ModelSpec {
  // logistic | mlp | linear_gaussian
  std::string kind = "logistic";
  std::uint64_t hidden_units = 64;
  double noise_var = 1.0;
};

struct OptimizerSpec {
  // cvi | vogn | bbb | sgd_nat
  std::string kind = "vogn";
  double alpha0 = 0.01;
  // constant | decay
  std::string schedule = "constant";
  double decay = 0.0;
  double learning_rate = 0.001;
  double tau = 1.0;
  std::uint64_t n_mc = 16;
  std::uint64_t minibatch = 128;
  // exact | gauss_newton
  std::string hessian = "gauss_newton";
  // full | diagonal; cvi and sgd_nat only
  std::string covariance = "diagonal";
};

struct EvalSpec {
  std::uint64_t n_mc = 100;
};

struct RunConfig {
  DatasetSpec dataset;
  ModelSpec model;
  OptimizerSpec optimizer;
  EvalSpec eval;
  std::uint64_t epochs = 10;
  std::uint64_t seed = 0;
  // Nothing is written when empty.
  std::string output_dir;

  void validate() const;
};

// Full config tree, every key present; the format accepted by parse_config.
std::string config_to_json(const RunConfig& cfg);

// JSON object with nested sections; missing keys keep their defaults. Each
// override is "dotted.key=value" and wins over the file. Unknown keys, type
// mismatches and out-of-range values raise ConfigError naming the key.
RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig parse_config(const std::filesystem::path& path,
                       const std::vector<std::string>& overrides = {});

struct TraceRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double elapsed_seconds = 0.0;
  double train_elbo = 0.0;
  double test_log2_loss = 0.0;
  double test_nll = 0.0;
  // NaN for real-valued targets.
  double test_accuracy = 0.0;
  double step_size = 0.0;
};

struct PredictiveMetrics {
  double log2_loss = 0.0;
  double nll = 0.0;
  double accuracy = 0.0;
};

// Monte-Carlo posterior predictive: each test point scores
// log (1/S) sum_s p(y | x, z_s) with one shared set of S draws z_s ~ q.
// Accuracy thresholds the averaged probability at 1/2 (NaN for real targets).
PredictiveMetrics evaluate_predictive(const LikelihoodModel& model, const NaturalParams& q,
                                      const Dataset& test, std::size_t n_mc, Rng& rng);
double predictive_log2_loss(const LikelihoodModel& model, const NaturalParams& q,
                            const Dataset& test, std::size_t n_mc, Rng& rng);

struct PreparedData {
  Dataset train;
  Dataset test;
};

// Load or generate, assert the expected shape, split and standardise.
PreparedData prepare_data(const RunConfig& cfg);
std::unique_ptr<LikelihoodModel> make_model(const ModelSpec& spec, Index input_dim);

struct RunResult {
  std::vector<TraceRecord> trace;
  // Set when an optimizer step failed (left Omega, or a non-finite model
  // evaluation); the trace holds the epochs before it.
  std::optional<std::string> failure;
  NaturalParams final_q;
  std::size_t steps = 0;
};

// Epoch 0 evaluates the initial q; each later epoch makes one pass over a
// seeded shuffle of the training set in minibatches. With a non-empty
// output_dir writes trace.csv, timing.csv and summary.json there.
RunResult run(const RunConfig& cfg);

inline constexpr const char* kTraceSchema = "ngvi-trace/1";
inline constexpr const char* kCompareSchema = "ngvi-compare/1";

// trace.csv without wall-clock time, so equal configs give equal bytes.
void write_trace_csv(const std::vector<TraceRecord>& trace, std::ostream& out);

struct NamedRun {
  std::string label;
  RunResult result;
};

// Runs every config (outputs under out_dir/<label>) and writes
// out_dir/comparison.csv with one test log2-loss column per run. Configs must
// agree on dataset and seed.
std::vector<NamedRun> compare_runs(const std::vector<RunConfig>& configs,
                                   const std::filesystem::path& out_dir);
void write_comparison_csv(const std::vector<NamedRun>& runs, std::ostream& out);

}  // namespace ngvi

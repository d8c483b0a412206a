#include "ngvi/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ngvi/errors.hpp"
#include "ngvi/gradients.hpp"
#include "ngvi/optimizers.hpp"

namespace ngvi {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DatasetSpec, source, path, label_column, synth_n, synth_d,
                                   synth_noise_var, synth_seed, test_fraction, standardize,
                                   expect_n, expect_d)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ModelSpec, kind, hidden_units, noise_var)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(OptimizerSpec, kind, alpha0, schedule, decay, learning_rate, tau,
                                   n_mc, minibatch, hessian, covariance)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalSpec, n_mc)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RunConfig, dataset, model, optimizer, eval, epochs, seed,
                                   output_dir)

namespace {

void require_one_of(const std::string& key, const std::string& value,
                    std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (value == a) return;
  }
  std::string msg = key + ": '" + value + "' is not one of";
  for (const char* a : allowed) msg += std::string(" ") + a;
  throw ConfigError(msg);
}

template <class T>
void require(bool ok, const std::string& key, const std::string& rule, T value) {
  if (ok) return;
  std::ostringstream msg;
  msg << key << " " << rule << " (got " << value << ")";
  throw ConfigError(msg.str());
}

json coerce(const json& def, const json& v, const std::string& key) {
  auto mismatch = [&](const char* expected) {
    return ConfigError(key + ": expected " + expected + ", got " + v.dump());
  };
  if (def.is_boolean()) {
    if (!v.is_boolean()) throw mismatch("a boolean");
    return v;
  }
  if (def.is_string()) {
    if (!v.is_string()) throw mismatch("a string");
    return v;
  }
  if (def.is_number_unsigned()) {
    if (v.is_number_unsigned()) return v;
    if (v.is_number_integer()) throw ConfigError(key + ": must be non-negative (got " + v.dump() + ")");
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return json(static_cast<std::uint64_t>(d));
    }
    throw mismatch("a non-negative integer");
  }
  if (def.is_number()) {
    if (!v.is_number()) throw mismatch("a number");
    return json(v.get<double>());
  }
  throw ConfigError(key + ": unsupported setting");
}

void merge(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) {
    throw ConfigError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
  }
  for (const auto& [k, v] : user.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (!base.contains(k)) throw ConfigError("unknown key '" + key + "'");
    json& slot = base[k];
    if (slot.is_object()) {
      merge(slot, v, key);
    } else {
      slot = coerce(slot, v, key);
    }
  }
}

// "a.b=value" -> {"a": {"b": value}}, reading value as JSON unless the
// setting is a string.
json override_to_json(const std::string& text, const json& defaults) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + text + "' is not of the form key=value");
  const std::string key = text.substr(0, eq);
  const std::string raw = text.substr(eq + 1);

  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);

  const json* def = &defaults;
  for (const std::string& p : parts) {
    if (!def->is_object() || !def->contains(p)) throw ConfigError("unknown key '" + key + "'");
    def = &(*def)[p];
  }
  json value;
  if (def->is_string()) {
    value = raw;
  } else {
    value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) throw ConfigError(key + ": cannot parse value '" + raw + "'");
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) value = json{{*it, value}};
  return value;
}

bool targets_are_real(const RunConfig& cfg) { return cfg.model.kind == "linear_gaussian"; }

bool diagonal_q(const OptimizerSpec& o) {
  return o.kind == "vogn" || o.kind == "bbb" || o.covariance == "diagonal";
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

Rng stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

}  // namespace

void RunConfig::validate() const {
  require_one_of("dataset.source", dataset.source,
                 {"synthetic_logistic", "synthetic_linear", "libsvm", "csv"});
  if (dataset.source == "libsvm" || dataset.source == "csv")
    require(!dataset.path.empty(), "dataset.path", "must be set for file sources", "\"\"");
  require(dataset.synth_n >= 2, "dataset.synth_n", "must be at least 2", dataset.synth_n);
  require(dataset.synth_d >= 1, "dataset.synth_d", "must be at least 1", dataset.synth_d);
  require(dataset.synth_noise_var > 0.0, "dataset.synth_noise_var", "must be positive",
          dataset.synth_noise_var);
  require(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0, "dataset.test_fraction",
          "must lie in (0, 1)", dataset.test_fraction);

  require_one_of("model.kind", model.kind, {"logistic", "mlp", "linear_gaussian"});
  require(model.hidden_units >= 1, "model.hidden_units", "must be at least 1", model.hidden_units);
  require(model.noise_var > 0.0, "model.noise_var", "must be positive", model.noise_var);

  require_one_of("optimizer.kind", optimizer.kind, {"cvi", "vogn", "bbb", "sgd_nat"});
  require(optimizer.alpha0 > 0.0 && optimizer.alpha0 <= 1.0, "optimizer.alpha0",
          "must lie in (0, 1]", optimizer.alpha0);
  require_one_of("optimizer.schedule", optimizer.schedule, {"constant", "decay"});
  require(optimizer.decay >= 0.0, "optimizer.decay", "must be non-negative", optimizer.decay);
  require(optimizer.learning_rate > 0.0, "optimizer.learning_rate", "must be positive",
          optimizer.learning_rate);
  require(optimizer.tau > 0.0, "optimizer.tau", "must be positive", optimizer.tau);
  require(optimizer.n_mc >= 1, "optimizer.n_mc", "must be at least 1", optimizer.n_mc);
  require(optimizer.minibatch >= 1, "optimizer.minibatch", "must be at least 1", optimizer.minibatch);
  require_one_of("optimizer.hessian", optimizer.hessian, {"exact", "gauss_newton"});
  require_one_of("optimizer.covariance", optimizer.covariance, {"full", "diagonal"});
  require(eval.n_mc >= 1, "eval.n_mc", "must be at least 1", eval.n_mc);

  if (model.kind == "mlp" && optimizer.hessian == "exact")
    throw ConfigError("optimizer.hessian: the mlp model has no exact Hessian; use gauss_newton");
  if (dataset.source == "synthetic_linear" && model.kind != "linear_gaussian")
    throw ConfigError("model.kind: synthetic_linear targets need the linear_gaussian model");
  if (dataset.source == "synthetic_logistic" && model.kind == "linear_gaussian")
    throw ConfigError("model.kind: synthetic_logistic targets are binary");
}

std::string config_to_json(const RunConfig& cfg) { return json(cfg).dump(2); }

RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides) {
  json merged = json(RunConfig{});
  const json defaults = merged;
  json user = json::parse(text, nullptr, false, true);
  if (user.is_discarded()) throw ConfigError("config is not valid JSON");
  merge(merged, user, "");
  for (const std::string& o : overrides) merge(merged, override_to_json(o, defaults), "");
  RunConfig cfg = merged.get<RunConfig>();
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str(), overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

PredictiveMetrics evaluate_predictive(const LikelihoodModel& model, const NaturalParams& q,
                                      const Dataset& test, std::size_t n_mc, Rng& rng) {
  if (n_mc == 0) throw ContractError("evaluate_predictive: n_mc must be positive");
  if (test.examples.empty()) throw ContractError("evaluate_predictive: empty test set");
  const std::vector<Vector> zs = sample(q, n_mc, rng);
  const double log_s = std::log(static_cast<double>(n_mc));
  const bool binary = model.is_binary();
  std::vector<double> lp(n_mc);
  double total = 0.0;
  std::size_t correct = 0;
  for (const Example& ex : test.examples) {
    for (std::size_t s = 0; s < n_mc; ++s) lp[s] = model.log_lik(zs[s], ex);
    const double mx = *std::max_element(lp.begin(), lp.end());
    double acc = 0.0;
    for (double v : lp) acc += std::exp(v - mx);
    total += mx + std::log(acc) - log_s;
    if (binary) {
      double p = 0.0;
      for (const Vector& z : zs) p += model.predict_prob(z, ex.features);
      p /= static_cast<double>(n_mc);
      if ((p >= 0.5) == (ex.target > 0.5)) ++correct;
    }
  }
  const double n = static_cast<double>(test.size());
  PredictiveMetrics m;
  m.nll = -total / n;
  m.log2_loss = m.nll / std::log(2.0);
  m.accuracy = binary ? static_cast<double>(correct) / n : std::numeric_limits<double>::quiet_NaN();
  return m;
}

double predictive_log2_loss(const LikelihoodModel& model, const NaturalParams& q,
                            const Dataset& test, std::size_t n_mc, Rng& rng) {
  return evaluate_predictive(model, q, test, n_mc, rng).log2_loss;
}

PreparedData prepare_data(const RunConfig& cfg) {
  const DatasetSpec& d = cfg.dataset;
  const TargetKind kind = targets_are_real(cfg) ? TargetKind::real : TargetKind::binary;
  Dataset ds;
  if (d.source == "synthetic_logistic") {
    ds = synth_logistic(d.synth_n, static_cast<Index>(d.synth_d), d.synth_seed).data;
  } else if (d.source == "synthetic_linear") {
    ds = synth_linear_gaussian(d.synth_n, static_cast<Index>(d.synth_d), d.synth_noise_var,
                               d.synth_seed)
             .data;
  } else if (d.source == "libsvm") {
    ds = load_libsvm(d.path, kind);
  } else {
    ds = load_csv(d.path, d.label_column, kind);
  }
  if ((d.expect_n != 0 && ds.size() != d.expect_n) ||
      (d.expect_d != 0 && static_cast<std::uint64_t>(ds.feature_dim) != d.expect_d)) {
    std::ostringstream msg;
    msg << ds.name << ": loaded N=" << ds.size() << ", D=" << ds.feature_dim << ", expected N="
        << d.expect_n << ", D=" << d.expect_d;
    throw DataError(msg.str());
  }
  Split parts = split(ds, SplitSpec{d.test_fraction, cfg.seed});
  if (!d.standardize) return {std::move(parts.train), std::move(parts.test)};
  Standardization st = standardize(parts.train, {parts.test});
  return {std::move(st.datasets[0]), std::move(st.datasets[1])};
}

std::unique_ptr<LikelihoodModel> make_model(const ModelSpec& spec, Index input_dim) {
  if (spec.kind == "logistic") return std::make_unique<LogisticModel>(input_dim);
  if (spec.kind == "linear_gaussian")
    return std::make_unique<LinearGaussianModel>(input_dim, spec.noise_var);
  if (spec.kind == "mlp")
    return std::make_unique<MlpModel>(
        MlpArchitecture{input_dim, static_cast<Index>(spec.hidden_units)});
  throw ConfigError("model.kind: unknown model '" + spec.kind + "'");
}

void write_trace_csv(const std::vector<TraceRecord>& trace, std::ostream& out) {
  out << "# schema: " << kTraceSchema << '\n';
  out << "epoch,step,train_elbo,test_log2_loss,test_nll,test_accuracy,step_size\n";
  for (const TraceRecord& r : trace) {
    out << r.epoch << ',' << r.step << ',' << fmt(r.train_elbo) << ',' << fmt(r.test_log2_loss)
        << ',' << fmt(r.test_nll) << ',' << fmt(r.test_accuracy) << ',' << fmt(r.step_size) << '\n';
  }
}

RunResult run(const RunConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const PreparedData data = prepare_data(cfg);
  const std::unique_ptr<LikelihoodModel> model = make_model(cfg.model, data.train.feature_dim);
  const OptimizerSpec& opt = cfg.optimizer;
  const std::string& kind = opt.kind;
  const std::size_t n_train = data.train.size();
  const CovarianceMode mode = diagonal_q(opt) ? CovarianceMode::diagonal : CovarianceMode::full;
  const NaturalParams prior = NaturalParams::isotropic_prior(model->dim(), opt.tau, mode);

  EstimatorConfig est;
  est.n_mc = opt.n_mc;
  est.hessian = opt.hessian == "exact" ? HessianMode::exact : HessianMode::gauss_newton;
  const Schedule schedule = opt.schedule == "decay" ? Schedule::decay(opt.alpha0, opt.decay)
                                                    : Schedule::constant(opt.alpha0);

  CviState cvi{prior, 0, 0.0};
  std::optional<VognState> vogn;
  if (kind == "vogn") vogn = VognState::from_natural(prior);
  BbbParams bbb{Vector::Zero(model->dim()),
                Vector::Constant(model->dim(), inverse_softplus(1.0 / std::sqrt(opt.tau)))};
  AdamState adam = AdamState::zeros(2 * model->dim(), AdamConfig{opt.learning_rate});

  auto current_q = [&]() -> NaturalParams {
    if (kind == "vogn") return vogn->to_natural();
    if (kind == "bbb") return bbb_to_natural(bbb.mean, bbb.rho);
    return cvi.lam;
  };

  RunResult result{{}, std::nullopt, prior, 0};
  double step_size = kind == "bbb" ? opt.learning_rate : schedule.alpha(0);

  auto evaluate = [&](std::size_t epoch) {
    const NaturalParams q = current_q();
    Rng rng = stream(cfg.seed, 3, epoch);
    TraceRecord r;
    r.epoch = epoch;
    r.step = result.steps;
    r.train_elbo = elbo_value_mc(*model, q, prior, data.train.examples, cfg.eval.n_mc, rng);
    const PredictiveMetrics pm = evaluate_predictive(*model, q, data.test, cfg.eval.n_mc, rng);
    r.test_log2_loss = pm.log2_loss;
    r.test_nll = pm.nll;
    r.test_accuracy = pm.accuracy;
    r.step_size = step_size;
    r.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trace.push_back(r);
  };

  evaluate(0);
  Rng shuffle_rng = stream(cfg.seed, 1);
  Rng step_rng = stream(cfg.seed, 2);
  std::vector<std::size_t> order(n_train);
  std::vector<Example> batch;
  const std::size_t bsize = std::min<std::size_t>(opt.minibatch, n_train);

  // Leaving Omega and non-finite model evaluations both end the run.
  auto fail = [&](std::size_t epoch, const std::exception& e) {
    std::ostringstream msg;
    msg << "epoch " << epoch << ", step " << result.steps << ": " << e.what();
    result.failure = msg.str();
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !result.failure; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t begin = 0; begin < n_train; begin += bsize) {
      const std::size_t end = std::min(begin + bsize, n_train);
      batch.clear();
      for (std::size_t k = begin; k < end; ++k) batch.push_back(data.train.examples[order[k]]);
      const double alpha = schedule.alpha(result.steps);
      try {
        if (kind == "cvi") {
          const FlatVec lp = likelihood_natural_gradient(*model, cvi.lam, batch, n_train, est, step_rng);
          cvi = cvi_step(cvi, prior, lp, alpha);
          step_size = cvi.last_alpha;
        } else if (kind == "sgd_nat") {
          const FlatVec g = natural_gradient_elbo(*model, cvi.lam, prior, batch, n_train, est, step_rng);
          cvi = sgd_nat_step(cvi, g, alpha);
          step_size = cvi.last_alpha;
        } else if (kind == "vogn") {
          const ExpectedGradHess e = expected_grad_hess(*model, vogn->to_natural(), batch, est, step_rng);
          vogn = vogn_step(*vogn, opt.tau, e.grad, e.hess.diag(), n_train, batch.size(), alpha);
          step_size = alpha;
        } else {
          const BbbGradient g =
              bbb_gradient(*model, bbb.mean, bbb.rho, prior, batch, n_train, est, step_rng);
          std::tie(bbb, adam) = bbb_adam_step(bbb, g, adam);
        }
      } catch (const StepFailure& e) {
        fail(epoch, e);
        break;
      } catch (const EvaluationError& e) {
        fail(epoch, e);
        break;
      }
      ++result.steps;
    }
    if (!result.failure) evaluate(epoch);
  }
  result.final_q = current_q();

  if (!cfg.output_dir.empty()) {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    std::ofstream trace(dir / "trace.csv");
    write_trace_csv(result.trace, trace);
    std::ofstream timing(dir / "timing.csv");
    timing << "epoch,elapsed_seconds\n";
    for (const TraceRecord& r : result.trace) timing << r.epoch << ',' << fmt(r.elapsed_seconds) << '\n';

    json summary;
    summary["schema"] = "ngvi-summary/1";
    summary["config"] = json(cfg);
    summary["status"] = result.failure ? "step_failure" : "ok";
    if (result.failure) summary["failure"] = *result.failure;
    summary["epochs_completed"] = result.trace.back().epoch;
    summary["steps"] = result.steps;
    summary["data"] = {{"train_size", data.train.size()},
                       {"test_size", data.test.size()},
                       {"feature_dim", data.train.feature_dim},
                       {"param_dim", model->dim()}};
    const TraceRecord& last = result.trace.back();
    summary["final"] = {{"train_elbo", last.train_elbo},
                        {"test_log2_loss", last.test_log2_loss},
                        {"test_nll", last.test_nll},
                        {"test_accuracy", last.test_accuracy}};
    std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  }
  return result;
}

void write_comparison_csv(const std::vector<NamedRun>& runs, std::ostream& out) {
  std::size_t rows = 0;
  for (const NamedRun& r : runs) rows = std::max(rows, r.result.trace.size());
  out << "# schema: " << kCompareSchema << '\n';
  out << "# metric: test_log2_loss\n";
  std::vector<std::string> padded;
  for (const NamedRun& r : runs) {
    if (r.result.trace.size() < rows) padded.push_back(r.label);
  }
  if (!padded.empty()) {
    out << "# padded:";
    for (const std::string& p : padded) out << ' ' << p;
    out << '\n';
  }
  out << "epoch";
  for (const NamedRun& r : runs) out << ',' << r.label;
  out << '\n';
  for (std::size_t row = 0; row < rows; ++row) {
    out << row;
    for (const NamedRun& r : runs) {
      out << ',';
      if (row < r.result.trace.size()) out << fmt(r.result.trace[row].test_log2_loss);
    }
    out << '\n';
  }
}

std::vector<NamedRun> compare_runs(const std::vector<RunConfig>& configs,
                                   const std::filesystem::path& out_dir) {
  if (configs.empty()) throw ContractError("compare_runs: no configs");
  const json dataset0 = json(configs.front().dataset);
  for (std::size_t k = 1; k < configs.size(); ++k) {
    if (json(configs[k].dataset) != dataset0)
      throw ContractError("compare_runs: config " + std::to_string(k) + " uses a different dataset");
    if (configs[k].seed != configs.front().seed)
      throw ContractError("compare_runs: config " + std::to_string(k) + " uses a different seed");
  }
  std::vector<NamedRun> runs;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    RunConfig cfg = configs[k];
    const std::string label = "run" + std::to_string(k) + "_" + cfg.optimizer.kind;
    cfg.output_dir = (out_dir / label).string();
    runs.push_back({label, run(cfg)});
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir / "comparison.csv");
  write_comparison_csv(runs, out);
  return runs;
}

}  // namespace ngvi

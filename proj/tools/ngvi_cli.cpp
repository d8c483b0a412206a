#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ngvi/errors.hpp"
#include "ngvi/harness.hpp"

namespace {

// Exit codes by failure category.
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitStep = 4;

void print_final(const std::string& label, const ngvi::RunResult& r) {
  const ngvi::TraceRecord& last = r.trace.back();
  std::cout << label << ": epochs=" << last.epoch << " steps=" << r.steps
            << " test_log2_loss=" << last.test_log2_loss << " test_accuracy=" << last.test_accuracy
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Natural-gradient variational inference runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  CLI::App* run_cmd = app.add_subcommand("run", "Run one experiment from a config file");
  run_cmd->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--set", overrides, "Override a setting, key=value with dotted keys");
  bool print_config = false;
  run_cmd->add_flag("--print-config", print_config, "Echo the resolved config and exit");

  std::string config_list;
  std::string out_dir;
  CLI::App* cmp_cmd = app.add_subcommand("compare", "Run several configs and align their traces");
  cmp_cmd->add_option("--configs", config_list, "Comma-separated config files")->required();
  cmp_cmd->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) {
      const ngvi::RunConfig cfg = ngvi::parse_config(config_path, overrides);
      if (print_config) {
        std::cout << ngvi::config_to_json(cfg) << '\n';
        return 0;
      }
      const ngvi::RunResult r = ngvi::run(cfg);
      print_final("run", r);
      if (r.failure) {
        std::cerr << "step failure: " << *r.failure << '\n';
        return kExitStep;
      }
      return 0;
    }

    std::vector<ngvi::RunConfig> configs;
    std::stringstream ss(config_list);
    for (std::string path; std::getline(ss, path, ',');) {
      if (!path.empty()) configs.push_back(ngvi::parse_config(path));
    }
    const std::vector<ngvi::NamedRun> runs = ngvi::compare_runs(configs, out_dir);
    bool failed = false;
    for (const ngvi::NamedRun& r : runs) {
      print_final(r.label, r.result);
      if (r.result.failure) {
        std::cerr << r.label << " step failure: " << *r.result.failure << '\n';
        failed = true;
      }
    }
    return failed ? kExitStep : 0;
  } catch (const ngvi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ngvi::ContractError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ngvi::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ngvi::StepFailure& e) {
    std::cerr << "step failure: " << e.what() << '\n';
    return kExitStep;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ngvi/models.hpp"

namespace ngvi {

struct Dataset {
  std::string name;
  Index feature_dim = 0;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
};

enum class TargetKind {
  // Two-valued labels remapped to {0, 1}: {0,1} as is, {-1,+1} and {1,2} shifted.
  binary,
  // Real-valued targets kept verbatim.
  real,
};

// LIBSVM sparse text: "<label> <index>:<value> ...", 1-based indices. Missing
// indices are 0; rows with a smaller max index are zero-padded.
Dataset load_libsvm(const std::filesystem::path& path, TargetKind kind = TargetKind::binary);
Dataset parse_libsvm(std::istream& in, const std::string& name,
                     TargetKind kind = TargetKind::binary);
void write_libsvm(const Dataset& ds, std::ostream& out);

// Numeric CSV with a header row; `label_column` names the target column.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 TargetKind kind = TargetKind::binary);
Dataset parse_csv(std::istream& in, const std::string& name, const std::string& label_column,
                  TargetKind kind = TargetKind::binary);
void write_csv(const Dataset& ds, std::ostream& out, const std::string& label_column = "label");

struct Standardization {
  std::vector<Dataset> datasets;  // train first, then `others` in order
  Vector means;
  Vector stds;  // population std; 1 for constant features
};

// Zero-mean unit-variance per feature using train statistics only.
Standardization standardize(const Dataset& train, const std::vector<Dataset>& others);

struct SplitSpec {
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct Split {
  Dataset train;
  Dataset test;
};

// Seeded shuffle, then the first round(N * fraction) examples go to test.
Split split(const Dataset& ds, const SplitSpec& spec);

struct SyntheticLogistic {
  Dataset data;
  Vector true_z;
};

// z* ~ N(0, I), x ~ N(0, I), y ~ Bernoulli(sigmoid(z*^T x)).
SyntheticLogistic synth_logistic(std::size_t n, Index d, std::uint64_t seed);

struct SyntheticLinear {
  Dataset data;
  Vector true_z;
};

// z* ~ N(0, I), x ~ N(0, I), y = z*^T x + N(0, noise_var).
SyntheticLinear synth_linear_gaussian(std::size_t n, Index d, double noise_var, std::uint64_t seed);

}  // namespace ngvi

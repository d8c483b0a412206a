#include "ngvi/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>

#include "ngvi/errors.hpp"

namespace ngvi {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_index(std::string_view s, long& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

void remap_binary_labels(Dataset& ds) {
  std::set<double> labels;
  for (const Example& ex : ds.examples) labels.insert(ex.target);
  auto within = [&](std::initializer_list<double> allowed) {
    return std::all_of(labels.begin(), labels.end(), [&](double l) {
      return std::find(allowed.begin(), allowed.end(), l) != allowed.end();
    });
  };
  if (within({0.0, 1.0})) return;
  double shift = 0.0, scale = 1.0;
  if (within({-1.0, 1.0})) {
    shift = 1.0;
    scale = 0.5;
  } else if (within({1.0, 2.0})) {
    shift = -1.0;
  } else {
    std::ostringstream msg;
    msg << ds.name << ": labels are not binary (";
    for (double l : labels) msg << ' ' << l;
    msg << " )";
    throw DataError(msg.str());
  }
  for (Example& ex : ds.examples) ex.target = (ex.target + shift) * scale;
}

std::string stem_of(const std::filesystem::path& path) { return path.stem().string(); }

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

void write_number(std::ostream& out, double v) {
  out << std::setprecision(17) << v;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, const std::string& name, TargetKind kind) {
  Dataset ds;
  ds.name = name;
  std::vector<std::vector<std::pair<long, double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  long max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    std::istringstream tokens{std::string(view)};
    std::string tok;
    tokens >> tok;
    double label = 0.0;
    if (!parse_double(tok, label)) throw ParseError(name + ": bad label '" + tok + "'", line_no);
    std::vector<std::pair<long, double>> cells;
    std::size_t col = 1;
    while (tokens >> tok) {
      ++col;
      const auto colon = tok.find(':');
      long idx = 0;
      double value = 0.0;
      if (colon == std::string::npos || !parse_index(std::string_view(tok).substr(0, colon), idx) ||
          idx < 1 || !parse_double(std::string_view(tok).substr(colon + 1), value)) {
        throw ParseError(name + ": malformed feature '" + tok + "'", line_no, col);
      }
      cells.emplace_back(idx, value);
      max_index = std::max(max_index, idx);
    }
    rows.push_back(std::move(cells));
    ds.examples.push_back({Vector(), label});
  }
  ds.feature_dim = max_index;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Vector x = Vector::Zero(max_index);
    for (const auto& [idx, value] : rows[r]) x(idx - 1) = value;
    ds.examples[r].features = std::move(x);
  }
  if (kind == TargetKind::binary) remap_binary_labels(ds);
  return ds;
}

Dataset load_libsvm(const std::filesystem::path& path, TargetKind kind) {
  std::ifstream in = open_or_throw(path);
  return parse_libsvm(in, stem_of(path), kind);
}

void write_libsvm(const Dataset& ds, std::ostream& out) {
  for (const Example& ex : ds.examples) {
    write_number(out, ex.target);
    for (Index j = 0; j < ex.features.size(); ++j) {
      // The last index is always written so the feature dimension survives a reload.
      if (ex.features(j) == 0.0 && j + 1 != ex.features.size()) continue;
      out << ' ' << (j + 1) << ':';
      write_number(out, ex.features(j));
    }
    out << '\n';
  }
}

Dataset parse_csv(std::istream& in, const std::string& name, const std::string& label_column,
                  TargetKind kind) {
  auto split_cells = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.emplace_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split_cells(line);
  }
  if (header.empty()) throw ParseError(name + ": missing header row", line_no);
  const auto it = std::find(header.begin(), header.end(), label_column);
  if (it == header.end()) throw ParseError(name + ": no column named '" + label_column + "'", line_no);
  const std::size_t label_idx = static_cast<std::size_t>(it - header.begin());

  Dataset ds;
  ds.name = name;
  ds.feature_dim = static_cast<Index>(header.size()) - 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_cells(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << name << ": row has " << cells.size() << " cells, header has " << header.size();
      throw ParseError(msg.str(), line_no);
    }
    Example ex{Vector(ds.feature_dim), 0.0};
    Index f = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw ParseError(name + ": non-numeric cell '" + cells[c] + "'", line_no, c + 1);
      }
      if (c == label_idx) {
        ex.target = v;
      } else {
        ex.features(f++) = v;
      }
    }
    ds.examples.push_back(std::move(ex));
  }
  if (kind == TargetKind::binary) remap_binary_labels(ds);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 TargetKind kind) {
  std::ifstream in = open_or_throw(path);
  return parse_csv(in, stem_of(path), label_column, kind);
}

void write_csv(const Dataset& ds, std::ostream& out, const std::string& label_column) {
  for (Index j = 0; j < ds.feature_dim; ++j) out << 'x' << (j + 1) << ',';
  out << label_column << '\n';
  for (const Example& ex : ds.examples) {
    for (Index j = 0; j < ex.features.size(); ++j) {
      write_number(out, ex.features(j));
      out << ',';
    }
    write_number(out, ex.target);
    out << '\n';
  }
}

Standardization standardize(const Dataset& train, const std::vector<Dataset>& others) {
  if (train.examples.empty()) throw ContractError("standardize: training set is empty");
  const Index d = train.feature_dim;
  const double n = static_cast<double>(train.size());
  Vector means = Vector::Zero(d);
  Vector lo = Vector::Constant(d, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (const Example& ex : train.examples) {
    means += ex.features;
    lo = lo.cwiseMin(ex.features);
    hi = hi.cwiseMax(ex.features);
  }
  means /= n;
  Vector stds = Vector::Zero(d);
  for (const Example& ex : train.examples) stds += (ex.features - means).cwiseAbs2();
  stds = (stds / n).cwiseSqrt();
  for (Index j = 0; j < d; ++j) {
    if (lo(j) == hi(j) || !(stds(j) > 0.0)) stds(j) = 1.0;
  }

  auto transform = [&](const Dataset& ds) {
    if (ds.feature_dim != d) throw ContractError("standardize: feature dimension mismatch");
    Dataset out = ds;
    for (Example& ex : out.examples) ex.features = (ex.features - means).cwiseQuotient(stds);
    return out;
  };

  Standardization result;
  result.datasets.push_back(transform(train));
  for (const Dataset& o : others) result.datasets.push_back(transform(o));
  // Constant training features map to exactly zero.
  for (Index j = 0; j < d; ++j) {
    if (lo(j) == hi(j)) {
      for (Example& ex : result.datasets.front().examples) ex.features(j) = 0.0;
    }
  }
  result.means = std::move(means);
  result.stds = std::move(stds);
  return result;
}

Split split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw ContractError("split: test_fraction must lie in (0, 1)");
  const std::size_t n = ds.size();
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.test_fraction));
  if (n_test == 0 || n_test >= n) {
    std::ostringstream msg;
    msg << "split: fraction " << spec.test_fraction << " of " << n << " examples leaves an empty side";
    throw ContractError(msg.str());
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  Split out{{ds.name + "-train", ds.feature_dim, {}}, {ds.name + "-test", ds.feature_dim, {}}};
  for (std::size_t k = 0; k < n; ++k) {
    (k < n_test ? out.test : out.train).examples.push_back(ds.examples[order[k]]);
  }
  return out;
}

SyntheticLogistic synth_logistic(std::size_t n, Index d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ContractError("synth_logistic: n and d must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector z(d);
  for (Index j = 0; j < d; ++j) z(j) = normal(rng);
  SyntheticLogistic out{{"synth_logistic", d, {}}, z};
  out.data.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(d);
    for (Index j = 0; j < d; ++j) x(j) = normal(rng);
    const double y = unif(rng) < sigmoid(z.dot(x)) ? 1.0 : 0.0;
    out.data.examples.push_back({std::move(x), y});
  }
  return out;
}

SyntheticLinear synth_linear_gaussian(std::size_t n, Index d, double noise_var, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ContractError("synth_linear_gaussian: n and d must be positive");
  if (!(noise_var > 0.0)) throw ContractError("synth_linear_gaussian: noise_var must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(d);
  for (Index j = 0; j < d; ++j) z(j) = normal(rng);
  SyntheticLinear out{{"synth_linear_gaussian", d, {}}, z};
  const double sd = std::sqrt(noise_var);
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(d);
    for (Index j = 0; j < d; ++j) x(j) = normal(rng);
    const double y = z.dot(x) + sd * normal(rng);
    out.data.examples.push_back({std::move(x), y});
  }
  return out;
}

}  // namespace ngvi

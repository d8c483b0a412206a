#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ngvi/gaussian.hpp"
#include "ngvi/gradients.hpp"

namespace ngvi {

// Per-example local natural parameters ("sites"). The global approximation is
// q(z) ∝ prod_i exp(phi(z)^T site_i) p(z), i.e. lambda = eta0 + sum_i site_i.
//
// A single-example selection stores N * g~_i(lambda) at its stationary point; a
// minibatch B stores (N / |B|) * g~_i, so full-batch sweeps store g~_i itself.
struct SiteParams {
  std::vector<FlatVec> sites;
  NaturalParams prior;
  std::size_t step_count = 0;
  double last_alpha = 0.0;

  static SiteParams zeros(const NaturalParams& prior, std::size_t n);
  FlatLayout layout() const { return prior.layout(); }
};

struct Reconstruction {
  FlatVec flat;
  // Empty when eta0 + sum_i site_i is outside Omega; `diagnostic` says why.
  std::optional<NaturalParams> natural;
  std::string diagnostic;
};

Reconstruction reconstruct(const SiteParams& sp);

// Site recursion for one selected example i:
//
//   site_j <- (1 - alpha) site_j + alpha [j == i] N g~_i      for all j
//
// which keeps reconstruct(sp) equal to the CVI iterate. Rejected and retried
// with alpha halved while the reconstruction leaves Omega.
SiteParams site_update(const SiteParams& sp, std::size_t i, const FlatVec& g_tilde,
                       std::size_t n_total, double alpha);

// Minibatch form: every selected index receives (N / |B|) g~_i.
SiteParams site_update_batch(const SiteParams& sp, std::span<const std::size_t> indices,
                             std::span<const FlatVec> g_tildes, std::size_t n_total, double alpha);

// Per-example g~_i(lambda) (plain-packed mu-gradients) at lambda = reconstruct(sp).
std::vector<FlatVec> site_gradients(const SiteParams& sp, const LikelihoodModel& model,
                                    std::span<const Example> data, const EstimatorConfig& cfg,
                                    Rng& rng);

// || lambda - eta0 - sum_i g~_i(lambda) ||_inf at lambda = reconstruct(sp), the
// sum running over all of `data`.
double fixed_point_residual(const SiteParams& sp, const LikelihoodModel& model,
                            std::span<const Example> data, const EstimatorConfig& cfg, Rng& rng);

// CSV: index,site_norm,first_order_norm,second_order_norm
void write_site_dump(const SiteParams& sp, std::ostream& os);

}  // namespace ngvi

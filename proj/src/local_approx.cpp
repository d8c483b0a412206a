#include "ngvi/local_approx.hpp"

#include <ostream>
#include <sstream>

#include "ngvi/errors.hpp"
#include "ngvi/optimizers.hpp"

namespace ngvi {

SiteParams SiteParams::zeros(const NaturalParams& prior, std::size_t n) {
  return {std::vector<FlatVec>(n, FlatVec::Zero(prior.layout().size())), prior, 0, 0.0};
}

Reconstruction reconstruct(const SiteParams& sp) {
  const FlatLayout layout = sp.layout();
  FlatVec flat = pack(sp.prior);
  for (std::size_t i = 0; i < sp.sites.size(); ++i) {
    if (sp.sites[i].size() != layout.size()) {
      std::ostringstream msg;
      msg << "reconstruct: site " << i << " has length " << sp.sites[i].size() << ", expected "
          << layout.size();
      throw ContractError(msg.str());
    }
    flat += sp.sites[i];
  }
  Reconstruction out{flat, std::nullopt, {}};
  Vector l1;
  SymBlock l2 = SymBlock::zero(0, layout.mode);
  unpack(flat, layout, SymPacking::plain, l1, l2);
  if (NaturalParams::in_domain(l1, l2)) {
    out.natural = NaturalParams::make(std::move(l1), std::move(l2));
  } else {
    out.diagnostic = "eta0 + sum of sites is outside Omega (-2*lambda2 not positive definite)";
  }
  return out;
}

namespace {

SiteParams apply_site_recursion(const SiteParams& sp, std::span<const std::size_t> indices,
                                std::span<const FlatVec> g_tildes, double scale, double alpha) {
  const FlatLayout layout = sp.layout();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= sp.sites.size()) throw ContractError("site_update: index out of range");
    if (g_tildes[k].size() != layout.size())
      throw ContractError("site_update: g_tilde has the wrong length");
  }
  double a = alpha;
  for (int attempt = 0; attempt <= kMaxHalvings; ++attempt, a *= 0.5) {
    SiteParams next = sp;
    for (FlatVec& s : next.sites) s *= (1.0 - a);
    for (std::size_t k = 0; k < indices.size(); ++k) next.sites[indices[k]] += (a * scale) * g_tildes[k];
    if (reconstruct(next).natural) {
      next.step_count = sp.step_count + 1;
      next.last_alpha = a;
      return next;
    }
  }
  std::ostringstream msg;
  msg << "site_update: reconstruction left Omega after " << kMaxHalvings << " halvings";
  SiteParams last = sp;
  for (FlatVec& s : last.sites) s *= (1.0 - a);
  throw StepFailure(msg.str(), reconstruct(last).flat.tail(layout.second_order_size()));
}

}  // namespace

SiteParams site_update(const SiteParams& sp, std::size_t i, const FlatVec& g_tilde,
                       std::size_t n_total, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractError("site_update: alpha outside (0, 1]");
  const std::size_t idx[] = {i};
  return apply_site_recursion(sp, idx, std::span<const FlatVec>(&g_tilde, 1),
                              static_cast<double>(n_total), alpha);
}

SiteParams site_update_batch(const SiteParams& sp, std::span<const std::size_t> indices,
                             std::span<const FlatVec> g_tildes, std::size_t n_total, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractError("site_update: alpha outside (0, 1]");
  if (indices.size() != g_tildes.size() || indices.empty())
    throw ContractError("site_update_batch: need one g_tilde per selected index");
  const double scale = static_cast<double>(n_total) / static_cast<double>(indices.size());
  return apply_site_recursion(sp, indices, g_tildes, scale, alpha);
}

std::vector<FlatVec> site_gradients(const SiteParams& sp, const LikelihoodModel& model,
                                    std::span<const Example> data, const EstimatorConfig& cfg,
                                    Rng& rng) {
  const Reconstruction r = reconstruct(sp);
  if (!r.natural) throw DomainError("site_gradients: " + r.diagnostic);
  std::vector<FlatVec> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back(estimate_mu_gradient(model, *r.natural, data.subspan(i, 1), cfg, rng).flat());
  }
  return out;
}

double fixed_point_residual(const SiteParams& sp, const LikelihoodModel& model,
                            std::span<const Example> data, const EstimatorConfig& cfg, Rng& rng) {
  const Reconstruction r = reconstruct(sp);
  if (!r.natural) throw DomainError("fixed_point_residual: " + r.diagnostic);
  FlatVec residual = r.flat - pack(sp.prior);
  for (const FlatVec& g : site_gradients(sp, model, data, cfg, rng)) residual -= g;
  return residual.size() == 0 ? 0.0 : residual.cwiseAbs().maxCoeff();
}

void write_site_dump(const SiteParams& sp, std::ostream& os) {
  const FlatLayout layout = sp.layout();
  os << "index,site_norm,first_order_norm,second_order_norm\n";
  for (std::size_t i = 0; i < sp.sites.size(); ++i) {
    const FlatVec& s = sp.sites[i];
    os << i << ',' << s.norm() << ',' << s.head(layout.dim).norm() << ','
       << s.tail(layout.second_order_size()).norm() << '\n';
  }
}

}  // namespace ngvi

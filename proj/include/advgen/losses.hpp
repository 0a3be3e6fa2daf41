#pragma once

#include <stdexcept>
#include <vector>

#include "advgen/graph.hpp"
#include "advgen/nn.hpp"
#include "advgen/tensor.hpp"

namespace advgen {

/// Mean cross-entropy of the target classifier on a g-space batch; the
/// quantity the generator maximizes through the -alpha term.
inline Var adv_loss_node(Graph& g, const DenseNet& target_net, Var x_gspace,
                         const std::vector<int>& labels) {
  auto [bound, logits] = forward_bound(g, target_net, x_gspace, false);
  (void)bound;
  return cross_entropy(logits, labels);
}

inline double adv_loss(const DenseNet& target_net, const Tensor& x_gspace,
                       const std::vector<int>& labels) {
  Graph g;
  return g.value(adv_loss_node(g, target_net, g.constant(x_gspace), labels)).item();
}

/// Mean L2 norm of per-row perturbations, in transformed space.
inline Var pert_loss_node(Graph& g, Var delta) {
  (void)g;
  return mean(sqrt(sum_rows(mul(delta, delta))));
}

inline double pert_loss(const Tensor& delta) {
  Graph g;
  return g.value(pert_loss_node(g, g.constant(delta))).item();
}

/// Composed objective: L_DGM - alpha * L_adv + beta * L_pert.
inline double total_loss(double l_dgm, double l_adv, double l_pert, double alpha,
                         double beta) {
  return l_dgm - alpha * l_adv + beta * l_pert;
}

/// Graph form with the degenerate-config guard: zero coefficients skip the
/// corresponding term entirely so the tape matches the plain backbone.
inline Var total_loss_node(Graph& g, Var l_dgm, const Var* l_adv, const Var* l_pert,
                           double alpha, double beta) {
  (void)g;
  Var total = l_dgm;
  if (alpha != 0.0 && l_adv) total = sub(total, mul_scalar(*l_adv, alpha));
  if (beta != 0.0 && l_pert) total = add(total, mul_scalar(*l_pert, beta));
  return total;
}

struct WganLosses {
  double critic_loss = 0.0;           // mean critic(fake) - mean critic(real)
  double generator_dgm_loss = 0.0;    // -mean critic(fake)
};

/// Wasserstein losses at current parameters (no gradients; training builds
/// its own tapes). The critic minimizes critic_loss, i.e. maximizes
/// mean critic(real) - mean critic(fake); Lipschitz control is by weight
/// clipping after each critic step.
inline WganLosses wgan_losses(const DenseNet& critic, const Tensor& real,
                              const Tensor& fake) {
  if (real.cols() != fake.cols())
    throw std::invalid_argument("wgan_losses: real/fake width mismatch");
  Tensor cr = predict(critic, real);
  Tensor cf = predict(critic, fake);
  double mr = 0.0, mf = 0.0;
  for (double v : cr.data) mr += v;
  for (double v : cf.data) mf += v;
  mr /= static_cast<double>(cr.size());
  mf /= static_cast<double>(cf.size());
  return {mf - mr, -mf};
}

/// KL(q || N(0, I)) for a diagonal Gaussian given as (mu, log sigma^2):
/// 0.5 * mean over rows of sum(mu^2 + sigma^2 - 1 - log sigma^2).
inline Var kl_gaussian_node(Graph& g, Var mu, Var logvar) {
  (void)g;
  Var term = sub(add(mul(mu, mu), exp(logvar)), add_scalar(logvar, 1.0));
  return mul_scalar(mean(sum_rows(term)), 0.5);
}

inline double kl_gaussian(const Tensor& mu, const Tensor& logvar) {
  Graph g;
  return g.value(kl_gaussian_node(g, g.constant(mu), g.constant(logvar))).item();
}

}  // namespace advgen

# # Convex fits of fully visible Boltzmann machines
#
# A model whose energy is linear in its couplings has a convex negative
# log-likelihood: the gradient is the moment mismatch <chi_I>_model -
# <chi_I>_data, so moment matching is the unique optimum.  This demo fits
# such models exactly and from samples.

import numpy as np

from fourspin import datasets, hobm, pbf

# ## Exact inversion
#
# When the full distribution is available (and strictly positive), the
# couplings are the Fourier spectrum of ln p, no optimization needed.

rng = np.random.default_rng(1)
weights = rng.random(32) + 0.1
target = hobm.ProbabilityTable(5, weights / weights.sum())
inverted = hobm.couplings_from_distribution(target)
print("KL(target || inverted):", target.kl_divergence(inverted.distribution()))

# ## Gradient fit
#
# Backtracking gradient descent reaches the same point and reports the
# final stationarity residual.

result = hobm.fit(target, hobm.FitConfig(tolerance=1e-9))
print("fit iterations        :", result.n_iters)
print("final residual        :", result.final_residual)
print("max coupling gap      :",
      np.abs(result.model.couplings.dense_full()
             - inverted.couplings.dense_full()).max())

# ## Fitting samples from a three-body chain
#
# The chain's Boltzmann distribution has zero magnetizations and no pair
# terms in the energy, but sampling it gives empirical moments at every
# order.  A fit to the samples matches the empirical moments, not the
# generating couplings, so the recovered triplet coupling carries the
# sampling noise of 4000 configurations.

chain = datasets.three_body_chain(6, 0.5)
data = datasets.sample_exact(chain, 4000, seed=3)
fit = hobm.fit(data.to_table(), hobm.FitConfig(tolerance=1e-8))
print("empirical mismatch    :", hobm.nll_gradient(fit.model, data).sup_norm())
print("triplet coupling      :", fit.model.couplings.get(0b000111),
      "(generating value 0.5)")

# Truncating the fit at order 2 removes the triplet terms; what remains is
# the best pairwise approximation, and its likelihood is visibly worse.

pairwise = hobm.fit(data.to_table(), hobm.FitConfig(tolerance=1e-8, max_order=2))
print("full order NLL        :", hobm.neg_log_likelihood(fit.model, data))
print("pairwise NLL          :", hobm.neg_log_likelihood(pairwise.model, data))

# ## Moments of anything
#
# Tables, samples, and models expose the same moment interface, which is
# what the training code contracts against.

print("data pair moments     :",
      np.round(hobm.moments(data, max_order=2).order_norm(2), 4))
print("model pair moments    :",
      np.round(hobm.moments(fit.model.distribution(), max_order=2).order_norm(2), 4))

# # What an RBM's hidden units write into coupling space
#
# Tracing out the hidden layer of a spin RBM leaves the marginal energy
# -G(s) = -(sum_a ln cosh(w_a . s + zeta_a) + eta . s).  G is a
# pseudo-Boolean function, so the machine IS a higher-order model in
# disguise: phi_I = Ghat(I).  This demo extracts those couplings three
# ways and visits the spurious fixed point.

import numpy as np

from fourspin import datasets, hobm, pbf, rbm

rng = np.random.default_rng(4)
model = rbm.SpinRbm(
    rng.normal(0, 0.5, (6, 4)),
    rng.normal(0, 0.3, 4),
    rng.normal(0, 0.3, 6),
)

# ## Extraction by transform
#
# One fast transform of the log weight table gives every coupling at once.

couplings = rbm.extract_couplings_exact(model)
print("per-order norms:", np.round(couplings.order_norms(), 4))

# ## Extraction by the per-subset formula
#
# A single coupling also comes from an average over the 2^|I| sign
# patterns of the subset, without touching the other sites.

for mask in (0b000011, 0b010101, 0b111111):
    formula = rbm.extract_coupling_formula(model, mask, "exact")
    print(f"subset {mask:06b}: formula {formula:+.6f}  "
          f"transform {couplings.get(mask):+.6f}")

# The same formula averaged over Monte Carlo draws scales past enumeration;
# the standard error comes back with the estimate.

estimate, stderr = rbm.extract_coupling_formula(
    model, 0b000011, "monte_carlo", n_samples=50_000, seed=0, return_stderr=True
)
print("monte carlo    :", round(estimate, 4), "+-", round(stderr, 4))

# ## The machine really is its couplings
#
# Rebuilding an explicit model from the extracted couplings reproduces the
# RBM's distribution exactly.

rebuilt = hobm.HigherOrderModel(couplings)
gap = np.abs(rebuilt.distribution().probs - model.distribution().probs).max()
print("distribution gap:", gap)

# ## A stationary point that matches nothing but the fields
#
# Zero weights with eta_i = arctanh<s_i> kill the parameter gradient even
# though the model ignores every correlation in the data.  The coupling
# mismatch is nonzero but invisible to the parameters: a spurious fixed
# point of the training flow.

data = datasets.three_body_chain(6, 0.5).distribution().sample(3000, seed=7)
spurious = rbm.spurious_point(data, n_hidden=4)
grad = rbm.nll_gradient_exact(spurious, data).to_vector()
print("parameter gradient sup:", np.abs(grad).max())

m_data = hobm.moments(data, max_order=3)
m_model = hobm.moments(spurious.distribution(), max_order=3)
print("triplet moment mismatch:", np.abs(m_data.values - m_model.values).max())

# ## Seeded sampling
#
# Parallel tempering over a geometric temperature ladder, all randomness
# drawn from one seeded generator: reruns are identical.

config = rbm.SamplerConfig(n_chains=500, n_sweeps=30, seed=2)
draws = rbm.sample_model(model, config)
again = rbm.sample_model(model, config)
print("rerun identical:", np.array_equal(draws, again))
print("sampled <s_0>  :", draws[:, 0].mean(),
      " exact:", round(model.distribution().moments_full()[1], 4))

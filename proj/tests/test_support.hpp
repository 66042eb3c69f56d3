#pragma once

// Shared generators for randomized tests: valid random posterior states and
// matching synthetic view sets.

#include "bcca/moments.hpp"
#include "bcca/rng.hpp"
#include "bcca/types.hpp"

#include <random>

namespace support {

using bcca::MatX;
using bcca::VecX;

inline MatX random_spd(Eigen::Index n, std::mt19937_64& eng, double diag_boost = 0.5) {
  const MatX a = bcca::sample_standard_normal<double>(n, n, eng);
  MatX spd = a * a.transpose() / static_cast<double>(n);
  spd.diagonal().array() += diag_boost;
  return spd;
}

struct RandomInstance {
  bcca::ViewSet data;
  bcca::PosteriorState state;
  bcca::Hyperparameters hp;
};

// A structurally valid (dimensions, SPD, positivity) but otherwise arbitrary
// state, deliberately NOT at any update's fixed point.
inline RandomInstance random_instance(int views, int channels, int components, int samples,
                                      std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> unif(0.2, 2.0);

  RandomInstance inst;
  for (int m = 0; m < views; ++m)
    inst.data.views.push_back(bcca::sample_standard_normal<double>(channels, samples, eng));

  bcca::PosteriorState& st = inst.state;
  st.z_mean = bcca::sample_standard_normal<double>(components, samples, eng);
  st.z_cov = random_spd(components, eng);
  st.psi_dof = static_cast<double>(samples) + channels + 1 + unif(eng);
  for (int m = 0; m < views; ++m) {
    st.psi_scale.push_back(random_spd(channels, eng) / st.psi_dof);
    st.a_mean.push_back(bcca::sample_standard_normal<double>(channels, components, eng));
    std::vector<MatX> covs;
    for (int d = 0; d < channels; ++d) covs.push_back(random_spd(components, eng));
    st.a_cov.push_back(std::move(covs));
  }
  st.u_mean = bcca::sample_standard_normal<double>(channels, components, eng);
  st.u_var = VecX::NullaryExpr(components, [&](Eigen::Index) { return unif(eng); });
  st.alpha_shape = unif(eng) + 0.5;
  st.alpha_rate = VecX::NullaryExpr(components, [&](Eigen::Index) { return unif(eng); });
  st.lambda_shape = unif(eng) + 0.5;
  st.lambda_rate = unif(eng);

  inst.hp = bcca::default_hyperparameters(channels);
  return inst;
}

}  // namespace support

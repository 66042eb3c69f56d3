#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bcca/fit.hpp"
#include "bcca/lower_bound.hpp"
#include "bcca/moments.hpp"
#include "bcca/updates.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace bcca;

namespace {

double max_abs_diff(const MatX& a, const MatX& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("update_z: zero patterns give the prior back") {
  auto inst = support::random_instance(2, 3, 2, 4, 11);
  for (auto& a : inst.state.a_mean) a.setZero();
  for (auto& covs : inst.state.a_cov)
    for (auto& c : covs) c.setZero();
  auto cache = make_cache(inst.state);
  update_z(inst.state, inst.data, cache);
  CHECK(max_abs_diff(inst.state.z_cov, MatX::Identity(2, 2)) == doctest::Approx(0.0));
  CHECK(inst.state.z_mean.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("update_z: scalar case evaluates the closed form") {
  // M=1, D=1, K=1, N=1, mu_a=1, Sigma_a=0, E[psi]=1, x=2
  auto inst = support::random_instance(1, 1, 1, 1, 12);
  inst.data.views[0](0, 0) = 2.0;
  inst.state.a_mean[0](0, 0) = 1.0;
  inst.state.a_cov[0][0](0, 0) = 0.0;
  inst.state.psi_dof = 2.0;
  inst.state.psi_scale[0](0, 0) = 0.5;  // E[psi] = 1
  auto cache = make_cache(inst.state);
  update_z(inst.state, inst.data, cache);
  CHECK(inst.state.z_cov(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(inst.state.z_mean(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("update_z matches the expectation-expansion oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = support::random_instance(2, 3, 2, 4, 100 + seed);
    const auto expected = oracle::update_z_loops(inst.state, inst.data);
    auto cache = make_cache(inst.state);
    update_z(inst.state, inst.data, cache);
    CHECK(max_abs_diff(inst.state.z_cov, expected.cov) < 1e-10);
    CHECK(max_abs_diff(inst.state.z_mean, expected.mean) < 1e-10);
    CHECK(max_abs_diff(cache.zz_sum, oracle::zz_sum_loops(inst.state)) < 1e-10);
  }
}

TEST_CASE("update_psi: dof is N + v0") {
  auto inst = support::random_instance(1, 6, 2, 100, 21);
  auto cache = make_cache(inst.state);
  update_psi(inst.state, inst.data, cache, inst.hp);
  CHECK(inst.state.psi_dof == doctest::Approx(107.0));  // v0 = D + 1 = 7
}

TEST_CASE("update_psi: prior-only case returns S0") {
  auto inst = support::random_instance(2, 3, 2, 5, 22);
  for (auto& v : inst.data.views) v.setZero();
  for (auto& a : inst.state.a_mean) a.setZero();
  for (auto& covs : inst.state.a_cov)
    for (auto& c : covs) c.setZero();
  auto cache = make_cache(inst.state);
  update_psi(inst.state, inst.data, cache, inst.hp);
  for (int m = 0; m < 2; ++m)
    CHECK(max_abs_diff(inst.state.psi_scale[m], inst.hp.S0) < 1e-12);
}

TEST_CASE("update_psi matches the explicit-summation oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = support::random_instance(2, 3, 2, 4, 200 + seed);
    const auto expected = oracle::update_psi_loops(inst.state, inst.data, inst.hp);
    auto cache = make_cache(inst.state);
    update_psi(inst.state, inst.data, cache, inst.hp);
    CHECK(inst.state.psi_dof == doctest::Approx(expected.dof));
    for (int m = 0; m < 2; ++m)
      CHECK(max_abs_diff(inst.state.psi_scale[m], expected.scale[m]) < 1e-10);
  }
}

TEST_CASE("update_psi matches the oracle under the diagonal noise model") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto inst = support::random_instance(2, 4, 2, 6, 250 + seed);
    inst.hp.noise_model = NoiseModel::diagonal_precision;
    const auto expected = oracle::update_psi_loops(inst.state, inst.data, inst.hp);
    auto cache = make_cache(inst.state);
    update_psi(inst.state, inst.data, cache, inst.hp);
    for (int m = 0; m < 2; ++m) {
      CHECK(max_abs_diff(inst.state.psi_scale[m], expected.scale[m]) < 1e-10);
      // off-diagonal of the retained precision is dropped, so the scale is diagonal
      MatX off = inst.state.psi_scale[m];
      off.diagonal().setZero();
      CHECK(off.cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("update_a: scalar case evaluates the closed form") {
  auto inst = support::random_instance(1, 1, 1, 3, 23);
  auto cache = make_cache(inst.state);
  const double psi = cache.psi_mean[0](0, 0);
  const double lambda = cache.lambda_mean;
  const double zz = cache.zz_sum(0, 0);
  double zx = 0;
  for (int t = 0; t < 3; ++t) zx += inst.state.z_mean(0, t) * inst.data.views[0](0, t);
  const double expected_cov = 1.0 / (psi * zz + lambda);
  const double expected_mean = expected_cov * (psi * zx + lambda * inst.state.u_mean(0, 0));
  update_a(inst.state, inst.data, cache, 0);
  CHECK(inst.state.a_cov[0][0](0, 0) == doctest::Approx(expected_cov).epsilon(1e-12));
  CHECK(inst.state.a_mean[0](0, 0) == doctest::Approx(expected_mean).epsilon(1e-12));
}

TEST_CASE("update_a: flat coupling with uninformative data") {
  // lambda -> 0, E[psi] = I, z_mean = 0, z_cov = I, N = 1, zero data
  auto inst = support::random_instance(1, 2, 2, 1, 24);
  inst.data.views[0].setZero();
  inst.state.z_mean.setZero();
  inst.state.z_cov.setIdentity();
  inst.state.psi_dof = 1.0;
  inst.state.psi_scale[0] = MatX::Identity(2, 2);
  inst.state.lambda_shape = 1e-300;  // effectively zero coupling
  inst.state.lambda_rate = 1.0;
  auto cache = make_cache(inst.state);
  update_a(inst.state, inst.data, cache, 0);
  for (int d = 0; d < 2; ++d) {
    CHECK(max_abs_diff(inst.state.a_cov[0][static_cast<std::size_t>(d)], MatX::Identity(2, 2)) <
          1e-12);
  }
  CHECK(inst.state.a_mean[0].cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("update_a matches the explicit-summation oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = support::random_instance(2, 3, 2, 5, 300 + seed);
    const auto expected = oracle::update_a_loops(inst.state, inst.data, 1);
    auto cache = make_cache(inst.state);
    update_a(inst.state, inst.data, cache, 1);
    CHECK(max_abs_diff(inst.state.a_mean[1], expected.mean) < 1e-10);
    for (int d = 0; d < 3; ++d)
      CHECK(max_abs_diff(inst.state.a_cov[1][static_cast<std::size_t>(d)],
                         expected.cov[static_cast<std::size_t>(d)]) < 1e-10);
  }
}

TEST_CASE("update_u: decoupled limit and direct evaluation") {
  auto inst = support::random_instance(2, 3, 1, 4, 25);
  inst.state.lambda_shape = 1e-300;
  inst.state.lambda_rate = 1.0;
  auto cache = make_cache(inst.state);
  update_u(inst.state, cache);
  CHECK(inst.state.u_mean.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(inst.state.u_var(0) == doctest::Approx(inst.state.alpha_rate(0) / inst.state.alpha_shape));

  // M = 2, E[lambda] = 1, E[alpha] = 1, columns of a summing to (3, 0, 0)
  inst.state.lambda_shape = 1.0;
  inst.state.lambda_rate = 1.0;
  inst.state.alpha_shape = 1.0;
  inst.state.alpha_rate(0) = 1.0;
  inst.state.a_mean[0].col(0) << 1.0, 2.0, -1.0;
  inst.state.a_mean[1].col(0) << 2.0, -2.0, 1.0;
  cache = make_cache(inst.state);
  update_u(inst.state, cache);
  CHECK(inst.state.u_var(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(inst.state.u_mean(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(inst.state.u_mean(1, 0) == doctest::Approx(0.0));
  CHECK(inst.state.u_mean(2, 0) == doctest::Approx(0.0));
}

TEST_CASE("update_u matches the scalar-arithmetic oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = support::random_instance(3, 4, 2, 5, 400 + seed);
    const auto expected = oracle::update_u_loops(inst.state);
    auto cache = make_cache(inst.state);
    update_u(inst.state, cache);
    CHECK(max_abs_diff(inst.state.u_mean, expected.mean) < 1e-12);
    CHECK((inst.state.u_var - expected.var).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("update_alpha: hand cases") {
  auto inst = support::random_instance(1, 6, 1, 4, 26);
  SUBCASE("shape is a0 + D/2") {
    auto cache = make_cache(inst.state);
    update_alpha(inst.state, cache, inst.hp);
    CHECK(inst.state.alpha_shape == doctest::Approx(3.001).epsilon(1e-12));
  }
  SUBCASE("zero common pattern leaves only the prior rate") {
    inst.state.u_mean.setZero();
    inst.state.u_var.setConstant(1e-300);
    auto cache = make_cache(inst.state);
    update_alpha(inst.state, cache, inst.hp);
    CHECK(inst.state.alpha_rate(0) == doctest::Approx(1e-3).epsilon(1e-9));
  }
}

TEST_CASE("update_alpha: E[u^T u] by hand at D = 2") {
  auto inst = support::random_instance(1, 2, 1, 4, 27);
  inst.state.u_mean.col(0) << 1.0, 2.0;
  inst.state.u_var(0) = 0.5;
  auto cache = make_cache(inst.state);
  update_alpha(inst.state, cache, inst.hp);
  // b = 1e-3 + (1 + 4 + 2 * 0.5) / 2 = 3.001
  CHECK(inst.state.alpha_rate(0) == doctest::Approx(3.001).epsilon(1e-12));
}

TEST_CASE("update_lambda: shape and aligned-pattern rate") {
  auto inst = support::random_instance(2, 6, 1, 4, 28);
  SUBCASE("shape is a0 + MKD/2") {
    auto cache = make_cache(inst.state);
    update_lambda(inst.state, cache, inst.hp);
    CHECK(inst.state.lambda_shape == doctest::Approx(6.001).epsilon(1e-12));
  }
  SUBCASE("perfectly aligned patterns leave only prior mass") {
    inst.state.a_mean[0] = inst.state.u_mean;
    inst.state.a_mean[1] = inst.state.u_mean;
    for (auto& covs : inst.state.a_cov)
      for (auto& c : covs) c.setZero();
    inst.state.u_var.setConstant(1e-300);
    auto cache = make_cache(inst.state);
    update_lambda(inst.state, cache, inst.hp);
    CHECK(inst.state.lambda_rate == doctest::Approx(1e-3).epsilon(1e-9));
  }
}

TEST_CASE("update_lambda matches the term-by-term oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = support::random_instance(3, 4, 2, 5, 500 + seed);
    const auto [shape, rate] = oracle::update_lambda_loops(inst.state, inst.hp);
    auto cache = make_cache(inst.state);
    update_lambda(inst.state, cache, inst.hp);
    CHECK(inst.state.lambda_shape == doctest::Approx(shape).epsilon(1e-12));
    CHECK(std::abs(inst.state.lambda_rate - rate) < 1e-10);
  }
}

TEST_CASE("update_alpha matches the loop oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = support::random_instance(2, 5, 3, 4, 600 + seed);
    const auto expected = oracle::update_alpha_loops(inst.state, inst.hp);
    auto cache = make_cache(inst.state);
    update_alpha(inst.state, cache, inst.hp);
    CHECK(inst.state.alpha_shape == doctest::Approx(expected.shape).epsilon(1e-12));
    CHECK((inst.state.alpha_rate - expected.rate).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("lower_bound: determinism and the scalar hand case") {
  auto inst = support::random_instance(1, 1, 1, 1, 29);
  PosteriorState& st = inst.state;
  st.z_mean(0, 0) = 3.0;
  st.z_cov(0, 0) = 1.0;
  st.a_cov[0][0](0, 0) = 1.0;
  st.u_var(0) = 1.0;
  st.alpha_rate(0) = 1.0;
  st.lambda_rate = 1.0;
  st.psi_dof = 107.0;
  st.psi_scale[0](0, 0) = 2.0;
  const double expected = 0.5 * 107.0 * std::log(2.0) - 0.5 * (1.0 + 9.0);
  CHECK(lower_bound(st, inst.hp) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(lower_bound(st, inst.hp) == lower_bound(st, inst.hp));
}

TEST_CASE("update_psi surfaces a numerical breakdown with the view index") {
  // a wildly indefinite row covariance drives the scale inverse non-PD
  auto inst = support::random_instance(2, 3, 2, 4, 90);
  inst.state.a_cov[1][0] = -1e4 * MatX::Identity(2, 2);
  auto cache = make_cache(inst.state);
  try {
    update_psi(inst.state, inst.data, cache, inst.hp);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("view 1") != std::string::npos);
  }
}

TEST_CASE("update_lambda rejects a corrupted moment cache") {
  auto inst = support::random_instance(2, 3, 1, 4, 91);
  auto cache = make_cache(inst.state);
  cache.a_sqnorm[0].setConstant(-1e9);  // inconsistent with any valid state
  CHECK_THROWS_AS(update_lambda(inst.state, cache, inst.hp), NumericalError);
}

TEST_CASE("per-view noise prior must match the view count") {
  auto inst = support::random_instance(2, 3, 1, 10, 92);
  inst.hp.s0_per_view.assign(1, inst.hp.S0);  // one scale, two views
  CHECK_THROWS_AS(init_posterior(inst.data, 1, inst.hp, 0), InvalidInput);
}

TEST_CASE("posterior state stays valid after every update") {
  auto inst = support::random_instance(2, 4, 2, 30, 31);
  auto st = init_posterior(inst.data, 2, inst.hp, 7);
  auto cache = make_cache(st);
  update_z(st, inst.data, cache);
  validate_state(st);
  update_psi(st, inst.data, cache, inst.hp);
  validate_state(st);
  for (int m = 0; m < 2; ++m) {
    update_a(st, inst.data, cache, m);
    validate_state(st);
  }
  update_u(st, cache);
  validate_state(st);
  update_alpha(st, cache, inst.hp);
  validate_state(st);
  update_lambda(st, cache, inst.hp);
  validate_state(st);
}

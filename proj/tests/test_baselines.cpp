#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "panoma/baselines.hpp"
#include "panoma/env.hpp"
#include "panoma/rng.hpp"

using namespace panoma;
using Catch::Approx;

namespace {

ExperimentConfig make_config(int users, int pas) {
  ExperimentConfig cfg;
  cfg.system.num_users = users;
  cfg.system.num_pas = pas;
  cfg.materialize_per_user();
  return cfg;
}

Mlp zero_actor(int obs_dim, int action_dim) {
  Mlp net;
  Layer layer;
  layer.weights = Matd::Zero(action_dim, obs_dim);
  layer.biases = Vecd::Zero(action_dim);
  layer.act = Activation::tanh;
  net.layers.push_back(layer);
  return net;
}

}  // namespace

TEST_CASE("fixed uniform placement") {
  SystemConfig cfg;
  cfg.num_pas = 1;
  REQUIRE(fixed_layout_policy(cfg).positions_m == std::vector<double>{30.0});
  cfg.num_pas = 3;
  REQUIRE(fixed_layout_policy(cfg).positions_m == std::vector<double>{10.0, 30.0, 50.0});
  cfg.num_pas = 2;
  REQUIRE(fixed_layout_policy(cfg).positions_m == std::vector<double>{15.0, 45.0});
  cfg.num_pas = 4;
  cfg.min_spacing_m = 20.0;
  REQUIRE_THROWS_AS(fixed_layout_policy(cfg), ConfigError);
}

TEST_CASE("uniform grid") {
  REQUIRE(uniform_grid(60.0, 1) == std::vector<double>{30.0});
  REQUIRE(uniform_grid(60.0, 3) == std::vector<double>{0.0, 30.0, 60.0});
  const auto fine = uniform_grid(60.0, 5);
  REQUIRE(fine == std::vector<double>{0.0, 15.0, 30.0, 45.0, 60.0});
}

TEST_CASE("discrete position search") {
  auto cfg = make_config(2, 1);
  NomaEnv env(cfg);
  env.reset(5);
  const std::vector<double> powers{0.05, 0.05};

  SECTION("grid equal to the antenna count leaves one candidate") {
    auto cfg3 = make_config(1, 3);
    NomaEnv env3(cfg3);
    env3.reset(2);
    const PaLayout layout = discrete_position_search(env3, env3.state(), 0.4, {0.05}, 3);
    REQUIRE(layout.positions_m == std::vector<double>{0.0, 30.0, 60.0});
  }
  SECTION("matches the grid-restricted exhaustive search exactly") {
    const PaLayout layout = discrete_position_search(env, env.state(), 0.5, powers, 8);
    OracleGrids grids;
    grids.beta_points = 1;      // grid {0.5}
    grids.power_points = 1;     // grid {p_max / 2}
    grids.position_points = 8;  // identical position grid
    const OracleResult oracle =
        brute_force_oracle(env, env.state(), grids, OraclePowerHandling::request_clip);
    REQUIRE(layout.positions_m == oracle.best_layout.positions_m);
    const SlotDiagnostics diag = env.layout_outcome(env.state(), 0.5, powers, layout);
    REQUIRE(diag.ee_bpshz_per_w == oracle.best_ee);
  }
  SECTION("enlarging the grid never hurts") {
    const PaLayout coarse = discrete_position_search(env, env.state(), 0.5, powers, 4);
    const PaLayout fine = discrete_position_search(env, env.state(), 0.5, powers, 7);
    const double ee_coarse = env.layout_outcome(env.state(), 0.5, powers, coarse).ee_bpshz_per_w;
    const double ee_fine = env.layout_outcome(env.state(), 0.5, powers, fine).ee_bpshz_per_w;
    REQUIRE(ee_fine >= ee_coarse - 1e-15);
  }
  SECTION("infeasible grids are configuration errors") {
    REQUIRE_THROWS_AS(discrete_position_search(env, env.state(), 0.5, powers, 0), ConfigError);
    // valid system (4 * 14 <= 60) but the 6-point grid has pitch 12, so any
    // admissible gap is >= 24 and four antennas cannot fit
    auto tight = make_config(1, 4);
    tight.system.min_spacing_m = 14.0;
    NomaEnv tight_env(tight);
    tight_env.reset(1);
    REQUIRE_THROWS_AS(discrete_position_search(tight_env, tight_env.state(), 0.5, {0.05}, 6),
                      ConfigError);
  }
}

TEST_CASE("equal spacing offset search") {
  SECTION("a single step picks the leftmost layout") {
    auto cfg = make_config(1, 3);
    NomaEnv env(cfg);
    env.reset(3);
    const PaLayout layout = equal_spacing_offset_search(env, env.state(), 0.5, {0.05}, 1);
    REQUIRE(layout.positions_m == std::vector<double>{0.0, 20.0, 40.0});
  }
  SECTION("one antenna reduces to a line search") {
    auto cfg = make_config(1, 1);
    NomaEnv env(cfg);
    env.reset(3);
    const PaLayout layout = equal_spacing_offset_search(env, env.state(), 0.5, {0.05}, 13);
    REQUIRE(layout.positions_m.size() == 1);
    REQUIRE(layout.positions_m[0] >= 0.0);
    REQUIRE(layout.positions_m[0] <= 60.0);
    // best of the same 13 candidates by hand
    double best_ee = -1.0;
    double best_x = 0.0;
    for (int j = 0; j < 13; ++j) {
      const double x = 60.0 * j / 12.0;
      const double ee =
          env.layout_outcome(env.state(), 0.5, {0.05}, PaLayout{{x}}).ee_bpshz_per_w;
      if (ee > best_ee) {
        best_ee = ee;
        best_x = x;
      }
    }
    REQUIRE(layout.positions_m[0] == best_x);
  }
  SECTION("search covers the aligned fixed layout") {
    auto cfg = make_config(2, 3);
    NomaEnv env(cfg);
    env.reset(9);
    const std::vector<double> powers{0.04, 0.04};
    const PaLayout best = equal_spacing_offset_search(env, env.state(), 0.3, powers, 3);
    const PaLayout fixed = fixed_layout_policy(cfg.system);  // offset 10 of the 3-step sweep
    const double ee_best = env.layout_outcome(env.state(), 0.3, powers, best).ee_bpshz_per_w;
    const double ee_fixed = env.layout_outcome(env.state(), 0.3, powers, fixed).ee_bpshz_per_w;
    REQUIRE(ee_best >= ee_fixed - 1e-15);
  }
  SECTION("more offset steps never hurt") {
    auto cfg = make_config(2, 2);
    NomaEnv env(cfg);
    env.reset(11);
    const std::vector<double> powers{0.05, 0.02};
    const PaLayout coarse = equal_spacing_offset_search(env, env.state(), 0.5, powers, 3);
    const PaLayout fine = equal_spacing_offset_search(env, env.state(), 0.5, powers, 5);
    REQUIRE(env.layout_outcome(env.state(), 0.5, powers, fine).ee_bpshz_per_w >=
            env.layout_outcome(env.state(), 0.5, powers, coarse).ee_bpshz_per_w - 1e-15);
  }
}

TEST_CASE("brute force oracle") {
  SECTION("single grid point is returned as-is") {
    auto cfg = make_config(1, 1);
    NomaEnv env(cfg);
    env.reset(7);
    OracleGrids grids{1, 1, 1};
    const OracleResult result = brute_force_oracle(env, env.state(), grids);
    REQUIRE(result.evaluations == 1);
    REQUIRE(result.best_beta == 0.5);
    REQUIRE(result.best_layout.positions_m == std::vector<double>{30.0});
    ActionVector action;
    action.beta = result.best_beta;
    action.powers_w = result.best_powers_w;
    action.layout = result.best_layout;
    REQUIRE(env.preview(env.state(), action).ee_bpshz_per_w == result.best_ee);
  }
  SECTION("refining every grid is monotone") {
    auto cfg = make_config(2, 1);
    NomaEnv env(cfg);
    env.reset(19);
    const OracleResult coarse = brute_force_oracle(env, env.state(), {3, 3, 3});
    const OracleResult fine = brute_force_oracle(env, env.state(), {5, 5, 5});
    REQUIRE(fine.best_ee >= coarse.best_ee - 1e-15);
  }
  SECTION("best action re-evaluates to best_ee and matches a scalar chain") {
    auto cfg = make_config(2, 1);
    NomaEnv env(cfg);
    env.reset(5);
    const EnvState state = env.state();
    const OracleResult result = brute_force_oracle(env, state, {11, 11, 8});
    REQUIRE(result.evaluations == 11 * 11 * 11 * 8);
    REQUIRE(result.feasible_found);

    ActionVector action;
    action.beta = result.best_beta;
    action.powers_w = result.best_powers_w;
    action.layout = result.best_layout;
    REQUIRE(env.preview(state, action).ee_bpshz_per_w == result.best_ee);

    // independent straight-line chain: channel, decode order, rates, EE
    const double lambda = 299792458.0 / 28e9;
    const double lambda_g = lambda / 1.4;
    const double xn = result.best_layout.positions_m[0];
    std::vector<double> gain_sq(2);
    for (int k = 0; k < 2; ++k) {
      const auto& u = state.true_positions[k];
      const double d = std::sqrt((u.x_m - xn) * (u.x_m - xn) + u.y_m * u.y_m + 9.0);
      const std::complex<double> fs =
          lambda / (4.0 * M_PI * d) *
          std::exp(std::complex<double>(0.0, -2.0 * M_PI * d / lambda));
      const std::complex<double> wg =
          std::sqrt(0.5) * std::sqrt(std::pow(10.0, -0.5 * xn / 10.0)) *
          std::exp(std::complex<double>(0.0, -2.0 * M_PI * xn / lambda_g));
      gain_sq[k] = std::norm(fs * wg);
    }
    const int strong = gain_sq[0] >= gain_sq[1] ? 0 : 1;
    const int weak = 1 - strong;
    const double ps = result.best_powers_w[strong], pw = result.best_powers_w[weak];
    const double r_strong =
        (1.0 - result.best_beta) *
        std::log2(1.0 + ps * gain_sq[strong] / (pw * gain_sq[weak] + 1e-12));
    const double r_weak = (1.0 - result.best_beta) * std::log2(1.0 + pw * gain_sq[weak] / 1e-12);
    const double ee = (r_strong + r_weak) / (0.1 + ps + pw);
    REQUIRE(result.best_ee == Approx(ee).epsilon(1e-9));
  }
  SECTION("grid size guard") {
    auto cfg = make_config(2, 1);
    NomaEnv env(cfg);
    env.reset(1);
    REQUIRE_THROWS_AS(brute_force_oracle(env, env.state(), {101, 1001, 8}), std::logic_error);
  }
}

TEST_CASE("policy evaluation") {
  SECTION("a powerless fleet scores zero efficiency and zero satisfaction") {
    auto cfg = make_config(2, 1);
    cfg.system.bs_wpt_power_w = 0.0;
    cfg.battery.capacity_j = 1e-9;  // cannot even pay the circuit energy
    cfg.battery_per_user.clear();
    cfg.materialize_per_user();
    cfg.system.num_slots = 4;
    NomaEnv env(cfg);
    const Mlp actor = zero_actor(env.obs_dim(), env.action_dim());
    const PolicyStats stats =
        evaluate_policy(PolicySpec{PolicySpec::Kind::drl}, cfg, 3, {1, 2}, actor);
    REQUIRE(stats.mean_ee == 0.0);
    REQUIRE(stats.rate_satisfaction == 0.0);
  }

  SECTION("identical seed lists reproduce identical statistics") {
    auto cfg = make_config(2, 2);
    cfg.system.num_slots = 4;
    NomaEnv env(cfg);
    const Mlp actor = zero_actor(env.obs_dim(), env.action_dim());
    const PolicySpec policy{PolicySpec::Kind::drl};
    const PolicyStats a = evaluate_policy(policy, cfg, 3, {5, 6, 7}, actor);
    const PolicyStats b = evaluate_policy(policy, cfg, 3, {5, 6, 7}, actor);
    REQUIRE(a.mean_ee == b.mean_ee);
    REQUIRE(a.std_ee == b.std_ee);
    REQUIRE(a.rate_satisfaction == b.rate_satisfaction);
  }

  SECTION("statistics are invariant to seed ordering") {
    auto cfg = make_config(2, 1);
    cfg.system.num_slots = 4;
    NomaEnv env(cfg);
    const Mlp actor = zero_actor(env.obs_dim(), env.action_dim());
    const PolicySpec policy{PolicySpec::Kind::drl};
    const PolicyStats a = evaluate_policy(policy, cfg, 2, {1, 2, 3}, actor);
    const PolicyStats b = evaluate_policy(policy, cfg, 2, {3, 1, 2}, actor);
    REQUIRE(a.mean_ee == b.mean_ee);
    REQUIRE(a.median_ee == b.median_ee);
    REQUIRE(a.std_ee == b.std_ee);
  }

  SECTION("search-set containment orders the placement policies") {
    // No harvest, ample batteries, no rate floor and a constant policy, so
    // all three placement policies see identical states slot by slot; the
    // candidate sets then nest: fixed in the 5-point grid, the grid in the
    // 9-step offset sweep.
    auto cfg = make_config(2, 1);
    cfg.system.bs_wpt_power_w = 0.0;
    cfg.system.min_rate_bpshz = 0.0;
    cfg.battery.capacity_j = 10.0;
    cfg.battery_per_user.clear();
    cfg.materialize_per_user();
    cfg.system.num_slots = 4;
    NomaEnv env(cfg);
    const Mlp actor = zero_actor(env.obs_dim(), env.action_dim());

    PolicySpec fixed{PolicySpec::Kind::fixed};
    PolicySpec discrete{PolicySpec::Kind::discrete};
    discrete.grid_points = 5;
    PolicySpec continuous{PolicySpec::Kind::continuous_constrained};
    continuous.offset_steps = 9;

    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const PolicyStats s_fixed = evaluate_policy(fixed, cfg, 2, seeds, actor);
    const PolicyStats s_discrete = evaluate_policy(discrete, cfg, 2, seeds, actor);
    const PolicyStats s_continuous = evaluate_policy(continuous, cfg, 2, seeds, actor);
    REQUIRE(s_discrete.mean_ee >= s_fixed.mean_ee - 1e-12);
    REQUIRE(s_continuous.mean_ee >= s_discrete.mean_ee - 1e-12);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      REQUIRE(s_discrete.per_seed_mean_ee[i] >= s_fixed.per_seed_mean_ee[i] - 1e-12);
      REQUIRE(s_continuous.per_seed_mean_ee[i] >= s_discrete.per_seed_mean_ee[i] - 1e-12);
    }
  }
}

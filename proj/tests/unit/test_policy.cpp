#include <cmath>
#include <stdexcept>
#include <random>
#include <sstream>
#include <variant>

#include "doctest.h"

#include "adagrpo/environment.hpp"
#include "adagrpo/format.hpp"
#include "adagrpo/policy.hpp"
#include "adagrpo/trainer.hpp"
#include "checks.hpp"

using namespace adagrpo;
using checks::random_context;
using checks::random_dims;
using checks::random_params;

namespace {

const PolicyDims kDims{4, 4, 4, 2};

ContextFeatures zero_context(const PolicyDims& d) {
  return {Eigen::VectorXd::Zero(d.sym), Eigen::VectorXd::Zero(d.vis), Eigen::VectorXd::Zero(d.cue)};
}

long double wide_kl(const std::vector<long double>& p, const std::vector<long double>& q) {
  long double kl = 0;
  for (std::size_t k = 0; k < p.size(); ++k) kl += p[k] * std::log(p[k] / q[k]);
  return kl;
}

}  // namespace

TEST_CASE("zero weights give zero logits and uniform distributions") {
  const auto p = PolicyParameters::zeros(kDims);
  Rng rng(1);
  const auto ctx = random_context(kDims, rng);
  CHECK(mode_logits(p, ctx).isZero());
  for (ModeId m : kModes) {
    CHECK(answer_logits(p, m, ctx).isZero());
    const Eigen::VectorXd probs = softmax(answer_logits(p, m, ctx));
    for (Eigen::Index k = 0; k < probs.size(); ++k) CHECK(probs[k] == doctest::Approx(0.25));
  }
  CHECK(grd_probability(p, ctx, 0.9) == doctest::Approx(0.5));
}

TEST_CASE("aligned answer head picks the signalled answer") {
  auto p = PolicyParameters::zeros(kDims);
  p.answer_txt.leftCols(4) = Eigen::MatrixXd::Identity(4, 4);
  for (int y = 0; y < 4; ++y) {
    ContextFeatures ctx = zero_context(kDims);
    ctx.sym[y] = 2.0;
    Eigen::Index best = -1;
    answer_logits(p, ModeId::TXT, ctx).maxCoeff(&best);
    CHECK(best == y);
  }
}

TEST_CASE("softmax normalizes and logits reject mismatched shapes") {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto d = random_dims(rng);
    const auto p = random_params(d, 2.0, rng);
    const auto ctx = random_context(d, rng);
    CHECK(std::abs(softmax(mode_logits(p, ctx)).sum() - 1.0) < 1e-12);
    for (ModeId m : kModes) CHECK(std::abs(softmax(answer_logits(p, m, ctx), 0.9).sum() - 1.0) < 1e-12);
  }
  const auto p = PolicyParameters::zeros(kDims);
  ContextFeatures bad = zero_context(kDims);
  bad.vis = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(mode_logits(p, bad), std::invalid_argument);
  CHECK_THROWS_AS(answer_logits(p, ModeId::GRD, bad), std::invalid_argument);
  CHECK_THROWS_AS(answer_logits(p, ModeId::TXT, bad), std::invalid_argument);
}

TEST_CASE("sample_rollout") {
  Rng setup(3);
  const auto params = random_params(kDims, 1.0, setup);
  const auto ctx = random_context(kDims, setup);

  SUBCASE("forced prefix is honoured and records the true prefix log-probability") {
    Rng rng(4);
    const double log_grd = std::log(softmax(mode_logits(params, ctx))[1]);
    for (int i = 0; i < 200; ++i) {
      const auto r = sample_rollout(params, ctx, {}, ModeId::GRD, rng);
      CHECK(r.mode == ModeId::GRD);
      CHECK(r.forced_prefix);
      CHECK(r.logprobs[0] == doctest::Approx(log_grd).epsilon(1e-14));
      CHECK(r.logprobs[0] < 0.0);
    }
  }
  SUBCASE("greedy decoding takes the argmax prefix, then the argmax answer") {
    Rng rng(5);
    const auto r = sample_rollout(params, ctx, {0.9, true}, std::nullopt, rng);
    Eigen::Index mode = 0;
    mode_logits(params, ctx).maxCoeff(&mode);
    CHECK(mode_index(r.mode) == mode);
    Eigen::Index answer = 0;
    answer_logits(params, r.mode, ctx).maxCoeff(&answer);
    CHECK(r.answer == answer);
  }
  SUBCASE("same seed, same sequence") {
    Rng a(6), b(6);
    for (int i = 0; i < 50; ++i) {
      const auto x = sample_rollout(params, ctx, {}, std::nullopt, a);
      const auto y = sample_rollout(params, ctx, {}, std::nullopt, b);
      CHECK(x.mode == y.mode);
      CHECK(x.answer == y.answer);
      CHECK(x.logprobs == y.logprobs);
      CHECK(x.text == y.text);
    }
  }
  SUBCASE("rollouts serialize into valid responses with finite non-positive log-probs") {
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
      const auto r = sample_rollout(params, ctx, {}, std::nullopt, rng);
      REQUIRE(r.num_tokens() == 2);
      for (double lp : r.logprobs) {
        CHECK(std::isfinite(lp));
        CHECK(lp <= 0.0);
      }
      const auto parsed = parse_response(r.text);
      REQUIRE(std::holds_alternative<ParsedResponse>(parsed));
      CHECK(std::get<ParsedResponse>(parsed).mode == r.mode);
      CHECK(std::get<ParsedResponse>(parsed).answer == answer_label(r.answer));
    }
  }
  SUBCASE("non-positive temperature is rejected") {
    Rng rng(8);
    CHECK_THROWS_AS(sample_rollout(params, ctx, {0.0, false}, std::nullopt, rng), std::invalid_argument);
  }
  SUBCASE("empirical sampling frequencies follow the tempered distribution") {
    Rng rng(9);
    const double p_grd = grd_probability(params, ctx, 0.9);
    int grd = 0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) grd += sample_rollout(params, ctx, {}, std::nullopt, rng).mode == ModeId::GRD;
    const double se = std::sqrt(p_grd * (1 - p_grd) / draws);
    CHECK(std::abs(grd / static_cast<double>(draws) - p_grd) < 4 * se + 1e-9);
  }
}

TEST_CASE("sequence_logprob") {
  const auto uniform = PolicyParameters::zeros(kDims);
  Rng rng(10);
  const auto ctx = random_context(kDims, rng);
  const auto lp = sequence_logprob(uniform, ModeId::GRD, 2, ctx);
  CHECK(lp[0] == doctest::Approx(std::log(0.5)));
  CHECK(lp[1] == doctest::Approx(std::log(0.25)));
  CHECK_THROWS_AS(sequence_logprob(uniform, ModeId::TXT, 4, ctx), std::invalid_argument);
  CHECK_THROWS_AS(sequence_logprob(uniform, ModeId::TXT, -1, ctx), std::invalid_argument);

  // Free and forced rollouts of the same (mode, answer) score identically.
  const auto params = random_params(kDims, 1.0, rng);
  Rng sampler(11);
  for (int i = 0; i < 200; ++i) {
    const auto free = sample_rollout(params, ctx, {}, std::nullopt, sampler);
    const auto forced = sample_rollout(params, ctx, {}, free.mode, sampler);
    const auto a = sequence_logprob(params, free.mode, free.answer, ctx);
    CHECK(free.logprobs[0] == a[0]);
    CHECK(free.logprobs[1] == a[1]);
    CHECK(forced.logprobs[0] == a[0]);
  }
}

TEST_CASE("surrogate examples") {
  SUBCASE("on-policy token") {
    const auto t = clipped_surrogate_term(1.0, 2.0, 0.2);
    CHECK(t.value == 2.0);
    CHECK(t.d_ratio == 2.0);

    // Whole objective: one rollout, advantage 2 on the prefix only, theta = theta_old.
    Rng rng(12);
    const auto params = random_params(kDims, 1.0, rng);
    const auto ctx = random_context(kDims, rng);
    const std::vector<SurrogateSample> batch{{ctx, ModeId::GRD, 1, {2.0, 0.0}}};
    const auto res = surrogate_objective(params, params, params, batch, {0.2, 0.0});
    CHECK(res.objective == doctest::Approx(1.0));  // (2 + 0) / two tokens
    const Eigen::Vector2d p = softmax(mode_logits(params, ctx));
    const Eigen::Vector2d e(0.0, 1.0);
    const Eigen::MatrixXd grad_log_pi = (e - p) * mode_input(ctx).transpose();
    CHECK((res.gradient.mode - 0.5 * 2.0 * grad_log_pi).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(res.gradient.answer_grd.isZero());
    CHECK(res.gradient.answer_txt.isZero());
  }
  SUBCASE("clipped branch") {
    const auto t = clipped_surrogate_term(1.5, 1.0, 0.2);
    CHECK(t.value == doctest::Approx(1.2));
    CHECK(t.d_ratio == 0.0);
    const auto low = clipped_surrogate_term(0.5, -1.0, 0.2);
    CHECK(low.value == doctest::Approx(-0.8));
    CHECK(low.d_ratio == 0.0);
    // Pessimistic side stays live.
    CHECK(clipped_surrogate_term(1.5, -1.0, 0.2).d_ratio == -1.0);
    CHECK(clipped_surrogate_term(0.5, 1.0, 0.2).d_ratio == 1.0);
  }
  SUBCASE("invalid options and non-finite values") {
    Rng rng(13);
    auto params = random_params(kDims, 1.0, rng);
    const std::vector<SurrogateSample> batch{{random_context(kDims, rng), ModeId::TXT, 0, {1.0, 1.0}}};
    CHECK_THROWS_AS(surrogate_objective(params, params, params, batch, {0.0, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(surrogate_objective(params, params, params, batch, {0.2, -0.1}), std::invalid_argument);
    auto broken = params;
    broken.mode(0, 0) = std::nan("");
    CHECK_THROWS_AS(surrogate_objective(broken, params, params, batch, {0.2, 0.04}), NumericalError);
  }
}

TEST_CASE("kl_categorical") {
  Eigen::VectorXd a(3);
  a << 0.3, -1.0, 2.0;
  CHECK(kl_categorical(a, a) == 0.0);

  Eigen::VectorXd p(2), q(2);
  p << 0.0, 0.0;
  q << 0.0, std::log(3.0);
  const long double oracle = wide_kl({0.5L, 0.5L}, {0.25L, 0.75L});
  CHECK(std::abs(kl_categorical(p, q) - static_cast<double>(oracle)) < 1e-15);
  CHECK(kl_categorical(p, q) == doctest::Approx(0.1438).epsilon(1e-3));
  CHECK_THROWS_AS(kl_categorical(p, a), std::invalid_argument);
}

TEST_CASE("supervised cold start") {
  const EnvironmentSpec env = default_environment();
  const CurriculumSchedule schedule = default_schedule();

  SUBCASE("repeated steps on one demonstration make it near certain") {
    Rng rng(14);
    const Demonstration demo{random_context(kDims, rng), ModeId::GRD, 3};
    const std::vector<Demonstration> demos{demo};
    auto params = PolicyParameters::zeros(kDims);
    for (int i = 0; i < 500; ++i) params = sft_step(params, demos, 0.5);
    const auto lp = sequence_logprob(params, demo.mode, demo.answer, demo.context);
    CHECK(std::exp(lp[0] + lp[1]) > 0.99);
    CHECK_THROWS_AS(sft_step(params, demos, 0.0), std::invalid_argument);
  }

  Rng held_rng(15);
  const auto held_out = sample_tasks(env, schedule.phases.back(), 2000, held_rng);
  auto mode_marginal = [&](const PolicyParameters& p) {
    double total = 0.0;
    for (const auto& t : held_out) total += grd_probability(p, t.ctx, 1.0);
    return total / static_cast<double>(held_out.size());
  };

  SUBCASE("1:1 demonstrations give a balanced mode marginal") {
    SftConfig cfg;
    const auto params = cold_start(cfg, env, schedule, PolicyParameters::zeros(env.policy_dims()), 1);
    CHECK(std::abs(mode_marginal(params) - 0.5) < 0.1);
  }
  SUBCASE("9:1 GRD-biased demonstrations make free sampling prefer GRD") {
    SftConfig cfg;
    cfg.grd_share = 0.9;
    const auto params = cold_start(cfg, env, schedule, PolicyParameters::zeros(env.policy_dims()), 1);
    Rng rng(16);
    int grd = 0;
    const int samples = 10000;
    for (int i = 0; i < samples; ++i) {
      const auto& task = held_out[static_cast<std::size_t>(i) % held_out.size()];
      grd += sample_rollout(params, task.ctx, {}, std::nullopt, rng).mode == ModeId::GRD;
    }
    CHECK(grd / static_cast<double>(samples) > 0.75);
  }
}

TEST_CASE("momentum step") {
  Rng rng(17);
  const auto p = random_params(kDims, 1.0, rng);
  const auto g = random_params(kDims, 1.0, rng);
  MomentumStep plain(0.1, 0.0);
  CHECK(plain.apply(p, g, true) == p + 0.1 * g);
  MomentumStep heavy(0.1, 0.5);
  const auto first = heavy.apply(p, g, true);
  CHECK(first == p + 0.1 * g);
  const auto second = heavy.apply(first, g, true);
  const auto expected = first + 0.1 * (1.5 * g);
  CHECK((second.mode - expected.mode).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("free-format decoding") {
  Rng rng(18);
  const auto params = random_params(kDims, 1.0, rng);
  const auto ctx = random_context(kDims, rng);
  SUBCASE("without stalling an answer always appears") {
    const auto d = decode_free_format(params, FreeFormatHead{}, ctx, std::nullopt, 8, {}, rng);
    REQUIRE(d.answer.has_value());
    CHECK(d.think_tokens == 0);
    CHECK(format_reward(d.text) == 1);
  }
  SUBCASE("a dominant stall token truncates the output") {
    FreeFormatHead head;
    head.stall_logit = {50.0, 50.0};
    const auto d = decode_free_format(params, head, ctx, ModeId::TXT, 6, {}, rng);
    CHECK_FALSE(d.answer.has_value());
    CHECK(d.think_tokens == 6);
    CHECK(format_reward(d.text) == 0);
  }
}

TEST_CASE("checkpoint round trip and corruption") {
  Rng rng(19);
  const Checkpoint ckpt{random_params(kDims, 3.0, rng), 12345};
  std::stringstream buf;
  write_checkpoint(buf, ckpt);
  const std::string text = buf.str();
  CHECK(text.rfind("adagrpo-policy 1\n", 0) == 0);
  std::istringstream in(text);
  const Checkpoint back = read_checkpoint(in);
  CHECK(back.seed == 12345);
  CHECK(back.params == ckpt.params);

  for (const std::string bad : {std::string(""), std::string("garbage"), text.substr(0, text.size() / 2),
                                text + " 7", std::string("adagrpo-policy 2\n")}) {
    std::istringstream broken(bad);
    CHECK_THROWS_AS(read_checkpoint(broken), std::runtime_error);
  }
}

TEST_SUITE("invariants") {
  TEST_CASE("policy: chain rule and normalization over all 2A sequences") {
    Rng rng(20);
    for (int i = 0; i < 200; ++i) {
      const auto d = random_dims(rng);
      const auto p = random_params(d, 2.0, rng);
      const auto ctx = random_context(d, rng);
      const Eigen::VectorXd mode_p = softmax(mode_logits(p, ctx));
      double total = 0.0;
      for (ModeId m : kModes) {
        const Eigen::VectorXd ans_p = softmax(answer_logits(p, m, ctx));
        for (int a = 0; a < d.answers; ++a) {
          const auto lp = sequence_logprob(p, m, a, ctx);
          CHECK(lp[0] + lp[1] == doctest::Approx(std::log(mode_p[mode_index(m)] * ans_p[a])).epsilon(1e-12));
          total += std::exp(lp[0] + lp[1]);
        }
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }

  TEST_CASE("policy: surrogate gradient matches central differences") {
    const auto report = checks::gradient_check(50, 1e-5, 1);
    CHECK(report.instances == 50);
    CHECK(report.max_relative_error < 1e-4);
    CHECK(report.dead_zone_tokens > 0);
    CHECK(report.dead_zone_exact_zero);
  }

  TEST_CASE("policy: KL is non-negative and zero exactly for shifted logits") {
    Rng rng(21);
    std::normal_distribution<double> z(0.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
      Eigen::VectorXd p(2 + i % 5), q(2 + i % 5);
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        p[k] = z(rng);
        q[k] = z(rng);
      }
      CHECK(kl_categorical(p, q) >= 0.0);
      const double shift = z(rng);
      CHECK(kl_categorical(p, (p.array() + shift).matrix()) < 1e-12);
    }
  }

  TEST_CASE("policy: answer heads read only their own channel") {
    Rng rng(22);
    for (int i = 0; i < 200; ++i) {
      const auto d = random_dims(rng);
      const auto p = random_params(d, 1.0, rng);
      auto ctx = random_context(d, rng);
      const auto txt = answer_logits(p, ModeId::TXT, ctx);
      const auto grd = answer_logits(p, ModeId::GRD, ctx);
      auto moved_vis = ctx;
      moved_vis.vis = random_context(d, rng).vis;
      CHECK(answer_logits(p, ModeId::TXT, moved_vis) == txt);
      auto moved_sym = ctx;
      moved_sym.sym = random_context(d, rng).sym;
      CHECK(answer_logits(p, ModeId::GRD, moved_sym) == grd);
    }
  }
}

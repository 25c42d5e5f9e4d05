#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adagrpo/format.hpp"
#include "adagrpo/rng.hpp"
#include "adagrpo/rollout.hpp"

namespace adagrpo {

/// Raised when an intermediate value of the objective or its gradient is
/// NaN or infinite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vocabulary: prefix tokens {0: TXT, 1: GRD} live in their own id range,
/// answer tokens are 0..answers-1 in a second range. Feature widths are per
/// channel; `cue` is the task descriptor read only by the mode head.
struct PolicyDims {
  int answers = 4;
  int sym = 4;
  int vis = 4;
  int cue = 2;

  int mode_inputs() const { return sym + vis + cue + 1; }
  int answer_inputs(ModeId mode) const { return (mode == ModeId::TXT ? sym : vis) + 1; }
  bool operator==(const PolicyDims&) const = default;
};

struct ContextFeatures {
  Eigen::VectorXd sym;
  Eigen::VectorXd vis;
  Eigen::VectorXd cue;

  bool all_finite() const;
};

/// Mode-selection head over the full context plus one answer head per mode,
/// each reading only its own channel. Value type: updates return new values.
struct PolicyParameters {
  Eigen::MatrixXd mode;        // 2 x (sym + vis + cue + 1)
  Eigen::MatrixXd answer_txt;  // answers x (sym + 1)
  Eigen::MatrixXd answer_grd;  // answers x (vis + 1)

  static PolicyParameters zeros(const PolicyDims& dims);

  PolicyDims dims() const;
  const Eigen::MatrixXd& answer_head(ModeId m) const { return m == ModeId::TXT ? answer_txt : answer_grd; }
  Eigen::MatrixXd& answer_head(ModeId m) { return m == ModeId::TXT ? answer_txt : answer_grd; }

  bool all_finite() const;
  bool same_shape(const PolicyParameters& other) const;
  double squared_norm() const;
  double norm() const;
  std::size_t size() const;

  /// Flat row-major view for finite differences and checkpoints.
  std::vector<double> flatten() const;
  static PolicyParameters unflatten(const PolicyDims& dims, std::span<const double> values);

  PolicyParameters& operator+=(const PolicyParameters& rhs);
  PolicyParameters& operator*=(double s);
  bool operator==(const PolicyParameters& rhs) const;
};

PolicyParameters operator+(PolicyParameters lhs, const PolicyParameters& rhs);
PolicyParameters operator*(double s, PolicyParameters p);

Eigen::VectorXd mode_input(const ContextFeatures& ctx);
Eigen::VectorXd answer_input(ModeId mode, const ContextFeatures& ctx);

/// Throws std::invalid_argument on a shape mismatch between params and ctx.
Eigen::Vector2d mode_logits(const PolicyParameters& params, const ContextFeatures& ctx);
Eigen::VectorXd answer_logits(const PolicyParameters& params, ModeId mode,
                              const ContextFeatures& ctx);

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd softmax(const Eigen::VectorXd& logits, double temperature = 1.0);

/// Probability of the GRD prefix at the given sampling temperature.
double grd_probability(const PolicyParameters& params, const ContextFeatures& ctx,
                       double temperature = 1.0);

inline constexpr double kDefaultTemperature = 0.9;

struct SamplingOptions {
  double temperature = kDefaultTemperature;
  bool greedy = false;  // argmax decoding, lowest index on ties
};

/// Canonical think text for a mode; GRD placeholders carry one grounding span.
std::string placeholder_think(ModeId mode);
std::string answer_label(int answer);
std::string rollout_text(ModeId mode, int answer);

/// Samples the prefix (or takes `forced_prefix`), then the answer from that
/// mode's head. Log-probabilities are always recorded at temperature 1; a
/// forced prefix records the policy's own log P(mode | ctx).
RolloutSequence sample_rollout(const PolicyParameters& params, const ContextFeatures& ctx,
                               const SamplingOptions& options, std::optional<ModeId> forced_prefix,
                               Rng& rng);

/// [log P(mode | ctx), log P(answer | mode, ctx)].
std::array<double, 2> sequence_logprob(const PolicyParameters& params, ModeId mode, int answer,
                                       const ContextFeatures& ctx);

/// KL(softmax(p_logits) || softmax(q_logits)).
double kl_categorical(const Eigen::VectorXd& p_logits, const Eigen::VectorXd& q_logits);

struct ClippedTerm {
  double value = 0.0;
  double d_ratio = 0.0;  // derivative of value with respect to the ratio
};

/// min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv). When the clipped
/// branch is strictly smaller the term is flat in the ratio.
ClippedTerm clipped_surrogate_term(double ratio, double advantage, double clip_eps);

struct SurrogateSample {
  ContextFeatures context;
  ModeId mode = ModeId::TXT;
  int answer = 0;
  std::vector<double> advantages;  // one per token: prefix, answer
};

struct SurrogateOptions {
  double clip_eps = 0.2;
  double kl_coef = 0.04;
};

struct SurrogateResult {
  double objective = 0.0;  // clipped surrogate minus kl_coef * KL, averaged
  double surrogate = 0.0;
  double kl = 0.0;
  double clipped_fraction = 0.0;
  PolicyParameters gradient;
};

/// Value and exact gradient (w.r.t. `params`) of the token-averaged clipped
/// surrogate with a per-token KL penalty toward `ref`. Each rollout's tokens
/// are averaged, then rollouts are averaged. Throws NumericalError when any
/// intermediate is non-finite.
SurrogateResult surrogate_objective(const PolicyParameters& params,
                                    const PolicyParameters& old_params,
                                    const PolicyParameters& ref_params,
                                    std::span<const SurrogateSample> batch,
                                    const SurrogateOptions& options);

struct Demonstration {
  ContextFeatures context;
  ModeId mode = ModeId::TXT;
  int answer = 0;
};

/// Mean cross-entropy of the (mode, answer) pair over the batch.
double sft_loss(const PolicyParameters& params, std::span<const Demonstration> demos);
PolicyParameters sft_gradient(const PolicyParameters& params, std::span<const Demonstration> demos);

/// One plain gradient-descent step on sft_loss.
PolicyParameters sft_step(const PolicyParameters& params, std::span<const Demonstration> demos,
                          double lr);

/// Fixed-step gradient update with optional heavy-ball momentum.
class MomentumStep {
 public:
  MomentumStep(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  /// Returns params + lr * velocity for ascent, or minus for descent.
  PolicyParameters apply(const PolicyParameters& params, const PolicyParameters& gradient,
                         bool ascent);

 private:
  double lr_;
  double momentum_;
  std::optional<PolicyParameters> velocity_;
};

/// Free-format decoding: after the prefix, each step either emits a think
/// filler token (per-mode "stall" logit) or closes with an answer token.
/// Exercises format failure and the inference-time mode switch.
struct FreeFormatHead {
  std::array<double, 2> stall_logit{-1e9, -1e9};
};

struct FreeFormatDecode {
  ModeId mode = ModeId::TXT;
  std::optional<int> answer;  // empty when max_len was hit first
  int think_tokens = 0;
  std::string text;
};

FreeFormatDecode decode_free_format(const PolicyParameters& params, const FreeFormatHead& head,
                                    const ContextFeatures& ctx, std::optional<ModeId> forced_prefix,
                                    int max_len, const SamplingOptions& options, Rng& rng);

// Checkpoints: text, versioned. Layout
//   adagrpo-policy 1
//   dims <answers> <sym> <vis> <cue>
//   seed <seed>
//   mode <rows> <cols>        followed by rows of values, row-major
//   answer_txt <rows> <cols>  ...
//   answer_grd <rows> <cols>  ...
struct Checkpoint {
  PolicyParameters params;
  std::uint64_t seed = 0;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
/// Throws std::runtime_error describing the first malformed line.
Checkpoint read_checkpoint(std::istream& in);

}  // namespace adagrpo

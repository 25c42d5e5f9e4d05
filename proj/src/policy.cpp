#include "adagrpo/policy.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace adagrpo {

namespace {

int argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

int draw_token(const Eigen::VectorXd& logits, const SamplingOptions& options, Rng& rng) {
  if (options.greedy) return argmax(logits);
  if (!(options.temperature > 0.0)) throw std::invalid_argument("sampling temperature must be > 0");
  const Eigen::VectorXd probs = softmax(logits, options.temperature);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    cumulative += probs[k];
    if (u < cumulative) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size() - 1);
}

void check_context(const PolicyParameters& params, const ContextFeatures& ctx) {
  const PolicyDims d = params.dims();
  if (ctx.sym.size() != d.sym || ctx.vis.size() != d.vis || ctx.cue.size() != d.cue) {
    std::ostringstream msg;
    msg << "context shape (" << ctx.sym.size() << ", " << ctx.vis.size() << ", " << ctx.cue.size()
        << ") does not match policy (" << d.sym << ", " << d.vis << ", " << d.cue << ")";
    throw std::invalid_argument(msg.str());
  }
}

void require_finite(double v, const char* what, std::size_t rollout, int token) {
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-finite " << what << " at rollout " << rollout << ", token " << token;
    throw NumericalError(msg.str());
  }
}

Eigen::VectorXd one_hot(Eigen::Index size, int index) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
  v[index] = 1.0;
  return v;
}

}  // namespace

bool ContextFeatures::all_finite() const {
  return sym.allFinite() && vis.allFinite() && cue.allFinite();
}

PolicyParameters PolicyParameters::zeros(const PolicyDims& d) {
  if (d.answers < 1 || d.sym < 0 || d.vis < 0 || d.cue < 0) {
    throw std::invalid_argument("policy dims must be non-negative with at least one answer");
  }
  PolicyParameters p;
  p.mode = Eigen::MatrixXd::Zero(2, d.mode_inputs());
  p.answer_txt = Eigen::MatrixXd::Zero(d.answers, d.sym + 1);
  p.answer_grd = Eigen::MatrixXd::Zero(d.answers, d.vis + 1);
  return p;
}

PolicyDims PolicyParameters::dims() const {
  PolicyDims d;
  d.answers = static_cast<int>(answer_txt.rows());
  d.sym = static_cast<int>(answer_txt.cols()) - 1;
  d.vis = static_cast<int>(answer_grd.cols()) - 1;
  d.cue = static_cast<int>(mode.cols()) - d.sym - d.vis - 1;
  return d;
}

bool PolicyParameters::all_finite() const {
  return mode.allFinite() && answer_txt.allFinite() && answer_grd.allFinite();
}

bool PolicyParameters::same_shape(const PolicyParameters& o) const {
  return mode.rows() == o.mode.rows() && mode.cols() == o.mode.cols() &&
         answer_txt.rows() == o.answer_txt.rows() && answer_txt.cols() == o.answer_txt.cols() &&
         answer_grd.rows() == o.answer_grd.rows() && answer_grd.cols() == o.answer_grd.cols();
}

double PolicyParameters::squared_norm() const {
  return mode.squaredNorm() + answer_txt.squaredNorm() + answer_grd.squaredNorm();
}

double PolicyParameters::norm() const { return std::sqrt(squared_norm()); }

std::size_t PolicyParameters::size() const {
  return static_cast<std::size_t>(mode.size() + answer_txt.size() + answer_grd.size());
}

std::vector<double> PolicyParameters::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  for (const Eigen::MatrixXd* m : {&mode, &answer_txt, &answer_grd}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) out.push_back((*m)(r, c));
    }
  }
  return out;
}

PolicyParameters PolicyParameters::unflatten(const PolicyDims& dims, std::span<const double> values) {
  PolicyParameters p = zeros(dims);
  if (values.size() != p.size()) throw std::invalid_argument("unflatten: wrong number of values");
  std::size_t i = 0;
  for (Eigen::MatrixXd* m : {&p.mode, &p.answer_txt, &p.answer_grd}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) = values[i++];
    }
  }
  return p;
}

PolicyParameters& PolicyParameters::operator+=(const PolicyParameters& rhs) {
  if (!same_shape(rhs)) throw std::invalid_argument("policy parameter shapes differ");
  mode += rhs.mode;
  answer_txt += rhs.answer_txt;
  answer_grd += rhs.answer_grd;
  return *this;
}

PolicyParameters& PolicyParameters::operator*=(double s) {
  mode *= s;
  answer_txt *= s;
  answer_grd *= s;
  return *this;
}

bool PolicyParameters::operator==(const PolicyParameters& rhs) const {
  return same_shape(rhs) && mode == rhs.mode && answer_txt == rhs.answer_txt &&
         answer_grd == rhs.answer_grd;
}

PolicyParameters operator+(PolicyParameters lhs, const PolicyParameters& rhs) {
  lhs += rhs;
  return lhs;
}

PolicyParameters operator*(double s, PolicyParameters p) {
  p *= s;
  return p;
}

Eigen::VectorXd mode_input(const ContextFeatures& ctx) {
  Eigen::VectorXd x(ctx.sym.size() + ctx.vis.size() + ctx.cue.size() + 1);
  x << ctx.sym, ctx.vis, ctx.cue, 1.0;
  return x;
}

Eigen::VectorXd answer_input(ModeId mode, const ContextFeatures& ctx) {
  const Eigen::VectorXd& channel = mode == ModeId::TXT ? ctx.sym : ctx.vis;
  Eigen::VectorXd x(channel.size() + 1);
  x << channel, 1.0;
  return x;
}

Eigen::Vector2d mode_logits(const PolicyParameters& params, const ContextFeatures& ctx) {
  check_context(params, ctx);
  return params.mode * mode_input(ctx);
}

Eigen::VectorXd answer_logits(const PolicyParameters& params, ModeId mode,
                              const ContextFeatures& ctx) {
  check_context(params, ctx);
  return params.answer_head(mode) * answer_input(mode, ctx);
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return logits.array() - lse;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax temperature must be > 0");
  return log_softmax(logits / temperature).array().exp();
}

double grd_probability(const PolicyParameters& params, const ContextFeatures& ctx,
                       double temperature) {
  const Eigen::VectorXd logits = mode_logits(params, ctx);
  return softmax(logits, temperature)[mode_index(ModeId::GRD)];
}

std::string placeholder_think(ModeId mode) {
  return mode == ModeId::TXT ? "weigh the symbolic evidence" : "inspect region[0,0,8,8] closely";
}

std::string answer_label(int answer) { return std::to_string(answer + 1); }

std::string rollout_text(ModeId mode, int answer) {
  ParsedResponse resp;
  resp.mode = mode;
  resp.think = placeholder_think(mode);
  resp.answer = answer_label(answer);
  if (mode == ModeId::GRD) resp.grounding_spans = extract_grounding_spans(resp.think);
  return serialize(resp);
}

RolloutSequence sample_rollout(const PolicyParameters& params, const ContextFeatures& ctx,
                               const SamplingOptions& options, std::optional<ModeId> forced_prefix,
                               Rng& rng) {
  const Eigen::VectorXd m_logits = mode_logits(params, ctx);
  RolloutSequence seq;
  seq.forced_prefix = forced_prefix.has_value();
  seq.mode = forced_prefix ? *forced_prefix : static_cast<ModeId>(draw_token(m_logits, options, rng));
  const Eigen::VectorXd a_logits = answer_logits(params, seq.mode, ctx);
  seq.answer = draw_token(a_logits, options, rng);
  seq.logprobs = {log_softmax(m_logits)[mode_index(seq.mode)], log_softmax(a_logits)[seq.answer]};
  seq.text = rollout_text(seq.mode, seq.answer);
  return seq;
}

std::array<double, 2> sequence_logprob(const PolicyParameters& params, ModeId mode, int answer,
                                       const ContextFeatures& ctx) {
  if (answer < 0 || answer >= params.dims().answers) {
    throw std::invalid_argument("sequence_logprob: answer token " + std::to_string(answer) +
                                " outside vocabulary");
  }
  return {log_softmax(mode_logits(params, ctx))[mode_index(mode)],
          log_softmax(answer_logits(params, mode, ctx))[answer]};
}

double kl_categorical(const Eigen::VectorXd& p_logits, const Eigen::VectorXd& q_logits) {
  if (p_logits.size() != q_logits.size()) throw std::invalid_argument("kl_categorical: size mismatch");
  const Eigen::VectorXd log_p = log_softmax(p_logits);
  const Eigen::VectorXd log_q = log_softmax(q_logits);
  const double kl = (log_p.array().exp() * (log_p - log_q).array()).sum();
  return std::max(kl, 0.0);
}

ClippedTerm clipped_surrogate_term(double ratio, double advantage, double clip_eps) {
  const double clipped_ratio = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  const double unclipped = ratio * advantage;
  const double clipped = clipped_ratio * advantage;
  if (clipped < unclipped) return {clipped, 0.0};
  return {unclipped, advantage};
}

namespace {

// Contribution of one token: a categorical state with logits under the three
// policies and the emitted token. Returns d(objective)/d(logits) scaled by
// `weight` and adds the value terms to `result`.
Eigen::VectorXd token_logit_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& z_old,
                                     const Eigen::VectorXd& z_ref, int token, double advantage,
                                     double weight, const SurrogateOptions& options,
                                     SurrogateResult& result, std::size_t rollout, int position) {
  const Eigen::VectorXd log_p = log_softmax(z);
  const Eigen::VectorXd log_p_old = log_softmax(z_old);
  const Eigen::VectorXd log_q = log_softmax(z_ref);
  const Eigen::VectorXd p = log_p.array().exp();

  const double ratio = std::exp(log_p[token] - log_p_old[token]);
  require_finite(ratio, "probability ratio", rollout, position);
  const ClippedTerm term = clipped_surrogate_term(ratio, advantage, options.clip_eps);
  if (term.d_ratio == 0.0 && advantage != 0.0) result.clipped_fraction += 1.0;

  const Eigen::VectorXd log_gap = log_p - log_q;
  const double kl = (p.array() * log_gap.array()).sum();
  require_finite(kl, "KL divergence", rollout, position);

  result.surrogate += weight * term.value;
  result.kl += weight * kl;

  // d ratio / dz = ratio * (e_token - p); d KL / dz = p * (log p - log q - KL).
  Eigen::VectorXd grad = -term.d_ratio * ratio * p;
  grad[token] += term.d_ratio * ratio;
  grad -= options.kl_coef * (p.array() * (log_gap.array() - kl)).matrix();
  grad *= weight;
  return grad;
}

}  // namespace

SurrogateResult surrogate_objective(const PolicyParameters& params,
                                    const PolicyParameters& old_params,
                                    const PolicyParameters& ref_params,
                                    std::span<const SurrogateSample> batch,
                                    const SurrogateOptions& options) {
  if (!(options.clip_eps > 0.0)) throw std::invalid_argument("clip_eps must be > 0");
  if (!(options.kl_coef >= 0.0)) throw std::invalid_argument("kl_coef must be >= 0");
  if (!params.same_shape(old_params) || !params.same_shape(ref_params)) {
    throw std::invalid_argument("surrogate_objective: parameter snapshots differ in shape");
  }
  if (batch.empty()) throw std::invalid_argument("surrogate_objective: empty batch");

  SurrogateResult result;
  result.gradient = PolicyParameters::zeros(params.dims());
  const int answers = params.dims().answers;
  const double rollout_weight = 1.0 / static_cast<double>(batch.size());
  std::size_t tokens = 0;

  for (std::size_t j = 0; j < batch.size(); ++j) {
    const SurrogateSample& s = batch[j];
    if (s.advantages.size() != 2) {
      throw std::invalid_argument("surrogate_objective: expected two token advantages per rollout");
    }
    if (s.answer < 0 || s.answer >= answers) {
      throw std::invalid_argument("surrogate_objective: answer token outside vocabulary");
    }
    if (!s.context.all_finite()) throw NumericalError("non-finite context features at rollout " + std::to_string(j));
    const double weight = rollout_weight / 2.0;

    const Eigen::VectorXd xm = mode_input(s.context);
    const Eigen::VectorXd gz_mode = token_logit_gradient(
        mode_logits(params, s.context), mode_logits(old_params, s.context),
        mode_logits(ref_params, s.context), mode_index(s.mode), s.advantages[0], weight, options,
        result, j, 0);
    result.gradient.mode += gz_mode * xm.transpose();

    const Eigen::VectorXd xa = answer_input(s.mode, s.context);
    const Eigen::VectorXd gz_answer = token_logit_gradient(
        answer_logits(params, s.mode, s.context), answer_logits(old_params, s.mode, s.context),
        answer_logits(ref_params, s.mode, s.context), s.answer, s.advantages[1], weight, options,
        result, j, 1);
    result.gradient.answer_head(s.mode) += gz_answer * xa.transpose();
    tokens += 2;
  }

  result.objective = result.surrogate - options.kl_coef * result.kl;
  result.clipped_fraction /= static_cast<double>(tokens);
  if (!std::isfinite(result.objective) || !result.gradient.all_finite()) {
    throw NumericalError("non-finite surrogate objective or gradient");
  }
  return result;
}

double sft_loss(const PolicyParameters& params, std::span<const Demonstration> demos) {
  if (demos.empty()) throw std::invalid_argument("sft_loss: no demonstrations");
  double total = 0.0;
  for (const Demonstration& d : demos) {
    const auto lp = sequence_logprob(params, d.mode, d.answer, d.context);
    total -= lp[0] + lp[1];
  }
  return total / static_cast<double>(demos.size());
}

PolicyParameters sft_gradient(const PolicyParameters& params, std::span<const Demonstration> demos) {
  if (demos.empty()) throw std::invalid_argument("sft_gradient: no demonstrations");
  PolicyParameters grad = PolicyParameters::zeros(params.dims());
  const double w = 1.0 / static_cast<double>(demos.size());
  for (const Demonstration& d : demos) {
    const Eigen::VectorXd pm = softmax(mode_logits(params, d.context));
    grad.mode += w * (pm - one_hot(2, mode_index(d.mode))) * mode_input(d.context).transpose();
    const Eigen::VectorXd pa = softmax(answer_logits(params, d.mode, d.context));
    grad.answer_head(d.mode) +=
        w * (pa - one_hot(pa.size(), d.answer)) * answer_input(d.mode, d.context).transpose();
  }
  return grad;
}

PolicyParameters sft_step(const PolicyParameters& params, std::span<const Demonstration> demos,
                          double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("sft_step: learning rate must be > 0");
  return params + (-lr) * sft_gradient(params, demos);
}

PolicyParameters MomentumStep::apply(const PolicyParameters& params,
                                     const PolicyParameters& gradient, bool ascent) {
  if (!velocity_) {
    velocity_ = gradient;
  } else {
    *velocity_ *= momentum_;
    *velocity_ += gradient;
  }
  return params + ((ascent ? 1.0 : -1.0) * lr_) * (*velocity_);
}

FreeFormatDecode decode_free_format(const PolicyParameters& params, const FreeFormatHead& head,
                                    const ContextFeatures& ctx, std::optional<ModeId> forced_prefix,
                                    int max_len, const SamplingOptions& options, Rng& rng) {
  FreeFormatDecode out;
  out.mode = forced_prefix ? *forced_prefix
                           : static_cast<ModeId>(draw_token(mode_logits(params, ctx), options, rng));
  const Eigen::VectorXd a_logits = answer_logits(params, out.mode, ctx);
  Eigen::VectorXd step_logits(a_logits.size() + 1);
  step_logits << a_logits, head.stall_logit[static_cast<std::size_t>(mode_index(out.mode))];
  const int stall_token = static_cast<int>(a_logits.size());

  std::string think;
  for (int step = 0; step < max_len; ++step) {
    const int tok = draw_token(step_logits, options, rng);
    if (tok != stall_token) {
      out.answer = tok;
      break;
    }
    if (!think.empty()) think.push_back(' ');
    think += "step";
    ++out.think_tokens;
  }

  out.text = std::string(mode_prefix(out.mode)) + " <think>" + think;
  if (out.answer) out.text += "</think> <answer>" + answer_label(*out.answer) + "</answer>";
  return out;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const PolicyDims d = ckpt.params.dims();
  out << "adagrpo-policy 1\n";
  out << "dims " << d.answers << ' ' << d.sym << ' ' << d.vis << ' ' << d.cue << '\n';
  out << "seed " << ckpt.seed << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto write_matrix = [&](const char* name, const Eigen::MatrixXd& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
      out << '\n';
    }
  };
  write_matrix("mode", ckpt.params.mode);
  write_matrix("answer_txt", ckpt.params.answer_txt);
  write_matrix("answer_grd", ckpt.params.answer_grd);
}

Checkpoint read_checkpoint(std::istream& in) {
  auto fail = [](const std::string& what) -> std::runtime_error {
    return std::runtime_error("corrupt checkpoint: " + what);
  };
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "adagrpo-policy") throw fail("missing header");
  if (version != 1) throw fail("unsupported version " + std::to_string(version));

  PolicyDims d;
  if (!(in >> tag >> d.answers >> d.sym >> d.vis >> d.cue) || tag != "dims") throw fail("missing dims");
  if (d.answers < 1 || d.sym < 0 || d.vis < 0 || d.cue < 0) throw fail("invalid dims");

  Checkpoint ckpt;
  if (!(in >> tag >> ckpt.seed) || tag != "seed") throw fail("missing seed");
  ckpt.params = PolicyParameters::zeros(d);
  auto read_matrix = [&](const char* name, Eigen::MatrixXd& m) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    if (!(in >> tag >> rows >> cols) || tag != name) throw fail(std::string("missing matrix ") + name);
    if (rows != m.rows() || cols != m.cols()) throw fail(std::string("shape mismatch for ") + name);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(in >> m(r, c))) throw fail(std::string("truncated values in ") + name);
      }
    }
  };
  read_matrix("mode", ckpt.params.mode);
  read_matrix("answer_txt", ckpt.params.answer_txt);
  read_matrix("answer_grd", ckpt.params.answer_grd);
  if (!ckpt.params.all_finite()) throw fail("non-finite weights");
  in >> std::ws;
  if (!in.eof()) throw fail("trailing data");
  return ckpt;
}

}  // namespace adagrpo

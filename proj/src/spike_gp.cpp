#include "demexp/spike_gp.hpp"

#include "demexp/errors.hpp"
#include "demexp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace demexp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

bool accept(Rng& rng, double log_ratio) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(uniform01(rng)) < log_ratio;
}

}  // namespace

void SpikeGpConfig::validate() const {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw InvalidArgument("spike_gp.p0 must lie in [0, 1]");
  for (double v : {a_sigma_mu, b_sigma_mu, a_rho, b_rho, a_sigma, b_sigma, proposal_sd}) {
    if (!(v > 0.0)) throw InvalidArgument("spike_gp prior parameters and proposal_sd must be positive");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("spike_gp.alpha must lie in (0, 1]");
  if (burn_in < 0 || iterations <= burn_in) {
    throw InvalidArgument("spike_gp requires 0 <= burn_in < iterations");
  }
}

SpikeGpSampler::SpikeGpSampler(RegressionData data, SpikeGpConfig config)
    : data_(std::move(data)), config_(config) {
  config_.validate();
  data_.validate();
  if (data_.n() > 0) {
    require_full_column_rank(data_.x, "spike_gp");
    sq_dist_ = squared_distances(data_.x);
    xtx_inv_ = symmetrize((data_.x.transpose() * data_.x).inverse());
  }
}

SpikeGpState SpikeGpSampler::initial_state() const {
  SpikeGpState s;
  s.included = false;
  s.sigma_mu_sq = 0.0;
  s.rho = config_.b_rho / (config_.a_rho + 1.0);  // prior mode
  const Index n = data_.n();
  const Index p = data_.p();
  s.beta = Vector::Zero(p);
  s.sigma_sq = 1.0;
  if (n > 0) {
    s.beta = xtx_inv_ * (data_.x.transpose() * data_.y);
    const Vector resid = data_.y - data_.x * s.beta;
    if (n > p) s.sigma_sq = std::max(resid.squaredNorm() / static_cast<double>(n - p), 1e-12);
  }
  return s;
}

const Matrix& SpikeGpSampler::kernel_for(double rho) {
  ++tick_;
  for (auto& slot : kernels_) {
    if (slot.rho == rho) {
      slot.used = tick_;
      return slot.k;
    }
  }
  auto& slot = *std::min_element(kernels_.begin(), kernels_.end(),
                                 [](const auto& a, const auto& b) { return a.used < b.used; });
  slot.used = tick_;
  slot.rho = -1.0;
  Matrix k = squared_exponential_from_distances(sq_dist_, rho);
  slot.k = config_.orthogonalize ? project_gram(k, data_.x) : std::move(k);
  slot.rho = rho;
  return slot.k;
}

const CholeskyFactor& SpikeGpSampler::factor_for(double rho, double sigma_mu_sq, double sigma_sq) {
  ++tick_;
  for (auto& slot : factors_) {
    if (slot.rho == rho && slot.sigma_mu_sq == sigma_mu_sq && slot.sigma_sq == sigma_sq) {
      slot.used = tick_;
      return slot.factor;
    }
  }
  auto& slot = *std::min_element(factors_.begin(), factors_.end(),
                                 [](const auto& a, const auto& b) { return a.used < b.used; });
  slot.used = tick_;
  slot.rho = -1.0;
  Matrix cov = sigma_mu_sq * kernel_for(rho);
  cov.diagonal().array() += sigma_sq;
  slot.factor = factorize_psd(cov, "spike-and-GP marginal covariance");
  slot.rho = rho;
  slot.sigma_mu_sq = sigma_mu_sq;
  slot.sigma_sq = sigma_sq;
  return slot.factor;
}

double SpikeGpSampler::log_likelihood(const SpikeGpState& s) {
  const Index n = data_.n();
  if (n == 0) return 0.0;
  const Vector e = data_.y - data_.x * s.beta;
  const double dn = static_cast<double>(n);
  if (!s.included || s.sigma_mu_sq == 0.0) {
    return config_.alpha *
           (-0.5 * dn * (kLog2Pi + std::log(s.sigma_sq)) - 0.5 * e.squaredNorm() / s.sigma_sq);
  }
  const CholeskyFactor& f = factor_for(s.rho, s.sigma_mu_sq, s.sigma_sq);
  const Vector z = f.llt.matrixL().solve(e);
  return config_.alpha * (-0.5 * dn * kLog2Pi - 0.5 * f.log_det() - 0.5 * z.squaredNorm());
}

double SpikeGpSampler::log_prior_sigma_mu_sq(double v) const {
  return inverse_gamma_log_pdf(v, config_.a_sigma_mu, config_.b_sigma_mu);
}

double SpikeGpSampler::log_prior_rho(double v) const {
  return inverse_gamma_log_pdf(v, config_.a_rho, config_.b_rho);
}

// Prior proposals for (sigma_mu^2, rho) make the proposal densities cancel
// against the prior, leaving likelihood ratio times prior model odds.
void SpikeGpSampler::jump_move(SpikeGpState& s, Rng& rng) {
  const double log_p0 = std::log(config_.p0);
  const double log_p1 = std::log1p(-config_.p0);
  SpikeGpState proposal = s;
  double log_odds = 0.0;
  if (!s.included) {
    if (config_.p0 >= 1.0) return;
    proposal.included = true;
    proposal.sigma_mu_sq = inverse_gamma(rng, config_.a_sigma_mu, config_.b_sigma_mu);
    proposal.rho = inverse_gamma(rng, config_.a_rho, config_.b_rho);
    log_odds = log_p1 - log_p0;
  } else {
    if (config_.p0 <= 0.0) return;
    proposal.included = false;
    proposal.sigma_mu_sq = 0.0;
    proposal.rho = inverse_gamma(rng, config_.a_rho, config_.b_rho);
    log_odds = log_p0 - log_p1;
  }
  const double log_ratio = log_likelihood(proposal) - log_likelihood(s) + log_odds;
  if (accept(rng, log_ratio)) s = std::move(proposal);
}

void SpikeGpSampler::slab_moves(SpikeGpState& s, Rng& rng) {
  if (!s.included) {
    // rho does not enter the likelihood of the parametric model.
    s.rho = inverse_gamma(rng, config_.a_rho, config_.b_rho);
    return;
  }
  const double step = config_.proposal_sd;
  {
    SpikeGpState proposal = s;
    proposal.sigma_mu_sq = s.sigma_mu_sq * std::exp(step * standard_normal(rng));
    const double log_ratio = log_likelihood(proposal) - log_likelihood(s) +
                             log_prior_sigma_mu_sq(proposal.sigma_mu_sq) -
                             log_prior_sigma_mu_sq(s.sigma_mu_sq) +
                             std::log(proposal.sigma_mu_sq / s.sigma_mu_sq);
    if (accept(rng, log_ratio)) s.sigma_mu_sq = proposal.sigma_mu_sq;
  }
  {
    SpikeGpState proposal = s;
    proposal.rho = s.rho * std::exp(step * standard_normal(rng));
    const double log_ratio = log_likelihood(proposal) - log_likelihood(s) +
                             log_prior_rho(proposal.rho) - log_prior_rho(s.rho) +
                             std::log(proposal.rho / s.rho);
    if (accept(rng, log_ratio)) s.rho = proposal.rho;
  }
}

void SpikeGpSampler::draw_beta(SpikeGpState& s, Rng& rng) {
  if (data_.n() == 0) return;
  const double alpha = config_.alpha;
  if (!s.included || s.sigma_mu_sq == 0.0) {
    const Vector mean = xtx_inv_ * (data_.x.transpose() * data_.y);
    Eigen::LLT<Matrix> cov(xtx_inv_ * (s.sigma_sq / alpha));
    s.beta = mean + cov.matrixL() * standard_normal_vector(rng, mean.size());
    return;
  }
  const CholeskyFactor& f = factor_for(s.rho, s.sigma_mu_sq, s.sigma_sq);
  const Matrix w = f.half_solve(data_.x);           // L^{-1} X
  const Vector u = f.llt.matrixL().solve(data_.y);  // L^{-1} y
  Eigen::LLT<Matrix> precision(symmetrize(w.transpose() * w));
  if (precision.info() != Eigen::Success) {
    throw FactorizationError("X^T Sigma^{-1} X is not positive definite");
  }
  const Vector mean = precision.solve(w.transpose() * u);
  const Vector z = standard_normal_vector(rng, mean.size()) / std::sqrt(alpha);
  s.beta = mean + precision.matrixU().solve(z);
}

void SpikeGpSampler::draw_sigma_sq(SpikeGpState& s, Rng& rng) {
  const Index n = data_.n();
  if (n == 0) {
    s.sigma_sq = inverse_gamma(rng, config_.a_sigma, config_.b_sigma);
    return;
  }
  const double alpha = config_.alpha;
  if (!s.included || s.sigma_mu_sq == 0.0) {
    const double ssr = (data_.y - data_.x * s.beta).squaredNorm();
    s.sigma_sq = inverse_gamma(rng, config_.a_sigma + 0.5 * alpha * static_cast<double>(n),
                               config_.b_sigma + 0.5 * alpha * ssr);
    return;
  }
  // The log-variance posterior has sd of roughly sqrt(2 / (alpha N)).
  const double step = std::min(1.0, 2.4 * std::sqrt(2.0 / (alpha * static_cast<double>(n))));
  SpikeGpState proposal = s;
  proposal.sigma_sq = s.sigma_sq * std::exp(step * standard_normal(rng));
  const double log_ratio =
      log_likelihood(proposal) - log_likelihood(s) +
      inverse_gamma_log_pdf(proposal.sigma_sq, config_.a_sigma, config_.b_sigma) -
      inverse_gamma_log_pdf(s.sigma_sq, config_.a_sigma, config_.b_sigma) +
      std::log(proposal.sigma_sq / s.sigma_sq);
  if (accept(rng, log_ratio)) s.sigma_sq = proposal.sigma_sq;
}

void SpikeGpSampler::step(SpikeGpState& state, Rng& rng) {
  jump_move(state, rng);
  slab_moves(state, rng);
  draw_beta(state, rng);
  draw_sigma_sq(state, rng);
}

Vector SpikeGpSampler::conditional_mean_function(const SpikeGpState& s) {
  Vector linear = data_.x * s.beta;
  if (!s.included || s.sigma_mu_sq == 0.0 || data_.n() == 0) return linear;
  const Vector e = data_.y - linear;
  const Vector weights = factor_for(s.rho, s.sigma_mu_sq, s.sigma_sq).solve(e);
  return linear + s.sigma_mu_sq * (kernel_for(s.rho) * weights);
}

double marginal_log_likelihood(const RegressionData& data, const SpikeGpState& state,
                               double alpha, bool orthogonalize) {
  if (state.beta.size() != data.p()) {
    throw DimensionError("beta has " + std::to_string(state.beta.size()) +
                         " entries, design has " + std::to_string(data.p()) + " columns");
  }
  SpikeGpConfig config;
  config.alpha = alpha;
  config.orthogonalize = orthogonalize;
  SpikeGpSampler sampler(data, config);
  return sampler.log_likelihood(state);
}

SpikeGpState mcmc_step(const SpikeGpState& state, const RegressionData& data,
                       const SpikeGpConfig& config, Rng& rng) {
  SpikeGpSampler sampler(data, config);
  SpikeGpState next = state;
  sampler.step(next, rng);
  return next;
}

McmcChain run_chain(const RegressionData& data, const SpikeGpConfig& config, Rng& rng) {
  SpikeGpSampler sampler(data, config);
  SpikeGpState state = sampler.initial_state();
  McmcChain chain;
  const int kept = config.iterations - config.burn_in;
  chain.draws.reserve(static_cast<std::size_t>(kept));
  const bool track = data.n() > 0;
  if (track) chain.mu_mean = Vector::Zero(data.n());
  for (int it = 0; it < config.iterations; ++it) {
    try {
      sampler.step(state, rng);
    } catch (const FactorizationError& e) {
      throw FactorizationError(std::string(e.what()) + " (spike_gp iteration " +
                               std::to_string(it) + ", rho=" + std::to_string(state.rho) +
                               ", sigma_mu^2=" + std::to_string(state.sigma_mu_sq) + ")");
    }
    if (it < config.burn_in) continue;
    McmcDraw draw;
    draw.beta = state.beta;
    draw.sigma = std::sqrt(state.sigma_sq);
    draw.included = state.included;
    draw.sigma_mu_sq = state.sigma_mu_sq;
    draw.rho = state.rho;
    if (track) chain.mu_mean += sampler.conditional_mean_function(state);
    chain.draws.push_back(std::move(draw));
  }
  if (track) chain.mu_mean /= static_cast<double>(chain.draws.size());
  return chain;
}

double inclusion_probability(const McmcChain& chain) {
  if (chain.empty()) throw InvalidArgument("inclusion probability of an empty chain");
  std::size_t count = 0;
  for (const auto& d : chain.draws) count += d.included ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(chain.size());
}

}  // namespace demexp

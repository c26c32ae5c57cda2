#include "demexp/gbart.hpp"

#include "demexp/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>

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

std::size_t uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

// log [ q(d) (1 - q(d+1))^2 / (1 - q(d)) ]: prior ratio of splitting a depth-d leaf.
double log_split_prior_ratio(const BartPrior& prior, int depth) {
  const double q = prior.branch_probability(depth);
  const double q_child = prior.branch_probability(depth + 1);
  return std::log(q) + 2.0 * std::log1p(-q_child) - std::log1p(-q);
}

Tree sample_subtree(const BartPrior& prior, const std::vector<int>& vars,
                    const std::vector<PredictorRange>& ranges, Rng& rng) {
  const double leaf_sd = std::sqrt(prior.leaf_variance());
  Tree tree(leaf_sd * standard_normal(rng));
  std::vector<int> frontier{Tree::kRoot};
  while (!frontier.empty()) {
    std::vector<int> next;
    for (int id : frontier) {
      const int depth = tree.node(id).depth;
      if (uniform01(rng) >= prior.branch_probability(depth)) continue;
      const int var = vars[uniform_index(rng, vars.size())];
      const auto& r = ranges[static_cast<std::size_t>(var)];
      const double cut = r.min + (r.max - r.min) * uniform01(rng);
      const double lv = leaf_sd * standard_normal(rng);
      const double rv = leaf_sd * standard_normal(rng);
      const auto [l, rr] = tree.split(id, var, cut, lv, rv);
      next.push_back(l);
      next.push_back(rr);
    }
    frontier = std::move(next);
  }
  return tree;
}

}  // namespace

double BartPrior::branch_probability(int depth) const {
  return branch_a / std::pow(1.0 + branch_b, depth);
}

double BartPrior::leaf_variance() const {
  return sigma_mu * sigma_mu / static_cast<double>(num_trees);
}

void BartPrior::validate() const {
  if (num_trees < 1) throw InvalidArgument("gbart.num_trees must be positive");
  if (!(branch_a >= 0.0 && branch_a < 1.0)) throw InvalidArgument("gbart.branch_a must lie in [0, 1)");
  if (!(branch_b >= 0.0)) throw InvalidArgument("gbart.branch_b must be nonnegative");
  if (!(sigma_mu > 0.0)) throw InvalidArgument("gbart.sigma_mu must be positive");
}

void GbartRunConfig::validate() const {
  if (burn_in < 0 || iterations <= burn_in) {
    throw InvalidArgument("gbart requires 0 <= burn_in < iterations");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("gbart.alpha must lie in (0, 1]");
  if (!(sigma_nu > 0.0)) throw InvalidArgument("gbart.sigma_nu must be positive");
  if (!(sigma_quantile > 0.0 && sigma_quantile < 1.0)) {
    throw InvalidArgument("gbart.sigma_quantile must lie in (0, 1)");
  }
}

Tree sample_tree_prior(const BartPrior& prior, const std::vector<PredictorRange>& ranges,
                       Rng& rng) {
  std::vector<int> vars;
  for (std::size_t j = 0; j < ranges.size(); ++j) {
    if (ranges[j].max > ranges[j].min) vars.push_back(static_cast<int>(j));
  }
  if (vars.empty()) throw InvalidArgument("tree prior needs a predictor with nonzero range");
  return sample_subtree(prior, vars, ranges, rng);
}

double prior_all_empty_probability(const BartPrior& prior) {
  return std::pow(1.0 - prior.branch_a, prior.num_trees);
}

Vector forest_predict(const GbartState& state, const Matrix& x) {
  if (x.cols() != state.beta.size()) {
    throw DimensionError("forest_predict: design has " + std::to_string(x.cols()) +
                         " columns, model has " + std::to_string(state.beta.size()));
  }
  Vector out = x * state.beta;
  for (const auto& tree : state.forest) out += tree.predict(x);
  return (state.y_shift + state.y_scale * out.array()).matrix();
}

bool is_all_empty(const GbartState& state) {
  return std::all_of(state.forest.begin(), state.forest.end(),
                     [](const Tree& t) { return t.is_stump(); });
}

double tree_log_marginal_likelihood(const Tree& tree, const Matrix& x, const Vector& residuals,
                                    double sigma, double leaf_variance, double alpha) {
  if (x.rows() != residuals.size()) throw DimensionError("residuals and design rows differ");
  const double s2 = sigma * sigma;
  const double s2e = s2 / alpha;
  const double n_total = static_cast<double>(residuals.size());
  std::vector<double> count(tree.capacity(), 0.0), sum(tree.capacity(), 0.0);
  for (Index i = 0; i < x.rows(); ++i) {
    const auto leaf = static_cast<std::size_t>(tree.leaf_for(x, i));
    count[leaf] += 1.0;
    sum[leaf] += residuals(i);
  }
  // prod N(r; lambda, s2)^alpha = (2 pi s2)^{-alpha n/2} (2 pi s2e)^{n/2} prod N(r; lambda, s2e)
  double out = -0.5 * alpha * n_total * (kLog2Pi + std::log(s2)) +
               0.5 * n_total * (kLog2Pi + std::log(s2e));
  out += -0.5 * n_total * (kLog2Pi + std::log(s2e)) - 0.5 * residuals.squaredNorm() / s2e;
  for (int leaf : tree.leaves()) {
    const double n = count[static_cast<std::size_t>(leaf)];
    const double s = sum[static_cast<std::size_t>(leaf)];
    out += -0.5 * std::log1p(n * leaf_variance / s2e) +
           leaf_variance * s * s / (2.0 * s2e * (s2e + n * leaf_variance));
  }
  return out;
}

double grow_log_proposal_ratio(int leaves_before, int prunable_after, double cut_width,
                               double var_range) {
  return std::log(static_cast<double>(leaves_before)) -
         std::log(static_cast<double>(prunable_after)) + std::log(cut_width) -
         std::log(var_range);
}

GbartSampler::GbartSampler(RegressionData data, BartPrior prior, GbartRunConfig config)
    : data_(std::move(data)), prior_(prior), config_(config) {
  prior_.validate();
  config_.validate();
  data_.validate();
  const Index n = data_.n();
  const Index p = data_.p();
  if (n < 1) throw InvalidArgument("gbart needs at least one observation");

  const double y_min = data_.y.minCoeff();
  const double y_max = data_.y.maxCoeff();
  y_shift_ = 0.5 * (y_max + y_min);
  y_scale_ = y_max > y_min ? y_max - y_min : 1.0;
  y_std_ = ((data_.y.array() - y_shift_) / y_scale_).matrix();

  for (Index j = 0; j < p; ++j) {
    const double lo = data_.x.col(j).minCoeff();
    const double hi = data_.x.col(j).maxCoeff();
    ranges_.push_back({lo, hi});
    if (hi > lo) split_vars_.push_back(static_cast<int>(j));
    if (intercept_ < 0 && lo == 1.0 && hi == 1.0) intercept_ = j;
  }

  bool full_rank = n >= p;
  if (full_rank) {
    Eigen::ColPivHouseholderQR<Matrix> qr(data_.x);
    full_rank = qr.rank() == p;
  }
  if (config_.linear_component) {
    require_full_column_rank(data_.x, "gbart");
    if (intercept_ < 0) {
      throw InvalidArgument("gbart with a linear component requires an intercept column of ones");
    }
  }
  if (full_rank) {
    const Matrix xtx_inv = symmetrize((data_.x.transpose() * data_.x).inverse());
    ls_operator_ = xtx_inv * data_.x.transpose();
    xtx_inv_chol_ = Eigen::LLT<Matrix>(xtx_inv).matrixL();
  }

  // Calibrate sigma^2 ~ nu lambda / chi^2_nu so that P(sigma < sigma_hat) = q.
  double sigma_hat_sq = 0.0;
  if (full_rank && n > p) {
    const Vector resid = y_std_ - data_.x * (ls_operator_ * y_std_);
    sigma_hat_sq = resid.squaredNorm() / static_cast<double>(n - p);
  } else if (n > 1) {
    sigma_hat_sq = (y_std_.array() - y_std_.mean()).square().sum() / static_cast<double>(n - 1);
  }
  if (!(sigma_hat_sq > 0.0)) sigma_hat_sq = 1e-4;
  const double nu = config_.sigma_nu;
  const double chi_q = boost::math::quantile(boost::math::chi_squared_distribution<double>(nu),
                                             1.0 - config_.sigma_quantile);
  const double lambda = sigma_hat_sq * chi_q / nu;
  sigma_shape_ = 0.5 * nu;
  sigma_scale_ = 0.5 * nu * lambda;

  scratch_.reserve(static_cast<std::size_t>(n));
}

GbartState GbartSampler::initial_state() const {
  GbartState s;
  s.forest.assign(static_cast<std::size_t>(prior_.num_trees), Tree(0.0));
  s.beta = Vector::Zero(data_.p());
  if (config_.linear_component) s.beta = ls_operator_ * y_std_;
  const Vector resid = y_std_ - data_.x * s.beta;
  s.sigma = std::sqrt(std::max(resid.squaredNorm() / static_cast<double>(data_.n()), 1e-8));
  s.sigma_mu = prior_.sigma_mu;
  s.y_shift = y_shift_;
  s.y_scale = y_scale_;
  return s;
}

void GbartSampler::attach(const GbartState& state) {
  if (state.beta.size() != data_.p()) throw DimensionError("gbart state beta has wrong length");
  const Index n = data_.n();
  tree_fit_.assign(state.forest.size(), Vector::Zero(n));
  leaf_of_.assign(state.forest.size(), std::vector<int>(static_cast<std::size_t>(n), 0));
  forest_fit_ = Vector::Zero(n);
  for (std::size_t t = 0; t < state.forest.size(); ++t) {
    for (Index i = 0; i < n; ++i) {
      const int leaf = state.forest[t].leaf_for(data_.x, i);
      leaf_of_[t][static_cast<std::size_t>(i)] = leaf;
      tree_fit_[t](i) = state.forest[t].node(leaf).value;
    }
    forest_fit_ += tree_fit_[t];
  }
}

double GbartSampler::leaf_log_ml(double n, double sum, double sigma_sq) const {
  const double tau2 = leaf_var_;
  return -0.5 * std::log1p(n * tau2 / sigma_sq) +
         tau2 * sum * sum / (2.0 * sigma_sq * (sigma_sq + n * tau2));
}

void GbartSampler::grow(Tree& tree, std::vector<int>& leaf_of, const Vector& resid,
                        double sigma_sq, Rng& rng) {
  const std::vector<int> leaves = tree.leaves();
  const int leaf = leaves[uniform_index(rng, leaves.size())];
  const int var = split_vars_[uniform_index(rng, split_vars_.size())];

  scratch_.clear();
  double lo = INFINITY;
  double hi = -INFINITY;
  for (std::size_t i = 0; i < leaf_of.size(); ++i) {
    if (leaf_of[i] != leaf) continue;
    scratch_.push_back(static_cast<int>(i));
    const double v = data_.x(static_cast<Index>(i), var);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (scratch_.size() < 2 || !(hi > lo)) return;
  const double cut = lo + (hi - lo) * uniform01(rng);
  if (!(cut > lo)) return;

  double n_left = 0.0, s_left = 0.0, n_right = 0.0, s_right = 0.0;
  for (int i : scratch_) {
    if (data_.x(i, var) < cut) {
      n_left += 1.0;
      s_left += resid(i);
    } else {
      n_right += 1.0;
      s_right += resid(i);
    }
  }
  const double delta_ml = leaf_log_ml(n_left, s_left, sigma_sq) +
                          leaf_log_ml(n_right, s_right, sigma_sq) -
                          leaf_log_ml(n_left + n_right, s_left + s_right, sigma_sq);

  const TreeNode& node = tree.node(leaf);
  int prunable_after = static_cast<int>(tree.prunable().size()) + 1;
  if (node.parent >= 0) {
    const TreeNode& parent = tree.node(node.parent);
    const int sibling = parent.left == leaf ? parent.right : parent.left;
    if (tree.node(sibling).is_leaf()) --prunable_after;
  }
  const auto& range = ranges_[static_cast<std::size_t>(var)];
  const double log_ratio =
      delta_ml + log_split_prior_ratio(prior_, node.depth) +
      grow_log_proposal_ratio(static_cast<int>(leaves.size()), prunable_after, hi - lo,
                              range.max - range.min);
  if (!accept(rng, log_ratio)) return;

  const auto [left, right] = tree.split(leaf, var, cut, 0.0, 0.0);
  for (int i : scratch_) {
    leaf_of[static_cast<std::size_t>(i)] = data_.x(i, var) < cut ? left : right;
  }
}

void GbartSampler::prune(Tree& tree, std::vector<int>& leaf_of, const Vector& resid,
                         double sigma_sq, Rng& rng) {
  const std::vector<int> candidates = tree.prunable();
  if (candidates.empty()) return;
  const int id = candidates[uniform_index(rng, candidates.size())];
  const TreeNode& node = tree.node(id);
  const int left = node.left;
  const int right = node.right;
  const int var = node.split_var;

  scratch_.clear();
  double lo = INFINITY;
  double hi = -INFINITY;
  double n_left = 0.0, s_left = 0.0, n_right = 0.0, s_right = 0.0;
  for (std::size_t i = 0; i < leaf_of.size(); ++i) {
    const int leaf = leaf_of[i];
    if (leaf != left && leaf != right) continue;
    scratch_.push_back(static_cast<int>(i));
    const double v = data_.x(static_cast<Index>(i), var);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    if (leaf == left) {
      n_left += 1.0;
      s_left += resid(static_cast<Index>(i));
    } else {
      n_right += 1.0;
      s_right += resid(static_cast<Index>(i));
    }
  }
  const double delta_ml = leaf_log_ml(n_left, s_left, sigma_sq) +
                          leaf_log_ml(n_right, s_right, sigma_sq) -
                          leaf_log_ml(n_left + n_right, s_left + s_right, sigma_sq);
  const auto& range = ranges_[static_cast<std::size_t>(var)];
  const int leaves_after = tree.num_leaves() - 1;
  const double log_grow =
      delta_ml + log_split_prior_ratio(prior_, node.depth) +
      grow_log_proposal_ratio(leaves_after, static_cast<int>(candidates.size()), hi - lo,
                              range.max - range.min);
  if (!accept(rng, -log_grow)) return;

  tree.collapse(id, 0.0);
  for (int i : scratch_) leaf_of[static_cast<std::size_t>(i)] = id;
}

void GbartSampler::draw_leaves(Tree& tree, const std::vector<int>& leaf_of, const Vector& resid,
                               double sigma_sq, Rng& rng) {
  const double tau2 = leaf_var_;
  std::vector<double> count(tree.capacity(), 0.0), sum(tree.capacity(), 0.0);
  for (std::size_t i = 0; i < leaf_of.size(); ++i) {
    const auto leaf = static_cast<std::size_t>(leaf_of[i]);
    count[leaf] += 1.0;
    sum[leaf] += resid(static_cast<Index>(i));
  }
  for (int leaf : tree.leaves()) {
    const auto l = static_cast<std::size_t>(leaf);
    const double precision = count[l] / sigma_sq + 1.0 / tau2;
    const double mean = (sum[l] / sigma_sq) / precision;
    tree.set_value(leaf, mean + standard_normal(rng) / std::sqrt(precision));
  }
}

void GbartSampler::update_tree(GbartState& state, std::size_t t, Rng& rng) {
  Tree& tree = state.forest[t];
  std::vector<int>& leaf_of = leaf_of_[t];
  Vector& fit = tree_fit_[t];
  const double sigma_sq = state.sigma * state.sigma / config_.alpha;

  Vector resid = y_std_ - forest_fit_ + fit;
  if (config_.linear_component) resid.noalias() -= data_.x * state.beta;

  if (!split_vars_.empty()) {
    if (uniform01(rng) < 0.5) {
      grow(tree, leaf_of, resid, sigma_sq, rng);
    } else {
      prune(tree, leaf_of, resid, sigma_sq, rng);
    }
  }
  draw_leaves(tree, leaf_of, resid, sigma_sq, rng);

  for (std::size_t i = 0; i < leaf_of.size(); ++i) {
    const double v = tree.node(leaf_of[i]).value;
    const auto ii = static_cast<Index>(i);
    forest_fit_(ii) += v - fit(ii);
    fit(ii) = v;
  }
}

// Independence proposal tau^2 ~ InvGam(M/2, SS/2), the conditional under
// p(tau) ~ 1/tau, corrected to the half-Cauchy by the weight tau / (1 + tau^2 / c^2).
void GbartSampler::draw_sigma_mu(GbartState& state, Rng& rng) {
  double count = 0.0;
  double ss = 0.0;
  for (const auto& tree : state.forest) {
    for (int leaf : tree.leaves()) {
      const double v = tree.node(leaf).value;
      count += 1.0;
      ss += v * v;
    }
  }
  if (!(ss > 0.0)) return;
  const double trees = static_cast<double>(prior_.num_trees);
  const double c2 = prior_.sigma_mu * prior_.sigma_mu / trees;
  auto log_weight = [c2](double tau2) { return 0.5 * std::log(tau2) - std::log1p(tau2 / c2); };
  const double current = state.sigma_mu * state.sigma_mu / trees;
  const double proposed = inverse_gamma(rng, 0.5 * count, 0.5 * ss);
  if (accept(rng, log_weight(proposed) - log_weight(current))) {
    state.sigma_mu = std::sqrt(proposed * trees);
  }
}

void GbartSampler::draw_beta(GbartState& state, Rng& rng) {
  if (!config_.linear_component) return;
  const Vector target = y_std_ - forest_fit_;
  const double sd = state.sigma / std::sqrt(config_.alpha);
  state.beta = ls_operator_ * target +
               sd * (xtx_inv_chol_ * standard_normal_vector(rng, data_.p()));
}

void GbartSampler::draw_sigma(GbartState& state, Rng& rng) {
  Vector resid = y_std_ - forest_fit_;
  if (config_.linear_component) resid.noalias() -= data_.x * state.beta;
  const double n = static_cast<double>(data_.n());
  const double shape = sigma_shape_ + 0.5 * config_.alpha * n;
  const double scale = sigma_scale_ + 0.5 * config_.alpha * resid.squaredNorm();
  state.sigma = std::sqrt(inverse_gamma(rng, shape, scale));
}

void GbartSampler::sweep(GbartState& state, Rng& rng) {
  if (state.forest.size() != tree_fit_.size()) attach(state);
  if (!config_.freeze_forest) {
    // Resynchronize the running forest sum once per sweep to stop drift.
    forest_fit_.setZero();
    for (const auto& fit : tree_fit_) forest_fit_ += fit;
    leaf_var_ = state.sigma_mu * state.sigma_mu / static_cast<double>(prior_.num_trees);
    for (std::size_t t = 0; t < state.forest.size(); ++t) update_tree(state, t, rng);
    if (prior_.sigma_mu_half_cauchy) draw_sigma_mu(state, rng);
  }
  draw_beta(state, rng);
  draw_sigma(state, rng);
}

GbartState gibbs_sweep(const GbartState& state, const RegressionData& data,
                       const BartPrior& prior, const GbartRunConfig& run, Rng& rng) {
  GbartSampler sampler(data, prior, run);
  GbartState next = state;
  sampler.attach(next);
  sampler.sweep(next, rng);
  return next;
}

McmcChain fit_gbart(const RegressionData& data, const BartPrior& prior, const GbartRunConfig& run,
                    Rng& rng) {
  GbartSampler sampler(data, prior, run);
  GbartState state = sampler.initial_state();
  sampler.attach(state);

  const Index n = data.n();
  const Index p = data.p();
  const Index ic = sampler.intercept_column();
  const int kept = run.iterations - run.burn_in;
  Matrix ls;
  {
    Eigen::ColPivHouseholderQR<Matrix> qr(data.x);
    if (n >= p && qr.rank() == p) ls = least_squares_operator(data.x);
  }

  McmcChain chain;
  chain.draws.reserve(static_cast<std::size_t>(kept));
  chain.mu_mean = Vector::Zero(n);
  if (run.keep_mu_draws) chain.mu_draws.resize(kept, n);

  for (int it = 0; it < run.iterations; ++it) {
    sampler.sweep(state, rng);
    if (it < run.burn_in) continue;

    const Vector& forest = sampler.forest_fit();
    const Vector linear = data.x * state.beta;
    const Vector mu = (state.y_shift + state.y_scale * (linear + forest).array()).matrix();

    McmcDraw draw;
    draw.beta = Vector::Zero(p);
    if (run.linear_component) {
      draw.beta = state.y_scale * state.beta;
      const double forest_mean = state.y_scale * forest.mean();
      draw.beta(ic) += state.y_shift + forest_mean;
    } else if (ic >= 0) {
      draw.beta(ic) = state.y_shift;
    }
    draw.sigma = state.y_scale * state.sigma;
    draw.sigma_mu_sq = std::pow(state.y_scale * state.sigma_mu, 2);
    draw.all_empty = is_all_empty(state);
    if (ls.size() > 0) {
      const Vector fitted = data.x * (ls * mu);
      const double tss = (mu.array() - mu.mean()).square().sum();
      if (tss > 0.0) draw.r_squared = 1.0 - (mu - fitted).squaredNorm() / tss;
    }

    const auto k = static_cast<Index>(chain.draws.size());
    chain.mu_mean += mu;
    if (run.keep_mu_draws) chain.mu_draws.row(k) = mu.transpose();
    chain.draws.push_back(std::move(draw));
  }
  chain.mu_mean /= static_cast<double>(chain.draws.size());
  return chain;
}

}  // namespace demexp

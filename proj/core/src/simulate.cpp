#include "rsreg/simulate.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace rsreg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::VectorXd normal_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

bool gaussian_loss(const Potential& pot) {
  return pot.is_quadratic() || pot.is_zero();
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t root, std::string_view label) {
  // FNV-1a over the label, then a splitmix64 finalizer on top of the root.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(root ^ h);
}

SimulationInstance generate_instance(const ModelParams& params, int n,
                                     std::uint64_t seed, XStarMode mode) {
  if (n < 1) throw std::invalid_argument("generate_instance: n must be >= 1");
  const int m = static_cast<int>(std::floor(params.alpha * n));
  if (m < 1) throw std::invalid_argument("generate_instance: alpha*n gives zero samples");

  SimulationInstance inst;
  inst.n = n;
  inst.m = m;
  inst.seed = seed;

  {
    std::mt19937_64 rng(substream_seed(seed, "design"));
    std::normal_distribution<double> normal(0.0, 1.0);
    inst.g_bar.resize(m, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < m; ++k)
      for (int i = 0; i < n; ++i) inst.g_bar(k, i) = scale * normal(rng);
  }
  {
    std::mt19937_64 rng(substream_seed(seed, "noise"));
    inst.z = std::sqrt(params.delta_star) * normal_vector(rng, m);
  }
  switch (mode) {
    case XStarMode::DeterministicNorm:
      inst.x_star = Eigen::VectorXd::Constant(n, std::sqrt(params.gamma));
      break;
    case XStarMode::Gaussian: {
      std::mt19937_64 rng(substream_seed(seed, "xstar"));
      inst.x_star = std::sqrt(params.gamma) * normal_vector(rng, n);
      break;
    }
  }
  inst.y = inst.g_bar * inst.x_star + inst.z;
  return inst;
}

GaussianPosterior factor_posterior(const SimulationInstance& inst,
                                   const Potential& pot, double kappa) {
  if (!gaussian_loss(pot))
    throw std::invalid_argument("factor_posterior: requires quadratic or zero loss");

  const int n = inst.n;
  Eigen::MatrixXd precision;
  Eigen::VectorXd linear;
  if (pot.is_quadratic()) {
    const double delta = pot.delta();
    precision = inst.g_bar.transpose() * inst.g_bar / delta +
                2.0 * kappa * Eigen::MatrixXd::Identity(n, n);
    linear = inst.g_bar.transpose() * inst.y / delta;
  } else {
    precision = 2.0 * kappa * Eigen::MatrixXd::Identity(n, n);
    linear = Eigen::VectorXd::Zero(n);
  }

  GaussianPosterior post;
  post.llt.compute(precision);
  if (post.llt.info() != Eigen::Success)
    throw std::runtime_error("factor_posterior: Cholesky factorization failed");
  post.mean = post.llt.solve(linear);
  post.log_det_precision = 0.0;
  for (int i = 0; i < n; ++i)
    post.log_det_precision += 2.0 * std::log(post.llt.matrixL()(i, i));
  return post;
}

PosteriorSummary exact_posterior(const SimulationInstance& inst,
                                 const Potential& pot, double kappa) {
  const GaussianPosterior post = factor_posterior(inst, pot, kappa);
  const int n = inst.n;

  PosteriorSummary summary;
  summary.method = "exact_gaussian";
  summary.x_hat = post.mean;
  summary.mse_per_n = (post.mean - inst.x_star).squaredNorm() / n;

  const double quad_term = pot.is_quadratic()
                               ? -inst.y.squaredNorm() / (2.0 * pot.delta())
                               : 0.0;
  // ln Z = -||y||^2/(2 delta) + (1/2) x_hat' P x_hat + (N/2) ln 2pi - (1/2) ln det P
  const double xpx = pot.is_quadratic()
                         ? post.mean.dot(inst.g_bar.transpose() * inst.y / pot.delta())
                         : 0.0;
  summary.free_energy =
      (quad_term + 0.5 * xpx + 0.5 * n * std::log(2.0 * std::numbers::pi) -
       0.5 * post.log_det_precision) /
      n;
  return summary;
}

std::vector<Eigen::MatrixXd> draw_exact_replicas(const GaussianPosterior& post,
                                                 int n_replicas, int n_samples,
                                                 std::uint64_t seed) {
  const int n = static_cast<int>(post.mean.size());
  std::vector<Eigen::MatrixXd> out;
  out.reserve(n_replicas);
  for (int rep = 0; rep < n_replicas; ++rep) {
    std::mt19937_64 rng(substream_seed(seed, "chain" + std::to_string(rep)));
    Eigen::MatrixXd samples(n_samples, n);
    for (int t = 0; t < n_samples; ++t) {
      // x = mean + L^{-T} xi has covariance P^{-1}
      Eigen::VectorXd xi = normal_vector(rng, n);
      samples.row(t) =
          (post.mean + post.llt.matrixU().solve(xi)).transpose();
    }
    out.push_back(std::move(samples));
  }
  return out;
}

MalaResult mala_sample(const SimulationInstance& inst, const Potential& pot,
                       double kappa, const SamplerConfig& cfg, int n_replicas,
                       std::uint64_t seed) {
  if (cfg.step <= 0.0 || cfg.samples < 1 || cfg.thin < 1 ||
      !(cfg.target_accept > 0.0 && cfg.target_accept < 1.0))
    throw std::invalid_argument("mala_sample: invalid sampler config");
  {
    GrowthReport growth = check_growth(pot, 20.0, 801);
    if (!growth.ok())
      throw std::invalid_argument("mala_sample: potential is not concave/non-positive");
  }

  const int n = inst.n;
  const int m = inst.m;

  auto log_density_and_grad = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const Eigen::VectorXd s = inst.g_bar * x - inst.y;
    double logp = -kappa * x.squaredNorm();
    Eigen::VectorXd a(m);
    for (int k = 0; k < m; ++k) {
      const PotentialValue v = pot.eval(s(k));
      logp += v.u;
      a(k) = v.du;
    }
    grad = inst.g_bar.transpose() * a - 2.0 * kappa * x;
    return logp;
  };

  MalaResult result;
  result.samples.reserve(n_replicas);
  long accept_count = 0;
  long proposal_count = 0;
  double step_final_sum = 0.0;

  for (int rep = 0; rep < n_replicas; ++rep) {
    std::mt19937_64 rng(substream_seed(seed, "chain" + std::to_string(rep)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd grad(n);
    double logp = log_density_and_grad(x, grad);
    double step = cfg.step;

    Eigen::MatrixXd samples(cfg.samples, n);
    const long total = static_cast<long>(cfg.burn_in) +
                       static_cast<long>(cfg.samples) * cfg.thin;
    int stored = 0;
    for (long it = 0; it < total; ++it) {
      const double half = 0.5 * step * step;
      Eigen::VectorXd noise(n);
      for (int i = 0; i < n; ++i) noise(i) = normal(rng);
      const Eigen::VectorXd prop = x + half * grad + step * noise;

      Eigen::VectorXd grad_prop(n);
      const double logp_prop = log_density_and_grad(prop, grad_prop);
      // asymmetric proposal correction for the drift term
      const double fwd = (prop - x - half * grad).squaredNorm();
      const double bwd = (x - prop - half * grad_prop).squaredNorm();
      const double log_accept = logp_prop - logp + (fwd - bwd) / (2.0 * step * step);

      const bool accepted = std::log(unif(rng)) < log_accept;
      if (accepted) {
        x = prop;
        grad = grad_prop;
        logp = logp_prop;
      }
      if (it < cfg.burn_in) {
        // Robbins-Monro on log step toward the target acceptance rate.
        const double rate = std::min(1.0, std::exp(std::min(0.0, log_accept)));
        step *= std::exp(2.0 / std::sqrt(10.0 + it) * (rate - cfg.target_accept));
      } else {
        ++proposal_count;
        if (accepted) ++accept_count;
        const long post = it - cfg.burn_in;
        if (post % cfg.thin == 0 && stored < cfg.samples) samples.row(stored++) = x.transpose();
      }
    }
    step_final_sum += step;
    result.samples.push_back(std::move(samples));
  }

  result.acceptance_rate =
      proposal_count > 0 ? static_cast<double>(accept_count) / proposal_count : 0.0;
  result.step_final = step_final_sum / n_replicas;
  if (result.acceptance_rate < 0.05)
    throw std::runtime_error("mala_sample: acceptance rate below 0.05 after adaptation");
  return result;
}

OverlapEstimates estimate_overlaps(const SimulationInstance& inst,
                                   const std::vector<Eigen::MatrixXd>& samples,
                                   const Potential& pot, bool centered) {
  const int n_rep = static_cast<int>(samples.size());
  if (n_rep < 1) throw std::invalid_argument("estimate_overlaps: no replicas");
  const int n_samples = static_cast<int>(samples[0].rows());
  const int n = inst.n;

  const bool need_pairs = n_rep >= 2;

  // Per-sample series for each statistic; SEs from their empirical variance.
  auto mean_se = [](const std::vector<double>& v, double& mean, double& se) {
    const int t = static_cast<int>(v.size());
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= t;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var = t > 1 ? var / (t - 1) : 0.0;
    se = std::sqrt(var / t);
  };

  std::vector<double> series_r11, series_q11, series_r12, series_q12;
  // A-vectors are recomputed per (replica, sample); cache per replica row.
  std::vector<Eigen::MatrixXd> a_vecs(n_rep);
  std::vector<Eigen::MatrixXd> sigma(n_rep);
  std::vector<Eigen::VectorXd> b_sum(n_rep);  // sum of u'' over k, per sample
  for (int rep = 0; rep < n_rep; ++rep) {
    if (samples[rep].rows() != n_samples || samples[rep].cols() != n)
      throw std::invalid_argument("estimate_overlaps: ragged sample matrices");
    a_vecs[rep].resize(n_samples, inst.m);
    b_sum[rep].resize(n_samples);
    if (centered)
      sigma[rep] = samples[rep].rowwise() - inst.x_star.transpose();
    else
      sigma[rep] = samples[rep];
    for (int t = 0; t < n_samples; ++t) {
      Eigen::VectorXd resid =
          centered ? Eigen::VectorXd(inst.g_bar * samples[rep].row(t).transpose() - inst.y)
                   : Eigen::VectorXd(inst.g_bar * samples[rep].row(t).transpose() + inst.z);
      double bs = 0.0;
      for (int k = 0; k < inst.m; ++k) {
        const PotentialValue v = pot.eval(resid(k));
        a_vecs[rep](t, k) = v.du;
        bs += v.d2u;
      }
      b_sum[rep](t) = bs;
    }
  }

  for (int t = 0; t < n_samples; ++t) {
    for (int rep = 0; rep < n_rep; ++rep) {
      series_r11.push_back(sigma[rep].row(t).squaredNorm() / n);
      series_q11.push_back((a_vecs[rep].row(t).squaredNorm() + b_sum[rep](t)) / n);
    }
    if (need_pairs) {
      for (int a = 0; a < n_rep; ++a)
        for (int b = a + 1; b < n_rep; ++b) {
          series_r12.push_back(sigma[a].row(t).dot(sigma[b].row(t)) / n);
          series_q12.push_back(a_vecs[a].row(t).dot(a_vecs[b].row(t)) / n);
        }
    }
  }

  OverlapEstimates est;
  est.n_replicas = n_rep;
  mean_se(series_r11, est.r11, est.se_r11);
  mean_se(series_q11, est.q11, est.se_q11);
  if (need_pairs) {
    mean_se(series_r12, est.r12, est.se_r12);
    mean_se(series_q12, est.q12, est.se_q12);
  } else {
    est.r12 = est.q12 = std::numeric_limits<double>::quiet_NaN();
  }
  return est;
}

ExactOverlapMoments exact_overlap_moments(const SimulationInstance& inst,
                                          const GaussianPosterior& post,
                                          const Potential& pot) {
  if (!gaussian_loss(pot))
    throw std::invalid_argument("exact_overlap_moments: requires quadratic or zero loss");
  const int n = inst.n;
  const Eigen::MatrixXd cov =
      post.llt.solve(Eigen::MatrixXd::Identity(n, n));
  const double center_sq = (post.mean - inst.x_star).squaredNorm() / n;

  ExactOverlapMoments mom{};
  mom.r11 = center_sq + cov.trace() / n;
  mom.r12 = center_sq;
  if (pot.is_zero()) {
    mom.q11 = 0.0;
    mom.q12 = 0.0;
    return mom;
  }
  const double delta = pot.delta();
  // residual s = g_bar x - y is Gaussian with mean g_bar x_hat - y and
  // covariance g_bar Cov g_bar'.
  const Eigen::VectorXd resid_mean = inst.g_bar * post.mean - inst.y;
  const Eigen::MatrixXd resid_cov = inst.g_bar * cov * inst.g_bar.transpose();
  const double e_sq = resid_mean.squaredNorm() + resid_cov.trace();
  mom.q11 = (e_sq / (delta * delta) - inst.m / delta) / n;
  mom.q12 = resid_mean.squaredNorm() / (delta * delta) / n;
  return mom;
}

StEquivalence st_model_equivalence(const ModelParams& params, int n,
                                   std::uint64_t seed, XStarMode mode) {
  if (!gaussian_loss(params.potential))
    throw std::invalid_argument("st_model_equivalence: requires quadratic or zero loss");

  const SimulationInstance inst = generate_instance(params, n, seed, mode);
  StEquivalence out{};
  out.lhs = exact_posterior(inst, params.potential, params.kappa).mse_per_n;

  // ST side: fresh design/noise from sibling sub-streams of the same root
  // seed, field h_N from the realized norm of x*.
  const double gamma_n = inst.x_star.squaredNorm() / n;
  const double h_n = 2.0 * params.kappa * std::sqrt(gamma_n);

  const int m = inst.m;
  Eigen::MatrixXd g_st(m, n);
  {
    std::mt19937_64 rng(substream_seed(seed, "st_design"));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < m; ++k)
      for (int i = 0; i < n; ++i) g_st(k, i) = scale * normal(rng);
  }
  Eigen::VectorXd z_st;
  {
    std::mt19937_64 rng(substream_seed(seed, "st_noise"));
    z_st = std::sqrt(params.delta_star) * normal_vector(rng, m);
  }

  Eigen::MatrixXd precision;
  Eigen::VectorXd linear;
  if (params.potential.is_quadratic()) {
    const double delta = params.potential.delta();
    precision = g_st.transpose() * g_st / delta +
                2.0 * params.kappa * Eigen::MatrixXd::Identity(n, n);
    linear = -g_st.transpose() * z_st / delta -
             h_n * Eigen::VectorXd::Ones(n);
  } else {
    precision = 2.0 * params.kappa * Eigen::MatrixXd::Identity(n, n);
    linear = -h_n * Eigen::VectorXd::Ones(n);
  }
  const Eigen::VectorXd sigma_mean = precision.llt().solve(linear);
  out.rhs = sigma_mean.squaredNorm() / n;
  return out;
}

std::vector<ConcentrationRow> concentration_scan(const ModelParams& params,
                                                 const std::vector<int>& n_list,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 XStarMode mode) {
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1])
      throw std::invalid_argument("concentration_scan: n_list must be increasing");

  std::vector<ConcentrationRow> rows;
  for (int n : n_list) {
    std::vector<double> r12s, r11s;
    for (std::uint64_t seed : seeds) {
      const SimulationInstance inst = generate_instance(params, n, seed, mode);
      const GaussianPosterior post =
          factor_posterior(inst, params.potential, params.kappa);
      const ExactOverlapMoments mom =
          exact_overlap_moments(inst, post, params.potential);
      r12s.push_back(mom.r12);
      r11s.push_back(mom.r11);
    }
    auto var_of = [](const std::vector<double>& v, double& mean) {
      mean = 0.0;
      for (double x : v) mean += x;
      mean /= v.size();
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      return v.size() > 1 ? var / (v.size() - 1) : 0.0;
    };
    ConcentrationRow row{};
    row.n = n;
    row.var_r12 = var_of(r12s, row.mean_r12);
    row.var_r11 = var_of(r11s, row.mean_r11);
    rows.push_back(row);
  }
  return rows;
}

void dump_samples(const std::string& path, const Eigen::MatrixXd& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("dump_samples: cannot open " + path);
  for (Eigen::Index t = 0; t < samples.rows(); ++t)
    for (Eigen::Index i = 0; i < samples.cols(); ++i) {
      const double v = samples(t, i);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
}

}  // namespace rsreg

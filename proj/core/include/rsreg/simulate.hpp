#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rsreg/replica.hpp"

namespace rsreg {

// Deterministic labeled sub-stream seeding: one root seed per instance,
// sub-streams for design/noise/truth/chains so that adding replicas never
// perturbs the instance.
std::uint64_t substream_seed(std::uint64_t root, std::string_view label);

enum class XStarMode { DeterministicNorm, Gaussian };

struct SimulationInstance {
  int n = 0;
  int m = 0;
  Eigen::MatrixXd g_bar;   // M x N, entries N(0, 1/N)
  Eigen::VectorXd z;       // noise, N(0, delta_star)
  Eigen::VectorXd x_star;  // ground truth
  Eigen::VectorXd y;       // g_bar * x_star + z
  std::uint64_t seed = 0;
};

SimulationInstance generate_instance(const ModelParams& params, int n,
                                     std::uint64_t seed, XStarMode mode);

struct PosteriorSummary {
  Eigen::VectorXd x_hat;
  double mse_per_n = 0.0;
  double free_energy = 0.0;  // NaN when not available
  std::string method;
};

// Exact Gaussian posterior for quadratic (or zero) loss:
//   P = G'G/delta + 2*kappa*I,  x_hat = P^{-1} G'y/delta,
//   free energy from the same Cholesky factorization.
PosteriorSummary exact_posterior(const SimulationInstance& inst,
                                 const Potential& pot, double kappa);

// Cholesky factor and mean of the Gaussian posterior, for replica draws and
// exact overlap moments.
struct GaussianPosterior {
  Eigen::LLT<Eigen::MatrixXd> llt;  // P = L L'
  Eigen::VectorXd mean;
  double log_det_precision = 0.0;
};

GaussianPosterior factor_posterior(const SimulationInstance& inst,
                                   const Potential& pot, double kappa);

// n_samples exact posterior draws per replica; each matrix is n_samples x N.
std::vector<Eigen::MatrixXd> draw_exact_replicas(const GaussianPosterior& post,
                                                 int n_replicas, int n_samples,
                                                 std::uint64_t seed);

struct SamplerConfig {
  double step = 0.1;
  int burn_in = 5000;
  int samples = 20000;
  int thin = 1;
  double target_accept = 0.57;
};

struct MalaResult {
  std::vector<Eigen::MatrixXd> samples;  // one (samples x N) matrix per replica
  double acceptance_rate = 0.0;          // post burn-in, averaged over replicas
  double step_final = 0.0;
};

// Metropolis-adjusted Langevin chains targeting
//   exp(sum_k u((g_bar x)_k - y_k) - kappa ||x||^2).
// Step size adapts toward target_accept during burn-in, then freezes.
MalaResult mala_sample(const SimulationInstance& inst, const Potential& pot,
                       double kappa, const SamplerConfig& cfg, int n_replicas,
                       std::uint64_t seed);

struct OverlapEstimates {
  double r11 = 0.0, r12 = 0.0, q11 = 0.0, q12 = 0.0;
  double se_r11 = 0.0, se_r12 = 0.0, se_q11 = 0.0, se_q12 = 0.0;
  int n_replicas = 0;
};

// Empirical overlaps from per-replica sample matrices. With centered=true the
// samples are regression-side x and the replicas are sigma = x - x*, with
// residuals (g_bar x)_k - y_k; with centered=false the samples are ST-side
// sigma directly, with residuals (g_bar sigma)_k + z_k (same quantity).
OverlapEstimates estimate_overlaps(const SimulationInstance& inst,
                                   const std::vector<Eigen::MatrixXd>& samples,
                                   const Potential& pot, bool centered = true);

// Gibbs-exact overlap means for the Gaussian posterior (quadratic/zero loss).
struct ExactOverlapMoments {
  double r11, r12, q11, q12;
};

ExactOverlapMoments exact_overlap_moments(const SimulationInstance& inst,
                                          const GaussianPosterior& post,
                                          const Potential& pot);

struct StEquivalence {
  double lhs;  // ||x_hat - x*||^2 / N from the regression posterior
  double rhs;  // ||<sigma>||^2 / N from the ST Gibbs mean at field h_N
};

// Distributional identity between the regression MSE and the ST-model squared
// Gibbs mean; holds in expectation over seeds, not per seed.
StEquivalence st_model_equivalence(const ModelParams& params, int n,
                                   std::uint64_t seed, XStarMode mode);

struct ConcentrationRow {
  int n;
  double var_r12;
  double var_r11;
  double mean_r12;
  double mean_r11;
};

std::vector<ConcentrationRow> concentration_scan(const ModelParams& params,
                                                 const std::vector<int>& n_list,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 XStarMode mode = XStarMode::DeterministicNorm);

// Raw-sample debug dump: little-endian doubles, one row per iteration.
void dump_samples(const std::string& path, const Eigen::MatrixXd& samples);

}  // namespace rsreg

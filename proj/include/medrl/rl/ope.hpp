#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "medrl/data/episode.hpp"

namespace medrl {

struct OpeConfig {
  double gamma = 0.99;
  double clip_lo = 1e-4;
  double clip_hi = 1e2;
};

/// Cumulative importance ratios of one trajectory:
/// rho_{1:t} = prod_{u<=t} clip(pi(a_u)/pi_b(a_u), clip_lo, clip_hi).
/// Inputs are the per-step probabilities both policies assign to the logged
/// actions; behavior probabilities are floored at clip_lo before dividing.
struct TrajectoryRatios {
  Eigen::VectorXd cumulative;  // length T
  int clipped_steps = 0;
  double final_ratio() const { return cumulative.size() ? cumulative(cumulative.size() - 1) : 1.0; }
};

TrajectoryRatios importance_ratios(const Eigen::VectorXd& eval_probs, const Eigen::VectorXd& behavior_probs,
                                   const OpeConfig& config);

/// Importance-sampling value estimates over a trajectory set.
///
///   WIS     = sum_i rho_i G_i / sum_i rho_i, rho_i the full-trajectory
///             ratio, G_i = sum_t gamma^t r_{i,t} (t counted from zero).
///   WPDIS   = sum_t gamma^t sum_i (rho_{i,1:t} / sum_j rho_{j,1:t}) r_{i,t},
///             finished trajectories contribute ratio 0 at step t.
///   CWPDIS  = like WPDIS but finished trajectories keep their final frozen
///             ratio in the denominator.
///   ESS     = (sum_i rho_i)^2 / sum_i rho_i^2.
struct OpeReport {
  double wis = 0.0;
  double wpdis = 0.0;
  double cwpdis = 0.0;
  double ess = 0.0;
  int n_trajectories = 0;
  double max_weight = 0.0;
  double mean_weight = 0.0;
  double clipped_fraction = 0.0;  // per-step ratios hitting a clip bound
  OpeConfig config;
};

/// `rewards[i]` holds trajectory i's per-step rewards (unlabeled steps as
/// 0); `ratios[i]` the matching cumulative ratios. Throws if every
/// full-trajectory weight is zero.
OpeReport ope_estimates(const std::vector<std::vector<double>>& rewards, const std::vector<TrajectoryRatios>& ratios,
                        const OpeConfig& config);

// ---------------------------------------------------------------------------
// Outcome analyses
// ---------------------------------------------------------------------------

struct MortalityBin {
  double return_center = 0.0;
  double mortality = 0.0;
  int count = 0;
};

struct MortalityCurve {
  std::vector<MortalityBin> bins;

  /// Maps a scalar expected return to an estimated mortality by clamped
  /// linear interpolation between bin centers.
  double interpolate(double expected_return) const;
  /// Pearson correlation between bin return centers and bin mortality.
  double correlation() const;
};

/// Equal-count binning of observed discounted returns against outcomes.
/// Censored episodes are excluded; short samples merge empty bins into
/// their neighbors.
MortalityCurve mortality_vs_return(const std::vector<Episode>& episodes, double gamma, int bins);

double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y);

/// One-sided permutation test for negative correlation:
/// P(corr(perm(x), y) <= corr(x, y)). Deterministic given the seed.
double permutation_pvalue_negative(const std::vector<double>& x, const std::vector<double>& y, int n_permutations,
                                   std::uint64_t seed);

struct SeverityStratum {
  std::string name;
  double lo;  // inclusive
  double hi;  // exclusive
};

/// Low (<=5), Mid (6-14), High (>=15) plus All, over the mean observed
/// severity-proxy value.
std::vector<SeverityStratum> default_sofa_strata();

struct DoseDiffRow {
  std::string stratum;
  int treatment_dim = 0;
  int dose_diff = 0;  // rounded mean (policy level - logged level)
  double mortality = 0.0;
  int count = 0;
};

/// Per-episode mean difference between the policy's recommended treatment
/// level and the logged level, per treatment dimension, binned against
/// outcome within severity strata. `recommended[i]` holds the policy's
/// action id for every step of episode i.
std::vector<DoseDiffRow> dose_difference_table(const std::vector<Episode>& episodes,
                                               const std::vector<std::vector<int>>& recommended,
                                               const ActionSchema& schema,
                                               const std::vector<SeverityStratum>& strata);

/// Normalized frequency over the joint action grid (cell = action id).
Eigen::VectorXd action_heatmap(const std::vector<std::vector<int>>& actions, int action_count);

}  // namespace medrl

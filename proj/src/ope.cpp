#include "medrl/rl/ope.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "medrl/core/random.hpp"

namespace medrl {

TrajectoryRatios importance_ratios(const Eigen::VectorXd& eval_probs, const Eigen::VectorXd& behavior_probs,
                                   const OpeConfig& config) {
  if (eval_probs.size() != behavior_probs.size())
    throw std::invalid_argument("importance_ratios: probability sequences disagree in length");
  TrajectoryRatios out;
  out.cumulative.resize(eval_probs.size());
  double running = 1.0;
  for (Eigen::Index t = 0; t < eval_probs.size(); ++t) {
    const double pb = std::max(behavior_probs(t), config.clip_lo);
    double ratio = eval_probs(t) / pb;
    if (ratio <= config.clip_lo) {
      ratio = config.clip_lo;
      ++out.clipped_steps;
    } else if (ratio >= config.clip_hi) {
      ratio = config.clip_hi;
      ++out.clipped_steps;
    }
    running *= ratio;
    out.cumulative(t) = running;
  }
  return out;
}

OpeReport ope_estimates(const std::vector<std::vector<double>>& rewards, const std::vector<TrajectoryRatios>& ratios,
                        const OpeConfig& config) {
  const std::size_t n = rewards.size();
  if (n == 0 || ratios.size() != n) throw std::invalid_argument("ope_estimates: need matching nonempty inputs");

  OpeReport report;
  report.config = config;
  report.n_trajectories = static_cast<int>(n);

  std::size_t horizon = 0;
  double weight_sum = 0.0, weight_sq = 0.0;
  int clipped = 0, total_steps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<std::size_t>(ratios[i].cumulative.size()) != rewards[i].size())
      throw std::invalid_argument("ope_estimates: trajectory " + std::to_string(i) + " length mismatch");
    horizon = std::max(horizon, rewards[i].size());
    const double w = ratios[i].final_ratio();
    weight_sum += w;
    weight_sq += w * w;
    report.max_weight = std::max(report.max_weight, w);
    clipped += ratios[i].clipped_steps;
    total_steps += static_cast<int>(rewards[i].size());
  }
  if (weight_sum <= 0.0) throw std::invalid_argument("ope_estimates: all trajectory weights are zero");
  report.mean_weight = weight_sum / static_cast<double>(n);
  report.clipped_fraction = total_steps ? static_cast<double>(clipped) / total_steps : 0.0;
  report.ess = weight_sum * weight_sum / weight_sq;

  double wis = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double g = 0.0, disc = 1.0;
    for (double r : rewards[i]) {
      g += disc * r;
      disc *= config.gamma;
    }
    wis += ratios[i].final_ratio() * g;
  }
  report.wis = wis / weight_sum;

  double wpdis = 0.0, cwpdis = 0.0, disc = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    double active_num = 0.0, active_den = 0.0, frozen_den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto len = static_cast<std::size_t>(ratios[i].cumulative.size());
      if (t < len) {
        const double rho = ratios[i].cumulative(static_cast<Eigen::Index>(t));
        active_num += rho * rewards[i][t];
        active_den += rho;
        frozen_den += rho;
      } else {
        frozen_den += ratios[i].final_ratio();
      }
    }
    if (active_den > 0.0) wpdis += disc * active_num / active_den;
    if (frozen_den > 0.0) cwpdis += disc * active_num / frozen_den;
    disc *= config.gamma;
  }
  report.wpdis = wpdis;
  report.cwpdis = cwpdis;
  return report;
}

// ---------------------------------------------------------------------------

double MortalityCurve::interpolate(double expected_return) const {
  if (bins.empty()) throw std::logic_error("MortalityCurve::interpolate: empty curve");
  if (bins.size() == 1) return bins.front().mortality;
  if (expected_return <= bins.front().return_center) return bins.front().mortality;
  if (expected_return >= bins.back().return_center) return bins.back().mortality;
  for (std::size_t i = 1; i < bins.size(); ++i) {
    if (expected_return <= bins[i].return_center) {
      const double x0 = bins[i - 1].return_center, x1 = bins[i].return_center;
      const double y0 = bins[i - 1].mortality, y1 = bins[i].mortality;
      const double frac = x1 > x0 ? (expected_return - x0) / (x1 - x0) : 0.0;
      return y0 + frac * (y1 - y0);
    }
  }
  return bins.back().mortality;
}

double MortalityCurve::correlation() const {
  std::vector<double> x, y;
  for (const auto& b : bins) {
    x.push_back(b.return_center);
    y.push_back(b.mortality);
  }
  return pearson_correlation(x, y);
}

MortalityCurve mortality_vs_return(const std::vector<Episode>& episodes, double gamma, int bins) {
  if (bins < 2) throw std::invalid_argument("mortality_vs_return: need at least 2 bins");
  std::vector<std::pair<double, bool>> samples;  // (return, died)
  for (const auto& ep : episodes) {
    if (ep.outcome == Outcome::kCensored) continue;
    samples.emplace_back(ep.discounted_return(gamma), ep.outcome == Outcome::kDeceased);
  }
  if (samples.empty()) throw std::invalid_argument("mortality_vs_return: no episodes with binary outcomes");
  std::sort(samples.begin(), samples.end());

  MortalityCurve curve;
  const std::size_t n = samples.size();
  std::size_t start = 0;
  for (int b = 0; b < bins; ++b) {
    const std::size_t end = n * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(bins);
    if (end <= start) continue;  // zero-count bin folds into its neighbor
    double ret_sum = 0.0;
    int died = 0;
    for (std::size_t i = start; i < end; ++i) {
      ret_sum += samples[i].first;
      died += samples[i].second ? 1 : 0;
    }
    const int count = static_cast<int>(end - start);
    curve.bins.push_back({ret_sum / count, static_cast<double>(died) / count, count});
    start = end;
  }
  return curve;
}

double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson_correlation: need >= 2 paired samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double permutation_pvalue_negative(const std::vector<double>& x, const std::vector<double>& y, int n_permutations,
                                   std::uint64_t seed) {
  const double observed = pearson_correlation(x, y);
  std::vector<double> shuffled = x;
  Rng rng(seed);
  int at_most = 0;
  for (int p = 0; p < n_permutations; ++p) {
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.uniform_int(static_cast<int>(i))]);
    if (pearson_correlation(shuffled, y) <= observed) ++at_most;
  }
  return (1.0 + at_most) / (1.0 + n_permutations);
}

std::vector<SeverityStratum> default_sofa_strata() {
  const double inf = std::numeric_limits<double>::infinity();
  return {{"low", -inf, 5.5}, {"mid", 5.5, 14.5}, {"high", 14.5, inf}, {"all", -inf, inf}};
}

std::vector<DoseDiffRow> dose_difference_table(const std::vector<Episode>& episodes,
                                               const std::vector<std::vector<int>>& recommended,
                                               const ActionSchema& schema,
                                               const std::vector<SeverityStratum>& strata) {
  if (recommended.size() != episodes.size())
    throw std::invalid_argument("dose_difference_table: recommendation list size mismatch");
  const int dims = schema.treatment_dims();

  struct Key {
    std::size_t stratum;
    int dim;
    int diff;
    bool operator<(const Key& o) const {
      return std::tie(stratum, dim, diff) < std::tie(o.stratum, o.dim, o.diff);
    }
  };
  std::map<Key, std::pair<int, int>> cells;  // -> (count, died)

  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const Episode& ep = episodes[i];
    if (ep.outcome == Outcome::kCensored) continue;
    if (recommended[i].size() != ep.steps.size())
      throw std::invalid_argument("dose_difference_table: recommendation length mismatch for episode " + ep.id);
    // Episode severity = mean observed severity-proxy value (feature 0).
    double sev_sum = 0.0;
    int sev_n = 0;
    Eigen::VectorXd diff_sum = Eigen::VectorXd::Zero(dims);
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      const auto& step = ep.steps[t];
      if (step.mask(0) == 1.0) {
        sev_sum += step.obs(0);
        ++sev_n;
      }
      const auto logged = schema.levels(step.action);
      const auto rec = schema.levels(recommended[i][t]);
      for (int dim = 0; dim < dims; ++dim) diff_sum(dim) += rec[static_cast<std::size_t>(dim)] - logged[static_cast<std::size_t>(dim)];
    }
    const double mean_sev = sev_n ? sev_sum / sev_n : 0.0;
    const bool died = ep.outcome == Outcome::kDeceased;
    for (std::size_t s = 0; s < strata.size(); ++s) {
      if (!(mean_sev >= strata[s].lo && mean_sev < strata[s].hi) && strata[s].name != "all") continue;
      for (int dim = 0; dim < dims; ++dim) {
        const int diff = static_cast<int>(std::lround(diff_sum(dim) / static_cast<double>(ep.steps.size())));
        auto& cell = cells[{s, dim, diff}];
        cell.first += 1;
        cell.second += died ? 1 : 0;
      }
    }
  }

  std::vector<DoseDiffRow> rows;
  for (const auto& [key, cell] : cells) {
    rows.push_back({strata[key.stratum].name, key.dim, key.diff,
                    cell.first ? static_cast<double>(cell.second) / cell.first : 0.0, cell.first});
  }
  return rows;
}

Eigen::VectorXd action_heatmap(const std::vector<std::vector<int>>& actions, int action_count) {
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(action_count);
  double total = 0.0;
  for (const auto& traj : actions) {
    for (int a : traj) {
      if (a < 0 || a >= action_count) throw std::invalid_argument("action_heatmap: action id out of range");
      freq(a) += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) freq /= total;
  return freq;
}

}  // namespace medrl

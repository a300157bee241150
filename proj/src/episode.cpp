#include "medrl/data/episode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace medrl {

std::string outcome_to_string(Outcome o) {
  switch (o) {
    case Outcome::kSurvived: return "survived";
    case Outcome::kDeceased: return "deceased";
    case Outcome::kCensored: return "censored";
  }
  throw std::logic_error("outcome_to_string: bad enum");
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "survived") return Outcome::kSurvived;
  if (s == "deceased") return Outcome::kDeceased;
  if (s == "censored") return Outcome::kCensored;
  throw std::invalid_argument("unknown outcome: " + s);
}

int action_cardinality(const std::string& schema) {
  if (schema == "sepsis") return 25;
  if (schema == "vent") return 18;
  throw std::invalid_argument("unknown schema: " + schema);
}

double Episode::discounted_return(double gamma) const {
  double g = 0.0, w = 1.0;
  for (const auto& step : steps) {
    if (step.reward) g += w * *step.reward;
    w *= gamma;
  }
  return g;
}

void validate_episode(const Episode& episode, int feature_dim) {
  const int a_max = action_cardinality(episode.schema);
  const int n = episode.length();
  for (int t = 0; t < n; ++t) {
    const auto& step = episode.steps[t];
    if (step.obs.size() != feature_dim || step.mask.size() != feature_dim)
      throw std::invalid_argument("episode " + episode.id + ": feature dimension mismatch at step " +
                                  std::to_string(t));
    if (t > 0 && !(step.time > episode.steps[t - 1].time))
      throw std::invalid_argument("episode " + episode.id + ": timestamps not strictly increasing at step " +
                                  std::to_string(t));
    if (step.action < 0 || step.action >= a_max)
      throw std::invalid_argument("episode " + episode.id + ": action id " + std::to_string(step.action) +
                                  " out of range [0," + std::to_string(a_max) + ") at step " + std::to_string(t));
    for (int d = 0; d < feature_dim; ++d) {
      const bool observed = step.mask(d) == 1.0;
      if (!observed && step.mask(d) != 0.0)
        throw std::invalid_argument("episode " + episode.id + ": mask must be binary");
      if (observed && !std::isfinite(step.obs(d)))
        throw std::invalid_argument("episode " + episode.id + ": observed entry is not finite at step " +
                                    std::to_string(t));
      if (!observed && !std::isnan(step.obs(d)))
        throw std::invalid_argument("episode " + episode.id + ": unobserved entry must be missing at step " +
                                    std::to_string(t));
    }
    const bool should_be_terminal = (t == n - 1) && episode.outcome != Outcome::kCensored;
    if (step.terminal != should_be_terminal)
      throw std::invalid_argument("episode " + episode.id + ": terminal flag misplaced at step " + std::to_string(t));
  }
}

Eigen::MatrixXd compute_deltas(const Episode& episode) {
  const int n = episode.length();
  const int d_dim = episode.feature_dim();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, d_dim);
  for (int t = 1; t < n; ++t) {
    const double gap = episode.steps[t].time - episode.steps[t - 1].time;
    if (!(gap > 0.0))
      throw std::invalid_argument("compute_deltas: timestamps not strictly increasing in episode " + episode.id);
    for (int d = 0; d < d_dim; ++d) {
      const bool prev_observed = episode.steps[t - 1].mask(d) == 1.0;
      delta(t, d) = prev_observed ? gap : gap + delta(t - 1, d);
    }
  }
  return delta;
}

NormStats NormStats::fit(const std::vector<Episode>& training_episodes, int feature_dim) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(feature_dim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(feature_dim);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(feature_dim);
  for (const auto& ep : training_episodes) {
    for (const auto& step : ep.steps) {
      for (int d = 0; d < feature_dim; ++d) {
        if (step.mask(d) == 1.0) {
          sum(d) += step.obs(d);
          sum_sq(d) += step.obs(d) * step.obs(d);
          count(d) += 1.0;
        }
      }
    }
  }
  NormStats stats;
  stats.mean = Eigen::VectorXd::Zero(feature_dim);
  stats.std_dev = Eigen::VectorXd::Ones(feature_dim);
  for (int d = 0; d < feature_dim; ++d) {
    if (count(d) > 0.0) {
      stats.mean(d) = sum(d) / count(d);
      const double var = sum_sq(d) / count(d) - stats.mean(d) * stats.mean(d);
      if (var > 1e-12) stats.std_dev(d) = std::sqrt(var);
    }
  }
  return stats;
}

Episode normalize(const Episode& episode, const NormStats& stats) {
  if (episode.feature_dim() != stats.mean.size())
    throw std::invalid_argument("normalize: feature count mismatch (episode " + std::to_string(episode.feature_dim()) +
                                ", stats " + std::to_string(stats.mean.size()) + ")");
  Episode out = episode;
  for (auto& step : out.steps) {
    for (int d = 0; d < stats.mean.size(); ++d) {
      if (step.mask(d) == 1.0) step.obs(d) = (step.obs(d) - stats.mean(d)) / stats.std_dev(d);
    }
  }
  return out;
}

namespace {

// Linear-interpolation percentile of a sorted sample.
double percentile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("percentile: empty sample");
  if (sorted.size() == 1) return sorted.front();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

// Level 1..4 for a positive dose: 1 + number of edges strictly below it,
// so a dose sitting exactly on an edge stays in the lower bin.
int quartile_level(double dose, const std::array<double, 3>& edges) {
  int level = 1;
  for (double e : edges)
    if (dose > e) ++level;
  return level;
}

}  // namespace

ActionSchema ActionSchema::fit_sepsis(const std::vector<double>& iv_doses, const std::vector<double>& vaso_doses) {
  ActionSchema schema;
  schema.kind = Kind::kSepsis;
  auto fit_edges = [](const std::vector<double>& doses) {
    std::vector<double> nonzero;
    for (double d : doses) {
      if (d < 0.0) throw std::invalid_argument("ActionSchema::fit_sepsis: negative dose");
      if (d > 0.0) nonzero.push_back(d);
    }
    std::array<double, 3> edges{0.0, 0.0, 0.0};
    if (nonzero.empty()) return edges;
    std::sort(nonzero.begin(), nonzero.end());
    edges = {percentile_sorted(nonzero, 0.25), percentile_sorted(nonzero, 0.50), percentile_sorted(nonzero, 0.75)};
    return edges;
  };
  schema.iv_edges = fit_edges(iv_doses);
  schema.vaso_edges = fit_edges(vaso_doses);
  return schema;
}

ActionSchema ActionSchema::vent() {
  ActionSchema schema;
  schema.kind = Kind::kVent;
  return schema;
}

int ActionSchema::bin_sepsis(double iv_dose, double vaso_dose) const {
  if (kind != Kind::kSepsis) throw std::logic_error("bin_sepsis called on a ventilation schema");
  if (iv_dose < 0.0 || vaso_dose < 0.0) throw std::invalid_argument("bin_sepsis: negative dose");
  const int iv_level = iv_dose == 0.0 ? 0 : quartile_level(iv_dose, iv_edges);
  const int vaso_level = vaso_dose == 0.0 ? 0 : quartile_level(vaso_dose, vaso_edges);
  return 5 * iv_level + vaso_level;
}

std::pair<int, int> ActionSchema::sepsis_levels(int action) const {
  if (action < 0 || action >= 25) throw std::invalid_argument("sepsis_levels: action out of range");
  return {action / 5, action % 5};
}

int ActionSchema::bin_vent(double peep, double fio2, double tidal_volume) {
  if (peep < 0.0 || fio2 < 0.0 || tidal_volume < 0.0) throw std::invalid_argument("bin_vent: negative setting");
  const int peep_level = peep <= 5.0 ? 0 : 1;
  const int fio2_level = fio2 < 35.0 ? 0 : (fio2 < 50.0 ? 1 : 2);
  const int tv_level = tidal_volume < 6.5 ? 0 : (tidal_volume < 8.0 ? 1 : 2);
  return 9 * peep_level + 3 * fio2_level + tv_level;
}

std::array<int, 3> ActionSchema::vent_levels(int action) {
  if (action < 0 || action >= 18) throw std::invalid_argument("vent_levels: action out of range");
  return {action / 9, (action % 9) / 3, action % 3};
}

std::vector<int> ActionSchema::levels(int action) const {
  if (kind == Kind::kSepsis) {
    auto [iv, vaso] = sepsis_levels(action);
    return {iv, vaso};
  }
  auto lv = vent_levels(action);
  return {lv[0], lv[1], lv[2]};
}

}  // namespace medrl

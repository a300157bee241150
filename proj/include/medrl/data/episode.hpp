#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace medrl {

enum class Outcome { kSurvived, kDeceased, kCensored };

std::string outcome_to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

/// One observation event of a trajectory. Unobserved entries hold NaN and
/// are flagged by mask == 0; the mask is the source of truth, downstream
/// zero-fill happens only inside the encoder.
struct EpisodeStep {
  double time = 0.0;  // hours since admission
  Eigen::VectorXd obs;
  Eigen::VectorXd mask;  // 1 where obs carries a value
  int action = 0;
  std::optional<double> reward;
  bool terminal = false;
};

/// One patient trajectory with irregular timestamps and partial observations.
struct Episode {
  std::string id;
  std::string schema;  // "sepsis" or "vent"
  Outcome outcome = Outcome::kCensored;
  std::vector<EpisodeStep> steps;

  int length() const { return static_cast<int>(steps.size()); }
  int feature_dim() const { return steps.empty() ? 0 : static_cast<int>(steps.front().obs.size()); }

  /// Discounted return G = sum_t gamma^t r_t with t counted from zero;
  /// unlabeled rewards contribute nothing.
  double discounted_return(double gamma) const;
};

/// Episodes plus the file-level metadata they were loaded with.
struct EpisodeSet {
  int feature_dim = 0;
  std::vector<std::string> feature_names;
  std::vector<Episode> episodes;
};

int action_cardinality(const std::string& schema);

/// Throws std::invalid_argument when the episode violates the data-model
/// invariants (timestamp order, mask consistency, action range, terminal
/// placement).
void validate_episode(const Episode& episode, int feature_dim);

/// Per-step, per-feature elapsed time since the feature was last observed:
/// delta(0, d) = 0; delta(t, d) accumulates timestamp gaps across steps
/// where feature d was missing and resets to the raw gap after an
/// observation. Output is (T x D), nonnegative.
Eigen::MatrixXd compute_deltas(const Episode& episode);

/// Per-feature standardization statistics over observed entries only.
struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std_dev;  // constant/unseen features get 1

  static NormStats fit(const std::vector<Episode>& training_episodes, int feature_dim);
};

/// Returns a copy with observed entries standardized; missing entries and
/// masks untouched.
Episode normalize(const Episode& episode, const NormStats& stats);

/// Discrete treatment grids. Sepsis: two drugs x five levels (0 = none,
/// 1..4 = quartiles of nonzero training doses), id = 5*iv + vaso. Vent:
/// PEEP {<=5, >5} x FiO2 {<35, 35-50, >=50} x tidal volume {<6.5, 6.5-8,
/// >=8 ml/kg IBW}, id = 9*peep + 3*fio2 + tv.
struct ActionSchema {
  enum class Kind { kSepsis, kVent };

  Kind kind = Kind::kSepsis;
  // Inner quartile edges of nonzero doses (3 per drug), fitted on training
  // data. Unused for the ventilation grid.
  std::array<double, 3> iv_edges{};
  std::array<double, 3> vaso_edges{};

  int cardinality() const { return kind == Kind::kSepsis ? 25 : 18; }
  std::string name() const { return kind == Kind::kSepsis ? "sepsis" : "vent"; }

  static ActionSchema fit_sepsis(const std::vector<double>& iv_doses, const std::vector<double>& vaso_doses);
  static ActionSchema vent();

  /// Dose pair -> action id in [0, 25). Doses must be nonnegative; a dose
  /// exactly at a quartile edge falls in the lower bin.
  int bin_sepsis(double iv_dose, double vaso_dose) const;
  std::pair<int, int> sepsis_levels(int action) const;

  static int bin_vent(double peep, double fio2, double tidal_volume);
  static std::array<int, 3> vent_levels(int action);

  /// Per-dimension levels for either schema (sepsis: 2 dims, vent: 3).
  std::vector<int> levels(int action) const;
  int treatment_dims() const { return kind == Kind::kSepsis ? 2 : 3; }
};

}  // namespace medrl

#pragma once

// JSON views of reports (nlohmann/json).

#include <json.hpp>

#include "sparsecov/experiments.hpp"
#include "sparsecov/packing.hpp"

namespace sparsecov {

inline nlohmann::json to_json(const CertificateReport& c) {
  return {
      {"min_pairwise_sq_distance", c.min_pairwise_sq_distance},
      {"log_cardinality", c.log_cardinality},
      {"max_kl_times_n", c.max_kl_times_n},
      {"condition_i_margin", c.condition_i_margin},
      {"condition_ii_margin", c.condition_ii_margin},
      {"max_kl_bound_times_n", c.max_kl_bound_times_n},
      {"psi", c.psi},
      {"kl_budget", c.kl_budget},
      {"all_positive_definite", c.all_positive_definite},
      {"all_diagonally_dominant", c.all_diagonally_dominant},
      {"satisfied", c.satisfied()},
  };
}

inline nlohmann::json to_json(const PackingConfig& c) {
  return {{"p", c.p}, {"k", c.k}, {"a0", c.a0}, {"variant", to_string(c.variant)}, {"n", c.n}};
}

/// Certificate document written by the `packing` subcommand.
inline nlohmann::json certificate_document(const PackingFamily& fam) {
  nlohmann::json doc = to_json(fam.certificate);
  doc["config"] = to_json(fam.config);
  doc["seed"] = fam.seed.value;
  doc["a0_used"] = fam.a0_used;
  doc["amplitude"] = fam.amplitude;
  doc["cardinality"] = fam.members.size();
  doc["target_cardinality"] = fam.target_cardinality;
  doc["below_target"] = fam.below_target;
  doc["attempts_used"] = fam.attempts_used;
  return doc;
}

inline nlohmann::json to_json(const SummaryRow& s) {
  return {
      {"n", s.n},
      {"p", s.p},
      {"estimator", to_string(s.estimator)},
      {"loss", to_string(s.loss)},
      {"count", s.count},
      {"errors", s.errors},
      {"tau", s.tau},
      {"mean_loss", s.mean_loss},
      {"stderr_loss", s.stderr_loss},
      {"mean_loss_squared", s.mean_loss_squared},
      {"stderr_loss_squared", s.stderr_loss_squared},
      {"oracle_frequency", s.oracle_frequency},
      {"tau_condition_frequency", s.tau_condition_frequency},
      {"deterministic_violations", s.deterministic_violations},
  };
}

inline nlohmann::json to_json(const LogLogFit& f) {
  return {{"slope", f.slope},
          {"slope_stderr", f.slope_stderr},
          {"intercept", f.intercept},
          {"intercept_stderr", f.intercept_stderr},
          {"points", f.points}};
}

inline nlohmann::json to_json(const ExperimentRecord& r) {
  return {
      {"n", r.n},
      {"p", r.p},
      {"class", to_string(r.variant)},
      {"q", r.q},
      {"R", r.R},
      {"generator", to_string(r.generator)},
      {"decay", r.decay},
      {"A", r.A},
      {"gamma", r.gamma},
      {"delta", r.delta},
      {"trial", r.trial},
      {"seed", r.seed},
      {"estimator", to_string(r.estimator)},
      {"loss", to_string(r.loss)},
      {"loss_value", r.loss_value},
      {"loss_squared", r.loss_squared},
      {"tau", r.tau},
      {"tau_valid", r.tau_valid},
      {"max_deviation", r.max_deviation},
      {"tau_condition", r.tau_condition},
      {"oracle_bound", r.oracle_bound},
      {"oracle_satisfied", r.oracle_satisfied},
      {"error", r.error},
  };
}

}  // namespace sparsecov

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fedsurv/federated.hpp"
#include "fedsurv/types.hpp"

namespace fedsurv {

// What one center reports for one round of federated Cox fitting on a shared
// time grid: at every grid time, the sum of e^{beta.x} over its at-risk rows
// (zeta), the matching covariate-weighted sum (mu, one column per grid
// time), and its event bookkeeping. zeta and mu depend on the broadcast
// beta and are re-sent every round; event_count and event_covariate_sum are
// beta-independent and only cross the wire during setup.
struct WebDiscoSummary {
  Eigen::VectorXd zeta;                 // T
  Eigen::MatrixXd mu;                   // P x T
  Eigen::VectorXi event_count;          // T
  Eigen::MatrixXd event_covariate_sum;  // P x T
};

// Builds the summary by one descending sweep over the center's rows, so each
// zeta column is a suffix sum: zeta is non-increasing across grid times.
// Event times must be grid points.
WebDiscoSummary compute_center_summary(const Dataset& data, const TimeGrid& grid, const Eigen::VectorXd& beta);

// Scalar values one round's report costs a center: zeta (T), mu (P*T) and
// the event counts (T), i.e. T * (P + 2).
std::int64_t webdisco_upload_values(const WebDiscoSummary& summary);

// Server-side reconstruction of the pooled Cox gradient (of the negative log
// partial likelihood) from per-center summaries: grid times with events
// contribute |D| * (sum_k mu_k) / (sum_k zeta_k) minus the event covariate
// sums. Equals cox_gradient on the pooled data to floating-point accuracy.
Eigen::VectorXd assemble_global_gradient(const std::vector<WebDiscoSummary>& summaries);

// One center's report for one round, as seen by the server (which also knows
// the beta it broadcast).
struct WebDiscoRound {
  Eigen::VectorXd beta;
  WebDiscoSummary summary;
};

struct ReconstructedIndividual {
  int grid_index = 0;
  Eigen::VectorXd covariates;
};

// The privacy leak a curious server can exploit: consecutive zeta/mu columns
// differ by exactly the rows leaving the risk set, so a grid time where a
// single individual departs -- and the event count says that individual had
// the event -- hands over its covariates as mu_diff / zeta_diff. A round
// with beta = 0 makes the departure counts exact integers; without one, the
// attack only reports covariates that at least two rounds with different
// betas agree on, so mixed departures are never misreported. Results are
// ordered by grid index.
std::vector<ReconstructedIndividual> telescoping_attack(const std::vector<WebDiscoRound>& rounds);

// Minimal federated Cox driver in this summary exchange style: fixed-step
// gradient descent from beta = 0, recording every center's per-round report
// (the server's view, i.e. exactly what telescoping_attack consumes) and
// metering traffic: P broadcast down per round, T*(P+2) up per center.
struct WebDiscoTrainResult {
  Eigen::VectorXd beta;
  std::vector<std::vector<WebDiscoRound>> center_streams;  // [center][round]
  CommMeter comm;
};

WebDiscoTrainResult run_webdisco_gradient_descent(const std::vector<const Dataset*>& centers, const TimeGrid& grid,
                                                  int rounds, double learning_rate);

}  // namespace fedsurv

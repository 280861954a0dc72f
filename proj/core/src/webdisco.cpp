#include "fedsurv/webdisco.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedsurv/errors.hpp"

namespace fedsurv {

WebDiscoSummary compute_center_summary(const Dataset& data, const TimeGrid& grid, const Eigen::VectorXd& beta) {
  const int p = data.num_covariates();
  const int t = grid.size();
  if (beta.size() != p) {
    throw DataError("beta has " + std::to_string(beta.size()) + " coefficients, data has " + std::to_string(p) +
                    " covariates");
  }
  WebDiscoSummary summary;
  summary.zeta = Eigen::VectorXd::Zero(t);
  summary.mu = Eigen::MatrixXd::Zero(p, t);
  summary.event_count = Eigen::VectorXi::Zero(t);
  summary.event_covariate_sum = Eigen::MatrixXd::Zero(p, t);

  const Eigen::VectorXd weights = (data.covariate_matrix().transpose() * beta).array().exp();
  if (!weights.allFinite()) {
    throw NumericError("risk weights overflowed in summary computation");
  }

  std::vector<int> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (data.time(a) != data.time(b)) return data.time(a) > data.time(b);
    return a < b;
  });

  // Descending sweep: when the cursor has consumed every row with time >=
  // s(m), the running sums are exactly the risk-set sums for grid time m.
  double s0 = 0.0;
  Eigen::VectorXd sx = Eigen::VectorXd::Zero(p);
  std::size_t cursor = 0;
  for (int m = t - 1; m >= 0; --m) {
    const double s = grid.time(m);
    while (cursor < order.size() && data.time(order[cursor]) >= s) {
      const int i = order[cursor];
      s0 += weights[i];
      sx += weights[i] * data.covariates(i);
      ++cursor;
    }
    summary.zeta[m] = s0;
    summary.mu.col(m) = sx;
  }

  for (int i = 0; i < data.size(); ++i) {
    if (!data.event(i)) {
      continue;
    }
    const auto m = grid.try_index_of(data.time(i));
    if (!m) {
      throw DataError("event time " + std::to_string(data.time(i)) +
                      " is not a grid point; quantize the data to the shared grid first");
    }
    summary.event_count[*m] += 1;
    summary.event_covariate_sum.col(*m) += data.covariates(i);
  }
  return summary;
}

std::int64_t webdisco_upload_values(const WebDiscoSummary& summary) {
  const std::int64_t t = summary.zeta.size();
  const std::int64_t p = summary.mu.rows();
  return t * (p + 2);
}

Eigen::VectorXd assemble_global_gradient(const std::vector<WebDiscoSummary>& summaries) {
  if (summaries.empty()) {
    throw DataError("gradient assembly needs at least one summary");
  }
  const int t = static_cast<int>(summaries.front().zeta.size());
  const int p = static_cast<int>(summaries.front().mu.rows());
  for (const WebDiscoSummary& s : summaries) {
    if (s.zeta.size() != t || s.mu.rows() != p || s.mu.cols() != t || s.event_count.size() != t ||
        s.event_covariate_sum.rows() != p || s.event_covariate_sum.cols() != t) {
      throw DataError("summaries disagree on grid size or covariate count");
    }
  }
  Eigen::VectorXd gradient = Eigen::VectorXd::Zero(p);
  for (int m = 0; m < t; ++m) {
    int events = 0;
    double zeta = 0.0;
    for (const WebDiscoSummary& s : summaries) {
      events += s.event_count[m];
      zeta += s.zeta[m];
    }
    if (events == 0) {
      continue;
    }
    if (!(zeta > 0.0)) {
      throw DataError("summaries report events at a grid time with an empty risk set");
    }
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
    for (const WebDiscoSummary& s : summaries) {
      mu += s.mu.col(m);
      gradient -= s.event_covariate_sum.col(m);
    }
    gradient += (static_cast<double>(events) / zeta) * mu;
  }
  return gradient;
}

namespace {

double zeta_diff(const WebDiscoSummary& s, int m) {
  const int t = static_cast<int>(s.zeta.size());
  return s.zeta[m] - (m + 1 < t ? s.zeta[m + 1] : 0.0);
}

Eigen::VectorXd mu_diff(const WebDiscoSummary& s, int m) {
  const int t = static_cast<int>(s.zeta.size());
  if (m + 1 < t) {
    return s.mu.col(m) - s.mu.col(m + 1);
  }
  return s.mu.col(m);
}

}  // namespace

std::vector<ReconstructedIndividual> telescoping_attack(const std::vector<WebDiscoRound>& rounds) {
  if (rounds.empty()) {
    throw DataError("the attack needs at least one observed round");
  }
  const int t = static_cast<int>(rounds.front().summary.zeta.size());
  const Eigen::VectorXi& event_count = rounds.front().summary.event_count;
  for (const WebDiscoRound& r : rounds) {
    if (r.summary.zeta.size() != t || r.summary.event_count.size() != t ||
        (r.summary.event_count.array() != event_count.array()).any()) {
      throw DataError("rounds disagree on the grid or the (beta-independent) event counts");
    }
  }

  const WebDiscoRound* zero_round = nullptr;
  for (const WebDiscoRound& r : rounds) {
    if (r.beta.lpNorm<Eigen::Infinity>() < 1e-12) {
      zero_round = &r;
      break;
    }
  }

  std::vector<ReconstructedIndividual> found;
  for (int m = 0; m < t; ++m) {
    if (event_count[m] != 1) {
      continue;  // only a sole departing individual with the sole event is identifiable this way
    }

    if (zero_round != nullptr) {
      // With beta = 0, e^{beta.x} = 1, so the zeta difference is the exact
      // number of rows leaving the risk set after s(m).
      const double departures = zeta_diff(zero_round->summary, m);
      if (std::abs(departures - 1.0) < 1e-6) {
        found.push_back(ReconstructedIndividual{m, mu_diff(zero_round->summary, m)});
      }
      continue;
    }

    // No zero round: a single departure makes mu_diff / zeta_diff the same
    // covariate vector in every round, while a mixture is a beta-weighted
    // mean that moves as beta moves. Demand agreement across at least two
    // rounds with genuinely different betas before claiming a reconstruction.
    std::vector<const WebDiscoRound*> usable;
    for (const WebDiscoRound& r : rounds) {
      if (std::abs(zeta_diff(r.summary, m)) > 1e-12) {
        usable.push_back(&r);
      }
    }
    if (usable.size() < 2) {
      continue;
    }
    bool distinct_betas = false;
    for (std::size_t a = 1; a < usable.size() && !distinct_betas; ++a) {
      distinct_betas = (usable[a]->beta - usable[0]->beta).lpNorm<Eigen::Infinity>() > 1e-9;
    }
    if (!distinct_betas) {
      continue;
    }
    const Eigen::VectorXd candidate = mu_diff(usable[0]->summary, m) / zeta_diff(usable[0]->summary, m);
    bool agree = true;
    for (std::size_t a = 1; a < usable.size() && agree; ++a) {
      const Eigen::VectorXd other = mu_diff(usable[a]->summary, m) / zeta_diff(usable[a]->summary, m);
      agree = (other - candidate).lpNorm<Eigen::Infinity>() <=
              1e-9 * std::max(1.0, candidate.lpNorm<Eigen::Infinity>());
    }
    if (agree) {
      found.push_back(ReconstructedIndividual{m, candidate});
    }
  }
  return found;
}

WebDiscoTrainResult run_webdisco_gradient_descent(const std::vector<const Dataset*>& centers, const TimeGrid& grid,
                                                  int rounds, double learning_rate) {
  if (centers.empty()) {
    throw DataError("need at least one center");
  }
  for (const Dataset* c : centers) {
    if (c == nullptr) {
      throw DataError("got a null center dataset");
    }
  }
  if (rounds < 1 || !(learning_rate > 0.0)) {
    throw ConfigError("need a positive round count and learning rate");
  }
  const int p = centers.front()->num_covariates();
  WebDiscoTrainResult result;
  result.beta = Eigen::VectorXd::Zero(p);
  result.center_streams.resize(centers.size());

  for (int q = 0; q < rounds; ++q) {
    std::vector<WebDiscoSummary> summaries;
    summaries.reserve(centers.size());
    std::int64_t up = 0;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      WebDiscoSummary s = compute_center_summary(*centers[k], grid, result.beta);
      up += webdisco_upload_values(s);
      result.center_streams[k].push_back(WebDiscoRound{result.beta, s});
      summaries.push_back(std::move(s));
    }
    result.comm.add_round(p, up);
    result.beta -= learning_rate * assemble_global_gradient(summaries);
  }
  return result;
}

}  // namespace fedsurv

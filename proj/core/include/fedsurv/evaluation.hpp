#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fedsurv/schemes.hpp"
#include "fedsurv/types.hpp"

namespace fedsurv {

// Concordance index: over all pairs (i, j) with an observed event at t_i and
// t_j > t_i, the fraction where the model ranks i as riskier (score_i >
// score_j), counting exact score ties as 1/2. Computed in O(N log N) with a
// Fenwick tree over score ranks, using integer pair counts throughout, so
// the result is bit-identical to the quadratic definition. Throws
// NoComparablePairsError when no pair qualifies.
double concordance_index(const Eigen::VectorXd& scores, const Eigen::VectorXd& times,
                         const std::vector<std::uint8_t>& events);
double concordance_index(const Eigen::VectorXd& scores, const Dataset& data);

enum class CvMode {
  PerCenterFolds,  // fold i = the union of every center's i-th fold
  OutOfCenter      // fold k = all of center k; train on the other centers
};

struct CvPlan {
  CvMode mode = CvMode::PerCenterFolds;
  int folds = 5;    // PerCenterFolds only; must not exceed the smallest center
  int repeats = 1;  // re-seeds the fold assignment (and training) each repeat
  std::uint64_t seed = 0;
};

struct CvRow {
  int repeat = 0;
  std::string fold_or_center;
  std::string scheme;
  double c_index = 0.0;  // NaN when the fold failed
  double train_seconds = 0.0;
  std::int64_t comm_values_down = 0;
  std::int64_t comm_values_up = 0;
  bool failed = false;
  std::string error;  // diagnostic for failed folds; not part of the result table
};

// Cross-validation of one or more schemes over one federated dataset.
// Models are trained on the training split's original (unquantized) times --
// schemes quantize internally if configured to -- and always scored against
// the true observed times of the held-out split. LOCAL is scored as the
// average c-index of its per-center models; every other scheme as the
// c-index of its scores. A fold whose training split cannot be fitted (no
// events, say) or whose test split has no comparable pairs becomes a row
// with failed = true rather than an exception. Row order: repeat, then fold,
// then the schemes in the order given. `center_labels`, when provided, names
// the OutOfCenter rows.
std::vector<CvRow> run_cv(const Dataset& data, const FederatedPartition& partition,
                          const std::vector<SchemeConfig>& schemes, const CvPlan& plan,
                          const std::vector<std::string>& center_labels = {}, int threads = 1);

}  // namespace fedsurv

#include "fedsurv/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fedsurv/errors.hpp"
#include "fedsurv/rng.hpp"
#include "fedsurv/threading.hpp"

namespace fedsurv {

namespace {

// Fenwick tree over score ranks: prefix counts in O(log n).
class Fenwick {
 public:
  explicit Fenwick(int n) : tree_(static_cast<std::size_t>(n) + 1, 0) {}

  void add(int i) {
    for (++i; i < static_cast<int>(tree_.size()); i += i & -i) {
      ++tree_[static_cast<std::size_t>(i)];
    }
  }

  // Number of added ranks <= i.
  std::int64_t count_through(int i) const {
    std::int64_t total = 0;
    for (++i; i > 0; i -= i & -i) {
      total += tree_[static_cast<std::size_t>(i)];
    }
    return total;
  }

 private:
  std::vector<std::int64_t> tree_;
};

}  // namespace

double concordance_index(const Eigen::VectorXd& scores, const Eigen::VectorXd& times,
                         const std::vector<std::uint8_t>& events) {
  const int n = static_cast<int>(times.size());
  if (scores.size() != n || static_cast<int>(events.size()) != n) {
    throw DataError("concordance index got mismatched scores/times/events lengths");
  }
  if (!scores.allFinite()) {
    throw NumericError("concordance index got non-finite scores");
  }

  // Dense score ranks; exact ties share a rank.
  std::vector<double> sorted_scores(scores.data(), scores.data() + n);
  std::sort(sorted_scores.begin(), sorted_scores.end());
  sorted_scores.erase(std::unique(sorted_scores.begin(), sorted_scores.end()), sorted_scores.end());
  const auto rank_of = [&](double s) {
    return static_cast<int>(std::lower_bound(sorted_scores.begin(), sorted_scores.end(), s) - sorted_scores.begin());
  };

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return times[a] > times[b]; });

  // Sweep times descending: when an event at time t is scored, the tree holds
  // exactly the individuals with a strictly later observed time. Integer
  // counts make the fast path agree bit-for-bit with the quadratic
  // definition: score = (2*concordant + tied) / (2*comparable).
  Fenwick tree(static_cast<int>(sorted_scores.size()));
  std::int64_t numerator2 = 0;
  std::int64_t comparable = 0;
  std::int64_t in_tree = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t group_end = i;
    while (group_end < order.size() && times[order[group_end]] == times[order[i]]) {
      ++group_end;
    }
    for (std::size_t k = i; k < group_end; ++k) {
      const int idx = order[k];
      if (!events[static_cast<std::size_t>(idx)]) {
        continue;
      }
      const int r = rank_of(scores[idx]);
      comparable += in_tree;
      const std::int64_t not_above = tree.count_through(r);        // later-time scores <= score_i
      const std::int64_t tied = not_above - (r > 0 ? tree.count_through(r - 1) : 0);
      numerator2 += 2 * (not_above - tied) + tied;
      // later-time individuals with strictly lower score are concordant
    }
    for (std::size_t k = i; k < group_end; ++k) {
      tree.add(rank_of(scores[order[k]]));
      ++in_tree;
    }
    i = group_end;
  }

  if (comparable == 0) {
    throw NoComparablePairsError("no comparable pairs: need an event observed strictly before another time");
  }
  return static_cast<double>(numerator2) / (2.0 * static_cast<double>(comparable));
}

double concordance_index(const Eigen::VectorXd& scores, const Dataset& data) {
  return concordance_index(scores, data.times(), data.events());
}

namespace {

struct FoldSplit {
  std::string name;
  std::vector<int> train;  // ascending global indices
  std::vector<int> test;
  std::vector<int> train_center_of;  // aligned with train
  int train_centers = 0;
};

std::vector<FoldSplit> make_folds(const Dataset& data, const FederatedPartition& partition, const CvPlan& plan,
                                  int repeat, const std::vector<std::string>& center_labels) {
  std::vector<FoldSplit> folds;
  if (plan.mode == CvMode::PerCenterFolds) {
    int smallest = data.size();
    for (int k = 0; k < partition.num_centers(); ++k) {
      smallest = std::min(smallest, static_cast<int>(partition.members(k).size()));
    }
    if (plan.folds < 2) {
      throw ConfigError("per-center cross-validation needs at least 2 folds");
    }
    if (plan.folds > smallest) {
      throw ConfigError("fold count " + std::to_string(plan.folds) + " exceeds the smallest center size " +
                        std::to_string(smallest));
    }
    // Every center shuffles its members (independently per repeat) and deals
    // them round-robin over folds; fold f is the union of the f-th parts.
    std::vector<int> fold_of(static_cast<std::size_t>(data.size()), -1);
    for (int k = 0; k < partition.num_centers(); ++k) {
      std::vector<int> members = partition.members(k);
      Rng rng(derive_seed(plan.seed, 0xf01dULL, repeat, k));
      rng.shuffle(members);
      for (std::size_t r = 0; r < members.size(); ++r) {
        fold_of[static_cast<std::size_t>(members[r])] = static_cast<int>(r % static_cast<std::size_t>(plan.folds));
      }
    }
    for (int f = 0; f < plan.folds; ++f) {
      FoldSplit split;
      split.name = std::to_string(f);
      split.train_centers = partition.num_centers();
      for (int i = 0; i < data.size(); ++i) {
        if (fold_of[static_cast<std::size_t>(i)] == f) {
          split.test.push_back(i);
        } else {
          split.train.push_back(i);
          split.train_center_of.push_back(partition.center_of(i));
        }
      }
      folds.push_back(std::move(split));
    }
    return folds;
  }

  // Out-of-center: hold out one center entirely; the remaining centers keep
  // their identity (renumbered to stay contiguous).
  if (partition.num_centers() < 2) {
    throw ConfigError("out-of-center evaluation needs at least two centers");
  }
  for (int held_out = 0; held_out < partition.num_centers(); ++held_out) {
    FoldSplit split;
    split.name = held_out < static_cast<int>(center_labels.size()) ? center_labels[static_cast<std::size_t>(held_out)]
                                                                   : std::to_string(held_out);
    split.train_centers = partition.num_centers() - 1;
    for (int i = 0; i < data.size(); ++i) {
      const int k = partition.center_of(i);
      if (k == held_out) {
        split.test.push_back(i);
      } else {
        split.train.push_back(i);
        split.train_center_of.push_back(k < held_out ? k : k - 1);
      }
    }
    folds.push_back(std::move(split));
  }
  return folds;
}

}  // namespace

std::vector<CvRow> run_cv(const Dataset& data, const FederatedPartition& partition,
                          const std::vector<SchemeConfig>& schemes, const CvPlan& plan,
                          const std::vector<std::string>& center_labels, int threads) {
  if (partition.size() != data.size()) {
    throw DataError("partition covers " + std::to_string(partition.size()) + " individuals, data holds " +
                    std::to_string(data.size()));
  }
  if (schemes.empty()) {
    throw ConfigError("cross-validation needs at least one scheme");
  }
  if (plan.repeats < 1) {
    throw ConfigError("cross-validation needs at least one repeat");
  }

  struct Task {
    int repeat;
    int fold_index;
    FoldSplit split;
  };
  std::vector<Task> tasks;
  for (int repeat = 0; repeat < plan.repeats; ++repeat) {
    std::vector<FoldSplit> folds = make_folds(data, partition, plan, repeat, center_labels);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      tasks.push_back(Task{repeat, static_cast<int>(f), std::move(folds[f])});
    }
  }

  std::vector<std::vector<CvRow>> rows_per_task(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), resolve_threads(threads), [&](int task_index) {
    const Task& task = tasks[static_cast<std::size_t>(task_index)];
    const Dataset train = data.subset(task.split.train);
    const Dataset test = data.subset(task.split.test);
    const FederatedPartition train_partition(task.split.train_center_of, task.split.train_centers);

    for (const SchemeConfig& base : schemes) {
      CvRow row;
      row.repeat = task.repeat;
      row.fold_or_center = task.split.name;
      row.scheme = std::string(scheme_name(base.scheme));
      const auto started = std::chrono::steady_clock::now();
      try {
        SchemeConfig config = base;
        config.seed = derive_seed(base.seed, 0xcf01ULL, task.repeat, task.fold_index);
        const TrainedModel model = train_scheme(config, train, train_partition);
        row.comm_values_down = model.comm.values_down;
        row.comm_values_up = model.comm.values_up;
        if (model.is_per_center()) {
          // Average local performance: each center's own model, same test split.
          double total = 0.0;
          for (int m = 0; m < model.num_models(); ++m) {
            total += concordance_index(model.scores_of(m, test), test);
          }
          row.c_index = total / static_cast<double>(model.num_models());
        } else {
          row.c_index = concordance_index(model.scores(test), test);
        }
      } catch (const DataError& e) {
        row.failed = true;
        row.error = e.what();
        row.c_index = std::numeric_limits<double>::quiet_NaN();
      } catch (const NumericError& e) {
        row.failed = true;
        row.error = e.what();
        row.c_index = std::numeric_limits<double>::quiet_NaN();
      }
      row.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      rows_per_task[static_cast<std::size_t>(task_index)].push_back(std::move(row));
    }
  });

  std::vector<CvRow> rows;
  for (auto& task_rows : rows_per_task) {
    for (auto& row : task_rows) {
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace fedsurv

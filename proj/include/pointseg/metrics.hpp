#pragma once

#include "pointseg/types.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pointseg {

// What to do with classes absent from both prediction and ground truth.
enum class AbsentClassPolicy { Exclude, ScoreOne };

struct IoUReport {
  Vector per_class;                        // K values in [0,1]
  std::vector<std::uint8_t> class_present; // class appears in pred or gt
  double sample_miou = 0.0;
  std::optional<std::vector<int>> permutation;  // pred id -> gt class, when matched
};

inline IoUReport miou(const std::vector<int>& pred, const std::vector<int>& gt, int num_classes,
                      AbsentClassPolicy policy = AbsentClassPolicy::Exclude) {
  if (pred.size() != gt.size()) throw ValidationError("miou: prediction/gt size mismatch");
  if (pred.empty()) throw ValidationError("miou: empty inputs");
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] < 0 || pred[i] >= num_classes || gt[i] < 0 || gt[i] >= num_classes)
      throw ValidationError("miou: label out of range at index " + std::to_string(i));

  IoUReport rep;
  rep.per_class = Vector::Zero(num_classes);
  rep.class_present.assign(static_cast<std::size_t>(num_classes), 0);
  double sum = 0.0;
  int counted = 0;
  for (int k = 0; k < num_classes; ++k) {
    long inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      bool p = pred[i] == k, g = gt[i] == k;
      inter += (p && g) ? 1 : 0;
      uni += (p || g) ? 1 : 0;
    }
    if (uni == 0) {
      // absent from both pred and gt
      rep.per_class(k) = (policy == AbsentClassPolicy::ScoreOne) ? 1.0 : 0.0;
      if (policy == AbsentClassPolicy::ScoreOne) {
        sum += 1.0;
        ++counted;
      }
      continue;
    }
    rep.class_present[static_cast<std::size_t>(k)] = 1;
    rep.per_class(k) = static_cast<double>(inter) / static_cast<double>(uni);
    sum += rep.per_class(k);
    ++counted;
  }
  rep.sample_miou = (counted > 0) ? sum / counted : 0.0;
  return rep;
}

namespace detail {

// Square assignment by shortest augmenting paths with potentials, O(n^3).
// Minimizes the cost sum; returns row -> column.
inline std::vector<int> hungarian_min(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);  // column -> row
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      int i0 = match[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                     v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (match[static_cast<std::size_t>(j)] > 0)
      row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)]) - 1] = j - 1;
  return row_to_col;
}

inline Matrix iou_matrix(const std::vector<int>& pred, const std::vector<int>& gt,
                         int num_classes) {
  Matrix inter = Matrix::Zero(num_classes, num_classes);
  Vector pred_count = Vector::Zero(num_classes);
  Vector gt_count = Vector::Zero(num_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter(pred[i], gt[i]) += 1.0;
    pred_count(pred[i]) += 1.0;
    gt_count(gt[i]) += 1.0;
  }
  Matrix iou(num_classes, num_classes);
  for (int p = 0; p < num_classes; ++p)
    for (int g = 0; g < num_classes; ++g) {
      double uni = pred_count(p) + gt_count(g) - inter(p, g);
      iou(p, g) = (uni > 0) ? inter(p, g) / uni : 0.0;
    }
  return iou;
}

}  // namespace detail

// Relabels unsupervised cluster ids by the permutation maximizing the summed
// class IoU (Hungarian on the negated IoU matrix, ties broken toward the
// identity), then scores as usual.
inline IoUReport best_permutation_miou(const std::vector<int>& pred, const std::vector<int>& gt,
                                       int num_classes,
                                       AbsentClassPolicy policy = AbsentClassPolicy::Exclude) {
  if (pred.size() != gt.size())
    throw ValidationError("best_permutation_miou: prediction/gt size mismatch");
  Matrix iou = detail::iou_matrix(pred, gt, num_classes);
  Matrix cost = -iou;
  for (int d = 0; d < num_classes; ++d) cost(d, d) -= 1e-12;  // identity tie-break
  std::vector<int> perm = detail::hungarian_min(cost);

  std::vector<int> relabelled(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    relabelled[i] = perm[static_cast<std::size_t>(pred[i])];
  IoUReport rep = miou(relabelled, gt, num_classes, policy);
  rep.permutation = perm;
  return rep;
}

struct AggregateResult {
  double cat_avg = 0.0;
  double samp_avg = 0.0;
  std::map<std::string, double> per_category;
};

// SampAvg = mean over samples; CatAvg = mean over categories of per-category
// sample means.
inline AggregateResult aggregate(const std::vector<std::pair<std::string, IoUReport>>& reports) {
  if (reports.empty()) throw ValidationError("aggregate: no reports");
  AggregateResult out;
  std::map<std::string, std::pair<double, int>> cats;
  double total = 0.0;
  for (const auto& [category, rep] : reports) {
    total += rep.sample_miou;
    auto& slot = cats[category];
    slot.first += rep.sample_miou;
    slot.second += 1;
  }
  out.samp_avg = total / static_cast<double>(reports.size());
  double cat_sum = 0.0;
  for (auto& [name, slot] : cats) {
    double mean = slot.first / slot.second;
    out.per_category[name] = mean;
    cat_sum += mean;
  }
  out.cat_avg = cat_sum / static_cast<double>(cats.size());
  return out;
}

inline double overall_accuracy(const std::vector<int>& pred, const std::vector<int>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw ValidationError("overall_accuracy: size mismatch");
  long hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += (pred[i] == gt[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// Classwise means over the samples where each class occurs; feeds the
// per_class entry of the metrics file.
inline Vector mean_per_class(const std::vector<IoUReport>& reports, int num_classes) {
  Vector sum = Vector::Zero(num_classes);
  Vector count = Vector::Zero(num_classes);
  for (const auto& rep : reports)
    for (int k = 0; k < num_classes; ++k)
      if (rep.class_present[static_cast<std::size_t>(k)]) {
        sum(k) += rep.per_class(k);
        count(k) += 1.0;
      }
  for (int k = 0; k < num_classes; ++k)
    if (count(k) > 0) sum(k) /= count(k);
  return sum;
}

}  // namespace pointseg

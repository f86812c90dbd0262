#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vsplit/error.hpp"

namespace vsplit {

struct MetricsReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  double loss = 0.0;
  std::size_t epoch = 0;
};

/// Accuracy plus F1: positive-class (label 1) F1 for binary tasks, unweighted
/// macro F1 otherwise. In the macro mean, classes that appear neither in the
/// predictions nor in the labels are left out.
inline MetricsReport evaluate(std::span<const std::size_t> predicted, std::span<const std::size_t> labels,
                              std::size_t n_classes) {
  if (predicted.size() != labels.size()) {
    throw DataError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw DataError("evaluate: empty label set");
  if (n_classes == 0) throw DataError("evaluate: n_classes must be positive");

  std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto p = predicted[i];
    const auto y = labels[i];
    if (p >= n_classes || y >= n_classes) {
      throw DataError("evaluate: class index out of range at position " + std::to_string(i));
    }
    if (p == y) {
      ++correct;
      ++tp[y];
    } else {
      ++fp[p];
      ++fn[y];
    }
  }

  auto class_f1 = [&](std::size_t c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  };

  MetricsReport report;
  report.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  if (n_classes == 2) {
    report.f1 = class_f1(1);
  } else {
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      if (tp[c] + fp[c] + fn[c] == 0) continue;
      total += class_f1(c);
      ++counted;
    }
    report.f1 = counted == 0 ? 0.0 : total / static_cast<double>(counted);
  }
  return report;
}

}  // namespace vsplit

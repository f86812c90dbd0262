#pragma once

// Cut-layer aggregation. The server combines the K client cut activations into
// one input, and on the way back splits its gradient into K per-client
// gradients. Clients flagged absent in the presence mask contribute nothing
// and receive an all-zero gradient.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vsplit/error.hpp"
#include "vsplit/tensor.hpp"

namespace vsplit {

enum class MergeKind { concat, max, avg, sum, mul };

inline constexpr MergeKind kAllMergeKinds[] = {MergeKind::concat, MergeKind::max, MergeKind::avg,
                                               MergeKind::sum, MergeKind::mul};

inline std::string_view to_string(MergeKind k) {
  switch (k) {
    case MergeKind::concat: return "concat";
    case MergeKind::max: return "max";
    case MergeKind::avg: return "avg";
    case MergeKind::sum: return "sum";
    case MergeKind::mul: return "mul";
  }
  return "?";
}

inline MergeKind parse_merge_kind(std::string_view name) {
  for (const auto k : kAllMergeKinds) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown merge strategy '" + std::string(name) +
                    "' (expected concat, max, avg, sum or mul)");
}

class PresenceMask {
 public:
  PresenceMask() = default;
  explicit PresenceMask(std::vector<bool> present) : present_(std::move(present)) {}

  static PresenceMask all(std::size_t k) { return PresenceMask(std::vector<bool>(k, true)); }

  [[nodiscard]] std::size_t size() const noexcept { return present_.size(); }
  [[nodiscard]] bool operator[](std::size_t i) const { return present_.at(i); }
  void set(std::size_t i, bool v) { present_.at(i) = v; }

  [[nodiscard]] std::size_t count_present() const noexcept {
    std::size_t n = 0;
    for (const bool p : present_) n += p ? 1 : 0;
    return n;
  }
  [[nodiscard]] bool all_present() const noexcept { return count_present() == present_.size(); }

  friend bool operator==(const PresenceMask&, const PresenceMask&) = default;

 private:
  std::vector<bool> present_;
};

/// Returns a description of the incompatibility, or nothing when the widths
/// are acceptable for `kind`.
inline std::optional<std::string> cut_shape_error(MergeKind kind, std::span<const std::size_t> widths) {
  if (widths.empty()) return "no client cut widths given";
  for (const auto w : widths) {
    if (w == 0) return "cut widths must be positive";
  }
  if (kind == MergeKind::concat) return std::nullopt;
  for (const auto w : widths) {
    if (w != widths.front()) {
      std::string msg = "merge strategy '" + std::string(to_string(kind)) +
                        "' requires equal cut widths, got [";
      for (std::size_t i = 0; i < widths.size(); ++i) {
        msg += (i ? ", " : "") + std::to_string(widths[i]);
      }
      return msg + "]";
    }
  }
  return std::nullopt;
}

inline void validate_cut_shapes(MergeKind kind, std::span<const std::size_t> widths) {
  if (auto err = cut_shape_error(kind, widths)) throw ShapeError(*err);
}

/// Width of the merged activation for the given client cut widths.
inline std::size_t merged_width(MergeKind kind, std::span<const std::size_t> widths) {
  validate_cut_shapes(kind, widths);
  if (kind != MergeKind::concat) return widths.front();
  std::size_t total = 0;
  for (const auto w : widths) total += w;
  return total;
}

struct MergeCache {
  MergeKind kind = MergeKind::concat;
  PresenceMask mask;
  std::vector<std::optional<Matrix>> parts;  // empty where absent
  std::vector<std::size_t> widths;
  std::size_t rows = 0;
  /// For max: index of the winning client for each output element.
  std::vector<std::size_t> winner;
};

struct MergeResult {
  Matrix merged;
  MergeCache cache;
};

/// `parts[i]` must hold a value wherever `mask[i]` is set; values at absent
/// positions are ignored.
inline MergeResult merge_forward(MergeKind kind, std::span<const std::optional<Matrix>> parts,
                                 const PresenceMask& mask) {
  if (parts.size() != mask.size()) {
    throw ShapeError("merge: " + std::to_string(parts.size()) + " parts but mask of length " +
                     std::to_string(mask.size()));
  }
  if (mask.count_present() == 0) throw ProtocolError("merge: no client present");
  if (kind == MergeKind::concat && !mask.all_present()) {
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) {
        throw StragglerError("concat merge needs every client output; client " + std::to_string(i) +
                             " is missing");
      }
    }
  }

  MergeCache cache;
  cache.kind = kind;
  cache.mask = mask;
  cache.parts.resize(parts.size());
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!mask[i]) continue;
    if (!parts[i]) throw ProtocolError("merge: client " + std::to_string(i) + " marked present without output");
    cache.parts[i] = *parts[i];
    present.push_back(i);
  }
  const Matrix& first = *cache.parts[present.front()];
  cache.rows = first.rows();
  std::vector<std::size_t> present_widths;
  for (const auto i : present) {
    if (cache.parts[i]->rows() != cache.rows) {
      throw ShapeError("merge: client " + std::to_string(i) + " output " + cache.parts[i]->shape() +
                       " has a different batch size than " + first.shape());
    }
    present_widths.push_back(cache.parts[i]->cols());
  }
  validate_cut_shapes(kind, present_widths);
  cache.widths.assign(parts.size(), first.cols());
  for (const auto i : present) cache.widths[i] = cache.parts[i]->cols();

  if (kind == MergeKind::concat) {
    std::vector<Matrix> ordered;
    for (const auto i : present) ordered.push_back(*cache.parts[i]);
    Matrix merged = concat_cols(ordered);
    return {std::move(merged), std::move(cache)};
  }

  Matrix merged = first;
  switch (kind) {
    case MergeKind::sum:
    case MergeKind::avg:
      for (std::size_t p = 1; p < present.size(); ++p) {
        merged = ewise(EwiseOp::add, merged, *cache.parts[present[p]]);
      }
      if (kind == MergeKind::avg) merged = scale(merged, 1.0 / static_cast<double>(present.size()));
      break;
    case MergeKind::mul:
      for (std::size_t p = 1; p < present.size(); ++p) {
        merged = ewise(EwiseOp::mul, merged, *cache.parts[present[p]]);
      }
      break;
    case MergeKind::max: {
      cache.winner.assign(merged.size(), present.front());
      auto out = merged.values();
      for (std::size_t p = 1; p < present.size(); ++p) {
        const auto v = cache.parts[present[p]]->values();
        for (std::size_t e = 0; e < out.size(); ++e) {
          // strict: ties stay with the lowest client index
          if (v[e] > out[e]) {
            out[e] = v[e];
            cache.winner[e] = present[p];
          }
        }
      }
      break;
    }
    case MergeKind::concat:
      break;
  }
  return {std::move(merged), std::move(cache)};
}

/// Splits the server's gradient w.r.t. the merged activation into one
/// gradient per client, in client-index order.
inline std::vector<Matrix> merge_backward(const MergeCache& cache, const Matrix& upstream) {
  const std::size_t k = cache.parts.size();
  std::size_t expected_cols = 0;
  if (cache.kind == MergeKind::concat) {
    for (const auto w : cache.widths) expected_cols += w;
  } else {
    expected_cols = cache.widths.empty() ? 0 : cache.widths.front();
  }
  if (upstream.rows() != cache.rows || upstream.cols() != expected_cols) {
    throw ShapeError("merge_backward: upstream " + upstream.shape() + " vs merged output " +
                     Matrix::shape_string(cache.rows, expected_cols));
  }

  std::vector<Matrix> grads;
  grads.reserve(k);
  for (std::size_t i = 0; i < k; ++i) grads.emplace_back(cache.rows, cache.widths[i]);

  const auto n_present = static_cast<double>(cache.mask.count_present());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!cache.mask[i]) continue;
    auto& g = grads[i];
    switch (cache.kind) {
      case MergeKind::concat:
        for (std::size_t r = 0; r < cache.rows; ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) = upstream(r, offset + c);
        }
        offset += g.cols();
        break;
      case MergeKind::sum:
        g = upstream;
        break;
      case MergeKind::avg:
        g = scale(upstream, 1.0 / n_present);
        break;
      case MergeKind::max: {
        auto gv = g.values();
        const auto uv = upstream.values();
        for (std::size_t e = 0; e < gv.size(); ++e) gv[e] = cache.winner[e] == i ? uv[e] : 0.0;
        break;
      }
      case MergeKind::mul: {
        g = upstream;
        for (std::size_t j = 0; j < k; ++j) {
          if (j == i || !cache.mask[j]) continue;
          g = ewise(EwiseOp::mul, g, *cache.parts[j]);
        }
        break;
      }
    }
  }
  return grads;
}

}  // namespace vsplit

#pragma once

// Model structure: frailty and baseline choices, parameter layout.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "msfrail/data.hpp"
#include "msfrail/errors.hpp"

namespace msfrail {

enum class FrailtyKind { none, intercept, linear, piecewise };

inline std::string to_string(FrailtyKind k) {
  switch (k) {
    case FrailtyKind::none: return "none";
    case FrailtyKind::intercept: return "intercept";
    case FrailtyKind::linear: return "linear";
    case FrailtyKind::piecewise: return "piecewise";
  }
  return "?";
}

inline FrailtyKind frailty_kind_from_string(const std::string& s) {
  if (s == "none") return FrailtyKind::none;
  if (s == "intercept") return FrailtyKind::intercept;
  if (s == "linear") return FrailtyKind::linear;
  if (s == "piecewise") return FrailtyKind::piecewise;
  throw ConfigError("unknown frailty kind '" + s + "'");
}

struct TimeSegment {
  int first = 0;
  int last = 0;  // inclusive
  friend auto operator<=>(const TimeSegment&, const TimeSegment&) = default;
};

struct FrailtySpec {
  FrailtyKind kind = FrailtyKind::none;
  // Piecewise only: disjoint ordered segments and an optional mask pinning
  // individual segment variances to zero (used by nested-test reduced models).
  std::vector<TimeSegment> segments;
  std::vector<bool> zero_mask;

  static FrailtySpec none() { return {}; }
  static FrailtySpec intercept() { return {FrailtyKind::intercept, {}, {}}; }
  static FrailtySpec linear() { return {FrailtyKind::linear, {}, {}}; }
  static FrailtySpec piecewise(std::vector<TimeSegment> segs = default_segments(),
                               std::vector<bool> mask = {}) {
    return {FrailtyKind::piecewise, std::move(segs), std::move(mask)};
  }
  static std::vector<TimeSegment> default_segments() {
    return {{1, 3}, {4, 5}, {6, 7}};
  }

  // Number of free variance components under this spec.
  int n_sigma() const {
    switch (kind) {
      case FrailtyKind::none: return 0;
      case FrailtyKind::intercept: return 1;
      case FrailtyKind::linear: return 2;
      case FrailtyKind::piecewise: {
        int n = 0;
        for (std::size_t k = 0; k < segments.size(); ++k) {
          if (!segment_pinned(k)) ++n;
        }
        return n;
      }
    }
    return 0;
  }

  bool segment_pinned(std::size_t k) const {
    return k < zero_mask.size() && zero_mask[k];
  }

  std::optional<int> segment_index(int t) const {
    for (std::size_t k = 0; k < segments.size(); ++k) {
      if (t >= segments[k].first && t <= segments[k].last) return static_cast<int>(k);
    }
    return std::nullopt;
  }
};

inline void validate(const FrailtySpec& f) {
  if (f.kind == FrailtyKind::piecewise) {
    if (f.segments.empty()) throw ConfigError("piecewise frailty needs segments");
    for (std::size_t k = 0; k < f.segments.size(); ++k) {
      if (f.segments[k].first > f.segments[k].last) {
        throw ConfigError("piecewise segment " + std::to_string(k) + " is empty");
      }
      if (k > 0 && f.segments[k].first <= f.segments[k - 1].last) {
        throw ConfigError("piecewise segments must be disjoint and ordered");
      }
    }
    if (!f.zero_mask.empty() && f.zero_mask.size() != f.segments.size()) {
      throw ConfigError("piecewise zero mask size must match segment count");
    }
  } else {
    if (!f.segments.empty() || !f.zero_mask.empty()) {
      throw ConfigError("segments/mask only apply to piecewise frailty");
    }
  }
}

enum class BaselineKind { none, piecewise_time };

inline std::string to_string(BaselineKind k) {
  return k == BaselineKind::none ? "none" : "piecewise_time";
}

inline BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "none") return BaselineKind::none;
  if (s == "piecewise_time" || s == "times") return BaselineKind::piecewise_time;
  throw ConfigError("unknown baseline kind '" + s + "'");
}

struct ModelSpec {
  StatePair pair{1, 1};
  FrailtySpec frailty;
  BaselineKind baseline = BaselineKind::none;
  std::vector<std::string> covariate_names;
  int quadrature_order = 20;
};

inline void validate(const ModelSpec& spec) {
  validate(spec.frailty);
  if (spec.baseline == BaselineKind::piecewise_time &&
      (spec.frailty.kind == FrailtyKind::linear ||
       spec.frailty.kind == FrailtyKind::piecewise)) {
    throw ConfigError("time-dependent frailty models exclude the piecewise time baseline");
  }
  if (spec.quadrature_order < 1 || spec.quadrature_order > 100) {
    throw ConfigError("quadrature order must be in [1, 100]");
  }
  if (spec.covariate_names.empty() && spec.baseline == BaselineKind::none) {
    throw ConfigError("model has no parameters: no covariates and no baseline");
  }
}

// Parameters laid out as [alpha (one per observed time) | beta | log_sigma].
// Variances live on the log scale so the optimizer is unconstrained.
struct ParameterVector {
  std::vector<int> alpha_times;  // sorted times with a baseline coefficient
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> log_sigma;

  std::size_t size() const { return alpha.size() + beta.size() + log_sigma.size(); }

  double sigma(std::size_t i) const { return std::exp(log_sigma[i]); }

  std::vector<double> packed() const {
    std::vector<double> out;
    out.reserve(size());
    out.insert(out.end(), alpha.begin(), alpha.end());
    out.insert(out.end(), beta.begin(), beta.end());
    out.insert(out.end(), log_sigma.begin(), log_sigma.end());
    return out;
  }

  void set_packed(const std::vector<double>& v) {
    if (v.size() != size()) throw ConfigError("parameter vector size mismatch");
    std::size_t i = 0;
    for (auto& a : alpha) a = v[i++];
    for (auto& b : beta) b = v[i++];
    for (auto& s : log_sigma) s = v[i++];
  }
};

}  // namespace msfrail

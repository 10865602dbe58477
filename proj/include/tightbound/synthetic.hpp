#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "tightbound/dataset.hpp"

namespace tightbound {

/// Seeded generators for desk-scale experiments. The 2-d kinds draw the label
/// first with P(y = 1) = 1/2, then the features given the label.
///
/// underfit2d (d = 2): y = 1 ~ N((1, 0), 0.8^2 I); y = 0 is a mixture,
///   0.8 N((-1, 0), 0.8^2 I) + 0.2 N((5, 0), 0.4^2 I). The far class-0 cluster
///   sits beyond the class-1 cluster, so the Bayes boundary is not linear and
///   log-loss fits are dragged toward it.
/// separable (d = 2): y = 1 ~ N((2, 2), I), y = 0 ~ N((-2, -2), I), redrawn
///   until x1 + x2 lies outside (-1, 1); the line x1 + x2 = 0 separates the
///   classes with margin 1/sqrt(2).
/// bach_style (d = 2): y = 0 ~ N((0, 0), I); y = 1 is a mixture,
///   0.75 N((1.5, 0), I) + 0.25 N((4, 4), 0.5^2 I). Overlapping classes for
///   ROC and false-positive-rate experiments.
/// highdim (d = 500): x ~ N(0, I); y = 1 with probability sigmoid(beta . x)
///   where beta is a fixed direction (drawn from seed 7) with norm 3. A
///   well-specified logistic model where a linear fit overfits quickly.
enum class SyntheticKind { underfit2d, separable, bach_style, highdim };

SyntheticKind parse_synthetic_kind(std::string_view name);
std::string to_string(SyntheticKind kind);

/// n >= 10. Deterministic in (kind, n, seed).
Dataset make_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed);

namespace synthetic {

struct Gaussian2d {
  std::array<double, 2> mean;
  double stddev;  // isotropic
};

inline constexpr Gaussian2d kUnderfitPositive{{1.0, 0.0}, 0.8};
inline constexpr Gaussian2d kUnderfitNegativeNear{{-1.0, 0.0}, 0.8};
inline constexpr Gaussian2d kUnderfitNegativeFar{{5.0, 0.0}, 0.4};
inline constexpr double kUnderfitFarWeight = 0.2;

inline constexpr Gaussian2d kBachNegative{{0.0, 0.0}, 1.0};
inline constexpr Gaussian2d kBachPositiveNear{{1.5, 0.0}, 1.0};
inline constexpr Gaussian2d kBachPositiveFar{{4.0, 4.0}, 0.5};
inline constexpr double kBachFarWeight = 0.25;

inline constexpr std::size_t kHighdimFeatures = 500;
inline constexpr double kHighdimSignal = 3.0;

}  // namespace synthetic

}  // namespace tightbound

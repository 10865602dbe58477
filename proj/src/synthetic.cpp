#include "tightbound/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace tightbound {

SyntheticKind parse_synthetic_kind(std::string_view name) {
  if (name == "underfit2d") return SyntheticKind::underfit2d;
  if (name == "separable") return SyntheticKind::separable;
  if (name == "bach_style") return SyntheticKind::bach_style;
  if (name == "highdim") return SyntheticKind::highdim;
  throw std::invalid_argument("unknown synthetic kind '" + std::string(name) + "'");
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::underfit2d: return "underfit2d";
    case SyntheticKind::separable: return "separable";
    case SyntheticKind::bach_style: return "bach_style";
    case SyntheticKind::highdim: return "highdim";
  }
  return "unknown";
}

namespace {

using synthetic::Gaussian2d;

std::array<double, 2> draw(const Gaussian2d& g, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  const double a = unit(rng);
  const double b = unit(rng);
  return {g.mean[0] + g.stddev * a, g.mean[1] + g.stddev * b};
}

std::vector<double> highdim_direction() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> beta(synthetic::kHighdimFeatures);
  double norm2 = 0.0;
  for (double& b : beta) {
    b = unit(rng);
    norm2 += b * b;
  }
  const double scale = synthetic::kHighdimSignal / std::sqrt(norm2);
  for (double& b : beta) b *= scale;
  return beta;
}

}  // namespace

Dataset make_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed) {
  if (n < 10) throw std::invalid_argument("synthetic datasets need n >= 10");
  Dataset ds;
  ds.name = to_string(kind);
  ds.n_classes = 2;
  ds.raw_labels = {0.0, 1.0};
  ds.rows.reserve(n);
  ds.labels.reserve(n);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  if (kind == SyntheticKind::highdim) {
    const auto beta = highdim_direction();
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(beta.size());
    ds.n_features = static_cast<std::uint32_t>(beta.size());
    for (std::size_t i = 0; i < n; ++i) {
      double score = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        x[j] = unit(rng);
        score += beta[j] * x[j];
      }
      const double p1 = 1.0 / (1.0 + std::exp(-score));
      ds.labels.push_back(uniform(rng) < p1 ? 1u : 0u);
      ds.rows.push_back(FeatureRow::dense(x));
    }
    return ds;
  }

  ds.n_features = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = coin(rng);
    std::array<double, 2> x{};
    switch (kind) {
      case SyntheticKind::underfit2d:
        if (positive) {
          x = draw(synthetic::kUnderfitPositive, rng);
        } else {
          const bool far = uniform(rng) < synthetic::kUnderfitFarWeight;
          x = draw(far ? synthetic::kUnderfitNegativeFar : synthetic::kUnderfitNegativeNear, rng);
        }
        break;
      case SyntheticKind::separable: {
        const Gaussian2d g{{positive ? 2.0 : -2.0, positive ? 2.0 : -2.0}, 1.0};
        do {
          x = draw(g, rng);
        } while (positive ? (x[0] + x[1] < 1.0) : (x[0] + x[1] > -1.0));
        break;
      }
      case SyntheticKind::bach_style:
        if (positive) {
          const bool far = uniform(rng) < synthetic::kBachFarWeight;
          x = draw(far ? synthetic::kBachPositiveFar : synthetic::kBachPositiveNear, rng);
        } else {
          x = draw(synthetic::kBachNegative, rng);
        }
        break;
      case SyntheticKind::highdim:
        break;
    }
    ds.labels.push_back(positive ? 1u : 0u);
    ds.rows.push_back(FeatureRow::dense(x));
  }
  return ds;
}

}  // namespace tightbound

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

namespace tightbound {

/// Budget and hyperparameters of one training run. The total number of
/// solver updates is outer_iterations * inner_updates; protocols comparing
/// different outer counts hold that product fixed.
struct TrainConfig {
  std::size_t outer_iterations = 1;  // T
  std::size_t inner_updates = 0;     // Z
  double lambda = 0.0;
  std::size_t batch_size = 50;
  std::optional<double> step_size;  // auto when unset
  std::uint64_t seed = 0;
  bool trace = false;
  // Re-verify the SAG gradient-sum invariant after every update.
  bool audit = false;

  std::size_t budget() const { return outer_iterations * inner_updates; }

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

}  // namespace tightbound

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lgmrec/rng.hpp"
#include "lgmrec/tensor.hpp"

namespace lgmrec {

/// Named trainable matrices. Slot order is stable and is what tape leaves refer to.
class ParamSet {
 public:
  std::size_t add(std::string name, DenseMatrix value);

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t slot) const { return names_.at(slot); }
  DenseMatrix& operator[](std::size_t slot) { return values_.at(slot); }
  const DenseMatrix& operator[](std::size_t slot) const { return values_.at(slot); }
  std::optional<std::size_t> find(const std::string& name) const;
  /// Throws kUnavailable when absent.
  std::size_t slot(const std::string& name) const;

  std::vector<DenseMatrix>& values() noexcept { return values_; }
  const std::vector<DenseMatrix>& values() const noexcept { return values_; }
  std::size_t scalar_count() const noexcept;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<DenseMatrix> values_;
};

/// Uniform in ±sqrt(6 / (fan_in + fan_out)), with fan_in = rows and fan_out = cols.
DenseMatrix xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace lgmrec

#include "lgmrec/params.hpp"

#include <cmath>

#include "lgmrec/error.hpp"

namespace lgmrec {

std::size_t ParamSet::add(std::string name, DenseMatrix value) {
  if (find(name)) fail(ErrorCode::kUsage, "duplicate parameter " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParamSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

std::size_t ParamSet::slot(const std::string& name) const {
  if (auto s = find(name)) return *s;
  fail(ErrorCode::kUnavailable, "no parameter named " + name);
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

DenseMatrix xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix m(rows, cols);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : m.values()) v = (2.0 * uniform01(rng) - 1.0) * bound;
  return m;
}

}  // namespace lgmrec

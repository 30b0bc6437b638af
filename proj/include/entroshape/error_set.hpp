#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace entroshape {

/// Position of an error sample inside a (trajectory, timestep, chunk step) batch.
struct SampleIndex {
  std::size_t b = 0;
  std::size_t t = 0;
  std::size_t k = 0;

  friend bool operator==(const SampleIndex&, const SampleIndex&) = default;
};

/// N action-error vectors of common dimension D, stored row-major.
///
/// Provenance is optional; when present there is exactly one unique
/// (b, t, k) index per sample.
class ErrorSet {
 public:
  ErrorSet() = default;

  /// Takes ownership of `values` (size N*D). Throws InputError on a bad shape.
  ErrorSet(std::size_t dim, std::vector<double> values,
           std::optional<std::vector<SampleIndex>> provenance = std::nullopt);

  /// Builds from a list of vectors; all must share the same nonzero length.
  static ErrorSet from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return values_.empty(); }

  std::span<const double> sample(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<double> sample(std::size_t i) {
    return {values_.data() + i * dim_, dim_};
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool has_provenance() const { return provenance_.has_value(); }
  const std::vector<SampleIndex>& provenance() const;

  /// Throws InputError if the set is empty or contains non-finite values.
  void require_nonempty_finite() const;

  friend bool operator==(const ErrorSet&, const ErrorSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::optional<std::vector<SampleIndex>> provenance_;
};

/// CSV with header `b,t,k,e_0,...,e_{D-1}`. Samples without provenance are
/// written with their flat index in `b` and zeros in `t`, `k`.
void write_error_set_csv(std::ostream& out, const ErrorSet& errors);
void write_error_set_csv(const std::string& path, const ErrorSet& errors);
ErrorSet read_error_set_csv(std::istream& in);
ErrorSet read_error_set_csv(const std::string& path);

}  // namespace entroshape

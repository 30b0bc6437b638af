#include "entroshape/error_set.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "entroshape/csv.hpp"
#include "entroshape/error.hpp"

namespace entroshape {

ErrorSet::ErrorSet(std::size_t dim, std::vector<double> values,
                   std::optional<std::vector<SampleIndex>> provenance)
    : dim_(dim), values_(std::move(values)), provenance_(std::move(provenance)) {
  if (dim_ == 0) throw InputError("error samples must have dimension >= 1");
  if (values_.size() % dim_ != 0)
    throw InputError("value count is not a multiple of the sample dimension");
  if (provenance_) {
    if (provenance_->size() != size())
      throw InputError("provenance count does not match sample count");
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
    for (const auto& p : *provenance_) {
      if (!seen.emplace(p.b, p.t, p.k).second)
        throw InputError("duplicate provenance index");
    }
  }
}

ErrorSet ErrorSet::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InputError("error set must contain at least one sample");
  const std::size_t dim = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * dim);
  for (const auto& row : rows) {
    if (row.size() != dim) throw InputError("error samples have mismatched dimensions");
    values.insert(values.end(), row.begin(), row.end());
  }
  return ErrorSet(dim, std::move(values));
}

const std::vector<SampleIndex>& ErrorSet::provenance() const {
  if (!provenance_) throw InputError("error set has no provenance");
  return *provenance_;
}

void ErrorSet::require_nonempty_finite() const {
  if (empty()) throw InputError("error set must contain at least one sample");
  for (double v : values_)
    if (!std::isfinite(v)) throw InputError("error set contains non-finite values");
}

void write_error_set_csv(std::ostream& out, const ErrorSet& errors) {
  out << "b,t,k";
  for (std::size_t d = 0; d < errors.dim(); ++d) out << ",e_" << d;
  out << '\n';
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const SampleIndex idx =
        errors.has_provenance() ? errors.provenance()[i] : SampleIndex{i, 0, 0};
    out << idx.b << ',' << idx.t << ',' << idx.k;
    for (double v : errors.sample(i)) out << ',' << csv::format(v);
    out << '\n';
  }
}

void write_error_set_csv(const std::string& path, const ErrorSet& errors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  write_error_set_csv(out, errors);
  if (!out) throw InputError("failed writing " + path);
}

ErrorSet read_error_set_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty error-set CSV");
  const auto header = csv::split(line);
  if (header.size() < 4 || header[0] != "b" || header[1] != "t" || header[2] != "k")
    throw InputError("error-set CSV header must be b,t,k,e_0,...");
  const std::size_t dim = header.size() - 3;
  for (std::size_t d = 0; d < dim; ++d)
    if (header[3 + d] != "e_" + std::to_string(d))
      throw InputError("unexpected error-set column '" + std::string(header[3 + d]) + "'");

  std::vector<double> values;
  std::vector<SampleIndex> provenance;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split(line);
    if (fields.size() != header.size()) throw InputError("ragged error-set CSV row");
    provenance.push_back({csv::parse_uint(fields[0]), csv::parse_uint(fields[1]),
                          csv::parse_uint(fields[2])});
    for (std::size_t d = 0; d < dim; ++d) values.push_back(csv::parse_double(fields[3 + d]));
  }
  if (provenance.empty()) throw InputError("error-set CSV has no samples");
  return ErrorSet(dim, std::move(values), std::move(provenance));
}

ErrorSet read_error_set_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return read_error_set_csv(in);
}

}  // namespace entroshape

#include "driftbayes/simulate.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "driftbayes/errors.hpp"
#include "driftbayes/rng.hpp"

namespace driftbayes {

std::string to_string(SchemeKind kind) {
  return kind == SchemeKind::exact_ou ? "exact_ou" : "euler";
}

SchemeKind scheme_kind_from_string(const std::string& name) {
  if (name == "exact_ou") return SchemeKind::exact_ou;
  if (name == "euler") return SchemeKind::euler;
  throw ValidationError("unknown simulation scheme '" + name + "'");
}

ObservationSeries ObservationSeries::prefix(std::size_t n) const {
  ObservationSeries out = *this;
  const std::size_t keep = std::min(size(), n + 1) * static_cast<std::size_t>(dim);
  out.points.resize(keep);
  return out;
}

void ObservationSeries::check() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ValidationError("series delta must be positive");
  if (dim < 1) throw ValidationError("series dimension must be positive");
  if (points.empty() || points.size() % static_cast<std::size_t>(dim) != 0)
    throw ValidationError("series must hold at least one complete observation");
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!std::isfinite(points[i]))
      throw ValidationError("series entry " + std::to_string(i / dim) + " is not finite");
}

ObservationSeries simulate_series(const DriftSpec& spec, const StationaryLaw& law, double delta,
                                  std::size_t n, const SimScheme& scheme, std::uint64_t seed) {
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  if (scheme.substeps < 1) throw ValidationError("substeps must be >= 1");
  const auto beta = spec.ou_beta();
  if (scheme.kind == SchemeKind::exact_ou && !beta)
    throw ValidationError("exact_ou scheme requires an OU drift, got " + spec.describe());

  const int d = spec.dim();
  ObservationSeries series;
  series.delta = delta;
  series.dim = d;
  series.origin = {SeriesOrigin::Kind::simulated, seed, scheme, {}};
  series.points.resize((n + 1) * static_cast<std::size_t>(d));

  const auto x0 = sample_stationary(spec, law, 1, split_seed(seed, 0));
  std::copy(x0.points.begin(), x0.points.end(), series.points.begin());

  NormalStream rng(split_seed(seed, 1));
  std::vector<double> x(x0.points.begin(), x0.points.end());
  if (scheme.kind == SchemeKind::exact_ou) {
    const double rho = std::exp(-*beta * delta);
    const double sd = std::sqrt(-std::expm1(-2.0 * *beta * delta) / (2.0 * *beta));
    for (std::size_t i = 1; i <= n; ++i) {
      for (int j = 0; j < d; ++j) x[j] = x[j] * rho + sd * rng.normal();
      std::copy(x.begin(), x.end(), series.points.begin() + i * d);
    }
    return series;
  }

  const double h = delta / scheme.substeps;
  const double sqrt_h = std::sqrt(h);
  const double guard = spec.guard_radius();
  std::vector<double> b(d);
  for (std::size_t i = 1; i <= n; ++i) {
    for (int s = 0; s < scheme.substeps; ++s) {
      spec.evaluate(x, b);
      for (int j = 0; j < d; ++j) x[j] += b[j] * h + sqrt_h * rng.normal();
    }
    for (int j = 0; j < d; ++j)
      if (!(std::abs(x[j]) <= guard))
        throw ExplosionError("Euler path left the guard box |x| <= " + std::to_string(guard) +
                             " at observation " + std::to_string(i));
    std::copy(x.begin(), x.end(), series.points.begin() + i * d);
  }
  return series;
}

BrownianBundle simulate_brownian_bundle(int dim, double delta, int substeps, std::size_t n_paths,
                                        std::uint64_t seed) {
  if (dim < 1 || !(delta > 0.0) || substeps < 1 || n_paths < 1)
    throw ValidationError("Brownian bundle arguments must be positive");
  BrownianBundle bundle{dim, substeps, n_paths, delta, {}};
  const std::size_t stride = static_cast<std::size_t>(substeps) * dim;
  bundle.increments.resize(n_paths * stride);
  const double sd = std::sqrt(delta / substeps);
#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < n_paths; ++p) {
    NormalStream rng(split_seed(seed, p));
    double* out = bundle.increments.data() + p * stride;
    for (std::size_t k = 0; k < stride; ++k) out[k] = sd * rng.normal();
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// CSV

void write_series_csv(const ObservationSeries& series, std::ostream& out) {
  out << 't';
  for (int j = 0; j < series.dim; ++j) out << ",x" << (j + 1);
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << static_cast<double>(i) * series.delta;
    for (double v : series.at(i)) out << ',' << v;
    out << '\n';
  }
}

void write_series_csv(const ObservationSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  write_series_csv(series, out);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(std::string cell, std::size_t row, std::size_t col) {
  while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
  std::size_t start = cell.find_first_not_of(' ');
  if (start == std::string::npos)
    throw ValidationError("row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                          ": empty cell");
  double v = 0.0;
  const char* first = cell.data() + start;
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ValidationError("row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                          ": non-numeric value '" + cell + "'");
  return v;
}

}  // namespace

ObservationSeries read_series_csv(std::istream& in, double delta_declared,
                                  const std::string& file_id) {
  if (!(delta_declared > 0.0)) throw ValidationError("declared delta must be positive");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(file_id + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "t")
    throw ValidationError(file_id + ": header must be t,x1[,x2,...]");
  for (std::size_t j = 1; j < header.size(); ++j)
    if (header[j] != "x" + std::to_string(j))
      throw ValidationError(file_id + ": header column " + std::to_string(j + 1) +
                            " must be x" + std::to_string(j));

  ObservationSeries series;
  series.delta = delta_declared;
  series.dim = static_cast<int>(header.size() - 1);
  series.origin.kind = SeriesOrigin::Kind::ingested;
  series.origin.file_id = file_id;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw ValidationError(file_id + ": row " + std::to_string(row) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
    const double t = parse_cell(cells[0], row, 0);
    const double expected = static_cast<double>(row - 1) * delta_declared;
    if (std::abs(t - expected) > 1e-9 * std::max(std::abs(expected), delta_declared))
      throw ValidationError(file_id + ": row " + std::to_string(row) + " has t = " +
                            std::to_string(t) + ", expected " + std::to_string(expected) +
                            " for delta = " + std::to_string(delta_declared));
    for (std::size_t j = 1; j < cells.size(); ++j) series.points.push_back(parse_cell(cells[j], row, j));
  }
  if (row == 0) throw ValidationError(file_id + ": no observations");
  series.check();
  return series;
}

ObservationSeries ingest_csv(const std::string& path, double delta_declared) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_series_csv(in, delta_declared, path);
}

}  // namespace driftbayes

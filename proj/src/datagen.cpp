#include "dkm/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dkm {

void DistributionSpec::validate() const {
  if (p < 1) throw BadParam("DistributionSpec: p must be >= 1");
  switch (kind) {
    case DistributionKind::ar1_gaussian:
      if (!(std::abs(rho) < 1.0)) throw BadParam("ar1: |rho| must be < 1");
      break;
    case DistributionKind::gaussian_mixture:
      if (mix_rhos.empty()) throw BadParam("mixture: empty rho list");
      for (double r : mix_rhos)
        if (!(std::abs(r) < 1.0)) throw BadParam("mixture: |rho| must be < 1");
      break;
    case DistributionKind::multivariate_t:
      if (!(nu > 2.0)) throw BadParam("multivariate_t: nu must be > 2");
      if (!(std::abs(rho) < 1.0)) throw BadParam("multivariate_t: |rho| must be < 1");
      break;
    case DistributionKind::sparse_gaussian:
      if (sparse_l < 1 || sparse_l > p)
        throw BadParam("sparse_gaussian: need 1 <= L <= p");
      break;
    case DistributionKind::custom_sigma_gaussian:
      if (sigma.rows() != p || sigma.cols() != p)
        throw BadParam("custom_sigma_gaussian: Sigma must be p x p");
      break;
  }
}

Matrix ar1_sigma(int p, double rho) {
  Matrix s(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) s(i, j) = std::pow(rho, std::abs(i - j));
  return s;
}

Matrix sample_ar1(int p, double rho, Index n, RngStream& rng) {
  if (p < 1 || n < 1) throw BadParam("sample_ar1: n, p must be >= 1");
  if (!(std::abs(rho) < 1.0)) throw BadParam("sample_ar1: |rho| must be < 1");
  const double innovation = std::sqrt(1.0 - rho * rho);
  Matrix x(n, p);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    for (int j = 1; j < p; ++j)
      x(i, j) = rho * x(i, j - 1) + innovation * rng.normal();
  }
  return x;
}

Matrix sample_mixture(int p, const std::vector<double>& rhos, Index n,
                      RngStream& rng, std::vector<int>* labels) {
  if (rhos.empty()) throw BadParam("sample_mixture: empty rho list");
  for (double r : rhos)
    if (!(std::abs(r) < 1.0)) throw BadParam("sample_mixture: |rho| must be < 1");
  if (labels) labels->assign(std::size_t(n), 0);
  Matrix x(n, p);
  const int kc = int(rhos.size());
  for (Index i = 0; i < n; ++i) {
    const int z = kc == 1 ? 0 : int(rng.below(std::uint64_t(kc)));
    if (labels) (*labels)[std::size_t(i)] = z;
    const double rho = rhos[std::size_t(z)];
    const double innovation = std::sqrt(1.0 - rho * rho);
    x(i, 0) = rng.normal();
    for (int j = 1; j < p; ++j)
      x(i, j) = rho * x(i, j - 1) + innovation * rng.normal();
  }
  return x;
}

Matrix sample_mvt(int p, double nu, double rho, Index n, RngStream& rng) {
  if (!(nu > 2.0)) throw BadParam("sample_mvt: nu must be > 2");
  const double scale = std::sqrt((nu - 2.0) / nu);
  Matrix x = sample_ar1(p, rho, n, rng);
  for (Index i = 0; i < n; ++i) {
    const double g = rng.gamma(nu / 2.0, nu / 2.0);
    x.row(i) *= scale / std::sqrt(g);
  }
  return x;
}

Matrix sample_sparse_gaussian(int p, int L, Index n, RngStream& rng) {
  if (L < 1 || L > p) throw BadParam("sample_sparse_gaussian: need 1 <= L <= p");
  const double scale = std::sqrt(double(p) / double(L));
  Matrix x = Matrix::Zero(n, p);
  std::vector<int> idx(p);
  for (Index i = 0; i < n; ++i) {
    const double eta = rng.normal();
    // uniform size-L subset by partial Fisher-Yates
    for (int j = 0; j < p; ++j) idx[j] = j;
    for (int j = 0; j < L; ++j) {
      const int k = j + int(rng.below(std::uint64_t(p - j)));
      std::swap(idx[j], idx[k]);
      x(i, idx[j]) = scale * eta;
    }
  }
  return x;
}

Matrix sample_from_spec(const DistributionSpec& spec, Index n, RngStream& rng) {
  spec.validate();
  switch (spec.kind) {
    case DistributionKind::ar1_gaussian:
      return sample_ar1(spec.p, spec.rho, n, rng);
    case DistributionKind::gaussian_mixture:
      return sample_mixture(spec.p, spec.mix_rhos, n, rng);
    case DistributionKind::multivariate_t:
      return sample_mvt(spec.p, spec.nu, spec.rho, n, rng);
    case DistributionKind::sparse_gaussian:
      return sample_sparse_gaussian(spec.p, spec.sparse_l, n, rng);
    case DistributionKind::custom_sigma_gaussian: {
      const Matrix l = Eigen::LLT<Matrix>(symmetrized(spec.sigma)).matrixL();
      return sample_std_normal(rng, n, spec.p) * l.transpose();
    }
  }
  throw BadParam("sample_from_spec: unknown kind");
}

Matrix spec_sigma(const DistributionSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case DistributionKind::ar1_gaussian:
      return ar1_sigma(spec.p, spec.rho);
    case DistributionKind::gaussian_mixture: {
      Matrix s = Matrix::Zero(spec.p, spec.p);
      for (double r : spec.mix_rhos) s += ar1_sigma(spec.p, r);
      return s / double(spec.mix_rhos.size());
    }
    case DistributionKind::multivariate_t:
      return ar1_sigma(spec.p, spec.rho);
    case DistributionKind::sparse_gaussian: {
      const double off = double(spec.sparse_l - 1) / double(spec.p - 1);
      Matrix s = Matrix::Constant(spec.p, spec.p, off);
      s.diagonal().setOnes();
      return s;
    }
    case DistributionKind::custom_sigma_gaussian:
      return symmetrized(spec.sigma);
  }
  throw BadParam("spec_sigma: unknown kind");
}

void ResponseSpec::validate(Index p) const {
  if (k < 1 || Index(k) > p) throw BadParam("ResponseSpec: need 1 <= k <= p");
  if (amplitude < 0.0) throw BadParam("ResponseSpec: amplitude must be >= 0");
}

Response simulate_response(const Matrix& x, const ResponseSpec& spec,
                           RngStream& rng) {
  require_data_matrix(x, "simulate_response");
  spec.validate(x.cols());
  const Index m = x.rows(), p = x.cols();
  Response res;
  res.beta = Vector::Zero(p);

  std::vector<int> idx(p);
  for (Index j = 0; j < p; ++j) idx[std::size_t(j)] = int(j);
  for (int j = 0; j < spec.k; ++j) {
    const int k2 = j + int(rng.below(std::uint64_t(p - j)));
    std::swap(idx[std::size_t(j)], idx[std::size_t(k2)]);
    res.support.push_back(idx[std::size_t(j)]);
  }
  std::sort(res.support.begin(), res.support.end());
  const double b = spec.amplitude / std::sqrt(double(m));
  for (int j : res.support) {
    double sign = 1.0;
    if (spec.random_signs && rng.uniform01() < 0.5) sign = -1.0;
    res.beta[j] = sign * b;
  }
  res.y = x * res.beta;
  for (Index i = 0; i < m; ++i) res.y[i] += rng.normal();
  return res;
}

// --- CSV ----------------------------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

CsvMatrix load_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open " + path);
  CsvMatrix out;
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  bool header_done = !has_header;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_fields(line);
    if (!header_done) {
      out.names = fields;
      width = fields.size();
      header_done = true;
      continue;
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw RaggedRows("load_csv: ragged row at line " + std::to_string(lineno));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      try {
        std::size_t used = 0;
        row[c] = std::stod(fields[c], &used);
        while (used < fields[c].size() &&
               std::isspace(static_cast<unsigned char>(fields[c][used])))
          ++used;
        if (used != fields[c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw CsvParseError("load_csv: cannot parse value at line " +
                            std::to_string(lineno) + ", column " +
                            std::to_string(c + 1));
      }
      if (!std::isfinite(row[c]))
        throw NonFiniteEntry("load_csv: non-finite value at line " +
                             std::to_string(lineno) + ", column " +
                             std::to_string(c + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("load_csv: no data rows in " + path);
  out.values.resize(Index(rows.size()), Index(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      out.values(Index(i), Index(j)) = rows[i][j];
  return out;
}

void save_csv(const std::string& path, const Matrix& values,
              const std::vector<std::string>& names,
              const std::string& comment) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("save_csv: cannot open " + path);
  if (!comment.empty()) out << "# " << comment << "\n";
  if (!names.empty()) {
    if (Index(names.size()) != values.cols())
      throw ShapeMismatch("save_csv: header width mismatch");
    for (std::size_t j = 0; j < names.size(); ++j)
      out << (j ? "," : "") << names[j];
    out << "\n";
  }
  char buf[32];
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", values(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw DataError("save_csv: write failed for " + path);
}

}  // namespace dkm

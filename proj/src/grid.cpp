#include "caplab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>

#include "caplab/errors.hpp"

namespace caplab {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Twiddle factors exp(-2*pi*i*j/N), j = 0..N/2-1, shared across transforms.
const std::vector<cdouble>& twiddles(int n) {
  static std::map<int, std::shared_ptr<std::vector<cdouble>>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_shared<std::vector<cdouble>>(n / 2);
    for (int j = 0; j < n / 2; ++j) {
      double ph = -2.0 * M_PI * j / n;
      (*slot)[j] = cdouble(std::cos(ph), std::sin(ph));
    }
  }
  return *slot;
}

// In-place radix-2 DIT transform of data[offset + k*stride], k = 0..n-1.
// sign = -1: forward (e^{-i...}); sign = +1: inverse without the 1/n scale.
void fft_strided(cdouble* data, int n, std::size_t stride, int sign) {
  // Bit reversal.
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i * stride], data[j * stride]);
  }
  const std::vector<cdouble>& tw = twiddles(n);
  for (int len = 2; len <= n; len <<= 1) {
    const int step = n / len;
    for (int i = 0; i < n; i += len) {
      for (int j = 0; j < len / 2; ++j) {
        cdouble w = tw[j * step];
        if (sign > 0) w = std::conj(w);
        cdouble* a = data + (i + j) * stride;
        cdouble* b = data + (i + j + len / 2) * stride;
        cdouble t = w * (*b);
        *b = *a - t;
        *a += t;
      }
    }
  }
}

void fft_all_axes(std::vector<cdouble>& buf, const Grid& g, int sign) {
  const int n = g.points_per_axis;
  if (g.dim == 1) {
    fft_strided(buf.data(), n, 1, sign);
    return;
  }
  for (int row = 0; row < n; ++row)  // axis 1 (contiguous)
    fft_strided(buf.data() + static_cast<std::size_t>(row) * n, n, 1, sign);
  for (int col = 0; col < n; ++col)  // axis 0 (strided)
    fft_strided(buf.data() + col, n, n, sign);
}

int mode_parity_sign(const Grid& g, std::size_t flat) {
  // (-1)^{k1 (+ k2)}; parity of the storage index equals parity of the
  // signed mode because N is even.
  const int n = g.points_per_axis;
  int par;
  if (g.dim == 1) {
    par = static_cast<int>(flat) & 1;
  } else {
    int j0 = static_cast<int>(flat) / n;
    int j1 = static_cast<int>(flat) % n;
    par = (j0 + j1) & 1;
  }
  return par ? -1 : 1;
}

}  // namespace

Grid::Grid(int dim_, double half_width_, int points_per_axis_)
    : dim(dim_), half_width(half_width_), points_per_axis(points_per_axis_) {
  require(dim == 1 || dim == 2, ErrorCode::ConfigError, "Grid: dim must be 1 or 2");
  require(half_width > 0.0, ErrorCode::ConfigError, "Grid: half width must be positive");
  require(points_per_axis >= 8 && is_power_of_two(points_per_axis),
          ErrorCode::ConfigError, "Grid: N must be a power of two, N >= 8");
}

std::size_t Grid::node_count() const {
  std::size_t n = points_per_axis;
  return dim == 1 ? n : n * n;
}

double Grid::cell_volume() const {
  return dim == 1 ? spacing() : spacing() * spacing();
}

double Grid::box_volume() const {
  double w = 2.0 * half_width;
  return dim == 1 ? w : w * w;
}

double Grid::wavenumber(int signed_k) const { return M_PI * signed_k / half_width; }

RealField::RealField(const Grid& g, double fill) : grid(g), values(g.node_count(), fill) {}

RealField RealField::sample(const Grid& g,
                            const std::function<double(std::span<const double>)>& f) {
  RealField out(g);
  const int n = g.points_per_axis;
  if (g.dim == 1) {
    double x[1];
    for (int j = 0; j < n; ++j) {
      x[0] = g.coord(j);
      out.values[j] = f(std::span<const double>(x, 1));
    }
  } else {
    double x[2];
    for (int j0 = 0; j0 < n; ++j0) {
      x[0] = g.coord(j0);
      for (int j1 = 0; j1 < n; ++j1) {
        x[1] = g.coord(j1);
        out.values[g.index(j0, j1)] = f(std::span<const double>(x, 2));
      }
    }
  }
  return out;
}

bool RealField::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

double RealField::min_value() const {
  return *std::min_element(values.begin(), values.end());
}

double RealField::max_value() const {
  return *std::max_element(values.begin(), values.end());
}

SpectralField::SpectralField(const Grid& g) : grid(g), coeff(g.node_count()) {}

SpectralField forward_transform(const RealField& f) {
  SpectralField out(f.grid);
  std::vector<cdouble>& buf = out.coeff;
  for (std::size_t i = 0; i < f.values.size(); ++i) buf[i] = f.values[i];
  fft_all_axes(buf, f.grid, -1);
  const double scale = f.grid.cell_volume();
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] *= scale * mode_parity_sign(f.grid, i);
  return out;
}

RealField inverse_transform(const SpectralField& F) {
  std::vector<cdouble> buf(F.coeff.size());
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] = F.coeff[i] * static_cast<double>(mode_parity_sign(F.grid, i));
  fft_all_axes(buf, F.grid, +1);
  const double scale = 1.0 / (F.grid.cell_volume() * F.grid.node_count());
  RealField out(F.grid);
  double max_re = 0.0, max_im = 0.0;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    double re = buf[i].real() * scale;
    double im = buf[i].imag() * scale;
    out.values[i] = re;
    max_re = std::max(max_re, std::abs(re));
    max_im = std::max(max_im, std::abs(im));
  }
  if (max_im > 1e-8 * std::max(max_re, 1e-300))
    fail(ErrorCode::SymmetryViolation,
         "inverse_transform: coefficients violate conjugate symmetry");
  return out;
}

SpectralField apply_symbol(
    const SpectralField& F,
    const std::function<cdouble(std::span<const double>)>& symbol) {
  SpectralField out(F.grid);
  const Grid& g = F.grid;
  const int n = g.points_per_axis;
  if (g.dim == 1) {
    double xi[1];
    for (int m = 0; m < n; ++m) {
      xi[0] = g.wavenumber(g.signed_mode(m));
      out.coeff[m] = F.coeff[m] * symbol(std::span<const double>(xi, 1));
    }
  } else {
    double xi[2];
    for (int m0 = 0; m0 < n; ++m0) {
      xi[0] = g.wavenumber(g.signed_mode(m0));
      for (int m1 = 0; m1 < n; ++m1) {
        xi[1] = g.wavenumber(g.signed_mode(m1));
        std::size_t i = g.index(m0, m1);
        out.coeff[i] = F.coeff[i] * symbol(std::span<const double>(xi, 2));
      }
    }
  }
  return out;
}

namespace {

// Per-axis derivative wavenumber with the Nyquist mode dropped.
double deriv_wavenumber(const Grid& g, int storage) {
  int k = g.signed_mode(storage);
  if (k == -g.points_per_axis / 2) return 0.0;
  return g.wavenumber(k);
}

}  // namespace

SpectralField derivative(const SpectralField& F, int axis) {
  require(axis >= 0 && axis < F.grid.dim, ErrorCode::ConfigError,
          "derivative: axis out of range");
  SpectralField out(F.grid);
  const Grid& g = F.grid;
  const int n = g.points_per_axis;
  if (g.dim == 1) {
    for (int m = 0; m < n; ++m)
      out.coeff[m] = F.coeff[m] * cdouble(0.0, deriv_wavenumber(g, m));
  } else {
    for (int m0 = 0; m0 < n; ++m0) {
      for (int m1 = 0; m1 < n; ++m1) {
        double xi = deriv_wavenumber(g, axis == 0 ? m0 : m1);
        std::size_t i = g.index(m0, m1);
        out.coeff[i] = F.coeff[i] * cdouble(0.0, xi);
      }
    }
  }
  return out;
}

RealField gradient_component(const RealField& f, int axis) {
  return inverse_transform(derivative(forward_transform(f), axis));
}

SpectralField laplacian(const SpectralField& F) {
  SpectralField out(F.grid);
  const Grid& g = F.grid;
  const int n = g.points_per_axis;
  if (g.dim == 1) {
    for (int m = 0; m < n; ++m) {
      double xi = g.wavenumber(g.signed_mode(m));
      out.coeff[m] = -xi * xi * F.coeff[m];
    }
  } else {
    for (int m0 = 0; m0 < n; ++m0) {
      double xi0 = g.wavenumber(g.signed_mode(m0));
      for (int m1 = 0; m1 < n; ++m1) {
        double xi1 = g.wavenumber(g.signed_mode(m1));
        std::size_t i = g.index(m0, m1);
        out.coeff[i] = -(xi0 * xi0 + xi1 * xi1) * F.coeff[i];
      }
    }
  }
  return out;
}

double l2_norm(const RealField& f) {
  double s = 0.0;
  for (double v : f.values) s += v * v;
  return std::sqrt(s * f.grid.cell_volume());
}

double l2_norm(const SpectralField& F) {
  double s = 0.0;
  for (const cdouble& c : F.coeff) s += std::norm(c);
  return std::sqrt(s / F.grid.box_volume());
}

double l2_norm_gradient(const SpectralField& F) {
  const Grid& g = F.grid;
  const int n = g.points_per_axis;
  double s = 0.0;
  if (g.dim == 1) {
    for (int m = 0; m < n; ++m) {
      double xi = deriv_wavenumber(g, m);
      s += xi * xi * std::norm(F.coeff[m]);
    }
  } else {
    for (int m0 = 0; m0 < n; ++m0) {
      double xi0 = deriv_wavenumber(g, m0);
      for (int m1 = 0; m1 < n; ++m1) {
        double xi1 = deriv_wavenumber(g, m1);
        s += (xi0 * xi0 + xi1 * xi1) * std::norm(F.coeff[g.index(m0, m1)]);
      }
    }
  }
  return std::sqrt(s / g.box_volume());
}

double l2_norm_gradient(const RealField& f) {
  return l2_norm_gradient(forward_transform(f));
}

double l2_norm_second(const SpectralField& F) {
  const Grid& g = F.grid;
  const int n = g.points_per_axis;
  double s = 0.0;
  if (g.dim == 1) {
    for (int m = 0; m < n; ++m) {
      double xi = g.wavenumber(g.signed_mode(m));
      s += xi * xi * xi * xi * std::norm(F.coeff[m]);
    }
  } else {
    for (int m0 = 0; m0 < n; ++m0) {
      double xi0 = g.wavenumber(g.signed_mode(m0));
      for (int m1 = 0; m1 < n; ++m1) {
        double xi1 = g.wavenumber(g.signed_mode(m1));
        double q = xi0 * xi0 + xi1 * xi1;  // sum_{i,j} xi_i^2 xi_j^2 = |xi|^4
        s += q * q * std::norm(F.coeff[g.index(m0, m1)]);
      }
    }
  }
  return std::sqrt(s / g.box_volume());
}

double inner_product(const RealField& a, const RealField& b) {
  require(a.grid == b.grid, ErrorCode::GridMismatch, "inner_product: grids differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s * a.grid.cell_volume();
}

double integral(const RealField& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s * f.grid.cell_volume();
}

double boundary_mass_fraction(const RealField& f, double band) {
  const Grid& g = f.grid;
  const double cutoff = g.half_width * (1.0 - 2.0 * band);
  double total = 0.0, edge = 0.0;
  const int n = g.points_per_axis;
  if (g.dim == 1) {
    for (int j = 0; j < n; ++j) {
      double a = std::abs(f.values[j]);
      total += a;
      if (std::abs(g.coord(j)) > cutoff) edge += a;
    }
  } else {
    for (int j0 = 0; j0 < n; ++j0) {
      bool e0 = std::abs(g.coord(j0)) > cutoff;
      for (int j1 = 0; j1 < n; ++j1) {
        double a = std::abs(f.values[g.index(j0, j1)]);
        total += a;
        if (e0 || std::abs(g.coord(j1)) > cutoff) edge += a;
      }
    }
  }
  return total > 0.0 ? edge / total : 0.0;
}

void write_snapshot(std::ostream& os, const RealField& f, double t) {
  const Grid& g = f.grid;
  char line[160];
  std::snprintf(line, sizeof line, "# %d %.17g %d %.17g\n", g.dim, g.half_width,
                g.points_per_axis, t);
  os << line;
  const int n = g.points_per_axis;
  if (g.dim == 1) {
    for (int j = 0; j < n; ++j) {
      std::snprintf(line, sizeof line, "%.17g %.17g\n", g.coord(j), f.values[j]);
      os << line;
    }
  } else {
    for (int j0 = 0; j0 < n; ++j0) {
      for (int j1 = 0; j1 < n; ++j1) {
        std::snprintf(line, sizeof line, "%.17g %.17g %.17g\n", g.coord(j0),
                      g.coord(j1), f.values[g.index(j0, j1)]);
        os << line;
      }
    }
  }
}

void write_snapshot(const std::string& path, const RealField& f, double t) {
  std::ofstream os(path);
  require(os.good(), ErrorCode::IoError, "write_snapshot: cannot open " + path);
  write_snapshot(os, f, t);
  require(os.good(), ErrorCode::IoError, "write_snapshot: write failed for " + path);
}

RealField read_snapshot(std::istream& is, double* t_out) {
  std::string header;
  std::getline(is, header);
  int dim = 0, n = 0;
  double L = 0.0, t = 0.0;
  if (std::sscanf(header.c_str(), "# %d %lg %d %lg", &dim, &L, &n, &t) != 4)
    fail(ErrorCode::IoError, "read_snapshot: bad header");
  Grid g(dim, L, n);
  RealField out(g);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    std::string row;
    if (!std::getline(is, row)) fail(ErrorCode::IoError, "read_snapshot: truncated file");
    std::istringstream ss(row);
    double x0 = 0.0, x1 = 0.0, u = 0.0;
    if (dim == 1)
      ss >> x0 >> u;
    else
      ss >> x0 >> x1 >> u;
    if (!ss) fail(ErrorCode::IoError, "read_snapshot: bad row");
    out.values[i] = u;
  }
  if (t_out) *t_out = t;
  return out;
}

RealField read_snapshot(const std::string& path, double* t_out) {
  std::ifstream is(path);
  require(is.good(), ErrorCode::IoError, "read_snapshot: cannot open " + path);
  return read_snapshot(is, t_out);
}

}  // namespace caplab

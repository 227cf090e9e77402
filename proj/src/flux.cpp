#include "caplab/flux.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "caplab/errors.hpp"
#include "caplab/quadrature.hpp"

namespace caplab {

// ---------------------------------------------------------------------------
// bump kernel
// ---------------------------------------------------------------------------

namespace bump {

namespace {

double raw(double s) {
  double q = 1.0 - s * s;
  return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
}

// d/ds log raw = -2s/(1-s^2)^2
double raw_derivative(double s) {
  double q = 1.0 - s * s;
  if (q <= 0.0) return 0.0;
  return raw(s) * (-2.0 * s) / (q * q);
}

double raw_second(double s) {
  double q = 1.0 - s * s;
  if (q <= 0.0) return 0.0;
  double phi = -2.0 * s / (q * q);
  double dphi = -2.0 * (1.0 + 3.0 * s * s) / (q * q * q);
  return raw(s) * (phi * phi + dphi);
}

struct Tables {
  double mass;           // integral of raw over (-1,1)
  double l1_deriv;       // integral |w'| of the normalized kernel
  double l1_second;
  std::vector<double> cdf;  // cumulative of the normalized kernel on nodes
  double ds;
  int cells;

  Tables() {
    cells = 16384;
    ds = 2.0 / cells;
    // The integrand is flat to all orders at the endpoints, so the
    // trapezoid sum converges spectrally.
    double sum = 0.0;
    for (int i = 1; i < cells; ++i) sum += raw(-1.0 + i * ds);
    mass = sum * ds;

    cdf.assign(cells + 1, 0.0);
    for (int i = 0; i < cells; ++i) {
      double a = -1.0 + i * ds, b = a + ds;
      double piece = gauss_integrate([](double s) { return raw(s); }, a, b, 8);
      cdf[i + 1] = cdf[i] + piece / mass;
    }

    l1_deriv = 2.0 * raw(0.0) / mass;  // even kernel, single interior max
    double s2 = 0.0;
    for (int i = 0; i < cells; ++i) {
      double a = -1.0 + i * ds, b = a + ds;
      s2 += gauss_integrate([](double s) { return std::abs(raw_second(s)); }, a, b, 8);
    }
    l1_second = s2 / mass;
  }
};

const Tables& tables() {
  static Tables t;
  return t;
}

}  // namespace

double value(double s) { return raw(s) / tables().mass; }
double derivative(double s) { return raw_derivative(s) / tables().mass; }
double sup() { return value(0.0); }
double l1_norm_derivative() { return tables().l1_deriv; }
double l1_norm_second_derivative() { return tables().l1_second; }

double cdf(double s) {
  if (s <= -1.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const Tables& t = tables();
  double pos = (s + 1.0) / t.ds;
  int cell = std::min(static_cast<int>(pos), t.cells - 1);
  double a = -1.0 + cell * t.ds;
  double u = (s - a) / t.ds;
  // cubic Hermite with the exact kernel as derivative data
  double h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
  double h10 = u * (1.0 - u) * (1.0 - u);
  double h01 = u * u * (3.0 - 2.0 * u);
  double h11 = u * u * (u - 1.0);
  return h00 * t.cdf[cell] + h01 * t.cdf[cell + 1] +
         t.ds * (h10 * value(a) + h11 * value(a + t.ds));
}

}  // namespace bump

// ---------------------------------------------------------------------------
// Mollifier
// ---------------------------------------------------------------------------

Mollifier::Mollifier(double width, int dim_) : n(width), dim(dim_) {
  require(n > 0.0, ErrorCode::NonPositiveWidth, "mollifier: width must be positive");
  require(dim == 1 || dim == 2, ErrorCode::ConfigError, "mollifier: dim must be 1 or 2");
}

double Mollifier::value_space(std::span<const double> x) const {
  double v = 1.0;
  for (int i = 0; i < dim; ++i) v *= bump::value(x[i] / n) / n;
  return v;
}

double Mollifier::value_lambda(double lambda) const {
  return bump::value(lambda / n) / n;
}

double Mollifier::value(std::span<const double> x, double lambda) const {
  return value_space(x) * value_lambda(lambda);
}

Mollifier mollifier(double n, int dim) { return Mollifier(n, dim); }

// ---------------------------------------------------------------------------
// FluxModel
// ---------------------------------------------------------------------------

double FluxModel::clamp_lambda(double lam) const {
  return std::clamp(lam, domain.lo, domain.hi);
}

double FluxModel::profile_clamped(double lam) const {
  return profile(clamp_lambda(lam));
}

double FluxModel::profile_deriv_clamped(double lam) const {
  if (lam < domain.lo || lam > domain.hi) return 0.0;
  return profile_deriv(lam);
}

double FluxModel::eval(int i, std::span<const double> x, double lam) const {
  if (!separable) return eval_general(i, x, lam);
  return permeability(x) * direction[i] * profile_clamped(lam);
}

double FluxModel::dlambda(int i, std::span<const double> x, double lam) const {
  if (!separable) return dlambda_general(i, x, lam);
  return permeability(x) * direction[i] * profile_deriv_clamped(lam);
}

double FluxModel::dlambda_sup(double box_half_width) const {
  const int nx = 33, nl = 513;
  double sup = 0.0;
  std::vector<double> x(dim, 0.0);
  for (int ix = 0; ix < nx; ++ix) {
    x[0] = -box_half_width + 2.0 * box_half_width * ix / (nx - 1);
    for (int il = 0; il < nl; ++il) {
      double lam = window.lo + window.length() * il / (nl - 1);
      for (int i = 0; i < dim; ++i)
        sup = std::max(sup, std::abs(dlambda(i, x, lam)));
    }
  }
  return sup;
}

FluxModel buckley_leverett(double A) {
  return buckley_leverett(A, Interval{0.0, 1.0});
}

FluxModel buckley_leverett(double A, Interval window) {
  require(A > 0.0, ErrorCode::NonPositiveA, "buckley_leverett: A must be positive");
  require(window.contains(Interval{0.0, 1.0}), ErrorCode::ConfigError,
          "buckley_leverett: window must contain [0,1]");
  FluxModel f;
  f.dim = 1;
  f.domain = {0.0, 1.0};
  f.window = window;
  f.mu_mass = 0.0;
  f.beta = 1.0;
  f.separable = true;
  f.direction = {1.0};
  f.profile = [A](double s) {
    double d = s * s + A * (1.0 - s) * (1.0 - s);
    return s * s / d;
  };
  f.profile_deriv = [A](double s) {
    double d = s * s + A * (1.0 - s) * (1.0 - s);
    return 2.0 * A * s * (1.0 - s) / (d * d);
  };
  f.permeability = [](std::span<const double>) { return 1.0; };
  f.perm_left = 1.0;
  for (int i = 0; i <= 4096; ++i)
    f.dlambda_bound = std::max(f.dlambda_bound, f.profile_deriv(i / 4096.0));
  f.dlambda_bound *= 1.0 + 1e-9;
  std::ostringstream tag;
  tag << "buckley_leverett A=" << A;
  f.descriptor = tag.str();
  return f;
}

FluxModel two_rock_flux(const FluxModel& base, double k_left, double k_right,
                        double jump_at) {
  require(base.separable && base.jumps.empty(), ErrorCode::ConfigError,
          "two_rock_flux: base must be homogeneous");
  require(k_left > 0.0 && k_right > 0.0, ErrorCode::NonPositivePermeability,
          "two_rock_flux: permeabilities must be positive");
  FluxModel f = base;
  f.permeability = [k_left, k_right, jump_at](std::span<const double> x) {
    return x[0] < jump_at ? k_left : k_right;
  };
  f.perm_left = k_left;
  double dk = k_right - k_left;
  JumpRecord jump;
  jump.axis = 0;
  jump.position = jump_at;
  jump.perm_jump = dk;
  double dir0 = f.direction[0];
  auto g = [m = base](double lam) { return m.profile_clamped(lam); };
  jump.strength = [dk, dir0, g](double lam) { return dk * dir0 * g(lam); };
  f.jumps = {jump};

  double sup_g = 0.0;
  for (int i = 0; i <= 512; ++i) {
    double lam = f.window.lo + f.window.length() * i / 512.0;
    sup_g = std::max(sup_g, std::abs(f.profile_clamped(lam)));
  }
  double win_edge = std::max(std::abs(f.window.lo), std::abs(f.window.hi));
  f.mu_mass = std::abs(dk) * sup_g * (1.0 + std::pow(win_edge, 1.0 + f.beta));
  f.dlambda_bound = base.dlambda_bound * std::max(k_left, k_right);
  std::ostringstream tag;
  tag << f.descriptor << " two_rock k=(" << k_left << "," << k_right
      << ") at " << jump_at;
  f.descriptor = tag.str();
  return f;
}

FluxModel linear_flux(double c, Interval domain) {
  FluxModel f;
  f.dim = 1;
  f.domain = domain;
  f.window = domain;
  f.mu_mass = 0.0;
  f.separable = true;
  f.direction = {1.0};
  f.profile = [c](double s) { return c * s; };
  f.profile_deriv = [c](double) { return c; };
  f.dlambda_bound = std::abs(c);
  f.permeability = [](std::span<const double>) { return 1.0; };
  f.perm_left = 1.0;
  std::ostringstream tag;
  tag << "linear c=" << c;
  f.descriptor = tag.str();
  return f;
}

FluxModel planar_extension(const FluxModel& flux_1d, std::array<double, 2> direction) {
  require(flux_1d.dim == 1 && flux_1d.separable, ErrorCode::ConfigError,
          "planar_extension: need a separable 1D model");
  FluxModel f = flux_1d;
  f.dim = 2;
  f.direction = {direction[0], direction[1]};
  double max_dir = std::max(std::abs(direction[0]), std::abs(direction[1]));
  f.dlambda_bound = flux_1d.dlambda_bound * max_dir;
  for (JumpRecord& j : f.jumps) {
    double dk = j.perm_jump, dir0 = direction[0];
    auto g = [m = flux_1d](double lam) { return m.profile_clamped(lam); };
    j.strength = [dk, dir0, g](double lam) { return dk * dir0 * g(lam); };
  }
  std::ostringstream tag;
  tag << f.descriptor << " planar2d dir=(" << direction[0] << "," << direction[1] << ")";
  f.descriptor = tag.str();
  return f;
}

FluxModel zero_flux(Interval window) {
  FluxModel f;
  f.dim = 1;
  f.domain = window;
  f.window = window;
  f.separable = true;
  f.direction = {1.0};
  f.profile = [](double) { return 0.0; };
  f.profile_deriv = [](double) { return 0.0; };
  f.permeability = [](std::span<const double>) { return 1.0; };
  f.perm_left = 1.0;
  f.descriptor = "zero";
  return f;
}

namespace {

// Catmull-Rom value on a uniform table.
double catmull_rom(const std::vector<double>& tab, double pos) {
  int nmax = static_cast<int>(tab.size()) - 1;
  double cl = std::clamp(pos, 0.0, static_cast<double>(nmax));
  int i = std::clamp(static_cast<int>(cl), 0, nmax - 1);
  double u = cl - i;
  double p0 = tab[std::max(i - 1, 0)];
  double p1 = tab[i];
  double p2 = tab[i + 1];
  double p3 = tab[std::min(i + 2, nmax)];
  return p1 + 0.5 * u * (p2 - p0 + u * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 +
                                        u * (3.0 * (p1 - p2) + p3 - p0)));
}

}  // namespace

FluxModel table_flux(const std::vector<double>& xs, const std::vector<double>& lambdas,
                     const std::vector<double>& f, Interval window) {
  require(xs.size() >= 4 && lambdas.size() >= 4, ErrorCode::ConfigError,
          "table_flux: need at least a 4x4 lattice");
  require(f.size() == xs.size() * lambdas.size(), ErrorCode::ConfigError,
          "table_flux: value count must equal lattice size");
  FluxModel out;
  out.dim = 1;
  out.domain = {lambdas.front(), lambdas.back()};
  out.window = window.contains(out.domain) ? window : out.domain;
  out.separable = false;
  out.direction = {1.0};
  const double x0 = xs.front(), x1 = xs.back();
  const double l0 = lambdas.front(), l1 = lambdas.back();
  const int nx = static_cast<int>(xs.size());
  const int nl = static_cast<int>(lambdas.size());
  auto values = std::make_shared<std::vector<double>>(f);
  auto at = [values, nx, nl, x0, x1, l0, l1](double x, double lam) {
    double px = (x - x0) / (x1 - x0) * (nx - 1);
    double pl = (std::clamp(lam, l0, l1) - l0) / (l1 - l0) * (nl - 1);
    px = std::clamp(px, 0.0, static_cast<double>(nx - 1));
    // interpolate along lambda for the four x rows around px, then along x
    int i = std::clamp(static_cast<int>(px), 0, nx - 2);
    double u = px - i;
    std::vector<double> col(4);
    for (int r = 0; r < 4; ++r) {
      int row = std::clamp(i - 1 + r, 0, nx - 1);
      std::vector<double> rowv(values->begin() + static_cast<std::ptrdiff_t>(row) * nl,
                               values->begin() + static_cast<std::ptrdiff_t>(row + 1) * nl);
      col[r] = catmull_rom(rowv, pl);
    }
    return col[1] + 0.5 * u * (col[2] - col[0] +
                               u * (2.0 * col[0] - 5.0 * col[1] + 4.0 * col[2] - col[3] +
                                    u * (3.0 * (col[1] - col[2]) + col[3] - col[0])));
  };
  out.eval_general = [at](int, std::span<const double> x, double lam) {
    return at(x[0], lam);
  };
  out.dlambda_general = [at, l0, l1, nl](int, std::span<const double> x, double lam) {
    double h = (l1 - l0) / (nl - 1) * 0.5;
    return (at(x[0], lam + h) - at(x[0], lam - h)) / (2.0 * h);
  };
  out.descriptor = "table";
  return out;
}

FluxModel table_flux_from_file(const std::string& path, Interval window) {
  std::ifstream is(path);
  require(is.good(), ErrorCode::IoError, "table_flux: cannot open " + path);
  std::vector<double> xs, ls, vals;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double x, lam, v;
    if (!(ss >> x >> lam >> v)) fail(ErrorCode::IoError, "table_flux: bad row");
    if (xs.empty() || x != xs.back()) xs.push_back(x);
    if (xs.size() == 1) ls.push_back(lam);
    vals.push_back(v);
  }
  return table_flux(xs, ls, vals, window);
}

// ---------------------------------------------------------------------------
// MollifiedFlux
// ---------------------------------------------------------------------------

namespace {

// Quadrature of w(s) * fn(s) over (-1,1), split at the listed interior points
// and renormalized so the discrete kernel mass is exactly one.
double kernel_convolve(const std::function<double(double)>& fn,
                       std::vector<double> splits) {
  splits.erase(std::remove_if(splits.begin(), splits.end(),
                              [](double s) { return s <= -1.0 || s >= 1.0; }),
               splits.end());
  std::sort(splits.begin(), splits.end());
  std::vector<double> edges = {-1.0};
  for (double s : splits)
    if (s > edges.back() + 1e-14) edges.push_back(s);
  edges.push_back(1.0);
  double val = 0.0, mass = 0.0;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    GaussRule rule = gauss_legendre_on(16, edges[p], edges[p + 1]);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      double w = rule.weights[q] * bump::value(rule.nodes[q]);
      val += w * fn(rule.nodes[q]);
      mass += w;
    }
  }
  return val / mass;
}

double hermite(double v0, double v1, double d0, double d1, double h, double u) {
  double h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
  double h10 = u * (1.0 - u) * (1.0 - u);
  double h01 = u * u * (3.0 - 2.0 * u);
  double h11 = u * u * (u - 1.0);
  return h00 * v0 + h01 * v1 + h * (h10 * d0 + h11 * d1);
}

double hermite_deriv(double v0, double v1, double d0, double d1, double h, double u) {
  double g00 = 6.0 * u * (u - 1.0);
  double g10 = (1.0 - u) * (1.0 - 3.0 * u);
  double g01 = -g00;
  double g11 = u * (3.0 * u - 2.0);
  return g00 * v0 / h + g01 * v1 / h + g10 * d0 + g11 * d1;
}

// Integral of the Hermite cubic over a full cell.
double hermite_cell_integral(double v0, double v1, double d0, double d1, double h) {
  return 0.5 * h * (v0 + v1) + h * h * (d0 - d1) / 12.0;
}

// Integral over the partial cell [0, u] in normalized coordinates.
double hermite_partial_integral(double v0, double v1, double d0, double d1,
                                double h, double u) {
  // antiderivatives of the Hermite basis
  double u2 = u * u, u3 = u2 * u, u4 = u3 * u;
  double H00 = u - u3 + 0.5 * u4;
  double H10 = 0.5 * u2 - (2.0 / 3.0) * u3 + 0.25 * u4;
  double H01 = u3 - 0.5 * u4;
  double H11 = 0.25 * u4 - u3 / 3.0;
  return h * (H00 * v0 + H01 * v1) + h * h * (H10 * d0 + H11 * d1);
}

}  // namespace

MollifiedFlux mollify(const FluxModel& base, double n, double eps,
                      double box_half_width) {
  require(n > 0.0, ErrorCode::NonPositiveWidth, "mollify: width must be positive");
  require(eps > 0.0, ErrorCode::ConfigError, "mollify: eps must be positive");
  double win_edge = std::max(std::abs(base.window.lo), std::abs(base.window.hi));
  double corner = std::sqrt(base.dim * box_half_width * box_half_width +
                            win_edge * win_edge);
  require(corner <= 1.0 / eps, ErrorCode::CutoffTooTight,
          "mollify: box x window does not fit inside B(0, 1/eps)");

  MollifiedFlux out;
  out.base_ = base;
  out.n_ = n;
  out.eps_ = eps;
  out.box_L_ = box_half_width;
  if (base.separable)
    out.build_tables();
  else
    out.build_general_tables();
  out.compute_norms();
  return out;
}

void MollifiedFlux::build_tables() {
  const double lo = std::min({base_.window.lo, base_.domain.lo, 0.0}) - 1.05 * n_;
  const double hi = std::max({base_.window.hi, base_.domain.hi, 0.0}) + 1.05 * n_;
  const int count = 4097;
  tab_lo_ = lo;
  tab_dl_ = (hi - lo) / (count - 1);
  g_tab_.resize(count);
  dg_tab_.resize(count);
  for (int i = 0; i < count; ++i) {
    double lam = lo + i * tab_dl_;
    std::vector<double> splits = {(lam - base_.domain.lo) / n_,
                                  (lam - base_.domain.hi) / n_};
    g_tab_[i] = kernel_convolve(
        [&](double s) { return base_.profile_clamped(lam - n_ * s); }, splits);
    dg_tab_[i] = kernel_convolve(
        [&](double s) { return base_.profile_deriv_clamped(lam - n_ * s); }, splits);
  }
  g_left_ = g_tab_.front();
  g_right_ = g_tab_.back();
  big_g_tab_.resize(count);
  big_g_tab_[0] = 0.0;
  for (int i = 0; i + 1 < count; ++i)
    big_g_tab_[i + 1] = big_g_tab_[i] + hermite_cell_integral(g_tab_[i], g_tab_[i + 1],
                                                              dg_tab_[i], dg_tab_[i + 1],
                                                              tab_dl_);
  big_g_zero_ = 0.0;
  big_g_zero_ = profile_antiderivative(0.0);
}

double MollifiedFlux::profile(double lam) const {
  if (lam <= tab_lo_) return g_left_;
  double pos = (lam - tab_lo_) / tab_dl_;
  int nmax = static_cast<int>(g_tab_.size()) - 1;
  if (pos >= nmax) return g_right_;
  int i = static_cast<int>(pos);
  double u = pos - i;
  return hermite(g_tab_[i], g_tab_[i + 1], dg_tab_[i], dg_tab_[i + 1], tab_dl_, u);
}

double MollifiedFlux::profile_deriv(double lam) const {
  if (lam <= tab_lo_) return 0.0;
  double pos = (lam - tab_lo_) / tab_dl_;
  int nmax = static_cast<int>(g_tab_.size()) - 1;
  if (pos >= nmax) return 0.0;
  int i = static_cast<int>(pos);
  double u = pos - i;
  return hermite_deriv(g_tab_[i], g_tab_[i + 1], dg_tab_[i], dg_tab_[i + 1], tab_dl_, u);
}

double MollifiedFlux::profile_antiderivative(double lam) const {
  int nmax = static_cast<int>(g_tab_.size()) - 1;
  double val;
  if (lam <= tab_lo_) {
    val = g_left_ * (lam - tab_lo_);
  } else {
    double pos = (lam - tab_lo_) / tab_dl_;
    if (pos >= nmax) {
      val = big_g_tab_[nmax] + g_right_ * (lam - (tab_lo_ + nmax * tab_dl_));
    } else {
      int i = static_cast<int>(pos);
      double u = pos - i;
      val = big_g_tab_[i] + hermite_partial_integral(g_tab_[i], g_tab_[i + 1],
                                                     dg_tab_[i], dg_tab_[i + 1],
                                                     tab_dl_, u);
    }
  }
  return val - big_g_zero_;
}

double MollifiedFlux::perm(std::span<const double> x) const {
  if (base_.jumps.empty()) return base_.permeability(x);
  double k = base_.perm_left;
  for (const JumpRecord& j : base_.jumps)
    k += j.perm_jump * bump::cdf((x[j.axis] - j.position) / n_);
  return k;
}

double MollifiedFlux::perm_deriv(std::span<const double> x) const {
  double d = 0.0;
  for (const JumpRecord& j : base_.jumps)
    d += j.perm_jump * bump::value((x[j.axis] - j.position) / n_) / n_;
  return d;
}

double MollifiedFlux::eval(int i, std::span<const double> x, double lam) const {
  if (!base_.separable) {
    double px = (x[0] - gen_x0_) / gen_dx_;
    double pl = (lam - gen_l0_) / gen_dl_;
    std::vector<double> col(4);
    int ix = std::clamp(static_cast<int>(px), 0, gen_nx_ - 2);
    double u = std::clamp(px, 0.0, static_cast<double>(gen_nx_ - 1)) - ix;
    for (int r = 0; r < 4; ++r) {
      int row = std::clamp(ix - 1 + r, 0, gen_nx_ - 1);
      std::vector<double> rowv(gen_f_.begin() + static_cast<std::ptrdiff_t>(row) * gen_nl_,
                               gen_f_.begin() + static_cast<std::ptrdiff_t>(row + 1) * gen_nl_);
      col[r] = catmull_rom(rowv, pl);
    }
    return col[1] + 0.5 * u * (col[2] - col[0] +
                               u * (2.0 * col[0] - 5.0 * col[1] + 4.0 * col[2] - col[3] +
                                    u * (3.0 * (col[1] - col[2]) + col[3] - col[0])));
  }
  return perm(x) * base_.direction[i] * profile(lam);
}

double MollifiedFlux::dlambda(int i, std::span<const double> x, double lam) const {
  if (!base_.separable) {
    double h = gen_dl_ * 0.5;
    double xp[1] = {x[0]};
    return (eval(i, std::span<const double>(xp, 1), lam + h) -
            eval(i, std::span<const double>(xp, 1), lam - h)) / (2.0 * h);
  }
  return perm(x) * base_.direction[i] * profile_deriv(lam);
}

double MollifiedFlux::divx(std::span<const double> x, double lam) const {
  if (!base_.separable) {
    double pl = (lam - gen_l0_) / gen_dl_;
    double px = (x[0] - gen_x0_) / gen_dx_;
    std::vector<double> col(4);
    int ix = std::clamp(static_cast<int>(px), 0, gen_nx_ - 2);
    double u = std::clamp(px, 0.0, static_cast<double>(gen_nx_ - 1)) - ix;
    for (int r = 0; r < 4; ++r) {
      int row = std::clamp(ix - 1 + r, 0, gen_nx_ - 1);
      std::vector<double> rowv(gen_divx_.begin() + static_cast<std::ptrdiff_t>(row) * gen_nl_,
                               gen_divx_.begin() + static_cast<std::ptrdiff_t>(row + 1) * gen_nl_);
      col[r] = catmull_rom(rowv, pl);
    }
    return col[1] + 0.5 * u * (col[2] - col[0] +
                               u * (2.0 * col[0] - 5.0 * col[1] + 4.0 * col[2] - col[3] +
                                    u * (3.0 * (col[1] - col[2]) + col[3] - col[0])));
  }
  if (base_.jumps.empty()) return 0.0;
  int axis = base_.jumps.front().axis;
  return perm_deriv(x) * base_.direction[axis] * profile(lam);
}

double MollifiedFlux::divx_antiderivative(std::span<const double> x, double u) const {
  if (!base_.separable) {
    // adaptive-free Simpson on the interpolated table; plumbing path only
    int steps = 64;
    double h = u / steps;
    double sum = 0.0;
    for (int i = 0; i < steps; ++i) {
      double a = i * h;
      sum += h / 6.0 * (divx(x, a) + 4.0 * divx(x, a + 0.5 * h) + divx(x, a + h));
    }
    return sum;
  }
  if (base_.jumps.empty()) return 0.0;
  int axis = base_.jumps.front().axis;
  return perm_deriv(x) * base_.direction[axis] * profile_antiderivative(u);
}

void MollifiedFlux::build_general_tables() {
  require(base_.dim == 1, ErrorCode::ConfigError,
          "mollify: general-path fluxes are 1D only");
  gen_nx_ = 257;
  gen_nl_ = 513;
  gen_x0_ = -box_L_ - n_;
  gen_dx_ = (2.0 * (box_L_ + n_)) / (gen_nx_ - 1);
  gen_l0_ = base_.window.lo - 1.05 * n_;
  gen_dl_ = (base_.window.length() + 2.1 * n_) / (gen_nl_ - 1);
  gen_f_.assign(static_cast<std::size_t>(gen_nx_) * gen_nl_, 0.0);
  gen_divx_.assign(gen_f_.size(), 0.0);
  const GaussRule& rule = gauss_legendre(24);
  std::vector<double> wv(rule.nodes.size()), wd(rule.nodes.size());
  double mass = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    wv[q] = rule.weights[q] * bump::value(rule.nodes[q]);
    wd[q] = rule.weights[q] * bump::derivative(rule.nodes[q]) / n_;
    mass += wv[q];
  }
  for (auto& w : wv) w /= mass;
  for (auto& w : wd) w /= mass;
  // x-convolution, then lambda-convolution
  std::vector<double> t1(gen_f_.size()), t1x(gen_f_.size());
  for (int ix = 0; ix < gen_nx_; ++ix) {
    double xc = gen_x0_ + ix * gen_dx_;
    for (int il = 0; il < gen_nl_; ++il) {
      double lam = gen_l0_ + il * gen_dl_;
      double v = 0.0, vx = 0.0;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        double xs[1] = {xc - n_ * rule.nodes[q]};
        double fv = base_.eval(0, std::span<const double>(xs, 1), lam);
        v += wv[q] * fv;
        vx += wd[q] * fv;
      }
      t1[static_cast<std::size_t>(ix) * gen_nl_ + il] = v;
      t1x[static_cast<std::size_t>(ix) * gen_nl_ + il] = vx;
    }
  }
  for (int ix = 0; ix < gen_nx_; ++ix) {
    for (int il = 0; il < gen_nl_; ++il) {
      double lam = gen_l0_ + il * gen_dl_;
      double v = 0.0, vx = 0.0;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        double lq = lam - n_ * rule.nodes[q];
        double pl = std::clamp((lq - gen_l0_) / gen_dl_, 0.0,
                               static_cast<double>(gen_nl_ - 1));
        int il2 = std::clamp(static_cast<int>(pl), 0, gen_nl_ - 2);
        double u = pl - il2;
        std::size_t rowbase = static_cast<std::size_t>(ix) * gen_nl_;
        v += wv[q] * ((1.0 - u) * t1[rowbase + il2] + u * t1[rowbase + il2 + 1]);
        vx += wv[q] * ((1.0 - u) * t1x[rowbase + il2] + u * t1x[rowbase + il2 + 1]);
      }
      gen_f_[static_cast<std::size_t>(ix) * gen_nl_ + il] = v;
      gen_divx_[static_cast<std::size_t>(ix) * gen_nl_ + il] = vx;
    }
  }
}

void MollifiedFlux::compute_norms() {
  const Interval win = base_.window;
  if (base_.separable) {
    // profile extrema over the window
    profile_sup_ = 0.0;
    profile_deriv_sup_ = 0.0;
    double gl1 = 0.0;
    const int nl = 2049;
    double dl = win.length() / (nl - 1);
    double prev = std::abs(profile(win.lo));
    for (int i = 0; i < nl; ++i) {
      double lam = win.lo + i * dl;
      double g = std::abs(profile(lam));
      profile_sup_ = std::max(profile_sup_, g);
      profile_deriv_sup_ = std::max(profile_deriv_sup_, std::abs(profile_deriv(lam)));
      if (i > 0) gl1 += 0.5 * dl * (prev + g);
      prev = g;
    }

    // permeability extrema and the jump-kernel integrals over the box
    double kmin = base_.perm_left, kmax = base_.perm_left, acc = base_.perm_left;
    for (const JumpRecord& j : base_.jumps) {
      acc += j.perm_jump;
      kmin = std::min(kmin, acc);
      kmax = std::max(kmax, acc);
    }
    double ksup = std::max(std::abs(kmin), std::abs(kmax));
    double max_dir = 0.0;
    for (double d : base_.direction) max_dir = std::max(max_dir, std::abs(d));
    dlambda_inf_ = ksup * max_dir * profile_deriv_sup_;

    if (base_.jumps.empty()) {
      divf_l1_ = 0.0;
      divf_l2_linf_ = 0.0;
      return;
    }
    std::vector<double> edges = {-box_L_, box_L_};
    for (const JumpRecord& j : base_.jumps) {
      edges.push_back(std::clamp(j.position - n_, -box_L_, box_L_));
      edges.push_back(std::clamp(j.position + n_, -box_L_, box_L_));
    }
    std::sort(edges.begin(), edges.end());
    double kd_l1 = 0.0, kd_l2sq = 0.0;
    double xv[1];
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      if (edges[p + 1] - edges[p] < 1e-15) continue;
      GaussRule rule = gauss_legendre_on(32, edges[p], edges[p + 1]);
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        xv[0] = rule.nodes[q];
        double kd = perm_deriv(std::span<const double>(xv, 1));
        kd_l1 += rule.weights[q] * std::abs(kd);
        kd_l2sq += rule.weights[q] * kd * kd;
      }
    }
    int axis = base_.jumps.front().axis;
    double dir_a = std::abs(base_.direction[axis]);
    double transverse = base_.dim == 2 ? 2.0 * box_L_ : 1.0;
    divf_l1_ = dir_a * kd_l1 * gl1 * transverse;
    divf_l2_linf_ = dir_a * profile_sup_ * std::sqrt(kd_l2sq * transverse);
    return;
  }

  // general path: lattice quadrature over box x window
  double dl1 = 0.0, dl2 = 0.0, dsup = 0.0, psup = 0.0;
  const int nx = 257, nl = 257;
  double dx = 2.0 * box_L_ / (nx - 1);
  double dl = win.length() / (nl - 1);
  double xv[1];
  for (int ix = 0; ix < nx; ++ix) {
    xv[0] = -box_L_ + ix * dx;
    double wx = (ix == 0 || ix == nx - 1) ? 0.5 : 1.0;
    double sup_l = 0.0;
    for (int il = 0; il < nl; ++il) {
      double lam = win.lo + il * dl;
      double wl = (il == 0 || il == nl - 1) ? 0.5 : 1.0;
      double dvx = divx(std::span<const double>(xv, 1), lam);
      dl1 += wx * wl * std::abs(dvx) * dx * dl;
      sup_l = std::max(sup_l, std::abs(dvx));
      dsup = std::max(dsup, std::abs(dlambda(0, std::span<const double>(xv, 1), lam)));
      psup = std::max(psup, std::abs(eval(0, std::span<const double>(xv, 1), lam)));
    }
    dl2 += wx * sup_l * sup_l * dx;
  }
  divf_l1_ = dl1;
  divf_l2_linf_ = std::sqrt(dl2);
  dlambda_inf_ = dsup;
  profile_sup_ = psup;
  profile_deriv_sup_ = dsup;
}

RealField mollify_field(const RealField& u0, double n) {
  require(n > 0.0, ErrorCode::NonPositiveWidth, "mollify_field: width must be positive");
  require(n < u0.grid.half_width, ErrorCode::ConfigError,
          "mollify_field: kernel support must fit in the box");
  SpectralField U = forward_transform(u0);
  const Grid& g = U.grid;
  const int N = g.points_per_axis;
  // kernel transform per axis: w_hat(n * xi), real and even
  std::vector<double> what(N);
  for (int m = 0; m < N; ++m) {
    double kappa = n * g.wavenumber(g.signed_mode(m));
    what[m] = gauss_integrate(
        [kappa](double s) { return bump::value(s) * std::cos(kappa * s); }, -1.0, 1.0,
        64);
  }
  if (g.dim == 1) {
    for (int m = 0; m < N; ++m) U.coeff[m] *= what[m];
  } else {
    for (int m0 = 0; m0 < N; ++m0)
      for (int m1 = 0; m1 < N; ++m1) U.coeff[g.index(m0, m1)] *= what[m0] * what[m1];
  }
  return inverse_transform(U);
}

// ---------------------------------------------------------------------------
// non-degeneracy
// ---------------------------------------------------------------------------

NondegeneracyReport check_nondegeneracy(
    const FluxModel& flux, const std::vector<std::vector<double>>& x_samples,
    const std::vector<std::array<double, 3>>& xi_samples,
    const std::vector<double>& lambda_grid, double zero_tol) {
  require(!x_samples.empty() && !xi_samples.empty() && !lambda_grid.empty(),
          ErrorCode::EmptySampleSet, "check_nondegeneracy: empty sample set");
  NondegeneracyReport report;
  report.zero_tol = zero_tol;
  report.lambda_points = static_cast<int>(lambda_grid.size());
  for (const std::vector<double>& x : x_samples) {
    std::span<const double> xs(x.data(), x.size());
    for (const std::array<double, 3>& xi : xi_samples) {
      int hits = 0;
      for (double lam : lambda_grid) {
        double v = xi[0];
        for (int k = 0; k < flux.dim; ++k) v += flux.dlambda(k, xs, lam) * xi[k + 1];
        if (std::abs(v) < zero_tol) ++hits;
      }
      double frac = static_cast<double>(hits) / lambda_grid.size();
      if (frac > report.max_fraction) {
        report.max_fraction = frac;
        report.worst_x = x;
        report.worst_xi = xi;
      }
    }
  }
  report.degenerate = report.max_fraction > 2.0 / lambda_grid.size();
  return report;
}

std::vector<std::array<double, 3>> default_sphere_samples(int dim) {
  std::vector<std::array<double, 3>> out;
  if (dim == 1) {
    for (int i = 0; i < 64; ++i) {
      double th = 2.0 * M_PI * i / 64.0;
      out.push_back({std::cos(th), std::sin(th), 0.0});
    }
  } else {
    // Fibonacci sphere
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < 512; ++i) {
      double z = 1.0 - 2.0 * (i + 0.5) / 512.0;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double th = golden * i;
      out.push_back({z, r * std::cos(th), r * std::sin(th)});
    }
  }
  return out;
}

}  // namespace caplab

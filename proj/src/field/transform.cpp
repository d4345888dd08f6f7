#include "svscl/transform.hpp"

#include "svscl/error.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace svscl {

namespace {

// FFTW planning is not thread-safe; plans are created once per shape under a
// lock and then executed through the thread-safe new-array interface.
fftw_plan cached_plan(int dim, int m, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto& plan = plans[{dim, m, sign}];
  if (!plan) {
    std::vector<int> n(dim, m);
    std::size_t total = 1;
    for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(m);
    std::vector<Complex> in(total), out(total);
    plan = fftw_plan_dft(dim, n.data(), reinterpret_cast<fftw_complex*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()), sign,
                         FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw Error("FFTW could not create a plan");
  }
  return plan;
}

void execute(void* plan, const Complex* in, Complex* out) {
  fftw_execute_dft(static_cast<fftw_plan>(plan),
                   reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

double parity_phase(const Wavevector& k) {
  int s = 0;
  for (int v : k) s += v;
  return (s % 2 == 0) ? 1.0 : -1.0;
}

}  // namespace

SpectralTransform::SpectralTransform(int dim, int grid_size)
    : dim_(dim), grid_size_(grid_size), points_(1) {
  if (grid_size < 1 || grid_size % 2 == 0) {
    throw PreconditionError("grid size must be odd and positive");
  }
  for (int i = 0; i < dim; ++i) points_ *= static_cast<std::size_t>(grid_size);
  plan_forward_ = cached_plan(dim, grid_size, FFTW_FORWARD);
  plan_backward_ = cached_plan(dim, grid_size, FFTW_BACKWARD);
}

std::size_t SpectralTransform::slot(const Wavevector& k) const {
  std::size_t s = 0;
  for (int i = 0; i < dim_; ++i) {
    int f = k[i] % grid_size_;
    if (f < 0) f += grid_size_;
    s = s * grid_size_ + static_cast<std::size_t>(f);
  }
  return s;
}

void SpectralTransform::spectral_to_hat(const SpectralField& field, std::span<Complex> hat) const {
  if (field.cutoff() > max_resolved()) throw GridTooSmall("grid cannot represent the field cutoff");
  std::fill(hat.begin(), hat.end(), Complex{});
  const auto& layout = field.layout();
  const double scale = 1.0 / (2.0 * basis_norm(dim_));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (!layout.positive(i)) continue;
    const auto& k = layout.wavevector(i);
    const double a_pos = field[i];
    const double a_neg = field[layout.partner(i)];
    if (a_pos == 0.0 && a_neg == 0.0) continue;
    // a sin<k,x> - b cos<k,x>  ->  c_k = (-b - i a)/2 on exp(i<k,x>)
    const Complex c = Complex(-a_neg, -a_pos) * (scale * parity_phase(k));
    hat[slot(k)] = c;
    hat[slot(negate(k))] = std::conj(c);
  }
}

void SpectralTransform::hat_to_spectral(std::span<const Complex> hat, SpectralField& out) const {
  if (out.cutoff() > max_resolved()) throw GridTooSmall("grid cannot resolve the requested cutoff");
  const auto& layout = out.layout();
  const double scale = -2.0 * basis_norm(dim_);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (!layout.positive(i)) continue;
    const auto& k = layout.wavevector(i);
    const Complex c = hat[slot(k)] * parity_phase(k);
    out[i] = scale * c.imag();
    out[layout.partner(i)] = scale * c.real();
  }
}

void SpectralTransform::hat_to_grid(std::span<const Complex> hat, std::span<double> values) const {
  std::vector<Complex> out(points_);
  execute(plan_backward_, hat.data(), out.data());
  for (std::size_t j = 0; j < points_; ++j) values[j] = out[j].real();
}

void SpectralTransform::grid_to_hat(std::span<const double> values, std::span<Complex> hat) const {
  std::vector<Complex> in(values.begin(), values.end());
  execute(plan_forward_, in.data(), hat.data());
  const double inv = 1.0 / static_cast<double>(points_);
  for (auto& c : hat) c *= inv;
}

GridField SpectralTransform::to_grid(const SpectralField& field) const {
  GridField g{dim_, grid_size_, std::vector<double>(points_)};
  to_grid(field, g.values);
  return g;
}

void SpectralTransform::to_grid(const SpectralField& field, std::span<double> values) const {
  std::vector<Complex> hat(points_);
  spectral_to_hat(field, hat);
  hat_to_grid(hat, values);
}

SpectralField SpectralTransform::to_spectral(std::span<const double> values, int cutoff) const {
  std::vector<Complex> hat(points_);
  grid_to_hat(values, hat);
  SpectralField out(dim_, cutoff);
  hat_to_spectral(hat, out);
  return out;
}

// ---------------------------------------------------------------------------
// FluxOperator

FluxOperator::FluxOperator(const FluxPoly& flux, int cutoff, int grid_size)
    : flux_(flux),
      degree_(flux_degree(flux)),
      cutoff_(cutoff),
      transform_(flux.dim(), grid_size) {
  if (grid_size < 2 * degree_ * cutoff + 1) {
    throw GridTooSmall("grid_size " + std::to_string(grid_size) + " below 2*degree*cutoff+1 = " +
                       std::to_string(2 * degree_ * cutoff + 1));
  }
  active_.assign(degree_ + 1, false);
  for (int j = 1; j <= degree_; ++j) {
    for (int i = 0; i < flux.dim(); ++i) {
      if (!flux.coeff(i, j).is_zero()) active_[j] = true;
    }
  }
  pairings_low_ = build_pairings(cutoff_);
  pairings_full_ = build_pairings(degree_ * cutoff_);
}

std::vector<double> FluxOperator::build_pairings(int out_cutoff) const {
  auto layout = ModeLayout::get(flux_.dim(), out_cutoff);
  const std::size_t n = layout->size();
  std::vector<double> table(static_cast<std::size_t>(degree_) * n, 0.0);
  for (int j = 1; j <= degree_; ++j) {
    if (!active_[j]) continue;
    for (std::size_t i = 0; i < n; ++i) {
      table[(j - 1) * n + i] = flux_.pairing_value(j, layout->wavevector(i));
    }
  }
  return table;
}

const std::vector<double>& FluxOperator::pairings(int out_cutoff) const {
  if (out_cutoff == cutoff_) return pairings_low_;
  if (out_cutoff == degree_ * cutoff_) return pairings_full_;
  throw PreconditionError("unsupported output cutoff for the flux operator");
}

SpectralField FluxOperator::divergence_of(const std::vector<const double*>& g, int out_cutoff) const {
  SpectralField out(flux_.dim(), out_cutoff);
  const auto& layout = out.layout();
  const std::size_t n = layout.size();
  const auto& table = pairings(out_cutoff);
  const std::size_t pts = transform_.points();
  std::vector<Complex> acc(n);
  std::vector<Complex> hat(pts);
  for (int j = 1; j <= degree_; ++j) {
    if (!active_[j] || g[j] == nullptr) continue;
    transform_.grid_to_hat(std::span<const double>(g[j], pts), hat);
    const double* p = table.data() + (j - 1) * n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!layout.positive(i) || p[i] == 0.0) continue;
      acc[i] += Complex(0.0, p[i]) * hat[transform_.slot(layout.wavevector(i))];
    }
  }
  // acc holds DFT-ordered coefficients of the divergence at positive k.
  std::vector<Complex> full(pts);
  for (std::size_t i = 0; i < n; ++i) {
    if (!layout.positive(i)) continue;
    full[transform_.slot(layout.wavevector(i))] = acc[i];
  }
  transform_.hat_to_spectral(full, out);
  return out;
}

SpectralField FluxOperator::divergence(const GridField& u_grid, int out_cutoff) const {
  const std::size_t pts = transform_.points();
  std::vector<std::vector<double>> powers(degree_ + 1);
  std::vector<const double*> g(degree_ + 1, nullptr);
  std::vector<double> current(u_grid.values);
  for (int j = 1; j <= degree_; ++j) {
    if (j > 1) {
      for (std::size_t x = 0; x < pts; ++x) current[x] *= u_grid.values[x];
    }
    if (active_[j]) {
      powers[j] = current;
      g[j] = powers[j].data();
    }
  }
  return divergence_of(g, out_cutoff);
}

SpectralField FluxOperator::divergence(const SpectralField& u) const {
  return divergence(grid_of(u), degree_ * cutoff_);
}

SpectralField FluxOperator::linearized(const GridField& u_grid, const SpectralField& xi) const {
  const std::size_t pts = transform_.points();
  const GridField xg = transform_.to_grid(xi);
  std::vector<std::vector<double>> terms(degree_ + 1);
  std::vector<const double*> g(degree_ + 1, nullptr);
  std::vector<double> upow(pts, 1.0);  // u^{j-1}
  for (int j = 1; j <= degree_; ++j) {
    if (j > 1) {
      for (std::size_t x = 0; x < pts; ++x) upow[x] *= u_grid.values[x];
    }
    if (!active_[j]) continue;
    terms[j].resize(pts);
    for (std::size_t x = 0; x < pts; ++x) terms[j][x] = j * upow[x] * xg.values[x];
    g[j] = terms[j].data();
  }
  return divergence_of(g, cutoff_);
}

SpectralField FluxOperator::linearized_transpose(const GridField& u_grid,
                                                 const SpectralField& phi) const {
  const std::size_t pts = transform_.points();
  const auto& layout = phi.layout();
  const std::size_t n = layout.size();
  const auto& table = pairings(cutoff_);
  std::vector<Complex> phi_hat(pts), hat(pts);
  transform_.spectral_to_hat(phi, phi_hat);
  std::vector<double> sum(pts, 0.0), w(pts);
  std::vector<double> upow(pts, 1.0);
  for (int j = 1; j <= degree_; ++j) {
    if (j > 1) {
      for (std::size_t x = 0; x < pts; ++x) upow[x] *= u_grid.values[x];
    }
    if (!active_[j]) continue;
    // <c_j, grad> phi in Fourier space
    std::fill(hat.begin(), hat.end(), Complex{});
    const double* p = table.data() + (j - 1) * n;
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] == 0.0) continue;
      const auto s = transform_.slot(layout.wavevector(i));
      hat[s] = Complex(0.0, p[i]) * phi_hat[s];
    }
    transform_.hat_to_grid(hat, w);
    for (std::size_t x = 0; x < pts; ++x) sum[x] += j * upow[x] * w[x];
  }
  SpectralField out = transform_.to_spectral(sum, cutoff_);
  out *= -1.0;
  return out;
}

SpectralField FluxOperator::second_order(const GridField& u_grid, const SpectralField& a,
                                         const SpectralField& b) const {
  const std::size_t pts = transform_.points();
  const GridField ag = transform_.to_grid(a);
  const GridField bg = transform_.to_grid(b);
  std::vector<std::vector<double>> terms(degree_ + 1);
  std::vector<const double*> g(degree_ + 1, nullptr);
  std::vector<double> upow(pts, 1.0);  // u^{j-2}
  for (int j = 2; j <= degree_; ++j) {
    if (j > 2) {
      for (std::size_t x = 0; x < pts; ++x) upow[x] *= u_grid.values[x];
    }
    if (!active_[j]) continue;
    terms[j].resize(pts);
    for (std::size_t x = 0; x < pts; ++x) {
      terms[j][x] = j * (j - 1) * upow[x] * ag.values[x] * bg.values[x];
    }
    g[j] = terms[j].data();
  }
  return divergence_of(g, cutoff_);
}

}  // namespace svscl

#include "svscl/field.hpp"

#include "svscl/error.hpp"
#include "svscl/transform.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <numeric>

namespace svscl {

double basis_eval(const Wavevector& k, std::span<const double> point) {
  double phase = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) phase += k[i] * point[i];
  return is_positive(k) ? std::sin(phase) : -std::cos(phase);
}

// ---------------------------------------------------------------------------
// ModeLayout

std::shared_ptr<const ModeLayout> ModeLayout::get(int dim, int cutoff) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const ModeLayout>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{dim, cutoff}];
  if (!slot) slot = std::make_shared<ModeLayout>(dim, cutoff);
  return slot;
}

ModeLayout::ModeLayout(int dim, int cutoff) : dim_(dim), cutoff_(cutoff) {
  if (dim < 1) throw PreconditionError("dimension must be >= 1");
  if (cutoff < 1) throw PreconditionError("cutoff must be >= 1");
  Wavevector k(dim, -cutoff);
  while (true) {
    if (!is_zero(k)) {
      modes_.push_back(k);
      norm2_.push_back(static_cast<double>(svscl::norm2(k)));
      positive_.push_back(is_positive(k) ? 1 : 0);
    }
    // lexicographic with the first coordinate slowest
    int i = dim - 1;
    while (i >= 0 && k[i] == cutoff) k[i--] = -cutoff;
    if (i < 0) break;
    ++k[i];
  }
}

std::optional<std::size_t> ModeLayout::find(const Wavevector& k) const {
  if (static_cast<int>(k.size()) != dim_ || max_norm(k) > cutoff_ || is_zero(k)) return std::nullopt;
  const std::size_t side = 2 * static_cast<std::size_t>(cutoff_) + 1;
  std::size_t lin = 0;
  for (int i = 0; i < dim_; ++i) lin = lin * side + static_cast<std::size_t>(k[i] + cutoff_);
  const std::size_t centre = size() / 2;  // (side^d - 1) / 2
  return lin < centre ? lin : lin - 1;
}

// ---------------------------------------------------------------------------
// SpectralField

SpectralField::SpectralField(int dim, int cutoff) : SpectralField(ModeLayout::get(dim, cutoff)) {}

SpectralField::SpectralField(std::shared_ptr<const ModeLayout> layout)
    : layout_(std::move(layout)), coeffs_(layout_->size(), 0.0) {}

SpectralField SpectralField::single_mode(int dim, int cutoff, const Wavevector& k, double value) {
  SpectralField f(dim, cutoff);
  f.set(k, value);
  return f;
}

double SpectralField::coeff(const Wavevector& k) const {
  auto idx = layout_->find(k);
  return idx ? coeffs_[*idx] : 0.0;
}

void SpectralField::set(const Wavevector& k, double value) {
  auto idx = layout_->find(k);
  if (!idx) throw PreconditionError("wavevector outside the field cutoff");
  coeffs_[*idx] = value;
}

SpectralField SpectralField::with_cutoff(int cutoff) const {
  if (cutoff == this->cutoff()) return *this;
  SpectralField out(dim(), cutoff);
  const auto& src = *layout_;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (coeffs_[i] == 0.0) continue;
    if (auto j = out.layout().find(src.wavevector(i))) out.coeffs_[*j] = coeffs_[i];
  }
  return out;
}

bool SpectralField::is_finite() const {
  return std::all_of(coeffs_.begin(), coeffs_.end(), [](double v) { return std::isfinite(v); });
}

namespace {
void require_same_layout(const SpectralField& a, const SpectralField& b) {
  if (a.layout_ptr() != b.layout_ptr()) {
    throw PreconditionError("fields live on different cutoffs");
  }
}
}  // namespace

SpectralField& SpectralField::operator+=(const SpectralField& other) {
  require_same_layout(*this, other);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other) {
  require_same_layout(*this, other);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
  return *this;
}

SpectralField& SpectralField::operator*=(double factor) {
  for (auto& c : coeffs_) c *= factor;
  return *this;
}

SpectralField& SpectralField::axpy(double factor, const SpectralField& other) {
  require_same_layout(*this, other);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += factor * other.coeffs_[i];
  return *this;
}

double dot(const SpectralField& a, const SpectralField& b) {
  require_same_layout(a, b);
  auto ca = a.coeffs(), cb = b.coeffs();
  return std::inner_product(ca.begin(), ca.end(), cb.begin(), 0.0);
}

double l2_norm(const SpectralField& a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// Norms and projections

double sobolev_norm(const SpectralField& field, double alpha) {
  const auto& layout = field.layout();
  double s = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double c = field[i];
    if (c == 0.0) continue;
    s += std::pow(layout.norm2(i), alpha) * c * c;
  }
  return std::sqrt(s);
}

double lp_norm(const SpectralField& field, int p, int grid_size) {
  if (p < 2 || p % 2 != 0) throw PreconditionError("lp_norm needs an even exponent p >= 2");
  if (grid_size < p * field.cutoff() + 1) {
    throw GridTooSmall("lp_norm: grid_size must be at least p*cutoff+1 = " +
                       std::to_string(p * field.cutoff() + 1));
  }
  SpectralTransform transform(field.dim(), grid_size);
  GridField grid = transform.to_grid(field);
  long double acc = 0.0L;
  for (double v : grid.values) acc += std::pow(static_cast<long double>(v), p);
  acc *= grid.cell_volume();
  return static_cast<double>(std::pow(acc, 1.0L / p));
}

namespace {

// u and its mean-zero antiderivative U (U' = u) on the 1-torus.
struct Trig1D {
  std::vector<double> sin_coef;  // by frequency m >= 1, unnormalized
  std::vector<double> cos_coef;

  double value(double x) const {
    double s = 0.0;
    for (std::size_t m = 1; m < sin_coef.size(); ++m) {
      s += sin_coef[m] * std::sin(m * x) + cos_coef[m] * std::cos(m * x);
    }
    return s;
  }
  double antiderivative(double x) const {
    double s = 0.0;
    for (std::size_t m = 1; m < sin_coef.size(); ++m) {
      s += (-sin_coef[m] * std::cos(m * x) + cos_coef[m] * std::sin(m * x)) / m;
    }
    return s;
  }
};

double l1_norm_1d(const SpectralField& field) {
  const int n = field.cutoff();
  const double s = basis_norm(1);
  Trig1D f;
  f.sin_coef.assign(n + 1, 0.0);
  f.cos_coef.assign(n + 1, 0.0);
  bool any = false;
  for (int m = 1; m <= n; ++m) {
    f.sin_coef[m] = field.coeff({m}) / s;
    f.cos_coef[m] = -field.coeff({-m}) / s;
    any = any || f.sin_coef[m] != 0.0 || f.cos_coef[m] != 0.0;
  }
  if (!any) return 0.0;

  const int samples = fft_friendly_odd(32 * n + 1);
  SpectralTransform transform(1, samples);
  GridField grid = transform.to_grid(field);
  const double h = 2.0 * std::numbers::pi / samples;

  // Sign changes on the sampling grid, refined by bisection.
  std::vector<double> zeros;
  for (int j = 0; j < samples; ++j) {
    const double a = grid.values[j];
    const double b = grid.values[(j + 1) % samples];
    if (a == 0.0) {
      zeros.push_back(-std::numbers::pi + j * h);
      continue;
    }
    if ((a < 0.0) == (b < 0.0) || b == 0.0) continue;
    double lo = -std::numbers::pi + j * h, hi = lo + h;
    double flo = a;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = f.value(mid);
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    zeros.push_back(0.5 * (lo + hi));
  }
  if (zeros.empty()) {
    // no sign change: |u| = ±u has zero mean, so u vanishes
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < zeros.size(); ++i) {
    const double a = zeros[i];
    const double b = i + 1 < zeros.size() ? zeros[i + 1] : zeros[0] + 2.0 * std::numbers::pi;
    total += std::abs(f.antiderivative(b) - f.antiderivative(a));
  }
  return total;
}

}  // namespace

double l1_norm(const SpectralField& field) {
  if (field.dim() == 1) return l1_norm_1d(field);
  const int m = fft_friendly_odd(8 * field.cutoff() + 1);
  SpectralTransform transform(field.dim(), m);
  GridField grid = transform.to_grid(field);
  long double acc = 0.0L;
  for (double v : grid.values) acc += std::abs(v);
  return static_cast<double>(acc * grid.cell_volume());
}

SpectralField project_low(const SpectralField& field, double n) {
  SpectralField out = field;
  const auto& layout = field.layout();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (layout.norm2(i) > n * n) out[i] = 0.0;
  }
  return out;
}

SpectralField project_high(const SpectralField& field, double n) {
  SpectralField out = field;
  const auto& layout = field.layout();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (layout.norm2(i) <= n * n) out[i] = 0.0;
  }
  return out;
}

int fft_friendly_odd(int minimum) {
  for (int m = std::max(minimum, 1);; ++m) {
    if (m % 2 == 0) continue;
    int r = m;
    for (int p : {3, 5, 7, 11}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

int dealiased_grid_size(int cutoff, int degree) {
  return fft_friendly_odd(2 * degree * cutoff + 1);
}

SpectralField flux_divergence(const SpectralField& field, const FluxPoly& flux, int grid_size) {
  FluxOperator op(flux, field.cutoff(), grid_size);
  return op.divergence(field);
}

}  // namespace svscl

#include "spectracontrol/spectral_grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

namespace spectracontrol {

// ---------------------------------------------------------------------------
// GridSpec

void GridSpec::validate() const {
    if (dim < 1) throw ValidationError("grid: dim must be >= 1");
    if (!(period > 0.0) || !std::isfinite(period)) throw ValidationError("grid: period must be positive");
    if (points < 2 || (points & (points - 1)) != 0) throw ValidationError("grid: points must be a power of two >= 2");
    if (value_dim < 1) throw ValidationError("grid: value_dim must be >= 1");
    if (!(lp_exponent >= 1.0)) throw ValidationError("grid: lp_exponent must lie in [1, inf]");
    Real total = 1.0;
    for (int i = 0; i < dim; ++i) total *= points;
    if (total * value_dim > 1e8) throw ValidationError("grid: too many samples for desk-scale runs");
}

std::size_t GridSpec::cells() const {
    std::size_t c = 1;
    for (int i = 0; i < dim; ++i) c *= static_cast<std::size_t>(points);
    return c;
}

Real GridSpec::cell_measure() const { return std::pow(cell_width(), dim); }

Real GridSpec::volume() const { return std::pow(period, dim); }

void GridSpec::decode(std::size_t index, std::span<int> positions) const {
    for (int axis = dim - 1; axis >= 0; --axis) {
        positions[static_cast<std::size_t>(axis)] = static_cast<int>(index % static_cast<std::size_t>(points));
        index /= static_cast<std::size_t>(points);
    }
}

std::size_t GridSpec::encode(std::span<const int> positions) const {
    std::size_t index = 0;
    for (int axis = 0; axis < dim; ++axis) {
        int p = positions[static_cast<std::size_t>(axis)] % points;
        if (p < 0) p += points;
        index = index * static_cast<std::size_t>(points) + static_cast<std::size_t>(p);
    }
    return index;
}

std::vector<Real> GridSpec::frequency(std::size_t index) const {
    std::vector<int> pos(static_cast<std::size_t>(dim));
    decode(index, pos);
    std::vector<Real> xi(static_cast<std::size_t>(dim));
    for (int a = 0; a < dim; ++a) xi[static_cast<std::size_t>(a)] = axis_frequency(pos[static_cast<std::size_t>(a)]);
    return xi;
}

std::size_t GridSpec::mirror(std::size_t index) const {
    std::vector<int> pos(static_cast<std::size_t>(dim));
    decode(index, pos);
    for (auto& p : pos) p = (points - p) % points;
    return encode(pos);
}

GridSpec parse_grid(const std::string& text) {
    GridSpec g;
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 4) throw ValidationError("--grid expects d:N:Q:n (got '" + text + "')");
    try {
        g.dim = std::stoi(parts[0]);
        g.points = std::stoi(parts[1]);
        g.period = std::stod(parts[2]);
        g.value_dim = std::stoi(parts[3]);
    } catch (const std::exception&) {
        throw ValidationError("--grid expects numeric d:N:Q:n (got '" + text + "')");
    }
    g.validate();
    return g;
}

// ---------------------------------------------------------------------------
// FFT backend

namespace {

class PlanCache {
public:
    fftw_plan get(const GridSpec& grid, int sign) {
        const auto key = std::make_tuple(grid.dim, grid.points, grid.value_dim, sign);
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        std::vector<int> n(static_cast<std::size_t>(grid.dim), grid.points);
        const std::size_t total = grid.samples();
        auto* in = fftw_alloc_complex(total);
        auto* out = fftw_alloc_complex(total);
        fftw_plan plan = fftw_plan_many_dft(grid.dim, n.data(), grid.value_dim, in, nullptr, grid.value_dim, 1, out,
                                            nullptr, grid.value_dim, 1, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        if (plan == nullptr) throw NumericalFailure("fftw: plan creation failed");
        plans_.emplace(key, plan);
        return plan;
    }

    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

private:
    std::mutex mutex_;
    std::map<std::tuple<int, int, int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

std::vector<Complex> run_dft(const GridSpec& grid, std::span<const Complex> input, int sign, Real scale) {
    if (input.size() != grid.samples()) throw ValidationError("transform: sample count does not match grid");
    std::vector<Complex> in(input.begin(), input.end());
    std::vector<Complex> out(input.size());
    fftw_execute_dft(plan_cache().get(grid, sign), reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    for (auto& z : out) z *= scale;
    return out;
}

}  // namespace

std::vector<Complex> forward_transform(const GridSpec& grid, std::span<const Complex> values) {
    return run_dft(grid, values, FFTW_FORWARD, grid.cell_measure());
}

std::vector<Complex> inverse_transform(const GridSpec& grid, std::span<const Complex> coefficients) {
    return run_dft(grid, coefficients, FFTW_BACKWARD, 1.0 / grid.volume());
}

// ---------------------------------------------------------------------------
// SpectralField

SpectralField::SpectralField(GridSpec grid, std::vector<Complex> values, std::vector<Complex> coefficients,
                             std::optional<std::vector<Real>> band)
    : grid_(std::move(grid)), values_(std::move(values)), coefficients_(std::move(coefficients)),
      band_(std::move(band)) {}

SpectralField SpectralField::from_values(const GridSpec& grid, std::vector<Complex> values) {
    grid.validate();
    auto coefficients = forward_transform(grid, values);
    return SpectralField(grid, std::move(values), std::move(coefficients), std::nullopt);
}

SpectralField SpectralField::from_coefficients(const GridSpec& grid, std::vector<Complex> coefficients,
                                               std::optional<std::vector<Real>> band) {
    grid.validate();
    auto values = inverse_transform(grid, coefficients);
    return SpectralField(grid, std::move(values), std::move(coefficients), std::move(band));
}

SpectralField SpectralField::zeros(const GridSpec& grid) {
    grid.validate();
    return SpectralField(grid, std::vector<Complex>(grid.samples()), std::vector<Complex>(grid.samples()),
                         std::nullopt);
}

SpectralField SpectralField::constant(const GridSpec& grid, std::span<const Complex> value) {
    if (value.size() != static_cast<std::size_t>(grid.value_dim))
        throw ValidationError("constant field: value has wrong dimension");
    std::vector<Complex> values(grid.samples());
    for (std::size_t c = 0; c < grid.cells(); ++c)
        std::copy(value.begin(), value.end(), values.begin() + static_cast<std::ptrdiff_t>(c * value.size()));
    return from_values(grid, std::move(values));
}

SpectralField SpectralField::single_mode(const GridSpec& grid, std::span<const int> wavenumbers,
                                         std::span<const Complex> value) {
    grid.validate();
    if (wavenumbers.size() != static_cast<std::size_t>(grid.dim) ||
        value.size() != static_cast<std::size_t>(grid.value_dim))
        throw ValidationError("single mode: wavenumber or value dimension mismatch");
    for (int k : wavenumbers)
        if (k < -grid.points / 2 || k >= grid.points / 2) throw ValidationError("single mode: wavenumber off lattice");
    std::vector<Complex> coefficients(grid.samples());
    const std::size_t index = grid.encode(wavenumbers);
    const Real vol = grid.volume();
    for (std::size_t j = 0; j < value.size(); ++j) coefficients[index * value.size() + j] = vol * value[j];
    return from_coefficients(grid, std::move(coefficients));
}

std::span<const Complex> SpectralField::value_at(std::size_t cell) const {
    const auto n = static_cast<std::size_t>(grid_.value_dim);
    return std::span<const Complex>(values_).subspan(cell * n, n);
}

std::span<const Complex> SpectralField::coefficient_at(std::size_t index) const {
    const auto n = static_cast<std::size_t>(grid_.value_dim);
    return std::span<const Complex>(coefficients_).subspan(index * n, n);
}

SpectralField SpectralField::with_band(std::vector<Real> lambda) const {
    return SpectralField(grid_, values_, coefficients_, std::move(lambda));
}

SpectralField SpectralField::scaled(Complex s) const {
    auto v = values_;
    auto c = coefficients_;
    for (auto& z : v) z *= s;
    for (auto& z : c) z *= s;
    return SpectralField(grid_, std::move(v), std::move(c), band_);
}

SpectralField SpectralField::conjugated() const {
    std::vector<Complex> v(values_.size());
    std::transform(values_.begin(), values_.end(), v.begin(), [](Complex z) { return std::conj(z); });
    std::vector<Complex> c(coefficients_.size());
    const auto n = static_cast<std::size_t>(grid_.value_dim);
    for (std::size_t idx = 0; idx < grid_.cells(); ++idx) {
        const std::size_t m = grid_.mirror(idx);
        for (std::size_t j = 0; j < n; ++j) c[idx * n + j] = std::conj(coefficients_[m * n + j]);
    }
    std::optional<std::vector<Real>> band = band_;
    return SpectralField(grid_, std::move(v), std::move(c), std::move(band));
}

SpectralField SpectralField::plus(const SpectralField& other, Complex s) const {
    if (!(other.grid_ == grid_)) throw ValidationError("field sum: grids differ");
    auto v = values_;
    auto c = coefficients_;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] += s * other.values_[i];
        c[i] += s * other.coefficients_[i];
    }
    std::optional<std::vector<Real>> band;
    if (band_ && other.band_) {
        band = *band_;
        for (std::size_t a = 0; a < band->size(); ++a) (*band)[a] = std::max((*band)[a], (*other.band_)[a]);
    }
    return SpectralField(grid_, std::move(v), std::move(c), std::move(band));
}

SpectralField SpectralField::masked(std::span<const std::uint8_t> mask) const {
    if (mask.size() != grid_.cells()) throw ValidationError("mask: cell count does not match grid");
    auto v = values_;
    const auto n = static_cast<std::size_t>(grid_.value_dim);
    for (std::size_t cell = 0; cell < mask.size(); ++cell)
        if (mask[cell] == 0)
            for (std::size_t j = 0; j < n; ++j) v[cell * n + j] = 0.0;
    return from_values(grid_, std::move(v));
}

bool SpectralField::is_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](Complex z) { return z == Complex(0.0); });
}

SpectralField forward_transform(const SpectralField& field) {
    return SpectralField::from_values(field.grid(), std::vector<Complex>(field.values().begin(), field.values().end()));
}

// ---------------------------------------------------------------------------
// Norms

Real lp_norm(const GridSpec& grid, std::span<const Complex> values, Real p, std::span<const std::uint8_t> mask) {
    if (!(p >= 1.0)) throw ValidationError("lp_norm: p must lie in [1, inf]");
    const auto n = static_cast<std::size_t>(grid.value_dim);
    const std::size_t cells = grid.cells();
    const bool use_mask = !mask.empty();
    if (use_mask && mask.size() != cells) throw ValidationError("lp_norm: mask size mismatch");
    if (std::isinf(p)) {
        Real m = 0.0;
        for (std::size_t c = 0; c < cells; ++c) {
            if (use_mask && mask[c] == 0) continue;
            m = std::max(m, vector_norm(values.subspan(c * n, n), grid.x_norm));
        }
        return m;
    }
    // Scale by the largest pointwise norm so large p does not overflow.
    Real peak = 0.0;
    std::vector<Real> pointwise(cells, 0.0);
    for (std::size_t c = 0; c < cells; ++c) {
        if (use_mask && mask[c] == 0) continue;
        pointwise[c] = vector_norm(values.subspan(c * n, n), grid.x_norm);
        peak = std::max(peak, pointwise[c]);
    }
    if (peak == 0.0) return 0.0;
    Real acc = 0.0;
    if (p == 2.0) {
        for (Real v : pointwise) acc += (v / peak) * (v / peak);
    } else if (p == 1.0) {
        for (Real v : pointwise) acc += v / peak;
    } else {
        for (Real v : pointwise) acc += std::pow(v / peak, p);
    }
    return peak * std::pow(acc * grid.cell_measure(), 1.0 / p);
}

Real lp_norm(const SpectralField& field, Real p) { return lp_norm(field.grid(), field.values(), p); }

Real lp_norm(const SpectralField& field) { return lp_norm(field, field.grid().lp_exponent); }

// ---------------------------------------------------------------------------
// Band limitation

void check_resolvable(const GridSpec& grid, std::span<const Real> lambda) {
    if (lambda.size() != static_cast<std::size_t>(grid.dim))
        throw ValidationError("lambda: expected one entry per axis");
    for (Real l : lambda) {
        if (!(l > 0.0)) throw ValidationError("lambda: entries must be positive");
        if (l / 2.0 > grid.nyquist())
            throw ValidationError("lambda: band lambda/2 exceeds the Nyquist band pi*N/Q of the grid");
    }
}

bool in_box(const GridSpec& grid, std::size_t index, std::span<const Real> lambda) {
    for (int axis = grid.dim - 1; axis >= 0; --axis) {
        const int pos = static_cast<int>(index % static_cast<std::size_t>(grid.points));
        index /= static_cast<std::size_t>(grid.points);
        if (std::abs(grid.axis_frequency(pos)) >= lambda[static_cast<std::size_t>(axis)] / 2.0) return false;
    }
    return true;
}

std::size_t modes_in_box(const GridSpec& grid, std::span<const Real> lambda) {
    std::size_t count = 0;
    for (std::size_t idx = 0; idx < grid.cells(); ++idx)
        if (in_box(grid, idx, lambda)) ++count;
    return count;
}

SpectralField band_limit(const SpectralField& field, std::span<const Real> lambda) {
    const auto& grid = field.grid();
    check_resolvable(grid, lambda);
    const auto n = static_cast<std::size_t>(grid.value_dim);
    std::vector<Complex> c(field.coefficients().begin(), field.coefficients().end());
    for (std::size_t idx = 0; idx < grid.cells(); ++idx)
        if (!in_box(grid, idx, lambda))
            for (std::size_t j = 0; j < n; ++j) c[idx * n + j] = 0.0;
    return SpectralField::from_coefficients(grid, std::move(c), std::vector<Real>(lambda.begin(), lambda.end()));
}

SpectralField random_band_limited(const GridSpec& grid, std::span<const Real> lambda, std::uint64_t seed) {
    grid.validate();
    check_resolvable(grid, lambda);
    CounterRng rng(seed, 0xBA9D);
    const auto n = static_cast<std::size_t>(grid.value_dim);
    std::vector<Complex> c(grid.samples());
    for (std::size_t idx = 0; idx < grid.cells(); ++idx)
        if (in_box(grid, idx, lambda))
            for (std::size_t j = 0; j < n; ++j) c[idx * n + j] = rng.complex_normal();
    return SpectralField::from_coefficients(grid, std::move(c), std::vector<Real>(lambda.begin(), lambda.end()));
}

SpectralField white_noise(const GridSpec& grid, std::uint64_t seed) {
    grid.validate();
    CounterRng rng(seed, 0x3417E);
    std::vector<Complex> v(grid.samples());
    for (auto& z : v) z = rng.complex_normal();
    return SpectralField::from_values(grid, std::move(v));
}

SpectralField spectral_derivative(const SpectralField& field, const MultiIndex& alpha) {
    const auto& grid = field.grid();
    if (alpha.size() != static_cast<std::size_t>(grid.dim))
        throw ValidationError("derivative: multi-index dimension mismatch");
    const auto n = static_cast<std::size_t>(grid.value_dim);
    std::vector<Complex> c(field.coefficients().begin(), field.coefficients().end());
    std::vector<int> pos(static_cast<std::size_t>(grid.dim));
    for (std::size_t idx = 0; idx < grid.cells(); ++idx) {
        grid.decode(idx, pos);
        Complex factor = 1.0;
        for (int a = 0; a < grid.dim; ++a) {
            const Complex ixi(0.0, grid.axis_frequency(pos[static_cast<std::size_t>(a)]));
            for (int k = 0; k < alpha[static_cast<std::size_t>(a)]; ++k) factor *= ixi;
        }
        for (std::size_t j = 0; j < n; ++j) c[idx * n + j] *= factor;
    }
    return SpectralField::from_coefficients(grid, std::move(c), field.band());
}

}  // namespace spectracontrol

#include "spectracontrol/thick_sets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace spectracontrol {

ThickSet::ThickSet(GridSpec grid, std::vector<std::uint8_t> indicator, std::optional<ThicknessCertificate> certificate)
    : grid_(std::move(grid)), indicator_(std::move(indicator)), certificate_(std::move(certificate)) {
    grid_.validate();
    if (indicator_.size() != grid_.cells()) throw ValidationError("thick set: indicator size does not match grid");
    for (auto& b : indicator_) b = b != 0 ? 1 : 0;
    if (certificate_) {
        if (!(certificate_->rho > 0.0 && certificate_->rho <= 1.0))
            throw ValidationError("thick set: certified rho must lie in (0, 1]");
        if (certificate_->L.size() != static_cast<std::size_t>(grid_.dim))
            throw ValidationError("thick set: certificate L has wrong dimension");
        if (verify_thickness(*this, certificate_->L) < certificate_->rho * (1.0 - 1e-12))
            throw ValidationError("thick set: certificate claims more than the verified thickness");
    }
}

std::size_t ThickSet::count() const {
    return static_cast<std::size_t>(std::count(indicator_.begin(), indicator_.end(), std::uint8_t{1}));
}

Real ThickSet::density() const { return static_cast<Real>(count()) / static_cast<Real>(grid_.cells()); }

ThickSet ThickSet::certified(std::span<const Real> L) const {
    const Real rho = verify_thickness(*this, L);
    if (!(rho > 0.0)) throw ValidationError("thick set: not thick for the requested L (rho = 0)");
    return ThickSet(grid_, indicator_, ThicknessCertificate{rho, std::vector<Real>(L.begin(), L.end())});
}

int aligned_cells(const GridSpec& grid, Real length, const char* what) {
    const Real ratio = length / grid.cell_width();
    const Real rounded = std::round(ratio);
    if (!(length > 0.0) || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
        throw ValidationError(std::string(what) + " must be a positive multiple of the cell width Q/N");
    return static_cast<int>(rounded);
}

Real verify_thickness(const ThickSet& set, std::span<const Real> L) {
    const auto& grid = set.grid();
    if (L.size() != static_cast<std::size_t>(grid.dim)) throw ValidationError("verify_thickness: L has wrong dimension");
    std::vector<int> width(static_cast<std::size_t>(grid.dim));
    for (int a = 0; a < grid.dim; ++a) {
        width[static_cast<std::size_t>(a)] = aligned_cells(grid, L[static_cast<std::size_t>(a)], "L");
        if (width[static_cast<std::size_t>(a)] > grid.points) throw ValidationError("verify_thickness: L exceeds the period");
    }

    // Separable cyclic window sums: after processing all axes, counts[x] is the number
    // of on-cells in the box anchored at x.
    const std::size_t cells = grid.cells();
    const auto N = static_cast<std::size_t>(grid.points);
    std::vector<long> counts(cells);
    for (std::size_t c = 0; c < cells; ++c) counts[c] = set.indicator()[c];
    std::vector<long> line(N), summed(N);
    for (int axis = 0; axis < grid.dim; ++axis) {
        std::size_t stride = 1;
        for (int a = grid.dim - 1; a > axis; --a) stride *= N;
        const auto w = static_cast<std::size_t>(width[static_cast<std::size_t>(axis)]);
        for (std::size_t base = 0; base < cells; ++base) {
            // Visit each line once: base must have position 0 along `axis`.
            if ((base / stride) % N != 0) continue;
            for (std::size_t i = 0; i < N; ++i) line[i] = counts[base + i * stride];
            long running = 0;
            for (std::size_t i = 0; i < w; ++i) running += line[i % N];
            for (std::size_t i = 0; i < N; ++i) {
                summed[i] = running;
                running += line[(i + w) % N] - line[i];
            }
            for (std::size_t i = 0; i < N; ++i) counts[base + i * stride] = summed[i];
        }
    }
    const long worst = *std::min_element(counts.begin(), counts.end());
    Real box_cells = 1.0;
    for (int w : width) box_cells *= w;
    return static_cast<Real>(worst) / box_cells;
}

ThickSet make_stripes(const GridSpec& grid, Real on_width, Real period, int axis) {
    grid.validate();
    if (axis < 0 || axis >= grid.dim) throw ValidationError("stripes: axis out of range");
    if (!(on_width > 0.0)) throw ValidationError("stripes: on_width must be positive (rho must be > 0)");
    const int on = aligned_cells(grid, on_width, "stripes on_width");
    const int per = aligned_cells(grid, period, "stripes period");
    if (on > per) throw ValidationError("stripes: on_width exceeds period");
    if (per > grid.points) throw ValidationError("stripes: period exceeds the torus side Q");

    std::vector<std::uint8_t> indicator(grid.cells());
    std::vector<int> pos(static_cast<std::size_t>(grid.dim));
    for (std::size_t c = 0; c < indicator.size(); ++c) {
        grid.decode(c, pos);
        indicator[c] = (pos[static_cast<std::size_t>(axis)] % per) < on ? 1 : 0;
    }
    ThickSet raw(grid, std::move(indicator));
    return raw.certified(std::vector<Real>(static_cast<std::size_t>(grid.dim), period));
}

ThickSet make_random_thick(const GridSpec& grid, Real rho_target, std::span<const Real> L, std::uint64_t seed) {
    grid.validate();
    if (!(rho_target > 0.0 && rho_target <= 1.0)) throw ValidationError("random thick: rho_target must lie in (0, 1]");
    if (L.size() != static_cast<std::size_t>(grid.dim)) throw ValidationError("random thick: L has wrong dimension");
    std::vector<int> width(static_cast<std::size_t>(grid.dim));
    std::vector<int> blocks(static_cast<std::size_t>(grid.dim));
    for (int a = 0; a < grid.dim; ++a) {
        const int w = aligned_cells(grid, L[static_cast<std::size_t>(a)], "L");
        if (w > grid.points) throw ValidationError("random thick: L exceeds the period");
        width[static_cast<std::size_t>(a)] = w;
        blocks[static_cast<std::size_t>(a)] = (grid.points + w - 1) / w;
    }

    std::vector<std::uint8_t> indicator(grid.cells(), 0);
    CounterRng rng(seed, 0x7C1C);
    std::size_t block_count = 1;
    for (int b : blocks) block_count *= static_cast<std::size_t>(b);
    std::vector<int> bpos(static_cast<std::size_t>(grid.dim)), off(static_cast<std::size_t>(grid.dim)),
        cell(static_cast<std::size_t>(grid.dim));
    for (std::size_t b = 0; b < block_count; ++b) {
        std::size_t rest = b;
        for (int a = grid.dim - 1; a >= 0; --a) {
            bpos[static_cast<std::size_t>(a)] = static_cast<int>(rest % static_cast<std::size_t>(blocks[static_cast<std::size_t>(a)]));
            rest /= static_cast<std::size_t>(blocks[static_cast<std::size_t>(a)]);
        }
        // Cells of this block (the last block on an axis may be truncated by the period).
        std::vector<std::size_t> members;
        std::vector<int> extent(static_cast<std::size_t>(grid.dim));
        std::size_t volume = 1;
        for (int a = 0; a < grid.dim; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            extent[ua] = std::min(width[ua], grid.points - bpos[ua] * width[ua]);
            volume *= static_cast<std::size_t>(extent[ua]);
        }
        for (std::size_t m = 0; m < volume; ++m) {
            std::size_t r = m;
            for (int a = grid.dim - 1; a >= 0; --a) {
                const auto ua = static_cast<std::size_t>(a);
                off[ua] = static_cast<int>(r % static_cast<std::size_t>(extent[ua]));
                r /= static_cast<std::size_t>(extent[ua]);
                cell[ua] = bpos[ua] * width[ua] + off[ua];
            }
            members.push_back(grid.encode(cell));
        }
        const auto on = static_cast<std::size_t>(std::ceil(rho_target * static_cast<Real>(volume) - 1e-12));
        // Partial Fisher-Yates: the first `on` entries form a uniform subset.
        for (std::size_t i = 0; i < on && i < members.size(); ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(members.size() - i));
            std::swap(members[i], members[j]);
            indicator[members[i]] = 1;
        }
    }
    ThickSet raw(grid, std::move(indicator));
    const Real rho = verify_thickness(raw, L);
    if (!(rho > 0.0)) return raw;
    return ThickSet(grid, std::vector<std::uint8_t>(raw.indicator().begin(), raw.indicator().end()),
                    ThicknessCertificate{rho, std::vector<Real>(L.begin(), L.end())});
}

}  // namespace spectracontrol

#include "rmvp/materials.hpp"
#include "rmvp/error.hpp"
#include "rmvp/io.hpp"

#include <algorithm>
#include <cmath>

namespace rmvp {

MaterialModel MaterialModel::linear(double mu_r) {
    if (!(mu_r > 0.0) || !std::isfinite(mu_r)) throw ValidationError("relative permeability must be positive and finite");
    MaterialModel m;
    m.nu_linear_ = 1.0 / (kMu0 * mu_r);
    return m;
}

MaterialModel MaterialModel::bh_table(std::vector<BHPoint> table) {
    if (table.empty()) throw ValidationError("BH table is empty");
    if (table.front().b == 0.0 && table.front().h != 0.0) throw ValidationError("BH table must start at H = 0 for B = 0");
    for (std::size_t k = 0; k < table.size(); ++k) {
        const auto& p = table[k];
        if (!std::isfinite(p.b) || !std::isfinite(p.h) || p.b < 0.0 || p.h < 0.0)
            throw ValidationError("BH table values must be finite and non-negative");
        if (k > 0 && !(p.b > table[k - 1].b && p.h > table[k - 1].h))
            throw ValidationError("BH table must be strictly increasing in B and H (row " + std::to_string(k + 1) + ")");
    }

    MaterialModel m;
    std::vector<Knot> knots;
    for (const auto& p : table) {
        if (p.b == 0.0) continue;
        if (knots.empty()) knots.push_back({0.0, p.h / p.b, 0.0});
        knots.push_back({p.b * p.b, p.h / p.b, 0.0});
    }
    if (knots.size() < 2) throw ValidationError("BH table needs at least one point with B > 0");
    // tabulated values carry rounding; drops below 1e-9 relative are levelled
    for (std::size_t k = 1; k < knots.size(); ++k) {
        if (knots[k].y < knots[k - 1].y * (1.0 - 1e-9))
            throw ValidationError("BH table implies a decreasing reluctivity H/B at B = " +
                                  format_number(std::sqrt(knots[k].x)) + " T");
        knots[k].y = std::max(knots[k].y, knots[k - 1].y);
    }

    // monotone cubic Hermite slopes (Fritsch-Butland weighted harmonic mean)
    const std::size_t n = knots.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        h[k] = knots[k + 1].x - knots[k].x;
        delta[k] = (knots[k + 1].y - knots[k].y) / h[k];
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (delta[k - 1] * delta[k] <= 0.0) continue;
        const double w1 = 2.0 * h[k] + h[k - 1];
        const double w2 = h[k] + 2.0 * h[k - 1];
        knots[k].d = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
    if (n > 2) {
        double d0 = ((2.0 * h[0] + h[1]) * delta[0] - h[0] * delta[1]) / (h[0] + h[1]);
        if (d0 * delta[0] <= 0.0) d0 = 0.0;
        else if (delta[0] * delta[1] <= 0.0 && std::abs(d0) > 3.0 * std::abs(delta[0])) d0 = 3.0 * delta[0];
        knots[0].d = d0;
    } else {
        knots[0].d = delta[0];
    }
    knots[n - 1].d = 0.0;  // matches the constant extension

    m.table_ = std::move(table);
    m.knots_ = std::move(knots);
    m.nu_linear_ = m.knots_.front().y;
    return m;
}

double MaterialModel::mu_r0() const { return 1.0 / (kMu0 * nu(0.0)); }

std::size_t MaterialModel::interval(double x) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x, [](double v, const Knot& k) { return v < k.x; });
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - knots_.begin() - 1, 0,
                                                               static_cast<std::ptrdiff_t>(knots_.size()) - 2));
}

double MaterialModel::nu(double b_squared) const {
    if (is_linear()) return nu_linear_;
    const double x = std::max(b_squared, 0.0);
    if (x >= knots_.back().x) return knots_.back().y;
    const std::size_t k = interval(x);
    const Knot& a = knots_[k];
    const Knot& b = knots_[k + 1];
    const double h = b.x - a.x;
    const double t = (x - a.x) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * a.y + (t3 - 2 * t2 + t) * h * a.d + (-2 * t3 + 3 * t2) * b.y + (t3 - t2) * h * b.d;
}

double MaterialModel::dnu_db2(double b_squared) const {
    if (is_linear()) return 0.0;
    const double x = std::max(b_squared, 0.0);
    if (x >= knots_.back().x) return 0.0;
    const std::size_t k = interval(x);
    const Knot& a = knots_[k];
    const Knot& b = knots_[k + 1];
    const double h = b.x - a.x;
    const double t = (x - a.x) / h;
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * a.y + (-6 * t2 + 6 * t) * b.y) / h + (3 * t2 - 4 * t + 1) * a.d + (3 * t2 - 2 * t) * b.d;
}

MaterialModel load_bh_csv(const std::filesystem::path& path) {
    const auto rows = read_csv(path, {"B_T", "H_A_per_m"});
    std::vector<BHPoint> table;
    table.reserve(rows.size());
    for (const auto& r : rows) table.push_back({r[0], r[1]});
    try {
        return MaterialModel::bh_table(std::move(table));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace rmvp

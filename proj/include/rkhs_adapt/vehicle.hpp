#pragma once

// Quarter-car plant and road profiles. State ordering is (x1', x1, x2', x2):
// rows 2 and 4 of A are the integrator rows.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/core.h>

#include "rkhs_adapt/dynamics.hpp"
#include "rkhs_adapt/kernels.hpp"

namespace rkhs_adapt {

struct QuarterCarParams {
    double m1 = 0.5;
    double m2 = 0.5;
    double k1 = 50000.0;
    double k2 = 30000.0;
    double c2 = 200.0;

    void validate() const {
        const std::pair<const char*, double> fields[] = {{"m1", m1}, {"m2", m2}, {"k1", k1}, {"k2", k2}, {"c2", c2}};
        for (const auto& [name, v] : fields)
            if (!(v > 0.0) || !std::isfinite(v))
                throw Error(Errc::invalid_argument, fmt::format("quarter-car parameter {} must be positive", name));
    }
};

[[nodiscard]] inline LtiPlant build_plant(const QuarterCarParams& p) {
    p.validate();
    Matrix a(4, 4);
    // clang-format off
    a << -p.c2 / p.m1, -(p.k1 + p.k2) / p.m1,  p.c2 / p.m1,  p.k2 / p.m1,
          1.0,          0.0,                   0.0,          0.0,
         -p.c2 / p.m2,  p.k2 / p.m2,          -p.c2 / p.m2, -p.k2 / p.m2,
          0.0,          0.0,                   1.0,          0.0;
    // clang-format on
    Vector b = Vector::Zero(4);
    b(0) = p.k1 / p.m1;
    return {std::move(a), std::move(b)};
}

struct Knot {
    double s = 0.0;
    double z = 0.0;
};

/// Road elevation along the path: a sinusoid kappa sin(2 pi nu s) or measured knots
/// joined by periodic linear interpolation.
class RoadProfile {
public:
    enum class Kind { sine, sampled };

    [[nodiscard]] static RoadProfile sine(double amplitude, double frequency, Domain1D domain) {
        if (!std::isfinite(amplitude) || !std::isfinite(frequency))
            throw Error(Errc::invalid_argument, "sine road amplitude and frequency must be finite");
        domain.validate();
        RoadProfile r(Kind::sine, domain);
        r.amplitude_ = amplitude;
        r.frequency_ = frequency;
        return r;
    }

    /// Knots must be strictly increasing in s within [0, L) and finite.
    [[nodiscard]] static RoadProfile sampled(std::vector<Knot> knots, Domain1D domain) {
        domain.validate();
        if (knots.size() < 2) throw Error(Errc::too_few_points, "a sampled profile needs at least two knots");
        for (std::size_t i = 0; i < knots.size(); ++i) {
            if (!std::isfinite(knots[i].s) || !std::isfinite(knots[i].z))
                throw Error(Errc::non_finite, "non-finite knot");
            if (knots[i].s < 0.0 || knots[i].s >= domain.length)
                throw Error(Errc::invalid_argument, "knot outside [0, L)");
            if (i > 0 && !(knots[i].s > knots[i - 1].s))
                throw Error(Errc::invalid_argument, "knots must be strictly increasing");
        }
        RoadProfile r(Kind::sampled, domain);
        r.knots_ = std::move(knots);
        return r;
    }

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] const Domain1D& domain() const noexcept { return domain_; }
    [[nodiscard]] double amplitude() const noexcept { return amplitude_; }
    [[nodiscard]] double frequency() const noexcept { return frequency_; }
    [[nodiscard]] const std::vector<Knot>& knots() const noexcept { return knots_; }

    [[nodiscard]] double operator()(double s_in) const {
        const double s = domain_.reduce(s_in);
        if (kind_ == Kind::sine) return amplitude_ * std::sin(2.0 * std::numbers::pi * frequency_ * s);
        const auto& k = knots_;
        auto it = std::upper_bound(k.begin(), k.end(), s, [](double v, const Knot& a) { return v < a.s; });
        if (it == k.begin() || it == k.end()) {
            // Between the last knot and the first one (across the seam when periodic).
            const Knot& a = k.back();
            const Knot& b = k.front();
            if (!domain_.periodic) return it == k.begin() ? b.z : a.z;
            const double span = b.s + domain_.length - a.s;
            const double off = it == k.begin() ? s + domain_.length - a.s : s - a.s;
            return a.z + (b.z - a.z) * (off / span);
        }
        const Knot& b = *it;
        const Knot& a = *(it - 1);
        return a.z + (b.z - a.z) * ((s - a.s) / (b.s - a.s));
    }

private:
    RoadProfile(Kind kind, Domain1D domain) : kind_(kind), domain_(domain) {}

    Kind kind_;
    Domain1D domain_;
    double amplitude_ = 0.0;
    double frequency_ = 0.0;
    std::vector<Knot> knots_;
};

[[nodiscard]] inline double road_eval(const RoadProfile& r, double s) { return r(s); }

namespace detail {

inline std::string_view trim(std::string_view v) {
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.remove_suffix(1);
    return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view text, double& out) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, out);
    return res.ec == std::errc{} && res.ptr == end && !text.empty();
}

} // namespace detail

/// Reads a measured elevation profile from CSV text with a header row.
/// Coordinates are wrapped into [0, L), sorted, and duplicated coordinates keep the
/// last row (with a warning).
[[nodiscard]] inline RoadProfile parse_profile_csv(std::istream& in, const std::string& s_column,
                                                   const std::string& z_column, Domain1D domain) {
    domain.validate();
    std::string line;
    std::size_t row = 0;
    if (!std::getline(in, line)) throw Error(Errc::parse_error, "row 1: missing header");
    ++row;
    std::string_view header = line;
    if (header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);
    const auto names = detail::split_commas(header);
    const auto find = [&](const std::string& name) {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw Error(Errc::parse_error, fmt::format("row 1: header lacks column '{}'", name));
        return static_cast<std::size_t>(it - names.begin());
    };
    const std::size_t si = find(s_column);
    const std::size_t zi = find(z_column);

    struct Entry {
        double s;
        double z;
        std::size_t order;
    };
    std::vector<Entry> entries;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_commas(line);
        if (cells.size() <= std::max(si, zi))
            throw Error(Errc::parse_error, fmt::format("row {}: expected at least {} columns", row, std::max(si, zi) + 1));
        double s = 0.0, z = 0.0;
        if (!detail::parse_double(cells[si], s) || !std::isfinite(s))
            throw Error(Errc::parse_error, fmt::format("row {}: bad value '{}' in column '{}'", row, cells[si], s_column));
        if (!detail::parse_double(cells[zi], z) || !std::isfinite(z))
            throw Error(Errc::parse_error, fmt::format("row {}: bad value '{}' in column '{}'", row, cells[zi], z_column));
        entries.push_back({domain.periodic ? domain.reduce(s) : s, z, entries.size()});
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.s < b.s; });
    std::vector<Knot> knots;
    std::size_t dropped = 0;
    for (const auto& e : entries) {
        if (!knots.empty() && knots.back().s == e.s) {
            knots.back().z = e.z; // stable sort keeps file order, so this is the later row
            ++dropped;
        } else {
            knots.push_back({e.s, e.z});
        }
    }
    if (dropped > 0) warn(fmt::format("profile: {} duplicate coordinate(s) replaced by later rows", dropped));
    if (knots.size() < 2)
        throw Error(Errc::too_few_points, fmt::format("profile has {} distinct point(s); at least 2 are needed", knots.size()));
    if (!domain.periodic)
        for (const auto& k : knots)
            if (k.s < 0.0 || k.s >= domain.length)
                throw Error(Errc::invalid_argument, fmt::format("profile coordinate {} outside [0, {})", k.s, domain.length));
    return RoadProfile::sampled(std::move(knots), domain);
}

[[nodiscard]] inline RoadProfile ingest_profile_csv(const std::string& path, const std::string& s_column,
                                                    const std::string& z_column, double domain_length,
                                                    bool periodic = true) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, fmt::format("cannot open profile '{}'", path));
    return parse_profile_csv(in, s_column, z_column, Domain1D{domain_length, periodic});
}

} // namespace rkhs_adapt

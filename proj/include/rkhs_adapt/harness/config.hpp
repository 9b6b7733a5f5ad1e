#pragma once

// Experiment configuration: flat `key = value` text grouped in `[section]`s.
// `#` starts a comment. Lists are comma-separated. Every field has a default, and
// serialize() always writes the full set in canonical order.

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/core.h>
#include <fmt/format.h>

#include "rkhs_adapt/dynamics.hpp"
#include "rkhs_adapt/errors.hpp"
#include "rkhs_adapt/kernels.hpp"
#include "rkhs_adapt/vehicle.hpp"

namespace rkhs_adapt::harness {

enum class KernelKind { gaussian, bspline1, bspline2 };
enum class CentersPolicy { uniform, explicit_list };
enum class RoadKind { sine, sampled };
/// Sine road frequency: cycles per domain unit, per lap (domain length), or per
/// second of travel at integration.path_speed.
enum class FrequencyUnit { per_unit, per_lap, hertz };
enum class InitialCoefficients { zero, alpha_star, random };

struct ExperimentConfig {
    // [domain]
    double domain_length = 360.0;
    bool periodic = true;
    // [kernel]
    KernelKind kernel = KernelKind::gaussian;
    double sigma = 50.0;
    int bspline_levels = 6;
    double bspline_unit = 90.0;
    double bspline1_smoothness = 0.6;
    double bspline2_smoothness = 1.5;
    // [basis]
    int n = 50;
    CentersPolicy centers = CentersPolicy::uniform;
    std::vector<double> explicit_centers;
    // [vehicle]
    QuarterCarParams vehicle;
    // [road]
    RoadKind road = RoadKind::sine;
    double amplitude = 2.0;
    double frequency = 0.04;
    FrequencyUnit frequency_unit = FrequencyUnit::hertz;
    std::string profile_path;
    std::string s_column = "s";
    std::string z_column = "z";
    bool in_span = false;
    // [learning]
    LearningMode mode = LearningMode::euclidean;
    std::vector<double> gain{0.001};
    std::vector<double> q_diagonal{1.0, 1.0, 1.0, 1.0};
    double ridge = 0.0;
    InitialCoefficients initial = InitialCoefficients::zero;
    double initial_scale = 1.0;
    // [integration]
    double dt = 1e-4;
    double t_final = 100.0;
    double path_speed = 14.4;
    int sample_every = 100;
    // [output]
    std::string out_dir = "out";
    bool svg = false;
    std::uint64_t seed = 0;
    // [sweep]
    std::vector<int> n_list{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    double pe_threshold = 1e-9;

    /// Directory that relative paths inside the file (profile_path) resolve against.
    std::string base_dir;
};

namespace detail {

inline std::string_view trim(std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
}

[[noreturn]] inline void bad_field(const std::string& field, std::string_view value, std::string_view expected) {
    throw Error(Errc::invalid_argument, fmt::format("{}: invalid value '{}' ({})", field, value, expected));
}

inline double to_double(const std::string& field, std::string_view v) {
    double out = 0.0;
    std::string_view t = v;
    if (!t.empty() && t.front() == '+') t.remove_prefix(1);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(out))
        bad_field(field, v, "expected a finite number");
    return out;
}

inline long long to_integer(const std::string& field, std::string_view v) {
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_field(field, v, "expected an integer");
    return out;
}

inline bool to_bool(const std::string& field, std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad_field(field, v, "expected true or false");
}

inline std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    if (trim(v).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto pos = v.find(',', start);
        out.push_back(trim(v.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string fmt_double(double v) { return fmt::format("{}", v); }

template <class T>
std::string join(const std::vector<T>& v) {
    return fmt::format("{}", fmt::join(v, ", "));
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class E>
struct EnumName {
    E value;
    const char* name;
};

template <class E, std::size_t N>
Field enum_field(const char* section, const char* key, E ExperimentConfig::*member, const EnumName<E> (&names)[N]) {
    std::vector<EnumName<E>> table(names, names + N);
    return {section, key,
            [=](ExperimentConfig& c, std::string_view v) {
                for (const auto& e : table)
                    if (v == e.name) {
                        c.*member = e.value;
                        return;
                    }
                std::string expected = "expected one of";
                for (const auto& e : table) expected += std::string(" ") + e.name;
                bad_field(std::string(section) + "." + key, v, expected);
            },
            [=](const ExperimentConfig& c) {
                for (const auto& e : table)
                    if (c.*member == e.value) return std::string(e.name);
                return std::string("?");
            }};
}

inline Field num(const char* section, const char* key, double ExperimentConfig::*member) {
    return {section, key,
            [=](ExperimentConfig& c, std::string_view v) { c.*member = to_double(std::string(section) + "." + key, v); },
            [=](const ExperimentConfig& c) { return fmt_double(c.*member); }};
}

inline Field vehicle_num(const char* key, double QuarterCarParams::*member) {
    return {"vehicle", key,
            [=](ExperimentConfig& c, std::string_view v) { c.vehicle.*member = to_double(std::string("vehicle.") + key, v); },
            [=](const ExperimentConfig& c) { return fmt_double(c.vehicle.*member); }};
}

inline Field integer(const char* section, const char* key, int ExperimentConfig::*member) {
    return {section, key,
            [=](ExperimentConfig& c, std::string_view v) {
                const long long x = to_integer(std::string(section) + "." + key, v);
                if (x < -1000000000LL || x > 1000000000LL) bad_field(std::string(section) + "." + key, v, "out of range");
                c.*member = static_cast<int>(x);
            },
            [=](const ExperimentConfig& c) { return fmt::format("{}", c.*member); }};
}

inline Field boolean(const char* section, const char* key, bool ExperimentConfig::*member) {
    return {section, key,
            [=](ExperimentConfig& c, std::string_view v) { c.*member = to_bool(std::string(section) + "." + key, v); },
            [=](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

inline Field text(const char* section, const char* key, std::string ExperimentConfig::*member) {
    return {section, key, [=](ExperimentConfig& c, std::string_view v) { c.*member = std::string(v); },
            [=](const ExperimentConfig& c) { return c.*member; }};
}

inline Field num_list(const char* section, const char* key, std::vector<double> ExperimentConfig::*member) {
    return {section, key,
            [=](ExperimentConfig& c, std::string_view v) {
                std::vector<double> out;
                for (auto item : split_list(v)) out.push_back(to_double(std::string(section) + "." + key, item));
                c.*member = std::move(out);
            },
            [=](const ExperimentConfig& c) {
                std::vector<std::string> items;
                for (double x : c.*member) items.push_back(fmt_double(x));
                return join(items);
            }};
}

inline const std::vector<Field>& fields() {
    static const EnumName<KernelKind> kernels[] = {
        {KernelKind::gaussian, "gaussian"}, {KernelKind::bspline1, "bspline1"}, {KernelKind::bspline2, "bspline2"}};
    static const EnumName<CentersPolicy> policies[] = {{CentersPolicy::uniform, "uniform"},
                                                       {CentersPolicy::explicit_list, "explicit"}};
    static const EnumName<RoadKind> roads[] = {{RoadKind::sine, "sine"}, {RoadKind::sampled, "sampled"}};
    static const EnumName<FrequencyUnit> units[] = {{FrequencyUnit::per_unit, "per_unit"},
                                                    {FrequencyUnit::per_lap, "per_lap"},
                                                    {FrequencyUnit::hertz, "hertz"}};
    static const EnumName<LearningMode> modes[] = {{LearningMode::euclidean, "euclidean"},
                                                   {LearningMode::rkhs_metric, "rkhs_metric"}};
    static const EnumName<InitialCoefficients> inits[] = {{InitialCoefficients::zero, "zero"},
                                                          {InitialCoefficients::alpha_star, "alpha_star"},
                                                          {InitialCoefficients::random, "random"}};
    static const std::vector<Field> all = {
        num("domain", "length", &ExperimentConfig::domain_length),
        boolean("domain", "periodic", &ExperimentConfig::periodic),
        enum_field("kernel", "kind", &ExperimentConfig::kernel, kernels),
        num("kernel", "sigma", &ExperimentConfig::sigma),
        integer("kernel", "bspline_levels", &ExperimentConfig::bspline_levels),
        num("kernel", "bspline_unit", &ExperimentConfig::bspline_unit),
        num("kernel", "bspline1_smoothness", &ExperimentConfig::bspline1_smoothness),
        num("kernel", "bspline2_smoothness", &ExperimentConfig::bspline2_smoothness),
        integer("basis", "n", &ExperimentConfig::n),
        enum_field("basis", "centers", &ExperimentConfig::centers, policies),
        num_list("basis", "explicit_centers", &ExperimentConfig::explicit_centers),
        vehicle_num("m1", &QuarterCarParams::m1),
        vehicle_num("m2", &QuarterCarParams::m2),
        vehicle_num("k1", &QuarterCarParams::k1),
        vehicle_num("k2", &QuarterCarParams::k2),
        vehicle_num("c2", &QuarterCarParams::c2),
        enum_field("road", "kind", &ExperimentConfig::road, roads),
        num("road", "amplitude", &ExperimentConfig::amplitude),
        num("road", "frequency", &ExperimentConfig::frequency),
        enum_field("road", "frequency_unit", &ExperimentConfig::frequency_unit, units),
        text("road", "profile", &ExperimentConfig::profile_path),
        text("road", "s_column", &ExperimentConfig::s_column),
        text("road", "z_column", &ExperimentConfig::z_column),
        boolean("road", "in_span", &ExperimentConfig::in_span),
        enum_field("learning", "mode", &ExperimentConfig::mode, modes),
        num_list("learning", "gain", &ExperimentConfig::gain),
        num_list("learning", "q_diagonal", &ExperimentConfig::q_diagonal),
        num("learning", "ridge", &ExperimentConfig::ridge),
        enum_field("learning", "initial", &ExperimentConfig::initial, inits),
        num("learning", "initial_scale", &ExperimentConfig::initial_scale),
        num("integration", "dt", &ExperimentConfig::dt),
        num("integration", "t_final", &ExperimentConfig::t_final),
        num("integration", "path_speed", &ExperimentConfig::path_speed),
        integer("integration", "sample_every", &ExperimentConfig::sample_every),
        text("output", "dir", &ExperimentConfig::out_dir),
        boolean("output", "svg", &ExperimentConfig::svg),
        {"output", "seed",
         [](ExperimentConfig& c, std::string_view v) {
             const long long x = to_integer("output.seed", v);
             if (x < 0) bad_field("output.seed", v, "must be >= 0");
             c.seed = static_cast<std::uint64_t>(x);
         },
         [](const ExperimentConfig& c) { return fmt::format("{}", c.seed); }},
        {"sweep", "n_list",
         [](ExperimentConfig& c, std::string_view v) {
             std::vector<int> out;
             for (auto item : split_list(v)) out.push_back(static_cast<int>(to_integer("sweep.n_list", item)));
             c.n_list = std::move(out);
         },
         [](const ExperimentConfig& c) { return join(c.n_list); }},
        num("sweep", "pe_threshold", &ExperimentConfig::pe_threshold),
    };
    return all;
}

struct Entry {
    std::string section;
    std::string key;
    std::string value;
    std::size_t line;
};

// Tokenizes the text; no interpretation of values.
inline std::vector<Entry> tokenize(std::string_view text) {
    std::vector<Entry> out;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw Error(Errc::parse_error, fmt::format("line {}: malformed section header", line_no));
            section = std::string(trim(line.substr(1, line.size() - 2)));
        } else {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw Error(Errc::parse_error, fmt::format("line {}: expected key = value", line_no));
            if (section.empty())
                throw Error(Errc::parse_error, fmt::format("line {}: key outside of any [section]", line_no));
            out.push_back({section, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no});
        }
        if (end == text.size()) break;
    }
    return out;
}

} // namespace detail

/// Range and consistency checks; messages name the offending field.
inline void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& field, const std::string& why) {
        throw Error(Errc::invalid_argument, fmt::format("{}: {}", field, why));
    };
    auto positive = [&](const char* field, double v) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(field, "must be positive");
    };
    positive("domain.length", c.domain_length);
    positive("kernel.sigma", c.sigma);
    positive("kernel.bspline_unit", c.bspline_unit);
    if (c.bspline_levels < 0 || c.bspline_levels > 24) fail("kernel.bspline_levels", "must lie in [0, 24]");
    if (!(c.bspline1_smoothness > 0.5)) fail("kernel.bspline1_smoothness", "must exceed 0.5");
    if (!(c.bspline2_smoothness > 0.5)) fail("kernel.bspline2_smoothness", "must exceed 0.5");
    if (c.centers == CentersPolicy::uniform && c.n < 1) fail("basis.n", "must be >= 1");
    if (c.centers == CentersPolicy::explicit_list && c.explicit_centers.empty())
        fail("basis.explicit_centers", "must be non-empty when basis.centers = explicit");
    c.vehicle.validate();
    if (c.road == RoadKind::sampled && c.profile_path.empty()) fail("road.profile", "required when road.kind = sampled");
    if (c.road == RoadKind::sine && c.frequency_unit == FrequencyUnit::hertz && !(c.path_speed != 0.0))
        fail("road.frequency_unit", "hertz needs a non-zero integration.path_speed");
    if (c.gain.empty()) fail("learning.gain", "must be non-empty");
    for (double g : c.gain)
        if (!(g > 0.0)) fail("learning.gain", "entries must be positive");
    if (c.q_diagonal.size() != 4) fail("learning.q_diagonal", "needs 4 entries");
    for (double q : c.q_diagonal)
        if (!(q > 0.0)) fail("learning.q_diagonal", "entries must be positive");
    if (c.ridge < 0.0) fail("learning.ridge", "must be >= 0");
    if (c.initial == InitialCoefficients::alpha_star && !c.in_span)
        fail("learning.initial", "alpha_star requires road.in_span = true");
    positive("integration.dt", c.dt);
    positive("integration.t_final", c.t_final);
    if (c.sample_every < 1) fail("integration.sample_every", "must be >= 1");
    if (c.out_dir.empty()) fail("output.dir", "must be non-empty");
    if (c.n_list.empty()) fail("sweep.n_list", "must be non-empty");
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
        if (c.n_list[i] < 1) fail("sweep.n_list", "entries must be >= 1");
        if (i > 0 && c.n_list[i] <= c.n_list[i - 1]) fail("sweep.n_list", "must be strictly ascending");
    }
    if (!(c.pe_threshold >= 0.0)) fail("sweep.pe_threshold", "must be >= 0");
}

[[nodiscard]] inline ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig c;
    std::map<std::pair<std::string, std::string>, std::size_t> seen;
    for (const auto& e : detail::tokenize(text)) {
        const auto& fs = detail::fields();
        const auto it = std::find_if(fs.begin(), fs.end(), [&](const detail::Field& f) {
            return e.section == f.section && e.key == f.key;
        });
        if (it == fs.end())
            throw Error(Errc::invalid_argument, fmt::format("line {}: unknown field {}.{}", e.line, e.section, e.key));
        if (const auto [pos, fresh] = seen.emplace(std::pair{e.section, e.key}, e.line); !fresh)
            throw Error(Errc::invalid_argument,
                        fmt::format("line {}: {}.{} already set on line {}", e.line, e.section, e.key, pos->second));
        it->set(c, e.value);
    }
    return c;
}

/// Full canonical text: every field, in table order, grouped by section.
[[nodiscard]] inline std::string serialize(const ExperimentConfig& c) {
    std::string out;
    std::string section;
    for (const auto& f : detail::fields()) {
        if (section != f.section) {
            if (!section.empty()) out += '\n';
            section = f.section;
            out += fmt::format("[{}]\n", section);
        }
        const std::string v = f.get(c);
        out += v.empty() ? fmt::format("{} =\n", f.key) : fmt::format("{} = {}\n", f.key, v);
    }
    return out;
}

/// Textual canonical form: comments and blank lines dropped, `key = value` spacing,
/// one blank line between sections. Values are kept verbatim.
[[nodiscard]] inline std::string normalize(std::string_view text) {
    std::string out;
    std::string section;
    for (const auto& e : detail::tokenize(text)) {
        if (section != e.section) {
            if (!section.empty()) out += '\n';
            section = e.section;
            out += fmt::format("[{}]\n", section);
        }
        out += e.value.empty() ? fmt::format("{} =\n", e.key) : fmt::format("{} = {}\n", e.key, e.value);
    }
    return out;
}

} // namespace rkhs_adapt::harness

// dataset.hpp — Sampling engine parameters, labelling by p_h interval, CSV + JSON persistence

#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cohlab/counting_stats.hpp"
#include "cohlab/engine_model.hpp"
#include "cohlab/errors.hpp"
#include "cohlab/random.hpp"
#include "cohlab/version.hpp"

namespace cohlab {

inline constexpr int kNumFeatures = 4;
inline constexpr int kNumClasses = 4;

using Features = std::array<double, kNumFeatures>;

/// Class of p_h: [0,.25) -> 0, [.25,.5) -> 1, [.5,.75) -> 2, [.75,1] -> 3.
inline int label_of(double p_h) {
    if (!(p_h >= 0.0 && p_h <= 1.0)) throw DomainError("label_of: p_h must lie in [0,1]");
    if (p_h < 0.25) return 0;
    if (p_h < 0.50) return 1;
    if (p_h < 0.75) return 2;
    return 3;
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool operator==(const Interval&) const = default;
};

struct ParamRanges {
    Interval t_c{0.4, 2.5};
    Interval t_h{3.0, 4.5};
    Interval t_l{1.0, 7.0};
    Interval p_c{0.0, 1.0};
    Interval p_h{0.0, 1.0};

    void validate() const {
        auto check = [](const Interval& iv, const char* name, double floor, double ceil) {
            if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo <= iv.hi))
                throw DomainError(std::string("ParamRanges: bad interval for ") + name);
            if (iv.lo < floor || iv.hi > ceil)
                throw DomainError(std::string("ParamRanges: interval out of bounds for ") + name);
        };
        const double inf = std::numeric_limits<double>::infinity();
        check(t_c, "t_c", 0.0, inf);
        check(t_h, "t_h", 0.0, inf);
        check(t_l, "t_l", 0.0, inf);
        check(p_c, "p_c", 0.0, 1.0);
        check(p_h, "p_h", 0.0, 1.0);
        if (t_c.lo <= 0.0 || t_h.lo <= 0.0 || t_l.lo <= 0.0)
            throw DomainError("ParamRanges: temperatures must be positive");
    }

    bool operator==(const ParamRanges&) const = default;
};

inline void to_json(nlohmann::json& j, const Interval& iv) { j = nlohmann::json::array({iv.lo, iv.hi}); }
inline void from_json(const nlohmann::json& j, Interval& iv) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw DomainError("interval must be a two-element numeric array");
    iv.lo = j[0].get<double>();
    iv.hi = j[1].get<double>();
}

inline void to_json(nlohmann::json& j, const ParamRanges& r) {
    j = nlohmann::json{{"t_c", r.t_c}, {"t_h", r.t_h}, {"t_l", r.t_l}, {"p_c", r.p_c}, {"p_h", r.p_h}};
}
inline void from_json(const nlohmann::json& j, ParamRanges& r) {
    if (!j.is_object()) throw DomainError("ranges must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "t_c") r.t_c = value.get<Interval>();
        else if (key == "t_h") r.t_h = value.get<Interval>();
        else if (key == "t_l") r.t_l = value.get<Interval>();
        else if (key == "p_c") r.p_c = value.get<Interval>();
        else if (key == "p_h") r.p_h = value.get<Interval>();
        else throw DomainError("ranges: unknown key '" + key + "'");
    }
}

struct LabeledSample {
    Features features{};
    int label = 0;
    EngineParams params;

    bool operator==(const LabeledSample&) const = default;
};

enum class Split : std::uint8_t { train, validation };

struct DatasetMeta {
    std::uint64_t seed = 0;
    ParamRanges ranges;
    EngineParams fixed; // t_c, t_h, t_l, p_c, p_h are overwritten per sample
    GeneratorForm form = GeneratorForm::consistent;
    double train_fraction = 0.70;
    std::uint64_t degenerate_redraws = 0;
    std::string generated_at;
    std::string code_version = kVersion;

    bool operator==(const DatasetMeta&) const = default;
};

inline void to_json(nlohmann::json& j, const DatasetMeta& m) {
    j = nlohmann::json{{"seed", m.seed},
                       {"ranges", m.ranges},
                       {"fixed", m.fixed},
                       {"generator_form", to_string(m.form)},
                       {"train_fraction", m.train_fraction},
                       {"degenerate_redraws", m.degenerate_redraws},
                       {"generated_at", m.generated_at},
                       {"code_version", m.code_version}};
}

inline void from_json(const nlohmann::json& j, DatasetMeta& m) {
    if (!j.is_object()) throw DomainError("dataset meta must be a JSON object");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.ranges = j.at("ranges").get<ParamRanges>();
    m.fixed = j.at("fixed").get<EngineParams>();
    m.form = generator_form_from_string(j.at("generator_form").get<std::string>());
    m.train_fraction = j.at("train_fraction").get<double>();
    m.degenerate_redraws = j.at("degenerate_redraws").get<std::uint64_t>();
    m.generated_at = j.at("generated_at").get<std::string>();
    m.code_version = j.at("code_version").get<std::string>();
}

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<Split> split; // parallel to samples
    DatasetMeta meta;

    std::size_t size() const noexcept { return samples.size(); }

    std::vector<std::size_t> indices(Split which) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == which) out.push_back(i);
        return out;
    }

    bool operator==(const Dataset&) const = default;
};

struct GenerateOptions {
    EngineParams fixed;
    double train_fraction = 0.70;
    GeneratorForm form = GeneratorForm::consistent;
    // Overrides the p_h draw of sample i when present (size must equal n).
    std::optional<std::vector<double>> forced_p_h;
    // Abort when rejected draws exceed this share of all draws.
    double max_degenerate_rate = 0.10;
};

namespace detail {

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline constexpr std::uint64_t kMaxAttemptsPerSample = 1u << 16;

} // namespace detail

/// Seeded 70:30 (by default) partition of n items; Rng(seed, stream::split, 0).
inline std::vector<Split> make_split(std::size_t n, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
        throw DomainError("make_split: train_fraction must lie in [0,1]");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed, stream::split, 0);
    shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
    std::vector<Split> out(n, Split::validation);
    for (std::size_t i = 0; i < n_train; ++i) out[order[i]] = Split::train;
    return out;
}

/// Draws n engines i.i.d. uniformly over `ranges`, computes cumulant ratios,
/// re-draws degenerate baselines, labels by p_h and splits.
inline Dataset generate(std::size_t n, const ParamRanges& ranges, std::uint64_t seed,
                        const GenerateOptions& opts = {}) {
    if (n < 1) throw DomainError("generate: n must be >= 1");
    ranges.validate();
    if (opts.forced_p_h && opts.forced_p_h->size() != n)
        throw DomainError("generate: forced_p_h must have exactly n entries");

    Dataset ds;
    ds.samples.reserve(n);
    std::uint64_t redraws = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            if (attempt >= detail::kMaxAttemptsPerSample)
                throw GenerationQualityError("generate: sample " + std::to_string(i) +
                                             " never produced a non-degenerate baseline");
            Rng rng(seed, stream::sample, (static_cast<std::uint64_t>(i) << 16) | attempt);
            EngineParams p = opts.fixed;
            p.t_c = rng.uniform(ranges.t_c.lo, ranges.t_c.hi);
            p.t_h = rng.uniform(ranges.t_h.lo, ranges.t_h.hi);
            p.t_l = rng.uniform(ranges.t_l.lo, ranges.t_l.hi);
            p.p_c = rng.uniform(ranges.p_c.lo, ranges.p_c.hi);
            p.p_h = rng.uniform(ranges.p_h.lo, ranges.p_h.hi);
            if (opts.forced_p_h) p.p_h = (*opts.forced_p_h)[i];
            try {
                const CumulantSet cs = cumulant_ratios(p, opts.form);
                ds.samples.push_back({cs.c, label_of(p.p_h), p});
                break;
            } catch (const DegenerateSampleError&) {
                ++redraws;
            }
        }
    }
    const double rate = static_cast<double>(redraws) / static_cast<double>(redraws + n);
    if (rate > opts.max_degenerate_rate)
        throw GenerationQualityError("generate: degenerate-sample rate " + std::to_string(rate) +
                                     " exceeds limit");
    if (redraws > 0)
        std::clog << "generate: re-drew " << redraws << " degenerate sample(s)\n";

    ds.split = make_split(n, opts.train_fraction, seed);
    ds.meta.seed = seed;
    ds.meta.ranges = ranges;
    ds.meta.fixed = opts.fixed;
    ds.meta.form = opts.form;
    ds.meta.train_fraction = opts.train_fraction;
    ds.meta.degenerate_redraws = redraws;
    ds.meta.generated_at = detail::utc_timestamp();
    return ds;
}

inline const char* kCsvHeader = "c1,c2,c3,c4,label,t_c,t_h,t_l,p_c,p_h,split";

/// `data.csv` -> `data.meta.json`.
inline std::filesystem::path meta_path_for(const std::filesystem::path& csv) {
    std::filesystem::path p = csv;
    p.replace_extension(".meta.json");
    return p;
}

inline void write_csv_stream(const Dataset& ds, std::ostream& os) {
    if (ds.split.size() != ds.samples.size())
        throw DomainError("write_csv: split and samples differ in length");
    os << kCsvHeader << '\n';
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        for (double c : s.features) {
            num(c);
            os << ',';
        }
        os << s.label << ',';
        for (double v : {s.params.t_c, s.params.t_h, s.params.t_l, s.params.p_c, s.params.p_h}) {
            num(v);
            os << ',';
        }
        os << (ds.split[i] == Split::train ? "train" : "validation") << '\n';
    }
}

/// Writes `path` and its `.meta.json` sidecar.
inline void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DomainError("write_csv: cannot open " + path.string());
    write_csv_stream(ds, os);
    if (!os) throw DomainError("write_csv: write failed for " + path.string());
    std::ofstream ms(meta_path_for(path), std::ios::binary);
    if (!ms) throw DomainError("write_csv: cannot open sidecar for " + path.string());
    ms << nlohmann::json(ds.meta).dump(2) << '\n';
}

namespace detail {

inline double parse_double(const std::string& field, std::size_t line) {
    if (field.empty()) throw ParseError("empty numeric field", line);
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size()) throw ParseError("bad number '" + field + "'", line);
    return v;
}

} // namespace detail

/// Parses rows into `ds` using `meta` for the fixed parameters.
inline Dataset read_csv_stream(std::istream& is, const DatasetMeta& meta) {
    Dataset ds;
    ds.meta = meta;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(is, line)) throw ParseError("missing header", 1);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ParseError("unexpected header '" + line + "'", lineno);

    std::vector<std::string> fields;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        fields.clear();
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (fields.size() != 11)
            throw ParseError("expected 11 fields, got " + std::to_string(fields.size()), lineno);

        LabeledSample s;
        for (int k = 0; k < kNumFeatures; ++k) s.features[k] = detail::parse_double(fields[k], lineno);
        const double label = detail::parse_double(fields[4], lineno);
        if (label != std::floor(label) || label < 0 || label >= kNumClasses)
            throw ParseError("label must be an integer in 0..3", lineno);
        s.label = static_cast<int>(label);
        s.params = meta.fixed;
        s.params.t_c = detail::parse_double(fields[5], lineno);
        s.params.t_h = detail::parse_double(fields[6], lineno);
        s.params.t_l = detail::parse_double(fields[7], lineno);
        s.params.p_c = detail::parse_double(fields[8], lineno);
        s.params.p_h = detail::parse_double(fields[9], lineno);
        try {
            if (label_of(s.params.p_h) != s.label)
                throw ParseError("label disagrees with p_h", lineno);
        } catch (const ParseError&) {
            throw;
        } catch (const DomainError& e) {
            throw ParseError(e.what(), lineno);
        }
        Split sp;
        if (fields[10] == "train") sp = Split::train;
        else if (fields[10] == "validation") sp = Split::validation;
        else throw ParseError("split must be 'train' or 'validation'", lineno);
        ds.samples.push_back(s);
        ds.split.push_back(sp);
    }
    return ds;
}

/// Reads `path`; the sidecar, when present, supplies meta and fixed parameters.
inline Dataset read_csv(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DomainError("read_csv: cannot open " + path.string());
    DatasetMeta meta;
    const auto mp = meta_path_for(path);
    if (std::filesystem::exists(mp)) {
        std::ifstream ms(mp, std::ios::binary);
        try {
            meta = nlohmann::json::parse(ms).get<DatasetMeta>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad sidecar: ") + e.what(), 0);
        }
    }
    return read_csv_stream(is, meta);
}

} // namespace cohlab

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "perclab/brw.hpp"
#include "perclab/estimators.hpp"
#include "perclab/registry.hpp"
#include "perclab/scaling.hpp"

namespace perclab {

inline constexpr const char* kToolVersion = "perclab/1.0.0";
inline constexpr std::size_t kHighDimension = 11;  // smallest d the percolation targets are stated for

/// Declarative description of one sweep. Parsed from a JSON file; CLI flags override fields.
struct ExperimentSpec {
    std::string name;
    std::size_t d = 2;
    std::string adjacency = "nn";
    std::optional<double> p;              // resolved numeric p; absent only for BRW quantities
    std::string p_source = "explicit";
    std::uint64_t seed = 0;
    std::string quantity;
    nlohmann::json options = nlohmann::json::object();
    nlohmann::json scales = nlohmann::json::array();  // numbers, or {"x":[..],"y":[..]} for tau
    std::uint64_t samples = 0;
    std::optional<ExplorationCaps> caps;
    unsigned workers = 1;
    std::uint64_t chunk = 4096;
    bool fit = false;
    std::string target;  // paper_targets tag; empty = derived from quantity
    double tolerance = 0.5;
    std::string output = "out";

    bool is_brw() const { return quantity == "brw_survival" || quantity == "brw_green"; }
    Lattice lattice() const { return Lattice(d, Adjacency::parse(adjacency)); }
    std::filesystem::path dir() const { return std::filesystem::path(output) / name; }
};

namespace experiment_detail {

inline const std::vector<std::string>& known_quantities() {
    static const std::vector<std::string> q{"pi",     "pi_H",      "tau",  "corner",       "tail",      "moment",
                                            "XQ",     "census",    "transport", "sbad", "brw_survival", "brw_green"};
    return q;
}

inline std::string opt_str(const nlohmann::json& o, const char* key, const std::string& def) {
    return o.contains(key) ? o.at(key).get<std::string>() : def;
}
template <class T>
T opt_num(const nlohmann::json& o, const char* key, T def) {
    return o.contains(key) ? o.at(key).get<T>() : def;
}

inline Point point_from_json(const nlohmann::json& j, std::size_t d) {
    const auto v = j.get<std::vector<std::int64_t>>();
    require(v.size() == d, "point " + j.dump() + " is not " + std::to_string(d) + "-dimensional");
    return Point::from(std::span<const std::int64_t>(v));
}

/// Replaces "{n}" and "{K*n}" in region/boundary text by the integer scale.
inline std::string substitute_scale(const std::string& text, std::int64_t n) {
    static const std::regex token(R"(\{(?:(\d+)\*)?n\})");
    std::string out;
    auto it = std::sregex_iterator(text.begin(), text.end(), token);
    std::size_t last = 0;
    for (; it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        out += text.substr(last, static_cast<std::size_t>(m.position()) - last);
        const std::int64_t k = m[1].matched ? std::stoll(m[1].str()) : 1;
        out += std::to_string(k * n);
        last = static_cast<std::size_t>(m.position() + m.length());
    }
    return out + text.substr(last);
}

inline std::int64_t int_scale(const nlohmann::json& s) {
    require(s.is_number(), "scale entry " + s.dump() + " must be a number");
    const double v = s.get<double>();
    require(v >= 0 && std::floor(v) == v, "scale " + s.dump() + " must be a nonnegative integer");
    return static_cast<std::int64_t>(v);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

} // namespace experiment_detail

inline ExperimentSpec spec_from_json(const nlohmann::json& j, const std::string& registry_path = default_registry_path()) {
    namespace ed = experiment_detail;
    ExperimentSpec s;
    try {
        require(j.is_object(), "experiment spec must be a JSON object");
        s.name = j.at("name").get<std::string>();
        require(!s.name.empty() && s.name.find_first_of("/\\") == std::string::npos && s.name != "." && s.name != "..",
                "experiment name must be a plain nonempty file name");
        s.d = j.at("d").get<std::size_t>();
        s.adjacency = j.value("adjacency", std::string("nn"));
        s.seed = j.value("seed", std::uint64_t{0});
        s.quantity = j.at("quantity").get<std::string>();
        if (j.contains("options")) s.options = j.at("options");
        require(s.options.is_object(), "options must be an object");
        s.scales = j.at("scales");
        s.samples = j.at("samples").get<std::uint64_t>();
        if (j.contains("caps")) {
            const auto& c = j.at("caps");
            ExplorationCaps caps;
            if (c.contains("max_vertices")) caps.max_vertices = c.at("max_vertices").get<std::uint64_t>();
            if (c.contains("max_radius")) caps.max_radius = c.at("max_radius").get<std::int64_t>();
            caps.validate();
            s.caps = caps;
        }
        s.workers = j.value("workers", 1u);
        s.chunk = j.value("chunk", std::uint64_t{4096});
        s.fit = j.value("fit", false);
        s.target = j.value("target", std::string());
        s.tolerance = j.value("tolerance", 0.5);
        s.output = j.value("output", std::string("out"));
        if (j.contains("p")) {
            const auto& p = j.at("p");
            if (p.is_string()) {
                require(p.get<std::string>() == "from-registry", "p must be a number or \"from-registry\"");
                const auto e = registry_lookup(s.d, Adjacency::parse(s.adjacency), registry_path);
                s.p = e.p_c;
                s.p_source = "registry: " + e.source;
            } else {
                s.p = p.get<double>();
                s.p_source = j.value("p_source", std::string("explicit"));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed experiment spec: ") + e.what());
    }
    require(s.d >= 1 && s.d <= kMaxDim, "dimension out of range");
    (void)s.lattice();
    require(std::find(ed::known_quantities().begin(), ed::known_quantities().end(), s.quantity) != ed::known_quantities().end(),
            "unknown quantity '" + s.quantity + "'");
    require(s.is_brw() || s.p.has_value(), "percolation quantities need p (number or \"from-registry\")");
    if (s.p) require(*s.p >= 0 && *s.p <= 1, "p must lie in [0,1]");
    require(s.scales.is_array() && !s.scales.empty(), "scale grid must be a nonempty array");
    require(s.samples >= 1, "samples must be at least 1");
    require(s.workers >= 1, "workers must be at least 1");
    require(s.chunk >= 1, "chunk must be at least 1");
    require(s.tolerance > 0, "tolerance must be positive");
    return s;
}

inline nlohmann::json to_json(const ExperimentSpec& s) {
    nlohmann::json j{{"name", s.name},       {"d", s.d},           {"adjacency", s.adjacency}, {"seed", s.seed},
                     {"quantity", s.quantity}, {"options", s.options}, {"scales", s.scales},     {"samples", s.samples},
                     {"workers", s.workers}, {"chunk", s.chunk},   {"fit", s.fit},             {"target", s.target},
                     {"tolerance", s.tolerance}, {"output", s.output}};
    if (s.p) {
        j["p"] = *s.p;
        j["p_source"] = s.p_source;
    }
    if (s.caps) {
        nlohmann::json c = nlohmann::json::object();
        if (s.caps->max_vertices) c["max_vertices"] = *s.caps->max_vertices;
        if (s.caps->max_radius) c["max_radius"] = *s.caps->max_radius;
        j["caps"] = c;
    }
    return j;
}

inline ExperimentSpec load_spec(const std::filesystem::path& path, const std::string& registry_path = default_registry_path()) {
    std::ifstream in(path);
    if (!in) throw ResourceError("cannot open spec " + path.string());
    try {
        return spec_from_json(nlohmann::json::parse(in), registry_path);
    } catch (const nlohmann::json::parse_error& e) {
        throw SpecError("spec " + path.string() + " is not valid JSON: " + e.what());
    }
}

/// The environment fingerprint every record of the experiment must carry.
inline Fingerprint expected_fingerprint(const ExperimentSpec& s) {
    return {s.d, s.lattice().adjacency().to_string(), s.is_brw() ? 0.0 : *s.p, s.seed, kMixerId};
}

/// Default comparison tag in paper_targets for a spec, or "" when none applies.
inline std::string target_tag(const ExperimentSpec& s) {
    if (!s.target.empty()) return s.target;
    const auto& o = s.options;
    if (s.quantity == "pi" || s.quantity == "pi_H" || s.quantity == "corner" || s.quantity == "brw_survival") {
        if (s.quantity == "brw_survival" && experiment_detail::opt_str(o, "mode", "generations") != "generations") return "";
        return s.quantity;
    }
    if (s.quantity == "tail") return experiment_detail::opt_str(o, "region", "Zplus(n=0)") == "Z" ? "" : "tail_H";
    if (s.quantity == "tau") {
        const auto pair = experiment_detail::opt_str(o, "pair", "bulk");
        const auto region = experiment_detail::opt_str(o, "region", "Z");
        if (pair == "both") return "tau_H_both";
        if (pair == "one") return "tau_H_one";
        return region.rfind("B(", 0) == 0 ? "tau_box" : "tau";
    }
    return "";
}

/// One scale's sampling plan: what to observe per replicate and where the scale sits on the fit axis.
struct ScaleJob {
    double scale = 0;
    QuantityPlan plan;
    LatticeConfig cfg;
    std::optional<Fingerprint> fingerprint;  // BRW carries no bond field
};

inline ScaleJob make_scale_job(const ExperimentSpec& s, std::size_t k) {
    namespace ed = experiment_detail;
    const auto& o = s.options;
    const auto& entry = s.scales.at(k);
    const Lattice lat = s.lattice();
    ScaleJob job;
    job.cfg = LatticeConfig(lat, s.p.value_or(0.0), s.seed);
    const auto caps = s.caps;

    if (s.is_brw()) {
        const std::int64_t n = ed::int_scale(entry);
        BRWConfig b;
        b.law = OffspringLaw::parse(ed::opt_str(o, "law", "poisson(1)"));
        b.lattice = lat;
        const auto kill = ed::opt_str(o, "killing", "none");
        require(kill == "none" || kill == "half_space", "killing must be none or half_space");
        b.killing = kill == "none" ? Killing::none : Killing::half_space;
        b.seed = s.seed;
        b.population_cap = ed::opt_num<std::uint64_t>(o, "population_cap", kDefaultPopulationCap);
        const auto max_gen = ed::opt_num<std::uint64_t>(o, "max_generations", 100000);
        if (s.quantity == "brw_survival") {
            const auto mode = ed::opt_str(o, "mode", "generations");
            require(mode == "generations" || mode == "distance", "mode must be generations or distance");
            job.plan = plan_brw_survival(b, static_cast<std::uint64_t>(n),
                                         mode == "generations" ? SurvivalMode::generations : SurvivalMode::distance, max_gen);
        } else {
            const auto axis = ed::opt_num<std::size_t>(o, "axis", s.d >= 2 ? 1 : 0);
            require(axis < s.d, "axis out of range");
            Point t = ed::point_from_json(o.value("base", nlohmann::json(std::vector<std::int64_t>(s.d, 0))), s.d) +
                      Point::unit(s.d, axis, n);
            job.plan = plan_brw_green(b, {t}, max_gen);
            job.plan.params["target"] = t.to_string();
        }
        job.scale = static_cast<double>(n);
        job.cfg = LatticeConfig(lat, 0.0, s.seed);
        job.fingerprint = b.fingerprint();
        return job;
    }

    if (s.quantity == "tau") {
        Point x(s.d), y(s.d);
        std::int64_t n = 0;
        if (entry.is_object()) {
            x = ed::point_from_json(entry.at("x"), s.d);
            y = ed::point_from_json(entry.at("y"), s.d);
            n = static_cast<std::int64_t>((x - y).norm());
        } else {
            // y sits at distance n along the second axis (the only axis in d = 1); the pair
            // kind sets the depth of x and y below the half-space boundary.
            n = ed::int_scale(entry);
            const auto pair = ed::opt_str(o, "pair", "bulk");
            require(pair == "bulk" || pair == "one" || pair == "both", "pair must be bulk, one or both");
            const double eps = ed::opt_num<double>(o, "epsilon", 0.25);
            require(eps > 0, "epsilon must be positive");
            const auto depth = static_cast<std::int64_t>(std::floor(eps * static_cast<double>(n)));
            const std::size_t axis = s.d >= 2 ? 1 : 0;
            y = Point::unit(s.d, axis, n);
            if (pair == "bulk") {
                if (s.d >= 2) {
                    x = Point::unit(s.d, 0, depth);
                    y = y + Point::unit(s.d, 0, depth);
                }
            } else if (pair == "one") {
                require(s.d >= 2, "one-boundary pairs need d >= 2");
                y = y + Point::unit(s.d, 0, depth);
            } else {
                require(s.d >= 2, "boundary pairs need d >= 2");
            }
        }
        const Region region = Region::parse(ed::substitute_scale(ed::opt_str(o, "region", "Z"), n));
        job.plan = plan_two_point(x, y, region, caps);
        job.scale = static_cast<double>(n);
        return job;
    }

    const std::int64_t n = ed::int_scale(entry);
    job.scale = static_cast<double>(n);
    if (s.quantity == "pi") {
        job.plan = plan_one_arm(n);
    } else if (s.quantity == "pi_H") {
        job.plan = plan_half_space_arm(n, parse_half_arm_variant(ed::opt_str(o, "variant", "undirected")),
                                       ed::opt_num<double>(o, "c", 0.0));
    } else if (s.quantity == "corner") {
        job.plan = plan_corner_arm(n);
    } else if (s.quantity == "tail") {
        job.plan = plan_cluster_tail(static_cast<std::uint64_t>(n), Region::parse(ed::opt_str(o, "region", "Zplus(n=0)")));
    } else if (s.quantity == "moment") {
        job.plan = plan_restricted_moment(n, ed::opt_num<int>(o, "order", 1),
                                          Region::parse(ed::substitute_scale(ed::opt_str(o, "region", "Z"), n)), caps);
    } else if (s.quantity == "XQ") {
        const Point z = ed::point_from_json(o.value("z", nlohmann::json(std::vector<std::int64_t>(s.d, 0))), s.d);
        job.plan = plan_xq(Region::parse(ed::substitute_scale(ed::opt_str(o, "D", "B(n={n})"), n)),
                           Boundary::parse(ed::substitute_scale(ed::opt_str(o, "Q", "dB(n={n})"), n)), z, caps);
    } else if (s.quantity == "census") {
        job.plan = plan_regular_census(n, ed::opt_num<double>(o, "eta", 0.1), ed::opt_num<std::uint64_t>(o, "threshold", 1),
                                       ed::opt_num<std::int64_t>(o, "buffer", 0),
                                       ed::opt_num<std::uint64_t>(o, "budget", kDefaultCensusBudget));
    } else if (s.quantity == "transport") {
        job.plan = plan_transport(n);
    } else if (s.quantity == "sbad") {
        require(o.contains("z"), "sbad needs options.z");
        job.plan = plan_sbad(Region::parse(ed::substitute_scale(ed::opt_str(o, "D", "B(n={n})"), n)),
                             ed::point_from_json(o.at("z"), s.d), ed::opt_num<std::int64_t>(o, "s", 2),
                             ed::opt_num<std::uint64_t>(o, "inner_N", 100), caps);
    } else {
        throw SpecError("unknown quantity '" + s.quantity + "'");
    }
    return job;
}

// ---------------------------------------------------------------------------------------
// Manifest and on-disk layout:
//   <output>/<name>/spec.json         spec echo + tool version + mixer
//   <output>/<name>/checkpoint.jsonl  one checksummed Accumulator per completed replicate range
//   <output>/<name>/manifest.jsonl    EstimateRecords, appended as scales complete
//   <output>/<name>/metrics.json      written last; its presence marks completion
//   <output>/<name>/fits.json, report.csv, plotdata/<quantity>.dat

struct ResultManifest {
    ExperimentSpec spec;
    std::vector<EstimateRecord> records;
    nlohmann::json fits;     // null when no fit was requested
    nlohmann::json metrics;  // wall-clock, sample rate, tool version, mixer
};

/// Thrown by the test hook that simulates a kill after some checkpoints were written.
class Interrupted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunHooks {
    std::optional<std::uint64_t> interrupt_after_units;  // persisted ranges before simulated kill
};

namespace experiment_detail {

struct Unit {
    std::size_t scale = 0;
    std::uint64_t chunk = 0;
    std::uint64_t lo = 0, hi = 0;  // global replicate range
};

inline std::vector<Unit> units_of(const ExperimentSpec& s) {
    std::vector<Unit> out;
    const std::uint64_t nchunks = (s.samples + s.chunk - 1) / s.chunk;
    for (std::size_t k = 0; k < s.scales.size(); ++k)
        for (std::uint64_t c = 0; c < nchunks; ++c) {
            const std::uint64_t base = k * s.samples;
            out.push_back({k, c, base + c * s.chunk, base + std::min(s.samples, (c + 1) * s.chunk)});
        }
    return out;
}

inline nlohmann::json checkpoint_body(const Unit& u, const Accumulator& acc) {
    return {{"scale", u.scale}, {"chunk", u.chunk}, {"lo", u.lo}, {"hi", u.hi}, {"acc", to_json(acc)}};
}

inline std::string checkpoint_line(const Unit& u, const Accumulator& acc) {
    auto j = checkpoint_body(u, acc);
    j["checksum"] = hex64(fnv1a(j.dump()));
    return j.dump();
}

/// Reads a JSONL file, dropping an unterminated final line (a torn write) and truncating
/// the file so later appends start on a fresh line.
inline std::vector<std::string> read_lines_repair(const std::filesystem::path& path) {
    std::vector<std::string> lines;
    if (!std::filesystem::exists(path)) return lines;
    std::string all;
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ResourceError("cannot read " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        all = ss.str();
    }
    const auto end = all.rfind('\n');
    const std::size_t keep = end == std::string::npos ? 0 : end + 1;
    if (keep != all.size()) std::filesystem::resize_file(path, keep);
    std::size_t pos = 0;
    while (pos < keep) {
        const auto nl = all.find('\n', pos);
        lines.push_back(all.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

inline std::map<std::pair<std::size_t, std::uint64_t>, Accumulator> load_checkpoint(const std::filesystem::path& path,
                                                                                    const std::vector<Unit>& units) {
    std::map<std::pair<std::size_t, std::uint64_t>, Unit> index;
    for (const auto& u : units) index[{u.scale, u.chunk}] = u;
    std::map<std::pair<std::size_t, std::uint64_t>, Accumulator> done;
    std::size_t lineno = 0;
    for (const auto& line : read_lines_repair(path)) {
        ++lineno;
        const auto where = path.string() + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw ResourceError("corrupted checkpoint " + where + ": unparsable line");
        }
        try {
            const auto sum = j.at("checksum").get<std::string>();
            j.erase("checksum");
            if (hex64(fnv1a(j.dump())) != sum) throw ResourceError("corrupted checkpoint " + where + ": checksum mismatch");
            const std::pair<std::size_t, std::uint64_t> key{j.at("scale").get<std::size_t>(), j.at("chunk").get<std::uint64_t>()};
            const auto it = index.find(key);
            if (it == index.end() || it->second.lo != j.at("lo").get<std::uint64_t>() || it->second.hi != j.at("hi").get<std::uint64_t>())
                throw ResourceError("corrupted checkpoint " + where + ": range does not belong to this spec");
            done[key] = accumulator_from_json(j.at("acc"));
        } catch (const nlohmann::json::exception& e) {
            throw ResourceError("corrupted checkpoint " + where + ": " + e.what());
        }
    }
    return done;
}

inline void append_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    if (lines.empty()) return;
    std::string blob;
    for (const auto& l : lines) blob += l + '\n';
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw ResourceError("cannot append to " + path.string());
    out << blob;
    out.flush();
    if (!out) throw ResourceError("write failed on " + path.string());
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ResourceError("cannot write " + tmp);
        out << content;
        out.flush();
        if (!out) throw ResourceError("write failed on " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::vector<EstimateRecord> read_manifest(const std::filesystem::path& path) {
    std::vector<EstimateRecord> out;
    for (const auto& line : read_lines_repair(path)) {
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw ResourceError("corrupted manifest " + path.string() + ": " + e.what());
        }
    }
    return out;
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ResourceError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ResourceError("corrupted " + path.string() + ": " + e.what());
    }
}

inline std::vector<EstimateRecord> scale_records(const ExperimentSpec& s, const ScaleJob& job, const Accumulator& acc) {
    auto recs = plan_records(job.plan, acc, job.cfg);
    for (auto& r : recs) {
        r.params["scale"] = format_double(job.scale);
        if (job.fingerprint) r.fingerprint = *job.fingerprint;
        if (!(r.fingerprint == expected_fingerprint(s)))
            throw SpecError("record fingerprint does not match the experiment spec");
    }
    return recs;
}

/// Headline series: channel 0 of every scale, in grid order.
inline std::vector<SeriesPoint> headline_series(const ExperimentSpec& s, const std::vector<EstimateRecord>& recs) {
    const auto head = make_scale_job(s, 0).plan.channels.at(0).quantity;
    std::vector<SeriesPoint> out;
    for (const auto& r : recs)
        if (r.quantity == head) out.push_back({parse_double(r.params.at("scale")), r.estimate, r.stderr_});
    return out;
}

inline nlohmann::json compute_fits(const ExperimentSpec& s, const std::vector<EstimateRecord>& recs) {
    if (!s.fit) return nullptr;
    const auto series = headline_series(s, recs);
    nlohmann::json j{{"quantity", s.quantity}, {"tolerance", s.tolerance}};
    try {
        const auto f = fit_power_law(series, 1000, s.seed);
        j["fit"] = to_json(f);
        const auto tag = target_tag(s);
        if (!tag.empty()) {
            const auto t = lookup_target(tag, s.d);
            j["target"] = {{"tag", t.tag}, {"exponent", t.exponent}, {"locus", t.locus}, {"conjectural", t.conjectural}};
            // the percolation targets are high-dimensional results; trees have no dimension
            const bool applies = s.d >= kHighDimension || tag == "brw_survival";
            j["target_applies"] = applies;
            if (applies) j["within_band"] = within_band(f, t.exponent, s.tolerance);
        }
    } catch (const SpecError& e) {
        j["error"] = e.what();
    }
    try {
        nlohmann::json rs = nlohmann::json::array();
        for (const auto& r : ratio_exponent(series)) rs.push_back({{"n", r.n}, {"alpha", r.alpha}, {"stderr", r.stderr_}});
        j["ratio_exponents"] = rs;
    } catch (const SpecError&) {
        j["ratio_exponents"] = nlohmann::json::array();
    }
    return j;
}

} // namespace experiment_detail

inline std::string render_csv(const std::vector<EstimateRecord>& recs) {
    std::string out = std::string(kCsvHeader) + '\n';
    for (const auto& r : recs) out += to_csv_row(r) + '\n';
    return out;
}

inline std::vector<EstimateRecord> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<EstimateRecord> out;
    if (!std::getline(in, line) || line != kCsvHeader) throw SpecError("csv header mismatch");
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(record_from_csv(line));
    return out;
}

/// "ln n  ln f  stderr/f" rows for one quantity; zero estimates are skipped.
inline std::map<std::string, std::string> render_plotdata(const std::vector<EstimateRecord>& recs) {
    std::map<std::string, std::string> files;
    for (const auto& r : recs) {
        if (!r.params.count("scale") || r.estimate <= 0) continue;
        auto& f = files[r.quantity];
        if (f.empty()) f = "# ln_n ln_f stderr_band\n";
        f += format_double(std::log(parse_double(r.params.at("scale")))) + ' ' + format_double(std::log(r.estimate)) + ' ' +
             format_double(r.stderr_ / r.estimate) + '\n';
    }
    return files;
}

inline void write_outputs(const std::filesystem::path& dir, const ResultManifest& m) {
    namespace ed = experiment_detail;
    if (!m.fits.is_null()) ed::write_file(dir / "fits.json", m.fits.dump(2) + '\n');
    ed::write_file(dir / "report.csv", render_csv(m.records));
    std::filesystem::create_directories(dir / "plotdata");
    for (const auto& [q, text] : render_plotdata(m.records)) ed::write_file(dir / "plotdata" / (q + ".dat"), text);
}

namespace experiment_detail {

/// Computes every missing unit, appending each range to the checkpoint as it completes,
/// then reduces per scale in chunk order and writes manifest and reports.
inline ResultManifest execute(const ExperimentSpec& s, const RunHooks& hooks) {
    const auto dir = s.dir();
    const auto t0 = std::chrono::steady_clock::now();
    const auto units = units_of(s);
    auto done = load_checkpoint(dir / "checkpoint.jsonl", units);

    std::vector<ScaleJob> jobs;
    for (std::size_t k = 0; k < s.scales.size(); ++k) jobs.push_back(make_scale_job(s, k));

    std::vector<Unit> todo;
    for (const auto& u : units)
        if (!done.count({u.scale, u.chunk})) todo.push_back(u);

    std::uint64_t persisted = 0, computed_samples = 0;
    const unsigned workers = std::max(1u, s.workers);
    for (std::size_t b = 0; b < todo.size(); b += workers) {
        const std::size_t e = std::min(todo.size(), b + workers);
        std::vector<Accumulator> out(e - b);
        std::vector<std::exception_ptr> errs(e - b);
        const auto work = [&](std::size_t i) {
            try {
                const Unit& u = todo[b + i];
                const ScaleJob& job = jobs[u.scale];
                for (std::uint64_t r = u.lo; r < u.hi; ++r) job.plan.observe(out[i], job.cfg.with_replicate(r));
            } catch (...) {
                errs[i] = std::current_exception();
            }
        };
        if (e - b == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t i = 0; i < e - b; ++i) pool.emplace_back(work, i);
            for (auto& t : pool) t.join();
        }
        for (const auto& err : errs)
            if (err) std::rethrow_exception(err);
        std::vector<std::string> lines;
        for (std::size_t i = 0; i < e - b; ++i) {
            const Unit& u = todo[b + i];
            lines.push_back(checkpoint_line(u, out[i]));
            done[{u.scale, u.chunk}] = std::move(out[i]);
            computed_samples += u.hi - u.lo;
            ++persisted;
            if (hooks.interrupt_after_units && persisted >= *hooks.interrupt_after_units) {
                lines.resize(i + 1);
                append_lines(dir / "checkpoint.jsonl", lines);
                throw Interrupted("interrupted after " + std::to_string(persisted) + " ranges");
            }
        }
        append_lines(dir / "checkpoint.jsonl", lines);
    }

    ResultManifest m;
    m.spec = s;
    const auto existing = read_manifest(dir / "manifest.jsonl");
    std::vector<std::string> fresh;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        Accumulator total;
        for (const auto& u : units)
            if (u.scale == k) total.merge(done.at({u.scale, u.chunk}));
        for (auto& r : scale_records(s, jobs[k], total)) {
            if (std::find(existing.begin(), existing.end(), r) == existing.end()) fresh.push_back(to_jsonl(r));
            m.records.push_back(std::move(r));
        }
    }
    append_lines(dir / "manifest.jsonl", fresh);
    m.fits = compute_fits(s, m.records);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.metrics = {{"tool_version", kToolVersion},
                 {"mixer", kMixerId},
                 {"complete", true},
                 {"wall_seconds", secs},
                 {"samples_computed", computed_samples},
                 {"samples_per_second", secs > 0 ? static_cast<double>(computed_samples) / secs : 0.0}};
    write_outputs(dir, m);
    write_file(dir / "metrics.json", m.metrics.dump(2) + '\n');
    return m;
}

} // namespace experiment_detail

/// Starts a fresh experiment; refuses to overwrite an existing one with the same name.
inline ResultManifest run_experiment(const ExperimentSpec& s, const RunHooks& hooks = {}) {
    namespace ed = experiment_detail;
    const auto dir = s.dir();
    if (std::filesystem::exists(dir / "spec.json"))
        throw SpecError("experiment '" + s.name + "' already exists in " + s.output + "; use resume");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ResourceError("cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t k = 0; k < s.scales.size(); ++k) (void)make_scale_job(s, k);  // validate before writing anything
    auto echo = to_json(s);
    echo["tool_version"] = kToolVersion;
    echo["mixer"] = kMixerId;
    ed::write_file(dir / "spec.json", echo.dump(2) + '\n');
    return ed::execute(s, hooks);
}

/// Reads a finished experiment without touching any file.
inline ResultManifest load_manifest(const std::filesystem::path& dir) {
    namespace ed = experiment_detail;
    const auto echo = ed::read_json(dir / "spec.json");
    ResultManifest m;
    m.spec = spec_from_json(echo);
    m.spec.output = dir.parent_path().string();
    m.records = ed::read_manifest(dir / "manifest.jsonl");
    if (std::filesystem::exists(dir / "fits.json")) m.fits = ed::read_json(dir / "fits.json");
    if (std::filesystem::exists(dir / "metrics.json")) m.metrics = ed::read_json(dir / "metrics.json");
    return m;
}

/// Completes a partially run experiment. workers may be changed; nothing else can.
inline ResultManifest resume_experiment(const std::filesystem::path& dir, std::optional<unsigned> workers = std::nullopt,
                                        const RunHooks& hooks = {}) {
    namespace ed = experiment_detail;
    if (!std::filesystem::exists(dir / "spec.json")) throw SpecError("no experiment at " + dir.string());
    const auto echo = ed::read_json(dir / "spec.json");
    const auto tool = echo.value("tool_version", std::string("?"));
    const auto mixer = echo.value("mixer", std::string("?"));
    if (tool != kToolVersion)
        throw SpecError("refusing to resume: experiment was written by " + tool + ", this is " + kToolVersion);
    if (mixer != kMixerId) throw SpecError("refusing to resume: experiment used mixer " + mixer + ", this is " + kMixerId);
    if (std::filesystem::exists(dir / "metrics.json") && ed::read_json(dir / "metrics.json").value("complete", false))
        return load_manifest(dir);
    ExperimentSpec s = spec_from_json(echo);
    s.output = dir.parent_path().string();
    s.name = dir.filename().string();
    if (workers) s.workers = *workers;
    return ed::execute(s, hooks);
}

// ---------------------------------------------------------------------------------------
// Reports

enum class ReportFormat { table, csv, jsonl, plotdata };

inline ReportFormat parse_report_format(const std::string& s) {
    if (s == "table") return ReportFormat::table;
    if (s == "csv") return ReportFormat::csv;
    if (s == "jsonl") return ReportFormat::jsonl;
    if (s == "plotdata") return ReportFormat::plotdata;
    throw SpecError("unknown report format '" + s + "' (table | csv | jsonl | plotdata)");
}

/// Table, csv and jsonl are returned as text; plotdata writes <plot_dir>/<name>/<quantity>.dat
/// and returns the list of files written.
inline std::string render_report(const std::vector<ResultManifest>& ms, ReportFormat fmt,
                                 const std::filesystem::path& plot_dir = "plotdata") {
    std::ostringstream os;
    switch (fmt) {
    case ReportFormat::csv: {
        std::vector<EstimateRecord> all;
        for (const auto& m : ms) all.insert(all.end(), m.records.begin(), m.records.end());
        return render_csv(all);
    }
    case ReportFormat::jsonl:
        for (const auto& m : ms)
            for (const auto& r : m.records) os << to_jsonl(r) << '\n';
        return os.str();
    case ReportFormat::plotdata:
        for (const auto& m : ms) {
            const auto dir = plot_dir / m.spec.name;
            std::filesystem::create_directories(dir);
            for (const auto& [q, text] : render_plotdata(m.records)) {
                experiment_detail::write_file(dir / (q + ".dat"), text);
                os << (dir / (q + ".dat")).string() << '\n';
            }
        }
        return os.str();
    case ReportFormat::table: break;
    }
    for (const auto& m : ms) {
        const auto tag = target_tag(m.spec);
        std::optional<PaperTarget> target;
        if (!tag.empty()) target = lookup_target(tag, m.spec.d);
        os << "experiment " << m.spec.name << "  quantity=" << m.spec.quantity << "  d=" << m.spec.d << "  p="
           << (m.spec.p ? format_double(*m.spec.p) : "-") << "  seed=" << m.spec.seed << '\n';
        char buf[256];
        std::snprintf(buf, sizeof buf, "  %-16s %-10s %10s %14s %12s %8s %14s\n", "quantity", "scale", "N", "estimate",
                      "stderr", "trunc", "target_exp");
        os << buf;
        for (const auto& r : m.records) {
            const auto label = r.params.count("value") ? r.quantity + "[" + r.params.at("value") + "]" : r.quantity;
            std::snprintf(buf, sizeof buf, "  %-16s %-10s %10llu %14.6g %12.3g %8.3g %14s\n", label.c_str(),
                          r.params.count("scale") ? r.params.at("scale").c_str() : "-",
                          static_cast<unsigned long long>(r.n_samples), r.estimate, r.stderr_, r.truncation_rate,
                          target ? format_double(target->exponent).c_str() : "-");
            os << buf;
        }
        if (!m.fits.is_null() && m.fits.contains("fit")) {
            const auto& f = m.fits.at("fit");
            std::snprintf(buf, sizeof buf, "  fit: alpha = %.4f  [%.4f, %.4f]  A = %.4g  R^2 = %.4f\n", f.at("alpha").get<double>(),
                          f.at("ci_low").get<double>(), f.at("ci_high").get<double>(), f.at("amplitude").get<double>(),
                          f.at("r_squared").get<double>());
            os << buf;
            if (m.fits.contains("target")) {
                const auto& t = m.fits.at("target");
                const char* verdict = !m.fits.contains("within_band") ? "n/a (target stated for d >= 11)"
                                      : m.fits.at("within_band").get<bool>()  ? "PASS"
                                                                              : "FLAG";
                std::snprintf(buf, sizeof buf, "  target %s: %.4g (%s%s)  tolerance %.3g  -> %s\n",
                              t.at("tag").get<std::string>().c_str(), t.at("exponent").get<double>(),
                              t.at("locus").get<std::string>().c_str(), t.at("conjectural").get<bool>() ? ", conjectural" : "",
                              m.fits.at("tolerance").get<double>(), verdict);
                os << buf;
            }
        } else if (!m.fits.is_null() && m.fits.contains("error")) {
            os << "  fit: not available (" << m.fits.at("error").get<std::string>() << ")\n";
        }
    }
    return os.str();
}

} // namespace perclab

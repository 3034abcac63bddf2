#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "perclab/bonds.hpp"
#include "perclab/error.hpp"

namespace perclab {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw SpecError("not a number: '" + std::string(s) + "'");
    return v;
}

/// Identifies the random environment a record came from.
struct Fingerprint {
    std::size_t d = 0;
    std::string adjacency;
    double p = 0;
    std::uint64_t seed = 0;
    std::string mixer = kMixerId;

    static Fingerprint of(const LatticeConfig& cfg) {
        return {cfg.dim(), cfg.lattice.adjacency().to_string(), cfg.p, cfg.seed, kMixerId};
    }
    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

struct EstimateRecord {
    std::string quantity;
    std::map<std::string, std::string> params;
    std::uint64_t n_samples = 0;
    double sum = 0;
    double estimate = 0;
    double stderr_ = 0;
    double truncation_rate = 0;
    Fingerprint fingerprint;

    /// Truncated samples make the estimate a one-sided approximation.
    bool biased_possible() const noexcept { return truncation_rate > 0; }

    friend bool operator==(const EstimateRecord&, const EstimateRecord&) = default;
};

/// Running sums for one observable. Merging is plain addition, so a fixed merge order
/// gives bit-identical results.
struct Tally {
    std::uint64_t n = 0;
    double sum = 0;
    double sumsq = 0;
    std::uint64_t truncated = 0;

    void add(double v, bool trunc = false) {
        ++n;
        sum += v;
        sumsq += v * v;
        truncated += trunc ? 1 : 0;
    }
    void merge(const Tally& o) {
        n += o.n;
        sum += o.sum;
        sumsq += o.sumsq;
        truncated += o.truncated;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }

    /// Delete-1 jackknife standard error of the mean; for the sample mean it reduces to
    /// the unbiased sample variance over n.
    double jackknife_stderr() const {
        if (n < 2) return 0.0;
        const double nn = static_cast<double>(n);
        const double var = std::max(0.0, (sumsq - sum * sum / nn) / (nn - 1));
        return std::sqrt(var / nn);
    }
    double bernoulli_stderr() const {
        if (n == 0) return 0.0;
        const double e = mean();
        return std::sqrt(std::max(0.0, e * (1 - e)) / static_cast<double>(n));
    }
    double truncation_rate() const { return n ? static_cast<double>(truncated) / static_cast<double>(n) : 0.0; }

    friend bool operator==(const Tally&, const Tally&) = default;
};

enum class StderrKind { bernoulli, jackknife };

inline EstimateRecord make_record(std::string quantity, std::map<std::string, std::string> params, const Tally& t,
                                  StderrKind kind, const LatticeConfig& cfg) {
    EstimateRecord r;
    r.quantity = std::move(quantity);
    r.params = std::move(params);
    r.n_samples = t.n;
    r.sum = t.sum;
    r.estimate = t.mean();
    r.stderr_ = kind == StderrKind::bernoulli ? t.bernoulli_stderr() : t.jackknife_stderr();
    r.truncation_rate = t.truncation_rate();
    r.fingerprint = Fingerprint::of(cfg);
    return r;
}

// ---------------------------------------------------------------------------------------
// Serialization: one JSON object per line, or CSV with the column order below.

inline nlohmann::json to_json(const EstimateRecord& r) {
    nlohmann::json j;
    j["quantity"] = r.quantity;
    j["params"] = r.params;
    j["n_samples"] = r.n_samples;
    j["sum"] = r.sum;
    j["estimate"] = r.estimate;
    j["stderr"] = r.stderr_;
    j["truncation_rate"] = r.truncation_rate;
    j["biased_possible"] = r.biased_possible();
    j["fingerprint"] = {{"d", r.fingerprint.d},
                        {"adjacency", r.fingerprint.adjacency},
                        {"p", r.fingerprint.p},
                        {"seed", r.fingerprint.seed},
                        {"mixer", r.fingerprint.mixer}};
    return j;
}

inline EstimateRecord record_from_json(const nlohmann::json& j) {
    try {
        EstimateRecord r;
        r.quantity = j.at("quantity").get<std::string>();
        r.params = j.at("params").get<std::map<std::string, std::string>>();
        r.n_samples = j.at("n_samples").get<std::uint64_t>();
        r.sum = j.at("sum").get<double>();
        r.estimate = j.at("estimate").get<double>();
        r.stderr_ = j.at("stderr").get<double>();
        r.truncation_rate = j.at("truncation_rate").get<double>();
        const auto& f = j.at("fingerprint");
        r.fingerprint = {f.at("d").get<std::size_t>(), f.at("adjacency").get<std::string>(), f.at("p").get<double>(),
                         f.at("seed").get<std::uint64_t>(), f.at("mixer").get<std::string>()};
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed estimate record: ") + e.what());
    }
}

inline std::string to_jsonl(const EstimateRecord& r) { return to_json(r).dump(); }

inline constexpr const char* kCsvHeader =
    "quantity,params,n_samples,sum,estimate,stderr,truncation_rate,biased_possible,d,adjacency,p,seed,mixer";

namespace detail {
inline std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> cols(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cols.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cols.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cols.emplace_back();
        } else {
            cols.back() += c;
        }
    }
    if (quoted) throw SpecError("unterminated quote in csv row");
    return cols;
}
} // namespace detail

/// The params column holds a JSON object; fields are quoted per RFC 4180 when needed.
inline std::string to_csv_row(const EstimateRecord& r) {
    std::ostringstream os;
    os << detail::csv_quote(r.quantity) << ',' << detail::csv_quote(nlohmann::json(r.params).dump()) << ',' << r.n_samples
       << ',' << format_double(r.sum) << ',' << format_double(r.estimate) << ',' << format_double(r.stderr_) << ','
       << format_double(r.truncation_rate) << ',' << (r.biased_possible() ? 1 : 0) << ',' << r.fingerprint.d << ','
       << detail::csv_quote(r.fingerprint.adjacency) << ',' << format_double(r.fingerprint.p) << ',' << r.fingerprint.seed
       << ',' << detail::csv_quote(r.fingerprint.mixer);
    return os.str();
}

inline EstimateRecord record_from_csv(const std::string& line) {
    const auto cols = detail::csv_split(line);
    if (cols.size() != 13) throw SpecError("csv row has " + std::to_string(cols.size()) + " columns, expected 13");
    try {
        EstimateRecord r;
        r.quantity = cols[0];
        r.params = nlohmann::json::parse(cols[1]).get<std::map<std::string, std::string>>();
        r.n_samples = std::stoull(cols[2]);
        r.sum = parse_double(cols[3]);
        r.estimate = parse_double(cols[4]);
        r.stderr_ = parse_double(cols[5]);
        r.truncation_rate = parse_double(cols[6]);
        r.fingerprint = {static_cast<std::size_t>(std::stoull(cols[8])), cols[9], parse_double(cols[10]),
                         std::stoull(cols[11]), cols[12]};
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("bad params column: ") + e.what());
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const SpecError*>(&e)) throw;
        throw SpecError(std::string("bad integer in csv row: ") + e.what());
    }
}

// ---------------------------------------------------------------------------------------
// Deterministic parallel reduction over replicate indices.

struct RunOptions {
    std::uint64_t first_replicate = 0;
    unsigned workers = 1;
    std::uint64_t chunk = 4096;  // replicates per work unit; fixes the merge order
};

/// Splits [first, first + count) into fixed chunks, accumulates each chunk into its own
/// Acc with body(acc, replicate), then merges chunk results in index order. The result is
/// therefore independent of the worker count and of scheduling.
template <class Acc, class Body>
Acc reduce_replicates(std::uint64_t count, const RunOptions& opt, Body&& body) {
    require(opt.chunk > 0, "chunk size must be positive");
    const std::uint64_t nchunks = (count + opt.chunk - 1) / opt.chunk;
    std::vector<Acc> parts(nchunks);
    const auto work = [&](std::uint64_t c) {
        const std::uint64_t lo = opt.first_replicate + c * opt.chunk;
        const std::uint64_t hi = opt.first_replicate + std::min(count, (c + 1) * opt.chunk);
        for (std::uint64_t r = lo; r < hi; ++r) body(parts[c], r);
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(std::max<std::uint64_t>(1, nchunks))));
    if (workers == 1) {
        for (std::uint64_t c = 0; c < nchunks; ++c) work(c);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::exception_ptr failure;
        std::atomic<bool> failed{false};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    const std::uint64_t c = next.fetch_add(1);
                    if (c >= nchunks || failed.load()) return;
                    try {
                        work(c);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                        return;
                    }
                }
            });
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    Acc total{};
    for (const auto& part : parts) total.merge(part);
    return total;
}

} // namespace perclab

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "perclab/estimators.hpp"

namespace perclab {

enum class OffspringKind { poisson, geometric, binomial };

/// Critical (mean one) offspring distributions with closed-form generating functions.
struct OffspringLaw {
    OffspringKind kind = OffspringKind::poisson;
    unsigned k = 0;  // binomial only

    static OffspringLaw poisson() { return {OffspringKind::poisson, 0}; }
    static OffspringLaw geometric() { return {OffspringKind::geometric, 0}; }
    static OffspringLaw binomial(unsigned k) {
        // k = 1 is the deterministic single child: variance 0, not a critical branching law
        require(k >= 2, "binomial(k, 1/k) offspring needs k >= 2 (k = 1 has zero variance)");
        return {OffspringKind::binomial, k};
    }

    double variance() const {
        switch (kind) {
        case OffspringKind::poisson: return 1.0;
        case OffspringKind::geometric: return 2.0;
        case OffspringKind::binomial: return 1.0 - 1.0 / k;
        }
        return 0;
    }

    long double pgf(long double s) const {
        switch (kind) {
        case OffspringKind::poisson: return std::exp(s - 1);
        case OffspringKind::geometric: return 1 / (2 - s);
        case OffspringKind::binomial: return std::pow(1 - 1.0L / k + s / k, static_cast<long double>(k));
        }
        return 0;
    }

    double pmf(unsigned j) const {
        switch (kind) {
        case OffspringKind::poisson: return std::exp(-1.0 - std::lgamma(j + 1.0));
        case OffspringKind::geometric: return std::ldexp(1.0, -static_cast<int>(j) - 1);
        case OffspringKind::binomial: {
            if (j > k) return 0;
            const double q = 1.0 / k;
            return std::exp(std::lgamma(k + 1.0) - std::lgamma(j + 1.0) - std::lgamma(k - j + 1.0)) * std::pow(q, j) *
                   std::pow(1 - q, k - j);
        }
        }
        return 0;
    }

    /// Inverse-CDF draw from u in [0,1).
    unsigned sample(double u) const {
        double cdf = 0;
        for (unsigned j = 0;; ++j) {
            cdf += pmf(j);
            if (u < cdf) return j;
            if (j > 1000 || (kind == OffspringKind::binomial && j >= k)) return j;
        }
    }

    std::string to_string() const {
        switch (kind) {
        case OffspringKind::poisson: return "poisson(1)";
        case OffspringKind::geometric: return "geometric(1/2)";
        case OffspringKind::binomial: return "binomial(k=" + std::to_string(k) + ")";
        }
        return "?";
    }

    static OffspringLaw parse(const std::string& s) {
        if (s == "poisson(1)" || s == "poisson") return poisson();
        if (s == "geometric(1/2)" || s == "geometric") return geometric();
        if (s.rfind("binomial(k=", 0) == 0 && s.back() == ')') {
            const auto v = s.substr(11, s.size() - 12);
            if (!v.empty() && v.find_first_not_of("0123456789") == std::string::npos && v.size() < 6)
                return binomial(static_cast<unsigned>(std::stoul(v)));
        }
        throw SpecError("unknown offspring law '" + s + "' (poisson(1) | geometric(1/2) | binomial(k=K))");
    }

    friend bool operator==(const OffspringLaw&, const OffspringLaw&) = default;
};

/// P(Z_n > 0) from q_{j+1} = f(q_j), q_0 = 0, in extended precision.
inline long double gw_survival_exact(const OffspringLaw& law, std::uint64_t n) {
    long double q = 0;
    for (std::uint64_t j = 0; j < n; ++j) q = law.pgf(q);
    return 1 - q;
}

enum class Killing { none, half_space };

inline constexpr std::uint64_t kDefaultPopulationCap = 1'000'000;

struct BRWConfig {
    OffspringLaw law = OffspringLaw::poisson();
    Lattice lattice = Lattice(1, Adjacency::nearest());
    Killing killing = Killing::none;
    std::uint64_t seed = 0;
    std::uint64_t population_cap = kDefaultPopulationCap;

    Fingerprint fingerprint() const { return {lattice.dim(), lattice.adjacency().to_string(), 0.0, seed, kMixerId}; }
};

namespace brw_detail {
inline constexpr std::uint64_t kRootTag = 0xB5B5B5B5ULL;
inline constexpr std::uint64_t kOffspringTag = 0x0FF5ULL;
inline constexpr std::uint64_t kStepTag = 0x57E9ULL;

inline std::uint64_t root_id(std::uint64_t seed, std::uint64_t run) { return stream_key(seed ^ kRootTag, run); }
inline std::uint64_t child_id(std::uint64_t parent, std::uint64_t i) { return mix64(mix64(parent + kGolden) ^ (i + kGolden)); }
} // namespace brw_detail

struct Particle {
    std::uint64_t id;
    Point x;
};

/// One run of the branching walk. Every particle's offspring count and every child's step
/// are functions of genealogical ids only, so runs under different killing rules or caps
/// share their randomness particle by particle.
class BRWRun {
public:
    BRWRun(const BRWConfig& cfg, std::uint64_t run) : cfg_(cfg) {
        current_.push_back({brw_detail::root_id(cfg.seed, run), Point(cfg.lattice.dim())});
    }

    const std::vector<Particle>& generation() const noexcept { return current_; }
    std::uint64_t generation_index() const noexcept { return gen_; }
    bool extinct() const noexcept { return current_.empty(); }
    bool capped() const noexcept { return capped_; }

    /// Advances one generation; returns false (and sets capped) if the next generation
    /// would exceed the population cap.
    bool step() {
        next_.clear();
        const std::size_t deg = cfg_.lattice.degree();
        for (const auto& prt : current_) {
            const unsigned kids = cfg_.law.sample(to_unit_interval(mix64(prt.id ^ brw_detail::kOffspringTag)));
            for (unsigned i = 0; i < kids; ++i) {
                const std::uint64_t cid = brw_detail::child_id(prt.id, i);
                const auto k = static_cast<std::size_t>(to_unit_interval(mix64(cid ^ brw_detail::kStepTag)) * static_cast<double>(deg));
                Point y = prt.x + cfg_.lattice.offset(k);
                if (cfg_.killing == Killing::half_space && y[0] < 0) continue;
                if (next_.size() >= cfg_.population_cap) {
                    capped_ = true;
                    return false;
                }
                next_.push_back({cid, y});
            }
        }
        current_.swap(next_);
        ++gen_;
        return true;
    }

private:
    const BRWConfig& cfg_;
    std::vector<Particle> current_, next_;
    std::uint64_t gen_ = 0;
    bool capped_ = false;
};

enum class SurvivalMode { generations, distance };

struct SurvivalOutcome {
    bool survived = false;
    bool truncated = false;
    std::uint64_t final_population = 0;  // Z_n in generations mode
};

/// Generations mode: Z_n > 0. Distance mode: some particle reaches l-inf distance n before
/// extinction, within max_generations. Capped runs count as survived and are flagged.
inline SurvivalOutcome brw_survival_run(const BRWConfig& cfg, std::uint64_t run, std::uint64_t n, SurvivalMode mode,
                                        std::uint64_t max_generations) {
    BRWRun r(cfg, run);
    if (mode == SurvivalMode::generations) {
        while (r.generation_index() < n && !r.extinct())
            if (!r.step()) return {true, true, 0};
        return {!r.extinct(), false, r.generation().size()};
    }
    if (n == 0) return {true, false, 1};
    for (;;) {
        for (const auto& prt : r.generation())
            if (static_cast<std::uint64_t>(prt.x.norm()) >= n) return {true, false, r.generation().size()};
        if (r.extinct()) return {false, false, 0};
        if (r.generation_index() >= max_generations || !r.step()) return {true, true, 0};
    }
}

inline QuantityPlan plan_brw_survival(const BRWConfig& cfg, std::uint64_t n, SurvivalMode mode,
                                      std::uint64_t max_generations = 100000) {
    QuantityPlan p{"brw_survival",
                   {{"law", cfg.law.to_string()},
                    {"n", std::to_string(n)},
                    {"mode", mode == SurvivalMode::generations ? "generations" : "distance"},
                    {"killing", cfg.killing == Killing::none ? "none" : "half_space"}},
                   {{"brw_survival", StderrKind::bernoulli}, {"brw_population", StderrKind::jackknife}},
                   false,
                   {}};
    p.observe = [cfg, n, mode, max_generations](Accumulator& acc, const LatticeConfig& rep) {
        const auto o = brw_survival_run(cfg, rep.replicate, n, mode, max_generations);
        acc.channel(0).add(o.survived ? 1.0 : 0.0, o.truncated);
        acc.channel(1).add(static_cast<double>(o.final_population), o.truncated);
    };
    return p;
}

namespace brw_detail {
/// Carrier for the replicate index: BRW runs have no bond field.
inline LatticeConfig run_cfg(const BRWConfig& cfg) { return LatticeConfig(cfg.lattice, 0.0, cfg.seed); }

inline EstimateRecord with_fingerprint(EstimateRecord r, const BRWConfig& cfg) {
    r.fingerprint = cfg.fingerprint();
    return r;
}
} // namespace brw_detail

struct BRWSurvivalEstimate {
    EstimateRecord survival;
    EstimateRecord population;  // mean Z_n (generations mode)
};

inline BRWSurvivalEstimate brw_survival_mc(const BRWConfig& cfg, std::uint64_t n, SurvivalMode mode, std::uint64_t N,
                                           const RunOptions& opt = {}, std::uint64_t max_generations = 100000) {
    const auto plan = plan_brw_survival(cfg, n, mode, max_generations);
    const auto lc = brw_detail::run_cfg(cfg);
    const auto recs = plan_records(plan, run_plan(plan, lc, N, opt), lc);
    return {brw_detail::with_fingerprint(recs[0], cfg), brw_detail::with_fingerprint(recs[1], cfg)};
}

/// Total visits to each target over generations 0..max_generations.
inline QuantityPlan plan_brw_green(const BRWConfig& cfg, const std::vector<Point>& targets, std::uint64_t max_generations) {
    for (const auto& t : targets) {
        cfg.lattice.check(t);
        if (cfg.killing == Killing::half_space) require(t[0] >= 0, "green target " + t.to_string() + " lies in the killed region");
    }
    QuantityPlan p{"brw_green",
                   {{"law", cfg.law.to_string()},
                    {"max_generations", std::to_string(max_generations)},
                    {"killing", cfg.killing == Killing::none ? "none" : "half_space"}},
                   {},
                   false,
                   {}};
    p.channels.assign(targets.size(), {"brw_green", StderrKind::jackknife});
    p.observe = [cfg, targets, max_generations](Accumulator& acc, const LatticeConfig& rep) {
        BRWRun r(cfg, rep.replicate);
        std::vector<double> visits(targets.size(), 0.0);
        bool truncated = false;
        for (;;) {
            for (const auto& prt : r.generation())
                for (std::size_t i = 0; i < targets.size(); ++i)
                    if (prt.x == targets[i]) visits[i] += 1;
            if (r.extinct() || r.generation_index() >= max_generations) break;
            if (!r.step()) {
                truncated = true;
                break;
            }
        }
        for (std::size_t i = 0; i < targets.size(); ++i) acc.channel(i).add(visits[i], truncated);
    };
    return p;
}

inline std::vector<EstimateRecord> brw_green_profile(const BRWConfig& cfg, const std::vector<Point>& targets,
                                                     std::uint64_t max_generations, std::uint64_t N, const RunOptions& opt = {}) {
    const auto plan = plan_brw_green(cfg, targets, max_generations);
    const auto lc = brw_detail::run_cfg(cfg);
    auto recs = plan_records(plan, run_plan(plan, lc, N, opt), lc);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        recs[i].params["target"] = targets[i].to_string();
        recs[i] = brw_detail::with_fingerprint(recs[i], cfg);
    }
    return recs;
}

} // namespace perclab

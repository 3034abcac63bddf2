// perclab: run, resume and report percolation sweeps.
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "perclab/criteria.hpp"
#include "perclab/experiment.hpp"

namespace {

using namespace perclab;

constexpr int kExitSpec = 2;
constexpr int kExitResource = 3;

void print_summary(const ResultManifest& m) { std::cout << render_report({m}, ReportFormat::table); }

/// CLI flags override the spec file before validation, so "--p from-registry" takes the same path.
nlohmann::json load_with_overrides(const std::string& path, const std::optional<std::string>& p, const std::optional<std::uint64_t>& seed,
                                   const std::optional<std::uint64_t>& samples, const std::optional<unsigned>& workers,
                                   const std::optional<std::string>& out) {
    std::ifstream in(path);
    if (!in) throw ResourceError("cannot open spec " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SpecError("spec " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw SpecError("spec " + path + " must hold a JSON object");
    if (p) {
        if (*p == "from-registry") j["p"] = *p;
        else j["p"] = parse_double(*p);
    }
    if (seed) j["seed"] = *seed;
    if (samples) j["samples"] = *samples;
    if (workers) j["workers"] = *workers;
    if (out) j["output"] = *out;
    return j;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"perclab: Monte Carlo estimators for critical bond percolation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    auto* run = app.add_subcommand("run", "run an experiment spec");
    std::string spec_path, registry = default_registry_path();
    std::optional<std::string> p, out;
    std::optional<std::uint64_t> seed, samples;
    std::optional<unsigned> workers;
    run->add_option("spec", spec_path, "experiment spec (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--p", p, "bond probability, or from-registry");
    run->add_option("--seed", seed, "base seed");
    run->add_option("--samples", samples, "samples per scale");
    run->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out, "output root directory");
    run->add_option("--registry", registry, "p_c registry file");

    auto* resume = app.add_subcommand("resume", "finish an interrupted experiment");
    std::string resume_dir;
    std::optional<unsigned> resume_workers;
    resume->add_option("dir", resume_dir, "experiment directory (<out>/<name>)")->required();
    resume->add_option("--workers", resume_workers, "worker threads")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "render finished experiments");
    std::vector<std::string> dirs;
    std::string format = "table", plot_dir = "plotdata";
    report->add_option("dirs", dirs, "experiment directories")->required();
    report->add_option("--format", format, "table | csv | jsonl | plotdata");
    report->add_option("--plot-dir", plot_dir, "where plotdata files go");

    auto* targets = app.add_subcommand("targets", "list the decay exponents fits are compared against");
    std::size_t d = 11;
    targets->add_option("--d", d, "dimension")->check(CLI::Range(1, 16));

    auto* selftest = app.add_subcommand("selftest", "run the enumeration-oracle checks");
    std::vector<int> only;
    bool all = false;
    criteria::Options copt;
    selftest->add_option("--only", only, "criteria to run")->check(CLI::Range(1, 8));
    selftest->add_flag("--all", all, "run criteria 1-8 instead of the enumeration-oracle subset");
    selftest->add_option("--workers", copt.workers, "worker threads")->check(CLI::PositiveNumber);
    selftest->add_option("--seed", copt.seed, "base seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitSpec;
    }

    try {
        if (*run) {
            const auto j = load_with_overrides(spec_path, p, seed, samples, workers, out);
            const auto spec = spec_from_json(j, registry);
            std::cerr << "running " << spec.name << " -> " << spec.dir().string();
            if (spec.p) std::cerr << " (p=" << format_double(*spec.p) << ", " << spec.p_source << ")";
            std::cerr << '\n';
            print_summary(run_experiment(spec));
        } else if (*resume) {
            print_summary(resume_experiment(resume_dir, resume_workers));
        } else if (*report) {
            const auto fmt = parse_report_format(format);
            std::vector<ResultManifest> ms;
            for (const auto& dir : dirs) ms.push_back(load_manifest(dir));
            std::cout << render_report(ms, fmt, plot_dir);
        } else if (*targets) {
            std::printf("%-12s %10s  %-12s %s\n", "tag", "exponent", "status", "locus");
            for (const auto& t : paper_targets(d))
                std::printf("%-12s %10s  %-12s %s\n", t.tag.c_str(), format_double(t.exponent).c_str(),
                            t.conjectural ? "conjectural" : "proved", t.locus.c_str());
        } else if (*selftest) {
            std::vector<int> ids = only;
            if (ids.empty()) ids = all ? std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8} : std::vector<int>{1, 2, 3, 6};
            int bad = 0;
            for (int id : ids) {
                const auto r = criteria::run_one(id, copt);
                std::printf("%s\n", criteria::format_line(r).c_str());
                std::fflush(stdout);
                bad += r.status == criteria::Status::pass ? 0 : 1;
            }
            return bad == 0 ? 0 : 1;
        }
    } catch (const Interrupted& e) {
        std::cerr << "interrupted: " << e.what() << '\n';
        return kExitResource;
    } catch (const SpecError& e) {
        std::cerr << "spec error: " << e.what() << '\n';
        return kExitSpec;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << '\n';
        return kExitResource;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "resource error: " << e.what() << '\n';
        return kExitResource;
    } catch (const std::bad_alloc&) {
        std::cerr << "resource error: out of memory\n";
        return kExitResource;
    }
    return 0;
}

// qfb: command-line front end for the two-qubit feedback simulations.
//
// Every subcommand resolves an effective configuration (flags over config
// file over defaults), echoes it to <out>/config.json, and tags each output
// with the configuration hash and the library version.
//
// Exit codes: 0 success, 1 numerical or solver failure, 2 usage or config error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qfb/entanglement.hpp"
#include "qfb/liouville.hpp"
#include "qfb/optimize.hpp"
#include "qfb/propagate.hpp"
#include "qfb/sampling.hpp"
#include "qfb/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qfb;

namespace {

constexpr int kExitSolver = 1;
constexpr int kExitUsage = 2;

// ---------------------------------------------------------------------------
// Value parsing

/// Reads "0.5", "pi", "pi/12", "5pi/6", "5*pi/6".
double parse_angle(const std::string& text) {
    const auto pos = text.find("pi");
    std::size_t used = 0;
    try {
        if (pos == std::string::npos) {
            const double x = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
            return x;
        }
        std::string coef = text.substr(0, pos);
        if (!coef.empty() && coef.back() == '*') coef.pop_back();
        double x = coef.empty() ? 1.0 : std::stod(coef, &used);
        if (!coef.empty() && used != coef.size()) throw std::invalid_argument(text);
        x *= std::numbers::pi;
        const std::string rest = text.substr(pos + 2);
        if (rest.empty()) return x;
        if (rest[0] != '/') throw std::invalid_argument(text);
        const double den = std::stod(rest.substr(1), &used);
        if (used != rest.size() - 1 || den == 0.0) throw std::invalid_argument(text);
        return x / den;
    } catch (const std::logic_error&) {
        throw ValidationError("cannot parse angle '" + text + "'");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, sep);) out.push_back(item);
    return out;
}

/// "lo:hi:step" or a comma-separated list.
std::vector<double> parse_grid(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() == 3) return linear_grid(parse_angle(parts[0]), parse_angle(parts[1]), parse_angle(parts[2]));
    if (parts.size() != 1) throw ValidationError("grid '" + text + "': expected lo:hi:step or a comma list");
    std::vector<double> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_angle(item));
    if (out.empty()) throw ValidationError("grid '" + text + "' is empty");
    return out;
}

AngleTuple parse_tuple(const std::string& text) {
    const auto parts = split(text, ',');
    if (parts.size() != 4) throw ValidationError("angles '" + text + "': expected a1,b1,a2,b2");
    return {parse_angle(parts[0]), parse_angle(parts[1]), parse_angle(parts[2]), parse_angle(parts[3])};
}

int coordinate_index(const std::string& name) {
    for (int k = 0; k < kCoordinates; ++k)
        if (name == kCoordNames[k]) return k;
    try {
        std::size_t used = 0;
        const int k = std::stoi(name, &used);
        if (used == name.size() && k >= 0 && k < kCoordinates) return k;
    } catch (const std::logic_error&) {
    }
    throw ValidationError("unknown coordinate '" + name + "'");
}

// ---------------------------------------------------------------------------
// Configuration

struct Flags {
    std::string config_file;
    std::uint64_t seed = 0;
    long long n = 0;
    long long coarse_n = 0;
    long long draws = 0;
    double tmax = 0, tstep = 0;
    std::string angle_step, alpha, j, alpha_grid, j_grid, out, format, angles, initial, inject;
    unsigned workers = 1;
    bool no_feedback = false;
};

json defaults(const std::string& command) {
    json d = {
        {"command", command},
        {"seed", 0},
        {"out", "qfb-out"},
        {"workers", default_workers()},
        {"format", "csv"},
    };
    if (const char* env = std::getenv("QFB_SEED")) {
        try {
            std::size_t used = 0;
            const unsigned long long s = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument(env);
            d["seed"] = s;
        } catch (const std::logic_error&) {
            throw ValidationError(std::string("QFB_SEED '") + env + "' is not an unsigned integer");
        }
    }
    if (command == "preserve") {
        d.update({{"n", 10000}, {"coarse_n", 1000}, {"tmax", 3.0}, {"tstep", 0.05}, {"angle_step", "pi/12"},
                  {"alpha", "0"}, {"no_feedback", false}, {"angles", ""}});
    } else if (command == "stabilize") {
        d.update({{"angle_step", "pi/12"}, {"alpha_grid", "0:2:0.1"}, {"j_grid", "-2:2:0.1"}});
    } else if (command == "sample") {
        d.update({{"n", 10000}});
    } else if (command == "oracle-check") {
        d.update({{"draws", 50}, {"inject", ""}});
    } else if (command == "steady") {
        d.update({{"alpha", "0.5"}, {"j", "0.5"}, {"angles", ""}});
    } else if (command == "evolve") {
        d.update({{"alpha", "0"}, {"j", "0"}, {"angles", ""}, {"tmax", 3.0}, {"tstep", 0.05}, {"initial", "excited"}});
    }
    return d;
}

/// Flags registered on every subcommand; each subcommand uses a subset.
void add_flags(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config_file, "JSON file with option values (flags take precedence)");
    app->add_option("--seed", f.seed, "Ensemble / draw seed (default: $QFB_SEED or 0)");
    app->add_option("--n", f.n, "Ensemble size");
    app->add_option("--coarse-n", f.coarse_n, "Coarse-stage ensemble size for preserve; 0 = single stage");
    app->add_option("--draws", f.draws, "Random draws per scenario for oracle-check");
    app->add_option("--tmax", f.tmax, "Final time");
    app->add_option("--tstep", f.tstep, "Time step of the output grid");
    app->add_option("--angle-step", f.angle_step, "Feedback angle grid step, e.g. pi/12");
    app->add_option("--alpha", f.alpha, "Drive amplitude");
    app->add_option("--j", f.j, "Coupling J");
    app->add_option("--alpha-grid", f.alpha_grid, "Drive grid lo:hi:step or list");
    app->add_option("--j-grid", f.j_grid, "Coupling grid lo:hi:step or list");
    app->add_option("--angles", f.angles, "Fixed feedback tuple a1,b1,a2,b2");
    app->add_option("--initial", f.initial, "Initial state for evolve: excited, ground, bell, haar");
    app->add_option("--inject-fault", f.inject, "oracle-check test hook: perturb M[ROW,COL] by 1e-6");
    app->add_option("--out", f.out, "Output directory");
    app->add_option("--workers", f.workers, "Worker threads");
    app->add_option("--format", f.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    app->add_flag("--no-feedback", f.no_feedback, "Pin feedback angles to zero");
}

/// flags > config file > defaults.
json resolve(const std::string& command, CLI::App* app, const Flags& f) {
    json cfg = defaults(command);
    if (!f.config_file.empty()) {
        std::ifstream in(f.config_file);
        if (!in) throw ValidationError("cannot open config file '" + f.config_file + "'");
        json file;
        try {
            file = json::parse(in);
        } catch (const json::exception& e) {
            throw ValidationError("config file: " + std::string(e.what()));
        }
        if (!file.is_object()) throw ValidationError("config file must hold a JSON object");
        for (const auto& [key, value] : file.items()) {
            if (key == "command") continue;
            if (!cfg.contains(key)) throw ValidationError("config file: key '" + key + "' does not apply to " + command);
            cfg[key] = value;
        }
    }
    auto given = [&](const char* flag) { return app->count(flag) > 0; };
    auto set = [&](const char* flag, const char* key, const json& value) {
        if (!given(flag)) return;
        if (!cfg.contains(key)) throw ValidationError(std::string(flag) + " does not apply to " + command);
        cfg[key] = value;
    };
    set("--seed", "seed", f.seed);
    set("--n", "n", f.n);
    set("--coarse-n", "coarse_n", f.coarse_n);
    set("--draws", "draws", f.draws);
    set("--tmax", "tmax", f.tmax);
    set("--tstep", "tstep", f.tstep);
    set("--angle-step", "angle_step", f.angle_step);
    set("--angles", "angles", f.angles);
    set("--initial", "initial", f.initial);
    set("--inject-fault", "inject", f.inject);
    set("--out", "out", f.out);
    set("--workers", "workers", f.workers);
    set("--format", "format", f.format);
    set("--no-feedback", "no_feedback", f.no_feedback);
    if (command == "stabilize") {
        // A single --alpha / --j value is a one-point grid.
        if (given("--alpha") && !given("--alpha-grid")) cfg["alpha_grid"] = f.alpha;
        if (given("--j") && !given("--j-grid")) cfg["j_grid"] = f.j;
        set("--alpha-grid", "alpha_grid", f.alpha_grid);
        set("--j-grid", "j_grid", f.j_grid);
    } else {
        set("--alpha", "alpha", f.alpha);
        set("--j", "j", f.j);
        set("--alpha-grid", "alpha_grid", f.alpha_grid);
        set("--j-grid", "j_grid", f.j_grid);
    }
    return cfg;
}

template <typename T>
T get(const json& cfg, const char* key) {
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config value '") + key + "' has the wrong type");
    }
}

/// Angle-valued entries may be numbers or strings such as "pi/12".
double get_angle(const json& cfg, const char* key) {
    const json& v = cfg.at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_angle(v.get<std::string>());
    throw ValidationError(std::string("config value '") + key + "' has the wrong type");
}

std::size_t get_count(const json& cfg, const char* key) {
    const json& v = cfg.at(key);
    if (!v.is_number_integer()) throw ValidationError(std::string("config value '") + key + "' must be an integer");
    const long long x = v.get<long long>();
    if (x < 0) throw ValidationError(std::string("config value '") + key + "' must be nonnegative");
    return static_cast<std::size_t>(x);
}

/// FNV-1a over the canonical dump, excluding fields that do not affect results.
std::string config_hash(const json& cfg) {
    json key = cfg;
    key.erase("out");
    key.erase("workers");
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : key.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Output

class Output {
public:
    Output(const json& cfg) : dir_(get<std::string>(cfg, "out")), hash_(config_hash(cfg)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ValidationError("cannot create output directory '" + dir_.string() + "': " + ec.message());
        write_json("config.json", cfg);
    }

    json meta() const { return {{"version", kVersion}, {"config_hash", hash_}}; }

    void write_csv(const std::string& name, const std::function<void(std::ostream&)>& body) const {
        std::ofstream os = open(name);
        os << "# qfb " << kVersion << " config " << hash_ << '\n';
        body(os);
    }

    void write_json(const std::string& name, json j) const {
        if (!j.contains("meta")) j["meta"] = meta();
        std::ofstream os = open(name);
        os << j.dump(2) << '\n';
    }

    const fs::path& dir() const { return dir_; }

private:
    std::ofstream open(const std::string& name) const {
        std::ofstream os(dir_ / name);
        if (!os) throw ValidationError("cannot write '" + (dir_ / name).string() + "'");
        return os;
    }

    fs::path dir_;
    std::string hash_;
};

std::string describe(double x) {
    // Multiples of pi/12 print symbolically for readability.
    const double k = x / (std::numbers::pi / 12.0);
    char buf[64];
    if (std::abs(k - std::round(k)) < 1e-9)
        std::snprintf(buf, sizeof buf, "%.0f*pi/12", std::round(k));
    else
        std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string describe(const AngleTuple& t) {
    std::string s = "(";
    const auto a = t.as_array();
    for (int k = 0; k < 4; ++k) s += (k ? ", " : "") + describe(a[k]);
    return s + ")";
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_preserve(const json& cfg) {
    const auto times = time_grid(get<double>(cfg, "tmax"), get<double>(cfg, "tstep"));
    const SamplerConfig sampler{get<std::uint64_t>(cfg, "seed"), get_count(cfg, "n")};
    if (sampler.count < 1) throw ValidationError("--n must be at least 1");
    const double drive = get_angle(cfg, "alpha");
    const auto workers = get<unsigned>(cfg, "workers");
    const bool json_out = get<std::string>(cfg, "format") == "json";
    const std::string fixed = get<std::string>(cfg, "angles");
    const Output out(cfg);
    const ModelParams model = ModelParams::preserve(drive);

    if (get<bool>(cfg, "no_feedback") || !fixed.empty()) {
        const auto none = average_concurrence(model, FeedbackParams::none(), times, sampler, workers);
        json j = {{"times", times}, {"C_none", none}, {"ensemble", {{"seed", sampler.seed}, {"N", sampler.count}}},
                  {"drive", drive}};
        std::vector<double> fb;
        AngleTuple tuple;
        if (!get<bool>(cfg, "no_feedback")) {
            tuple = parse_tuple(fixed);
            fb = average_concurrence(model, tuple.params(), times, sampler, workers);
            j["C_feedback"] = fb;
            j["angles"] = to_json(tuple);
        }
        if (json_out) {
            out.write_json("preservation.json", j);
        } else {
            out.write_csv("preservation.csv", [&](std::ostream& os) {
                os << (fb.empty() ? "t,C_none\n" : "t,C_feedback,C_none\n");
                for (std::size_t k = 0; k < times.size(); ++k) {
                    write_full_precision(os, times[k]);
                    if (!fb.empty()) {
                        os << ',';
                        write_full_precision(os, fb[k]);
                    }
                    os << ',';
                    write_full_precision(os, none[k]);
                    os << '\n';
                }
            });
            out.write_json("manifest.json", {{"files", {"preservation.csv"}}, {"ensemble", j["ensemble"]},
                                             {"angles", fb.empty() ? json() : to_json(tuple)}});
        }
        std::cout << (fb.empty() ? "no-feedback baseline" : "fixed angles " + describe(tuple)) << " written to "
                  << out.dir().string() << '\n';
        return 0;
    }

    PreservationOptions opt;
    opt.grid = AngleGrid::uniform(get_angle(cfg, "angle_step"));
    opt.times = times;
    opt.sampler = sampler;
    opt.drive = drive;
    opt.coarse_count = get_count(cfg, "coarse_n");
    opt.workers = workers;
    const PreservationResult r = optimize_preservation(opt);
    json result = to_json(r);
    result["grid"] = opt.grid.values;
    result["search"]["coarse_time_stride"] = opt.coarse_time_stride;
    result["search"]["shortlist_fraction"] = opt.shortlist_fraction;
    result["search"]["per_time_leaders"] = opt.per_time_leaders;
    if (json_out) {
        out.write_json("preservation.json", result);
    } else {
        out.write_csv("preservation.csv", [&](std::ostream& os) { write_preservation_csv(os, r); });
        out.write_csv("best_angles_per_time.csv", [&](std::ostream& os) {
            os << "t,C,a1,b1,a2,b2\n";
            for (std::size_t k = 0; k < r.times.size(); ++k) {
                write_full_precision(os, r.times[k]);
                os << ',';
                write_full_precision(os, r.best_per_time_value[k]);
                for (double x : r.best_per_time[k].as_array()) {
                    os << ',';
                    write_full_precision(os, x);
                }
                os << '\n';
            }
        });
        result.erase("times");
        result.erase("C_feedback");
        result.erase("C_none");
        result.erase("best_angles_per_time");
        result["files"] = {"preservation.csv", "best_angles_per_time.csv"};
        out.write_json("manifest.json", result);
    }
    std::cout << "best angles " << describe(r.best) << " time-averaged C " << r.best_score << '\n';
    return 0;
}

int cmd_stabilize(const json& cfg) {
    const auto drive = parse_grid(get<std::string>(cfg, "alpha_grid"));
    const auto coupling = parse_grid(get<std::string>(cfg, "j_grid"));
    const AngleGrid grid = AngleGrid::uniform(get_angle(cfg, "angle_step"));
    const Output out(cfg);
    const StabilizationResult r = optimize_stabilization(drive, coupling, grid, get<unsigned>(cfg, "workers"));
    json result = to_json(r);
    result["grid"] = grid.values;
    if (get<std::string>(cfg, "format") == "json") {
        out.write_json("stabilization.json", result);
    } else {
        out.write_csv("surface.csv", [&](std::ostream& os) { write_stabilization_csv(os, r); });
        out.write_csv("curve.csv", [&](std::ostream& os) { write_curve_csv(os, r); });
        std::size_t missing = 0;
        for (const auto& c : r.cells) missing += c.missing();
        out.write_json("manifest.json", {{"files", {"surface.csv", "curve.csv"}},
                                         {"drive_grid", r.drive_grid},
                                         {"coupling_grid", r.coupling_grid},
                                         {"grid", grid.values},
                                         {"missing_cells", missing},
                                         {"tolerances", result["tolerances"]}});
    }
    for (const CellResult& c : r.cells)
        if (c.missing()) std::cerr << "missing cell alpha=" << c.drive << " J=" << c.coupling << '\n';
    if (r.cells.size() == 1 && !r.cells[0].missing())
        std::cout << "C_feedback " << *r.cells[0].feedback << " at " << describe(r.cells[0].best) << '\n';
    else
        std::cout << r.cells.size() << " cells written to " << out.dir().string() << '\n';
    return 0;
}

int cmd_sample(const json& cfg) {
    const SamplerConfig sampler{get<std::uint64_t>(cfg, "seed"), get_count(cfg, "n")};
    if (sampler.count < 1) throw ValidationError("--n must be at least 1");
    const Output out(cfg);
    const auto ens = sample_ensemble(sampler, get<unsigned>(cfg, "workers"));
    if (get<std::string>(cfg, "format") == "json") {
        json states = json::array();
        for (const auto& a : ens) states.push_back({{"theta", a.theta}, {"phi", a.phi}});
        out.write_json("ensemble.json", {{"seed", sampler.seed}, {"N", sampler.count}, {"states", states}});
    } else {
        out.write_csv("ensemble.csv", [&](std::ostream& os) { write_ensemble_csv(os, ens); });
    }
    std::cout << ens.size() << " states written to " << out.dir().string() << '\n';
    return 0;
}

struct Check {
    const char* name;
    double tolerance;
    double worst = 0.0;
};

int cmd_oracle_check(const json& cfg) {
    const std::size_t draws = get_count(cfg, "draws");
    if (draws < 1) throw ValidationError("--draws must be at least 1");
    const std::string inject = get<std::string>(cfg, "inject");
    int fault_row = -1, fault_col = -1;
    if (!inject.empty()) {
        const auto parts = split(inject, ',');
        if (parts.size() != 2) throw ValidationError("--inject-fault expects ROW,COL");
        fault_row = coordinate_index(parts[0]);
        fault_col = coordinate_index(parts[1]);
    }
    const Output out(cfg);
    std::mt19937_64 rng(get<std::uint64_t>(cfg, "seed"));
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    constexpr double two_pi = 2.0 * std::numbers::pi;

    std::vector<Check> checks{{"generator_M", 1e-12}, {"generator_w", 1e-12}, {"gamma_invariance", 1e-14},
                              {"semigroup", 1e-10}};
    json failure;
    for (Scenario scenario : {Scenario::Preserve, Scenario::Stabilize}) {
        for (std::size_t d = 0; d < draws && failure.is_null(); ++d) {
            const double drive = uniform(-2.0, 2.0);
            const ModelParams m = scenario == Scenario::Preserve ? ModelParams::preserve(drive)
                                                                 : ModelParams::stabilize(drive, uniform(-2.0, 2.0));
            FeedbackParams p;
            for (auto& q : p.qubit) q = {uniform(0, two_pi), uniform(0, two_pi), uniform(0, two_pi)};
            AffineGenerator g = build_generator(m, p);
            if (fault_row >= 0) g.M(fault_row, fault_col) += 1e-6;
            const AffineGenerator o = oracle_generator(m, p);

            Eigen::Index r = 0, c = 0;
            const double dm = (g.M - o.M).cwiseAbs().maxCoeff(&r, &c);
            Eigen::Index wi = 0;
            const double dw = (g.w - o.w).cwiseAbs().maxCoeff(&wi);
            FeedbackParams q = p;
            q.qubit[0].gamma = uniform(0, two_pi);
            q.qubit[1].gamma = uniform(0, two_pi);
            const AffineGenerator gq = build_generator(m, q);
            const double dg = std::max((gq.M - build_generator(m, p).M).cwiseAbs().maxCoeff(),
                                       (gq.w - build_generator(m, p).w).cwiseAbs().maxCoeff());
            const CoherenceVector v0 = coherence_from_density(pure_state_from_angles(sample_at(d, 0)));
            const double s = uniform(0, 2.5), t = uniform(0, 2.5);
            const double ds = (evolve(g, evolve(g, v0, s), t).v - evolve(g, v0, s + t).v).cwiseAbs().maxCoeff();

            const double dev[] = {dm, dw, dg, ds};
            for (int k = 0; k < 4; ++k) {
                checks[k].worst = std::max(checks[k].worst, dev[k]);
                if (!(dev[k] < checks[k].tolerance) && failure.is_null()) {
                    std::string entry;
                    if (k == 0) entry = std::string("M[") + kCoordNames[r] + "," + kCoordNames[c] + "]";
                    if (k == 1) entry = std::string("w[") + kCoordNames[wi] + "]";
                    failure = {{"check", checks[k].name},
                               {"entry", entry},
                               {"deviation", dev[k]},
                               {"tolerance", checks[k].tolerance},
                               {"draw", d},
                               {"model", to_json(m)},
                               {"feedback", to_json(p)}};
                }
            }
        }
    }
    json report = {{"draws_per_scenario", draws}, {"checks", json::object()}, {"passed", failure.is_null()}};
    for (const auto& c : checks) report["checks"][c.name] = {{"max_deviation", c.worst}, {"tolerance", c.tolerance}};
    if (!failure.is_null()) report["first_failure"] = failure;
    out.write_json("oracle_check.json", report);
    for (const auto& c : checks) std::cout << c.name << " max deviation " << c.worst << " (tol " << c.tolerance << ")\n";
    if (!failure.is_null()) {
        std::cerr << json{{"error", "oracle check failed"}, {"details", failure}}.dump() << '\n';
        return kExitSolver;
    }
    return 0;
}

FeedbackParams feedback_from(const json& cfg) {
    const std::string s = get<std::string>(cfg, "angles");
    return s.empty() ? FeedbackParams::none() : parse_tuple(s).params();
}

int cmd_steady(const json& cfg) {
    const ModelParams m = ModelParams::stabilize(get_angle(cfg, "alpha"), get_angle(cfg, "j"));
    const FeedbackParams p = feedback_from(cfg);
    const Output out(cfg);
    const AffineGenerator g = build_generator(m, p);
    const CoherenceVector v = steady_state(g);
    const DensityMatrix rho = density_from_coherence(v);
    const double c = concurrence(rho).value;
    const double residual = (g.M * v.v - g.w).cwiseAbs().maxCoeff();
    if (get<std::string>(cfg, "format") == "json") {
        out.write_json("steady.json", {{"coherence", v},
                                       {"density", rho},
                                       {"concurrence", c},
                                       {"residual", residual},
                                       {"generator", generator_to_json(g, m, p)}});
    } else {
        out.write_csv("steady.csv", [&](std::ostream& os) {
            for (int k = 0; k < kCoordinates; ++k) os << kCoordNames[k] << ',';
            os << "C,residual\n";
            for (int k = 0; k < kCoordinates; ++k) {
                write_full_precision(os, v[k]);
                os << ',';
            }
            write_full_precision(os, c);
            os << ',';
            write_full_precision(os, residual);
            os << '\n';
        });
        out.write_json("generator.json", generator_to_json(g, m, p));
    }
    std::cout << "steady-state concurrence " << c << " residual " << residual << '\n';
    return 0;
}

CoherenceVector initial_state(const json& cfg) {
    const std::string name = get<std::string>(cfg, "initial");
    Vector4c psi = Vector4c::Zero();
    if (name == "excited") {
        psi[0] = 1.0;
    } else if (name == "ground") {
        psi[3] = 1.0;
    } else if (name == "bell") {
        psi[0] = psi[3] = 1.0 / std::sqrt(2.0);
    } else if (name == "haar") {
        psi = pure_state_vector(sample_at(get<std::uint64_t>(cfg, "seed"), 0));
    } else {
        throw ValidationError("--initial must be excited, ground, bell or haar");
    }
    return {read_coordinates(psi * psi.adjoint())};
}

int cmd_evolve(const json& cfg) {
    const ModelParams m = ModelParams::stabilize(get_angle(cfg, "alpha"), get_angle(cfg, "j"));
    const FeedbackParams p = feedback_from(cfg);
    const auto times = time_grid(get<double>(cfg, "tmax"), get<double>(cfg, "tstep"));
    const CoherenceVector v0 = initial_state(cfg);
    const Output out(cfg);
    const Trajectory tr = trajectory(build_generator(m, p), v0, times);
    std::vector<double> conc;
    for (const auto& v : tr.states) conc.push_back(concurrence(density_from_coherence(v)).value);
    if (get<std::string>(cfg, "format") == "json") {
        json states = json::array();
        for (const auto& v : tr.states) states.push_back(v);
        out.write_json("trajectory.json", {{"times", tr.times}, {"states", states}, {"concurrence", conc},
                                           {"model", to_json(m)}, {"feedback", to_json(p)}});
    } else {
        out.write_csv("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, tr); });
        out.write_csv("concurrence.csv", [&](std::ostream& os) {
            os << "t,C\n";
            for (std::size_t k = 0; k < times.size(); ++k) {
                write_full_precision(os, times[k]);
                os << ',';
                write_full_precision(os, conc[k]);
                os << '\n';
            }
        });
    }
    std::cout << "final concurrence " << conc.back() << '\n';
    return 0;
}

void error_line(const char* kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-qubit Markovian feedback: entanglement preservation and stabilization"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Flags flags;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"preserve", "Grid search for entanglement preservation over Haar-random initial states"},
        {"stabilize", "Steady-state concurrence surfaces over drive and coupling"},
        {"sample", "Export a Haar-random pure-state ensemble"},
        {"oracle-check", "Cross-check the generator against the superoperator oracle"},
        {"steady", "Steady state for one parameter point"},
        {"evolve", "Single trajectory from a chosen initial state"},
    };
    for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        const json cfg = resolve(name, sub, flags);
        if (get<unsigned>(cfg, "workers") < 1) throw ValidationError("--workers must be at least 1");
        if (name == "preserve") return cmd_preserve(cfg);
        if (name == "stabilize") return cmd_stabilize(cfg);
        if (name == "sample") return cmd_sample(cfg);
        if (name == "oracle-check") return cmd_oracle_check(cfg);
        if (name == "steady") return cmd_steady(cfg);
        return cmd_evolve(cfg);
    } catch (const ValidationError& e) {
        error_line("usage", e.what());
        return kExitUsage;
    } catch (const SolverError& e) {
        error_line("solver", e.what());
        return kExitSolver;
    } catch (const std::exception& e) {
        error_line("internal", e.what());
        return kExitSolver;
    }
}

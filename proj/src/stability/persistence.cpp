#include "bpl/persistence.hpp"

#include "bpl/error.hpp"
#include "json.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fftw3.h>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <fstream>
#include <random>
#include <sstream>

#ifndef BPL_VERSION
#define BPL_VERSION "unknown"
#endif
#ifndef BPL_PROVENANCE
#define BPL_PROVENANCE "unknown"
#endif

namespace bpl {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        out.push_back(trim(item));
    return out;
}

double to_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw PreconditionError(fmt::format("config: key '{}' expects a number, got '{}'", key, v));
    }
}

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw PreconditionError(fmt::format("cannot open '{}' for writing", path.string()));
    return os;
}

} // namespace

RunConfig RunConfig::parse(std::istream& in)
{
    RunConfig cfg;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string body = trim(line.substr(0, line.find('#')));
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw PreconditionError(fmt::format("config line {}: expected key = value", number));
        const std::string key = trim(body.substr(0, eq));
        if (key.empty() || cfg.has(key))
            throw PreconditionError(fmt::format("config line {}: empty or repeated key '{}'", number, key));
        cfg.set(key, trim(body.substr(eq + 1)));
    }
    return cfg;
}

RunConfig RunConfig::load(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw PreconditionError(fmt::format("cannot read config '{}'", path.string()));
    return parse(in);
}

void RunConfig::set(const std::string& key, const std::string& value)
{
    entries_[key] = value;
}

std::string RunConfig::text(const std::string& key, const std::string& fallback) const
{
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double RunConfig::number(const std::string& key, double fallback) const
{
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : to_double(key, it->second);
}

long RunConfig::integer(const std::string& key, long fallback) const
{
    const double x = number(key, static_cast<double>(fallback));
    if (x != std::floor(x))
        throw PreconditionError(fmt::format("config: key '{}' expects an integer", key));
    return static_cast<long>(x);
}

std::vector<double> RunConfig::numbers(const std::string& key, std::vector<double> fallback) const
{
    const auto it = entries_.find(key);
    if (it == entries_.end())
        return fallback;
    std::vector<double> out;
    for (const auto& item : split(it->second, ','))
        out.push_back(to_double(key, item));
    return out;
}

std::vector<std::string> RunConfig::unknown_keys() const
{
    std::vector<std::string> out;
    const auto& known = documented_keys();
    for (const auto& [k, v] : entries_)
        if (std::find(known.begin(), known.end(), k) == known.end())
            out.push_back(k);
    return out;
}

std::string RunConfig::canonical() const
{
    std::string out;
    for (const auto& [k, v] : entries_)
        out += k + "=" + v + "\n";
    return out;
}

std::uint64_t RunConfig::hash() const
{
    return fnv1a(canonical());
}

const std::vector<std::string>& documented_keys()
{
    static const std::vector<std::string> keys{
        "lambda",     "alpha",      "beta",         "c",           "nu",          "wave_vectors",   "omega",
        "omega_seed", "N_phi",      "N_x",          "N0",          "s",           "delta_list",     "horizon_factor",
        "tol_newton", "tol_straighten", "tol_kam",  "seed",        "dt",          "sample_every",   "horizon",
        "samples",    "gamma",      "lambda_list",  "corpus_size", "delta",       "out_dir"};
    return keys;
}

ModelParams model_params(const RunConfig& cfg)
{
    ModelParams p;
    p.lambda = cfg.number("lambda", p.lambda);
    p.alpha = cfg.number("alpha", p.alpha);
    p.beta = cfg.number("beta", p.beta);
    p.c = cfg.number("c", p.c);
    p.N_phi = static_cast<int>(cfg.integer("N_phi", p.N_phi));
    p.N_x = static_cast<int>(cfg.integer("N_x", p.N_x));
    if (cfg.has("wave_vectors")) {
        std::vector<Mode2> wv;
        for (const auto& pair : split(cfg.text("wave_vectors", ""), ';')) {
            const auto xy = split(pair, ',');
            if (xy.size() != 2)
                throw PreconditionError("config: wave_vectors expects 'a,b;c,d;...'");
            const double a = to_double("wave_vectors", xy[0]), b = to_double("wave_vectors", xy[1]);
            if (a != std::floor(a) || b != std::floor(b))
                throw PreconditionError("config: wave_vectors must be integer");
            wv.push_back({static_cast<int>(a), static_cast<int>(b)});
        }
        p.map = MomentumMap(wv);
    }
    if (cfg.has("nu") && cfg.integer("nu", 0) != p.nu())
        throw PreconditionError("config: nu disagrees with the number of wave vectors");
    if (cfg.has("omega") && cfg.has("omega_seed"))
        throw PreconditionError("config: give omega or omega_seed, not both");
    if (cfg.has("omega")) {
        p.omega = cfg.numbers("omega", {});
    } else if (cfg.has("omega_seed") || p.nu() != 2) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.integer("omega_seed", 1)));
        std::normal_distribution<double> gauss;
        std::uniform_real_distribution<double> unif;
        const ReductionSchedule sched = ReductionSchedule::from(p);
        constexpr int kMaxDraws = 1000;
        bool found = false;
        for (int draw = 0; draw < kMaxDraws && !found; ++draw) {
            // Uniform in the annulus: uniform direction, radius with density proportional to r^(nu-1).
            std::vector<double> w(p.nu());
            double n = 0.0;
            for (auto& x : w) {
                x = gauss(rng);
                n += x * x;
            }
            const double r = std::pow(1.0 + unif(rng) * (std::pow(2.0, p.nu()) - 1.0), 1.0 / p.nu());
            for (auto& x : w)
                x *= r / std::sqrt(n);
            const ScreeningResult dc = diophantine_screen(w, sched.nonresonance_scale * p.gamma(), p.tau(),
                                                          operator_phase_truncation(p));
            if (dc.min_ratio >= 1.0) {
                p.omega = w;
                found = true;
            }
        }
        if (!found)
            throw PreconditionError("config: no Diophantine omega found from omega_seed");
    }
    p.validate();
    return p;
}

ReductionSchedule reduction_schedule(const RunConfig& cfg, const ModelParams& p)
{
    ReductionSchedule sched = ReductionSchedule::from(p, cfg.number("N0", 4.0));
    sched.straighten_tol = cfg.number("tol_straighten", sched.straighten_tol);
    sched.kam_rel_tol = cfg.number("tol_kam", sched.kam_rel_tol);
    return sched;
}

NewtonOptions newton_options(const RunConfig& cfg)
{
    NewtonOptions opts;
    opts.tol = cfg.number("tol_newton", 1e-12);
    opts.s = cfg.number("s", opts.s);
    return opts;
}

std::uint64_t fnv1a(std::string_view text)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string format_number(double x)
{
    return fmt::format("{:.17g}", x);
}

void write_csv(const fs::path& path, const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows)
{
    std::ofstream os = open_out(path);
    os << fmt::format("{}\n", fmt::join(header, ","));
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw PreconditionError(fmt::format("write_csv: row width {} differs from header width {}", row.size(),
                                                header.size()));
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i)
            line += (i ? "," : "") + format_number(row[i]);
        os << line << "\n";
    }
}

std::map<std::string, std::string> versions()
{
    return {{"bpl", BPL_VERSION},
            {"provenance", BPL_PROVENANCE},
            {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
            {"fmt", fmt::format("{}", FMT_VERSION)},
            {"fftw", fftw_version}};
}

void write_manifest(const fs::path& path, const RunRecord& record)
{
    nlohmann::ordered_json j;
    j["config_hash"] = fmt::format("{:016x}", record.config_hash);
    j["seed"] = record.seed;
    j["command"] = record.command;
    j["versions"] = versions();
    j["wall_clock"] = record.wall_clock;
    std::vector<std::string> paths;
    for (const auto& a : record.artifacts)
        paths.push_back(a.string());
    j["artifact_paths"] = paths;
    open_out(path) << j.dump(2) << "\n";
}

namespace {

void write_profile(const fs::path& path, const TravelingField& v)
{
    std::ofstream os = open_out(path);
    for (int k = 0; k < v.nu(); ++k)
        os << "l" << k + 1 << ",";
    os << "j1,j2,re,im\n";
    for (int l = 0; l < v.lbox().size(); ++l) {
        if (v.at(l) == cplx{})
            continue;
        const auto m = v.lbox().at(l);
        const Mode2 j = v.spatial_mode(l);
        os << fmt::format("{},{},{},{},{}\n", fmt::join(m, ","), j.j1, j.j2, format_number(v.at(l).real()),
                          format_number(v.at(l).imag()));
    }
}

} // namespace

std::vector<fs::path> persist_wave(const fs::path& dir, const WaveSolution& sol)
{
    std::vector<fs::path> out{dir / "wave_v.csv", dir / "wave_g.csv", dir / "wave_z.csv", dir / "wave_newton.csv"};
    write_profile(out[0], sol.v);
    write_profile(out[1], sol.g);
    write_profile(out[2], sol.z);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < sol.history.size(); ++k)
        rows.push_back({static_cast<double>(k), sol.history[k]});
    write_csv(out[3], {"iteration", "residual"}, rows);
    return out;
}

std::vector<fs::path> persist_reduced_form(const fs::path& dir, const ReducedForm& rf)
{
    std::vector<fs::path> out;
    const fs::path eig = dir / "eigenvalues.csv";
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < rf.D.box().size(); ++i) {
        const Mode2 j = rf.D.box().mode2(i);
        if (j.is_zero())
            continue;
        rows.push_back({double(j.j1), double(j.j2), rf.D.at(i).real(), rf.D.at(i).imag()});
    }
    write_csv(eig, {"j1", "j2", "re_mu", "im_mu"}, rows);
    out.push_back(eig);

    const std::vector<std::pair<std::string, const QPOperator*>> stages{
        {"L", &rf.L}, {"B", &rf.B}, {"B_inv", &rf.B_inv}, {"W", &rf.W}, {"W_inv", &rf.W_inv}, {"U", &rf.U}, {"U_inv", &rf.U_inv}};
    for (const auto& [name, op] : stages) {
        const fs::path path = dir / fmt::format("operator_{}.csv", name);
        std::ofstream os = open_out(path);
        dump(*op, os);
        out.push_back(path);
    }

    const ModelParams& p = rf.params;
    const ReductionSchedule& s = rf.schedule;
    nlohmann::ordered_json c;
    c["params_hash"] = fmt::format("{:016x}", params_hash(p));
    c["omega"] = p.omega;
    c["lambda"] = p.lambda;
    c["gamma"] = p.gamma();
    c["nonresonance_scale"] = s.nonresonance_scale;
    c["tau"] = s.tau;
    c["M"] = s.M;
    std::vector<double> Nn;
    for (int n = 0; n <= static_cast<int>(rf.kam_history.size()); ++n)
        Nn.push_back(s.N(n));
    c["index_ranges"] = {{"N_x", p.N_x},
                         {"N_phi", p.N_phi},
                         {"pad", s.pad},
                         {"operator_phase_truncation", operator_phase_truncation(p)},
                         {"kam_N", Nn}};
    c["minimal_divisor"] = rf.min_divisor;
    c["min_melnikov_ratio"] = rf.min_melnikov_ratio;
    c["dc_ratio"] = rf.dc_ratio;
    c["straighten_residual"] = rf.straighten_residual;
    c["b0_norm"] = rf.b0_norm;
    c["defect"] = rf.defect;
    c["W_distance"] = rf.W_distance;
    c["W_inv_distance"] = rf.W_inv_distance;
    c["order_history"] = rf.order_history;
    c["kam_history"] = rf.kam_history;
    nlohmann::ordered_json stages_json = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < rf.stage_names.size(); ++k)
        stages_json.push_back({{"stage", rf.stage_names[k]}, {"norm", rf.stage_norms[k]}});
    c["stages"] = stages_json;
    const fs::path cert = dir / "certificate.json";
    open_out(cert) << c.dump(2) << "\n";
    out.push_back(cert);
    return out;
}

} // namespace bpl

#pragma once

#include "bpl/reduction.hpp"
#include "bpl/wave.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bpl {

// Flat "key = value" text; '#' starts a comment. Keys are unique.
class RunConfig {
public:
    RunConfig() = default;
    static RunConfig parse(std::istream& in);
    static RunConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return entries_.contains(key); }
    std::string text(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key, double fallback) const;
    long integer(const std::string& key, long fallback) const;
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;
    // Keys never read by the accessors; reported so typos do not pass silently.
    std::vector<std::string> unknown_keys() const;

    // Sorted key=value lines, and their FNV-1a digest.
    std::string canonical() const;
    std::uint64_t hash() const;

private:
    std::map<std::string, std::string> entries_;
};

// Every key the accessors below understand.
const std::vector<std::string>& documented_keys();

// lambda, alpha, beta, c, nu, wave_vectors ("1,0;0,1"), omega ("1.1,1.5") or omega_seed, N_phi, N_x.
// With omega_seed, omega is drawn uniformly from 1 <= |omega| <= 2 until it passes the Diophantine screen.
ModelParams model_params(const RunConfig& cfg);
// N0 and the tol_* keys.
ReductionSchedule reduction_schedule(const RunConfig& cfg, const ModelParams& p);
NewtonOptions newton_options(const RunConfig& cfg);

std::uint64_t fnv1a(std::string_view text);

// Full-precision CSV with a header line.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
std::string format_number(double x);

struct RunRecord {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::string command;
    double wall_clock = 0.0;
    std::vector<std::filesystem::path> artifacts;
};
// Version and build provenance of this tool and its numerical libraries.
std::map<std::string, std::string> versions();
void write_manifest(const std::filesystem::path& path, const RunRecord& record);

// Profile coefficients (l..., j1, j2, re, im) of v, g and z.
std::vector<std::filesystem::path> persist_wave(const std::filesystem::path& dir, const WaveSolution& sol);
// Eigenvalues (j1, j2, re mu, im mu), operator dumps of each stage and a JSON certificate.
std::vector<std::filesystem::path> persist_reduced_form(const std::filesystem::path& dir, const ReducedForm& rf);

} // namespace bpl

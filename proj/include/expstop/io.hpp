#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "expstop/hjb.hpp"
#include "expstop/mc.hpp"
#include "expstop/rl.hpp"

namespace expstop {

/// Filesystem failures (unwritable directory, corrupt cache, bad CSV).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal that parses back to the same double.
std::string format_number(double x);

/// 64-bit FNV-1a over the bytes of every parameter, grid and solver setting.
std::uint64_t field_hash(const ModelParams& params, const Grid& grid, const SolverOptions& options);
std::string hex64(std::uint64_t x);

/// v0.csv (p,value), v1.csv (p,b,value), boundary_exit.csv, boundary_entry.csv.
void write_field_csv(const std::filesystem::path& dir, const ValueField& field);

void write_field_cache(const std::filesystem::path& file, const ValueField& field);
/// Empty when the file is absent; throws IoError when it is unreadable or from another grid.
std::optional<ValueField> read_field_cache(const std::filesystem::path& file, const ModelParams& params,
                                           const Grid& grid);

/// Writes `contents` atomically enough for our purposes (temp file + rename).
void write_text(const std::filesystem::path& file, const std::string& contents);
std::string read_text(const std::filesystem::path& file);

struct LedgerRow {
    std::string experiment;
    std::string params_hash;
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
};

/// Inserts rows into the CSV results ledger, replacing rows with the same
/// (experiment, params_hash, n_paths, dt, seed) so reruns leave the file unchanged.
void upsert_ledger(const std::filesystem::path& file, const std::vector<LedgerRow>& rows);

/// CSV with header path_id,step,p.
void write_signal_paths(const std::filesystem::path& file, const SignalPaths& paths);
SignalPaths read_signal_paths(const std::filesystem::path& file, double dt);

std::string net_to_json(const ValueNet& net, const std::string& config_json, std::uint64_t seed);
ValueNet net_from_json(const std::string& text);

}  // namespace expstop

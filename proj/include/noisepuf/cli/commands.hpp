#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "noisepuf/cli/config.hpp"

namespace noisepuf::cli {

struct VerifyRow {
    std::size_t m = 0;
    std::uint64_t trials = 0;
    /// Accepted trials: false accepts in random mode, plain accepts in
    /// identical mode.
    std::uint64_t accepts = 0;
    double rate = 0.0;
    double bound = 0.0;
    double ci_half_width = 0.0;
    bool within = false;
};

/// One row per m in [m_min, m]. Random mode verifies against a differing
/// local string (bound 2^-m); identical mode against the same string
/// (bound 1, every trial must accept).
std::vector<VerifyRow> verify_sweep(const ExperimentConfig& config);

int cmd_exchange(const ExperimentConfig& config, std::ostream& out);
int cmd_verify(const ExperimentConfig& config, std::ostream& out);
int cmd_puf(const ExperimentConfig& config, std::ostream& out);
int cmd_attack(const ExperimentConfig& config, std::ostream& out);

/// Validates and dispatches on config.subcommand.
int run_command(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace noisepuf::cli

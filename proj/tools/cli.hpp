#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbfw/barriers.hpp"
#include "cbfw/certify.hpp"

namespace cbfw::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitIo = 1,
    kExitUsage = 2,
    kExitViolations = 3,
};

/// Runs one command line (args[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// A malformed barrier spec; line is 1-based.
class SpecError : public std::runtime_error {
public:
    SpecError(std::size_t line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line)
    {
    }
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct SpecEntry {
    std::size_t line = 0;
    Barrier barrier;
};

/**
 * One barrier per line, '#' starts a comment:
 *
 *   circle center=5,5 radius=0.65
 *   wall normal=1,0 offset=0
 *   viability-wall normal=1,0 offset=0 u_max=5
 *   velocity v_max=2
 *   segment link=0 center=7,3 radius=0.65
 */
std::vector<SpecEntry> parse_barrier_spec(const std::string& text, const SystemModel& model);

/// "min:max:count,min:max:count,..."; one axis per state dimension.
DomainGrid parse_grid(const std::string& text);

}  // namespace cbfw::cli

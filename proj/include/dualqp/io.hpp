#pragma once

// Text formats for problems and delay models, plus CSV helpers.
//
// Problem file (format 1), whitespace separated, '#' starts a comment:
//
//   dualqp-problem 1
//   N <blocks> m <constraints> q <max delay>
//   alpha <step> seed <seed>
//   block <i> n <n_i>
//   Q        n_i rows of n_i numbers
//   c        n_i numbers
//   A        m rows of n_i numbers
//   ...      (one block section per block)
//   b        m numbers
//   [delay section, see below, each line prefixed by nothing]
//   end
//
// Delay file (format 1):
//
//   dualqp-delay 1
//   q <q> N <nodes>
//   node <i> <q probabilities>     one line per node, or
//   uniform <q probabilities>      all nodes share one distribution, or
//   aggregate <q probabilities>    distribution of the oldest age
//   end
//
// Numbers are written in shortest round-trip form, so write -> read -> write
// is byte-identical.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "dualqp/qp.hpp"
#include "dualqp/switched.hpp"

namespace dualqp {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemFile {
  SeparableQP qp;
  Index q = 1;
  std::uint64_t seed = 0;
  std::optional<DelayModel> delay;
};

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

std::string write_problem(const ProblemFile& file);
ProblemFile read_problem(std::string_view text);

std::string write_delay(const DelayModel& dm);
/// `nodes` fills in N for files that only give `uniform` or `aggregate`.
DelayModel read_delay(std::string_view text, std::optional<Index> nodes = std::nullopt);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

inline constexpr std::string_view kToolVersion = "0.1.0";

/// "# dualqp <version>\n# key=value ..." header lines for CSV outputs.
std::string csv_metadata(std::string_view command, std::uint64_t seed, std::string_view problem_hash);

}  // namespace dualqp
